#include "mccov/simulate.hpp"

#include <algorithm>

#include "mccov/rng.hpp"

namespace mccov {

int design_min_birth_year(const SimDesign& design) {
  if (design.surveys.empty()) throw StructuralError("sim design: no surveys");
  int earliest = design.surveys.front().year;
  for (const auto& s : design.surveys) earliest = std::min(earliest, s.year - s.max_age);
  return earliest;
}

std::vector<SurveyRecord> simulate_individuals(const SimDesign& design,
                                               const HazardField& hazards, const Grid& grid) {
  const int ni = grid.n_regions();
  std::vector<SurveyRecord> out;
  std::uint64_t person = 0;
  for (const auto& survey : design.surveys) {
    if (survey.year > grid.year_max || survey.year - survey.max_age < grid.year_start)
      throw StructuralError("sim design: survey '" + survey.id + "' falls off the grid");
    if (survey.max_age > grid.age_max)
      throw StructuralError("sim design: survey max_age beyond grid");
    for (int k = 0; k < survey.sample_size; ++k, ++person) {
      Rng rng = Rng::stream(design.seed, person);
      SurveyRecord r;
      r.survey_id = survey.id;
      const int region = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(ni));
      r.region = grid.regions[region];
      const int age_at_survey =
          static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(survey.max_age + 1));
      r.birth_year = survey.year - age_at_survey;
      r.weight = rng.lognormal(0.0, survey.weight_sigma);

      r.outcome = SurveyOutcome::RightCensored;
      r.event_age = age_at_survey;
      const int b = grid.year_index(r.birth_year);
      for (int a = 0; a < age_at_survey; ++a) {
        const double u = rng.uniform();
        const double lam_tmic = hazards.tmic.at(region, a, b + a);
        if (u < lam_tmic) {
          r.outcome = SurveyOutcome::Tmic;
          r.event_age = a;
          break;
        }
        const double v = rng.uniform();
        if (v < hazards.mmc_raw.at(region, a, b + a)) {
          r.outcome = SurveyOutcome::MmcNt;
          r.event_age = a;
          break;
        }
      }
      const bool event =
          r.outcome == SurveyOutcome::Tmic || r.outcome == SurveyOutcome::MmcNt;
      if (event && survey.left_censor_fraction > 0.0 &&
          rng.uniform() < survey.left_censor_fraction) {
        r.outcome = SurveyOutcome::LeftCensored;
        r.event_age = age_at_survey;  // age at event erased
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ProgrammeCount> simulate_programme(const SimDesign& design,
                                               const HazardField& hazards,
                                               const CoverageField& coverage,
                                               const LexisField& population, const Grid& grid) {
  std::vector<ProgrammeCount> rows;
  if (design.programme.years.empty()) return rows;
  std::vector<ProgrammeCount> bands;
  for (int year : design.programme.years)
    for (const auto& region : grid.regions)
      bands.push_back({region, year, design.programme.age_lo, design.programme.age_hi, 0.0});
  const auto mu = expected_programme_counts(coverage, hazards, population, bands, grid);
  const std::uint64_t stream = 1ULL << 48;  // clear of individual streams
  for (std::size_t k = 0; k < bands.size(); ++k) {
    Rng rng = Rng::stream(design.seed, stream + k);
    bands[k].count = static_cast<double>(rng.poisson(mu[k]));
    rows.push_back(bands[k]);
  }
  return rows;
}

}  // namespace mccov
