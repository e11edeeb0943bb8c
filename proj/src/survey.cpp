#include "mccov/survey.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mccov/csv.hpp"

namespace mccov {

std::string outcome_name(SurveyOutcome o) {
  switch (o) {
    case SurveyOutcome::Tmic: return "TMIC";
    case SurveyOutcome::MmcNt: return "MMC_NT";
    case SurveyOutcome::RightCensored: return "RIGHT_CENSORED";
    case SurveyOutcome::LeftCensored: return "LEFT_CENSORED";
  }
  return "?";
}

SurveyOutcome parse_outcome(const std::string& s) {
  if (s == "TMIC") return SurveyOutcome::Tmic;
  if (s == "MMC_NT") return SurveyOutcome::MmcNt;
  if (s == "RIGHT_CENSORED") return SurveyOutcome::RightCensored;
  if (s == "LEFT_CENSORED") return SurveyOutcome::LeftCensored;
  throw ValidationError("unknown outcome '" + s + "'");
}

double EventCountCube::total() const {
  double s = 0.0;
  for (const auto& f : counts)
    for (double v : f.values) s += v;
  return s;
}

double EventCountCube::total(SurveyOutcome l) const {
  double s = 0.0;
  for (double v : of(l).values) s += v;
  return s;
}

EventCountCube make_cube(const Grid& grid) {
  EventCountCube cube;
  for (auto& f : cube.counts)
    f = LexisField(grid.n_regions(), grid.n_ages(), grid.n_years());
  return cube;
}

double kish_effective_sample_size(const std::vector<double>& weights) {
  if (weights.empty()) throw DomainError("kish: empty weight vector");
  double sum = 0.0, sumsq = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw DomainError("kish: weights must be positive");
    sum += w;
    sumsq += w * w;
  }
  return sum * sum / sumsq;
}

namespace {

// Sum in ascending value order: bit-identical under input permutation.
double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

std::vector<double> normalize_weights(const std::vector<SurveyRecord>& records) {
  std::map<std::string, std::vector<double>> by_survey;
  std::map<std::pair<std::string, std::string>, std::vector<double>> by_survey_region;
  for (const auto& r : records) {
    if (!(r.weight > 0.0)) throw DomainError("normalize_weights: weights must be positive");
    by_survey[r.survey_id].push_back(r.weight);
    by_survey_region[{r.survey_id, r.region}].push_back(r.weight);
  }
  std::map<std::string, double> survey_factor;
  for (const auto& [sid, ws] : by_survey) {
    std::vector<double> sq(ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) sq[i] = ws[i] * ws[i];
    const double sum = ordered_sum(ws);
    const double m_eff = sum * sum / ordered_sum(sq);
    survey_factor[sid] = static_cast<double>(ws.size()) / m_eff;
  }
  std::map<std::pair<std::string, std::string>, double> group_mean;
  for (const auto& [key, ws] : by_survey_region)
    group_mean[key] = ordered_sum(ws) / static_cast<double>(ws.size());

  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records)
    out.push_back(r.weight / group_mean.at({r.survey_id, r.region}) *
                  survey_factor.at(r.survey_id));
  return out;
}

namespace {

struct CellRef {
  int region = -1;
  int age = -1;
  int time = -1;
};

// Cube cell for a record, or an explanation of why it has none.
CellRef locate(const SurveyRecord& r, const Grid& grid, std::string* problem) {
  CellRef c;
  c.region = grid.region_index(r.region);
  if (c.region < 0) {
    *problem = "unknown region '" + r.region + "'";
    return c;
  }
  const bool event = r.outcome == SurveyOutcome::Tmic || r.outcome == SurveyOutcome::MmcNt;
  if (r.event_age < 0) {
    *problem = "negative event_age";
    return c;
  }
  if (event && r.event_age > kTerminalAge) {
    *problem = "event_age " + std::to_string(r.event_age) + " above terminal age " +
               std::to_string(kTerminalAge);
    return c;
  }
  c.age = event ? r.event_age : std::min(r.event_age, kTerminalAge);
  if (c.age > grid.age_max) {
    *problem = "age " + std::to_string(c.age) + " beyond grid age_max " +
               std::to_string(grid.age_max);
    return c;
  }
  const int year = r.birth_year + c.age;
  if (year > grid.year_max) {
    *problem = "year " + std::to_string(year) + " beyond grid year_max " +
               std::to_string(grid.year_max);
    return c;
  }
  if (year < grid.year_start) {
    *problem = "year " + std::to_string(year) + " before extended grid start " +
               std::to_string(grid.year_start);
    return c;
  }
  c.time = grid.year_index(year);
  return c;
}

}  // namespace

EventCountCube expand_to_cube(const std::vector<SurveyRecord>& records, const Grid& grid) {
  const auto weights = normalize_weights(records);
  EventCountCube cube = make_cube(grid);

  // (cell, weight) pairs, summed per cell in sorted order so the result
  // is bit-identical under record permutation and chunked reduction.
  std::vector<std::pair<std::size_t, double>> contributions;
  contributions.reserve(records.size());
  std::vector<std::string> problems;
  const std::size_t field_cells = cube.counts[0].size();
  for (std::size_t k = 0; k < records.size(); ++k) {
    std::string problem;
    CellRef c = locate(records[k], grid, &problem);
    if (!problem.empty()) {
      problems.push_back("record " + std::to_string(k + 1) + ": " + problem);
      continue;
    }
    const std::size_t cell =
        static_cast<std::size_t>(records[k].outcome) * field_cells +
        cube.counts[0].index(c.region, c.age, c.time);
    contributions.emplace_back(cell, weights[k]);
  }
  if (!problems.empty()) throw ValidationError("survey records do not fit the grid", problems);

  std::sort(contributions.begin(), contributions.end());
  for (std::size_t k = 0; k < contributions.size();) {
    const std::size_t cell = contributions[k].first;
    double sum = 0.0;
    while (k < contributions.size() && contributions[k].first == cell) {
      sum += contributions[k].second;
      ++k;
    }
    cube.counts[cell / field_cells].values[cell % field_cells] += sum;
  }
  return cube;
}

IngestResult ingest_surveys(const std::vector<SurveyRecord>& records, const Grid& grid,
                            Diagnostics* diag) {
  grid.validate();
  std::vector<std::string> problems;
  std::vector<SurveyRecord> retained;
  retained.reserve(records.size());
  std::size_t dropped = 0;
  const int earliest_cohort = grid.year_min - grid.age_max;
  int min_birth = grid.year_min;

  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    const std::string where = "record " + std::to_string(k + 1);
    if (!(r.weight > 0.0)) {
      problems.push_back(where + ": weight must be positive");
      continue;
    }
    if (r.event_age < 0) {
      problems.push_back(where + ": negative event_age");
      continue;
    }
    const bool event = r.outcome == SurveyOutcome::Tmic || r.outcome == SurveyOutcome::MmcNt;
    if (event && r.event_age > kTerminalAge) {
      problems.push_back(where + ": event_age above terminal age " +
                         std::to_string(kTerminalAge));
      continue;
    }
    const int cell_age = event ? r.event_age : std::min(r.event_age, kTerminalAge);
    if (cell_age > grid.age_max) {
      problems.push_back(where + ": age " + std::to_string(cell_age) +
                         " beyond grid age_max " + std::to_string(grid.age_max));
      continue;
    }
    if (grid.region_index(r.region) < 0) {
      problems.push_back(where + ": unknown region '" + r.region + "'");
      continue;
    }
    if (r.birth_year + cell_age > grid.year_max) {
      problems.push_back(where + ": year " + std::to_string(r.birth_year + cell_age) +
                         " beyond grid year_max");
      continue;
    }
    if (r.birth_year < earliest_cohort) {
      ++dropped;
      continue;
    }
    min_birth = std::min(min_birth, r.birth_year);
    retained.push_back(r);
  }
  if (!problems.empty()) throw ValidationError("survey validation failed", problems);

  IngestResult res;
  res.extended_grid = grid.extended_back_to(min_birth);
  res.dropped_cohorts = dropped;
  if (diag) {
    diag->dropped_cohort_records += dropped;
    if (dropped > 0)
      diag->warn("dropped " + std::to_string(dropped) + " record(s) from cohorts born before " +
                 std::to_string(earliest_cohort));
  }
  if (retained.empty()) {
    res.cube = make_cube(res.extended_grid);
    return res;
  }
  res.cube = expand_to_cube(retained, res.extended_grid);
  res.retained = std::move(retained);
  return res;
}

std::vector<SurveyRecord> load_survey_csv(const std::string& path) {
  auto t = csv::read_file(path);
  csv::require_header(t, {"survey_id", "region", "birth_year", "outcome", "event_age", "weight"},
                      path);
  std::vector<SurveyRecord> out;
  out.reserve(t.rows.size());
  std::vector<std::string> problems;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 2);
    if (row.size() != 6) {
      problems.push_back(where + ": expected 6 fields");
      continue;
    }
    try {
      SurveyRecord rec;
      rec.survey_id = row[0];
      rec.region = row[1];
      rec.birth_year = static_cast<int>(csv::parse_long(row[2], "birth_year"));
      rec.outcome = parse_outcome(row[3]);
      rec.event_age = static_cast<int>(csv::parse_long(row[4], "event_age"));
      rec.weight = csv::parse_double(row[5], "weight");
      out.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      problems.push_back(where + ": " + e.what());
    }
  }
  if (!problems.empty()) throw ValidationError(path + ": survey parse failed", problems);
  return out;
}

void write_survey_csv(const std::string& path, const std::vector<SurveyRecord>& records) {
  std::ofstream out(path);
  if (!out) throw StructuralError("cannot write file: " + path);
  out << "survey_id,region,birth_year,outcome,event_age,weight\n";
  for (const auto& r : records)
    out << r.survey_id << ',' << r.region << ',' << r.birth_year << ','
        << outcome_name(r.outcome) << ',' << r.event_age << ','
        << csv::format_double(r.weight) << '\n';
  if (!out) throw StructuralError("write failed: " + path);
}

}  // namespace mccov
