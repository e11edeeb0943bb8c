// Shared recovery-test scaffolding: a deterministic "truth" parameter
// vector with every model block active, synthetic survey and programme
// data generated from it, and a fit-ready posterior spec.
#pragma once

#include <cmath>

#include "mccov/inference.hpp"
#include "mccov/rng.hpp"
#include "mccov/simulate.hpp"

namespace simfix {

using namespace mccov;

struct RecoveryConfig {
  int n_regions = 4;
  int age_max = 35;
  int year_min = 2012;
  int year_max = 2019;
  std::vector<int> survey_years = {2015, 2017};
  int survey_size = 20000;  // per survey
  double weight_sigma = 0.3;
  double left_censor_fraction = 0.08;
  std::vector<int> programme_years = {2012, 2013, 2014, 2015, 2016, 2017, 2018, 2019};
  int programme_age_lo = 10;
  double population_per_cell = 1500.0;
  int ramp_start_year = 2010;  // VMMC scale-up begins here
  double interaction_scale = 0.25;
  std::uint64_t seed = 20240601;
};

struct RecoverySetup {
  // truth side
  ModelStructure truth_structure;
  ShareMap truth_shares;
  ParameterLayout truth_layout;
  Eigen::VectorXd truth;
  HazardField truth_hazards;
  CoverageField truth_coverage;
  LexisField truth_population;
  // generated data
  SimDesign design;
  std::vector<SurveyRecord> records;
  std::vector<ProgrammeCount> programme;
  // fit side (grid extension recomputed from the data)
  PosteriorSpec spec;
  Grid report_grid;
};

inline LexisField constant_population(const Grid& grid, double value) {
  LexisField pop(grid.n_regions(), grid.n_ages(), grid.n_years(), 0.0);
  for (int i = 0; i < grid.n_regions(); ++i)
    for (int a = 0; a < grid.n_ages(); ++a)
      for (int year = grid.year_min; year <= grid.year_max; ++year)
        pop.at(i, a, grid.year_index(year)) = value;
  return pop;
}

inline Eigen::VectorXd make_truth(const ParameterLayout& L, const ModelStructure& st,
                                  const RecoveryConfig& cfg) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(L.dim);
  const int ni = st.n_regions(), nj = st.n_basis(), nt = st.n_years();
  const auto& basis = st.basis;
  auto center = [&](int j) {
    return (j + 0.5 * (1.0 - basis.degree)) * basis.knot_spacing;
  };

  x[L.offset(ParamBlock::AlphaTmic)] = -4.2;
  x[L.offset(ParamBlock::AlphaMmcPaed)] = -5.6;
  x[L.offset(ParamBlock::AlphaMmcAdult)] = -5.2;

  for (int i = 0; i < ni; ++i) {
    const double t = ni > 1 ? static_cast<double>(i) / (ni - 1) : 0.5;
    x[L.offset(ParamBlock::PsiTmic) + i] = 0.9 * std::cos(3.14159265 * t) ;
    x[L.offset(ParamBlock::PsiMmcPaed) + i] = 0.3 * std::sin(3.14159265 * t);
    x[L.offset(ParamBlock::PsiMmcAdult) + i] = (i % 2 ? 0.35 : -0.35);
  }
  for (int j = 0; j < nj; ++j) {
    const double c = center(j);
    x[L.offset(ParamBlock::PhiTmicW) + j] = 2.4 * std::exp(-0.5 * std::pow((c - 16.0) / 5.0, 2));
    x[L.offset(ParamBlock::PhiMmcPaedW) + j] = 1.8 * std::exp(-0.5 * std::pow(c / 3.0, 2));
    x[L.offset(ParamBlock::PhiMmcAdultW) + j] =
        1.6 * std::exp(-0.5 * std::pow((c - 20.0) / 7.0, 2));
  }
  auto ramp01 = [&](int year) {
    if (year <= cfg.ramp_start_year) return 0.0;
    return std::min((year - cfg.ramp_start_year) / 9.0, 1.0);
  };
  for (int t = 0; t < nt; ++t) {
    const int year = st.grid.year_of(t);
    x[L.offset(ParamBlock::Theta) + t] =
        year <= cfg.ramp_start_year ? 0.0 : std::min(0.30 * (year - cfg.ramp_start_year), 2.7);
  }
  // smooth, structured interactions: each block carries enough signal
  // for its variance to have an interior joint-mode optimum
  const double s_int = cfg.interaction_scale;
  for (int i = 0; i < ni; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    for (int j = 0; j < nj; ++j) {
      const double c = center(j);
      x[L.offset(ParamBlock::GammaTmicW) + j * ni + i] =
          2.0 * s_int * sign * std::exp(-0.5 * std::pow((c - 16.0) / 5.0, 2));
      x[L.offset(ParamBlock::GammaMmcPaedW) + j * ni + i] =
          1.5 * s_int * sign * std::exp(-0.5 * std::pow(c / 3.0, 2));
      x[L.offset(ParamBlock::GammaMmcAdultW) + j * ni + i] =
          2.0 * s_int * -sign * std::exp(-0.5 * std::pow((c - 20.0) / 7.0, 2));
    }
  }
  for (int j = 0; j < nj; ++j) {
    const double c = center(j);
    // age profile tilts with the programme era: younger ages first,
    // older ages later, a strongly non-separable pattern
    for (int t = 0; t < nt; ++t)
      x[L.offset(ParamBlock::DeltaW) + j * nt + t] =
          3.2 * s_int * ramp01(st.grid.year_of(t)) *
          std::cos(3.14159265 * (c - 10.0) / 18.0);
  }
  for (int i = 0; i < ni; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    for (int t = 0; t < nt; ++t)
      x[L.offset(ParamBlock::Zeta) + i * nt + t] =
          2.0 * s_int * sign * ramp01(st.grid.year_of(t));
  }

  for (int k = 0; k < kNumSigmas; ++k)
    x[L.offset(ParamBlock::LogSigma) + k] = std::log(0.5);
  for (int k = 0; k < kNumRhos; ++k) x[L.offset(ParamBlock::LogitRho) + k] = 3.0;
  return x;
}

inline RecoverySetup make_recovery_setup(const RecoveryConfig& cfg,
                                         bool with_programme = true) {
  RecoverySetup out;
  std::vector<std::string> names;
  for (int i = 0; i < cfg.n_regions; ++i) names.push_back("r" + std::to_string(i + 1));
  out.report_grid = make_grid(names, cfg.age_max, cfg.year_min, cfg.year_max);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < cfg.n_regions; ++i) edges.emplace_back(i, i + 1);
  auto graph = make_adjacency(cfg.n_regions, edges);

  out.design.seed = cfg.seed;
  for (std::size_t k = 0; k < cfg.survey_years.size(); ++k)
    out.design.surveys.push_back({"s" + std::to_string(k + 1), cfg.survey_years[k],
                                  cfg.survey_size, cfg.age_max, cfg.weight_sigma,
                                  cfg.left_censor_fraction});
  out.design.programme.years = with_programme ? cfg.programme_years : std::vector<int>{};
  out.design.programme.age_lo = cfg.programme_age_lo;
  out.design.programme.age_hi = cfg.age_max;

  const Grid truth_grid =
      out.report_grid.extended_back_to(design_min_birth_year(out.design));
  out.truth_structure = make_model_structure(truth_grid, graph);
  out.truth_shares = resolve_shares({}, truth_grid);
  out.truth_layout = make_layout(out.truth_structure, out.truth_shares);
  out.truth = make_truth(out.truth_layout, out.truth_structure, cfg);
  out.truth_hazards =
      compute_hazards(out.truth, out.truth_layout, out.truth_structure, out.truth_shares);
  out.truth_coverage = compute_survivor_and_cif(out.truth_hazards, truth_grid);
  out.truth_population = constant_population(truth_grid, cfg.population_per_cell);

  out.records = simulate_individuals(out.design, out.truth_hazards, truth_grid);
  out.programme = simulate_programme(out.design, out.truth_hazards, out.truth_coverage,
                                     out.truth_population, truth_grid);

  auto ingest = ingest_surveys(out.records, out.report_grid);
  auto fit_structure = make_model_structure(ingest.extended_grid, graph);
  auto fit_shares = resolve_shares({}, ingest.extended_grid);
  out.spec = make_posterior_spec(
      fit_structure, fit_shares, std::move(ingest.cube), out.programme,
      constant_population(ingest.extended_grid, cfg.population_per_cell));
  return out;
}

// Population-weighted true MC coverage over an age band for one region
// and year, from the truth coverage field.
inline double true_mc_coverage(const RecoverySetup& s, int region, int year, int age_lo,
                               int age_hi, CircType type = CircType::Mc) {
  const auto& grid = s.truth_structure.grid;
  const int t = grid.year_index(year);
  double num = 0.0, den = 0.0;
  for (int a = age_lo; a <= age_hi; ++a) {
    const double p = s.truth_population.at(region, a, t);
    num += p * s.truth_coverage.cif_of(type, region, a, t);
    den += p;
  }
  return num / den;
}

}  // namespace simfix
