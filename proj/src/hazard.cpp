#include "mccov/hazard.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "mccov/csv.hpp"

namespace mccov {

std::string circ_type_name(CircType k) {
  switch (k) {
    case CircType::MmcNt: return "MMC-nT";
    case CircType::MmcT: return "MMC-T";
    case CircType::Tmc: return "TMC";
    case CircType::Mmc: return "MMC";
    case CircType::Tmic: return "TMIC";
    case CircType::Mc: return "MC";
  }
  return "?";
}

CircType parse_circ_type(const std::string& s) {
  if (s == "MMC-nT" || s == "MMC_NT") return CircType::MmcNt;
  if (s == "MMC-T" || s == "MMC_T") return CircType::MmcT;
  if (s == "TMC") return CircType::Tmc;
  if (s == "MMC") return CircType::Mmc;
  if (s == "TMIC") return CircType::Tmic;
  if (s == "MC") return CircType::Mc;
  throw ValidationError("unknown circumcision type '" + s + "'");
}

ShareMap resolve_shares(const std::vector<ShareEntry>& entries, const Grid& grid) {
  ShareMap map;
  map.n_regions = grid.n_regions();
  map.n_years = grid.n_years();
  map.cells.assign(static_cast<std::size_t>(map.n_regions) * map.n_years, {});

  std::vector<std::string> problems;
  std::set<std::pair<int, int>> covered;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto& entry = entries[e];
    const std::string where = "share entry " + std::to_string(e + 1);
    if (entry.regions.empty()) {
      problems.push_back(where + ": empty region set");
      continue;
    }
    if (entry.year_to < entry.year_from) {
      problems.push_back(where + ": year_to before year_from");
      continue;
    }
    if (entry.mode == ShareEntry::Mode::FixedValue &&
        (entry.value < 0.0 || entry.value > 1.0)) {
      problems.push_back(where + ": fixed value outside [0,1]");
      continue;
    }
    if (entry.mode == ShareEntry::Mode::LogitNormal && !(entry.sigma > 0.0)) {
      problems.push_back(where + ": logit_normal sigma must be positive");
      continue;
    }
    for (const auto& rid : entry.regions) {
      const int i = grid.region_index(rid);
      if (i < 0) {
        problems.push_back(where + ": unknown region '" + rid + "'");
        continue;
      }
      for (int year = entry.year_from; year <= entry.year_to; ++year) {
        if (!grid.year_on_grid(year)) continue;  // outside years default to zero anyway
        const int t = grid.year_index(year);
        if (!covered.insert({i, t}).second) {
          problems.push_back(where + ": region '" + rid + "' year " + std::to_string(year) +
                             " covered by more than one entry");
          continue;
        }
        auto& cell = map.cells[static_cast<std::size_t>(i) * map.n_years + t];
        cell.mode = entry.mode;
        if (entry.mode == ShareEntry::Mode::FixedValue) cell.value = entry.value;
        if (entry.mode == ShareEntry::Mode::LogitNormal) {
          cell.free_index = static_cast<int>(map.free_mu.size());
          map.free_mu.push_back(entry.mu);
          map.free_sigma.push_back(entry.sigma);
        }
      }
    }
  }
  if (!problems.empty()) throw ValidationError("share config validation failed", problems);
  return map;
}

std::string ParameterLayout::block_of_index(int flat_index) const {
  for (const auto& b : blocks)
    if (flat_index >= b.offset && flat_index < b.offset + b.size) return b.name;
  return "?";
}

std::uint64_t ParameterLayout::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& b : blocks)
    mix(b.name + ":" + std::to_string(b.offset) + ":" + std::to_string(b.size) + ";");
  mix("dims:" + std::to_string(n_regions) + "," + std::to_string(n_ages) + "," +
      std::to_string(n_years) + "," + std::to_string(n_basis));
  return h;
}

ParameterLayout make_layout(const ModelStructure& structure, const ShareMap& shares) {
  const int ni = structure.n_regions();
  const int nt = structure.n_years();
  const int nj = structure.n_basis();
  if (shares.n_regions != ni || shares.n_years != nt)
    throw StructuralError("layout: share map does not match the grid");

  ParameterLayout L;
  L.n_regions = ni;
  L.n_ages = structure.n_ages();
  L.n_years = nt;
  L.n_basis = nj;
  L.n_free_shares = shares.n_free();

  const std::array<std::pair<std::string, int>, kNumParamBlocks> spec = {{
      {"alpha_tmic", 1},
      {"alpha_mmc_paed", 1},
      {"alpha_mmc_adult", 1},
      {"psi_tmic", ni},
      {"psi_mmc_paed", ni},
      {"psi_mmc_adult", ni},
      {"phi_tmic_w", nj},
      {"phi_mmc_paed_w", nj},
      {"phi_mmc_adult_w", nj},
      {"theta", nt},
      {"gamma_tmic_w", nj * ni},
      {"gamma_mmc_paed_w", nj * ni},
      {"gamma_mmc_adult_w", nj * ni},
      {"delta_w", nj * nt},
      {"zeta", ni * nt},
      {"log_sigma", kNumSigmas},
      {"logit_rho", kNumRhos},
      {"logit_p", shares.n_free()},
  }};
  int offset = 0;
  for (int b = 0; b < kNumParamBlocks; ++b) {
    L.blocks[b] = {spec[b].first, offset, spec[b].second};
    offset += spec[b].second;
  }
  L.dim = offset;
  return L;
}

// Clamped just inside (-1,1) so extreme optimizer probes keep the AR1
// precision well defined; the transform is flat there anyway.
double logit_rho_to_rho(double x) {
  const double rho = 2.0 / (1.0 + std::exp(-x)) - 1.0;
  return std::min(std::max(rho, -1.0 + 1e-10), 1.0 - 1e-10);
}

double CoverageField::incidence_of(CircType k, int i, int a, int t) const {
  switch (k) {
    case CircType::MmcNt:
    case CircType::MmcT:
    case CircType::Tmc:
      return incidence[static_cast<int>(k)].at(i, a, t);
    case CircType::Mmc:
      return incidence[0].at(i, a, t) + incidence[1].at(i, a, t);
    case CircType::Tmic:
      return incidence[1].at(i, a, t) + incidence[2].at(i, a, t);
    case CircType::Mc:
      return incidence[0].at(i, a, t) + incidence[1].at(i, a, t) + incidence[2].at(i, a, t);
  }
  return 0.0;
}

double CoverageField::cif_of(CircType k, int i, int a, int t) const {
  switch (k) {
    case CircType::MmcNt:
    case CircType::MmcT:
    case CircType::Tmc:
      return cif[static_cast<int>(k)].at(i, a, t);
    case CircType::Mmc:
      return cif[0].at(i, a, t) + cif[1].at(i, a, t);
    case CircType::Tmic:
      return cif[1].at(i, a, t) + cif[2].at(i, a, t);
    case CircType::Mc:
      return cif[0].at(i, a, t) + cif[1].at(i, a, t) + cif[2].at(i, a, t);
  }
  return 0.0;
}

namespace {

double invlogit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

}  // namespace

HazardField compute_hazards(const Eigen::VectorXd& params, const ParameterLayout& layout,
                            const ModelStructure& structure, const ShareMap& shares) {
  if (params.size() != layout.dim)
    throw StructuralError("compute_hazards: parameter vector length " +
                          std::to_string(params.size()) + " does not match layout dim " +
                          std::to_string(layout.dim));
  for (int k = 0; k < params.size(); ++k)
    if (!std::isfinite(params[k]))
      throw NumericalError("compute_hazards: non-finite parameter in block " +
                           layout.block_of_index(k));

  const int ni = structure.n_regions();
  const int na = structure.n_ages();
  const int nt = structure.n_years();
  const int nj = structure.n_basis();
  const int cutoff = structure.grid.paediatric_cutoff;
  const Eigen::MatrixXd& W = structure.basis.design;

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  auto row_map = [&](ParamBlock b, int rows, int cols) {
    return Eigen::Map<const RowMat>(params.data() + layout.offset(b), rows, cols);
  };

  const double a_tmic = params[layout.offset(ParamBlock::AlphaTmic)];
  const double a_paed = params[layout.offset(ParamBlock::AlphaMmcPaed)];
  const double a_adult = params[layout.offset(ParamBlock::AlphaMmcAdult)];
  const auto psi_tmic = layout.segment(params, ParamBlock::PsiTmic);
  const auto psi_paed = layout.segment(params, ParamBlock::PsiMmcPaed);
  const auto psi_adult = layout.segment(params, ParamBlock::PsiMmcAdult);
  const Eigen::VectorXd phi_tmic = W * layout.segment(params, ParamBlock::PhiTmicW);
  const Eigen::VectorXd phi_paed = W * layout.segment(params, ParamBlock::PhiMmcPaedW);
  const Eigen::VectorXd phi_adult = W * layout.segment(params, ParamBlock::PhiMmcAdultW);
  const auto theta = layout.segment(params, ParamBlock::Theta);
  const Eigen::MatrixXd gamma_tmic = W * row_map(ParamBlock::GammaTmicW, nj, ni);
  const Eigen::MatrixXd gamma_paed = W * row_map(ParamBlock::GammaMmcPaedW, nj, ni);
  const Eigen::MatrixXd gamma_adult = W * row_map(ParamBlock::GammaMmcAdultW, nj, ni);
  const Eigen::MatrixXd delta = W * row_map(ParamBlock::DeltaW, nj, nt);
  const auto zeta = row_map(ParamBlock::Zeta, ni, nt);
  const auto logit_p = layout.segment(params, ParamBlock::LogitP);

  HazardField f;
  f.tmic = f.mmc_raw = f.mmc_nt = f.mmc_t = f.tmc = LexisField(ni, na, nt, 0.0);
  f.uc = LexisField(ni, na, nt, 1.0);

  for (int i = 0; i < ni; ++i) {
    for (int a = 0; a < na; ++a) {
      if (a > structure.terminal_age) continue;  // hazards stay zero, uc stays one

      const double lam_tmic = clamp_prob(invlogit(a_tmic + psi_tmic[i] + phi_tmic[a] +
                                                  gamma_tmic(a, i)));
      const bool paediatric = a < cutoff;
      const double eta_paed = a_paed + psi_paed[i] + phi_paed[a] + gamma_paed(a, i);
      const double lam_paed = paediatric ? clamp_prob(invlogit(eta_paed)) : 0.0;

      for (int t = 0; t < nt; ++t) {
        double lam_raw;
        if (paediatric) {
          lam_raw = lam_paed;
        } else {
          const double eta = a_adult + psi_adult[i] + phi_adult[a] + theta[t] +
                             gamma_adult(a, i) + delta(a, t) + zeta(i, t);
          lam_raw = clamp_prob(invlogit(eta));
        }
        const auto& cell = shares.at(i, t);
        double p = cell.value;
        if (cell.free_index >= 0) p = invlogit(logit_p[cell.free_index]);

        f.tmic.at(i, a, t) = lam_tmic;
        f.mmc_raw.at(i, a, t) = lam_raw;
        f.mmc_nt.at(i, a, t) = lam_raw * (1.0 - lam_tmic);
        f.mmc_t.at(i, a, t) = p * lam_tmic;
        f.tmc.at(i, a, t) = (1.0 - p) * lam_tmic;
        f.uc.at(i, a, t) = (1.0 - lam_tmic) * (1.0 - lam_raw);
      }
    }
  }
  return f;
}

CoverageField compute_survivor_and_cif(const HazardField& hazards, const Grid& grid) {
  const int ni = hazards.tmic.n_regions;
  const int na = hazards.tmic.n_ages;
  const int nt = hazards.tmic.n_years;
  (void)grid;

  CoverageField c;
  c.survivor = LexisField(ni, na, nt, 1.0);
  for (auto& f : c.incidence) f = LexisField(ni, na, nt, 0.0);
  for (auto& f : c.cif) f = LexisField(ni, na, nt, 0.0);

  const std::array<const LexisField*, 3> lam = {&hazards.mmc_nt, &hazards.mmc_t, &hazards.tmc};

  for (int i = 0; i < ni; ++i) {
    // each cohort diagonal: birth time index b, cells (a, b + a)
    for (int b = -(na - 1); b < nt; ++b) {
      double surv = 1.0;  // cohorts entering mid-grid start at one
      std::array<double, 3> cum = {0.0, 0.0, 0.0};
      const int a_first = std::max(0, -b);
      for (int a = a_first; a < na; ++a) {
        const int t = b + a;
        if (t >= nt) break;
        c.survivor.at(i, a, t) = surv;
        for (int k = 0; k < 3; ++k) {
          const double inc = lam[k]->at(i, a, t) * surv;
          c.incidence[k].at(i, a, t) = inc;
          cum[k] += inc;
          c.cif[k].at(i, a, t) = cum[k];
        }
        surv *= hazards.uc.at(i, a, t);
      }
    }
  }
  return c;
}

std::vector<double> expected_programme_counts(const CoverageField& coverage,
                                              const HazardField& hazards,
                                              const LexisField& population,
                                              const std::vector<ProgrammeCount>& bands,
                                              const Grid& grid) {
  if (!population.same_shape(coverage.survivor))
    throw StructuralError("expected_programme_counts: population shape mismatch");
  std::vector<double> mu;
  mu.reserve(bands.size());
  for (const auto& row : bands) {
    const int i = grid.region_index(row.region);
    if (i < 0)
      throw StructuralError("expected_programme_counts: unknown region '" + row.region + "'");
    if (row.age_lo < 0 || row.age_hi > grid.age_max || row.age_lo > row.age_hi)
      throw StructuralError("expected_programme_counts: band outside grid");
    if (!grid.year_on_grid(row.year))
      throw StructuralError("expected_programme_counts: year outside grid");
    const int t = grid.year_index(row.year);
    double total = 0.0;
    for (int a = row.age_lo; a <= row.age_hi; ++a) {
      const double s = coverage.survivor.at(i, a, t);
      total += population.at(i, a, t) * s *
               (hazards.mmc_nt.at(i, a, t) + hazards.mmc_t.at(i, a, t));
    }
    mu.push_back(total);
  }
  return mu;
}

LexisField load_population_csv(const std::string& path, const Grid& grid, Diagnostics* diag) {
  auto t = csv::read_file(path);
  csv::require_header(t, {"region", "year", "age", "population"}, path);
  LexisField pop(grid.n_regions(), grid.n_ages(), grid.n_years(), 0.0);
  std::vector<std::string> problems;
  std::set<std::size_t> seen;
  std::size_t skipped = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + " row " + std::to_string(r + 2);
    if (row.size() != 4) {
      problems.push_back(where + ": expected 4 fields");
      continue;
    }
    try {
      const int i = grid.region_index(row[0]);
      if (i < 0) {
        problems.push_back(where + ": unknown region '" + row[0] + "'");
        continue;
      }
      const int year = static_cast<int>(csv::parse_long(row[1], "year"));
      const int age = static_cast<int>(csv::parse_long(row[2], "age"));
      const double value = csv::parse_double(row[3], "population");
      if (age < 0 || age > grid.age_max) {
        problems.push_back(where + ": age outside grid");
        continue;
      }
      if (value < 0.0) {
        problems.push_back(where + ": negative population");
        continue;
      }
      if (!grid.year_on_grid(year)) {
        ++skipped;
        continue;
      }
      const std::size_t cell = pop.index(i, age, grid.year_index(year));
      if (!seen.insert(cell).second) {
        problems.push_back(where + ": duplicate (region,year,age)");
        continue;
      }
      pop.values[cell] = value;
    } catch (const ValidationError& e) {
      problems.push_back(where + ": " + e.what());
    }
  }
  if (!problems.empty()) throw ValidationError(path + ": population validation failed", problems);
  if (skipped > 0 && diag) {
    diag->ignored_population_rows += skipped;
    diag->warn("population: ignored " + std::to_string(skipped) +
               " row(s) outside the extended year grid");
  }
  return pop;
}

}  // namespace mccov
