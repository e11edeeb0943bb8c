#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mccov/errors.hpp"
#include "mccov/field.hpp"
#include "mccov/model_structure.hpp"
#include "mccov/programme.hpp"

namespace mccov {

// Circumcision type taxonomy. The first three are elementary competing
// risks; the rest are aggregates over them.
enum class CircType { MmcNt = 0, MmcT = 1, Tmc = 2, Mmc, Tmic, Mc };

std::string circ_type_name(CircType k);
CircType parse_circ_type(const std::string& s);

// Probability floor shared by hazards and likelihood log arguments.
constexpr double kProbClamp = 1e-12;

// Share of initiation-context circumcisions performed medically, by
// (region set, year range). Defaults to fixed zero everywhere.
struct ShareEntry {
  enum class Mode { FixedZero, FixedValue, LogitNormal };
  std::vector<std::string> regions;
  int year_from = 0;
  int year_to = 0;
  Mode mode = Mode::FixedZero;
  double value = 0.0;  // FixedValue, in [0,1]
  double mu = 0.0;     // LogitNormal prior mean on logit scale
  double sigma = 1.0;  // LogitNormal prior sd, > 0
};

// Entries resolved against the extended grid: one cell per (region, year),
// constant over ages. LogitNormal cells own one free parameter each.
struct ShareMap {
  struct Cell {
    ShareEntry::Mode mode = ShareEntry::Mode::FixedZero;
    double value = 0.0;   // fixed p
    int free_index = -1;  // into the logit-p parameter block
  };
  int n_regions = 0;
  int n_years = 0;
  std::vector<Cell> cells;        // region-major: i * n_years + t
  std::vector<double> free_mu;    // prior means per free parameter
  std::vector<double> free_sigma; // prior sds per free parameter

  int n_free() const { return static_cast<int>(free_mu.size()); }
  const Cell& at(int i, int t) const { return cells[static_cast<std::size_t>(i) * n_years + t]; }
};

// Overlapping (region, year) coverage across entries is rejected.
ShareMap resolve_shares(const std::vector<ShareEntry>& entries, const Grid& grid);

// Named parameter blocks in their fixed flat order.
enum class ParamBlock {
  AlphaTmic = 0,   // intercept, TMIC
  AlphaMmcPaed,    // intercept, paediatric MMC-nT
  AlphaMmcAdult,   // intercept, adult MMC-nT
  PsiTmic,         // spatial effects (n_regions each)
  PsiMmcPaed,
  PsiMmcAdult,
  PhiTmicW,        // age spline weights (n_basis each)
  PhiMmcPaedW,
  PhiMmcAdultW,
  Theta,           // time effect (n_years)
  GammaTmicW,      // age-spline x space weights (n_basis * n_regions each)
  GammaMmcPaedW,
  GammaMmcAdultW,
  DeltaW,          // age-spline x time weights (n_basis * n_years)
  Zeta,            // space x time effects (n_regions * n_years)
  LogSigma,        // 12 log standard deviations
  LogitRho,        // 10 autocorrelations on the logit-(-1,1) scale
  LogitP,          // free MMC-T share parameters
  Count
};

constexpr int kNumParamBlocks = static_cast<int>(ParamBlock::Count);

// log sigma slots within the LogSigma block
enum SigmaSlot {
  kSigmaPsiTmic = 0, kSigmaPsiPaed, kSigmaPsiAdult,
  kSigmaPhiTmic, kSigmaPhiPaed, kSigmaPhiAdult,
  kSigmaTheta,
  kSigmaGammaTmic, kSigmaGammaPaed, kSigmaGammaAdult,
  kSigmaDelta, kSigmaZeta,
  kNumSigmas
};

// autocorrelation slots within the LogitRho block
enum RhoSlot {
  kRhoPhiTmic = 0, kRhoPhiPaed, kRhoPhiAdult,
  kRhoTheta,
  kRhoGammaTmic, kRhoGammaPaed, kRhoGammaAdult,
  kRhoDeltaAge, kRhoDeltaTime,
  kRhoZeta,
  kNumRhos
};

// Deterministic flat layout over all latent effects and transformed
// hyperparameters. Interaction blocks are stored basis-major: the weight
// for (spline j, region i) sits at j * n_regions + i, and likewise for
// time in DeltaW / Zeta.
struct ParameterLayout {
  struct BlockInfo {
    std::string name;
    int offset = 0;
    int size = 0;
  };
  std::array<BlockInfo, kNumParamBlocks> blocks;
  int dim = 0;
  int n_regions = 0, n_ages = 0, n_years = 0, n_basis = 0, n_free_shares = 0;

  int offset(ParamBlock b) const { return blocks[static_cast<int>(b)].offset; }
  int size(ParamBlock b) const { return blocks[static_cast<int>(b)].size; }
  const std::string& name(ParamBlock b) const { return blocks[static_cast<int>(b)].name; }
  std::string block_of_index(int flat_index) const;

  Eigen::VectorBlock<const Eigen::VectorXd> segment(const Eigen::VectorXd& x,
                                                    ParamBlock b) const {
    return x.segment(offset(b), size(b));
  }
  Eigen::VectorBlock<Eigen::VectorXd> segment(Eigen::VectorXd& x, ParamBlock b) const {
    return x.segment(offset(b), size(b));
  }

  std::uint64_t hash() const;
};

ParameterLayout make_layout(const ModelStructure& structure, const ShareMap& shares);

// maps x in (-inf,inf) to rho in (-1,1): 2 / (1 + exp(-x)) - 1
double logit_rho_to_rho(double x);

// Per-time-step probabilities on the extended Lexis grid.
struct HazardField {
  LexisField tmic;     // lambda TMIC
  LexisField mmc_raw;  // lambda~ MMC-nT, conditional on no TMIC this step
  LexisField mmc_nt;   // lambda MMC-nT = lambda~ * (1 - lambda TMIC)
  LexisField mmc_t;    // p * lambda TMIC
  LexisField tmc;      // (1 - p) * lambda TMIC
  LexisField uc;       // (1 - lambda TMIC) (1 - lambda~)
};

// Survivor, incidence and cumulative incidence. survivor(i,a,t) is the
// probability of remaining uncircumcised entering the (a,t) step of the
// cohort, so cif(i,a,t) covers events through the end of step a and
// survivor(i,a+1,t+1) + cif_mc(i,a,t) = 1 along each cohort diagonal.
struct CoverageField {
  LexisField survivor;
  std::array<LexisField, 3> incidence;  // elementary types, CircType order
  std::array<LexisField, 3> cif;

  double incidence_of(CircType k, int i, int a, int t) const;
  double cif_of(CircType k, int i, int a, int t) const;
};

HazardField compute_hazards(const Eigen::VectorXd& params, const ParameterLayout& layout,
                            const ModelStructure& structure, const ShareMap& shares);

CoverageField compute_survivor_and_cif(const HazardField& hazards, const Grid& grid);

// Expected MMC counts per programme row: for each (region, band, year),
// sum over band ages of P * S * (lambda MMC-nT + lambda MMC-T).
std::vector<double> expected_programme_counts(const CoverageField& coverage,
                                              const HazardField& hazards,
                                              const LexisField& population,
                                              const std::vector<ProgrammeCount>& bands,
                                              const Grid& grid);

// CSV header: region,year,age,population. Rows for years outside the
// extended grid are counted and skipped; unknown regions or ages fail.
LexisField load_population_csv(const std::string& path, const Grid& grid,
                               Diagnostics* diag = nullptr);

}  // namespace mccov
