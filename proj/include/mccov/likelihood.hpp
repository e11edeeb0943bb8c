#pragma once

#include <Eigen/Dense>

#include "mccov/errors.hpp"
#include "mccov/hazard.hpp"
#include "mccov/survey.hpp"

namespace mccov {

struct HyperPriors {
  double intercept_sd = 5.0;  // N(0, sd^2) on intercepts
  double sd_rate = 1.0;       // Exp(rate) on standard deviations
  double rho_mean = 3.0;      // N(mean, sd^2) on logit-scale autocorrelations
  double rho_sd = 1.0;
};

// Everything total_nlp needs; all components share one extended grid.
struct PosteriorSpec {
  ModelStructure structure;
  ShareMap shares;
  ParameterLayout layout;
  EventCountCube cube;
  std::vector<ProgrammeCount> programme;
  LexisField population;
  HyperPriors hyper;
  double constraint_penalty = 1e-3;  // kappa per null-space dimension

  const Grid& grid() const { return structure.grid; }
};

PosteriorSpec make_posterior_spec(ModelStructure structure, ShareMap shares,
                                  EventCountCube cube, std::vector<ProgrammeCount> programme,
                                  LexisField population, HyperPriors hyper = {});

// Survey pseudo-likelihood:
//   -sum N~TMIC log(S lamTMIC) + N~MMC log(S lamMMC-nT) + N~RC log S
//        + N~LC log(1 - S)
// Log arguments are floored at kProbClamp; zero-count cells contribute
// exactly zero either way.
double survey_nll(const EventCountCube& cube, const CoverageField& coverage,
                  const HazardField& hazards, Diagnostics* diag = nullptr);

// Poisson: sum over rows of mu - y log mu + lgamma(y + 1), y real-valued.
double programme_nll(const std::vector<ProgrammeCount>& counts, const std::vector<double>& mu,
                     Diagnostics* diag = nullptr);

// All prior terms: quadratic forms with their tau and generalized
// log-determinant parts, soft sum-to-zero penalties, intercept/sd/rho
// hyperpriors and free logit-p priors. Normalizing constants included.
double prior_nlp(const Eigen::VectorXd& params, const PosteriorSpec& spec);

// Prior value with its gradient added into `grad` (resized and zeroed).
double prior_nlp_grad(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                      Eigen::VectorXd& grad);

double total_nlp(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                 Diagnostics* diag = nullptr);

struct NllBreakdown {
  double survey = 0.0;
  double programme = 0.0;
  double prior = 0.0;
  double total = 0.0;
};
NllBreakdown total_nlp_breakdown(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                                 Diagnostics* diag = nullptr);

// Value plus analytic gradient (reverse accumulation through the hazard
// map and closed-form prior derivatives).
double total_nlp_grad(const Eigen::VectorXd& params, const PosteriorSpec& spec,
                      Eigen::VectorXd& grad, Diagnostics* diag = nullptr);

}  // namespace mccov
