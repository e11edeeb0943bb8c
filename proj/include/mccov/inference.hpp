#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mccov/likelihood.hpp"

namespace mccov {

struct OptimSettings {
  int max_iter = 1000;
  double tol_obj = 1e-8;    // relative objective change
  double tol_grad = 1e-5;   // gradient max-norm
  int memory = 20;          // L-BFGS history length
  int n_samples = 1000;
  std::uint64_t seed = 1;
  enum class HessianMode { Dense, Bfgs, Auto } hessian_mode = HessianMode::Auto;
  // Auto switches to the compact BFGS curvature above this dimension.
  int dense_hessian_limit = 2000;
  // Latent effects are fitted with hyperparameters frozen for this many
  // iterations before the full joint descent. From the all-zero start
  // the variance gradients otherwise point straight at the sigma -> 0
  // spike of the joint posterior before any effect has moved.
  int warmup_iters = 250;
  // Box bounds on the transformed hyperparameters (the bounded
  // quasi-Newton variant). The joint posterior density is unbounded
  // along sigma -> 0 at zero effects, so under-identified variance
  // blocks would otherwise creep forever; these bind only there.
  double log_sigma_bound = 4.0;
  double logit_rho_bound = 8.0;
  // Damped projected Newton steps after L-BFGS, using the same dense
  // Hessian the Laplace step needs. Cuts through the stiff valleys that
  // first-order steps crawl along. Applies to the dense path only.
  int polish_iters = 40;
};

enum class ConvergenceStatus { GradientTolerance, ObjectiveTolerance, IterationLimit, Stalled };

std::string convergence_status_name(ConvergenceStatus s);

struct IterRecord {
  int iter = 0;
  double f = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

// f(x) with gradient written into the second argument.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct MinimizeResult {
  Eigen::VectorXd x;
  double f = 0.0;
  ConvergenceStatus status = ConvergenceStatus::IterationLimit;
  int iterations = 0;
  double grad_norm = 0.0;  // projected gradient max-norm under bounds
  std::vector<IterRecord> trace;
  Eigen::MatrixXd mem_s, mem_y;  // retained curvature pairs, one per column
  std::vector<int> active_bounds;  // coordinates resting on a box bound
};

// L-BFGS with a strong Wolfe line search (c1 = 1e-4, c2 = 0.9) and
// optional box bounds handled by step truncation onto the active set.
// Accepted iterates never increase the objective.
MinimizeResult minimize_lbfgs(const Objective& fn, const Eigen::VectorXd& x0,
                              const OptimSettings& settings,
                              const Eigen::VectorXd* lower = nullptr,
                              const Eigen::VectorXd* upper = nullptr);

// Curvature at the mode, either a dense finite-difference Hessian of the
// analytic gradient or the compact (Byrd-Nocedal-Schnabel) form built
// from the optimizer's curvature pairs.
struct Curvature {
  OptimSettings::HessianMode mode = OptimSettings::HessianMode::Dense;
  Eigen::MatrixXd dense;           // dense mode
  Eigen::MatrixXd s, y;            // compact mode memory
  double scale = 1.0;              // compact mode sigma
};

struct FitResult {
  Eigen::VectorXd mode;
  double nlp_at_mode = 0.0;
  ConvergenceStatus status = ConvergenceStatus::IterationLimit;
  int iterations = 0;
  double final_grad_norm = 0.0;
  Curvature curvature;
  std::vector<IterRecord> trace;
  std::vector<std::string> active_bounds;  // hyperparameters pinned at a bound
  // Coordinates held at a box bound by an outward gradient. The Laplace
  // approximation conditions on these staying fixed; all are transformed
  // hyperparameters, which no downstream quantity consumes.
  std::vector<int> pinned;
};

// Deterministic start: intercepts at the logit of the cube's empirical
// event proportions (zero when the cube is empty), random effects zero,
// log sigma zero, logit-rho at the prior mean, free logit-p at its
// prior mean.
Eigen::VectorXd initial_params(const PosteriorSpec& spec);

FitResult optimize(const PosteriorSpec& spec, const Eigen::VectorXd& init,
                   const OptimSettings& settings);

struct PosteriorSamples {
  Eigen::MatrixXd draws;  // n_samples x dim
  std::uint64_t seed = 0;
  std::uint64_t layout_hash = 0;
};

// Draws from N(mode, H^-1). Per-draw RNG streams are derived from the
// seed, so draws are reproducible independent of scheduling. Throws
// NumericalError naming the offending direction when the curvature is
// not positive definite.
PosteriorSamples laplace_samples(const FitResult& fit, int n, std::uint64_t seed,
                                 const ParameterLayout& layout);

struct GradientReport {
  double max_rel_error = 0.0;
  int worst_index = -1;
  std::string worst_block;

  bool ok(double tol = 1e-5) const { return max_rel_error < tol; }
};

// Central finite differences of the objective against its own gradient;
// h is relative to the coordinate scale.
GradientReport gradient_check(const Objective& fn, const Eigen::VectorXd& point, double h);
GradientReport gradient_check(const PosteriorSpec& spec, const Eigen::VectorXd& point, double h);

// Flat little-endian binary matrix plus a JSON sidecar carrying the
// layout hash, which is verified on load.
void save_samples(const std::string& bin_path, const std::string& sidecar_path,
                  const PosteriorSamples& samples, const ParameterLayout& layout);
PosteriorSamples load_samples(const std::string& bin_path, const std::string& sidecar_path,
                              const ParameterLayout& layout);

}  // namespace mccov
