#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

#include "mccov/grid.hpp"

namespace mccov {

// Sum-to-zero constraint over one null-space direction: the listed
// coordinates of the effect vector are softly pinned to sum to zero.
struct SumToZeroConstraint {
  std::vector<int> indices;
};

// Structured prior precision with its null-space bookkeeping.
struct PrecisionSpec {
  Eigen::SparseMatrix<double> matrix;
  int rank_deficiency = 0;
  std::vector<SumToZeroConstraint> constraints;  // one per null dimension

  int dim() const { return static_cast<int>(matrix.rows()); }
};

// Graph Laplacian Q = D - A. Rank deficiency equals the number of
// connected components (isolated nodes count as their own component);
// one sum-to-zero constraint is attached per component.
PrecisionSpec build_icar_precision(const AdjacencyGraph& graph);

// Stationary AR(1) precision with unit marginal variance. Full rank.
PrecisionSpec build_ar1_precision(int n, double rho);

// Entry-wise derivative of build_ar1_precision(n, rho) in rho, dense.
Eigen::MatrixXd ar1_precision_drho(int n, double rho);

// log det of the stationary AR1 precision: -(n-1) log(1 - rho^2).
double ar1_log_det(int n, double rho);
double ar1_log_det_drho(int n, double rho);

// Uniform B-spline basis over integer ages 0..age_max with knots every
// knot_spacing years, extended degree knots past each boundary.
struct SplineBasis {
  Eigen::MatrixXd design;  // n_ages x n_basis
  double knot_spacing = 0;
  int degree = 0;
  std::vector<double> knots;

  int n_basis() const { return static_cast<int>(design.cols()); }
  int n_ages() const { return static_cast<int>(design.rows()); }
};

SplineBasis build_spline_basis(int age_max, double knot_spacing, int degree);

enum class InteractionKind { AgeSpace, AgeTime, SpaceTime };

// Kronecker-structured interaction precision:
//   age x space: [W Qa(rho) W^T] (x) Qi
//   age x time : [W Qa(rho1) W^T] (x) Qt(rho2)
//   space x time: Qi (x) Qt(rho)
// Null-space dimension follows the Kronecker product rule; a sum-to-zero
// constraint is attached per null direction.
PrecisionSpec build_interaction_precision(InteractionKind kind,
                                          const PrecisionSpec& space_or_unused,
                                          const SplineBasis* basis,
                                          int n_time, const std::vector<double>& rhos);

// Kronecker product helper for sparse symmetric operands.
Eigen::SparseMatrix<double> kronecker(const Eigen::SparseMatrix<double>& a,
                                      const Eigen::SparseMatrix<double>& b);

}  // namespace mccov
