#pragma once

#include <Eigen/Dense>

#include "mccov/grid.hpp"
#include "mccov/precision.hpp"

namespace mccov {

// Spatial prior pieces shared by every ICAR-structured block. Isolated
// regions get an independent unit-precision effect instead of a
// neighbourhood term, so q_effective = (D - A) + diag(isolated); the
// generalized log determinant and rank refer to that matrix. Soft
// sum-to-zero constraints apply to components of two or more regions.
struct SpatialPrior {
  Eigen::MatrixXd q_effective;           // dense: region counts are small
  double log_det_plus = 0.0;             // product of nonzero eigenvalues
  int rank = 0;
  std::vector<std::vector<int>> constraint_groups;
  std::vector<int> isolated;
};

struct SplineSettings {
  double knot_spacing = 5.0;
  int degree = 3;
};

// Everything the priors and hazard map need that is fixed across
// parameter values: grid (with extension), adjacency, spline design,
// spatial precision pieces.
struct ModelStructure {
  Grid grid;
  AdjacencyGraph graph;
  PrecisionSpec icar;      // pure D - A form with per-component constraints
  SpatialPrior space;
  SplineBasis basis;
  int terminal_age = 59;   // hazards are zero above this age

  int n_regions() const { return grid.n_regions(); }
  int n_ages() const { return grid.n_ages(); }
  int n_years() const { return grid.n_years(); }
  int n_basis() const { return basis.n_basis(); }
};

ModelStructure make_model_structure(const Grid& grid, const AdjacencyGraph& graph,
                                    const SplineSettings& spline = {});

}  // namespace mccov
