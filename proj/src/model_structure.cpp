#include "mccov/model_structure.hpp"

#include <cmath>

#include "mccov/errors.hpp"

namespace mccov {

ModelStructure make_model_structure(const Grid& grid, const AdjacencyGraph& graph,
                                    const SplineSettings& spline) {
  grid.validate();
  if (graph.n_nodes != grid.n_regions())
    throw StructuralError("model structure: adjacency graph size does not match grid regions");

  ModelStructure s;
  s.grid = grid;
  s.graph = graph;
  s.icar = build_icar_precision(graph);
  s.basis = build_spline_basis(grid.age_max, spline.knot_spacing, spline.degree);

  s.space.q_effective = Eigen::MatrixXd(s.icar.matrix);
  s.space.isolated = graph.isolated_nodes();
  for (int i : s.space.isolated) s.space.q_effective(i, i) = 1.0;

  for (const auto& c : s.icar.constraints)
    if (c.indices.size() >= 2) s.space.constraint_groups.push_back(c.indices);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.space.q_effective);
  if (es.info() != Eigen::Success)
    throw NumericalError("model structure: spatial eigendecomposition failed");
  const double tol = 1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  double log_det = 0.0;
  int rank = 0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev > tol) {
      log_det += std::log(ev);
      ++rank;
    }
  }
  s.space.log_det_plus = log_det;
  s.space.rank = rank;
  const int expected_rank =
      grid.n_regions() - static_cast<int>(s.space.constraint_groups.size());
  if (rank != expected_rank)
    throw NumericalError("model structure: spatial rank " + std::to_string(rank) +
                         " does not match expected " + std::to_string(expected_rank));
  return s;
}

}  // namespace mccov
