#include "mccov/precision.hpp"

#include <cmath>
#include <vector>

#include "mccov/errors.hpp"

namespace mccov {

PrecisionSpec build_icar_precision(const AdjacencyGraph& graph) {
  graph.validate();
  const int n = graph.n_nodes;
  PrecisionSpec spec;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n + 2 * graph.edges.size());
  for (int i = 0; i < n; ++i)
    trips.emplace_back(i, i, static_cast<double>(graph.neighbor_counts[i]));
  for (auto [a, b] : graph.edges) {
    trips.emplace_back(a, b, -1.0);
    trips.emplace_back(b, a, -1.0);
  }
  spec.matrix.resize(n, n);
  spec.matrix.setFromTriplets(trips.begin(), trips.end());
  auto comps = graph.components();
  spec.rank_deficiency = static_cast<int>(comps.size());
  for (auto& c : comps) spec.constraints.push_back({c});
  return spec;
}

PrecisionSpec build_ar1_precision(int n, double rho) {
  if (n < 1) throw DomainError("ar1: length must be >= 1");
  if (!(std::abs(rho) < 1.0)) throw DomainError("ar1: |rho| must be < 1");
  PrecisionSpec spec;
  spec.matrix.resize(n, n);
  if (n == 1) {
    spec.matrix.insert(0, 0) = 1.0;
    spec.matrix.makeCompressed();
    return spec;
  }
  const double s = 1.0 / (1.0 - rho * rho);
  std::vector<Eigen::Triplet<double>> trips;
  for (int i = 0; i < n; ++i) {
    const bool boundary = (i == 0 || i == n - 1);
    trips.emplace_back(i, i, boundary ? s : (1.0 + rho * rho) * s);
    if (i + 1 < n) {
      trips.emplace_back(i, i + 1, -rho * s);
      trips.emplace_back(i + 1, i, -rho * s);
    }
  }
  spec.matrix.setFromTriplets(trips.begin(), trips.end());
  return spec;
}

Eigen::MatrixXd ar1_precision_drho(int n, double rho) {
  if (n < 1) throw DomainError("ar1: length must be >= 1");
  if (!(std::abs(rho) < 1.0)) throw DomainError("ar1: |rho| must be < 1");
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  if (n == 1) return d;
  const double denom = (1.0 - rho * rho) * (1.0 - rho * rho);
  const double d_bound = 2.0 * rho / denom;
  const double d_inner = 4.0 * rho / denom;
  const double d_off = -(1.0 + rho * rho) / denom;
  for (int i = 0; i < n; ++i) {
    const bool boundary = (i == 0 || i == n - 1);
    d(i, i) = boundary ? d_bound : d_inner;
    if (i + 1 < n) {
      d(i, i + 1) = d_off;
      d(i + 1, i) = d_off;
    }
  }
  return d;
}

double ar1_log_det(int n, double rho) {
  if (n == 1) return 0.0;
  return -(n - 1) * std::log(1.0 - rho * rho);
}

double ar1_log_det_drho(int n, double rho) {
  if (n == 1) return 0.0;
  return (n - 1) * 2.0 * rho / (1.0 - rho * rho);
}

namespace {

// One row of B-spline values at x: the degree+1 basis functions that are
// nonzero on the interval holding x (NURBS book A2.2).
void basis_row(const std::vector<double>& knots, int degree, int interval, double x,
               std::vector<double>& out) {
  out.assign(degree + 1, 0.0);
  out[0] = 1.0;
  std::vector<double> left(degree + 1), right(degree + 1);
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - knots[interval + 1 - j];
    right[j] = knots[interval + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      double term = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * term;
      saved = left[j - r] * term;
    }
    out[j] = saved;
  }
}

}  // namespace

SplineBasis build_spline_basis(int age_max, double knot_spacing, int degree) {
  if (knot_spacing < 1.0) throw DomainError("spline: knot_spacing must be >= 1");
  if (degree < 1) throw DomainError("spline: degree must be >= 1");
  if (static_cast<double>(age_max) < knot_spacing)
    throw StructuralError("spline: age range shorter than one knot interval");

  const int n_intervals = static_cast<int>(std::ceil(age_max / knot_spacing));
  const int n_basis = n_intervals + degree;
  SplineBasis b;
  b.knot_spacing = knot_spacing;
  b.degree = degree;
  for (int k = 0; k <= n_intervals + 2 * degree; ++k)
    b.knots.push_back((k - degree) * knot_spacing);

  const int n_ages = age_max + 1;
  b.design = Eigen::MatrixXd::Zero(n_ages, n_basis);
  std::vector<double> row;
  for (int a = 0; a < n_ages; ++a) {
    const double x = static_cast<double>(a);
    int interval = degree + static_cast<int>(std::floor(x / knot_spacing));
    interval = std::min(interval, degree + n_intervals - 1);
    basis_row(b.knots, degree, interval, x, row);
    for (int r = 0; r <= degree; ++r) b.design(a, interval - degree + r) = row[r];
  }
  return b;
}

Eigen::SparseMatrix<double> kronecker(const Eigen::SparseMatrix<double>& a,
                                      const Eigen::SparseMatrix<double>& b) {
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros()) * b.nonZeros());
  for (int ka = 0; ka < a.outerSize(); ++ka)
    for (Eigen::SparseMatrix<double>::InnerIterator ita(a, ka); ita; ++ita)
      for (int kb = 0; kb < b.outerSize(); ++kb)
        for (Eigen::SparseMatrix<double>::InnerIterator itb(b, kb); itb; ++itb)
          trips.emplace_back(static_cast<int>(ita.row() * b.rows() + itb.row()),
                             static_cast<int>(ita.col() * b.cols() + itb.col()),
                             ita.value() * itb.value());
  Eigen::SparseMatrix<double> out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

PrecisionSpec build_interaction_precision(InteractionKind kind,
                                          const PrecisionSpec& space,
                                          const SplineBasis* basis,
                                          int n_time, const std::vector<double>& rhos) {
  PrecisionSpec out;
  auto smoothed_age = [&](double rho) {
    if (basis == nullptr) throw StructuralError("interaction: spline basis required");
    Eigen::MatrixXd qa = Eigen::MatrixXd(build_ar1_precision(basis->n_basis(), rho).matrix);
    Eigen::MatrixXd m = basis->design * qa * basis->design.transpose();
    return Eigen::SparseMatrix<double>(m.sparseView(1.0, 1e-300));
  };

  switch (kind) {
    case InteractionKind::AgeSpace: {
      if (rhos.size() != 1) throw StructuralError("age x space interaction needs one rho");
      auto m = smoothed_age(rhos[0]);
      if (space.dim() == 0) throw StructuralError("age x space interaction needs spatial part");
      out.matrix = kronecker(m, space.matrix);
      const int n_ages = static_cast<int>(m.rows());
      const int n_basis = basis->n_basis();
      const int rank_age = std::min(n_basis, n_ages);  // W full column rank
      const int rank_space = space.dim() - space.rank_deficiency;
      out.rank_deficiency = n_ages * space.dim() - rank_age * rank_space;
      // Sum-to-zero constraints cover the spatial null directions; the
      // spline-projection null directions are not sum-shaped and are
      // handled in weight space by the prior.
      for (int a = 0; a < n_ages; ++a)
        for (const auto& c : space.constraints) {
          SumToZeroConstraint sc;
          for (int i : c.indices) sc.indices.push_back(a * space.dim() + i);
          out.constraints.push_back(std::move(sc));
        }
      break;
    }
    case InteractionKind::AgeTime: {
      if (rhos.size() != 2) throw StructuralError("age x time interaction needs two rhos");
      if (n_time < 1) throw StructuralError("age x time interaction needs n_time >= 1");
      auto m = smoothed_age(rhos[0]);
      auto qt = build_ar1_precision(n_time, rhos[1]);
      out.matrix = kronecker(m, qt.matrix);
      const int n_ages = static_cast<int>(m.rows());
      const int rank_age = std::min(basis->n_basis(), n_ages);
      out.rank_deficiency = n_ages * n_time - rank_age * n_time;
      break;
    }
    case InteractionKind::SpaceTime: {
      if (rhos.size() != 1) throw StructuralError("space x time interaction needs one rho");
      if (space.dim() == 0) throw StructuralError("space x time interaction needs spatial part");
      if (n_time < 1) throw StructuralError("space x time interaction needs n_time >= 1");
      auto qt = build_ar1_precision(n_time, rhos[0]);
      out.matrix = kronecker(space.matrix, qt.matrix);
      out.rank_deficiency = space.rank_deficiency * n_time;
      for (const auto& c : space.constraints)
        for (int t = 0; t < n_time; ++t) {
          SumToZeroConstraint sc;
          for (int i : c.indices) sc.indices.push_back(i * n_time + t);
          out.constraints.push_back(std::move(sc));
        }
      break;
    }
  }
  return out;
}

}  // namespace mccov
