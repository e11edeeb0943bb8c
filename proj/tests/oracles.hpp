// Test-only oracles, written independently of the library implementations
// they check: dense brute-force linear algebra and naive recursions.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

namespace oracle {

inline Eigen::MatrixXd dense_kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Number of (near-)zero eigenvalues of a symmetric matrix.
inline int null_dimension(const Eigen::MatrixXd& m, double tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  int n = 0;
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i]) < tol * scale) ++n;
  return n;
}

// Generalized log-determinant: sum of logs of eigenvalues above tol.
inline double log_det_plus(const Eigen::MatrixXd& m, double tol = 1e-8) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  double s = 0.0;
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  for (int i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > tol * scale) s += std::log(es.eigenvalues()[i]);
  return s;
}

// AR1 correlation matrix rho^|i-j|, for checking Q * Sigma = I.
inline Eigen::MatrixXd ar1_correlation(int n, double rho) {
  Eigen::MatrixXd s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = std::pow(rho, std::abs(i - j));
  return s;
}

// Plain recursive Cox-de Boor evaluation of basis function j at x.
// `attributed` names the knot interval x belongs to (the usual half-open
// rule, with the top of the data range closed into the interval below),
// which pins the boundary convention without touching the recursion.
inline double cox_de_boor(const std::vector<double>& knots, int j, int degree, double x,
                          int attributed) {
  if (degree == 0) return j == attributed ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  const double dl = knots[j + degree] - knots[j];
  const double dr = knots[j + degree + 1] - knots[j + 1];
  if (dl > 0) left = (x - knots[j]) / dl * cox_de_boor(knots, j, degree - 1, x, attributed);
  if (dr > 0)
    right = (knots[j + degree + 1] - x) / dr * cox_de_boor(knots, j + 1, degree - 1, x, attributed);
  return left + right;
}

// Independent basis construction: uniform knots padded degree deep on
// both sides of [0, age_max]; returns the full design matrix.
inline Eigen::MatrixXd cox_de_boor_design(int age_max, double spacing, int degree) {
  const int n_intervals = static_cast<int>(std::ceil(age_max / spacing));
  std::vector<double> knots;
  for (int k = -degree; k <= n_intervals + degree; ++k) knots.push_back(k * spacing);
  const int n_basis = n_intervals + degree;
  Eigen::MatrixXd design(age_max + 1, n_basis);
  for (int a = 0; a <= age_max; ++a) {
    const double x = static_cast<double>(a);
    int attributed = degree + static_cast<int>(std::floor(x / spacing));
    attributed = std::min(attributed, degree + n_intervals - 1);
    for (int j = 0; j < n_basis; ++j) design(a, j) = cox_de_boor(knots, j, degree, x, attributed);
  }
  return design;
}

}  // namespace oracle
