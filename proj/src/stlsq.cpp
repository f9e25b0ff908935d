#include "sdrl/stlsq.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sdrl {

void validate(const StlsqConfig& config) {
  if (!(config.threshold >= 0.0) || !std::isfinite(config.threshold))
    throw Error(ErrorKind::kInvalidArgument, "STLSQ threshold must be >= 0");
  if (!(config.ridge >= 0.0) || !std::isfinite(config.ridge))
    throw Error(ErrorKind::kInvalidArgument, "STLSQ ridge must be >= 0");
  if (config.max_iterations < 1)
    throw Error(ErrorKind::kInvalidArgument, "STLSQ max_iterations must be >= 1");
}

int SparseSolution::nonzeros() const {
  int n = 0;
  for (const auto& s : support) n += static_cast<int>(s.size());
  return n;
}

Matrix ridge_least_squares(const Matrix& a, const Matrix& b, double alpha) {
  if (a.cols() < 1)
    throw Error(ErrorKind::kInvalidArgument, "ridge solve needs >= 1 column");
  if (a.rows() != b.rows())
    throw Error(ErrorKind::kDimension, "ridge solve: row count mismatch");
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw Error(ErrorKind::kInvalidArgument, "ridge alpha must be >= 0");
  require_finite(a, "ridge design matrix");
  require_finite(b, "ridge right-hand side");

  const Eigen::Index m = a.rows();
  const Eigen::Index k = a.cols();
  if (alpha == 0.0) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    return cod.solve(b);
  }
  Matrix stacked = Matrix::Zero(m + k, k);
  stacked.topRows(m) = a;
  stacked.bottomRows(k).diagonal().setConstant(std::sqrt(alpha));
  Matrix rhs = Matrix::Zero(m + k, b.cols());
  rhs.topRows(m) = b;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(stacked);
  return cod.solve(rhs);
}

namespace {

// Exact zeros never count as support, even with a zero threshold.
inline bool keep(double xi, double threshold) {
  return xi != 0.0 && std::abs(xi) >= threshold;
}

struct ColumnResult {
  Vector coef;
  std::vector<int> support;
  int iterations = 0;
  bool converged = true;
};

ColumnResult solve_column(const Matrix& theta, const Vector& y,
                          const StlsqConfig& config) {
  const auto p = theta.cols();
  ColumnResult res;
  res.coef = Vector::Zero(p);
  std::vector<int> active(p);
  for (Eigen::Index i = 0; i < p; ++i) active[i] = static_cast<int>(i);

  Matrix sub;
  for (int it = 1; it <= config.max_iterations; ++it) {
    res.iterations = it;
    sub.resize(theta.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) sub.col(j) = theta.col(active[j]);
    const Vector xi = ridge_least_squares(sub, y, config.ridge);

    std::vector<int> kept;
    kept.reserve(active.size());
    for (std::size_t j = 0; j < active.size(); ++j)
      if (keep(xi(j), config.threshold)) kept.push_back(active[j]);

    res.coef.setZero();
    if (kept.size() == active.size()) {
      for (std::size_t j = 0; j < active.size(); ++j) res.coef(active[j]) = xi(j);
      res.support = std::move(active);
      return res;
    }
    // Support shrank: keep the surviving entries of this solve in case the
    // iteration budget runs out.
    for (std::size_t j = 0; j < active.size(); ++j)
      if (keep(xi(j), config.threshold)) res.coef(active[j]) = xi(j);
    active = std::move(kept);
    if (active.empty()) {
      res.support.clear();
      return res;
    }
  }
  res.converged = false;
  res.support = std::move(active);
  return res;
}

}  // namespace

SparseSolution stlsq(const Matrix& theta, const Matrix& targets,
                     const StlsqConfig& config) {
  validate(config);
  if (theta.rows() < 1 || theta.cols() < 1 || targets.cols() < 1)
    throw Error(ErrorKind::kInvalidArgument,
                "STLSQ needs at least one row, feature, and target");
  if (theta.rows() != targets.rows())
    throw Error(ErrorKind::kDimension,
                "STLSQ: theta has " + std::to_string(theta.rows()) +
                    " rows but targets have " + std::to_string(targets.rows()));
  require_finite(theta, "STLSQ library matrix");
  require_finite(targets, "STLSQ targets");

  // With more rows than features, reduce to the triangular factor once:
  // ||theta_S x - y|| and ||R_S x - Q^T y|| differ by a constant for every
  // column subset S, so each restricted solve runs on p rows instead of m.
  Matrix reduced_theta;
  Matrix reduced_targets;
  const bool reduce = theta.rows() > theta.cols();
  if (reduce) {
    const Eigen::Index p = theta.cols();
    Eigen::HouseholderQR<Matrix> qr(theta);
    reduced_theta = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    reduced_targets = (qr.householderQ().transpose() * targets).topRows(p);
  }
  const Matrix& a = reduce ? reduced_theta : theta;
  const Matrix& b = reduce ? reduced_targets : targets;

  SparseSolution sol;
  sol.coefficients = Matrix::Zero(theta.cols(), targets.cols());
  sol.support.resize(targets.cols());
  for (Eigen::Index q = 0; q < targets.cols(); ++q) {
    ColumnResult col = solve_column(a, b.col(q), config);
    sol.coefficients.col(q) = col.coef;
    sol.iterations_used = std::max(sol.iterations_used, col.iterations);
    sol.converged = sol.converged && col.converged;
    if (col.support.empty()) sol.degenerate = true;
    sol.support[q] = std::move(col.support);
  }
  return sol;
}

}  // namespace sdrl
