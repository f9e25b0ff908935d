#pragma once

#include <vector>

#include "sdrl/common.hpp"

namespace sdrl {

struct StlsqConfig {
  double threshold = 0.0;  // |xi| < threshold is zeroed
  double ridge = 0.0;      // L2 penalty of the inner solve
  int max_iterations = 20;
};

void validate(const StlsqConfig& config);

struct SparseSolution {
  Matrix coefficients;                    // p x q, exact zeros off-support
  std::vector<std::vector<int>> support;  // active feature indices per target
  int iterations_used = 0;                // max over targets
  bool converged = true;                  // support stabilized for every target
  bool degenerate = false;                // some target has empty support

  int nonzeros() const;
};

// argmin ||A X - b||^2 + alpha ||X||^2 via a complete orthogonal
// decomposition of the stacked system [A; sqrt(alpha) I]. With alpha = 0
// and rank-deficient A this is the minimum-norm least-squares solution.
Matrix ridge_least_squares(const Matrix& a, const Matrix& b, double alpha);

// Sequentially thresholded least squares, column by column of `targets`.
//
// Each target starts from the full support and alternates a ridge solve
// restricted to the support with hard thresholding until the support stops
// changing. If max_iterations is exhausted first, the coefficients of the
// last solve are returned with the below-threshold entries zeroed and
// `converged` is false. A target whose support empties yields a zero column
// and sets `degenerate`.
SparseSolution stlsq(const Matrix& theta, const Matrix& targets,
                     const StlsqConfig& config);

}  // namespace sdrl
