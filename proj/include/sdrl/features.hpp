#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sdrl/common.hpp"

namespace sdrl {

// Declarative description of a candidate-function library Theta(s, a).
//
// Inputs are ordered: continuous inputs first (state dims, then a
// continuous action if any), followed by `n_indicators` one-hot action
// indicators. Indicators only take part in polynomial terms, and there only
// alone or multiplied by a single continuous input.
//
// Column order: bias, polynomial terms in graded lexicographic order,
// trig terms grouped by frequency then input (sin before cos), rational
// terms by input.
struct LibrarySpec {
  bool include_bias = true;
  int poly_degree = 1;
  std::vector<double> trig_frequencies;
  bool rational_enabled = false;
  double rational_guard = 1e-6;
  std::vector<std::string> input_names;
  int n_indicators = 0;

  std::size_t n_inputs() const { return input_names.size(); }
  std::size_t n_continuous() const { return input_names.size() - n_indicators; }

  // Short identifier such as "poly2+trig(1,2,3)+rational".
  std::string label() const;

  bool operator==(const LibrarySpec&) const = default;
};

// Throws kInvalidArgument if the spec is malformed.
void validate(const LibrarySpec& spec);

// Number of columns `evaluate` produces for `n_inputs` inputs of which the
// first `n_continuous` are continuous and the rest are indicators.
std::size_t feature_count(const LibrarySpec& spec, std::size_t n_inputs,
                          std::size_t n_continuous);
std::size_t feature_count(const LibrarySpec& spec);

// A single polynomial term: exponent per input.
using Monomial = std::vector<int>;

// Polynomial terms of degree 1..poly_degree in canonical order.
std::vector<Monomial> polynomial_terms(const LibrarySpec& spec);

// Evaluates Theta row-wise. Polynomial terms read `poly_inputs`; trig and
// rational terms read `raw_inputs`. Both are m x n_inputs.
Matrix evaluate(const LibrarySpec& spec, const Matrix& poly_inputs,
                const Matrix& raw_inputs);

inline Matrix evaluate(const LibrarySpec& spec, const Matrix& inputs) {
  return evaluate(spec, inputs, inputs);
}

// Precompiled evaluator for one spec; used on the prediction hot path.
class FeatureLibrary {
 public:
  explicit FeatureLibrary(LibrarySpec spec);

  const LibrarySpec& spec() const { return spec_; }
  std::size_t size() const { return size_; }

  // Writes size() entries to `out`.
  void evaluate_row(const double* poly_inputs, const double* raw_inputs,
                    double* out) const;

 private:
  LibrarySpec spec_;
  std::vector<Monomial> terms_;
  std::size_t size_;
};

// Human-readable label per column: "1", "x", "x*v", "x^2", "sin(3*x)",
// "1/(y)". Rational labels omit the guard.
std::vector<std::string> term_names(const LibrarySpec& spec);

// Classification of a column, used for de-normalization when printing.
enum class TermKind { kBias, kPolynomial, kTrig, kRational };

struct TermInfo {
  TermKind kind;
  int degree = 0;       // polynomial degree (0 for non-polynomial terms)
  int input = -1;       // input index for degree-1, trig, and rational terms
  Monomial exponents;   // polynomial terms only
};

std::vector<TermInfo> term_info(const LibrarySpec& spec);

}  // namespace sdrl
