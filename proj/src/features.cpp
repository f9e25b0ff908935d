#include "sdrl/features.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <utility>

namespace sdrl {

namespace {

std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

// Appends every exponent vector over inputs [pos, n) with total degree
// `remaining`, in lexicographically descending order.
void enumerate(int pos, int remaining, Monomial& cur,
               std::vector<Monomial>& out) {
  const int n = static_cast<int>(cur.size());
  if (pos == n - 1) {
    cur[pos] = remaining;
    out.push_back(cur);
    cur[pos] = 0;
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = e;
    enumerate(pos + 1, remaining - e, cur, out);
  }
  cur[pos] = 0;
}

bool admissible(const Monomial& m, std::size_t n_continuous) {
  int indicator_power = 0;
  int total = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    total += m[i];
    if (i >= n_continuous) {
      if (m[i] > 1) return false;
      indicator_power += m[i];
    }
  }
  if (indicator_power > 1) return false;
  // Indicator terms: alone, or crossed with exactly one continuous input.
  if (indicator_power == 1 && total > 2) return false;
  return true;
}

std::string trig_label(const char* fn, double k, const std::string& name) {
  if (k == 1.0) return std::string(fn) + "(" + name + ")";
  return std::string(fn) + "(" + format_number(k) + "*" + name + ")";
}

inline double guarded_reciprocal(double x, double guard) {
  return 1.0 / (x + guard * (x >= 0.0 ? 1.0 : -1.0));
}

}  // namespace

std::string LibrarySpec::label() const {
  std::ostringstream os;
  os << "poly" << poly_degree;
  if (!include_bias) os << "-nobias";
  if (!trig_frequencies.empty()) {
    os << "+trig(";
    for (std::size_t i = 0; i < trig_frequencies.size(); ++i) {
      if (i) os << ",";
      os << format_number(trig_frequencies[i]);
    }
    os << ")";
  }
  if (rational_enabled) os << "+rational";
  return os.str();
}

void validate(const LibrarySpec& spec) {
  if (spec.input_names.empty())
    throw Error(ErrorKind::kInvalidArgument, "library has no inputs");
  if (spec.poly_degree < 0)
    throw Error(ErrorKind::kInvalidArgument, "poly_degree must be >= 0");
  if (spec.n_indicators < 0 ||
      static_cast<std::size_t>(spec.n_indicators) > spec.input_names.size())
    throw Error(ErrorKind::kInvalidArgument,
                "n_indicators must lie in [0, number of inputs]");
  for (double k : spec.trig_frequencies) {
    if (!(k > 0.0) || !std::isfinite(k))
      throw Error(ErrorKind::kInvalidArgument,
                  "trig frequencies must be positive and finite");
  }
  if (!(spec.rational_guard > 0.0) || !std::isfinite(spec.rational_guard))
    throw Error(ErrorKind::kInvalidArgument, "rational_guard must be positive");
}

std::size_t feature_count(const LibrarySpec& spec, std::size_t n_inputs,
                          std::size_t n_continuous) {
  const std::size_t n_ind = n_inputs - n_continuous;
  const auto d = static_cast<std::size_t>(spec.poly_degree);
  std::size_t count = spec.include_bias ? 1 : 0;
  // C(nc + d, d) - 1 monomials over the continuous inputs.
  std::size_t binom = 1;
  for (std::size_t i = 1; i <= d; ++i) binom = binom * (n_continuous + i) / i;
  count += binom - 1;
  if (d >= 1) count += n_ind;
  if (d >= 2) count += n_ind * n_continuous;
  count += 2 * spec.trig_frequencies.size() * n_continuous;
  if (spec.rational_enabled) count += n_continuous;
  return count;
}

std::size_t feature_count(const LibrarySpec& spec) {
  return feature_count(spec, spec.n_inputs(), spec.n_continuous());
}

std::vector<Monomial> polynomial_terms(const LibrarySpec& spec) {
  std::vector<Monomial> out;
  const std::size_t n = spec.n_inputs();
  if (n == 0) return out;
  std::vector<Monomial> level;
  Monomial cur(n, 0);
  for (int deg = 1; deg <= spec.poly_degree; ++deg) {
    level.clear();
    enumerate(0, deg, cur, level);
    for (auto& m : level)
      if (admissible(m, spec.n_continuous())) out.push_back(std::move(m));
  }
  return out;
}

FeatureLibrary::FeatureLibrary(LibrarySpec spec)
    : spec_(std::move(spec)),
      terms_((validate(spec_), polynomial_terms(spec_))),
      size_(feature_count(spec_)) {}

void FeatureLibrary::evaluate_row(const double* poly_inputs,
                                  const double* raw_inputs, double* out) const {
  std::size_t col = 0;
  if (spec_.include_bias) out[col++] = 1.0;
  const std::size_t n = spec_.n_inputs();
  const std::size_t nc = spec_.n_continuous();
  for (const auto& m : terms_) {
    double v = 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (int e = 0; e < m[i]; ++e) v *= poly_inputs[i];
    out[col++] = v;
  }
  for (double k : spec_.trig_frequencies) {
    for (std::size_t i = 0; i < nc; ++i) {
      out[col++] = std::sin(k * raw_inputs[i]);
      out[col++] = std::cos(k * raw_inputs[i]);
    }
  }
  if (spec_.rational_enabled) {
    for (std::size_t i = 0; i < nc; ++i)
      out[col++] = guarded_reciprocal(raw_inputs[i], spec_.rational_guard);
  }
}

Matrix evaluate(const LibrarySpec& spec, const Matrix& poly_inputs,
                const Matrix& raw_inputs) {
  const FeatureLibrary lib(spec);
  const auto n = static_cast<Eigen::Index>(spec.n_inputs());
  if (poly_inputs.cols() != n || raw_inputs.cols() != n ||
      poly_inputs.rows() != raw_inputs.rows())
    throw Error(ErrorKind::kDimension,
                "library expects " + std::to_string(n) + " input columns, got " +
                    std::to_string(poly_inputs.cols()));
  require_finite(poly_inputs, "library input");
  require_finite(raw_inputs, "library input");

  const auto p = static_cast<Eigen::Index>(lib.size());
  const Eigen::Index m = poly_inputs.rows();
  // Row-major scratch so evaluate_row can write contiguously.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(m, p);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> pin =
      poly_inputs;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rin =
      raw_inputs;
  for (Eigen::Index r = 0; r < m; ++r)
    lib.evaluate_row(pin.row(r).data(), rin.row(r).data(), out.row(r).data());
  return out;
}

std::vector<std::string> term_names(const LibrarySpec& spec) {
  std::vector<std::string> names;
  if (spec.include_bias) names.emplace_back("1");
  for (const auto& m : polynomial_terms(spec)) {
    std::string s;
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (m[i] == 0) continue;
      if (!s.empty()) s += "*";
      s += spec.input_names[i];
      if (m[i] > 1) s += "^" + std::to_string(m[i]);
    }
    names.push_back(std::move(s));
  }
  for (double k : spec.trig_frequencies) {
    for (std::size_t i = 0; i < spec.n_continuous(); ++i) {
      names.push_back(trig_label("sin", k, spec.input_names[i]));
      names.push_back(trig_label("cos", k, spec.input_names[i]));
    }
  }
  if (spec.rational_enabled) {
    for (std::size_t i = 0; i < spec.n_continuous(); ++i)
      names.push_back("1/(" + spec.input_names[i] + ")");
  }
  return names;
}

std::vector<TermInfo> term_info(const LibrarySpec& spec) {
  std::vector<TermInfo> info;
  if (spec.include_bias) info.push_back({TermKind::kBias, 0, -1, {}});
  for (const auto& m : polynomial_terms(spec)) {
    int deg = 0;
    int input = -1;
    for (std::size_t i = 0; i < m.size(); ++i) {
      deg += m[i];
      if (m[i] > 0) input = static_cast<int>(i);
    }
    info.push_back({TermKind::kPolynomial, deg, deg == 1 ? input : -1, m});
  }
  for (std::size_t f = 0; f < spec.trig_frequencies.size(); ++f) {
    for (std::size_t i = 0; i < spec.n_continuous(); ++i) {
      info.push_back({TermKind::kTrig, 0, static_cast<int>(i), {}});
      info.push_back({TermKind::kTrig, 0, static_cast<int>(i), {}});
    }
  }
  if (spec.rational_enabled) {
    for (std::size_t i = 0; i < spec.n_continuous(); ++i)
      info.push_back({TermKind::kRational, 0, static_cast<int>(i), {}});
  }
  return info;
}

}  // namespace sdrl
