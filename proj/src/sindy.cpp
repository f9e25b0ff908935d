#include "sdrl/sindy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sdrl {

using nlohmann::ordered_json;

const char* to_string(TargetMode mode) {
  return mode == TargetMode::kDeltaState ? "delta_state" : "next_state";
}

TargetMode target_mode_from_string(const std::string& s) {
  if (s == "delta_state") return TargetMode::kDeltaState;
  if (s == "next_state") return TargetMode::kNextState;
  throw Error(ErrorKind::kSchema, "unknown target mode '" + s + "'");
}

NormStats NormStats::identity(int n_inputs, int n_targets) {
  NormStats n;
  n.input_mean = Vector::Zero(n_inputs);
  n.input_std = Vector::Ones(n_inputs);
  n.target_scale = Vector::Ones(n_targets);
  return n;
}

// ------------------------------------------------------------ SindyModel

SindyModel::SindyModel(std::string env_name, std::vector<std::string> state_names,
                       LibrarySpec library, SparseSolution coefficients,
                       NormStats norm, TargetMode mode, StlsqConfig config,
                       FitReport report)
    : env_name_(std::move(env_name)),
      state_names_(std::move(state_names)),
      library_(std::move(library)),
      features_(library_),
      solution_(std::move(coefficients)),
      norm_(std::move(norm)),
      mode_(mode),
      config_(config),
      report_(std::move(report)) {
  const auto n_in = static_cast<Eigen::Index>(library_.n_inputs());
  const auto q = static_cast<Eigen::Index>(state_names_.size());
  const auto p = static_cast<Eigen::Index>(features_.size());
  if (q < 1 || static_cast<Eigen::Index>(library_.n_continuous()) < q)
    throw Error(ErrorKind::kDimension,
                "model library has " + std::to_string(n_in) +
                    " inputs, which cannot hold " + std::to_string(q) + " state dims");
  if (solution_.coefficients.rows() != p || solution_.coefficients.cols() != q)
    throw Error(ErrorKind::kDimension,
                "coefficient matrix is " + std::to_string(solution_.coefficients.rows()) +
                    "x" + std::to_string(solution_.coefficients.cols()) + ", expected " +
                    std::to_string(p) + "x" + std::to_string(q));
  if (norm_.input_mean.size() != n_in || norm_.input_std.size() != n_in ||
      norm_.target_scale.size() != q)
    throw Error(ErrorKind::kDimension, "normalization statistics do not match the library");
  if (static_cast<Eigen::Index>(solution_.support.size()) != q)
    throw Error(ErrorKind::kDimension, "support list does not match the state dimension");
  for (const auto& s : solution_.support)
    for (int idx : s)
      if (idx < 0 || idx >= p)
        throw Error(ErrorKind::kDimension, "support index out of range");
  require_finite(solution_.coefficients, "model coefficients");
}

void SindyModel::predict_into(const double* state, const double* action,
                              double* out) const {
  const int d = state_dim();
  const auto n_in = static_cast<int>(library_.n_inputs());
  thread_local std::vector<double> raw;
  thread_local std::vector<double> z;
  thread_local std::vector<double> row;
  raw.resize(n_in);
  z.resize(n_in);
  row.resize(features_.size());
  for (int i = 0; i < d; ++i) raw[i] = state[i];
  for (int i = d; i < n_in; ++i) raw[i] = action[i - d];
  for (int i = 0; i < n_in; ++i) z[i] = (raw[i] - norm_.input_mean(i)) / norm_.input_std(i);
  features_.evaluate_row(z.data(), raw.data(), row.data());
  for (int j = 0; j < d; ++j) {
    double acc = 0.0;
    for (int k : solution_.support[j]) acc += row[k] * solution_.coefficients(k, j);
    acc *= norm_.target_scale(j);
    out[j] = mode_ == TargetMode::kDeltaState ? state[j] + acc : acc;
  }
}

Vector SindyModel::predict(const Vector& state, const Vector& action) const {
  if (state.size() != state_dim() || action.size() != action_dim())
    throw Error(ErrorKind::kDimension,
                "predict expects state dim " + std::to_string(state_dim()) +
                    " and action dim " + std::to_string(action_dim()));
  require_finite(state, "predict state");
  require_finite(action, "predict action");
  Vector out(state_dim());
  predict_into(state.data(), action.data(), out.data());
  return out;
}

Matrix SindyModel::predict(const Matrix& states, const Matrix& actions) const {
  if (states.rows() != actions.rows())
    throw Error(ErrorKind::kDimension, "predict: row count mismatch");
  Matrix out(states.rows(), state_dim());
  for (Eigen::Index r = 0; r < states.rows(); ++r)
    out.row(r) = predict(Vector(states.row(r).transpose()),
                         Vector(actions.row(r).transpose()))
                     .transpose();
  return out;
}

// ---------------------------------------------------------- grid search

std::vector<double> GridSearchSpec::default_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 9; ++i) t.push_back(std::pow(10.0, -5.0 + 0.5 * i));
  return t;
}

std::vector<double> GridSearchSpec::default_ridges() { return {0.0, 1e-6, 1e-4, 1e-2}; }

void validate(const GridSearchSpec& grid) {
  if (grid.thresholds.empty() || grid.ridges.empty() || grid.libraries.empty())
    throw Error(ErrorKind::kInvalidArgument,
                "grid search needs at least one threshold, ridge, and library");
  if (!(grid.validation_fraction > 0.0 && grid.validation_fraction <= 0.5))
    throw Error(ErrorKind::kInvalidArgument, "validation fraction must lie in (0, 0.5]");
  for (double t : grid.thresholds) validate(StlsqConfig{t, 0.0, grid.max_iterations});
  for (double r : grid.ridges) validate(StlsqConfig{0.0, r, grid.max_iterations});
  for (const auto& lib : grid.libraries) validate(lib);
}

LibrarySpec library_for(const std::vector<std::string>& state_names,
                        const std::vector<std::string>& action_names, int n_indicators) {
  LibrarySpec spec;
  spec.input_names = state_names;
  spec.input_names.insert(spec.input_names.end(), action_names.begin(), action_names.end());
  spec.n_indicators = n_indicators;
  return spec;
}

std::pair<std::vector<int>, std::vector<int>> split_rows(std::size_t n,
                                                         double validation_fraction,
                                                         std::uint64_t seed) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::vector<int> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<int> train(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(val)};
}

namespace {

void check_library(const Dataset& data, const LibrarySpec& library) {
  if (static_cast<int>(library.n_inputs()) != data.state_dim + data.action_dim)
    throw Error(ErrorKind::kDimension,
                "library '" + library.label() + "' has " +
                    std::to_string(library.n_inputs()) + " inputs but the dataset has " +
                    std::to_string(data.state_dim + data.action_dim));
}

Matrix raw_targets(const Dataset& data, TargetMode mode) {
  Matrix t = data.next_states();
  if (mode == TargetMode::kDeltaState) t -= data.states();
  return t;
}

// Column-wise MSE of `pred` against `truth`.
Vector column_mse(const Matrix& pred, const Matrix& truth) {
  return (pred - truth).array().square().colwise().mean().transpose();
}

Matrix apply(const Matrix& theta, const SparseSolution& sol, const NormStats& norm,
             TargetMode mode, const Matrix& states) {
  Matrix y = theta * sol.coefficients;
  y = y.array().rowwise() * norm.target_scale.transpose().array();
  if (mode == TargetMode::kDeltaState) y += states;
  return y;
}

std::vector<std::string> names_or_default(const std::vector<std::string>& names, int d) {
  if (!names.empty()) {
    if (static_cast<int>(names.size()) != d)
      throw Error(ErrorKind::kDimension, "state name count does not match the dataset");
    return names;
  }
  std::vector<std::string> out;
  for (int i = 0; i < d; ++i) out.push_back("s" + std::to_string(i));
  return out;
}

}  // namespace

NormStats compute_norm(const Dataset& data, const LibrarySpec& library, TargetMode mode) {
  check_library(data, library);
  const Matrix x = data.inputs();
  const auto n_in = x.cols();
  const auto nc = static_cast<Eigen::Index>(library.n_continuous());
  NormStats norm = NormStats::identity(static_cast<int>(n_in), data.state_dim);
  const double m = static_cast<double>(x.rows());
  for (Eigen::Index i = 0; i < nc; ++i) {
    const double rms = std::sqrt(x.col(i).squaredNorm() / m);
    norm.input_std(i) = std::max(rms, NormStats::kStdFloor);
  }
  const Matrix t = raw_targets(data, mode);
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    const double rms = std::sqrt(t.col(j).squaredNorm() / m);
    norm.target_scale(j) = std::max(rms, NormStats::kStdFloor);
  }
  return norm;
}

Matrix build_theta(const Dataset& data, const LibrarySpec& library, const NormStats& norm) {
  check_library(data, library);
  const Matrix raw = data.inputs();
  Matrix z = (raw.rowwise() - norm.input_mean.transpose()).array().rowwise() /
             norm.input_std.transpose().array();
  return evaluate(library, z, raw);
}

Matrix build_targets(const Dataset& data, const NormStats& norm, TargetMode mode) {
  Matrix t = raw_targets(data, mode);
  return t.array().rowwise() / norm.target_scale.transpose().array();
}

SindyModel fit_single(const Dataset& data, const LibrarySpec& library,
                      const StlsqConfig& config, TargetMode mode,
                      const std::vector<std::string>& state_names) {
  data.validate();
  if (data.size() < 1) throw Error(ErrorKind::kTooFewSamples, "dataset is empty");
  const NormStats norm = compute_norm(data, library, mode);
  const Matrix theta = build_theta(data, library, norm);
  SparseSolution sol = stlsq(theta, build_targets(data, norm, mode), config);
  FitReport report;
  report.train_mse = column_mse(apply(theta, sol, norm, mode, data.states()), data.next_states());
  report.chosen = config;
  report.dataset_fingerprint = data.fingerprint();
  report.libraries = {library};
  return SindyModel(data.env_name, names_or_default(state_names, data.state_dim), library,
                    std::move(sol), norm, mode, config, std::move(report));
}

double selection_tolerance(const Matrix& validation_next_states) {
  return kTieRelativeTolerance * validation_next_states.array().square().colwise().mean().mean();
}

std::size_t select_candidate(const std::vector<CandidateScore>& scores, double tolerance) {
  if (scores.empty()) throw Error(ErrorKind::kInvalidArgument, "no candidates to select from");
  double best_mse = std::numeric_limits<double>::infinity();
  for (const auto& c : scores) best_mse = std::min(best_mse, c.validation_mse);
  std::size_t chosen = scores.size();
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const CandidateScore& c = scores[i];
    if (!(c.validation_mse <= best_mse + tolerance)) continue;
    if (chosen == scores.size()) {
      chosen = i;
      continue;
    }
    const CandidateScore& b = scores[chosen];
    if (c.nonzeros != b.nonzeros ? c.nonzeros < b.nonzeros : c.threshold < b.threshold)
      chosen = i;
  }
  // Every score is infinite.
  return chosen == scores.size() ? 0 : chosen;
}

SindyModel fit(const Dataset& data, const GridSearchSpec& grid, std::uint64_t seed,
               const std::vector<std::string>& state_names,
               const std::vector<int>& excluded_rows) {
  validate(grid);
  data.validate();
  std::vector<bool> skip(data.size(), false);
  for (int r : excluded_rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= data.size())
      throw Error(ErrorKind::kInvalidArgument,
                  "excluded row " + std::to_string(r) + " is out of range");
    skip[r] = true;
  }
  std::vector<int> usable;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!skip[i]) usable.push_back(static_cast<int>(i));
  constexpr std::size_t kMinTransitions = 10;
  if (usable.size() < kMinTransitions)
    throw Error(ErrorKind::kTooFewSamples,
                "too few transitions: " + std::to_string(usable.size()) +
                    " usable, at least " + std::to_string(kMinTransitions) + " required");
  for (const auto& lib : grid.libraries) check_library(data, lib);

  auto [train_rows, val_rows] = split_rows(usable.size(), grid.validation_fraction, seed);
  for (int& r : train_rows) r = usable[r];
  for (int& r : val_rows) r = usable[r];
  const Dataset train = data.subset(train_rows);
  const Dataset val = data.subset(val_rows);
  const Matrix val_states = val.states();
  const Matrix val_next = val.next_states();

  struct Fitted {
    SparseSolution solution;
    Vector val_mse;
    int norm_index = 0;
  };
  std::vector<NormStats> norms;
  std::vector<Fitted> fitted;
  std::vector<CandidateScore> scores;
  for (std::size_t li = 0; li < grid.libraries.size(); ++li) {
    const LibrarySpec& lib = grid.libraries[li];
    norms.push_back(compute_norm(train, lib, grid.target_mode));
    const NormStats& norm = norms.back();
    const Matrix theta_train = build_theta(train, lib, norm);
    const Matrix theta_val = build_theta(val, lib, norm);
    const Matrix targets = build_targets(train, norm, grid.target_mode);
    for (double threshold : grid.thresholds) {
      for (double ridge : grid.ridges) {
        StlsqConfig cfg{threshold, ridge, grid.max_iterations};
        SparseSolution sol = stlsq(theta_train, targets, cfg);
        const Vector mse =
            column_mse(apply(theta_val, sol, norm, grid.target_mode, val_states), val_next);
        CandidateScore sc;
        sc.library = static_cast<int>(li);
        sc.threshold = threshold;
        sc.ridge = ridge;
        sc.validation_mse = mse.mean();
        if (!std::isfinite(sc.validation_mse))
          sc.validation_mse = std::numeric_limits<double>::infinity();
        sc.nonzeros = sol.nonzeros();
        sc.all_degenerate = sc.nonzeros == 0;
        scores.push_back(sc);
        fitted.push_back({std::move(sol), mse, static_cast<int>(li)});
      }
    }
  }

  // All-zero targets are fitted exactly by the empty model; anything else
  // collapsing to it means the thresholds are too aggressive.
  const bool zero_targets =
      build_targets(train, norms.front(), grid.target_mode).cwiseAbs().maxCoeff() == 0.0;
  if (!zero_targets && std::all_of(scores.begin(), scores.end(),
                                   [](const CandidateScore& s) { return s.all_degenerate; }))
    throw Error(ErrorKind::kDegenerate,
                "every grid candidate thresholded all coefficients away on every "
                "state dimension; reduce the threshold candidates");

  const double tie_tolerance = selection_tolerance(val_next);
  const std::size_t chosen_index = select_candidate(scores, tie_tolerance);
  struct {
    CandidateScore score;
    SparseSolution solution;
    NormStats norm;
    Vector val_mse;
  } best{scores[chosen_index], std::move(fitted[chosen_index].solution),
         norms[fitted[chosen_index].norm_index], fitted[chosen_index].val_mse};

  const LibrarySpec& lib = grid.libraries[best.score.library];
  FitReport report;
  report.tie_tolerance = tie_tolerance;
  report.validation_mse = best.val_mse;
  {
    const Matrix theta_train = build_theta(train, lib, best.norm);
    report.train_mse = column_mse(
        apply(theta_train, best.solution, best.norm, grid.target_mode, train.states()),
        train.next_states());
  }
  report.library_index = best.score.library;
  report.chosen = {best.score.threshold, best.score.ridge, grid.max_iterations};
  report.dataset_fingerprint = data.fingerprint();
  {
    std::string rows;
    for (int r : val_rows) rows += std::to_string(r) + ",";
    report.split_fingerprint = sha256_hex(rows);
  }
  report.seed = seed;
  report.validation_rows = val_rows;
  report.excluded_rows = excluded_rows;
  std::sort(report.excluded_rows.begin(), report.excluded_rows.end());
  report.libraries = grid.libraries;
  report.candidates = std::move(scores);
  const StlsqConfig chosen = report.chosen;
  return SindyModel(data.env_name, names_or_default(state_names, data.state_dim), lib,
                    std::move(best.solution), best.norm, grid.target_mode, chosen,
                    std::move(report));
}

// ------------------------------------------------------------ equations

std::vector<std::vector<EquationTerm>> equations(const SindyModel& model) {
  const LibrarySpec& lib = model.library();
  const auto names = term_names(lib);
  const auto info = term_info(lib);
  const NormStats& norm = model.norm();
  const Matrix& xi = model.solution().coefficients;
  std::vector<std::vector<EquationTerm>> out(model.state_dim());

  for (int j = 0; j < model.state_dim(); ++j) {
    const double scale = norm.target_scale(j);
    double bias = 0.0;
    bool has_bias = false;
    std::vector<EquationTerm> terms;
    for (int k : model.solution().support[j]) {
      const double c = xi(k, j) * scale;
      const TermInfo& t = info[k];
      if (t.kind == TermKind::kBias) {
        bias += c;
        has_bias = true;
      } else if (t.kind == TermKind::kPolynomial && t.degree == 1) {
        // c * (x - mean) / std = (c / std) * x - c * mean / std
        const double s = norm.input_std(t.input);
        const double mu = norm.input_mean(t.input);
        terms.push_back({names[k], c / s, false});
        if (mu != 0.0) {
          bias -= c * mu / s;
          has_bias = true;
        }
      } else if (t.kind == TermKind::kPolynomial) {
        bool centred = false;
        double denom = 1.0;
        for (std::size_t i = 0; i < t.exponents.size(); ++i) {
          if (t.exponents[i] == 0) continue;
          centred = centred || norm.input_mean(static_cast<Eigen::Index>(i)) != 0.0;
          denom *= std::pow(norm.input_std(static_cast<Eigen::Index>(i)), t.exponents[i]);
        }
        if (centred) {
          terms.push_back({"z[" + names[k] + "]", c, true});
        } else {
          terms.push_back({names[k], c / denom, false});
        }
      } else {
        terms.push_back({names[k], c, false});
      }
    }
    // Folding linear offsets into the constant can leave rounding residue
    // where the true constant is zero.
    if (has_bias && std::abs(bias) > 1e-12 * scale) {
      terms.insert(terms.begin(), EquationTerm{"1", bias, false});
    }
    out[j] = std::move(terms);
  }
  return out;
}

namespace {

std::string format_coefficient(double c) {
  std::ostringstream os;
  os.precision(6);
  os << c;
  return os.str();
}

}  // namespace

std::string print_equations(const SindyModel& model) {
  const auto eqs = equations(model);
  std::ostringstream os;
  const bool delta = model.target_mode() == TargetMode::kDeltaState;
  for (int j = 0; j < model.state_dim(); ++j) {
    const std::string& name = model.state_names()[j];
    os << name << "' = ";
    bool first = true;
    if (delta) {
      os << name;
      first = false;
    }
    if (eqs[j].empty()) {
      os << (first ? "0" : " + 0");
    }
    for (const EquationTerm& t : eqs[j]) {
      const double mag = std::abs(t.coefficient);
      if (first) {
        if (t.coefficient < 0) os << "-";
      } else {
        os << (t.coefficient < 0 ? " - " : " + ");
      }
      first = false;
      if (t.name == "1") {
        os << format_coefficient(mag);
      } else {
        os << format_coefficient(mag) << "*" << t.name;
      }
    }
    os << "\n";
  }
  bool any_normalized = false;
  for (const auto& e : eqs)
    for (const auto& t : e) any_normalized = any_normalized || t.normalized;
  if (any_normalized)
    os << "# z[...] terms are evaluated on normalized inputs (x - mean) / std\n";
  return os.str();
}

// -------------------------------------------------------- serialization

namespace {

ordered_json vec_to_json(const Vector& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vector vec_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::ordered_json library_to_json(const LibrarySpec& lib) {
  ordered_json j;
  j["include_bias"] = lib.include_bias;
  j["poly_degree"] = lib.poly_degree;
  j["trig_frequencies"] = lib.trig_frequencies;
  j["rational_enabled"] = lib.rational_enabled;
  j["rational_guard"] = lib.rational_guard;
  j["input_names"] = lib.input_names;
  j["n_indicators"] = lib.n_indicators;
  return j;
}

LibrarySpec library_from_json(const nlohmann::json& j) {
  LibrarySpec lib;
  lib.include_bias = j.at("include_bias").get<bool>();
  lib.poly_degree = j.at("poly_degree").get<int>();
  lib.trig_frequencies = j.at("trig_frequencies").get<std::vector<double>>();
  lib.rational_enabled = j.at("rational_enabled").get<bool>();
  lib.rational_guard = j.at("rational_guard").get<double>();
  lib.input_names = j.at("input_names").get<std::vector<std::string>>();
  lib.n_indicators = j.at("n_indicators").get<int>();
  return lib;
}

std::string serialize(const SindyModel& model) {
  ordered_json j;
  j["format"] = "sdrl-sindy-model";
  j["format_version"] = kModelFormatVersion;
  j["env"] = model.env_name();
  j["state_names"] = model.state_names();
  j["target_mode"] = to_string(model.target_mode());
  j["library"] = library_to_json(model.library());
  j["term_names"] = term_names(model.library());
  j["norm"] = {{"input_mean", vec_to_json(model.norm().input_mean)},
               {"input_std", vec_to_json(model.norm().input_std)},
               {"target_scale", vec_to_json(model.norm().target_scale)}};
  const Matrix& xi = model.solution().coefficients;
  ordered_json rows = ordered_json::array();
  for (Eigen::Index r = 0; r < xi.rows(); ++r) rows.push_back(vec_to_json(xi.row(r).transpose()));
  j["coefficients"] = {{"rows", xi.rows()}, {"cols", xi.cols()}, {"data", rows}};
  j["support"] = model.solution().support;
  j["stlsq"] = {{"threshold", model.config().threshold},
                {"ridge", model.config().ridge},
                {"max_iterations", model.config().max_iterations},
                {"iterations_used", model.solution().iterations_used},
                {"converged", model.solution().converged},
                {"degenerate", model.solution().degenerate}};
  const FitReport& r = model.report();
  ordered_json rep;
  rep["train_mse"] = vec_to_json(r.train_mse);
  rep["validation_mse"] = vec_to_json(r.validation_mse);
  rep["library_index"] = r.library_index;
  rep["dataset_fingerprint"] = r.dataset_fingerprint;
  rep["split_fingerprint"] = r.split_fingerprint;
  rep["seed"] = r.seed;
  rep["tie_tolerance"] = r.tie_tolerance;
  rep["validation_rows"] = r.validation_rows;
  rep["excluded_rows"] = r.excluded_rows;
  rep["libraries"] = ordered_json::array();
  for (const auto& lib : r.libraries) rep["libraries"].push_back(library_to_json(lib));
  rep["candidates"] = ordered_json::array();
  for (const auto& c : r.candidates)
    rep["candidates"].push_back({{"library", c.library},
                                 {"threshold", c.threshold},
                                 {"ridge", c.ridge},
                                 {"validation_mse", c.validation_mse},
                                 {"nonzeros", c.nonzeros},
                                 {"all_degenerate", c.all_degenerate}});
  j["fit_report"] = rep;
  return j.dump(1) + "\n";
}

SindyModel deserialize(const std::string& text, const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kSchema,
                origin + ": truncated or malformed model file (" + e.what() + ")");
  }
  try {
    if (j.value("format", std::string()) != "sdrl-sindy-model")
      throw Error(ErrorKind::kSchema, origin + ": not a SINDy model file");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw Error(ErrorKind::kVersion,
                  origin + ": model format version " + std::to_string(version) +
                      " is not supported (this build reads version " +
                      std::to_string(kModelFormatVersion) + ")");
    LibrarySpec lib = library_from_json(j.at("library"));
    auto state_names = j.at("state_names").get<std::vector<std::string>>();
    NormStats norm;
    norm.input_mean = vec_from_json(j.at("norm").at("input_mean"));
    norm.input_std = vec_from_json(j.at("norm").at("input_std"));
    norm.target_scale = vec_from_json(j.at("norm").at("target_scale"));
    const auto& cj = j.at("coefficients");
    const auto rows = cj.at("rows").get<Eigen::Index>();
    const auto cols = cj.at("cols").get<Eigen::Index>();
    const auto& data = cj.at("data");
    if (static_cast<Eigen::Index>(data.size()) != rows)
      throw Error(ErrorKind::kDimension, origin + ": coefficient row count mismatch");
    SparseSolution sol;
    sol.coefficients.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Vector row = vec_from_json(data.at(static_cast<std::size_t>(r)));
      if (row.size() != cols)
        throw Error(ErrorKind::kDimension, origin + ": coefficient column count mismatch");
      sol.coefficients.row(r) = row.transpose();
    }
    sol.support = j.at("support").get<std::vector<std::vector<int>>>();
    const auto& st = j.at("stlsq");
    StlsqConfig config{st.at("threshold").get<double>(), st.at("ridge").get<double>(),
                       st.at("max_iterations").get<int>()};
    sol.iterations_used = st.at("iterations_used").get<int>();
    sol.converged = st.at("converged").get<bool>();
    sol.degenerate = st.at("degenerate").get<bool>();
    // Off-support entries must be exact zeros.
    for (Eigen::Index c = 0; c < cols && c < static_cast<Eigen::Index>(sol.support.size()); ++c) {
      std::vector<bool> on(static_cast<std::size_t>(rows), false);
      for (int k : sol.support[c])
        if (k >= 0 && k < rows) on[k] = true;
      for (Eigen::Index r = 0; r < rows; ++r)
        if (!on[r] && sol.coefficients(r, c) != 0.0)
          throw Error(ErrorKind::kSchema, origin + ": nonzero coefficient outside support");
    }

    FitReport rep;
    if (j.contains("fit_report")) {
      const auto& fr = j.at("fit_report");
      rep.train_mse = vec_from_json(fr.at("train_mse"));
      rep.validation_mse = vec_from_json(fr.at("validation_mse"));
      rep.library_index = fr.at("library_index").get<int>();
      rep.dataset_fingerprint = fr.at("dataset_fingerprint").get<std::string>();
      rep.split_fingerprint = fr.at("split_fingerprint").get<std::string>();
      rep.seed = fr.at("seed").get<std::uint64_t>();
      rep.tie_tolerance = fr.value("tie_tolerance", 0.0);
      rep.validation_rows = fr.at("validation_rows").get<std::vector<int>>();
      rep.excluded_rows = fr.value("excluded_rows", std::vector<int>{});
      for (const auto& l : fr.at("libraries")) rep.libraries.push_back(library_from_json(l));
      for (const auto& c : fr.at("candidates")) {
        CandidateScore s;
        s.library = c.at("library").get<int>();
        s.threshold = c.at("threshold").get<double>();
        s.ridge = c.at("ridge").get<double>();
        s.validation_mse = c.at("validation_mse").is_number()
                               ? c.at("validation_mse").get<double>()
                               : std::numeric_limits<double>::infinity();
        s.nonzeros = c.at("nonzeros").get<int>();
        s.all_degenerate = c.at("all_degenerate").get<bool>();
        rep.candidates.push_back(s);
      }
      rep.chosen = config;
    }
    return SindyModel(j.at("env").get<std::string>(), std::move(state_names), std::move(lib),
                      std::move(sol), std::move(norm),
                      target_mode_from_string(j.at("target_mode").get<std::string>()), config,
                      std::move(rep));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, origin + ": invalid model file (" + e.what() + ")");
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kInvalidArgument)
      throw Error(ErrorKind::kSchema, origin + ": " + e.what());
    throw;
  }
}

void save_model(const SindyModel& model, const std::filesystem::path& path) {
  write_text_file(path, serialize(model));
}

SindyModel load_model(const std::filesystem::path& path) {
  return deserialize(read_text_file(path), path.string());
}

}  // namespace sdrl
