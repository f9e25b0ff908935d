#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdrl/common.hpp"
#include "sdrl/dataset.hpp"
#include "sdrl/features.hpp"
#include "sdrl/stlsq.hpp"

namespace sdrl {

enum class TargetMode { kNextState, kDeltaState };

const char* to_string(TargetMode mode);
TargetMode target_mode_from_string(const std::string& s);

// Input normalization for polynomial terms plus per-target scaling.
//
// Polynomial terms read (x - input_mean) / input_std. fit() sets
// input_mean to 0 and input_std to the training RMS of each continuous input
// (floored at 1e-8), so every polynomial term keeps an exact original-unit
// form and no bias is needed to absorb a shift. Indicator inputs keep
// mean 0 / std 1. Regression targets are divided by their training RMS
// (floored at 1e-8) but never centred, so a zero coefficient matrix maps to
// a zero target.
struct NormStats {
  static constexpr double kStdFloor = 1e-8;

  Vector input_mean;
  Vector input_std;
  Vector target_scale;

  static NormStats identity(int n_inputs, int n_targets);
};

// One point of the hyperparameter grid and how it scored on validation.
struct CandidateScore {
  int library = 0;
  double threshold = 0.0;
  double ridge = 0.0;
  double validation_mse = 0.0;  // mean over state dims, original units
  int nonzeros = 0;
  bool all_degenerate = false;
};

struct FitReport {
  Vector train_mse;        // per state dim, original units
  Vector validation_mse;   // per state dim, original units
  int library_index = 0;
  StlsqConfig chosen;
  std::string dataset_fingerprint;
  std::string split_fingerprint;
  std::uint64_t seed = 0;
  double tie_tolerance = 0.0;
  std::vector<int> validation_rows;
  std::vector<int> excluded_rows;  // left out of both train and validation
  std::vector<LibrarySpec> libraries;
  std::vector<CandidateScore> candidates;
};

// f_SINDy: sparse coefficients over a feature library, with normalization.
// Immutable once built; safe to share across threads.
class SindyModel {
 public:
  SindyModel(std::string env_name, std::vector<std::string> state_names,
             LibrarySpec library, SparseSolution coefficients, NormStats norm,
             TargetMode mode, StlsqConfig config = {}, FitReport report = {});

  const std::string& env_name() const { return env_name_; }
  const std::vector<std::string>& state_names() const { return state_names_; }
  int state_dim() const { return static_cast<int>(state_names_.size()); }
  int action_dim() const { return static_cast<int>(library_.n_inputs()) - state_dim(); }
  const LibrarySpec& library() const { return library_; }
  const SparseSolution& solution() const { return solution_; }
  const NormStats& norm() const { return norm_; }
  TargetMode target_mode() const { return mode_; }
  const StlsqConfig& config() const { return config_; }
  const FitReport& report() const { return report_; }

  // Next state for (state, encoded action). Throws kNonFinite on NaN/Inf
  // and kDimension on size mismatch.
  Vector predict(const Vector& state, const Vector& action) const;

  // Unchecked hot-path variant; writes state_dim() values to `out`.
  void predict_into(const double* state, const double* action, double* out) const;

  // Row-wise prediction for a batch.
  Matrix predict(const Matrix& states, const Matrix& actions) const;

 private:
  std::string env_name_;
  std::vector<std::string> state_names_;
  LibrarySpec library_;
  FeatureLibrary features_;
  SparseSolution solution_;
  NormStats norm_;
  TargetMode mode_;
  StlsqConfig config_;
  FitReport report_;
};

struct GridSearchSpec {
  std::vector<double> thresholds;
  std::vector<double> ridges;
  std::vector<LibrarySpec> libraries;
  double validation_fraction = 0.2;
  int max_iterations = 20;
  TargetMode target_mode = TargetMode::kDeltaState;

  // 9 log-spaced thresholds 1e-5..1e-1 and ridges {0, 1e-6, 1e-4, 1e-2}.
  static std::vector<double> default_thresholds();
  static std::vector<double> default_ridges();
};

void validate(const GridSearchSpec& grid);

// Library input names for an environment: state names then encoded action
// names, with the indicator count set for discrete actions.
LibrarySpec library_for(const std::vector<std::string>& state_names,
                        const std::vector<std::string>& action_names,
                        int n_indicators);

// Seeded hold-out split; returns (train rows, validation rows), each sorted.
std::pair<std::vector<int>, std::vector<int>> split_rows(std::size_t n,
                                                         double validation_fraction,
                                                         std::uint64_t seed);

// Normalization statistics from the given rows (scale only, see NormStats).
NormStats compute_norm(const Dataset& data, const LibrarySpec& library,
                       TargetMode mode);

// Library matrix for a dataset under the given normalization.
Matrix build_theta(const Dataset& data, const LibrarySpec& library,
                   const NormStats& norm);

// Regression targets (next state or delta), divided by target_scale.
Matrix build_targets(const Dataset& data, const NormStats& norm, TargetMode mode);

// Validation MSEs closer than this fraction of the mean squared validation
// next state are treated as equal; differences below it are rounding noise.
inline constexpr double kTieRelativeTolerance = 1e-16;

double selection_tolerance(const Matrix& validation_next_states);

// Index of the selected candidate: among candidates whose MSE is within
// `tolerance` of the minimum, fewest nonzeros, then the smaller threshold,
// then the first in grid order.
std::size_t select_candidate(const std::vector<CandidateScore>& scores, double tolerance);

// Grid search over (library, threshold, ridge) with hold-out validation and
// selection by select_candidate.
// Rows in `excluded_rows` take part in neither training nor validation.
SindyModel fit(const Dataset& data, const GridSearchSpec& grid, std::uint64_t seed,
               const std::vector<std::string>& state_names = {},
               const std::vector<int>& excluded_rows = {});

// Fits a single configuration on all given rows (no grid, no split).
SindyModel fit_single(const Dataset& data, const LibrarySpec& library,
                      const StlsqConfig& config, TargetMode mode,
                      const std::vector<std::string>& state_names = {});

// A term of a printed equation.
struct EquationTerm {
  std::string name;
  double coefficient = 0.0;
  // True when the term is written over normalized inputs ("z[x*v]") because
  // a nonzero input mean leaves it without an exact original-unit form.
  bool normalized = false;
};

// Right-hand side per state dim in original units. In delta mode the
// implicit "+ state" is not included.
std::vector<std::vector<EquationTerm>> equations(const SindyModel& model);

// One line per state dim, e.g. "velocity' = velocity + 0.0015*force -
// 0.0025*cos(3*position)".
std::string print_equations(const SindyModel& model);

// LibrarySpec <-> JSON, shared by model and config files.
nlohmann::ordered_json library_to_json(const LibrarySpec& lib);
LibrarySpec library_from_json(const nlohmann::json& j);

// Versioned JSON model file.
inline constexpr int kModelFormatVersion = 1;
std::string serialize(const SindyModel& model);
SindyModel deserialize(const std::string& text, const std::string& origin = "model");
void save_model(const SindyModel& model, const std::filesystem::path& path);
SindyModel load_model(const std::filesystem::path& path);

}  // namespace sdrl
