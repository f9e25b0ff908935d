#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdrl/dataset.hpp"
#include "sdrl/envs.hpp"
#include "sdrl/rl.hpp"
#include "sdrl/sindy.hpp"

namespace sdrl {

// Column-wise mean squared error. Throws kDimension on shape mismatch or an
// empty input.
Vector mse_per_dim(const Matrix& pred, const Matrix& truth);

// Column-wise Pearson correlation; std::nullopt where either column is
// constant.
std::vector<std::optional<double>> pearson_per_dim(const Matrix& pred, const Matrix& truth);

// Open-loop k-step error. From every start row r in `rows` whose episode
// continues for k recorded steps, the recorded actions are replayed through
// the surrogate (model + bound projection) and through the task dynamics;
// returns the per-dim RMSE of the final states. Throws kTooFewSamples when
// no such segment exists.
Vector kstep_divergence(const SindyModel& model, const Task& task, const Dataset& data,
                        int k, const std::vector<int>& rows = {});

struct EvalReport {
  std::string env_name;
  std::string library;
  std::string dataset_fingerprint;
  std::vector<std::string> state_names;
  int rows = 0;
  bool held_out = false;  // rows are the model's validation split
  Vector mse;             // original units
  Vector mse_normalized;  // states divided by the dataset's per-dim std
  Vector state_std;
  std::vector<std::optional<double>> pearson;
  std::vector<int> ks;
  std::vector<std::optional<Vector>> kstep_rmse;  // per k; nullopt: no segment
};

// Single-step metrics use surrogate predictions on the model's validation
// rows when the model was fitted on `data`, otherwise on every row.
EvalReport evaluate_model(const SindyModel& model, const Task& task, const Dataset& data,
                          const std::vector<int>& ks = {1, 5, 10});

std::string to_csv(const EvalReport& report);
nlohmann::ordered_json to_json(const EvalReport& report);

struct AblationRow {
  std::string env_name;
  std::string library;
  bool ok = false;
  std::string error;
  double mean_mse = 0.0;  // validation, original units
  Vector mse;
  Vector mse_normalized;
  double threshold = 0.0;
  double ridge = 0.0;
  int nonzeros = 0;
};

// One grid search per library candidate (thresholds and ridges from
// `grid`). A failing candidate yields a row with ok = false.
std::vector<AblationRow> ablation_report(const Dataset& data, const EnvironmentSpec& spec,
                                         const std::vector<LibrarySpec>& libraries,
                                         const GridSearchSpec& grid, std::uint64_t seed);

std::string to_csv(const std::vector<AblationRow>& rows,
                   const std::vector<std::string>& state_names);

struct PipelineCost {
  std::string label;
  PolicyEvaluation evaluation;  // on the real environment
  std::uint64_t real_training_steps = 0;  // collection (SD-RL) or CEM (baseline)
  std::uint64_t surrogate_steps = 0;
  std::uint64_t real_evaluation_steps = 0;
};

struct CompareReport {
  PipelineCost sdrl;
  PipelineCost baseline;
  double return_ratio = 0.0;       // sdrl / baseline mean return
  double interaction_ratio = 0.0;  // baseline / sdrl real training steps
  // SD-RL mean return >= baseline - 10% of |baseline|.
  bool comparable = false;
  // Share of an action-map grid where both policies agree, when computed.
  std::optional<double> action_agreement;
};

inline constexpr double kComparableFraction = 0.9;

CompareReport compare_report(const PipelineCost& sdrl, const PipelineCost& baseline);

std::string to_csv(const CompareReport& report);
nlohmann::ordered_json to_json(const CompareReport& report);

}  // namespace sdrl
