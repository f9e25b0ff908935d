#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdrl/collect.hpp"
#include "sdrl/metrics.hpp"
#include "sdrl/rl.hpp"
#include "sdrl/sindy.hpp"

namespace sdrl {

inline constexpr int kConfigVersion = 1;

// Stage seed = global seed + fixed offset.
enum class Stage : std::uint64_t {
  kCollect = 1,
  kFit = 2,
  kTrain = 3,
  kEval = 4,
  kBaseline = 5,
};
std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

struct EvalConfig {
  int episodes = 100;
  std::vector<int> ks = {1, 5, 10};
  int map_dim_x = 0;
  int map_dim_y = 1;
  int map_points = 41;
};

struct PipelineConfig {
  std::string env_name = "mountain_car";
  std::uint64_t seed = 0;
  CollectConfig collect;
  GridSearchSpec grid;
  bool exclude_bound_rows = true;
  CemConfig cem;
  EvalConfig eval;

  // Schema defaults for an environment.
  static PipelineConfig defaults_for(const std::string& env_name);
};

void validate(const PipelineConfig& config);

// Default library candidates: degree-2 polynomials, plus trig {1, 2, 3},
// plus rational terms.
std::vector<LibrarySpec> default_libraries(const EnvironmentSpec& spec);

// JSON config. Missing keys take the defaults for the config's env; unknown
// keys are rejected (kSchema); a version other than kConfigVersion raises
// kVersion.
PipelineConfig config_from_json(const nlohmann::json& j, const std::string& origin = "config");
nlohmann::ordered_json to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

// Artifact names inside an output directory.
namespace artifact {
inline constexpr const char* kDataset = "dataset.csv";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kFitReport = "fit_report.json";
inline constexpr const char* kEquations = "equations.txt";
inline constexpr const char* kPolicy = "policy.json";
inline constexpr const char* kLearningCurve = "learning_curve.csv";
inline constexpr const char* kTrainInfo = "train_info.json";
inline constexpr const char* kEvalCsv = "eval_report.csv";
inline constexpr const char* kEvalJson = "eval_report.json";
inline constexpr const char* kPolicyEval = "policy_eval.json";
inline constexpr const char* kActionMap = "action_map.csv";
inline constexpr const char* kAblation = "ablation.csv";
inline constexpr const char* kBaselinePolicy = "baseline_policy.json";
inline constexpr const char* kBaselineCurve = "baseline_learning_curve.csv";
inline constexpr const char* kBaselineActionMap = "baseline_action_map.csv";
inline constexpr const char* kCompareCsv = "compare.csv";
inline constexpr const char* kCompareJson = "compare.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifact

using Logger = std::function<void(const std::string&)>;

struct StageContext {
  PipelineConfig config;
  std::filesystem::path out;
  Logger log;  // may be empty
};

// Each stage reads its inputs from files and writes its artifacts to
// ctx.out. Inputs default to the artifacts of earlier stages in ctx.out.
// Errors are rethrown with the stage name prefixed.
Dataset run_collect(const StageContext& ctx);
SindyModel run_fit(const StageContext& ctx, const std::filesystem::path& dataset = {});
TrainResult run_train(const StageContext& ctx, const std::filesystem::path& model = {});
EvalReport run_eval(const StageContext& ctx, const std::filesystem::path& model = {},
                    const std::filesystem::path& dataset = {},
                    const std::filesystem::path& policy = {});
std::vector<AblationRow> run_ablate(const StageContext& ctx,
                                    const std::filesystem::path& dataset = {});
CompareReport run_compare(const StageContext& ctx, const std::filesystem::path& dataset = {},
                          const std::filesystem::path& policy = {});

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

// Hashes every regular file in `out` except the manifest itself, sorted by
// path, and writes manifest.json together with the hash of the config.
std::vector<ManifestEntry> write_manifest(const std::filesystem::path& out,
                                          const PipelineConfig& config);

// collect -> fit -> train -> eval -> ablate -> compare -> manifest.
std::vector<ManifestEntry> run_pipeline(const StageContext& ctx);

}  // namespace sdrl
