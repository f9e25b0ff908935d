#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdrl/envs.hpp"
#include "sdrl/surrogate.hpp"

namespace sdrl {

// Linear map from z-scored state to action pre-activations. Continuous
// spaces squash one output with tanh onto [low, high]; discrete spaces take
// the argmax of n scores, lowest index on ties.
class LinearPolicy {
 public:
  LinearPolicy(ActionSpace space, Vector state_mean, Vector state_std, Vector params);

  static int head_width(const ActionSpace& space);
  static int parameter_count(int state_dim, const ActionSpace& space);

  Action act(const Vector& state) const;
  // Pre-activations (one per head output).
  Vector scores(const Vector& state) const;

  const ActionSpace& action_space() const { return space_; }
  const Vector& state_mean() const { return mean_; }
  const Vector& state_std() const { return std_; }
  const Vector& params() const { return params_; }
  int state_dim() const { return static_cast<int>(mean_.size()); }

  Controller controller() const;

 private:
  ActionSpace space_;
  Vector mean_;
  Vector std_;
  Vector params_;  // row-major (width x (state_dim + 1)), bias last
};

struct CemConfig {
  int population = 64;
  double elite_fraction = 0.125;
  int iterations = 60;
  double initial_std = 1.0;
  double std_floor = 0.02;
  int episodes_per_candidate = 3;
  // Each generation's leader and the final sampling mean are re-scored on
  // this many common episodes; the best re-scored one is returned.
  int selection_episodes = 20;
  int horizon = 0;  // 0: environment max episode steps
  int norm_steps = 1000;
  int threads = 0;  // 0: hardware concurrency
  std::uint64_t seed = 0;

  int elite_count() const;
};

void validate(const CemConfig& config);

struct CurvePoint {
  int iteration = 0;
  double mean_return = 0.0;
  double max_return = 0.0;
  double best_return = 0.0;  // best candidate so far
  std::uint64_t cumulative_steps = 0;
};

struct TrainResult {
  LinearPolicy policy;
  double best_return = 0.0;  // re-evaluated mean return of `policy`
  std::vector<CurvePoint> curve;
  std::uint64_t steps = 0;  // all environment steps, normalization rollout included
};

// State mean/std from a uniformly random rollout of `steps` steps.
std::pair<Vector, Vector> random_rollout_stats(Environment& env, int steps,
                                               std::uint64_t seed);

// Cross-entropy method over LinearPolicy parameters. The initial population
// is always evaluated; `iterations` further generations follow. Candidates
// within a generation share reset seeds; non-finite returns score as -inf.
// A generation's fitness comes from a few episodes, so the returned policy
// is picked by a common re-evaluation (see selection_episodes).
TrainResult train(const Environment& env, const CemConfig& config);

struct PolicyEvaluation {
  double mean_return = 0.0;
  double success_rate = 0.0;
  int successes = 0;
  std::vector<double> returns;
  std::uint64_t steps = 0;
};

// Episode e starts from reset seed derive_seed(seed, e).
PolicyEvaluation evaluate_policy(Environment& env, const Controller& policy, int n_episodes,
                                 std::uint64_t seed, int horizon = 0);

struct ActionMap {
  int dim_x = 0;
  int dim_y = 0;
  std::vector<double> xs;
  std::vector<double> ys;
  Matrix values;  // ys.size() x xs.size(); discrete actions as indices
};

// Evaluates `policy` on the rectangular grid over state dims (dim_x,
// dim_y), other dims taken from `base`.
ActionMap policy_action_map(const Controller& policy, const Vector& base, int dim_x,
                            const std::vector<double>& xs, int dim_y,
                            const std::vector<double>& ys);

// Evenly spaced grid of n points over [lo, hi].
std::vector<double> linspace(double lo, double hi, int n);

// Long format: "<x name>,<y name>,action".
std::string to_csv(const ActionMap& map, const std::vector<std::string>& state_names);

// Fraction of grid points where two maps agree: equal indices for discrete
// actions, equal force direction (sign, zero counted as positive) for
// continuous ones.
double action_agreement(const ActionMap& a, const ActionMap& b, ActionKind kind);

std::string to_csv(const std::vector<CurvePoint>& curve);

inline constexpr int kPolicyFormatVersion = 1;
std::string serialize(const LinearPolicy& policy, const std::string& env_name);
LinearPolicy deserialize_policy(const std::string& text, const std::string& origin = "policy");
// Policy plus the environment name it was trained for.
std::pair<LinearPolicy, std::string> load_policy_json(const std::string& text,
                                                      const std::string& origin = "policy");
void save_policy(const LinearPolicy& policy, const std::string& env_name,
                 const std::filesystem::path& path);
// Returns the policy and the environment name it was trained for.
std::pair<LinearPolicy, std::string> load_policy(const std::filesystem::path& path);

}  // namespace sdrl
