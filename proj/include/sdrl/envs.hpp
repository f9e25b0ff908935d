#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sdrl/common.hpp"

namespace sdrl {

// A continuous action value or a discrete action index.
using Action = std::variant<double, int>;

enum class ActionKind { kContinuous, kDiscrete };

struct ActionSpace {
  ActionKind kind = ActionKind::kContinuous;
  double low = -1.0;   // continuous only
  double high = 1.0;   // continuous only
  int n = 0;           // discrete only

  // Width of the action encoding fed to the feature library: 1 for a
  // continuous action, n - 1 indicators for a discrete one (index 0 is the
  // reference action and encodes as all zeros).
  int encoded_width() const { return kind == ActionKind::kContinuous ? 1 : n - 1; }
};

struct EnvironmentSpec {
  std::string name;
  std::vector<std::string> state_names;
  Vector lower;
  Vector upper;
  ActionSpace action_space;
  std::vector<std::string> action_names;  // encoded action columns
  int max_episode_steps = 0;
  std::string reward_id;
  std::string termination_id;

  int state_dim() const { return static_cast<int>(state_names.size()); }
};

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  bool success = false;  // goal reached / soft landing on this step
};

// Reward and termination for one transition.
struct Outcome {
  double reward = 0.0;
  bool terminated = false;
  bool success = false;
};

// The stateless analytic description of a benchmark: initial-state
// distribution, ground-truth dynamics, admissible set, reward, and
// termination. Surrogates reuse everything except `dynamics`.
class Task {
 public:
  virtual ~Task() = default;

  virtual const EnvironmentSpec& spec() const = 0;

  // Deterministic in `seed`.
  virtual Vector reset_state(std::uint64_t seed) const = 0;

  // Ground-truth next state, already admissible.
  virtual Vector dynamics(const Vector& state, const Action& action) const = 0;

  // Maps a proposed next state onto the admissible set. Identity on states
  // that `dynamics` can produce.
  virtual Vector enforce_bounds(const Vector& state, const Vector& proposed) const = 0;

  virtual Outcome outcome(const Vector& state, const Action& action,
                          const Vector& next_state) const = 0;

  // Throws kInvalidArgument for actions outside the action space.
  void validate_action(const Action& action) const;
  // Throws kNonFinite / kInvalidArgument for unusable states.
  virtual void validate_state(const Vector& state) const;

  Vector encode_action(const Action& action) const;
  void encode_action(const Action& action, double* out) const;
  Action decode_action(const double* encoded) const;

  // Pure single step: dynamics followed by the analytic outcome. Never
  // truncates; episode length is tracked by Environment.
  StepResult step(const Vector& state, const Action& action) const;
};

// Mountain Car with a continuous force in [-1, 1].
class MountainCar final : public Task {
 public:
  static constexpr double kMinPosition = -1.2;
  static constexpr double kMaxPosition = 0.6;
  static constexpr double kMaxSpeed = 0.07;
  static constexpr double kGoalPosition = 0.45;
  static constexpr double kPower = 0.0015;
  static constexpr double kGravity = 0.0025;

  MountainCar();

  const EnvironmentSpec& spec() const override { return spec_; }
  Vector reset_state(std::uint64_t seed) const override;
  Vector dynamics(const Vector& state, const Action& action) const override;
  Vector enforce_bounds(const Vector& state, const Vector& proposed) const override;
  Outcome outcome(const Vector& state, const Action& action,
                  const Vector& next_state) const override;
  void validate_state(const Vector& state) const override;

 private:
  EnvironmentSpec spec_;
};

enum LanderAction : int { kNoop = 0, kLeft = 1, kMain = 2, kRight = 3 };

// Planar rigid-body lander: state (x, y, vx, vy, theta, omega), four
// discrete actions, semi-implicit Euler integration.
class LunarLander final : public Task {
 public:
  static constexpr double kDt = 0.02;
  static constexpr double kGravity = 1.0;
  static constexpr double kMainThrust = 3.0;
  static constexpr double kSideTorque = 3.0;
  static constexpr double kSideThrust = 0.3;
  static constexpr double kMaxAbsX = 1.5;
  static constexpr double kSoftLandingSpeed = 0.5;
  static constexpr double kSoftLandingAngle = 0.2;
  static constexpr double kShapingScale = 100.0;

  LunarLander();

  const EnvironmentSpec& spec() const override { return spec_; }
  Vector reset_state(std::uint64_t seed) const override;
  Vector dynamics(const Vector& state, const Action& action) const override;
  Vector enforce_bounds(const Vector& state, const Vector& proposed) const override;
  Outcome outcome(const Vector& state, const Action& action,
                  const Vector& next_state) const override;

  static double shaping(const Vector& state);

 private:
  EnvironmentSpec spec_;
};

// "mountain_car" or "lunar_lander"; throws kInvalidArgument otherwise.
std::shared_ptr<const Task> make_task(std::string_view name);

StepResult mc_step(const Vector& state, double action);
StepResult ll_step(const Vector& state, LanderAction action);

// Counts environment interactions per kind. Environments and their clones
// share one ledger.
struct InteractionLedger {
  std::atomic<std::uint64_t> real{0};
  std::atomic<std::uint64_t> surrogate{0};
};

// Episode wrapper around a transition function. Single-threaded; use
// clone() to get an independent instance for another thread.
class Environment {
 public:
  explicit Environment(std::shared_ptr<const Task> task,
                       std::shared_ptr<InteractionLedger> ledger = nullptr);
  virtual ~Environment() = default;

  const Task& task() const { return *task_; }
  const std::shared_ptr<const Task>& task_ptr() const { return task_; }
  const EnvironmentSpec& spec() const { return task_->spec(); }
  const std::shared_ptr<InteractionLedger>& ledger() const { return ledger_; }

  Vector reset(std::uint64_t seed);
  StepResult step(const Action& action);

  const Vector& state() const { return state_; }
  int episode_steps() const { return episode_steps_; }
  // Steps taken by this instance over its lifetime.
  std::uint64_t total_steps() const { return total_steps_; }

  virtual bool is_surrogate() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

 protected:
  virtual StepResult transition(const Vector& state, const Action& action) = 0;

 private:
  std::shared_ptr<const Task> task_;
  std::shared_ptr<InteractionLedger> ledger_;
  Vector state_;
  bool ready_ = false;
  int episode_steps_ = 0;
  std::uint64_t total_steps_ = 0;
};

// The ground-truth environment.
class RealEnv final : public Environment {
 public:
  using Environment::Environment;
  bool is_surrogate() const override { return false; }
  std::unique_ptr<Environment> clone() const override;

 protected:
  StepResult transition(const Vector& state, const Action& action) override;
};

std::unique_ptr<Environment> make_real_env(
    std::string_view name, std::shared_ptr<InteractionLedger> ledger = nullptr);

}  // namespace sdrl
