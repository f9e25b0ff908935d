#include "sdrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace sdrl {

// ---------------------------------------------------------------- Task

void Task::validate_action(const Action& action) const {
  const ActionSpace& as = spec().action_space;
  if (as.kind == ActionKind::kContinuous) {
    const double* a = std::get_if<double>(&action);
    if (a == nullptr)
      throw Error(ErrorKind::kInvalidArgument,
                  spec().name + " expects a continuous action");
    if (!std::isfinite(*a))
      throw Error(ErrorKind::kNonFinite, spec().name + ": non-finite action");
    if (*a < as.low || *a > as.high)
      throw Error(ErrorKind::kInvalidArgument,
                  spec().name + ": action " + std::to_string(*a) +
                      " outside [" + std::to_string(as.low) + ", " +
                      std::to_string(as.high) + "]");
  } else {
    const int* a = std::get_if<int>(&action);
    if (a == nullptr)
      throw Error(ErrorKind::kInvalidArgument,
                  spec().name + " expects a discrete action");
    if (*a < 0 || *a >= as.n)
      throw Error(ErrorKind::kInvalidArgument,
                  spec().name + ": invalid action index " + std::to_string(*a));
  }
}

void Task::validate_state(const Vector& state) const {
  if (state.size() != spec().state_dim())
    throw Error(ErrorKind::kDimension,
                spec().name + ": state has " + std::to_string(state.size()) +
                    " entries, expected " + std::to_string(spec().state_dim()));
  require_finite(state, spec().name + " state");
}

void Task::encode_action(const Action& action, double* out) const {
  const ActionSpace& as = spec().action_space;
  if (as.kind == ActionKind::kContinuous) {
    out[0] = std::get<double>(action);
    return;
  }
  const int idx = std::get<int>(action);
  for (int i = 1; i < as.n; ++i) out[i - 1] = (idx == i) ? 1.0 : 0.0;
}

Vector Task::encode_action(const Action& action) const {
  Vector out(spec().action_space.encoded_width());
  encode_action(action, out.data());
  return out;
}

Action Task::decode_action(const double* encoded) const {
  const ActionSpace& as = spec().action_space;
  if (as.kind == ActionKind::kContinuous) return encoded[0];
  int idx = 0;
  for (int i = 1; i < as.n; ++i) {
    if (encoded[i - 1] == 1.0) {
      if (idx != 0)
        throw Error(ErrorKind::kSchema, spec().name + ": action encoding is not one-hot");
      idx = i;
    } else if (encoded[i - 1] != 0.0) {
      throw Error(ErrorKind::kSchema, spec().name + ": action encoding is not one-hot");
    }
  }
  return idx;
}

StepResult Task::step(const Vector& state, const Action& action) const {
  validate_state(state);
  validate_action(action);
  StepResult r;
  r.next_state = dynamics(state, action);
  const Outcome o = outcome(state, action, r.next_state);
  r.reward = o.reward;
  r.terminated = o.terminated;
  r.success = o.success;
  return r;
}

// ---------------------------------------------------------- MountainCar

MountainCar::MountainCar() {
  spec_.name = "mountain_car";
  spec_.state_names = {"position", "velocity"};
  spec_.lower = Vector{{kMinPosition, -kMaxSpeed}};
  spec_.upper = Vector{{kMaxPosition, kMaxSpeed}};
  spec_.action_space = {ActionKind::kContinuous, -1.0, 1.0, 0};
  spec_.action_names = {"force"};
  spec_.max_episode_steps = 999;
  spec_.reward_id = "goal_bonus_minus_action_cost";
  spec_.termination_id = "position_at_least_0.45";
}

void MountainCar::validate_state(const Vector& state) const {
  Task::validate_state(state);
  for (int i = 0; i < 2; ++i) {
    if (state(i) < spec_.lower(i) || state(i) > spec_.upper(i))
      throw Error(ErrorKind::kInvalidArgument,
                  "mountain_car: " + spec_.state_names[i] + " " +
                      std::to_string(state(i)) + " out of bounds");
  }
}

Vector MountainCar::reset_state(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-0.6, -0.4);
  return Vector{{pos(rng), 0.0}};
}

Vector MountainCar::dynamics(const Vector& state, const Action& action) const {
  const double force = std::get<double>(action);
  double position = state(0);
  double velocity = state(1);
  velocity += force * kPower - kGravity * std::cos(3.0 * position);
  velocity = std::clamp(velocity, -kMaxSpeed, kMaxSpeed);
  position += velocity;
  if (position <= kMinPosition) {
    position = kMinPosition;
    velocity = 0.0;
  }
  position = std::min(position, kMaxPosition);
  return Vector{{position, velocity}};
}

Vector MountainCar::enforce_bounds(const Vector& state, const Vector& proposed) const {
  (void)state;
  double velocity = std::clamp(proposed(1), -kMaxSpeed, kMaxSpeed);
  // Position integrates the clamped velocity.
  double position = proposed(0) - (proposed(1) - velocity);
  if (position <= kMinPosition) {
    position = kMinPosition;
    velocity = 0.0;
  }
  position = std::min(position, kMaxPosition);
  return Vector{{position, velocity}};
}

Outcome MountainCar::outcome(const Vector& state, const Action& action,
                             const Vector& next_state) const {
  (void)state;
  const double force = std::get<double>(action);
  Outcome o;
  o.terminated = next_state(0) >= kGoalPosition;
  o.success = o.terminated;
  o.reward = -0.1 * force * force + (o.terminated ? 100.0 : 0.0);
  return o;
}

// ---------------------------------------------------------- LunarLander

LunarLander::LunarLander() {
  constexpr double pi = std::numbers::pi;
  spec_.name = "lunar_lander";
  spec_.state_names = {"x", "y", "vx", "vy", "theta", "omega"};
  spec_.lower = Vector{{-2.0, -0.5, -5.0, -5.0, -pi, -10.0}};
  spec_.upper = Vector{{2.0, 3.0, 5.0, 5.0, pi, 10.0}};
  spec_.action_space = {ActionKind::kDiscrete, 0.0, 0.0, 4};
  spec_.action_names = {"left", "main", "right"};
  spec_.max_episode_steps = 500;
  spec_.reward_id = "shaping_delta_plus_landing_bonus";
  spec_.termination_id = "ground_contact_or_out_of_range";
}

Vector LunarLander::reset_state(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> x0(-0.2, 0.2);
  std::uniform_real_distribution<double> v0(-0.1, 0.1);
  Vector s = Vector::Zero(6);
  s(0) = x0(rng);
  s(1) = 1.2;
  s(2) = v0(rng);
  s(3) = v0(rng);
  return s;
}

Vector LunarLander::dynamics(const Vector& state, const Action& action) const {
  const int a = std::get<int>(action);
  const double theta = state(4);
  double ax = 0.0;
  double ay = -kGravity;
  double alpha = 0.0;
  switch (a) {
    case kMain:
      ax += -std::sin(theta) * kMainThrust;
      ay += std::cos(theta) * kMainThrust;
      break;
    case kLeft:
      // Pushes along +body-x and turns clockwise.
      ax += std::cos(theta) * kSideThrust;
      ay += std::sin(theta) * kSideThrust;
      alpha -= kSideTorque;
      break;
    case kRight:
      ax -= std::cos(theta) * kSideThrust;
      ay -= std::sin(theta) * kSideThrust;
      alpha += kSideTorque;
      break;
    default:
      break;
  }
  Vector next(6);
  next(2) = state(2) + ax * kDt;
  next(3) = state(3) + ay * kDt;
  next(5) = state(5) + alpha * kDt;
  next(0) = state(0) + next(2) * kDt;
  next(1) = state(1) + next(3) * kDt;
  next(4) = state(4) + next(5) * kDt;
  return enforce_bounds(state, next);
}

Vector LunarLander::enforce_bounds(const Vector& state, const Vector& proposed) const {
  (void)state;
  return proposed.cwiseMax(spec_.lower).cwiseMin(spec_.upper);
}

double LunarLander::shaping(const Vector& s) {
  return -kShapingScale *
         (std::hypot(s(0), s(1)) + std::hypot(s(2), s(3)) + std::abs(s(4)));
}

Outcome LunarLander::outcome(const Vector& state, const Action& action,
                             const Vector& next) const {
  (void)action;
  const bool contact = next(1) <= 0.0;
  const bool out_of_range =
      std::abs(next(0)) > kMaxAbsX || std::abs(next(4)) > std::numbers::pi / 2;
  Outcome o;
  o.terminated = contact || out_of_range;
  o.success = contact && !out_of_range && std::abs(next(3)) < kSoftLandingSpeed &&
              std::abs(next(4)) < kSoftLandingAngle;
  o.reward = shaping(next) - shaping(state);
  if (o.success) {
    o.reward += 100.0;
  } else if (o.terminated) {
    o.reward -= 100.0;
  }
  return o;
}

// ------------------------------------------------------------- helpers

std::shared_ptr<const Task> make_task(std::string_view name) {
  if (name == "mountain_car") return std::make_shared<MountainCar>();
  if (name == "lunar_lander") return std::make_shared<LunarLander>();
  throw Error(ErrorKind::kInvalidArgument,
              "unknown environment '" + std::string(name) +
                  "' (expected mountain_car or lunar_lander)");
}

StepResult mc_step(const Vector& state, double action) {
  static const MountainCar task;
  return task.step(state, action);
}

StepResult ll_step(const Vector& state, LanderAction action) {
  static const LunarLander task;
  return task.step(state, static_cast<int>(action));
}

// --------------------------------------------------------- Environment

Environment::Environment(std::shared_ptr<const Task> task,
                         std::shared_ptr<InteractionLedger> ledger)
    : task_(std::move(task)),
      ledger_(ledger ? std::move(ledger) : std::make_shared<InteractionLedger>()) {}

Vector Environment::reset(std::uint64_t seed) {
  state_ = task_->reset_state(seed);
  ready_ = true;
  episode_steps_ = 0;
  return state_;
}

StepResult Environment::step(const Action& action) {
  if (!ready_)
    throw Error(ErrorKind::kInvalidArgument,
                spec().name + ": step() called before reset() or after episode end");
  task_->validate_action(action);
  StepResult r = transition(state_, action);
  ++episode_steps_;
  ++total_steps_;
  if (is_surrogate()) {
    ledger_->surrogate.fetch_add(1, std::memory_order_relaxed);
  } else {
    ledger_->real.fetch_add(1, std::memory_order_relaxed);
  }
  if (!r.terminated && episode_steps_ >= spec().max_episode_steps) r.truncated = true;
  state_ = r.next_state;
  if (r.terminated || r.truncated) ready_ = false;
  return r;
}

std::unique_ptr<Environment> RealEnv::clone() const {
  return std::make_unique<RealEnv>(task_ptr(), ledger());
}

StepResult RealEnv::transition(const Vector& state, const Action& action) {
  return task().step(state, action);
}

std::unique_ptr<Environment> make_real_env(std::string_view name,
                                           std::shared_ptr<InteractionLedger> ledger) {
  return std::make_unique<RealEnv>(make_task(name), std::move(ledger));
}

}  // namespace sdrl
