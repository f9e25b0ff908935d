#include "sdrl/collect.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace sdrl {

namespace {

// Stream ids for derive_seed.
constexpr std::uint64_t kExplorationStream = 1;
constexpr std::uint64_t kEpisodeStream = 1000;

// expert_ll gains.
constexpr double kAngleFromX = 0.5;
constexpr double kAngleFromVx = 1.0;
constexpr double kMaxTargetAngle = 0.4;
constexpr double kAngleGain = 10.0;
constexpr double kRateGain = 2.0;
constexpr double kUrgentTurn = 2.0;
constexpr double kDeadband = 0.2;
constexpr double kDescentBase = 0.1;
constexpr double kDescentPerHeight = 0.4;

}  // namespace

CollectConfig CollectConfig::defaults_for(const std::string& env_name) {
  CollectConfig c;
  c.env_name = env_name;
  c.n_transitions = env_name == "lunar_lander" ? 1000 : 75;
  return c;
}

void validate(const CollectConfig& c) {
  make_task(c.env_name);
  if (!(c.epsilon >= 0.0 && c.epsilon <= 1.0))
    throw Error(ErrorKind::kInvalidArgument, "epsilon must lie in [0, 1]");
  if (c.n_transitions < 1)
    throw Error(ErrorKind::kInvalidArgument, "n_transitions must be >= 1");
  if (c.max_episodes < 1)
    throw Error(ErrorKind::kInvalidArgument, "max_episodes must be >= 1");
  if (c.max_episode_steps < 0)
    throw Error(ErrorKind::kInvalidArgument, "max_episode_steps must be >= 0");
  if (c.expert != "scripted")
    throw Error(ErrorKind::kInvalidArgument, "unknown expert '" + c.expert + "'");
}

double expert_mc(const Vector& state) { return state(1) >= 0.0 ? 1.0 : -1.0; }

LanderAction expert_ll(const Vector& s) {
  const double x = s(0), y = s(1), vx = s(2), vy = s(3), theta = s(4), omega = s(5);
  const double target =
      std::clamp(kAngleFromX * x + kAngleFromVx * vx, -kMaxTargetAngle, kMaxTargetAngle);
  const double u = kAngleGain * (target - theta) - kRateGain * omega;
  const double v_target = -(kDescentBase + kDescentPerHeight * std::max(y, 0.0));
  if (std::abs(u) > kUrgentTurn) return u > 0 ? kRight : kLeft;
  if (vy < v_target) return kMain;
  if (std::abs(u) > kDeadband) return u > 0 ? kRight : kLeft;
  return kNoop;
}

Controller scripted_expert(const std::string& env_name) {
  if (env_name == "mountain_car") return [](const Vector& s) { return Action{expert_mc(s)}; };
  if (env_name == "lunar_lander")
    return [](const Vector& s) { return Action{static_cast<int>(expert_ll(s))}; };
  throw Error(ErrorKind::kInvalidArgument, "no scripted expert for '" + env_name + "'");
}

Dataset collect(const CollectConfig& config, const Controller& expert,
                std::shared_ptr<InteractionLedger> ledger) {
  validate(config);
  auto env = make_real_env(config.env_name, std::move(ledger));
  const EnvironmentSpec& spec = env->spec();
  const int horizon =
      config.max_episode_steps > 0 ? config.max_episode_steps : spec.max_episode_steps;

  std::mt19937_64 rng(derive_seed(config.seed, kExplorationStream));
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto random_action = [&]() -> Action {
    if (spec.action_space.kind == ActionKind::kContinuous)
      return std::uniform_real_distribution<double>(spec.action_space.low,
                                                    spec.action_space.high)(rng);
    return std::uniform_int_distribution<int>(0, spec.action_space.n - 1)(rng);
  };

  Dataset data;
  data.env_name = spec.name;
  data.state_dim = spec.state_dim();
  data.action_dim = spec.action_space.encoded_width();
  data.seed = config.seed;
  data.epsilon = config.epsilon;
  data.expert = config.expert;
  data.transitions.reserve(config.n_transitions);

  const auto target = static_cast<std::size_t>(config.n_transitions);
  int episode = 0;
  while (data.transitions.size() < target) {
    if (episode == config.max_episodes)
      throw Error(ErrorKind::kUnreachable,
                  "collected " + std::to_string(data.transitions.size()) + " of " +
                      std::to_string(target) + " transitions within " +
                      std::to_string(config.max_episodes) + " episodes");
    Vector s = env->reset(derive_seed(config.seed, kEpisodeStream + episode));
    ++episode;
    for (int t = 0; t < horizon && data.transitions.size() < target; ++t) {
      const bool explore = coin(rng) < config.epsilon;
      const Action a = explore ? random_action() : expert(s);
      StepResult r = env->step(a);
      Transition tr;
      tr.state = s;
      tr.action = env->task().encode_action(a);
      tr.next_state = r.next_state;
      tr.reward = r.reward;
      tr.done = r.terminated || r.truncated || t + 1 == horizon ||
                data.transitions.size() + 1 == target;
      data.transitions.push_back(std::move(tr));
      data.exploratory.push_back(explore);
      data.random_actions += explore ? 1 : 0;
      s = std::move(r.next_state);
      if (r.terminated || r.truncated) break;
    }
  }
  data.episodes_used = episode;
  return data;
}

Dataset collect(const CollectConfig& config, std::shared_ptr<InteractionLedger> ledger) {
  validate(config);
  return collect(config, scripted_expert(config.env_name), std::move(ledger));
}

}  // namespace sdrl
