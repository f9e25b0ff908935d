#include "sdrl/surrogate.hpp"

#include <cmath>

namespace sdrl {

SurrogateEnv::SurrogateEnv(std::shared_ptr<const Task> task,
                           std::shared_ptr<const SindyModel> model,
                           SurrogateOptions options,
                           std::shared_ptr<InteractionLedger> ledger)
    : Environment(std::move(task), std::move(ledger)),
      model_(std::move(model)),
      options_(options) {
  const EnvironmentSpec& s = spec();
  if (model_->state_dim() != s.state_dim() ||
      model_->action_dim() != s.action_space.encoded_width())
    throw Error(ErrorKind::kDimension,
                "model (state dim " + std::to_string(model_->state_dim()) +
                    ", action dim " + std::to_string(model_->action_dim()) +
                    ") does not match environment " + s.name + " (state dim " +
                    std::to_string(s.state_dim()) + ", action dim " +
                    std::to_string(s.action_space.encoded_width()) + ")");
  guard_ = options_.divergence_factor * (s.upper - s.lower);
}

std::unique_ptr<Environment> SurrogateEnv::clone() const {
  return std::make_unique<SurrogateEnv>(task_ptr(), model_, options_, ledger());
}

StepResult SurrogateEnv::transition(const Vector& state, const Action& action) {
  const Task& t = task();
  double encoded[16];
  t.encode_action(action, encoded);
  Vector proposed(state.size());
  model_->predict_into(state.data(), encoded, proposed.data());

  StepResult r;
  if (!proposed.allFinite()) {
    r.next_state = state;
    r.truncated = true;
    return r;
  }
  r.next_state = options_.clip_to_bounds ? t.enforce_bounds(state, proposed) : proposed;
  const Outcome o = t.outcome(state, action, r.next_state);
  r.reward = o.reward;
  r.terminated = o.terminated;
  r.success = o.success;
  if (!r.terminated && (r.next_state.array().abs() > guard_.array()).any())
    r.truncated = true;
  return r;
}

Vector surrogate_predict(const SindyModel& model, const Task& task, const Vector& state,
                         const Vector& encoded_action) {
  return task.enforce_bounds(state, model.predict(state, encoded_action));
}

std::vector<int> bound_active_rows(const Dataset& data, const EnvironmentSpec& spec) {
  if (data.state_dim != spec.state_dim())
    throw Error(ErrorKind::kDimension, "dataset state dim " + std::to_string(data.state_dim) +
                                           " does not match " + spec.name);
  std::vector<int> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Vector& s = data.transitions[i].next_state;
    if ((s.array() <= spec.lower.array()).any() || (s.array() >= spec.upper.array()).any())
      rows.push_back(static_cast<int>(i));
  }
  return rows;
}

Trajectory rollout(Environment& env, const Controller& policy, int horizon,
                   std::uint64_t seed) {
  if (horizon < 1) throw Error(ErrorKind::kInvalidArgument, "rollout horizon must be >= 1");
  Trajectory traj;
  Vector s = env.reset(seed);
  for (int t = 0; t < horizon; ++t) {
    const Action a = policy(s);
    StepResult r = env.step(a);
    Transition tr;
    tr.state = s;
    tr.action = env.task().encode_action(a);
    tr.next_state = r.next_state;
    tr.reward = r.reward;
    tr.done = r.terminated || r.truncated || t + 1 == horizon;
    traj.transitions.push_back(tr);
    traj.total_return += r.reward;
    traj.success = traj.success || r.success;
    s = std::move(r.next_state);
    if (r.terminated || r.truncated) {
      traj.terminated = r.terminated;
      traj.truncated = r.truncated;
      break;
    }
  }
  if (!traj.terminated && !traj.transitions.empty() &&
      static_cast<int>(traj.transitions.size()) == horizon)
    traj.truncated = true;
  return traj;
}

}  // namespace sdrl
