#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "sdrl/dataset.hpp"
#include "sdrl/envs.hpp"
#include "sdrl/sindy.hpp"

namespace sdrl {

struct SurrogateOptions {
  bool clip_to_bounds = true;
  // Episode is truncated once any |state_i| exceeds this multiple of the
  // dimension's bound range.
  double divergence_factor = 10.0;
};

// Environment whose transition is the learned model; reset, bounds, reward,
// and termination come from the base task.
class SurrogateEnv final : public Environment {
 public:
  // Throws kDimension when the model does not fit the task's state/action
  // layout.
  SurrogateEnv(std::shared_ptr<const Task> task, std::shared_ptr<const SindyModel> model,
               SurrogateOptions options = {},
               std::shared_ptr<InteractionLedger> ledger = nullptr);

  bool is_surrogate() const override { return true; }
  std::unique_ptr<Environment> clone() const override;

  const SindyModel& model() const { return *model_; }
  const SurrogateOptions& options() const { return options_; }

 protected:
  StepResult transition(const Vector& state, const Action& action) override;

 private:
  std::shared_ptr<const SindyModel> model_;
  SurrogateOptions options_;
  Vector guard_;
};

// One-step surrogate prediction: model output mapped through the task's
// admissible-set projection.
Vector surrogate_predict(const SindyModel& model, const Task& task, const Vector& state,
                         const Vector& encoded_action);

// Rows whose recorded next state touches a state bound. Those transitions
// come from the bound projection rather than the smooth dynamics, and the
// surrogate reapplies the projection, so fitting leaves them out.
std::vector<int> bound_active_rows(const Dataset& data, const EnvironmentSpec& spec);

using Controller = std::function<Action(const Vector&)>;

struct Trajectory {
  std::vector<Transition> transitions;
  double total_return = 0.0;
  bool success = false;
  bool terminated = false;
  bool truncated = false;
};

// Resets `env` with `seed` and runs `policy` for at most `horizon` steps or
// until the episode ends.
Trajectory rollout(Environment& env, const Controller& policy, int horizon,
                   std::uint64_t seed);

}  // namespace sdrl
