#pragma once

#include <cstdint>
#include <string>

#include "sdrl/dataset.hpp"
#include "sdrl/envs.hpp"
#include "sdrl/surrogate.hpp"

namespace sdrl {

struct CollectConfig {
  std::string env_name = "mountain_car";
  std::string expert = "scripted";
  double epsilon = 0.2;
  int n_transitions = 75;
  int max_episodes = 50;
  int max_episode_steps = 0;  // 0: environment default
  std::uint64_t seed = 0;

  // Defaults for an environment: 75 transitions for Mountain Car, 1000 for
  // the lander.
  static CollectConfig defaults_for(const std::string& env_name);
};

void validate(const CollectConfig& config);

// Energy pumping: +1 when velocity >= 0, else -1.
double expert_mc(const Vector& state);

// PD attitude/descent-rate rule for the lander.
LanderAction expert_ll(const Vector& state);

// The scripted expert for an environment.
Controller scripted_expert(const std::string& env_name);

// epsilon-greedy rollouts of `expert` until n_transitions are stored.
// Episodes that end early roll over into new ones; throws kUnreachable
// after max_episodes.
Dataset collect(const CollectConfig& config, const Controller& expert,
                std::shared_ptr<InteractionLedger> ledger = nullptr);

// Uses the scripted expert named by config.expert ("scripted").
Dataset collect(const CollectConfig& config,
                std::shared_ptr<InteractionLedger> ledger = nullptr);

}  // namespace sdrl
