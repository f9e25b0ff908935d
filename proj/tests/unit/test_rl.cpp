#include <gtest/gtest.h>

#include <random>

#include "../oracles.hpp"
#include "sdrl/collect.hpp"
#include "sdrl/rl.hpp"

namespace sdrl {
namespace {

ActionSpace discrete(int n) {
  ActionSpace s;
  s.kind = ActionKind::kDiscrete;
  s.n = n;
  return s;
}

TEST(LinearPolicy, ParameterLayout) {
  EXPECT_EQ(LinearPolicy::parameter_count(2, ActionSpace{}), 3);
  EXPECT_EQ(LinearPolicy::parameter_count(6, discrete(4)), 28);
  // One head, weights then bias: a = tanh(2 * z0 - z1 + 0.5).
  const LinearPolicy p(ActionSpace{}, Vector::Zero(2), Vector::Ones(2), Vector{{2.0, -1.0, 0.5}});
  EXPECT_DOUBLE_EQ(std::get<double>(p.act(Vector{{0.1, 0.3}})), std::tanh(0.2 - 0.3 + 0.5));
}

TEST(LinearPolicy, TanhHeadStaysInInterval) {
  ActionSpace space;
  space.low = -2.0;
  space.high = 0.5;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    const LinearPolicy p(space, Vector::Zero(2), Vector::Ones(2),
                         Vector{{n(rng), n(rng), n(rng)}});
    const double a = std::get<double>(p.act(Vector{{n(rng), n(rng)}}));
    EXPECT_GE(a, -2.0);
    EXPECT_LE(a, 0.5);
  }
}

TEST(LinearPolicy, ArgmaxTiesPickLowestIndex) {
  // Zero weights: scores are the biases.
  Vector params = Vector::Zero(LinearPolicy::parameter_count(1, discrete(4)));
  auto with_bias = [&](std::vector<double> b) {
    Vector p = params;
    for (int k = 0; k < 4; ++k) p(k * 2 + 1) = b[k];
    return LinearPolicy(discrete(4), Vector::Zero(1), Vector::Ones(1), p);
  };
  EXPECT_EQ(std::get<int>(with_bias({0, 1, 1, 0}).act(Vector{{0.3}})), 1);
  EXPECT_EQ(std::get<int>(with_bias({1, 0, 0, 1}).act(Vector{{0.3}})), 0);
  EXPECT_EQ(std::get<int>(with_bias({0, 0, 1, 1}).act(Vector{{0.3}})), 2);
  EXPECT_EQ(std::get<int>(with_bias({2, 2, 2, 2}).act(Vector{{0.3}})), 0);
}

TEST(LinearPolicy, JsonRoundTripAndVersion) {
  const LinearPolicy p(discrete(4), Vector{{0.1, 0.2}}, Vector{{1.5, 0.3}},
                       Vector::LinSpaced(12, -1.0, 1.0));
  auto [back, env] = load_policy_json(serialize(p, "lunar_lander"));
  EXPECT_EQ(env, "lunar_lander");
  EXPECT_EQ(back.params(), p.params());
  EXPECT_EQ(back.state_mean(), p.state_mean());
  EXPECT_EQ(back.state_std(), p.state_std());
  auto j = nlohmann::json::parse(serialize(p, "lunar_lander"));
  j["format_version"] = 7;
  try {
    deserialize_policy(j.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVersion);
  }
  EXPECT_THROW(deserialize_policy("{\"format\": \"sdrl-linear-policy\""), Error);
}

TEST(Evaluate, ExpertSolvesMountainCar) {
  RealEnv env(make_task("mountain_car"));
  const PolicyEvaluation ev = evaluate_policy(env, scripted_expert("mountain_car"), 100, 3);
  EXPECT_EQ(ev.successes, 100);
  EXPECT_DOUBLE_EQ(ev.success_rate, 1.0);
  const PolicyEvaluation again = evaluate_policy(env, scripted_expert("mountain_car"), 100, 3);
  EXPECT_EQ(ev.returns, again.returns);
  EXPECT_EQ(ev.steps, again.steps);
}

TEST(Evaluate, RandomLanderRarelyLands) {
  RealEnv env(make_task("lunar_lander"));
  auto rng = std::make_shared<std::mt19937_64>(5);
  const Controller random = [rng](const Vector&) -> Action {
    return std::uniform_int_distribution<int>(0, 3)(*rng);
  };
  EXPECT_LE(evaluate_policy(env, random, 100, 9).successes, 10);
}

TEST(ActionMap, ConstantPolicyGivesConstantGrid) {
  const Controller c = [](const Vector&) -> Action { return 0.25; };
  const ActionMap m = policy_action_map(c, Vector{{-0.5, 0.0}}, 0, linspace(-1.2, 0.6, 5), 1,
                                        linspace(-0.07, 0.07, 4));
  EXPECT_EQ(m.values.rows(), 4);
  EXPECT_EQ(m.values.cols(), 5);
  EXPECT_TRUE((m.values.array() == 0.25).all());
}

TEST(ActionMap, ExpertFollowsVelocitySign) {
  const ActionMap m = policy_action_map(scripted_expert("mountain_car"), Vector{{-0.5, 0.0}}, 0,
                                        linspace(-1.2, 0.6, 7), 1, linspace(-0.07, 0.07, 9));
  for (int i = 0; i < 9; ++i)
    for (int j = 0; j < 7; ++j) EXPECT_EQ(m.values(i, j), m.ys[i] >= 0 ? 1.0 : -1.0);
  const std::string csv = to_csv(m, {"position", "velocity"});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "position,velocity,action");
}

TEST(ActionMap, Agreement) {
  ActionMap a;
  a.values = Matrix(1, 4);
  a.values << -1, 0, 0.3, 2;
  ActionMap b = a;
  b.values << -0.2, 0.5, -0.1, 2;
  EXPECT_DOUBLE_EQ(action_agreement(a, b, ActionKind::kContinuous), 0.75);
  EXPECT_DOUBLE_EQ(action_agreement(a, b, ActionKind::kDiscrete), 0.25);
  EXPECT_DOUBLE_EQ(linspace(0, 1, 5)[3], 0.75);
}

CemConfig small_cem(std::uint64_t seed, int iterations) {
  CemConfig c;
  c.population = 32;
  c.iterations = iterations;
  c.seed = seed;
  c.selection_episodes = 10;
  return c;
}

TEST(Cem, ZeroIterationsReturnsInitialBest) {
  RealEnv env(make_task("mountain_car"));
  const TrainResult r = train(env, small_cem(1, 0));
  ASSERT_EQ(r.curve.size(), 1u);
  EXPECT_EQ(r.curve[0].iteration, 0);
  EXPECT_GE(r.curve[0].max_return, r.curve[0].mean_return);
  EXPECT_EQ(r.policy.params().size(), 3);
}

TEST(Cem, DeterministicUnderSeed) {
  RealEnv env(make_task("mountain_car"));
  const TrainResult a = train(env, small_cem(2, 3));
  const TrainResult b = train(env, small_cem(2, 3));
  EXPECT_EQ(a.policy.params(), b.policy.params());
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_EQ(to_csv(a.curve), to_csv(b.curve));
}

TEST(Cem, ThreadCountDoesNotChangeResult) {
  RealEnv env(make_task("mountain_car"));
  CemConfig one = small_cem(3, 2);
  one.threads = 1;
  CemConfig four = one;
  four.threads = 4;
  EXPECT_EQ(train(env, one).policy.params(), train(env, four).policy.params());
}

TEST(Cem, SolvesRealMountainCar) {
  RealEnv env(make_task("mountain_car"));
  const TrainResult r = train(env, CemConfig{});
  const PolicyEvaluation ev = evaluate_policy(env, r.policy.controller(), 100, 77);
  EXPECT_GE(ev.mean_return, 90.0);
}

// Stochastic-monotonicity smoke test: over 10 seeds, the population mean
// return of the last generation is at least that of the first in >= 80%.
TEST(Cem, MeanReturnImprovesAcrossSeeds) {
  RealEnv env(make_task("mountain_car"));
  int improving = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TrainResult r = train(env, small_cem(100 + seed, 10));
    improving += r.curve.back().mean_return >= r.curve.front().mean_return;
    for (std::size_t i = 1; i < r.curve.size(); ++i)
      EXPECT_GE(r.curve[i].best_return, r.curve[i - 1].best_return);
  }
  EXPECT_GE(improving, 8);
}

TEST(Cem, SurrogateTrainingUsesNoRealSteps) {
  auto ledger = std::make_shared<InteractionLedger>();
  SurrogateEnv env(make_task("mountain_car"),
                   std::make_shared<const SindyModel>(oracle::exact_mountain_car_model()), {},
                   ledger);
  const TrainResult r = train(env, small_cem(4, 2));
  EXPECT_EQ(ledger->real.load(), 0u);
  EXPECT_EQ(ledger->surrogate.load(), r.steps);
  evaluate_policy(env, r.policy.controller(), 5, 1);
  EXPECT_EQ(ledger->real.load(), 0u);
}

TEST(Cem, RejectsBadConfig) {
  CemConfig c;
  c.population = 0;
  EXPECT_THROW(validate(c), Error);
  c = CemConfig{};
  c.elite_fraction = 1.5;
  EXPECT_THROW(validate(c), Error);
  c = CemConfig{};
  c.iterations = -1;
  EXPECT_THROW(validate(c), Error);
  EXPECT_EQ(CemConfig{}.elite_count(), 8);
}

}  // namespace
}  // namespace sdrl
