#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "../oracles.hpp"
#include "sdrl/envs.hpp"

namespace sdrl {
namespace {

TEST(MountainCar, ValleyStepFromRest) {
  const StepResult r = mc_step(Vector{{-0.5, 0.0}}, 0.0);
  EXPECT_NEAR(r.next_state(1), -0.00017684300416925727, 1e-15);
  EXPECT_NEAR(r.next_state(0), -0.5001768430041692, 1e-15);
  EXPECT_FALSE(r.terminated);
  EXPECT_EQ(r.reward, 0.0);
}

TEST(MountainCar, ReachesGoal) {
  const StepResult r = mc_step(Vector{{0.449, 0.07}}, 0.0);
  EXPECT_NEAR(r.next_state(1), 0.06944516783188397, 1e-15);
  EXPECT_NEAR(r.next_state(0), 0.518445167831884, 1e-15);
  EXPECT_TRUE(r.terminated);
  EXPECT_TRUE(r.success);
  EXPECT_EQ(r.reward, 100.0);
}

TEST(MountainCar, ActionCostAndClip) {
  const StepResult r = mc_step(Vector{{-0.5, 0.0}}, 1.0);
  EXPECT_DOUBLE_EQ(r.reward, -0.1);
  const StepResult fast = mc_step(Vector{{std::numbers::pi / 6, 0.07}}, 1.0);
  EXPECT_EQ(fast.next_state(1), 0.07);
}

TEST(MountainCar, LeftWallStopsCar) {
  const StepResult r = mc_step(Vector{{-1.19, -0.05}}, -1.0);
  EXPECT_EQ(r.next_state(0), -1.2);
  EXPECT_EQ(r.next_state(1), 0.0);
}

TEST(MountainCar, MatchesReferenceImplementation) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> p(-1.2, 0.6), v(-0.07, 0.07), a(-1, 1);
  for (int i = 0; i < 5000; ++i) {
    const double pi = p(rng), vi = v(rng), ai = a(rng);
    const StepResult r = mc_step(Vector{{pi, vi}}, ai);
    const oracle::McRef ref = oracle::mc_reference(pi, vi, ai);
    EXPECT_NEAR(r.next_state(0), ref.p, 1e-15);
    EXPECT_NEAR(r.next_state(1), ref.v, 1e-15);
    EXPECT_EQ(r.terminated, ref.done);
    EXPECT_DOUBLE_EQ(r.reward, ref.reward);
  }
}

TEST(MountainCar, ResetIsSeededAtRest) {
  const auto task = make_task("mountain_car");
  EXPECT_EQ(task->reset_state(3), task->reset_state(3));
  EXPECT_NE(task->reset_state(3), task->reset_state(4));
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Vector x = task->reset_state(s);
    EXPECT_EQ(x(1), 0.0);
    EXPECT_GE(x(0), -0.6);
    EXPECT_LE(x(0), -0.4);
  }
}

TEST(MountainCar, EnergyPumpSolves) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto env = make_real_env("mountain_car");
    Vector s = env->reset(seed);
    bool reached = false;
    for (int t = 0; t < 200 && !reached; ++t) {
      const StepResult r = env->step(s(1) >= 0 ? 1.0 : -1.0);
      s = r.next_state;
      reached = r.terminated;
    }
    EXPECT_TRUE(reached) << "seed " << seed;
  }
}

TEST(Lander, FreeFallStep) {
  const StepResult r = ll_step(Vector{{0, 1, 0, 0, 0, 0}}, kNoop);
  EXPECT_NEAR(r.next_state(3), -0.02, 1e-15);
  EXPECT_NEAR(r.next_state(1), 1.0 - 0.0004, 1e-15);
  EXPECT_EQ(r.next_state(0), 0.0);
  EXPECT_FALSE(r.terminated);
}

TEST(Lander, MainEngineStep) {
  const StepResult r = ll_step(Vector{{0, 1, 0, 0, 0, 0}}, kMain);
  EXPECT_NEAR(r.next_state(3), 0.04, 1e-15);
  EXPECT_NEAR(r.next_state(1), 1.0008, 1e-15);
}

TEST(Lander, SideEnginesAreNegations) {
  const Vector s{{0.1, 0.8, 0.05, -0.2, 0.0, 0.0}};
  const StepResult l = ll_step(s, kLeft);
  const StepResult r = ll_step(s, kRight);
  EXPECT_EQ(l.next_state(5), -r.next_state(5));
  EXPECT_NEAR(l.next_state(2) - s(2), -(r.next_state(2) - s(2)), 1e-15);
}

TEST(Lander, MirrorSymmetry) {
  const auto task = make_task("lunar_lander");
  const Vector mirror = Vector{{-1, 1, -1, 1, -1, -1}};
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> act(0, 3);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Vector a = task->reset_state(seed);
    Vector b = a.cwiseProduct(mirror);
    for (int t = 0; t < 300; ++t) {
      const int u = act(rng);
      const int w = u == kLeft ? kRight : u == kRight ? kLeft : u;
      const StepResult ra = task->step(a, u);
      const StepResult rb = task->step(b, w);
      ASSERT_LE((ra.next_state.cwiseProduct(mirror) - rb.next_state).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_EQ(ra.terminated, rb.terminated);
      if (ra.terminated) break;
      a = ra.next_state;
      b = rb.next_state;
    }
  }
}

TEST(Lander, ResetHasZeroAttitude) {
  const auto task = make_task("lunar_lander");
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Vector x = task->reset_state(s);
    EXPECT_EQ(x(4), 0.0);
    EXPECT_EQ(x(5), 0.0);
  }
}

TEST(Lander, SoftAndHardContact) {
  const StepResult soft = ll_step(Vector{{0, 0.001, 0, -0.2, 0, 0}}, kNoop);
  EXPECT_TRUE(soft.terminated);
  EXPECT_TRUE(soft.success);
  const StepResult hard = ll_step(Vector{{0, 0.001, 0, -1.0, 0, 0}}, kNoop);
  EXPECT_TRUE(hard.terminated);
  EXPECT_FALSE(hard.success);
  EXPECT_LT(hard.reward, soft.reward);
}

// 10^5 random steps per environment never leave the declared bounds.
TEST(Envs, BoundsFuzz) {
  for (const char* name : {"mountain_car", "lunar_lander"}) {
    auto env = make_real_env(name);
    const EnvironmentSpec& spec = env->spec();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    std::uniform_int_distribution<int> d(0, 3);
    env->reset(0);
    std::uint64_t episode = 0;
    for (int i = 0; i < 100000; ++i) {
      const Action a = spec.action_space.kind == ActionKind::kContinuous ? Action{u(rng)}
                                                                       : Action{d(rng)};
      const StepResult r = env->step(a);
      ASSERT_TRUE(((r.next_state - spec.lower).array() >= 0).all()) << name;
      ASSERT_TRUE(((spec.upper - r.next_state).array() >= 0).all()) << name;
      ASSERT_TRUE(std::isfinite(r.reward));
      if (r.terminated || r.truncated) env->reset(++episode);
    }
  }
}

TEST(Envs, StepIsPure) {
  const auto task = make_task("lunar_lander");
  const Vector s{{0.2, 0.5, 0.1, -0.3, 0.05, 0.2}};
  const StepResult a = task->step(s, kMain);
  const StepResult b = task->step(s, kMain);
  EXPECT_EQ(a.next_state, b.next_state);
  EXPECT_EQ(a.reward, b.reward);
}

TEST(Envs, TruncatesAtMaxSteps) {
  auto env = make_real_env("mountain_car");
  env->reset(0);
  StepResult r;
  int steps = 0;
  do {
    r = env->step(0.0);
    ++steps;
  } while (!r.terminated && !r.truncated);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(steps, env->spec().max_episode_steps);
  EXPECT_THROW(env->step(0.0), Error);
}

TEST(Envs, RejectsInvalidInput) {
  auto env = make_real_env("lunar_lander");
  env->reset(0);
  EXPECT_THROW(env->step(Action{7}), Error);
  EXPECT_THROW(env->step(Action{0.5}), Error);
  EXPECT_THROW(make_task("cartpole"), Error);
  EXPECT_THROW(mc_step(Vector{{std::nan(""), 0.0}}, 0.0), Error);
}

TEST(Envs, LedgerCountsRealSteps) {
  auto ledger = std::make_shared<InteractionLedger>();
  auto env = make_real_env("mountain_car", ledger);
  env->reset(1);
  for (int i = 0; i < 10; ++i) env->step(1.0);
  auto copy = env->clone();
  copy->reset(2);
  copy->step(1.0);
  EXPECT_EQ(ledger->real.load(), 11u);
  EXPECT_EQ(ledger->surrogate.load(), 0u);
}

TEST(Envs, ActionEncoding) {
  const auto task = make_task("lunar_lander");
  EXPECT_EQ(task->encode_action(Action{0}), Vector::Zero(3));
  const Vector e = task->encode_action(Action{kRight});
  EXPECT_EQ(e, (Vector{{0, 0, 1}}));
  EXPECT_EQ(std::get<int>(task->decode_action(e.data())), kRight);
}

}  // namespace
}  // namespace sdrl
