#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>

#include "sdrl/collect.hpp"

namespace sdrl {
namespace {

namespace fs = std::filesystem;

CollectConfig config_for(const std::string& env, double eps, int n, std::uint64_t seed) {
  CollectConfig c = CollectConfig::defaults_for(env);
  c.epsilon = eps;
  c.n_transitions = n;
  c.seed = seed;
  return c;
}

TEST(Expert, MountainCarSignRule) {
  EXPECT_EQ(expert_mc(Vector{{-0.5, -0.01}}), -1.0);
  EXPECT_EQ(expert_mc(Vector{{-0.5, 0.0}}), 1.0);
  EXPECT_EQ(expert_mc(Vector{{0.1, 0.02}}), 1.0);
}

TEST(Expert, LanderFiresMainWhenFallingFast) {
  EXPECT_EQ(expert_ll(Vector{{0, 1, 0, -2, 0, 0}}), kMain);
}

TEST(Expert, LanderSoftLands) {
  auto env = make_real_env("lunar_lander");
  const Controller expert = scripted_expert("lunar_lander");
  int landed = 0;
  for (std::uint64_t s = 0; s < 50; ++s) landed += rollout(*env, expert, 1000, s).success;
  EXPECT_GE(landed, 48);
}

TEST(Collect, Defaults) {
  EXPECT_EQ(CollectConfig::defaults_for("mountain_car").n_transitions, 75);
  EXPECT_EQ(CollectConfig::defaults_for("lunar_lander").n_transitions, 1000);
  EXPECT_EQ(CollectConfig::defaults_for("mountain_car").epsilon, 0.2);
}

TEST(Collect, ExactCountAndRecordedSteps) {
  for (const char* env : {"mountain_car", "lunar_lander"}) {
    const Dataset d = collect(CollectConfig::defaults_for(env));
    ASSERT_EQ(d.size(), static_cast<std::size_t>(CollectConfig::defaults_for(env).n_transitions));
    const auto task = make_task(env);
    for (const Transition& t : d.transitions) {
      const StepResult r = task->step(t.state, task->decode_action(t.action.data()));
      EXPECT_EQ(r.next_state, t.next_state);
      EXPECT_EQ(r.reward, t.reward);
    }
    EXPECT_TRUE(d.transitions.back().done);
  }
}

TEST(Collect, GreedyEqualsExpert) {
  const Dataset d = collect(config_for("mountain_car", 0.0, 200, 3));
  EXPECT_EQ(d.random_actions, 0);
  for (const Transition& t : d.transitions) EXPECT_EQ(t.action(0), expert_mc(t.state));
}

TEST(Collect, EpsilonMixture) {
  CollectConfig c = config_for("mountain_car", 0.2, 10000, 4);
  c.max_episodes = 200;
  const Dataset d = collect(c);
  const double frac = static_cast<double>(d.random_actions) / d.size();
  EXPECT_NEAR(frac, 0.2, 0.02);
  int flagged = 0;
  for (bool e : d.exploratory) flagged += e;
  EXPECT_EQ(flagged, d.random_actions);
}

// Chi-square goodness of fit at 10^4 samples for both action spaces.
TEST(Collect, FullyRandomIsUniform) {
  CollectConfig c = config_for("lunar_lander", 1.0, 10000, 5);
  c.max_episodes = 1000;
  const Dataset ll = collect(c);
  std::vector<int> counts(4, 0);
  const auto task = make_task("lunar_lander");
  for (const Transition& t : ll.transitions) ++counts[std::get<int>(task->decode_action(t.action.data()))];
  double chi2 = 0.0;
  for (int k : counts) chi2 += (k - 2500.0) * (k - 2500.0) / 2500.0;
  EXPECT_LT(chi2, 16.27);  // df 3, p = 0.001

  c = config_for("mountain_car", 1.0, 10000, 6);
  c.max_episodes = 100;
  const Dataset mc = collect(c);
  std::vector<int> bins(10, 0);
  for (const Transition& t : mc.transitions) ++bins[std::min(9, static_cast<int>((t.action(0) + 1) * 5))];
  chi2 = 0.0;
  for (int k : bins) chi2 += (k - 1000.0) * (k - 1000.0) / 1000.0;
  EXPECT_LT(chi2, 27.88);  // df 9, p = 0.001
}

TEST(Collect, MountainCarCoverage) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Dataset d = collect(config_for("mountain_car", 0.2, 75, seed));
    const Matrix s = d.states();
    EXPECT_GE(s.col(0).maxCoeff() - s.col(0).minCoeff(), 0.5) << "seed " << seed;
  }
}

TEST(Collect, Deterministic) {
  const CollectConfig c = config_for("lunar_lander", 0.2, 1000, 9);
  EXPECT_EQ(to_csv(collect(c)), to_csv(collect(c)));
  EXPECT_NE(to_csv(collect(c)), to_csv(collect(config_for("lunar_lander", 0.2, 1000, 10))));
}

TEST(Collect, Unreachable) {
  CollectConfig c = config_for("mountain_car", 0.2, 100000, 0);
  c.max_episodes = 2;
  try {
    collect(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnreachable);
  }
}

TEST(Collect, RejectsBadConfig) {
  EXPECT_THROW(validate(config_for("mountain_car", 1.5, 10, 0)), Error);
  EXPECT_THROW(validate(config_for("mountain_car", 0.2, 0, 0)), Error);
  CollectConfig c = config_for("mountain_car", 0.2, 10, 0);
  c.expert = "oracle";
  EXPECT_THROW(validate(c), Error);
}

class DatasetFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sdrl_data_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(DatasetFile, RoundTripIsExact) {
  const Dataset d = collect(CollectConfig::defaults_for("lunar_lander"));
  save_dataset(d, dir_ / "d.csv");
  const Dataset back = load_dataset(dir_ / "d.csv");
  EXPECT_EQ(to_csv(back), to_csv(d));
  EXPECT_EQ(back.fingerprint(), d.fingerprint());
  EXPECT_EQ(back.seed, d.seed);
  EXPECT_EQ(back.random_actions, d.random_actions);
  EXPECT_EQ(back.exploratory, d.exploratory);
  EXPECT_EQ(back.states(), d.states());
}

TEST_F(DatasetFile, Errors) {
  const Dataset d = collect(CollectConfig::defaults_for("mountain_car"));
  save_dataset(d, dir_ / "d.csv");
  const std::string text = read_text_file(dir_ / "d.csv");
  write_text_file(dir_ / "d.csv", text.substr(0, text.size() - 20));
  EXPECT_THROW(
      {
        try {
          load_dataset(dir_ / "d.csv");
        } catch (const Error& e) {
          EXPECT_EQ(e.kind(), ErrorKind::kSchema);
          throw;
        }
      },
      Error);
  fs::remove(metadata_path(dir_ / "d.csv"));
  try {
    load_dataset(dir_ / "d.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingFile);
  }
}

TEST(Dataset, FormatDoubleRoundTrips) {
  for (double x : {0.1, -1.7684300416925727e-4, 1e-300, 123456789.125, 0.0})
    EXPECT_EQ(std::stod(format_double(x)), x);
}

TEST(Dataset, ValidateCatchesShapeAndNaN) {
  Dataset d = collect(CollectConfig::defaults_for("mountain_car"));
  d.transitions[3].next_state(0) = std::nan("");
  EXPECT_THROW(d.validate(), Error);
  d.transitions[3].next_state = Vector::Zero(3);
  EXPECT_THROW(d.validate(), Error);
}

}  // namespace
}  // namespace sdrl
