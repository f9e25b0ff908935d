#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "../oracles.hpp"
#include "sdrl/collect.hpp"
#include "sdrl/sindy.hpp"
#include "sdrl/surrogate.hpp"

namespace sdrl {
namespace {

namespace fs = std::filesystem;

// s' = 0.9 s on two state dims with one unused action column.
Dataset linear_map_dataset(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dataset d;
  d.env_name = "synthetic";
  d.state_dim = 2;
  d.action_dim = 1;
  for (int i = 0; i < n; ++i) {
    Transition t;
    t.state = Vector{{u(rng), u(rng)}};
    t.action = Vector{{u(rng)}};
    t.next_state = 0.9 * t.state;
    d.transitions.push_back(t);
  }
  return d;
}

GridSearchSpec linear_grid(TargetMode mode) {
  GridSearchSpec g;
  g.thresholds = GridSearchSpec::default_thresholds();
  g.ridges = GridSearchSpec::default_ridges();
  LibrarySpec lib = library_for({"a", "b"}, {"u"}, 0);
  lib.poly_degree = 1;
  g.libraries = {lib};
  g.target_mode = mode;
  return g;
}

Dataset mountain_car_data(std::uint64_t seed) {
  CollectConfig c = CollectConfig::defaults_for("mountain_car");
  c.seed = seed;
  return collect(c);
}

GridSearchSpec mountain_car_grid() {
  const auto task = make_task("mountain_car");
  const EnvironmentSpec& spec = task->spec();
  GridSearchSpec g;
  g.thresholds = GridSearchSpec::default_thresholds();
  g.ridges = GridSearchSpec::default_ridges();
  LibrarySpec poly = library_for(spec.state_names, spec.action_names, 0);
  poly.poly_degree = 2;
  LibrarySpec trig = poly;
  trig.trig_frequencies = {1, 2, 3};
  g.libraries = {poly, trig};
  return g;
}

TEST(Sindy, DefaultGrid) {
  const auto t = GridSearchSpec::default_thresholds();
  ASSERT_EQ(t.size(), 9u);
  EXPECT_NEAR(t.front(), 1e-5, 1e-20);
  EXPECT_NEAR(t.back(), 1e-1, 1e-16);
  EXPECT_EQ(GridSearchSpec::default_ridges(), (std::vector<double>{0, 1e-6, 1e-4, 1e-2}));
}

TEST(Sindy, SplitIsSeededPartition) {
  auto [train, val] = split_rows(100, 0.2, 4);
  EXPECT_EQ(val.size(), 20u);
  EXPECT_EQ(train.size(), 80u);
  std::vector<int> all = train;
  all.insert(all.end(), val.begin(), val.end());
  std::sort(all.begin(), all.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(split_rows(100, 0.2, 4), split_rows(100, 0.2, 4));
  EXPECT_NE(split_rows(100, 0.2, 4), split_rows(100, 0.2, 5));
}

TEST(Sindy, RecoversLinearMap) {
  const Dataset d = linear_map_dataset(100, 1);
  const SindyModel m = fit(d, linear_grid(TargetMode::kNextState), 3);
  const auto eqs = equations(m);
  ASSERT_EQ(eqs[0].size(), 1u);
  EXPECT_EQ(eqs[0][0].name, "a");
  EXPECT_NEAR(eqs[0][0].coefficient, 0.9, 1e-8);
  EXPECT_NEAR(eqs[1][0].coefficient, 0.9, 1e-8);
  EXPECT_LE(m.report().validation_mse.maxCoeff(), 1e-12);
}

TEST(Sindy, SingleConfigGridEqualsDirectSolve) {
  const Dataset d = linear_map_dataset(60, 2);
  GridSearchSpec g = linear_grid(TargetMode::kDeltaState);
  g.thresholds = {1e-3};
  g.ridges = {1e-4};
  const SindyModel gridded = fit(d, g, 9);
  auto [train_rows, val_rows] = split_rows(d.size(), g.validation_fraction, 9);
  const SindyModel direct = fit_single(d.subset(train_rows), g.libraries[0], {1e-3, 1e-4, 20},
                                       TargetMode::kDeltaState);
  EXPECT_LE((gridded.solution().coefficients - direct.solution().coefficients)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(Sindy, ZeroTargetsInDeltaModeGiveIdentity) {
  Dataset d = linear_map_dataset(40, 3);
  for (auto& t : d.transitions) t.next_state = t.state;
  const SindyModel m = fit(d, linear_grid(TargetMode::kDeltaState), 1);
  const Vector s{{0.3, -0.8}};
  EXPECT_EQ(m.predict(s, Vector{{0.5}}), s);
  EXPECT_EQ(m.solution().nonzeros(), 0);
}

TEST(Sindy, DegenerateModelPrintsPlusZero) {
  const SindyModel m = oracle::zero_model("mountain_car");
  EXPECT_EQ(print_equations(m), "position' = position + 0\nvelocity' = velocity + 0\n");
  const Vector s{{-0.4, 0.01}};
  EXPECT_EQ(m.predict(s, Vector{{1.0}}), s);
}

TEST(Sindy, SingleTermNextStateEquation) {
  LibrarySpec lib = library_for({"x"}, {}, 0);
  lib.include_bias = false;
  SparseSolution sol;
  sol.coefficients = Matrix::Constant(1, 1, 2.0);
  sol.support = {{0}};
  const SindyModel m("synthetic", {"x"}, lib, sol, NormStats::identity(1, 1),
                     TargetMode::kNextState);
  EXPECT_EQ(print_equations(m), "x' = 2*x\n");
}

TEST(Sindy, NormalizationComposition) {
  const Dataset d = mountain_car_data(4);
  const SindyModel m = fit(d, mountain_car_grid(), 5);
  const Matrix theta = build_theta(d, m.library(), m.norm());
  Matrix manual = theta * m.solution().coefficients;
  manual = manual.array().rowwise() * m.norm().target_scale.transpose().array();
  manual += d.states();
  const Matrix pred = m.predict(d.states(), d.actions());
  EXPECT_LE((pred - manual).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sindy, MountainCarSelectsTrigAndExactLaw) {
  const Dataset d = mountain_car_data(0);
  const auto task = make_task("mountain_car");
  const SindyModel m =
      fit(d, mountain_car_grid(), 2, task->spec().state_names, bound_active_rows(d, task->spec()));
  EXPECT_FALSE(m.library().trig_frequencies.empty());
  EXPECT_LE(m.report().validation_mse(1), 1e-5);
  const auto eqs = equations(m);
  double cos3 = 0.0, force = 0.0;
  for (const auto& t : eqs[1]) {
    if (t.name == "cos(3*position)") cos3 = t.coefficient;
    if (t.name == "force") force = t.coefficient;
  }
  EXPECT_NEAR(cos3, -0.0025, 0.0025 * 0.01);
  EXPECT_NEAR(force, 0.0015, 0.0015 * 0.01);
}

TEST(Sindy, SelectedIsMinimalUpToTieTolerance) {
  const SindyModel m = fit(mountain_car_data(1), mountain_car_grid(), 7);
  const FitReport& r = m.report();
  const double selected = r.validation_mse.mean();
  for (const auto& c : r.candidates)
    if (!c.all_degenerate) EXPECT_LE(selected, c.validation_mse + r.tie_tolerance);
}

TEST(Sindy, SupersetGridNeverWorse) {
  const Dataset d = mountain_car_data(2);
  GridSearchSpec small = mountain_car_grid();
  small.libraries.pop_back();
  const SindyModel a = fit(d, small, 3);
  const SindyModel b = fit(d, mountain_car_grid(), 3);
  EXPECT_LE(b.report().validation_mse.mean(),
            a.report().validation_mse.mean() + b.report().tie_tolerance);
}

TEST(Sindy, SelectionTieBreaks) {
  std::vector<CandidateScore> s(3);
  s[0] = {0, 1e-3, 0, 1.0, 5, false};
  s[1] = {0, 1e-2, 0, 1.0, 3, false};
  s[2] = {0, 1e-4, 0, 1.0, 3, false};
  EXPECT_EQ(select_candidate(s, 0.0), 2u);
  s[2].validation_mse = 1.0 + 1e-3;
  EXPECT_EQ(select_candidate(s, 0.0), 1u);
  s[0].validation_mse = 0.5;
  EXPECT_EQ(select_candidate(s, 0.0), 0u);
}

TEST(Sindy, Deterministic) {
  const Dataset d = mountain_car_data(3);
  EXPECT_EQ(serialize(fit(d, mountain_car_grid(), 11)), serialize(fit(d, mountain_car_grid(), 11)));
}

TEST(Sindy, TooFewTransitions) {
  try {
    fit(linear_map_dataset(5, 1), linear_grid(TargetMode::kDeltaState), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTooFewSamples);
    EXPECT_NE(std::string(e.what()).find("too few transitions"), std::string::npos);
  }
}

TEST(Sindy, PredictChecksInput) {
  const SindyModel m = oracle::exact_mountain_car_model();
  EXPECT_THROW(m.predict(Vector{{0.1}}, Vector{{0.0}}), Error);
  EXPECT_THROW(m.predict(Vector{{0.1, std::nan("")}}, Vector{{0.0}}), Error);
}

class ModelFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sdrl_model_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(ModelFile, RoundTripIsBitExact) {
  const SindyModel m = fit(mountain_car_data(5), mountain_car_grid(), 1);
  save_model(m, dir_ / "m.json");
  const SindyModel back = load_model(dir_ / "m.json");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> p(-1.2, 0.6), v(-0.07, 0.07), a(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const Vector s{{p(rng), v(rng)}};
    const Vector u{{a(rng)}};
    EXPECT_EQ(m.predict(s, u), back.predict(s, u));
  }
  EXPECT_EQ(serialize(m), serialize(back));
  EXPECT_EQ(back.report().excluded_rows, m.report().excluded_rows);
}

TEST_F(ModelFile, TruncatedFileIsSchemaError) {
  const std::string text = serialize(oracle::exact_mountain_car_model());
  write_text_file(dir_ / "t.json", text.substr(0, text.size() / 2));
  try {
    load_model(dir_ / "t.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kSchema);
  }
}

TEST_F(ModelFile, FutureVersionNamesBothVersions) {
  auto j = nlohmann::json::parse(serialize(oracle::exact_mountain_car_model()));
  j["format_version"] = 99;
  try {
    deserialize(j.dump());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVersion);
    const std::string what = e.what();
    EXPECT_NE(what.find("99"), std::string::npos);
    EXPECT_NE(what.find(std::to_string(kModelFormatVersion)), std::string::npos);
  }
}

TEST_F(ModelFile, MissingFile) {
  try {
    load_model(dir_ / "nope.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingFile);
  }
}

}  // namespace
}  // namespace sdrl
