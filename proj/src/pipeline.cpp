#include "sdrl/pipeline.hpp"

#include <algorithm>
#include <set>

#include "sdrl/surrogate.hpp"

namespace sdrl {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return seed + static_cast<std::uint64_t>(stage);
}

std::vector<LibrarySpec> default_libraries(const EnvironmentSpec& spec) {
  const int n_ind = spec.action_space.kind == ActionKind::kDiscrete ? spec.action_space.n - 1 : 0;
  LibrarySpec poly = library_for(spec.state_names, spec.action_names, n_ind);
  poly.poly_degree = 2;
  LibrarySpec trig = poly;
  trig.trig_frequencies = {1.0, 2.0, 3.0};
  LibrarySpec rational = trig;
  rational.rational_enabled = true;
  return {poly, trig, rational};
}

PipelineConfig PipelineConfig::defaults_for(const std::string& env_name) {
  const auto task = make_task(env_name);
  const EnvironmentSpec& spec = task->spec();
  PipelineConfig c;
  c.env_name = spec.name;
  c.collect = CollectConfig::defaults_for(spec.name);
  c.grid.thresholds = GridSearchSpec::default_thresholds();
  c.grid.ridges = GridSearchSpec::default_ridges();
  c.grid.libraries = default_libraries(spec);
  if (spec.action_space.kind == ActionKind::kDiscrete) {
    // Attitude plane: the lander policy is mostly an angle controller.
    c.eval.map_dim_x = 4;
    c.eval.map_dim_y = 5;
  }
  return c;
}

void validate(const PipelineConfig& c) {
  const auto task = make_task(c.env_name);
  const EnvironmentSpec& spec = task->spec();
  validate(c.collect);
  if (c.collect.env_name != c.env_name)
    throw Error(ErrorKind::kInvalidArgument, "collect.env must match env");
  validate(c.grid);
  for (const auto& lib : c.grid.libraries)
    if (lib.input_names.size() !=
            static_cast<std::size_t>(spec.state_dim() + spec.action_space.encoded_width()) ||
        lib.n_indicators != (spec.action_space.kind == ActionKind::kDiscrete
                                 ? spec.action_space.encoded_width()
                                 : 0))
      throw Error(ErrorKind::kDimension,
                  "library '" + lib.label() + "' does not match environment " + spec.name);
  validate(c.cem);
  if (c.eval.episodes < 1) throw Error(ErrorKind::kInvalidArgument, "eval.episodes must be >= 1");
  for (int k : c.eval.ks)
    if (k < 1) throw Error(ErrorKind::kInvalidArgument, "eval.ks entries must be >= 1");
  const int d = spec.state_dim();
  if (c.eval.map_dim_x < 0 || c.eval.map_dim_x >= d || c.eval.map_dim_y < 0 ||
      c.eval.map_dim_y >= d || c.eval.map_dim_x == c.eval.map_dim_y)
    throw Error(ErrorKind::kInvalidArgument, "eval action-map dims must be distinct state dims");
  if (c.eval.map_points < 2)
    throw Error(ErrorKind::kInvalidArgument, "eval.map_points must be >= 2");
}

// ----------------------------------------------------------------- config

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, where + " must be an object");
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw Error(ErrorKind::kSchema, where + ": unknown key '" + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

LibrarySpec library_from_config(const json& j, const EnvironmentSpec& spec,
                                const std::string& where) {
  check_keys(j, {"include_bias", "poly_degree", "trig_frequencies", "rational_enabled",
                 "rational_guard"},
             where);
  const int n_ind = spec.action_space.kind == ActionKind::kDiscrete ? spec.action_space.n - 1 : 0;
  LibrarySpec lib = library_for(spec.state_names, spec.action_names, n_ind);
  read(j, "include_bias", lib.include_bias);
  read(j, "poly_degree", lib.poly_degree);
  read(j, "trig_frequencies", lib.trig_frequencies);
  read(j, "rational_enabled", lib.rational_enabled);
  read(j, "rational_guard", lib.rational_guard);
  return lib;
}

ordered_json library_config_json(const LibrarySpec& lib) {
  ordered_json j;
  j["include_bias"] = lib.include_bias;
  j["poly_degree"] = lib.poly_degree;
  j["trig_frequencies"] = lib.trig_frequencies;
  j["rational_enabled"] = lib.rational_enabled;
  j["rational_guard"] = lib.rational_guard;
  return j;
}

}  // namespace

PipelineConfig config_from_json(const json& j, const std::string& origin) {
  try {
    check_keys(j, {"version", "env", "seed", "collect", "fit", "train", "eval"}, origin);
    if (!j.contains("version"))
      throw Error(ErrorKind::kSchema, origin + ": missing 'version'");
    const int version = j.at("version").get<int>();
    if (version != kConfigVersion)
      throw Error(ErrorKind::kVersion, origin + ": config version " + std::to_string(version) +
                                           " is not supported (this build reads version " +
                                           std::to_string(kConfigVersion) + ")");
    PipelineConfig c = PipelineConfig::defaults_for(j.value("env", std::string("mountain_car")));
    const auto task = make_task(c.env_name);
    read(j, "seed", c.seed);

    if (j.contains("collect")) {
      const json& cj = j.at("collect");
      check_keys(cj, {"expert", "epsilon", "n_transitions", "max_episodes", "max_episode_steps"},
                 origin + ".collect");
      read(cj, "expert", c.collect.expert);
      read(cj, "epsilon", c.collect.epsilon);
      read(cj, "n_transitions", c.collect.n_transitions);
      read(cj, "max_episodes", c.collect.max_episodes);
      read(cj, "max_episode_steps", c.collect.max_episode_steps);
    }
    if (j.contains("fit")) {
      const json& fj = j.at("fit");
      check_keys(fj,
                 {"thresholds", "ridges", "libraries", "validation_fraction", "max_iterations",
                  "target_mode", "exclude_bound_rows"},
                 origin + ".fit");
      read(fj, "thresholds", c.grid.thresholds);
      read(fj, "ridges", c.grid.ridges);
      read(fj, "validation_fraction", c.grid.validation_fraction);
      read(fj, "max_iterations", c.grid.max_iterations);
      read(fj, "exclude_bound_rows", c.exclude_bound_rows);
      if (fj.contains("target_mode"))
        c.grid.target_mode = target_mode_from_string(fj.at("target_mode").get<std::string>());
      if (fj.contains("libraries")) {
        c.grid.libraries.clear();
        int i = 0;
        for (const json& lj : fj.at("libraries"))
          c.grid.libraries.push_back(library_from_config(
              lj, task->spec(), origin + ".fit.libraries[" + std::to_string(i++) + "]"));
      }
    }
    if (j.contains("train")) {
      const json& tj = j.at("train");
      check_keys(tj,
                 {"population", "elite_fraction", "iterations", "initial_std", "std_floor",
                  "episodes_per_candidate", "selection_episodes", "horizon", "norm_steps",
                  "threads"},
                 origin + ".train");
      read(tj, "population", c.cem.population);
      read(tj, "elite_fraction", c.cem.elite_fraction);
      read(tj, "iterations", c.cem.iterations);
      read(tj, "initial_std", c.cem.initial_std);
      read(tj, "std_floor", c.cem.std_floor);
      read(tj, "episodes_per_candidate", c.cem.episodes_per_candidate);
      read(tj, "selection_episodes", c.cem.selection_episodes);
      read(tj, "horizon", c.cem.horizon);
      read(tj, "norm_steps", c.cem.norm_steps);
      read(tj, "threads", c.cem.threads);
    }
    if (j.contains("eval")) {
      const json& ej = j.at("eval");
      check_keys(ej, {"episodes", "ks", "map_dim_x", "map_dim_y", "map_points"},
                 origin + ".eval");
      read(ej, "episodes", c.eval.episodes);
      read(ej, "ks", c.eval.ks);
      read(ej, "map_dim_x", c.eval.map_dim_x);
      read(ej, "map_dim_y", c.eval.map_dim_y);
      read(ej, "map_points", c.eval.map_points);
    }
    validate(c);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, origin + ": " + e.what());
  }
}

ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["version"] = kConfigVersion;
  j["env"] = c.env_name;
  j["seed"] = c.seed;
  j["collect"] = {{"expert", c.collect.expert},
                  {"epsilon", c.collect.epsilon},
                  {"n_transitions", c.collect.n_transitions},
                  {"max_episodes", c.collect.max_episodes},
                  {"max_episode_steps", c.collect.max_episode_steps}};
  ordered_json fit;
  fit["thresholds"] = c.grid.thresholds;
  fit["ridges"] = c.grid.ridges;
  fit["libraries"] = ordered_json::array();
  for (const auto& lib : c.grid.libraries) fit["libraries"].push_back(library_config_json(lib));
  fit["validation_fraction"] = c.grid.validation_fraction;
  fit["max_iterations"] = c.grid.max_iterations;
  fit["target_mode"] = to_string(c.grid.target_mode);
  fit["exclude_bound_rows"] = c.exclude_bound_rows;
  j["fit"] = fit;
  j["train"] = {{"population", c.cem.population},
                {"elite_fraction", c.cem.elite_fraction},
                {"iterations", c.cem.iterations},
                {"initial_std", c.cem.initial_std},
                {"std_floor", c.cem.std_floor},
                {"episodes_per_candidate", c.cem.episodes_per_candidate},
                {"selection_episodes", c.cem.selection_episodes},
                {"horizon", c.cem.horizon},
                {"norm_steps", c.cem.norm_steps},
                {"threads", c.cem.threads}};
  j["eval"] = {{"episodes", c.eval.episodes},
               {"ks", c.eval.ks},
               {"map_dim_x", c.eval.map_dim_x},
               {"map_dim_y", c.eval.map_dim_y},
               {"map_points", c.eval.map_points}};
  return j;
}

PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::kMissingFile, "config not found: " + path.string());
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": malformed config (" + e.what() + ")");
  }
  return config_from_json(j, path.string());
}

// ----------------------------------------------------------------- stages

namespace {

void note(const StageContext& ctx, const std::string& msg) {
  if (ctx.log) ctx.log(msg);
}

fs::path input_or(const fs::path& given, const StageContext& ctx, const char* name) {
  return given.empty() ? ctx.out / name : given;
}

template <typename Fn>
auto staged(const char* stage, Fn fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), std::string("stage ") + stage + ": " + e.what());
  }
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text_file(path, j.dump(1) + "\n");
}

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorKind::kMissingFile, "file not found: " + path.string());
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kSchema, path.string() + ": truncated or malformed (" + e.what() + ")");
  }
}

std::shared_ptr<const SindyModel> load_model_for(const fs::path& path, const Task& task) {
  auto model = std::make_shared<const SindyModel>(load_model(path));
  const EnvironmentSpec& spec = task.spec();
  if (model->state_dim() != spec.state_dim() ||
      model->action_dim() != spec.action_space.encoded_width())
    throw Error(ErrorKind::kDimension,
                path.string() + ": model (state dim " + std::to_string(model->state_dim()) +
                    ", action dim " + std::to_string(model->action_dim()) +
                    ") does not match environment " + spec.name + " (state dim " +
                    std::to_string(spec.state_dim()) + ", action dim " +
                    std::to_string(spec.action_space.encoded_width()) + ")");
  return model;
}

Dataset load_dataset_for(const fs::path& path, const EnvironmentSpec& spec) {
  Dataset data = load_dataset(path);
  if (data.state_dim != spec.state_dim() ||
      data.action_dim != spec.action_space.encoded_width())
    throw Error(ErrorKind::kDimension,
                path.string() + ": dataset dims do not match environment " + spec.name);
  return data;
}

LinearPolicy load_policy_for(const fs::path& path, const EnvironmentSpec& spec) {
  auto [policy, env] = load_policy(path);
  if (policy.state_dim() != spec.state_dim() ||
      policy.action_space().kind != spec.action_space.kind ||
      policy.action_space().n != spec.action_space.n)
    throw Error(ErrorKind::kDimension,
                path.string() + ": policy does not match environment " + spec.name);
  return policy;
}

// Grid over the dataset's visited range in the two map dims; other dims
// from the evaluation reset state.
ActionMap action_map_for(const Controller& policy, const Task& task, const Dataset& data,
                         const PipelineConfig& c) {
  const int dx = c.eval.map_dim_x;
  const int dy = c.eval.map_dim_y;
  const Matrix s = data.states();
  auto range = [&](int dim) {
    double lo = s.col(dim).minCoeff();
    double hi = s.col(dim).maxCoeff();
    if (!(hi > lo)) {
      lo = task.spec().lower(dim);
      hi = task.spec().upper(dim);
    }
    return linspace(lo, hi, c.eval.map_points);
  };
  const Vector base = task.reset_state(stage_seed(c.seed, Stage::kEval));
  return policy_action_map(policy, base, dx, range(dx), dy, range(dy));
}

ordered_json evaluation_json(const PolicyEvaluation& ev) {
  ordered_json j;
  j["episodes"] = ev.returns.size();
  j["mean_return"] = ev.mean_return;
  j["success_rate"] = ev.success_rate;
  j["successes"] = ev.successes;
  j["real_steps"] = ev.steps;
  j["returns"] = ev.returns;
  return j;
}

}  // namespace

Dataset run_collect(const StageContext& ctx) {
  return staged("collect", [&] {
    const PipelineConfig& c = ctx.config;
    CollectConfig cc = c.collect;
    cc.seed = stage_seed(c.seed, Stage::kCollect);
    auto ledger = std::make_shared<InteractionLedger>();
    Dataset data = collect(cc, ledger);
    save_dataset(data, ctx.out / artifact::kDataset);
    note(ctx, "collect: " + std::to_string(data.size()) + " transitions from " +
                  std::to_string(data.episodes_used) + " episode(s), " +
                  std::to_string(ledger->real.load()) + " real steps");
    return data;
  });
}

SindyModel run_fit(const StageContext& ctx, const fs::path& dataset) {
  return staged("fit", [&] {
    const PipelineConfig& c = ctx.config;
    const auto task = make_task(c.env_name);
    const Dataset data = load_dataset_for(input_or(dataset, ctx, artifact::kDataset), task->spec());
    const std::vector<int> excluded =
        c.exclude_bound_rows ? bound_active_rows(data, task->spec()) : std::vector<int>{};
    SindyModel model =
        fit(data, c.grid, stage_seed(c.seed, Stage::kFit), task->spec().state_names, excluded);
    save_model(model, ctx.out / artifact::kModel);
    write_json(ctx.out / artifact::kFitReport,
               json::parse(serialize(model)).at("fit_report"));
    write_text_file(ctx.out / artifact::kEquations, print_equations(model));
    note(ctx, "fit: library " + model.library().label() + ", threshold " +
                  format_double(model.config().threshold) + ", ridge " +
                  format_double(model.config().ridge) + ", " +
                  std::to_string(model.solution().nonzeros()) + " nonzeros");
    return model;
  });
}

TrainResult run_train(const StageContext& ctx, const fs::path& model_path) {
  return staged("train", [&] {
    const PipelineConfig& c = ctx.config;
    const auto task = make_task(c.env_name);
    auto model = load_model_for(input_or(model_path, ctx, artifact::kModel), *task);
    auto ledger = std::make_shared<InteractionLedger>();
    SurrogateEnv env(task, model, {}, ledger);
    CemConfig cem = c.cem;
    cem.seed = stage_seed(c.seed, Stage::kTrain);
    TrainResult result = train(env, cem);
    if (ledger->real.load() != 0)
      throw Error(ErrorKind::kInvalidArgument, "surrogate training touched the real environment");
    save_policy(result.policy, c.env_name, ctx.out / artifact::kPolicy);
    write_text_file(ctx.out / artifact::kLearningCurve, to_csv(result.curve));
    ordered_json info;
    info["environment"] = "surrogate";
    info["surrogate_steps"] = ledger->surrogate.load();
    info["real_steps"] = ledger->real.load();
    info["selected_return"] = result.best_return;
    write_json(ctx.out / artifact::kTrainInfo, info);
    note(ctx, "train: selected surrogate return " + format_double(result.best_return) + " after " +
                  std::to_string(ledger->surrogate.load()) + " surrogate steps");
    return result;
  });
}

EvalReport run_eval(const StageContext& ctx, const fs::path& model_path,
                    const fs::path& dataset, const fs::path& policy_path) {
  return staged("eval", [&] {
    const PipelineConfig& c = ctx.config;
    const auto task = make_task(c.env_name);
    auto model = load_model_for(input_or(model_path, ctx, artifact::kModel), *task);
    const Dataset data = load_dataset_for(input_or(dataset, ctx, artifact::kDataset), task->spec());
    EvalReport report = evaluate_model(*model, *task, data, c.eval.ks);
    write_text_file(ctx.out / artifact::kEvalCsv, to_csv(report));
    write_json(ctx.out / artifact::kEvalJson, to_json(report));

    const LinearPolicy policy =
        load_policy_for(input_or(policy_path, ctx, artifact::kPolicy), task->spec());
    RealEnv env(task);
    const PolicyEvaluation ev = evaluate_policy(env, policy.controller(), c.eval.episodes,
                                                stage_seed(c.seed, Stage::kEval));
    write_json(ctx.out / artifact::kPolicyEval, evaluation_json(ev));
    write_text_file(ctx.out / artifact::kActionMap,
                    to_csv(action_map_for(policy.controller(), *task, data, c),
                           task->spec().state_names));
    note(ctx, "eval: real-env mean return " + format_double(ev.mean_return) + ", success " +
                  std::to_string(ev.successes) + "/" + std::to_string(c.eval.episodes));
    return report;
  });
}

std::vector<AblationRow> run_ablate(const StageContext& ctx, const fs::path& dataset) {
  return staged("ablate", [&] {
    const PipelineConfig& c = ctx.config;
    const auto task = make_task(c.env_name);
    const Dataset data = load_dataset_for(input_or(dataset, ctx, artifact::kDataset), task->spec());
    auto rows = ablation_report(data, task->spec(), c.grid.libraries, c.grid,
                                stage_seed(c.seed, Stage::kFit));
    write_text_file(ctx.out / artifact::kAblation, to_csv(rows, task->spec().state_names));
    for (const auto& r : rows)
      note(ctx, "ablate: " + r.library + " " +
                    (r.ok ? "mean validation MSE " + format_double(r.mean_mse) : r.error));
    return rows;
  });
}

CompareReport run_compare(const StageContext& ctx, const fs::path& dataset,
                          const fs::path& policy_path) {
  return staged("compare", [&] {
    const PipelineConfig& c = ctx.config;
    const auto task = make_task(c.env_name);
    const Dataset data = load_dataset_for(input_or(dataset, ctx, artifact::kDataset), task->spec());
    const LinearPolicy policy =
        load_policy_for(input_or(policy_path, ctx, artifact::kPolicy), task->spec());
    const json info = read_json(ctx.out / artifact::kTrainInfo);

    auto ledger = std::make_shared<InteractionLedger>();
    RealEnv real(task, ledger);
    CemConfig cem = c.cem;
    cem.seed = stage_seed(c.seed, Stage::kBaseline);
    const TrainResult base = train(real, cem);
    const std::uint64_t baseline_steps = ledger->real.load();
    save_policy(base.policy, c.env_name, ctx.out / artifact::kBaselinePolicy);
    write_text_file(ctx.out / artifact::kBaselineCurve, to_csv(base.curve));

    RealEnv eval_env(task);
    const std::uint64_t eval_seed = stage_seed(c.seed, Stage::kEval);
    PipelineCost sdrl;
    sdrl.label = "sd-rl";
    sdrl.evaluation = evaluate_policy(eval_env, policy.controller(), c.eval.episodes, eval_seed);
    sdrl.real_training_steps = data.size();
    sdrl.surrogate_steps = info.at("surrogate_steps").get<std::uint64_t>();
    sdrl.real_evaluation_steps = sdrl.evaluation.steps;
    PipelineCost baseline;
    baseline.label = "real-cem";
    baseline.evaluation =
        evaluate_policy(eval_env, base.policy.controller(), c.eval.episodes, eval_seed);
    baseline.real_training_steps = baseline_steps;
    baseline.real_evaluation_steps = baseline.evaluation.steps;

    CompareReport report = compare_report(sdrl, baseline);
    const ActionMap a = action_map_for(policy.controller(), *task, data, c);
    const ActionMap b = action_map_for(base.policy.controller(), *task, data, c);
    report.action_agreement = action_agreement(a, b, task->spec().action_space.kind);
    write_text_file(ctx.out / artifact::kBaselineActionMap, to_csv(b, task->spec().state_names));
    write_text_file(ctx.out / artifact::kCompareCsv, to_csv(report));
    write_json(ctx.out / artifact::kCompareJson, to_json(report));
    note(ctx, "compare: sd-rl return " + format_double(sdrl.evaluation.mean_return) +
                  " vs real-cem " + format_double(baseline.evaluation.mean_return) +
                  ", real training steps " + std::to_string(sdrl.real_training_steps) + " vs " +
                  std::to_string(baseline_steps));
    return report;
  });
}

std::vector<ManifestEntry> write_manifest(const fs::path& out, const PipelineConfig& config) {
  std::vector<ManifestEntry> entries;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), out).generic_string();
    if (rel == artifact::kManifest) continue;
    entries.push_back({rel, sha256_hex(read_text_file(e.path())), e.file_size()});
  }
  std::sort(entries.begin(), entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  ordered_json j;
  j["format"] = "sdrl-manifest";
  j["format_version"] = 1;
  j["config_sha256"] = sha256_hex(to_json(config).dump());
  j["artifacts"] = ordered_json::array();
  for (const auto& m : entries)
    j["artifacts"].push_back({{"path", m.path}, {"sha256", m.sha256}, {"bytes", m.bytes}});
  write_json(out / artifact::kManifest, j);
  return entries;
}

std::vector<ManifestEntry> run_pipeline(const StageContext& ctx) {
  validate(ctx.config);
  fs::create_directories(ctx.out);
  run_collect(ctx);
  run_fit(ctx);
  run_train(ctx);
  run_eval(ctx);
  run_ablate(ctx);
  run_compare(ctx);
  return write_manifest(ctx.out, ctx.config);
}

}  // namespace sdrl
