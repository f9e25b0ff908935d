#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "sdrl/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kUsage = 2,
};

int exit_code(sdrl::ErrorKind kind) {
  switch (kind) {
    case sdrl::ErrorKind::kInvalidArgument: return 3;
    case sdrl::ErrorKind::kMissingFile: return 4;
    case sdrl::ErrorKind::kSchema: return 5;
    case sdrl::ErrorKind::kVersion: return 6;
    case sdrl::ErrorKind::kDimension: return 7;
    case sdrl::ErrorKind::kTooFewSamples: return 8;
    case sdrl::ErrorKind::kDegenerate: return 9;
    case sdrl::ErrorKind::kUnreachable: return 10;
    case sdrl::ErrorKind::kNonFinite: return 11;
  }
  return kOther;
}

void setup_logging() {
  auto logger = spdlog::stderr_logger_st("sdrl");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  if (const char* level = std::getenv("SDRL_LOG_LEVEL"))
    spdlog::set_level(spdlog::level::from_str(level));
}

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string env = "mountain_car";
  std::string out = "sdrl_out";
  std::string dataset;
  std::string model;
  std::string policy;
  std::optional<int> n_transitions;
  std::optional<double> epsilon;
  std::optional<int> iterations;
  std::optional<int> population;
  std::optional<int> threads;
  std::optional<int> episodes;
};

sdrl::StageContext make_context(const Options& o) {
  sdrl::PipelineConfig c = o.config.empty() ? sdrl::PipelineConfig::defaults_for(o.env)
                                            : sdrl::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.n_transitions) c.collect.n_transitions = *o.n_transitions;
  if (o.epsilon) c.collect.epsilon = *o.epsilon;
  if (o.iterations) c.cem.iterations = *o.iterations;
  if (o.population) c.cem.population = *o.population;
  if (o.threads) c.cem.threads = *o.threads;
  if (o.episodes) c.eval.episodes = *o.episodes;
  sdrl::validate(c);
  fs::create_directories(o.out);
  return {c, o.out, [](const std::string& msg) { spdlog::info("{}", msg); }};
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Pipeline config JSON (defaults: built-in for --env)");
  cmd->add_option("--seed", o.seed, "Global seed; stage seeds are seed + stage offset");
  cmd->add_option("--env", o.env, "Environment when no config is given")
      ->check(CLI::IsMember({"mountain_car", "lunar_lander"}));
  cmd->add_option("--out", o.out, "Artifact directory")->capture_default_str();
  cmd->add_option("--threads", o.threads, "CEM worker threads (0: hardware concurrency)");
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Sparse dynamics models, surrogate training and transfer reports"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 2 usage, 3 invalid argument, 4 missing file, 5 schema, 6 version,\n"
      "7 dimension, 8 too few samples, 9 degenerate model, 10 unreachable, 11 non-finite.\n"
      "SDRL_LOG_LEVEL=trace|debug|info|warn|error|off sets log verbosity.");

  Options o;
  auto* collect = app.add_subcommand("collect", "Collect expert/exploration transitions");
  add_common(collect, o);
  collect->add_option("--n-transitions", o.n_transitions, "Transitions to record");
  collect->add_option("--epsilon", o.epsilon, "Probability of a random action");

  auto* fit = app.add_subcommand("fit", "Grid-search a sparse dynamics model");
  add_common(fit, o);
  fit->add_option("--dataset", o.dataset, "Dataset CSV (default: <out>/dataset.csv)");

  auto* train = app.add_subcommand("train", "Train a policy with CEM in the surrogate");
  add_common(train, o);
  train->add_option("--model", o.model, "Model JSON (default: <out>/model.json)");
  train->add_option("--iterations", o.iterations, "CEM generations");
  train->add_option("--population", o.population, "CEM population size");

  auto* eval = app.add_subcommand("eval", "Model fidelity and real-env policy evaluation");
  add_common(eval, o);
  eval->add_option("--model", o.model, "Model JSON (default: <out>/model.json)");
  eval->add_option("--dataset", o.dataset, "Dataset CSV (default: <out>/dataset.csv)");
  eval->add_option("--policy", o.policy, "Policy JSON (default: <out>/policy.json)");
  eval->add_option("--episodes", o.episodes, "Real-env evaluation episodes");

  auto* ablate = app.add_subcommand("ablate", "Validation MSE per library candidate");
  add_common(ablate, o);
  ablate->add_option("--dataset", o.dataset, "Dataset CSV (default: <out>/dataset.csv)");

  auto* compare = app.add_subcommand("compare", "Real-env CEM baseline and cost comparison");
  add_common(compare, o);
  compare->add_option("--dataset", o.dataset, "Dataset CSV (default: <out>/dataset.csv)");
  compare->add_option("--policy", o.policy, "Policy JSON (default: <out>/policy.json)");
  compare->add_option("--iterations", o.iterations, "Baseline CEM generations");
  compare->add_option("--population", o.population, "Baseline CEM population size");
  compare->add_option("--episodes", o.episodes, "Real-env evaluation episodes");

  auto* pipeline = app.add_subcommand("pipeline", "collect, fit, train, eval, ablate, compare");
  add_common(pipeline, o);
  pipeline->add_option("--n-transitions", o.n_transitions, "Transitions to record");
  pipeline->add_option("--epsilon", o.epsilon, "Probability of a random action");
  pipeline->add_option("--iterations", o.iterations, "CEM generations");
  pipeline->add_option("--population", o.population, "CEM population size");
  pipeline->add_option("--episodes", o.episodes, "Real-env evaluation episodes");

  auto* manifest = app.add_subcommand("manifest", "Hash the artifacts in --out");
  add_common(manifest, o);

  auto* config = app.add_subcommand("config", "Print the effective config as JSON");
  add_common(config, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (config->parsed()) {
      sdrl::PipelineConfig c = o.config.empty() ? sdrl::PipelineConfig::defaults_for(o.env)
                                                : sdrl::load_config(o.config);
      if (o.seed) c.seed = *o.seed;
      std::cout << sdrl::to_json(c).dump(1) << "\n";
      return kOk;
    }
    const sdrl::StageContext ctx = make_context(o);
    if (collect->parsed()) {
      sdrl::run_collect(ctx);
    } else if (fit->parsed()) {
      sdrl::run_fit(ctx, o.dataset);
    } else if (train->parsed()) {
      sdrl::run_train(ctx, o.model);
    } else if (eval->parsed()) {
      sdrl::run_eval(ctx, o.model, o.dataset, o.policy);
    } else if (ablate->parsed()) {
      sdrl::run_ablate(ctx, o.dataset);
    } else if (compare->parsed()) {
      sdrl::run_compare(ctx, o.dataset, o.policy);
    } else if (pipeline->parsed()) {
      const auto entries = sdrl::run_pipeline(ctx);
      spdlog::info("pipeline: {} artifacts in {}", entries.size(), ctx.out.string());
    } else if (manifest->parsed()) {
      const auto entries = sdrl::write_manifest(ctx.out, ctx.config);
      for (const auto& e : entries) std::cout << e.sha256 << "  " << e.path << "\n";
    }
  } catch (const sdrl::Error& e) {
    std::cerr << "error[" << sdrl::to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
