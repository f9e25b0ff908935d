#include "sdrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sdrl/dataset.hpp"

namespace sdrl {

namespace {

constexpr std::uint64_t kNormStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kEpisodeStream = 1000;
constexpr std::uint64_t kSelectionStream = 3;

}  // namespace

// ---------------------------------------------------------- LinearPolicy

LinearPolicy::LinearPolicy(ActionSpace space, Vector state_mean, Vector state_std,
                           Vector params)
    : space_(space),
      mean_(std::move(state_mean)),
      std_(std::move(state_std)),
      params_(std::move(params)) {
  if (mean_.size() != std_.size() || mean_.size() < 1)
    throw Error(ErrorKind::kDimension, "policy normalization vectors disagree");
  if (params_.size() != parameter_count(state_dim(), space_))
    throw Error(ErrorKind::kDimension,
                "policy has " + std::to_string(params_.size()) + " parameters, expected " +
                    std::to_string(parameter_count(state_dim(), space_)));
  if ((std_.array() <= 0.0).any())
    throw Error(ErrorKind::kInvalidArgument, "policy state std must be positive");
  require_finite(params_, "policy parameters");
}

int LinearPolicy::head_width(const ActionSpace& space) {
  return space.kind == ActionKind::kContinuous ? 1 : space.n;
}

int LinearPolicy::parameter_count(int state_dim, const ActionSpace& space) {
  return (state_dim + 1) * head_width(space);
}

Vector LinearPolicy::scores(const Vector& state) const {
  const int d = state_dim();
  const int w = head_width(space_);
  Vector out(w);
  for (int k = 0; k < w; ++k) {
    const double* row = params_.data() + static_cast<std::ptrdiff_t>(k) * (d + 1);
    double acc = row[d];
    for (int i = 0; i < d; ++i) acc += row[i] * (state(i) - mean_(i)) / std_(i);
    out(k) = acc;
  }
  return out;
}

Action LinearPolicy::act(const Vector& state) const {
  const Vector s = scores(state);
  if (space_.kind == ActionKind::kContinuous) {
    const double mid = 0.5 * (space_.high + space_.low);
    const double half = 0.5 * (space_.high - space_.low);
    return std::clamp(mid + half * std::tanh(s(0)), space_.low, space_.high);
  }
  int best = 0;
  for (int k = 1; k < s.size(); ++k)
    if (s(k) > s(best)) best = k;
  return best;
}

Controller LinearPolicy::controller() const {
  return [p = *this](const Vector& s) { return p.act(s); };
}

// ------------------------------------------------------------------ CEM

int CemConfig::elite_count() const {
  return std::max(1, static_cast<int>(std::lround(elite_fraction * population)));
}

void validate(const CemConfig& c) {
  if (c.population < 1) throw Error(ErrorKind::kInvalidArgument, "population must be >= 1");
  if (!(c.elite_fraction > 0.0 && c.elite_fraction <= 1.0))
    throw Error(ErrorKind::kInvalidArgument, "elite fraction must lie in (0, 1]");
  if (c.iterations < 0) throw Error(ErrorKind::kInvalidArgument, "iterations must be >= 0");
  if (!(c.initial_std > 0.0) || !(c.std_floor >= 0.0))
    throw Error(ErrorKind::kInvalidArgument, "initial std must be > 0 and std floor >= 0");
  if (c.episodes_per_candidate < 1 || c.selection_episodes < 1)
    throw Error(ErrorKind::kInvalidArgument,
                "episodes per candidate and selection episodes must be >= 1");
  if (c.horizon < 0 || c.norm_steps < 0 || c.threads < 0)
    throw Error(ErrorKind::kInvalidArgument, "horizon, norm_steps and threads must be >= 0");
}

std::pair<Vector, Vector> random_rollout_stats(Environment& env, int steps,
                                               std::uint64_t seed) {
  const EnvironmentSpec& spec = env.spec();
  const int d = spec.state_dim();
  if (steps < 1) return {Vector::Zero(d), Vector::Ones(d)};
  std::mt19937_64 rng(seed);
  auto random_action = [&]() -> Action {
    if (spec.action_space.kind == ActionKind::kContinuous)
      return std::uniform_real_distribution<double>(spec.action_space.low,
                                                    spec.action_space.high)(rng);
    return std::uniform_int_distribution<int>(0, spec.action_space.n - 1)(rng);
  };
  Matrix states(steps, d);
  int episode = 0;
  Vector s = env.reset(derive_seed(seed, kEpisodeStream + episode++));
  for (int t = 0; t < steps; ++t) {
    states.row(t) = s.transpose();
    StepResult r = env.step(random_action());
    s = (r.terminated || r.truncated) ? env.reset(derive_seed(seed, kEpisodeStream + episode++))
                                      : r.next_state;
  }
  Vector mean = states.colwise().mean().transpose();
  Vector sd = ((states.rowwise() - mean.transpose()).array().square().colwise().mean())
                  .sqrt()
                  .transpose();
  // Dims a random walk never moves (lander angle stays near 0) fall back
  // to a tenth of the bound range.
  for (int i = 0; i < d; ++i) {
    const double fallback = 0.1 * (spec.upper(i) - spec.lower(i));
    if (!(sd(i) > 1e-6 * fallback)) sd(i) = fallback;
  }
  return {mean, sd};
}

namespace {

// Runs fn(i) for i in [0, n) on `threads` workers, each owning an
// environment clone.
template <typename Fn>
void parallel_for(int n, int threads, const Environment& proto, Fn fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    auto env = proto.clone();
    for (int i = 0; i < n; ++i) fn(*env, i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        auto env = proto.clone();
        for (int i = t; i < n; i += threads) fn(*env, i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct EpisodeStats {
  double ret = 0.0;
  bool success = false;
  std::uint64_t steps = 0;
};

EpisodeStats run_episode(Environment& env, const Controller& policy, int horizon,
                         std::uint64_t seed) {
  EpisodeStats st;
  Vector s = env.reset(seed);
  for (int t = 0; t < horizon; ++t) {
    StepResult r = env.step(policy(s));
    ++st.steps;
    st.ret += r.reward;
    st.success = st.success || r.success;
    if (r.terminated || r.truncated) break;
    s = std::move(r.next_state);
  }
  return st;
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

TrainResult train(const Environment& env, const CemConfig& config) {
  validate(config);
  const EnvironmentSpec& spec = env.spec();
  const int horizon = config.horizon > 0 ? config.horizon : spec.max_episode_steps;
  const int threads = resolve_threads(config.threads);

  std::uint64_t steps = 0;
  auto norm_env = env.clone();
  auto [mean, sd] =
      random_rollout_stats(*norm_env, config.norm_steps, derive_seed(config.seed, kNormStream));
  steps += norm_env->total_steps();

  const int n_params = LinearPolicy::parameter_count(spec.state_dim(), spec.action_space);
  Vector mu = Vector::Zero(n_params);
  Vector sigma = Vector::Constant(n_params, config.initial_std);
  std::mt19937_64 rng(derive_seed(config.seed, kSampleStream));
  std::normal_distribution<double> normal(0.0, 1.0);

  TrainResult result{LinearPolicy(spec.action_space, mean, sd, mu),
                     -std::numeric_limits<double>::infinity(),
                     {},
                     0};
  const int n_elite = std::min(config.elite_count(), config.population);
  std::vector<Vector> population(config.population);
  std::vector<double> fitness(config.population);
  std::vector<std::uint64_t> used(config.population);
  std::vector<Vector> leaders;
  double best_fitness = -std::numeric_limits<double>::infinity();

  for (int gen = 0; gen <= config.iterations; ++gen) {
    for (auto& p : population) {
      p.resize(n_params);
      for (int i = 0; i < n_params; ++i) p(i) = mu(i) + sigma(i) * normal(rng);
    }
    std::vector<std::uint64_t> seeds(config.episodes_per_candidate);
    for (int e = 0; e < config.episodes_per_candidate; ++e)
      seeds[e] = derive_seed(config.seed,
                             kEpisodeStream + static_cast<std::uint64_t>(gen) *
                                                  config.episodes_per_candidate +
                                 e);

    parallel_for(config.population, threads, env, [&](Environment& worker, int i) {
      const LinearPolicy policy(spec.action_space, mean, sd, population[i]);
      const Controller ctl = [&policy](const Vector& s) { return policy.act(s); };
      double total = 0.0;
      std::uint64_t n = 0;
      for (std::uint64_t seed : seeds) {
        const EpisodeStats st = run_episode(worker, ctl, horizon, seed);
        total += st.ret;
        n += st.steps;
      }
      const double f = total / static_cast<double>(seeds.size());
      fitness[i] = std::isfinite(f) ? f : -std::numeric_limits<double>::infinity();
      used[i] = n;
    });
    for (std::uint64_t n : used) steps += n;

    std::vector<int> order(config.population);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitness[a] > fitness[b]; });
    leaders.push_back(population[order[0]]);
    best_fitness = std::max(best_fitness, fitness[order[0]]);

    CurvePoint pt;
    pt.iteration = gen;
    double sum = 0.0;
    int finite = 0;
    for (double f : fitness)
      if (std::isfinite(f)) {
        sum += f;
        ++finite;
      }
    pt.mean_return = finite > 0 ? sum / finite : -std::numeric_limits<double>::infinity();
    pt.max_return = fitness[order[0]];
    pt.best_return = best_fitness;
    pt.cumulative_steps = steps;
    result.curve.push_back(pt);

    if (gen == config.iterations) break;
    // Refit on elites with a finite score; keep the old distribution if
    // none exist.
    int n_fit = 0;
    Vector new_mu = Vector::Zero(n_params);
    for (int k = 0; k < n_elite; ++k) {
      if (!std::isfinite(fitness[order[k]])) break;
      new_mu += population[order[k]];
      ++n_fit;
    }
    if (n_fit == 0) continue;
    new_mu /= n_fit;
    Vector var = Vector::Zero(n_params);
    for (int k = 0; k < n_fit; ++k)
      var += (population[order[k]] - new_mu).array().square().matrix();
    var /= n_fit;
    mu = new_mu;
    sigma = var.array().sqrt().max(config.std_floor).matrix();
  }

  leaders.push_back(mu);
  std::vector<std::uint64_t> selection_seeds(config.selection_episodes);
  for (int e = 0; e < config.selection_episodes; ++e)
    selection_seeds[e] = derive_seed(derive_seed(config.seed, kSelectionStream), e);
  const int n_leaders = static_cast<int>(leaders.size());
  std::vector<double> score(n_leaders);
  used.assign(n_leaders, 0);
  parallel_for(n_leaders, threads, env, [&](Environment& worker, int i) {
    const LinearPolicy policy(spec.action_space, mean, sd, leaders[i]);
    const Controller ctl = [&policy](const Vector& s) { return policy.act(s); };
    double total = 0.0;
    for (std::uint64_t seed : selection_seeds) {
      const EpisodeStats st = run_episode(worker, ctl, horizon, seed);
      total += st.ret;
      used[i] += st.steps;
    }
    const double f = total / static_cast<double>(selection_seeds.size());
    score[i] = std::isfinite(f) ? f : -std::numeric_limits<double>::infinity();
  });
  for (std::uint64_t n : used) steps += n;
  int chosen = 0;
  for (int i = 1; i < n_leaders; ++i)
    if (score[i] > score[chosen]) chosen = i;
  result.policy = LinearPolicy(spec.action_space, mean, sd, leaders[chosen]);
  result.best_return = score[chosen];
  result.steps = steps;
  return result;
}

PolicyEvaluation evaluate_policy(Environment& env, const Controller& policy, int n_episodes,
                                 std::uint64_t seed, int horizon) {
  if (n_episodes < 1) throw Error(ErrorKind::kInvalidArgument, "n_episodes must be >= 1");
  if (horizon <= 0) horizon = env.spec().max_episode_steps;
  PolicyEvaluation ev;
  for (int e = 0; e < n_episodes; ++e) {
    const EpisodeStats st = run_episode(env, policy, horizon, derive_seed(seed, e));
    ev.returns.push_back(st.ret);
    ev.successes += st.success ? 1 : 0;
    ev.steps += st.steps;
  }
  ev.mean_return = std::accumulate(ev.returns.begin(), ev.returns.end(), 0.0) / n_episodes;
  ev.success_rate = static_cast<double>(ev.successes) / n_episodes;
  return ev;
}

// ------------------------------------------------------------ action map

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 1) throw Error(ErrorKind::kInvalidArgument, "linspace needs n >= 1");
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i)
    v[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
  return v;
}

ActionMap policy_action_map(const Controller& policy, const Vector& base, int dim_x,
                            const std::vector<double>& xs, int dim_y,
                            const std::vector<double>& ys) {
  if (dim_x < 0 || dim_y < 0 || dim_x >= base.size() || dim_y >= base.size() ||
      dim_x == dim_y)
    throw Error(ErrorKind::kInvalidArgument, "action map needs two distinct state dims");
  if (xs.empty() || ys.empty())
    throw Error(ErrorKind::kInvalidArgument, "action map grid is empty");
  ActionMap map{dim_x, dim_y, xs, ys,
                Matrix(static_cast<Eigen::Index>(ys.size()), static_cast<Eigen::Index>(xs.size()))};
  Vector s = base;
  for (std::size_t r = 0; r < ys.size(); ++r) {
    for (std::size_t c = 0; c < xs.size(); ++c) {
      s(dim_x) = xs[c];
      s(dim_y) = ys[r];
      const Action a = policy(s);
      map.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          std::holds_alternative<double>(a) ? std::get<double>(a)
                                            : static_cast<double>(std::get<int>(a));
    }
  }
  return map;
}

std::string to_csv(const ActionMap& map, const std::vector<std::string>& state_names) {
  std::string out = state_names.at(map.dim_x) + "," + state_names.at(map.dim_y) + ",action\n";
  for (std::size_t r = 0; r < map.ys.size(); ++r)
    for (std::size_t c = 0; c < map.xs.size(); ++c)
      out += format_double(map.xs[c]) + "," + format_double(map.ys[r]) + "," +
             format_double(map.values(static_cast<Eigen::Index>(r),
                                      static_cast<Eigen::Index>(c))) +
             "\n";
  return out;
}

double action_agreement(const ActionMap& a, const ActionMap& b, ActionKind kind) {
  if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
    throw Error(ErrorKind::kDimension, "action maps have different grids");
  const auto n = a.values.size();
  if (n == 0) return 1.0;
  Eigen::Index agree = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = a.values.data()[i];
    const double y = b.values.data()[i];
    agree += kind == ActionKind::kDiscrete ? (x == y) : ((x >= 0.0) == (y >= 0.0));
  }
  return static_cast<double>(agree) / static_cast<double>(n);
}

std::string to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "iteration,mean_return,max_return,best_return,cumulative_steps\n";
  for (const auto& p : curve)
    out += std::to_string(p.iteration) + "," + format_double(p.mean_return) + "," +
           format_double(p.max_return) + "," + format_double(p.best_return) + "," +
           std::to_string(p.cumulative_steps) + "\n";
  return out;
}

// --------------------------------------------------------- serialization

namespace {

nlohmann::ordered_json to_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vector vector_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string serialize(const LinearPolicy& policy, const std::string& env_name) {
  nlohmann::ordered_json j;
  j["format"] = "sdrl-linear-policy";
  j["format_version"] = kPolicyFormatVersion;
  j["env"] = env_name;
  const ActionSpace& sp = policy.action_space();
  if (sp.kind == ActionKind::kContinuous) {
    j["action_space"] = {{"kind", "continuous"}, {"low", sp.low}, {"high", sp.high}};
  } else {
    j["action_space"] = {{"kind", "discrete"}, {"n", sp.n}};
  }
  j["state_mean"] = to_json(policy.state_mean());
  j["state_std"] = to_json(policy.state_std());
  j["params"] = to_json(policy.params());
  return j.dump(1) + "\n";
}

std::pair<LinearPolicy, std::string> load_policy_json(const std::string& text,
                                                      const std::string& origin);

LinearPolicy deserialize_policy(const std::string& text, const std::string& origin) {
  return load_policy_json(text, origin).first;
}

void save_policy(const LinearPolicy& policy, const std::string& env_name,
                 const std::filesystem::path& path) {
  write_text_file(path, serialize(policy, env_name));
}

std::pair<LinearPolicy, std::string> load_policy(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::kMissingFile, "policy file not found: " + path.string());
  return load_policy_json(read_text_file(path), path.string());
}

std::pair<LinearPolicy, std::string> load_policy_json(const std::string& text,
                                                      const std::string& origin) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kSchema,
                origin + ": truncated or malformed policy file (" + e.what() + ")");
  }
  try {
    if (j.value("format", std::string()) != "sdrl-linear-policy")
      throw Error(ErrorKind::kSchema, origin + ": not a policy file");
    const int version = j.at("format_version").get<int>();
    if (version != kPolicyFormatVersion)
      throw Error(ErrorKind::kVersion,
                  origin + ": policy format version " + std::to_string(version) +
                      " is not supported (this build reads version " +
                      std::to_string(kPolicyFormatVersion) + ")");
    ActionSpace sp;
    const auto& aj = j.at("action_space");
    const std::string kind = aj.at("kind").get<std::string>();
    if (kind == "continuous") {
      sp.kind = ActionKind::kContinuous;
      sp.low = aj.at("low").get<double>();
      sp.high = aj.at("high").get<double>();
    } else if (kind == "discrete") {
      sp.kind = ActionKind::kDiscrete;
      sp.n = aj.at("n").get<int>();
    } else {
      throw Error(ErrorKind::kSchema, origin + ": unknown action space kind '" + kind + "'");
    }
    return {LinearPolicy(sp, vector_from(j.at("state_mean")), vector_from(j.at("state_std")),
                         vector_from(j.at("params"))),
            j.at("env").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema, origin + ": invalid policy file (" + e.what() + ")");
  }
}

}  // namespace sdrl
