#include "sdrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdrl/surrogate.hpp"

namespace sdrl {

using nlohmann::ordered_json;

namespace {

void check_shapes(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw Error(ErrorKind::kDimension,
                "shape mismatch: " + std::to_string(pred.rows()) + "x" +
                    std::to_string(pred.cols()) + " vs " + std::to_string(truth.rows()) + "x" +
                    std::to_string(truth.cols()));
  if (pred.rows() < 1) throw Error(ErrorKind::kDimension, "metrics need at least one row");
}

ordered_json vec_json(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

ordered_json optional_json(const std::optional<double>& x) {
  return x ? ordered_json(*x) : ordered_json("undefined");
}

std::string optional_csv(const std::optional<double>& x) {
  return x ? format_double(*x) : "undefined";
}

}  // namespace

Vector mse_per_dim(const Matrix& pred, const Matrix& truth) {
  check_shapes(pred, truth);
  return (pred - truth).array().square().colwise().mean().transpose();
}

std::vector<std::optional<double>> pearson_per_dim(const Matrix& pred, const Matrix& truth) {
  check_shapes(pred, truth);
  std::vector<std::optional<double>> out(pred.cols());
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    const auto a = pred.col(j).array() - pred.col(j).mean();
    const auto b = truth.col(j).array() - truth.col(j).mean();
    const double saa = a.square().sum();
    const double sbb = b.square().sum();
    if (!(saa > 0.0) || !(sbb > 0.0)) continue;
    out[j] = std::clamp((a * b).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
  }
  return out;
}

Vector kstep_divergence(const SindyModel& model, const Task& task, const Dataset& data, int k,
                        const std::vector<int>& rows) {
  if (k < 1) throw Error(ErrorKind::kInvalidArgument, "k must be >= 1");
  const int d = data.state_dim;
  if (model.state_dim() != d || model.action_dim() != data.action_dim)
    throw Error(ErrorKind::kDimension, "model does not match the dataset dimensions");
  std::vector<int> starts = rows;
  if (starts.empty()) {
    starts.resize(data.size());
    std::iota(starts.begin(), starts.end(), 0);
  }
  const auto& tr = data.transitions;
  Vector sq = Vector::Zero(d);
  int segments = 0;
  for (int r : starts) {
    if (r < 0 || static_cast<std::size_t>(r) + k > tr.size()) continue;
    bool contiguous = true;
    for (int j = r; j < r + k - 1 && contiguous; ++j)
      contiguous = !tr[j].done && tr[j].next_state == tr[j + 1].state;
    if (!contiguous) continue;
    Vector pred = tr[r].state;
    Vector truth = tr[r].state;
    for (int j = r; j < r + k; ++j) {
      pred = surrogate_predict(model, task, pred, tr[j].action);
      truth = task.dynamics(truth, task.decode_action(tr[j].action.data()));
    }
    sq += (pred - truth).array().square().matrix();
    ++segments;
  }
  if (segments == 0)
    throw Error(ErrorKind::kTooFewSamples,
                "no recorded segment of length " + std::to_string(k) + " in the dataset");
  return (sq / segments).array().sqrt().matrix();
}

EvalReport evaluate_model(const SindyModel& model, const Task& task, const Dataset& data,
                          const std::vector<int>& ks) {
  data.validate();
  if (model.state_dim() != data.state_dim || model.action_dim() != data.action_dim)
    throw Error(ErrorKind::kDimension,
                "model (state dim " + std::to_string(model.state_dim()) + ", action dim " +
                    std::to_string(model.action_dim()) + ") does not match dataset (" +
                    std::to_string(data.state_dim) + ", " + std::to_string(data.action_dim) +
                    ")");
  EvalReport rep;
  rep.env_name = data.env_name;
  rep.library = model.library().label();
  rep.dataset_fingerprint = data.fingerprint();
  rep.state_names = model.state_names();

  std::vector<int> rows = model.report().validation_rows;
  rep.held_out = !rows.empty() && model.report().dataset_fingerprint == rep.dataset_fingerprint;
  if (!rep.held_out) {
    rows.resize(data.size());
    std::iota(rows.begin(), rows.end(), 0);
  }
  const Dataset sub = data.subset(rows);
  rep.rows = static_cast<int>(sub.size());
  Matrix pred(sub.size(), data.state_dim);
  for (std::size_t i = 0; i < sub.size(); ++i)
    pred.row(static_cast<Eigen::Index>(i)) =
        surrogate_predict(model, task, sub.transitions[i].state, sub.transitions[i].action)
            .transpose();
  const Matrix truth = sub.next_states();
  rep.mse = mse_per_dim(pred, truth);
  rep.pearson = pearson_per_dim(pred, truth);

  const Matrix all_next = data.next_states();
  rep.state_std =
      ((all_next.rowwise() - all_next.colwise().mean()).array().square().colwise().mean())
          .sqrt()
          .transpose();
  rep.state_std = rep.state_std.cwiseMax(NormStats::kStdFloor);
  rep.mse_normalized = rep.mse.array() / rep.state_std.array().square();

  for (int k : ks) {
    rep.ks.push_back(k);
    try {
      rep.kstep_rmse.emplace_back(kstep_divergence(model, task, data, k, rows));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kTooFewSamples) throw;
      rep.kstep_rmse.emplace_back(std::nullopt);
    }
  }
  return rep;
}

std::string to_csv(const EvalReport& r) {
  std::string out = "dim,mse,mse_normalized,pearson";
  for (int k : r.ks) out += ",rmse_k" + std::to_string(k);
  out += "\n";
  for (std::size_t j = 0; j < r.state_names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    out += r.state_names[j] + "," + format_double(r.mse(jj)) + "," +
           format_double(r.mse_normalized(jj)) + "," + optional_csv(r.pearson[j]);
    for (const auto& k : r.kstep_rmse) out += "," + (k ? format_double((*k)(jj)) : "undefined");
    out += "\n";
  }
  return out;
}

ordered_json to_json(const EvalReport& r) {
  ordered_json j;
  j["env"] = r.env_name;
  j["library"] = r.library;
  j["dataset_fingerprint"] = r.dataset_fingerprint;
  j["rows"] = r.rows;
  j["held_out"] = r.held_out;
  j["state_names"] = r.state_names;
  j["mse"] = vec_json(r.mse);
  j["mse_normalized"] = vec_json(r.mse_normalized);
  j["state_std"] = vec_json(r.state_std);
  j["pearson"] = ordered_json::array();
  for (const auto& p : r.pearson) j["pearson"].push_back(optional_json(p));
  j["kstep_rmse"] = ordered_json::object();
  for (std::size_t i = 0; i < r.ks.size(); ++i)
    j["kstep_rmse"][std::to_string(r.ks[i])] =
        r.kstep_rmse[i] ? vec_json(*r.kstep_rmse[i]) : ordered_json("undefined");
  return j;
}

std::vector<AblationRow> ablation_report(const Dataset& data, const EnvironmentSpec& spec,
                                         const std::vector<LibrarySpec>& libraries,
                                         const GridSearchSpec& grid, std::uint64_t seed) {
  if (libraries.size() < 2)
    throw Error(ErrorKind::kInvalidArgument, "ablation needs at least two library candidates");
  const std::vector<int> excluded = bound_active_rows(data, spec);
  std::vector<AblationRow> rows;
  for (const LibrarySpec& lib : libraries) {
    AblationRow row;
    row.env_name = data.env_name;
    row.library = lib.label();
    try {
      GridSearchSpec g = grid;
      g.libraries = {lib};
      const SindyModel m = fit(data, g, seed, spec.state_names, excluded);
      row.ok = true;
      row.mse = m.report().validation_mse;
      row.mean_mse = row.mse.mean();
      const Matrix next = data.next_states();
      const Vector sd =
          ((next.rowwise() - next.colwise().mean()).array().square().colwise().mean())
              .sqrt()
              .transpose()
              .cwiseMax(NormStats::kStdFloor);
      row.mse_normalized = row.mse.array() / sd.array().square();
      row.threshold = m.config().threshold;
      row.ridge = m.config().ridge;
      row.nonzeros = m.solution().nonzeros();
    } catch (const Error& e) {
      row.error = std::string(to_string(e.kind())) + ": " + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv(const std::vector<AblationRow>& rows,
                   const std::vector<std::string>& state_names) {
  std::string out = "env,library,status,mean_mse";
  for (const auto& n : state_names) out += ",mse_" + n;
  for (const auto& n : state_names) out += ",mse_normalized_" + n;
  out += ",threshold,ridge,nonzeros,error\n";
  for (const auto& r : rows) {
    out += r.env_name + "," + r.library + "," + (r.ok ? "ok" : "error") + ",";
    if (r.ok) {
      out += format_double(r.mean_mse);
      for (Eigen::Index j = 0; j < r.mse.size(); ++j) out += "," + format_double(r.mse(j));
      for (Eigen::Index j = 0; j < r.mse_normalized.size(); ++j)
        out += "," + format_double(r.mse_normalized(j));
      out += "," + format_double(r.threshold) + "," + format_double(r.ridge) + "," +
             std::to_string(r.nonzeros) + ",";
    } else {
      out += std::string(2 * state_names.size(), ',') + ",,,";
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out += msg;
    }
    out += "\n";
  }
  return out;
}

CompareReport compare_report(const PipelineCost& sdrl, const PipelineCost& baseline) {
  CompareReport r{sdrl, baseline, 0.0, 0.0, false, std::nullopt};
  const double a = sdrl.evaluation.mean_return;
  const double b = baseline.evaluation.mean_return;
  r.return_ratio = b != 0.0 ? a / b : (a == 0.0 ? 1.0 : std::copysign(INFINITY, a));
  r.interaction_ratio = sdrl.real_training_steps > 0
                            ? static_cast<double>(baseline.real_training_steps) /
                                  static_cast<double>(sdrl.real_training_steps)
                            : INFINITY;
  r.comparable = a >= b - (1.0 - kComparableFraction) * std::abs(b);
  return r;
}

std::string to_csv(const CompareReport& r) {
  std::string out =
      "pipeline,mean_return,success_rate,episodes,real_training_steps,surrogate_steps,"
      "real_evaluation_steps\n";
  for (const PipelineCost* c : {&r.sdrl, &r.baseline})
    out += c->label + "," + format_double(c->evaluation.mean_return) + "," +
           format_double(c->evaluation.success_rate) + "," +
           std::to_string(c->evaluation.returns.size()) + "," +
           std::to_string(c->real_training_steps) + "," + std::to_string(c->surrogate_steps) +
           "," + std::to_string(c->real_evaluation_steps) + "\n";
  return out;
}

ordered_json to_json(const CompareReport& r) {
  auto cost = [](const PipelineCost& c) {
    ordered_json j;
    j["label"] = c.label;
    j["mean_return"] = c.evaluation.mean_return;
    j["success_rate"] = c.evaluation.success_rate;
    j["successes"] = c.evaluation.successes;
    j["episodes"] = c.evaluation.returns.size();
    j["real_training_steps"] = c.real_training_steps;
    j["surrogate_steps"] = c.surrogate_steps;
    j["real_evaluation_steps"] = c.real_evaluation_steps;
    return j;
  };
  ordered_json j;
  j["sdrl"] = cost(r.sdrl);
  j["baseline"] = cost(r.baseline);
  j["return_ratio"] = r.return_ratio;
  j["interaction_ratio"] = r.interaction_ratio;
  j["comparable"] = r.comparable;
  j["comparable_fraction"] = kComparableFraction;
  j["action_agreement"] =
      r.action_agreement ? ordered_json(*r.action_agreement) : ordered_json("undefined");
  return j;
}

}  // namespace sdrl
