#pragma once

// Test-side oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "sdrl/envs.hpp"
#include "sdrl/sindy.hpp"

namespace sdrl::oracle {

// Independent reference of the classic continuous Mountain Car step,
// written from the benchmark definition rather than from src/envs.cpp.
struct McRef {
  double p, v, reward;
  bool done;
};

inline McRef mc_reference(double p, double v, double a) {
  a = std::clamp(a, -1.0, 1.0);
  double v2 = v + 0.0015 * a - 0.0025 * std::cos(3.0 * p);
  v2 = std::clamp(v2, -0.07, 0.07);
  double p2 = std::clamp(p + v2, -1.2, 0.6);
  if (p2 == -1.2 && v2 < 0) v2 = 0.0;
  const bool done = p2 >= 0.45;
  return {p2, v2, (done ? 100.0 : 0.0) - 0.1 * a * a, done};
}

// Model over (position, velocity, force) with library bias + degree 1 +
// trig {3} in delta mode, encoding
//   velocity' = velocity + 0.0015 force - 0.0025 cos(3 position)
//   position' = position + velocity'.
inline SindyModel exact_mountain_car_model() {
  const auto task = make_task("mountain_car");
  const EnvironmentSpec& spec = task->spec();
  LibrarySpec lib = library_for(spec.state_names, spec.action_names, 0);
  lib.poly_degree = 1;
  lib.trig_frequencies = {3.0};
  const auto names = term_names(lib);
  auto col = [&](const std::string& n) {
    return static_cast<int>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  const std::string& p = spec.state_names[0];
  const std::string& v = spec.state_names[1];
  const std::string& f = spec.action_names[0];
  SparseSolution sol;
  sol.coefficients = Matrix::Zero(static_cast<Eigen::Index>(names.size()), 2);
  sol.coefficients(col(v), 0) = 1.0;
  sol.coefficients(col(f), 0) = 0.0015;
  sol.coefficients(col("cos(3*" + p + ")"), 0) = -0.0025;
  sol.coefficients(col(f), 1) = 0.0015;
  sol.coefficients(col("cos(3*" + p + ")"), 1) = -0.0025;
  sol.support = {{col(v), col(f), col("cos(3*" + p + ")")}, {col(f), col("cos(3*" + p + ")")}};
  for (auto& s : sol.support) std::sort(s.begin(), s.end());
  return SindyModel(spec.name, spec.state_names, lib, sol, NormStats::identity(3, 2),
                    TargetMode::kDeltaState);
}

// Zero-coefficient model (identity map in delta mode) for an environment.
inline SindyModel zero_model(const std::string& env) {
  const auto task = make_task(env);
  const EnvironmentSpec& spec = task->spec();
  const int n_ind =
      spec.action_space.kind == ActionKind::kDiscrete ? spec.action_space.encoded_width() : 0;
  LibrarySpec lib = library_for(spec.state_names, spec.action_names, n_ind);
  SparseSolution sol;
  sol.coefficients = Matrix::Zero(static_cast<Eigen::Index>(feature_count(lib)), spec.state_dim());
  sol.support.assign(spec.state_dim(), {});
  sol.degenerate = true;
  const int n_inputs = static_cast<int>(lib.n_inputs());
  return SindyModel(spec.name, spec.state_names, lib, sol,
                    NormStats::identity(n_inputs, spec.state_dim()), TargetMode::kDeltaState);
}

// Parses "<name>' = ..." lines into (term, coefficient) pairs. Terms are
// written as "<coef>*<term>" or a bare constant; a bare leading state name
// (delta mode) is reported with coefficient 1.
inline std::vector<std::pair<std::string, double>> parse_equation(const std::string& line) {
  std::vector<std::pair<std::string, double>> terms;
  const auto eq = line.find(" = ");
  std::string rhs = line.substr(eq + 3);
  std::vector<std::string> tokens;
  std::string cur;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (rhs[i] == ' ' && i + 2 < rhs.size() && (rhs[i + 1] == '+' || rhs[i + 1] == '-') &&
        rhs[i + 2] == ' ') {
      tokens.push_back(cur);
      cur = std::string(1, rhs[i + 1]);
      i += 2;
    } else {
      cur += rhs[i];
    }
  }
  tokens.push_back(cur);
  for (std::string t : tokens) {
    double sign = 1.0;
    if (!t.empty() && (t[0] == '+' || t[0] == '-')) {
      sign = t[0] == '-' ? -1.0 : 1.0;
      t = t.substr(1);
    }
    std::size_t used = 0;
    double c = 1.0;
    try {
      c = std::stod(t, &used);
    } catch (...) {
      used = 0;
    }
    if (used == 0) {
      terms.emplace_back(t, sign);
    } else if (used == t.size()) {
      terms.emplace_back("1", sign * c);
    } else {
      terms.emplace_back(t.substr(used + 1), sign * c);
    }
  }
  return terms;
}

}  // namespace sdrl::oracle
