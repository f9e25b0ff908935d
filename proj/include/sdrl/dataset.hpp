#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdrl/common.hpp"

namespace sdrl {

// One recorded step. `action` is the library encoding of the action (a
// scalar for continuous spaces, indicators for discrete ones). `done` marks
// the last transition of an episode, whether it terminated or was cut off.
struct Transition {
  Vector state;
  Vector action;
  Vector next_state;
  double reward = 0.0;
  bool done = false;
};

struct Dataset {
  std::string env_name;
  int state_dim = 0;
  int action_dim = 0;
  std::vector<Transition> transitions;

  // Collection metadata (sidecar file).
  std::uint64_t seed = 0;
  int episodes_used = 0;
  int random_actions = 0;
  double epsilon = 0.0;
  std::string expert;
  std::vector<bool> exploratory;  // per transition; empty when unknown

  std::size_t size() const { return transitions.size(); }

  Matrix states() const;
  Matrix actions() const;
  Matrix next_states() const;
  // [states | actions], the library input layout.
  Matrix inputs() const;

  // Row subsets in the given order.
  Dataset subset(const std::vector<int>& rows) const;

  // Throws kDimension if a transition disagrees with state_dim/action_dim,
  // kNonFinite on NaN/Inf.
  void validate() const;

  // SHA-256 of the CSV serialization.
  std::string fingerprint() const;
};

// CSV with header s0..s{d-1},a0..a{k-1},s0'..s{d-1}',r,done. Doubles are
// written as shortest round-trip decimals.
std::string to_csv(const Dataset& data);
Dataset from_csv(const std::string& text, int state_dim, int action_dim);

// Sidecar metadata path for a dataset CSV: "<stem>.meta.json" next to it.
std::filesystem::path metadata_path(const std::filesystem::path& csv_path);

// Writes the CSV and its JSON sidecar.
void save_dataset(const Dataset& data, const std::filesystem::path& csv_path);

// Reads the CSV; dimensions and metadata come from the sidecar. Throws
// kMissingFile if either file is absent and kSchema on a malformed file.
Dataset load_dataset(const std::filesystem::path& csv_path);

// Plain text file helpers shared by the artifact writers.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Shortest round-trip decimal.
std::string format_double(double x);

}  // namespace sdrl
