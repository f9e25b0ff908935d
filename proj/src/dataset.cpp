#include "sdrl/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace sdrl {

namespace {

constexpr int kMetadataVersion = 1;

Matrix stack(const Dataset& d, int cols, const Vector Transition::*field) {
  Matrix m(static_cast<Eigen::Index>(d.size()), cols);
  for (std::size_t i = 0; i < d.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = (d.transitions[i].*field).transpose();
  return m;
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  // from_chars does not accept a leading '+'; the writer never emits one.
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw Error(ErrorKind::kSchema, "dataset line " + std::to_string(line) +
                                        ": cannot parse number '" +
                                        std::string(field) + "'");
  return v;
}

std::vector<std::string> expected_header(int d, int k) {
  std::vector<std::string> h;
  for (int i = 0; i < d; ++i) h.push_back("s" + std::to_string(i));
  for (int i = 0; i < k; ++i) h.push_back("a" + std::to_string(i));
  for (int i = 0; i < d; ++i) h.push_back("s" + std::to_string(i) + "'");
  h.emplace_back("r");
  h.emplace_back("done");
  return h;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

Matrix Dataset::states() const { return stack(*this, state_dim, &Transition::state); }
Matrix Dataset::actions() const { return stack(*this, action_dim, &Transition::action); }
Matrix Dataset::next_states() const {
  return stack(*this, state_dim, &Transition::next_state);
}

Matrix Dataset::inputs() const {
  Matrix m(static_cast<Eigen::Index>(size()), state_dim + action_dim);
  m.leftCols(state_dim) = states();
  m.rightCols(action_dim) = actions();
  return m;
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out = *this;
  out.transitions.clear();
  out.exploratory.clear();
  for (int r : rows) {
    out.transitions.push_back(transitions.at(r));
    if (!exploratory.empty()) out.exploratory.push_back(exploratory.at(r));
  }
  return out;
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const Transition& t = transitions[i];
    if (t.state.size() != state_dim || t.next_state.size() != state_dim ||
        t.action.size() != action_dim)
      throw Error(ErrorKind::kDimension,
                  "transition " + std::to_string(i) + " does not match dataset "
                  "dimensions (state " + std::to_string(state_dim) + ", action " +
                      std::to_string(action_dim) + ")");
    const std::string where = "transition " + std::to_string(i);
    require_finite(t.state, where + " state");
    require_finite(t.action, where + " action");
    require_finite(t.next_state, where + " next state");
    if (!std::isfinite(t.reward))
      throw Error(ErrorKind::kNonFinite, where + ": non-finite reward");
  }
}

std::string Dataset::fingerprint() const { return sha256_hex(to_csv(*this)); }

std::string to_csv(const Dataset& data) {
  std::string out;
  const auto header = expected_header(data.state_dim, data.action_dim);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += header[i];
  }
  out += '\n';
  for (const Transition& t : data.transitions) {
    for (Eigen::Index i = 0; i < t.state.size(); ++i) out += format_double(t.state(i)) + ',';
    for (Eigen::Index i = 0; i < t.action.size(); ++i) out += format_double(t.action(i)) + ',';
    for (Eigen::Index i = 0; i < t.next_state.size(); ++i)
      out += format_double(t.next_state(i)) + ',';
    out += format_double(t.reward);
    out += t.done ? ",1\n" : ",0\n";
  }
  return out;
}

Dataset from_csv(const std::string& text, int state_dim, int action_dim) {
  Dataset d;
  d.state_dim = state_dim;
  d.action_dim = action_dim;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::kSchema, "dataset is empty");
  const auto header = expected_header(state_dim, action_dim);
  const auto fields = split(line);
  bool ok = fields.size() == header.size();
  for (std::size_t i = 0; ok && i < header.size(); ++i) ok = fields[i] == header[i];
  if (!ok)
    throw Error(ErrorKind::kSchema,
                "dataset header does not match state dim " + std::to_string(state_dim) +
                    " / action dim " + std::to_string(action_dim));
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::kSchema, "dataset line " + std::to_string(lineno) +
                                          " has " + std::to_string(f.size()) +
                                          " fields, expected " +
                                          std::to_string(header.size()));
    Transition t;
    t.state.resize(state_dim);
    t.action.resize(action_dim);
    t.next_state.resize(state_dim);
    std::size_t c = 0;
    for (int i = 0; i < state_dim; ++i) t.state(i) = parse_double(f[c++], lineno);
    for (int i = 0; i < action_dim; ++i) t.action(i) = parse_double(f[c++], lineno);
    for (int i = 0; i < state_dim; ++i) t.next_state(i) = parse_double(f[c++], lineno);
    t.reward = parse_double(f[c++], lineno);
    if (f[c] == "1") {
      t.done = true;
    } else if (f[c] == "0") {
      t.done = false;
    } else {
      throw Error(ErrorKind::kSchema,
                  "dataset line " + std::to_string(lineno) + ": done must be 0 or 1");
    }
    d.transitions.push_back(std::move(t));
  }
  d.validate();
  return d;
}

std::filesystem::path metadata_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".meta.json");
  return p;
}

void save_dataset(const Dataset& data, const std::filesystem::path& csv_path) {
  write_text_file(csv_path, to_csv(data));
  nlohmann::ordered_json meta;
  meta["format"] = "sdrl-dataset-meta";
  meta["format_version"] = kMetadataVersion;
  meta["env"] = data.env_name;
  meta["state_dim"] = data.state_dim;
  meta["action_dim"] = data.action_dim;
  meta["transitions"] = data.size();
  meta["seed"] = data.seed;
  meta["episodes_used"] = data.episodes_used;
  meta["random_actions"] = data.random_actions;
  meta["epsilon"] = data.epsilon;
  meta["expert"] = data.expert;
  std::vector<int> random_rows;
  for (std::size_t i = 0; i < data.exploratory.size(); ++i)
    if (data.exploratory[i]) random_rows.push_back(static_cast<int>(i));
  meta["random_rows"] = random_rows;
  meta["fingerprint"] = data.fingerprint();
  write_text_file(metadata_path(csv_path), meta.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& csv_path) {
  const auto meta_path = metadata_path(csv_path);
  const std::string csv = read_text_file(csv_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema,
                meta_path.string() + ": malformed dataset metadata (" + e.what() + ")");
  }
  try {
    const int version = meta.at("format_version").get<int>();
    if (version != kMetadataVersion)
      throw Error(ErrorKind::kVersion,
                  meta_path.string() + ": dataset metadata version " +
                      std::to_string(version) + " is not supported (expected " +
                      std::to_string(kMetadataVersion) + ")");
    Dataset d = from_csv(csv, meta.at("state_dim").get<int>(),
                         meta.at("action_dim").get<int>());
    d.env_name = meta.at("env").get<std::string>();
    d.seed = meta.value("seed", std::uint64_t{0});
    d.episodes_used = meta.value("episodes_used", 0);
    d.random_actions = meta.value("random_actions", 0);
    d.epsilon = meta.value("epsilon", 0.0);
    d.expert = meta.value("expert", std::string());
    if (meta.contains("random_rows")) {
      d.exploratory.assign(d.size(), false);
      for (int r : meta.at("random_rows").get<std::vector<int>>()) {
        if (r < 0 || static_cast<std::size_t>(r) >= d.size())
          throw Error(ErrorKind::kSchema, meta_path.string() + ": random_rows out of range");
        d.exploratory[r] = true;
      }
    }
    if (meta.contains("fingerprint") && meta.at("fingerprint").get<std::string>() != d.fingerprint())
      throw Error(ErrorKind::kSchema,
                  csv_path.string() + ": contents do not match the fingerprint in " +
                      meta_path.string());
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kSchema,
                meta_path.string() + ": missing dataset metadata field (" + e.what() + ")");
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kMissingFile, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kMissingFile, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kMissingFile, "failed writing " + path.string());
}

}  // namespace sdrl
