#pragma once

// Experiment configuration files: a small TOML-style format with [sections]
// and `key = value` lines. Every accepted key has a default, so a file only
// needs the values it changes; anything not in the default set is rejected.

#include "beamtrack/sim.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace beamtrack {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Resolved settings keyed by "section.key", in a stable order.
class Settings {
 public:
  static Settings defaults() {
    Settings s;
    s.add("array.n_antennas", "32");
    s.add("array.spacing_ratio", "0.5");
    s.add("array.theta_min", "-180");
    s.add("array.theta_max", "0");
    s.add("array.phase_reference", "first_element");
    s.add("grid.n_bins", "64");
    s.add("codebook.mode", "pseudo_inverse");
    s.add("mobility.model", "gaussian");
    s.add("mobility.nu", "0.1");
    s.add("mobility.sigma_phi_sq", "0.75");
    s.add("mobility.jump_deg", "5");
    s.add("mobility.p", "0.01");
    s.add("mobility.boundary", "wrap");
    s.add("channel.snr_db", "10");
    s.add("policy.gamma", "0.03");
    s.add("policy.hiepm_scope", "all_levels");
    s.add("policy.mi_table_n", "101");
    s.add("sim.algorithm", "proposed");
    s.add("sim.horizon", "500");
    s.add("sim.episodes", "100");
    s.add("sim.seed", "1");
    s.add("sim.initial_aoa", "uniform");
    s.add("sim.initial_aoa_deg", "-90");
    s.add("sim.threads", "0");
    s.add("baseline.mse_threshold_factor", "0.5");
    s.add("baseline.p_min", "0.5");
    s.add("baseline.window", "5");
    s.add("baseline.scan_level", "6");
    s.add("baseline.tau_max", "20");
    s.add("baseline.exhaustive_perfect", "true");
    return s;
  }

  bool has(const std::string& key) const { return index_.count(key) != 0; }

  const std::string& get(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    return entries_[it->second].second;
  }

  void set(const std::string& key, std::string value) {
    auto it = index_.find(key);
    if (it == index_.end()) throw ConfigError("unknown config key '" + key + "'");
    entries_[it->second].second = std::move(value);
  }

  /// Full "section.key", or a bare key that is unique across sections.
  std::string resolve(const std::string& key) const {
    if (has(key) || key.find('.') != std::string::npos) return key;
    std::string found;
    for (const auto& [full, value] : entries_) {
      if (full.substr(full.find('.') + 1) != key) continue;
      if (!found.empty()) throw ConfigError("config key '" + key + "' is ambiguous, use section.key");
      found = full;
    }
    return found.empty() ? key : found;
  }

  /// "section.key=value" (or "key=value" when the key is unambiguous)
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form key=value");
    set(resolve(trim(assignment.substr(0, eq))), unquote(trim(assignment.substr(eq + 1))));
  }

  void merge_text(const std::string& text, const std::string& origin = "<config>") {
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = trim(strip_comment(line));
      if (line.empty()) continue;
      const std::string where = origin + ":" + std::to_string(lineno);
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError(where + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string full = section.empty() ? key : section + "." + key;
      if (!has(full)) throw ConfigError(where + ": unknown config key '" + full + "'");
      set(full, unquote(trim(line.substr(eq + 1))));
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    merge_text(ss.str(), path);
  }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Renders the settings back into the file format.
  std::string to_text() const {
    std::string out;
    std::string section;
    for (const auto& [key, value] : entries_) {
      const auto dot = key.find('.');
      const std::string sec = key.substr(0, dot);
      if (sec != section) {
        if (!section.empty()) out += "\n";
        out += "[" + sec + "]\n";
        section = sec;
      }
      out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
  }

 private:
  void add(std::string key, std::string value) {
    index_[key] = entries_.size();
    entries_.emplace_back(std::move(key), std::move(value));
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  static std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
  }

  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

inline double parse_double(const Settings& s, const std::string& key) {
  const std::string& v = s.get(key);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

template <typename Int>
Int parse_int(const Settings& s, const std::string& key) {
  const std::string& v = s.get(key);
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const Settings& s, const std::string& key) {
  const std::string& v = s.get(key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename E>
E parse_enum(const Settings& s, const std::string& key, std::initializer_list<std::pair<const char*, E>> options) {
  const std::string& v = s.get(key);
  std::string allowed;
  for (const auto& [name, value] : options) {
    if (v == name) return value;
    allowed += allowed.empty() ? name : std::string("|") + name;
  }
  throw ConfigError("config key '" + key + "': expected one of " + allowed + ", got '" + v + "'");
}

}  // namespace detail

/// Algorithm names accepted by sim.algorithm and the sweep's algorithm list.
/// "neighborhood_scan" uses baseline.scan_level; the _l5/_l6 forms pin it.
inline void apply_algorithm(ExperimentConfig& cfg, const std::string& name) {
  if (name == "proposed") {
    cfg.algorithm = Algorithm::Proposed;
  } else if (name == "ekf") {
    cfg.algorithm = Algorithm::Ekf;
  } else if (name == "pilot_insertion") {
    cfg.algorithm = Algorithm::PilotInsertion;
  } else if (name == "neighborhood_scan") {
    cfg.algorithm = Algorithm::NeighborhoodScan;
  } else if (name == "neighborhood_scan_l5" || name == "neighborhood_scan_l6") {
    cfg.algorithm = Algorithm::NeighborhoodScan;
    cfg.baseline.scan_level = name.back() - '0';
  } else {
    throw ConfigError("unknown algorithm '" + name +
                      "' (expected proposed|ekf|pilot_insertion|neighborhood_scan[_l5|_l6])");
  }
}

inline ExperimentConfig to_experiment(const Settings& s) {
  using namespace detail;
  ExperimentConfig c;
  c.array.n_antennas = parse_int<int>(s, "array.n_antennas");
  c.array.spacing_ratio = parse_double(s, "array.spacing_ratio");
  c.array.theta_min = parse_double(s, "array.theta_min");
  c.array.theta_max = parse_double(s, "array.theta_max");
  c.array.phase_reference = parse_enum<PhaseReference>(
      s, "array.phase_reference",
      {{"first_element", PhaseReference::FirstElement}, {"array_center", PhaseReference::ArrayCenter}});
  c.n_bins = parse_int<int>(s, "grid.n_bins");
  c.codebook_mode = parse_enum<CodebookMode>(
      s, "codebook.mode", {{"pseudo_inverse", CodebookMode::PseudoInverse}, {"ideal", CodebookMode::Ideal}});
  const std::string model = s.get("mobility.model");
  if (model == "predictable") {
    c.mobility = PredictableMotion{parse_double(s, "mobility.nu")};
  } else if (model == "gaussian") {
    c.mobility = GaussianMotion{parse_double(s, "mobility.sigma_phi_sq")};
  } else if (model == "bernoulli") {
    c.mobility = BernoulliJumpMotion{parse_double(s, "mobility.jump_deg"), parse_double(s, "mobility.p")};
  } else {
    throw ConfigError("config key 'mobility.model': expected one of predictable|gaussian|bernoulli, got '" + model +
                      "'");
  }
  c.boundary = parse_enum<BoundaryPolicy>(s, "mobility.boundary",
                                          {{"wrap", BoundaryPolicy::Wrap}, {"reflect", BoundaryPolicy::Reflect}});
  c.snr_db = parse_double(s, "channel.snr_db");
  c.gamma = parse_double(s, "policy.gamma");
  c.hiepm_scope = parse_enum<HiepmScope>(s, "policy.hiepm_scope",
                                         {{"all_levels", HiepmScope::AllLevels}, {"descent", HiepmScope::Descent}});
  c.mi_table_n = parse_int<int>(s, "policy.mi_table_n");
  c.horizon = parse_int<int>(s, "sim.horizon");
  c.n_episodes = parse_int<int>(s, "sim.episodes");
  c.seed = parse_int<std::uint64_t>(s, "sim.seed");
  c.initial_aoa = parse_enum<InitialAoa>(
      s, "sim.initial_aoa",
      {{"uniform", InitialAoa::Uniform}, {"bin_center", InitialAoa::BinCenter}, {"fixed", InitialAoa::Fixed}});
  c.initial_aoa_deg = parse_double(s, "sim.initial_aoa_deg");
  c.threads = parse_int<int>(s, "sim.threads");
  c.baseline.mse_threshold_factor = parse_double(s, "baseline.mse_threshold_factor");
  c.baseline.p_min = parse_double(s, "baseline.p_min");
  c.baseline.window = parse_int<int>(s, "baseline.window");
  c.baseline.scan_level = parse_int<int>(s, "baseline.scan_level");
  c.baseline.tau_max = parse_int<int>(s, "baseline.tau_max");
  c.baseline.exhaustive_perfect = parse_bool(s, "baseline.exhaustive_perfect");
  apply_algorithm(c, s.get("sim.algorithm"));
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

}  // namespace beamtrack
