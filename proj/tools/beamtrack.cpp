// beamtrack: run tracking experiments, export codebooks and MI tables, plot.

#include "beamtrack/beamtrack.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace beamtrack;
using nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::string out = "out";
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int episodes = -1;
  bool quiet = false;
  std::string cache;  // MI table cache directory
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config file");
  app->add_option("--out", c.out, "output directory")->capture_default_str();
  app->add_option("--set", c.overrides, "override a setting, section.key=value (repeatable)");
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--episodes", c.episodes, "number of Monte Carlo episodes");
  app->add_flag("--quiet", c.quiet, "suppress progress output");
}

Settings resolve_settings(const Common& c) {
  Settings s = Settings::defaults();
  if (!c.config.empty()) s.merge_file(c.config);
  for (const auto& o : c.overrides) s.apply_override(o);
  if (c.seed >= 0) s.set("sim.seed", std::to_string(c.seed));
  if (c.episodes >= 0) s.set("sim.episodes", std::to_string(c.episodes));
  return s;
}

void write_meta(CsvWriter& w, const Settings& s) {
  w.meta("generator", "beamtrack");
  for (const auto& [k, v] : s.entries()) w.meta(k, v);
}

ordered_json typed(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  double d = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
  if (ec == std::errc() && ptr == v.data() + v.size()) {
    if (v.find_first_of(".eE") == std::string::npos) return std::stoll(v);
    return d;
  }
  return v;
}

ordered_json config_json(const Settings& s) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : s.entries()) {
    const auto dot = k.find('.');
    j[k.substr(0, dot)][k.substr(dot + 1)] = typed(v);
  }
  return j;
}

ordered_json stat_json(const Stat& st) {
  return {{"mean", st.mean}, {"se", st.se}, {"n", st.n}};
}

ordered_json nullable(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json metrics_json(const Metrics& m) {
  return {{"algorithm", m.algorithm},
          {"pilot_overhead", stat_json(m.pilot_overhead)},
          {"mean_norm_gain", stat_json(m.mean_norm_gain)},
          {"mean_gain_sq", stat_json(m.mean_gain_sq)},
          {"mean_se", stat_json(m.mean_se)},
          {"mean_se_expected", stat_json(m.mean_se_expected)},
          {"time_to_first_data", stat_json(m.time_to_first_data)},
          {"median_time_to_first_data", m.median_time_to_first_data},
          {"median_recovery", nullable(m.median_recovery)},
          {"n_jumps", m.n_jumps}};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string cache_name(const MiTable::Key& k) {
  return "mitable_N" + std::to_string(k.n_antennas) + "_D" + std::to_string(k.n_bins) + "_s2_" +
         format_double(k.sigma_sq) + "_n" + std::to_string(k.n) + ".csv";
}

/// Loads the MI table from the cache directory when present, else builds it
/// (and stores it there when a cache directory is set).
std::shared_ptr<const MiTable> obtain_table(const ExperimentConfig& cfg, const Codebook& cb, const std::string& cache,
                                            bool quiet) {
  const MiTable::Key key = mi_table_key(cfg);
  fs::path path;
  if (!cache.empty()) {
    path = fs::path(cache) / cache_name(key);
    std::ifstream in(path);
    if (in) {
      MiTable t = MiTable::read_csv(in);
      if (t.key().n_antennas == key.n_antennas && t.key().n_bins == key.n_bins && t.key().n == key.n &&
          std::abs(t.key().sigma_sq - key.sigma_sq) <= 1e-12 * key.sigma_sq) {
        return std::make_shared<const MiTable>(std::move(t));
      }
    }
  }
  if (!quiet) std::fprintf(stderr, "building MI table (sigma^2 = %g, n = %d)...\n", key.sigma_sq, key.n);
  auto table = std::make_shared<const MiTable>(build_mi_table(cb, key.sigma_sq, key.n));
  if (!path.empty()) {
    fs::create_directories(path.parent_path());
    std::ofstream os(path);
    table->write_csv(os);
  }
  return table;
}

SimContext context_for(const ExperimentConfig& cfg, const std::string& cache, bool quiet) {
  ExperimentConfig base = cfg;
  base.algorithm = Algorithm::Ekf;  // skip the implicit table build
  SimContext ctx = make_context(base);
  if (cfg.algorithm == Algorithm::Proposed) ctx.mi_table = obtain_table(cfg, *ctx.codebook, cache, quiet);
  return ctx;
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  return os;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c, const std::string& algorithms, bool all_logs) {
  Settings s = resolve_settings(c);
  if (!algorithms.empty()) s.set("sim.algorithm", split_list(algorithms).front());
  const ExperimentConfig cfg = to_experiment(s);
  std::vector<std::string> algs = algorithms.empty() ? std::vector<std::string>{s.get("sim.algorithm")}
                                                     : split_list(algorithms);
  const fs::path out(c.out);
  std::ofstream csv = open_out(out / "episodes.csv");
  CsvWriter w(csv);
  write_meta(w, s);
  w.meta("algorithms", algorithms.empty() ? s.get("sim.algorithm") : algorithms);
  w.row(episode_csv_header());
  ordered_json summary;
  summary["config"] = config_json(s);
  summary["seed"] = cfg.seed;
  summary["results"] = ordered_json::array();
  for (const auto& name : algs) {
    ExperimentConfig ac = cfg;
    apply_algorithm(ac, name);
    SimContext ctx = context_for(ac, c.cache, c.quiet);
    const MonteCarloResult r = run_monte_carlo(ac, ctx, true);
    const int n_logged = all_logs ? ac.n_episodes : 1;
    for (int e = 0; e < n_logged; ++e) write_episode_rows(w, r.logs[e]);
    summary["results"].push_back(metrics_json(r.metrics));
    if (!c.quiet) {
      std::fprintf(stderr, "%-22s gain %.3f +- %.3f  pilots %.1f  SE %.3f bit/s/Hz\n", r.metrics.algorithm.c_str(),
                   r.metrics.mean_norm_gain.mean, r.metrics.mean_norm_gain.se, r.metrics.pilot_overhead.mean,
                   r.metrics.mean_se.mean);
    }
  }
  std::ofstream js = open_out(out / "metrics.json");
  js << summary.dump(2) << '\n';
  return 0;
}

int cmd_sweep(const Common& c, std::string axis, const std::string& values, const std::string& algorithms) {
  Settings s = resolve_settings(c);
  if (axis == "gamma") axis = "policy.gamma";
  if (axis == "snr") axis = "channel.snr_db";
  axis = s.resolve(axis);
  if (!s.has(axis)) throw ConfigError("unknown config key '" + axis + "'");
  const auto vals = split_list(values);
  if (vals.size() < 2) throw std::invalid_argument("sweep needs at least 2 values");
  const auto algs = algorithms.empty() ? std::vector<std::string>{s.get("sim.algorithm")} : split_list(algorithms);

  std::ofstream csv = open_out(fs::path(c.out) / "sweep.csv");
  CsvWriter w(csv);
  write_meta(w, s);
  w.meta("sweep.axis", axis);
  w.meta("sweep.values", values);
  w.meta("algorithms", algorithms.empty() ? s.get("sim.algorithm") : algorithms);
  w.row({"axis", "value", "algorithm", "episodes", "pilot_overhead", "pilot_overhead_se", "mean_norm_gain",
         "mean_norm_gain_se", "mean_se", "mean_se_se", "mean_gain_sq", "mean_gain_sq_se", "median_time_to_first_data",
         "median_recovery"});
  for (const auto& v : vals) {
    Settings sv = s;
    sv.set(axis, v);
    for (const auto& name : algs) {
      ExperimentConfig cfg = to_experiment(sv);
      apply_algorithm(cfg, name);
      // Seeds do not depend on the swept value: common random numbers.
      const MonteCarloResult r = run_monte_carlo(cfg, context_for(cfg, c.cache, c.quiet));
      const Metrics& m = r.metrics;
      w.row({axis, v, m.algorithm, std::to_string(cfg.n_episodes), format_double(m.pilot_overhead.mean),
             format_double(m.pilot_overhead.se), format_double(m.mean_norm_gain.mean),
             format_double(m.mean_norm_gain.se), format_double(m.mean_se.mean), format_double(m.mean_se.se),
             format_double(m.mean_gain_sq.mean), format_double(m.mean_gain_sq.se),
             format_double(m.median_time_to_first_data), format_double(m.median_recovery)});
      if (!c.quiet) {
        std::fprintf(stderr, "%s=%s %-22s pilots %.1f  gain %.3f  SE %.3f\n", axis.c_str(), v.c_str(),
                     m.algorithm.c_str(), m.pilot_overhead.mean, m.mean_norm_gain.mean, m.mean_se.mean);
      }
    }
  }
  return 0;
}

int cmd_codebook(const Common& c) {
  const Settings s = resolve_settings(c);
  const ExperimentConfig cfg = to_experiment(s);
  const Codebook cb(cfg.array, cfg.grid(), cfg.codebook_mode);
  std::ofstream csv = open_out(fs::path(c.out) / "codebook.csv");
  CsvWriter w(csv);
  write_meta(w, s);
  w.meta("gram_condition_number", format_double(cb.gram_condition_number()));
  w.row({"level", "index", "bin", "gain_sq", "phase"});
  for (const Beam& b : cb.beams()) {
    for (std::size_t i = 0; i < b.bin_gains.size(); ++i) {
      w.row({std::to_string(b.id.level), std::to_string(b.id.index), std::to_string(i),
             format_double(std::norm(b.bin_gains[i])), format_double(std::arg(b.bin_gains[i]))});
    }
  }
  if (!c.quiet) std::fprintf(stderr, "%zu beams, Gram condition number %.3g\n", cb.beams().size(), cb.gram_condition_number());
  return 0;
}

int cmd_mitable(const Common& c, const std::string& inspect) {
  if (!inspect.empty()) {
    std::ifstream in(inspect);
    if (!in) throw std::runtime_error("cannot open MI table '" + inspect + "'");
    const MiTable t = MiTable::read_csv(in);
    std::printf("N=%d bins=%d sigma^2=%g n=%d levels=%d\n", t.key().n_antennas, t.key().n_bins, t.key().sigma_sq,
                t.n(), t.levels());
    for (int l = 1; l <= t.levels(); ++l) {
      double max_p = 0.0, max_d = 0.0, dpi = -1e300;
      for (int j = 0; j < t.n(); ++j) {
        max_p = std::max(max_p, t.stored(Action::Pilot, l, j));
        max_d = std::max(max_d, t.stored(Action::Data, l, j));
        dpi = std::max(dpi, t.stored(Action::Data, l, j) - t.stored(Action::Pilot, l, j));
      }
      std::printf("level %d  max I_P %.6f  max I_D %.6f  max(I_D - I_P) %.2e\n", l, max_p, max_d, dpi);
    }
    return 0;
  }
  const Settings s = resolve_settings(c);
  const ExperimentConfig cfg = to_experiment(s);
  const Codebook cb(cfg.array, cfg.grid(), cfg.codebook_mode);
  const MiTable t = build_mi_table(cb, cfg.noise_var(), cfg.mi_table_n);
  const fs::path path = fs::path(c.out) / cache_name(t.key());
  std::ofstream os = open_out(path);
  t.write_csv(os);
  if (!c.quiet) std::fprintf(stderr, "wrote %s\n", path.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<double> column(const CsvTable& t, const std::string& name, const std::vector<std::size_t>& rows) {
  const int ci = t.column(name);
  if (ci < 0) throw std::runtime_error("csv: missing column '" + name + "'");
  std::vector<double> out;
  for (std::size_t r : rows) out.push_back(to_double(t.rows[r][ci]));
  return out;
}

/// Row indices grouped by the value of one column, in first-seen order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> group_by(const CsvTable& t, const std::string& col,
                                                                       const std::function<bool(std::size_t)>& keep) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
  const int ci = t.column(col);
  if (ci < 0) throw std::runtime_error("csv: missing column '" + col + "'");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (!keep(r)) continue;
    const std::string& key = t.rows[r][ci];
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, {r}});
    } else {
      it->second.push_back(r);
    }
  }
  return groups;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os = open_out(p);
  os << s;
}

int cmd_plot(const Common& c, const std::vector<std::string>& inputs, int episode) {
  if (inputs.empty()) throw std::invalid_argument("plot needs at least one --input CSV");
  const fs::path out(c.out);
  for (const auto& input : inputs) {
    std::ifstream in(input);
    if (!in) throw std::runtime_error("cannot open '" + input + "'");
    const CsvTable t = read_csv(in);
    if (t.rows.empty()) throw std::runtime_error("'" + input + "' has no data rows");
    const std::string stem = fs::path(input).stem().string();
    if (t.has("norm_gain")) {
      const int ep = t.column("episode");
      const auto groups = group_by(t, "algorithm", [&](std::size_t r) { return std::stoi(t.rows[r][ep]) == episode; });
      if (groups.empty()) throw std::runtime_error("'" + input + "' has no rows for episode " + std::to_string(episode));
      svg::Chart gain{"Normalized beamforming gain", "slot", "normalized gain", {}};
      svg::Chart trace{"AoA trace (markers: pilot slots)", "slot", "AoA [deg]", {}};
      bool truth = false;
      for (const auto& [alg, rows] : groups) {
        const auto ts = column(t, "t", rows);
        gain.series.push_back({alg, ts, column(t, "norm_gain", rows)});
        if (!truth) {
          trace.series.push_back({"true AoA", ts, column(t, "phi_true", rows)});
          truth = true;
        }
        trace.series.push_back({alg + " estimate", ts, column(t, "phi_hat", rows)});
        svg::Series pilots{alg + " pilots", {}, {}, true};
        const int ai = t.column("action");
        const auto est = column(t, "phi_hat", rows);
        for (std::size_t k = 0; k < rows.size(); ++k) {
          if (t.rows[rows[k]][ai] == "P") {
            pilots.x.push_back(ts[k]);
            pilots.y.push_back(est[k]);
          }
        }
        trace.series.push_back(std::move(pilots));
      }
      write_text(out / (stem + "_gain.svg"), svg::render(gain));
      write_text(out / (stem + "_aoa.svg"), svg::render(trace));
    } else if (t.has("axis") && t.has("value")) {
      const std::string axis = t.rows.front()[t.column("axis")];
      const bool log_x = axis == "policy.gamma";
      const auto groups = group_by(t, "algorithm", [](std::size_t) { return true; });
      const std::vector<std::pair<std::string, std::string>> panels = {
          {"pilot_overhead", "pilot overhead [slots]"}, {"mean_norm_gain", "mean normalized gain"},
          {"mean_se", "mean SE [bit/s/Hz]"}};
      for (const auto& [col, label] : panels) {
        svg::Chart chart{label + " vs " + axis, axis, label, {}, log_x};
        for (const auto& [alg, rows] : groups) chart.series.push_back({alg, column(t, "value", rows), column(t, col, rows)});
        write_text(out / (stem + "_" + col + ".svg"), svg::render(chart));
      }
    } else {
      throw std::runtime_error("'" + input + "' is neither an episode log nor a sweep table");
    }
    if (!c.quiet) std::fprintf(stderr, "plotted %s\n", input.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active mmWave beam tracking simulator"};
  app.require_subcommand(1);

  Common common;
  auto* sim = app.add_subcommand("simulate", "run episodes, write episodes.csv and metrics.json");
  add_common(sim, common);
  std::string sim_algs;
  bool all_logs = false;
  sim->add_option("--algorithms", sim_algs, "comma-separated algorithms (default: sim.algorithm)");
  sim->add_flag("--all-episodes", all_logs, "log every episode, not just the first");
  sim->add_option("--cache", common.cache, "MI table cache directory");

  auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over one setting");
  add_common(sweep, common);
  std::string axis = "gamma", values, sweep_algs;
  sweep->add_option("--axis", axis, "gamma, snr, or any section.key")->capture_default_str();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--algorithms", sweep_algs, "comma-separated algorithms (default: sim.algorithm)");
  sweep->add_option("--cache", common.cache, "MI table cache directory");

  auto* cbk = app.add_subcommand("codebook", "export per-beam gain patterns");
  add_common(cbk, common);

  auto* mit = app.add_subcommand("mitable", "build or inspect an MI table");
  add_common(mit, common);
  std::string inspect;
  mit->add_option("--inspect", inspect, "summarize an existing table instead of building one");

  auto* plot = app.add_subcommand("plot", "render SVG figures from episode or sweep CSVs");
  add_common(plot, common);
  std::vector<std::string> inputs;
  int episode = 0;
  plot->add_option("--input", inputs, "CSV file(s) produced by simulate or sweep")->required();
  plot->add_option("--episode", episode, "episode to draw from an episode log")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*sim) return cmd_simulate(common, sim_algs, all_logs);
    if (*sweep) return cmd_sweep(common, axis, values, sweep_algs);
    if (*cbk) return cmd_codebook(common);
    if (*mit) return cmd_mitable(common, inspect);
    if (*plot) return cmd_plot(common, inputs, episode);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
