#pragma once

// Episode runner for the proposed tracker and the baselines, plus Monte Carlo
// aggregation over seeded, independent episodes.

#include "beamtrack/baselines.hpp"
#include "beamtrack/codebook.hpp"
#include "beamtrack/mobility.hpp"
#include "beamtrack/policy.hpp"
#include "beamtrack/posterior.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace beamtrack {

enum class Algorithm { Proposed, Ekf, PilotInsertion, NeighborhoodScan };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Proposed: return "proposed";
    case Algorithm::Ekf: return "ekf";
    case Algorithm::PilotInsertion: return "pilot_insertion";
    default: return "neighborhood_scan";
  }
}

enum class InitialAoa { Uniform, BinCenter, Fixed };

inline const char* to_string(InitialAoa a) {
  switch (a) {
    case InitialAoa::Uniform: return "uniform";
    case InitialAoa::BinCenter: return "bin_center";
    default: return "fixed";
  }
}

struct ExperimentConfig {
  ArrayConfig array;
  int n_bins = 64;
  CodebookMode codebook_mode = CodebookMode::PseudoInverse;
  MobilityModel mobility = GaussianMotion{0.75};
  BoundaryPolicy boundary = BoundaryPolicy::Wrap;
  double snr_db = 10.0;
  double gamma = 0.03;
  int horizon = 500;
  Algorithm algorithm = Algorithm::Proposed;
  BaselineConfig baseline;
  HiepmScope hiepm_scope = HiepmScope::AllLevels;
  InitialAoa initial_aoa = InitialAoa::Uniform;
  double initial_aoa_deg = -90.0;
  int n_episodes = 100;
  std::uint64_t seed = 1;
  int mi_table_n = 101;
  int threads = 0;  // 0: hardware concurrency

  double noise_var() const { return snr_db_to_noise_var(snr_db); }
  AngularGrid grid() const { return AngularGrid(array.theta_min, array.theta_max, n_bins); }

  /// Short label used in output tables, e.g. "neighborhood_scan_l5".
  std::string algorithm_label() const {
    std::string s = to_string(algorithm);
    if (algorithm == Algorithm::NeighborhoodScan) s += "_l" + std::to_string(baseline.scan_level);
    return s;
  }

  void validate() const {
    array.validate();
    if (n_bins < 2 || (n_bins & (n_bins - 1)) != 0) throw std::invalid_argument("grid.n_bins must be a power of two");
    beamtrack::validate(mobility);
    if (horizon < 1) throw std::invalid_argument("sim.horizon must be >= 1");
    if (n_episodes < 1) throw std::invalid_argument("sim.episodes must be >= 1");
    if (!(gamma >= 0.0)) throw std::invalid_argument("policy.gamma must be >= 0");
    if (!std::isfinite(snr_db)) throw std::invalid_argument("channel.snr_db must be finite");
    if (mi_table_n < 11) throw std::invalid_argument("policy.mi_table_n must be >= 11");
    if (initial_aoa == InitialAoa::Fixed && !array.contains(initial_aoa_deg)) {
      throw std::invalid_argument("sim.initial_aoa_deg outside the angular range");
    }
    int levels = 0;
    while ((1 << levels) < n_bins) ++levels;
    baseline.validate(levels);
  }
};

/// Immutable inputs shared by every episode of an experiment.
struct SimContext {
  std::shared_ptr<const Codebook> codebook;
  std::shared_ptr<const MiTable> mi_table;  // may be null for baselines
};

inline MiTable::Key mi_table_key(const ExperimentConfig& cfg) {
  return {cfg.array.n_antennas, cfg.n_bins, cfg.noise_var(), cfg.mi_table_n};
}

/// Builds the codebook and, unless one is supplied, the MI table.
inline SimContext make_context(const ExperimentConfig& cfg, std::shared_ptr<const MiTable> table = nullptr) {
  cfg.validate();
  SimContext ctx;
  ctx.codebook = std::make_shared<const Codebook>(cfg.array, cfg.grid(), cfg.codebook_mode);
  if (table == nullptr && cfg.algorithm == Algorithm::Proposed) {
    table = std::make_shared<const MiTable>(build_mi_table(*ctx.codebook, cfg.noise_var(), cfg.mi_table_n));
  }
  if (table != nullptr) {
    const MiTable::Key want = mi_table_key(cfg);
    const MiTable::Key& have = table->key();
    if (have.n_antennas != want.n_antennas || have.n_bins != want.n_bins ||
        std::abs(have.sigma_sq - want.sigma_sq) > 1e-12 * want.sigma_sq) {
      throw std::invalid_argument("MI table was built for a different configuration");
    }
  }
  ctx.mi_table = std::move(table);
  return ctx;
}

struct SlotRecord {
  int t = 0;
  Action action = Action::Pilot;
  BeamId beam;
  double phi_true = 0.0;
  double phi_hat = 0.0;  // beam-center (or tracker) estimate
  double phi_map = 0.0;  // posterior MAP; equals phi_hat for baselines
  double coverage = std::numeric_limits<double>::quiet_NaN();
  double gain_sq = 0.0;
  double norm_gain = 0.0;
  double se = 0.0;           // realized, bits/s/Hz
  double se_expected = 0.0;  // what the policy expected on this slot
  Observation obs;
  bool jumped = false;  // AoA jumped between t-1 and t
};

struct EpisodeLog {
  std::string algorithm;
  int episode = 0;
  std::vector<SlotRecord> slots;
};

/// |gain|^2 relative to the finest beam covering phi. Ideal mode gives
/// exactly 1 for that beam, 2^(l-S) for an aligned level-l beam, 0 otherwise.
inline double normalized_gain(const Codebook& cb, const Beam& beam, double phi) {
  const Beam& ref = cb.covering(cb.levels(), cb.grid().bin_of(phi));
  const double denom = std::norm(cb.gain_at(ref, phi));
  return denom > 0.0 ? std::norm(cb.gain_at(beam, phi)) / denom : 0.0;
}

/// Same, for an arbitrary unit-norm weight vector.
inline double normalized_gain(const Codebook& cb, const ComplexVector& w, double phi) {
  const ComplexVector a = steering_vector(cb.array(), phi);
  const Beam& ref = cb.covering(cb.levels(), cb.grid().bin_of(phi));
  const double denom = std::norm(beam_gain(ref.weights, a));
  return denom > 0.0 ? std::norm(beam_gain(w, a)) / denom : 0.0;
}

// Seeding. Every episode gets two streams so trajectories do not depend on how
// many noise draws an algorithm makes: all algorithms and all sweep values see
// the same AoA paths (common random numbers).

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t { Mobility = 1, Noise = 2 };

inline std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode, Stream stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(episode * 4 + static_cast<std::uint64_t>(stream)));
}

using Rng = std::mt19937_64;

template <typename R>
double draw_initial_aoa(const ExperimentConfig& cfg, const AngularGrid& grid, R& rng) {
  switch (cfg.initial_aoa) {
    case InitialAoa::Fixed: return cfg.initial_aoa_deg;
    case InitialAoa::BinCenter: {
      std::uniform_int_distribution<int> bin(0, grid.size() - 1);
      return grid.center(bin(rng));
    }
    default: {
      std::uniform_real_distribution<double> u(grid.theta_min(), grid.theta_max());
      return u(rng);
    }
  }
}

/// AoA path phi_0..phi_{T-1} with jump flags.
inline std::vector<std::pair<double, bool>> sample_trajectory(const ExperimentConfig& cfg, const AngularGrid& grid,
                                                              int episode) {
  Rng rng(episode_seed(cfg.seed, static_cast<std::uint64_t>(episode), Stream::Mobility));
  std::vector<std::pair<double, bool>> path;
  path.reserve(cfg.horizon);
  double phi = draw_initial_aoa(cfg, grid, rng);
  path.emplace_back(phi, false);
  for (int t = 1; t < cfg.horizon; ++t) {
    bool jumped = false;
    phi = step_aoa(cfg.mobility, phi, grid, rng, cfg.boundary, &jumped);
    path.emplace_back(phi, jumped);
  }
  return path;
}

/// Optional per-slot hook for the proposed algorithm, e.g. to inspect the
/// posterior after each update.
using PosteriorHook = void (*)(void* user, int t, const Posterior& updated);

inline EpisodeLog run_episode(const ExperimentConfig& cfg, const SimContext& ctx, int episode,
                              PosteriorHook hook = nullptr, void* user = nullptr) {
  const Codebook& cb = *ctx.codebook;
  const AngularGrid& grid = cb.grid();
  const double sigma_sq = cfg.noise_var();
  const ChannelState base{0.0, Complex(1.0, 0.0), 1.0, sigma_sq};
  const auto path = sample_trajectory(cfg, grid, episode);
  Rng noise(episode_seed(cfg.seed, static_cast<std::uint64_t>(episode), Stream::Noise));

  EpisodeLog log;
  log.algorithm = cfg.algorithm_label();
  log.episode = episode;
  log.slots.reserve(cfg.horizon);

  auto fill = [&](SlotRecord& r, const Beam& beam, const Observation& obs, Complex gain) {
    r.beam = beam.id;
    r.obs = obs;
    r.gain_sq = std::norm(gain);
    r.norm_gain = normalized_gain(cb, beam, r.phi_true);
    r.se = r.action == Action::Data ? std::log2(1.0 + r.gain_sq / sigma_sq) : 0.0;
  };

  auto observe = [&](Action a, Complex gain) {
    ChannelState ch = base;
    return a == Action::Pilot ? synthesize_pilot_from_gain(gain, ch, noise) : synthesize_data_from_gain(gain, ch, noise);
  };

  if (cfg.algorithm == Algorithm::Proposed) {
    if (ctx.mi_table == nullptr) throw std::invalid_argument("proposed algorithm needs an MI table");
    Posterior post = Posterior::uniform(grid.size());
    for (int t = 0; t < cfg.horizon; ++t) {
      SlotRecord r;
      r.t = t;
      r.phi_true = path[t].first;
      r.jumped = path[t].second;
      const BeamId id = select_beam_hiepm(post, cb, cfg.hiepm_scope);
      const Beam& beam = cb.beam(id);
      const ActionDecision d = decide_action(post, beam, cb.levels(), cfg.gamma, sigma_sq, ctx.mi_table.get());
      r.action = d.action;
      r.coverage = d.coverage;
      r.se_expected = d.action == Action::Data ? d.se_value : 0.0;
      const Complex gain = cb.gain_at(beam, r.phi_true);
      const Observation obs = observe(d.action, gain);
      fill(r, beam, obs, gain);
      post = bayes_update(post, obs, beam, sigma_sq);
      if (hook != nullptr) hook(user, t, post);
      r.phi_hat = cb.beam_center(beam);
      r.phi_map = map_estimate(post, grid);
      post = predict(post, cfg.mobility, grid);
      log.slots.push_back(r);
    }
    return log;
  }

  BaselineConfig bc = cfg.baseline;
  bc.variant = cfg.algorithm == Algorithm::Ekf              ? BaselineKind::Ekf
               : cfg.algorithm == Algorithm::PilotInsertion ? BaselineKind::PilotInsertion
                                                            : BaselineKind::NeighborhoodScan;
  auto tracker = make_tracker(cb, cfg.mobility, bc, sigma_sq);
  for (int t = 0; t < cfg.horizon; ++t) {
    SlotRecord r;
    r.t = t;
    r.phi_true = path[t].first;
    r.jumped = path[t].second;
    const SlotPlan plan = tracker->plan(t);
    const Beam& beam = cb.beam(plan.beam);
    r.action = plan.action;
    // Baselines act as if the beam is aligned.
    r.se_expected = plan.action == Action::Data ? std::log2(1.0 + std::pow(beam.ideal_gain, 2) / sigma_sq) : 0.0;
    const Complex gain = cb.gain_at(beam, r.phi_true);
    const Observation obs = observe(plan.action, gain);
    fill(r, beam, obs, gain);
    tracker->observe(t, plan, obs, r.phi_true);
    r.phi_hat = tracker->estimate();
    r.phi_map = r.phi_hat;
    log.slots.push_back(r);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Metrics

struct EpisodeMetrics {
  int pilot_overhead = 0;
  int data_slots = 0;
  double mean_norm_gain = 0.0;
  double mean_gain_sq = 0.0;
  double mean_se = 0.0;
  double mean_se_expected = 0.0;
  int time_to_first_data = 0;  // horizon when no data slot occurred
  std::vector<int> recovery_times;
};

/// Slots from each jump until normalized gain first exceeds threshold (0 if it
/// already does in the jump slot). A jump never followed by recovery counts as
/// the remaining horizon, a lower bound.
inline std::vector<int> recovery_times(const EpisodeLog& log, double threshold = 0.5) {
  std::vector<int> out;
  const int n = static_cast<int>(log.slots.size());
  for (int t = 0; t < n; ++t) {
    if (!log.slots[t].jumped) continue;
    int s = t;
    while (s < n && !(log.slots[s].norm_gain > threshold)) ++s;
    out.push_back(s - t);
  }
  return out;
}

inline EpisodeMetrics episode_metrics(const EpisodeLog& log) {
  EpisodeMetrics m;
  const int n = static_cast<int>(log.slots.size());
  m.time_to_first_data = n;
  for (const SlotRecord& r : log.slots) {
    if (r.action == Action::Pilot) {
      ++m.pilot_overhead;
    } else {
      if (m.data_slots == 0) m.time_to_first_data = r.t;
      ++m.data_slots;
    }
    m.mean_norm_gain += r.norm_gain;
    m.mean_gain_sq += r.gain_sq;
    m.mean_se += r.se;
    m.mean_se_expected += r.se_expected;
  }
  if (n > 0) {
    m.mean_norm_gain /= n;
    m.mean_gain_sq /= n;
    m.mean_se /= n;
    m.mean_se_expected /= n;
  }
  m.recovery_times = recovery_times(log);
  return m;
}

struct Stat {
  double mean = 0.0;
  double se = 0.0;  // 0 for a single sample
  int n = 0;
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  s.n = static_cast<int>(xs.size());
  if (s.n == 0) return s;
  for (double x : xs) s.mean += x;
  s.mean /= s.n;
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.se = std::sqrt(ss / (s.n - 1) / s.n);
  }
  return s;
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

struct Metrics {
  std::string algorithm;
  Stat pilot_overhead;
  Stat mean_norm_gain;
  Stat mean_gain_sq;
  Stat mean_se;
  Stat mean_se_expected;
  Stat time_to_first_data;
  double median_time_to_first_data = 0.0;
  double median_recovery = std::numeric_limits<double>::quiet_NaN();
  int n_jumps = 0;
};

inline Metrics aggregate(const std::string& algorithm, const std::vector<EpisodeMetrics>& eps) {
  Metrics m;
  m.algorithm = algorithm;
  auto collect = [&](auto field) {
    std::vector<double> xs;
    xs.reserve(eps.size());
    for (const auto& e : eps) xs.push_back(static_cast<double>(field(e)));
    return xs;
  };
  m.pilot_overhead = summarize(collect([](const EpisodeMetrics& e) { return e.pilot_overhead; }));
  m.mean_norm_gain = summarize(collect([](const EpisodeMetrics& e) { return e.mean_norm_gain; }));
  m.mean_gain_sq = summarize(collect([](const EpisodeMetrics& e) { return e.mean_gain_sq; }));
  m.mean_se = summarize(collect([](const EpisodeMetrics& e) { return e.mean_se; }));
  m.mean_se_expected = summarize(collect([](const EpisodeMetrics& e) { return e.mean_se_expected; }));
  const auto ttfd = collect([](const EpisodeMetrics& e) { return e.time_to_first_data; });
  m.time_to_first_data = summarize(ttfd);
  m.median_time_to_first_data = median(ttfd);
  std::vector<double> rec;
  for (const auto& e : eps) rec.insert(rec.end(), e.recovery_times.begin(), e.recovery_times.end());
  m.n_jumps = static_cast<int>(rec.size());
  m.median_recovery = median(rec);
  return m;
}

struct MonteCarloResult {
  Metrics metrics;
  std::vector<EpisodeMetrics> episodes;
  std::vector<EpisodeLog> logs;  // only when requested
};

/// Runs cfg.n_episodes independent episodes, possibly on several threads.
/// Results are merged by episode index, so the thread count never changes them.
inline MonteCarloResult run_monte_carlo(const ExperimentConfig& cfg, const SimContext& ctx, bool keep_logs = false) {
  cfg.validate();
  const int n = cfg.n_episodes;
  MonteCarloResult res;
  res.episodes.resize(n);
  if (keep_logs) res.logs.resize(n);
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        EpisodeLog log = run_episode(cfg, ctx, i);
        res.episodes[i] = episode_metrics(log);
        if (keep_logs) res.logs[i] = std::move(log);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
  threads = std::clamp(threads, 1u, static_cast<unsigned>(n));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(work);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  res.metrics = aggregate(cfg.algorithm_label(), res.episodes);
  return res;
}

}  // namespace beamtrack
