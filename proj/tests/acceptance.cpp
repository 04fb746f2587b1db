// Acceptance checks. Usage: acceptance N   (N in 1..10, or "all")
// Prints one "criterion N: PASS|FAIL ..." line per check; exit code 1 on any failure.

#include "beamtrack/beamtrack.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace beamtrack;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  return ok;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

const AngularGrid kGrid(-180.0, 0.0, 64);

// Series form of the data density, c_lambda(x) = (1/s2) exp(-(x/s2 + lambda/2)) sum_k (x lambda/(2 s2))^k/(k!)^2.
double series_density(double x, double lambda, double s2, int terms) {
  const double z = x * lambda / (2.0 * s2);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < terms; ++k) {
    term *= z / (double(k) * k);
    sum += term;
  }
  return std::exp(-(x / s2 + lambda / 2.0)) * sum / s2;
}

// Same series accumulated in the log domain until converged; usable where exp(-lambda/2) underflows
// the plain form.
double log_series_density(double x, double lambda, double s2) {
  if (x == 0.0 || lambda == 0.0) return -(x / s2 + lambda / 2.0) - std::log(s2);
  const double lz = std::log(x * lambda / (2.0 * s2));
  double acc = 0.0;  // k = 0 term, log 1
  double lt = 0.0;
  for (int k = 1; k < 5000; ++k) {
    lt += lz - 2.0 * std::log(double(k));
    acc = log_add_exp(acc, lt);
    if (lt < acc - 40.0 && double(k) * k > x * lambda / (2.0 * s2)) break;
  }
  return acc - (x / s2 + lambda / 2.0) - std::log(s2);
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  c.n_episodes = 100;
  c.horizon = 500;
  c.snr_db = 10.0;
  c.gamma = 0.03;
  return c;
}

std::shared_ptr<const MiTable> table_10db() {
  static const auto t = [] {
    const ExperimentConfig c = base_config();
    const Codebook cb(c.array, c.grid(), c.codebook_mode);
    return std::make_shared<const MiTable>(build_mi_table(cb, c.noise_var(), c.mi_table_n));
  }();
  return t;
}

Metrics run(ExperimentConfig c, Algorithm a, int scan_level = 6) {
  c.algorithm = a;
  c.baseline.scan_level = scan_level;
  return run_monte_carlo(c, make_context(c, a == Algorithm::Proposed ? table_10db() : nullptr)).metrics;
}

struct Labeled {
  std::string name;
  Metrics m;
};

std::vector<Labeled> run_baselines(const ExperimentConfig& c) {
  return {{"ekf", run(c, Algorithm::Ekf)},
          {"pilot_insertion", run(c, Algorithm::PilotInsertion)},
          {"neighborhood_scan_l5", run(c, Algorithm::NeighborhoodScan, 5)},
          {"neighborhood_scan_l6", run(c, Algorithm::NeighborhoodScan, 6)}};
}

// ---------------------------------------------------------------------------

bool criterion1() {
  const auto t0 = Clock::now();
  const Codebook cb(ArrayConfig{}, kGrid, CodebookMode::PseudoInverse);
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> pick_beam(0, static_cast<int>(cb.beams().size()) - 1);
  std::uniform_int_distribution<int> pick_model(0, 2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const MobilityModel models[] = {PredictableMotion{0.1}, GaussianMotion{0.75}, BernoulliJumpMotion{5.0, 0.01}};
  Posterior post = Posterior::uniform(64);
  double worst = 0.0;
  bool nonneg = true;
  for (int i = 0; i < 10000; ++i) {
    const Beam& beam = cb.beams()[pick_beam(rng)];
    const double s2 = std::pow(10.0, -3.0 + 3.0 * u(rng));
    const Observation obs = u(rng) < 0.5 ? Observation::pilot({g(rng), g(rng)})
                                         : Observation::data(-std::log(1.0 - u(rng)) * (0.1 + u(rng)));
    post = bayes_update(post, obs, beam, s2);
    worst = std::max(worst, std::abs(post.mass() - 1.0));
    post = predict(post, models[pick_model(rng)], kGrid);
    worst = std::max(worst, std::abs(post.mass() - 1.0));
    for (double v : post.probs()) nonneg = nonneg && v >= 0.0;
  }
  const double secs = seconds_since(t0);
  return report(1, worst <= 1e-9 && nonneg && secs < 10.0,
                "max |mass-1| = " + fmt(worst) + ", nonnegative = " + (nonneg ? "yes" : "no") + ", " + fmt(secs) +
                    " s (limits 1e-9, 10 s)");
}

bool criterion2() {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 0.7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_p = 0.0, worst_d = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(64);
    for (auto& x : p) x = u(rng);
    const Posterior prior = Posterior(p).normalized();
    Beam beam;
    beam.width = 32;
    beam.bin_gains.resize(64);
    for (auto& x : beam.bin_gains) x = {g(rng), g(rng)};
    const double s2 = 0.05 + std::abs(g(rng));
    for (const Observation& obs : {Observation::pilot({g(rng), g(rng)}), Observation::data(-std::log(1.0 - u(rng)))}) {
      const Posterior out = bayes_update(prior, obs, beam, s2);
      std::vector<double> ref(64);
      double z = 0.0;
      for (int i = 0; i < 64; ++i) {
        double f = obs.is_pilot()
                       ? std::exp(-std::norm(obs.pilot_value - beam.bin_gains[i]) / s2) / (kPi * s2)
                       : std::exp(log_series_density(obs.data_power, 2.0 * std::norm(beam.bin_gains[i]) / s2, s2));
        ref[i] = std::max(f, kLikelihoodFloor) * prior[i];
        z += ref[i];
      }
      double& worst = obs.is_pilot() ? worst_p : worst_d;
      for (int i = 0; i < 64; ++i) worst = std::max(worst, std::abs(out[i] - ref[i] / z));
    }
  }
  return report(2, worst_p <= 1e-12 && worst_d <= 1e-12,
                "max abs error pilot = " + fmt(worst_p) + ", data = " + fmt(worst_d) + " (limit 1e-12)");
}

bool criterion3() {
  // Literal check: 50-term series against the Bessel path on lambda in [0, 40], x in [0, 100], sigma^2 = 1.
  double worst50 = 0.0, worst50_lambda = 0.0, worst50_x = 0.0, worst_conv = 0.0;
  for (int i = 0; i <= 80; ++i) {
    const double lambda = 0.5 * i;
    for (int j = 0; j <= 200; ++j) {
      const double x = 0.5 * j;
      const double mine = data_likelihood(x, Complex(std::sqrt(lambda / 2.0), 0.0), 1.0);
      const double e50 = std::abs(mine - series_density(x, lambda, 1.0, 50));
      if (e50 > worst50) {
        worst50 = e50;
        worst50_lambda = lambda;
        worst50_x = x;
      }
      const double conv = std::max(std::exp(log_series_density(x, lambda, 1.0)), kLikelihoodFloor);
      worst_conv = std::max(worst_conv, std::abs(mine - conv));
    }
  }
  const bool literal = worst50 <= 1e-10;
  report(3, literal,
         "50-term series: max abs error = " + fmt(worst50) + " at lambda = " + fmt(worst50_lambda) +
             ", x = " + fmt(worst50_x) + " (limit 1e-10; fifty terms truncate the series where x*lambda/2 is large)");
  const bool converged = worst_conv <= 1e-10;
  report(3, converged, "converged series: max abs error = " + fmt(worst_conv) + " (limit 1e-10)");

  // Pilot density: Simpson on a +-10 sigma square.
  const Complex mean(0.7, -0.2);
  const double s2 = 0.1, half = 10.0 * std::sqrt(s2);
  const int m = 1000;
  const double h = 2.0 * half / m;
  auto w = [&](int k) { return (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0); };
  double acc = 0.0;
  for (int a = 0; a <= m; ++a)
    for (int b = 0; b <= m; ++b)
      acc += w(a) * w(b) * pilot_likelihood(mean + Complex(-half + a * h, -half + b * h), mean, s2);
  const double integral = acc * h * h / 9.0;
  const bool pilot = std::abs(integral - 1.0) <= 1e-6;
  report(3, pilot, "pilot density integral = " + fmt(integral) + " (limit 1 +- 1e-6)");
  return literal && converged && pilot;
}

bool criterion4() {
  const auto t0 = Clock::now();
  const ExperimentConfig c = base_config();
  const Codebook cb(c.array, c.grid(), c.codebook_mode);
  const MiTable t = build_mi_table(cb, c.noise_var(), 101);
  const double secs = seconds_since(t0);
  double lo = 0.0, hi = 0.0, endpoint = 0.0, dpi = -1e9;
  for (int l = 1; l <= t.levels(); ++l) {
    for (int j = 0; j < t.n(); ++j) {
      const double ip = t.stored(Action::Pilot, l, j), id = t.stored(Action::Data, l, j);
      lo = std::min({lo, ip, id});
      hi = std::max({hi, ip, id});
      if (j == 0 || j == t.n() - 1) endpoint = std::max({endpoint, std::abs(ip), std::abs(id)});
      dpi = std::max(dpi, id - ip);
    }
  }
  const bool ok = lo >= 0.0 && hi <= std::log(2.0) + 1e-6 && endpoint <= 1e-6 && dpi <= 1e-3 && secs < 300.0;
  return report(4, ok,
                "min I = " + fmt(lo) + ", max I = " + fmt(hi) + " (ln2 = 0.6931), endpoint max |I| = " + fmt(endpoint) +
                    ", max(I_D - I_P) = " + fmt(dpi) + ", build " + fmt(secs) + " s");
}

struct MassTrace {
  std::vector<std::vector<double>> posts;
};

void record_posterior(void* user, int, const Posterior& p) {
  const auto v = p.probs();
  static_cast<MassTrace*>(user)->posts.emplace_back(v.begin(), v.end());
}

bool criterion5() {
  ExperimentConfig c = base_config();
  c.codebook_mode = CodebookMode::Ideal;
  c.snr_db = 120.0;  // sigma^2 = 1e-12
  c.mobility = PredictableMotion{0.0};
  c.horizon = 12;
  const SimContext ctx = make_context(c);
  int ok = 0, worst = 0;
  for (int e = 0; e < 100; ++e) {
    MassTrace trace;
    const EpisodeLog log = run_episode(c, ctx, e, record_posterior, &trace);
    const int truth = c.grid().bin_of(log.slots[0].phi_true);
    int hit = -1;
    for (std::size_t t = 0; t < trace.posts.size() && hit < 0; ++t)
      if (trace.posts[t][truth] >= 0.99) hit = static_cast<int>(t) + 1;
    if (hit > 0) {
      ++ok;
      worst = std::max(worst, hit);
    }
  }
  return report(5, ok == 100,
                std::to_string(ok) + "/100 seeds reach 0.99 mass on the true bin within 12 slots (slowest " +
                    std::to_string(worst) + " slots; ideal beams, sigma^2 = 1e-12)");
}

bool criterion6() {
  const auto t0 = Clock::now();
  ExperimentConfig c = base_config();
  c.mobility = GaussianMotion{0.75};
  const std::vector<double> gammas{0.001, 0.01, 0.03, 0.1, 0.3, 1.0};
  std::vector<Stat> over;
  for (double g : gammas) {
    c.gamma = g;
    over.push_back(run(c, Algorithm::Proposed).pilot_overhead);
  }
  int inversions = 0;
  bool within_se = true;
  std::string series;
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    series += (i ? ", " : "") + fmt(over[i].mean);
    if (i > 0 && over[i].mean > over[i - 1].mean) {
      ++inversions;
      within_se = within_se && over[i].mean - over[i - 1].mean <= std::max(over[i].se, over[i - 1].se);
    }
  }
  const double secs = seconds_since(t0);
  const bool ok =
      inversions <= 1 && within_se && over.back().mean < 0.1 * over.front().mean && secs < 120.0;
  return report(6, ok,
                "pilot overhead by gamma {0.001..1}: " + series + "; inversions = " + std::to_string(inversions) +
                    ", " + fmt(secs) + " s");
}

bool compare_gain(int n, const ExperimentConfig& c, const std::string& extra_label, bool strict, bool extra_ok,
                  const Metrics& mine) {
  const auto base = run_baselines(c);
  bool ok = extra_ok;
  std::string detail = "proposed gain = " + fmt(mine.mean_norm_gain.mean);
  for (const auto& b : base) {
    const bool beat = strict ? mine.mean_norm_gain.mean > b.m.mean_norm_gain.mean
                             : mine.mean_norm_gain.mean >= b.m.mean_norm_gain.mean;
    ok = ok && beat;
    detail += ", " + b.name + " = " + fmt(b.m.mean_norm_gain.mean);
  }
  return report(n, ok, extra_label + detail);
}

bool criterion7() {
  ExperimentConfig c = base_config();
  c.mobility = PredictableMotion{0.1};
  const Metrics mine = run(c, Algorithm::Proposed);
  const bool fast = mine.median_time_to_first_data < 64.0;
  return compare_gain(7, c, "median time to first data = " + fmt(mine.median_time_to_first_data) + " (< 64); ",
                      false, fast, mine);
}

bool criterion8() {
  ExperimentConfig c = base_config();
  c.mobility = GaussianMotion{0.75};
  return compare_gain(8, c, "", true, true, run(c, Algorithm::Proposed));
}

bool criterion9() {
  ExperimentConfig c = base_config();
  c.mobility = BernoulliJumpMotion{5.0, 0.01};
  const Metrics mine = run(c, Algorithm::Proposed);
  bool ok = std::isfinite(mine.median_recovery);
  std::string detail = "median recovery slots: proposed = " + fmt(mine.median_recovery) + " (" +
                       std::to_string(mine.n_jumps) + " jumps)";
  for (const auto& b : run_baselines(c)) {
    ok = ok && mine.median_recovery < b.m.median_recovery;
    detail += ", " + b.name + " = " + fmt(b.m.median_recovery);
  }
  return report(9, ok, detail);
}

std::string csv_of(const EpisodeLog& log) {
  std::ostringstream os;
  CsvWriter w(os);
  w.row(episode_csv_header());
  write_episode_rows(w, log);
  return os.str();
}

bool criterion10() {
  bool identical = true;
  for (Algorithm a : {Algorithm::Proposed, Algorithm::Ekf, Algorithm::PilotInsertion, Algorithm::NeighborhoodScan}) {
    ExperimentConfig c = base_config();
    c.algorithm = a;
    c.mobility = BernoulliJumpMotion{5.0, 0.01};
    // Two independent contexts so nothing cached in the first run can leak into the second.
    const std::string first = csv_of(run_episode(c, make_context(c, table_10db()), 3));
    const std::string second = csv_of(run_episode(c, make_context(c, table_10db()), 3));
    identical = identical && first == second;
  }
  ExperimentConfig c = base_config();
  const SimContext ctx = make_context(c, table_10db());
  double slowest = 0.0;
  for (int e = 0; e < 5; ++e) {
    const auto t0 = Clock::now();
    const EpisodeLog log = run_episode(c, ctx, e);
    slowest = std::max(slowest, seconds_since(t0));
    if (log.slots.size() != 500u) identical = false;
  }
  return report(10, identical && slowest < 1.0,
                std::string("episode CSVs byte-identical across reruns = ") + (identical ? "yes" : "no") +
                    ", slowest proposed episode (T = 500, 64 bins) = " + fmt(slowest) + " s (limit 1 s)");
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<bool()>> checks{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},  {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9}, {10, criterion10}};
  std::vector<int> which;
  if (argc < 2 || std::string(argv[1]) == "all") {
    for (const auto& [n, _] : checks) which.push_back(n);
  } else {
    for (int i = 1; i < argc; ++i) {
      const int n = std::atoi(argv[i]);
      if (!checks.count(n)) {
        std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
        return 2;
      }
      which.push_back(n);
    }
  }
  bool all = true;
  for (int n : which) {
    try {
      all = checks.at(n)() && all;
    } catch (const std::exception& e) {
      all = report(n, false, std::string("threw: ") + e.what()) && all;
    }
  }
  return all ? 0 : 1;
}
