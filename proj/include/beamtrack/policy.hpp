#pragma once

// Decision layer of the tracker: posterior-matching beam selection, the
// information / rate scores of pilot and data slots, and the offline
// mutual-information table used to evaluate them cheaply.

#include "beamtrack/codebook.hpp"
#include "beamtrack/posterior.hpp"
#include "beamtrack/quadrature.hpp"
#include "beamtrack/special_functions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <exception>
#include <vector>

namespace beamtrack {

enum class Action { Pilot, Data };

inline char to_char(Action a) { return a == Action::Pilot ? 'P' : 'D'; }

/// Which beams the posterior-matching argmin ranges over.
enum class HiepmScope {
  AllLevels,  // every beam of every level
  Descent,    // the deepest level holding a beam with coverage >= 1/2, and the level below it
};

inline constexpr double kHiepmTieTolerance = 1e-12;

/// argmin over beams of |coverage - 1/2|. Ties go to the beam holding more
/// mass (so a collapsed posterior picks the finest beam on it), then the finer
/// level, then the lower index.
inline BeamId select_beam_hiepm(const Posterior& post, const Codebook& cb, HiepmScope scope = HiepmScope::AllLevels) {
  int lo_level = 1;
  int hi_level = cb.levels();
  if (scope == HiepmScope::Descent) {
    int deepest = 1;
    for (int l = 1; l <= cb.levels(); ++l) {
      for (const Beam& b : cb.level(l)) {
        if (coverage_probability(post.probs(), b) >= 0.5 - kHiepmTieTolerance) deepest = l;
      }
    }
    lo_level = deepest;
    hi_level = std::min(deepest + 1, cb.levels());
  }
  BeamId best{};
  double best_dist = std::numeric_limits<double>::infinity();
  double best_cov = -1.0;
  for (int l = hi_level; l >= lo_level; --l) {
    for (const Beam& b : cb.level(l)) {
      const double cov = coverage_probability(post.probs(), b);
      const double d = std::abs(cov - 0.5);
      const bool tie = std::abs(d - best_dist) <= kHiepmTieTolerance;
      if (d < best_dist - kHiepmTieTolerance || (tie && cov > best_cov + kHiepmTieTolerance)) {
        best_dist = d;
        best_cov = cov;
        best = b.id;
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Mutual information between the AoA indicator (in / out of the beam) and the
// observation, under the ideal-beam model with in-coverage gain G.

struct QuadratureSettings {
  int pilot_points = 801;  // per axis, per window
  int data_points = 4001;  // per window
  double refinement_tolerance = 1e-3;  // nats
  bool check_refinement = true;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double residual) : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

namespace detail {

inline double log_or_neg_inf(double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

/// h(Z) for Z ~ pi CN(g, s2) + (1 - pi) CN(0, s2), g real >= 0, on a tensor
/// trapezoid grid. The mixture factors as exp(-y^2/s2) * m(x), so the double
/// sum is accumulated as a product of the two axis sums.
inline double pilot_mixture_entropy(double pi_w, double g, double sigma_sq, int points) {
  const double sigma = std::sqrt(sigma_sq);
  const auto xs = quadrature::trapezoid({{-8.0 * sigma, 8.0 * sigma}, {g - 8.0 * sigma, g + 8.0 * sigma}}, points);
  const auto ys = quadrature::trapezoid({{-8.0 * sigma, 8.0 * sigma}}, points);
  double ey = 0.0;
  double fy = 0.0;
  for (std::size_t j = 0; j < ys.nodes.size(); ++j) {
    const double q = ys.nodes[j] * ys.nodes[j] / sigma_sq;
    const double e = std::exp(-q);
    ey += ys.weights[j] * e;
    fy += ys.weights[j] * e * (-q);
  }
  const double lp = log_or_neg_inf(pi_w);
  const double lq = log_or_neg_inf(1.0 - pi_w);
  const double log_norm = std::log(kPi * sigma_sq);
  double acc = 0.0;
  for (std::size_t i = 0; i < xs.nodes.size(); ++i) {
    const double x = xs.nodes[i];
    const double lm = log_add_exp(lp - (x - g) * (x - g) / sigma_sq, lq - x * x / sigma_sq);
    if (!std::isfinite(lm)) continue;
    const double m = std::exp(lm);
    acc += xs.weights[i] * m * (fy + ey * (lm - log_norm));
  }
  return -acc / (kPi * sigma_sq);
}

struct DataEntropies {
  double mixture;
  double covered;
  double uncovered;
};

inline DataEntropies data_entropies(double pi_w, double g2, double sigma_sq, int points) {
  std::vector<std::pair<double, double>> windows{{0.0, 40.0 * sigma_sq}};
  if (g2 > 0.0) {
    const double mean = g2 + sigma_sq;
    const double sd = std::sqrt(sigma_sq * sigma_sq + 2.0 * g2 * sigma_sq);
    windows.emplace_back(std::max(0.0, mean - 14.0 * sd), std::max(mean + 14.0 * sd, g2 + 40.0 * sigma_sq));
  }
  const auto rule = quadrature::trapezoid(windows, points);
  const double lp = log_or_neg_inf(pi_w);
  const double lq = log_or_neg_inf(1.0 - pi_w);
  DataEntropies h{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    const double w = rule.weights[i];
    const double l1 = log_data_likelihood(x, Complex(std::sqrt(g2), 0.0), sigma_sq);
    const double l0 = -std::log(sigma_sq) - x / sigma_sq;
    const double lm = log_add_exp(lp + l1, lq + l0);
    if (std::isfinite(lm)) h.mixture -= w * std::exp(lm) * lm;
    if (std::isfinite(l1)) h.covered -= w * std::exp(l1) * l1;
    h.uncovered -= w * std::exp(l0) * l0;
  }
  return h;
}

inline void check_pi(double pi_w) {
  if (!(pi_w >= 0.0 && pi_w <= 1.0)) throw std::invalid_argument("coverage probability must lie in [0, 1]");
}

}  // namespace detail

/// I(AoA; Z(P)) in nats: h(mixture) - log(pi e sigma^2), clamped at 0.
inline double mi_pilot(double pi_w, Complex gain, double sigma_sq, const QuadratureSettings& q = {}) {
  detail::check_pi(pi_w);
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("sigma_sq must be > 0");
  // Rotating G onto the real axis leaves the differential entropy unchanged.
  const double g = std::abs(gain);
  const double noise_entropy = std::log(kPi * std::exp(1.0) * sigma_sq);
  const double coarse = detail::pilot_mixture_entropy(pi_w, g, sigma_sq, q.pilot_points) - noise_entropy;
  if (q.check_refinement) {
    const double fine = detail::pilot_mixture_entropy(pi_w, g, sigma_sq, 2 * q.pilot_points - 1) - noise_entropy;
    if (std::abs(fine - coarse) >= q.refinement_tolerance) {
      throw QuadratureError("pilot mutual information did not converge under refinement", std::abs(fine - coarse));
    }
  }
  return std::max(coarse, 0.0);
}

/// I(AoA; Z(D)) in nats: h(mixture) minus the pi-weighted component entropies.
inline double mi_data(double pi_w, Complex gain, double sigma_sq, const QuadratureSettings& q = {}) {
  detail::check_pi(pi_w);
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("sigma_sq must be > 0");
  const double g2 = std::norm(gain);
  auto eval = [&](int points) {
    const auto h = detail::data_entropies(pi_w, g2, sigma_sq, points);
    return h.mixture - (pi_w * h.covered + (1.0 - pi_w) * h.uncovered);
  };
  const double coarse = eval(q.data_points);
  if (q.check_refinement) {
    const double fine = eval(2 * q.data_points - 1);
    if (std::abs(fine - coarse) >= q.refinement_tolerance) {
      throw QuadratureError("data mutual information did not converge under refinement", std::abs(fine - coarse));
    }
  }
  return std::max(coarse, 0.0);
}

/// pi_w log2(1 + |G|^2 / sigma^2) on data slots, 0 on pilot slots.
inline double spectral_efficiency(double pi_w, Complex gain, double sigma_sq, Action action) {
  if (action == Action::Pilot) return 0.0;
  return pi_w * std::log2(1.0 + std::norm(gain) / sigma_sq);
}

inline double spectral_efficiency_nats(double pi_w, Complex gain, double sigma_sq, Action action) {
  return spectral_efficiency(pi_w, gain, sigma_sq, action) * std::log(2.0);
}

// ---------------------------------------------------------------------------

/// Offline table of I_P and I_D per codebook level over a uniform grid of
/// coverage probabilities, evaluated with the ideal gains G_l.
class MiTable {
 public:
  struct Key {
    int n_antennas = 0;
    int n_bins = 0;
    double sigma_sq = 0.0;
    int n = 0;

    friend bool operator==(const Key&, const Key&) = default;
  };

  MiTable(Key key, int levels) : key_(key), levels_(levels) {
    if (key.n < 2) throw std::invalid_argument("MI table needs at least 2 grid points");
    for (auto& v : values_) v.assign(static_cast<std::size_t>(levels) * key.n, 0.0);
  }

  const Key& key() const { return key_; }
  int levels() const { return levels_; }
  int n() const { return key_.n; }
  double pi_at(int j) const { return static_cast<double>(j) / (key_.n - 1); }

  double stored(Action kind, int level, int j) const { return values_[slot(kind)][index(level, j)]; }
  void set(Action kind, int level, int j, double v) { values_[slot(kind)][index(level, j)] = v; }

  /// Linear interpolation in pi_w (clamped to [0, 1]).
  double lookup(Action kind, int level, double pi_w) const {
    const double x = std::clamp(pi_w, 0.0, 1.0) * (key_.n - 1);
    const int j = std::min(static_cast<int>(x), key_.n - 2);
    const double t = x - j;
    return (1.0 - t) * stored(kind, level, j) + t * stored(kind, level, j + 1);
  }

  void write_csv(std::ostream& os) const {
    os << "# beamtrack mitable v1\n";
    os << "# n_antennas=" << key_.n_antennas << "\n# n_bins=" << key_.n_bins << "\n";
    os.precision(17);
    os << "# sigma_sq=" << key_.sigma_sq << "\n# n=" << key_.n << "\n";
    os << "kind,level,pi,mi_nats\n";
    for (Action kind : {Action::Pilot, Action::Data}) {
      for (int l = 1; l <= levels_; ++l) {
        for (int j = 0; j < key_.n; ++j) {
          os << to_char(kind) << ',' << l << ',' << pi_at(j) << ',' << stored(kind, l, j) << '\n';
        }
      }
    }
  }

  static MiTable read_csv(std::istream& is) {
    Key key;
    std::string line;
    bool header_seen = false;
    std::vector<std::tuple<char, int, int, double>> rows;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = line.substr(2, eq - 2);
        const std::string value = line.substr(eq + 1);
        if (name == "n_antennas") key.n_antennas = std::stoi(value);
        else if (name == "n_bins") key.n_bins = std::stoi(value);
        else if (name == "sigma_sq") key.sigma_sq = std::stod(value);
        else if (name == "n") key.n = std::stoi(value);
        continue;
      }
      if (!header_seen) {
        if (line != "kind,level,pi,mi_nats") throw std::runtime_error("MI table: unexpected header '" + line + "'");
        header_seen = true;
        continue;
      }
      std::stringstream ss(line);
      std::string kind, level, pi, mi;
      if (!std::getline(ss, kind, ',') || !std::getline(ss, level, ',') || !std::getline(ss, pi, ',') ||
          !std::getline(ss, mi) || kind.size() != 1 || (kind[0] != 'P' && kind[0] != 'D')) {
        throw std::runtime_error("MI table: malformed row '" + line + "'");
      }
      rows.emplace_back(kind[0], std::stoi(level), static_cast<int>(std::lround(std::stod(pi) * (key.n - 1))),
                        std::stod(mi));
    }
    if (key.n < 2 || key.n_bins < 2) throw std::runtime_error("MI table: missing key metadata");
    int levels = 0;
    for (const auto& r : rows) levels = std::max(levels, std::get<1>(r));
    if (rows.size() != static_cast<std::size_t>(2 * levels * key.n)) {
      throw std::runtime_error("MI table: expected " + std::to_string(2 * levels * key.n) + " rows");
    }
    MiTable t(key, levels);
    for (const auto& [kind, level, j, v] : rows) t.set(kind == 'P' ? Action::Pilot : Action::Data, level, j, v);
    return t;
  }

 private:
  static int slot(Action kind) { return kind == Action::Pilot ? 0 : 1; }
  std::size_t index(int level, int j) const {
    if (level < 1 || level > levels_ || j < 0 || j >= key_.n) throw std::out_of_range("MI table index out of range");
    return static_cast<std::size_t>(level - 1) * key_.n + j;
  }

  Key key_;
  int levels_;
  std::array<std::vector<double>, 2> values_;
};

/// Evaluates both MI terms on n uniform coverage probabilities per level.
/// Cells are independent and computed on up to `threads` workers.
inline MiTable build_mi_table(const Codebook& cb, double sigma_sq, int n, const QuadratureSettings& q = {},
                              unsigned threads = std::thread::hardware_concurrency()) {
  if (n < 11) throw std::invalid_argument("MI table grid size must be >= 11");
  MiTable table({cb.array().n_antennas, cb.grid().size(), sigma_sq, n}, cb.levels());
  const int cells = cb.levels() * n;
  threads = std::clamp(threads, 1u, static_cast<unsigned>(cells));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned worker) {
    try {
      for (int c = static_cast<int>(worker); c < cells; c += static_cast<int>(threads)) {
        const int level = c / n + 1;
        const int j = c % n;
        const Complex g(ideal_gain(level, cb.levels()), 0.0);
        const double pi_w = table.pi_at(j);
        table.set(Action::Pilot, level, j, mi_pilot(pi_w, g, sigma_sq, q));
        table.set(Action::Data, level, j, mi_data(pi_w, g, sigma_sq, q));
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return table;
}

struct ActionDecision {
  Action action = Action::Pilot;
  BeamId beam;
  double coverage = 0.0;  // pi_w
  double mi_value = 0.0;  // nats, of the chosen action
  double se_value = 0.0;  // bits/s/Hz, expected on a data slot
  double score_p = 0.0;
  double score_d = 0.0;
};

/// argmax over {P, D} of I(e) + gamma * S(e), with S in nats; ties go to D.
/// MI terms come from the table when given, otherwise they are integrated on
/// the spot (slow).
inline ActionDecision decide_action(const Posterior& post, const Beam& beam, int n_levels, double gamma,
                                    double sigma_sq, const MiTable* table) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  ActionDecision d;
  d.beam = beam.id;
  d.coverage = std::clamp(coverage_probability(post.probs(), beam), 0.0, 1.0);
  const Complex g(ideal_gain(beam.id.level, n_levels), 0.0);
  double i_p = 0.0;
  double i_d = 0.0;
  if (table != nullptr) {
    i_p = table->lookup(Action::Pilot, beam.id.level, d.coverage);
    i_d = table->lookup(Action::Data, beam.id.level, d.coverage);
  } else {
    i_p = mi_pilot(d.coverage, g, sigma_sq);
    i_d = mi_data(d.coverage, g, sigma_sq);
  }
  d.se_value = spectral_efficiency(d.coverage, g, sigma_sq, Action::Data);
  d.score_p = i_p;
  d.score_d = i_d + gamma * spectral_efficiency_nats(d.coverage, g, sigma_sq, Action::Data);
  d.action = d.score_d >= d.score_p ? Action::Data : Action::Pilot;
  d.mi_value = d.action == Action::Pilot ? i_p : i_d;
  return d;
}

}  // namespace beamtrack
