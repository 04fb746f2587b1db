#pragma once

// Discrete belief over the AoA grid: observation likelihoods, Bayes update and
// point estimates.

#include "beamtrack/angular_grid.hpp"
#include "beamtrack/codebook.hpp"
#include "beamtrack/geometry.hpp"
#include "beamtrack/special_functions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace beamtrack {

/// Whether the belief has absorbed the slot-t observation (t|t) or is a
/// one-step prediction (t|t-1).
enum class PosteriorPhase { Predicted, Updated };

class Posterior {
 public:
  Posterior() = default;
  explicit Posterior(std::vector<double> probs, PosteriorPhase phase = PosteriorPhase::Predicted)
      : probs_(std::move(probs)), phase_(phase) {
    if (probs_.empty()) throw std::invalid_argument("posterior must have at least one bin");
    for (double p : probs_) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("posterior entries must be finite and >= 0");
    }
  }

  static Posterior uniform(int n_bins) { return Posterior(std::vector<double>(n_bins, 1.0 / n_bins)); }

  static Posterior point_mass(int n_bins, int bin) {
    std::vector<double> p(n_bins, 0.0);
    p.at(bin) = 1.0;
    return Posterior(std::move(p));
  }

  int size() const { return static_cast<int>(probs_.size()); }
  double operator[](int i) const { return probs_[i]; }
  std::span<const double> probs() const { return probs_; }
  PosteriorPhase phase() const { return phase_; }
  double mass() const { return std::accumulate(probs_.begin(), probs_.end(), 0.0); }

  /// Rescales to unit mass; an all-zero vector is left untouched.
  Posterior normalized() const {
    const double m = mass();
    Posterior out = *this;
    if (m > 0.0) {
      for (double& p : out.probs_) p /= m;
    }
    return out;
  }

  double entropy() const {
    double h = 0.0;
    for (double p : probs_) {
      if (p > 0.0) h -= p * std::log(p);
    }
    return h;
  }

 private:
  std::vector<double> probs_;
  PosteriorPhase phase_ = PosteriorPhase::Predicted;
};

/// Densities below this are raised to it so the Bayes denominator never vanishes.
inline constexpr double kLikelihoodFloor = 1e-300;
inline const double kLogLikelihoodFloor = std::log(kLikelihoodFloor);

/// log of the CN(G, sigma^2) density at xi.
inline double log_pilot_likelihood(Complex xi, Complex bin_gain, double sigma_sq) {
  return -std::log(kPi * sigma_sq) - std::norm(xi - bin_gain) / sigma_sq;
}

/// (1 / pi sigma^2) exp(-|xi - G|^2 / sigma^2)
inline double pilot_likelihood(Complex xi, Complex bin_gain, double sigma_sq) {
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("sigma_sq must be > 0");
  return std::max(std::exp(log_pilot_likelihood(xi, bin_gain, sigma_sq)), kLikelihoodFloor);
}

/// log of the sigma^2-scaled non-central chi-squared (k = 2) density with
/// lambda = 2 |G|^2 / sigma^2. The series sum_k z^k / (k!)^2 is I0(2 sqrt z).
inline double log_data_likelihood(double xi, Complex bin_gain, double sigma_sq) {
  const double g2 = std::norm(bin_gain);
  const double log_i0 = log_bessel_i0(2.0 * std::sqrt(xi * g2) / sigma_sq);
  return -std::log(sigma_sq) - (xi + g2) / sigma_sq + log_i0;
}

inline double data_likelihood(double xi, Complex bin_gain, double sigma_sq) {
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("sigma_sq must be > 0");
  if (xi < 0.0) throw std::invalid_argument("data power must be >= 0");
  return std::max(std::exp(log_data_likelihood(xi, bin_gain, sigma_sq)), kLikelihoodFloor);
}

/// Floored per-bin log-likelihoods of one observation under the beam's bin gains.
inline std::vector<double> log_likelihood_table(const Observation& obs, const Beam& beam, double sigma_sq) {
  std::vector<double> ll(beam.bin_gains.size());
  for (std::size_t i = 0; i < ll.size(); ++i) {
    const double v = obs.is_pilot() ? log_pilot_likelihood(obs.pilot_value, beam.bin_gains[i], sigma_sq)
                                    : log_data_likelihood(obs.data_power, beam.bin_gains[i], sigma_sq);
    ll[i] = std::max(v, kLogLikelihoodFloor);
  }
  return ll;
}

/// Posterior(t|t-1) -> Posterior(t|t). Computed in the log domain with
/// max-subtraction; bins with zero prior stay at zero.
inline Posterior bayes_update(const Posterior& prior, const Observation& obs, const Beam& beam, double sigma_sq) {
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("sigma_sq must be > 0");
  if (static_cast<int>(beam.bin_gains.size()) != prior.size()) {
    throw std::invalid_argument("beam and posterior disagree on grid size");
  }
  const std::vector<double> ll = log_likelihood_table(obs, beam, sigma_sq);
  const int n = prior.size();
  std::vector<double> lp(n);
  double max_lp = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    lp[i] = prior[i] > 0.0 ? std::log(prior[i]) + ll[i] : -std::numeric_limits<double>::infinity();
    max_lp = std::max(max_lp, lp[i]);
  }
  if (!std::isfinite(max_lp)) return Posterior(std::vector<double>(prior.probs().begin(), prior.probs().end()),
                                               PosteriorPhase::Updated);
  std::vector<double> out(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    out[i] = std::exp(lp[i] - max_lp);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return Posterior(std::move(out), PosteriorPhase::Updated);
}

/// Index of the largest entry; ties go to the lowest index.
inline int map_bin(const Posterior& post) {
  auto p = post.probs();
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

inline double map_estimate(const Posterior& post, const AngularGrid& grid) { return grid.center(map_bin(post)); }

}  // namespace beamtrack
