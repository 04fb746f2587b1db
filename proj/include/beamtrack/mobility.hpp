#pragma once

// AoA mobility: trajectory sampling and the matching one-step posterior
// prediction kernels. Kernels act circularly on the grid.

#include "beamtrack/angular_grid.hpp"
#include "beamtrack/posterior.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

namespace beamtrack {

/// Constant drift of nu bins per slot.
struct PredictableMotion {
  double nu = 0.0;
};

/// Zero-mean Gaussian increments, variance in deg^2.
struct GaussianMotion {
  double sigma_phi_sq = 0.0;
};

/// With probability p the AoA jumps by jump_deg. The prediction kernel uses the
/// nearest whole number of bins.
struct BernoulliJumpMotion {
  double jump_deg = 0.0;
  double p = 0.0;
};

using MobilityModel = std::variant<PredictableMotion, GaussianMotion, BernoulliJumpMotion>;

enum class BoundaryPolicy { Wrap, Reflect };

inline void validate(const MobilityModel& m) {
  if (const auto* g = std::get_if<GaussianMotion>(&m); g && !(g->sigma_phi_sq >= 0.0)) {
    throw std::invalid_argument("mobility.sigma_phi_sq must be >= 0");
  }
  if (const auto* b = std::get_if<BernoulliJumpMotion>(&m); b && !(b->p >= 0.0 && b->p <= 1.0)) {
    throw std::invalid_argument("mobility.p must be in [0, 1]");
  }
}

inline double apply_boundary(double phi, const AngularGrid& grid, BoundaryPolicy policy) {
  const double lo = grid.theta_min();
  const double span = grid.span();
  if (policy == BoundaryPolicy::Wrap) {
    double r = std::fmod(phi - lo, span);
    if (r < 0.0) r += span;
    return lo + r;
  }
  // Reflect: fold into [0, 2 span) then mirror the upper half.
  double r = std::fmod(phi - lo, 2.0 * span);
  if (r < 0.0) r += 2.0 * span;
  return lo + (r <= span ? r : 2.0 * span - r);
}

/// Sample phi_{t+1}. Also reports whether a Bernoulli jump happened.
template <typename Rng>
double step_aoa(const MobilityModel& model, double phi, const AngularGrid& grid, Rng& rng,
                BoundaryPolicy policy = BoundaryPolicy::Wrap, bool* jumped = nullptr) {
  double next = phi;
  bool jump = false;
  if (const auto* m = std::get_if<PredictableMotion>(&model)) {
    next = phi + m->nu * grid.delta();
  } else if (const auto* g = std::get_if<GaussianMotion>(&model)) {
    if (g->sigma_phi_sq > 0.0) {
      std::normal_distribution<double> nd(0.0, std::sqrt(g->sigma_phi_sq));
      next = phi + nd(rng);
    }
  } else {
    const auto& b = std::get<BernoulliJumpMotion>(model);
    std::bernoulli_distribution coin(b.p);
    jump = coin(rng);
    if (jump) next = phi + b.jump_deg;
  }
  if (jumped != nullptr) *jumped = jump;
  return apply_boundary(next, grid, policy);
}

namespace detail {

inline std::vector<double> circular_shift(std::span<const double> p, int shift) {
  const int n = static_cast<int>(p.size());
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[(((i + shift) % n) + n) % n] = p[i];
  return out;
}

}  // namespace detail

/// Integer part of nu shifts the belief; the fractional remainder f moves a
/// fraction |f| of each bin's mass one bin in the direction of f.
inline Posterior predict_predictable(const Posterior& post, double nu) {
  const double whole = std::trunc(nu);
  const double frac = nu - whole;
  std::vector<double> p = detail::circular_shift(post.probs(), static_cast<int>(whole));
  if (frac != 0.0) {
    const int n = static_cast<int>(p.size());
    const int dir = frac > 0.0 ? 1 : -1;
    const double f = std::abs(frac);
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) q[i] = (1.0 - f) * p[i] + f * p[(((i - dir) % n) + n) % n];
    p = std::move(q);
  }
  return Posterior(std::move(p));
}

/// Quantized, truncated (+-6 sigma) Gaussian increment kernel indexed by bin
/// offset -half..half, normalized to unit mass.
inline std::vector<double> gaussian_kernel(double sigma_phi_sq, const AngularGrid& grid) {
  if (sigma_phi_sq <= 0.0) return {1.0};
  const double sigma = std::sqrt(sigma_phi_sq);
  const double delta = grid.delta();
  const int half = std::min(static_cast<int>(std::ceil(6.0 * sigma / delta + 0.5)), grid.size() / 2);
  std::vector<double> k(2 * half + 1);
  const double s = sigma * std::sqrt(2.0);
  double total = 0.0;
  for (int m = -half; m <= half; ++m) {
    const double lo = std::max((m - 0.5) * delta, -6.0 * sigma);
    const double hi = std::min((m + 0.5) * delta, 6.0 * sigma);
    const double w = hi > lo ? 0.5 * (std::erf(hi / s) - std::erf(lo / s)) : 0.0;
    k[m + half] = w;
    total += w;
  }
  for (double& w : k) w /= total;
  return k;
}

/// Circular convolution of the belief with the quantized Gaussian kernel.
inline Posterior predict_gaussian(const Posterior& post, double sigma_phi_sq, const AngularGrid& grid) {
  const std::vector<double> k = gaussian_kernel(sigma_phi_sq, grid);
  const int half = static_cast<int>(k.size() / 2);
  const int n = post.size();
  std::vector<double> out(n, 0.0);
  for (int j = 0; j < n; ++j) {
    const double pj = post[j];
    if (pj == 0.0) continue;
    for (int m = -half; m <= half; ++m) out[(((j + m) % n) + n) % n] += pj * k[m + half];
  }
  return Posterior(std::move(out));
}

/// (1 - p) pi_i + p pi_{i - beta}
inline Posterior predict_bernoulli(const Posterior& post, int beta, double p) {
  const std::vector<double> shifted = detail::circular_shift(post.probs(), beta);
  std::vector<double> out(post.size());
  for (int i = 0; i < post.size(); ++i) out[i] = (1.0 - p) * post[i] + p * shifted[i];
  return Posterior(std::move(out));
}

inline int jump_bins(const BernoulliJumpMotion& m, const AngularGrid& grid) {
  return static_cast<int>(std::lround(m.jump_deg / grid.delta()));
}

/// One-step prediction pi(t|t) -> pi(t+1|t) for any model.
inline Posterior predict(const Posterior& post, const MobilityModel& model, const AngularGrid& grid) {
  if (const auto* m = std::get_if<PredictableMotion>(&model)) return predict_predictable(post, m->nu);
  if (const auto* g = std::get_if<GaussianMotion>(&model)) return predict_gaussian(post, g->sigma_phi_sq, grid);
  const auto& b = std::get<BernoulliJumpMotion>(model);
  return predict_bernoulli(post, jump_bins(b, grid), b.p);
}

/// Mean drift per slot in degrees (the predictable component of the model).
inline double mean_drift_deg(const MobilityModel& model, const AngularGrid& grid) {
  if (const auto* m = std::get_if<PredictableMotion>(&model)) return m->nu * grid.delta();
  if (std::holds_alternative<GaussianMotion>(model)) return 0.0;
  const auto& b = std::get<BernoulliJumpMotion>(model);
  return b.jump_deg * b.p;
}

/// Per-slot variance of the unpredictable component in deg^2.
inline double increment_variance(const MobilityModel& model) {
  if (std::holds_alternative<PredictableMotion>(model)) return 0.0;
  if (const auto* g = std::get_if<GaussianMotion>(&model)) return g->sigma_phi_sq;
  const auto& b = std::get<BernoulliJumpMotion>(model);
  return b.jump_deg * b.jump_deg * b.p * (1.0 - b.p);
}

}  // namespace beamtrack
