#pragma once

// Array manifold, channel and observation synthesis for a uniform linear array.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace beamtrack {

using Complex = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

/// Element whose phase is zero in the steering vector. The choice changes only
/// the phase of w^H a(phi), which for narrow beams rotates across a bin unless
/// the reference sits at the array center.
enum class PhaseReference { FirstElement, ArrayCenter };

struct ArrayConfig {
  int n_antennas = 32;
  double spacing_ratio = 0.5;  // d / lambda
  double theta_min = -180.0;   // degrees
  double theta_max = 0.0;
  PhaseReference phase_reference = PhaseReference::FirstElement;

  void validate() const {
    if (n_antennas < 2) throw std::invalid_argument("array.n_antennas must be >= 2");
    if (!(spacing_ratio > 0.0)) throw std::invalid_argument("array.spacing_ratio must be > 0");
    if (!(theta_min < theta_max)) throw std::invalid_argument("array.theta_min must be < array.theta_max");
  }

  bool contains(double aoa_deg) const { return aoa_deg >= theta_min && aoa_deg <= theta_max; }
};

struct ChannelState {
  double aoa = -90.0;  // degrees
  Complex path_gain{1.0, 0.0};
  double tx_power = 1.0;
  double noise_var = 0.1;

  double snr() const { return tx_power / noise_var; }
};

inline double snr_db_to_noise_var(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

enum class ObservationKind { Pilot, Data };

/// A single slot's processed receiver output. Pilots carry the derotated complex
/// sample, data slots carry only the received power.
struct Observation {
  ObservationKind kind = ObservationKind::Pilot;
  Complex pilot_value{};
  double data_power = 0.0;

  static Observation pilot(Complex v) { return {ObservationKind::Pilot, v, 0.0}; }
  static Observation data(double p) {
    if (p < 0.0) throw std::invalid_argument("data power must be nonnegative");
    return {ObservationKind::Data, {}, p};
  }
  bool is_pilot() const { return kind == ObservationKind::Pilot; }
};

/// a(phi)_n = exp(j 2 pi (d/lambda) n cos(phi)) / sqrt(N), n = 0..N-1, with n
/// shifted by -(N-1)/2 when the phase reference is the array center.
inline ComplexVector steering_vector(const ArrayConfig& cfg, double aoa_deg) {
  if (!cfg.contains(aoa_deg) || !std::isfinite(aoa_deg)) {
    throw std::domain_error("aoa " + std::to_string(aoa_deg) + " deg outside the array angle range");
  }
  const int n = cfg.n_antennas;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double k = 2.0 * kPi * cfg.spacing_ratio * std::cos(deg_to_rad(aoa_deg));
  ComplexVector a(n);
  const double offset = cfg.phase_reference == PhaseReference::ArrayCenter ? 0.5 * (n - 1) : 0.0;
  for (int i = 0; i < n; ++i) a[i] = std::polar(scale, k * (i - offset));
  return a;
}

/// w^H a
inline Complex beam_gain(const ComplexVector& w, const ComplexVector& a) { return w.dot(a); }

namespace detail {

inline void require_unit_norm(const ComplexVector& w) {
  if (std::abs(w.norm() - 1.0) > 1e-9) {
    throw std::invalid_argument("beamforming vector must have unit norm (|w| = " + std::to_string(w.norm()) + ")");
  }
}

/// Circularly symmetric complex Gaussian with total variance var.
template <typename Rng>
Complex complex_noise(double var, Rng& rng) {
  if (var <= 0.0) return {};
  std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
  const double re = nd(rng);
  const double im = nd(rng);
  return {re, im};
}

template <typename Rng>
Complex qpsk_symbol(Rng& rng) {
  static constexpr double h = 0.70710678118654752440;
  std::uniform_int_distribution<int> pick(0, 3);
  switch (pick(rng)) {
    case 0: return {h, h};
    case 1: return {-h, h};
    case 2: return {-h, -h};
    default: return {h, -h};
  }
}

}  // namespace detail

// Gain-level synthesis. The channel-level overloads below reduce to these once
// w^H a(phi) is known, which is also how ideal (mask-based) beams are simulated.

template <typename Rng>
Observation synthesize_pilot_from_gain(Complex gain, const ChannelState& ch, Rng& rng) {
  const Complex signal = std::sqrt(ch.tx_power) * ch.path_gain * gain;
  return Observation::pilot(signal + detail::complex_noise(ch.noise_var, rng));
}

template <typename Rng>
Observation synthesize_data_from_gain(Complex gain, const ChannelState& ch, Rng& rng) {
  const Complex x = detail::qpsk_symbol(rng);
  const Complex y = std::sqrt(ch.tx_power) * ch.path_gain * gain * x + detail::complex_noise(ch.noise_var, rng);
  return Observation::data(std::norm(y));
}

template <typename Rng>
Observation synthesize_pilot_observation(const ArrayConfig& cfg, const ChannelState& ch, const ComplexVector& w,
                                         Rng& rng) {
  detail::require_unit_norm(w);
  return synthesize_pilot_from_gain(beam_gain(w, steering_vector(cfg, ch.aoa)), ch, rng);
}

template <typename Rng>
Observation synthesize_data_observation(const ArrayConfig& cfg, const ChannelState& ch, const ComplexVector& w,
                                        Rng& rng) {
  detail::require_unit_norm(w);
  return synthesize_data_from_gain(beam_gain(w, steering_vector(cfg, ch.aoa)), ch, rng);
}

}  // namespace beamtrack
