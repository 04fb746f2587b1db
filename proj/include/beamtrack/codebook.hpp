#pragma once

// Hierarchical beamforming codebook. Level l (1..S) holds 2^l beams whose
// coverage masks tile the angular grid; level S beams cover single bins.

#include "beamtrack/angular_grid.hpp"
#include "beamtrack/geometry.hpp"

#include <Eigen/Eigenvalues>

#include <bit>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamtrack {

enum class CodebookMode { Ideal, PseudoInverse };

inline const char* to_string(CodebookMode m) { return m == CodebookMode::Ideal ? "ideal" : "pseudo_inverse"; }

struct BeamId {
  int level = 1;  // 1..S
  int index = 0;  // 0..2^level - 1

  friend bool operator==(const BeamId&, const BeamId&) = default;
};

struct Beam {
  BeamId id;
  ComplexVector weights;
  int first_bin = 0;  // coverage is the contiguous range [first_bin, first_bin + width)
  int width = 1;
  std::vector<Complex> bin_gains;  // w^H a(theta_i), or G_l * mask in ideal mode
  double ideal_gain = 1.0;         // G_l

  bool covers(int bin) const { return bin >= first_bin && bin < first_bin + width; }

  std::vector<int> coverage_mask(int n_bins) const {
    std::vector<int> m(n_bins, 0);
    for (int i = first_bin; i < first_bin + width; ++i) m[i] = 1;
    return m;
  }
};

/// |G_l| under energy conservation, anchored so the finest level has |G_S|^2 = 1.
inline double ideal_gain(int level, int n_levels) {
  if (level < 1 || level > n_levels) throw std::out_of_range("codebook level out of range");
  return std::sqrt(std::ldexp(1.0, level - n_levels));
}

/// Sum of posterior mass under the beam's coverage mask.
inline double coverage_probability(std::span<const double> posterior, const Beam& beam) {
  double s = 0.0;
  for (int i = beam.first_bin; i < beam.first_bin + beam.width; ++i) s += posterior[i];
  return s;
}

namespace detail {

/// Moore-Penrose inverse of a Hermitian matrix; eigenvalues below rel_tol * max|ev| are dropped.
inline Eigen::MatrixXcd hermitian_pinv(const Eigen::MatrixXcd& m, double rel_tol, double* condition) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double max_ev = ev.cwiseAbs().maxCoeff();
  const double cutoff = rel_tol * max_ev;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev[i]) > cutoff) inv[i] = 1.0 / ev[i];
  }
  if (condition != nullptr) *condition = max_ev / std::max(std::abs(ev.minCoeff()), 1e-300);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

class Codebook {
 public:
  Codebook(const ArrayConfig& cfg, const AngularGrid& grid, CodebookMode mode) : cfg_(cfg), grid_(grid), mode_(mode) {
    cfg.validate();
    const int n_bins = grid.size();
    if (n_bins < 2 || !std::has_single_bit(static_cast<unsigned>(n_bins))) {
      throw std::invalid_argument("grid.n_bins must be a power of two >= 2 for a hierarchical codebook");
    }
    n_levels_ = std::countr_zero(static_cast<unsigned>(n_bins));

    const int n = cfg.n_antennas;
    Eigen::MatrixXcd a(n, n_bins);
    for (int i = 0; i < n_bins; ++i) a.col(i) = steering_vector(cfg, grid.center(i));
    const Eigen::MatrixXcd gram_pinv = detail::hermitian_pinv(a * a.adjoint(), kPinvTolerance, &condition_number_);
    const Eigen::MatrixXcd projector = gram_pinv * a;  // w = (A A^H)^+ A g

    for (int l = 1; l <= n_levels_; ++l) {
      const int width = n_bins >> l;
      const double g = ideal_gain(l, n_levels_);
      for (int k = 0; k < (1 << l); ++k) {
        Beam b;
        b.id = {l, k};
        b.first_bin = k * width;
        b.width = width;
        b.ideal_gain = g;
        b.weights = projector.middleCols(b.first_bin, width).rowwise().sum();
        const double norm = b.weights.norm();
        if (!(norm > 0.0)) throw std::runtime_error("degenerate pseudo-inverse beam");
        b.weights /= norm;
        b.bin_gains.resize(n_bins);
        for (int i = 0; i < n_bins; ++i) {
          b.bin_gains[i] = mode == CodebookMode::Ideal ? Complex(b.covers(i) ? g : 0.0, 0.0)
                                                       : beam_gain(b.weights, a.col(i));
        }
        beams_.push_back(std::move(b));
      }
    }
  }

  static constexpr double kPinvTolerance = 1e-8;

  int levels() const { return n_levels_; }
  CodebookMode mode() const { return mode_; }
  const AngularGrid& grid() const { return grid_; }
  const ArrayConfig& array() const { return cfg_; }
  double gram_condition_number() const { return condition_number_; }
  std::span<const Beam> beams() const { return beams_; }

  /// Beams of one level, ordered by index.
  std::span<const Beam> level(int l) const {
    if (l < 1 || l > n_levels_) throw std::out_of_range("codebook level out of range");
    const std::size_t offset = (std::size_t{1} << l) - 2;
    return std::span<const Beam>(beams_).subspan(offset, std::size_t{1} << l);
  }

  const Beam& beam(BeamId id) const {
    auto lv = level(id.level);
    if (id.index < 0 || id.index >= static_cast<int>(lv.size())) throw std::out_of_range("beam index out of range");
    return lv[id.index];
  }

  /// Level-l beam whose coverage contains bin.
  const Beam& covering(int l, int bin) const { return level(l)[bin / (grid_.size() >> l)]; }

  /// Center of the beam's covered angular range (its nominal pointing direction).
  double beam_center(const Beam& b) const {
    return grid_.theta_min() + (b.first_bin + 0.5 * b.width) * grid_.delta();
  }

  /// Gain realised by the beam for a signal from phi. Ideal beams follow the
  /// constant-gain / full-rejection abstraction on the grid.
  Complex gain_at(const Beam& b, double phi) const {
    if (mode_ == CodebookMode::Ideal) return b.covers(grid_.bin_of(phi)) ? Complex(b.ideal_gain, 0.0) : Complex{};
    return beam_gain(b.weights, steering_vector(cfg_, phi));
  }

 private:
  ArrayConfig cfg_;
  AngularGrid grid_;
  CodebookMode mode_;
  int n_levels_ = 0;
  double condition_number_ = 0.0;
  std::vector<Beam> beams_;
};

inline Codebook build_codebook(const ArrayConfig& cfg, const AngularGrid& grid, CodebookMode mode) {
  return Codebook(cfg, grid, mode);
}

}  // namespace beamtrack
