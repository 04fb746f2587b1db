#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace beamtrack {

/// Uniform partition of [theta_min, theta_max] into n_bins bins of width delta.
/// Bins are 0-based; bin i has center theta_min + (i + 1/2) * delta.
class AngularGrid {
 public:
  AngularGrid(double theta_min, double theta_max, int n_bins)
      : theta_min_(theta_min), theta_max_(theta_max), n_bins_(n_bins) {
    if (n_bins < 1) throw std::invalid_argument("grid.n_bins must be >= 1");
    if (!(theta_min < theta_max)) throw std::invalid_argument("grid range must satisfy theta_min < theta_max");
    delta_ = (theta_max - theta_min) / n_bins;
  }

  int size() const { return n_bins_; }
  double delta() const { return delta_; }
  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }
  double span() const { return theta_max_ - theta_min_; }

  double center(int i) const { return theta_min_ + (i + 0.5) * delta_; }

  std::vector<double> centers() const {
    std::vector<double> c(n_bins_);
    for (int i = 0; i < n_bins_; ++i) c[i] = center(i);
    return c;
  }

  /// Bin containing phi; theta_max belongs to the last bin.
  int bin_of(double phi) const {
    if (!(phi >= theta_min_ && phi <= theta_max_)) throw std::domain_error("angle outside grid range");
    const int i = static_cast<int>(std::floor((phi - theta_min_) / delta_));
    return i >= n_bins_ ? n_bins_ - 1 : i;
  }

  /// Circular bin index.
  int wrap(int i) const { return ((i % n_bins_) + n_bins_) % n_bins_; }

 private:
  double theta_min_;
  double theta_max_;
  int n_bins_;
  double delta_;
};

}  // namespace beamtrack
