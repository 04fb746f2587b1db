#pragma once

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

namespace beamtrack::quadrature {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Composite trapezoid rule over a union of intervals. Every elementary segment
/// between consecutive interval endpoints gets its own `points` nodes, so a
/// narrow window keeps its resolution when it overlaps a wide one.
inline Rule trapezoid(const std::vector<std::pair<double, double>>& intervals, int points) {
  if (points < 2) throw std::invalid_argument("trapezoid rule needs at least 2 points");
  std::vector<double> cuts;
  for (const auto& [a, b] : intervals) {
    if (b > a) {
      cuts.push_back(a);
      cuts.push_back(b);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  Rule r;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s];
    const double b = cuts[s + 1];
    const double mid = 0.5 * (a + b);
    const bool inside = std::any_of(intervals.begin(), intervals.end(),
                                    [mid](const auto& iv) { return iv.first <= mid && mid <= iv.second; });
    if (!inside) continue;
    const double h = (b - a) / (points - 1);
    for (int i = 0; i < points; ++i) {
      r.nodes.push_back(a + h * i);
      r.weights.push_back(i == 0 || i == points - 1 ? 0.5 * h : h);
    }
  }
  return r;
}

}  // namespace beamtrack::quadrature
