#pragma once

// Comparison trackers. Each is a per-episode state machine driven slot by slot:
// plan() says which beam to use and whether the slot carries a pilot, observe()
// feeds back what the receiver measured.

#include "beamtrack/codebook.hpp"
#include "beamtrack/mobility.hpp"
#include "beamtrack/policy.hpp"

#include <array>
#include <cmath>
#include <deque>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace beamtrack {

enum class BaselineKind { Ekf, PilotInsertion, NeighborhoodScan };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::Ekf: return "ekf";
    case BaselineKind::PilotInsertion: return "pilot_insertion";
    default: return "neighborhood_scan";
  }
}

struct BaselineConfig {
  BaselineKind variant = BaselineKind::Ekf;
  double mse_threshold_factor = 0.5;  // reset when sqrt(P) >= factor * finest beam width
  double p_min = 0.5;                 // relative power threshold
  int window = 5;                     // power averaging window
  int scan_level = 6;
  int tau_max = 20;
  bool exhaustive_perfect = true;

  void validate(int n_levels) const {
    if (!(p_min > 0.0 && p_min <= 1.0)) throw std::invalid_argument("baseline.p_min must be in (0, 1]");
    if (tau_max < 1) throw std::invalid_argument("baseline.tau_max must be >= 1");
    if (window < 1) throw std::invalid_argument("baseline.window must be >= 1");
    if (!(mse_threshold_factor > 0.0)) throw std::invalid_argument("baseline.mse_threshold_factor must be > 0");
    if (scan_level < 1 || scan_level > n_levels) throw std::invalid_argument("baseline.scan_level out of range");
  }
};

struct SlotPlan {
  Action action = Action::Pilot;
  BeamId beam;
};

/// Sweeps every beam of one level, one pilot slot per beam.
class ExhaustiveSearch {
 public:
  ExhaustiveSearch() = default;
  ExhaustiveSearch(const Codebook& cb, int level, bool perfect)
      : cb_(&cb), level_(level), perfect_(perfect), powers_(std::size_t{1} << level, 0.0) {
    cb.level(level);  // range check
  }

  int duration() const { return static_cast<int>(powers_.size()); }
  int level() const { return level_; }
  bool done() const { return next_ >= duration(); }
  BeamId next_beam() const { return {level_, next_}; }

  /// Feed the pilot measured on next_beam(). Returns true once the sweep is
  /// complete; phi_now is the true AoA in that slot.
  bool record(const Observation& obs, double phi_now) {
    if (done()) throw std::logic_error("exhaustive search already finished");
    powers_[next_] = std::norm(obs.pilot_value);
    ++next_;
    if (done()) finish(phi_now);
    return done();
  }

  double estimate() const { return estimate_; }
  BeamId best_beam() const { return best_; }

 private:
  void finish(double phi_now) {
    const AngularGrid& grid = cb_->grid();
    if (perfect_) {
      const Beam& b = cb_->covering(level_, grid.bin_of(phi_now));
      best_ = b.id;
    } else {
      const auto it = std::max_element(powers_.begin(), powers_.end());
      best_ = {level_, static_cast<int>(it - powers_.begin())};
    }
    estimate_ = cb_->beam_center(cb_->beam(best_));
  }

  const Codebook* cb_ = nullptr;
  int level_ = 0;
  bool perfect_ = true;
  std::vector<double> powers_;
  int next_ = 0;
  double estimate_ = 0.0;
  BeamId best_;
};

class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual SlotPlan plan(int t) = 0;
  virtual void observe(int t, const SlotPlan& plan, const Observation& obs, double phi_true) = 0;
  /// Current point estimate of the AoA in degrees.
  virtual double estimate() const = 0;
  int searches() const { return searches_; }

 protected:
  int searches_ = 0;
};

// ---------------------------------------------------------------------------
// EKF

struct EkfState {
  double phi = 0.0;  // deg
  double p = 0.0;    // deg^2
};

inline EkfState ekf_predict(EkfState s, double drift, double q) { return {s.phi + drift, s.p + q}; }

/// One EKF measurement update for a 2-D real measurement z = h(phi) + noise with
/// covariance r * I. The Jacobian is a central difference with step eps.
template <typename H>
EkfState ekf_update(EkfState s, std::array<double, 2> z, H&& h, double r, double eps) {
  const std::array<double, 2> hp = h(s.phi + eps);
  const std::array<double, 2> hm = h(s.phi - eps);
  const std::array<double, 2> h0 = h(s.phi);
  const double j0 = (hp[0] - hm[0]) / (2.0 * eps);
  const double j1 = (hp[1] - hm[1]) / (2.0 * eps);
  // S = J P J^T + r I, inverted in closed form.
  const double s00 = j0 * j0 * s.p + r;
  const double s11 = j1 * j1 * s.p + r;
  const double s01 = j0 * j1 * s.p;
  const double det = s00 * s11 - s01 * s01;
  const double k0 = s.p * (j0 * s11 - j1 * s01) / det;
  const double k1 = s.p * (j1 * s00 - j0 * s01) / det;
  const double v0 = z[0] - h0[0];
  const double v1 = z[1] - h0[1];
  return {s.phi + k0 * v0 + k1 * v1, (1.0 - (k0 * j0 + k1 * j1)) * s.p};
}

/// Finest beam covering phi after wrapping it into the grid.
inline BeamId finest_beam_at(const Codebook& cb, double phi, int level = -1) {
  const AngularGrid& grid = cb.grid();
  if (level < 0) level = cb.levels();
  const double wrapped = apply_boundary(phi, grid, BoundaryPolicy::Wrap);
  return cb.covering(level, grid.bin_of(wrapped)).id;
}

class EkfTracker : public Tracker {
 public:
  EkfTracker(const Codebook& cb, const MobilityModel& model, const BaselineConfig& cfg, double sigma_sq)
      : cb_(cb), cfg_(cfg), sigma_sq_(sigma_sq), drift_(mean_drift_deg(model, cb.grid())),
        q_(increment_variance(model)) {
    start_search();
  }

  SlotPlan plan(int) override {
    if (!search_.done()) return {Action::Pilot, search_.next_beam()};
    return {Action::Data, finest_beam_at(cb_, state_.phi)};
  }

  void observe(int, const SlotPlan& plan, const Observation& obs, double phi_true) override {
    if (plan.action == Action::Pilot) {
      if (!cfg_.exhaustive_perfect) track_best_pilot(obs);
      if (!search_.record(obs, phi_true)) return;
      const double delta = cb_.grid().delta();
      state_ = {search_.estimate(), delta * delta / 12.0};
      // Without the perfect-search shortcut the winning pilot also refines the state.
      if (!cfg_.exhaustive_perfect) state_ = update(state_, cb_.beam(search_.best_beam()), best_pilot_);
    }
    state_ = ekf_predict(state_, drift_, q_);
    state_.phi = apply_boundary(state_.phi, cb_.grid(), BoundaryPolicy::Wrap);
    if (needs_reset(state_)) start_search();
  }

  double estimate() const override { return state_.phi; }
  const EkfState& state() const { return state_; }

  bool needs_reset(const EkfState& s) const {
    if (!std::isfinite(s.p) || !std::isfinite(s.phi) || s.p < 0.0) return true;
    return std::sqrt(s.p) >= cfg_.mse_threshold_factor * cb_.grid().delta();
  }

  /// Pilot measurement update against the beam's gain pattern.
  EkfState update(EkfState s, const Beam& beam, Complex xi) const {
    const AngularGrid& grid = cb_.grid();
    auto h = [&](double phi) {
      const Complex g = cb_.gain_at(beam, std::clamp(phi, grid.theta_min(), grid.theta_max()));
      return std::array<double, 2>{g.real(), g.imag()};
    };
    return ekf_update(s, {xi.real(), xi.imag()}, h, sigma_sq_ / 2.0, grid.delta() / 10.0);
  }

 private:
  void start_search() {
    search_ = ExhaustiveSearch(cb_, cb_.levels(), cfg_.exhaustive_perfect);
    best_power_ = -1.0;
    ++searches_;
  }

  void track_best_pilot(const Observation& obs) {
    if (std::norm(obs.pilot_value) > best_power_) {
      best_power_ = std::norm(obs.pilot_value);
      best_pilot_ = obs.pilot_value;
    }
  }

  const Codebook& cb_;
  BaselineConfig cfg_;
  double sigma_sq_;
  double drift_;
  double q_;
  ExhaustiveSearch search_;
  EkfState state_;
  double best_power_ = -1.0;
  Complex best_pilot_;
};

// ---------------------------------------------------------------------------
// Dynamic pilot insertion

class PilotInsertionTracker : public Tracker {
 public:
  PilotInsertionTracker(const Codebook& cb, const MobilityModel& model, const BaselineConfig& cfg)
      : cb_(cb), cfg_(cfg), velocity_(mean_drift_deg(model, cb.grid())) {
    start_search();
  }

  SlotPlan plan(int t) override {
    if (!search_.done()) return {Action::Pilot, search_.next_beam()};
    return {Action::Data, finest_beam_at(cb_, predicted(t))};
  }

  void observe(int t, const SlotPlan& plan, const Observation& obs, double phi_true) override {
    last_t_ = t;
    if (plan.action == Action::Pilot) {
      if (search_.record(obs, phi_true)) {
        phi_tau_ = search_.estimate();
        tau_ = t;
        anchor_ = -1.0;
        window_.clear();
      }
      return;
    }
    if (anchor_ < 0.0) anchor_ = std::max(obs.data_power, 1e-300);
    window_.push_back(obs.data_power / anchor_);
    if (static_cast<int>(window_.size()) > cfg_.window) window_.pop_front();
    if (static_cast<int>(window_.size()) == cfg_.window) {
      const double avg = std::accumulate(window_.begin(), window_.end(), 0.0) / cfg_.window;
      if (avg < cfg_.p_min) start_search();
    }
  }

  double estimate() const override {
    return apply_boundary(predicted(last_t_), cb_.grid(), BoundaryPolicy::Wrap);
  }

 private:
  double predicted(int t) const { return phi_tau_ + velocity_ * (t - tau_); }

  void start_search() {
    search_ = ExhaustiveSearch(cb_, cb_.levels(), cfg_.exhaustive_perfect);
    ++searches_;
  }

  const Codebook& cb_;
  BaselineConfig cfg_;
  double velocity_;
  ExhaustiveSearch search_;
  double phi_tau_ = 0.0;
  int tau_ = 0;
  int last_t_ = 0;
  double anchor_ = -1.0;
  std::deque<double> window_;
};

// ---------------------------------------------------------------------------
// Neighborhood scan

class NeighborhoodScanTracker : public Tracker {
 public:
  NeighborhoodScanTracker(const Codebook& cb, const MobilityModel& model, const BaselineConfig& cfg)
      : cb_(cb), cfg_(cfg), velocity_(mean_drift_deg(model, cb.grid())),
        search_(cb, cfg.scan_level, cfg.exhaustive_perfect) {
    ++searches_;
  }

  SlotPlan plan(int t) override {
    if (!search_.done()) return {Action::Pilot, search_.next_beam()};
    if (scan_step_ >= 0) {
      const int k = static_cast<int>(cb_.level(cfg_.scan_level).size());
      return {Action::Pilot, {cfg_.scan_level, (((scan_center_ + scan_step_ - 1) % k) + k) % k}};
    }
    return {Action::Data, finest_beam_at(cb_, predicted(t), cfg_.scan_level)};
  }

  void observe(int t, const SlotPlan& plan, const Observation& obs, double phi_true) override {
    last_t_ = t;
    if (!search_.done()) {
      if (search_.record(obs, phi_true)) {
        phi_ref_ = search_.estimate();
        t_ref_ = t;
        data_run_ = 0;
      }
      return;
    }
    if (scan_step_ >= 0) {
      scan_powers_[scan_step_] = std::norm(obs.pilot_value);
      scan_beams_[scan_step_] = plan.beam;
      if (++scan_step_ == 3) {
        const int best = static_cast<int>(std::max_element(scan_powers_.begin(), scan_powers_.end()) -
                                          scan_powers_.begin());
        phi_ref_ = cb_.beam_center(cb_.beam(scan_beams_[best]));
        t_ref_ = t;
        scan_step_ = -1;
        data_run_ = 0;
      }
      return;
    }
    if (++data_run_ >= cfg_.tau_max) {
      scan_center_ = finest_beam_at(cb_, predicted(t + 1), cfg_.scan_level).index;
      scan_step_ = 0;
    }
  }

  double estimate() const override {
    return apply_boundary(predicted(last_t_), cb_.grid(), BoundaryPolicy::Wrap);
  }

 private:
  double predicted(int t) const { return phi_ref_ + velocity_ * (t - t_ref_); }

  const Codebook& cb_;
  BaselineConfig cfg_;
  double velocity_;
  ExhaustiveSearch search_;
  double phi_ref_ = 0.0;
  int t_ref_ = 0;
  int last_t_ = 0;
  int data_run_ = 0;
  int scan_step_ = -1;
  int scan_center_ = 0;
  std::array<double, 3> scan_powers_{};
  std::array<BeamId, 3> scan_beams_{};
};

inline std::unique_ptr<Tracker> make_tracker(const Codebook& cb, const MobilityModel& model,
                                             const BaselineConfig& cfg, double sigma_sq) {
  cfg.validate(cb.levels());
  switch (cfg.variant) {
    case BaselineKind::Ekf: return std::make_unique<EkfTracker>(cb, model, cfg, sigma_sq);
    case BaselineKind::PilotInsertion: return std::make_unique<PilotInsertionTracker>(cb, model, cfg);
    default: return std::make_unique<NeighborhoodScanTracker>(cb, model, cfg);
  }
}

}  // namespace beamtrack
