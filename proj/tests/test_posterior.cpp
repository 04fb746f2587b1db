#include "beamtrack/mobility.hpp"
#include "beamtrack/posterior.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace beamtrack;

namespace {

// Series form of the data density: (1/s2) exp(-(x/s2 + lambda/2)) sum_k (x lambda / 2 s2)^k / (k!)^2,
// summed term by term until the terms stop mattering.
double series_density(double x, double lambda, double s2, int max_terms = 400) {
  const double z = x * lambda / (2.0 * s2);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < max_terms; ++k) {
    term *= z / (double(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return std::exp(-(x / s2 + lambda / 2.0)) * sum / s2;
}

Posterior random_posterior(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> p(n);
  for (auto& x : p) x = u(rng);
  return Posterior(std::move(p)).normalized();
}

Beam random_beam(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g(0.0, 0.5);
  Beam b;
  b.first_bin = 0;
  b.width = n / 2;
  b.bin_gains.resize(n);
  for (auto& x : b.bin_gains) x = {g(rng), g(rng)};
  return b;
}

// Linear-domain Bayes rule with the same floor, written from scratch.
std::vector<double> brute_force_update(const Posterior& prior, const Observation& obs, const Beam& beam, double s2) {
  std::vector<double> out(prior.size());
  double z = 0.0;
  for (int i = 0; i < prior.size(); ++i) {
    double f;
    if (obs.is_pilot()) {
      f = std::exp(-std::norm(obs.pilot_value - beam.bin_gains[i]) / s2) / (kPi * s2);
    } else {
      f = series_density(obs.data_power, 2.0 * std::norm(beam.bin_gains[i]) / s2, s2);
    }
    out[i] = std::max(f, 1e-300) * prior[i];
    z += out[i];
  }
  for (auto& v : out) v /= z;
  return out;
}

}  // namespace

TEST(Posterior, ConstructionAndValidation) {
  EXPECT_THROW(Posterior(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(Posterior(std::vector<double>{0.5, -0.1}), std::invalid_argument);
  EXPECT_THROW(Posterior(std::vector<double>{0.5, std::nan("")}), std::invalid_argument);
  EXPECT_NEAR(Posterior::uniform(64).mass(), 1.0, 1e-15);
  EXPECT_NEAR(Posterior::uniform(64).entropy(), std::log(64.0), 1e-12);
}

TEST(PilotLikelihood, Examples) {
  const Complex g(0.3, -0.4);
  EXPECT_NEAR(pilot_likelihood(g, g, 1.0), 1.0 / kPi, 1e-15);
  EXPECT_NEAR(pilot_likelihood(g + 1.0, g, 1.0), std::exp(-1.0) / kPi, 1e-15);
  EXPECT_THROW(pilot_likelihood(g, g, 0.0), std::invalid_argument);
}

TEST(PilotLikelihood, IntegratesToOneOverThePlane) {
  // Simpson on [-10, 10]^2 around the mean.
  const Complex g(0.7, 0.2);
  const double s2 = 0.5;
  const int m = 800;
  const double h = 20.0 * std::sqrt(s2) / m;
  auto w = [&](int i) { return (i == 0 || i == m) ? 1.0 : (i % 2 ? 4.0 : 2.0); };
  double acc = 0.0;
  for (int i = 0; i <= m; ++i) {
    for (int j = 0; j <= m; ++j) {
      const Complex xi = g + Complex(-10.0 * std::sqrt(s2) + i * h, -10.0 * std::sqrt(s2) + j * h);
      acc += w(i) * w(j) * pilot_likelihood(xi, g, s2);
    }
  }
  EXPECT_NEAR(acc * h * h / 9.0, 1.0, 1e-6);
}

TEST(DataLikelihood, CentralCase) {
  EXPECT_NEAR(data_likelihood(0.0, Complex{}, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(data_likelihood(2.0, Complex{}, 1.0), std::exp(-2.0), 1e-15);
  EXPECT_THROW(data_likelihood(-1.0, Complex{}, 1.0), std::invalid_argument);
}

TEST(DataLikelihood, MatchesSeriesSummation) {
  // lambda = 2 |G|^2 / s2 = 2 with s2 = 1, x = 1; fifty terms of the series.
  EXPECT_NEAR(data_likelihood(1.0, Complex(1.0, 0.0), 1.0), series_density(1.0, 2.0, 1.0, 51), 1e-10);
  for (double s2 : {0.1, 1.0}) {
    for (double g2 : {0.03125, 0.25, 1.0}) {
      for (double x = 0.0; x <= 4.0; x += 0.05) {
        const double expect = series_density(x, 2.0 * g2 / s2, s2);
        EXPECT_NEAR(data_likelihood(x, std::sqrt(g2), s2), expect, 1e-10 * std::max(1.0, expect));
      }
    }
  }
}

TEST(DataLikelihood, LogPathSurvivesHighSnr) {
  const double v = log_data_likelihood(1.0, Complex(1.0, 0.0), 1e-6);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);  // density peaked near x = 1
  EXPECT_GE(data_likelihood(50.0, Complex(1.0, 0.0), 1e-6), kLikelihoodFloor);
}

TEST(LogBesselI0, AgreesWithLibraryAcrossBranchSwitch) {
  for (double x : {0.0, 1e-3, 0.5, 5.0, 29.9, 30.0, 30.1, 45.0, 100.0, 600.0}) {
    EXPECT_NEAR(log_bessel_i0(x), std::log(std::cyl_bessel_i(0.0, x)), 1e-13 * std::max(1.0, x)) << x;
  }
  EXPECT_TRUE(std::isfinite(log_bessel_i0(1e6)));
}

TEST(BayesUpdate, UninformativeObservationLeavesPrior) {
  std::mt19937_64 rng(1);
  const Posterior prior = random_posterior(rng, 64);
  Beam flat;
  flat.width = 32;
  flat.bin_gains.assign(64, Complex(0.4, 0.1));
  const Posterior a = bayes_update(prior, Observation::pilot({0.2, -0.3}), flat, 0.5);
  const Posterior b = bayes_update(prior, Observation::data(0.7), flat, 0.5);
  for (int i = 0; i < 64; ++i) {
    EXPECT_NEAR(a[i], prior[i], 1e-15);
    EXPECT_NEAR(b[i], prior[i], 1e-15);
  }
  EXPECT_EQ(a.phase(), PosteriorPhase::Updated);
}

TEST(BayesUpdate, TwoBinHandExample) {
  Beam b;
  b.first_bin = 0;
  b.width = 1;
  b.bin_gains = {Complex(1.0, 0.0), Complex(0.0, 0.0)};
  const Posterior out = bayes_update(Posterior::uniform(2), Observation::pilot({1.0, 0.0}), b, 1.0);
  EXPECT_NEAR(out[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(out[0], 0.7311, 1e-4);
}

TEST(BayesUpdate, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 0.7);
  std::exponential_distribution<double> e(2.0);
  for (int n : {4, 64}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Posterior prior = random_posterior(rng, n);
      const Beam beam = random_beam(rng, n);
      const double s2 = 0.05 + std::abs(g(rng));
      for (const Observation& obs : {Observation::pilot({g(rng), g(rng)}), Observation::data(e(rng))}) {
        const Posterior out = bayes_update(prior, obs, beam, s2);
        const auto expect = brute_force_update(prior, obs, beam, s2);
        for (int i = 0; i < n; ++i) ASSERT_NEAR(out[i], expect[i], 1e-12);
      }
    }
  }
}

TEST(BayesUpdate, StaysNormalizedUnderExtremeObservations) {
  std::mt19937_64 rng(3);
  const Beam beam = random_beam(rng, 64);
  Posterior p = Posterior::uniform(64);
  for (const Observation& obs : {Observation::pilot({1e3, -1e3}), Observation::data(1e4), Observation::data(0.0)}) {
    p = bayes_update(p, obs, beam, 1e-6);
    EXPECT_NEAR(p.mass(), 1.0, 1e-9);
    for (double v : p.probs()) EXPECT_GE(v, 0.0);
  }
}

TEST(BayesUpdate, ZeroPriorBinsStayZero) {
  std::mt19937_64 rng(4);
  std::vector<double> v(64, 0.0);
  v[3] = 0.5;
  v[40] = 0.5;
  const Posterior out = bayes_update(Posterior(v), Observation::pilot({0.3, 0.0}), random_beam(rng, 64), 0.1);
  for (int i = 0; i < 64; ++i) {
    if (i != 3 && i != 40) EXPECT_EQ(out[i], 0.0);
  }
  EXPECT_NEAR(out.mass(), 1.0, 1e-12);
}

TEST(BayesUpdate, PilotMovesMassTowardConsistentHypothesis) {
  const AngularGrid grid(-180.0, 0.0, 64);
  const Codebook cb(ArrayConfig{}, grid, CodebookMode::Ideal);
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Posterior prior = random_posterior(rng, 64);
    for (const Beam& b : cb.beams()) {
      const double before = coverage_probability(prior.probs(), b);
      const double hit = coverage_probability(
          bayes_update(prior, Observation::pilot({b.ideal_gain, 0.0}), b, 0.1).probs(), b);
      const double miss = coverage_probability(bayes_update(prior, Observation::pilot({}), b, 0.1).probs(), b);
      EXPECT_GT(hit, before);
      EXPECT_LT(miss, before);
    }
  }
}

TEST(BayesUpdate, ConstantLikelihoodThenPredictEqualsPredict) {
  const AngularGrid grid(-180.0, 0.0, 64);
  std::mt19937_64 rng(6);
  const Posterior prior = random_posterior(rng, 64);
  Beam flat;
  flat.width = 32;
  flat.bin_gains.assign(64, Complex(0.25, 0.0));
  const MobilityModel m = GaussianMotion{0.75};
  const Posterior a = predict(bayes_update(prior, Observation::data(0.3), flat, 0.1), m, grid);
  const Posterior b = predict(prior, m, grid);
  for (int i = 0; i < 64; ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(MapEstimate, Examples) {
  const AngularGrid grid(-180.0, 0.0, 64);
  EXPECT_DOUBLE_EQ(map_estimate(Posterior::point_mass(64, 7), grid), grid.center(7));
  EXPECT_DOUBLE_EQ(map_estimate(Posterior::uniform(64), grid), grid.center(0));
  EXPECT_EQ(map_bin(Posterior(std::vector<double>{0.1, 0.6, 0.3})), 1);
}
