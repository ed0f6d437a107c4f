#include <cmath>

#include "doctest.h"
#include "tlsspec/errors.hpp"
#include "tlsspec/synthetic_lab.hpp"
#include "tlsspec/trace_fitter.hpp"

using namespace tlsspec;

namespace {

Scenario small_scenario() {
  Scenario s;
  s.name = "small";
  s.device = {4822.08, -280.37};
  TlsTruth t;
  t.coupling = 8.0;
  t.linewidth = 20.0;
  t.drift = {DriftKind::ornstein_uhlenbeck, 4650.0, 0.4, 7.0, std::nullopt, std::nullopt};
  s.tls.push_back(t);
  s.background = {1e-3, 1.25e-3};
  s.epochs = 6;
  s.delays_us = default_delay_grid(155.0, 64.0);
  s.shots = 300;
  s.readout.ideal = false;
  const double sep = 3.45;
  s.readout.blobs.blobs[0].mean = {0.0, 0.0};
  s.readout.blobs.blobs[1].mean = {sep, 0.0};
  s.readout.blobs.blobs[2].mean = {sep / 2, sep * std::sqrt(3.0) / 2};
  s.readout.calibration_shots = 20000;
  s.seed = 77;
  return s;
}

}  // namespace

TEST_CASE("static and zero-noise drifts stay put") {
  const auto st = realize_drift({DriftKind::static_, 4700.0, 0.0, 5.0, std::nullopt, std::nullopt}, 50, 0.25, 1);
  for (double w : st) CHECK(w == 4700.0);
  const auto rw = realize_drift({DriftKind::random_walk, 4700.0, 0.0, 0.0, std::nullopt, std::nullopt}, 50, 0.25, 1);
  for (double w : rw) CHECK(w == 4700.0);
  const auto slope = realize_drift({DriftKind::random_walk, 4700.0, 0.5, 0.0, std::nullopt, std::nullopt}, 5, 0.25, 1);
  CHECK(slope.back() == doctest::Approx(4702.0));
}

TEST_CASE("OU stationary variance") {
  const double theta = 0.4, dt = 0.25, sigma = 3.0;
  const DriftProcess ou{DriftKind::ornstein_uhlenbeck, 0.0, theta, sigma, 0.0, std::nullopt};
  const auto x = realize_drift(ou, 10000, dt, 42);
  double m = 0, v = 0;
  for (double xi : x) m += xi / x.size();
  for (double xi : x) v += (xi - m) * (xi - m) / (x.size() - 1);
  CHECK(theta * dt == doctest::Approx(0.1));
  CHECK(v == doctest::Approx(sigma * sigma / (2 * theta)).epsilon(0.1));
}

TEST_CASE("drift validation") {
  CHECK_THROWS_AS(validate(DriftProcess{DriftKind::random_walk, 1.0, 0.0, -1.0, std::nullopt, std::nullopt}),
                  InvalidParameter);
  CHECK_THROWS_AS(validate(DriftProcess{DriftKind::ornstein_uhlenbeck, 1.0, -0.1, 1.0, std::nullopt, std::nullopt}),
                  InvalidParameter);
}

TEST_CASE("scenario validation") {
  Scenario s = small_scenario();
  CHECK_NOTHROW(validate(s));
  s.epochs = 0;
  CHECK_THROWS_AS(validate(s), InvalidParameter);
  s = small_scenario();
  s.shots = -1;
  CHECK_THROWS_AS(validate(s), InvalidParameter);
  s = small_scenario();
  s.delays_us = {5.0, 1.0};
  CHECK_THROWS(validate(s));
}

TEST_CASE("trajectories are deterministic and seed isolated") {
  Scenario s = small_scenario();
  s.tls.push_back(s.tls[0]);
  s.tls[1].drift.start = 4600.0;
  const TlsParameterSet a = generate_trajectories(s);
  const TlsParameterSet b = generate_trajectories(s);
  CHECK(a.tls[0].frequency == b.tls[0].frequency);
  CHECK(a.tls[1].frequency == b.tls[1].frequency);
  CHECK(a.tls[0].frequency != a.tls[1].frequency);
  s.tls[1].drift.seed = 12345;
  const TlsParameterSet c = generate_trajectories(s);
  CHECK(c.tls[0].frequency == a.tls[0].frequency);
  CHECK(c.tls[1].frequency != a.tls[1].frequency);
}

TEST_CASE("experiments are deterministic and independent of workers") {
  const Scenario s = small_scenario();
  const Experiment a = synthesize_experiment(s, 1);
  const Experiment b = synthesize_experiment(s, 3);
  REQUIRE(a.traces.size() == s.epochs);
  CHECK(a.confusion.m == b.confusion.m);
  for (std::size_t e = 0; e < s.epochs; ++e) {
    for (std::size_t i = 0; i < s.delays_us.size(); ++i) {
      CHECK(a.traces[e].states[i].p0 == b.traces[e].states[i].p0);
      CHECK(a.traces[e].states[i].p1 == b.traces[e].states[i].p1);
    }
    CHECK(a.traces[e].shots.front() == s.shots);
  }
  CHECK(a.epochs_hr[1] == doctest::Approx(s.spacing_hr));
}

TEST_CASE("shot sink sees every shot in order") {
  Scenario s = small_scenario();
  s.epochs = 2;
  s.shots = 50;
  std::size_t count = 0, last_epoch = 0;
  bool ordered = true;
  const Experiment ex = synthesize_experiment(s, 4, [&](std::size_t e, const ShotRecord& r) {
    ordered = ordered && e >= last_epoch && r.assigned_state >= 0 && r.assigned_state <= 2;
    last_epoch = e;
    ++count;
  });
  CHECK(ordered);
  CHECK(count == 2 * s.delays_us.size() * 50);
  const Experiment plain = synthesize_experiment(s, 1);
  CHECK(plain.traces[1].states[3].p1 == ex.traces[1].states[3].p1);
}

TEST_CASE("ideal readout with many shots approaches the closed form") {
  Scenario s = small_scenario();
  s.readout.ideal = false;
  s.readout.blobs.blobs[1].mean = {1e3, 0.0};
  s.readout.blobs.blobs[2].mean = {0.0, 1e3};
  s.shots = 100000;
  s.epochs = 2;
  s.delays_us = {1.0, 30.0, 100.0, 300.0};
  const Experiment ex = synthesize_experiment(s, 2);
  CHECK(ex.confusion.m == Eigen::Matrix3d::Identity());
  for (std::size_t e = 0; e < s.epochs; ++e) {
    for (std::size_t i = 0; i < s.delays_us.size(); ++i) {
      const PopulationState c = populations_closed_form(ex.true_rates[e], s.delays_us[i]);
      for (int k = 0; k < 3; ++k) CHECK(std::abs(ex.traces[e].states[i][k] - c[k]) < 0.005);
    }
  }
}

TEST_CASE("exact mode and noiseless fitting close the oracle chain") {
  Scenario s = small_scenario();
  s.readout.ideal = true;
  s.shots = 0;
  const Experiment ex = synthesize_experiment(s);
  for (std::size_t e = 0; e < s.epochs; ++e) {
    const TraceFit fit = fit_trace(ex.traces[e]);
    CHECK(fit.rates.gamma_10 == doctest::Approx(ex.true_rates[e].gamma_10).epsilon(1e-6));
    CHECK(fit.rates.gamma_21 == doctest::Approx(ex.true_rates[e].gamma_21).epsilon(1e-6));
    const DecayRates r = rates_with_background(ex.truth, s.device, e);
    CHECK(r.gamma_10 == ex.true_rates[e].gamma_10);
  }
}
