#include "tlsspec/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "tlsspec/errors.hpp"

namespace tlsspec {

void validate(const DecayRates& rates) {
  if (!std::isfinite(rates.gamma_10) || !std::isfinite(rates.gamma_21) || rates.gamma_10 <= 0.0 ||
      rates.gamma_21 <= 0.0) {
    throw InvalidParameter("decay rates must be finite and positive (gamma_10=" +
                           std::to_string(rates.gamma_10) +
                           ", gamma_21=" + std::to_string(rates.gamma_21) + ")");
  }
}

void validate(const HeatingRates& heating) {
  if (!std::isfinite(heating.gamma_01) || !std::isfinite(heating.gamma_12) ||
      heating.gamma_01 < 0.0 || heating.gamma_12 < 0.0) {
    throw InvalidParameter("heating rates must be finite and non-negative");
  }
}

void validate(const PopulationState& s, double tol) {
  for (int k = 0; k < 3; ++k) {
    if (!std::isfinite(s[k]) || s[k] < -tol || s[k] > 1.0 + tol) {
      throw InvalidParameter("population component out of [0, 1]");
    }
  }
  if (std::abs(s.sum() - 1.0) > tol) {
    throw InvalidParameter("populations do not sum to 1");
  }
}

void validate(const PopulationTrace& trace) {
  if (trace.delays.size() != trace.states.size()) {
    throw InvalidInput("trace delays and states differ in length");
  }
  if (!trace.shots.empty() && trace.shots.size() != trace.delays.size()) {
    throw InvalidInput("trace shot counts differ in length from delays");
  }
  for (std::size_t i = 0; i < trace.delays.size(); ++i) {
    if (!std::isfinite(trace.delays[i]) || (i == 0 && trace.delays[i] < 0.0) ||
        (i > 0 && trace.delays[i] <= trace.delays[i - 1])) {
      throw InvalidInput("trace delays must be non-negative and strictly increasing");
    }
    if (!trace.shots.empty() && trace.shots[i] <= 0) {
      throw InvalidInput("shot counts must be positive");
    }
  }
}

PopulationState populations_closed_form(const DecayRates& rates, double t) {
  validate(rates);
  if (!std::isfinite(t) || t < 0.0) {
    throw InvalidParameter("delay must be finite and non-negative");
  }
  const double g10 = rates.gamma_10;
  const double g21 = rates.gamma_21;
  const double diff = g21 - g10;

  PopulationState s;
  s.p2 = std::exp(-g21 * t);
  if (std::abs(diff) / std::max(g10, g21) < kDegenerateRateThreshold) {
    s.p1 = g21 * t * std::exp(-g21 * t);
  } else {
    // e^{-a t} - e^{-b t} = -e^{-a t} expm1(-(b - a) t), free of cancellation
    s.p1 = g21 * std::exp(-g10 * t) * (-std::expm1(-diff * t)) / diff;
  }
  s.p0 = 1.0 - s.p1 - s.p2;
  if (s.p0 < 0.0) s.p0 = 0.0;  // only ever rounding noise at t ~ 0
  return s;
}

namespace {

using Vec3 = std::array<double, 3>;

Vec3 derivative(const DecayRates& r, const HeatingRates& h, const Vec3& p) {
  return {
      -h.gamma_01 * p[0] + r.gamma_10 * p[1],
      h.gamma_01 * p[0] - (r.gamma_10 + h.gamma_12) * p[1] + r.gamma_21 * p[2],
      h.gamma_12 * p[1] - r.gamma_21 * p[2],
  };
}

Vec3 rk4_step(const DecayRates& r, const HeatingRates& h, const Vec3& p, double dt) {
  auto axpy = [](const Vec3& x, double a, const Vec3& y) {
    return Vec3{x[0] + a * y[0], x[1] + a * y[1], x[2] + a * y[2]};
  };
  const Vec3 k1 = derivative(r, h, p);
  const Vec3 k2 = derivative(r, h, axpy(p, 0.5 * dt, k1));
  const Vec3 k3 = derivative(r, h, axpy(p, 0.5 * dt, k2));
  const Vec3 k4 = derivative(r, h, axpy(p, dt, k3));
  Vec3 out;
  for (int i = 0; i < 3; ++i) out[i] = p[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace

double rk4_step_size(const DecayRates& rates, const HeatingRates& heating) {
  const double fastest = std::max({rates.gamma_10, rates.gamma_21, heating.gamma_01, heating.gamma_12});
  return 1.0 / (200.0 * fastest);
}

PopulationTrace integrate_rate_equations(const DecayRates& rates, const HeatingRates& heating,
                                         const PopulationState& initial,
                                         std::span<const double> delays) {
  validate(rates);
  validate(heating);
  validate(initial);
  PopulationTrace trace;
  trace.delays.assign(delays.begin(), delays.end());
  trace.states.assign(delays.size(), initial);
  validate(trace);
  trace.states.clear();

  const double h = rk4_step_size(rates, heating);
  Vec3 p{initial.p0, initial.p1, initial.p2};
  double t = 0.0;
  trace.states.reserve(delays.size());
  for (double target : delays) {
    const double span = target - t;
    if (span > 0.0) {
      const auto steps = static_cast<long>(std::ceil(span / h));
      const double dt = span / static_cast<double>(steps);
      for (long i = 0; i < steps; ++i) p = rk4_step(rates, heating, p, dt);
      t = target;
    }
    trace.states.push_back({p[0], p[1], p[2]});
  }
  return trace;
}

double bosonic_ratio(const DecayRates& rates) {
  validate(rates);
  return rates.gamma_21 / (2.0 * rates.gamma_10);
}

double p1_peak_time(const DecayRates& rates) {
  validate(rates);
  const double diff = rates.gamma_21 - rates.gamma_10;
  if (std::abs(diff) / std::max(rates.gamma_10, rates.gamma_21) < kDegenerateRateThreshold) {
    return 1.0 / rates.gamma_21;
  }
  return std::log(rates.gamma_21 / rates.gamma_10) / diff;
}

}  // namespace tlsspec
