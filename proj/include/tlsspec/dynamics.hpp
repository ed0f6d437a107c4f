#pragma once

#include <optional>
#include <span>
#include <vector>

namespace tlsspec {

/// Relaxation rates of the three-level cascade, in 1/us.
struct DecayRates {
  double gamma_10 = 0.0;  // |1> -> |0>
  double gamma_21 = 0.0;  // |2> -> |1>

  double t1e() const { return 1.0 / gamma_10; }
  double t1f() const { return 1.0 / gamma_21; }

  static DecayRates from_lifetimes(double t1e_us, double t1f_us) {
    return {1.0 / t1e_us, 1.0 / t1f_us};
  }
};

/// Upward (thermal) rates, in 1/us. Zero recovers pure relaxation.
struct HeatingRates {
  double gamma_01 = 0.0;
  double gamma_12 = 0.0;
};

struct PopulationState {
  double p0 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  double operator[](int k) const { return k == 0 ? p0 : (k == 1 ? p1 : p2); }
  double& operator[](int k) { return k == 0 ? p0 : (k == 1 ? p1 : p2); }
  double sum() const { return p0 + p1 + p2; }
};

struct PopulationTrace {
  std::vector<double> delays;  // us, strictly increasing
  std::vector<PopulationState> states;
  std::vector<long> shots;  // empty, or one positive count per delay

  std::size_t size() const { return delays.size(); }
  bool has_shots() const { return !shots.empty(); }
};

inline constexpr double kNormalizationTol = 1e-9;
inline constexpr double kDegenerateRateThreshold = 1e-9;

// Throws InvalidParameter unless both decay rates are finite and positive.
void validate(const DecayRates& rates);
void validate(const HeatingRates& heating);
void validate(const PopulationState& state, double tol = kNormalizationTol);
void validate(const PopulationTrace& trace);

/// Analytic solution of the cascade with P2(0) = 1.
///
/// Uses P1 = G21 (e^{-G10 t} - e^{-G21 t}) / (G21 - G10), which keeps the
/// three populations normalized. When the two rates agree to a relative
/// 1e-9 the limit P1 = G t e^{-G t} is used instead.
PopulationState populations_closed_form(const DecayRates& rates, double t_us);

/// Fixed-step RK4 integration of the rate equations including optional
/// heating terms. Returns the populations sampled at `delays`.
PopulationTrace integrate_rate_equations(const DecayRates& rates, const HeatingRates& heating,
                                         const PopulationState& initial,
                                         std::span<const double> delays);

// Internal step size used by integrate_rate_equations; exposed for tests.
double rk4_step_size(const DecayRates& rates, const HeatingRates& heating);

/// Gamma_21 / (2 Gamma_10); 1 for a harmonic ladder.
double bosonic_ratio(const DecayRates& rates);

// Time of the P1 maximum, ln(G21/G10)/(G21-G10), or 1/G in the degenerate limit.
double p1_peak_time(const DecayRates& rates);

}  // namespace tlsspec
