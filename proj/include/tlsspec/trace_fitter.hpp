#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "tlsspec/dynamics.hpp"
#include "tlsspec/optimize.hpp"

namespace tlsspec {

enum class Weighting { uniform, binomial };

struct TraceFit {
  DecayRates rates;
  double t1e = 0.0;  // us, exactly 1 / gamma_10
  double t1f = 0.0;  // us, exactly 1 / gamma_21
  double stderr_gamma_10 = 0.0;
  double stderr_gamma_21 = 0.0;
  double stderr_t1e = 0.0;
  double stderr_t1f = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
};

struct TraceFitOptions {
  Weighting weighting = Weighting::uniform;
  double rate_lower = 1e-6;  // 1/us
  double rate_upper = 10.0;
  double sigma_floor = 1e-3;  // binomial weighting only
  // Assignment matrix the trace was mitigated with. Only used to propagate
  // shot noise into the standard errors.
  std::optional<Eigen::Matrix3d> mitigated_with;
  SolverOptions solver{};
};

/// Simultaneous fit of P0, P1 and P2 to the closed-form cascade.
///
/// P2 depends on gamma_21 alone, which pins the labelling of the two rates;
/// the fitter cannot return them swapped. With shot counts the standard
/// errors propagate multinomial noise at the fitted populations through the
/// normal equations; without them the covariance is scaled by the reduced
/// residual variance over 2n - 2 degrees of freedom. An unconverged solve is
/// reported through `converged`, not thrown.
TraceFit fit_trace(const PopulationTrace& trace, const TraceFitOptions& options = {});

/// Starting point for fit_trace from per-curve log-linear regressions.
///
/// gamma_21 comes from ln P2 on points with P2 > 0.05. gamma_10 comes from
/// ln P1 on the tail after the P1 maximum (P1 > 0.02); when that slope is
/// within 30% of gamma_21 the tail is dominated by the slower of two similar
/// rates, so gamma_10 is re-derived from the position of the P1 maximum.
/// Either falls back to 1 / (last delay) with fewer than 3 usable points.
DecayRates initial_guess(const PopulationTrace& trace);

// n log-spaced delays in [lo, hi].
std::vector<double> log_spaced_delays(double lo, double hi, int n);

// Synthetic-experiment grid: 30 points from T1f/20 to 4 T1e.
std::vector<double> default_delay_grid(double t1e_us, double t1f_us, int n = 30);

}  // namespace tlsspec
