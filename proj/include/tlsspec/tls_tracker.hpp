#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tlsspec/dynamics.hpp"
#include "tlsspec/optimize.hpp"
#include "tlsspec/tls_model.hpp"

namespace tlsspec {

struct LifetimeSeries {
  std::vector<double> epochs_hr;
  std::vector<double> t1e;  // us
  std::vector<double> t1f;  // us
  std::vector<double> err_e;  // optional standard errors, us
  std::vector<double> err_f;

  std::size_t size() const { return epochs_hr.size(); }
  bool has_errors() const { return !err_e.empty(); }
};

void validate(const LifetimeSeries& series);

struct TrackerOptions {
  double band_margin_mhz = 200.0;  // search band [w12 - margin, w01 + margin]
  double grid_spacing_mhz = 0.5;   // order-1 coarse grid
  int grid_points_2d = 60;         // order-2 coarse grid per axis
  int max_outer_iterations = 50;
  double outer_tolerance = 1e-8;   // relative misfit change
  double tie_tolerance = 1e-9;     // near-equal per-epoch minima
  double drift_penalty = 0.0;      // weight on (w_{i+1} - w_i)^2, 1/MHz^2
  bool joint_polish = true;        // final LM over globals and all frequencies
  bool fit_background = false;
  DecayRates background{0.0, 0.0};
  double matrix_element_ratio = 1.0;
  double initial_linewidth = 10.0;  // MHz
  double linewidth_lower = 0.1;
  double linewidth_upper = 50.0;
  double relative_noise_floor = 0.01;  // score floor when the series has no errors
  int jobs = 1;
  SolverOptions solver{};
};

struct TrackerFit {
  int model_order = 1;
  TlsParameterSet parameters;
  std::vector<double> epochs_hr;
  std::vector<DecayRates> fitted_rates;
  double misfit = 0.0;  // norm of the relative rate residuals
  double information_score = 0.0;
  int parameter_count = 0;
  int residual_count = 0;
  bool converged = false;
  int outer_iterations = 0;
  std::vector<std::string> warnings;
  std::vector<std::pair<int, double>> candidate_scores;  // filled by select_model
};

/// Reconstructs TLS parameters from a lifetime series.
///
/// Alternates between per-epoch frequency solves with the globals held fixed
/// and a Levenberg-Marquardt update of the globals (B_n, gamma_n and, when
/// enabled, the background) with the frequencies held fixed. Residuals are
/// relative rate misfits 1 - Gamma_model * T_measured for both channels.
///
/// Per-epoch candidates whose misfit is within tie_tolerance of the best
/// are resolved in favour of the one closest to the previous epoch, which
/// removes the mirror ambiguity about w01 and w12 deterministically.
TrackerFit track_tls(const LifetimeSeries& series, const DeviceFrequencies& device, int order,
                     const TrackerOptions& options = {});

/// Pearson correlation of (t1e, t1f).
double lifetime_correlation(const LifetimeSeries& series);

// Sample variance floor used in the information score.
double noise_floor_variance(const LifetimeSeries& series, const TrackerOptions& options);

/// Fits orders 1 and 2 and keeps the lower BIC score. Both scores are
/// attached to the returned fit.
TrackerFit select_model(const LifetimeSeries& series, const DeviceFrequencies& device,
                        const TrackerOptions& options = {});

struct TrajectoryPoint {
  double t_hr = 0.0;
  double omega_mhz = 0.0;
  double gamma_mhz = 0.0;
};

std::vector<TrajectoryPoint> reconstruct_trajectory(const TrackerFit& fit, std::size_t tls_index);

// Sum of |w_{i+1} - w_i|.
double total_variation(const std::vector<double>& trajectory);

}  // namespace tlsspec
