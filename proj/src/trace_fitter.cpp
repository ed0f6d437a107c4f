#include "tlsspec/trace_fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlsspec/errors.hpp"

namespace tlsspec {

namespace {

// Least-squares slope of y against x; NaN with fewer than 3 points.
double regression_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  if (x.size() < 3) return std::numeric_limits<double>::quiet_NaN();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

// Solves ln(g/x)/(g-x) = t_peak for x; the left side decreases monotonically in x.
double rate_from_peak_time(double g, double t_peak) {
  auto peak = [g](double x) {
    const double d = g - x;
    return std::abs(d) < 1e-12 * g ? 1.0 / g : std::log(g / x) / d;
  };
  double lo = g * 1e-6, hi = g * 1e6;
  if (!(peak(lo) > t_peak && peak(hi) < t_peak)) return std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (peak(mid) > t_peak ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

std::vector<double> log_spaced_delays(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw InvalidParameter("invalid log-spaced grid");
  std::vector<double> d(n);
  const double r = std::log(hi / lo);
  for (int i = 0; i < n; ++i) d[i] = lo * std::exp(r * i / (n - 1));
  d.back() = hi;
  return d;
}

std::vector<double> default_delay_grid(double t1e_us, double t1f_us, int n) {
  return log_spaced_delays(t1f_us / 20.0, 4.0 * t1e_us, n);
}

DecayRates initial_guess(const PopulationTrace& trace) {
  const double fallback = trace.delays.empty() || !(trace.delays.back() > 0.0)
                              ? 1.0
                              : 1.0 / trace.delays.back();

  std::vector<double> t, y;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (trace.states[i].p2 > 0.05) {
      t.push_back(trace.delays[i]);
      y.push_back(std::log(trace.states[i].p2));
    }
  }
  double g21 = -regression_slope(t, y);
  if (!(g21 > 0.0) || !std::isfinite(g21)) g21 = fallback;

  std::size_t peak = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace.states[i].p1 > trace.states[peak].p1) peak = i;
  }
  t.clear();
  y.clear();
  for (std::size_t i = peak + 1; i < trace.size(); ++i) {
    if (trace.states[i].p1 > 0.02) {
      t.push_back(trace.delays[i]);
      y.push_back(std::log(trace.states[i].p1));
    }
  }
  double g10 = -regression_slope(t, y);
  if (!(g10 > 0.0) || !std::isfinite(g10)) {
    g10 = fallback;
  } else if (std::abs(g10 - g21) < 0.3 * g21 && peak > 0 && peak + 1 < trace.size()) {
    const double from_peak = rate_from_peak_time(g21, trace.delays[peak]);
    if (std::isfinite(from_peak) && from_peak > 0.0) g10 = from_peak;
  }
  return {g10, g21};
}

TraceFit fit_trace(const PopulationTrace& trace, const TraceFitOptions& options) {
  validate(trace);
  if (trace.size() < 5) throw InvalidInput("trace fit needs at least 5 delay points");
  if (options.weighting == Weighting::binomial && !trace.has_shots()) {
    throw InvalidInput("binomial weighting needs per-point shot counts");
  }

  const std::size_t n = trace.size();
  std::vector<double> weight(3 * n, 1.0);
  if (options.weighting == Weighting::binomial) {
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 3; ++k) {
        const double p = std::clamp(trace.states[i][k], 0.0, 1.0);
        const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(trace.shots[i]));
        weight[3 * i + k] = 1.0 / std::max(sigma, options.sigma_floor);
      }
    }
  }

  LeastSquaresProblem problem;
  problem.residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(3 * n);
    const DecayRates rates{x(0), x(1)};
    for (std::size_t i = 0; i < n; ++i) {
      const PopulationState m = populations_closed_form(rates, trace.delays[i]);
      for (int k = 0; k < 3; ++k) r(3 * i + k) = weight[3 * i + k] * (m[k] - trace.states[i][k]);
    }
    return r;
  };
  problem.lower = Eigen::Vector2d(options.rate_lower, options.rate_lower);
  problem.upper = Eigen::Vector2d(options.rate_upper, options.rate_upper);
  const DecayRates guess = initial_guess(trace);
  problem.initial = Eigen::Vector2d(guess.gamma_10, guess.gamma_21)
                        .cwiseMax(problem.lower)
                        .cwiseMin(problem.upper);

  const FitResult fit = levenberg_marquardt(problem, options.solver);

  TraceFit out;
  out.rates = {fit.parameters(0), fit.parameters(1)};
  out.t1e = 1.0 / out.rates.gamma_10;
  out.t1f = 1.0 / out.rates.gamma_21;
  out.residual_norm = fit.residual_norm;
  out.converged = fit.converged;
  out.iterations = fit.iterations;

  Eigen::Matrix2d cov = fit.covariance;
  if (trace.has_shots()) {
    // Sandwich estimate with the multinomial covariance of each delay.
    const Eigen::VectorXd r = problem.residual(fit.parameters);
    const Eigen::MatrixXd jac = finite_difference_jacobian(problem.residual, fit.parameters, r, problem.upper,
                                                           options.solver.fd_relative_step);
    const Eigen::Matrix3d m = options.mitigated_with.value_or(Eigen::Matrix3d::Identity());
    const Eigen::Matrix3d m_inv = m.inverse();
    Eigen::Matrix2d meat = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const PopulationState p = populations_closed_form(out.rates, trace.delays[i]);
      const Eigen::Vector3d q = m * Eigen::Vector3d(p.p0, p.p1, p.p2);
      Eigen::Matrix3d sigma = (Eigen::Matrix3d(q.asDiagonal()) - q * q.transpose()) / double(trace.shots[i]);
      sigma = m_inv * sigma * m_inv.transpose();
      const Eigen::Vector3d w(weight[3 * i], weight[3 * i + 1], weight[3 * i + 2]);
      sigma = w.asDiagonal() * sigma * w.asDiagonal();
      const Eigen::Matrix<double, 3, 2> ji = jac.middleRows(3 * i, 3);
      meat += ji.transpose() * sigma * ji;
    }
    cov = fit.covariance * meat * fit.covariance;
  } else {
    // Each triple of residuals sums to zero, leaving 2n independent ones.
    const double dof = std::max(1.0, 2.0 * static_cast<double>(n) - 2.0);
    cov *= fit.residual_norm * fit.residual_norm / dof;
  }
  out.stderr_gamma_10 = std::sqrt(std::max(0.0, cov(0, 0)));
  out.stderr_gamma_21 = std::sqrt(std::max(0.0, cov(1, 1)));
  out.stderr_t1e = out.stderr_gamma_10 / (out.rates.gamma_10 * out.rates.gamma_10);
  out.stderr_t1f = out.stderr_gamma_21 / (out.rates.gamma_21 * out.rates.gamma_21);
  return out;
}

}  // namespace tlsspec
