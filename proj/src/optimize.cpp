#include "tlsspec/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlsspec/errors.hpp"

namespace tlsspec {

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double cutoff = 1e-14 * std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > cutoff ? 1.0 / ev(i) : 0.0;
  Eigen::MatrixXd p = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (p + p.transpose());
}

// Gradient with components zeroed where a bound blocks descent.
Eigen::VectorXd projected_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& x,
                                   const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if ((x(i) <= lo(i) && g(i) > 0.0) || (x(i) >= hi(i) && g(i) < 0.0)) pg(i) = 0.0;
  }
  return pg;
}

}  // namespace

void validate(const LeastSquaresProblem& p) {
  if (!p.residual) throw InvalidParameter("least-squares problem has no residual function");
  const auto n = p.initial.size();
  if (n == 0 || p.lower.size() != n || p.upper.size() != n) {
    throw InvalidParameter("bounds and initial guess must have equal non-zero length");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(p.lower(i) <= p.initial(i) && p.initial(i) <= p.upper(i))) {
      throw InvalidParameter("initial guess outside bounds at index " + std::to_string(i));
    }
  }
}

Eigen::MatrixXd finite_difference_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& r0, const Eigen::VectorXd& upper,
                                           double relative_step) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    double h = std::max(relative_step, relative_step * std::abs(x(j)));
    if (upper.size() == x.size() && x(j) + h > upper(j)) h = -h;
    xp(j) = x(j) + h;
    const double step = xp(j) - x(j);  // exactly representable difference
    jac.col(j) = (f(xp) - r0) / step;
    xp(j) = x(j);
  }
  return jac;
}

FitResult levenberg_marquardt(const LeastSquaresProblem& problem, const SolverOptions& opt) {
  validate(problem);
  const Eigen::VectorXd& lo = problem.lower;
  const Eigen::VectorXd& hi = problem.upper;

  FitResult result;
  Eigen::VectorXd x = problem.initial;
  Eigen::VectorXd r = problem.residual(x);
  if (!r.allFinite()) {
    throw Diverged("residual is not finite at the initial guess", to_std(x));
  }
  double cost = 0.5 * r.squaredNorm();

  auto jacobian = [&](const Eigen::VectorXd& at, const Eigen::VectorXd& r_at) {
    return problem.jacobian ? problem.jacobian(at)
                            : finite_difference_jacobian(problem.residual, at, r_at, hi,
                                                         opt.fd_relative_step);
  };

  Eigen::MatrixXd jac;
  double lambda = opt.initial_damping;
  Eigen::VectorXd scale = Eigen::VectorXd::Zero(x.size());

  if (cost == 0.0) {
    result.converged = true;
    result.stop_reason = "zero residual";
  }

  while (!result.converged && result.iterations < opt.max_iterations) {
    jac = jacobian(x, r);
    const Eigen::VectorXd g = jac.transpose() * r;
    if (projected_gradient(g, x, lo, hi).cwiseAbs().maxCoeff() <= opt.gtol) {
      result.converged = true;
      result.stop_reason = "gtol";
      break;
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    scale = scale.cwiseMax(jtj.diagonal());
    const Eigen::VectorXd diag = scale.cwiseMax(1e-300);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Eigen::VectorXd delta = a.ldlt().solve(-g);
      const Eigen::VectorXd x_new = clamp(x + delta, lo, hi);
      const double step_norm = (x_new - x).norm();
      if (step_norm <= opt.xtol * (x.norm() + opt.xtol)) {
        result.converged = true;
        result.stop_reason = "xtol";
        break;
      }
      const Eigen::VectorXd r_new = problem.residual(x_new);
      if (!r_new.allFinite()) {
        throw Diverged("residual became non-finite", to_std(x));
      }
      const double cost_new = 0.5 * r_new.squaredNorm();
      if (cost_new < cost) {
        const double rel_decrease = (cost - cost_new) / cost;
        x = x_new;
        r = r_new;
        cost = cost_new;
        ++result.iterations;
        accepted = true;
        lambda = std::max(lambda / 10.0, 1e-20);
        if (cost == 0.0) {
          result.converged = true;
          result.stop_reason = "zero residual";
        } else if (rel_decrease <= opt.ftol) {
          result.converged = true;
          result.stop_reason = "ftol";
        } else if (step_norm <= opt.xtol * (x.norm() + opt.xtol)) {
          result.converged = true;
          result.stop_reason = "xtol";
        }
      } else {
        lambda *= 10.0;
        if (lambda > 1e20) {
          // No descent direction left at working precision.
          result.converged = true;
          result.stop_reason = "xtol";
          break;
        }
      }
    }
  }
  if (!result.converged) result.stop_reason = "max_iterations";

  jac = jacobian(x, r);
  result.parameters = x;
  result.residual_norm = r.norm();
  result.residuals = to_std(r);
  result.covariance = pseudo_inverse(jac.transpose() * jac);
  return result;
}

namespace {

GridMinimum golden_section(const std::function<double(double)>& f, double a, double b, double tol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? GridMinimum{c, fc} : GridMinimum{d, fd};
}

std::vector<double> coarse_grid(const std::function<double(double)>& f, double lo, double hi, int n,
                                std::vector<double>& xs) {
  if (!(hi > lo)) throw InvalidParameter("grid interval must satisfy hi > lo");
  if (n < 3) throw InvalidParameter("coarse grid needs at least 3 points");
  xs.resize(n);
  std::vector<double> fs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = i == n - 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    fs[i] = f(xs[i]);
    if (!std::isfinite(fs[i])) {
      throw InvalidObjective("objective is not finite at " + std::to_string(xs[i]));
    }
  }
  return fs;
}

GridMinimum refine_at(const std::function<double(double)>& f, const std::vector<double>& xs,
                      const std::vector<double>& fs, int i, double tol) {
  const int n = static_cast<int>(xs.size());
  const double a = xs[std::max(i - 1, 0)];
  const double b = xs[std::min(i + 1, n - 1)];
  GridMinimum m = golden_section(f, a, b, tol);
  if (!(m.value <= fs[i])) m = {xs[i], fs[i]};
  return m;
}

}  // namespace

GridMinimum grid_refine_1d(const std::function<double(double)>& objective, double lo, double hi,
                           int coarse_points, double tolerance) {
  std::vector<double> xs;
  const std::vector<double> fs = coarse_grid(objective, lo, hi, coarse_points, xs);
  const int best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());
  return refine_at(objective, xs, fs, best, tolerance);
}

std::vector<GridMinimum> grid_local_minima(const std::function<double(double)>& objective, double lo,
                                           double hi, int coarse_points, double tolerance) {
  std::vector<double> xs;
  const std::vector<double> fs = coarse_grid(objective, lo, hi, coarse_points, xs);
  const int n = static_cast<int>(fs.size());
  std::vector<GridMinimum> minima;
  for (int i = 0; i < n; ++i) {
    const bool left_ok = i == 0 || fs[i] < fs[i - 1];
    const bool right_ok = i == n - 1 || fs[i] <= fs[i + 1];
    if (left_ok && right_ok) minima.push_back(refine_at(objective, xs, fs, i, tolerance));
  }
  std::sort(minima.begin(), minima.end(), [](const GridMinimum& a, const GridMinimum& b) {
    return a.value != b.value ? a.value < b.value : a.argmin < b.argmin;
  });
  return minima;
}

}  // namespace tlsspec
