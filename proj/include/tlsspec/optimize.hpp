#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tlsspec {

using ResidualFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using JacobianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

struct LeastSquaresProblem {
  ResidualFn residual;
  JacobianFn jacobian;  // optional; forward differences when empty
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd initial;
};

// Shared tolerance record for every least-squares solve in the library.
struct SolverOptions {
  double gtol = 1e-10;  // max |J^T r| over free parameters
  double ftol = 1e-12;  // relative decrease of the sum of squares
  double xtol = 1e-12;  // relative step norm
  int max_iterations = 500;
  double initial_damping = 1e-3;
  double fd_relative_step = 1e-8;  // forward-difference step max(h, h |x|)
};

struct FitResult {
  Eigen::VectorXd parameters;
  double residual_norm = 0.0;
  Eigen::MatrixXd covariance;  // pseudo-inverse of J^T J at the solution
  bool converged = false;
  int iterations = 0;
  std::string stop_reason;
  std::vector<double> residuals;
};

void validate(const LeastSquaresProblem& problem);

/// Forward-difference Jacobian with step max(h, h |x_j|); steps backwards
/// when the forward point would leave the box.
Eigen::MatrixXd finite_difference_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                           const Eigen::VectorXd& r0, const Eigen::VectorXd& upper,
                                           double relative_step = 1e-8);

/// Box-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
///
/// Trial points are projected onto [lower, upper]. Iteration stops on the
/// first of gtol / ftol / xtol; hitting max_iterations returns a result with
/// converged = false. A non-finite residual throws Diverged carrying the last
/// accepted parameters.
FitResult levenberg_marquardt(const LeastSquaresProblem& problem, const SolverOptions& options = {});

struct GridMinimum {
  double argmin = 0.0;
  double value = 0.0;
};

/// Uniform coarse grid followed by golden-section refinement inside the
/// bracket of the best grid point. Throws InvalidObjective if any grid value
/// is non-finite.
GridMinimum grid_refine_1d(const std::function<double(double)>& objective, double lo, double hi,
                           int coarse_points, double tolerance = 1e-4);

// Every local minimum of the coarse grid, each refined as above, sorted by
// value (ties by position).
std::vector<GridMinimum> grid_local_minima(const std::function<double(double)>& objective, double lo,
                                           double hi, int coarse_points, double tolerance = 1e-4);

}  // namespace tlsspec
