#pragma once

// Reference computations used as test oracles. None of them call into the
// library code under test.

#include <array>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Pop = std::array<double, 3>;

// Right-hand side of the cascade rate equations with heating.
inline Pop cascade_rhs(const Pop& p, double g10, double g21, double h01 = 0.0, double h12 = 0.0) {
  return {g10 * p[1] - h01 * p[0],
          g21 * p[2] - g10 * p[1] + h01 * p[0] - h12 * p[1],
          -g21 * p[2] + h12 * p[1]};
}

// Classical RK4 from t = 0 to t with n equal steps.
inline Pop rk4(Pop p, double g10, double g21, double t, int n, double h01 = 0.0, double h12 = 0.0) {
  const double h = t / n;
  for (int i = 0; i < n; ++i) {
    const Pop k1 = cascade_rhs(p, g10, g21, h01, h12);
    Pop y{};
    for (int k = 0; k < 3; ++k) y[k] = p[k] + 0.5 * h * k1[k];
    const Pop k2 = cascade_rhs(y, g10, g21, h01, h12);
    for (int k = 0; k < 3; ++k) y[k] = p[k] + 0.5 * h * k2[k];
    const Pop k3 = cascade_rhs(y, g10, g21, h01, h12);
    for (int k = 0; k < 3; ++k) y[k] = p[k] + h * k3[k];
    const Pop k4 = cascade_rhs(y, g10, g21, h01, h12);
    for (int k = 0; k < 3; ++k) p[k] += h / 6.0 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
  }
  return p;
}

// RK4 from the |2> state with a step no larger than h_max.
inline Pop rk4_from_two(double g10, double g21, double t, double h_max) {
  if (t == 0.0) return {0.0, 0.0, 1.0};
  const int n = static_cast<int>(std::ceil(t / h_max));
  return rk4({0.0, 0.0, 1.0}, g10, g21, t, n);
}

// Gaussian elimination with partial pivoting on a dense 3x3 system.
inline Pop gauss_solve(std::array<std::array<double, 3>, 3> a, Pop b) {
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (int r = c + 1; r < 3; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 3; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  Pop x{};
  for (int r = 2; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < 3; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

// Stationary distribution of the 3-level generator with heating.
inline Pop steady_state(double g10, double g21, double h01, double h12) {
  // Replace the last balance equation with normalization.
  std::array<std::array<double, 3>, 3> a{{{-h01, g10, 0.0}, {h01, -g10 - h12, g21}, {1.0, 1.0, 1.0}}};
  return gauss_solve(a, {0.0, 0.0, 1.0});
}

inline double lorentzian(double center, double width, double probe) {
  const double d = probe - center;
  return width / (d * d + width * width);
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace oracle
