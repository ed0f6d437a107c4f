#include "tlsspec/tls_tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "parallel.hpp"
#include "tlsspec/errors.hpp"

namespace tlsspec {

void validate(const LifetimeSeries& s) {
  const std::size_t n = s.epochs_hr.size();
  if (s.t1e.size() != n || s.t1f.size() != n) {
    throw InvalidInput("lifetime series columns differ in length");
  }
  if (s.has_errors() && (s.err_e.size() != n || s.err_f.size() != n)) {
    throw InvalidInput("lifetime series error columns differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(s.epochs_hr[i]) || (i > 0 && s.epochs_hr[i] <= s.epochs_hr[i - 1])) {
      throw InvalidInput("epoch timestamps must be strictly increasing");
    }
    if (!(s.t1e[i] > 0.0) || !(s.t1f[i] > 0.0) || !std::isfinite(s.t1e[i]) ||
        !std::isfinite(s.t1f[i])) {
      throw InvalidInput("lifetimes must be finite and positive (epoch " + std::to_string(i) + ")");
    }
    if (s.has_errors() && (!(s.err_e[i] >= 0.0) || !(s.err_f[i] >= 0.0))) {
      throw InvalidInput("standard errors must be non-negative");
    }
  }
}

double total_variation(const std::vector<double>& w) {
  double tv = 0.0;
  for (std::size_t i = 1; i < w.size(); ++i) tv += std::abs(w[i] - w[i - 1]);
  return tv;
}

namespace {

struct Globals {
  std::vector<double> coupling;
  std::vector<double> linewidth;
  DecayRates background{0.0, 0.0};
};

// Frequencies indexed [tls][epoch].
using Trajectories = std::vector<std::vector<double>>;

class Model {
 public:
  Model(const LifetimeSeries& s, const DeviceFrequencies& d, int order, const TrackerOptions& o)
      : series(s), device(d), order(order), opt(o), n_epochs(s.size()) {
    band_lo = d.omega_12() - o.band_margin_mhz;
    band_hi = d.omega_01 + o.band_margin_mhz;
  }

  DecayRates rates(const Globals& g, const double* w) const {
    DecayRates r = g.background;
    for (int n = 0; n < order; ++n) {
      const double b = g.coupling[n];
      const double lw = g.linewidth[n];
      const double d10 = device.omega_01 - w[n];
      const double d21 = device.omega_12() - w[n];
      r.gamma_10 += b * lw / (d10 * d10 + lw * lw);
      r.gamma_21 += opt.matrix_element_ratio * b * lw / (d21 * d21 + lw * lw);
    }
    return r;
  }

  // Relative rate misfit for both channels at epoch i.
  std::pair<double, double> residuals(const Globals& g, const double* w, std::size_t i) const {
    const DecayRates r = rates(g, w);
    return {1.0 - r.gamma_10 * series.t1e[i], 1.0 - r.gamma_21 * series.t1f[i]};
  }

  double data_cost(const Globals& g, const double* w, std::size_t i) const {
    const auto [a, b] = residuals(g, w, i);
    return a * a + b * b;
  }

  // Drift penalty of frequency `w` for TLS n at epoch i against fixed neighbours.
  double penalty(const Trajectories* neighbours, int n, std::size_t i, double w) const {
    if (opt.drift_penalty <= 0.0 || neighbours == nullptr) return 0.0;
    double p = 0.0;
    const auto& row = (*neighbours)[n];
    if (i > 0) p += (w - row[i - 1]) * (w - row[i - 1]);
    if (i + 1 < n_epochs) p += (row[i + 1] - w) * (row[i + 1] - w);
    return opt.drift_penalty * p;
  }

  double data_misfit(const Globals& g, const Trajectories& w) const {
    double sum = 0.0;
    std::vector<double> wi(order);
    for (std::size_t i = 0; i < n_epochs; ++i) {
      for (int n = 0; n < order; ++n) wi[n] = w[n][i];
      sum += data_cost(g, wi.data(), i);
    }
    return std::sqrt(sum);
  }

  double objective(const Globals& g, const Trajectories& w) const {
    const double m = data_misfit(g, w);
    double pen = 0.0;
    if (opt.drift_penalty > 0.0) {
      for (int n = 0; n < order; ++n) {
        for (std::size_t i = 1; i < n_epochs; ++i) {
          const double d = w[n][i] - w[n][i - 1];
          pen += opt.drift_penalty * d * d;
        }
      }
    }
    return m * m + pen;
  }

  int global_count() const { return 2 * order + (opt.fit_background ? 2 : 0); }

  Eigen::VectorXd pack(const Globals& g) const {
    Eigen::VectorXd x(global_count());
    for (int n = 0; n < order; ++n) {
      x(2 * n) = g.coupling[n];
      x(2 * n + 1) = g.linewidth[n];
    }
    if (opt.fit_background) {
      x(2 * order) = g.background.gamma_10;
      x(2 * order + 1) = g.background.gamma_21;
    }
    return x;
  }

  Globals unpack(const Eigen::VectorXd& x) const {
    Globals g;
    g.coupling.resize(order);
    g.linewidth.resize(order);
    for (int n = 0; n < order; ++n) {
      g.coupling[n] = x(2 * n);
      g.linewidth[n] = x(2 * n + 1);
    }
    g.background = opt.fit_background ? DecayRates{x(2 * order), x(2 * order + 1)} : opt.background;
    return g;
  }

  void global_bounds(Eigen::VectorXd& lo, Eigen::VectorXd& hi) const {
    lo.resize(global_count());
    hi.resize(global_count());
    double max_rate = 0.0;
    for (std::size_t i = 0; i < n_epochs; ++i) {
      max_rate = std::max({max_rate, 1.0 / series.t1e[i], 1.0 / series.t1f[i]});
    }
    for (int n = 0; n < order; ++n) {
      lo(2 * n) = 1e-12;
      hi(2 * n) = 1e8;
      lo(2 * n + 1) = opt.linewidth_lower;
      hi(2 * n + 1) = opt.linewidth_upper;
    }
    if (opt.fit_background) {
      lo(2 * order) = lo(2 * order + 1) = 0.0;
      hi(2 * order) = hi(2 * order + 1) = max_rate;
    }
  }

  const LifetimeSeries& series;
  const DeviceFrequencies& device;
  int order;
  const TrackerOptions& opt;
  std::size_t n_epochs;
  double band_lo = 0.0;
  double band_hi = 0.0;
};

struct Candidate {
  std::vector<double> w;
  double value = 0.0;
};

bool near_tie(double value, double best, double tol) { return value <= best + tol * (1.0 + best); }

double distance2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Candidates for one epoch, best first; only near-ties of the best are kept.
std::vector<Candidate> epoch_candidates_order1(const Model& m, const Globals& g,
                                               const Trajectories* prev, std::size_t i) {
  auto f = [&](double w) { return m.data_cost(g, &w, i) + m.penalty(prev, 0, i, w); };
  const int points =
      std::max(3, static_cast<int>(std::ceil((m.band_hi - m.band_lo) / m.opt.grid_spacing_mhz)) + 1);
  const auto minima = grid_local_minima(f, m.band_lo, m.band_hi, points);
  std::vector<Candidate> out;
  for (const auto& mn : minima) {
    if (!near_tie(mn.value, minima.front().value, m.opt.tie_tolerance)) break;
    out.push_back({{mn.argmin}, mn.value});
  }
  return out;
}

Candidate polish_order2(const Model& m, const Globals& g, const Trajectories* prev, std::size_t i,
                        const std::vector<double>& start) {
  LeastSquaresProblem p;
  const bool pen = m.opt.drift_penalty > 0.0 && prev != nullptr;
  const double sq = std::sqrt(std::max(m.opt.drift_penalty, 0.0));
  p.residual = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(pen ? 6 : 2);
    const auto [a, b] = m.residuals(g, x.data(), i);
    r(0) = a;
    r(1) = b;
    if (pen) {
      for (int n = 0; n < 2; ++n) {
        const auto& row = (*prev)[n];
        r(2 + 2 * n) = i > 0 ? sq * (x(n) - row[i - 1]) : 0.0;
        r(3 + 2 * n) = i + 1 < m.n_epochs ? sq * (row[i + 1] - x(n)) : 0.0;
      }
    }
    return r;
  };
  p.lower = Eigen::Vector2d::Constant(m.band_lo);
  p.upper = Eigen::Vector2d::Constant(m.band_hi);
  p.initial = Eigen::Vector2d(std::clamp(start[0], m.band_lo, m.band_hi),
                              std::clamp(start[1], m.band_lo, m.band_hi));
  SolverOptions so = m.opt.solver;
  so.max_iterations = 200;
  const FitResult fr = levenberg_marquardt(p, so);
  return {{fr.parameters(0), fr.parameters(1)}, fr.residual_norm * fr.residual_norm};
}

std::vector<Candidate> epoch_candidates_order2(const Model& m, const Globals& g,
                                               const Trajectories* prev, std::size_t i,
                                               bool symmetric_labels) {
  const int n = m.opt.grid_points_2d;
  std::vector<double> axis(n);
  for (int k = 0; k < n; ++k) {
    axis[k] = m.band_lo + (m.band_hi - m.band_lo) * static_cast<double>(k) / static_cast<double>(n - 1);
  }
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double w[2] = {axis[a], axis[b]};
      cost[a * n + b] = m.data_cost(g, w, i) + m.penalty(prev, 0, i, w[0]) + m.penalty(prev, 1, i, w[1]);
    }
  }
  std::vector<std::pair<double, int>> minima;
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double c = cost[a * n + b];
      bool is_min = true;
      for (int da = -1; da <= 1 && is_min; ++da) {
        for (int db = -1; db <= 1; ++db) {
          const int aa = a + da, bb = b + db;
          if ((da == 0 && db == 0) || aa < 0 || bb < 0 || aa >= n || bb >= n) continue;
          if (cost[aa * n + bb] < c) {
            is_min = false;
            break;
          }
        }
      }
      if (is_min) minima.emplace_back(c, a * n + b);
    }
  }
  std::sort(minima.begin(), minima.end());
  constexpr std::size_t kStarts = 6;
  std::vector<std::vector<double>> starts;
  for (std::size_t k = 0; k < std::min(kStarts, minima.size()); ++k) {
    starts.push_back({axis[minima[k].second / n], axis[minima[k].second % n]});
  }
  if (prev != nullptr) starts.push_back({(*prev)[0][i], (*prev)[1][i]});

  std::vector<Candidate> polished;
  for (const auto& s : starts) {
    Candidate c = polish_order2(m, g, prev, i, s);
    if (symmetric_labels && c.w[0] < c.w[1]) std::swap(c.w[0], c.w[1]);
    const bool duplicate = std::any_of(polished.begin(), polished.end(), [&](const Candidate& o) {
      return distance2(o.w, c.w) < 1e-12;
    });
    if (!duplicate) polished.push_back(std::move(c));
  }
  std::stable_sort(polished.begin(), polished.end(), [](const Candidate& a, const Candidate& b) {
    return a.value != b.value ? a.value < b.value : a.w < b.w;
  });
  std::vector<Candidate> out;
  for (auto& c : polished) {
    if (!near_tie(c.value, polished.front().value, m.opt.tie_tolerance)) break;
    out.push_back(std::move(c));
  }
  return out;
}

Trajectories solve_epochs(const Model& m, const Globals& g, const Trajectories* prev) {
  const std::size_t n_ep = m.n_epochs;
  const bool symmetric = m.order == 2 && g.coupling[0] == g.coupling[1] && g.linewidth[0] == g.linewidth[1];
  std::vector<std::vector<Candidate>> cands(n_ep);
  detail::parallel_for(n_ep, m.opt.jobs, [&](std::size_t i) {
    cands[i] = m.order == 1 ? epoch_candidates_order1(m, g, prev, i)
                            : epoch_candidates_order2(m, g, prev, i, symmetric);
  });

  // Sequential continuity pass; cheap and independent of the thread count.
  Trajectories w(m.order, std::vector<double>(n_ep));
  std::vector<double> ref;
  for (std::size_t i = 0; i < n_ep; ++i) {
    if (i == 0 && prev != nullptr) {
      ref.resize(m.order);
      for (int n = 0; n < m.order; ++n) ref[n] = (*prev)[n][0];
    }
    const auto& cs = cands[i];
    std::size_t pick = 0;
    if (!ref.empty()) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const double d = distance2(cs[k].w, ref);
        if (d < best) {
          best = d;
          pick = k;
        }
      }
    }
    ref = cs[pick].w;
    for (int n = 0; n < m.order; ++n) w[n][i] = ref[n];
  }
  return w;
}

Globals update_globals(const Model& m, const Globals& g, const Trajectories& w) {
  LeastSquaresProblem p;
  const std::size_t n_ep = m.n_epochs;
  p.residual = [&](const Eigen::VectorXd& x) {
    const Globals gx = m.unpack(x);
    Eigen::VectorXd r(2 * n_ep);
    std::vector<double> wi(m.order);
    for (std::size_t i = 0; i < n_ep; ++i) {
      for (int n = 0; n < m.order; ++n) wi[n] = w[n][i];
      const auto [a, b] = m.residuals(gx, wi.data(), i);
      r(2 * i) = a;
      r(2 * i + 1) = b;
    }
    return r;
  };
  m.global_bounds(p.lower, p.upper);
  p.initial = m.pack(g).cwiseMax(p.lower).cwiseMin(p.upper);
  return m.unpack(levenberg_marquardt(p, m.opt.solver).parameters);
}

void joint_polish(const Model& m, Globals& g, Trajectories& w) {
  const std::size_t n_ep = m.n_epochs;
  const int ng = m.global_count();
  const int nw = m.order * static_cast<int>(n_ep);
  const bool pen = m.opt.drift_penalty > 0.0;
  const double sq = std::sqrt(std::max(m.opt.drift_penalty, 0.0));
  const std::size_t pen_rows = pen ? m.order * (n_ep - 1) : 0;

  auto split = [&](const Eigen::VectorXd& x, Globals& gx, Trajectories& wx) {
    gx = m.unpack(x.head(ng));
    wx.assign(m.order, std::vector<double>(n_ep));
    for (int n = 0; n < m.order; ++n) {
      for (std::size_t i = 0; i < n_ep; ++i) wx[n][i] = x(ng + n * n_ep + i);
    }
  };

  LeastSquaresProblem p;
  p.residual = [&](const Eigen::VectorXd& x) {
    Globals gx;
    Trajectories wx;
    split(x, gx, wx);
    Eigen::VectorXd r(2 * n_ep + pen_rows);
    std::vector<double> wi(m.order);
    for (std::size_t i = 0; i < n_ep; ++i) {
      for (int n = 0; n < m.order; ++n) wi[n] = wx[n][i];
      const auto [a, b] = m.residuals(gx, wi.data(), i);
      r(2 * i) = a;
      r(2 * i + 1) = b;
    }
    std::size_t row = 2 * n_ep;
    if (pen) {
      for (int n = 0; n < m.order; ++n) {
        for (std::size_t i = 1; i < n_ep; ++i) r(row++) = sq * (wx[n][i] - wx[n][i - 1]);
      }
    }
    return r;
  };
  Eigen::VectorXd glo, ghi;
  m.global_bounds(glo, ghi);
  p.lower.resize(ng + nw);
  p.upper.resize(ng + nw);
  p.initial.resize(ng + nw);
  p.lower.head(ng) = glo;
  p.upper.head(ng) = ghi;
  p.lower.tail(nw).setConstant(m.band_lo);
  p.upper.tail(nw).setConstant(m.band_hi);
  p.initial.head(ng) = m.pack(g).cwiseMax(glo).cwiseMin(ghi);
  for (int n = 0; n < m.order; ++n) {
    for (std::size_t i = 0; i < n_ep; ++i) p.initial(ng + n * n_ep + i) = w[n][i];
  }
  SolverOptions so = m.opt.solver;
  so.max_iterations = 200;
  const FitResult fr = levenberg_marquardt(p, so);
  Globals gx;
  Trajectories wx;
  split(fr.parameters, gx, wx);
  if (m.objective(gx, wx) < m.objective(g, w)) {
    g = std::move(gx);
    w = std::move(wx);
  }
}

}  // namespace

double noise_floor_variance(const LifetimeSeries& s, const TrackerOptions& opt) {
  if (!s.has_errors() || s.size() == 0) return opt.relative_noise_floor * opt.relative_noise_floor;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double re = s.err_e[i] / s.t1e[i];
    const double rf = s.err_f[i] / s.t1f[i];
    sum += 0.5 * (re * re + rf * rf);
  }
  return sum / static_cast<double>(s.size());
}

TrackerFit track_tls(const LifetimeSeries& series, const DeviceFrequencies& device, int order,
                     const TrackerOptions& opt) {
  validate(series);
  validate(device);
  if (order != 1 && order != 2) throw InvalidParameter("model order must be 1 or 2");
  if (series.size() < 2) throw InvalidInput("TLS tracking needs at least 2 epochs");
  if (!(opt.initial_linewidth >= opt.linewidth_lower && opt.initial_linewidth <= opt.linewidth_upper)) {
    throw InvalidParameter("initial linewidth outside linewidth bounds");
  }

  TrackerFit fit;
  fit.model_order = order;
  fit.epochs_hr = series.epochs_hr;
  if (series.size() < 10) {
    fit.warnings.push_back("only " + std::to_string(series.size()) +
                           " epochs; at least 10 are recommended");
  }
  if (order == 2 && series.size() < 25) {
    fit.warnings.push_back("weak identifiability: order-2 fit with " + std::to_string(series.size()) +
                           " epochs (< 25)");
  }

  const Model m(series, device, order, opt);

  double max_rate = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    max_rate = std::max({max_rate, 1.0 / series.t1e[i], 1.0 / series.t1f[i]});
  }
  Globals g;
  g.coupling.assign(order, opt.initial_linewidth * max_rate);
  g.linewidth.assign(order, opt.initial_linewidth);
  g.background = opt.background;

  Globals best_g = g;
  Trajectories best_w;
  double best_obj = std::numeric_limits<double>::infinity();
  double last_obj = std::numeric_limits<double>::infinity();
  Trajectories w;
  for (int it = 1; it <= opt.max_outer_iterations; ++it) {
    w = solve_epochs(m, g, it == 1 ? nullptr : &w);
    g = update_globals(m, g, w);
    const double obj = m.objective(g, w);
    fit.outer_iterations = it;
    if (obj < best_obj) {
      best_obj = obj;
      best_g = g;
      best_w = w;
    }
    // Objective changes below 1e-15 are at the inner solver's resolution.
    if (obj < 1e-24 || (std::isfinite(last_obj) &&
                        std::abs(last_obj - obj) <= opt.outer_tolerance * last_obj + 1e-15)) {
      fit.converged = true;
      break;
    }
    last_obj = obj;
  }
  if (!fit.converged) fit.warnings.push_back("outer loop did not converge; returning best iterate");

  if (opt.joint_polish) joint_polish(m, best_g, best_w);

  fit.parameters.background = best_g.background;
  fit.parameters.matrix_element_ratio = opt.matrix_element_ratio;
  for (int n = 0; n < order; ++n) {
    fit.parameters.tls.push_back({best_g.coupling[n], best_g.linewidth[n], best_w[n]});
  }
  fit.fitted_rates.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    fit.fitted_rates[i] = rates_with_background(fit.parameters, device, i);
  }
  fit.misfit = m.data_misfit(best_g, best_w);
  fit.residual_count = static_cast<int>(2 * series.size());
  fit.parameter_count = m.global_count() + order * static_cast<int>(series.size());
  const double nres = fit.residual_count;
  const double variance = std::max(fit.misfit * fit.misfit / nres, noise_floor_variance(series, opt));
  fit.information_score = nres * std::log(variance) + fit.parameter_count * std::log(nres);
  return fit;
}

TrackerFit select_model(const LifetimeSeries& series, const DeviceFrequencies& device,
                        const TrackerOptions& options) {
  TrackerFit one = track_tls(series, device, 1, options);
  TrackerFit two = track_tls(series, device, 2, options);
  const std::vector<std::pair<int, double>> scores{{1, one.information_score},
                                                   {2, two.information_score}};
  TrackerFit& chosen = two.information_score < one.information_score ? two : one;
  chosen.candidate_scores = scores;
  return std::move(chosen);
}

double lifetime_correlation(const LifetimeSeries& s) {
  if (s.t1e.size() != s.t1f.size()) throw InvalidInput("lifetime columns differ in length");
  const std::size_t n = s.t1e.size();
  if (n < 3) throw InvalidInput("correlation needs at least 3 epochs");
  const double me = std::accumulate(s.t1e.begin(), s.t1e.end(), 0.0) / static_cast<double>(n);
  const double mf = std::accumulate(s.t1f.begin(), s.t1f.end(), 0.0) / static_cast<double>(n);
  double see = 0.0, sff = 0.0, sef = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double de = s.t1e[i] - me;
    const double df = s.t1f[i] - mf;
    see += de * de;
    sff += df * df;
    sef += de * df;
  }
  if (!(see > 0.0) || !(sff > 0.0)) {
    throw UndefinedCorrelation("correlation undefined: a lifetime channel has zero variance");
  }
  return std::clamp(sef / std::sqrt(see * sff), -1.0, 1.0);
}

std::vector<TrajectoryPoint> reconstruct_trajectory(const TrackerFit& fit, std::size_t tls_index) {
  if (tls_index >= fit.parameters.tls.size()) {
    throw InvalidParameter("TLS index " + std::to_string(tls_index) + " out of range");
  }
  const Tls& t = fit.parameters.tls[tls_index];
  std::vector<TrajectoryPoint> out(t.frequency.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = {i < fit.epochs_hr.size() ? fit.epochs_hr[i] : static_cast<double>(i), t.frequency[i],
              t.linewidth};
  }
  return out;
}

}  // namespace tlsspec
