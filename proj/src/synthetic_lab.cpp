#include "tlsspec/synthetic_lab.hpp"

#include <cmath>
#include <random>
#include <string>

#include "parallel.hpp"
#include "tlsspec/errors.hpp"
#include "tlsspec/random.hpp"

namespace tlsspec {

void validate(const DriftProcess& d) {
  if (!std::isfinite(d.start) || !std::isfinite(d.sigma) || !std::isfinite(d.step_or_theta)) {
    throw InvalidParameter("drift parameters must be finite");
  }
  if (d.sigma < 0.0) throw InvalidParameter("drift sigma must be non-negative");
  if (d.kind == DriftKind::ornstein_uhlenbeck && d.step_or_theta < 0.0) {
    throw InvalidParameter("OU mean-reversion rate must be non-negative");
  }
}

std::vector<double> realize_drift(const DriftProcess& d, std::size_t epochs, double spacing_hr,
                                  std::uint64_t seed) {
  validate(d);
  std::vector<double> w(epochs, d.start);
  if (d.kind == DriftKind::static_ || epochs < 2) return w;
  Rng rng(seed);
  std::normal_distribution<double> normal;
  if (d.kind == DriftKind::random_walk) {
    for (std::size_t i = 1; i < epochs; ++i) w[i] = w[i - 1] + d.step_or_theta + d.sigma * normal(rng);
    return w;
  }
  const double mu = d.mean.value_or(d.start);
  const double theta = d.step_or_theta;
  const double decay = std::exp(-theta * spacing_hr);
  // Var of the exact update; reduces to sigma^2 dt as theta -> 0
  const double var = theta > 0.0 ? d.sigma * d.sigma * -std::expm1(-2.0 * theta * spacing_hr) / (2.0 * theta)
                                  : d.sigma * d.sigma * spacing_hr;
  const double sd = std::sqrt(var);
  for (std::size_t i = 1; i < epochs; ++i) w[i] = mu + (w[i - 1] - mu) * decay + sd * normal(rng);
  return w;
}

void validate(const Scenario& s) {
  validate(s.device);
  if (s.epochs < 1) throw InvalidParameter("scenario needs at least one epoch");
  if (!(s.spacing_hr > 0.0)) throw InvalidParameter("epoch spacing must be positive");
  if (s.shots < 0) throw InvalidParameter("shots must be non-negative (0 = exact populations)");
  if (s.delays_us.empty()) throw InvalidParameter("scenario needs a delay grid");
  PopulationTrace probe;
  probe.delays = s.delays_us;
  probe.states.resize(s.delays_us.size());
  validate(probe);
  for (const auto& t : s.tls) {
    validate(t.drift);
    if (!(t.coupling > 0.0) || !(t.linewidth > 0.0)) {
      throw InvalidParameter("TLS coupling and linewidth must be positive");
    }
  }
  if (!(s.background.gamma_10 >= 0.0) || !(s.background.gamma_21 >= 0.0)) {
    throw InvalidParameter("background rates must be non-negative");
  }
  if (s.tls.empty() && !(s.background.gamma_10 > 0.0 && s.background.gamma_21 > 0.0)) {
    throw InvalidParameter("scenario without TLSs needs a positive background");
  }
  if (!s.readout.ideal) {
    validate(s.readout.blobs);
    if (s.readout.calibration_shots < 1) throw InvalidParameter("calibration_shots must be >= 1");
  }
}

std::uint64_t tls_seed(const Scenario& s, std::size_t n) {
  return s.tls[n].drift.seed.value_or(derive_seed(s.seed, "tls", n));
}

TlsParameterSet generate_trajectories(const Scenario& s) {
  validate(s);
  TlsParameterSet set;
  set.background = s.background;
  set.matrix_element_ratio = s.matrix_element_ratio;
  for (std::size_t n = 0; n < s.tls.size(); ++n) {
    const TlsTruth& t = s.tls[n];
    set.tls.push_back({t.coupling, t.linewidth, realize_drift(t.drift, s.epochs, s.spacing_hr, tls_seed(s, n))});
  }
  return set;
}

PopulationTrace exact_trace(const DecayRates& rates, const std::vector<double>& delays) {
  PopulationTrace tr;
  tr.delays = delays;
  tr.states.reserve(delays.size());
  for (double t : delays) tr.states.push_back(populations_closed_form(rates, t));
  return tr;
}

namespace {

PopulationTrace sample_epoch(const Scenario& s, const ConfusionMatrix& cm,
                             const std::optional<Discriminator>& disc, const DecayRates& rates,
                             std::size_t epoch, const ShotSink& sink) {
  PopulationTrace ideal = exact_trace(rates, s.delays_us);
  if (s.shots == 0) {
    for (auto& st : ideal.states) st = apply_confusion(cm, st);
    return ideal;
  }
  Rng rng(derive_seed(s.seed, "epoch", epoch));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  PopulationTrace out;
  out.delays = s.delays_us;
  out.shots.assign(s.delays_us.size(), s.shots);
  out.states.reserve(s.delays_us.size());
  for (std::size_t d = 0; d < s.delays_us.size(); ++d) {
    const PopulationState& p = ideal.states[d];
    std::array<long, 3> counts{0, 0, 0};
    for (long rep = 0; rep < s.shots; ++rep) {
      const double u = uniform(rng);
      const int level = u < p.p0 ? 0 : (u < p.p0 + p.p1 ? 1 : 2);
      const int assigned = disc ? disc->classify(disc->sample(level, rng)) : level;
      ++counts[assigned];
      if (sink) sink(epoch, ShotRecord{s.delays_us[d], assigned, rep});
    }
    const double total = static_cast<double>(s.shots);
    out.states.push_back({counts[0] / total, counts[1] / total, counts[2] / total});
  }
  return out;
}

}  // namespace

Experiment synthesize_experiment(const Scenario& s, int jobs, const ShotSink& sink) {
  validate(s);
  Experiment ex;
  ex.truth = generate_trajectories(s);
  ex.epochs_hr.resize(s.epochs);
  for (std::size_t i = 0; i < s.epochs; ++i) ex.epochs_hr[i] = static_cast<double>(i) * s.spacing_hr;

  std::optional<Discriminator> disc;
  if (!s.readout.ideal) {
    disc.emplace(s.readout.blobs);
    ex.confusion = simulate_confusion_matrix(s.readout.blobs, s.readout.calibration_shots,
                                             derive_seed(s.seed, "calibration"));
  }

  ex.true_rates.resize(s.epochs);
  for (std::size_t i = 0; i < s.epochs; ++i) {
    ex.true_rates[i] = rates_with_background(ex.truth, s.device, i);
    validate(ex.true_rates[i]);
  }
  ex.traces.resize(s.epochs);
  detail::parallel_for(s.epochs, sink ? 1 : jobs, [&](std::size_t i) {
    ex.traces[i] = sample_epoch(s, ex.confusion, disc, ex.true_rates[i], i, sink);
  });
  return ex;
}

}  // namespace tlsspec
