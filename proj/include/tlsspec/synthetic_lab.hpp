#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tlsspec/dynamics.hpp"
#include "tlsspec/readout.hpp"
#include "tlsspec/tls_model.hpp"

namespace tlsspec {

enum class DriftKind { random_walk, ornstein_uhlenbeck, static_ };

struct DriftProcess {
  DriftKind kind = DriftKind::static_;
  double start = 0.0;          // MHz
  double step_or_theta = 0.0;  // random walk: deterministic drift per epoch, MHz; OU: theta, 1/hr
  double sigma = 0.0;          // random walk: MHz per epoch; OU: MHz / sqrt(hr)
  std::optional<double> mean;  // OU reversion level, defaults to start
  std::optional<std::uint64_t> seed;  // defaults to a stream derived from the master seed
};

void validate(const DriftProcess& drift);

/// Realizes a drift process over `epochs` samples spaced `spacing_hr` apart.
/// The OU process uses the exact discretization, with stationary variance
/// sigma^2 / (2 theta).
std::vector<double> realize_drift(const DriftProcess& drift, std::size_t epochs, double spacing_hr,
                                  std::uint64_t seed);

struct TlsTruth {
  DriftProcess drift;
  double coupling = 0.0;   // MHz/us
  double linewidth = 0.0;  // MHz
};

struct ReadoutConfig {
  bool ideal = true;  // perfect assignment; blobs unused
  IqBlobModel blobs;
  long calibration_shots = 100000;
};

struct Scenario {
  std::string name;
  DeviceFrequencies device;
  std::vector<TlsTruth> tls;
  DecayRates background{0.0, 0.0};
  double matrix_element_ratio = 1.0;
  std::size_t epochs = 1;
  double spacing_hr = 0.25;
  std::vector<double> delays_us;
  long shots = 2000;  // per delay; 0 evaluates populations exactly
  ReadoutConfig readout;
  std::uint64_t seed = 0;
};

void validate(const Scenario& scenario);

std::uint64_t tls_seed(const Scenario& scenario, std::size_t tls_index);

TlsParameterSet generate_trajectories(const Scenario& scenario);

struct Experiment {
  std::vector<PopulationTrace> traces;  // observed (readout-corrupted) populations
  ConfusionMatrix confusion;            // calibration estimate used for mitigation
  TlsParameterSet truth;
  std::vector<DecayRates> true_rates;
  std::vector<double> epochs_hr;
};

using ShotSink = std::function<void(std::size_t epoch, const ShotRecord&)>;

/// Simulates the whole protocol: TLS drift, per-epoch rates, closed-form
/// populations at each delay, shot sampling and IQ readout through the blob
/// model. Each shot draws its true level, then an IQ point from that level's
/// blob, which the maximum-likelihood discriminator assigns. Deterministic for
/// a fixed scenario and independent of `jobs`.
///
/// In exact mode (shots = 0) the observed populations are M p with M the
/// calibrated confusion matrix. `sink`, when set, receives every shot in
/// epoch order (this forces single-threaded sampling).
Experiment synthesize_experiment(const Scenario& scenario, int jobs = 1, const ShotSink& sink = {});

// Ideal populations for epoch rates at the scenario delays.
PopulationTrace exact_trace(const DecayRates& rates, const std::vector<double>& delays);

}  // namespace tlsspec
