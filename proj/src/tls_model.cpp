#include "tlsspec/tls_model.hpp"

#include <cmath>
#include <string>

#include "tlsspec/errors.hpp"

namespace tlsspec {

void validate(const DeviceFrequencies& device) {
  if (!std::isfinite(device.omega_01) || device.omega_01 <= 0.0) {
    throw InvalidParameter("omega_01 must be positive");
  }
  if (!std::isfinite(device.anharmonicity) || device.anharmonicity >= 0.0) {
    throw InvalidParameter("anharmonicity must be negative");
  }
  if (device.omega_12() <= 0.0) {
    throw InvalidParameter("omega_12 must be positive");
  }
}

void validate(const TlsParameterSet& set) {
  const std::size_t epochs = set.epoch_count();
  for (std::size_t n = 0; n < set.tls.size(); ++n) {
    const Tls& t = set.tls[n];
    if (!(t.coupling > 0.0) || !std::isfinite(t.coupling)) {
      throw InvalidParameter("TLS " + std::to_string(n) + ": coupling must be positive");
    }
    if (!(t.linewidth > 0.0) || !std::isfinite(t.linewidth)) {
      throw InvalidParameter("TLS " + std::to_string(n) + ": linewidth must be positive");
    }
    if (t.frequency.size() != epochs) {
      throw InvalidParameter("TLS " + std::to_string(n) + ": trajectory length mismatch");
    }
  }
  if (!(set.background.gamma_10 >= 0.0) || !(set.background.gamma_21 >= 0.0)) {
    throw InvalidParameter("background rates must be non-negative");
  }
  if (!(set.matrix_element_ratio > 0.0)) {
    throw InvalidParameter("matrix_element_ratio must be positive");
  }
}

double lorentzian_density(double center, double linewidth, double probe) {
  if (!(linewidth > 0.0)) {
    throw InvalidParameter("linewidth must be positive");
  }
  const double d = probe - center;
  return linewidth / (d * d + linewidth * linewidth);
}

namespace {

DecayRates tls_sum(const TlsParameterSet& set, const DeviceFrequencies& device, std::size_t epoch) {
  const double w01 = device.omega_01;
  const double w12 = device.omega_12();
  DecayRates r{0.0, 0.0};
  for (const Tls& t : set.tls) {
    if (epoch >= t.frequency.size()) {
      throw InvalidParameter("epoch index out of trajectory range");
    }
    const double w = t.frequency[epoch];
    r.gamma_10 += t.coupling * lorentzian_density(w, t.linewidth, w01);
    r.gamma_21 += set.matrix_element_ratio * t.coupling * lorentzian_density(w, t.linewidth, w12);
  }
  return r;
}

}  // namespace

DecayRates transition_rates(const TlsParameterSet& set, const DeviceFrequencies& device,
                            std::size_t epoch) {
  if (set.tls.empty()) {
    throw InvalidParameter("empty TLS set; supply a background rate instead");
  }
  return tls_sum(set, device, epoch);
}

DecayRates rates_with_background(const TlsParameterSet& set, const DeviceFrequencies& device,
                                 std::size_t epoch) {
  return rates_with_background(set, device, set.background, epoch);
}

DecayRates rates_with_background(const TlsParameterSet& set, const DeviceFrequencies& device,
                                 const DecayRates& background, std::size_t epoch) {
  if (!(background.gamma_10 >= 0.0) || !(background.gamma_21 >= 0.0)) {
    throw InvalidParameter("background rates must be non-negative");
  }
  DecayRates r = tls_sum(set, device, epoch);
  r.gamma_10 += background.gamma_10;
  r.gamma_21 += background.gamma_21;
  return r;
}

}  // namespace tlsspec
