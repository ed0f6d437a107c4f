#pragma once

#include <cstddef>
#include <vector>

#include "tlsspec/dynamics.hpp"

namespace tlsspec {

// Frequencies are cycle frequencies (omega / 2 pi) in MHz throughout. With
// linewidths in MHz, a coupling weight B in MHz/us makes the Lorentzian
// B * g / (d^2 + g^2) come out directly in 1/us; no 2 pi factor appears.

struct DeviceFrequencies {
  double omega_01 = 0.0;      // MHz
  double anharmonicity = 0.0; // MHz, negative for a transmon

  double omega_12() const { return omega_01 + anharmonicity; }
};

void validate(const DeviceFrequencies& device);

struct Tls {
  double coupling = 0.0;          // B_n, MHz/us
  double linewidth = 0.0;         // gamma_n, MHz
  std::vector<double> frequency;  // omega_n per epoch, MHz
};

struct TlsParameterSet {
  std::vector<Tls> tls;
  DecayRates background{0.0, 0.0};  // constant non-TLS floor, may be zero
  // Rate multiplier applied to the |2>->|1> channel. 1 uses the same B_n for
  // both transitions; 2 models the sqrt(2) larger matrix element.
  double matrix_element_ratio = 1.0;

  std::size_t epoch_count() const { return tls.empty() ? 0 : tls.front().frequency.size(); }
};

void validate(const TlsParameterSet& set);

/// Normalized Lorentzian shape g / ((probe - center)^2 + g^2), in 1/MHz.
double lorentzian_density(double center, double linewidth, double probe);

/// Rates from the TLS bath alone at `epoch`. Background is not included.
DecayRates transition_rates(const TlsParameterSet& set, const DeviceFrequencies& device,
                            std::size_t epoch);

/// transition_rates plus the set's constant background.
DecayRates rates_with_background(const TlsParameterSet& set, const DeviceFrequencies& device,
                                 std::size_t epoch);

// Same, with an explicit background overriding set.background. Accepts an
// empty TLS set, in which case the background alone is returned.
DecayRates rates_with_background(const TlsParameterSet& set, const DeviceFrequencies& device,
                                 const DecayRates& background, std::size_t epoch);

}  // namespace tlsspec
