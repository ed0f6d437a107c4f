#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "tlsspec/dynamics.hpp"
#include "tlsspec/errors.hpp"
#include "tlsspec/optimize.hpp"
#include "tlsspec/readout.hpp"
#include "tlsspec/synthetic_lab.hpp"
#include "tlsspec/tls_model.hpp"
#include "tlsspec/tls_tracker.hpp"
#include "tlsspec/trace_fitter.hpp"

namespace tlsspec::io {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

// Malformed or schema-violating document; `path` locates the offending field
// as a JSON pointer such as /tls/0/drift/kind.
class SchemaError : public InvalidInput {
 public:
  SchemaError(const std::string& path, const std::string& message)
      : InvalidInput(path + ": " + message), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Round-trip-exact decimal representation used in every CSV.
std::string format_double(double v);

// --- population traces: delay_us,p0,p1,p2,shots
void write_trace_csv(std::ostream& out, const PopulationTrace& trace);
PopulationTrace read_trace_csv(std::istream& in);
json trace_to_json(const PopulationTrace& trace);
PopulationTrace trace_from_json(const json& j);

// --- confusion matrix
json confusion_to_json(const ConfusionMatrix& cm);
ConfusionMatrix confusion_from_json(const json& j);

// --- shot records: delay_us,state,rep
void write_shot_header(std::ostream& out);
void write_shot_record(std::ostream& out, const ShotRecord& rec);

// --- TLS parameter sets: {tls: [{B, gamma_mhz, omega_mhz}], background: {gamma10, gamma21}}
json tls_set_to_json(const TlsParameterSet& set);
TlsParameterSet tls_set_from_json(const json& j);

json fit_result_to_json(const FitResult& fit);
json trace_fit_to_json(const TraceFit& fit);

// --- lifetime series: timestamp_hr,t1e_us,t1f_us[,err_e,err_f]
void write_series_csv(std::ostream& out, const LifetimeSeries& series,
                      const std::vector<bool>* converged = nullptr);
LifetimeSeries read_series_csv(std::istream& in);

json tracker_fit_to_json(const TrackerFit& fit);
void write_trajectory_csv(std::ostream& out, const TrackerFit& fit);
void write_correlation_csv(std::ostream& out, const LifetimeSeries& series, const TrackerFit& fit);

// --- scenarios and device configuration
Scenario scenario_from_json(const json& j);
json scenario_to_json(const Scenario& s);

struct DeviceConfig {
  DeviceFrequencies device;
  DecayRates background{0.0, 0.0};
};
// Accepts either a bare device object or a scenario document.
DeviceConfig device_config_from_json(const json& j);

json read_json_file(const std::filesystem::path& path);
void write_text_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace tlsspec::io
