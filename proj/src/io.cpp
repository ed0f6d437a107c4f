#include "tlsspec/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "tlsspec/errors.hpp"

namespace tlsspec::io {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw InvalidInput(where + ": not a number: '" + s + "'");
  }
  return v;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    if (t.header.empty()) {
      t.header = split_csv_line(line);
    } else {
      t.rows.push_back(split_csv_line(line));
    }
  }
  if (t.header.empty()) throw InvalidInput("CSV has no header");
  return t;
}

int require_column(const CsvTable& t, const std::string& name) {
  const int c = t.column(name);
  if (c < 0) throw InvalidInput("CSV is missing column '" + name + "'");
  return c;
}

std::string cell(const CsvTable& t, std::size_t row, int col) {
  if (col >= static_cast<int>(t.rows[row].size())) {
    throw InvalidInput("CSV row " + std::to_string(row + 1) + " is too short");
  }
  return t.rows[row][col];
}

// JSON helpers reporting the pointer path of the failing field.
const json& field(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "/" + key, "missing required field");
  return *it;
}

double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

double number_field(const json& j, const std::string& path, const char* key) {
  return number(field(j, path, key), path + "/" + key);
}

double number_or(const json& j, const std::string& path, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  return number_field(j, path, key);
}

std::vector<double> number_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(number(j[i], path + "/" + std::to_string(i)));
  return v;
}

std::uint64_t seed_value(const json& j, const std::string& path) {
  if (!j.is_number_integer() || (j.is_number_integer() && !j.is_number_unsigned() && j.get<long long>() < 0)) {
    throw SchemaError(path, "expected a non-negative integer seed");
  }
  return j.get<std::uint64_t>();
}

void check_schema_version(const json& j, const std::string& path) {
  if (j.contains("schema_version")) {
    const json& v = j["schema_version"];
    if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
      throw SchemaError(path + "/schema_version",
                        "unsupported schema version (expected " + std::to_string(kSchemaVersion) + ")");
    }
  }
}

json rates_json(const DecayRates& r) { return {{"gamma10", r.gamma_10}, {"gamma21", r.gamma_21}}; }

DecayRates rates_from(const json& j, const std::string& path) {
  return {number_field(j, path, "gamma10"), number_field(j, path, "gamma21")};
}

}  // namespace

void write_trace_csv(std::ostream& out, const PopulationTrace& tr) {
  out << "delay_us,p0,p1,p2,shots\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    const auto& s = tr.states[i];
    out << format_double(tr.delays[i]) << ',' << format_double(s.p0) << ',' << format_double(s.p1)
        << ',' << format_double(s.p2) << ',';
    if (tr.has_shots()) out << tr.shots[i];
    out << '\n';
  }
}

PopulationTrace read_trace_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const int cd = require_column(t, "delay_us");
  const int c0 = require_column(t, "p0");
  const int c1 = require_column(t, "p1");
  const int c2 = require_column(t, "p2");
  const int cs = t.column("shots");
  PopulationTrace tr;
  bool any_shots = false;
  std::vector<long> shots;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = "trace row " + std::to_string(r + 1);
    tr.delays.push_back(parse_double(cell(t, r, cd), where));
    tr.states.push_back({parse_double(cell(t, r, c0), where), parse_double(cell(t, r, c1), where),
                         parse_double(cell(t, r, c2), where)});
    if (cs >= 0 && cs < static_cast<int>(t.rows[r].size()) && !t.rows[r][cs].empty()) {
      shots.push_back(static_cast<long>(parse_double(t.rows[r][cs], where)));
      any_shots = true;
    } else {
      shots.push_back(0);
    }
  }
  if (any_shots) tr.shots = shots;
  validate(tr);
  return tr;
}

json trace_to_json(const PopulationTrace& tr) {
  json j{{"schema_version", kSchemaVersion}, {"delays_us", tr.delays}};
  std::vector<double> p0, p1, p2;
  for (const auto& s : tr.states) {
    p0.push_back(s.p0);
    p1.push_back(s.p1);
    p2.push_back(s.p2);
  }
  j["p0"] = p0;
  j["p1"] = p1;
  j["p2"] = p2;
  if (tr.has_shots()) j["shots"] = tr.shots;
  return j;
}

PopulationTrace trace_from_json(const json& j) {
  check_schema_version(j, "");
  PopulationTrace tr;
  tr.delays = number_array(field(j, "", "delays_us"), "/delays_us");
  const auto p0 = number_array(field(j, "", "p0"), "/p0");
  const auto p1 = number_array(field(j, "", "p1"), "/p1");
  const auto p2 = number_array(field(j, "", "p2"), "/p2");
  if (p0.size() != tr.delays.size() || p1.size() != tr.delays.size() || p2.size() != tr.delays.size()) {
    throw SchemaError("", "population arrays differ in length from delays_us");
  }
  for (std::size_t i = 0; i < p0.size(); ++i) tr.states.push_back({p0[i], p1[i], p2[i]});
  if (j.contains("shots")) {
    for (double s : number_array(j["shots"], "/shots")) tr.shots.push_back(static_cast<long>(s));
  }
  validate(tr);
  return tr;
}

json confusion_to_json(const ConfusionMatrix& cm) {
  std::vector<double> flat;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) flat.push_back(cm.m(r, c));
  }
  return {{"schema_version", kSchemaVersion},
          {"matrix_row_major", flat},
          {"fidelity", cm.fidelity()},
          {"condition_number", cm.condition_number()}};
}

ConfusionMatrix confusion_from_json(const json& j) {
  check_schema_version(j, "");
  const auto flat = number_array(field(j, "", "matrix_row_major"), "/matrix_row_major");
  if (flat.size() != 9) throw SchemaError("/matrix_row_major", "expected 9 entries");
  ConfusionMatrix cm;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) cm.m(r, c) = flat[3 * r + c];
  }
  try {
    validate(cm, 1e-9);
  } catch (const InvalidParameter& e) {
    throw SchemaError("/matrix_row_major", e.what());
  }
  return cm;
}

void write_shot_header(std::ostream& out) { out << "delay_us,state,rep\n"; }

void write_shot_record(std::ostream& out, const ShotRecord& rec) {
  out << format_double(rec.delay_us) << ',' << rec.assigned_state << ',' << rec.repetition << '\n';
}

json tls_set_to_json(const TlsParameterSet& set) {
  json tls = json::array();
  for (const Tls& t : set.tls) {
    tls.push_back({{"B", t.coupling}, {"gamma_mhz", t.linewidth}, {"omega_mhz", t.frequency}});
  }
  return {{"schema_version", kSchemaVersion},
          {"tls", tls},
          {"background", rates_json(set.background)},
          {"matrix_element_ratio", set.matrix_element_ratio}};
}

TlsParameterSet tls_set_from_json(const json& j) {
  check_schema_version(j, "");
  TlsParameterSet set;
  const json& tls = field(j, "", "tls");
  if (!tls.is_array()) throw SchemaError("/tls", "expected an array");
  for (std::size_t n = 0; n < tls.size(); ++n) {
    const std::string p = "/tls/" + std::to_string(n);
    set.tls.push_back({number_field(tls[n], p, "B"), number_field(tls[n], p, "gamma_mhz"),
                       number_array(field(tls[n], p, "omega_mhz"), p + "/omega_mhz")});
  }
  if (j.contains("background")) set.background = rates_from(j["background"], "/background");
  set.matrix_element_ratio = number_or(j, "", "matrix_element_ratio", 1.0);
  try {
    validate(set);
  } catch (const InvalidParameter& e) {
    throw SchemaError("/tls", e.what());
  }
  return set;
}

json fit_result_to_json(const FitResult& fit) {
  std::vector<double> params(fit.parameters.data(), fit.parameters.data() + fit.parameters.size());
  json cov = json::array();
  for (Eigen::Index r = 0; r < fit.covariance.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < fit.covariance.cols(); ++c) row.push_back(fit.covariance(r, c));
    cov.push_back(row);
  }
  return {{"parameters", params},     {"residual_norm", fit.residual_norm},
          {"covariance", cov},        {"converged", fit.converged},
          {"iterations", fit.iterations}, {"stop_reason", fit.stop_reason}};
}

json trace_fit_to_json(const TraceFit& f) {
  return {{"t1e_us", f.t1e},
          {"t1f_us", f.t1f},
          {"gamma10", f.rates.gamma_10},
          {"gamma21", f.rates.gamma_21},
          {"stderr_t1e", f.stderr_t1e},
          {"stderr_t1f", f.stderr_t1f},
          {"residual_norm", f.residual_norm},
          {"converged", f.converged}};
}

void write_series_csv(std::ostream& out, const LifetimeSeries& s, const std::vector<bool>* converged) {
  out << "timestamp_hr,t1e_us,t1f_us";
  if (s.has_errors()) out << ",err_e,err_f";
  if (converged) out << ",converged";
  out << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_double(s.epochs_hr[i]) << ',' << format_double(s.t1e[i]) << ','
        << format_double(s.t1f[i]);
    if (s.has_errors()) out << ',' << format_double(s.err_e[i]) << ',' << format_double(s.err_f[i]);
    if (converged) out << ',' << ((*converged)[i] ? 1 : 0);
    out << '\n';
  }
}

LifetimeSeries read_series_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const int ct = require_column(t, "timestamp_hr");
  const int ce = require_column(t, "t1e_us");
  const int cf = require_column(t, "t1f_us");
  const int ee = t.column("err_e");
  const int ef = t.column("err_f");
  LifetimeSeries s;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = "series row " + std::to_string(r + 1);
    s.epochs_hr.push_back(parse_double(cell(t, r, ct), where));
    s.t1e.push_back(parse_double(cell(t, r, ce), where));
    s.t1f.push_back(parse_double(cell(t, r, cf), where));
    if (ee >= 0 && ef >= 0) {
      s.err_e.push_back(parse_double(cell(t, r, ee), where));
      s.err_f.push_back(parse_double(cell(t, r, ef), where));
    }
  }
  validate(s);
  return s;
}

json tracker_fit_to_json(const TrackerFit& f) {
  json fitted = json::array();
  for (const auto& r : f.fitted_rates) fitted.push_back(rates_json(r));
  json scores = json::object();
  for (const auto& [order, score] : f.candidate_scores) scores[std::to_string(order)] = score;
  return {{"schema_version", kSchemaVersion},
          {"model_order", f.model_order},
          {"parameters", tls_set_to_json(f.parameters)},
          {"epochs_hr", f.epochs_hr},
          {"fitted_rates", fitted},
          {"misfit", f.misfit},
          {"information_score", f.information_score},
          {"parameter_count", f.parameter_count},
          {"residual_count", f.residual_count},
          {"converged", f.converged},
          {"outer_iterations", f.outer_iterations},
          {"warnings", f.warnings},
          {"candidate_scores", scores}};
}

void write_trajectory_csv(std::ostream& out, const TrackerFit& fit) {
  out << "tls,t_hr,omega_mhz,gamma_mhz\n";
  for (std::size_t n = 0; n < fit.parameters.tls.size(); ++n) {
    for (const auto& p : reconstruct_trajectory(fit, n)) {
      out << n << ',' << format_double(p.t_hr) << ',' << format_double(p.omega_mhz) << ','
          << format_double(p.gamma_mhz) << '\n';
    }
  }
}

void write_correlation_csv(std::ostream& out, const LifetimeSeries& s, const TrackerFit& fit) {
  out << "t1e_us,t1f_us,t1e_fit_us,t1f_fit_us\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_double(s.t1e[i]) << ',' << format_double(s.t1f[i]) << ','
        << format_double(fit.fitted_rates[i].t1e()) << ',' << format_double(fit.fitted_rates[i].t1f())
        << '\n';
  }
}

namespace {

DriftProcess drift_from(const json& j, const std::string& path) {
  DriftProcess d;
  const json& kind = field(j, path, "kind");
  if (!kind.is_string()) throw SchemaError(path + "/kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "static") {
    d.kind = DriftKind::static_;
  } else if (k == "random_walk") {
    d.kind = DriftKind::random_walk;
    d.step_or_theta = number_or(j, path, "step_mhz", 0.0);
  } else if (k == "ornstein_uhlenbeck") {
    d.kind = DriftKind::ornstein_uhlenbeck;
    d.step_or_theta = number_field(j, path, "theta_per_hr");
  } else {
    throw SchemaError(path + "/kind", "unknown drift kind '" + k + "'");
  }
  d.start = number_field(j, path, "start_mhz");
  d.sigma = number_or(j, path, "sigma_mhz", 0.0);
  if (j.contains("mean_mhz")) d.mean = number_field(j, path, "mean_mhz");
  if (j.contains("seed")) d.seed = seed_value(j["seed"], path + "/seed");
  try {
    validate(d);
  } catch (const InvalidParameter& e) {
    throw SchemaError(path, e.what());
  }
  return d;
}

json drift_to_json(const DriftProcess& d) {
  json j;
  switch (d.kind) {
    case DriftKind::static_:
      j["kind"] = "static";
      break;
    case DriftKind::random_walk:
      j["kind"] = "random_walk";
      j["step_mhz"] = d.step_or_theta;
      break;
    case DriftKind::ornstein_uhlenbeck:
      j["kind"] = "ornstein_uhlenbeck";
      j["theta_per_hr"] = d.step_or_theta;
      break;
  }
  j["start_mhz"] = d.start;
  j["sigma_mhz"] = d.sigma;
  if (d.mean) j["mean_mhz"] = *d.mean;
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

DeviceFrequencies device_from(const json& j, const std::string& path) {
  DeviceFrequencies d{number_field(j, path, "omega_01_mhz"), number_field(j, path, "anharmonicity_mhz")};
  try {
    validate(d);
  } catch (const InvalidParameter& e) {
    throw SchemaError(path, e.what());
  }
  return d;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "scenario must be a JSON object");
  check_schema_version(j, "");
  Scenario s;
  if (j.contains("name")) s.name = j["name"].is_string() ? j["name"].get<std::string>() : "";
  s.device = device_from(field(j, "", "device"), "/device");
  if (j.contains("background")) s.background = rates_from(j["background"], "/background");
  s.matrix_element_ratio = number_or(j, "", "matrix_element_ratio", 1.0);
  if (!(s.matrix_element_ratio > 0.0)) throw SchemaError("/matrix_element_ratio", "must be positive");

  const json& tls = field(j, "", "tls");
  if (!tls.is_array()) throw SchemaError("/tls", "expected an array");
  for (std::size_t n = 0; n < tls.size(); ++n) {
    const std::string p = "/tls/" + std::to_string(n);
    TlsTruth t;
    t.coupling = number_field(tls[n], p, "B");
    t.linewidth = number_field(tls[n], p, "gamma_mhz");
    if (!(t.coupling > 0.0)) throw SchemaError(p + "/B", "must be positive");
    if (!(t.linewidth > 0.0)) throw SchemaError(p + "/gamma_mhz", "must be positive");
    t.drift = drift_from(field(tls[n], p, "drift"), p + "/drift");
    s.tls.push_back(t);
  }

  const json& ep = field(j, "", "epochs");
  const double count = number_field(ep, "/epochs", "count");
  if (count < 1 || count != std::floor(count)) throw SchemaError("/epochs/count", "must be a positive integer");
  s.epochs = static_cast<std::size_t>(count);
  s.spacing_hr = number_or(ep, "/epochs", "spacing_hr", 0.25);
  if (!(s.spacing_hr > 0.0)) throw SchemaError("/epochs/spacing_hr", "must be positive");

  const json& dl = field(j, "", "delays_us");
  if (dl.is_array()) {
    s.delays_us = number_array(dl, "/delays_us");
  } else {
    const double lo = number_field(dl, "/delays_us", "log_min");
    const double hi = number_field(dl, "/delays_us", "log_max");
    const double n = number_field(dl, "/delays_us", "count");
    if (!(lo > 0.0) || !(hi > lo) || n < 2) throw SchemaError("/delays_us", "invalid log-spaced grid");
    s.delays_us = log_spaced_delays(lo, hi, static_cast<int>(n));
  }
  PopulationTrace probe;
  probe.delays = s.delays_us;
  probe.states.resize(s.delays_us.size());
  try {
    validate(probe);
  } catch (const InvalidInput& e) {
    throw SchemaError("/delays_us", e.what());
  }

  const double shots = number_or(j, "", "shots_per_delay", 2000);
  if (shots < 0 || shots != std::floor(shots)) throw SchemaError("/shots_per_delay", "must be a non-negative integer");
  s.shots = static_cast<long>(shots);

  if (j.contains("readout")) {
    const json& ro = j["readout"];
    const bool ideal = ro.contains("ideal") && ro["ideal"].is_boolean() && ro["ideal"].get<bool>();
    s.readout.ideal = ideal || !ro.contains("blobs");
    s.readout.calibration_shots = static_cast<long>(number_or(ro, "/readout", "calibration_shots", 100000));
    if (s.readout.calibration_shots < 1) throw SchemaError("/readout/calibration_shots", "must be >= 1");
    if (ro.contains("blobs")) {
      const json& blobs = ro["blobs"];
      if (!blobs.is_array() || blobs.size() != 3) throw SchemaError("/readout/blobs", "expected 3 blobs");
      for (int k = 0; k < 3; ++k) {
        const std::string p = "/readout/blobs/" + std::to_string(k);
        const auto mean = number_array(field(blobs[k], p, "mean"), p + "/mean");
        const json& cov = field(blobs[k], p, "cov");
        if (mean.size() != 2) throw SchemaError(p + "/mean", "expected 2 entries");
        if (!cov.is_array() || cov.size() != 2) throw SchemaError(p + "/cov", "expected a 2x2 array");
        const auto r0 = number_array(cov[0], p + "/cov/0");
        const auto r1 = number_array(cov[1], p + "/cov/1");
        if (r0.size() != 2 || r1.size() != 2) throw SchemaError(p + "/cov", "expected a 2x2 array");
        s.readout.blobs.blobs[k].mean = Eigen::Vector2d(mean[0], mean[1]);
        s.readout.blobs.blobs[k].covariance << r0[0], r0[1], r1[0], r1[1];
      }
      try {
        validate(s.readout.blobs);
      } catch (const InvalidParameter& e) {
        throw SchemaError("/readout/blobs", e.what());
      }
    }
  }
  s.seed = j.contains("seed") ? seed_value(j["seed"], "/seed") : 0;
  try {
    validate(s);
  } catch (const InvalidParameter& e) {
    throw SchemaError("", e.what());
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json tls = json::array();
  for (const auto& t : s.tls) {
    tls.push_back({{"B", t.coupling}, {"gamma_mhz", t.linewidth}, {"drift", drift_to_json(t.drift)}});
  }
  json j{{"schema_version", kSchemaVersion},
         {"name", s.name},
         {"device", {{"omega_01_mhz", s.device.omega_01}, {"anharmonicity_mhz", s.device.anharmonicity}}},
         {"background", rates_json(s.background)},
         {"matrix_element_ratio", s.matrix_element_ratio},
         {"tls", tls},
         {"epochs", {{"count", s.epochs}, {"spacing_hr", s.spacing_hr}}},
         {"delays_us", s.delays_us},
         {"shots_per_delay", s.shots},
         {"seed", s.seed}};
  json ro{{"ideal", s.readout.ideal}, {"calibration_shots", s.readout.calibration_shots}};
  if (!s.readout.ideal) {
    json blobs = json::array();
    for (const auto& b : s.readout.blobs.blobs) {
      const auto& c = b.covariance;
      blobs.push_back({{"mean", {b.mean(0), b.mean(1)}}, {"cov", {{c(0, 0), c(0, 1)}, {c(1, 0), c(1, 1)}}}});
    }
    ro["blobs"] = blobs;
  }
  j["readout"] = ro;
  return j;
}

DeviceConfig device_config_from_json(const json& j) {
  if (!j.is_object()) throw SchemaError("", "device config must be a JSON object");
  DeviceConfig cfg;
  if (j.contains("device")) {
    cfg.device = device_from(j["device"], "/device");
  } else {
    cfg.device = device_from(j, "");
  }
  if (j.contains("background")) cfg.background = rates_from(j["background"], "/background");
  if (!(cfg.background.gamma_10 >= 0.0) || !(cfg.background.gamma_21 >= 0.0)) {
    throw SchemaError("/background", "rates must be non-negative");
  }
  return cfg;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON in ") + path.string() + ": " + e.what());
  }
}

void write_text_file_atomic(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::filesystem::filesystem_error("cannot write", tmp, std::make_error_code(std::errc::io_error));
    out << content;
    if (!out) throw std::filesystem::filesystem_error("write failed", tmp, std::make_error_code(std::errc::io_error));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tlsspec::io
