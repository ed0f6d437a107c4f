#include "tlsspec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "parallel.hpp"
#include "tlsspec/errors.hpp"
#include "tlsspec/io.hpp"
#include "tlsspec/readout.hpp"
#include "tlsspec/synthetic_lab.hpp"
#include "tlsspec/tls_tracker.hpp"
#include "tlsspec/trace_fitter.hpp"

#ifndef TLSSPEC_VERSION
#define TLSSPEC_VERSION "0.0.0"
#endif

namespace tlsspec::cli {
namespace fs = std::filesystem;
using io::json;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One resolved setting: value plus where it came from.
struct Binding {
  std::string key;
  const CLI::Option* option = nullptr;
  std::function<void(const json&)> from_config;
  std::function<json()> current;
};

class Settings {
 public:
  template <class T>
  void bind(const std::string& key, const CLI::Option* option, T& target) {
    bindings_.push_back({key, option, [&target](const json& j) { target = j.get<T>(); },
                         [&target] { return json(target); }});
  }

  // Applies flags > config file > defaults and records the source of each value.
  void resolve(const json& config, const std::string& section) {
    for (auto& b : bindings_) {
      std::string source = "default";
      if (b.option != nullptr && b.option->count() > 0) {
        source = "flag";
      } else {
        const json* node = nullptr;
        if (config.contains(section) && config[section].is_object() && config[section].contains(b.key)) {
          node = &config[section][b.key];
        } else if (config.contains(b.key)) {
          node = &config[b.key];
        }
        if (node != nullptr) {
          try {
            b.from_config(*node);
          } catch (const json::exception& e) {
            throw io::SchemaError("/" + b.key, std::string("bad config value: ") + e.what());
          }
          source = "config";
        }
      }
      resolved_[b.key] = {{"value", b.current()}, {"source", source}};
    }
  }

  void set(const std::string& key, const json& value, const std::string& source) {
    resolved_[key] = {{"value", value}, {"source", source}};
  }

  const json& resolved() const { return resolved_; }

 private:
  std::vector<Binding> bindings_;
  json resolved_ = json::object();
};

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::string config_path;
  const CLI::Option* seed_opt = nullptr;
  const CLI::Option* jobs_opt = nullptr;
  const CLI::Option* out_opt = nullptr;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Collects output files in a hidden staging directory and moves it into
// place only when every file was written.
class StagedOutput {
 public:
  explicit StagedOutput(fs::path target) : target_(std::move(target)) {
    if (target_.filename().empty()) target_ = target_.parent_path();
    stage_ = target_.parent_path() / ("." + target_.filename().string() + ".partial");
    std::error_code ec;
    fs::remove_all(stage_, ec);
    fs::create_directories(stage_, ec);
    if (ec) throw IoError("cannot create " + stage_.string() + ": " + ec.message());
  }
  StagedOutput(const StagedOutput&) = delete;
  StagedOutput& operator=(const StagedOutput&) = delete;
  ~StagedOutput() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }

  void write(const std::string& relative, const std::string& content) {
    const fs::path p = stage_ / relative;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary);
    out << content;
    if (!out) throw IoError("cannot write " + (target_ / relative).string());
    files_.push_back(relative);
  }

  std::ofstream open(const std::string& relative) {
    const fs::path p = stage_ / relative;
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + (target_ / relative).string());
    files_.push_back(relative);
    return out;
  }

  const std::vector<std::string>& files() const { return files_; }
  const fs::path& target() const { return target_; }

  void commit() {
    std::error_code ec;
    if (fs::exists(target_)) {
      const bool previous_run = fs::exists(target_ / "manifest.json");
      const bool empty = fs::is_directory(target_) && fs::is_empty(target_);
      if (!previous_run && !empty) {
        throw IoError("refusing to replace " + target_.string() + ": not a tlsspec output directory");
      }
      fs::remove_all(target_, ec);
      if (ec) throw IoError("cannot replace " + target_.string() + ": " + ec.message());
    }
    fs::rename(stage_, target_, ec);
    if (ec) throw IoError("cannot move output into " + target_.string() + ": " + ec.message());
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path stage_;
  std::vector<std::string> files_;
  bool committed_ = false;
};

void write_manifest(StagedOutput& out, const std::string& subcommand, const Settings& settings,
                    const json& inputs, std::uint64_t seed,
                    std::chrono::steady_clock::time_point started, const std::string& started_utc) {
  json outputs = out.files();
  std::sort(outputs.begin(), outputs.end());
  const double duration =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json m{{"schema_version", io::kSchemaVersion},
         {"tool", "tlsspec"},
         {"version", TLSSPEC_VERSION},
         {"subcommand", subcommand},
         {"config", settings.resolved()},
         {"inputs", inputs},
         {"outputs", outputs},
         {"seed", seed},
         {"started_utc", started_utc},
         {"duration_s", duration}};
  out.write("manifest.json", dump(m));
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = io::read_json_file(path);
  if (!j.is_object()) throw io::SchemaError("", "config file must hold a JSON object");
  return j;
}

void resolve_globals(Globals& g, Settings& settings, const json& config, const std::string& section) {
  settings.bind("jobs", g.jobs_opt, g.jobs);
  settings.bind("out", g.out_opt, g.out);
  settings.resolve(config, section);
  if (g.jobs < 1) throw InvalidInput("--jobs must be >= 1");
}

std::string trace_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%04zu.csv", epoch);
  return buf;
}

std::string trace_csv(const PopulationTrace& trace, double timestamp_hr) {
  std::ostringstream ss;
  ss << "# timestamp_hr=" << io::format_double(timestamp_hr) << '\n';
  io::write_trace_csv(ss, trace);
  return ss.str();
}

std::optional<double> trace_timestamp(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  const std::string tag = "# timestamp_hr=";
  if (line.rfind(tag, 0) != 0) return std::nullopt;
  try {
    return std::stod(line.substr(tag.size()));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scenario;
  bool shots_csv = false;
};

int cmd_simulate(const SimulateArgs& args, Globals& g, const CLI::App& sub, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = utc_now();
  const json config = load_config(g.config_path);
  Scenario s = io::scenario_from_json(io::read_json_file(args.scenario));

  Settings settings;
  bool shots_csv = args.shots_csv;
  settings.bind("shots_csv", sub.get_option("--shots-csv"), shots_csv);
  resolve_globals(g, settings, config, "simulate");
  if (g.seed_opt->count() > 0) {
    s.seed = g.seed;
    settings.set("seed", s.seed, "flag");
  } else if (config.contains("seed")) {
    s.seed = config["seed"].get<std::uint64_t>();
    settings.set("seed", s.seed, "config");
  } else {
    settings.set("seed", s.seed, "scenario");
  }

  fs::path target;
  if (!g.out.empty()) {
    target = g.out;
  } else {
    const char* root = std::getenv("TLSSPEC_OUT");
    target = fs::path(root != nullptr && *root != '\0' ? root : "runs") / (s.name.empty() ? "run" : s.name);
  }
  StagedOutput staged(target);

  std::vector<std::ofstream> shot_files;
  ShotSink sink;
  if (shots_csv) {
    for (std::size_t e = 0; e < s.epochs; ++e) {
      shot_files.push_back(staged.open("shots/" + trace_name(e)));
      io::write_shot_header(shot_files.back());
    }
    sink = [&shot_files](std::size_t epoch, const ShotRecord& rec) {
      io::write_shot_record(shot_files[epoch], rec);
    };
  }
  const Experiment ex = synthesize_experiment(s, g.jobs, sink);
  for (auto& f : shot_files) {
    f.flush();
    if (!f) throw IoError("failed writing shot records");
  }
  shot_files.clear();

  for (std::size_t e = 0; e < ex.traces.size(); ++e) {
    staged.write("traces/" + trace_name(e), trace_csv(ex.traces[e], ex.epochs_hr[e]));
  }
  staged.write("confusion.json", dump(io::confusion_to_json(ex.confusion)));

  json truth = io::tls_set_to_json(ex.truth);
  truth["device"] = {{"omega_01_mhz", s.device.omega_01}, {"anharmonicity_mhz", s.device.anharmonicity}};
  truth["epochs_hr"] = ex.epochs_hr;
  json rates = json::array();
  for (const auto& r : ex.true_rates) rates.push_back({{"gamma10", r.gamma_10}, {"gamma21", r.gamma_21}});
  truth["rates"] = rates;
  staged.write("truth.json", dump(truth));

  LifetimeSeries series;
  series.epochs_hr = ex.epochs_hr;
  for (const auto& r : ex.true_rates) {
    series.t1e.push_back(r.t1e());
    series.t1f.push_back(r.t1f());
  }
  std::ostringstream ss;
  io::write_series_csv(ss, series);
  staged.write("series.csv", ss.str());
  staged.write("scenario.json", dump(io::scenario_to_json(s)));

  write_manifest(staged, "simulate", settings, {{"scenario", args.scenario}}, s.seed, started, started_utc);
  staged.commit();
  out << "wrote " << ex.traces.size() << " traces to " << staged.target().string() << '\n';
  return kOk;
}

// -------------------------------------------------------------- fit-series

struct FitSeriesArgs {
  std::string run_dir;
  bool no_mitigation = false;
  std::string weighting = "uniform";
};

int cmd_fit_series(const FitSeriesArgs& args, Globals& g, const CLI::App& sub, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = utc_now();
  const json config = load_config(g.config_path);

  Settings settings;
  bool no_mitigation = args.no_mitigation;
  std::string weighting = args.weighting;
  settings.bind("no_mitigation", sub.get_option("--no-mitigation"), no_mitigation);
  settings.bind("weighting", sub.get_option("--weighting"), weighting);
  resolve_globals(g, settings, config, "fit-series");

  TraceFitOptions fit_opt;
  if (weighting == "uniform") {
    fit_opt.weighting = Weighting::uniform;
  } else if (weighting == "binomial") {
    fit_opt.weighting = Weighting::binomial;
  } else {
    throw InvalidInput("weighting must be 'uniform' or 'binomial', got '" + weighting + "'");
  }

  const fs::path run(args.run_dir);
  if (!fs::is_directory(run)) throw InvalidInput("run directory does not exist: " + run.string());
  std::vector<fs::path> files;
  if (fs::is_directory(run / "traces")) {
    for (const auto& entry : fs::directory_iterator(run / "traces")) {
      if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InvalidInput("no traces found under " + (run / "traces").string());

  std::optional<ConfusionMatrix> cm;
  if (!no_mitigation) {
    if (!fs::exists(run / "confusion.json")) {
      throw InvalidInput("missing " + (run / "confusion.json").string() + " (use --no-mitigation to skip)");
    }
    cm = io::confusion_from_json(io::read_json_file(run / "confusion.json"));
    fit_opt.mitigated_with = cm->m;
  }

  std::vector<PopulationTrace> traces;
  std::vector<double> stamps;
  for (std::size_t i = 0; i < files.size(); ++i) {
    std::ifstream in(files[i]);
    if (!in) throw IoError("cannot read " + files[i].string());
    try {
      traces.push_back(io::read_trace_csv(in));
    } catch (const InvalidInput& e) {
      throw InvalidInput(files[i].filename().string() + ": " + e.what());
    }
    stamps.push_back(trace_timestamp(files[i]).value_or(static_cast<double>(i)));
  }

  std::vector<TraceFit> fits(traces.size());
  detail::parallel_for(traces.size(), g.jobs, [&](std::size_t i) {
    const PopulationTrace t = cm ? mitigate(*cm, traces[i]) : traces[i];
    try {
      fits[i] = fit_trace(t, fit_opt);
    } catch (const Diverged&) {
      const DecayRates guess = initial_guess(t);
      fits[i].rates = guess;
      fits[i].t1e = guess.t1e();
      fits[i].t1f = guess.t1f();
      fits[i].converged = false;
    }
  });

  LifetimeSeries series;
  std::vector<bool> converged;
  json epochs = json::array();
  for (std::size_t i = 0; i < fits.size(); ++i) {
    series.epochs_hr.push_back(stamps[i]);
    series.t1e.push_back(fits[i].t1e);
    series.t1f.push_back(fits[i].t1f);
    series.err_e.push_back(fits[i].stderr_t1e);
    series.err_f.push_back(fits[i].stderr_t1f);
    converged.push_back(fits[i].converged);
    json e = io::trace_fit_to_json(fits[i]);
    e["trace"] = files[i].filename().string();
    e["timestamp_hr"] = stamps[i];
    epochs.push_back(e);
  }
  const auto unconverged = std::count(converged.begin(), converged.end(), false);

  StagedOutput staged(g.out.empty() ? run / "fit" : fs::path(g.out));
  std::ostringstream ss;
  io::write_series_csv(ss, series, &converged);
  staged.write("series.csv", ss.str());
  staged.write("fits.json", dump({{"schema_version", io::kSchemaVersion},
                                  {"mitigation", !no_mitigation},
                                  {"weighting", weighting},
                                  {"unconverged", unconverged},
                                  {"epochs", epochs}}));
  json inputs{{"run_dir", run.string()}, {"traces", files.size()}};
  write_manifest(staged, "fit-series", settings, inputs, 0, started, started_utc);
  staged.commit();
  out << "fitted " << fits.size() << " epochs (" << unconverged << " unconverged) -> "
      << (staged.target() / "series.csv").string() << '\n';
  return kOk;
}

// ------------------------------------------------------------------- track

struct TrackArgs {
  std::string series;
  std::string device;
  std::string order = "auto";
  bool fit_background = false;
  double matrix_element_ratio = 0.0;  // 0: take from the device file, else 1
  double drift_penalty = 0.0;
  double linewidth_max = 50.0;
  bool compare_ratio = true;
};

LifetimeSeries load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return io::read_series_csv(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path + ": " + e.what());
  }
}

TrackerFit run_tracker(const LifetimeSeries& series, const DeviceFrequencies& device, const std::string& order,
                       const TrackerOptions& opt) {
  if (order == "auto") return select_model(series, device, opt);
  return track_tls(series, device, order == "1" ? 1 : 2, opt);
}

int cmd_track(const TrackArgs& args, Globals& g, const CLI::App& sub, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = utc_now();
  const json config = load_config(g.config_path);

  TrackArgs a = args;
  Settings settings;
  settings.bind("device", sub.get_option("--device"), a.device);
  settings.bind("order", sub.get_option("--order"), a.order);
  settings.bind("fit_background", sub.get_option("--fit-background"), a.fit_background);
  settings.bind("drift_penalty", sub.get_option("--drift-penalty"), a.drift_penalty);
  settings.bind("linewidth_max_mhz", sub.get_option("--linewidth-max"), a.linewidth_max);
  settings.bind("compare_ratio", sub.get_option("--compare-ratio"), a.compare_ratio);
  resolve_globals(g, settings, config, "track");
  if (a.order != "1" && a.order != "2" && a.order != "auto") {
    throw InvalidInput("--order must be 1, 2 or auto");
  }
  if (a.device.empty()) throw InvalidInput("a device configuration is required (--device)");
  if (!(a.drift_penalty >= 0.0)) throw InvalidInput("--drift-penalty must be >= 0");
  if (!(a.linewidth_max > 0.1)) throw InvalidInput("--linewidth-max must exceed 0.1 MHz");

  const LifetimeSeries series = load_series(a.series);
  const json device_doc = io::read_json_file(a.device);
  const io::DeviceConfig dev = io::device_config_from_json(device_doc);

  TrackerOptions opt;
  opt.jobs = g.jobs;
  opt.fit_background = a.fit_background;
  opt.background = dev.background;
  opt.drift_penalty = a.drift_penalty;
  opt.linewidth_upper = a.linewidth_max;
  const CLI::Option* ratio_opt = sub.get_option("--matrix-element-ratio");
  if (ratio_opt->count() > 0) {
    opt.matrix_element_ratio = a.matrix_element_ratio;
    settings.set("matrix_element_ratio", a.matrix_element_ratio, "flag");
  } else if (config.contains("track") && config["track"].contains("matrix_element_ratio")) {
    opt.matrix_element_ratio = config["track"]["matrix_element_ratio"].get<double>();
    settings.set("matrix_element_ratio", opt.matrix_element_ratio, "config");
  } else if (device_doc.contains("matrix_element_ratio") && device_doc["matrix_element_ratio"].is_number()) {
    opt.matrix_element_ratio = device_doc["matrix_element_ratio"].get<double>();
    settings.set("matrix_element_ratio", opt.matrix_element_ratio, "device");
  } else {
    settings.set("matrix_element_ratio", opt.matrix_element_ratio, "default");
  }
  if (!(opt.matrix_element_ratio > 0.0)) throw InvalidInput("matrix element ratio must be positive");
  settings.set("background", {{"gamma10", opt.background.gamma_10}, {"gamma21", opt.background.gamma_21}},
               "device");

  const TrackerFit fit = run_tracker(series, dev.device, a.order, opt);
  json doc = io::tracker_fit_to_json(fit);
  doc["device"] = {{"omega_01_mhz", dev.device.omega_01},
                   {"anharmonicity_mhz", dev.device.anharmonicity},
                   {"omega_12_mhz", dev.device.omega_12()}};
  if (a.compare_ratio) {
    TrackerOptions alt = opt;
    alt.matrix_element_ratio = opt.matrix_element_ratio == 2.0 ? 1.0 : 2.0;
    const TrackerFit other = run_tracker(series, dev.device, a.order, alt);
    doc["alternative_ratio"] = {{"matrix_element_ratio", alt.matrix_element_ratio},
                                {"model_order", other.model_order},
                                {"misfit", other.misfit},
                                {"information_score", other.information_score},
                                {"converged", other.converged}};
  }

  const fs::path series_dir = fs::path(a.series).parent_path();
  StagedOutput staged(g.out.empty() ? (series_dir.empty() ? fs::path(".") : series_dir) / "track"
                                    : fs::path(g.out));
  staged.write("fit.json", dump(doc));
  std::ostringstream traj, corr;
  io::write_trajectory_csv(traj, fit);
  io::write_correlation_csv(corr, series, fit);
  staged.write("trajectory.csv", traj.str());
  staged.write("correlation.csv", corr.str());
  write_manifest(staged, "track", settings, {{"series", a.series}, {"device", a.device}}, 0, started,
                 started_utc);
  staged.commit();

  out << "model_order " << fit.model_order << ", misfit " << io::format_double(fit.misfit) << ", score "
      << io::format_double(fit.information_score) << '\n';
  for (const auto& w : fit.warnings) out << "warning: " << w << '\n';
  return kOk;
}

// --------------------------------------------------------------- correlate

struct CorrelateArgs {
  std::string series;
};

int cmd_correlate(const CorrelateArgs& args, Globals& g, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_utc = utc_now();
  const json config = load_config(g.config_path);
  Settings settings;
  resolve_globals(g, settings, config, "correlate");

  const LifetimeSeries series = load_series(args.series);
  const double r = lifetime_correlation(series);

  const fs::path series_dir = fs::path(args.series).parent_path();
  StagedOutput staged(g.out.empty() ? (series_dir.empty() ? fs::path(".") : series_dir) / "correlate"
                                    : fs::path(g.out));
  std::ostringstream ss;
  ss << "t1e_us,t1f_us\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    ss << io::format_double(series.t1e[i]) << ',' << io::format_double(series.t1f[i]) << '\n';
  }
  staged.write("scatter.csv", ss.str());
  staged.write("correlation.json", dump({{"pearson_r", r}, {"epochs", series.size()}}));
  write_manifest(staged, "correlate", settings, {{"series", args.series}}, 0, started, started_utc);
  staged.commit();

  out << "pearson_r " << std::fixed << std::setprecision(6) << r << '\n';
  out.unsetf(std::ios::floatfield);
  return kOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multilevel relaxation spectroscopy of drifting TLS defects", "tlsspec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", TLSSPEC_VERSION);

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Master seed (overrides the scenario seed)");
  g.jobs_opt = app.add_option("--jobs,-j", g.jobs, "Worker threads for per-epoch work");
  g.out_opt = app.add_option("--out,-o", g.out, "Output directory");
  app.add_option("--config", g.config_path, "JSON config file; flags take precedence")->check(CLI::ExistingFile);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Synthesize a run directory from a scenario");
  simulate->add_option("scenario", sim.scenario, "Scenario JSON")->required();
  simulate->add_flag("--shots-csv", sim.shots_csv, "Also write every shot record");

  FitSeriesArgs fsa;
  auto* fit_series = app.add_subcommand("fit-series", "Mitigate and fit every trace of a run");
  fit_series->add_option("run_dir", fsa.run_dir, "Run directory written by simulate")->required();
  fit_series->add_flag("--no-mitigation", fsa.no_mitigation, "Fit raw assigned populations");
  fit_series->add_option("--weighting", fsa.weighting, "uniform or binomial");

  TrackArgs ta;
  auto* track = app.add_subcommand("track", "Reconstruct TLS trajectories from a lifetime series");
  track->add_option("series", ta.series, "Lifetime series CSV")->required();
  track->add_option("--device", ta.device, "Device JSON (bare device, scenario or truth.json)");
  track->add_option("--order", ta.order, "1, 2 or auto");
  track->add_flag("--fit-background", ta.fit_background, "Fit a constant background rate");
  track->add_option("--matrix-element-ratio", ta.matrix_element_ratio, "Relative 1-2 coupling to the TLS");
  track->add_option("--drift-penalty", ta.drift_penalty, "Weight on squared frequency steps, 1/MHz^2");
  track->add_option("--linewidth-max", ta.linewidth_max, "Upper bound on TLS linewidth, MHz");
  track->add_flag("--compare-ratio,!--no-compare-ratio", ta.compare_ratio,
                 "Also report the fit under the other matrix element ratio (default on)");

  CorrelateArgs ca;
  auto* correlate = app.add_subcommand("correlate", "Pearson correlation of T1e and T1f");
  correlate->add_option("series", ca.series, "Lifetime series CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << TLSSPEC_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim, g, *simulate, out);
    if (fit_series->parsed()) return cmd_fit_series(fsa, g, *fit_series, out);
    if (track->parsed()) return cmd_track(ta, g, *track, out);
    if (correlate->parsed()) return cmd_correlate(ca, g, out);
  } catch (const io::SchemaError& e) {
    err << "error: invalid input at " << (e.path().empty() ? "/" : e.path()) << ": " << e.what() << '\n';
    return kInvalidInput;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const InvalidParameter& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const UndefinedCorrelation& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const MitigationUnstable& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const InvalidObjective& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const Diverged& e) {
    err << "error: " << e.what() << '\n';
    return kInvalidInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kInvalidInput;
}

}  // namespace tlsspec::cli
