#include <sstream>

#include "doctest.h"
#include "tlsspec/io.hpp"

using namespace tlsspec;
using io::json;

TEST_CASE("doubles round trip through text") {
  for (double v : {0.1, 1.0 / 3.0, 155.0, 6.02e23, -2.5e-300}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("trace CSV and JSON round trip") {
  PopulationTrace tr;
  tr.delays = {0.0, 1.5, 10.0, 100.0, 400.0};
  for (double t : tr.delays) tr.states.push_back(populations_closed_form({0.01, 0.02}, t));
  tr.shots = {10, 10, 10, 10, 10};
  std::stringstream ss;
  io::write_trace_csv(ss, tr);
  CHECK(ss.str().rfind("delay_us,p0,p1,p2,shots\n", 0) == 0);
  const PopulationTrace back = io::read_trace_csv(ss);
  CHECK(back.delays == tr.delays);
  CHECK(back.shots == tr.shots);
  CHECK(back.states[3].p1 == tr.states[3].p1);
  const PopulationTrace j = io::trace_from_json(io::trace_to_json(tr));
  CHECK(j.states[4].p2 == tr.states[4].p2);
  CHECK(io::trace_to_json(tr)["schema_version"] == io::kSchemaVersion);

  std::stringstream bad("delay_us,p0,p1\n1,0.5,0.5\n");
  CHECK_THROWS_AS(io::read_trace_csv(bad), InvalidInput);
  std::stringstream junk("delay_us,p0,p1,p2,shots\n1,abc,0.5,0.5,\n");
  CHECK_THROWS_AS(io::read_trace_csv(junk), InvalidInput);
}

TEST_CASE("confusion matrix JSON") {
  ConfusionMatrix cm;
  cm.m << 0.9, 0.05, 0.02, 0.07, 0.9, 0.08, 0.03, 0.05, 0.9;
  const json j = io::confusion_to_json(cm);
  CHECK(j["matrix_row_major"].size() == 9);
  CHECK(j["matrix_row_major"][1] == 0.05);
  CHECK(j["fidelity"].get<double>() == doctest::Approx(0.9));
  CHECK(io::confusion_from_json(j).m == cm.m);
  json broken = j;
  broken["matrix_row_major"][0] = 0.5;
  CHECK_THROWS_AS(io::confusion_from_json(broken), io::SchemaError);
}

TEST_CASE("TLS set JSON") {
  TlsParameterSet s;
  s.tls.push_back({2.0, 10.0, {4700.0, 4701.0}});
  s.background = {1e-3, 2e-3};
  const json j = io::tls_set_to_json(s);
  CHECK(j["tls"][0]["B"] == 2.0);
  CHECK(j["tls"][0]["gamma_mhz"] == 10.0);
  CHECK(j["background"]["gamma21"] == 2e-3);
  const TlsParameterSet back = io::tls_set_from_json(j);
  CHECK(back.tls[0].frequency == s.tls[0].frequency);
  json neg = j;
  neg["tls"][0]["B"] = -1.0;
  CHECK_THROWS_AS(io::tls_set_from_json(neg), io::SchemaError);
}

TEST_CASE("series CSV with and without errors") {
  LifetimeSeries s{{0.0, 0.25}, {150.0, 160.0}, {60.0, 55.0}, {}, {}};
  std::stringstream a;
  io::write_series_csv(a, s);
  CHECK(a.str().rfind("timestamp_hr,t1e_us,t1f_us\n", 0) == 0);
  CHECK(io::read_series_csv(a).t1f == s.t1f);
  s.err_e = {1.0, 2.0};
  s.err_f = {0.5, 0.6};
  const std::vector<bool> conv{true, false};
  std::stringstream b;
  io::write_series_csv(b, s, &conv);
  const LifetimeSeries back = io::read_series_csv(b);
  CHECK(back.err_f == s.err_f);
  std::stringstream missing("timestamp_hr,t1e_us\n0,1\n");
  CHECK_THROWS_AS(io::read_series_csv(missing), InvalidInput);
}

TEST_CASE("scenario JSON round trip and field-path errors") {
  const json doc = json::parse(R"({
    "schema_version": 1, "name": "t",
    "device": {"omega_01_mhz": 5000, "anharmonicity_mhz": -250},
    "tls": [{"B": 1.0, "gamma_mhz": 10, "drift": {"kind": "ornstein_uhlenbeck", "start_mhz": 4900,
             "theta_per_hr": 0.4, "sigma_mhz": 5, "seed": 9}}],
    "epochs": {"count": 3, "spacing_hr": 0.5},
    "delays_us": {"log_min": 1, "log_max": 500, "count": 10},
    "shots_per_delay": 100, "seed": 4,
    "readout": {"calibration_shots": 1000, "blobs": [
      {"mean": [0, 0], "cov": [[1, 0], [0, 1]]},
      {"mean": [3, 0], "cov": [[1, 0], [0, 1]]},
      {"mean": [1.5, 2.6], "cov": [[1, 0], [0, 1]]}]}
  })");
  const Scenario s = io::scenario_from_json(doc);
  CHECK(s.epochs == 3);
  CHECK(s.delays_us.size() == 10);
  CHECK_FALSE(s.readout.ideal);
  CHECK(s.tls[0].drift.seed.value() == 9);
  const Scenario again = io::scenario_from_json(io::scenario_to_json(s));
  CHECK(again.delays_us == s.delays_us);
  CHECK(again.readout.blobs.blobs[2].mean == s.readout.blobs.blobs[2].mean);

  json bad = doc;
  bad["tls"][0]["drift"]["kind"] = "levy";
  try {
    io::scenario_from_json(bad);
    FAIL("expected SchemaError");
  } catch (const io::SchemaError& e) {
    CHECK(e.path() == "/tls/0/drift/kind");
  }
  bad = doc;
  bad["device"].erase("omega_01_mhz");
  try {
    io::scenario_from_json(bad);
    FAIL("expected SchemaError");
  } catch (const io::SchemaError& e) {
    CHECK(e.path() == "/device/omega_01_mhz");
  }
  bad = doc;
  bad["schema_version"] = 99;
  CHECK_THROWS_AS(io::scenario_from_json(bad), io::SchemaError);
}

TEST_CASE("device configuration accepts bare and wrapped forms") {
  const auto bare = io::device_config_from_json(json{{"omega_01_mhz", 5000.0}, {"anharmonicity_mhz", -200.0}});
  CHECK(bare.device.omega_12() == 4800.0);
  const auto wrapped = io::device_config_from_json(
      json{{"device", {{"omega_01_mhz", 5000.0}, {"anharmonicity_mhz", -200.0}}},
           {"background", {{"gamma10", 1e-3}, {"gamma21", 2e-3}}}});
  CHECK(wrapped.background.gamma_21 == 2e-3);
  CHECK_THROWS_AS(io::device_config_from_json(json{{"omega_01_mhz", 5000.0}}), io::SchemaError);
}
