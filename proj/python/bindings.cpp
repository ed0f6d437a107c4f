#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "tlsspec/dynamics.hpp"
#include "tlsspec/errors.hpp"
#include "tlsspec/io.hpp"
#include "tlsspec/readout.hpp"
#include "tlsspec/synthetic_lab.hpp"
#include "tlsspec/tls_model.hpp"
#include "tlsspec/tls_tracker.hpp"
#include "tlsspec/trace_fitter.hpp"

namespace py = pybind11;
using namespace tlsspec;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix states_to_matrix(const std::vector<PopulationState>& states) {
  RowMatrix out(states.size(), 3);
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (int c = 0; c < 3; ++c) out(i, c) = states[i][c];
  }
  return out;
}

PopulationTrace make_trace(const std::vector<double>& delays, const RowMatrix& populations,
                           const std::optional<std::vector<long>>& shots) {
  if (populations.cols() != 3 || static_cast<std::size_t>(populations.rows()) != delays.size()) {
    throw InvalidInput("populations must have shape (len(delays), 3)");
  }
  PopulationTrace t;
  t.delays = delays;
  for (Eigen::Index i = 0; i < populations.rows(); ++i) {
    t.states.push_back({populations(i, 0), populations(i, 1), populations(i, 2)});
  }
  if (shots) t.shots = *shots;
  return t;
}

ConfusionMatrix make_confusion(const Eigen::Matrix3d& m) {
  ConfusionMatrix cm;
  cm.m = m;
  validate(cm, 1e-9);
  return cm;
}

std::string dump(const io::json& j) { return j.dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Three-level lifetime spectroscopy of drifting two-level defects";
  m.attr("__version__") = TLSSPEC_VERSION;

  py::register_exception<InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<MitigationUnstable>(m, "MitigationUnstable", PyExc_ArithmeticError);
  py::register_exception<UndefinedCorrelation>(m, "UndefinedCorrelation", PyExc_ArithmeticError);
  py::register_exception<Diverged>(m, "Diverged", PyExc_ArithmeticError);

  m.def(
      "populations",
      [](double gamma_10, double gamma_21, const std::vector<double>& delays) {
        std::vector<PopulationState> s;
        for (double t : delays) s.push_back(populations_closed_form({gamma_10, gamma_21}, t));
        return states_to_matrix(s);
      },
      py::arg("gamma_10"), py::arg("gamma_21"), py::arg("delays"),
      "Closed-form (P0, P1, P2) after preparing |2>, one row per delay.");

  m.def(
      "integrate",
      [](double gamma_10, double gamma_21, const std::vector<double>& delays, double gamma_01,
         double gamma_12) {
        const PopulationTrace t =
            integrate_rate_equations({gamma_10, gamma_21}, {gamma_01, gamma_12}, {0.0, 0.0, 1.0}, delays);
        return states_to_matrix(t.states);
      },
      py::arg("gamma_10"), py::arg("gamma_21"), py::arg("delays"), py::arg("gamma_01") = 0.0,
      py::arg("gamma_12") = 0.0, "RK4 solution of the rate equations, optionally with upward rates.");

  m.def(
      "fit_trace",
      [](const std::vector<double>& delays, const RowMatrix& populations,
         std::optional<std::vector<long>> shots, const std::string& weighting) {
        TraceFitOptions opt;
        if (weighting == "binomial") {
          opt.weighting = Weighting::binomial;
        } else if (weighting != "uniform") {
          throw InvalidParameter("weighting must be uniform or binomial");
        }
        return dump(io::trace_fit_to_json(fit_trace(make_trace(delays, populations, shots), opt)));
      },
      py::arg("delays"), py::arg("populations"), py::arg("shots") = py::none(),
      py::arg("weighting") = "uniform");

  m.def(
      "confusion_matrix",
      [](const RowMatrix& means, const std::vector<Eigen::Matrix2d>& covariances, long shots,
         std::uint64_t seed) {
        if (means.rows() != 3 || means.cols() != 2 || covariances.size() != 3) {
          throw InvalidInput("need three 2-D means and three 2x2 covariances");
        }
        IqBlobModel model;
        for (int k = 0; k < 3; ++k) {
          model.blobs[k].mean = means.row(k).transpose();
          model.blobs[k].covariance = covariances[k];
        }
        return Eigen::Matrix3d(simulate_confusion_matrix(model, shots, seed).m);
      },
      py::arg("means"), py::arg("covariances"), py::arg("shots"), py::arg("seed"));

  m.def(
      "mitigate",
      [](const Eigen::Matrix3d& confusion, const RowMatrix& observed, bool clip) {
        const ConfusionMatrix cm = make_confusion(confusion);
        MitigationOptions opt;
        opt.clip = clip;
        std::vector<PopulationState> out;
        for (Eigen::Index i = 0; i < observed.rows(); ++i) {
          out.push_back(mitigate(cm, {observed(i, 0), observed(i, 1), observed(i, 2)}, opt));
        }
        return states_to_matrix(out);
      },
      py::arg("confusion"), py::arg("observed"), py::arg("clip") = true);

  m.def("lorentzian_density", &lorentzian_density, py::arg("center"), py::arg("linewidth"),
        py::arg("probe"));

  m.def(
      "transition_rates",
      [](const std::string& tls_set, double omega_01, double anharmonicity, std::size_t epoch) {
        const DecayRates r =
            rates_with_background(io::tls_set_from_json(io::json::parse(tls_set)), {omega_01, anharmonicity}, epoch);
        return std::make_pair(r.gamma_10, r.gamma_21);
      },
      py::arg("tls_set"), py::arg("omega_01"), py::arg("anharmonicity"), py::arg("epoch") = 0);

  m.def(
      "simulate",
      [](const std::string& scenario, int jobs) {
        const Scenario sc = io::scenario_from_json(io::json::parse(scenario));
        Experiment ex;
        {
          py::gil_scoped_release release;
          ex = synthesize_experiment(sc, jobs);
        }
        py::list traces;
        for (const auto& t : ex.traces) traces.append(states_to_matrix(t.states));
        RowMatrix rates(ex.true_rates.size(), 2);
        for (std::size_t i = 0; i < ex.true_rates.size(); ++i) {
          rates(i, 0) = ex.true_rates[i].gamma_10;
          rates(i, 1) = ex.true_rates[i].gamma_21;
        }
        py::dict out;
        out["delays"] = sc.delays_us;
        out["traces"] = traces;
        out["shots"] = sc.shots;
        out["confusion"] = Eigen::Matrix3d(ex.confusion.m);
        out["epochs_hr"] = ex.epochs_hr;
        out["true_rates"] = rates;
        out["truth"] = dump(io::tls_set_to_json(ex.truth));
        return out;
      },
      py::arg("scenario"), py::arg("jobs") = 1);

  m.def(
      "track",
      [](const std::vector<double>& epochs_hr, const std::vector<double>& t1e, const std::vector<double>& t1f,
         double omega_01, double anharmonicity, int order, std::optional<std::vector<double>> err_e,
         std::optional<std::vector<double>> err_f, std::pair<double, double> background,
         double matrix_element_ratio, int jobs) {
        LifetimeSeries s{epochs_hr, t1e, t1f, err_e.value_or(std::vector<double>{}),
                         err_f.value_or(std::vector<double>{})};
        TrackerOptions opt;
        opt.background = {background.first, background.second};
        opt.matrix_element_ratio = matrix_element_ratio;
        opt.jobs = jobs;
        const DeviceFrequencies dev{omega_01, anharmonicity};
        TrackerFit fit;
        {
          py::gil_scoped_release release;
          fit = order == 0 ? select_model(s, dev, opt) : track_tls(s, dev, order, opt);
        }
        return dump(io::tracker_fit_to_json(fit));
      },
      py::arg("epochs_hr"), py::arg("t1e"), py::arg("t1f"), py::arg("omega_01"), py::arg("anharmonicity"),
      py::arg("order") = 0, py::arg("err_e") = py::none(), py::arg("err_f") = py::none(),
      py::arg("background") = std::make_pair(0.0, 0.0), py::arg("matrix_element_ratio") = 1.0,
      py::arg("jobs") = 1, "Order 0 selects between one and two defects by information score.");

  m.def(
      "correlation",
      [](const std::vector<double>& t1e, const std::vector<double>& t1f) {
        LifetimeSeries s;
        s.t1e = t1e;
        s.t1f = t1f;
        return lifetime_correlation(s);
      },
      py::arg("t1e"), py::arg("t1f"));
}
