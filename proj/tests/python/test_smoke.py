import json
import os
import pathlib

import numpy as np
import pytest

import tlsspec

SCENARIOS = pathlib.Path(os.environ.get("TLSSPEC_SCENARIOS", pathlib.Path(__file__).parents[2] / "scenarios"))


def test_populations_are_normalized():
    p = tlsspec.populations(1 / 155.0, 1 / 64.0, np.linspace(0.0, 600.0, 50))
    assert p.shape == (50, 3)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(p[0], [0.0, 0.0, 1.0])


def test_integrator_matches_closed_form():
    t = np.linspace(1.0, 800.0, 40)
    a = tlsspec.populations(1 / 155.0, 1 / 64.0, t)
    b = tlsspec.integrate(1 / 155.0, 1 / 64.0, t)
    assert np.max(np.abs(a - b)) < 1e-8


def test_fit_trace_recovers_lifetimes():
    delays = np.geomspace(3.2, 620.0, 30)
    fit = tlsspec.fit_trace(delays, tlsspec.populations(1 / 155.0, 1 / 64.0, delays))
    assert fit["t1e_us"] == pytest.approx(155.0, rel=1e-6)
    assert fit["t1f_us"] == pytest.approx(64.0, rel=1e-6)


def test_mitigation_round_trip():
    m = np.array([[0.9, 0.06, 0.02], [0.07, 0.88, 0.1], [0.03, 0.06, 0.88]])
    p = np.array([[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]])
    assert np.allclose(tlsspec.mitigate(m, p @ m.T), p, atol=1e-12)


def test_confusion_matrix_is_column_stochastic():
    means = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 3.5]])
    covs = [np.eye(2)] * 3
    m = tlsspec.confusion_matrix(means, covs, 2000, 7)
    assert np.allclose(m.sum(axis=0), 1.0)
    assert np.all(np.diag(m) > 0.8)


def test_invalid_input_raises_value_error():
    with pytest.raises(ValueError):
        tlsspec.populations(-1.0, 1.0, [1.0])
    with pytest.raises(ArithmeticError):
        tlsspec.correlation([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_small_pipeline_is_anticorrelated():
    scenario = json.loads((SCENARIOS / "device_A.json").read_text())
    scenario["epochs"]["count"] = 40
    run = tlsspec.simulate(scenario)
    assert len(run["traces"]) == 40
    t1e, t1f = [], []
    for trace in run["traces"]:
        fit = tlsspec.fit_trace(run["delays"], tlsspec.mitigate(run["confusion"], trace))
        t1e.append(fit["t1e_us"])
        t1f.append(fit["t1f_us"])
    assert tlsspec.correlation(t1e, t1f) < 0.0
    dev = scenario["device"]
    fit = tlsspec.track(run["epochs_hr"], t1e, t1f, dev["omega_01_mhz"], dev["anharmonicity_mhz"], order=1,
                        background=(scenario["background"]["gamma10"], scenario["background"]["gamma21"]))
    assert fit["model_order"] == 1
    truth = run["truth"]["tls"][0]["omega_mhz"]
    est = fit["parameters"]["tls"][0]["omega_mhz"]
    assert np.sqrt(np.mean((np.array(est) - np.array(truth)) ** 2)) < 5.0
