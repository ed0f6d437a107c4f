"""Three-level lifetime spectroscopy of drifting two-level defects."""

import json as _json

from . import _core
from ._core import (
    Diverged,
    InvalidInput,
    InvalidParameter,
    MitigationUnstable,
    UndefinedCorrelation,
    confusion_matrix,
    correlation,
    integrate,
    lorentzian_density,
    mitigate,
    populations,
)

__version__ = _core.__version__


def fit_trace(delays, populations, shots=None, weighting="uniform"):
    """Fit both decay rates to a three-level trace; returns a dict."""
    return _json.loads(_core.fit_trace(list(delays), populations, shots, weighting))


def transition_rates(tls_set, omega_01, anharmonicity, epoch=0):
    """(gamma_10, gamma_21) for a TLS-set document (dict) at one epoch."""
    return _core.transition_rates(_json.dumps(tls_set), omega_01, anharmonicity, epoch)


def simulate(scenario, jobs=1):
    """Run a scenario (dict) and return traces, calibration and truth."""
    out = _core.simulate(_json.dumps(scenario), jobs)
    out["truth"] = _json.loads(out["truth"])
    return out


def track(epochs_hr, t1e, t1f, omega_01, anharmonicity, order=0, err_e=None, err_f=None,
          background=(0.0, 0.0), matrix_element_ratio=1.0, jobs=1):
    """Reconstruct TLS trajectories from a lifetime series; order 0 selects automatically."""
    return _json.loads(_core.track(list(epochs_hr), list(t1e), list(t1f), omega_01, anharmonicity, order,
                                   None if err_e is None else list(err_e),
                                   None if err_f is None else list(err_f),
                                   tuple(background), matrix_element_ratio, jobs))
