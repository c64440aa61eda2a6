"""Classical verification of quantum computation with LWE trapdoor claw-free functions.

Thin Python front end over the C++ core in ``cvqc._impl``.
"""

import json

from . import _impl
from ._impl import ConfigError, InputError, ParamError, ResourceError, j_inv, j_map, preset_names

__version__ = _impl.version

__all__ = [
    "ConfigError",
    "InputError",
    "ParamError",
    "ResourceError",
    "exact_distribution",
    "hamiltonian_summary",
    "j_inv",
    "j_map",
    "measure",
    "params_hash",
    "preset",
    "preset_names",
    "qpip",
    "verify_lemmas",
    "violations",
]


def _params_arg(params):
    return params if isinstance(params, str) else json.dumps(params)


def preset(name):
    """Parameter dict of a built-in preset ("toy", "proto", "sim5")."""
    return json.loads(_impl.preset_json(name))


def violations(params):
    """Names of the parameter rules a preset name or params dict violates."""
    return _impl.violations(_params_arg(params))


def params_hash(params):
    return _impl.params_hash(_params_arg(params))


def measure(state, h, round="coin", trials=1, params="proto", zero_noise=False, seed=0):
    """Run honest-prover sessions; returns a list of {round, accept, m}."""
    return json.loads(_impl.measure_json(state, h, round, trials, _params_arg(params), zero_noise, seed))


def exact_distribution(state, h, seed=0):
    """Exact Hadamard-round output distribution at q = 5 with e = 0 keys, next to the ideal one."""
    return json.loads(_impl.exact_distribution_json(state, h, seed))


def hamiltonian_summary(path):
    return json.loads(_impl.hamiltonian_json(str(path)))


def qpip(path, kprime=15, trials=100, seed=0):
    """QPIP statistics for the ground-state prover on a Hamiltonian file."""
    return json.loads(_impl.qpip_json(str(path), kprime, trials, seed))


def verify_lemmas(seed=0, negative_controls=False):
    """Lemma-check reports as dicts."""
    return json.loads(_impl.lemmas_json(seed, negative_controls))
