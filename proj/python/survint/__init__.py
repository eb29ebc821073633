"""Survey estimation with large non-probability datasets.

Thin wrapper over the compiled _survint module: accepts plain dicts where the
core expects JSON strings.
"""

import json as _json

try:
    from ._survint import *  # noqa: F401,F403  (installed wheel layout)
    from . import _survint as _core
except ImportError:  # in-tree builds put the extension next to the package
    from _survint import *  # noqa: F401,F403
    import _survint as _core

__all__ = [
    "Frame",
    "default_population_config",
    "synthesize_population",
    "load_population",
    "solve_fleishman",
    "vale_maurelli_pair",
    "chi_square_calibrate",
    "fit_logistic_weighted",
    "allocate",
    "run_scenario",
    "run_scenario_on_frame",
    "render_markdown",
]


def _as_json(config):
    if isinstance(config, str):
        return config
    return _json.dumps(config)


def synthesize_population(config="{}"):
    return _core.synthesize_population(_as_json(config))


def allocate(config):
    return _core.allocate(_as_json(config))


def run_scenario(config, threads=0):
    return _core.run_scenario(_as_json(config), threads)


def run_scenario_on_frame(config, frame, threads=0):
    return _core.run_scenario_on_frame(_as_json(config), frame, threads)
