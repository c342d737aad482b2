"""Hyperspherical dispersion objectives, sphere-constrained optimization,
Tammes references, and confidence-calibration metrics."""

import json as _json

try:
    from ._core import *  # noqa: F401,F403
    from . import _core as _impl
except ImportError:  # in-tree test runs put the built _core on sys.path directly
    from _core import *  # noqa: F401,F403
    import _core as _impl

__version__ = _impl.__version__


def run_episode(config):
    """Run one synthetic zero-shot episode from a config dict."""
    return _json.loads(_impl.run_episode_json(_json.dumps(config)))


def regime_experiment(config, regimes):
    """Matched episodes per regularizer over (n_classes, dim) regimes."""
    return _json.loads(_impl.regime_experiment_json(_json.dumps(config), list(regimes)))


def pareto_sweep(config, lambdas):
    """One episode per lambda on a shared world."""
    return _json.loads(_impl.pareto_sweep_json(_json.dumps(config), list(lambdas)))
