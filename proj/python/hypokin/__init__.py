"""Python front end for the hypokin C++ core.

Configs are plain dicts in the suite-file layout; results come back as dicts.
"""

import json
from pathlib import Path

import numpy as np

from . import _hypokin
from ._hypokin import Error, set_num_threads

__all__ = [
    "Error",
    "block_structure",
    "feynman_kac",
    "holder_norm",
    "kalman_rank",
    "kernel",
    "load_config",
    "set_num_threads",
    "solve",
    "verify",
]


def _text(config):
    return json.dumps(config if config is not None else {})


def load_config(path):
    return json.loads(Path(path).read_text())


def kalman_rank(B, d):
    """Returns (rank, controllable)."""
    return _hypokin.kalman_rank(np.asarray(B, dtype=float), int(d))


def block_structure(B, d):
    return json.loads(_hypokin.block_structure(np.asarray(B, dtype=float), int(d)))


def kernel(config, t, x, s, y, order=0):
    return json.loads(_hypokin.kernel(_text(config), t, np.asarray(x, float), s, np.asarray(y, float), order))


def solve(config, times, points, order=0):
    pts = [np.asarray(p, float) for p in points]
    return json.loads(_hypokin.solve(_text(config), list(map(float, times)), pts, order))


def feynman_kac(config, t, x):
    return json.loads(_hypokin.feynman_kac(_text(config), t, np.asarray(x, float)))


def holder_norm(config, alpha):
    return json.loads(_hypokin.holder_norm(_text(config), alpha))


def verify(config):
    return json.loads(_hypokin.verify(_text(config)))
