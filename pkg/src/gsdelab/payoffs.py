"""Named terminal payoffs phi(x) for configs and the acceptance suites."""
from __future__ import annotations

import numpy as np

from .catalog import parse_call


def _square(x):
    return x * x


def _abs(x):
    return np.abs(x)


def _neg_square(x):
    return -x * x


def _neg_abs(x):
    return -np.abs(x)


def _identity(x):
    return np.asarray(x, dtype=np.float64) * 1.0


def _tanh(x):
    return np.tanh(x)


PAYOFFS = {
    "square": (_square, 0, "x^2"),
    "abs": (_abs, 0, "|x|"),
    "neg_square": (_neg_square, 0, "-x^2"),
    "neg_abs": (_neg_abs, 0, "-|x|"),
    "identity": (_identity, 0, "x"),
    "tanh": (_tanh, 0, "tanh(x), odd and bounded"),
    "constant": (None, 1, "constant(c) = c"),
    "call": (None, 1, "call(k) = max(x - k, 0)"),
}


def payoff(spec: str):
    """Resolve ``name`` or ``name(args)`` to a vectorised function of x."""
    name, args = parse_call(spec, PAYOFFS)
    if name == "constant":
        c = args[0]
        return lambda x: np.full(np.shape(x), c, dtype=np.float64)
    if name == "call":
        k = args[0]
        return lambda x: np.maximum(np.asarray(x) - k, 0.0)
    return PAYOFFS[name][0]


def terminal(phi, component: int = 0):
    """Turn phi(x) into a path payoff phi(B_T) for the Monte Carlo estimator."""
    return lambda bundle: phi(bundle.b_path[:, -1, component])
