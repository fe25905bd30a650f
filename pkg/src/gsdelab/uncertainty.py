"""Volatility uncertainty sets, the sublinear generator G and scenario controls."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ValidationError

_SYM_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class UncertaintySet:
    """A finite alphabet Gamma of d x d volatility matrices.

    Upper expectations are taken over piecewise-constant controls with values
    in this alphabet, so it should contain the extreme points of the set one
    has in mind.  ``sigmas`` holds the covariances gamma gamma^T.
    """

    gammas: tuple
    sigmas: tuple = field(init=False, repr=False)

    def __init__(self, gammas: Sequence):
        mats = []
        for g in gammas:
            a = np.array(g, dtype=np.float64, ndmin=2)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ValidationError(f"volatility matrices must be square, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValidationError("volatility matrices must be finite")
            a.setflags(write=False)
            mats.append(a)
        if not mats:
            raise ValidationError("uncertainty set needs at least one matrix")
        d = mats[0].shape[0]
        if any(m.shape != (d, d) for m in mats):
            raise ValidationError("all volatility matrices must share one dimension")
        sig = []
        for m in mats:
            s = m @ m.T
            s.setflags(write=False)
            sig.append(s)
        object.__setattr__(self, "gammas", tuple(mats))
        object.__setattr__(self, "sigmas", tuple(sig))

    @classmethod
    def from_interval(cls, sigma2_min: float, sigma2_max: float, n_interior: int = 0) -> "UncertaintySet":
        """One-dimensional set with variances in [sigma2_min, sigma2_max].

        ``n_interior`` equally spaced interior variances are added between the
        two endpoints.
        """
        lo, hi = float(sigma2_min), float(sigma2_max)
        if not (0.0 <= lo <= hi < np.inf):
            raise ValidationError(f"need 0 <= sigma2_min <= sigma2_max < inf, got [{lo}, {hi}]")
        if hi == lo:
            variances = [lo]
        else:
            variances = list(np.linspace(lo, hi, n_interior + 2))
        return cls([[[np.sqrt(v)]] for v in variances])

    @property
    def dim(self) -> int:
        return self.gammas[0].shape[0]

    def __len__(self) -> int:
        return len(self.gammas)

    @property
    def sigma_stack(self) -> np.ndarray:
        """Covariances as one (k, d, d) array."""
        return np.stack(self.sigmas)

    @property
    def variance_bounds(self) -> tuple[float, float]:
        """(sigma2_min, sigma2_max) for d = 1."""
        if self.dim != 1:
            raise ValidationError("variance bounds are only defined for d = 1")
        v = [float(s[0, 0]) for s in self.sigmas]
        return min(v), max(v)


def _check_symmetric(a: np.ndarray, d: int) -> np.ndarray:
    a = np.array(a, dtype=np.float64, ndmin=2)
    if a.shape != (d, d):
        raise ValidationError(f"expected a {d}x{d} matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix entries must be finite")
    if not np.allclose(a, a.T, rtol=0.0, atol=_SYM_TOL * max(1.0, np.abs(a).max())):
        raise ValidationError("G is only defined on symmetric matrices")
    return a


def evaluate_g(uset: UncertaintySet, a) -> float:
    """G(A) = 1/2 max_gamma tr(gamma gamma^T A)."""
    a = _check_symmetric(a, uset.dim)
    return 0.5 * max(float(np.sum(s * a)) for s in uset.sigmas)


class GFunction:
    """Callable wrapper around :func:`evaluate_g` for a fixed uncertainty set."""

    def __init__(self, uset: UncertaintySet):
        self.uset = uset

    def __call__(self, a) -> float:
        return evaluate_g(self.uset, a)

    def scalar(self, beta):
        """Vectorised one-dimensional form 1/2 (s_hi beta^+ - s_lo beta^-)."""
        lo, hi = self.uset.variance_bounds
        beta = np.asarray(beta, dtype=np.float64)
        return 0.5 * (hi * np.maximum(beta, 0.0) - lo * np.maximum(-beta, 0.0))


def sigma_bounds(uset: UncertaintySet, a) -> tuple[float, float]:
    """(min, max) over gamma of tr(gamma gamma^T a a^T) = |gamma^T a|^2."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    if a.shape[0] != uset.dim or not np.all(np.isfinite(a)):
        raise ValidationError(f"direction must be a finite {uset.dim}-vector")
    vals = [float(a @ s @ a) for s in uset.sigmas]
    return max(0.0, min(vals)), max(0.0, max(vals))


@dataclass(frozen=True)
class ScenarioControl:
    """A piecewise-constant volatility path on a uniform grid.

    Open-loop controls store one alphabet index per step.  Feedback controls
    (produced by the lattice estimator) store an index per lattice node via
    ``policy``: a list whose k-th entry maps the nodes of step k to indices.
    """

    horizon: float
    indices: tuple
    mode: str = "open_loop"
    policy: tuple | None = None

    def __post_init__(self):
        if self.mode not in ("open_loop", "feedback"):
            raise ValidationError(f"unknown control mode {self.mode!r}")
        if self.mode == "feedback" and self.policy is None:
            raise ValidationError("feedback controls need a policy")

    @property
    def n_steps(self) -> int:
        if self.mode == "feedback":
            return len(self.policy)
        return len(self.indices)

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def validate(self, uset: UncertaintySet) -> None:
        k = len(uset)
        if self.mode == "open_loop":
            if any(not (0 <= int(i) < k) for i in self.indices):
                raise ValidationError("control index out of range for the uncertainty set")
        else:
            for layer in self.policy:
                if np.any((np.asarray(layer) < 0) | (np.asarray(layer) >= k)):
                    raise ValidationError("policy index out of range for the uncertainty set")

    def is_constant(self) -> bool:
        return self.mode == "open_loop" and len(set(self.indices)) <= 1

    def run_length(self) -> str:
        """Run-length encoding such as ``1x3,0x2`` (index x repeat)."""
        if self.mode == "feedback":
            return "feedback"
        parts = []
        for idx, grp in itertools.groupby(self.indices):
            parts.append(f"{idx}x{len(list(grp))}")
        return ",".join(parts)


def enumerate_controls(
    uset: UncertaintySet, n_steps: int, cap: int, horizon: float = 1.0, seed: int = 0
) -> list[ScenarioControl]:
    """Open-loop controls on ``n_steps`` steps: all of them, or a seeded sample.

    When the full product has more than ``cap`` elements a deterministic
    sample of size ``cap`` is drawn; the constant controls are always in it.
    """
    if n_steps < 1 or cap < 1:
        raise ValidationError("n_steps and cap must be >= 1")
    k = len(uset)
    total = k**n_steps
    if total <= cap:
        return [ScenarioControl(horizon, tuple(c)) for c in itertools.product(range(k), repeat=n_steps)]
    chosen = [tuple([i] * n_steps) for i in range(k)]
    seen = set(chosen)
    rng = np.random.default_rng([int(seed), n_steps, k, 0x5C3])
    while len(chosen) < cap:
        c = tuple(int(i) for i in rng.integers(0, k, size=n_steps))
        if c not in seen:
            seen.add(c)
            chosen.append(c)
    return [ScenarioControl(horizon, c) for c in chosen]


def constant_control(uset: UncertaintySet, index: int, n_steps: int, horizon: float = 1.0) -> ScenarioControl:
    if not 0 <= index < len(uset):
        raise ValidationError("control index out of range")
    return ScenarioControl(horizon, tuple([index] * n_steps))


def extreme_index(uset: UncertaintySet, which: str = "max") -> int:
    """Index of the largest (or smallest) variance in a d = 1 set."""
    v = [float(s[0, 0]) for s in uset.sigmas] if uset.dim == 1 else [float(np.trace(s)) for s in uset.sigmas]
    return int(np.argmax(v) if which == "max" else np.argmin(v))
