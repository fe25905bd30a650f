"""Upper (sublinear) expectations.

Two estimators bracket the G-expectation:

* ``open_loop_mc``: sup over a finite set of open-loop controls of Monte Carlo
  means, all scenarios sharing one noise sample.  Open-loop controls are a
  subset of the adapted ones, so this is a lower estimate of the sup.
* ``lattice_dp``: backward dynamic programming on a recombining trinomial
  lattice with a per-node maximisation over the alphabet (d = 1 only).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import kernels
from .errors import ValidationError
from .paths import PathBundle, TimeGrid, bundle_from_noise
from .rng import brownian_increments
from .uncertainty import ScenarioControl, UncertaintySet, enumerate_controls

Payoff = Callable[[PathBundle], np.ndarray]


@dataclass
class UpperExpectationEstimate:
    value: float
    stderr: float
    argmax_scenario: ScenarioControl
    n_paths: int
    n_scenarios: int
    mode: str
    seed: int | None = None
    scenario_means: np.ndarray | None = field(default=None, repr=False)
    scenario_stderrs: np.ndarray | None = field(default=None, repr=False)
    samples: np.ndarray | None = field(default=None, repr=False)
    controls: tuple | None = field(default=None, repr=False)
    payoff_id: str = ""

    def csv_row(self) -> dict:
        return {
            "payoff_id": self.payoff_id,
            "mode": self.mode,
            "value": repr(float(self.value)),
            "stderr": repr(float(self.stderr)),
            "n_paths": self.n_paths,
            "n_scenarios": self.n_scenarios,
            "argmax_scenario": self.argmax_scenario.run_length(),
            "seed": "" if self.seed is None else self.seed,
        }


ESTIMATE_COLUMNS = ["payoff_id", "mode", "value", "stderr", "n_paths", "n_scenarios", "argmax_scenario", "seed"]


def write_estimates_csv(estimates: Sequence[UpperExpectationEstimate], dest) -> None:
    with open(dest, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=ESTIMATE_COLUMNS)
        wr.writeheader()
        for e in estimates:
            wr.writerow(e.csv_row())


class MonteCarloSetup:
    """A fixed (uncertainty set, grid, control set, noise sample) quadruple.

    All payoffs estimated through one setup share scenarios and random
    numbers, which is what makes the sublinear-expectation axioms hold
    exactly on the estimator.
    """

    def __init__(self, uset: UncertaintySet, grid: TimeGrid, n_paths: int, seed: int,
                 controls: Sequence[ScenarioControl] | None = None, control_cap: int = 64,
                 threads: int = 1):
        if n_paths < 1:
            raise ValidationError("n_paths must be >= 1")
        if controls is None:
            controls = enumerate_controls(uset, grid.n_steps, control_cap, grid.horizon, seed)
        controls = tuple(controls)
        if not controls:
            raise ValidationError("empty control set")
        for c in controls:
            c.validate(uset)
        self.uset = uset
        self.grid = grid
        self.n_paths = int(n_paths)
        self.seed = int(seed)
        self.controls = controls
        self.threads = max(1, int(threads))
        self.w = brownian_increments(seed, n_paths, grid.n_steps, uset.dim, grid.dt, threads=self.threads)
        self.w.setflags(write=False)

    def bundle(self, control: ScenarioControl) -> PathBundle:
        return bundle_from_noise(self.uset, control, self.grid, self.w, self.seed)

    def samples(self, payoff: Payoff) -> np.ndarray:
        """Payoff values, shape (n_scenarios, n_paths)."""
        out = np.empty((len(self.controls), self.n_paths))

        def work(i):
            v = np.asarray(payoff(self.bundle(self.controls[i])), dtype=np.float64)
            out[i] = np.broadcast_to(v.reshape(-1) if v.ndim else v, (self.n_paths,))

        if self.threads == 1:
            for i in range(len(self.controls)):
                work(i)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(work, range(len(self.controls))))
        return out

    def estimate(self, payoff: Payoff, payoff_id: str = "") -> UpperExpectationEstimate:
        return estimate_from_samples(self.samples(payoff), self.controls, self.seed, payoff_id)

    def same_design(self, other: "MonteCarloSetup") -> bool:
        return other is self or (
            other.seed == self.seed and other.n_paths == self.n_paths
            and other.controls == self.controls and other.grid == self.grid
        )


def estimate_from_samples(samples: np.ndarray, controls, seed, payoff_id="") -> UpperExpectationEstimate:
    samples = np.asarray(samples, dtype=np.float64)
    n_scen, n_paths = samples.shape
    means = samples.mean(axis=1)
    if n_paths > 1:
        se = samples.std(axis=1, ddof=1) / math.sqrt(n_paths)
    else:
        se = np.zeros(n_scen)
    i = int(np.argmax(means))
    return UpperExpectationEstimate(
        value=float(means[i]), stderr=float(se[i]), argmax_scenario=controls[i], n_paths=n_paths,
        n_scenarios=n_scen, mode="open_loop_mc", seed=seed, scenario_means=means,
        scenario_stderrs=se, samples=samples, controls=tuple(controls), payoff_id=payoff_id)


def upper_expectation_mc(payoff: Payoff, uset: UncertaintySet, grid: TimeGrid, n_paths: int,
                         control_cap: int, seed: int, controls=None, threads: int = 1,
                         payoff_id: str = "") -> UpperExpectationEstimate:
    """Open-loop Monte Carlo estimate of sup_theta E_theta[payoff].

    The returned ``stderr`` is the standard error of the maximising
    scenario's mean.
    """
    setup = MonteCarloSetup(uset, grid, n_paths, seed, controls, control_cap, threads)
    return setup.estimate(payoff, payoff_id)


# -- axioms -----------------------------------------------------------------

@dataclass
class CheckReport:
    passed: bool
    slacks: dict
    tol: float
    note: str = ""

    def lines(self):
        for k, v in self.slacks.items():
            yield f"{k:<22s} slack={v: .3e}  {'ok' if v >= -self.tol else 'FAIL'}"


def _upper(s: np.ndarray) -> float:
    return float(np.max(np.mean(s, axis=1)))


def _check_pair(x: UpperExpectationEstimate, y: UpperExpectationEstimate):
    if x.samples is None or y.samples is None:
        raise ValidationError("axiom checks need estimates that retain their samples")
    if x.samples.shape != y.samples.shape or x.controls != y.controls or x.seed != y.seed:
        raise ValidationError("axiom checks need both payoffs on the same scenarios and random numbers")


def check_sublinearity(x: UpperExpectationEstimate, y: UpperExpectationEstimate, lam: float = 2.0,
                       c: float = 1.0, tol: float = 1e-12) -> CheckReport:
    """Verify the four sublinear-expectation axioms on the estimator.

    Monotonicity uses Z = max(X, Y), which dominates both.  Each slack is
    non-negative when the axiom holds (equalities report -|defect|).
    """
    _check_pair(x, y)
    if lam < 0:
        raise ValidationError("positive homogeneity needs lambda >= 0")
    X, Y = x.samples, y.samples
    ex, ey = _upper(X), _upper(Y)
    ez = _upper(np.maximum(X, Y))
    const = _upper(np.full_like(X, c))
    slacks = {
        "monotonicity": min(ez - ex, ez - ey),
        "constants": -abs(const - c),
        "sub_additivity": _upper(X - Y) - (ex - ey),
        "positive_homogeneity": -abs(_upper(lam * X) - lam * ex),
    }
    return CheckReport(all(v >= -tol for v in slacks.values()), slacks, tol)


def check_jensen_concave(x: UpperExpectationEstimate, rho, tol: float = 1e-12) -> CheckReport:
    """rho(E[X]) >= E[rho(X)] for concave increasing rho, on shared samples.

    ``rho`` is a :class:`~gsdelab.moduli.Modulus` or a plain vectorised
    callable; concavity is checked by sampling and a non-concave rho is
    reported with ``passed=False`` and the check skipped.
    """
    from .moduli import sampled_concave, sampled_increasing

    if x.samples is None:
        raise ValidationError("Jensen check needs an estimate that retains its samples")
    X = x.samples
    lo, hi = float(X.min()), float(X.max())
    fn = rho.evaluate if hasattr(rho, "evaluate") else rho
    if hi > lo:
        grid = np.linspace(lo, hi, 257)
        if not (sampled_concave(fn, grid) and sampled_increasing(fn, grid)):
            return CheckReport(False, {}, tol, note="rho is not concave increasing on the sample range; skipped")
    lhs = float(fn(np.asarray(_upper(X))))
    rhs = _upper(np.asarray(fn(X), dtype=np.float64))
    return CheckReport(lhs - rhs >= -tol, {"jensen": lhs - rhs}, tol)


# -- lattice ----------------------------------------------------------------

class Lattice:
    """Recombining trinomial lattice for d = 1 with moves {-1, 0, +1} dx.

    dx = dx_scale * sqrt(sigma2_max dt).  For volatility gamma the branch
    probabilities are p_up = p_down = gamma^2 dt / (2 dx^2), p_mid = 1 - 2 p_up,
    which is the unique symmetric (zero third moment) choice matching mean 0
    and variance gamma^2 dt; gamma = 0 stays put.
    """

    def __init__(self, grid: TimeGrid, uset: UncertaintySet, dx_scale: float = 1.0):
        if uset.dim != 1:
            raise ValidationError("the lattice estimator supports d = 1 only")
        if dx_scale < 1.0:
            raise ValidationError("dx_scale < 1 gives negative middle probabilities")
        self.grid = grid
        self.uset = uset
        self.dx_scale = float(dx_scale)
        var = np.array([float(s[0, 0]) for s in uset.sigmas])
        hi = float(var.max())
        base = hi if hi > 0 else 1.0
        self.dx = self.dx_scale * math.sqrt(base * grid.dt)
        q = var * grid.dt / (self.dx * self.dx)
        self.p_up = 0.5 * q
        self.p_down = 0.5 * q
        self.p_mid = 1.0 - q
        self.qv = var * grid.dt

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    def states(self, k: int) -> np.ndarray:
        return np.arange(-k, k + 1, dtype=np.float64) * self.dx

    def step(self, v_next, gvals=0.0, fvals=0.0):
        """One backward step; see :func:`gsdelab.kernels.lattice_step`."""
        m = len(v_next) - 2
        gv = np.broadcast_to(np.asarray(gvals, dtype=np.float64), (m,))
        fv = np.broadcast_to(np.asarray(fvals, dtype=np.float64), (m,))
        return kernels.lattice_step(v_next, self.p_down, self.p_mid, self.p_up, self.qv, gv, fv, self.grid.dt)


def _terminal_values(lattice: Lattice, terminal) -> np.ndarray:
    n = lattice.n_steps
    if callable(terminal):
        vals = np.asarray(terminal(lattice.states(n)), dtype=np.float64)
    else:
        vals = np.asarray(terminal, dtype=np.float64)
    if vals.shape != (2 * n + 1,):
        raise ValidationError(f"terminal data must have {2 * n + 1} node values, got shape {vals.shape}")
    if not np.all(np.isfinite(vals)):
        raise ValidationError("terminal data must be finite")
    return vals


def conditional_g_expectation(lattice: Lattice, terminal, uset: UncertaintySet | None = None,
                              return_policy: bool = False):
    """Backward DP  value(node, k) = max_gamma sum p_gamma value(child, k+1).

    ``terminal`` is an array over the 2N + 1 final nodes or a callable of the
    node states.  Returns the list of value layers (index k has 2k + 1
    entries); with ``return_policy`` also the per-layer argmax indices.
    """
    if uset is not None and uset is not lattice.uset:
        if len(uset) != len(lattice.uset) or any(
                not np.array_equal(a, b) for a, b in zip(uset.sigmas, lattice.uset.sigmas)):
            raise ValidationError("lattice was built for a different uncertainty set")
    v = _terminal_values(lattice, terminal)
    layers = [None] * (lattice.n_steps + 1)
    policy = [None] * lattice.n_steps
    layers[-1] = v
    for k in range(lattice.n_steps - 1, -1, -1):
        v, arg = lattice.step(v)
        layers[k] = v
        policy[k] = arg
    if return_policy:
        return layers, policy
    return layers


def upper_expectation_lattice(phi: Callable, uset: UncertaintySet, grid: TimeGrid,
                              dx_scale: float = 1.0, payoff_id: str = "") -> UpperExpectationEstimate:
    """Lattice estimate of E[phi(B_T)] (a G-normal expectation for d = 1)."""
    lat = Lattice(grid, uset, dx_scale)
    layers, policy = conditional_g_expectation(lat, phi, return_policy=True)
    ctrl = ScenarioControl(grid.horizon, (), mode="feedback", policy=tuple(tuple(int(i) for i in p) for p in policy))
    return UpperExpectationEstimate(
        value=float(layers[0][0]), stderr=0.0, argmax_scenario=ctrl, n_paths=0,
        n_scenarios=len(uset), mode="lattice_dp", payoff_id=payoff_id)
