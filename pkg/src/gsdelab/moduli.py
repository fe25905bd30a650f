"""Continuity moduli rho and the Osgood divergence test.

Catalog (addressable by name in configs):

``linear(K)``    K r
``sqrt``         sqrt(r)
``rlogr``        r ln(1/r) on (0, 1/e], extended by the constant 1/e beyond
``rlogr_sqrt``   (1/2) rlogr: squared form of r (ln 1/r)^(1/2), i.e. for
                 s = r^2,  (r (ln 1/r)^(1/2))^2 = (1/2) s ln(1/s)
``rsqrtlog``     r (ln 1/r)^(1/2) on (0, e^(-1/2)], constant beyond
``table(path)``  user CSV of (r, rho(r)) rows, interpolated piecewise
                 linearly in log-log coordinates

The caps keep every catalog modulus concave and increasing on (0, inf).
"""
from __future__ import annotations

import csv
import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import ValidationError

UNDECIDED = None

_E1 = math.exp(-1.0)
_EH = math.exp(-0.5)


def sampled_increasing(fn: Callable, r: np.ndarray, rtol: float = 1e-12) -> bool:
    v = np.asarray(fn(r), dtype=np.float64)
    return bool(np.all(np.diff(v) >= -rtol * np.maximum(1.0, np.abs(v[1:]))))


def sampled_concave(fn: Callable, r: np.ndarray, rtol: float = 1e-9) -> bool:
    """Midpoint concavity on consecutive and spread-out pairs of ``r``."""
    r = np.sort(np.asarray(r, dtype=np.float64))
    pairs = [(r[:-1], r[1:]), (r[:-2], r[2:])]
    if len(r) > 8:
        pairs.append((r[: len(r) // 2], r[len(r) // 2:][: len(r) // 2]))
    for a, b in pairs:
        mid = np.asarray(fn(0.5 * (a + b)), dtype=np.float64)
        chord = 0.5 * (np.asarray(fn(a), dtype=np.float64) + np.asarray(fn(b), dtype=np.float64))
        if np.any(mid < chord - rtol * np.maximum(1.0, np.abs(chord))):
            return False
    return True


class Modulus:
    """A continuity modulus r -> rho(r) on (0, r_max).

    The constructor samples the function to set the ``increasing``,
    ``concave`` and ``vanishes_at_zero`` flags; ``require`` lists flags that
    must hold (ValidationError otherwise).  ``breakpoints`` are kinks the
    quadrature should know about.  ``osgood`` is computed on first access.
    """

    def __init__(self, fn: Callable, name: str, r_max: float = math.inf, breakpoints: Sequence[float] = (),
                 require: Sequence[str] = ("positive", "increasing", "vanishes_at_zero"),
                 r_min: float = 0.0, user_table: bool = False):
        self._fn = fn
        self.name = name
        self.r_max = float(r_max)
        self.r_min = float(r_min)
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.user_table = user_table
        hi = min(self.r_max, 1e3)
        lo = max(self.r_min, 1e-14)
        r = np.unique(np.concatenate([np.geomspace(lo, hi, 400), np.linspace(lo, hi, 200)[1:],
                                      [b for b in self.breakpoints if lo < b < hi]]))
        r = r[r < self.r_max] if math.isfinite(self.r_max) else r
        v = np.asarray(fn(r), dtype=np.float64)
        self.positive = bool(np.all(np.isfinite(v)) and np.all(v > 0))
        self.increasing = sampled_increasing(fn, r)
        self.concave = sampled_concave(fn, r)
        near0 = float(np.asarray(fn(np.array([lo])))[0])
        ref = float(np.asarray(fn(np.array([min(1.0, hi)])))[0])
        self.vanishes_at_zero = self.r_min > 0 or near0 <= 1e-6 * max(ref, 1e-300)
        self.continuous = bool(np.all(np.isfinite(v)))
        self._osgood = "unset"
        for flag in require:
            if not getattr(self, flag):
                raise ValidationError(f"modulus {name!r} fails the sampled '{flag}' check")

    def __call__(self, r):
        return self._fn(np.asarray(r, dtype=np.float64))

    evaluate = __call__

    def __repr__(self):
        return f"Modulus({self.name})"

    @property
    def osgood(self):
        if self._osgood == "unset":
            self._osgood = osgood_test(self)
        return self._osgood

    def __add__(self, other: "Modulus") -> "Modulus":
        f, g = self._fn, other._fn
        return Modulus(lambda r: f(r) + g(r), f"{self.name}+{other.name}", min(self.r_max, other.r_max),
                       self.breakpoints + other.breakpoints, r_min=max(self.r_min, other.r_min),
                       user_table=self.user_table or other.user_table)

    def scaled(self, c: float) -> "Modulus":
        if not c > 0:
            raise ValidationError("modulus scale must be positive")
        f = self._fn
        return Modulus(lambda r: c * f(r), f"{c:g}*{self.name}", self.r_max, self.breakpoints,
                       r_min=self.r_min, user_table=self.user_table)

    __rmul__ = scaled

    def composed_square_over_r(self) -> "Modulus":
        """r -> rho(r^2) / r (the rho_3 of a squared diffusion modulus)."""
        f = self._fn
        rm = math.sqrt(self.r_max) if math.isfinite(self.r_max) else math.inf
        return Modulus(lambda r: f(r * r) / r, f"{self.name}(r^2)/r", rm,
                       tuple(math.sqrt(b) for b in self.breakpoints if b > 0),
                       require=(), r_min=math.sqrt(self.r_min), user_table=self.user_table)


def _rlogr(r):
    r = np.asarray(r, dtype=np.float64)
    rr = np.where(r > 0, np.minimum(r, _E1), _E1)
    return np.where(r <= 0, 0.0, np.where(r < _E1, rr * np.log(1.0 / rr), _E1))


def _rsqrtlog(r):
    r = np.asarray(r, dtype=np.float64)
    rr = np.where(r > 0, np.minimum(r, _EH), _EH)
    return np.where(r <= 0, 0.0, np.where(r < _EH, rr * np.sqrt(np.log(1.0 / rr)), _EH * math.sqrt(0.5)))


def linear(k: float = 1.0) -> Modulus:
    if not k > 0:
        raise ValidationError("linear modulus needs K > 0")
    return Modulus(lambda r: k * r, f"linear({k:g})")


def sqrt_modulus() -> Modulus:
    return Modulus(np.sqrt, "sqrt")


def rlogr() -> Modulus:
    return Modulus(_rlogr, "rlogr", breakpoints=(_E1,))


def rlogr_sqrt() -> Modulus:
    return Modulus(lambda r: 0.5 * _rlogr(r), "rlogr_sqrt", breakpoints=(_E1,))


def rsqrtlog() -> Modulus:
    return Modulus(_rsqrtlog, "rsqrtlog", breakpoints=(_EH,))


def from_table(rs, vals, name: str = "table") -> Modulus:
    """Modulus from tabulated (r, rho(r)); log-log interpolation inside the
    table, power-law extrapolation below it and constant above it."""
    rs = np.asarray(rs, dtype=np.float64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.argsort(rs)
    rs, vals = rs[order], vals[order]
    if rs.size < 2 or np.any(rs <= 0) or np.any(vals <= 0):
        raise ValidationError("modulus table needs >= 2 rows with r > 0 and rho > 0")
    lr, lv = np.log(rs), np.log(vals)
    slope = (lv[1] - lv[0]) / (lr[1] - lr[0])

    def fn(r):
        r = np.asarray(r, dtype=np.float64)
        z = np.log(np.maximum(r, 1e-300))
        inside = np.interp(z, lr, lv)
        below = lv[0] + slope * (z - lr[0])
        return np.exp(np.where(z < lr[0], below, inside))

    return Modulus(fn, name, breakpoints=tuple(rs), r_min=float(rs[0]), user_table=True)


def read_table_csv(path) -> Modulus:
    rs, vs = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rs.append(float(row[0]))
                vs.append(float(row[1]))
            except (ValueError, IndexError):
                if rs:
                    raise ValidationError(f"bad modulus table row {row!r} in {path}") from None
    return from_table(rs, vs, name=f"table({path})")


CATALOG = {
    "linear": (linear, (0, 1), "K r"),
    "sqrt": (sqrt_modulus, 0, "sqrt(r); not Osgood"),
    "rlogr": (rlogr, 0, "r ln(1/r), constant 1/e beyond r = 1/e"),
    "rlogr_sqrt": (rlogr_sqrt, 0, "(1/2) r ln(1/r): squared form of r (ln 1/r)^(1/2)"),
    "rsqrtlog": (rsqrtlog, 0, "r (ln 1/r)^(1/2), constant beyond e^(-1/2)"),
    "table": (read_table_csv, 1, "table(path.csv) with rows r, rho(r)"),
}


def modulus(spec: str, key: str | None = None) -> Modulus:
    """Build a catalog modulus from ``name`` or ``name(args)``."""
    from .catalog import parse_call

    if spec.strip().startswith("table("):
        path = spec.strip()[len("table("):-1].strip()
        return read_table_csv(path)
    name, args = parse_call(spec, CATALOG, key)
    return CATALOG[name][0](*args)


# -- Osgood test --------------------------------------------------------------

def _inv_in_log(rho: Modulus):
    # d/dz of int ds/rho(s) with s = e^z
    return lambda z: math.exp(z) / float(rho(np.array([math.exp(z)]))[0])


def osgood_integrals(rho: Modulus, r_lo: Sequence[float], r_hi: float = 1.0) -> np.ndarray:
    """int_{r}^{r_hi} ds / rho(s) for each r in the decreasing sequence ``r_lo``."""
    f = _inv_in_log(rho)
    zs = [math.log(r_hi)] + [math.log(r) for r in r_lo]
    bps = sorted(math.log(b) for b in rho.breakpoints if b > 0)
    out, acc = [], 0.0
    for z_hi, z_lo in zip(zs[:-1], zs[1:]):
        pts = [b for b in bps if z_lo < b < z_hi][:50]
        val, _ = integrate.quad(f, z_lo, z_hi, points=pts or None, limit=200, epsabs=0.0, epsrel=1e-12)
        acc += val
        out.append(acc)
    return np.array(out)


def osgood_test(rho: Modulus, r_lo_sequence: Sequence[float] | None = None, cauchy_rtol: float = 1e-4,
                slope_tol: float = 0.02):
    """Classify int_0^1 dr / rho(r): True (divergent), False (convergent) or
    ``UNDECIDED`` (None).

    With L = ln(1/r) the integral is int f(L) dL, f = r / rho(r).  Divergence
    is declared when the local log-log slope of f against L stays >= -1
    (f decays no faster than 1/L, so the values keep growing); convergence
    when the per-decade increments shrink geometrically and the geometric
    tail is below ``cauchy_rtol`` of the running value.  Anything else,
    including tables too short to judge, is undecided.
    """
    if r_lo_sequence is None:
        r_lo_sequence = [10.0 ** (-k) for k in range(2, 13)]
    r_lo = np.array(sorted((float(r) for r in r_lo_sequence), reverse=True))
    if rho.r_min > 0:
        r_lo = r_lo[r_lo >= rho.r_min]
    if r_lo.size < 4:
        return UNDECIDED
    vals = osgood_integrals(rho, r_lo)
    inc = np.diff(vals)
    L = np.log(1.0 / r_lo)
    f = r_lo / np.asarray(rho(r_lo), dtype=np.float64)
    tail = slice(-4, None)
    slopes = np.diff(np.log(f[tail])) / np.diff(np.log(L[tail]))
    if np.all(slopes >= -1.0 - slope_tol) and np.all(inc > 0):
        return True
    if np.all(inc[-3:] > 0):
        q = inc[-3:][1:] / inc[-3:][:-1]
        if np.all(q < 0.8):
            qm = float(q.max())
            if inc[-1] * qm / (1 - qm) <= cauchy_rtol * abs(vals[-1]):
                return False
    elif np.all(inc[-3:] == 0):
        return False
    return UNDECIDED
