"""Coefficient sets (b, h_ij, sigma_j) for forward G-SDEs.

Each coefficient is a :class:`Term`: a vectorised function (t, x) -> value
with x of shape (..., n) and value of shape (..., n), plus the data needed
for the growth and modulus conditions:

* ``growth = (a2, k2)`` with |f(t, x)|^2 <= a2 + k2 |x|^2;
* ``mod1``: |f(x) - f(y)| <= mod1(|x - y|)           (first moment form);
* ``mod2``: |f(x) - f(y)|^2 <= mod2(|x - y|^2)       (square form);
* ``None`` for a modulus means the term is constant in x (zero modulus).

Catalog terms act componentwise, so the moduli carry a factor n when the
componentwise bound does not sum exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ValidationError
from .moduli import Modulus, linear, rlogr, rlogr_sqrt, rsqrtlog

_E1 = math.exp(-1.0)
_EH = math.exp(-0.5)


@dataclass(frozen=True)
class Term:
    fn: Callable
    name: str
    growth: tuple = (0.0, 0.0)
    mod1: Modulus | None = None
    mod2: Modulus | None = None
    valid_h2: bool = True
    is_zero: bool = False

    def __call__(self, t, x):
        return self.fn(t, x)


def _signed(g):
    return lambda t, x: np.sign(x) * g(np.abs(x))


def zero(n: int = 1) -> Term:
    return Term(lambda t, x: np.zeros_like(np.asarray(x, dtype=np.float64)), "zero", is_zero=True)


def constant(c: float, n: int = 1) -> Term:
    c = float(c)
    if c == 0.0:
        return zero(n)
    return Term(lambda t, x: np.full_like(np.asarray(x, dtype=np.float64), c), f"constant({c:g})",
                growth=(n * c * c, 0.0))


def affine(k: float, c: float = 0.0, n: int = 1, label: str = "affine") -> Term:
    k, c = float(k), float(c)
    if k == 0.0:
        return constant(c, n)
    growth = (0.0, k * k) if c == 0.0 else (2 * n * c * c, 2 * k * k)
    fn = (lambda t, x: k * x) if c == 0.0 else (lambda t, x: k * x + c)
    return Term(fn, label, growth=growth, mod1=linear(abs(k)), mod2=linear(k * k))


def linear_drift(k: float, n: int = 1) -> Term:
    return affine(k, 0.0, n, f"linear_drift({k:g})")


def rlogr_drift(scale: float, n: int = 1) -> Term:
    """b_i = scale sign(x_i) rlogr(|x_i|): log-Lipschitz, first-moment form only."""
    s = float(scale)
    r = rlogr()
    g = _signed(lambda a: s * r(a))
    # |f|^2 <= n s^2 e^-2; the odd extension doubles the modulus across 0
    return Term(g, f"rlogr_drift({s:g})", growth=(n * s * s * _E1 * _E1, 0.0),
                mod1=(2 * s * n) * r if s > 0 else None, mod2=None, valid_h2=False)


def rlogr_sqrt_drift(scale: float, n: int = 1) -> Term:
    """b_i = scale sign(x_i) |x_i| (ln 1/|x_i|)^(1/2), capped; square modulus 4 s^2 n rlogr_sqrt."""
    s = float(scale)
    r = rsqrtlog()
    g = _signed(lambda a: s * r(a))
    return Term(g, f"rlogr_sqrt_drift({s:g})", growth=(0.5 * n * s * s * _E1, 0.0),
                mod1=(2 * s * n) * r, mod2=(4 * s * s * n) * rlogr_sqrt())


def constant_sigma(s: float, n: int = 1) -> Term:
    return replace(constant(s, n), name=f"constant_sigma({s:g})")


def lipschitz_sigma(k: float, c: float = 1.0, n: int = 1) -> Term:
    return affine(k, c, n, f"lipschitz_sigma({k:g},{c:g})")


def linear_h(k: float, n: int = 1) -> Term:
    return affine(k, 0.0, n, f"linear_h({k:g})")


def constant_h(c: float, n: int = 1) -> Term:
    return replace(constant(c, n), name=f"constant_h({c:g})")


CATALOG = {
    "zero": (zero, 0, "f = 0"),
    "constant": (constant, 1, "f = c"),
    "linear_drift": (linear_drift, 1, "b = k x"),
    "rlogr_drift": (rlogr_drift, 1, "b = scale sign(x) rlogr(|x|); first-moment regime only"),
    "rlogr_sqrt_drift": (rlogr_sqrt_drift, 1, "b = scale sign(x) |x| (ln 1/|x|)^(1/2), capped"),
    "constant_sigma": (constant_sigma, 1, "sigma = s"),
    "lipschitz_sigma": (lipschitz_sigma, (1, 2), "sigma = k x + c (c defaults to 1)"),
    "linear_h": (linear_h, 1, "h = k x"),
    "constant_h": (constant_h, 1, "h = c"),
}


def term(spec: str, n: int = 1, key: str | None = None) -> Term:
    from .catalog import parse_call

    name, args = parse_call(spec, CATALOG, key)
    return CATALOG[name][0](*args, n=n)


def _sum_mod(mods):
    mods = [m for m in mods if m is not None]
    if not mods:
        return None
    out = mods[0]
    for m in mods[1:]:
        out = out + m
    return out


@dataclass(frozen=True)
class CoefficientSet:
    """b, h = {(i, j): Term}, sigma = [Term] * d in dimension n.

    ``regime`` is "H1H2" (square modulus rho) or "H1pH2p" (first-moment
    modulus rho1 for b, h and square modulus rho2 for sigma).  Moduli are
    assembled from the terms; ``beta`` is a constant factor.
    """
    n: int
    b: Term
    sigma: tuple
    h: dict = field(default_factory=dict)
    regime: str = "H1H2"
    beta: float = 1.0

    def __post_init__(self):
        if self.regime not in ("H1H2", "H1pH2p"):
            raise ValidationError(f"unknown regime {self.regime!r}")
        object.__setattr__(self, "sigma", tuple(self.sigma))
        d = len(self.sigma)
        for (i, j) in self.h:
            if not (0 <= i < d and 0 <= j < d):
                raise ValidationError(f"h index {(i, j)} outside d = {d}")
        if self.regime == "H1H2":
            bad = [t.name for t in self.terms() if not t.valid_h2]
            if bad:
                raise ValidationError(f"terms {bad} have no square-form modulus; use regime H1pH2p")
            rho = self.rho
            if rho is not None and rho.osgood is False:
                raise ValidationError(f"modulus {rho.name} is not Osgood")
        else:
            r3 = self.rho3
            if r3 is not None:
                for flag in ("increasing", "concave", "vanishes_at_zero"):
                    if not getattr(r3, flag):
                        raise ValidationError(f"rho3 = {r3.name} fails the sampled '{flag}' check")
            s = self.rho13
            if s is not None and s.osgood is not True:
                raise ValidationError(f"rho1 + rho3 = {s.name} is not recognised as Osgood ({s.osgood})")

    @property
    def d(self) -> int:
        return len(self.sigma)

    def terms(self):
        return [self.b, *self.h.values(), *self.sigma]

    @property
    def has_h(self) -> bool:
        return any(not t.is_zero for t in self.h.values())

    @property
    def growth(self) -> tuple[float, float]:
        """(beta1^2, beta2^2) with |b|^2 + sum|h|^2 + sum|sigma|^2 <= beta1^2 + beta2^2 |x|^2."""
        return (sum(t.growth[0] for t in self.terms()), sum(t.growth[1] for t in self.terms()))

    @property
    def rho(self) -> Modulus | None:
        return _sum_mod([t.mod2 for t in self.terms()])

    @property
    def rho1(self) -> Modulus | None:
        return _sum_mod([self.b.mod1, *(t.mod1 for t in self.h.values())])

    @property
    def rho2(self) -> Modulus | None:
        return _sum_mod([t.mod2 for t in self.sigma])

    @property
    def rho3(self) -> Modulus | None:
        r2 = self.rho2
        return None if r2 is None else r2.composed_square_over_r()

    @property
    def rho13(self) -> Modulus | None:
        return _sum_mod([self.rho1, self.rho3])

    def evaluate(self, t, x):
        """(b, {ij: h_ij}, [sigma_j]) at (t, x)."""
        return self.b(t, x), {k: v(t, x) for k, v in self.h.items()}, [s(t, x) for s in self.sigma]

    def spot_check(self, n_samples: int = 2000, scale: float = 3.0, seed: int = 0, rtol: float = 1e-9) -> dict:
        """Sample the declared growth and modulus inequalities; returns the worst slacks (>= 0 is pass)."""
        rng = np.random.default_rng(seed)
        t = rng.uniform(0, 1, (n_samples, 1))
        x = rng.normal(0, scale, (n_samples, self.n)) * rng.choice([1e-4, 1e-2, 1.0], (n_samples, 1))
        y = x + rng.normal(0, 1, (n_samples, self.n)) * rng.choice([1e-8, 1e-4, 1e-2, 1.0], (n_samples, 1))

        def sq(v):
            return np.sum(np.asarray(v) ** 2, axis=-1)

        b, h, s = self.evaluate(t, x)
        tot = sq(b) + sum(sq(v) for v in h.values()) + sum(sq(v) for v in s)
        a2, k2 = self.growth
        rhs = a2 + k2 * sq(x)
        out = {"growth": float(np.min(rhs - tot + rtol * np.maximum(1, rhs)))}
        r = np.sqrt(sq(x - y))
        bx, hx, sx = b, h, s
        by, hy, sy = self.evaluate(t, y)
        if self.regime == "H1H2":
            lhs = sq(bx - by) + sum(sq(hx[k] - hy[k]) for k in hx) + sum(sq(p - q) for p, q in zip(sx, sy))
            rho = self.rho
            bound = self.beta ** 2 * rho(r * r) if rho is not None else np.zeros_like(r)
            out["modulus"] = float(np.min(bound - lhs + rtol * np.maximum(1, bound)))
        else:
            lhs1 = np.sqrt(sq(bx - by)) + sum(np.sqrt(sq(hx[k] - hy[k])) for k in hx)
            r1 = self.rho1
            b1 = self.beta * r1(r) if r1 is not None else np.zeros_like(r)
            lhs2 = sum(sq(p - q) for p, q in zip(sx, sy))
            r2 = self.rho2
            b2 = self.beta * r2(r * r) if r2 is not None else np.zeros_like(r)
            out["modulus1"] = float(np.min(b1 - lhs1 + rtol * np.maximum(1, b1)))
            out["modulus2"] = float(np.min(b2 - lhs2 + rtol * np.maximum(1, b2)))
        return out

    def validate(self, **kw) -> None:
        bad = {k: v for k, v in self.spot_check(**kw).items() if v < 0}
        if bad:
            raise ValidationError(f"declared coefficient bounds violated on samples: {bad}")


def _clip_fn(fn, cap: float):
    def clipped(t, x):
        v = np.asarray(fn(t, x), dtype=np.float64)
        nrm = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
        scale = np.where(nrm >= cap, cap / np.where(nrm > 0, nrm, 1.0), 1.0)
        return v * scale
    return clipped


def _clip_term(t: Term, cap: float) -> Term:
    if t.is_zero:
        return t
    a2, k2 = t.growth
    return replace(t, fn=_clip_fn(t.fn, cap), name=f"clip({t.name},{cap:g})",
                   growth=(min(a2, cap * cap) if k2 == 0 else cap * cap, 0.0))


def truncate_coefficients(coeffs: CoefficientSet, n_cap: float) -> CoefficientSet:
    """Radially clip b, each h_ij and each sigma_j to norm <= n_cap."""
    if not n_cap > 0:
        raise ValidationError("truncation cap N must be > 0")
    return replace(coeffs, b=_clip_term(coeffs.b, n_cap), sigma=tuple(_clip_term(s, n_cap) for s in coeffs.sigma),
                   h={k: _clip_term(v, n_cap) for k, v in coeffs.h.items()})


def make_coefficients(b: str, sigma, h=None, n: int = 1, regime: str = "H1H2", beta: float = 1.0) -> CoefficientSet:
    """Build a set from catalog strings; ``sigma`` is one spec or a list of d specs,
    ``h`` maps (i, j) to specs."""
    sig = [sigma] if isinstance(sigma, str) else list(sigma)
    return CoefficientSet(n=n, b=term(b, n, "b"), sigma=tuple(term(s, n, "sigma") for s in sig),
                          h={k: term(v, n, "h") for k, v in (h or {}).items()}, regime=regime, beta=beta)
