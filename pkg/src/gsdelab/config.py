"""Strict ``key = value`` experiment configuration.

A config has an ``[experiment]`` section naming the ``kind`` plus the
sections that kind accepts.  Unknown sections and keys are rejected with a
:class:`ConfigError` naming ``section.key``.  Every key has a type and a
default, so the resolved config (written to manifest.txt) is complete.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass

from .errors import ConfigError

KINDS = ("gheat", "expect", "sde", "picard", "bihari", "bsde", "mollify", "axioms")


def _str(v):
    return v.strip()


def _bool(v):
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _floats(v):
    return [float(x) for x in v.replace(";", ",").split(",") if x.strip()]


def _pos_int(v):
    n = int(v)
    if n < 1:
        raise ValueError("must be >= 1")
    return n


def _nonneg_int(v):
    n = int(v)
    if n < 0:
        raise ValueError("must be >= 0")
    return n


def _pos_float(v):
    x = float(v)
    if not x > 0:
        raise ValueError("must be > 0")
    return x


def _nonneg_float(v):
    x = float(v)
    if not x >= 0:
        raise ValueError("must be >= 0")
    return x


def _opt_float(v):
    return None if v.strip().lower() in ("", "none", "auto") else float(v)


def _caps(v):
    if v.strip().lower() in ("none", "off", ""):
        return None
    return tuple(_floats(v))


EXPERIMENT = {"kind": (_str, None), "seed": (_nonneg_int, "1"), "threads": (_pos_int, "1"), "out": (_str, "")}
UNCERTAINTY = {"sigma2_min": (_opt_float, "none"), "sigma2_max": (_opt_float, "none"),
               "n_interior": (_nonneg_int, "0"), "gammas": (_str, "")}
GRID = {"horizon": (_pos_float, "1.0"), "n_steps": (_pos_int, "64")}
SDE_COMMON = {"b": (_str, "zero"), "sigma": (_str, "constant_sigma(1)"), "h": (_str, ""), "x0": (_floats, "0.0"),
              "regime": (_str, "H1H2"), "beta": (_pos_float, "1.0"), "n_paths": (_pos_int, "1000"),
              "control_cap": (_pos_int, "8")}

SCHEMA = {
    "gheat": {"gheat": {"phi": (_str, "square"), "t": (_pos_float, "1.0"), "n_x": (_pos_int, "401"),
                        "half_width": (_opt_float, "auto"), "cfl": (_pos_float, "0.9"),
                        "boundary": (_str, "linear-extrapolation")}},
    "expect": {"grid": GRID,
               "expect": {"payoffs": (_str, "square"), "n_paths": (_pos_int, "10000"),
                          "control_cap": (_pos_int, "16"), "lattice": (_bool, "true"),
                          "lattice_steps": (_pos_int, "200"), "dx_scale": (_pos_float, "1.0")}},
    "sde": {"grid": GRID, "sde": {**SDE_COMMON, "export_path": (_nonneg_int, "0")}},
    "picard": {"grid": GRID,
               "picard": {**SDE_COMMON, "n_iter": (_pos_int, "12"), "n_inner": (_nonneg_int, "0"),
                          "tol": (_nonneg_float, "0.0"), "caps": (_caps, "4, 16, 64, 256"),
                          "memory_budget_mb": (_pos_int, "2048")}},
    "bihari": {"bihari": {"rho": (_str, "linear(1)"), "a": (_nonneg_float, "1.0"), "t": (_pos_float, "1.0"),
                          "beta": (_nonneg_float, "1.0"), "beta_steps": (_str, ""),
                          "anchor": (_pos_float, "1.0"), "n_points": (_pos_int, "11")}},
    "bsde": {"grid": GRID,
             "bsde": {"xi": (_str, "square"), "f": (_str, "zero"), "g": (_str, "zero"),
                      "n_iter": (_pos_int, "50"), "tol": (_nonneg_float, "1e-12"),
                      "dx_scale": (_pos_float, "1.0")}},
    "mollify": {"mollify": {"g": (_str, "abs"), "width": (_pos_float, "0.1"), "n_points": (_pos_int, "401"),
                            "x_min": (float, "-1.0"), "x_max": (float, "1.0"),
                            "quad_points": (_nonneg_int, "0")}},
    "axioms": {"grid": GRID,
               "axioms": {"payoff_x": (_str, "square"), "payoff_y": (_str, "tanh"), "lam": (_nonneg_float, "2.0"),
                          "c": (float, "1.0"), "n_paths": (_pos_int, "10000"), "control_cap": (_pos_int, "27"),
                          "tol": (_nonneg_float, "1e-12")}},
}
NEEDS_UNCERTAINTY = {"gheat", "expect", "sde", "picard", "bsde", "axioms"}


@dataclass
class ExperimentConfig:
    kind: str
    sections: dict
    source: str = ""

    def __getitem__(self, section):
        return self.sections[section]

    def resolved_text(self) -> str:
        lines = []
        for sec, vals in self.sections.items():
            lines.append(f"[{sec}]")
            for k, v in vals.items():
                lines.append(f"{k} = {_fmt(v)}")
            lines.append("")
        return "\n".join(lines)


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, (list, tuple)):
        return ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v).lower() if isinstance(v, bool) else str(v)


def _parse_section(name, raw: dict, spec: dict) -> dict:
    out = {}
    for key in raw:
        if key not in spec:
            raise ConfigError(f"unknown key '{name}.{key}' (allowed: {', '.join(spec)})", f"{name}.{key}")
    for key, (conv, default) in spec.items():
        text = raw.get(key, default)
        if text is None:
            raise ConfigError(f"missing required key '{name}.{key}'", f"{name}.{key}")
        try:
            out[key] = conv(text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for '{name}.{key}': {text!r} ({exc})", f"{name}.{key}") from None
    return out


def parse_config(text: str, source: str = "") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), strict=True,
                                   default_section="__none__")
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}", None) from None
    if "experiment" not in cp:
        raise ConfigError("missing [experiment] section", "experiment")
    exp = _parse_section("experiment", dict(cp["experiment"]), EXPERIMENT)
    kind = exp["kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r} (known: {', '.join(KINDS)})", "experiment.kind")
    allowed = {"experiment": EXPERIMENT, **SCHEMA[kind]}
    if kind in NEEDS_UNCERTAINTY:
        allowed["uncertainty"] = UNCERTAINTY
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(f"unknown section [{sec}] for kind {kind!r} (allowed: {', '.join(allowed)})", sec)
    sections = {"experiment": exp}
    for sec, spec in allowed.items():
        if sec != "experiment":
            sections[sec] = _parse_section(sec, dict(cp[sec]) if sec in cp else {}, spec)
    cfg = ExperimentConfig(kind, sections, source)
    if kind in NEEDS_UNCERTAINTY:
        u = sections["uncertainty"]
        has_interval = u["sigma2_min"] is not None or u["sigma2_max"] is not None
        if has_interval and u["gammas"]:
            raise ConfigError("give either sigma2_min/sigma2_max or gammas, not both", "uncertainty.gammas")
        if not has_interval and not u["gammas"]:
            u["sigma2_min"], u["sigma2_max"] = 0.5, 1.0
        elif has_interval and (u["sigma2_min"] is None or u["sigma2_max"] is None):
            raise ConfigError("sigma2_min and sigma2_max must be given together", "uncertainty.sigma2_min")
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}", None) from None
    return parse_config(text, str(path))
