"""Parsing of ``name(arg, ...)`` catalog references used in configs."""
import re

from .errors import ConfigError

_CALL = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\((.*)\))?\s*$")


def parse_call(spec: str, table: dict, key: str | None = None):
    """Split ``"name(1.5, 2)"`` into ("name", [1.5, 2.0]) and validate arity.

    ``table`` maps names to tuples whose second entry is the number of
    required arguments (an int) or a (min, max) pair.
    """
    m = _CALL.match(spec)
    if not m:
        raise ConfigError(f"cannot parse catalog reference {spec!r}", key)
    name, argstr = m.group(1), m.group(2)
    if name not in table:
        raise ConfigError(f"unknown catalog name {name!r} (known: {', '.join(sorted(table))})", key)
    args = []
    if argstr is not None and argstr.strip():
        for a in argstr.split(","):
            try:
                args.append(float(a))
            except ValueError:
                raise ConfigError(f"non-numeric argument {a.strip()!r} in {spec!r}", key) from None
    arity = table[name][1]
    lo, hi = (arity, arity) if isinstance(arity, int) else arity
    if not lo <= len(args) <= hi:
        raise ConfigError(f"{name} takes {lo}..{hi} arguments, got {len(args)}", key)
    return name, args
