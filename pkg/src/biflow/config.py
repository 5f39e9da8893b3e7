"""Experiment configuration: a small ``[section]`` / ``key = value`` text format.

Keys before the first section header are global.  A key may also be given
in dotted form (``grid.N = 17``) anywhere at global level.  Lists are comma
separated; integer lists also accept ``a:b`` for ``range(a, b)``.  ``#`` and
``;`` start comments.
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigParseError

KINDS = ("flow", "convexity-intrinsic", "convexity-extrinsic", "uniqueness", "hardy",
         "green", "monotonicity", "eps-regularity", "operator-selftest")
BOUNDARIES = ("constant", "great-circle")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    N: int = 17
    n: int = 2
    eps0: float = 0.05
    amplitudes: tuple = (0.02, 0.05, 0.1)
    seeds: tuple = (0, 1, 2)
    boundary: str = "constant"
    alpha: float = 0.3
    amplitude: float = 0.03
    max_steps: int = 200_000
    max_snapshots: int = 40
    tol_residual: float = 1e-8
    tol_monotone: float = 1e-3
    tol_hardy: float = 0.05
    hardy_K: int = 50
    max_degree: int = 4
    centers: int = 5
    output_dir: str = "biflow-out"
    write_snapshots: bool = False

    @property
    def m(self) -> int:
        return self.n + 1


# key -> (attribute, parser, check, message)
def _odd_ge5(v):
    return v >= 5 and v % 2 == 1


_SCHEMA = {
    "kind": ("kind", "str", lambda v: v in KINDS, f"kind must be one of {', '.join(KINDS)}"),
    "eps0": ("eps0", "float", lambda v: 0 < v <= 1, "eps0 must be in (0, 1]"),
    "amplitudes": ("amplitudes", "floats", lambda v: len(v) > 0 and all(0 <= a <= 1 for a in v),
                   "amplitudes must be a non-empty list in [0, 1]"),
    "seeds": ("seeds", "ints", lambda v: len(v) > 0 and all(s >= 0 for s in v),
              "seeds must be a non-empty list of non-negative integers"),
    "grid.N": ("N", "int", _odd_ge5, "N must be odd ≥ 5"),
    "sphere.n": ("n", "int", lambda v: 1 <= v <= 8, "n must be in 1..8"),
    "data.boundary": ("boundary", "str", lambda v: v in BOUNDARIES,
                      f"boundary must be one of {', '.join(BOUNDARIES)}"),
    "data.alpha": ("alpha", "float", lambda v: 0 <= v <= 3.2, "alpha must be in [0, 3.2]"),
    "data.amplitude": ("amplitude", "float", lambda v: 0 <= v <= 1, "amplitude must be in [0, 1]"),
    "flow.max_steps": ("max_steps", "int", lambda v: v >= 1, "max_steps must be ≥ 1"),
    "flow.max_snapshots": ("max_snapshots", "int", lambda v: v >= 2, "max_snapshots must be ≥ 2"),
    "tolerances.residual": ("tol_residual", "float", lambda v: 0 < v < 1, "residual tolerance must be in (0, 1)"),
    "tolerances.monotone": ("tol_monotone", "float", lambda v: 0 <= v < 1, "monotone tolerance must be in [0, 1)"),
    "tolerances.hardy": ("tol_hardy", "float", lambda v: 0 < v < 1, "hardy tolerance must be in (0, 1)"),
    "hardy.K": ("hardy_K", "int", lambda v: v >= 1, "K must be ≥ 1"),
    "monotonicity.max_degree": ("max_degree", "int", lambda v: 0 <= v <= 6, "max_degree must be in 0..6"),
    "monotonicity.centers": ("centers", "int", lambda v: v >= 1, "centers must be ≥ 1"),
    "output.dir": ("output_dir", "str", lambda v: len(v) > 0, "output directory must be non-empty"),
    "output.snapshots": ("write_snapshots", "bool", lambda v: True, ""),
}
_BY_ATTR = {entry[0]: key for key, entry in _SCHEMA.items()}

_SECTION = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")
_ASSIGN = re.compile(r"^([A-Za-z_][\w.]*)\s*=\s*(.*)$")


def _strip_comment(line: str) -> str:
    out, quote = [], None
    for ch in line:
        if quote:
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch in "#;":
            break
        out.append(ch)
    return "".join(out).strip()


def _unquote(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _convert(kind: str, text: str):
    text = text.strip()
    if kind == "str":
        return _unquote(text)
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    body = text.strip("[]() ")
    items = [t.strip() for t in body.split(",") if t.strip()]
    if kind == "floats":
        return tuple(float(t) for t in items)
    out = []
    for t in items:
        if ":" in t:
            a, b = (int(s) for s in t.split(":"))
            out.extend(range(a, b))
        else:
            out.append(int(t))
    return tuple(out)


def parse_config_text(text: str) -> ExperimentConfig:
    values, seen = {}, {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section = m.group(1)
            continue
        m = _ASSIGN.match(line)
        if not m:
            raise ConfigParseError(f"expected 'key = value' or '[section]', got {raw.strip()!r}", lineno)
        key, val = m.group(1), m.group(2)
        full = f"{section}.{key}" if section and "." not in key else key
        if full not in _SCHEMA:
            raise ConfigParseError(f"unknown key {full!r}", lineno)
        if full in seen:
            raise ConfigParseError(f"duplicate key {full!r} (first set on line {seen[full]})", lineno)
        attr, kind, check, message = _SCHEMA[full]
        try:
            parsed = _convert(kind, val)
        except ValueError as exc:
            raise ConfigParseError(f"bad value for {full}: {exc}", lineno) from None
        if not check(parsed):
            raise ConfigParseError(f"{message} (got {val.strip()})", lineno)
        values[attr] = parsed
        seen[full] = lineno
    if "kind" not in values:
        raise ConfigParseError("missing required key 'kind'")
    return ExperimentConfig(**values)


def parse_config(path) -> ExperimentConfig:
    """Read and validate a config file; errors carry the offending line number."""
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str) and (value != value.strip() or any(ch in value for ch in "#;")):
        return f'"{value}"'
    return str(value)


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config_text(serialize(c)) == c``."""
    groups = {}
    for f in fields(cfg):
        section, _, name = _BY_ATTR[f.name].rpartition(".")
        groups.setdefault(section, []).append(f"{name} = {_format(getattr(cfg, f.name))}")
    lines = groups.pop("")
    for section, body in groups.items():
        lines += ["", f"[{section}]"] + body
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(serialize(cfg).encode("utf-8")).hexdigest()


def with_output(cfg: ExperimentConfig, path) -> ExperimentConfig:
    return replace(cfg, output_dir=str(path))
