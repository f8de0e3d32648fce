"""Flat key = value experiment configuration.

Example::

    # Example 1 convergence study
    command = converge         # optional; must agree with the CLI command
    preset = example1          # or give E and segments explicitly
    E = 1.5
    segment = 0.0, 0.5, linear, 0.0, 0.2     # x_left, x_right, kind, V coefficients
    segment = 0.5, 0.53125, linear, 1.5, 0.2
    segment = 0.53125, 1.0, linear, 0.0, 0.2
    eps = 0.1, 0.01, 0.001
    h_exponents = 4:12         # h = 2^-4 ... 2^-12 (or: h = 0.0625, 0.03125)
    ref_exponent = 18          # converge: reference grid width 2^-18
    eval_points = 1000         # evanescent sample size for error norms
    workers = 1
    layout = auto              # or one-zone / two-zone / three-zone

Blank lines and ``#`` comments are ignored. ``segment`` may repeat; every
other key may appear once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

from .errors import ConfigError
from .field import CoefficientField, PotentialSegment, SUPPORTED_LAYOUTS
from .presets import PRESETS

COMMANDS = ("solve", "converge", "condition", "preset")
_KEYS = {
    "command",
    "preset",
    "E",
    "segment",
    "eps",
    "h",
    "h_exponents",
    "ref_exponent",
    "eval_points",
    "workers",
    "layout",
}
_LAYOUTS = {"auto"} | set(SUPPORTED_LAYOUTS.values())


@dataclass
class ExperimentConfig:
    E: float | None = None
    segments: list = dc_field(default_factory=list)
    preset: str | None = None
    command: str | None = None
    eps: list = dc_field(default_factory=list)
    h_exponents: list = dc_field(default_factory=list)
    ref_exponent: int = 18
    eval_points: int = 1000
    workers: int = 1
    layout: str = "auto"
    path: str | None = None

    @property
    def h_list(self):
        return [2.0**-k for k in self.h_exponents]

    def build_field(self) -> CoefficientField:
        if self.segments:
            return CoefficientField(self.E, self.segments)
        return PRESETS[self.preset].field_factory()

    def resolved_lines(self):
        """Resolved configuration as ``key = value`` lines (for output headers)."""
        field = self.build_field()
        lines = []
        if self.command:
            lines.append(f"command = {self.command}")
        if self.preset:
            lines.append(f"preset = {self.preset}")
        lines.append(f"E = {field.E!r}")
        for seg in field.segments:
            coeffs = ", ".join(repr(c) for c in seg.coeffs)
            lines.append(f"segment = {seg.x_left!r}, {seg.x_right!r}, {seg.kind}, {coeffs}")
        lines.append("eps = " + ", ".join(repr(e) for e in self.eps))
        lines.append("h_exponents = " + ", ".join(str(k) for k in self.h_exponents))
        lines.append(f"ref_exponent = {self.ref_exponent}")
        lines.append(f"eval_points = {self.eval_points}")
        lines.append(f"layout = {self.layout}")
        return lines


def _fail(msg, line=None, path=None):
    raise ConfigError(msg, line=line, path=path)


def _floats(text, lineno, path):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        _fail(f"expected comma-separated numbers, got {text!r}", lineno, path)


def _int(text, lineno, path):
    try:
        return int(text)
    except ValueError:
        _fail(f"expected an integer, got {text!r}", lineno, path)


def _h_exponents(text, lineno, path):
    text = text.strip()
    if ":" in text:
        lo, _, hi = text.partition(":")
        a, b = _int(lo.strip(), lineno, path), _int(hi.strip(), lineno, path)
        return list(range(a, b + 1)) if a <= b else list(range(a, b - 1, -1))
    return [_int(t.strip(), lineno, path) for t in text.split(",") if t.strip()]


def _h_values(text, lineno, path):
    out = []
    for h in _floats(text, lineno, path):
        if not h > 0.0:
            _fail(f"mesh width {h!r} must be positive", lineno, path)
        k = -math.log2(h)
        if abs(k - round(k)) > 1e-12:
            _fail(f"mesh width {h!r} is not a power of two", lineno, path)
        out.append(int(round(k)))
    return out


def parse_config(text, path=None) -> ExperimentConfig:
    cfg = ExperimentConfig(path=str(path) if path is not None else None)
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            _fail(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in _KEYS:
            _fail(f"unknown key {key!r}", lineno, path)
        if key != "segment" and key in seen:
            _fail(f"duplicate key {key!r} (first set on line {seen[key]})", lineno, path)
        seen[key] = lineno
        if key == "command":
            if value not in COMMANDS:
                _fail(f"unknown command {value!r}; choose from {list(COMMANDS)}", lineno, path)
            cfg.command = value
        elif key == "preset":
            if value not in PRESETS:
                _fail(f"unknown preset {value!r}; choose from {sorted(PRESETS)}", lineno, path)
            cfg.preset = value
        elif key == "E":
            cfg.E = _floats(value, lineno, path)[0] if value else _fail("empty E", lineno, path)
        elif key == "segment":
            parts = [p.strip() for p in value.split(",")]
            if len(parts) < 4:
                _fail("segment needs x_left, x_right, kind and coefficients", lineno, path)
            try:
                xl, xr = float(parts[0]), float(parts[1])
                coeffs = tuple(float(c) for c in parts[3:])
                seg = PotentialSegment(xl, xr, coeffs, parts[2])
            except ValueError as exc:
                _fail(f"bad segment: {exc}", lineno, path)
            cfg.segments.append(seg)
        elif key == "eps":
            cfg.eps = _floats(value, lineno, path)
            if not cfg.eps:
                _fail("empty eps list", lineno, path)
            if any(not e > 0.0 for e in cfg.eps):
                _fail("eps values must be positive", lineno, path)
        elif key == "h":
            cfg.h_exponents = _h_values(value, lineno, path)
        elif key == "h_exponents":
            cfg.h_exponents = _h_exponents(value, lineno, path)
        elif key == "ref_exponent":
            cfg.ref_exponent = _int(value, lineno, path)
            if not 14 <= cfg.ref_exponent <= 22:
                _fail("ref_exponent must lie in [14, 22]", lineno, path)
        elif key == "eval_points":
            cfg.eval_points = _int(value, lineno, path)
            if cfg.eval_points < 0:
                _fail("eval_points must be non-negative", lineno, path)
        elif key == "workers":
            cfg.workers = _int(value, lineno, path)
            if cfg.workers < 1:
                _fail("workers must be >= 1", lineno, path)
        elif key == "layout":
            if value not in _LAYOUTS:
                _fail(f"unknown layout {value!r}; choose from {sorted(_LAYOUTS)}", lineno, path)
            cfg.layout = value
    if "h" in seen and "h_exponents" in seen:
        _fail("give either h or h_exponents, not both", seen["h_exponents"], path)
    if cfg.segments and cfg.preset:
        _fail("give either a preset or explicit segments, not both", seen["preset"], path)
    if cfg.segments and cfg.E is None:
        _fail("explicit segments need an energy E", seen["segment"], path)
    if not cfg.segments and not cfg.preset:
        _fail("no potential: give a preset or E plus segments", None, path)
    if cfg.preset:
        pre = PRESETS[cfg.preset]
        if "eps" not in seen:
            cfg.eps = list(pre.eps)
        if "h" not in seen and "h_exponents" not in seen:
            cfg.h_exponents = list(pre.h_exponents)
    if not cfg.eps:
        _fail("empty eps list", seen.get("eps"), path)
    if not cfg.h_exponents:
        _fail("empty h list", seen.get("h", seen.get("h_exponents")), path)
    hs = cfg.h_exponents
    if any(b <= a for a, b in zip(hs, hs[1:])):
        _fail("h list must be strictly decreasing", seen.get("h", seen.get("h_exponents")), path)
    if cfg.segments:
        try:
            CoefficientField(cfg.E, cfg.segments)
        except ValueError as exc:
            _fail(str(exc), seen["segment"], path)
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(p)) from exc
    return parse_config(text, path=str(p))
