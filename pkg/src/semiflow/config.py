"""Flat ``key = value`` experiment configuration.

Lines are ``key = value`` with ``#`` comments; keys are dotted
(``resonant.mu``).  Every experiment declares its schema, and anything
outside it is rejected before computation starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .errors import ConfigError

EXPERIMENTS = ("verify", "mountain-pass", "resonant", "elliptic", "quotient-demo", "stability-probe")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _expr_float(text: str) -> float:
    # allow sqrt(2) and pi for frequencies
    import math

    t = text.strip()
    if t.startswith("sqrt(") and t.endswith(")"):
        return math.sqrt(float(t[5:-1]))
    if t == "pi":
        return math.pi
    return float(t)


def _freqs(text: str) -> tuple[float, ...]:
    return tuple(_expr_float(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "1", "on"):
        return True
    if t in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Key:
    parse: Callable
    default: object
    check: Callable = lambda v: True
    hint: str = ""


def _pos(v):
    return (v > 0) if not isinstance(v, tuple) else all(x > 0 for x in v) and len(v) > 0


def _nonneg(v):
    return v >= 0


SCHEMAS: dict[str, dict[str, Key]] = {
    "verify": {
        "verify.triples": Key(int, 100, _pos, "random semigroup triples"),
        "verify.metric_triples": Key(int, 1000, _pos),
        "verify.omega_cluster_tol": Key(float, 5e-4, _pos),
    },
    "mountain-pass": {
        "mp.problem": Key(str, "double-well", lambda v: v in ("double-well", "quartic2d"), "double-well | quartic2d"),
        "mp.path_nodes": Key(int, 20, lambda v: v >= 3),
        "mp.max_iters": Key(int, 500, _pos),
        "mp.dt": Key(float, 0.1, _pos),
        "mp.stall_tol": Key(float, 1e-7, _pos),
        "mp.max_gap": Key(float, 0.05, _pos),
        "mp.band": Key(float, 1e-3, _pos),
        "mp.residual_tol": Key(float, 1e-3, _pos),
    },
    "resonant": {
        "resonant.modes": Key(int, 16, lambda v: v >= 3),
        "resonant.mu": Key(float, 4.0, _pos),
        "resonant.f": Key(str, "arctan2", lambda v: v in ("arctan2", "tanh", "zero")),
        "resonant.g.frequencies": Key(_freqs, (1.0, 2**0.5)),
        "resonant.g.amplitudes": Key(_floats, (0.25, 0.25)),
        "resonant.c": Key(float, 30.0),
        "resonant.rho": Key(float, 5.0, _pos),
        "resonant.horizon": Key(float, 100.0, _pos),
        "resonant.seeds": Key(int, 200, _pos),
        "resonant.dt": Key(float, 0.05, _pos),
        "resonant.tol": Key(float, 1e-6, _pos),
        "resonant.search_seeds": Key(int, 2, _pos),
        "resonant.transient": Key(float, 1000.0, _nonneg),
        "resonant.record_horizon": Key(float, 10000.0, _pos),
        "resonant.eps": Key(float, 0.05, _pos),
        "resonant.l_grid": Key(_floats, (10.0, 25.0, 50.0, 100.0), _pos),
        "resonant.n_max": Key(int, 5, _pos),
    },
    "elliptic": {
        "elliptic.n": Key(int, 3, _pos),
        "elliptic.R_max": Key(float, 24.0, _pos),
        "elliptic.grid_points": Key(int, 2400, lambda v: v >= 16),
        "elliptic.a": Key(float, 1.0),
        "elliptic.gamma": Key(float, 0.5),
        "elliptic.b.amplitude": Key(float, 5.0, _nonneg),
        "elliptic.b.width": Key(float, 1.0, _pos),
        "elliptic.trial_count": Key(int, 1000, _pos),
        "elliptic.path_nodes": Key(int, 24, lambda v: v >= 3),
        "elliptic.band_c": Key(float, 10.0, _pos),
        "elliptic.energy_dt": Key(float, 1e-3, _pos),
        "elliptic.stability_samples": Key(int, 4, _pos),
    },
    "quotient-demo": {
        "quotient.horizon": Key(float, 5.0, _pos),
    },
    "stability-probe": {
        "stability.model": Key(str, "repeller", lambda v: v in ("repeller", "decay", "elliptic")),
        "stability.inner_radii": Key(_floats, (0.5, 1.0, 2.0), _pos),
        "stability.start_radii": Key(_floats, (0.25, 0.5, 1.0, 2.0, 4.0), _pos),
        "stability.samples": Key(int, 8, _pos),
        "stability.horizon": Key(float, 5.0, _pos),
        "stability.band_c": Key(float, 10.0, _pos),
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    seed: int = 0
    source: dict = field(default_factory=dict)  # raw text values as given

    def __getitem__(self, key):
        return self.params[key]


def parse_text(text: str, experiment: str, origin: str = "<config>") -> tuple[dict, dict]:
    if experiment not in SCHEMAS:
        raise ConfigError(f"unknown experiment {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    schema = SCHEMAS[experiment]
    params = {k: v.default for k, v in schema.items()}
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value', got {body!r}")
        key, value = (p.strip() for p in body.split("=", 1))
        if key not in schema:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r} for experiment {experiment!r}")
        if key in raw:
            raise ConfigError(f"{origin}:{lineno}: duplicate key {key!r}")
        entry = schema[key]
        try:
            val = entry.parse(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{origin}:{lineno}: bad value for {key!r}: {exc}") from None
        if not entry.check(val):
            raise ConfigError(f"{origin}:{lineno}: value {value!r} out of range for {key!r} {entry.hint}".rstrip())
        params[key] = val
        raw[key] = value
    return params, raw


def load(experiment: str, path=None, output_dir=".", seed: int = 0) -> ExperimentConfig:
    text = ""
    origin = "<defaults>"
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        origin = str(path)
    params, raw = parse_text(text, experiment, origin)
    return ExperimentConfig(experiment, params, Path(output_dir), int(seed), raw)
