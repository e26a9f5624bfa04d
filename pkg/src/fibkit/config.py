"""Run configuration: scene geometry, discretization, tolerances, seed.

Every command serializes its full configuration into the report it
writes, so a report names the exact scene that produced it.  Identical
configuration and seed give byte-identical outputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

try:
    import tomllib
except ImportError:                              # pragma: no cover
    import tomli as tomllib

TWO_PI = 2.0 * math.pi

# Documented defaults for every named check. --tol KEY=VAL overrides one.
DEFAULT_TOLERANCES = {
    "geom.compose_associativity": 1e-9,
    "geom.inversion_round_trip": 1e-9,
    "geom.chain_rule": 1e-6,
    "geom.spectral_accuracy": 0.25,
    "geom.jacobian_fd": 1e-6,
    "tubular.fiber_membership": 0.0,
    "tubular.idempotence_flat": 0.0,
    "tubular.idempotence_conformal": 1e-8,
    "tubular.vertical_invariance": 1e-10,
    "tubular.tube_invariance": 0.0,
    "chart.right_equivariance": 1e-8,
    "chart.double_sided_inverse": 1e-8,
    "chart.domain_invariance": 0.0,
    "chart.certificate_invariance": 0.0,
    "orbit.coset_round_trip": 1e-7,
    "orbit.factorization_round_trip": 1e-8,
    "orbit.section_form": 1e-8,
    "baseaction.left_equivariance": 1e-8,
    "baseaction.split_vanishing": 1e-9,
    "baseaction.split_fiber_energy": 1e-12,
    "baseaction.split_reconstruction": 8.9e-16,
    "baseaction.w_openness": 0.0,
    "transport.drift": 1e-6,
    "transport.connection_linearity": 1e-12,
    "transport.fiber_diffeo": 1e-6,
    "decompose.residual": 1e-9,
    "decompose.round_trip": 1e-8,
    "factorize.residual": 1e-8,
    "connect.residual": 1e-8,
    "trivialize.slice_defect": 1e-9,
    "trivialize.round_trip": 1e-8,
    "split.vanishing": 1e-9,
    "split.fiber_energy": 1e-12,
    "split.reconstruction": 8.9e-16,
    "convergence.monotone": 0.0,
    "convergence.cubic_slope": 0.7,
    "convergence.band_limited_floor": 1e-11,
}

_INTERP_SCHEMES = ("trig", "cubic")


class ConfigError(ValueError):
    """Invalid or unparsable run configuration."""


@dataclass(frozen=True)
class RunConfig:
    total_dim: int = 2
    base_dim: int = 1
    periods: tuple = (TWO_PI, TWO_PI)
    grid: tuple = (64, 64)
    interp: str = "trig"
    delta: float = TWO_PI / 8.0
    metric: str = "flat"
    conformal_factor: str | None = None
    seed: int = 42
    out_dir: str = "."
    step: float = 1.0 / 256.0
    tolerances: tuple = ()       # ((name, value), ...) overrides

    def __post_init__(self):
        if not 1 <= self.base_dim < self.total_dim:
            raise ConfigError(
                f"base dimension {self.base_dim} must lie in "
                f"[1, {self.total_dim - 1}]")
        if len(self.periods) != self.total_dim:
            raise ConfigError("one period per coordinate")
        if len(self.grid) != self.total_dim:
            raise ConfigError("one grid size per coordinate")
        if any(n < 8 for n in self.grid):
            raise ConfigError("grids below 8 nodes per axis are not supported")
        if self.interp not in _INTERP_SCHEMES:
            raise ConfigError(f"unknown interpolation scheme {self.interp!r}")
        if self.metric not in ("flat", "conformal"):
            raise ConfigError(f"unknown metric kind {self.metric!r}")
        if self.metric == "conformal" and not self.conformal_factor:
            raise ConfigError("conformal metric needs a factor file")
        if not self.delta > 0.0:
            raise ConfigError("tube radius must be positive")
        if not 0.0 < self.step <= 0.5:
            raise ConfigError("integration step must lie in (0, 0.5]")
        for name, _ in self.tolerances:
            if name not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance key {name!r}")

    def tolerance(self, name: str) -> float:
        for key, value in self.tolerances:
            if key == name:
                return float(value)
        return DEFAULT_TOLERANCES[name]

    def to_dict(self) -> dict:
        return {
            "total_dim": self.total_dim,
            "base_dim": self.base_dim,
            "periods": list(self.periods),
            "grid": list(self.grid),
            "interp": self.interp,
            "delta": self.delta,
            "metric": self.metric,
            "conformal_factor": self.conformal_factor,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "step": self.step,
            "tolerances": {k: v for k, v in sorted(self.tolerances)},
        }


def _coerce(raw: dict) -> RunConfig:
    known = {
        "total_dim": int, "base_dim": int, "interp": str, "delta": float,
        "metric": str, "conformal_factor": str, "seed": int, "out_dir": str,
        "step": float,
    }
    kwargs = {}
    for key, value in raw.items():
        if key in ("periods", "grid"):
            kwargs[key] = tuple(value)
        elif key == "tolerances":
            if not isinstance(value, dict):
                raise ConfigError("tolerances must be a table of name = value")
            kwargs[key] = tuple(sorted((str(k), float(v))
                                       for k, v in value.items()))
        elif key in known:
            kwargs[key] = known[key](value)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    if "grid" in kwargs:
        kwargs["grid"] = tuple(int(n) for n in kwargs["grid"])
    if "periods" in kwargs:
        kwargs["periods"] = tuple(float(p) for p in kwargs["periods"])
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> RunConfig:
    """Read a TOML (default) or JSON run configuration file."""
    try:
        if path.endswith(".json"):
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        else:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a table at top level")
    return _coerce(raw)


def apply_overrides(config: RunConfig, seed: int | None = None,
                    grid: tuple | None = None, out_dir: str | None = None,
                    tol: dict | None = None) -> RunConfig:
    """Fold command-line flags over a loaded configuration."""
    changes = {}
    if seed is not None:
        changes["seed"] = int(seed)
    if grid is not None:
        if len(grid) == 1:
            grid = grid * config.total_dim
        changes["grid"] = tuple(int(n) for n in grid)
    if out_dir is not None:
        changes["out_dir"] = str(out_dir)
    if tol:
        merged = dict(config.tolerances)
        for key, value in tol.items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance key {key!r}")
            merged[key] = float(value)
        changes["tolerances"] = tuple(sorted(merged.items()))
    return replace(config, **changes) if changes else config
