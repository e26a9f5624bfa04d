"""Paths of fibrations and fiber transport along them.

A path assigns a fibration to each parameter value, either by analytic
time coefficients multiplying fixed displacement fields or by splining
sampled snapshots.  Transport integrates the unique velocity field that
is orthogonal to the fibers and cancels the parameter drift of the
fibration family, so the flow maps carry the reference fibers onto the
moving ones.  Fixed-step integration keeps runs bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline, make_interp_spline

from .errors import DriftExceeded, RankDeficient, ShapeMismatch
from .gridmap import (Certificate, GridMap, diffeo_certificate,
                      identity_reference)
from .interpolation import make_interpolant
from .torus import Point, minimal_difference

CLOSURE_TOL = 1e-10


class TimeTerm(NamedTuple):
    """One separable term of a displacement family: coefficient(t) * field.

    kind "poly" takes polynomial coefficients (a0, a1, ...) in params;
    "sin"/"cos" take a single integer cycle count over the unit interval.
    """

    field: np.ndarray
    kind: str
    params: tuple

    def coefficient(self, t: float) -> float:
        if self.kind == "poly":
            return float(np.polynomial.polynomial.polyval(t, self.params))
        freq = 2.0 * np.pi * self.params[0]
        if self.kind == "sin":
            return float(np.sin(freq * t))
        if self.kind == "cos":
            return float(np.cos(freq * t))
        raise ValueError(f"unknown time dependence {self.kind!r}")

    def rate(self, t: float) -> float:
        if self.kind == "poly":
            deriv = np.polynomial.polynomial.polyder(self.params)
            return float(np.polynomial.polynomial.polyval(t, deriv))
        freq = 2.0 * np.pi * self.params[0]
        if self.kind == "sin":
            return float(freq * np.cos(freq * t))
        return float(-freq * np.sin(freq * t))


def poly_term(field: np.ndarray, *coefficients: float) -> TimeTerm:
    return TimeTerm(np.asarray(field, dtype=float), "poly", tuple(coefficients))


def sin_term(field: np.ndarray, cycles: int = 1) -> TimeTerm:
    return TimeTerm(np.asarray(field, dtype=float), "sin", (cycles,))


def cos_term(field: np.ndarray, cycles: int = 1) -> TimeTerm:
    return TimeTerm(np.asarray(field, dtype=float), "cos", (cycles,))


@dataclass(frozen=True)
class AnalyticPath:
    """Fibration family template + sum of time terms.

    The template fixes shapes, grid, interpolation, and a constant
    displacement part; each term adds coefficient(t) times its field.
    """

    template: GridMap
    terms: tuple
    checkpoints: int = 9

    def __post_init__(self):
        if self.template.reference_name != "coordproj":
            raise ShapeMismatch("paths are families of fibrations")
        want = self.template.grid + (self.template.dst.dim,)
        for term in self.terms:
            if term.field.shape != want:
                raise ShapeMismatch(
                    f"term field shape {term.field.shape} != {want}")

    @property
    def times(self) -> tuple:
        return tuple(np.linspace(0.0, 1.0, self.checkpoints))

    def displacement(self, t: float) -> np.ndarray:
        disp = np.array(self.template.displacement, copy=True)
        for term in self.terms:
            disp += term.coefficient(t) * term.field
        return disp

    def velocity(self, t: float) -> np.ndarray:
        out = np.zeros_like(np.asarray(self.template.displacement))
        for term in self.terms:
            out += term.rate(t) * term.field
        return out

    def at(self, t: float) -> GridMap:
        return self.template.with_displacement(self.displacement(t))

    @property
    def closed(self) -> bool:
        gap = np.abs(self.displacement(0.0) - self.displacement(1.0)).max()
        return bool(gap <= CLOSURE_TOL)


@dataclass(frozen=True)
class SampledPath:
    """Fibration family splined through sampled snapshots.

    ``displacements`` stacks one displacement array per listed time.
    A family whose first and last snapshots coincide is splined
    periodically, so velocities match across the seam.
    """

    sample_times: tuple
    displacements: np.ndarray
    template: GridMap
    _spline: object = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ts = np.asarray(self.sample_times, dtype=float)
        disps = np.asarray(self.displacements, dtype=float)
        if self.template.reference_name != "coordproj":
            raise ShapeMismatch("paths are families of fibrations")
        want = self.template.grid + (self.template.dst.dim,)
        if disps.shape != (len(ts),) + want:
            raise ShapeMismatch(
                f"displacement stack shape {disps.shape} != {(len(ts),) + want}")
        if len(ts) < 2 or np.any(np.diff(ts) <= 0):
            raise ValueError("need at least two strictly increasing times")
        if self.closed:
            disps = disps.copy()
            disps[-1] = disps[0]
            spline = CubicSpline(ts, disps, axis=0, bc_type="periodic")
        elif len(ts) >= 4:
            spline = CubicSpline(ts, disps, axis=0)
        else:
            spline = make_interp_spline(ts, disps, k=len(ts) - 1, axis=0)
        object.__setattr__(self, "_spline", spline)

    @property
    def times(self) -> tuple:
        return tuple(float(t) for t in self.sample_times)

    @property
    def closed(self) -> bool:
        gap = np.abs(np.asarray(self.displacements)[0]
                     - np.asarray(self.displacements)[-1]).max()
        return bool(gap <= CLOSURE_TOL)

    def displacement(self, t: float) -> np.ndarray:
        return np.asarray(self._spline(t))

    def velocity(self, t: float) -> np.ndarray:
        return np.asarray(self._spline(t, 1))

    def at(self, t: float) -> GridMap:
        return self.template.with_displacement(self.displacement(t))


def loop_submersion_check(path, time_samples: int = 32) -> Certificate:
    """Certify the assembled parameter-times-space map as a submersion.

    The parameter direction always survives, so the assembled Jacobian
    is square-free lower-triangular by blocks: an identity row plus the
    family velocity next to the spatial Jacobian.  The margin is the
    smallest singular value over a time-and-node scan.
    """
    if not path.closed:
        raise ValueError("loop check needs a closed path")
    template = path.template
    m = template.src.dim
    k = template.dst.dim
    grid = template.grid
    nnodes = int(np.prod(grid))
    margin = np.inf
    for t in np.linspace(0.0, 1.0, time_samples, endpoint=False):
        jac = path.at(t).jacobian_on(grid).reshape(nnodes, k, m)
        vel = path.velocity(t).reshape(nnodes, k)
        big = np.zeros((nnodes, 1 + k, 1 + m))
        big[:, 0, 0] = 1.0
        big[:, 1:, 0] = vel
        big[:, 1:, 1:] = jac
        sig = np.linalg.svd(big, compute_uv=False)
        margin = min(margin, float(sig[:, -1].min()))
    return Certificate("loop_submersion", 0.0, margin,
                       (time_samples,) + grid)


def _stage_velocity(path, t: float, pts: np.ndarray,
                    margin_min: float) -> np.ndarray:
    """Orthogonal drift-cancelling velocity at scattered points."""
    template = path.template
    k = template.dst.dim
    periods = template.src.periods_array
    disp_interp = make_interpolant(path.displacement(t), periods,
                                   template.interp)
    _, jac = disp_interp.values_and_jacobian(pts)
    idx = np.arange(k)
    jac[:, idx, idx] += 1.0        # base-projection part of the Jacobian
    vel = make_interpolant(path.velocity(t), periods, template.interp).values(pts)
    gram = jac @ jac.transpose(0, 2, 1)
    sigma_min = np.sqrt(np.linalg.eigvalsh(gram)[:, 0])
    if sigma_min.min() < margin_min:
        raise RankDeficient(
            f"fibration family loses rank at t={t:.6f} "
            f"(margin {sigma_min.min():.3e})")
    rhs = np.linalg.solve(gram, vel[:, :, None])
    return -(jac.transpose(0, 2, 1) @ rhs)[:, :, 0]


def horizontal_velocity(path, t: float, x, margin_min: float = 1e-6):
    """Velocity transporting fibers: orthogonal to them, cancelling drift.

    Accepts one Point or an (npts, m) array; solves the least-norm
    linear system of the fibration Jacobian against minus the family
    velocity.
    """
    if isinstance(x, Point):
        return _stage_velocity(path, t, x.coords_array[None, :], margin_min)[0]
    return _stage_velocity(path, t, np.asarray(x, dtype=float), margin_min)


class TransportResult(NamedTuple):
    times: tuple
    maps: tuple
    drifts: tuple
    final: GridMap
    certificate: Certificate


def transport_path(path, step: float = 1.0 / 256.0, checkpoints=None,
                   margin_min: float = 1e-6,
                   drift_tol: float = 1e-6) -> TransportResult:
    """Integrate the transport flow, checkpointing along the way.

    Classical fourth-order Runge-Kutta with a fixed step on the node
    ensemble; each checkpoint stores the flow as a grid map and measures
    how far the transported nodes drift off their reference fibers.

    Raises
    ------
    DriftExceeded
        When a checkpoint drift passes ``drift_tol``.
    RankDeficient
        When the family Jacobian drops below ``margin_min`` anywhere
        along the integration.
    """
    template = path.template
    m = template.src.dim
    k = template.dst.dim
    grid = template.grid
    if checkpoints is None:
        checkpoints = path.times
    checkpoints = [float(t) for t in checkpoints]
    if checkpoints[0] != 0.0:
        raise ValueError("transport starts at t=0")
    for t in checkpoints:
        if abs(t / step - round(t / step)) > 1e-9:
            raise ValueError(f"checkpoint {t} is not a multiple of the step")

    nodes = np.asarray(template.node_points)
    x = nodes.copy()
    base_periods = template.dst.periods_array
    ident = identity_reference(m)

    def checkpoint_map():
        disp = (x - nodes).reshape(grid + (m,))
        return GridMap(template.src, template.src, ident, grid, disp,
                       template.interp)

    def drift_at(t):
        pi_vals = path.at(t).eval_many(x)
        off = minimal_difference(pi_vals, nodes[:, :k], base_periods)
        return float(np.abs(off).max())

    times, maps, drifts = [], [], []

    def record(t):
        d = drift_at(t)
        if d > drift_tol:
            raise DriftExceeded(
                f"transport drift {d:.3e} exceeds {drift_tol:.1e} at "
                f"t={t:.6f}", t=t, drift=d)
        times.append(t)
        maps.append(checkpoint_map())
        drifts.append(d)

    record(0.0)
    for t_prev, t_next in zip(checkpoints, checkpoints[1:]):
        nsteps = int(round((t_next - t_prev) / step))
        h = (t_next - t_prev) / nsteps
        t = t_prev
        for _ in range(nsteps):
            k1 = _stage_velocity(path, t, x, margin_min)
            k2 = _stage_velocity(path, t + 0.5 * h, x + 0.5 * h * k1,
                                 margin_min)
            k3 = _stage_velocity(path, t + 0.5 * h, x + 0.5 * h * k2,
                                 margin_min)
            k4 = _stage_velocity(path, t + h, x + h * k3, margin_min)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        record(t_next)

    final = maps[-1]
    cert = diffeo_certificate(final)
    return TransportResult(tuple(times), tuple(maps), tuple(drifts),
                           final, cert)
