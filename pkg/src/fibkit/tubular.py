"""Vertical tubular neighborhoods of the coordinate-projection fibers.

The reference fibration is the projection onto the first ``k``
coordinates.  Around each fiber sits a tube of radius ``delta`` in the
base directions, and the tubular projection sends a point of the tube to
the nearest point of the fiber:

* flat fiber metric: the nearest point keeps the fiber coordinates and
  replaces the base ones, in closed form;
* conformal metric ``exp(2*lam)`` times flat (fiber dimension 1): the
  fiber coordinate minimizes the conformal length of the straight
  minimal-representative segment, found by golden-section search with a
  Newton polish on a composite-Simpson arclength integral.

The projection is invariant under fibered (vertical) diffeomorphisms:
it only reads the base coordinates of its first argument, which vertical
maps fix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonConvergence, OutsideTube, ShapeMismatch
from .gridmap import Certificate, GridMap, identity_map, verification_grid
from .torus import Point, TorusShape, minimal_difference, reduce_coords, wrap

GOLDEN_ITERS = 50
NEWTON_BUDGET = 50          # golden + polish fit a 100-step refinement budget
SIMPSON_PANELS = 256


@dataclass(frozen=True)
class FiberMetric:
    """Metric used along fibers: flat, or conformally flat (fiber dim 1).

    ``factor`` is a vector-valued scalar field (one component) on the
    total torus giving the conformal exponent; the metric is
    ``exp(2*factor)`` times the flat one.
    """

    kind: str
    factor: GridMap | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "conformal"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == "conformal":
            if self.factor is None:
                raise ValueError("conformal metric needs a factor field")
            if not self.factor.vector_valued or self.factor.dst.dim != 1:
                raise ShapeMismatch(
                    "conformal factor must be a one-component vector field")


def flat_metric() -> FiberMetric:
    return FiberMetric("flat")


def conformal_metric(factor: GridMap) -> FiberMetric:
    return FiberMetric("conformal", factor)


def default_radius(shape: TorusShape, base_dim: int) -> float:
    """Default tube radius: an eighth of the smallest base period."""
    return min(shape.periods[:base_dim]) / 8.0


@dataclass(frozen=True)
class TubularProjection:
    """Projection of a tube around each fiber onto that fiber.

    Parameters
    ----------
    pi0 : GridMap
        The reference coordinate projection (zero displacement).
    radius : float
        Tube radius ``delta``; must stay under a quarter of every base
        period so tubes of antipodal fibers cannot meet.
    metric : FiberMetric
        Flat by default.
    """

    pi0: GridMap
    radius: float
    metric: FiberMetric = flat_metric()

    def __post_init__(self):
        if self.pi0.reference_name != "coordproj":
            raise ShapeMismatch("tubular projection needs a coordinate projection")
        if np.any(self.pi0.displacement != 0.0):
            raise ShapeMismatch("reference projection must carry zero displacement")
        base_periods = self.pi0.src.periods[: self.base_dim]
        if not 0.0 < self.radius < min(base_periods) / 4.0:
            raise ValueError(
                f"radius {self.radius} outside (0, {min(base_periods) / 4.0})")
        if self.metric.kind == "conformal":
            if self.fiber_dim != 1:
                raise ShapeMismatch("conformal metric requires one-dimensional fibers")
            if self.metric.factor.src != self.pi0.src:
                raise ShapeMismatch("conformal factor must live on the total torus")

    @property
    def total(self) -> TorusShape:
        return self.pi0.src

    @property
    def base_dim(self) -> int:
        return self.pi0.dst.dim

    @property
    def fiber_dim(self) -> int:
        return self.total.dim - self.base_dim

    @property
    def base_periods(self) -> np.ndarray:
        return self.total.periods_array[: self.base_dim]

    @property
    def fiber_periods(self) -> np.ndarray:
        return self.total.periods_array[self.base_dim:]


def tube_offsets(proj: TubularProjection, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-axis minimal base offsets of y relative to the fiber over x."""
    k = proj.base_dim
    return minimal_difference(y[..., :k], x[..., :k], proj.base_periods)


def in_tube(proj: TubularProjection, x: Point, y: Point) -> bool:
    """Whether y lies in the tube around the fiber through x."""
    if x.shape != proj.total or y.shape != proj.total:
        raise ShapeMismatch("points must live on the tube's total torus")
    off = tube_offsets(proj, x.coords_array, y.coords_array)
    return bool(np.all(np.abs(off) < proj.radius))


def _conformal_lengths(proj: TubularProjection, y: np.ndarray,
                       delta_base: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Conformal length of the straight segment from y to (x_base, s).

    ``y``: (n, m) start points, ``delta_base``: (n, k) fixed minimal base
    offsets of the target, ``s``: (n,) candidate fiber coordinates.
    Composite Simpson on the conformal speed along the segment.
    """
    k = proj.base_dim
    dfib = minimal_difference(s, y[:, k], proj.fiber_periods[0])
    delta = np.concatenate([delta_base, dfib[:, None]], axis=1)
    speed = np.sqrt(np.sum(delta * delta, axis=1))
    ts = np.linspace(0.0, 1.0, SIMPSON_PANELS + 1)
    pts = y[:, None, :] + ts[None, :, None] * delta[:, None, :]
    lam = proj.metric.factor.eval_many(pts.reshape(-1, proj.total.dim))
    lam = lam.reshape(s.shape[0], SIMPSON_PANELS + 1)
    w = np.full(SIMPSON_PANELS + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    integral = (np.exp(lam) @ w) / (3.0 * SIMPSON_PANELS)
    return speed * integral


def _conformal_fiber_minimum(proj: TubularProjection, x_base: np.ndarray,
                             y: np.ndarray) -> np.ndarray:
    """Batch minimizer of the conformal segment length over the fiber."""
    k = proj.base_dim
    period = proj.fiber_periods[0]
    delta_base = minimal_difference(x_base, y[:, :k], proj.base_periods)
    yf = y[:, k]
    a = yf - period / 2.0
    b = yf + period / 2.0
    length = lambda s: _conformal_lengths(proj, y, delta_base, s)

    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = length(c), length(d)
    for _ in range(GOLDEN_ITERS):
        left = fc < fd            # minimum bracketed in [a, d] / else [c, b]
        a2 = np.where(left, a, c)
        b2 = np.where(left, d, b)
        probe = np.where(left, b2 - inv_phi * (b2 - a2),
                         a2 + inv_phi * (b2 - a2))
        fprobe = length(probe)
        c, fc, d, fd = (np.where(left, probe, d), np.where(left, fprobe, fd),
                        np.where(left, c, probe), np.where(left, fc, fprobe))
        a, b = a2, b2
    s = 0.5 * (a + b)

    h = 1e-5 * period
    tol = 1e-12 * period
    active = np.ones(s.shape[0], dtype=bool)
    for _ in range(NEWTON_BUDGET):
        if not active.any():
            break
        f0 = length(s)
        fp = length(s + h)
        fm = length(s - h)
        grad = (fp - fm) / (2.0 * h)
        curv = (fp - 2.0 * f0 + fm) / (h * h)
        ok = active & (curv > 0.0)
        step = np.zeros_like(s)
        step[ok] = grad[ok] / curv[ok]
        step = np.clip(step, -0.25 * period, 0.25 * period)
        s = s - step
        active = active & (np.abs(step) > tol) & (curv > 0.0)
    if active.any():
        raise NonConvergence(
            f"fiber minimization still moving after "
            f"{GOLDEN_ITERS + NEWTON_BUDGET} refinement steps on "
            f"{int(active.sum())} instances")
    return s


def project_point(proj: TubularProjection, x: Point, y: Point) -> Point:
    """Nearest point to y on the fiber through x (within the tube).

    Raises
    ------
    OutsideTube
        If some minimal base offset of y from x reaches the tube radius;
        the error carries the first offending axis.
    """
    if x.shape != proj.total or y.shape != proj.total:
        raise ShapeMismatch("points must live on the tube's total torus")
    off = tube_offsets(proj, x.coords_array, y.coords_array)
    bad = np.abs(off) >= proj.radius
    if bad.any():
        axis = int(np.argmax(bad))
        raise OutsideTube(
            f"base offset {off[axis]:+.4f} on axis {axis} exceeds the tube "
            f"radius {proj.radius:.4f}", axis=axis, witness=y.coords)
    k = proj.base_dim
    if proj.metric.kind == "flat":
        coords = np.concatenate([x.coords_array[:k], y.coords_array[k:]])
        return wrap(coords, proj.total)
    s = _conformal_fiber_minimum(proj, x.coords_array[None, :k],
                                 y.coords_array[None, :])[0]
    return wrap(np.concatenate([x.coords_array[:k], [s]]), proj.total)


def riemann_project(proj: TubularProjection, x: Point, y: Point) -> Point:
    """Conformal-metric projection; same contract as :func:`project_point`.

    Requires a conformal metric (use project_point for the flat case).
    """
    if proj.metric.kind != "conformal":
        raise ShapeMismatch("riemann_project needs a conformal metric")
    return project_point(proj, x, y)


def graph_offsets(proj: TubularProjection, phi: GridMap,
                  factor: int = 2) -> np.ndarray:
    """Base offsets of the graph of phi on a verification grid."""
    if phi.reference_name != "identity" or phi.src != proj.total:
        raise ShapeMismatch("graph projection expects a diffeomorphism of the "
                            "total torus")
    grid = verification_grid(phi.grid, factor)
    disp = phi.displacement_on(grid)[..., : proj.base_dim]
    return minimal_difference(disp, 0.0, proj.base_periods)


def project_graph(proj: TubularProjection, phi: GridMap,
                  factor: int = 2) -> GridMap:
    """Fiberwise projection of the graph of a diffeomorphism.

    Returns the vertical map x -> nearest-point projection of phi(x)
    onto the fiber through x, sampled on phi's grid.  The graph must stay
    inside the tube on a verification grid (default twice as fine).
    """
    off = graph_offsets(proj, phi, factor)
    mags = np.abs(off)
    if mags.max() >= proj.radius:
        flat_idx = int(np.argmax(mags.reshape(-1)))
        node = np.unravel_index(flat_idx, off.shape)
        raise OutsideTube(
            f"graph leaves the tube: offset {off[node]:+.4f} at verification "
            f"node {node[:-1]} exceeds radius {proj.radius:.4f}",
            axis=int(node[-1]), witness=node[:-1])
    k = proj.base_dim
    disp = np.array(phi.displacement, copy=True)
    if proj.metric.kind == "flat":
        disp[..., :k] = 0.0
        return phi.with_displacement(disp)
    nodes = np.asarray(phi.node_points)
    images = reduce_coords(nodes + phi.displacement.reshape(nodes.shape),
                           proj.total)
    s = _conformal_fiber_minimum(proj, nodes[:, :k], images)
    fib = minimal_difference(s, nodes[:, k], proj.fiber_periods[0])
    disp[..., :k] = 0.0
    disp[..., k] = fib.reshape(phi.grid)
    return phi.with_displacement(disp)


def in_tube_domain(proj: TubularProjection, phi: GridMap,
                   factor: int = 2) -> bool:
    """Predicate form of the graph tube check."""
    off = graph_offsets(proj, phi, factor)
    return bool(np.abs(off).max() < proj.radius)
