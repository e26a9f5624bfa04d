"""Grid-sampled smooth maps between flat tori.

A map is stored as a *reference* (a fixed coordinate-selection map that
carries the homotopy class) plus a periodic displacement field sampled on
a uniform grid over the source torus.  All calculus (evaluation,
composition, Jacobians, certified inversion, sup distances, rank
certificates) happens through the displacement's interpolant, so results
are deterministic functions of the stored samples.

Reference kinds
---------------
``identity``   x -> x, for diffeomorphism-class maps,
``coordproj``  (x_1..x_m) -> (x_1..x_k), for fibration-class maps,
``zero``       x -> 0, for vector-valued fields (no modular reduction),
``lift``       (b_1..b_k) -> (b_1..b_k, 0..0), for sections of a
               coordinate projection,
``select``     any per-component choice of a source coordinate or the
               constant 0; the closure of the kinds above under
               composition.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import (InvalidCoordinate, InversionFailed, NotADiffeomorphism,
                     ShapeMismatch)
from .interpolation import make_interpolant
from .torus import (Point, TorusShape, flat_grid_nodes, minimal_difference,
                    reduce_coords, wrap)

MIN_NODES_PER_AXIS = 8
INTERP_SCHEMES = ("trig", "cubic")


def _canonical_name(index: tuple, src_dim: int, dst_dim: int) -> str:
    if all(i is None for i in index):
        return "zero"
    if dst_dim == src_dim and index == tuple(range(src_dim)):
        return "identity"
    if dst_dim < src_dim and index == tuple(range(dst_dim)):
        return "coordproj"
    if (dst_dim > src_dim
            and index[:src_dim] == tuple(range(src_dim))
            and all(i is None for i in index[src_dim:])):
        return "lift"
    return "select"


@dataclass(frozen=True)
class Reference:
    """Coordinate-selection reference map.

    ``index[j]`` is the source coordinate copied into destination
    component ``j``, or None for the constant 0.
    """

    index: tuple

    def __post_init__(self):
        object.__setattr__(self, "index",
                           tuple(None if i is None else int(i) for i in self.index))

    @property
    def dst_dim(self) -> int:
        return len(self.index)

    def name(self, src_dim: int) -> str:
        return _canonical_name(self.index, src_dim, self.dst_dim)

    @property
    def vector_valued(self) -> bool:
        return all(i is None for i in self.index)

    def matrix(self, src_dim: int) -> np.ndarray:
        """Linear part as a 0/1 matrix of shape (dst_dim, src_dim)."""
        m = np.zeros((self.dst_dim, src_dim), dtype=float)
        for j, i in enumerate(self.index):
            if i is not None:
                m[j, i] = 1.0
        return m

    def apply(self, pts: np.ndarray) -> np.ndarray:
        out = np.zeros(pts.shape[:-1] + (self.dst_dim,), dtype=float)
        for j, i in enumerate(self.index):
            if i is not None:
                out[..., j] = pts[..., i]
        return out

    def after(self, inner: "Reference") -> "Reference":
        """Composition self o inner, again a selection reference."""
        comp = []
        for i in self.index:
            comp.append(None if i is None else inner.index[i])
        return Reference(tuple(comp))


def identity_reference(dim: int) -> Reference:
    return Reference(tuple(range(dim)))


def coordproj_reference(k: int) -> Reference:
    return Reference(tuple(range(k)))


def zero_reference(dim: int) -> Reference:
    return Reference((None,) * dim)


def lift_reference(base_dim: int, total_dim: int) -> Reference:
    return Reference(tuple(range(base_dim)) + (None,) * (total_dim - base_dim))


@dataclass(frozen=True, eq=False)
class GridMap:
    """A smooth map src -> dst stored as reference + sampled displacement.

    The displacement array has shape ``(*grid, dst.dim)`` and is made
    read-only on construction.  The map's value at x is
    ``reference(x) + displacement(x)``, reduced modulo the destination
    periods unless the reference is vector-valued.
    """

    src: TorusShape
    dst: TorusShape
    reference: Reference
    grid: tuple[int, ...]
    displacement: np.ndarray
    interp: str = "trig"

    def __post_init__(self):
        grid = tuple(int(n) for n in self.grid)
        object.__setattr__(self, "grid", grid)
        if len(grid) != self.src.dim:
            raise ShapeMismatch(
                f"grid rank {len(grid)} does not match source dimension {self.src.dim}")
        if any(n < MIN_NODES_PER_AXIS for n in grid):
            raise ValueError(
                f"need at least {MIN_NODES_PER_AXIS} nodes per axis, got {grid}")
        if self.interp not in INTERP_SCHEMES:
            raise ValueError(f"unknown interpolation scheme {self.interp!r}")
        if self.reference.dst_dim != self.dst.dim:
            raise ShapeMismatch(
                f"reference has {self.reference.dst_dim} components, "
                f"destination has {self.dst.dim}")
        for j, i in enumerate(self.reference.index):
            if i is None:
                continue
            if not 0 <= i < self.src.dim:
                raise ShapeMismatch(f"reference selects source coordinate {i} "
                                    f"outside dimension {self.src.dim}")
            if self.dst.periods[j] != self.src.periods[i]:
                raise ShapeMismatch(
                    f"reference copies axis {i} (period {self.src.periods[i]}) "
                    f"into axis {j} (period {self.dst.periods[j]})")
        disp = np.array(self.displacement, dtype=float, copy=True)
        if disp.shape != grid + (self.dst.dim,):
            raise ShapeMismatch(
                f"displacement shape {disp.shape} != {grid + (self.dst.dim,)}")
        if not np.all(np.isfinite(disp)):
            raise InvalidCoordinate("displacement contains non-finite samples")
        disp.setflags(write=False)
        object.__setattr__(self, "displacement", disp)

    # -- basic queries ----------------------------------------------------

    @property
    def reference_name(self) -> str:
        return self.reference.name(self.src.dim)

    @property
    def vector_valued(self) -> bool:
        return self.reference.vector_valued

    @cached_property
    def _interpolant(self):
        return make_interpolant(self.displacement, self.src.periods_array, self.interp)

    @cached_property
    def node_points(self) -> np.ndarray:
        """Storage nodes flattened to ``(prod(grid), src.dim)``."""
        pts = flat_grid_nodes(self.src, self.grid)
        pts.setflags(write=False)
        return pts

    # -- evaluation -------------------------------------------------------

    def displacement_at(self, pts: np.ndarray) -> np.ndarray:
        return self._interpolant.values(pts)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        vals = self.reference.apply(pts) + self._interpolant.values(pts)
        if self.vector_valued:
            return vals
        return reduce_coords(vals, self.dst)

    def jacobian_many(self, pts: np.ndarray) -> np.ndarray:
        jac = self._interpolant.jacobian(pts)
        return jac + self.reference.matrix(self.src.dim)

    def eval_and_jacobian(self, pts: np.ndarray):
        vals, jac = self._interpolant.values_and_jacobian(pts)
        vals = vals + self.reference.apply(pts)
        if not self.vector_valued:
            vals = reduce_coords(vals, self.dst)
        return vals, jac + self.reference.matrix(self.src.dim)

    def displacement_on(self, grid: tuple[int, ...]) -> np.ndarray:
        if tuple(grid) == self.grid:
            return np.asarray(self.displacement)
        return self._interpolant.resample(tuple(grid))

    def jacobian_on(self, grid: tuple[int, ...]) -> np.ndarray:
        """Full Jacobian (reference + displacement) on a uniform grid."""
        jac = self._interpolant.derivative_samples(tuple(grid))
        return jac + self.reference.matrix(self.src.dim)

    def with_displacement(self, displacement: np.ndarray) -> "GridMap":
        return replace(self, displacement=displacement)


@dataclass(frozen=True)
class Certificate:
    """Grid-certified bound attached to a verified property.

    ``residual`` is a sup-norm defect (0 when the property is purely a
    rank/orientation bound), ``margin`` the distance to failure, and
    ``grid_used`` the verification grid the quantities were computed on.
    """

    kind: str
    residual: float
    margin: float
    grid_used: tuple[int, ...]


def verification_grid(grid: tuple[int, ...], factor: int = 2) -> tuple[int, ...]:
    return tuple(int(n) * int(factor) for n in grid)


# -- constructors ---------------------------------------------------------


def identity_map(shape: TorusShape, grid: tuple[int, ...],
                 interp: str = "trig") -> GridMap:
    disp = np.zeros(tuple(grid) + (shape.dim,))
    return GridMap(shape, shape, identity_reference(shape.dim), tuple(grid),
                   disp, interp)


def coordinate_projection(shape: TorusShape, base_dim: int,
                          grid: tuple[int, ...], interp: str = "trig",
                          dst: TorusShape | None = None) -> GridMap:
    """The projection forgetting all but the first ``base_dim`` coordinates."""
    if not 1 <= base_dim < shape.dim:
        raise ShapeMismatch(
            f"base dimension {base_dim} must lie in [1, {shape.dim - 1}]")
    if dst is None:
        dst = TorusShape(base_dim, shape.periods[:base_dim])
    elif dst.dim != base_dim or dst.periods != shape.periods[:base_dim]:
        raise ShapeMismatch(
            f"destination {dst} does not match leading periods of {shape}")
    disp = np.zeros(tuple(grid) + (base_dim,))
    return GridMap(shape, dst, coordproj_reference(base_dim), tuple(grid),
                   disp, interp)


def vector_valued_map(src: TorusShape, dst: TorusShape, samples: np.ndarray,
                      interp: str = "trig") -> GridMap:
    """A field of raw vectors over src (no modular reduction of values)."""
    samples = np.asarray(samples, dtype=float)
    grid = samples.shape[:-1]
    return GridMap(src, dst, zero_reference(dst.dim), grid, samples, interp)


def sample_map(fn, src: TorusShape, dst: TorusShape, reference: Reference,
               grid: tuple[int, ...], interp: str = "trig") -> GridMap:
    """Build a GridMap by sampling a displacement function on the grid.

    ``fn`` receives node coordinates of shape ``(*grid, src.dim)`` and
    must return displacement samples of shape ``(*grid, dst.dim)``.
    """
    from .torus import grid_nodes
    nodes = grid_nodes(src, tuple(grid))
    disp = np.asarray(fn(nodes), dtype=float)
    return GridMap(src, dst, reference, tuple(grid), disp, interp)


# -- calculus -------------------------------------------------------------


def evaluate(f: GridMap, x):
    """Evaluate ``f`` at a Point (returning a Point, or a raw vector when
    ``f`` is vector-valued) or at an ``(npts, dim)`` array of coordinates."""
    if isinstance(x, Point):
        if x.shape != f.src:
            raise ShapeMismatch(f"point on {x.shape}, map defined on {f.src}")
        vals = f.eval_many(x.coords_array[None, :])[0]
        if f.vector_valued:
            return vals
        return wrap(vals, f.dst)
    return f.eval_many(x)


def jacobian(f: GridMap, x) -> np.ndarray:
    """Differential of ``f`` at a Point (one matrix) or point array."""
    if isinstance(x, Point):
        if x.shape != f.src:
            raise ShapeMismatch(f"point on {x.shape}, map defined on {f.src}")
        return f.jacobian_many(x.coords_array[None, :])[0]
    return f.jacobian_many(x)


def compose(f: GridMap, g: GridMap) -> GridMap:
    """The composite ``f o g`` sampled on g's grid.

    The displacement of the composite at a node x is
    ``L_f . d_g(x) + d_f(g(x))`` with ``L_f`` the linear part of f's
    reference, so node values agree with pointwise evaluation exactly.
    """
    if g.dst != f.src:
        raise ShapeMismatch(
            f"cannot compose: inner map lands in {g.dst}, outer expects {f.src}")
    if g.vector_valued:
        raise ShapeMismatch("cannot compose through a vector-valued inner map")
    inner_vals = g.reference.apply(np.asarray(g.node_points)) + \
        g.displacement.reshape(-1, g.dst.dim)
    outer_disp = f.displacement_at(inner_vals)
    lin = f.reference.matrix(f.src.dim)
    disp = g.displacement.reshape(-1, g.dst.dim) @ lin.T + outer_disp
    disp = disp.reshape(g.grid + (f.dst.dim,))
    return GridMap(g.src, f.dst, f.reference.after(g.reference), g.grid,
                   disp, g.interp)


def sup_distance(f: GridMap, g: GridMap, factor: int = 2) -> float:
    """Sup over a verification grid of the pointwise distance between f and g.

    Requires identical source, destination, and reference, so the
    displacement difference is the whole difference; it is compared with
    the toral metric (minimal representatives) unless the maps are
    vector-valued, in which case plain Euclidean norms are used.
    """
    if f.src != g.src or f.dst != g.dst:
        raise ShapeMismatch(f"maps {f.src}->{f.dst} and {g.src}->{g.dst} differ")
    if f.reference.index != g.reference.index:
        raise ShapeMismatch("sup distance needs maps in the same reference class")
    grid = tuple(factor * max(a, b) for a, b in zip(f.grid, g.grid))
    diff = f.displacement_on(grid) - g.displacement_on(grid)
    if not f.vector_valued:
        diff = minimal_difference(diff, 0.0, f.dst.periods_array)
    norms = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(norms.max())


def submersion_certificate(f: GridMap, factor: int = 2) -> Certificate:
    """Smallest singular value of Df over a verification grid."""
    grid = verification_grid(f.grid, factor)
    jac = f.jacobian_on(grid).reshape(-1, f.dst.dim, f.src.dim)
    sigma = np.linalg.svd(jac, compute_uv=False)
    return Certificate("submersion", 0.0, float(sigma[:, -1].min()), grid)


def diffeo_certificate(f: GridMap, factor: int = 2) -> Certificate:
    """Smallest Jacobian determinant over a verification grid."""
    if f.src.dim != f.dst.dim:
        raise ShapeMismatch("determinant certificate needs equal dimensions")
    grid = verification_grid(f.grid, factor)
    jac = f.jacobian_on(grid).reshape(-1, f.dst.dim, f.src.dim)
    det = np.linalg.det(jac)
    return Certificate("diffeo", 0.0, float(det.min()), grid)


def invert(f: GridMap, margin_min: float = 1e-6, max_iter: int = 50,
           tol: float = 1e-13) -> GridMap:
    """Certified inverse of a diffeomorphism in the identity class.

    Solves ``f(x) = y`` for every storage node y by damped Newton
    iteration (per-node step halving whenever the residual fails to
    decrease) and returns the inverse sampled on the same grid.

    Raises
    ------
    NotADiffeomorphism
        If ``det Df`` does not exceed ``margin_min`` at every node.
    InversionFailed
        If Newton does not reach ``tol`` within ``max_iter`` iterations.
    """
    if f.reference_name != "identity":
        raise ShapeMismatch("only identity-class maps are invertible in place")
    dim = f.src.dim
    node_jac = f.jacobian_on(f.grid).reshape(-1, dim, dim)
    det = np.linalg.det(node_jac)
    if det.min() <= margin_min:
        raise NotADiffeomorphism(
            f"Jacobian determinant reaches {det.min():.3e} "
            f"(margin {margin_min:.1e}) at a grid node")

    y = np.asarray(f.node_points)
    periods = f.src.periods_array
    x = y - f.displacement.reshape(-1, dim)

    def residual(z):
        r = minimal_difference(z + f.displacement_at(z), y, periods)
        return r, np.sqrt(np.sum(r * r, axis=-1))

    r, rnorm = residual(x)
    for _ in range(max_iter):
        if rnorm.max() <= tol:
            break
        jac = f.jacobian_many(x)
        step = np.linalg.solve(jac, r[..., None])[..., 0]
        alpha = np.ones(x.shape[0])
        while True:
            cand = x - alpha[:, None] * step
            rc, rcn = residual(cand)
            worse = (rcn >= rnorm) & (rnorm > tol)
            if not worse.any() or alpha.min() < 1e-6:
                break
            alpha[worse] *= 0.5
        x, r, rnorm = cand, rc, rcn
    if rnorm.max() > tol:
        raise InversionFailed(
            f"Newton stalled at residual {rnorm.max():.3e} (tol {tol:.1e})")
    disp = minimal_difference(x, y, periods).reshape(f.grid + (dim,))
    return GridMap(f.src, f.dst, f.reference, f.grid, disp, f.interp)
