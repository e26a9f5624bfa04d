"""Factorizing nearby fibrations through diffeomorphisms of the total
space, and chaining factorizations along a path.

A fibration close to the reference projection is the reference composed
with a diffeomorphism: write the fibration as a section of the product
bundle over the total torus, exchange it against the closed-form
projection that swaps the recorded base value in, and invert.  The
one-step construction only works inside a tube around the reference;
``connect_chain`` walks a whole path by bisecting parameters until each
step fits.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import (FibrationError, InversionFailed, MaxDepthExceeded,
                     NotADiffeomorphism, NotInV1, OutsideTube, RankDeficient,
                     ShapeMismatch)
from .chart import verticality_residual
from .gridmap import (Certificate, GridMap, Reference, compose,
                      diffeo_certificate, identity_map, invert,
                      submersion_certificate, sup_distance, verification_grid)
from .torus import TorusShape, minimal_difference
from .tubular import default_radius


def product_shape(total: TorusShape, base: TorusShape) -> TorusShape:
    """The torus carrying pairs (point of total, point of base)."""
    return TorusShape(total.dim + base.dim, total.periods + base.periods)


def graph_section(pi: GridMap) -> GridMap:
    """The section x -> (x, pi(x)) of the product bundle.

    Stored with a selection reference, so the displacement is zero on the
    total-space components and the base offset of pi on the rest.
    """
    if pi.reference_name != "coordproj":
        raise ShapeMismatch("graph sections are built from fibrations")
    m, k = pi.src.dim, pi.dst.dim
    ref = Reference(tuple(range(m)) + tuple(range(k)))
    disp = np.concatenate(
        [np.zeros(pi.grid + (m,)), np.asarray(pi.displacement)], axis=-1)
    return GridMap(pi.src, product_shape(pi.src, pi.dst), ref, pi.grid, disp,
                   pi.interp)


def swap_projection(total: TorusShape, base_dim: int,
                    grid_nodes: int = 8) -> GridMap:
    """The closed-form retraction (x, b) -> (b, fiber part of x).

    Vertical over the recorded base value: composing with any section
    keeps its base record and drops the total-space base coordinates.
    """
    m = total.dim
    k = base_dim
    src = product_shape(total, TorusShape(k, total.periods[:k]))
    ref = Reference(tuple(m + j for j in range(k)) + tuple(range(k, m)))
    grid = (grid_nodes,) * src.dim
    return GridMap(src, total, ref, grid, np.zeros(grid + (m,)))


class FactorizationResult(NamedTuple):
    f: GridMap
    residual: float
    witness: Certificate


class CosetResult(NamedTuple):
    equal: bool
    residual: float


def push_fibration(pi0: GridMap, phi: GridMap) -> GridMap:
    """The fibration obtained by composing pi0 with the inverse of phi."""
    pi = compose(pi0, invert(phi))
    cert = submersion_certificate(pi)
    if cert.margin <= 0.0:
        raise RankDeficient(
            f"pushed fibration loses rank (margin {cert.margin:.3e})")
    return pi


def section_exchange(alpha: GridMap, p2: GridMap) -> GridMap:
    """Turn a section of one projection into a section of another.

    Composes alpha with the inverse of ``p2 o alpha``; the result beta
    satisfies ``p2 o beta = Id`` up to interpolation error.

    Raises
    ------
    NotInV1
        When ``p2 o alpha`` fails to invert, i.e. alpha is not in the
        exchangeable neighborhood.
    """
    h = compose(p2, alpha)
    try:
        cert = diffeo_certificate(h)
        if cert.margin <= 0.0:
            raise NotADiffeomorphism(
                f"exchanged map folds (margin {cert.margin:.3e})")
        h_inv = invert(h)
    except (NotADiffeomorphism, InversionFailed) as exc:
        raise NotInV1(f"section cannot be exchanged: {exc}") from exc
    return compose(alpha, h_inv)


def base_offset_sup(pi0: GridMap, pi: GridMap, factor: int = 2) -> float:
    """Sup over a verification grid of the base offset between fibrations."""
    if (pi.src, pi.dst) != (pi0.src, pi0.dst):
        raise ShapeMismatch("fibrations must share shapes")
    grid = verification_grid(pi.grid, factor)
    off = minimal_difference(pi.displacement_on(grid) - pi0.displacement_on(grid),
                             0.0, pi.dst.periods_array)
    return float(np.abs(off).max())


def factorize(pi0: GridMap, pi: GridMap,
              radius: float | None = None) -> FactorizationResult:
    """Find a diffeomorphism pulling pi back to the reference projection.

    The result ``f`` satisfies ``pi o f = pi0`` up to the recorded
    residual and is isotopic to the identity by construction.

    Raises
    ------
    OutsideTube
        If the base offset between pi and pi0 reaches ``radius``
        somewhere on the verification grid.
    RankDeficient
        If pi fails its submersion certificate.
    """
    if pi0.reference_name != "coordproj" or np.any(pi0.displacement != 0.0):
        raise ShapeMismatch("reference must be the plain coordinate projection")
    if radius is None:
        radius = default_radius(pi0.src, pi0.dst.dim)
    off = base_offset_sup(pi0, pi)
    if off >= radius:
        raise OutsideTube(
            f"fibration sits {off:.4f} from the reference, tube radius "
            f"{radius:.4f}")
    cert = submersion_certificate(pi)
    if cert.margin <= 0.0:
        raise RankDeficient(
            f"fibration loses rank (margin {cert.margin:.3e})")
    alpha = graph_section(pi)
    p2 = swap_projection(pi.src, pi.dst.dim)
    f = invert(compose(p2, alpha))
    residual = sup_distance(compose(pi, f), pi0)
    return FactorizationResult(f, residual, diffeo_certificate(f))


def coset_equal(f: GridMap, g: GridMap, pi0: GridMap,
                tol: float = 1e-7) -> CosetResult:
    """Whether f and g differ by a map preserving every fiber of pi0."""
    rel = compose(invert(f), g)
    residual = verticality_residual(pi0, rel).residual
    return CosetResult(bool(residual <= tol), float(residual))


def connect_chain(pi0: GridMap, path, radius: float | None = None,
                  max_depth: int = 12, start_tol: float = 1e-8) -> GridMap:
    """Chain factorizations along a path of fibrations.

    Maintains a running diffeomorphism with ``path(t) o phi = pi0`` and
    extends it checkpoint by checkpoint, bisecting any parameter step
    whose fibration falls outside the one-step tube.

    Raises
    ------
    MaxDepthExceeded
        When ``max_depth`` bisections cannot make a step fit.
    ValueError
        If the path does not start at the reference projection.
    """
    if radius is None:
        radius = default_radius(pi0.src, pi0.dst.dim)
    if base_offset_sup(pi0, path.at(0.0)) > start_tol:
        raise ValueError("path must start at the reference projection")

    def advance(phi: GridMap, t_from: float, t_to: float, depth: int) -> GridMap:
        moved = compose(path.at(t_to), phi)
        try:
            step = factorize(pi0, moved, radius)
        except (OutsideTube, NotADiffeomorphism, InversionFailed,
                RankDeficient) as exc:
            if depth >= max_depth:
                raise MaxDepthExceeded(
                    f"step [{t_from:.6f}, {t_to:.6f}] still out of range "
                    f"after {max_depth} bisections: {exc}") from exc
            mid = 0.5 * (t_from + t_to)
            half = advance(phi, t_from, mid, depth + 1)
            return advance(half, mid, t_to, depth + 1)
        return compose(phi, step.f)

    phi = identity_map(pi0.src, pi0.grid, pi0.interp)
    times = list(path.times)
    for t_from, t_to in zip(times, times[1:]):
        phi = advance(phi, float(t_from), float(t_to), 0)
    return phi
