"""Product charts splitting a diffeomorphism near the identity into a
slice factor and a fibered (vertical) factor.

The vertical factor is the tubular projection of the graph; composing
with its inverse pushes the remainder into the slice (maps whose graph
projection is the identity).  Assembly is plain composition, so the two
directions are mutually inverse up to interpolation residuals.  The
chart translates to a neighborhood of any certified diffeomorphism by
conjugating with it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (FibrationError, InvalidFactor, InversionFailed,
                     NotADiffeomorphism, NotInChartDomain, OutsideTube)
from .gridmap import (Certificate, GridMap, compose, identity_map, invert,
                      submersion_certificate, sup_distance)
from .tubular import TubularProjection, project_graph


@dataclass(frozen=True)
class ChartedDiffeo:
    """Slice and vertical factors of one diffeomorphism, with certificates.

    ``slice_certificate.residual`` bounds how far the slice factor's own
    graph projection sits from the identity; ``verticality_certificate``
    pairs the base-fibration defect of the vertical factor with the
    off-kernel singular-value margin of the reference projection.
    """

    slice_factor: GridMap
    vertical_factor: GridMap
    slice_certificate: Certificate
    verticality_certificate: Certificate

    @property
    def residual(self) -> float:
        return max(self.slice_certificate.residual,
                   self.verticality_certificate.residual)


def verticality_residual(pi0: GridMap, phi: GridMap,
                         factor: int = 2) -> Certificate:
    """How far phi is from commuting with the reference projection.

    Returns a certificate whose residual is the sup of
    ``d_B(pi0(phi(x)), pi0(x))`` over a verification grid and whose
    margin is the smallest off-kernel singular value of ``D pi0``.
    """
    residual = sup_distance(compose(pi0, phi), pi0, factor)
    margin = submersion_certificate(pi0, factor).margin
    grid = tuple(factor * n for n in phi.grid)
    return Certificate("vertical", residual, margin, grid)


def slice_residual(proj: TubularProjection, phi: GridMap,
                   factor: int = 2) -> float:
    """Sup distance between the graph projection of phi and the identity."""
    psi = project_graph(proj, phi, factor)
    ident = identity_map(phi.src, phi.grid, phi.interp)
    return sup_distance(psi, ident, factor)


def chart_decompose(proj: TubularProjection, phi: GridMap,
                    tol: float = 1e-9) -> ChartedDiffeo:
    """Split phi into slice and vertical factors.

    The vertical factor is the fiberwise projection of the graph of phi;
    phi composed with its inverse is the slice factor.  Both residual
    certificates are computed and checked against ``tol``.

    Raises
    ------
    NotInChartDomain
        With ``cause="outside_tube"`` when the graph leaves the tube, or
        ``cause="vertical_factor_not_invertible"`` when the projected
        graph fails its diffeomorphism certificate.
    """
    try:
        psi = project_graph(proj, phi)
    except OutsideTube as exc:
        raise NotInChartDomain(
            f"not in the chart domain: {exc}", cause="outside_tube",
            witness=exc.witness) from exc
    try:
        psi_inv = invert(psi)
    except (NotADiffeomorphism, InversionFailed) as exc:
        raise NotInChartDomain(
            f"not in the chart domain: {exc}",
            cause="vertical_factor_not_invertible") from exc
    phi_s = compose(phi, psi_inv)
    vert_cert = verticality_residual(proj.pi0, psi)
    s_res = slice_residual(proj, phi_s)
    s_cert = Certificate("slice", s_res, float("nan"),
                         tuple(2 * n for n in phi.grid))
    if s_res > tol or vert_cert.residual > tol:
        raise NotInChartDomain(
            f"factor residuals {s_res:.3e}/{vert_cert.residual:.3e} "
            f"exceed {tol:.1e}", cause="factor_residual")
    return ChartedDiffeo(phi_s, psi, s_cert, vert_cert)


def chart_assemble(phi_s: GridMap, psi: GridMap, proj: TubularProjection,
                   tol: float = 1e-9) -> GridMap:
    """Compose a slice factor with a vertical factor, validating both.

    Raises
    ------
    InvalidFactor
        If psi moves base points or phi_s is not slice-like, beyond tol.
    """
    vert = verticality_residual(proj.pi0, psi)
    if vert.residual > tol:
        raise InvalidFactor(
            f"vertical factor moves base points by {vert.residual:.3e}")
    try:
        s_res = slice_residual(proj, phi_s)
    except FibrationError as exc:
        raise InvalidFactor(f"slice factor rejected: {exc}") from exc
    if s_res > tol:
        raise InvalidFactor(
            f"slice factor is {s_res:.3e} from the slice (tol {tol:.1e})")
    return compose(phi_s, psi)


def chart_at(phi0: GridMap, proj: TubularProjection, phi: GridMap,
             tol: float = 1e-9) -> ChartedDiffeo:
    """The chart translated to a neighborhood of phi0.

    Decomposes ``phi0^-1 o phi`` in the base chart and carries the slice
    factor back with phi0; the certificates refer to the conjugated
    decomposition, whose factors multiply back to phi.
    """
    phi0_inv = invert(phi0)
    inner = chart_decompose(proj, compose(phi0_inv, phi), tol)
    return ChartedDiffeo(compose(phi0, inner.slice_factor),
                         inner.vertical_factor,
                         inner.slice_certificate,
                         inner.verticality_certificate)
