"""Trivializing the base-diffeomorphism action on fibrations, and
splitting sections of the pulled-back base tangent bundle.

Composing a fibration with a fixed global section of the reference
projection gives a base diffeomorphism; dividing it out leaves a
fibration that restricts to the identity along the section's image.
At the tangent level, subtracting the value picked up along the section
splits any vector-field section into a part vanishing on the section
image plus a pure pullback from the base.

When grids line up (the default zero section does), the section
pullback is an exact sample gather and the lift an exact broadcast, so
the splitting identities hold to the last bit wherever floating-point
addition allows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidFactor, InversionFailed, NotADiffeomorphism, NotInW, ShapeMismatch
from .gridmap import (GridMap, compose, diffeo_certificate, identity_map,
                      invert, lift_reference, sup_distance,
                      vector_valued_map, zero_reference)
from .interpolation import fourier_coefficients
from .torus import TorusShape


@dataclass(frozen=True)
class GlobalSection:
    """A right inverse of the reference projection: b -> (b, constant).

    ``sigma`` carries a lift reference, zero displacement on the base
    components, and the configured fiber constant on the rest.
    ``residual`` is how far the projection of the section image sits
    from the identity; zero for this family by construction.
    """

    sigma: GridMap
    residual: float

    @property
    def base(self) -> TorusShape:
        return self.sigma.src

    @property
    def total(self) -> TorusShape:
        return self.sigma.dst


def global_section(pi0: GridMap, fiber_constant=0.0) -> GlobalSection:
    """The constant-fiber section of a coordinate projection."""
    if pi0.reference_name != "coordproj":
        raise ShapeMismatch("sections are built over a coordinate projection")
    base = pi0.dst
    total = pi0.src
    k, m = base.dim, total.dim
    const = np.broadcast_to(np.asarray(fiber_constant, dtype=float),
                            (m - k,))
    grid = pi0.grid[:k]
    disp = np.zeros(grid + (m,))
    disp[..., k:] = const
    sigma = GridMap(base, total, lift_reference(k, m), grid, disp, pi0.interp)
    # the base components come straight through, so the defect is zero
    return GlobalSection(sigma, 0.0)


def trivialize(pi: GridMap, section: GlobalSection,
               margin_min: float = 1e-6):
    """Split a fibration into a base diffeomorphism and a slice member.

    Returns ``(phi_B, pi_S)`` with ``phi_B`` the fibration evaluated
    along the section and ``pi_S`` the remainder, which restricts to the
    identity along the section image.

    Raises
    ------
    NotInW
        When the evaluated base map fails its diffeomorphism
        certificate, i.e. the fibration left the trivializable set.
    """
    if pi.reference_name != "coordproj":
        raise ShapeMismatch("trivialization applies to fibrations")
    if pi.src != section.total or pi.dst != section.base:
        raise ShapeMismatch("fibration and section shapes disagree")
    phi_b = compose(pi, section.sigma)
    cert = diffeo_certificate(phi_b)
    if cert.margin <= margin_min:
        raise NotInW(
            f"fibration along the section folds (margin {cert.margin:.3e})")
    try:
        phi_b_inv = invert(phi_b)
    except (NotADiffeomorphism, InversionFailed) as exc:
        raise NotInW(f"fibration along the section: {exc}") from exc
    pi_s = compose(phi_b_inv, pi)
    return phi_b, pi_s


def slice_defect(pi_s: GridMap, section: GlobalSection,
                 factor: int = 2) -> float:
    """Sup distance of the fibration along the section from the identity."""
    along = compose(pi_s, section.sigma)
    ident = identity_map(section.base, along.grid, along.interp)
    return sup_distance(along, ident, factor)


def assemble_base(phi_b: GridMap, pi_s: GridMap, section: GlobalSection,
                  tol: float = 1e-9) -> GridMap:
    """Recombine a base diffeomorphism with a slice fibration.

    Raises
    ------
    InvalidFactor
        If ``pi_s`` does not restrict to the identity along the section
        within ``tol``.
    """
    defect = slice_defect(pi_s, section)
    if defect > tol:
        raise InvalidFactor(
            f"second factor is {defect:.3e} from the slice (tol {tol:.1e})")
    return compose(phi_b, pi_s)


def lift_vector_field(chi: GridMap, pi0: GridMap) -> GridMap:
    """Pull a base vector field up to the total torus through pi0.

    The result at x is the field at the base point of x, constant along
    fibers.  When the field's grid matches the base axes of pi0's grid
    the samples broadcast exactly; otherwise they are interpolated onto
    those axes first.
    """
    if not chi.vector_valued:
        raise ShapeMismatch("expected a vector-field-valued map")
    if chi.src != pi0.dst:
        raise ShapeMismatch("field lives on the wrong base torus")
    k = pi0.dst.dim
    m = pi0.src.dim
    base_grid = pi0.grid[:k]
    vals = chi.displacement_on(base_grid)
    disp = np.broadcast_to(
        vals.reshape(base_grid + (1,) * (m - k) + (chi.dst.dim,)),
        pi0.grid + (chi.dst.dim,))
    return vector_valued_map(pi0.src, chi.dst, disp, pi0.interp)


def section_pullback(s: GridMap, section: GlobalSection) -> GridMap:
    """Evaluate a vector field on the total torus along the section.

    An exact gather when the section image lies on stored sample nodes
    (the zero section with aligned grids); interpolation otherwise.
    """
    if not s.vector_valued:
        raise ShapeMismatch("expected a vector-field-valued map")
    k = section.base.dim
    base_grid = s.grid[:k]
    fiber_coords = section.sigma.displacement[(0,) * k][k:]
    fiber_nodes = []
    aligned = section.sigma.grid == base_grid
    for axis, c in enumerate(fiber_coords, start=k):
        n = s.grid[axis]
        period = s.src.periods[axis]
        pos = (c % period) / period * n
        idx = int(round(pos))
        if abs(pos - idx) > 1e-12 * n:
            aligned = False
            break
        fiber_nodes.append(idx % n)
    if aligned:
        gather = s.displacement[(slice(None),) * k + tuple(fiber_nodes)]
        return vector_valued_map(section.base, s.dst, np.array(gather),
                                 s.interp)
    pts = np.asarray(section.sigma.eval_many(
        np.asarray(identity_map(section.base, base_grid).node_points)))
    vals = s.displacement_at(pts).reshape(base_grid + (s.dst.dim,))
    return vector_valued_map(section.base, s.dst, vals, s.interp)


@dataclass(frozen=True)
class SplitSection:
    """A section split into a part vanishing along the section image
    and a pure lift from the base."""

    vanishing: GridMap
    lifted: GridMap


def split_section(s: GridMap, section: GlobalSection,
                  pi0: GridMap) -> SplitSection:
    """Split a vector-field section against a global section.

    The lifted part is the pullback of the field's values along the
    section; the vanishing part is the sample-wise remainder.
    """
    lifted = lift_vector_field(section_pullback(s, section), pi0)
    vanishing = s.with_displacement(
        np.asarray(s.displacement) - np.asarray(lifted.displacement))
    return SplitSection(vanishing, lifted)


def fiber_spectral_energy(v: GridMap, base_dim: int) -> float:
    """Largest coefficient magnitude at any nonzero fiber frequency.

    Zero (to roundoff) exactly when the field is constant along fibers.
    """
    samples = np.asarray(v.displacement)
    ndim = v.src.dim
    coeffs = fourier_coefficients(samples, ndim)
    mask = np.zeros(samples.shape[:ndim], dtype=bool)
    for axis in range(base_dim, ndim):
        idx = [slice(None)] * ndim
        idx[axis] = slice(1, None)
        mask[tuple(idx)] = True
    if not mask.any():
        return 0.0
    return float(np.abs(coeffs[mask]).max())
