"""Seeded generators of random band-limited maps.

All randomness flows through an explicit ``numpy.random.Generator``, so
every consumer (test suites, the command line driver) is reproducible
from a single integer seed.  Fields are finite cosine sums with modal
decay, normalized in sup norm; diffeomorphism and submersion candidates
are shrunk deterministically until their certificates pass.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import NotADiffeomorphism
from .gridmap import (GridMap, coordinate_projection, coordproj_reference,
                      identity_map, identity_reference, vector_valued_map)
from .torus import TorusShape, flat_grid_nodes


def _half_space_freqs(dim: int, max_freq: int) -> np.ndarray:
    """One frequency vector per cosine mode: k and -k are the same mode."""
    freqs = []
    for k in itertools.product(range(-max_freq, max_freq + 1), repeat=dim):
        if k == (0,) * dim:
            continue
        if k > (0,) * dim:   # lexicographic half-space
            freqs.append(k)
    return np.asarray(freqs, dtype=float)


def band_limited_field(rng: np.random.Generator, shape: TorusShape,
                       grid: tuple[int, ...], ncomp: int, amplitude: float,
                       max_freq: int = 2) -> np.ndarray:
    """Random smooth field sampled on the grid, sup norm equal to amplitude.

    Returns an array of shape ``(*grid, ncomp)``.  Modal amplitudes decay
    like ``1/(1+|k|^2)`` so candidate maps have tame derivatives.
    """
    freqs = _half_space_freqs(shape.dim, max_freq)
    nodes = flat_grid_nodes(shape, tuple(grid))
    angles = 2.0 * np.pi * (nodes / shape.periods_array) @ freqs.T
    decay = 1.0 / (1.0 + np.sum(freqs * freqs, axis=1))
    coef = rng.standard_normal((ncomp, freqs.shape[0])) * decay
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(ncomp, freqs.shape[0]))
    field = np.empty((nodes.shape[0], ncomp))
    for c in range(ncomp):
        field[:, c] = np.cos(angles + phase[c]) @ coef[c]
    sup = np.sqrt(np.sum(field * field, axis=1)).max()
    if sup > 0:
        field *= amplitude / sup
    return field.reshape(tuple(grid) + (ncomp,))


def random_points(rng: np.random.Generator, shape: TorusShape,
                  n: int) -> np.ndarray:
    return rng.uniform(0.0, shape.periods_array, size=(n, shape.dim))


def random_diffeo(rng: np.random.Generator, shape: TorusShape,
                  grid: tuple[int, ...], amplitude: float = 0.2,
                  max_freq: int = 2, interp: str = "trig",
                  det_margin: float = 0.05) -> GridMap:
    """Random diffeomorphism isotopic to the identity, determinant-certified.

    The displacement amplitude is reduced deterministically (factor 0.7)
    until ``det Df`` clears ``det_margin`` at every storage node, so the
    result's amplitude never exceeds the request.
    """
    field = band_limited_field(rng, shape, grid, shape.dim, amplitude, max_freq)
    for _ in range(25):
        f = GridMap(shape, shape, identity_reference(shape.dim), tuple(grid),
                    field, interp)
        jac = f.jacobian_on(f.grid).reshape(-1, shape.dim, shape.dim)
        if np.linalg.det(jac).min() > det_margin:
            return f
        field = field * 0.7
    raise NotADiffeomorphism("could not shrink a random field into the "
                             "certified diffeomorphism region")


def random_vertical_diffeo(rng: np.random.Generator, shape: TorusShape,
                           base_dim: int, grid: tuple[int, ...],
                           amplitude: float = 0.2, max_freq: int = 2,
                           interp: str = "trig",
                           det_margin: float = 0.05) -> GridMap:
    """Random diffeomorphism moving only fiber coordinates (base fixed)."""
    fiber = shape.dim - base_dim
    field = np.zeros(tuple(grid) + (shape.dim,))
    field[..., base_dim:] = band_limited_field(
        rng, shape, grid, fiber, amplitude, max_freq)
    for _ in range(25):
        f = GridMap(shape, shape, identity_reference(shape.dim), tuple(grid),
                    field, interp)
        jac = f.jacobian_on(f.grid).reshape(-1, shape.dim, shape.dim)
        if np.linalg.det(jac).min() > det_margin:
            return f
        field = field * 0.7
    raise NotADiffeomorphism("could not shrink a random vertical field into "
                             "the certified diffeomorphism region")


def random_fibration(rng: np.random.Generator, shape: TorusShape,
                     base_dim: int, grid: tuple[int, ...],
                     amplitude: float = 0.2, max_freq: int = 2,
                     interp: str = "trig") -> GridMap:
    """Random fibration in the class of the coordinate projection.

    The base offset field has sup norm equal to ``amplitude``, so with
    ``amplitude < delta`` the result stays inside the tube domain.
    """
    field = band_limited_field(rng, shape, grid, base_dim, amplitude, max_freq)
    pi = coordinate_projection(shape, base_dim, tuple(grid), interp)
    return pi.with_displacement(field)


def random_section_field(rng: np.random.Generator, base: TorusShape,
                         value_shape: TorusShape, grid: tuple[int, ...],
                         amplitude: float = 0.2, max_freq: int = 2,
                         interp: str = "trig") -> GridMap:
    """Random vector-valued field over the base (a section in coordinates)."""
    field = band_limited_field(rng, base, grid, value_shape.dim, amplitude,
                               max_freq)
    return vector_valued_map(base, value_shape, field, interp)


def random_base_diffeo(rng: np.random.Generator, base: TorusShape,
                       grid: tuple[int, ...], amplitude: float = 0.2,
                       max_freq: int = 2, interp: str = "trig") -> GridMap:
    return random_diffeo(rng, base, grid, amplitude, max_freq, interp)
