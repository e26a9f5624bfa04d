"""Flat tori, points on them, and periodic metric arithmetic.

A torus here is a product of circles ``R/(p_i Z)`` with axis periods
``p_i > 0``.  Coordinates are reduced to the fundamental domain
``[0, p_i)``; distances minimize over deck translations axis by axis,
which is exact for a product metric.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidCoordinate, ShapeMismatch


@dataclass(frozen=True)
class TorusShape:
    """Dimension and axis periods of a flat torus."""

    dim: int
    periods: tuple[float, ...]

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"torus dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        per = tuple(float(p) for p in self.periods)
        if len(per) != self.dim:
            raise ValueError(f"expected {self.dim} periods, got {len(per)}")
        if not all(np.isfinite(p) and p > 0.0 for p in per):
            raise ValueError(f"periods must be finite and positive, got {per}")
        object.__setattr__(self, "periods", per)

    @property
    def periods_array(self) -> np.ndarray:
        return np.asarray(self.periods, dtype=float)

    def __repr__(self) -> str:  # compact, used in error messages
        return f"T{self.dim}{self.periods}"


def square_torus(dim: int, period: float = 2.0 * np.pi) -> TorusShape:
    """Torus with the same period on every axis."""
    return TorusShape(dim, (float(period),) * dim)


@dataclass(frozen=True)
class Point:
    """A point of a flat torus, stored in canonical reduced coordinates."""

    shape: TorusShape
    coords: tuple[float, ...]

    def __post_init__(self):
        if len(self.coords) != self.shape.dim:
            raise InvalidCoordinate(
                f"expected {self.shape.dim} coordinates, got {len(self.coords)}")

    @property
    def coords_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def reduce_coords(coords: np.ndarray, shape: TorusShape) -> np.ndarray:
    """Reduce coordinate arrays (last axis = torus axis) into ``[0, p_i)``."""
    out = np.mod(coords, shape.periods_array)
    # mod can return p_i itself when the input is a tiny negative number;
    # fold that representative back to 0.
    return np.where(out >= shape.periods_array, out - shape.periods_array, out)


def wrap(coords, shape: TorusShape) -> Point:
    """Canonical representative of arbitrary real coordinates.

    Parameters
    ----------
    coords : sequence of float
        Unreduced coordinates, one per torus axis.
    shape : TorusShape
        Target torus.

    Returns
    -------
    Point
        The same point with coordinates reduced to ``[0, p_i)``.

    Raises
    ------
    InvalidCoordinate
        If any coordinate is NaN or infinite, or the length is wrong.
    """
    arr = np.asarray(coords, dtype=float)
    if arr.shape != (shape.dim,):
        raise InvalidCoordinate(
            f"expected {shape.dim} coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidCoordinate(f"non-finite coordinates: {arr}")
    return Point(shape, tuple(reduce_coords(arr, shape)))


def minimal_difference(a: np.ndarray, b: np.ndarray, periods: np.ndarray) -> np.ndarray:
    """Per-axis representative of ``a - b`` closest to zero.

    Works on broadcastable arrays whose last axis matches ``periods``.
    """
    d = np.mod(np.asarray(a, float) - np.asarray(b, float) + periods / 2.0, periods)
    return d - periods / 2.0


def torus_distance(a: Point, b: Point) -> float:
    """Flat geodesic distance between two points of the same torus.

    The product structure makes the minimization per-axis exact: each
    coordinate difference is replaced by its minimal representative and
    the Euclidean norm of the result is returned.

    Raises
    ------
    ShapeMismatch
        If the points live on different tori.
    """
    if a.shape != b.shape:
        raise ShapeMismatch(f"points on different tori: {a.shape} vs {b.shape}")
    d = minimal_difference(a.coords_array, b.coords_array, a.shape.periods_array)
    return float(np.sqrt(np.sum(d * d)))


def grid_axes(shape: TorusShape, grid: tuple[int, ...]) -> list[np.ndarray]:
    """Per-axis uniform node coordinates ``i * p_a / n_a``."""
    if len(grid) != shape.dim:
        raise ShapeMismatch(f"grid rank {len(grid)} vs torus dimension {shape.dim}")
    return [np.arange(n) * (p / n) for n, p in zip(grid, shape.periods)]


def grid_nodes(shape: TorusShape, grid: tuple[int, ...]) -> np.ndarray:
    """All uniform grid nodes, shape ``(*grid, dim)``."""
    axes = grid_axes(shape, grid)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


def flat_grid_nodes(shape: TorusShape, grid: tuple[int, ...]) -> np.ndarray:
    """Uniform grid nodes flattened to ``(prod(grid), dim)``, C order."""
    return grid_nodes(shape, grid).reshape(-1, shape.dim)
