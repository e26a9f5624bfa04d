"""Periodic interpolation of uniformly sampled vector fields.

Two engines with one interface:

* ``TrigInterpolant``: the trigonometric interpolant through the samples.
  Band-limited fields are reproduced exactly (to roundoff) at arbitrary
  points, and derivatives are spectral.  For even node counts the Nyquist
  mode is kept single-sided in coefficient storage; evaluation forms
  complex exponentials and takes the real part at the end, which for real
  samples is identical to the symmetric cosine convention, for values and
  first derivatives alike.
* ``CubicInterpolant``: periodic cubic B-spline interpolation, fourth
  order accurate, with analytic first derivatives.

Both evaluate scattered points in batches and resample onto finer uniform
grids.  Sample arrays have shape ``(*grid, ncomp)`` with one trailing
component axis; points have shape ``(npts, ndim)``.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

# Scattered evaluation is chunked so the intermediate per-axis tensors stay
# small; the value only affects memory, never results.
_CHUNK = 8192

# Modes below this relative magnitude are dropped when few enough modes
# survive to pay off; the dropped tail is orders of magnitude under any
# tolerance used elsewhere (it exists only as FFT roundoff noise).
_SPARSE_RELATIVE_TOL = 1e-14
_SPARSE_FRACTION = 8


def _as_points(points: np.ndarray, ndim: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != ndim:
        raise ValueError(f"points must have shape (npts, {ndim}), got {pts.shape}")
    return pts


def fourier_coefficients(samples: np.ndarray, ndim: int) -> np.ndarray:
    """Normalized FFT coefficients over the leading ``ndim`` grid axes."""
    axes = tuple(range(ndim))
    n_total = 1
    for a in axes:
        n_total *= samples.shape[a]
    return np.fft.fftn(samples, axes=axes) / n_total


def _int_freqs(n: int) -> np.ndarray:
    """Integer frequencies in FFT order, Nyquist single-sided at -n/2."""
    return np.fft.fftfreq(n, d=1.0 / n)


def _pad_axis(coeffs: np.ndarray, axis: int, n_new: int) -> np.ndarray:
    """Zero-pad one coefficient axis to ``n_new`` modes, splitting Nyquist."""
    c = np.moveaxis(coeffs, axis, 0)
    n = c.shape[0]
    if n_new == n:
        return coeffs
    if n_new < n:
        raise ValueError(f"refusing to truncate modes: {n} -> {n_new}")
    out = np.zeros((n_new,) + c.shape[1:], dtype=complex)
    npos = (n + 1) // 2          # frequencies 0 .. npos-1
    nneg = n - npos              # frequencies -nneg .. -1 (Nyquist included if even)
    out[:npos] = c[:npos]
    out[n_new - nneg:] = c[npos:]
    if n % 2 == 0:
        half = n // 2
        # single-sided Nyquist at -n/2 becomes a symmetric +-n/2 pair
        out[n_new - half] *= 0.5
        out[half] += out[n_new - half]
    return np.moveaxis(out, 0, axis)


def pad_coefficients(coeffs: np.ndarray, ndim: int, new_grid: tuple[int, ...]) -> np.ndarray:
    out = coeffs
    for a in range(ndim):
        out = _pad_axis(out, a, new_grid[a])
    return out


def trig_scattered(coeffs: np.ndarray, periods: np.ndarray, points: np.ndarray,
                   want_jacobian: bool = False):
    """Evaluate a coefficient array at scattered points.

    Parameters
    ----------
    coeffs : complex array, shape ``(*grid, ncomp)``
        Normalized Fourier coefficients.
    periods : array, shape ``(ndim,)``
    points : array, shape ``(npts, ndim)``
    want_jacobian : bool
        Also return first derivatives.

    Returns
    -------
    values : array ``(npts, ncomp)``
    jac : array ``(npts, ncomp, ndim)``, only if requested
    """
    ndim = len(periods)
    grid = coeffs.shape[:ndim]
    ncomp = coeffs.shape[ndim]
    pts = _as_points(points, ndim)
    npts = pts.shape[0]

    flat = coeffs.reshape(-1, ncomp)
    amp = np.abs(flat).max(axis=1)
    peak = amp.max()
    keep = amp > _SPARSE_RELATIVE_TOL * peak
    if peak == 0.0 or keep.sum() * _SPARSE_FRACTION <= flat.shape[0]:
        return _trig_scattered_sparse(flat, keep, grid, periods, pts,
                                      want_jacobian)

    # Variant stack: values plus (optionally) one derivative per axis.
    stacks = [coeffs]
    if want_jacobian:
        for a in range(ndim):
            k = _int_freqs(grid[a])
            mult = (2j * np.pi / periods[a]) * k
            shape = [1] * (ndim + 1)
            shape[a] = grid[a]
            stacks.append(coeffs * mult.reshape(shape))
    nvar = len(stacks)
    stack = np.stack(stacks, axis=-1).reshape(grid + (ncomp * nvar,))

    values = np.empty((npts, ncomp), dtype=float)
    jac = np.empty((npts, ncomp, ndim), dtype=float) if want_jacobian else None

    for lo in range(0, npts, _CHUNK):
        hi = min(lo + _CHUNK, npts)
        chunk = pts[lo:hi]
        # Fold axis 0 with a matmul, remaining axes with per-point einsums.
        k0 = _int_freqs(grid[0])
        phase = np.exp((2j * np.pi / periods[0]) * np.outer(chunk[:, 0], k0))
        acc = np.tensordot(phase, stack, axes=([1], [0]))
        for a in range(1, ndim):
            ka = _int_freqs(grid[a])
            pa = np.exp((2j * np.pi / periods[a]) * np.outer(chunk[:, a], ka))
            acc = np.einsum("pn...,pn->p...", acc, pa)
        acc = acc.real.reshape(hi - lo, ncomp, nvar)
        values[lo:hi] = acc[:, :, 0]
        if want_jacobian:
            jac[lo:hi] = acc[:, :, 1:]
    if want_jacobian:
        return values, jac
    return values


def _trig_scattered_sparse(flat: np.ndarray, keep: np.ndarray,
                           grid: tuple[int, ...], periods: np.ndarray,
                           pts: np.ndarray, want_jacobian: bool):
    """Mode-by-mode evaluation over the surviving coefficients.

    Same sum as the dense path, restricted to modes above the noise
    floor; pays off when nearly the whole spectrum is numerically zero.
    """
    ndim = len(periods)
    ncomp = flat.shape[1]
    npts = pts.shape[0]
    freqs = np.stack(np.meshgrid(*[_int_freqs(n) for n in grid],
                                 indexing="ij"), axis=-1).reshape(-1, ndim)
    kf = freqs[keep]
    ck = flat[keep]
    angular = 2.0 * np.pi / np.asarray(periods, dtype=float)
    blocks = [ck]
    if want_jacobian:
        for a in range(ndim):
            blocks.append(ck * (1j * angular[a] * kf[:, a])[:, None])
    weights = np.concatenate(blocks, axis=1)

    nvar = 1 + (ndim if want_jacobian else 0)
    values = np.empty((npts, ncomp), dtype=float)
    jac = np.empty((npts, ncomp, ndim), dtype=float) if want_jacobian else None
    for lo in range(0, npts, _CHUNK):
        hi = min(lo + _CHUNK, npts)
        phase = np.exp(1j * (pts[lo:hi] * angular) @ kf.T)
        acc = (phase @ weights).real.reshape(hi - lo, nvar, ncomp)
        values[lo:hi] = acc[:, 0, :]
        if want_jacobian:
            jac[lo:hi] = acc[:, 1:, :].transpose(0, 2, 1)
    if want_jacobian:
        return values, jac
    return values


class TrigInterpolant:
    """Trigonometric interpolant of one sampled periodic vector field."""

    def __init__(self, samples: np.ndarray, periods):
        self.periods = np.asarray(periods, dtype=float)
        ndim = self.periods.size
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != ndim + 1:
            raise ValueError(
                f"samples must have shape (*grid, ncomp) with {ndim} grid axes")
        self.ndim = ndim
        self.grid = samples.shape[:ndim]
        self.ncomp = samples.shape[ndim]
        self.coeffs = fourier_coefficients(samples, ndim)

    def values(self, points: np.ndarray) -> np.ndarray:
        return trig_scattered(self.coeffs, self.periods, points)

    def values_and_jacobian(self, points: np.ndarray):
        return trig_scattered(self.coeffs, self.periods, points, want_jacobian=True)

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        return self.values_and_jacobian(points)[1]

    def resample(self, new_grid: tuple[int, ...]) -> np.ndarray:
        """Samples of the same interpolant on a finer uniform grid."""
        padded = pad_coefficients(self.coeffs, self.ndim, new_grid)
        n_total = int(np.prod(new_grid))
        axes = tuple(range(self.ndim))
        return np.fft.ifftn(padded * n_total, axes=axes).real

    def derivative_samples(self, new_grid: tuple[int, ...]) -> np.ndarray:
        """First derivatives on a uniform grid, shape ``(*new_grid, ncomp, ndim)``."""
        padded = pad_coefficients(self.coeffs, self.ndim, new_grid)
        n_total = int(np.prod(new_grid))
        axes = tuple(range(self.ndim))
        out = np.empty(tuple(new_grid) + (self.ncomp, self.ndim), dtype=float)
        for a in range(self.ndim):
            k = _int_freqs(new_grid[a])
            mult = (2j * np.pi / self.periods[a]) * k
            shape = [1] * (self.ndim + 1)
            shape[a] = new_grid[a]
            dc = padded * mult.reshape(shape)
            out[..., a] = np.fft.ifftn(dc * n_total, axes=axes).real
        return out


def _bspline3_weights(t: np.ndarray):
    """Cubic B-spline weights for offsets (-1, 0, 1, 2), t in [0, 1)."""
    s = 1.0 - t
    w = np.empty(t.shape + (4,), dtype=float)
    w[..., 0] = s ** 3 / 6.0
    w[..., 1] = (4.0 - 6.0 * t ** 2 + 3.0 * t ** 3) / 6.0
    w[..., 2] = (4.0 - 6.0 * s ** 2 + 3.0 * s ** 3) / 6.0
    w[..., 3] = t ** 3 / 6.0
    return w


def _bspline3_dweights(t: np.ndarray):
    """d/dt of the weights above."""
    s = 1.0 - t
    w = np.empty(t.shape + (4,), dtype=float)
    w[..., 0] = -0.5 * s ** 2
    w[..., 1] = -2.0 * t + 1.5 * t ** 2
    w[..., 2] = 2.0 * s - 1.5 * s ** 2
    w[..., 3] = 0.5 * t ** 2
    return w


class CubicInterpolant:
    """Periodic cubic B-spline interpolant of one sampled vector field."""

    def __init__(self, samples: np.ndarray, periods):
        self.periods = np.asarray(periods, dtype=float)
        ndim = self.periods.size
        samples = np.asarray(samples, dtype=float)
        if samples.ndim != ndim + 1:
            raise ValueError(
                f"samples must have shape (*grid, ncomp) with {ndim} grid axes")
        self.ndim = ndim
        self.grid = samples.shape[:ndim]
        self.ncomp = samples.shape[ndim]
        coeffs = samples
        for a in range(ndim):
            coeffs = ndimage.spline_filter1d(coeffs, order=3, axis=a,
                                             mode="grid-wrap", output=np.float64)
        self.coeffs = coeffs

    def _locate(self, points: np.ndarray):
        pts = _as_points(points, self.ndim)
        idx, frac = [], []
        for a in range(self.ndim):
            n = self.grid[a]
            u = pts[:, a] * (n / self.periods[a])
            i0 = np.floor(u).astype(np.int64)
            t = u - i0
            offs = np.arange(-1, 3)
            idx.append(np.mod(i0[:, None] + offs[None, :], n))
            frac.append(t)
        return idx, frac

    def _tensor_eval(self, idx, weights_per_axis):
        # Combine per-axis 4-tap stencils into one flat gather of 4**ndim
        # coefficients per point, then contract with the weight outer product.
        npts = idx[0].shape[0]
        flat = np.zeros((npts, 1), dtype=np.int64)
        wall = np.ones((npts, 1), dtype=float)
        stride = [int(np.prod(self.grid[a + 1:])) for a in range(self.ndim)]
        for a in range(self.ndim):
            flat = (flat[:, :, None] + (idx[a] * stride[a])[:, None, :]).reshape(npts, -1)
            wall = (wall[:, :, None] * weights_per_axis[a][:, None, :]).reshape(npts, -1)
        cflat = self.coeffs.reshape(-1, self.ncomp)
        gathered = cflat[flat]               # (npts, 4**ndim, ncomp)
        return np.einsum("pqc,pq->pc", gathered, wall)

    def values(self, points: np.ndarray) -> np.ndarray:
        idx, frac = self._locate(points)
        w = [_bspline3_weights(t) for t in frac]
        return self._tensor_eval(idx, w)

    def values_and_jacobian(self, points: np.ndarray):
        idx, frac = self._locate(points)
        w = [_bspline3_weights(t) for t in frac]
        dw = [_bspline3_dweights(t) for t in frac]
        vals = self._tensor_eval(idx, w)
        npts = vals.shape[0]
        jac = np.empty((npts, self.ncomp, self.ndim), dtype=float)
        for a in range(self.ndim):
            mixed = [dw[b] if b == a else w[b] for b in range(self.ndim)]
            scale = self.grid[a] / self.periods[a]   # d(grid units)/d(coordinate)
            jac[:, :, a] = self._tensor_eval(idx, mixed) * scale
        return vals, jac

    def jacobian(self, points: np.ndarray) -> np.ndarray:
        return self.values_and_jacobian(points)[1]

    def resample(self, new_grid: tuple[int, ...]) -> np.ndarray:
        pts = _uniform_nodes(new_grid, self.periods)
        return self.values(pts).reshape(tuple(new_grid) + (self.ncomp,))

    def derivative_samples(self, new_grid: tuple[int, ...]) -> np.ndarray:
        pts = _uniform_nodes(new_grid, self.periods)
        _, jac = self.values_and_jacobian(pts)
        return jac.reshape(tuple(new_grid) + (self.ncomp, self.ndim))


def _uniform_nodes(grid: tuple[int, ...], periods: np.ndarray) -> np.ndarray:
    axes = [np.arange(n) * (p / n) for n, p in zip(grid, periods)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, len(grid))


def make_interpolant(samples: np.ndarray, periods, scheme: str):
    if scheme == "trig":
        return TrigInterpolant(samples, periods)
    if scheme == "cubic":
        return CubicInterpolant(samples, periods)
    raise ValueError(f"unknown interpolation scheme {scheme!r}")
