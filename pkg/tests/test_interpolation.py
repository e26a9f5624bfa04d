import numpy as np
import pytest

from fibkit.interpolation import (CubicInterpolant, TrigInterpolant,
                                  make_interpolant)
from fibkit.torus import flat_grid_nodes, square_torus

TWO_PI = 2.0 * np.pi


def central_difference_jacobian(fn, pts, h=1e-6):
    """Finite-difference oracle for first derivatives."""
    npts, dim = pts.shape
    probe = fn(pts)
    jac = np.empty((npts, probe.shape[1], dim))
    for a in range(dim):
        e = np.zeros(dim)
        e[a] = h
        jac[:, :, a] = (fn(pts + e) - fn(pts - e)) / (2.0 * h)
    return jac


@pytest.fixture(scope="module")
def harmonic_2d():
    t2 = square_torus(2)
    grid = (32, 24)
    nodes = flat_grid_nodes(t2, grid).reshape(*grid, 2)
    samples = np.stack([
        0.25 * np.sin(2 * nodes[..., 0] - nodes[..., 1]),
        0.1 * np.cos(nodes[..., 0]) - 0.3 * np.sin(3 * nodes[..., 1]),
    ], axis=-1)

    def exact(p):
        return np.stack([
            0.25 * np.sin(2 * p[:, 0] - p[:, 1]),
            0.1 * np.cos(p[:, 0]) - 0.3 * np.sin(3 * p[:, 1]),
        ], axis=-1)

    return t2, grid, samples, exact


class TestTrig:
    def test_band_limited_values_exact(self, harmonic_2d):
        t2, grid, samples, exact = harmonic_2d
        interp = TrigInterpolant(samples, t2.periods_array)
        pts = np.random.default_rng(3).uniform(0, TWO_PI, (400, 2))
        assert np.abs(interp.values(pts) - exact(pts)).max() < 1e-12

    def test_jacobian_against_finite_differences(self, harmonic_2d):
        t2, grid, samples, exact = harmonic_2d
        interp = TrigInterpolant(samples, t2.periods_array)
        pts = np.random.default_rng(4).uniform(0, TWO_PI, (100, 2))
        jac = interp.jacobian(pts)
        fd = central_difference_jacobian(interp.values, pts)
        assert np.abs(jac - fd).max() < 1e-6

    def test_periodicity(self, harmonic_2d):
        t2, grid, samples, _ = harmonic_2d
        interp = TrigInterpolant(samples, t2.periods_array)
        pts = np.random.default_rng(5).uniform(0, TWO_PI, (50, 2))
        shifted = pts + np.array([TWO_PI, -2 * TWO_PI])
        assert np.abs(interp.values(pts) - interp.values(shifted)).max() < 1e-11

    def test_resample_matches_fine_sampling(self, harmonic_2d):
        t2, grid, samples, exact = harmonic_2d
        interp = TrigInterpolant(samples, t2.periods_array)
        fine = (64, 48)
        got = interp.resample(fine)
        pts = flat_grid_nodes(t2, fine)
        assert np.abs(got.reshape(-1, 2) - exact(pts)).max() < 1e-12

    def test_nyquist_mode_value_and_derivative(self):
        # cos at exactly half the sampling rate; the single-sided
        # coefficient must still evaluate as the symmetric cosine.
        t1 = square_torus(1)
        n = 16
        xs = np.arange(n) * TWO_PI / n
        interp = TrigInterpolant(np.cos(8 * xs)[:, None], t1.periods_array)
        pts = np.random.default_rng(6).uniform(0, TWO_PI, (100, 1))
        vals, jac = interp.values_and_jacobian(pts)
        assert np.abs(vals[:, 0] - np.cos(8 * pts[:, 0])).max() < 1e-12
        assert np.abs(jac[:, 0, 0] + 8 * np.sin(8 * pts[:, 0])).max() < 1e-11

    def test_odd_grid_supported(self):
        t1 = square_torus(1)
        xs = np.arange(9) * TWO_PI / 9
        interp = TrigInterpolant(np.sin(xs)[:, None], t1.periods_array)
        pts = np.linspace(0, TWO_PI, 33)[:, None]
        assert np.abs(interp.values(pts)[:, 0] - np.sin(pts[:, 0])).max() < 1e-13
        got = interp.resample((27,))
        xs2 = np.arange(27) * TWO_PI / 27
        assert np.abs(got[:, 0] - np.sin(xs2)).max() < 1e-13


class TestCubic:
    def test_reproduces_samples_at_nodes(self, harmonic_2d):
        t2, grid, samples, _ = harmonic_2d
        interp = CubicInterpolant(samples, t2.periods_array)
        nodes = flat_grid_nodes(t2, grid)
        got = interp.values(nodes).reshape(samples.shape)
        assert np.abs(got - samples).max() < 1e-11

    def test_fourth_order_convergence(self):
        t1 = square_torus(1)
        pts = np.random.default_rng(7).uniform(0, TWO_PI, (2000, 1))
        errs = []
        for n in (16, 32, 64):
            xs = np.arange(n) * TWO_PI / n
            interp = CubicInterpolant(np.sin(xs)[:, None], t1.periods_array)
            errs.append(np.abs(interp.values(pts)[:, 0] - np.sin(pts[:, 0])).max())
        assert errs[0] / errs[1] == pytest.approx(16.0, rel=0.25)
        assert errs[1] / errs[2] == pytest.approx(16.0, rel=0.25)

    def test_jacobian_against_finite_differences(self, harmonic_2d):
        t2, grid, samples, _ = harmonic_2d
        interp = CubicInterpolant(samples, t2.periods_array)
        pts = np.random.default_rng(8).uniform(0, TWO_PI, (100, 2))
        jac = interp.jacobian(pts)
        fd = central_difference_jacobian(interp.values, pts)
        assert np.abs(jac - fd).max() < 1e-5

    def test_wraparound_continuity(self):
        t1 = square_torus(1)
        rng = np.random.default_rng(9)
        samples = rng.standard_normal((16, 1))
        interp = CubicInterpolant(samples, t1.periods_array)
        eps = 1e-9
        left = interp.values(np.array([[TWO_PI - eps]]))
        right = interp.values(np.array([[eps]]))
        assert np.abs(left - right).max() < 1e-6


def test_dispatch():
    t1 = square_torus(1)
    samples = np.zeros((8, 1))
    assert isinstance(make_interpolant(samples, t1.periods_array, "trig"),
                      TrigInterpolant)
    assert isinstance(make_interpolant(samples, t1.periods_array, "cubic"),
                      CubicInterpolant)
    with pytest.raises(ValueError):
        make_interpolant(samples, t1.periods_array, "linear")
