"""Factorization of nearby fibrations and chained factorization.

Closed-form oracle: for pi(x) = (x1 + a sin x2) over the coordinate
projection, the factorizing map is exactly f(y) = (y1 - a sin y2, y2),
since pi(f(y)) = y1 - a sin y2 + a sin y2 = y1.  Newton inversion is
cross-checked against scipy.optimize.brentq on single points.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

from fibkit.errors import (MaxDepthExceeded, NotADiffeomorphism, NotInV1,
                           OutsideTube, RankDeficient, ShapeMismatch)
from fibkit.gridmap import (compose, coordinate_projection,
                            coordproj_reference, identity_map, invert,
                            sample_map, sup_distance)
from fibkit.orbit import (base_offset_sup, connect_chain, coset_equal,
                          factorize, graph_section, product_shape,
                          push_fibration, section_exchange, swap_projection)
from fibkit.sampling import random_diffeo, random_fibration, random_points
from fibkit.torus import TorusShape, minimal_difference, square_torus
from fibkit.transport import AnalyticPath, poly_term

GRID = (64, 64)


def shear_fibration(t2, t1, a=0.2, grid=GRID):
    return sample_map(lambda n: a * np.sin(n[..., 1:2]), t2, t1,
                      coordproj_reference(1), grid)


def shear_field(a=0.2, grid=GRID):
    axes = np.linspace(0.0, 2.0 * np.pi, grid[1], endpoint=False)
    field = np.zeros(grid + (1,))
    field[..., 0] = a * np.sin(axes)[None, :]
    return field


@pytest.fixture
def pi0(t2):
    return coordinate_projection(t2, 1, GRID)


class TestProductPieces:
    def test_product_shape(self, t2, t1):
        p = product_shape(t2, t1)
        assert p.dim == 3
        assert p.periods == t2.periods + t1.periods

    def test_graph_section_values(self, t2, t1, pi0):
        pi = shear_fibration(t2, t1)
        alpha = graph_section(pi)
        pts = random_points(np.random.default_rng(3), t2, 40)
        vals = alpha.eval_many(pts)
        assert np.abs(minimal_difference(vals[:, :2], pts, 2.0 * np.pi)).max() == 0.0
        expect = pts[:, 0] + 0.2 * np.sin(pts[:, 1])
        gap = minimal_difference(vals[:, 2], expect, 2.0 * np.pi)
        assert np.abs(gap).max() < 1e-12

    def test_graph_section_rejects_non_fibration(self, t2):
        phi = identity_map(t2, GRID)
        with pytest.raises(ShapeMismatch):
            graph_section(phi)

    def test_swap_projection_closed_form(self, t2):
        p2 = swap_projection(t2, 1)
        assert np.all(np.asarray(p2.displacement) == 0.0)
        pts = random_points(np.random.default_rng(4), p2.src, 40)
        vals = p2.eval_many(pts)
        # (x1, x2, b) -> (b, x2)
        assert np.abs(vals[:, 0] - pts[:, 2]).max() == 0.0
        assert np.abs(vals[:, 1] - pts[:, 1]).max() == 0.0


class TestPushFibration:
    def test_push_round_trip(self, t2, t1, pi0):
        pi = shear_fibration(t2, t1)
        f = factorize(pi0, pi).f
        assert sup_distance(push_fibration(pi0, f), pi) < 1e-12

    def test_push_of_identity(self, t2, pi0):
        pushed = push_fibration(pi0, identity_map(t2, GRID))
        assert sup_distance(pushed, pi0) == 0.0

    def test_push_keeps_submersion_margin(self, t2, pi0):
        phi = random_diffeo(np.random.default_rng(11), t2, GRID, 0.15)
        pushed = push_fibration(pi0, phi)
        from fibkit.gridmap import submersion_certificate
        assert submersion_certificate(pushed).margin > 0.5


class TestSectionExchange:
    def test_exchanged_section_splits_p2(self, t2, t1, pi0):
        pi = shear_fibration(t2, t1)
        alpha = graph_section(pi)
        p2 = swap_projection(t2, 1)
        beta = section_exchange(alpha, p2)
        assert sup_distance(compose(p2, beta), identity_map(t2, GRID)) < 1e-9

    def test_fixed_point_of_exchange(self, t2, pi0):
        # the graph of the reference projection is already a section of p2
        alpha = graph_section(pi0)
        p2 = swap_projection(t2, 1)
        beta = section_exchange(alpha, p2)
        assert sup_distance(beta, alpha) < 1e-10

    def test_folding_section_raises(self, t2, t1, pi0):
        pi = shear_fibration(t2, t1, a=0.7)
        folded = sample_map(lambda n: 0.7 * np.sin(2.0 * n[..., 0:1]), t2, t1,
                            coordproj_reference(1), GRID)
        alpha = graph_section(folded)
        with pytest.raises(NotInV1):
            section_exchange(alpha, swap_projection(t2, 1))


class TestFactorize:
    def test_reference_factors_through_identity(self, t2, pi0):
        res = factorize(pi0, pi0)
        assert np.abs(np.asarray(res.f.displacement)).max() == 0.0
        assert res.residual < 1e-12
        assert res.witness.margin > 0.9

    def test_shear_closed_form(self, t2, t1, pi0):
        res = factorize(pi0, shear_fibration(t2, t1))
        nodes = np.asarray(res.f.node_points)
        disp = np.asarray(res.f.displacement).reshape(-1, 2)
        expect = np.stack([-0.2 * np.sin(nodes[:, 1]),
                           np.zeros(len(nodes))], axis=-1)
        assert np.abs(disp - expect).max() < 1e-9
        assert res.residual < 1e-9

    def test_factorization_property_random(self, t2, pi0):
        for seed in range(5):
            rng = np.random.default_rng(100 + seed)
            pi = random_fibration(rng, t2, 1, GRID, 0.15)
            res = factorize(pi0, pi)
            assert res.residual < 1e-8
            assert res.witness.margin > 0.0
            assert sup_distance(compose(pi, res.f), pi0) < 1e-8

    def test_newton_inverse_against_brentq(self, t2, t1, pi0):
        pi = shear_fibration(t2, t1, a=0.17)
        f = factorize(pi0, pi).f
        pts = random_points(np.random.default_rng(7), t2, 15)
        vals = f.eval_many(pts)
        for (y1, y2), got in zip(pts, vals):
            # solve u + 0.17 sin(y2) = y1 for the first component of f
            root = brentq(lambda u: u + 0.17 * np.sin(y2) - y1,
                          y1 - 1.0, y1 + 1.0, xtol=1e-13)
            assert abs(minimal_difference(got[0], root, 2.0 * np.pi)) < 1e-9
            assert abs(minimal_difference(got[1], y2, 2.0 * np.pi)) < 1e-12

    def test_round_trip_both_ways(self, t2, pi0):
        rng = np.random.default_rng(21)
        pi = random_fibration(rng, t2, 1, GRID, 0.12)
        f = factorize(pi0, pi).f
        f_inv = invert(f)
        assert sup_distance(compose(f, f_inv), identity_map(t2, GRID)) < 1e-8
        assert sup_distance(compose(f_inv, f), identity_map(t2, GRID)) < 1e-8

    def test_factorizer_matches_pushing_diffeo(self, t2, pi0):
        phi = random_diffeo(np.random.default_rng(31), t2, GRID, 0.08)
        pi = push_fibration(pi0, phi)
        f = factorize(pi0, pi).f
        res = coset_equal(f, phi, pi0)
        assert res.equal, res.residual

    def test_rejects_displaced_reference(self, t2, t1, pi0):
        not_ref = shear_fibration(t2, t1, a=0.05)
        with pytest.raises(ShapeMismatch):
            factorize(not_ref, not_ref)

    def test_outside_tube(self, t2, t1, pi0):
        far = sample_map(lambda n: np.full(n.shape[:-1] + (1,), 1.5), t2, t1,
                        coordproj_reference(1), GRID)
        with pytest.raises(OutsideTube):
            factorize(pi0, far)

    def test_fold_inside_tube_fails(self, t2, t1, pi0):
        # rank drops between scan nodes, so the fold surfaces either from
        # the certificate or from the inversion pre-check
        folded = sample_map(lambda n: 0.7 * np.sin(2.0 * n[..., 0:1]), t2, t1,
                            coordproj_reference(1), GRID)
        with pytest.raises((RankDeficient, NotADiffeomorphism)):
            factorize(pi0, folded, radius=1.0)


class TestCoset:
    def test_equal_cosets(self, t2, pi0):
        pi = shear_fibration(t2, square_torus(1))
        f = factorize(pi0, pi).f
        res = coset_equal(f, f, pi0)
        assert res.equal and res.residual < 1e-12

    def test_vertical_twist_stays_in_coset(self, t2, pi0):
        from fibkit.sampling import random_vertical_diffeo
        f = identity_map(t2, GRID)
        psi = random_vertical_diffeo(np.random.default_rng(5), t2, 1, GRID, 0.1)
        res = coset_equal(f, compose(f, psi), pi0)
        assert res.equal, res.residual

    def test_horizontal_move_leaves_coset(self, t2, pi0):
        f = identity_map(t2, GRID)
        g = sample_map(
            lambda n: np.stack([0.1 * np.sin(n[..., 1]),
                                np.zeros(n.shape[:-1])], axis=-1),
            t2, t2, f.reference, GRID)
        res = coset_equal(f, g, pi0)
        assert not res.equal
        assert res.residual > 0.05


class TestBaseOffset:
    def test_offset_of_shear(self, t2, t1, pi0):
        pi = shear_fibration(t2, t1, a=0.2)
        assert abs(base_offset_sup(pi0, pi) - 0.2) < 1e-10

    def test_offset_wraps_around_period(self, t2, t1, pi0):
        near_period = sample_map(
            lambda n: np.full(n.shape[:-1] + (1,), 2.0 * np.pi - 0.25),
            t2, t1, coordproj_reference(1), GRID)
        assert abs(base_offset_sup(pi0, near_period) - 0.25) < 1e-10

    def test_shape_mismatch(self, t3, t2, pi0):
        other = coordinate_projection(t3, 1, (8, 8, 8))
        with pytest.raises(ShapeMismatch):
            base_offset_sup(pi0, other)


class TestConnectChain:
    def test_constant_path_gives_identity(self, t2, pi0):
        path = AnalyticPath(pi0, (), checkpoints=3)
        phi = connect_chain(pi0, path)
        assert sup_distance(phi, identity_map(t2, GRID)) < 1e-10

    def test_chain_solves_path_end(self, t2, pi0):
        path = AnalyticPath(pi0, (poly_term(shear_field(), 0.0, 1.0),),
                            checkpoints=5)
        phi = connect_chain(pi0, path)
        assert sup_distance(compose(path.at(1.0), phi), pi0) < 1e-8

    def test_chain_agrees_with_single_step(self, t2, pi0):
        path = AnalyticPath(pi0, (poly_term(shear_field(a=0.15), 0.0, 1.0),),
                            checkpoints=3)
        chained = connect_chain(pi0, path)
        direct = factorize(pi0, path.at(1.0)).f
        res = coset_equal(chained, direct, pi0, tol=1e-6)
        assert res.equal, res.residual

    def test_small_radius_forces_bisection(self, t2, pi0):
        path = AnalyticPath(pi0, (poly_term(shear_field(a=0.2), 0.0, 1.0),),
                            checkpoints=2)
        phi = connect_chain(pi0, path, radius=0.06)
        assert sup_distance(compose(path.at(1.0), phi), pi0) < 1e-8

    def test_max_depth_exceeded(self, t2, pi0):
        path = AnalyticPath(pi0, (poly_term(shear_field(a=0.2), 0.0, 1.0),),
                            checkpoints=2)
        with pytest.raises(MaxDepthExceeded):
            connect_chain(pi0, path, radius=1e-3, max_depth=3)

    def test_path_must_start_at_reference(self, t2, pi0):
        path = AnalyticPath(pi0, (poly_term(shear_field(a=0.2), 1.0),),
                            checkpoints=3)
        with pytest.raises(ValueError):
            connect_chain(pi0, path)
