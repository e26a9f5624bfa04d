"""Seeded invariant suites over every module, for the verify command.

Each check measures one residual against a named tolerance from the run
configuration.  Checks marked resolution-dependent are expected to
degrade on coarse grids; the remainder must hold at any supported
resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baseaction import (assemble_base, fiber_spectral_energy, global_section,
                         section_pullback, split_section, trivialize)
from .chart import chart_assemble, chart_decompose
from .config import RunConfig
from .errors import FibrationError
from .gmapio import read_gmap
from .gridmap import (GridMap, compose, coordinate_projection,
                      diffeo_certificate, identity_map, identity_reference,
                      invert, sample_map, sup_distance, vector_valued_map)
from .orbit import coset_equal, factorize, graph_section, push_fibration
from .report import CheckResult
from .sampling import (band_limited_field, random_base_diffeo, random_diffeo,
                       random_fibration, random_points, random_section_field,
                       random_vertical_diffeo)
from .torus import Point, TorusShape, grid_nodes, minimal_difference
from .transport import (AnalyticPath, horizontal_velocity, poly_term,
                        sin_term, transport_path)
from .tubular import (TubularProjection, conformal_metric, flat_metric,
                      in_tube, in_tube_domain, project_point)


@dataclass(frozen=True)
class Scene:
    """Everything the checks share, derived once from the configuration."""

    config: RunConfig
    total: TorusShape
    base: TorusShape
    pi0: GridMap
    proj: TubularProjection
    proj_conformal: TubularProjection

    @property
    def grid(self):
        return self.config.grid

    @property
    def interp(self):
        return self.config.interp

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, salt])


def build_scene(config: RunConfig) -> Scene:
    total = TorusShape(config.total_dim, tuple(config.periods))
    base = TorusShape(config.base_dim, tuple(config.periods[:config.base_dim]))
    pi0 = coordinate_projection(total, config.base_dim, config.grid,
                                config.interp)
    proj = TubularProjection(pi0, config.delta, flat_metric())
    if config.metric == "conformal":
        factor = read_gmap(config.conformal_factor)
    else:
        factor = vector_valued_map(
            total, TorusShape(1, (config.periods[0],)),
            0.3 * np.sin(grid_nodes(total, config.grid)[..., -1:]),
            config.interp)
    proj_conformal = TubularProjection(pi0, config.delta,
                                       conformal_metric(factor))
    return Scene(config, total, base, pi0, proj, proj_conformal)


def _result(scene: Scene, name: str, residual: float,
            resolution_dependent: bool = False) -> CheckResult:
    return CheckResult.measure(name, residual, scene.config.tolerance(name),
                               resolution_dependent)


# -- geom ------------------------------------------------------------------


def check_compose_associativity(scene: Scene) -> CheckResult:
    rng = scene.rng(1)
    worst = 0.0
    for _ in range(5):
        f, g, h = (random_diffeo(rng, scene.total, scene.grid, 0.1,
                                 interp=scene.interp) for _ in range(3))
        left = compose(f, compose(g, h))
        right = compose(compose(f, g), h)
        worst = max(worst, sup_distance(left, right))
    return _result(scene, "geom.compose_associativity", worst, True)


def check_inversion_round_trip(scene: Scene) -> CheckResult:
    rng = scene.rng(2)
    ident = identity_map(scene.total, scene.grid, scene.interp)
    worst = 0.0
    for _ in range(5):
        f = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
        f_inv = invert(f)
        worst = max(worst, sup_distance(compose(f, f_inv), ident),
                    sup_distance(compose(f_inv, f), ident))
    return _result(scene, "geom.inversion_round_trip", worst, True)


def check_chain_rule(scene: Scene) -> CheckResult:
    rng = scene.rng(3)
    f = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
    g = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
    pts = random_points(rng, scene.total, 100)
    fg = compose(f, g)
    gx = np.asarray(g.eval_many(pts))
    chained = f.jacobian_many(gx) @ g.jacobian_many(pts)
    direct = fg.jacobian_many(pts)
    return _result(scene, "geom.chain_rule",
                   float(np.abs(direct - chained).max()), True)


def check_spectral_accuracy(scene: Scene) -> CheckResult:
    rng = scene.rng(4)
    pts = random_points(rng, scene.total, 200)
    m = scene.total.dim

    def disp(nodes):
        rolled = np.roll(nodes, -1, axis=-1)
        return 0.12 * (np.exp(np.sin(rolled)) - 1.0)

    errs = []
    for n in (16, 32, 64):
        f = sample_map(disp, scene.total, scene.total, identity_reference(m),
                       (n,) * m, "trig")
        f_inv = invert(f)
        back = np.asarray(f_inv.eval_many(np.asarray(f.eval_many(pts))))
        gap = minimal_difference(back, pts, scene.total.periods_array)
        errs.append(float(np.abs(gap).max()))
    factors = [0.0 if nxt <= 1e-12 else nxt / prev
               for prev, nxt in zip(errs, errs[1:])]
    return _result(scene, "geom.spectral_accuracy", max(factors))


def check_jacobian_fd(scene: Scene) -> CheckResult:
    rng = scene.rng(5)
    f = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
    pts = random_points(rng, scene.total, 100)
    jac = f.jacobian_many(pts)
    h = 1e-5
    worst = 0.0
    for axis in range(scene.total.dim):
        offset = np.zeros(scene.total.dim)
        offset[axis] = h
        plus = np.asarray(f.eval_many(pts + offset))
        minus = np.asarray(f.eval_many(pts - offset))
        fd = minimal_difference(plus, minus,
                                scene.total.periods_array) / (2.0 * h)
        worst = max(worst, float(np.abs(jac[:, :, axis] - fd).max()))
    return _result(scene, "geom.jacobian_fd", worst)


# -- tubular ---------------------------------------------------------------


def _tube_pairs(scene: Scene, rng, count: int):
    """Random (x, y) pairs with y inside the tube around the fiber of x."""
    k = scene.base.dim
    xs = random_points(rng, scene.total, count)
    ys = xs.copy()
    ys[:, :k] += rng.uniform(-0.9, 0.9, (count, k)) * scene.config.delta
    ys[:, k:] = rng.uniform(0.0, 1.0, ys[:, k:].shape) * np.array(
        scene.total.periods[k:])
    return xs, ys % scene.total.periods_array


def check_fiber_membership(scene: Scene) -> CheckResult:
    rng = scene.rng(6)
    k = scene.base.dim
    xs, ys = _tube_pairs(scene, rng, 50)
    worst = 0.0
    for x, y in zip(xs, ys):
        px = project_point(scene.proj, Point(scene.total, tuple(x)),
                           Point(scene.total, tuple(y)))
        gap = minimal_difference(np.asarray(px.coords[:k]), x[:k],
                                 scene.base.periods_array)
        worst = max(worst, float(np.abs(gap).max()))
    return _result(scene, "tubular.fiber_membership", worst)


def _idempotence(scene: Scene, proj, rng, count: int) -> float:
    worst = 0.0
    for x, y in zip(*_tube_pairs(scene, rng, count)):
        px = Point(scene.total, tuple(x))
        once = project_point(proj, px, Point(scene.total, tuple(y)))
        twice = project_point(proj, px, once)
        gap = minimal_difference(np.asarray(twice.coords),
                                 np.asarray(once.coords),
                                 scene.total.periods_array)
        worst = max(worst, float(np.abs(gap).max()))
    return worst


def check_idempotence_flat(scene: Scene) -> CheckResult:
    return _result(scene, "tubular.idempotence_flat",
                   _idempotence(scene, scene.proj, scene.rng(7), 50))


def check_idempotence_conformal(scene: Scene) -> CheckResult:
    return _result(scene, "tubular.idempotence_conformal",
                   _idempotence(scene, scene.proj_conformal, scene.rng(8), 8),
                   True)


def check_vertical_invariance(scene: Scene) -> CheckResult:
    rng = scene.rng(9)
    worst = 0.0
    for _ in range(20):
        psi = random_vertical_diffeo(rng, scene.total, scene.base.dim,
                                     scene.grid, 0.1, interp=scene.interp)
        xs, ys = _tube_pairs(scene, rng, 5)
        moved = np.asarray(psi.eval_many(xs))
        for x, mx, y in zip(xs, moved, ys):
            a = project_point(scene.proj, Point(scene.total, tuple(x)),
                              Point(scene.total, tuple(y)))
            b = project_point(scene.proj, Point(scene.total, tuple(mx)),
                              Point(scene.total, tuple(y)))
            gap = minimal_difference(np.asarray(a.coords),
                                     np.asarray(b.coords),
                                     scene.total.periods_array)
            worst = max(worst, float(np.abs(gap).max()))
    return _result(scene, "tubular.vertical_invariance", worst)


def check_tube_invariance(scene: Scene) -> CheckResult:
    rng = scene.rng(10)
    violations = 0
    total = 0
    for _ in range(20):
        psi = random_vertical_diffeo(rng, scene.total, scene.base.dim,
                                     scene.grid, 0.1, interp=scene.interp)
        xs, ys = _tube_pairs(scene, rng, 5)
        moved = np.asarray(psi.eval_many(ys))
        for x, y, my in zip(xs, ys, moved):
            px = Point(scene.total, tuple(x))
            if in_tube(scene.proj, px, Point(scene.total, tuple(y))):
                total += 1
                if not in_tube(scene.proj, px, Point(scene.total, tuple(my))):
                    violations += 1
    return _result(scene, "tubular.tube_invariance",
                   violations / max(total, 1))


# -- chart -----------------------------------------------------------------


def check_right_equivariance(scene: Scene) -> CheckResult:
    rng = scene.rng(11)
    worst = 0.0
    for _ in range(10):
        phi = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
        psi0 = random_vertical_diffeo(rng, scene.total, scene.base.dim,
                                      scene.grid, 0.08, interp=scene.interp)
        plain = chart_decompose(scene.proj, phi)
        moved = chart_decompose(scene.proj, compose(phi, psi0))
        worst = max(
            worst,
            sup_distance(moved.slice_factor, plain.slice_factor),
            sup_distance(moved.vertical_factor,
                         compose(plain.vertical_factor, psi0)))
    return _result(scene, "chart.right_equivariance", worst, True)


def check_double_sided_inverse(scene: Scene) -> CheckResult:
    rng = scene.rng(12)
    worst = 0.0
    for _ in range(5):
        phi = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
        dec = chart_decompose(scene.proj, phi)
        back = chart_assemble(dec.slice_factor, dec.vertical_factor,
                              scene.proj)
        worst = max(worst, sup_distance(back, phi))
        again = chart_decompose(scene.proj, back)
        worst = max(worst,
                    sup_distance(again.slice_factor, dec.slice_factor),
                    sup_distance(again.vertical_factor, dec.vertical_factor))
    return _result(scene, "chart.double_sided_inverse", worst, True)


def check_domain_invariance(scene: Scene) -> CheckResult:
    rng = scene.rng(13)
    violations = 0
    for _ in range(20):
        phi = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
        psi0 = random_vertical_diffeo(rng, scene.total, scene.base.dim,
                                      scene.grid, 0.1, interp=scene.interp)
        before = in_tube_domain(scene.proj, phi)
        after = in_tube_domain(scene.proj, compose(phi, psi0))
        if before and not after:
            violations += 1
    return _result(scene, "chart.domain_invariance", violations / 20.0)


def check_certificate_invariance(scene: Scene) -> CheckResult:
    rng = scene.rng(14)
    violations = 0
    for _ in range(20):
        phi = random_diffeo(rng, scene.total, scene.grid, 0.15, interp=scene.interp)
        psi0 = random_vertical_diffeo(rng, scene.total, scene.base.dim,
                                      scene.grid, 0.1, interp=scene.interp)
        plain = chart_decompose(scene.proj, phi)
        margin = diffeo_certificate(plain.vertical_factor).margin
        moved = chart_decompose(scene.proj, compose(phi, psi0))
        margin_moved = diffeo_certificate(moved.vertical_factor).margin
        if margin > 0.0 and margin_moved <= 0.0:
            violations += 1
    return _result(scene, "chart.certificate_invariance", violations / 20.0)


# -- orbit -----------------------------------------------------------------


def check_coset_round_trip(scene: Scene) -> CheckResult:
    rng = scene.rng(15)
    worst = 0.0
    for _ in range(20):
        phi = random_diffeo(rng, scene.total, scene.grid, 0.08, interp=scene.interp)
        pi = push_fibration(scene.pi0, phi)
        f = factorize(scene.pi0, pi).f
        worst = max(worst, coset_equal(f, phi, scene.pi0).residual)
    return _result(scene, "orbit.coset_round_trip", worst, True)


def check_factorization_round_trip(scene: Scene) -> CheckResult:
    rng = scene.rng(16)
    worst = 0.0
    for _ in range(5):
        pi = random_fibration(rng, scene.total, scene.base.dim, scene.grid,
                              0.15, interp=scene.interp)
        f = factorize(scene.pi0, pi).f
        worst = max(worst, sup_distance(compose(pi, f), scene.pi0),
                    sup_distance(push_fibration(scene.pi0, f), pi))
    return _result(scene, "orbit.factorization_round_trip", worst, True)


def check_section_form(scene: Scene) -> CheckResult:
    rng = scene.rng(17)
    pi = random_fibration(rng, scene.total, scene.base.dim, scene.grid,
                          0.15, interp=scene.interp)
    f = factorize(scene.pi0, pi).f
    section = graph_section(pi)
    pts = random_points(rng, scene.total, 100)
    vals = np.asarray(section.eval_many(np.asarray(f.eval_many(pts))))
    recorded = vals[:, scene.total.dim:]
    gap = minimal_difference(recorded, pts[:, :scene.base.dim],
                             scene.base.periods_array)
    return _result(scene, "orbit.section_form", float(np.abs(gap).max()),
                   True)


# -- baseaction ------------------------------------------------------------


def check_left_equivariance(scene: Scene) -> CheckResult:
    rng = scene.rng(18)
    section = global_section(scene.pi0)
    worst = 0.0
    for _ in range(10):
        pi = random_fibration(rng, scene.total, scene.base.dim, scene.grid,
                              0.12, interp=scene.interp)
        g = random_base_diffeo(rng, scene.base, scene.grid[:scene.base.dim],
                               0.15, interp=scene.interp)
        phi_b, pi_s = trivialize(pi, section)
        phi_b2, pi_s2 = trivialize(compose(g, pi), section)
        worst = max(worst, sup_distance(phi_b2, compose(g, phi_b)),
                    sup_distance(pi_s2, pi_s))
    return _result(scene, "baseaction.left_equivariance", worst, True)


def check_splitting(scene: Scene) -> list:
    rng = scene.rng(19)
    section = global_section(scene.pi0)
    value_shape = scene.base
    vanish = energy = recon = 0.0
    for _ in range(50):
        s = random_section_field(rng, scene.total, value_shape, scene.grid,
                                 1.0, interp=scene.interp)
        parts = split_section(s, section, scene.pi0)
        on_sigma = section_pullback(parts.vanishing, section)
        vanish = max(vanish,
                     float(np.abs(np.asarray(on_sigma.displacement)).max()))
        energy = max(energy, fiber_spectral_energy(parts.lifted,
                                                   scene.base.dim))
        gap = (np.asarray(parts.vanishing.displacement)
               + np.asarray(parts.lifted.displacement)
               - np.asarray(s.displacement))
        recon = max(recon, float(np.abs(gap).max()))
    return [
        _result(scene, "baseaction.split_vanishing", vanish),
        _result(scene, "baseaction.split_fiber_energy", energy),
        _result(scene, "baseaction.split_reconstruction", recon),
    ]


def check_w_openness(scene: Scene) -> CheckResult:
    rng = scene.rng(20)
    section = global_section(scene.pi0)
    failures = 0
    for _ in range(10):
        pi = random_fibration(rng, scene.total, scene.base.dim, scene.grid,
                              0.12, interp=scene.interp)
        margin = diffeo_certificate(compose(pi, section.sigma)).margin
        bump = band_limited_field(rng, scene.total, scene.grid,
                                  scene.base.dim, 1.0)
        # any perturbation below half the certificate margin must stay in W
        eta = 0.45 * min(margin, 0.25)
        perturbed = pi.with_displacement(
            np.asarray(pi.displacement) + eta * bump)
        try:
            trivialize(perturbed, section)
        except FibrationError:
            failures += 1
    return _result(scene, "baseaction.w_openness", failures / 10.0)


# -- transport -------------------------------------------------------------


def _default_loop(scene: Scene) -> AnalyticPath:
    field = np.zeros(scene.grid + (scene.base.dim,))
    field[..., 0] = 0.1 * np.sin(grid_nodes(scene.total, scene.grid)[..., -1])
    return AnalyticPath(scene.pi0, (sin_term(field, 1),), checkpoints=9)


def check_transport_drift(scene: Scene) -> list:
    path = _default_loop(scene)
    result = transport_path(path, step=scene.config.step, drift_tol=np.inf)
    drift = max(result.drifts)
    # the same bound read fiber by fiber through the final map
    nodes = np.asarray(scene.pi0.node_points)
    k = scene.base.dim
    final_pts = np.asarray(result.final.eval_many(nodes))
    fiber_gap = minimal_difference(
        np.asarray(path.at(1.0).eval_many(final_pts)), nodes[:, :k],
        scene.base.periods_array)
    return [
        _result(scene, "transport.drift", drift),
        _result(scene, "transport.fiber_diffeo",
                float(np.abs(fiber_gap).max())),
    ]


def check_connection_linearity(scene: Scene) -> CheckResult:
    rng = scene.rng(21)
    field = band_limited_field(rng, scene.total, scene.grid,
                               scene.base.dim, 0.15)
    c = 2.5
    one = AnalyticPath(scene.pi0, (poly_term(field, 0.0, 1.0),))
    fast = AnalyticPath(scene.pi0, (poly_term(field, 0.0, c),))
    pts = random_points(rng, scene.total, 50)
    w1 = horizontal_velocity(one, 0.0, pts)
    wc = horizontal_velocity(fast, 0.0, pts)
    scale = max(float(np.abs(w1).max()), 1e-30)
    return _result(scene, "transport.connection_linearity",
                   float(np.abs(wc - c * w1).max()) / (c * scale))


ALL_CHECKS = (
    check_compose_associativity,
    check_inversion_round_trip,
    check_chain_rule,
    check_spectral_accuracy,
    check_jacobian_fd,
    check_fiber_membership,
    check_idempotence_flat,
    check_idempotence_conformal,
    check_vertical_invariance,
    check_tube_invariance,
    check_right_equivariance,
    check_double_sided_inverse,
    check_domain_invariance,
    check_certificate_invariance,
    check_coset_round_trip,
    check_factorization_round_trip,
    check_section_form,
    check_left_equivariance,
    check_splitting,
    check_w_openness,
    check_transport_drift,
    check_connection_linearity,
)


def run_verify(config: RunConfig) -> list:
    scene = build_scene(config)
    results = []
    for check in ALL_CHECKS:
        out = check(scene)
        results.extend(out if isinstance(out, list) else [out])
    return results
