"""Acceptance gate: every advertised guarantee at its stated tolerance.

One test per criterion on the default scene (two-torus over a circle,
periods 2 pi, 64 nodes per axis, trig interpolation, tube radius pi/4,
seed 42).  Each test prints an itemized sub-check report; the pytest
line for the test is the criterion's pass/fail verdict.

The bitwise reconstruction sub-check of the splitting suite is asserted
literally.  One float64 subtraction sits between a section and its
vanishing part, so recombination can land one ulp off the original
samples; the sub-check is expected to sit at that floor rather than at
zero, and it is reported honestly instead of being loosened.
"""

import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from fibkit.baseaction import (assemble_base, fiber_spectral_energy,
                               global_section, section_pullback,
                               split_section, trivialize)
from fibkit.chart import (chart_assemble, chart_decompose, slice_residual,
                          verticality_residual)
from fibkit.cli import main
from fibkit.convergence import chart_round_trip_residual
from fibkit.gmapio import read_gmap, write_gmap
from fibkit.gridmap import (compose, coordinate_projection, identity_map,
                            sup_distance, vector_valued_map)
from fibkit.orbit import (coset_equal, factorize, graph_section,
                          push_fibration, section_exchange, swap_projection)
from fibkit.sampling import (band_limited_field, random_base_diffeo,
                             random_diffeo, random_fibration, random_points,
                             random_section_field, random_vertical_diffeo)
from fibkit.torus import (TorusShape, grid_nodes, minimal_difference,
                          square_torus, torus_distance, wrap)
from fibkit.transport import (AnalyticPath, loop_submersion_check, poly_term,
                              sin_term, transport_path)
from fibkit.tubular import (TubularProjection, conformal_metric, flat_metric,
                            in_tube, project_point, riemann_project)

TWO_PI = 2.0 * np.pi
GRID = (64, 64)
DELTA = np.pi / 4.0
SEED = 42

T2 = square_torus(2)
T1 = square_torus(1)
PI0 = coordinate_projection(T2, 1, GRID)
PROJ = TubularProjection(PI0, DELTA, flat_metric())
NODES = grid_nodes(T2, GRID)


def rng_for(slot: int) -> np.random.Generator:
    return np.random.default_rng([SEED, slot])


def shear_fibration(amplitude: float = 0.2):
    return PI0.with_displacement(
        (amplitude * np.sin(NODES[..., 1]))[..., None])


class Suite:
    """Collects sub-check lines; the assert carries the itemization."""

    def __init__(self, title: str):
        self.title = title
        self.lines = []
        self.ok = True

    def check(self, name: str, residual: float, bound: float,
              strict: bool = False) -> None:
        passed = residual < bound if strict else residual <= bound
        self.ok = self.ok and passed
        word = "PASS" if passed else "FAIL"
        op = "<" if strict else "<="
        self.lines.append(
            f"  [{word}] {name}: {residual:.3e} ({op} {bound:.1e})")

    def finish(self) -> None:
        verdict = "PASS" if self.ok else "FAIL"
        body = "\n".join(self.lines)
        print(f"[{verdict}] {self.title}\n{body}")
        assert self.ok, f"{self.title}\n{body}"


def test_criterion_1_chart_factors():
    suite = Suite("chart suite: factor, certify, reassemble")
    rng = rng_for(10)
    vert = slice_ = round_trip = 0.0
    samples = []
    for _ in range(50):
        phi = random_diffeo(rng, T2, GRID, 0.2)
        dec = chart_decompose(PROJ, phi)
        samples.append(phi)
        vert = max(vert,
                   verticality_residual(PI0, dec.vertical_factor).residual)
        slice_ = max(slice_, slice_residual(PROJ, dec.slice_factor))
        back = chart_assemble(dec.slice_factor, dec.vertical_factor, PROJ)
        round_trip = max(round_trip, sup_distance(back, phi))
    suite.check("vertical factor commutes with the projection", vert, 1e-9)
    suite.check("slice factor projects to the identity", slice_, 1e-9)
    suite.check("reassembly returns the input", round_trip, 1e-8)

    equiv = 0.0
    for i in range(20):
        phi = samples[i]
        psi0 = random_vertical_diffeo(rng, T2, 1, GRID, 0.1)
        plain = chart_decompose(PROJ, phi)
        moved = chart_decompose(PROJ, compose(phi, psi0))
        equiv = max(equiv,
                    sup_distance(moved.slice_factor, plain.slice_factor),
                    sup_distance(moved.vertical_factor,
                                 compose(plain.vertical_factor, psi0)))
    suite.check("right action moves only the vertical factor", equiv, 1e-8)
    suite.finish()


def test_criterion_2_tube_projections():
    suite = Suite("tube suite: projection onto fibers, two metrics")
    rng = rng_for(20)

    def tube_pair(generator):
        x = wrap(generator.uniform(0.0, TWO_PI, 2), T2)
        y = wrap(x.coords_array
                 + generator.uniform(-0.7, 0.7, 2), T2)
        return x, y

    idem = 0.0
    membership_flips = 0
    invariance = 0.0
    for _ in range(20):
        psi = random_vertical_diffeo(rng, T2, 1, GRID, 0.1)
        for _ in range(50):
            x, y = tube_pair(rng)
            once = project_point(PROJ, x, y)
            twice = project_point(PROJ, x, once)
            idem = max(idem, torus_distance(once, twice))
            moved = wrap(np.asarray(psi.eval_many(x.coords_array[None]))[0],
                         T2)
            if in_tube(PROJ, x, y) != in_tube(PROJ, moved, y):
                membership_flips += 1
            invariance = max(
                invariance,
                torus_distance(once, project_point(PROJ, moved, y)))
    suite.check("flat projection idempotent", idem, 0.0)
    suite.check("tube membership survives vertical moves",
                float(membership_flips), 0.0)
    suite.check("projection unchanged when the anchor moves on its fiber",
                invariance, 1e-10)

    wavy = vector_valued_map(T2, T1, (0.3 * np.sin(NODES[..., 1]))[..., None])
    conf = TubularProjection(PI0, DELTA, conformal_metric(wavy))
    conf_idem = 0.0
    for _ in range(10):
        x, y = tube_pair(rng)
        once = riemann_project(conf, x, y)
        conf_idem = max(conf_idem,
                        torus_distance(once, riemann_project(conf, x, once)))
    suite.check("weighted projection idempotent", conf_idem, 1e-8)

    zero = vector_valued_map(T2, T1, np.zeros(GRID + (1,)))
    degenerate = TubularProjection(PI0, DELTA, conformal_metric(zero))
    reduction = 0.0
    for _ in range(10):
        x, y = tube_pair(rng)
        reduction = max(reduction,
                        torus_distance(riemann_project(degenerate, x, y),
                                       project_point(PROJ, x, y)))
    suite.check("constant weight reduces to the flat projection",
                reduction, 1e-8)

    scan_gap = 0.0
    dfib = np.linspace(-np.pi, np.pi, 100_000, endpoint=False)
    quad_t = np.linspace(0.0, 1.0, 513)
    for _ in range(10):
        x, y = tube_pair(rng)
        p = riemann_project(conf, x, y)
        dbase = minimal_difference(x.coords[0], y.coords[0], TWO_PI)
        speeds = np.sqrt(dbase * dbase + dfib * dfib)
        x2 = y.coords[1] + quad_t[None, :] * dfib[:, None]
        lengths = speeds * trapezoid(np.exp(0.3 * np.sin(x2)), quad_t, axis=1)
        best = y.coords[1] + dfib[np.argmin(lengths)]
        scan_gap = max(scan_gap,
                       torus_distance(p, wrap([x.coords[0], best], T2)))
    suite.check("weighted projection matches the dense fiber scan",
                scan_gap, 1e-4)
    suite.finish()


def test_criterion_3_factorization():
    suite = Suite("factorization suite: pull fibrations back to the reference")
    rng = rng_for(30)
    through = pushed = 0.0
    for _ in range(20):
        pi = random_fibration(rng, T2, 1, GRID, 0.15)
        f = factorize(PI0, pi).f
        through = max(through, sup_distance(compose(pi, f), PI0))
        pushed = max(pushed, sup_distance(push_fibration(PI0, f), pi))
    suite.check("factor carries the fibration onto the reference",
                through, 1e-8)
    suite.check("pushing the factor forward recovers the fibration",
                pushed, 1e-8)

    coset = 0.0
    for _ in range(20):
        phi = random_diffeo(rng, T2, GRID, 0.08)
        pi = push_fibration(PI0, phi)
        coset = max(coset, coset_equal(factorize(PI0, pi).f, phi,
                                       PI0).residual)
    suite.check("factor of a pushed map stays in the original's coset",
                coset, 1e-8)

    f = factorize(PI0, shear_fibration()).f
    want = np.stack([-0.2 * np.sin(NODES[..., 1]), np.zeros(GRID)], axis=-1)
    suite.check("shear factor matches its closed form",
                float(np.abs(np.asarray(f.displacement) - want).max()), 1e-9)
    suite.finish()


def test_criterion_4_section_exchange():
    suite = Suite("exchange suite: sections traded between projections")
    rng = rng_for(40)
    p2 = swap_projection(T2, 1)
    ident = identity_map(T2, GRID)

    split_gap = 0.0
    for _ in range(10):
        pi = random_fibration(rng, T2, 1, GRID, 0.15)
        beta = section_exchange(graph_section(pi), p2)
        split_gap = max(split_gap, sup_distance(compose(p2, beta), ident))
    beta = section_exchange(graph_section(shear_fibration()), p2)
    split_gap = max(split_gap, sup_distance(compose(p2, beta), ident))
    suite.check("exchanged section splits the target projection",
                split_gap, 1e-9)

    fixed_gap = 0.0
    alpha0 = graph_section(PI0)
    for _ in range(5):
        free = band_limited_field(rng, T2, GRID, 1, 0.2)
        disp = np.asarray(alpha0.displacement).copy()
        disp[..., :1] = free
        alpha = alpha0.with_displacement(disp)
        fixed_gap = max(fixed_gap,
                        sup_distance(section_exchange(alpha, p2), alpha))
    fixed_gap = max(fixed_gap,
                    sup_distance(section_exchange(alpha0, p2), alpha0))
    suite.check("sections of the target pass through unchanged",
                fixed_gap, 1e-10)
    suite.finish()


def test_criterion_5_trivialization_splitting():
    suite = Suite("trivialization suite: base factor, slice member, splitting")
    rng = rng_for(50)
    section = global_section(PI0)

    round_trip = 0.0
    for _ in range(20):
        pi = random_fibration(rng, T2, 1, GRID, 0.12)
        phi_b, pi_s = trivialize(pi, section)
        round_trip = max(round_trip,
                         sup_distance(assemble_base(phi_b, pi_s, section),
                                      pi))
    suite.check("base factor and slice member reassemble the fibration",
                round_trip, 1e-8)

    equiv = 0.0
    for _ in range(20):
        pi = random_fibration(rng, T2, 1, GRID, 0.12)
        g = random_base_diffeo(rng, T1, GRID[:1], 0.15)
        phi_b, pi_s = trivialize(pi, section)
        phi_b2, pi_s2 = trivialize(compose(g, pi), section)
        equiv = max(equiv, sup_distance(phi_b2, compose(g, phi_b)),
                    sup_distance(pi_s2, pi_s))
    suite.check("base maps act on the base factor alone", equiv, 1e-8)

    vanish = energy = recon = 0.0
    for _ in range(50):
        s = random_section_field(rng, T2, T1, GRID, 1.0)
        parts = split_section(s, section, PI0)
        on_image = section_pullback(parts.vanishing, section)
        vanish = max(vanish,
                     float(np.abs(np.asarray(on_image.displacement)).max()))
        energy = max(energy, fiber_spectral_energy(parts.lifted, 1))
        gap = (np.asarray(parts.vanishing.displacement)
               + np.asarray(parts.lifted.displacement)
               - np.asarray(s.displacement))
        recon = max(recon, float(np.abs(gap).max()))
    suite.check("vanishing part is zero along the section image",
                vanish, 1e-9)
    suite.check("lifted part carries no fiber frequencies", energy, 1e-12)
    suite.check("parts recombine to the section bitwise", recon, 0.0)
    suite.finish()


def test_criterion_6_transport_loop():
    suite = Suite("transport suite: loop certificate, drift, order, coset")
    loop_field = (0.1 * np.sin(NODES[..., 1]))[..., None]
    loop = AnalyticPath(PI0, (sin_term(loop_field, 1),), checkpoints=9)
    margin = loop_submersion_check(loop).margin
    suite.check("loop family margin stays positive", -margin, 0.0,
                strict=True)

    step = 1.0 / 256.0
    loop_run = transport_path(loop, step=step, drift_tol=np.inf)
    suite.check("checkpoint drift at the production step",
                max(loop_run.drifts), 1e-6)

    shear_field = (0.2 * np.sin(NODES[..., 1]))[..., None]
    shear_path = AnalyticPath(PI0, (poly_term(shear_field, 0.0, 1.0),),
                              checkpoints=5)
    reference = transport_path(shear_path, step=step, drift_tol=np.inf)

    def end_error(h):
        run = transport_path(shear_path, step=h, drift_tol=np.inf)
        gap = minimal_difference(np.asarray(run.final.displacement),
                                 np.asarray(reference.final.displacement),
                                 T2.periods_array)
        return float(np.abs(gap).max())

    ratio = end_error(1.0 / 8.0) / end_error(1.0 / 16.0)
    suite.check("halving the step divides the error by sixteen",
                abs(ratio - 16.0), 16.0 * 0.3)

    f = factorize(PI0, shear_fibration()).f
    suite.check("transported end map shares the factor's coset",
                coset_equal(reference.final, f, PI0).residual, 1e-6)
    suite.finish()


def test_criterion_7_convergence_determinism_format(tmp_path):
    suite = Suite("cross-cutting: spectral decay, determinism, file format")
    residuals = [chart_round_trip_residual(n, "trig", DELTA,
                                           random_points(rng_for(70), T2,
                                                         400))
                 for n in (16, 32, 64)]
    decay_ok = all(nxt < prev and nxt <= 0.25 * prev
                   for prev, nxt in zip(residuals, residuals[1:]))
    suite.check("chart round-trip error collapses grid over grid",
                0.0 if decay_ok else 1.0, 0.0)

    twist = identity_map(T2, GRID).with_displacement(
        np.stack([0.2 * np.sin(NODES[..., 1]),
                  0.15 * np.sin(NODES[..., 0])], axis=-1))
    write_gmap(twist, str(tmp_path / "twist.gmap"))
    blobs = []
    for _ in range(2):
        assert main(["decompose", str(tmp_path / "twist.gmap"),
                     "--out", str(tmp_path / "det")]) == 0
        blobs.append(tuple((tmp_path / "det" / name).read_bytes()
                           for name in ("slice.gmap", "vertical.gmap",
                                        "decompose_report.json")))
    suite.check("rerun artifacts byte-identical",
                0.0 if blobs[0] == blobs[1] else 1.0, 0.0)

    reports = []
    for _ in range(2):
        assert main(["verify", "--grid", "16",
                     "--out", str(tmp_path / "v16")]) == 1
        reports.append((tmp_path / "v16" / "verify_report.json").read_bytes())
    suite.check("rerun reports byte-identical",
                0.0 if reports[0] == reports[1] else 1.0, 0.0)

    rng = rng_for(71)
    exact = 0
    cases = [random_diffeo(rng, T2, GRID, 0.2),
             random_diffeo(rng, T2, (32, 32), 0.2, interp="cubic"),
             shear_fibration(),
             vector_valued_map(T2, T1,
                               band_limited_field(rng, T2, GRID, 1, 0.5))]
    for i, gmap in enumerate(cases):
        path = str(tmp_path / f"case_{i}.gmap")
        write_gmap(gmap, path)
        back = read_gmap(path)
        same = (np.asarray(back.displacement).tobytes()
                == np.asarray(gmap.displacement).tobytes()
                and back.src == gmap.src and back.dst == gmap.dst
                and back.grid == gmap.grid and back.interp == gmap.interp
                and back.reference == gmap.reference)
        exact += same
    suite.check("write-read round trip bit-exact",
                float(len(cases) - exact), 0.0)
    suite.finish()
