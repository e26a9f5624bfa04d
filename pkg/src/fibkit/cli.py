"""Command line front end: the only module with side effects.

Every subcommand reads its inputs, runs the wrapped library operation,
writes any map artifacts plus a JSON report into the output directory,
and echoes the per-check results.  Exit codes: 0 all checks pass,
1 at least one recorded check failed, 2 usage or configuration error,
3 the underlying numerics refused (fold, escape from the tube, drift
blowup).

Identical configuration and seed produce byte-identical artifacts and
reports; wall time appears on the console only, never in a file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .baseaction import (assemble_base, fiber_spectral_energy, global_section,
                         section_pullback, slice_defect, split_section,
                         trivialize)
from .chart import (chart_assemble, chart_decompose, slice_residual,
                    verticality_residual)
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .convergence import DEFAULT_GRIDS, format_table, run_study
from .errors import FibrationError
from .gmapio import read_gmap, write_gmap
from .gridmap import compose, coordinate_projection, sup_distance
from .orbit import connect_chain, factorize
from .report import CheckResult, build_report, echo_report, write_report
from .transport import (AnalyticPath, SampledPath, cos_term, poly_term,
                        sin_term, transport_path)
from .tubular import TubularProjection, conformal_metric, flat_metric
from .verify import run_verify


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fibkit",
        description="certified numerics for fibrations of flat tori")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON run configuration")
    common.add_argument("--seed", type=int, help="seed for randomized suites")
    common.add_argument("--grid", help="comma-separated nodes per axis")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", action="append", default=[],
                        metavar="KEY=VAL", help="tolerance override")

    sub.add_parser("verify", parents=[common],
                   help="run every module invariant suite")
    sub.add_parser("convergence", parents=[common],
                   help="error-vs-grid study (--grid lists study grids)")
    for name, help_text, arg in (
            ("decompose", "split a diffeomorphism into slice and vertical "
             "factors", "diffeo"),
            ("factorize", "factor a fibration through the reference "
             "projection", "fibration"),
            ("connect", "chain factorizations along a path manifest",
             "manifest"),
            ("trivialize", "split a fibration into base diffeomorphism and "
             "slice member", "fibration"),
            ("split", "split a section field into vanishing and lifted "
             "parts", "field"),
            ("transport", "integrate the horizontal flow of a path manifest",
             "manifest")):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument(arg, help=f"input {arg} file")
    return parser


def _parse_grid(text):
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad grid list {text!r}") from exc


def _parse_tol(items) -> dict:
    out = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"tolerance override {item!r} is not KEY=VAL")
        try:
            out[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad tolerance value in {item!r}") from exc
    return out


def _resolve_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    grid = None
    if args.grid is not None and args.command != "convergence":
        grid = _parse_grid(args.grid)
    return apply_overrides(config, seed=args.seed, grid=grid,
                           out_dir=args.out, tol=_parse_tol(args.tol))


def _reference_of(gmap):
    """The zero-displacement projection sharing a map's discretization."""
    return coordinate_projection(gmap.src, gmap.dst.dim, gmap.grid,
                                 gmap.interp)


def _tube_for(total_map, config: RunConfig) -> TubularProjection:
    pi0 = coordinate_projection(total_map.src, config.base_dim,
                                total_map.grid, total_map.interp)
    if config.metric == "conformal":
        metric = conformal_metric(read_gmap(config.conformal_factor))
    else:
        metric = flat_metric()
    return TubularProjection(pi0, config.delta, metric)


def _emit(config: RunConfig, name: str, gmap) -> str:
    path = os.path.join(config.out_dir, name)
    os.makedirs(config.out_dir, exist_ok=True)
    write_gmap(gmap, path)
    return name


# -- path manifests --------------------------------------------------------


def _load_path(manifest_path: str):
    """Build a fibration path from a JSON manifest.

    Analytic form: {"kind": "analytic", "template": <gmap>, "checkpoints":
    N, "terms": [{"kind": "poly", "field": <gmap>, "coefficients": [...]}
    or {"kind": "sin"|"cos", "field": <gmap>, "cycles": N}, ...]}.

    Sampled form: {"kind": "sampled", "times": [...], "snapshots":
    [<gmap>, ...]}.  File references resolve against the manifest's
    directory.
    """
    with open(manifest_path, "r", encoding="ascii") as stream:
        manifest = json.load(stream)
    root = os.path.dirname(os.path.abspath(manifest_path))

    def resolve(name):
        return read_gmap(os.path.join(root, name))

    kind = manifest.get("kind")
    if kind == "analytic":
        template = resolve(manifest["template"])
        terms = []
        for entry in manifest["terms"]:
            field = np.asarray(resolve(entry["field"]).displacement)
            if entry["kind"] == "poly":
                terms.append(poly_term(field, *entry["coefficients"]))
            elif entry["kind"] == "sin":
                terms.append(sin_term(field, int(entry["cycles"])))
            elif entry["kind"] == "cos":
                terms.append(cos_term(field, int(entry["cycles"])))
            else:
                raise ConfigError(f"unknown term kind {entry['kind']!r}")
        return AnalyticPath(template, tuple(terms),
                            checkpoints=int(manifest.get("checkpoints", 9)))
    if kind == "sampled":
        snapshots = [resolve(name) for name in manifest["snapshots"]]
        stack = np.stack([np.asarray(s.displacement) for s in snapshots])
        return SampledPath(tuple(float(t) for t in manifest["times"]),
                           stack, _reference_of(snapshots[0]))
    raise ConfigError(f"manifest kind must be analytic or sampled, "
                      f"got {kind!r}")


# -- subcommands -----------------------------------------------------------


def cmd_verify(args, config):
    checks = run_verify(config)
    return checks, {}, {}, {}


def cmd_convergence(args, config):
    grids = _parse_grid(args.grid) if args.grid else DEFAULT_GRIDS
    if len(grids) < 3:
        raise ConfigError("convergence study needs at least three grids")
    try:
        study = run_study(config, grids)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for table in study.tables:
        print(format_table(table))
        print()
    return study.checks, {}, {}, {"study": study.to_dict()}


def cmd_decompose(args, config):
    phi = read_gmap(args.diffeo)
    proj = _tube_for(phi, config)
    dec = chart_decompose(proj, phi)
    back = chart_assemble(dec.slice_factor, dec.vertical_factor, proj)
    checks = [
        CheckResult.measure(
            "decompose.residual",
            max(slice_residual(proj, dec.slice_factor),
                verticality_residual(proj.pi0, dec.vertical_factor).residual),
            config.tolerance("decompose.residual")),
        CheckResult.measure("decompose.round_trip", sup_distance(back, phi),
                            config.tolerance("decompose.round_trip")),
    ]
    outputs = {
        "slice": _emit(config, "slice.gmap", dec.slice_factor),
        "vertical": _emit(config, "vertical.gmap", dec.vertical_factor),
    }
    return checks, {"diffeo": os.path.basename(args.diffeo)}, outputs, {}


def cmd_factorize(args, config):
    pi = read_gmap(args.fibration)
    pi0 = _reference_of(pi)
    result = factorize(pi0, pi, radius=config.delta)
    checks = [CheckResult.measure("factorize.residual", result.residual,
                                  config.tolerance("factorize.residual"))]
    outputs = {"factor": _emit(config, "factor.gmap", result.f)}
    return checks, {"fibration": os.path.basename(args.fibration)}, outputs, {}


def cmd_connect(args, config):
    path = _load_path(args.manifest)
    pi0 = _reference_of(path.template)
    f = connect_chain(pi0, path, radius=config.delta)
    residual = sup_distance(compose(path.at(1.0), f), pi0)
    checks = [CheckResult.measure("connect.residual", residual,
                                  config.tolerance("connect.residual"))]
    outputs = {"chain": _emit(config, "connect.gmap", f)}
    return checks, {"manifest": os.path.basename(args.manifest)}, outputs, {}


def cmd_trivialize(args, config):
    pi = read_gmap(args.fibration)
    section = global_section(_reference_of(pi))
    phi_b, pi_s = trivialize(pi, section)
    back = assemble_base(phi_b, pi_s, section,
                         tol=config.tolerance("trivialize.slice_defect"))
    checks = [
        CheckResult.measure("trivialize.slice_defect",
                            slice_defect(pi_s, section),
                            config.tolerance("trivialize.slice_defect")),
        CheckResult.measure("trivialize.round_trip", sup_distance(back, pi),
                            config.tolerance("trivialize.round_trip")),
    ]
    outputs = {
        "base_factor": _emit(config, "base_factor.gmap", phi_b),
        "slice_fibration": _emit(config, "slice_fibration.gmap", pi_s),
    }
    return checks, {"fibration": os.path.basename(args.fibration)}, outputs, {}


def cmd_split(args, config):
    s = read_gmap(args.field)
    pi0 = coordinate_projection(s.src, s.dst.dim, s.grid, s.interp)
    section = global_section(pi0)
    parts = split_section(s, section, pi0)
    on_sigma = section_pullback(parts.vanishing, section)
    recon = (np.asarray(parts.vanishing.displacement)
             + np.asarray(parts.lifted.displacement)
             - np.asarray(s.displacement))
    checks = [
        CheckResult.measure(
            "split.vanishing",
            float(np.abs(np.asarray(on_sigma.displacement)).max()),
            config.tolerance("split.vanishing")),
        CheckResult.measure(
            "split.fiber_energy",
            fiber_spectral_energy(parts.lifted, pi0.dst.dim),
            config.tolerance("split.fiber_energy")),
        CheckResult.measure("split.reconstruction",
                            float(np.abs(recon).max()),
                            config.tolerance("split.reconstruction")),
    ]
    outputs = {
        "vanishing": _emit(config, "vanishing.gmap", parts.vanishing),
        "lifted": _emit(config, "lifted.gmap", parts.lifted),
    }
    return checks, {"field": os.path.basename(args.field)}, outputs, {}


def cmd_transport(args, config):
    path = _load_path(args.manifest)
    result = transport_path(path, step=config.step, drift_tol=np.inf)
    checks = [CheckResult.measure("transport.drift", max(result.drifts),
                                  config.tolerance("transport.drift"))]
    outputs = {}
    for i, gmap in enumerate(result.maps):
        outputs[f"checkpoint_{i:02d}"] = _emit(
            config, f"checkpoint_{i:02d}.gmap", gmap)
    extra = {"drift_log": {"times": [float(t) for t in result.times],
                           "drifts": [float(d) for d in result.drifts]},
             "final_margin": float(result.certificate.margin)}
    return checks, {"manifest": os.path.basename(args.manifest)}, outputs, extra


COMMANDS = {
    "verify": cmd_verify,
    "convergence": cmd_convergence,
    "decompose": cmd_decompose,
    "factorize": cmd_factorize,
    "connect": cmd_connect,
    "trivialize": cmd_trivialize,
    "split": cmd_split,
    "transport": cmd_transport,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        config = _resolve_config(args)
        checks, inputs, outputs, extra = COMMANDS[args.command](args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"input error: {exc!r}", file=sys.stderr)
        return 2
    except FibrationError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 3
    doc = build_report(args.command, config, checks, inputs=inputs,
                       outputs=outputs, extra=extra)
    write_report(doc, os.path.join(config.out_dir,
                                   f"{args.command}_report.json"))
    echo_report(doc, time.perf_counter() - start)
    return 0 if all(c.passed for c in checks) else 1


if __name__ == "__main__":
    sys.exit(main())
