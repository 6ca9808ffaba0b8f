"""Command-line entry point: ``swsynth {bound,construct,audit,lift}``.

Exit codes: 0 on success (measured-claim deviations are only recorded),
1 when a property that is proved unconditionally is violated, 2 on bad
input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bernoulli import CSV_COLUMNS as GAP_COLUMNS
from .bernoulli import bernoulli_minus_gap, bernoulli_plus_gap, sweep_gap
from .combinatorics import lattice_ball_count, lattice_l1_count, robbins_binomial_check
from .cube import Box, HyperCube, check_membership_inequalities, eval_g, inside_samples, make_spec, outside_samples
from .expnet import dumps_network, load_network
from .global_approx import (
    build_grid,
    case_partition_check,
    expand_global,
    log10_full_expansion_units,
    measure_sup_error,
    mid_value_spread,
    slices_nested,
    theorem_bound,
    uncovered_points,
)
from .sigmoidal import KINDS, lift_to_two_layer
from .targets import CATALOG, load_csv_target, make_target

log = logging.getLogger("swsynth")

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2

# Flags that never enter a report: they do not change results.
_UNRECORDED = {"config", "output", "threads", "command", "audit_kind", "handler", "verbose"}


class InputError(Exception):
    pass


def _fmt(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        # JSON has no inf/nan; keep the report valid
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def dumps_report(obj: dict) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def dumps_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in columns})
    return buf.getvalue()


def construction_params(d=None, diam=None, delta=None, eps=None, omega=None) -> dict:
    return {"d": d, "diam": diam, "delta": delta, "eps": eps, "omega": omega}


def _resolved_config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _UNRECORDED}


def _envelope(args, command: str, params: dict, body: dict) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": _resolved_config(args),
        "construction_parameters": params,
        **body,
    }


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pairs(text: str) -> list[tuple[float, float]]:
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            vals = _floats(chunk)
            if len(vals) != 2:
                raise argparse.ArgumentTypeError(f"expected 'alpha,beta' pairs separated by ';', got {chunk!r}")
            out.append((vals[0], vals[1]))
    return out


def _domain(args, d: int) -> Box:
    lower = args.lower if args.lower is not None else [0.0] * d
    upper = args.upper if args.upper is not None else [1.0] * d
    if len(lower) != d or len(upper) != d:
        raise InputError(f"--lower/--upper need {d} values")
    return Box(tuple(lower), tuple(upper))


# ---- bound -----------------------------------------------------------------


def _bound_row(d, diam, delta, eps, force):
    tb = theorem_bound(d, diam, delta, eps, force=force)
    return {"d": d, "diam": diam, "delta": delta, "eps": eps, "C": tb.C, "lattice_factor_log10": tb.lattice_log10, "h_log10": tb.h_log10}


def cmd_bound(args) -> int:
    try:
        row = _bound_row(args.d, args.diam, args.delta, args.eps, args.force)
    except ValueError as exc:
        if args.d < 2 and not args.force:
            raise InputError("the bound is stated for input dimension d >= 2; pass --force to evaluate anyway") from exc
        raise InputError(str(exc)) from exc
    params = construction_params(args.d, args.diam, args.delta, args.eps)
    body = {k: row[k] for k in ("C", "lattice_factor_log10", "h_log10")}
    out = Path(args.output)
    if args.sweep_eps:
        rows = [_bound_row(args.d, args.diam, args.delta, e, args.force) for e in args.sweep_eps]
        _write(out, "bound_sweep.csv", dumps_csv(rows[0].keys(), rows))
        body["sweep_rows"] = len(rows)
    _write(out, "bound.json", dumps_report(_envelope(args, "bound", params, body)))
    print(dumps_report(body), end="")
    return EXIT_OK


# ---- construct -------------------------------------------------------------


def _parse_params(items) -> dict:
    params = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise InputError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            raise InputError(f"--param {key}: value {value!r} is not valid JSON") from None
    return params


def cmd_construct(args) -> int:
    if not 0 < args.eps_target < 1:
        raise InputError("--eps-target must lie in (0, 1)")
    if args.csv:
        try:
            f = load_csv_target(args.csv)
        except OSError as exc:
            raise InputError(f"cannot read {args.csv}: {exc.strerror}") from exc
    else:
        f = make_target(args.function, _domain(args, args.dim), **_parse_params(args.param))
    eps = args.eps_target / 2.0
    gc = build_grid(
        f,
        eps,
        subgrid=args.subgrid,
        r_override=args.r_override,
        cube_k_override=args.cube_k,
        cube_n_override=args.cube_n,
    )
    sup = measure_sup_error(gc, f, sample_density=args.sample_density)
    checks_pts = f.domain.halton(args.check_samples, seed=args.seed)
    partitions = [case_partition_check(gc, i, checks_pts) for i in range(1, gc.n_slices + 1)]
    uncovered = len(uncovered_points(gc, checks_pts))
    nested = slices_nested(gc)
    d = f.dim
    try:
        bound_log10 = theorem_bound(d, gc.diam, gc.delta, eps).h_log10
    except ValueError:
        bound_log10 = theorem_bound(d, gc.diam, gc.delta, eps, force=True).h_log10
        log.info("d = 1: bound evaluated outside its stated range")
    report = {
        "target": f.describe(),
        "eps_target": args.eps_target,
        "eps": eps,
        "delta": gc.delta,
        "r": gc.r,
        "num_cubes": gc.num_cubes,
        "n_slices": gc.n_slices,
        "slice_sizes": [int(m.sum()) for m in gc.slice_masks],
        "per_cube_eps": gc.per_cube_eps,
        "range_shift": gc.range_shift,
        "f_range": gc.f_range,
        "subgrid_per_axis": gc.subgrid,
        "cube_n": gc.template.n,
        "cube_k_log10": gc.template.log_k / math.log(10.0),
        "cube_k_floor_skipped": gc.template.floor_skipped,
        "degenerate_cubes": int(gc.degenerate.sum()),
        "flags": list(gc.flags),
        "sup_err": sup.sup_err,
        "witness": list(sup.witness),
        "sup_err_points": sup.n_points,
        "band_2eps": 2 * eps,
        "band_2eps_satisfied": sup.sup_err < 2 * eps,
        "eps_target_satisfied": sup.sup_err < args.eps_target,
        "bound_log10": bound_log10,
        "measured_units_log10": log10_full_expansion_units(gc),
        "checks": {
            "samples": len(checks_pts),
            "uncovered": uncovered,
            "nested": nested,
            "partition_double_classified": sum(p.double_classified for p in partitions),
            "partition_unclassified": sum(p.unclassified for p in partitions),
            "mid_value_spread": mid_value_spread(gc, checks_pts),
            "mid_value_spread_band": 0.75 * eps,
        },
    }
    out = Path(args.output)
    if args.expand:
        try:
            net = expand_global(gc)
        except ValueError as exc:
            report["expansion"] = {"written": False, "reason": str(exc)}
        else:
            _write(out, "construct_network.json", dumps_network(net))
            report["expansion"] = {"written": True, "units": net.m}
    params = construction_params(d, gc.diam, gc.delta, eps, 2.0)
    _write(out, "construct.json", dumps_report(_envelope(args, "construct", params, report)))
    print(dumps_report({k: report[k] for k in ("delta", "r", "num_cubes", "n_slices", "sup_err", "band_2eps_satisfied")}), end="")
    theorem_true_ok = uncovered == 0 and nested and all(p.ok for p in partitions)
    return EXIT_OK if theorem_true_ok else EXIT_VIOLATION


# ---- audit -----------------------------------------------------------------


def cmd_audit_bernoulli(args) -> int:
    reports = sweep_gap(args.eps_grid, args.alpha_beta_grid, args.samples, seed=args.seed)
    rows = [r.row() for r in reports]
    out = Path(args.output)
    _write(out, "audit_bernoulli.csv", dumps_csv(GAP_COLUMNS, rows))
    # Bernoulli's inequalities themselves are unconditional
    xs = np.linspace(0.0, 1.0, 101)
    ms = range(1, 65)
    minus_bad = sum(bernoulli_minus_gap(float(x), m) < -1e-12 for x in xs for m in ms)
    plus_bad = sum(bernoulli_plus_gap(float(x), m) < -1e-12 for x in np.linspace(-1.0, 1.0, 201) for m in ms)
    summary = {
        "rows": len(rows),
        "lower_claim_failures": sum(not r["lower_holds"] for r in rows),
        "upper_claim_failures": sum(not r["upper_holds"] for r in rows),
        "bernoulli_inequality_violations": minus_bad + plus_bad,
    }
    _write(out, "audit_bernoulli.json", dumps_report(_envelope(args, "audit bernoulli", construction_params(), summary)))
    print(dumps_report(summary), end="")
    return EXIT_VIOLATION if minus_bad + plus_bad else EXIT_OK


COMBINATORICS_COLUMNS = ("check", "a", "b", "c", "exact", "bound_log", "holds")


def cmd_audit_combinatorics(args) -> int:
    rows = []
    for n in range(2, args.robbins_n_max + 1):
        for k in range(1, n + 1):
            r = robbins_binomial_check(n, k)
            rows.append({"check": "robbins", "a": n, "b": k, "c": "", "exact": r.exact, "bound_log": r.bound.log_abs, "holds": r.holds})
    for k in range(1, args.l1_k_max + 1):
        for n in range(0, args.l1_n_max + 1):
            r = lattice_l1_count(n, k)
            rows.append({"check": "l1_count", "a": n, "b": k, "c": "", "exact": r.exact, "bound_log": r.bound.log_abs, "holds": r.holds})
    for d in range(1, args.ball_d_max + 1):
        for R in args.ball_R:
            for rho in args.ball_rho:
                if (2 * R / rho + 1) ** d > 10**5:
                    continue
                r = lattice_ball_count(d, R, rho)
                rows.append({"check": "lattice_ball", "a": d, "b": R, "c": rho, "exact": r.exact, "bound_log": r.bound.log_abs, "holds": r.holds})
    out = Path(args.output)
    _write(out, "audit_combinatorics.csv", dumps_csv(COMBINATORICS_COLUMNS, rows))
    failures = {}
    for r in rows:
        failures[r["check"]] = failures.get(r["check"], 0) + (not r["holds"])
    summary = {"rows": len(rows), "violations": failures}
    _write(out, "audit_combinatorics.json", dumps_report(_envelope(args, "audit combinatorics", construction_params(), summary)))
    print(dumps_report(summary), end="")
    return EXIT_VIOLATION if any(failures.values()) else EXIT_OK


CUBE_COLUMNS = (
    "spec", "d", "center", "r", "inside_violations", "outside_violations", "p_inside_violations",
    "p_outside_violations", "g_inside_min", "g_outside_max", "claim_inside_holds", "claim_outside_holds",
)


def _cube_row(j, d, cube, domain, args):
    spec = make_spec(cube, args.omega, args.eps, domain.diameter)
    ins = inside_samples(spec, args.samples, seed=args.seed + j)
    outs = outside_samples(spec, domain, args.samples, seed=args.seed + j)
    rep = check_membership_inequalities(spec, ins, outs)
    g_in = min(eval_g(spec, y) for y in ins[: args.g_probes])
    g_out = max((eval_g(spec, y) for y in outs[: args.g_probes]), default=0.0)
    return {
        "spec": j,
        "d": d,
        "center": " ".join(repr(float(c)) for c in cube.center),
        "r": cube.half_width,
        "inside_violations": len(rep.inside_violations),
        "outside_violations": len(rep.outside_violations),
        "p_inside_violations": len(rep.p_inside_violations),
        "p_outside_violations": len(rep.p_outside_violations),
        "g_inside_min": g_in,
        "g_outside_max": g_out,
        "claim_inside_holds": g_in > 1 - args.eps,
        "claim_outside_holds": g_out < args.eps,
    }


def cmd_audit_cube(args) -> int:
    d = args.d
    domain = Box.unit(d)
    rng = np.random.default_rng(args.seed)
    cubes = []
    for _ in range(args.specs):
        r = float(rng.uniform(0.05, 0.25))
        cubes.append(HyperCube(tuple(float(v) for v in rng.uniform(0.0, 1.0, d)), r))
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rows = list(pool.map(lambda jc: _cube_row(jc[0], d, jc[1], domain, args), enumerate(cubes)))
    out = Path(args.output)
    _write(out, "audit_cube.csv", dumps_csv(CUBE_COLUMNS, rows))
    violations = sum(
        r["inside_violations"] + r["outside_violations"] + r["p_inside_violations"] + r["p_outside_violations"] for r in rows
    )
    summary = {
        "specs": len(rows),
        "membership_violations": violations,
        "claim_inside_failures": sum(not r["claim_inside_holds"] for r in rows),
        "claim_outside_failures": sum(not r["claim_outside_holds"] for r in rows),
    }
    params = construction_params(d, domain.diameter, None, args.eps, args.omega)
    _write(out, "audit_cube.json", dumps_report(_envelope(args, "audit cube", params, summary)))
    print(dumps_report(summary), end="")
    return EXIT_VIOLATION if violations else EXIT_OK


# ---- lift ------------------------------------------------------------------


def cmd_lift(args) -> int:
    try:
        net = load_network(args.network)
    except OSError as exc:
        raise InputError(f"cannot read {args.network}: {exc.strerror}") from exc
    domain = _domain(args, net.dim)
    res = lift_to_two_layer(net, domain, args.eps, args.kind, n_probes=args.probes, seed=args.seed)
    out = Path(args.output)
    _write(out, args.out_network, dumps_network(res.network))
    report = {
        "kind": args.kind,
        "h": net.m,
        "per_unit_tol": res.tol,
        "unit_count": res.unit_count,
        "per_unit_counts": [a.u for a in res.per_unit],
        "u_max": res.u_max,
        "hu": res.hu,
        "ranges_M": list(res.ranges),
        "per_unit_achieved_err": [a.achieved_err for a in res.per_unit],
        "probe_err": res.probe_err,
        "probe_points": res.n_probes,
        "budget": args.eps / 2.0,
        "within_budget": res.probe_err <= args.eps / 2.0,
    }
    _write(out, "lift.json", dumps_report(_envelope(args, "lift", construction_params(net.dim, domain.diameter, None, args.eps), report)))
    print(dumps_report({k: report[k] for k in ("unit_count", "probe_err", "within_budget")}), end="")
    return EXIT_OK


# ---- parser ----------------------------------------------------------------


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with flag values (keys use underscores)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1, help="worker cap for parallel sweeps")
    common.add_argument("--output", default=".", help="directory for reports")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="swsynth", description="Constructive shallow-network approximation tools.")
    parser.add_argument("--version", action="version", version=f"swsynth {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    leaves: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("bound", parents=[common], help="evaluate the neuron-count bound")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--diam", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--sweep-eps", type=_floats, help="comma-separated eps values for a CSV sweep")
    p.add_argument("--force", action="store_true", help="evaluate even for d < 2")
    p.set_defaults(handler=cmd_bound)
    leaves["bound"] = p

    p = sub.add_parser("construct", parents=[common], help="build the global approximant for a target")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--function", choices=CATALOG, default="linear")
    src.add_argument("--csv", help="gridded samples with header x1,...,xd,value")
    p.add_argument("--param", action="append", help="catalog parameter key=JSON (repeatable)")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--lower", type=_floats)
    p.add_argument("--upper", type=_floats)
    p.add_argument("--eps-target", type=float, default=0.5)
    p.add_argument("--subgrid", type=int, default=3)
    p.add_argument("--sample-density", type=int, default=21)
    p.add_argument("--check-samples", type=int, default=10**4)
    p.add_argument("--r-override", type=float)
    p.add_argument("--cube-k", type=int)
    p.add_argument("--cube-n", type=int)
    p.add_argument("--expand", action="store_true", help="also write the expanded exp network when feasible")
    p.set_defaults(handler=cmd_construct)
    leaves["construct"] = p

    p = sub.add_parser("audit", help="audit lemma statements")
    asub = p.add_subparsers(dest="audit_kind", required=True)

    q = asub.add_parser("bernoulli", parents=[common])
    q.add_argument("--eps-grid", type=_floats, default=[0.1, 0.05, 0.01, 0.001])
    q.add_argument("--alpha-beta-grid", type=_pairs, default=[(0.25, 0.5), (0.1, 0.5), (0.2, 0.45), (0.05, 0.2), (0.1, 0.9)])
    q.add_argument("--samples", type=int, default=20)
    q.set_defaults(handler=cmd_audit_bernoulli, command="audit")
    leaves["audit bernoulli"] = q

    q = asub.add_parser("combinatorics", parents=[common])
    q.add_argument("--robbins-n-max", type=int, default=40)
    q.add_argument("--l1-n-max", type=int, default=12)
    q.add_argument("--l1-k-max", type=int, default=3)
    q.add_argument("--ball-d-max", type=int, default=3)
    q.add_argument("--ball-R", type=_floats, default=[0.5, 1.0, 2.0, 3.5, 5.0])
    q.add_argument("--ball-rho", type=_floats, default=[0.25, 0.5, 1.0, 1.5, 2.0])
    q.set_defaults(handler=cmd_audit_combinatorics, command="audit")
    leaves["audit combinatorics"] = q

    q = asub.add_parser("cube", parents=[common])
    q.add_argument("--d", type=int, default=2)
    q.add_argument("--specs", type=int, default=20)
    q.add_argument("--samples", type=int, default=2000)
    q.add_argument("--g-probes", type=int, default=200)
    q.add_argument("--omega", type=float, default=2.0)
    q.add_argument("--eps", type=float, default=0.1)
    q.set_defaults(handler=cmd_audit_cube, command="audit")
    leaves["audit cube"] = q

    p = sub.add_parser("lift", parents=[common], help="replace exp units by sigmoid/relu/step units")
    p.add_argument("network", help="exp network JSON file")
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--kind", choices=KINDS, default="step")
    p.add_argument("--lower", type=_floats)
    p.add_argument("--upper", type=_floats)
    p.add_argument("--probes", type=int, default=1000)
    p.add_argument("--out-network", default="lifted.json")
    p.set_defaults(handler=cmd_lift)
    leaves["lift"] = p
    return parser, leaves


def _leaf_key_from_argv(argv, leaves) -> str | None:
    words = [a for a in argv if not a.startswith("-")][:2]
    for n in (2, 1):
        key = " ".join(words[:n])
        if len(words) >= n and key in leaves:
            return key
    return None


def parse_args(argv=None) -> argparse.Namespace:
    """Parse flags; values from ``--config`` fill in anything not given on the command line."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    leaf_key = _leaf_key_from_argv(argv, leaves)
    if known.config and leaf_key is not None:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot load config {known.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        leaf = leaves[leaf_key]
        known_dests = {a.dest for a in leaf._actions}
        unknown = sorted(set(cfg) - known_dests)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        for action in leaf._actions:
            # a config value satisfies a required flag
            if action.dest in cfg:
                action.required = False
        leaf.set_defaults(**cfg)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (InputError, ValueError) as exc:
        print(f"swsynth: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
