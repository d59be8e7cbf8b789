"""Command-line front end: ``gaussot <command> [options]``.

Commands
--------
solve          solve the maps of a scenario and write their records
verify         run the requested verifications and write a run report
residual       CSV of the Monge-Ampere residual on a grid
tower          CSV of the W2 tower for a separable quadratic target
sweep          CSV of the thm24 check over product dimensions
matrix-lemmas  summary of the two matrix-lemma checks on random pairs
report-merge   concatenate run reports, refusing duplicate scenario names

Exit codes: 0 success, 1 a verdict failed (or a solver error), 2 invalid
input. ``GAUSSOT_OUT_DIR`` overrides the output directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import functionals as F
from . import inequalities as I
from . import matrix_lemmas as ML
from . import wiener_tower as WT
from .config import load_scenario
from .errors import ConfigError, GaussotError
from .potentials import Separable
from .quadrature import gauss_hermite
from .transport import (
    Product,
    pushforward_check,
    solve_gaussian_closed_form,
    solve_product,
    to_record,
)
from .transport.entropic import solve_entropic_grid
from .transport.quantile import solve_quantile_1d

OUT_ENV = "GAUSSOT_OUT_DIR"
SCENARIO_DIR = Path(__file__).with_name("scenarios")
FAIL_VERDICTS = {"violated", "identity-broken", "error"}


# -- deterministic serialization ----------------------------------------------

def _fmt_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj, indent=2):
    """JSON text with floats at 17 significant digits; stable and re-readable."""
    def enc(o, level):
        pad, inner = " " * (indent * level), " " * (indent * (level + 1))
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{inner}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + pad + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[\n" + ",\n".join(inner + enc(v, level + 1) for v in o) + "\n" + pad + "]"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(float(o))
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, str):
            return json.dumps(o)
        raise TypeError(f"cannot serialize {type(o).__name__}")
    return enc(obj, 0) + "\n"


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt_float(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


# -- scenario execution -------------------------------------------------------

def resolve_scenario_path(name):
    p = Path(name)
    if p.exists():
        return p
    bundled = SCENARIO_DIR / (name if name.endswith(".toml") else name + ".toml")
    if bundled.exists():
        return bundled
    raise ConfigError(f"no such file or bundled scenario: {name}", "scenario")


def bundled_scenarios():
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.toml"))


def _solve_map(spec, sc):
    V, W = sc.potentials[spec.source], sc.potentials[spec.target]
    opts = dict(spec.options)
    if spec.solver == "gaussian":
        return solve_gaussian_closed_form(V, W)
    if spec.solver == "quantile":
        if sc.dim != 1:
            raise ConfigError("quantile solver is one-dimensional; use solver = \"product\"", f"maps.{spec.name}.solver")
        return solve_quantile_1d(V, W, **opts)
    if spec.solver == "product":
        if not (isinstance(V, Separable) and isinstance(W, Separable)):
            raise ConfigError("product solver needs separable potentials", f"maps.{spec.name}.solver")
        return solve_product(V, W, solver=spec.component, **opts)
    if "schedule" in opts:
        opts["schedule"] = tuple(float(e) for e in opts["schedule"])
    return solve_entropic_grid(V, W, **opts)


def solve_maps(sc, names=None):
    maps, diag, timings = {}, {}, {}
    q = sc.rule()
    for name, spec in sc.maps.items():
        if names is not None and name not in names:
            continue
        t0 = time.perf_counter()
        T = _solve_map(spec, sc)
        timings[name] = time.perf_counter() - t0
        worst, rows = pushforward_check(T, sc.potentials[spec.source], sc.potentials[spec.target], q, detail=True)
        maps[name] = T
        diag[name] = {"backend": T.backend, "solver": spec.solver, "source": spec.source,
                      "target": spec.target, "pushforward": worst, "pushforward_detail": rows}
    return maps, diag, timings


def _pair(sc, maps, name):
    spec = sc.maps[name]
    return sc.potentials[spec.source], sc.potentials[spec.target], maps[name]


def _verify_one(v, sc, maps, q):
    floor = {} if v.floor is None else {"floor": v.floor}
    if v.tag == "thm21":
        (V1, W1, T1), (V2, W2, T2) = _pair(sc, maps, v.maps[0]), _pair(sc, maps, v.maps[1])
        return I.verify_identity_thm21(V1, V2, W1, W2, T1, T2, q, **floor)
    if v.tag == "cor22":
        (V1, W1, T1), (V2, W2, T2) = _pair(sc, maps, v.maps[0]), _pair(sc, maps, v.maps[1])
        same = sc.maps[v.maps[0]].target == sc.maps[v.maps[1]].target
        return I.verify_cor22(V1, V2, W1, W2, T1, T2, v.c, q, targets_equal=same, seed=sc.seed, **floor)
    if v.tag in ("thm26", "thm29"):
        variant = "base" if v.tag == "thm26" else "thm29"
        return I.verify_thm26(_pair(sc, maps, v.maps[0]), _pair(sc, maps, v.maps[1]), v.c, v.p, q,
                              variant=variant, seed=sc.seed, **floor)
    if v.tag == "poincare":
        return I.verify_poincare(sc.potentials[v.potential], v.c, q, seed=sc.seed, **floor)
    V, W, T = _pair(sc, maps, v.maps[0])
    if v.tag == "thm23":
        return I.verify_thm23(V, W, T, q, **floor)
    if v.tag == "thm24":
        return I.verify_thm24(V, W, T, v.c, q, seed=sc.seed, **floor)
    if v.tag == "thm25":
        return I.verify_thm25(V, W, T, v.c, v.p, q, seed=sc.seed, **floor)
    if v.tag == "talagrand":
        return I.verify_talagrand(W, T, q, **floor)
    if v.tag == "ma-residual":
        return I.verify_ma_residual(V, W, T, radius=v.radius, points=v.points, tolerance=v.tolerance)
    raise ConfigError(f"unhandled tag {v.tag!r}", "verify")


def _verify_record(v, sc, maps, q):
    t0 = time.perf_counter()
    try:
        rec = _verify_one(v, sc, maps, q).as_dict()
    except ConfigError:
        raise
    except GaussotError as exc:
        rec = {"name": v.tag, "verdict": "error", "error": f"{type(exc).__name__}: {exc}"}
    return {"id": v.id, "tag": v.tag, **rec}, time.perf_counter() - t0


def run_scenario(sc, only=None, jobs=None):
    """Run a parsed scenario; returns ``(report, exit_code)``."""
    t_start = time.perf_counter()
    wanted = [v for v in sc.verify if only is None or v.id in only or v.tag in only]
    needed = {m for v in wanted for m in v.maps} | ({m for m in sc.maps} if not wanted else set())
    maps, diag, solve_t = solve_maps(sc, names=needed)
    q = sc.rule()
    jobs = jobs or min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [pool.submit(_verify_record, v, sc, maps, q) for v in wanted]
        results = [f.result() for f in futures]
    records = [r for r, _ in results]
    failed = [r["id"] for r in records if r["verdict"] in FAIL_VERDICTS]
    trunc = max((it["trunc_error"] for r in records for it in r.get("items", [])), default=0.0)
    code = 1 if failed else 0
    report = {
        "artifact": {"package": "gaussot", "version": __version__},
        "scenario": sc.echo(),
        "quadrature": {"dim": sc.dim, "order": sc.quad_order, "nodes": q.size, "max_trunc_error": trunc},
        "maps": diag,
        "verifications": records,
        "summary": {"total": len(records), "failed": failed, "exit_code": code},
        "timings": {
            "solve": solve_t,
            "verify": {r["id"]: t for r, t in results},
            "total": time.perf_counter() - t_start,
        },
    }
    return report, code


def strip_timings(report):
    return {k: v for k, v in report.items() if k != "timings"}


# -- output -------------------------------------------------------------------

def _destination(args, sc_name=None, out_dir=None, suffix="json"):
    if getattr(args, "out", None):
        return Path(args.out)
    base = os.environ.get(OUT_ENV) or out_dir
    if base and sc_name:
        return Path(base) / f"{sc_name}.{args.command}.{suffix}"
    return None


def _emit(text, dest):
    if dest is None:
        sys.stdout.write(text)
        return
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text, encoding="utf-8")
    print(f"wrote {dest}", file=sys.stderr)


def _load(args):
    return load_scenario(resolve_scenario_path(args.scenario), seed=args.seed, quad_order=args.quad_order)


# -- commands -----------------------------------------------------------------

def cmd_solve(args):
    sc = _load(args)
    maps, diag, timings = solve_maps(sc)
    out = {"scenario": sc.name, "maps": {}, "timings": timings}
    for name, T in maps.items():
        out["maps"][name] = {"record": to_record(T), **diag[name]}
    _emit(dumps(out), _destination(args, sc.name, sc.output_dir))
    return 0


def cmd_verify(args):
    sc = _load(args)
    only = None
    if args.only:
        only = {s.strip() for s in args.only.split(",") if s.strip()}
        known = {v.id for v in sc.verify} | {v.tag for v in sc.verify}
        missing = sorted(only - known)
        if missing:
            raise ConfigError(f"no verification named {missing[0]!r}", "--only")
    report, code = run_scenario(sc, only=only, jobs=args.jobs)
    _emit(dumps(report), _destination(args, sc.name, sc.output_dir))
    for r in report["verifications"]:
        print(f"{r['id']:<16} {r['verdict']:<16} slack={_fmt_float(r.get('slack', float('nan')))}", file=sys.stderr)
    return code


def cmd_residual(args):
    sc = _load(args)
    name = args.map or next(iter(sc.maps), None)
    if name not in sc.maps:
        raise ConfigError(f"unknown map {name!r}", "--map")
    if args.grid < 2:
        raise ConfigError("must be >= 2", "--grid")
    maps, _, _ = solve_maps(sc, names={name})
    V, W, T = _pair(sc, maps, name)
    x = I.ma_probe_grid(sc.dim, args.range, args.grid)
    r = F.ma_residual(V, W, T, x, extrapolate=True)
    header = [f"x{i}" for i in range(sc.dim)] + ["r"]
    rows = [[float(v) for v in xi] + [float(ri)] for xi, ri in zip(x, r)]
    _emit(_csv_text(header, rows), _destination(args, sc.name, sc.output_dir, "csv"))
    return 0


def _parse_floats(text, where):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}", where) from exc


def cmd_tower(args):
    lambdas = None
    sc = None
    if args.lambdas is not None:
        lambdas = _parse_floats(args.lambdas, "--lambdas")
    elif args.scenario:
        sc = _load(args)
        lambdas = sc.tower.get("lambdas")
    if not lambdas:
        raise ConfigError("give --lambdas or a scenario with [tower] lambdas", "--lambdas")
    try:
        spec = WT.SeparableQuadraticSpec(tuple(lambdas))
    except GaussotError as exc:
        raise ConfigError(str(exc), "--lambdas") from exc
    V, W = WT.spec_potentials(spec)
    levels = WT.tower_w2_sequence(V, W, solver=args.solver)
    rows = [[lv.n, lv.w2_sq, lv.alpha_n, lv.residual] for lv in levels]
    _emit(_csv_text(["n", "w2_sq", "alpha_n", "residual"], rows),
          _destination(args, sc.name if sc else None, sc.output_dir if sc else None, "csv"))
    w = [lv.w2_sq for lv in levels]
    return 0 if all(b >= a - 1e-8 for a, b in zip(w, w[1:])) else 1


SWEEP_TAGS = ("thm23", "thm24", "talagrand")


def sweep_dimension(sc, dims, tag="thm24", map_name=None, c=None):
    """Rows ``(d, lhs, rhs, slack, slack/d)`` for ``d``-fold products of a 1D scenario."""
    if sc.dim != 1:
        raise ConfigError("sweep needs a one-dimensional base scenario", "dim")
    if tag not in SWEEP_TAGS:
        raise ConfigError(f"sweep supports {', '.join(SWEEP_TAGS)}", "--tag")
    name = map_name or next(iter(sc.maps), None)
    if name not in sc.maps:
        raise ConfigError(f"unknown map {name!r}", "--map")
    if tag == "thm24" and c is None:
        c = next((v.c for v in sc.verify if v.tag == "thm24"), None)
        if c is None:
            raise ConfigError("thm24 sweep needs c (flag or a thm24 entry)", "--c")
    maps, _, _ = solve_maps(sc, names={name})
    V, W, T = _pair(sc, maps, name)
    q = gauss_hermite(1, sc.quad_order)
    rows, reports = [], []
    for d in dims:
        if d < 1:
            raise ConfigError(f"dimensions must be >= 1, got {d}", "--dims")
        Vd, Wd = Separable([V] * d), Separable([W] * d)
        Td = Product([T] * d, source=Vd, target=Wd)
        if tag == "thm24":
            rep = I.verify_thm24(Vd, Wd, Td, c, q, seed=sc.seed)
        elif tag == "thm23":
            rep = I.verify_thm23(Vd, Wd, Td, q)
        else:
            rep = I.verify_talagrand(Wd, Td, q)
        rows.append([d, rep.lhs, rep.rhs, rep.slack, rep.slack / d])
        reports.append(rep)
    return rows, reports


def cmd_sweep(args):
    sc = _load(args)
    dims = args.dims or ",".join(str(d) for d in sc.sweep.get("dims", [1, 2, 4, 8]))
    try:
        dims = [int(s) for s in dims.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {dims!r}", "--dims") from exc
    tag = args.tag or sc.sweep.get("tag", "thm24")
    rows, reports = sweep_dimension(sc, dims, tag=tag, map_name=args.map, c=args.c)
    _emit(_csv_text(["d", "lhs", "rhs", "slack", "slack_per_d"], rows),
          _destination(args, sc.name, sc.output_dir, "csv"))
    per_d = [r[4] for r in rows]
    spread_ok = max(per_d) - min(per_d) <= 1e-6
    return 0 if spread_ok and all(r.ok for r in reports) else 1


def cmd_matrix_lemmas(args):
    t0 = time.perf_counter()
    dims = [int(s) for s in args.dims.split(",")] if args.dims else range(1, 9)
    summary = ML.check_suite(count=args.count, seed=args.seed or 0, dims=dims, t_order=args.t_order)
    summary["timings"] = {"total": time.perf_counter() - t0}
    _emit(dumps(summary), _destination(args))
    ok = summary["lemma42_pass"] and summary["lemma41_pass"]
    print(f"lemma42 {'PASS' if summary['lemma42_pass'] else 'FAIL'} worst residual "
          f"{summary['lemma42_worst_residual']:.3e}", file=sys.stderr)
    print(f"lemma41 {'PASS' if summary['lemma41_pass'] else 'FAIL'} violations "
          f"{summary['lemma41_violations']}", file=sys.stderr)
    return 0 if ok else 1


def cmd_report_merge(args):
    merged, seen = [], {}
    for path in args.reports:
        try:
            rep = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}", "reports") from exc
        name = rep.get("scenario", {}).get("name") if isinstance(rep.get("scenario"), dict) else rep.get("scenario")
        if name is None:
            raise ConfigError(f"{path} is not a run report", "reports")
        if name in seen:
            raise ConfigError(f"scenario {name!r} appears in both {seen[name]} and {path}", "reports")
        seen[name] = path
        merged.append(rep)
    _emit(dumps({"reports": merged}), _destination(args))
    return 0


# -- argument parsing ---------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="gaussot", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"gaussot {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def common(p, scenario_required=True):
        p.add_argument("--scenario", required=scenario_required, help="scenario file or bundled name")
        p.add_argument("--out", help="output path (default: stdout or $%s)" % OUT_ENV)
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--quad-order", type=int, help="override the quadrature order")
        return p

    common(sub.add_parser("solve", help="solve scenario maps"))
    p = common(sub.add_parser("verify", help="run verifications"))
    p.add_argument("--only", help="comma-separated verification ids or tags")
    p.add_argument("--jobs", type=int, default=None, help="worker threads")
    p = common(sub.add_parser("residual", help="Monge-Ampere residual CSV"))
    p.add_argument("--map")
    p.add_argument("--grid", type=int, default=101, help="points per axis")
    p.add_argument("--range", type=float, default=3.0, help="half-width of the grid")
    p = common(sub.add_parser("tower", help="W2 tower CSV"), scenario_required=False)
    p.add_argument("--lambdas", help="comma-separated lambda_k")
    p.add_argument("--solver", choices=("quantile", "gaussian"), default="quantile")
    p = common(sub.add_parser("sweep", help="dimension sweep CSV"))
    p.add_argument("--dims", help="comma-separated dimensions (default 1,2,4,8)")
    p.add_argument("--tag", choices=SWEEP_TAGS)
    p.add_argument("--map")
    p.add_argument("--c", type=float)
    p = sub.add_parser("matrix-lemmas", help="random-pair matrix lemma checks")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dims", help="comma-separated dimensions (default 1..8)")
    p.add_argument("--t-order", type=int, default=32)
    p.add_argument("--out")
    p = sub.add_parser("report-merge", help="merge run reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--out")
    return parser


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "residual": cmd_residual,
    "tower": cmd_tower,
    "sweep": cmd_sweep,
    "matrix-lemmas": cmd_matrix_lemmas,
    "report-merge": cmd_report_merge,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GaussotError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
