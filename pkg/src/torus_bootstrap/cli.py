"""Command-line driver.

Every command writes a data payload (CSV or JSON) that embeds the resolved
configuration, including the master seed. CSV files carry it on a leading
``# config: {...}`` comment line.

Exit codes: 0 success, 2 validation error, 3 numeric diagnostic.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from . import dynamics, graph_analysis, graph_gen, meanfield
from .torus_model import ParameterError, TorusParams

OUT_DIR_ENV = "TORUS_BOOTSTRAP_OUT"
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3

SWEEP_COLUMNS = ["lambda", "k", "N", "p", "replicas", "frac_all_active", "mean_steps", "pc_mf"]


class ValidationError(ValueError):
    pass


# --- grids and small helpers ----------------------------------------------


def parse_grid(text: str, name: str, lo: float | None = None, hi: float | None = None) -> list[float]:
    """``a,b,c`` or ``log:start:stop:num`` or ``lin:start:stop:num``."""
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ValidationError(f"{name}: log grid needs positive endpoints")
                vals = np.geomspace(a, b, n)
            else:
                vals = np.linspace(a, b, n)
            vals = [float(v) for v in vals]
        else:
            vals = [float(t) for t in text.split(",") if t.strip()]
    except ValidationError:
        raise
    except ValueError:
        raise ValidationError(f"{name}: malformed grid {text!r}") from None
    if not vals:
        raise ValidationError(f"{name}: empty grid")
    for v in vals:
        if not math.isfinite(v) or (lo is not None and v < lo) or (hi is not None and v > hi):
            raise ValidationError(f"{name}: value {v} outside [{lo}, {hi}]")
    return vals


def c_from_lambda(lam: float) -> float:
    return lam / (4 * meanfield.LN2)


def _config(args, **extra) -> dict:
    # worker count does not affect results, so it stays out of the payload
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "workers")}
    cfg.update(extra)
    return cfg


def csv_payload(config: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def read_csv_payload(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`csv_payload` (values returned as strings)."""
    lines = text.splitlines()
    config = {}
    body = []
    for line in lines:
        if line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    return config, list(csv.DictReader(body))


def json_payload(config: dict, **data) -> str:
    return json.dumps({"config": config, **data}, indent=2, sort_keys=True) + "\n"


def _emit(args, payload: str | bytes, suffix: str) -> None:
    out = args.out
    if out is None and os.environ.get(OUT_DIR_ENV):
        out = str(Path(os.environ[OUT_DIR_ENV]) / f"{args.command}.{suffix}")
    if out is None or out == "-":
        sys.stdout.write(payload.decode() if isinstance(payload, bytes) else payload)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, bytes):
        path.write_bytes(payload)
    else:
        path.write_text(payload)


def _params(args) -> TorusParams:
    return TorusParams(args.n, args.c)


def _activation(args) -> dynamics.ActivationConfig:
    return dynamics.ActivationConfig(args.k, args.p, args.excitatory_fraction, args.max_steps)


def _mf_model(args, k: int, lam: float) -> meanfield.MeanFieldModel:
    if args.degree_backend == "exact":
        return meanfield.MeanFieldModel.exact(args.n, c_from_lambda(lam), k)
    return meanfield.MeanFieldModel.poisson(lam, k)


# --- commands --------------------------------------------------------------


def cmd_generate(args) -> None:
    g = graph_gen.build_graph(_params(args), graph_gen.RngSeed(args.seed, 0))
    _emit(args, graph_gen.serialize(g), "txt")


def cmd_stats(args) -> None:
    params = _params(args)
    g = graph_gen.build_graph(params, graph_gen.RngSeed(args.seed, 0))
    hist = graph_analysis.long_degree_histogram(g)
    cfg = _config(args)
    if args.format == "csv":
        _emit(args, csv_payload(cfg, ["degree", "probability"], enumerate(hist.pmf.tolist())), "csv")
        return
    summary = {
        "long_edges": g.num_long_edges,
        "expected_long_edges": graph_gen.expected_long_edge_count(params),
        "mean_long_degree": hist.mean(),
        "histogram": hist.pmf.tolist(),
    }
    if params.c > 0:
        lam = meanfield.lambda_from_c(params.c)
        exact = graph_analysis.exact_long_degree_distribution(params.N, params.c)
        summary["lambda"] = lam
        summary["tv_exact_vs_poisson"] = graph_analysis.tv_distance(exact, graph_analysis.poisson_pmf(lam))
    _emit(args, json_payload(cfg, **summary), "json")


def cmd_diameter(args) -> None:
    params = _params(args)
    records = []
    for r in range(args.replicas):
        g = graph_gen.build_graph(params, graph_gen.RngSeed(args.seed, r))
        if params.N <= 64 and not args.estimate:
            rep = graph_analysis.exact_diameter(g)
        else:
            rep = graph_analysis.estimate_diameter(g, args.sources, graph_gen.stream_generator(args.seed, r, 1))
        rec = rep.record(params, args.seed)
        rec["replica"] = r
        records.append(rec)
    cfg = _config(args)
    if args.format == "csv":
        cols = ["N", "c", "seed", "replica", "method", "value"]
        _emit(args, csv_payload(cfg, cols, ([rec[c] for c in cols] for rec in records)), "csv")
    else:
        _emit(args, json_payload(cfg, records=records), "json")


def _outcome_payload(args, outcome: dynamics.RunOutcome, cfg: dict) -> tuple[str, str]:
    if args.format == "csv":
        return csv_payload(cfg, ["t", "rho"], enumerate(outcome.trajectory)), "csv"
    return json_payload(cfg, **outcome.to_dict()), "json"


def cmd_simulate(args) -> None:
    g = graph_gen.build_graph(_params(args), graph_gen.RngSeed(args.seed, 0))
    outcome = dynamics.run(g, _activation(args), graph_gen.RngSeed(args.seed, 1))
    _emit(args, *_outcome_payload(args, outcome, _config(args)))


def cmd_mfchain(args) -> None:
    lam = args.lam if args.lam is not None else meanfield.lambda_from_c(args.c)
    model = _mf_model(args, args.k, lam)
    outcome = dynamics.mf_chain_run(args.n, _activation(args), model, graph_gen.RngSeed(args.seed, 0))
    _emit(args, *_outcome_payload(args, outcome, _config(args, resolved_lambda=lam)))


def cmd_meanfield(args) -> None:
    grid = parse_grid(args.lambda_grid, "--lambda-grid", lo=0.0)
    cfg = _config(args, resolved_lambda_grid=grid)
    if args.fixed_points:
        reports = [meanfield.fixed_point_report(lam, args.k) for lam in grid]
        _emit(args, json_payload(cfg, reports=reports), "json")
        return
    curve = meanfield.pc_curve(grid, args.k)
    rows = [(float(lam), float(pc), args.k) for lam, pc in curve]
    if args.format == "json":
        _emit(args, json_payload(cfg, rows=[dict(zip(["lambda", "p_c", "k"], r)) for r in rows]), "json")
    else:
        _emit(args, csv_payload(cfg, ["lambda", "p_c", "k"], rows), "csv")


def sweep_cell(args, cell: int, lam: float, p: float) -> dict:
    """Run all replicas of one (lambda, p) cell with streams keyed by (seed, cell, replica)."""
    k = args.k
    act = dynamics.ActivationConfig(k, p, args.excitatory_fraction, args.max_steps)
    outcomes = []
    if args.backend == "mfchain":
        model = _mf_model(args, k, lam)
        for r in range(args.replicas):
            outcomes.append(dynamics.mf_chain_run(args.n, act, model, graph_gen.stream_generator(args.seed, cell, r)))
    else:
        params = TorusParams(args.n, c_from_lambda(lam))
        for r in range(args.replicas):
            gen = graph_gen.stream_generator(args.seed, cell, r)
            g = graph_gen.build_graph(params, gen)
            outcomes.append(dynamics.run(g, act, gen))
    absorbed = [o.steps_taken for o in outcomes if o.status in (dynamics.ALL_ACTIVE, dynamics.ALL_INACTIVE)]
    try:
        pc = meanfield.p_c(lam, k) if k <= 3 else float("nan")
    except ParameterError:
        pc = float("nan")
    return {
        "lambda": lam,
        "k": k,
        "N": args.n,
        "p": p,
        "replicas": args.replicas,
        "frac_all_active": sum(o.status == dynamics.ALL_ACTIVE for o in outcomes) / args.replicas,
        "mean_steps": float(np.mean(absorbed)) if absorbed else float("nan"),
        "pc_mf": pc,
        "budget_exhausted": sum(o.status == dynamics.BUDGET for o in outcomes),
        "cycles": sum(o.status == dynamics.CYCLE for o in outcomes),
        "cell": cell,
    }


def cmd_sweep(args) -> None:
    if args.replicas < 1:
        raise ValidationError("--replicas must be ≥ 1")
    if args.workers < 1:
        raise ValidationError("--workers must be ≥ 1")
    lams = parse_grid(args.lambda_grid, "--lambda-grid", lo=0.0)
    if any(v <= 0 for v in lams):
        raise ValidationError("--lambda-grid: values must be positive")
    ps = parse_grid(args.p_grid, "--p-grid", lo=0.0, hi=1.0)
    # validate once up front so a bad N / c fails before any work
    for lam in lams:
        TorusParams(args.n, c_from_lambda(lam))
    ckpt_path = Path(args.checkpoint) if args.checkpoint else None
    done = {}
    if ckpt_path is not None and ckpt_path.exists():
        for line in ckpt_path.read_text().splitlines():
            if line.strip():
                row = json.loads(line)
                done[row["cell"]] = row
    cells = [(i, lam, p) for i, (lam, p) in enumerate((lam, p) for lam in lams for p in ps)]
    todo = [c for c in cells if c[0] not in done]

    def collect(row):
        # single writer: only this process touches the checkpoint file
        done[row["cell"]] = row
        if ckpt_path is not None:
            with ckpt_path.open("a") as fh:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    if args.workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            futures = [pool.submit(sweep_cell, args, *c) for c in todo]
            for fut in as_completed(futures):
                collect(fut.result())
    else:
        for c in todo:
            collect(sweep_cell(args, *c))
    rows = [done[i] for i, _, _ in cells]
    cfg = _config(args, resolved_lambda_grid=lams, resolved_p_grid=ps)
    if args.format == "json":
        _emit(args, json_payload(cfg, rows=rows), "json")
    else:
        _emit(args, csv_payload(cfg, SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows)), "csv")


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torus-bootstrap",
        description="Long-range random graphs on the torus and threshold activation dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt="csv"):
        p.add_argument("--seed", type=int, default=0, help="master 64-bit seed")
        p.add_argument("--format", choices=["csv", "json"], default=fmt)
        p.add_argument("--out", default=None, help=f"output path ('-' = stdout; default ${OUT_DIR_ENV}/<command>.<ext> or stdout)")

    def graph_args(p):
        p.add_argument("--n", type=int, required=True, help="torus side length N (≥ 3)")
        p.add_argument("--c", type=float, default=1.0, help="long-edge density constant")

    def activation_args(p, p_required=True):
        p.add_argument("--k", type=int, required=True, help="activation threshold")
        if p_required:
            p.add_argument("--p", type=float, required=True, help="initial activation probability")
        p.add_argument("--excitatory-fraction", type=float, default=1.0)
        p.add_argument("--max-steps", type=int, default=1000)

    p = sub.add_parser("generate", help="sample a graph and write it in the text edge format")
    graph_args(p)
    common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="long-degree histogram and Poisson comparison")
    graph_args(p)
    common(p, "json")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("diameter", help="exact (N ≤ 64) or double-sweep diameter")
    graph_args(p)
    common(p, "json")
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--sources", type=int, default=4, help="double-sweep start vertices")
    p.add_argument("--estimate", action="store_true", help="force double sweep")
    p.set_defaults(func=cmd_diameter)

    p = sub.add_parser("simulate", help="run the activation process on a sampled graph")
    graph_args(p)
    activation_args(p)
    common(p, "json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mfchain", help="run the mean-field density chain")
    graph_args(p)
    activation_args(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="Poisson degree mean (default 4 c ln 2)")
    p.add_argument("--degree-backend", choices=["poisson", "exact"], default="poisson")
    common(p, "json")
    p.set_defaults(func=cmd_mfchain)

    p = sub.add_parser("meanfield", help="critical probability curve or fixed-point report")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda-grid", required=True, help="'a,b,c' or 'log:start:stop:num' or 'lin:start:stop:num'")
    p.add_argument("--fixed-points", action="store_true", help="emit the JSON fixed-point report instead")
    common(p)
    p.set_defaults(func=cmd_meanfield)

    p = sub.add_parser("sweep", help="phase diagram over (lambda, p) cells")
    graph_args(p)
    activation_args(p, p_required=False)
    p.add_argument("--lambda-grid", required=True)
    p.add_argument("--p-grid", required=True)
    p.add_argument("--replicas", type=int, default=10)
    p.add_argument("--backend", choices=["graph", "mfchain"], default="mfchain")
    p.add_argument("--degree-backend", choices=["poisson", "exact"], default="poisson")
    p.add_argument("--checkpoint", default=None, help="JSON-lines file of finished cells; resumes if present")
    p.add_argument("--workers", type=int, default=1, help="processes for independent cells")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValidationError, ParameterError, graph_gen.GraphFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except meanfield.BracketingError as exc:
        print(f"numeric diagnostic: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
