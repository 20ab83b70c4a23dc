"""Command-line entry point: solve, oracle, gen, bench, export."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

from . import enumdecomp, generator, oracle, vns
from .model import InstanceError, Instance, load_instance, parse_t_hat, serialize_instance, solution_to_dict

log = logging.getLogger("capsac")

EXIT_FEASIBLE = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2

RUN_HEADER = [
    "instance", "method", "sigma", "t_hat_s", "seed", "runs", "best_tmax_s", "avg_tmax_s",
    "avg_time_s", "feasible", "n_lo", "n_hi", "reference_s", "deviation_pct",
]
SWEEP_HEADER = ["instance", "method", "sigma", "t_hat_s", "tmax_s", "feasible", "reference_s", "deviation_pct"]


@dataclass
class RunRecord:
    instance: str
    method: str
    sigma: int
    t_hat: float
    seed: int
    runs: int
    best: Optional[float]
    average: Optional[float]
    avg_time: Optional[float]
    feasible: bool
    interval: Optional[tuple] = None
    reference: Optional[float] = None
    found_interval: Optional[tuple] = None

    @property
    def deviation(self) -> Optional[float]:
        if self.reference is None or self.best is None:
            return None
        return 100.0 * (self.best - self.reference) / self.reference

    def row(self, timing: bool = True) -> List[str]:
        lo, hi = self.interval if self.interval else ("", "")
        return [
            self.instance, self.method, str(self.sigma), _fmt_t_hat(self.t_hat), str(self.seed),
            str(self.runs), _fmt(self.best), _fmt(self.average),
            _fmt(self.avg_time, 3) if timing else "", "1" if self.feasible else "0",
            str(lo), str(hi), _fmt(self.reference), _fmt(self.deviation, 4),
        ]


def _fmt(x: Optional[float], digits: int = 2) -> str:
    return "" if x is None else f"{x:.{digits}f}"


def _fmt_t_hat(t: float) -> str:
    return "inf" if math.isinf(t) else f"{t:g}"


def _t_hat(text: str) -> float:
    try:
        return parse_t_hat(text)
    except (ValueError, InstanceError) as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _hoods(text: str) -> tuple:
    names = {"n1": 1, "n2": 2, "n3": 3}
    parts = [p.strip().lower() for p in text.split(",") if p.strip()]
    bad = [p for p in parts if p not in names]
    if bad or not parts:
        raise argparse.ArgumentTypeError(f"neighborhoods must be a subset of n1,n2,n3 (got {text!r})")
    return tuple(sorted({names[p] for p in parts}))


def _grid(text: str) -> tuple:
    try:
        rows, cols = (int(x) for x in text.lower().replace("×", "x").split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("grid must look like ROWSxCOLS") from None
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return rows, cols


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


# -- solving ----------------------------------------------------------------------------


def solve_once(inst: Instance, method: str, time_limit: float, seed: int, runs: int,
               hoods=(1, 2, 3), budget: Optional[int] = None, reference: Optional[float] = None):
    """Run one method; returns (RunRecord, Solution or None)."""
    name = inst.name or "instance"
    if method == "vns":
        res = vns.vns_solve(inst, vns.VnsConfig(time_limit=time_limit, seed=seed, neighborhoods=hoods, runs=runs))
        sol = res.solution
        feas = [r for r in res.runs if r.feasible]
        rec = RunRecord(name, method, inst.sigma, inst.t_hat, seed, runs,
                        sol.makespan if sol.feasible else None,
                        math.fsum(r.makespan for r in feas) / len(feas) if feas else None,
                        res.average_time, sol.feasible, reference=reference)
        return rec, sol
    if method == "decomp":
        start = time.perf_counter()
        res = enumdecomp.decompose_solve(inst, enumdecomp.DecompConfig(budget=budget))
        took = time.perf_counter() - start
        sol = res.solution
        rec = RunRecord(name, method, inst.sigma, inst.t_hat, seed, 1,
                        sol.makespan if sol else None, sol.makespan if sol else None, took,
                        sol is not None, res.final_interval, reference)
        rec.found_interval = res.found_interval
        return rec, sol
    if method == "oracle":
        start = time.perf_counter()
        res = oracle.brute_force_opt(inst)
        rec = RunRecord(name, method, inst.sigma, inst.t_hat, seed, 1, res.optimum, res.optimum,
                        time.perf_counter() - start, res.feasible, reference=reference)
        return rec, res.solution
    raise ValueError(f"unknown method {method!r}")


def _write_csv(path: Optional[str], header, rows, append: bool = False) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    fresh = not (append and path and os.path.exists(path) and os.path.getsize(path) > 0)
    if fresh:
        w.writerow(header)
    w.writerows(rows)
    if path is None or path == "-":
        sys.stdout.write(buf.getvalue())
        return
    with open(path, "a" if append else "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _apply_params(inst: Instance, args) -> Instance:
    return inst.with_params(sigma=args.sigma, t_hat=args.t_hat)


def cmd_solve(args) -> int:
    inst = _apply_params(load_instance(args.instance, args.format), args)
    hoods = args.neighborhoods or (1, 2, 3)
    if args.neighborhoods and 1 in hoods and inst.sigma == 1:
        log.warning("n1 inactive at sigma=1")
    rec, sol = solve_once(inst, args.method, args.time_limit_s, args.seed, args.runs,
                          hoods, args.budget, args.reference)
    if sol is not None and args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(solution_to_dict(sol), fh, indent=2, ensure_ascii=False)
            fh.write("\n")
    if args.csv:
        _write_csv(args.csv, RUN_HEADER, [rec.row()], append=True)
    if args.method == "decomp":
        print("final interval [{},{}]".format(*rec.interval))
        if rec.found_interval:
            print("incumbent found in interval [{},{}]".format(*rec.found_interval))
    if not rec.feasible:
        print("infeasible")
        return EXIT_INFEASIBLE
    print(f"makespan {sol.makespan:.2f}")
    return EXIT_FEASIBLE


def cmd_oracle(args) -> int:
    inst = _apply_params(load_instance(args.instance, args.format), args)
    res = oracle.brute_force_opt(inst)
    if not res.feasible:
        print("infeasible")
        return EXIT_INFEASIBLE
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(solution_to_dict(res.solution), fh, indent=2, ensure_ascii=False)
            fh.write("\n")
    print(f"optimum {res.optimum:.2f} ({res.optimal_coverings} optimal coverings)")
    return EXIT_FEASIBLE


def cmd_gen(args) -> int:
    cfg = generator.GenConfig(
        photos=args.photos, drones=args.drones, capable_pct=args.capable_pct, weighted=args.weighted,
        lambda_s=args.lambda_s, mu_mb=args.mu_mb, capacity_mbps=args.capacity_mbps, grid=args.grid,
        sigma=args.sigma or 1, t_hat=math.inf if args.t_hat is None else args.t_hat, seed=args.seed,
    )
    text = serialize_instance(generator.generate(cfg))
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_FEASIBLE


def _load_manifest(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise InstanceError(f"manifest parse failure: {e}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("entries", []), list):
        raise InstanceError("manifest parse failure: expected an object with an 'entries' list")
    return doc


def _entry_instance(entry: dict, base: str) -> Instance:
    path = entry["instance"]
    if not os.path.isabs(path):
        path = os.path.join(base, path)
    return load_instance(path, entry.get("format", "json"))


def bench_rows(manifest: dict, base: str, runs: int, time_limit: float, seed: int, timing: bool = True):
    rows = []
    for entry in manifest.get("entries", []):
        inst = _entry_instance(entry, base)
        t_hat = parse_t_hat(entry.get("t_hat_s", inst.t_hat))
        refs = {str(k): float(v) for k, v in entry.get("reference", {}).items()}
        for sigma in entry.get("sigmas", [inst.sigma]):
            case = inst.with_params(sigma=sigma, t_hat=t_hat)
            for method in entry.get("methods", ["vns"]):
                rec, _ = solve_once(case, method, time_limit, seed, runs, budget=entry.get("budget"),
                                    reference=refs.get(str(sigma)))
                rows.append(rec.row(timing))
    return rows


def sweep_rows(manifest: dict, base: str, runs: int, time_limit: float, seed: int):
    """Lower T-hat from t_hat_start to t_hat_stop in 1 s steps; deviation is against T-hat = inf."""
    rows = []
    for entry in manifest.get("entries", []):
        inst = _entry_instance(entry, base)
        start, stop = float(entry["t_hat_start"]), float(entry["t_hat_stop"])
        for sigma in entry.get("sigmas", [inst.sigma]):
            for method in entry.get("methods", ["decomp"]):
                free, _ = solve_once(inst.with_params(sigma=sigma, t_hat=math.inf), method, time_limit, seed, runs)
                t = start
                while t >= stop - 1e-9:
                    rec, _ = solve_once(inst.with_params(sigma=sigma, t_hat=t), method, time_limit, seed, runs,
                                        reference=free.best)
                    rows.append([rec.instance, method, str(sigma), _fmt_t_hat(t),
                                 _fmt(rec.best) if rec.feasible else "infeasible",
                                 "1" if rec.feasible else "0", _fmt(free.best), _fmt(rec.deviation, 4)])
                    t -= 1.0
    return rows


def cmd_bench(args) -> int:
    manifest = _load_manifest(args.manifest)
    base = os.path.dirname(os.path.abspath(args.manifest))
    runs = args.runs if args.runs is not None else manifest.get("runs", 20)
    limit = args.time_limit_s if args.time_limit_s is not None else manifest.get("time_limit_s", 300.0)
    if args.sweep:
        _write_csv(args.out, SWEEP_HEADER, sweep_rows(manifest, base, runs, limit, args.seed))
    else:
        _write_csv(args.out, RUN_HEADER, bench_rows(manifest, base, runs, limit, args.seed, not args.no_timing))
    return EXIT_FEASIBLE


def cmd_export(args) -> int:
    inst = _apply_params(load_instance(args.instance, args.format), args)
    catalog = enumdecomp.enumerate_rects(inst)
    if args.interval:
        lo, hi = args.interval
        cand = [i for i, e in enumerate(catalog.regions) if lo <= e.count <= hi]
    else:
        cand = list(range(len(catalog)))
    text = enumdecomp.export_milp(inst, catalog, cand, per_drone_coverage=args.per_drone_coverage)
    if args.out and args.out != "-":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.catalog_csv:
        with open(args.catalog_csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(enumdecomp.catalog_csv(catalog))
    return EXIT_FEASIBLE


def _interval(text: str) -> tuple:
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("interval must look like LO,HI") from None
    return lo, hi


class _Parser(argparse.ArgumentParser):
    # bad flags are errors (exit 1); exit 2 is reserved for infeasible instances
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p = _Parser(prog="capsac", description="Covering-assignment solver for drone swarm photo processing.")
    sub = p.add_subparsers(dest="command", required=True)

    def instance_args(sp):
        sp.add_argument("instance", help="instance file")
        sp.add_argument("--format", default="json", help="instance reader (default json)")
        sp.add_argument("--sigma", type=int, help="override the reliability factor")
        sp.add_argument("--t-hat", type=_t_hat, help="override the delay limit in seconds (number or inf)")

    s = sub.add_parser("solve", help="solve an instance", parents=[common])
    instance_args(s)
    s.add_argument("--method", choices=["vns", "decomp"], default="vns")
    s.add_argument("--time-limit-s", type=_positive, default=300.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--runs", type=int, default=1)
    s.add_argument("--neighborhoods", type=_hoods, help="subset of n1,n2,n3 (default all)")
    s.add_argument("--budget", type=int, help="node budget per restricted solve (decomp)")
    s.add_argument("--reference", type=float, help="reference makespan for the deviation column")
    s.add_argument("--out", help="solution JSON path")
    s.add_argument("--csv", help="append a run record to this CSV")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exhaustive optimum for tiny instances", parents=[common])
    instance_args(o)
    o.add_argument("--out", help="solution JSON path")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("gen", help="generate a synthetic instance", parents=[common])
    g.add_argument("--photos", type=int, required=True)
    g.add_argument("--drones", type=int, required=True)
    g.add_argument("--capable-pct", type=float, required=True)
    kind = g.add_mutually_exclusive_group()
    kind.add_argument("--weighted", action="store_true", help="lambda uniform on [0.5, 1.5] x --lambda-s")
    kind.add_argument("--unweighted", action="store_true", help="every photo takes --lambda-s (default)")
    g.add_argument("--lambda-s", type=_positive, default=26.72)
    g.add_argument("--mu-mb", type=_positive, default=5.0)
    g.add_argument("--capacity-mbps", type=_positive, default=10.0)
    g.add_argument("--grid", type=_grid, help="ROWSxCOLS (default: squarest factorization of --photos)")
    g.add_argument("--sigma", type=int, default=1)
    g.add_argument("--t-hat", type=_t_hat)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output path (default stdout)")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="run a manifest of instances and write a CSV table", parents=[common])
    b.add_argument("manifest")
    b.add_argument("--runs", type=int)
    b.add_argument("--time-limit-s", type=_positive)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--sweep", action="store_true", help="sensitivity sweep over T-hat in 1 s steps")
    b.add_argument("--no-timing", action="store_true", help="leave the time column empty (byte-stable output)")
    b.add_argument("--out", help="CSV path (default stdout)")
    b.set_defaults(func=cmd_bench)

    e = sub.add_parser("export", help="write the region-based MILP in LP format", parents=[common])
    instance_args(e)
    e.add_argument("--interval", type=_interval, help="restrict candidates to cardinalities LO,HI")
    e.add_argument("--per-drone-coverage", action="store_true", help="require at least one region per capable drone")
    e.add_argument("--catalog-csv", help="also dump the rectangle catalog")
    e.add_argument("--out", help="LP path (default stdout)")
    e.set_defaults(func=cmd_export)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InstanceError, oracle.TooLarge, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
