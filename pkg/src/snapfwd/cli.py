"""``snapfwd`` command line: run, sweep, check and report.

Exit codes: 0 pass, 1 violation, 2 budget exceeded, 64 usage or scenario
error. Output goes under ``--out-dir`` (default ``$SNAPFWD_OUT_DIR`` or
``./snapfwd-out``), one directory per scenario and seed.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .kernel import StepRecord, run
from .scenario import Scenario, ScenarioError, bundled
from .verifier import (Auditor, ReplayMismatch, StateBudgetExceeded, audit, corruption_family, explore,
                       invalid_delivery_bound)

EXIT_PASS, EXIT_VIOLATION, EXIT_BUDGET, EXIT_USAGE = 0, 1, 2, 64
CSV_COLUMNS = ["ghost_id", "valid", "generated_step", "delivered_step", "rounds_to_delivery", "destination"]
EXPLORE_MAX_N = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


class TraceWriter:
    """Observer streaming step records as JSON lines."""

    def __init__(self, fh):
        self.fh = fh

    def on_step(self, rec, pre, post, round_index):
        self.fh.write(json.dumps(rec.to_json(), separators=(",", ":")) + "\n")


def out_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get("SNAPFWD_OUT_DIR") or "snapfwd-out")


def resolve_scenario(arg: str) -> Path:
    path = Path(arg)
    if path.exists():
        return path
    if "/" not in arg and not arg.endswith((".yaml", ".yml")):
        return bundled(arg)
    return path


def parse_seeds(text: str) -> range:
    """``N`` (seeds 0..N-1), ``A:B`` (half-open) or ``A-B`` (inclusive)."""
    try:
        if ":" in text:
            a, b = text.split(":", 1)
            seeds = range(int(a), int(b))
        elif "-" in text.strip("-"):
            a, b = text.split("-", 1)
            seeds = range(int(a), int(b) + 1)
        else:
            seeds = range(int(text))
    except ValueError:
        raise UsageError(f"bad seed range {text!r} (use N, A:B or A-B)") from None
    if len(seeds) == 0 or seeds.start < 0:
        raise UsageError(f"seed range {text!r} is empty or negative")
    return seeds


def load(args) -> Scenario:
    scen = Scenario.load(resolve_scenario(args.scenario))
    return scen.with_overrides(
        protocol=getattr(args, "protocol_override", None),
        mutants=getattr(args, "mutant", None) or (),
        max_steps=getattr(args, "max_steps", None),
        max_rounds=getattr(args, "max_rounds", None),
        depth=getattr(args, "depth", None),
    )


# -- single runs ------------------------------------------------------------------


def execute(scen: Scenario, seed: int, out_dir: Path | None):
    """Run and audit one seed; returns ``(report, trace)``. Writes trace,
    metrics and summary under ``out_dir`` when given."""
    topo, proto, sim, c0 = scen.initial(seed)
    context = {"scenario": scen.source, "seed": seed}
    auditor = Auditor(sim, c0, context=context, **scen.audit_options(topo))
    budgets = scen.budgets
    observers = [auditor]
    fh = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        fh = open(out_dir / "trace.jsonl", "w")
        observers.append(TraceWriter(fh))
    try:
        trace = run(sim, c0, scen.daemon(topo, seed), max_steps=budgets["max_steps"],
                    max_rounds=budgets["max_rounds"], observers=observers, keep=False)
    finally:
        if fh:
            fh.close()
    report = auditor.finish(trace.status, trace.steps, trace.rounds)
    report.metrics.update({"seed": seed, "n": topo.n, "diameter": topo.diameter, "protocol": proto.name,
                           "invalid_bound": invalid_delivery_bound(proto, topo),
                           "initial_digest": c0.digest(), "final_digest": trace.final.digest()})
    if out_dir is not None:
        write_metrics(report, out_dir)
    return report, trace


def exit_code(report) -> int:
    if not report.verdict.ok:
        return EXIT_VIOLATION
    if report.metrics["status"] == "budget-exceeded":
        return EXIT_BUDGET
    return EXIT_PASS


def summary_text(report) -> str:
    m = report.metrics
    lines = [f"verdict: {report.verdict}"]
    if report.verdict.witness:
        lines.append("witness: " + json.dumps(report.verdict.witness, sort_keys=True))
    for key in ("protocol", "seed", "n", "diameter", "status", "steps", "rounds", "routing_silence_round",
                "valid_generated", "valid_delivered", "invalid_deliveries", "invalid_per_destination",
                "max_invalid_per_destination", "invalid_bound", "max_rounds_to_delivery", "delivery_budget",
                "amortized_rounds_per_delivery", "max_delivery_gap", "max_delivery_gap_per_destination",
                "initial_digest", "final_digest"):
        if key in m:
            value = m[key]
            if isinstance(value, float):
                value = f"{value:.3f}"
            lines.append(f"{key}: {value}")
    return "\n".join(lines) + "\n"


def write_metrics(report, out_dir: Path) -> None:
    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, CSV_COLUMNS)
        w.writeheader()
        for row in report.rows():
            w.writerow({k: "" if v is None else v for k, v in row.items()})
    (out_dir / "summary.txt").write_text(summary_text(report))


def cmd_run(args) -> int:
    scen = load(args)
    seed = scen.seed if args.seed is None else args.seed
    out_dir = out_root(args.out_dir) / scen.name / f"seed-{seed}"
    report, _ = execute(scen, seed, out_dir)
    print(summary_text(report), end="")
    print(f"output: {out_dir}")
    return exit_code(report)


# -- sweeps -----------------------------------------------------------------------


def _sweep_one(job):
    scen_data, source, seed, out_dir = job
    scen = Scenario(scen_data, source)
    report, _ = execute(scen, seed, Path(out_dir) if out_dir else None)
    m = report.metrics
    return {
        "seed": seed,
        "n": m["n"],
        "status": m["status"],
        "verdict": report.verdict.outcome,
        "kind": report.verdict.kind or "",
        "detail": report.verdict.detail,
        "steps": m["steps"],
        "rounds": m["rounds"],
        "routing_silence_round": m["routing_silence_round"],
        "valid_generated": m["valid_generated"],
        "valid_delivered": m["valid_delivered"],
        "invalid_deliveries": m["invalid_deliveries"],
        "max_invalid_per_destination": m["max_invalid_per_destination"],
        "invalid_bound": m["invalid_bound"],
        "max_rounds_to_delivery": m["max_rounds_to_delivery"],
        "monitor_checks": m["monitor_checks"],
        "code": exit_code(report),
    }


def sweep(scen: Scenario, seeds, *, jobs: int = 1, traces_dir: Path | None = None) -> list[dict]:
    work = [(scen.data, scen.source, s, str(traces_dir / f"seed-{s}") if traces_dir else None) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_sweep_one, work, chunksize=16))
    return [_sweep_one(job) for job in work]


def cmd_sweep(args) -> int:
    scen = load(args)
    seeds = parse_seeds(args.seeds)
    root = out_root(args.out_dir) / scen.name
    root.mkdir(parents=True, exist_ok=True)
    rows = sweep(scen, seeds, jobs=args.jobs, traces_dir=root if args.traces else None)
    with open(root / "sweep.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    failed = [r for r in rows if r["code"] == EXIT_VIOLATION]
    budget = [r for r in rows if r["code"] == EXIT_BUDGET]
    worst = max(rows, key=lambda r: (r["max_invalid_per_destination"] / max(r["invalid_bound"], 1), r["seed"]))
    bound_name = "2n" if scen.protocol_name == "ssmfp1" else "n(D+1)"
    text = [
        f"scenario: {scen.source}",
        f"protocol: {scen.protocol_name}",
        f"seeds: {seeds.start}..{seeds.stop - 1} ({len(rows)} runs)",
        f"violations: {len(failed)}",
        f"budget exceeded: {len(budget)}",
        f"valid generated: {sum(r['valid_generated'] for r in rows)}",
        f"valid delivered: {sum(r['valid_delivered'] for r in rows)}",
        f"invalid deliveries: {sum(r['invalid_deliveries'] for r in rows)}",
        "max invalid deliveries per destination: "
        f"{max(r['max_invalid_per_destination'] for r in rows)}",
        f"closest to the {bound_name} bound: seed {worst['seed']}, "
        f"{worst['max_invalid_per_destination']} of {worst['invalid_bound']} (n = {worst['n']})",
        f"max rounds to delivery: {max((r['max_rounds_to_delivery'] or 0) for r in rows)}",
        f"max routing silence round: {max((r['routing_silence_round'] or 0) for r in rows)}",
    ]
    for r in failed[:10]:
        text.append(f"  seed {r['seed']}: {r['kind']}: {r['detail']}")
    (root / "summary.txt").write_text("\n".join(text) + "\n")
    print("\n".join(text))
    print(f"output: {root}")
    if failed:
        return EXIT_VIOLATION
    return EXIT_BUDGET if budget else EXIT_PASS


# -- exhaustive check ---------------------------------------------------------------


def check(scen: Scenario):
    topo, proto, sim, _ = scen.initial(scen.seed)
    if topo.n > EXPLORE_MAX_N:
        raise UsageError(f"exhaustive check needs n <= {EXPLORE_MAX_N}, scenario has n = {topo.n}")
    workload = scen.workload(topo, scen.seed)
    initials = corruption_family(topo, proto, workload, scen.family)
    b = scen.budgets
    return explore(sim, initials, b["depth"], state_budget=b["state_budget"],
                   context={"scenario": scen.source, "seed": scen.seed})


def cmd_check(args) -> int:
    scen = load(args)
    try:
        result = check(scen)
    except StateBudgetExceeded as exc:
        print(f"budget exceeded: {exc}")
        return EXIT_BUDGET
    print(f"verdict: {result.verdict}")
    print(f"initial configurations: {result.initials}")
    print(f"states: {result.states}")
    print(f"transitions: {result.transitions}")
    print(f"deepest level: {result.depth}")
    if not result.verdict.ok:
        root = out_root(args.out_dir) / scen.name
        root.mkdir(parents=True, exist_ok=True)
        (root / "witness.json").write_text(json.dumps(result.verdict.witness, indent=1) + "\n")
        print(f"witness ({len(result.path)} steps from initial configuration {result.initial_index}):")
        for j, sel in enumerate(result.path, 1):
            print(f"  {j}: " + ", ".join(f"{i.proc}:{i.rule}{list(i.params) if i.params else ''}" for i in sel))
        print(f"output: {root / 'witness.json'}")
        return EXIT_VIOLATION
    return EXIT_PASS


# -- offline report -------------------------------------------------------------------


def cmd_report(args) -> int:
    scen = load(args)
    seed = scen.seed if args.seed is None else args.seed
    topo, proto, sim, c0 = scen.initial(seed)
    records = []
    with open(args.trace) as fh:
        for line in fh:
            if line.strip():
                records.append(StepRecord.from_json(json.loads(line)))
    status = "terminal" if not sim.enabled(_final(sim, c0, records)) else "stopped"
    try:
        report = audit(sim, c0, records, status, context={"scenario": scen.source, "seed": seed},
                       **scen.audit_options(topo))
    except ReplayMismatch as exc:
        print(f"trace does not replay: {exc}")
        return EXIT_VIOLATION
    report.metrics.update({"seed": seed, "n": topo.n, "diameter": topo.diameter, "protocol": proto.name})
    print(summary_text(report), end="")
    if args.out_dir:
        out = out_root(args.out_dir) / scen.name / f"report-{seed}"
        out.mkdir(parents=True, exist_ok=True)
        write_metrics(report, out)
        print(f"output: {out}")
    return EXIT_VIOLATION if not report.verdict.ok else EXIT_PASS


def _final(sim, c0, records):
    from .kernel import StaleGuard, settle

    cfg, _ = settle(c0)
    for rec in records:
        try:
            cfg, _, _ = sim.step(cfg, rec.chosen)
        except StaleGuard:
            return cfg
    return cfg


# -- entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="snapfwd", description="Simulate and verify snap-stabilizing message forwarding.")
    parser.add_argument("--version", action="version", version=f"snapfwd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seeds=False):
        p.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
        p.add_argument("--protocol-override", choices=["ssmfp1", "ssmfp2"])
        p.add_argument("--mutant", action="append", metavar="RULE:CLAUSE", help="enable a mutant rule (repeatable)")
        p.add_argument("--out-dir", help="output root (default $SNAPFWD_OUT_DIR or ./snapfwd-out)")
        if seeds:
            p.add_argument("--max-steps", type=int)
            p.add_argument("--max-rounds", type=int)

    p = sub.add_parser("run", help="run and audit one seed")
    common(p, seeds=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run and audit a range of seeds")
    common(p, seeds=True)
    p.add_argument("--seeds", required=True, help="N, A:B (half-open) or A-B (inclusive)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--traces", action="store_true", help="also write per-seed traces and metrics")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("check", help="exhaustive exploration on a tiny network")
    common(p)
    p.add_argument("--depth", type=int)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("report", help="replay a recorded trace and audit it offline")
    common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"snapfwd: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
