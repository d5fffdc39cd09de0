"""Command-line driver.

Exit codes: 0 success, 2 precondition violation, 3 privacy budget exhausted,
4 encrypted/oracle equivalence failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .bench import (ACCURACY_FIELDS, GATE_FIELDS, STUDY_FORMATS, accuracy_rows, accuracy_study,
                    bench_gates, verify_equivalence, write_csv)
from .config import PipelineConfig, random_histogram
from .fixed import FixedFormat, FixedOverflowError
from .gates import DEFAULT_GATE_SECONDS
from .noise import BudgetExhausted, BudgetLedger, PrivacyBudget
from .partition import DomainTooLarge
from .protocol import assert_visibility, run_pipeline

EXIT_OK, EXIT_PRECONDITION, EXIT_BUDGET, EXIT_EQUIVALENCE = 0, 2, 3, 4

log = logging.getLogger("dpsummary")


def parse_range(text: str) -> list[int]:
    """``"5"`` -> [5]; ``"2-8"`` -> [2..8]; ``"2,4,6"`` -> [2, 4, 6]."""
    out: list[int] = []
    for part in text.split(","):
        lo, sep, hi = part.partition("-")
        out.extend(range(int(lo), int(hi) + 1) if sep else [int(lo)])
    return out


def parse_split(text: str) -> tuple[float, float]:
    a, _, b = text.partition(":")
    return float(a), float(b)


def parse_query(text: str) -> tuple[int, int]:
    l, _, r = text.partition(":")
    return int(l), int(r or l)


def _formats(args) -> list[FixedFormat]:
    return [FixedFormat.parse(f) for f in args.format] if args.format else list(STUDY_FORMATS)


def _write_sidecar(out: Path, args, command: str) -> None:
    meta = {k: v for k, v in vars(args).items() if k != "func"}
    meta["command"] = command
    out.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def cmd_gen_data(args) -> int:
    if args.n < 1:
        raise ValueError("--n must be at least 1")
    x = random_histogram(args.n, args.seed)
    body = json.dumps({"n": args.n, "seed": args.seed, "histogram": list(x)}) + "\n"
    if args.out:
        Path(args.out).write_text(body)
    else:
        sys.stdout.write(body)
    return EXIT_OK


def _load_ledger(path: Path | None) -> BudgetLedger:
    ledger = BudgetLedger()
    if path is not None and path.exists():
        for entry in json.loads(path.read_text()):
            ledger.spend(entry["dataset_id"],
                         PrivacyBudget(entry["epsilon"], entry["epsilon1"], entry["epsilon2"]))
    return ledger


def _save_ledger(path: Path | None, ledger: BudgetLedger) -> None:
    if path is None:
        return
    entries = [{"dataset_id": k, "epsilon": b.epsilon, "epsilon1": b.epsilon1, "epsilon2": b.epsilon2}
               for k, b in sorted(ledger.spent().items())]
    path.write_text(json.dumps(entries, indent=2) + "\n")


def _run_config(args) -> PipelineConfig:
    data: dict = {}
    if args.config:
        data = json.loads(Path(args.config).read_text())
    if args.data:
        src = json.loads(Path(args.data).read_text())
        for key in ("histogram", "records"):
            if key in src:
                data[key] = src[key]
        if "n" in src:
            data["n"] = src["n"]
    if args.n is not None:
        data["n"] = args.n
    if args.format:
        data["format"] = args.format[0]
    if args.epsilon is not None:
        data["epsilon"] = args.epsilon
    if args.split is not None:
        data["split"] = list(parse_split(args.split))
    if args.seed is not None:
        data["seed"] = args.seed
    if args.inject:
        data["inject_histogram"] = True
    if args.query:
        data["queries"] = [list(parse_query(q)) for q in args.query]
    return PipelineConfig.from_dict(data)


def cmd_run(args) -> int:
    cfg = _run_config(args)
    ledger_path = Path(args.ledger) if args.ledger else None
    ledger = _load_ledger(ledger_path)
    run = run_pipeline(cfg, ledger=ledger)
    _save_ledger(ledger_path, ledger)
    report = assert_visibility(run.transcript)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(run.summary.to_json() + "\n")
    run.transcript.write(out / "transcript.jsonl")
    run.noise_log.write(out / "noise.tsv")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    answers = {f"{l}:{r}": v for da in run.analysts for (l, r), v in da.answers.items()}
    print(json.dumps({"cut_mask": run.summary.cut_mask, "partition": str(run.summary.partition),
                      "x_prime": list(run.summary.x_prime), "answers": answers,
                      "visibility_ok": report.ok, "gates": run.backend.stats.total}))
    return EXIT_OK if report.ok else EXIT_EQUIVALENCE


def cmd_bench_gates(args) -> int:
    rows = bench_gates(parse_range(args.n), _formats(args), seed=args.seed,
                       records_per_domain=args.records_per_domain, unit_cost=args.unit_cost)
    out = Path(args.out)
    write_csv(rows, GATE_FIELDS, out)
    _write_sidecar(out, args, "bench-gates")
    return EXIT_OK


def cmd_accuracy(args) -> int:
    cells = accuracy_study(parse_range(args.n), _formats(args), trials=args.trials,
                           epsilon=args.epsilon, split=parse_split(args.split), seed=args.seed)
    out = Path(args.out)
    write_csv(accuracy_rows(cells), ACCURACY_FIELDS, out)
    _write_sidecar(out, args, "accuracy")
    return EXIT_OK


def cmd_verify(args) -> int:
    checked, bad = verify_equivalence(parse_range(args.n), _formats(args),
                                      histograms=args.trials, seed=args.seed)
    for m in bad:
        print(f"MISMATCH n={m.n} fmt={m.fmt} seed={m.seed}: encrypted={m.encrypted} oracle={m.oracle}")
    print(f"{checked - len(bad)}/{checked} cases bit-identical")
    return EXIT_EQUIVALENCE if bad else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dpsummary", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="random histogram with counts in 0..10")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="full protocol run; writes summary, transcript and noise log")
    r.add_argument("--config", help="pipeline config JSON")
    r.add_argument("--data", help="JSON file with a 'histogram' or 'records' list")
    r.add_argument("--n", type=int)
    r.add_argument("--format", action="append", help="T:F (first one is used)")
    r.add_argument("--epsilon", type=float)
    r.add_argument("--split", help="epsilon1:epsilon2 ratio, e.g. 1:3")
    r.add_argument("--seed", type=int)
    r.add_argument("--inject", action="store_true", help="submit the histogram as one pre-aggregated record")
    r.add_argument("--query", action="append", help="range query l:r (repeatable)")
    r.add_argument("--ledger", help="JSON file recording spent budgets across runs")
    r.add_argument("--out", default="run-out")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench-gates", help="gate counts per phase vs. domain size and bit size")
    b.add_argument("--n", default="2-8")
    b.add_argument("--format", action="append")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--records-per-domain", type=int, default=5)
    b.add_argument("--unit-cost", type=float, default=DEFAULT_GATE_SECONDS, help="seconds per gate")
    b.add_argument("--out", default="bench_gates.csv")
    b.set_defaults(func=cmd_bench_gates)

    a = sub.add_parser("accuracy", help="summary error vs. bit size, with a float64 baseline")
    a.add_argument("--n", default="2-10")
    a.add_argument("--format", action="append")
    a.add_argument("--epsilon", type=float, default=1.0)
    a.add_argument("--split", default="1:3")
    a.add_argument("--trials", type=int, default=100)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default="accuracy.csv")
    a.set_defaults(func=cmd_accuracy)

    v = sub.add_parser("verify", help="encrypted pipeline vs. fixed-point oracle, bit for bit")
    v.add_argument("--n", default="2-6")
    v.add_argument("--format", action="append")
    v.add_argument("--trials", type=int, default=10, help="random histograms per (n, format)")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BudgetExhausted as e:
        log.error("%s", e)
        return EXIT_BUDGET
    except (ValueError, DomainTooLarge, FixedOverflowError) as e:
        log.error("%s", e)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
