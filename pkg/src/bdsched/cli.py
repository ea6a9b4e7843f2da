"""Command-line driver.

Every output file starts with a ``config`` record holding the full
configuration and seed, so re-running that configuration reproduces the
file byte for byte.

Exit codes: 0 success, 1 usage error, 2 input error, 3 audit violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import secrets
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import adversary as adv
from . import harness
from .mixr import ALGORITHMS, make_algorithm
from .model import ContractError, Trace, TraceFormatError
from .offline import opt_schedule

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_AUDIT = 0, 1, 2, 3
DEFAULT_T = 100_000


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    command: str
    alg: str = "mixr"
    adversary: str | None = None
    gen: str | None = None
    trace: str | None = None
    T: int | None = None
    runs: int = 1
    seed: int | None = None
    format: str = "jsonl"
    out: str | None = None
    N: list[int] = field(default_factory=list)
    perturb: float = 0.0

    def __post_init__(self):
        if self.runs < 1:
            raise UsageError("--runs must be at least 1")
        if self.T is not None and self.T < 0:
            raise UsageError("--T must be non-negative")
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit value")

    def record(self) -> dict:
        d = asdict(self)
        d.pop("out")
        if not d["N"]:
            d.pop("N")
        if not d["perturb"]:
            d.pop("perturb")
        d["rng"] = harness.RNG_NAME
        return {"type": "config", **d}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alg", default="mixr", choices=sorted(ALGORITHMS))
    common.add_argument("--adversary", help="geometric:n=<int>[,a=<float>][,k=<int|auto>][,mode=queue|packet]")
    common.add_argument("--gen", help="{suniform|sbounded|twoweight|agreeable}:s=..,steps=..,rate=..,wmin=..,wmax=..")
    common.add_argument("--trace", help="trace file (line-delimited JSON)")
    common.add_argument("--T", type=int, default=None, help="steps for adaptive games")
    common.add_argument("--runs", type=int, default=1)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    common.add_argument("--out", help="output path (default: stdout)")

    parser = _Parser(prog="bdsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("run", parents=[common], help="one game; per-step transcript")
    sub.add_parser("ratio", parents=[common], help="competitive ratio over independent runs")
    v = sub.add_parser("verify", parents=[common], help="audit every step; exit 3 on violation")
    v.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    lb = sub.add_parser("lowerbound", parents=[common], help="geometric adversary sweep over N")
    lb.add_argument("--N", type=int, nargs="+", default=[2, 3, 5, 10])
    sub.add_parser("opt", parents=[common], help="offline optimum schedule of a trace")
    sub.add_parser("gen", parents=[common], help="write a generated trace")
    return parser


def _opponent(cfg: ExperimentConfig):
    given = [x for x in (cfg.adversary, cfg.gen, cfg.trace) if x]
    if len(given) != 1:
        raise UsageError("give exactly one of --adversary, --gen, --trace")
    if cfg.adversary:
        strategy = adv.parse_adversary(cfg.adversary)
        return lambda seed: adv.GeometricQueueStrategy(
            strategy.n, strategy.a, strategy.k_spec, strategy.mode
        )
    if cfg.gen:
        return adv.parse_generator(cfg.gen)
    return Trace.load(cfg.trace)


def _step_record(rec: adv.StepRecord) -> dict:
    chain = rec.chain
    return {
        "type": "step",
        "t": rec.t,
        "alg_id": rec.alg_packet.id if rec.alg_packet else None,
        "alg_w": rec.alg_gain,
        "opp_id": rec.adv_packet.id if rec.adv_packet else None,
        "opp_w": rec.adv_gain,
        "m": chain.m if chain else 0,
        "n": chain.support if chain else 0,
        "f": rec.f,
        "z": rec.z,
    }


def cmd_run(cfg: ExperimentConfig):
    opponent = _opponent(cfg)
    game = harness.run_once(cfg.alg, opponent, cfg.T or DEFAULT_T, cfg.seed, record=True)
    yield from (_step_record(r) for r in game.records)
    opp_key = "G_ADV" if cfg.adversary else "G_OPT"
    yield {
        "type": "gains",
        "alg": cfg.alg,
        "G_ALG": game.alg_gain,
        opp_key: game.adv_gain,
        "drain_alg": game.alg_drain,
        "drain_opp": game.adv_drain,
        "track_N": game.max_support,
    }


def cmd_ratio(cfg: ExperimentConfig):
    est = harness.estimate_ratio(cfg.alg, _opponent(cfg), cfg.runs, cfg.T or DEFAULT_T, cfg.seed)
    for r in est.runs:
        yield {"type": "run", **asdict(r)}
    yield {"type": "ratio", "alg": cfg.alg, **est.as_dict()}


def cmd_verify(cfg: ExperimentConfig):
    opponent = _opponent(cfg)
    total = 0
    for i in range(cfg.runs):
        seed = cfg.seed + i
        auditor = harness.Auditor(perturb=cfg.perturb)
        referee = harness.SyncReferee()
        mismatch = None
        try:
            harness.run_once(cfg.alg, opponent, cfg.T or DEFAULT_T, seed, [auditor, referee])
        except harness.BufferMismatch as exc:
            mismatch = str(exc)
        for t, msg in auditor.violations:
            yield {"type": "violation", "seed": seed, "t": t, "detail": msg}
        if mismatch:
            yield {"type": "violation", "seed": seed, "t": None, "detail": mismatch}
        n_bad = auditor.violation_count + (mismatch is not None)
        total += n_bad
        yield {
            "type": "audit",
            "seed": seed,
            "steps": auditor.steps,
            "violations": n_bad,
            "worst_step_ratio": auditor.worst_ratio,
            "referee_steps": referee.steps,
            "referee_gain": referee.amortized,
            "referee_expected": referee.expected,
            "referee_sigma": referee.sigma,
        }
    yield {"type": "summary", "violations": total}


def cmd_lowerbound(cfg: ExperimentConfig):
    T = cfg.T or DEFAULT_T
    for i, N in enumerate(cfg.N):
        if N < 2:
            raise UsageError("--N values must be at least 2")
        est = harness.estimate_ratio(
            cfg.alg, harness.geometric_opponent(N - 1, k="auto"), cfg.runs, T, cfg.seed + i * cfg.runs
        )
        yield {
            "type": "lowerbound",
            "N": N,
            "empirical": est.ratio,
            "stderr": est.stderr,
            "analytic": harness.ratio_bound(N),
            "track_N": est.track_N,
            "seeds": est.seeds,
        }


def cmd_opt(cfg: ExperimentConfig):
    if not cfg.trace:
        raise UsageError("opt needs --trace")
    sched = opt_schedule(Trace.load(cfg.trace))
    for t in sorted(sched.assignments):
        p = sched.assignments[t]
        yield {"t": t, "id": str(p.id), "w": p.weight}
    yield {"gain": sched.gain}


def cmd_gen(cfg: ExperimentConfig):
    if not cfg.gen:
        raise UsageError("gen needs --gen")
    spec = adv.parse_generator(cfg.gen)
    trace = spec(harness.make_rng(cfg.seed))
    for t, arrivals in trace.steps:
        yield {"t": t, "inject": [{"w": w, "l": l} for w, l in arrivals]}


COMMANDS = {
    "run": cmd_run,
    "ratio": cmd_ratio,
    "verify": cmd_verify,
    "lowerbound": cmd_lowerbound,
    "opt": cmd_opt,
    "gen": cmd_gen,
}
# these emit a file format of their own and carry no config header
RAW_OUTPUT = {"opt", "gen"}


def _flatten(rec: dict) -> dict:
    return {k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in rec.items()}


def write_records(records, fmt: str, stream) -> None:
    if fmt == "jsonl":
        for rec in records:
            stream.write(json.dumps(rec) + "\n")
        return
    rows = [_flatten(r) for r in records]
    fields: dict[str, None] = {}
    for r in rows:
        fields.update(dict.fromkeys(r))
    writer = csv.DictWriter(stream, fieldnames=list(fields), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig(
            command=args.command,
            alg=args.alg,
            adversary=args.adversary,
            gen=args.gen,
            trace=args.trace,
            T=args.T,
            runs=args.runs,
            seed=args.seed,
            format=args.format,
            out=args.out,
            N=getattr(args, "N", []),
            perturb=getattr(args, "perturb", 0.0),
        )
    except UsageError as exc:
        print(f"bdsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.seed is None and cfg.command != "opt":
        cfg.seed = secrets.randbits(63)
        print(f"bdsched: using random seed {cfg.seed}", file=sys.stderr)

    buf = io.StringIO()
    try:
        records = list(COMMANDS[cfg.command](cfg))
    except UsageError as exc:
        print(f"bdsched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TraceFormatError as exc:
        print(f"bdsched: {cfg.trace}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ContractError, OSError) as exc:
        print(f"bdsched: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if cfg.command not in RAW_OUTPUT:
        records.insert(0, cfg.record())
    write_records(records, "jsonl" if cfg.command in RAW_OUTPUT else cfg.format, buf)
    if cfg.out:
        Path(cfg.out).write_text(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    if cfg.command == "verify":
        summary = records[-1]
        print(f"verify: {summary['violations']} violation(s)", file=sys.stderr)
        if summary["violations"]:
            return EXIT_AUDIT
    if cfg.command == "ratio":
        r = records[-1]
        print(f"ratio {r['ratio']:.6f} +/- {r['stderr']:.6f} (track_N={r['track_N']}, bound={r['ratio_bound']})", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
