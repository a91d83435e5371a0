"""Command-line front end: ``uuidp exact | simulate | sweep | verify``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from decimal import Decimal, localcontext
from fractions import Fraction
from pathlib import Path

from . import __version__
from .acceptance import CRITERIA, DEFAULT_TRIALS, run_criterion
from .errors import UUIDPError
from .game import ClusterKiller, Oblivious, SemiAdaptiveFollower, parse_adversary
from .generators import AlgorithmKind, ChunkGeometry
from .montecarlo import MAX_UNCLAMPED_P, estimate_collision, fit_scaling
from .oracles import (
    bins_exact,
    bins_star_exact,
    brute_force_collision,
    cluster_exact,
    cluster_pairwise,
    cluster_star_exact,
    random_exact,
)
from .profiles import format_profile, l1_norm, l2_norm_sq, parse_profile

log = logging.getLogger("uuidp")

SEED_ENV = "UUIDP_SEED"
CSV_COLUMNS = ("algorithm", "m", "n", "d", "profile", "adversary", "trials", "p_hat", "ci_low", "ci_high", "seed")
SUMMARY_COLUMNS = ("algorithm", "m", "predictor", "points", "slope", "band_low", "band_high")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    """Everything needed to rerun a simulate or sweep invocation."""

    algorithms: list[str] = field(default_factory=list)
    m: list[int] = field(default_factory=list)
    adversaries: list[str] = field(default_factory=list)
    family: dict = field(default_factory=dict)
    trials: int = DEFAULT_TRIALS
    seed: int | None = None
    output: str | None = None
    workers: int = 1

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> ExperimentConfig:
        data = json.loads(text)
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**data)
        cfg.algorithms = [str(a) for a in _as_list(cfg.algorithms)]
        cfg.m = [parse_m(x) for x in _as_list(cfg.m)]
        cfg.adversaries = [str(a) for a in _as_list(cfg.adversaries)]
        return cfg

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]


def _as_list(x) -> list:
    return list(x) if isinstance(x, (list, tuple)) else [x]


def parse_m(text) -> int:
    """``1048576``, ``2^20`` or ``2**20``."""
    if isinstance(text, int):
        value = text
    else:
        s = str(text).strip().replace("**", "^")
        try:
            if "^" in s:
                base, exp = s.split("^")
                value = int(base) ** int(exp)
            else:
                value = int(s, 0)
        except ValueError:
            raise UsageError(f"bad universe size {text!r}") from None
    if value < 1:
        raise UsageError("m must be >= 1")
    return value


def parse_seed(text) -> int:
    try:
        value = int(str(text), 0)
    except ValueError:
        raise UsageError(f"bad seed {text!r}") from None
    if not 0 <= value < 1 << 64:
        raise UsageError("seed must be a 64-bit unsigned integer")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


# ---------------------------------------------------------------------------
# exact
# ---------------------------------------------------------------------------


def exact_probability(kind: AlgorithmKind, profile, m: int) -> Fraction:
    if kind.name == "random":
        return random_exact(profile, m)
    if kind.name == "cluster":
        if len(profile) == 2 and sum(profile) - 1 <= m:
            return cluster_pairwise(*profile, m)
        return cluster_exact(profile, m)
    if kind.name == "bins":
        return bins_exact(profile, kind.k, m)
    if kind.name == "binsstar":
        return bins_star_exact(profile, ChunkGeometry.for_universe(m, kind.chunks), m)
    return cluster_star_exact(profile, m)


def format_decimal(p: Fraction) -> str:
    with localcontext() as ctx:
        ctx.prec = 12
        return str(Decimal(p.numerator) / Decimal(p.denominator))


def cmd_exact(args) -> int:
    kind = AlgorithmKind.parse(args.algorithm)
    profile = parse_profile(args.profile)
    m = parse_m(args.m)
    p = brute_force_collision(kind, profile, m) if args.brute_force else exact_probability(kind, profile, m)
    print(p)
    print(format_decimal(p))
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate / sweep
# ---------------------------------------------------------------------------


def describe_adversary(adversary) -> tuple[int, int, str]:
    """Nominal ``(n, d, profile)`` columns for a CSV row."""
    if isinstance(adversary, Oblivious):
        prof = adversary.profile
        return len(prof), l1_norm(prof), format_profile(prof)
    if isinstance(adversary, ClusterKiller):
        return adversary.n, adversary.d, ""
    if isinstance(adversary, SemiAdaptiveFollower):
        last = adversary.sequence[-1]
        return len(last), l1_norm(last), format_profile(last)
    return 0, 0, ""


def _row(kind: AlgorithmKind, m: int, spec: str, adversary, est) -> dict:
    n, d, prof = describe_adversary(adversary)
    return {
        "algorithm": str(kind),
        "m": m,
        "n": n,
        "d": d,
        "profile": prof,
        "adversary": spec,
        "trials": est.trials,
        "p_hat": repr(est.p_hat),
        "ci_low": repr(est.ci_low),
        "ci_high": repr(est.ci_high),
        "seed": est.master_seed,
    }


class CsvSink:
    """Writes rows to stdout or appends them to a file, keeping the header fixed."""

    def __init__(self, path: str | None, columns=CSV_COLUMNS):
        self.path = path
        self.columns = columns
        self.buffer = io.StringIO()
        self.writer = csv.DictWriter(self.buffer, fieldnames=columns, lineterminator="\n")
        self.needs_header = True
        if path and Path(path).exists() and Path(path).stat().st_size:
            with open(path, newline="") as fh:
                header = next(csv.reader(fh), None)
            if tuple(header or ()) != tuple(columns):
                raise UsageError(f"{path} has a different CSV header; refusing to append")
            self.needs_header = False

    def write(self, rows) -> None:
        if self.needs_header:
            self.writer.writeheader()
        self.writer.writerows(rows)
        text = self.buffer.getvalue()
        if self.path:
            with open(self.path, "a", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()


def resolve_seed(value, required: bool) -> int:
    if value is not None:
        return parse_seed(value)
    env = os.environ.get(SEED_ENV)
    if env:
        return parse_seed(env)
    if required:
        raise UsageError(f"a master seed is required: pass --seed or set {SEED_ENV}")
    return 0


def load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        try:
            cfg = ExperimentConfig.from_json(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
    # flags override file values
    if args.algorithm:
        cfg.algorithms = list(args.algorithm)
    if args.m:
        cfg.m = [parse_m(x) for x in args.m]
    if getattr(args, "adversary", None):
        cfg.adversaries = list(args.adversary)
    if args.trials is not None:
        cfg.trials = args.trials
    if args.output is not None:
        cfg.output = args.output
    if args.workers is not None:
        cfg.workers = args.workers
    cfg.seed = resolve_seed(args.seed if args.seed is not None else cfg.seed, required=False)
    if cfg.trials < 1:
        raise UsageError("trials must be >= 1")
    if not cfg.algorithms or not cfg.m:
        raise UsageError("need at least one --algorithm and one --m")
    return cfg


def _log_run(cfg: ExperimentConfig) -> None:
    log.info("version=%s config=%s seed=%d %s", __version__, cfg.digest(), cfg.seed, cfg.to_json())


def cmd_simulate(args) -> int:
    cfg = load_config(args)
    if not cfg.adversaries:
        raise UsageError("need at least one --adversary")
    _log_run(cfg)
    sink = CsvSink(cfg.output)
    rows = []
    for alg in cfg.algorithms:
        kind = AlgorithmKind.parse(alg)
        for m in cfg.m:
            for spec in cfg.adversaries:
                adversary = parse_adversary(spec)
                est = estimate_collision(kind, m, adversary, cfg.trials, cfg.seed, workers=cfg.workers)
                rows.append(_row(kind, m, spec, adversary, est))
    sink.write(rows)
    return EXIT_OK


def sweep_profiles(family: dict) -> list[tuple[int, ...]]:
    """Grid of profiles: uniform ``(h,)*n`` over an n-list, equal splits of a
    d-list into ``parts`` demands, or an explicit list."""
    kind = family.get("kind")
    if kind == "uniform":
        return [(family["h"],) * n for n in family["n"]]
    if kind == "split":
        parts = family.get("parts", 2)
        out = []
        for d in family["d"]:
            if d % parts:
                raise UsageError(f"d={d} is not divisible into {parts} equal demands")
            out.append((d // parts,) * parts)
        return out
    if kind == "explicit":
        return [parse_profile(p) if isinstance(p, str) else tuple(p) for p in family["profiles"]]
    raise UsageError("sweep needs a profile family (--n-list, --d-list or --profiles)")


PREDICTORS = {
    "cluster": lambda prof, m: len(prof) * l1_norm(prof) / m,
    "random": lambda prof, m: (l1_norm(prof) ** 2 - l2_norm_sq(prof)) / m,
    "clusterstar": lambda prof, m: len(prof) * l1_norm(prof) / m * math.log2(1 + l1_norm(prof) / len(prof)),
}


def _family_from_args(args, cfg: ExperimentConfig) -> dict:
    if args.n_list:
        return {"kind": "uniform", "n": _int_list(args.n_list), "h": args.h}
    if args.d_list:
        return {"kind": "split", "d": _int_list(args.d_list), "parts": args.parts}
    if args.profiles is not None:
        return {"kind": "explicit", "profiles": [p.strip() for p in args.profiles.split(";") if p.strip()]}
    return cfg.family


def cmd_sweep(args) -> int:
    cfg = load_config(args)
    cfg.family = _family_from_args(args, cfg)
    if args.attack:
        cfg.family["attack"] = args.attack
    if args.predictor:
        cfg.family["predictor"] = args.predictor
    profiles = sweep_profiles(cfg.family)
    if not profiles:
        raise UsageError("empty sweep grid")
    attack = cfg.family.get("attack")
    _log_run(cfg)
    rows, summaries = [], []
    for alg in cfg.algorithms:
        kind = AlgorithmKind.parse(alg)
        pname = cfg.family.get("predictor") or kind.name
        if pname not in PREDICTORS:
            raise UsageError(f"no scaling predictor for {kind}; pass --predictor {{{','.join(PREDICTORS)}}}")
        for m in cfg.m:
            points = []
            for prof in profiles:
                pred = PREDICTORS[pname](prof, m)
                if pred > MAX_UNCLAMPED_P:
                    raise UsageError(f"profile {format_profile(prof)} at m={m} is clamped (predictor {pred:.3g})")
                if attack:
                    adversary = ClusterKiller(len(prof), l1_norm(prof), attack)
                else:
                    adversary = Oblivious(prof)
                est = estimate_collision(kind, m, adversary, cfg.trials, cfg.seed, workers=cfg.workers)
                if est.p_hat > MAX_UNCLAMPED_P:
                    raise UsageError(f"profile {format_profile(prof)} at m={m} is clamped (p_hat {est.p_hat:.3g})")
                rows.append(_row(kind, m, str(adversary), adversary, est))
                points.append((pred, est.p_hat))
            if len(points) >= 4 and all(p > 0 for _, p in points):
                fit = fit_scaling(points, trials=cfg.trials)
                summaries.append(
                    dict(zip(SUMMARY_COLUMNS, (str(kind), m, pname, len(points), repr(fit.slope), repr(fit.band_low), repr(fit.band_high))))
                )
            else:
                log.warning("no scaling fit for %s at m=%d: need >= 4 points with p_hat > 0", kind, m)
    CsvSink(cfg.output).write(rows)
    if summaries:
        summary_path = args.summary or (str(Path(cfg.output).with_suffix(".summary.csv")) if cfg.output else None)
        if summary_path:
            CsvSink(summary_path, SUMMARY_COLUMNS).write(summaries)
        else:
            print()
            CsvSink(None, SUMMARY_COLUMNS).write(summaries)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def cmd_verify(args) -> int:
    names = []
    for s in args.suite:
        s = s.upper()
        if s == "ALL":
            names.extend(CRITERIA)
        elif s in CRITERIA:
            names.append(s)
        else:
            raise UsageError(f"unknown suite {s!r}; expected A1..A9 or all")
    seed = resolve_seed(args.seed, required=True)
    trials = args.trials if args.trials is not None else DEFAULT_TRIALS
    if trials < 1:
        raise UsageError("trials must be >= 1")
    log.info("version=%s verify=%s seed=%d trials=%d", __version__, ",".join(names), seed, trials)
    ok = True
    for name in dict.fromkeys(names):
        result = run_criterion(name, seed, trials)
        print(result.line(), flush=True)
        ok &= result.passed
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _experiment_flags(p) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--algorithm", "-a", action="append", help="random, cluster, bins:K, clusterstar, binsstar[:C=c]")
    p.add_argument("--m", action="append", help="universe size, e.g. 1048576 or 2^20 (repeatable)")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", help=f"master seed (default: ${SEED_ENV}, else 0)")
    p.add_argument("--workers", type=int, help="worker processes (results do not depend on this)")
    p.add_argument("--output", "-o", help="append CSV rows to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uuidp", description="Uncoordinated unique-ID generation experiments.")
    parser.add_argument("--version", action="version", version=f"uuidp {__version__}")
    parser.add_argument("-q", "--quiet", action="store_true", help="suppress the run log on stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact", help="exact collision probability of an oblivious profile")
    p.add_argument("algorithm")
    p.add_argument("--profile", required=True, help="comma-separated demands, e.g. 3,2")
    p.add_argument("--m", required=True)
    p.add_argument("--brute-force", action="store_true", help="enumerate the generator's random choices")
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate per (algorithm, m, adversary)")
    _experiment_flags(p)
    p.add_argument("--adversary", action="append", help="oblivious:3,2[@roundrobin], killer:n=8,d=64[,mode=roundrobin], fol:FILE")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="grid of estimates plus a log-log scaling fit")
    _experiment_flags(p)
    p.add_argument("--n-list", help="uniform profiles (h,)*n for these n")
    p.add_argument("--h", type=int, default=4, help="per-instance demand for --n-list (default 4)")
    p.add_argument("--d-list", help="split each total demand d into --parts equal demands")
    p.add_argument("--parts", type=int, default=2)
    p.add_argument("--profiles", help="explicit profiles separated by ';'")
    p.add_argument("--predictor", choices=sorted(PREDICTORS), help="default: the algorithm's own")
    p.add_argument("--attack", choices=("single", "roundrobin"), help="use the adaptive cluster killer")
    p.add_argument("--summary", help="scaling summary CSV (default: OUTPUT.summary.csv or stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run acceptance criteria A1..A9")
    p.add_argument("suite", nargs="+", help="A1..A9 or all")
    p.add_argument("--seed", help=f"master seed (or ${SEED_ENV}); required")
    p.add_argument("--trials", type=int, help=f"Monte-Carlo trials per point (default {DEFAULT_TRIALS})")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"uuidp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, UUIDPError, ValueError) as exc:
        print(f"uuidp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
