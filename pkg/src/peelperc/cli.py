"""Command-line front end.

Every JSON document carries a ``manifest`` with the argv needed to rerun
it; CSV outputs put the same manifest on a leading ``#`` comment line.
Exit codes: 0 success, 1 failed check, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from importlib.metadata import PackageNotFoundError, version
from typing import Optional, Sequence

from .bounds import InfeasibleBracket, bracket_series, pc_bracket
from .chain import K_MAX, build_transition_matrix, marginals, stationary
from .simulator import DEFAULT_CUTOFF, SimConfig, run
from .verify import run_checks
from .weights import ODD_TOTAL, QPRIME_TOTAL, build_weight_table, format_rational

SCHEMA_VERSION = "1"


def _version() -> str:
    try:
        return version("peelperc")
    except PackageNotFoundError:  # pragma: no cover - source checkout
        return "0+unknown"


@dataclass
class RunManifest:
    command: str
    config: dict
    argv: list
    seed: Optional[int] = None
    cutoff: Optional[int] = None
    schema: str = ""
    version: str = field(default_factory=_version)
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def __post_init__(self):
        self.schema = self.schema or f"peelperc.{self.command}/v{SCHEMA_VERSION}"


class UsageError(Exception):
    pass


def _rational(text: str) -> Fraction | float:
    """``5/9`` or ``1/2`` parse as exact rationals; decimals stay floats."""
    if "/" in text:
        return Fraction(text)
    return float(text)


def _check_p(p) -> None:
    if not 0 <= p <= 1:
        raise UsageError(f"--p must lie in [0, 1], got {p}")


def _dump(doc: dict, out) -> None:
    json.dump(doc, out, indent=2, sort_keys=False)
    out.write("\n")


def _csv_with_manifest(manifest: RunManifest, body: str, out) -> None:
    out.write("# " + json.dumps(asdict(manifest), sort_keys=False) + "\n")
    out.write(body)


def _chain_cutoff(K: int) -> int:
    # the weight-table cutoff the chain builders use by default
    return max(2 * K, K + 1, 2)


def cmd_qtable(args, manifest: RunManifest, out) -> int:
    if args.max_k < 1:
        raise UsageError("--max-k must be >= 1")
    t = build_weight_table(max(args.max_k, 2))
    manifest.cutoff = t.cutoff
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "q_k", "qprime_k", "cum_q_odd", "cum_qprime", "tail_q_odd", "tail_qprime"])
    w.writerow([-1, format_rational(t.qk(-1)), "", "", "", "", ""])
    for k in range(0, args.max_k + 1):
        qp = format_rational(t.qprime(k)) if k >= 2 and k % 2 == 0 else ""
        cum_odd = t.odd_partial(k + 1)
        tail_qp = t.tail_qprime(k + 1)
        w.writerow([k, format_rational(t.qk(k)), qp, format_rational(cum_odd),
                    format_rational(QPRIME_TOTAL - tail_qp), format_rational(ODD_TOTAL - cum_odd),
                    format_rational(tail_qp)])
    _csv_with_manifest(manifest, buf.getvalue(), out)
    return 0


def cmd_chain_stationary(args, manifest: RunManifest, out) -> int:
    if not 1 <= args.K <= K_MAX:
        raise UsageError(f"--K must be in 1..{K_MAX}")
    p = _rational(args.p)
    _check_p(p)
    T = build_transition_matrix(args.K, p)
    manifest.cutoff = _chain_cutoff(args.K)
    want_exact = isinstance(p, Fraction) and args.K <= 6
    dist = stationary(T, exact=want_exact)
    rep = marginals(dist)
    states = []
    for i, w in enumerate(dist.space.states):
        row = {"word": w, "pi": float(dist.pi[i])}
        if dist.exact is not None:
            row["pi_exact"] = format_rational(dist.exact[i])
        states.append(row)
    doc = {
        "manifest": asdict(manifest),
        "K": args.K,
        "p": args.p,
        "states": states,
        "marginals": {"m": rep.m[1:].tolist(), "u": rep.u[1:].tolist(),
                      "positions": list(range(1, args.K + 2))},
        "residual": dist.residual,
    }
    _dump(doc, out)
    return 0


def cmd_bounds(args, manifest: RunManifest, out) -> int:
    if not 1 <= args.K <= K_MAX:
        raise UsageError(f"--K must be in 1..{K_MAX}")
    if not 1e-9 <= args.tol <= 1e-2:
        raise UsageError("--tol must be in [1e-9, 1e-2]")
    if not 0 < args.grid <= 1e-3:
        raise UsageError("--grid must be in (0, 1e-3]")
    manifest.cutoff = _chain_cutoff(args.K)
    try:
        r = pc_bracket(args.K, args.tol, args.grid)
    except InfeasibleBracket as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _dump({"manifest": asdict(manifest), **r.to_dict()}, out)
    return 0


def cmd_bracket_series(args, manifest: RunManifest, out) -> int:
    if not 1 <= args.max_K <= 20:
        raise UsageError("--max-K must be in 1..20")
    ks = None
    if args.Ks:
        ks = [int(x) for x in args.Ks.split(",")]
        if any(not 1 <= k <= args.max_K for k in ks):
            raise UsageError("--Ks entries must lie in 1..max-K")
    res = bracket_series(args.max_K, args.tol, args.grid, ks)
    _csv_with_manifest(manifest, res.to_csv(args.digits), out)
    for v in res.violations:
        print(f"warning: {v}", file=sys.stderr)
    return 0


POLICIES = {"black": "all_black", "iid": "iid"}


def cmd_simulate(args, manifest: RunManifest, out) -> int:
    p = float(_rational(args.p))
    _check_p(p)
    if args.steps < 1 or args.replicas < 1 or args.stride < 0:
        raise UsageError("--steps and --replicas must be positive, --stride non-negative")
    cfg = SimConfig(p=p, steps=args.steps, replicas=args.replicas, seed=args.seed,
                    policy=POLICIES[args.policy], cutoff=args.cutoff, mode=args.mode,
                    batches=args.batches, trajectory_stride=args.stride if args.csv else 0)
    try:
        stats = run(cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    manifest.cutoff = cfg.cutoff
    doc = stats.to_dict()
    traj = doc.pop("trajectory")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write("# " + json.dumps(asdict(manifest)) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "S", "S_hat"])
            w.writerows(traj)
    _dump({"manifest": asdict(manifest), **doc}, out)
    return 0


def cmd_verify(args, manifest: RunManifest, out) -> int:
    results = run_checks(moment_cutoff=args.moment_cutoff)
    width = max(len(r.name) for r in results)
    for r in results:
        out.write(f"{'PASS' if r.ok else 'FAIL'}  {r.name:<{width}}  {r.detail}\n")
    failed = sum(not r.ok for r in results)
    out.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    if args.json:
        _dump({"manifest": asdict(manifest), "checks": [asdict(r) for r in results]}, out)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="peelperc", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("qtable", help="exact weight table as CSV")
    s.add_argument("--max-k", type=int, default=20)
    s.set_defaults(func=cmd_qtable)

    s = sub.add_parser("chain-stationary", help="stationary law of the truncated chain")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--p", type=str, required=True, help="decimal or rational such as 5/9")
    s.set_defaults(func=cmd_chain_stationary)

    s = sub.add_parser("bounds", help="certified bracket for one K")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--tol", type=float, default=1e-7)
    s.add_argument("--grid", type=float, default=1e-3)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("bracket-series", help="brackets for K = 1..max-K as CSV")
    s.add_argument("--max-K", dest="max_K", type=int, required=True)
    s.add_argument("--Ks", type=str, default="", help="comma-separated subset of K values")
    s.add_argument("--tol", type=float, default=1e-7)
    s.add_argument("--grid", type=float, default=1e-3)
    s.add_argument("--digits", type=int, default=4)
    s.set_defaults(func=cmd_bracket_series)

    s = sub.add_parser("simulate", help="Monte Carlo peeling simulation")
    s.add_argument("--p", type=str, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--replicas", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--policy", choices=sorted(POLICIES), default="black")
    s.add_argument("--mode", choices=["drift", "survival", "marginals"], default="drift")
    s.add_argument("--batches", type=int, default=20)
    s.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    s.add_argument("--csv", type=str, default="", help="write the (n, S, S_hat) trajectory here")
    s.add_argument("--stride", type=int, default=1000)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", help="run the identity and oracle checks")
    s.add_argument("--moment-cutoff", type=int, default=10_000)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_verify)
    return ap


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    config = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    manifest = RunManifest(command=args.command, config=config, argv=argv,
                           seed=config.get("seed"))
    try:
        return args.func(args, manifest, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
