"""Command-line surface: constants provenance, single-stage and scheduled
verification runs, failed-set retries, histogram emission, and the
planning optimizers.

Exit codes: 0 on success with an empty final failed set, 1 when failures
remain, 2 on usage or runtime errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction

import numpy as np

from . import analysis, ball, campaign, constants
from .campaign import CandidateRange, FailedSet, RunStats, emit_stats
from .primes import LegendreBuffer, load_primes, save_primes, sieve_primes
from .verify import PassConfig, Status

log = logging.getLogger("lsz")


def _parse_rational(text: str) -> Fraction:
    return Fraction(text)


def _load_config(path: str) -> dict:
    """Line-based key=value defaults file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key=value")
            key, value = line.split("=", 1)
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _apply_config(args: argparse.Namespace) -> None:
    cfg_path = getattr(args, "config", None)
    if not cfg_path:
        return
    overrides = _load_config(cfg_path)
    for key, value in overrides.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file supplying defaults for unset flags")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: cpu count)")
    p.add_argument("--prime-cache", default=None, help="LSZP prime table cache file to load/save")
    p.add_argument("-v", "--verbose", action="store_true")


def _workers(args) -> int:
    if args.workers is None:
        return os.cpu_count() or 1
    return max(1, int(args.workers))


def _get_table(n: int, cache_path: str | None):
    if cache_path and os.path.exists(cache_path):
        table = load_primes(cache_path)
        if len(table) >= n:
            return table
        log.info("prime cache too small (%d < %d); re-sieving", len(table), n)
    table = sieve_primes(n)
    if cache_path:
        save_primes(table, cache_path)
    return table


def _resolve_r(args) -> ball.RealBall:
    if getattr(args, "r", None) is not None:
        return ball.RealBall.exact(str(args.r), constants.CONSTANTS_BITS)
    return constants.r_from_lambda(str(getattr(args, "lam")))


def _pass_config(args, cutoff: int) -> PassConfig:
    r = _resolve_r(args)
    c = _parse_rational(args.c)
    return PassConfig.from_r(r, c, cutoff)


def _print_provenance(r: ball.RealBall) -> None:
    conv = constants.convexity_constants()
    geom = constants.CircleGeometry(r, constants.CONSTANTS_BITS)
    ic = constants.phi_and_e(r)

    def row(name, b):
        print(f"{name:10s} mid={b.mid!s:>45s}  rad={b.rad!s}")

    for name in ("C2", "C4", "C8", "C16"):
        row(name, getattr(conv, name))
    for k in range(6):
        row(f"theta_{k}", geom.theta[k])
    pairs = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 5), (3, 5)]
    for n, m in pairs:
        row(f"A({n},{m})", geom.A(n, m))
        row(f"B({n},{m})", geom.B(n, m))
    for name in ("K1", "K2", "K3", "K4", "K5", "KR", "K", "rho", "phi", "E", "R"):
        row(name, getattr(ic, name if name != "rho" else "rho"))


def _write_outputs(args, failed: FailedSet, stats_list: list[RunStats]) -> None:
    if getattr(args, "failed_out", None):
        failed.save(args.failed_out)
        log.info("failed set (%d entries) -> %s", len(failed), args.failed_out)
    stats_dir = getattr(args, "stats_dir", None)
    if stats_dir:
        os.makedirs(stats_dir, exist_ok=True)
        for st in stats_list:
            path = os.path.join(stats_dir, f"stage{st.stage}_histogram.csv")
            with open(path, "w") as fh:
                fh.write(emit_stats(st.violated(), args.bucket))
            if getattr(args, "records", False):
                campaign.write_records_csv(st, os.path.join(stats_dir, f"stage{st.stage}_records.csv"))
    if getattr(args, "stats_out", None) and stats_list:
        with open(args.stats_out, "w") as fh:
            fh.write(emit_stats(stats_list[-1].violated(), args.bucket))
    if getattr(args, "records_out", None) and stats_list:
        campaign.write_records_csv(stats_list[-1], args.records_out)


def _cmd_constants(args) -> int:
    r = _resolve_r(args)
    _print_provenance(r)
    return 0


def _cmd_verify(args) -> int:
    cfg = _pass_config(args, args.cutoff)
    table = _get_table(args.cutoff, args.prime_cache)
    buf = LegendreBuffer(table, campaign.DEFAULT_BUFFER_PRIMES)
    source = CandidateRange(args.qmin, args.qmax, args.signs)
    failed, stats = campaign.run_stage(
        cfg, source, table, buf, workers=_workers(args), checkpoint=args.checkpoint, stage=1
    )
    _write_outputs(args, failed, [stats])
    print(f"candidates={len(stats)} violated={len(stats.violated())} failed={len(failed)}")
    return 0 if len(failed) == 0 else 1


def _cmd_schedule(args) -> int:
    c = _parse_rational(args.c)
    if args.stages:
        rows = []
        with open(args.stages) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                lam, cutoff = line.split()
                rows.append(PassConfig.from_lambda(lam, c, int(cutoff)))
        schedule = rows
    else:
        schedule = campaign.default_schedule(c)
    source = CandidateRange(args.qmin, args.qmax, args.signs)
    table = None
    if args.prime_cache and os.path.exists(args.prime_cache):
        table = load_primes(args.prime_cache)
    failed, stats_list = campaign.run_schedule(
        schedule, source, workers=_workers(args), checkpoint_dir=args.checkpoint_dir, table=table
    )
    _write_outputs(args, failed, stats_list)
    for st in stats_list:
        v = st.violated()
        print(
            f"stage {st.stage}: candidates={len(st)} violated={len(v)} failed={len(st.failed())} "
            f"median={v.median():.0f} mean={v.mean():.1f} stddev={v.stddev():.1f}"
        )
    print(f"final failed set: {len(failed)}")
    return 0 if len(failed) == 0 else 1


def _cmd_retry(args) -> int:
    failed_in = FailedSet.load(args.failed_in)
    cfg = _pass_config(args, args.cutoff)
    table = _get_table(args.cutoff, args.prime_cache)
    buf = LegendreBuffer(table, campaign.DEFAULT_BUFFER_PRIMES)
    failed, stats = campaign.run_stage(
        cfg, failed_in, table, buf, workers=_workers(args), checkpoint=args.checkpoint, stage=1
    )
    _write_outputs(args, failed, [stats])
    print(f"candidates={len(stats)} violated={len(stats.violated())} failed={len(failed)}")
    return 0 if len(failed) == 0 else 1


def _cmd_stats(args) -> int:
    stats = campaign.read_records_csv(args.log)
    if args.status != "all":
        stats = stats.only(Status[args.status.upper()])
    sys.stdout.write(emit_stats(stats, args.bucket))
    return 0


def _cmd_optimize_lambda(args) -> int:
    c = float(_parse_rational(args.c))
    lams, thetas = analysis.theta_c_grid(c)
    lam, theta = analysis.minimize_theta_c(c)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(analysis.curve_csv(lams, thetas, "lambda,theta_c"))
    print(f"lambda*={lam:.3f} theta_c={theta:.6f}")
    return 0


def _cmd_optimize_r(args) -> int:
    table = _get_table(args.cutoff, args.prime_cache)
    c = float(_parse_rational(args.c))
    lams, deltas = analysis.delta_sweep(table, [args.cutoff], c)
    i = int(np.argmin(deltas[args.cutoff]))
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(analysis.curve_csv(lams, deltas[args.cutoff], "lambda,delta_n"))
    print(f"lambda*={float(lams[i]):.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lsz", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="print the certified constants provenance table")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--lambda", dest="lam", help="lambda knob; r = lambda/log(10^10)")
    group.add_argument("--r", help="raw r value (exact rational or decimal literal)")
    _add_common(p)
    p.set_defaults(fn=_cmd_constants)

    for name, fn in (("verify", _cmd_verify),):
        p = sub.add_parser(name, help="run one verification stage over a modulus range")
        p.add_argument("--qmin", type=int, required=True)
        p.add_argument("--qmax", type=int, required=True)
        p.add_argument("--c", default="1/5", help="zero-free-region constant (rational)")
        p.add_argument("--lambda", dest="lam", default="1.6")
        p.add_argument("--r", default=None, help="raw r, overriding --lambda")
        p.add_argument("--cutoff", type=int, required=True, help="prime cutoff N0")
        p.add_argument("--signs", choices=("positive", "negative", "both"), default="both")
        p.add_argument("--failed-out", default=None)
        p.add_argument("--stats-out", default=None, help="histogram CSV of violated candidates")
        p.add_argument("--records-out", default=None, help="per-candidate records CSV")
        p.add_argument("--checkpoint", default=None, help="checkpoint file base path")
        p.add_argument("--bucket", type=int, default=50)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("schedule", help="multi-pass run (defaults to the four-row schedule)")
    p.add_argument("--qmin", type=int, required=True)
    p.add_argument("--qmax", type=int, required=True)
    p.add_argument("--c", default="1/5")
    p.add_argument("--stages", default=None, help="stage file: lines of `lambda cutoff`")
    p.add_argument("--signs", choices=("positive", "negative", "both"), default="both")
    p.add_argument("--failed-out", default=None)
    p.add_argument("--stats-dir", default=None, help="write per-stage histogram CSVs here")
    p.add_argument("--records", action="store_true", help="also write per-stage records CSVs")
    p.add_argument("--checkpoint-dir", default=None)
    p.add_argument("--bucket", type=int, default=50)
    _add_common(p)
    p.set_defaults(fn=_cmd_schedule)

    p = sub.add_parser("retry", help="run one stage over a saved failed set")
    p.add_argument("--failed-in", required=True)
    p.add_argument("--c", default="1/5")
    p.add_argument("--lambda", dest="lam", default="1.3")
    p.add_argument("--r", default=None)
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--failed-out", default=None)
    p.add_argument("--stats-out", default=None)
    p.add_argument("--records-out", default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--bucket", type=int, default=50)
    _add_common(p)
    p.set_defaults(fn=_cmd_retry)

    p = sub.add_parser("stats", help="emit a histogram CSV from a records CSV")
    p.add_argument("--log", required=True, help="records CSV path")
    p.add_argument("--bucket", type=int, required=True)
    p.add_argument("--status", choices=("violated", "failed", "indeterminate", "all"), default="all")
    _add_common(p)
    p.set_defaults(fn=_cmd_stats)

    p = sub.add_parser("optimize-lambda", help="minimize the heuristic runtime exponent")
    p.add_argument("--c", default="1/5")
    p.add_argument("--csv", default=None, help="write the (lambda, theta_c) curve here")
    _add_common(p)
    p.set_defaults(fn=_cmd_optimize_lambda)

    p = sub.add_parser("optimize-r", help="minimize Delta_N at a prime cutoff")
    p.add_argument("--cutoff", type=int, required=True)
    p.add_argument("--c", default="1/5")
    p.add_argument("--csv", default=None, help="write the (lambda, Delta_N) curve here")
    _add_common(p)
    p.set_defaults(fn=_cmd_optimize_r)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        _apply_config(args)
    except (OSError, ValueError) as exc:
        print(f"lsz: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(asctime)s %(name)s %(message)s",
        stream=sys.stderr,
    )
    env_bits = os.environ.get("LSZ_PRECISION_BITS")
    if env_bits:
        ball.set_default_precision(int(env_bits))
    try:
        return args.fn(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"lsz: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
