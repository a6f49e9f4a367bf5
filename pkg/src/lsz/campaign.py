"""Multi-pass campaign over discriminant ranges: sharding, worker fan-out,
failed-set persistence, checkpointing, and statistics.

Workers are pure verify_batch calls over immutable shared tables (shared
by fork, so parallelism is POSIX-only); the orchestrator is the single
writer of checkpoint and stats state.  Results are deterministic for any
worker count: the shard plan depends only on the input, and outputs are
assembled in shard order.
"""

from __future__ import annotations

import dataclasses
import logging
import os
import struct
import zlib
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import multiprocessing

import numpy as np

from .primes import (
    DEFAULT_MEMORY_CAP,
    FormatError,
    LegendreBuffer,
    PrimeTable,
    candidate_array,
    sieve_primes,
)
from .verify import PassConfig, Status, verify_batch

__all__ = [
    "CandidateRange",
    "CheckpointCorrupt",
    "FailedSet",
    "RunStats",
    "default_schedule",
    "emit_stats",
    "read_records_csv",
    "run_schedule",
    "run_stage",
    "write_records_csv",
]

log = logging.getLogger("lsz.campaign")

FAILEDSET_MAGIC = b"LSZF"
FAILEDSET_VERSION = 1

RANGE_SHARD_WIDTH = 1 << 17  # |d| units per shard for range sources
SET_SHARD_SIZE = 4096  # candidates per shard for failed-set sources
DEFAULT_BUFFER_PRIMES = 10_000
PREBUILD_PRIMES = 1 << 19  # term-table prefix built before forking workers


class CheckpointCorrupt(RuntimeError):
    pass


def _sort_by_q_sign(arr: np.ndarray) -> np.ndarray:
    """Ascending (|d|, sign); the negative twin precedes the positive one."""
    order = np.lexsort((np.sign(arr), np.abs(arr)))
    return arr[order]


class FailedSet:
    """Sorted, duplicate-free set of discriminants that failed a stage."""

    def __init__(self, ds: np.ndarray, presorted: bool = False):
        ds = np.asarray(ds, dtype=np.int64)
        if not presorted:
            ds = _sort_by_q_sign(ds)
        if len(ds) > 1:
            key = np.abs(ds) * 2 + (np.sign(ds) > 0)
            if np.any(np.diff(key) <= 0):
                raise ValueError("duplicate or unsorted discriminants")
        self.ds = ds
        self.ds.setflags(write=False)

    def __len__(self) -> int:
        return len(self.ds)

    def __iter__(self):
        return iter(self.ds.tolist())

    def __eq__(self, other):
        return isinstance(other, FailedSet) and np.array_equal(self.ds, other.ds)

    def save(self, path) -> None:
        payload = self.ds.astype("<i8").tobytes()
        with open(path, "wb") as fh:
            fh.write(FAILEDSET_MAGIC)
            fh.write(struct.pack("<IQ", FAILEDSET_VERSION, len(self.ds)))
            fh.write(payload)
            fh.write(struct.pack("<I", zlib.crc32(payload)))

    @staticmethod
    def load(path) -> "FailedSet":
        with open(path, "rb") as fh:
            head = fh.read(16)
            if len(head) < 16 or head[:4] != FAILEDSET_MAGIC:
                raise FormatError(f"{path}: bad magic")
            version, count = struct.unpack("<IQ", head[4:])
            if version != FAILEDSET_VERSION:
                raise FormatError(f"{path}: unsupported version {version}")
            payload = fh.read(count * 8)
            tail = fh.read(4)
            if len(payload) != count * 8 or len(tail) != 4:
                raise FormatError(f"{path}: truncated")
            (crc,) = struct.unpack("<I", tail)
            if crc != zlib.crc32(payload):
                raise FormatError(f"{path}: checksum mismatch")
        ds = np.frombuffer(payload, dtype="<i8").astype(np.int64)
        try:
            return FailedSet(ds, presorted=True)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None


@dataclasses.dataclass
class RunStats:
    """Per-candidate verification records for one stage, plus aggregates."""

    stage: int
    d: np.ndarray
    primes_used: np.ndarray
    status: np.ndarray  # Status values as int8

    @staticmethod
    def empty(stage: int = 0) -> "RunStats":
        return RunStats(stage, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int8))

    def __len__(self) -> int:
        return len(self.d)

    @property
    def q(self) -> np.ndarray:
        return np.abs(self.d)

    def only(self, status: Status) -> "RunStats":
        m = self.status == np.int8(status.value)
        return RunStats(self.stage, self.d[m], self.primes_used[m], self.status[m])

    def violated(self) -> "RunStats":
        return self.only(Status.VIOLATED)

    def failed(self) -> "RunStats":
        m = self.status != np.int8(Status.VIOLATED.value)
        return RunStats(self.stage, self.d[m], self.primes_used[m], self.status[m])

    def median(self) -> float:
        return float(np.median(self.primes_used)) if len(self) else 0.0

    def mean(self) -> float:
        return float(np.mean(self.primes_used)) if len(self) else 0.0

    def stddev(self) -> float:
        return float(np.std(self.primes_used)) if len(self) else 0.0

    def histogram(self, bucket: int):
        """(bucket_lo, count) pairs over primes_used; buckets are floors."""
        if bucket < 1:
            raise ValueError("bucket must be >= 1")
        if not len(self):
            return []
        lo = (self.primes_used // bucket) * bucket
        values, counts = np.unique(lo, return_counts=True)
        return list(zip(values.tolist(), counts.tolist()))


def emit_stats(stats: RunStats, bucket: int) -> str:
    """Histogram CSV: header `bucket_lo,count`, one row per non-empty
    bucket, then a `median/mean/stddev` summary footer."""
    lines = ["bucket_lo,count"]
    for lo, count in stats.histogram(bucket):
        lines.append(f"{lo},{count}")
    lines.append(f"median,{stats.median():.10g}")
    lines.append(f"mean,{stats.mean():.10g}")
    lines.append(f"stddev,{stats.stddev():.10g}")
    return "\n".join(lines) + "\n"


_STATUS_NAMES = {s.value: s.name.lower() for s in Status}
_STATUS_VALUES = {name: value for value, name in _STATUS_NAMES.items()}


def write_records_csv(stats: RunStats, path) -> None:
    with open(path, "w") as fh:
        fh.write("d,q,stage,primes_used,status\n")
        for d, pu, st in zip(stats.d.tolist(), stats.primes_used.tolist(), stats.status.tolist()):
            fh.write(f"{d},{abs(d)},{stats.stage},{pu},{_STATUS_NAMES[st]}\n")


def read_records_csv(path) -> RunStats:
    ds, pus, sts, stage = [], [], [], 0
    with open(path) as fh:
        header = fh.readline()
        if header and header.strip() != "d,q,stage,primes_used,status":
            raise FormatError(f"{path}: unexpected header {header.strip()!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d, _q, stg, pu, st = line.split(",")
            ds.append(int(d))
            pus.append(int(pu))
            sts.append(_STATUS_VALUES[st])
            stage = int(stg)
    return RunStats(stage, np.array(ds, np.int64), np.array(pus, np.int64), np.array(sts, np.int8))


# -- sharding -----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class CandidateRange:
    q_min: int
    q_max: int
    signs: str = "both"

    def __post_init__(self):
        if not 3 <= self.q_min <= self.q_max:
            raise ValueError("need 3 <= q_min <= q_max")
        if self.signs not in ("positive", "negative", "both"):
            raise ValueError(f"bad signs {self.signs!r}")


def _plan_shards(source, range_width: int, set_size: int):
    """Deterministic shard plan: (lo, hi) bounds per shard.

    Range sources shard by |d| sub-ranges (lo exclusive, hi inclusive);
    failed-set sources shard by index windows into the sorted array."""
    if isinstance(source, CandidateRange):
        lo = source.q_min
        plan = []
        while lo < source.q_max:
            hi = min(lo + range_width, source.q_max)
            plan.append((lo, hi))
            lo = hi
        return plan
    arr = source.ds if isinstance(source, FailedSet) else np.asarray(source, np.int64)
    return [(i, min(i + set_size, len(arr))) for i in range(0, len(arr), set_size)]


def _shard_candidates(source, lo: int, hi: int) -> np.ndarray:
    if isinstance(source, CandidateRange):
        return candidate_array(lo, hi, source.signs)
    arr = source.ds if isinstance(source, FailedSet) else np.asarray(source, np.int64)
    return arr[lo:hi]


# -- checkpoint log ------------------------------------------------------


class _Checkpoint:
    """Write-ahead per-shard checkpoint: `<base>.log` with
    `shard_lo shard_hi n_failed crc` lines and `<base>.dat` with one
    record block per line, appended in completion order."""

    def __init__(self, base: str, header: str):
        self.log_path = base + ".log"
        self.dat_path = base + ".dat"
        self.header = header

    def load(self, plan) -> dict:
        """Completed shard results keyed by shard bounds; tolerates a
        truncated tail (interrupted write), rejects inconsistent data."""
        done = {}
        if not (os.path.exists(self.log_path) and os.path.exists(self.dat_path)):
            return done
        plan_set = set(plan)
        with open(self.log_path) as lf:
            first = lf.readline().rstrip("\n")
            if first != self.header:
                raise CheckpointCorrupt(
                    f"{self.log_path}: header mismatch (resume against different stage?)"
                )
            lines = lf.read().splitlines()
        with open(self.dat_path, "rb") as df:
            for ln, line in enumerate(lines):
                parts = line.split()
                if len(parts) != 4:
                    if ln == len(lines) - 1:
                        break  # torn tail line
                    raise CheckpointCorrupt(f"{self.log_path}: malformed line {ln + 2}")
                lo, hi, n_failed, crc_hex = int(parts[0]), int(parts[1]), int(parts[2]), parts[3]
                head = df.read(4)
                if len(head) < 4:
                    if ln == len(lines) - 1:
                        break
                    raise CheckpointCorrupt(f"{self.dat_path}: missing block for line {ln + 2}")
                (count,) = struct.unpack("<I", head)
                payload = df.read(count * 17)
                if len(payload) != count * 17:
                    if ln == len(lines) - 1:
                        break
                    raise CheckpointCorrupt(f"{self.dat_path}: truncated block for line {ln + 2}")
                if zlib.crc32(payload) != int(crc_hex, 16):
                    raise CheckpointCorrupt(f"{self.dat_path}: checksum mismatch at line {ln + 2}")
                if (lo, hi) not in plan_set:
                    raise CheckpointCorrupt(f"{self.log_path}: shard ({lo},{hi}) not in plan")
                d = np.frombuffer(payload[: count * 8], dtype="<i8").astype(np.int64)
                pu = np.frombuffer(payload[count * 8 : count * 16], dtype="<i8").astype(np.int64)
                st = np.frombuffer(payload[count * 16 :], dtype=np.int8).copy()
                if int((st != Status.VIOLATED.value).sum()) != n_failed:
                    raise CheckpointCorrupt(f"{self.log_path}: n_failed mismatch at line {ln + 2}")
                done[(lo, hi)] = (d, pu, st)
        return done

    def open_for_append(self, fresh: bool):
        mode = "w" if fresh else "a"
        self._lf = open(self.log_path, mode)
        self._df = open(self.dat_path, mode + "b")
        if fresh:
            self._lf.write(self.header + "\n")
            self._lf.flush()

    def append(self, lo: int, hi: int, d: np.ndarray, pu: np.ndarray, st: np.ndarray) -> None:
        payload = d.astype("<i8").tobytes() + pu.astype("<i8").tobytes() + st.astype(np.int8).tobytes()
        self._df.write(struct.pack("<I", len(d)))
        self._df.write(payload)
        self._df.flush()
        n_failed = int((st != Status.VIOLATED.value).sum())
        self._lf.write(f"{lo} {hi} {n_failed} {zlib.crc32(payload):08x}\n")
        self._lf.flush()

    def close(self):
        self._lf.close()
        self._df.close()


# -- stage / schedule drivers ---------------------------------------------

_SHARED = None  # (cfg, table, buf, source) inherited by forked workers


def _run_shard(bounds):
    cfg, table, buf, source = _SHARED
    lo, hi = bounds
    d_arr = _shard_candidates(source, lo, hi)
    if not len(d_arr):
        return bounds, d_arr, np.empty(0, np.int64), np.empty(0, np.int8)
    status, primes_used, *_ = verify_batch(d_arr, cfg, table, buf)
    return bounds, d_arr, primes_used, status


def run_stage(
    cfg: PassConfig,
    source,
    table: PrimeTable,
    buf: LegendreBuffer | None,
    workers: int = 1,
    checkpoint: str | None = None,
    stage: int = 1,
    range_shard_width: int = RANGE_SHARD_WIDTH,
    set_shard_size: int = SET_SHARD_SIZE,
):
    """Verify every candidate from the source against one pass config.

    Returns (FailedSet, RunStats); the failed set contains exactly the
    candidates that were not certifiably violated.  Deterministic for any
    worker count.
    """
    global _SHARED
    if cfg.cutoff_primes > len(table):
        from .verify import TableTooSmall

        raise TableTooSmall(
            f"stage cutoff {cfg.cutoff_primes} exceeds prime table size {len(table)}"
        )
    plan = _plan_shards(source, range_shard_width, set_shard_size)
    if isinstance(source, CandidateRange):
        desc = f"range {source.q_min} {source.q_max} {source.signs}"
    else:
        desc = f"set {len(source.ds if isinstance(source, FailedSet) else source)}"
    header = f"# lsz-checkpoint v1 stage={stage} cutoff={cfg.cutoff_primes} c={cfg.c} source={desc}"
    ckpt = _Checkpoint(checkpoint, header) if checkpoint else None
    done = ckpt.load(plan) if ckpt else {}
    todo = [b for b in plan if b not in done]
    if ckpt:
        ckpt.open_for_append(fresh=not done)
    # warm the shared tables once, before any fork
    tt = cfg.term_table(table)
    tt.ensure(min(cfg.cutoff_primes, PREBUILD_PRIMES))
    results = dict(done)
    try:
        if workers <= 1 or len(todo) <= 1:
            _SHARED = (cfg, table, buf, source)
            for bounds in todo:
                bounds, d_arr, pu, st = _run_shard(bounds)
                results[bounds] = (d_arr, pu, st)
                if ckpt:
                    ckpt.append(*bounds, d_arr, pu, st)
                log.info("stage %d shard %s done: %d candidates, %d failed",
                         stage, bounds, len(d_arr), int((st != Status.VIOLATED.value).sum()))
        else:
            _SHARED = (cfg, table, buf, source)
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                for bounds, d_arr, pu, st in pool.map(_run_shard, todo):
                    results[bounds] = (d_arr, pu, st)
                    if ckpt:
                        ckpt.append(*bounds, d_arr, pu, st)
                    log.info("stage %d shard %s done: %d candidates, %d failed",
                             stage, bounds, len(d_arr), int((st != Status.VIOLATED.value).sum()))
    finally:
        _SHARED = None
        if ckpt:
            ckpt.close()
    ds, pus, sts = [], [], []
    for bounds in plan:  # shard order == (|d|, sign) order
        d_arr, pu, st = results[bounds]
        ds.append(np.asarray(d_arr, np.int64))
        pus.append(np.asarray(pu, np.int64))
        sts.append(np.asarray(st, np.int8))
    d_all = np.concatenate(ds) if ds else np.empty(0, np.int64)
    pu_all = np.concatenate(pus) if pus else np.empty(0, np.int64)
    st_all = np.concatenate(sts) if sts else np.empty(0, np.int8)
    stats = RunStats(stage, d_all, pu_all, st_all)
    failed = FailedSet(d_all[st_all != Status.VIOLATED.value], presorted=True)
    return failed, stats


def default_schedule(c=Fraction(1, 5)) -> list[PassConfig]:
    """The four-pass schedule: lambda and prime cutoffs per campaign row."""
    rows = [("1.6", 60_000), ("1.3", 5_000_000), ("1.2", 50_000_000), ("1.1", 130_000_000)]
    return [PassConfig.from_lambda(lam, c, cutoff) for lam, cutoff in rows]


def run_schedule(
    schedule: list[PassConfig],
    source: CandidateRange,
    workers: int = 1,
    checkpoint_dir: str | None = None,
    buffer_primes: int = DEFAULT_BUFFER_PRIMES,
    memory_cap: int = DEFAULT_MEMORY_CAP,
    table: PrimeTable | None = None,
):
    """Run the passes in order; stage k > 1 consumes stage k-1's failures.

    Prime tables are sized lazily: a stage's table is only extended when
    that stage actually has candidates.  Returns the final FailedSet
    (empty means the whole range is verified) and per-stage RunStats.
    """
    if not schedule:
        raise ValueError("schedule must be non-empty")
    cutoffs = [cfg.cutoff_primes for cfg in schedule]
    if any(b <= a for a, b in zip(cutoffs, cutoffs[1:])):
        raise ValueError("cutoffs must be strictly increasing across stages")
    buf = None
    stats_all = []
    current = source
    failed = FailedSet(np.empty(0, np.int64))
    for k, cfg in enumerate(schedule, start=1):
        n_in = None if isinstance(current, CandidateRange) else len(current)
        if n_in == 0:
            stats_all.append(RunStats.empty(stage=k))
            failed = FailedSet(np.empty(0, np.int64))
            continue
        if table is None or len(table) < cfg.cutoff_primes:
            log.info("sieving %d primes for stage %d", cfg.cutoff_primes, k)
            table = sieve_primes(cfg.cutoff_primes, memory_cap)
            buf = None
        if buf is None:
            buf = LegendreBuffer(table, buffer_primes)
        ckpt = os.path.join(checkpoint_dir, f"stage{k}") if checkpoint_dir else None
        log.info("stage %d: cutoff %d over %s", k, cfg.cutoff_primes,
                 f"{n_in} failed candidates" if n_in is not None else current)
        failed, stats = run_stage(cfg, current, table, buf, workers=workers,
                                  checkpoint=ckpt, stage=k)
        log.info("stage %d: %d verified, %d failed", k, len(stats.violated()), len(failed))
        stats_all.append(stats)
        current = failed
    return failed, stats_all
