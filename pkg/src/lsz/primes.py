"""Prime tables with certified logarithms, Kronecker symbols, Legendre
buffers, and the stream of candidate discriminants.

The discriminant filter is the cheap superset test ``d = 1 (mod 4) or
d = 8, 12 (mod 16)`` with mathematically non-negative residues; no
squarefree test is performed (over-checking imprimitive characters only
proves a stronger statement).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import ball
from .ball import RealBall

__all__ = [
    "Candidate",
    "FormatError",
    "InvalidCount",
    "LegendreBuffer",
    "PrimeTable",
    "ResourceExhausted",
    "candidate_array",
    "candidate_stream",
    "chi_at_prime",
    "is_prime",
    "kronecker",
    "load_primes",
    "satisfies_condition",
    "save_primes",
    "sieve_primes",
]


class InvalidCount(ValueError):
    pass


class ResourceExhausted(RuntimeError):
    pass


class FormatError(ValueError):
    pass


PRIME_CACHE_MAGIC = b"LSZP"
PRIME_CACHE_VERSION = 1
DEFAULT_MEMORY_CAP = 8 << 30  # bytes; covers the 130M-prime table comfortably

# (d|2) as a function of d mod 8
_TAB8 = np.array([0, 1, 0, -1, 0, -1, 0, 1], dtype=np.int8)


def _nth_prime_bound(n: int) -> int:
    """Upper bound for the n-th prime (Rosser-type, exact for small n)."""
    if n < 6:
        return 13
    ln = math.log(n)
    return int(n * (ln + math.log(ln))) + 10


def _sieve_bound(limit: int) -> np.ndarray:
    """All primes <= limit by a plain sieve (used for base primes)."""
    mask = np.ones(limit + 1, dtype=bool)
    mask[:2] = False
    for p in range(2, math.isqrt(limit) + 1):
        if mask[p]:
            mask[p * p :: p] = False
    return np.flatnonzero(mask).astype(np.int64)


class PrimeTable:
    """Immutable sorted table of the first N primes.

    Certified logarithm enclosures are computed on demand from the exact
    integer entries; per-sigma zeta-term prefixes live in companion term
    tables (see lsz.verify.TermTable), built lazily for the active sigma.
    """

    def __init__(self, primes: np.ndarray):
        if primes.dtype != np.int64:
            primes = primes.astype(np.int64)
        self.primes = primes
        self.primes.setflags(write=False)

    def __len__(self) -> int:
        return len(self.primes)

    def prime(self, i: int) -> int:
        return int(self.primes[i])

    def index_of(self, p: int) -> int:
        i = int(np.searchsorted(self.primes, p))
        if i >= len(self.primes) or self.primes[i] != p:
            raise ValueError(f"{p} is not in the table")
        return i

    def log_p(self, i: int, bits: int | None = None) -> RealBall:
        """Certified enclosure of log(primes[i])."""
        return ball.log(RealBall.exact(self.prime(i), bits), bits)


def sieve_primes(n: int, memory_cap: int = DEFAULT_MEMORY_CAP) -> PrimeTable:
    """First n primes by a segmented, odd-only sieve of Eratosthenes."""
    if n < 1:
        raise InvalidCount(f"need at least one prime, got n={n}")
    bound = _nth_prime_bound(n)
    # primes array + segment bitmap + base primes
    est = n * 8 + (1 << 22) + math.isqrt(bound) * 8
    if est > memory_cap:
        raise ResourceExhausted(
            f"sieving {n} primes needs ~{est >> 20} MiB, cap is {memory_cap >> 20} MiB"
        )
    while True:
        table = _sieve_first(n, bound)
        if table is not None:
            return table
        bound += bound // 10  # bound estimate too small; extend (not expected)


def _sieve_first(n: int, bound: int) -> PrimeTable | None:
    base = _sieve_bound(math.isqrt(bound) + 1)
    odd_base = base[1:]  # odd primes only; 2 handled directly
    out = np.empty(n, dtype=np.int64)
    out[0] = 2
    got = 1
    seg = 1 << 21  # odd numbers per segment -> spans 2*seg integers
    lo = 3
    while got < n and lo <= bound:
        hi = min(lo + 2 * seg, bound + 1)
        size = (hi - lo + 1) // 2  # odds in [lo, hi)
        mask = np.ones(size, dtype=bool)
        for p in odd_base:
            p = int(p)
            if p * p >= hi:
                break
            start = max(p * p, ((lo + p - 1) // p) * p)
            if start % 2 == 0:
                start += p
            mask[(start - lo) // 2 :: p] = False
        primes = lo + 2 * np.flatnonzero(mask)
        take = min(len(primes), n - got)
        out[got : got + take] = primes[:take]
        got += take
        lo = hi if hi % 2 == 1 else hi + 1
    if got < n:
        return None
    return PrimeTable(out)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for n < 3.3e24."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


# -- prime table cache file -------------------------------------------


def save_primes(table: PrimeTable, path) -> None:
    """Write the LSZP cache: magic, version u32, count u64, u64 primes (LE)."""
    with open(path, "wb") as fh:
        fh.write(PRIME_CACHE_MAGIC)
        fh.write(struct.pack("<IQ", PRIME_CACHE_VERSION, len(table)))
        fh.write(table.primes.astype("<u8").tobytes())


def load_primes(path) -> PrimeTable:
    """Load and re-verify an LSZP cache (monotonicity and endpoints)."""
    with open(path, "rb") as fh:
        head = fh.read(4 + 4 + 8)
        if len(head) < 16 or head[:4] != PRIME_CACHE_MAGIC:
            raise FormatError(f"{path}: bad magic")
        version, count = struct.unpack("<IQ", head[4:])
        if version != PRIME_CACHE_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        payload = fh.read(count * 8)
        if len(payload) != count * 8:
            raise FormatError(f"{path}: truncated (expected {count} primes)")
    primes = np.frombuffer(payload, dtype="<u8").astype(np.int64)
    if count == 0:
        raise FormatError(f"{path}: empty table")
    if primes[0] != 2:
        raise FormatError(f"{path}: first entry is {primes[0]}, expected 2")
    if np.any(np.diff(primes) <= 0):
        raise FormatError(f"{path}: entries not strictly increasing")
    if not is_prime(int(primes[-1])):
        raise FormatError(f"{path}: last entry {primes[-1]} is not prime")
    return PrimeTable(primes)


# -- Kronecker symbol --------------------------------------------------


def _two_symbol(a: int) -> int:
    if a % 2 == 0:
        return 0
    return 1 if a % 8 in (1, 7) else -1


def kronecker(d: int, n: int) -> int:
    """Kronecker symbol (d|n) for n >= 1, by the reciprocity ladder."""
    if n < 1:
        raise ValueError("n must be >= 1")
    a, b = d, n
    if b % 2 == 0 and a % 2 == 0:
        return 0
    v = 0
    while b % 2 == 0:
        b //= 2
        v += 1
    k = 1 if v % 2 == 0 else _two_symbol(a)
    if a < 0:
        a = -a
        if b % 4 == 3:
            k = -k
    a %= b
    while a:
        v = 0
        while a % 2 == 0:
            a //= 2
            v += 1
        if v % 2 == 1 and b % 8 in (3, 5):
            k = -k
        if a % 4 == 3 and b % 4 == 3:
            k = -k
        a, b = b % a, a
    return k if b == 1 else 0


# -- Legendre buffers ---------------------------------------------------


class LegendreBuffer:
    """Packed per-prime quadratic-residue bit tables for the first B primes.

    For odd p the table answers (a|p) via a residue lookup; p = 2 is
    served by the d mod 8 rule.  Tables are immutable and shared
    read-only across workers.
    """

    def __init__(self, table: PrimeTable, count: int):
        count = min(count, len(table))
        self.count = count
        self.primes = table.primes[:count].copy()
        self.primes.setflags(write=False)
        byte_offsets = np.zeros(count, dtype=np.int64)
        sizes = (self.primes + 7) // 8
        sizes[0] = 1  # p = 2 row unused; chi comes from the mod-8 rule
        np.cumsum(sizes[:-1], out=byte_offsets[1:])
        self.byte_offsets = byte_offsets
        self.byte_offsets.setflags(write=False)
        chunks = [np.zeros(1, dtype=np.uint8)]
        for i in range(1, count):
            p = int(self.primes[i])
            half = np.arange(1, (p - 1) // 2 + 1, dtype=np.int64)
            residues = (half * half) % p
            row = np.zeros(p, dtype=bool)
            row[residues] = True
            chunks.append(np.packbits(row, bitorder="little"))
        self.bits = np.concatenate(chunks)
        self.bits.setflags(write=False)
        self.max_prime = int(self.primes[-1]) if count else 0

    def __len__(self) -> int:
        return self.count

    def covers_index(self, i: int) -> bool:
        return i < self.count

    def chi(self, d: int, i: int) -> int:
        """chi_d at the i-th buffered prime."""
        if i == 0:
            return int(_TAB8[d % 8])
        p = int(self.primes[i])
        r = d % p
        if r == 0:
            return 0
        idx = int(self.byte_offsets[i]) * 8 + r
        bit = (self.bits[idx >> 3] >> (idx & 7)) & 1
        return 1 if bit else -1

    def chi_vec(self, d: np.ndarray, i: int) -> np.ndarray:
        """chi_d at the i-th buffered prime for an int64 vector of d."""
        if i == 0:
            return _TAB8[d % 8]
        p = self.primes[i]
        r = d % p
        idx = self.byte_offsets[i] * 8 + r
        bit = (self.bits[idx >> 3] >> (idx & 7).astype(np.uint8)) & 1
        chi = (2 * bit.astype(np.int8) - 1).astype(np.int8)
        chi[r == 0] = 0
        return chi


def chi_at_prime(d, p: int, buf: LegendreBuffer | None = None) -> int:
    """chi_d(p) = (d|p): buffered residue lookup when available, else the
    reciprocity ladder.  Both paths agree."""
    dd = d.d if isinstance(d, Candidate) else d
    if buf is not None and p <= buf.max_prime:
        i = int(np.searchsorted(buf.primes, p))
        if i < buf.count and buf.primes[i] == p:
            return buf.chi(dd, i)
    return kronecker(dd, p)


# -- candidate discriminants -------------------------------------------


def satisfies_condition(d: int) -> bool:
    """The discriminant superset test, with non-negative residues."""
    return d % 4 == 1 or d % 16 in (8, 12)


@dataclass(frozen=True)
class Candidate:
    """A signed discriminant passing the superset test; q = |d| >= 3."""

    d: int
    q: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "q", abs(self.d))
        if self.q < 3:
            raise ValueError(f"modulus {self.q} < 3")
        if not satisfies_condition(self.d):
            raise ValueError(f"d={self.d} fails the discriminant condition")


def candidate_stream(q_min: int, q_max: int, signs: str = "both") -> Iterator[Candidate]:
    """Candidates with q_min < |d| <= q_max, ascending (|d|, sign)."""
    if not 3 <= q_min <= q_max:
        raise ValueError("need 3 <= q_min <= q_max")
    if signs not in ("positive", "negative", "both"):
        raise ValueError(f"bad signs {signs!r}")
    sgns = {"positive": (1,), "negative": (-1,), "both": (-1, 1)}[signs]
    for q in range(q_min + 1, q_max + 1):
        for s in sgns:
            d = s * q
            if satisfies_condition(d):
                yield Candidate(d)


def candidate_array(q_min: int, q_max: int, signs: str = "both") -> np.ndarray:
    """Vectorized candidate_stream: int64 d values, ascending (|d|, sign)."""
    if not 3 <= q_min <= q_max:
        raise ValueError("need 3 <= q_min <= q_max")
    qs = np.arange(q_min + 1, q_max + 1, dtype=np.int64)
    if signs == "both":
        d = np.empty(2 * len(qs), dtype=np.int64)
        d[0::2] = -qs
        d[1::2] = qs
    elif signs == "positive":
        d = qs
    elif signs == "negative":
        d = -qs
    else:
        raise ValueError(f"bad signs {signs!r}")
    keep = (d % 4 == 1) | (d % 16 == 8) | (d % 16 == 12)
    return d[keep]
