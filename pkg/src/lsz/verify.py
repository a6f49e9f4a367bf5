"""Certified verification that the prime-sum inequality fails for a
candidate discriminant.

The left side is accumulated over primes in ascending order as a pair of
certified float64 bounds derived, with directed rounding, from MPFR
enclosures of each term; a rigorous bound on the float summation error is
charged at every comparison.  Violation is decided against the upper end
of the right side, so a VIOLATED outcome always carries a sound ball
comparison.  Comparisons happen every 64 primes and always exactly at the
cutoff; an overlapping final comparison escalates to full ball arithmetic
at doubled precision before the candidate is declared failed.

The shared, chi-independent zeta term sum_p log p/(p^sigma - 1) is
prefix-cached per sigma (TermTable); only the chi-dependent part is
accumulated per candidate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np

from . import ball, constants
from .ball import Cmp, RealBall
from .primes import Candidate, LegendreBuffer, PrimeTable

__all__ = [
    "BATCH",
    "PassConfig",
    "Status",
    "TableTooSmall",
    "TermTable",
    "VerificationOutcome",
    "ball_lhs",
    "lhs_term",
    "rhs_value",
    "verify_batch",
    "verify_candidate",
]

BATCH = 64  # comparison cadence in primes; the final check runs at the cutoff

_U = 2.0**-53
_EXP_SLACK = 1.0 + 6e-14  # covers exp over the (tiny) argument interval; see _build_chunk
_CTX53 = gmpy2.context(precision=53, round=gmpy2.RoundToNearest)
_INF = math.inf


class TableTooSmall(ValueError):
    pass


class Status(enum.Enum):
    VIOLATED = 1
    FAILED = 0
    INDETERMINATE = 2


@dataclass(frozen=True)
class VerificationOutcome:
    status: Status
    primes_used: int
    lhs: RealBall
    rhs: RealBall


class PassConfig:
    """One campaign pass: r (hence sigma = 1 + r), the certified inequality
    constants phi and E, the zero-free-region constant c, and the prime
    cutoff."""

    def __init__(self, r: RealBall, phi: RealBall, E: RealBall, c: Fraction, cutoff_primes: int):
        if not (0 < r.lower() and r.upper() < 0.25):
            raise ValueError("r must be certainly inside (0, 1/4)")
        if c <= 0:
            raise ValueError("c must be positive")
        if cutoff_primes < 0:
            raise ValueError("cutoff must be non-negative")
        self.r = r
        self.c = Fraction(c)
        self.cutoff_primes = int(cutoff_primes)
        one = RealBall.exact(1)
        self.sigma = ball.add(one, r)
        self.R = ball.add(r, RealBall.exact(Fraction(7, 8)))
        self.phi = phi
        self.E = E
        # certified float64 endpoints for the fast path
        self.r_lo, self.r_hi = r.lower_float(), r.upper_float()
        self.sigma_lo, self.sigma_hi = self.sigma.lower_float(), self.sigma.upper_float()
        self.R_lo, self.R_hi = self.R.lower_float(), self.R.upper_float()
        self.phi_hi = phi.upper_float()
        self.E_hi = E.upper_float()
        c_ball = RealBall.exact(self.c)
        self.c_lo, self.c_hi = c_ball.lower_float(), c_ball.upper_float()
        self._term_tables: dict[int, TermTable] = {}

    @classmethod
    def from_lambda(cls, lam, c, cutoff_primes: int, bits: int = constants.CONSTANTS_BITS) -> "PassConfig":
        """Build a pass from the lambda knob: r = lambda / log(10^10)."""
        r = constants.r_from_lambda(lam, bits)
        return cls.from_r(r, c, cutoff_primes, bits)

    @classmethod
    def from_r(cls, r, c, cutoff_primes: int, bits: int = constants.CONSTANTS_BITS) -> "PassConfig":
        r = r if isinstance(r, RealBall) else RealBall.exact(r, bits)
        ic = constants.phi_and_e(r, bits)
        return cls(r=r, phi=ic.phi, E=ic.E, c=Fraction(c), cutoff_primes=cutoff_primes)

    def term_table(self, table: PrimeTable) -> "TermTable":
        tt = self._term_tables.get(id(table))
        if tt is None:
            tt = TermTable(table, self)
            self._term_tables[id(table)] = tt
        return tt

    def __repr__(self):
        return (
            f"PassConfig(r~{float(self.r.mid):.6f}, c={self.c}, cutoff={self.cutoff_primes}, "
            f"phi<= {self.phi_hi:.6f}, E<= {self.E_hi:.6f})"
        )


def _next_up(x: float) -> float:
    return math.nextafter(x, _INF)


def _next_dn(x: float) -> float:
    return math.nextafter(x, -_INF)


class TermTable:
    """Per-sigma certified term bounds over a prime table, chunk-extended.

    For prime index i (a_i = log p/(p^sigma - 1), b_i = log p/(p^sigma + 1)):
      a_lo[i] <= a_i,  b_hi[i] >= b_i               (per-prime bounds)
      A_lo[n] <= sum_{i<n} a_i <= A_hi[n]           (shared zeta-term prefix)
      AB_hi[n] >= sum_{i<n} (a_i + b_i) upper       (for the float error bound)
      W_hi[n] >= accumulated enclosure widths       (derived upper lhs bound)
    """

    CHUNK = 1 << 16

    def __init__(self, table: PrimeTable, cfg: PassConfig):
        self.table = table
        self.sigma_lo = cfg.sigma_lo
        self.sigma_hi = cfg.sigma_hi
        self.built = 0
        cap = self.CHUNK
        self.a_lo = np.empty(cap)
        self.b_hi = np.empty(cap)
        self.A_lo = np.zeros(cap + 1)
        self.A_hi = np.zeros(cap + 1)
        self.AB_hi = np.zeros(cap + 1)
        self.W_hi = np.zeros(cap + 1)

    def ensure(self, n: int) -> None:
        """Build term data for prime indices [0, n)."""
        if n <= self.built:
            return
        if n > len(self.table):
            raise TableTooSmall(f"need {n} primes, table holds {len(self.table)}")
        while self.built < n:
            self._build_chunk(min(self.CHUNK, n - self.built))

    def _grow(self, need: int) -> None:
        cap = len(self.a_lo)
        if need <= cap:
            return
        new = max(need, 2 * cap)
        for name in ("a_lo", "b_hi"):
            arr = np.empty(new)
            arr[: self.built] = getattr(self, name)[: self.built]
            setattr(self, name, arr)
        for name in ("A_lo", "A_hi", "AB_hi", "W_hi"):
            arr = np.zeros(new + 1)
            arr[: self.built + 1] = getattr(self, name)[: self.built + 1]
            setattr(self, name, arr)

    def _build_chunk(self, count: int) -> None:
        lo = self.built
        hi = lo + count
        self._grow(hi)
        primes = self.table.primes[lo:hi].tolist()
        sig_lo, sig_hi = self.sigma_lo, self.sigma_hi
        ctx = _CTX53
        nd, nu = _next_dn, _next_up
        a_lo_arr = self.a_lo
        b_hi_arr = self.b_hi
        A_lo_arr, A_hi_arr = self.A_lo, self.A_hi
        AB_arr, W_arr = self.AB_hi, self.W_hi
        A_lo_s = float(A_lo_arr[lo])
        A_hi_s = float(A_hi_arr[lo])
        AB_s = float(AB_arr[lo])
        W_s = float(W_arr[lo])
        i = lo
        for p in primes:
            lm = float(ctx.log(p))  # correctly rounded to 53 bits
            L_lo, L_hi = nd(lm), nu(lm)
            x_lo = nd(sig_lo * L_lo)
            x_hi = nu(sig_hi * L_hi)
            em = float(ctx.exp(x_lo))
            e_lo = nd(em)
            # exp over [x_lo, x_hi]: interval width is a few ulps of x <= 25,
            # so a fixed relative widening covers exp(x_hi)
            if x_hi - x_lo > 4e-14 * max(1.0, x_hi):
                e_hi = nu(float(ctx.exp(x_hi)))
            else:
                e_hi = nu(em * _EXP_SLACK)
            d1_lo, d1_hi = nd(e_lo - 1.0), nu(e_hi - 1.0)
            d2_lo, d2_hi = nd(e_lo + 1.0), nu(e_hi + 1.0)
            a_lo = nd(L_lo / d1_hi)
            a_hi = nu(L_hi / d1_lo)
            b_lo = nd(L_lo / d2_hi)
            b_hi = nu(L_hi / d2_lo)
            a_lo_arr[i] = a_lo
            b_hi_arr[i] = b_hi
            A_lo_s = nd(A_lo_s + a_lo)
            A_hi_s = nu(A_hi_s + a_hi)
            AB_s = nu(AB_s + nu(a_hi + b_hi))
            W_s = nu(W_s + nu(nu(a_hi - a_lo) + nu(b_hi - b_lo)))
            i += 1
            A_lo_arr[i] = A_lo_s
            A_hi_arr[i] = A_hi_s
            AB_arr[i] = AB_s
            W_arr[i] = W_s
        self.built = hi

    # -- spec-level ball views -----------------------------------------

    def term_bounds(self, i: int) -> tuple[float, float]:
        """(a_lo, b_hi) certified bounds at prime index i."""
        self.ensure(i + 1)
        return float(self.a_lo[i]), float(self.b_hi[i])

    def zeta_term_prefix(self, n: int) -> RealBall:
        """Ball containing sum_{i<n} log p_i/(p_i^sigma - 1)."""
        self.ensure(n)
        return RealBall.from_endpoints(float(self.A_lo[n]), float(self.A_hi[n]))


def float_err_bound(n, A_hi_n, AB_hi_n):
    """Rigorous bound on the float64 accumulation error after n primes.

    Standard recursive-summation bound gamma_m * sum|x| with m = n + 4 to
    cover the comparison assembly; doubled to swallow the rounding of the
    bound's own evaluation.
    """
    m = n + 4
    g = m * _U / (1.0 - m * _U)
    return 2.0 * (g * (A_hi_n + AB_hi_n)) + 5e-324


# -- the right side -----------------------------------------------------


def rhs_value(cfg: PassConfig, q: int, bits: int | None = None) -> RealBall:
    """Certified upper enclosure of the inequality right side:
    c/(r (r log q + c)) + (r + c/log q)/R^2 + phi log q + E."""
    if q < 3:
        raise ValueError("q must be >= 3")
    bits = ball._bits(bits)
    c = RealBall.exact(cfg.c, bits)
    r = cfg.r
    R = cfg.R
    logq = ball.log(RealBall.exact(q, bits), bits)
    t1 = ball.div(c, ball.mul(r, ball.add(ball.mul(r, logq, bits), c, bits), bits), bits)
    t2 = ball.div(ball.add(r, ball.div(c, logq, bits), bits), ball.mul(R, R, bits), bits)
    t3 = ball.mul(cfg.phi, logq, bits)
    return ball.add(ball.add(t1, t2, bits), ball.add(t3, cfg.E, bits), bits)


def _log_interval(q: int) -> tuple[float, float]:
    """Certified float64 bounds of log q."""
    lm = float(_CTX53.log(q))
    return _next_dn(lm), _next_up(lm)


def rhs_float_bounds(cfg: PassConfig, q: int) -> tuple[float, float]:
    """Certified float64 bounds of the right side (shared by the scalar and
    vectorized paths; all directed-rounding steps are identical)."""
    L_lo, L_hi = _log_interval(q)
    nd, nu = _next_dn, _next_up
    # c/(r (r log q + c)): decreasing in both r and log q
    t1_hi = nu(cfg.c_hi / nd(cfg.r_lo * nd(nd(cfg.r_lo * L_lo) + cfg.c_lo)))
    t1_lo = nd(cfg.c_lo / nu(cfg.r_hi * nu(nu(cfg.r_hi * L_hi) + cfg.c_hi)))
    # (r + c/log q)/R^2
    r2_lo = nd(cfg.R_lo * cfg.R_lo)
    r2_hi = nu(cfg.R_hi * cfg.R_hi)
    t2_hi = nu(nu(cfg.r_hi + nu(cfg.c_hi / L_lo)) / r2_lo)
    t2_lo = nd(nd(cfg.r_lo + nd(cfg.c_lo / L_hi)) / r2_hi)
    # phi log q + E (phi and E enter through their certified upper ends)
    t3_hi = nu(cfg.phi_hi * L_hi)
    t3_lo = nd(cfg.phi_hi * L_lo)
    hi = nu(nu(t1_hi + t2_hi) + nu(t3_hi + cfg.E_hi))
    lo = nd(nd(t1_lo + t2_lo) + nd(t3_lo + cfg.E_hi))
    return lo, hi


# -- single terms (spec surface, full ball precision) --------------------


def lhs_term(d, p: int, sigma: RealBall, table: PrimeTable | None = None,
             buf: LegendreBuffer | None = None, bits: int | None = None) -> RealBall:
    """Ball enclosure of one prime's term
    log p/(p^sigma - 1) + chi(p) log p/(p^sigma - chi(p))."""
    from .primes import chi_at_prime

    bits = ball._bits(bits)
    dd = d.d if isinstance(d, Candidate) else int(d)
    chi = chi_at_prime(dd, p, buf)
    logp = ball.log(RealBall.exact(p, bits), bits)
    psig = ball.exp(ball.mul(sigma, logp, bits), bits)
    one = RealBall.exact(1, bits)
    term = ball.div(logp, ball.sub(psig, one, bits), bits)
    if chi == 0:
        return term
    chi_ball = RealBall.exact(chi, bits)
    part = ball.div(ball.mul(chi_ball, logp, bits), ball.sub(psig, chi_ball, bits), bits)
    return ball.add(term, part, bits)


def ball_lhs(d, cfg: PassConfig, table: PrimeTable, buf: LegendreBuffer | None,
             n_primes: int, bits: int | None = None) -> RealBall:
    """Full ball-arithmetic recomputation of the first n_primes terms.

    Used for precision escalation and for soundness re-checks; the cheap
    float path never feeds back into this."""
    bits = ball._bits(bits)
    if n_primes > len(table):
        raise TableTooSmall(f"need {n_primes} primes, table holds {len(table)}")
    with ball.precision(bits):
        sigma = ball.add(RealBall.exact(1, bits), cfg.r, bits)
        total = RealBall.exact(0, bits)
        for i in range(n_primes):
            total = ball.add(total, lhs_term(d, table.prime(i), sigma, table, buf, bits), bits)
    return total


# -- scalar verification -------------------------------------------------


def _chi_scalar(d: int, i: int, p: int, buf: LegendreBuffer | None) -> int:
    if buf is not None and i < buf.count:
        return buf.chi(d, i)
    return gmpy2.kronecker(d, p)


def _escalate(d: int, cfg: PassConfig, table: PrimeTable, buf: LegendreBuffer | None,
              n: int, q: int) -> Cmp:
    """Ball comparison at doubled precision, up to two escalations."""
    bits = ball.current_precision().mantissa_bits
    for _ in range(2):
        bits *= 2
        lhs = ball_lhs(d, cfg, table, buf, n, bits)
        rhs = rhs_value(cfg, q, bits)
        c = ball.ball_cmp(lhs, rhs, bits)
        if c is not Cmp.INDETERMINATE:
            return c
    return Cmp.INDETERMINATE


def verify_candidate(d, cfg: PassConfig, table: PrimeTable, buf: LegendreBuffer | None = None,
                     trace: list | None = None) -> VerificationOutcome:
    """Verify one candidate against one pass configuration.

    Accumulates the left side over primes in ascending order, comparing
    against the right side every BATCH primes (and exactly at the cutoff).
    Returns VIOLATED with the prime count at the first certified violation,
    FAILED if the cutoff is exhausted, INDETERMINATE only if precision
    escalation cannot resolve an overlapping final comparison.
    """
    dd = d.d if isinstance(d, Candidate) else int(d)
    q = abs(dd)
    cutoff = cfg.cutoff_primes
    if cutoff > len(table):
        raise TableTooSmall(f"cutoff {cutoff} exceeds table size {len(table)}")
    tt = cfg.term_table(table)
    tt.ensure(cutoff)
    rhs_lo, rhs_hi = rhs_float_bounds(cfg, q)
    rhs_ball = RealBall.from_endpoints(rhs_lo, rhs_hi)
    if cutoff == 0:
        zero = RealBall.exact(0)
        if trace is not None:
            trace.append((0, 0.0, 0.0))
        return VerificationOutcome(Status.FAILED, 0, zero, rhs_ball)

    s = 0.0
    A_lo, A_hi, AB_hi, W_hi = tt.A_lo, tt.A_hi, tt.AB_hi, tt.W_hi
    a_lo, b_hi = tt.a_lo, tt.b_hi
    primes_all = tt.table.primes
    i = 0
    while i < cutoff:
        stop = min(i + BATCH - (i % BATCH), cutoff)
        while i < stop:
            p = int(primes_all[i])
            chi = _chi_scalar(dd, i, p, buf)
            if chi == 1:
                delta = a_lo[i]
            elif chi == -1:
                delta = -b_hi[i]
            else:
                delta = 0.0
            s = s + delta
            i += 1
        n = i
        err = float_err_bound(n, A_hi[n], AB_hi[n])
        lhs_lo = (s + A_lo[n]) - err
        if trace is not None:
            trace.append((n, float(lhs_lo), float(((s + A_hi[n]) + err) + W_hi[n])))
        if lhs_lo > rhs_hi:
            lhs_hi = ((s + A_hi[n]) + err) + W_hi[n]
            return VerificationOutcome(
                Status.VIOLATED, n, RealBall.from_endpoints(lhs_lo, lhs_hi), rhs_ball
            )
    n = cutoff
    err = float_err_bound(n, A_hi[n], AB_hi[n])
    lhs_lo = (s + A_lo[n]) - err
    lhs_hi = ((s + A_hi[n]) + err) + W_hi[n]
    lhs_ball = RealBall.from_endpoints(lhs_lo, lhs_hi)
    if lhs_hi >= rhs_lo:
        # overlapping final comparison: escalate before giving up
        cmp_result = _escalate(dd, cfg, table, buf, n, q)
        if cmp_result is Cmp.CERTAINLY_GREATER:
            return VerificationOutcome(Status.VIOLATED, n, lhs_ball, rhs_ball)
        if cmp_result is Cmp.INDETERMINATE:
            return VerificationOutcome(Status.INDETERMINATE, n, lhs_ball, rhs_ball)
    return VerificationOutcome(Status.FAILED, n, lhs_ball, rhs_ball)


# -- vectorized verification ----------------------------------------------

_ST_VIOLATED = np.int8(Status.VIOLATED.value)
_ST_FAILED = np.int8(Status.FAILED.value)
_ST_INDET = np.int8(Status.INDETERMINATE.value)

_TAB8 = np.array([0, 1, 0, -1, 0, -1, 0, 1], dtype=np.int8)

# below this many active candidates the python loop with gmpy2.kronecker
# beats vectorized modular exponentiation
_MODEXP_MIN_LANES = 192


def _modexp_chi_vec(d_arr: np.ndarray, p: int) -> np.ndarray:
    """chi_d(p) for a vector of d via the Euler criterion d^((p-1)/2) mod p.

    Requires p < 2^32 so products stay inside uint64."""
    if p == 2:
        return _TAB8[d_arr % 8]
    pu = np.uint64(p)
    base = (d_arr % p).astype(np.uint64)
    acc = np.ones(len(d_arr), dtype=np.uint64)
    e = (p - 1) >> 1
    while e:
        if e & 1:
            acc = (acc * base) % pu
        e >>= 1
        if e:
            base = (base * base) % pu
    chi = np.zeros(len(d_arr), dtype=np.int8)
    chi[acc == 1] = 1
    chi[acc == pu - np.uint64(1)] = -1
    return chi


def verify_batch(d_arr: np.ndarray, cfg: PassConfig, table: PrimeTable,
                 buf: LegendreBuffer | None):
    """Verify many candidates at once (primes-major over the buffered range,
    then chunked per-candidate continuation).

    Float decisions are performed in exactly the same order and with
    exactly the same operations as verify_candidate, so outcomes are
    identical to the scalar path.  Returns (status int8, primes_used int64,
    lhs_lo, lhs_hi, rhs_lo, rhs_hi) arrays aligned with d_arr.
    """
    n_cand = len(d_arr)
    cutoff = cfg.cutoff_primes
    if cutoff > len(table):
        raise TableTooSmall(f"cutoff {cutoff} exceeds table size {len(table)}")
    tt = cfg.term_table(table)
    status = np.full(n_cand, _ST_FAILED, dtype=np.int8)
    primes_used = np.full(n_cand, cutoff, dtype=np.int64)
    out_lo = np.zeros(n_cand)
    out_hi = np.zeros(n_cand)
    rhs_lo = np.empty(n_cand)
    rhs_hi = np.empty(n_cand)
    qs = np.abs(d_arr)
    # log q via one rounding-certified call per distinct q
    uq, inv = np.unique(qs, return_inverse=True)
    u_lo = np.empty(len(uq))
    u_hi = np.empty(len(uq))
    for j, q in enumerate(uq.tolist()):
        u_lo[j], u_hi[j] = rhs_float_bounds(cfg, int(q))
    rhs_lo[:] = u_lo[inv]
    rhs_hi[:] = u_hi[inv]
    if cutoff == 0:
        return status, primes_used, out_lo, out_hi, rhs_lo, rhs_hi
    tt.ensure(min(cutoff, tt.CHUNK))

    act_d = d_arr.astype(np.int64)
    act_idx = np.arange(n_cand)
    act_s = np.zeros(n_cand)
    act_rhs_hi = rhs_hi.copy()
    buffered = min(buf.count if buf is not None else 0, cutoff)

    def settle_batch(n: int):
        """Violation check at a batch boundary; returns kept mask."""
        nonlocal act_d, act_idx, act_s, act_rhs_hi
        err = float_err_bound(n, tt.A_hi[n], tt.AB_hi[n])
        lhs_lo = (act_s + tt.A_lo[n]) - err
        viol = lhs_lo > act_rhs_hi
        if viol.any():
            won = act_idx[viol]
            status[won] = _ST_VIOLATED
            primes_used[won] = n
            out_lo[won] = lhs_lo[viol]
            out_hi[won] = ((act_s[viol] + tt.A_hi[n]) + err) + tt.W_hi[n]
            keep = ~viol
            act_d = act_d[keep]
            act_idx = act_idx[keep]
            act_s = act_s[keep]
            act_rhs_hi = act_rhs_hi[keep]

    i = 0
    vec_end = min(buffered, cutoff)
    while i < vec_end and len(act_d):
        tt.ensure(min(cutoff, i + tt.CHUNK))
        stop = min(i + BATCH - (i % BATCH), vec_end)
        while i < stop:
            chi = buf.chi_vec(act_d, i)
            delta = (chi == 1) * tt.a_lo[i] - (chi == -1) * tt.b_hi[i]
            act_s += delta
            i += 1
        if i % BATCH == 0 or i == cutoff:
            settle_batch(i)
    # past the buffer, stay primes-major with the Euler criterion while the
    # active set is wide enough to amortize the vector ops
    primes_all = table.primes
    while len(act_d) >= _MODEXP_MIN_LANES and i < cutoff:
        tt.ensure(min(cutoff, i + tt.CHUNK))
        stop = min(i + BATCH - (i % BATCH), cutoff)
        while i < stop:
            chi = _modexp_chi_vec(act_d, int(primes_all[i]))
            delta = (chi == 1) * tt.a_lo[i] - (chi == -1) * tt.b_hi[i]
            act_s += delta
            i += 1
        if i % BATCH == 0 or i == cutoff:
            settle_batch(i)
    # tail continuation: per-candidate scalar loops, chunked so the term
    # arrays convert to plain python lists once per chunk
    if len(act_d) and i < cutoff:
        _continue_scalar(act_d, act_idx, act_s, act_rhs_hi, i, cfg, tt, status,
                         primes_used, out_lo, out_hi)
    # remaining actives (if any) failed at the cutoff; fill enclosures and
    # escalate overlapping ones through the scalar path
    still = status[act_idx] == _ST_FAILED if len(act_idx) else np.zeros(0, dtype=bool)
    for k in np.flatnonzero(still) if len(act_idx) else ():
        idx = int(act_idx[k])
        n = cutoff
        err = float_err_bound(n, tt.A_hi[n], tt.AB_hi[n])
        lo = (act_s[k] + tt.A_lo[n]) - err
        hi = ((act_s[k] + tt.A_hi[n]) + err) + tt.W_hi[n]
        out_lo[idx] = lo
        out_hi[idx] = hi
        if hi >= rhs_lo[idx]:
            outcome = verify_candidate(int(d_arr[idx]), cfg, table, buf)
            status[idx] = np.int8(outcome.status.value)
            primes_used[idx] = outcome.primes_used
            out_lo[idx] = outcome.lhs.lower_float()
            out_hi[idx] = outcome.lhs.upper_float()
    return status, primes_used, out_lo, out_hi, rhs_lo, rhs_hi


def _continue_scalar(act_d, act_idx, act_s, act_rhs_hi, start, cfg: PassConfig,
                     tt: TermTable, status, primes_used, out_lo, out_hi) -> None:
    """Per-candidate continuation from prime index `start` to the cutoff.

    Chunk-major: every active candidate consumes one chunk of primes before
    the next chunk's term arrays are materialized."""
    cutoff = cfg.cutoff_primes
    kron = gmpy2.kronecker
    chunk = tt.CHUNK
    alive = list(range(len(act_d)))
    s_vals = act_s.tolist()
    d_vals = act_d.tolist()
    rhs_vals = act_rhs_hi.tolist()
    # per-candidate live state; batch decisions identical to verify_candidate
    lo = start
    while lo < cutoff and alive:
        hi = min(lo + chunk, cutoff)
        tt.ensure(hi)
        pl = tt.table.primes[lo:hi].tolist()
        al = tt.a_lo[lo:hi].tolist()
        bl = tt.b_hi[lo:hi].tolist()
        A_lo_arr, A_hi_arr, AB_arr, W_arr = tt.A_lo, tt.A_hi, tt.AB_hi, tt.W_hi
        next_alive = []
        for k in alive:
            d = d_vals[k]
            s = s_vals[k]
            rhs_hi_k = rhs_vals[k]
            i = lo
            won = False
            while i < hi:
                stop = min(i + BATCH - (i % BATCH), hi)
                j = i - lo
                while i < stop:
                    chi = kron(d, pl[j])
                    if chi == 1:
                        s = s + al[j]
                    elif chi == -1:
                        s = s + -bl[j]
                    else:
                        s = s + 0.0
                    i += 1
                    j += 1
                if i % BATCH == 0 or i == cutoff:
                    n = i
                    err = float_err_bound(n, A_hi_arr[n], AB_arr[n])
                    lhs_lo = (s + A_lo_arr[n]) - err
                    if lhs_lo > rhs_hi_k:
                        idx = int(act_idx[k])
                        status[idx] = _ST_VIOLATED
                        primes_used[idx] = n
                        out_lo[idx] = lhs_lo
                        out_hi[idx] = ((s + A_hi_arr[n]) + err) + W_arr[n]
                        won = True
                        break
            s_vals[k] = s
            if not won:
                next_alive.append(k)
        alive = next_alive
        lo = hi
    for k in alive:
        act_s[k] = s_vals[k]
