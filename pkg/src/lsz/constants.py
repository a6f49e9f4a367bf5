"""Certified derivation of the explicit inequality constants.

Builds, in ball arithmetic: the convexity-constant chain C4/C8/C16 from
C2 = 2.97655, the circle geometry (theta_k and the A/B trigonometric
integrals), the K-constants, and finally phi, rho, K and E for a given
r in (0, 1/4).  Upper ends of phi and E are what verification uses; they
only ever weaken the right side of the inequality, so enclosure slack is
always sound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from . import ball
from .ball import DomainViolation, RealBall

__all__ = [
    "CONSTANTS_BITS",
    "CircleGeometry",
    "ConvexityConstants",
    "InequalityConstants",
    "convexity_constants",
    "convexity_step",
    "digamma",
    "j0_bound",
    "k_constants",
    "phi_and_e",
    "sup_p",
    "zeta_logderiv_bound",
    "zeta_real",
]

CONSTANTS_BITS = 256

#: replaces the exact J0 integral constant in the assembled K (the value
#: pi/b - 4 sqrt(b^-2-1) atan(...) - 2 log(2b) at b = 7/8 is 1.91191... <= 1.912)
J0_NUMERATOR = Fraction(1912, 1000)

C2_EXACT = Fraction(297655, 100000)

_BERNOULLI = [
    Fraction(1, 6),
    Fraction(-1, 30),
    Fraction(1, 42),
    Fraction(-1, 30),
    Fraction(5, 66),
    Fraction(-691, 2730),
]
_BERNOULLI_NEXT = Fraction(7, 6)  # first omitted term bounds the remainder


def _x(v, bits=None) -> RealBall:
    return RealBall.exact(v, bits)


# -- Riemann zeta on the real axis --------------------------------------


def zeta_real(
    s: RealBall,
    bits: int | None = None,
    target_width: float | None = None,
    max_terms: int = 1_000_000,
) -> RealBall:
    """Certified zeta(s) for s certainly > 1.

    Truncated Dirichlet sum over n < M plus the integral bracket for the
    tail: sum_{n>=M} n^-s lies in [M^(1-s)/(s-1), M^(1-s)/(s-1) + M^-s].
    M is chosen so the bracket width M^-s meets the target; near s = 1
    the achievable width is limited by max_terms (the returned radius is
    honest either way).
    """
    bits = ball._bits(bits)
    s_lo = s.lower(bits)
    if s_lo <= 1:
        raise DomainViolation(f"zeta_real needs s certainly > 1, lower end is {s_lo}")
    if target_width is None:
        target_width = 2.0 ** -(bits // 2)
    slo_f = float(s_lo)
    # M^-s <= target  =>  M >= target^(-1/s)
    M = int(math.exp(min(60.0, -math.log(target_width) / slo_f))) + 1
    M = max(16, min(M, max_terms))
    # partial sums carry only as much working precision as the bracket warrants
    wbits = max(64, min(bits, int(-math.log2(target_width)) + 32))
    dn, up = ball._dn(wbits), ball._up(wbits)
    shi = s.upper(bits)
    sum_lo = dn.add(0, 1)  # n = 1 term
    sum_hi = up.add(0, 1)
    for n in range(2, M):
        ln_dn = dn.log(n)
        ln_up = up.log(n)
        sum_lo = dn.add(sum_lo, dn.exp(-up.mul(shi, ln_up)))
        sum_hi = up.add(sum_hi, up.exp(-dn.mul(s_lo, ln_dn)))
    partial = RealBall.from_endpoints(sum_lo, sum_hi, bits)
    m_ball = _x(M, bits)
    s_minus_1 = ball.sub(s, _x(1, bits), bits)
    integral = ball.div(
        ball.exp(ball.mul(s_minus_1, ball.neg(ball.log(m_ball, bits)), bits), bits),
        s_minus_1,
        bits,
    )
    first = ball.exp(ball.mul(ball.neg(s), ball.log(m_ball, bits), bits), bits)
    tail = RealBall.from_endpoints(integral.lower(bits), ball.add(integral, first, bits).upper(bits), bits)
    return ball.add(partial, tail, bits)


# -- convexity chain -----------------------------------------------------


def sup_p(k: int, bits: int | None = None) -> RealBall:
    """Certified enclosure of the supremum P entering the convexity step.

    The integrand is even in t; with u = t^2 it becomes
    g(u) = (-a u^2 + b u + c)/(u+1)^3 on u >= 0, whose critical points
    solve a u^2 - (2a+2b) u + (b-3c) = 0.  The sup is the max of g over
    the non-negative real roots, u = 0 (g = c), and the u -> oo limit 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    bits = ball._bits(bits)
    four_k = Fraction(1, 4 * 4**k)
    a = _x(four_k, bits)
    b = _x(Fraction(35, 32 * 16**k), bits)
    c = _x(four_k - Fraction(5, 32 * 16**k) + Fraction(61, 192 * 64**k), bits)

    def g(u: RealBall) -> RealBall:
        num = ball.add(ball.sub(ball.mul(b, u), ball.mul(a, ball.mul(u, u))), c)
        den = ball.pow_(ball.add(u, _x(1, bits)), _x(3, bits), bits)
        return ball.div(num, den, bits)

    candidates = [c, _x(0, bits)]  # g(0) = c and the limit at infinity
    two_ab = ball.mul(_x(2, bits), ball.add(a, b))
    disc = ball.sub(ball.mul(two_ab, two_ab), ball.mul(_x(4, bits), ball.mul(a, ball.sub(b, ball.mul(_x(3, bits), c)))))
    if disc.upper(bits) > 0:
        root_disc = ball.sqrt(
            RealBall.from_endpoints(max(disc.lower(bits), type(disc.lower(bits))(0)), disc.upper(bits), bits), bits
        )
        for sign in (1, -1):
            u = ball.div(
                ball.add(two_ab, ball.mul(_x(sign, bits), root_disc)) if sign > 0 else ball.sub(two_ab, root_disc),
                ball.mul(_x(2, bits), a),
                bits,
            )
            if u.upper(bits) < 0:
                continue
            if u.lower(bits) < 0:
                u = RealBall.from_endpoints(type(u.lower(bits))(0), u.upper(bits), bits)
            candidates.append(g(u))
    lo = max(cand.lower(bits) for cand in candidates)
    hi = max(cand.upper(bits) for cand in candidates)
    return RealBall.from_endpoints(lo, hi, bits)


def _alternating_zeta_product(k: int, J: int, bits: int) -> RealBall:
    """Enclosure of prod_j zeta(1 + 1/2^(k+1) + j/2^k)^((-1)^j).

    The log of the product is an alternating sum with decreasing terms,
    so the partial sum through an even j upper-bounds the full sum and
    one further term gives the lower bracket.
    """
    if J % 2 != 0:
        raise ValueError("J must be even so the truncation upper-bounds the product")
    half = Fraction(1, 2**(k + 1))
    step = Fraction(1, 2**k)
    log_sum = _x(0, bits)
    upper_end = None
    for j in range(J + 2):
        s_j = _x(1 + half + j * step, bits)
        # width schedule: only the first few factors are expensive
        tw = 3e-6 / (j + 1) ** 2 if j < 40 else 1e-10
        z = zeta_real(s_j, bits, target_width=tw)
        term = ball.log(z, bits)
        log_sum = ball.sub(log_sum, term) if j % 2 else ball.add(log_sum, term)
        if j == J:
            upper_end = log_sum.upper(bits)
    bracket = RealBall.from_endpoints(log_sum.lower(bits), upper_end, bits)
    return ball.exp(bracket, bits)


def convexity_step(k: int, C: RealBall, bits: int | None = None, J: int = 1000) -> RealBall:
    """One convexity iteration: sqrt(C) e^(P/2^(k+3)) prod zeta(...)^(+-1)."""
    bits = ball._bits(bits)
    if C.lower(bits) <= 0:
        raise DomainViolation("C must be certainly positive")
    P = sup_p(k, bits)
    factor = ball.exp(ball.div(P, _x(2**(k + 3), bits), bits), bits)
    prod = _alternating_zeta_product(k, J, bits)
    return ball.mul(ball.mul(ball.sqrt(C, bits), factor, bits), prod, bits)


@dataclass(frozen=True)
class ConvexityConstants:
    C2: RealBall
    C4: RealBall
    C8: RealBall
    C16: RealBall


@lru_cache(maxsize=4)
def convexity_constants(bits: int = CONSTANTS_BITS, J: int = 1000) -> ConvexityConstants:
    """The chain C2 -> C4 -> C8 -> C16 (C2 = 2.97655 exactly as given)."""
    C2 = _x(C2_EXACT, bits)
    C4 = convexity_step(1, C2, bits, J)
    C8 = convexity_step(2, C4, bits, J)
    C16 = convexity_step(3, C8, bits, J)
    return ConvexityConstants(C2, C4, C8, C16)


# -- digamma and the zeta logarithmic-derivative bound -------------------


def digamma(x: RealBall, bits: int | None = None) -> RealBall:
    """Certified psi(x) for x certainly > 0.

    Recurrence psi(x+1) = psi(x) + 1/x lifts the argument above 10, then
    the asymptotic series through the B12 term applies; for positive real
    argument the remainder is bounded by the first omitted term.
    """
    bits = ball._bits(bits)
    if x.lower(bits) <= 0:
        raise DomainViolation("digamma needs a certainly positive argument")
    shift = _x(0, bits)
    y = x
    one = _x(1, bits)
    while y.lower(bits) < 10:
        shift = ball.add(shift, ball.div(one, y, bits), bits)
        y = ball.add(y, one, bits)
    ln = ball.log(y, bits)
    inv = ball.div(one, y, bits)
    inv2 = ball.mul(inv, inv, bits)
    result = ball.sub(ln, ball.div(inv, _x(2, bits), bits), bits)
    power = inv2
    for n, b2n in enumerate(_BERNOULLI, start=1):
        term = ball.mul(_x(Fraction(b2n, 2 * n), bits), power, bits)
        result = ball.sub(result, term, bits)
        power = ball.mul(power, inv2, bits)
    rem_hi = ball.mul(_x(Fraction(abs(_BERNOULLI_NEXT), 14), bits), power, bits).upper(bits)
    remainder = RealBall.from_endpoints(-rem_hi, rem_hi, bits)
    result = ball.add(result, remainder, bits)
    return ball.sub(result, shift, bits)


def zeta_logderiv_bound(r: RealBall, bits: int | None = None) -> RealBall:
    """Upper enclosure of -zeta'/zeta(1+r): 1/r - log 2pi + gamma/2 + 1
    + (1/2) psi((3+r)/2)."""
    bits = ball._bits(bits)
    if r.lower(bits) <= 0:
        raise DomainViolation("r must be certainly positive")
    one = _x(1, bits)
    half = _x(Fraction(1, 2), bits)
    psi = digamma(ball.mul(ball.add(_x(3, bits), r, bits), half, bits), bits)
    out = ball.div(one, r, bits)
    out = ball.sub(out, ball.log_2pi(bits), bits)
    out = ball.add(out, ball.mul(ball.euler_gamma(bits), half, bits), bits)
    out = ball.add(out, one, bits)
    return ball.add(out, ball.mul(psi, half, bits), bits)


# -- the J0 arc bound ----------------------------------------------------


def j0_bound(r: RealBall, b: RealBall, bits: int | None = None) -> RealBall:
    """Certified bound for the right half-circle integral J0 with R = r + b:
    (1/(pi R)) (pi/b - 4 sqrt(b^-2 - 1) atan(sqrt((1/b - 1)/(1/b + 1))) - 2 log 2b).
    """
    bits = ball._bits(bits)
    if not (0 < b.lower(bits) and b.upper(bits) <= 1):
        raise DomainViolation("need 0 < b <= 1 certainly")
    if r.lower(bits) <= 0:
        raise DomainViolation("need r certainly positive")
    one = _x(1, bits)
    R = ball.add(r, b, bits)
    pi_ = ball.pi(bits)
    binv = ball.div(one, b, bits)

    def clamp_nonneg(v: RealBall) -> RealBall:
        # true value is >= 0 whenever b <= 1; rounding may dip below
        if v.lower(bits) >= 0:
            return v
        return RealBall.from_endpoints(type(v.lower(bits))(0), max(v.upper(bits), type(v.upper(bits))(0)), bits)

    root1 = ball.sqrt(clamp_nonneg(ball.sub(ball.mul(binv, binv, bits), one, bits)), bits)
    frac = ball.div(ball.sub(binv, one, bits), ball.add(binv, one, bits), bits)
    root2 = ball.sqrt(clamp_nonneg(frac), bits)
    inner = ball.sub(
        ball.sub(ball.div(pi_, b, bits), ball.mul(_x(4, bits), ball.mul(root1, ball.atan(root2, bits), bits), bits), bits),
        ball.mul(_x(2, bits), ball.log(ball.mul(_x(2, bits), b, bits), bits), bits),
        bits,
    )
    return ball.div(inner, ball.mul(pi_, R, bits), bits)


# -- circle geometry -----------------------------------------------------


class CircleGeometry:
    """theta_k = acos((r + x_k)/r1) with x = (1/8, 1/4, 1/2, 3/4), plus the
    arc integrals A(n,m) = sin theta_m - sin theta_n and
    B(n,m) = (theta_n - theta_m)/2 + (sin theta_n cos theta_n - sin theta_m cos theta_m)/2.
    """

    X_OFFSETS = (Fraction(1, 8), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))

    def __init__(self, r: RealBall, bits: int | None = None):
        bits = ball._bits(bits)
        self.bits = bits
        self.r = r
        self.r1 = ball.add(r, _x(Fraction(7, 8), bits), bits)
        two = _x(2, bits)
        theta = [ball.div(ball.pi(bits), two, bits)]
        for xk in self.X_OFFSETS:
            ratio = ball.div(ball.add(r, _x(xk, bits), bits), self.r1, bits)
            theta.append(ball.acos(ratio, bits))
        theta.append(_x(0, bits))
        self.theta = tuple(theta)
        self._sin = tuple(ball.sin(t, bits) for t in self.theta)
        self._cos = tuple(ball.cos(t, bits) for t in self.theta)

    def sin_theta(self, k: int) -> RealBall:
        return self._sin[k]

    def cos_theta(self, k: int) -> RealBall:
        return self._cos[k]

    def A(self, n: int, m: int) -> RealBall:
        if n == m:
            return _x(0, self.bits)
        return ball.sub(self._sin[m], self._sin[n], self.bits)

    def B(self, n: int, m: int) -> RealBall:
        if n == m:
            return _x(0, self.bits)
        bits = self.bits
        half = _x(Fraction(1, 2), bits)
        ang = ball.mul(ball.sub(self.theta[n], self.theta[m], bits), half, bits)
        sc_n = ball.mul(self._sin[n], self._cos[n], bits)
        sc_m = ball.mul(self._sin[m], self._cos[m], bits)
        return ball.add(ang, ball.mul(ball.sub(sc_n, sc_m, bits), half, bits), bits)


# -- K-constants and the final assembly ----------------------------------


@dataclass(frozen=True)
class InequalityConstants:
    r: RealBall
    R: RealBall
    phi: RealBall
    rho: RealBall
    K1: RealBall
    K2: RealBall
    K3: RealBall
    K4: RealBall
    K5: RealBall
    KR: RealBall
    K: RealBall
    E: RealBall

    def k_sum(self) -> RealBall:
        return self.K1 + self.K2 + self.K3 + self.K4 + self.K5


def _coef(geom: CircleGeometry, shift: RealBall, n: int, m: int, bits: int) -> RealBall:
    """(shift/(pi r1)) A(n,m) + B(n,m)/pi, the recurring arc coefficient."""
    pi_ = ball.pi(bits)
    a_part = ball.div(ball.mul(shift, geom.A(n, m), bits), ball.mul(pi_, geom.r1, bits), bits)
    return ball.add(a_part, ball.div(geom.B(n, m), pi_, bits), bits)


def k_constants(geom: CircleGeometry, conv: ConvexityConstants, bits: int | None = None) -> dict:
    """K1..K5 and K_R for the given geometry and convexity constants."""
    bits = ball._bits(bits)
    r = geom.r
    one = _x(1, bits)
    two = _x(2, bits)
    pi_ = ball.pi(bits)
    logC = {2: ball.log(conv.C2, bits), 4: ball.log(conv.C4, bits), 8: ball.log(conv.C8, bits)}

    out = {}
    # K1: from the first arc, where the trivial bound along Re s = 1 + r applies
    b01 = geom.B(0, 1)
    denom1 = ball.mul(pi_, ball.add(r, _x(Fraction(1, 8), bits), bits), bits)
    k1_factor = ball.add(
        ball.mul(two, logC[8], bits),
        ball.mul(_x(Fraction(1, 8), bits), ball.log(ball.add(ball.mul(two, r, bits), two, bits), bits), bits),
        bits,
    )
    out["K1"] = ball.mul(k1_factor, ball.div(b01, denom1, bits), bits)

    # K2, K3: strips between Re s = 1/2 and 7/8
    for k in (2, 3):
        big = _x(Fraction(15, 8) + Fraction(1, 2**(4 - k)), bits)
        width = ball.log(ball.add(big, ball.mul(two, r, bits), bits), bits)
        cl = _x(2**(6 - k), bits)
        f1 = ball.add(ball.mul(cl, logC[2**(4 - k)], bits), ball.mul(two, width, bits), bits)
        f2 = ball.add(ball.mul(cl, logC[2**(5 - k)], bits), width, bits)
        c1 = _coef(geom, ball.add(r, _x(Fraction(1, 2**(5 - k)), bits), bits), k - 1, k, bits)
        c2 = _coef(geom, ball.add(r, _x(Fraction(1, 2**(4 - k)), bits), bits), k - 1, k, bits)
        out[f"K{k}"] = ball.sub(ball.mul(f1, c1, bits), ball.mul(f2, c2, bits), bits)

    # K4, K5: strips between Re s = 1/8 and 1/2, via the functional equation
    for k in (4, 5):
        big = _x(Fraction(7, 8) + Fraction(1, 2**(k - 3)), bits)
        width = ball.log(big, bits)
        cl = _x(2**(k - 1), bits)
        f1 = ball.add(ball.mul(cl, logC[2**(k - 3)], bits), ball.mul(two, width, bits), bits)
        f2 = ball.add(ball.mul(cl, logC[2**(k - 2)], bits), width, bits)
        c1 = _coef(geom, ball.sub(ball.add(r, one, bits), _x(Fraction(1, 2**(k - 2)), bits), bits), k - 1, k, bits)
        c2 = _coef(geom, ball.sub(ball.add(r, one, bits), _x(Fraction(1, 2**(k - 3)), bits), bits), k - 1, k, bits)
        out[f"K{k}"] = ball.add(ball.neg(ball.mul(f1, c1, bits)), ball.mul(f2, c2, bits), bits)

    # K_R: the Gamma-ratio contribution, |2 + r - r1 e^(i theta_3)| via components
    re_part = ball.sub(ball.add(two, r, bits), ball.mul(geom.r1, geom.cos_theta(3), bits), bits)
    im_part = ball.mul(geom.r1, geom.sin_theta(3), bits)
    modulus = ball.sqrt(
        ball.add(ball.mul(re_part, re_part, bits), ball.mul(im_part, im_part, bits), bits), bits
    )
    kr_factor = ball.mul(two, ball.sub(ball.log(modulus, bits), ball.log_2pi(bits), bits), bits)
    out["KR"] = ball.mul(kr_factor, _coef(geom, ball.add(r, _x(Fraction(1, 2), bits), bits), 3, 5, bits), bits)
    return out


def phi_and_e(r: RealBall, bits: int | None = None, J: int = 1000) -> InequalityConstants:
    """All inequality constants for r certainly inside (0, 1/4)."""
    bits = CONSTANTS_BITS if bits is None else bits
    if not (0 < r.lower(bits) and r.upper(bits) < 0.25):
        raise DomainViolation(f"r must be certainly inside (0, 1/4), got [{r.lower(bits)}, {r.upper(bits)}]")
    conv = convexity_constants(bits, J)
    geom = CircleGeometry(r, bits)
    one = _x(1, bits)
    two = _x(2, bits)
    half = _x(Fraction(1, 2), bits)
    pi_ = ball.pi(bits)
    r1 = geom.r1

    phi = ball.add(
        ball.add(
            ball.div(ball.mul(r, geom.A(1, 5), bits), ball.mul(pi_, r1, bits), bits),
            ball.div(geom.B(0, 1), ball.mul(pi_, ball.add(ball.mul(_x(8, bits), r, bits), one, bits), bits), bits),
            bits,
        ),
        ball.div(geom.B(1, 5), pi_, bits),
        bits,
    )
    rho = ball.neg(
        ball.add(
            ball.div(ball.mul(two, geom.A(0, 1), bits), ball.mul(pi_, r1, bits), bits),
            ball.div(ball.mul(two, geom.B(0, 1), bits), ball.mul(pi_, ball.add(r, _x(Fraction(1, 8), bits), bits), bits), bits),
            bits,
        )
    )
    ks = k_constants(geom, conv, bits)
    k_sum = ks["K1"]
    for name in ("K2", "K3", "K4", "K5"):
        k_sum = ball.add(k_sum, ks[name], bits)
    psi = digamma(ball.mul(ball.add(_x(3, bits), r, bits), half, bits), bits)
    K = ball.div(_x(J0_NUMERATOR, bits), ball.mul(pi_, r1, bits), bits)
    K = ball.add(K, ks["KR"], bits)
    K = ball.add(K, k_sum, bits)
    K = ball.sub(K, ball.log_2pi(bits), bits)
    K = ball.add(K, ball.mul(ball.euler_gamma(bits), half, bits), bits)
    K = ball.add(K, one, bits)
    K = ball.add(K, ball.mul(psi, half, bits), bits)
    E = ball.add(K, ball.mul(rho, ball.log(ball.add(one, ball.div(one, r, bits), bits), bits), bits), bits)
    return InequalityConstants(
        r=r,
        R=r1,
        phi=phi,
        rho=rho,
        K1=ks["K1"],
        K2=ks["K2"],
        K3=ks["K3"],
        K4=ks["K4"],
        K5=ks["K5"],
        KR=ks["KR"],
        K=K,
        E=E,
    )


def r_from_lambda(lam, bits: int | None = None) -> RealBall:
    """r = lambda / log(10^10), the scaling tied to the reference modulus."""
    bits = CONSTANTS_BITS if bits is None else bits
    lam_ball = RealBall.exact(lam, bits)
    log10_10 = ball.mul(_x(10, bits), ball.log(_x(10, bits), bits), bits)
    return ball.div(lam_ball, log10_10, bits)
