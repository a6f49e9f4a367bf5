import math
import random
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from scipy import integrate

import oracles
from lsz import ball, constants as C
from lsz.ball import RealBall

BITS = 256

TABLE_ROWS = [
    ("1.6", 0.22675, 1.1614),
    ("1.3", 0.23083, 1.1805),
    ("1.2", 0.23222, 1.1870),
    ("1.1", 0.23362, 1.1936),
]


def contains_mpf(b: RealBall, value) -> bool:
    return b.lower() <= value <= b.upper()


class TestZetaReal:
    def test_basel(self):
        z = C.zeta_real(RealBall.exact(2, BITS), BITS, target_width=1e-10)
        with mpmath.workprec(300):
            assert contains_mpf(z, mpmath.pi**2 / 6)
        assert float(z.width()) < 1e-9

    def test_frozen_value_at_three_halves(self):
        # oracle value: zeta(3/2) = 2.612375348685488343348568...
        z = C.zeta_real(RealBall.exact(Fraction(3, 2), BITS), BITS, target_width=1e-8)
        assert contains_mpf(z, oracles.zeta_euler_maclaurin(1.5, 300))
        assert abs(float(z.mid) - 2.612375348685488343348568) < 1e-7

    def test_pole_proximity_rejected(self):
        with pytest.raises(ball.DomainViolation):
            C.zeta_real(RealBall.from_endpoints(0.9, 1.1, BITS), BITS)

    def test_agrees_with_euler_maclaurin_at_50_points(self):
        rng = random.Random(5)
        for _ in range(50):
            s = rng.uniform(1.01, 5.0)
            z = C.zeta_real(RealBall.exact(Fraction(s).limit_denominator(10**9), BITS), BITS,
                            target_width=1e-8, max_terms=200_000)
            oracle = oracles.zeta_euler_maclaurin(s, 300)
            assert contains_mpf(z, oracle), s


class TestSupP:
    @staticmethod
    def grid_oracle(k: int) -> float:
        a = 1 / (4 * 4**k)
        b = 35 / (32 * 16**k)
        c = 1 / (4 * 4**k) - 5 / (32 * 16**k) + 61 / (192 * 64**k)
        ts = np.linspace(0.0, 100.0, 2_000_001)
        t2 = ts * ts
        vals = (-a * t2 * t2 + b * t2 + c) / (t2 + 1) ** 3
        # beyond t = 100 the numerator is dominated by -a t^4 < 0
        return float(vals.max())

    @pytest.mark.parametrize("k", [1, 2, 10])
    def test_matches_grid_oracle(self, k):
        p = C.sup_p(k, BITS)
        grid = self.grid_oracle(k)
        assert float(p.upper()) >= grid - 1e-12
        assert float(p.upper()) <= grid + 1e-9

    @pytest.mark.parametrize("k", [1, 2, 3, 7])
    def test_at_least_value_at_zero(self, k):
        c = 1 / (4 * 4**k) - 5 / (32 * 16**k) + 61 / (192 * 64**k)
        assert float(C.sup_p(k, BITS).upper()) >= c


class TestConvexityChain:
    def test_paper_values(self):
        conv = C.convexity_constants(BITS)
        for name, want in (("C4", 5.13781), ("C8", 9.49562), ("C16", 18.23874)):
            b = getattr(conv, name)
            assert abs(float(b.upper()) - want) <= 1e-4, name
            assert float(b.width()) < 1e-4

    def test_chain_monotone_and_exceeds_sqrt(self):
        conv = C.convexity_constants(BITS)
        assert float(conv.C4.lower()) < float(conv.C8.lower()) < float(conv.C16.lower())
        for k, (prev, cur) in enumerate(
            [(conv.C2, conv.C4), (conv.C4, conv.C8), (conv.C8, conv.C16)], start=1
        ):
            assert float(cur.lower()) > math.sqrt(float(prev.upper())), k

    def test_odd_truncation_rejected(self):
        with pytest.raises(ValueError):
            C._alternating_zeta_product(1, 7, BITS)


class TestDigamma:
    def test_psi_two_is_one_minus_gamma(self):
        psi = C.digamma(RealBall.exact(2, BITS), BITS)
        with mpmath.workprec(300):
            assert contains_mpf(psi, 1 - mpmath.euler)

    def test_against_mpmath_and_recurrence(self):
        rng = random.Random(6)
        one = RealBall.exact(1, BITS)
        for _ in range(100):
            x = Fraction(rng.uniform(0.01, 20.0)).limit_denominator(10**9)
            xb = RealBall.exact(x, BITS)
            psi = C.digamma(xb, BITS)
            assert contains_mpf(psi, oracles.digamma_mpmath(x, 300))
            # psi(x+1) - psi(x) - 1/x = 0 within enclosures
            lhs = ball.sub(C.digamma(ball.add(xb, one, BITS), BITS), psi, BITS)
            diff = ball.sub(lhs, ball.div(one, xb, BITS), BITS)
            assert diff.lower() <= 0 <= diff.upper()

    def test_requires_positive(self):
        with pytest.raises(ball.DomainViolation):
            C.digamma(RealBall.from_endpoints(-1.0, 2.0, BITS), BITS)


class TestZetaLogderivBound:
    def test_r_one_upper_bounds_truth(self):
        bound = C.zeta_logderiv_bound(RealBall.exact(1, BITS), BITS)
        partial, tail = oracles.von_mangoldt_zeta_logderiv(2.0, 200_000)
        assert float(bound.lower()) >= partial  # bound must exceed the truth
        assert partial <= 0.5700 <= partial + tail + 1e-6
        # psi((3+1)/2) = psi(2) = 1 - gamma component sanity
        assert 0.66 < float(bound.mid) < 0.67

    def test_small_r_dominated_by_reciprocal(self):
        r = Fraction(7, 100)
        bound = C.zeta_logderiv_bound(RealBall.exact(r, BITS), BITS)
        assert abs(float(bound.mid) - 1 / float(r)) < 1.0
        partial, tail = oracles.von_mangoldt_zeta_logderiv(1.07, 200_000)
        assert float(bound.lower()) >= partial - 1e-9

    def test_requires_positive_r(self):
        with pytest.raises(ball.DomainViolation):
            C.zeta_logderiv_bound(RealBall.from_endpoints(-0.01, 0.05, BITS), BITS)


class TestJ0Bound:
    def test_seven_eighths_numerator(self):
        r = RealBall.exact(Fraction(7, 100), BITS)
        b = RealBall.exact(Fraction(7, 8), BITS)
        j0 = C.j0_bound(r, b, BITS)
        pi_R = ball.mul(ball.pi(BITS), ball.add(r, b, BITS), BITS)
        numerator = ball.mul(j0, pi_R, BITS)
        assert float(numerator.upper()) <= 1.912
        assert float(numerator.lower()) > 1.9118

    def test_b_one_degenerates(self):
        r = RealBall.exact(Fraction(1, 10), BITS)
        j0 = C.j0_bound(r, RealBall.exact(1, BITS), BITS)
        want = (math.pi - 2 * math.log(2)) / (math.pi * 1.1)
        assert abs(float(j0.mid) - want) < 1e-12

    def test_half_b_against_quadrature(self):
        r, b = 0.1, 0.5
        j0 = C.j0_bound(RealBall.exact(Fraction(1, 10), BITS), RealBall.exact(Fraction(1, 2), BITS), BITS)
        R = r + b
        integral, err = integrate.quad(
            lambda t: math.cos(t) * math.log(1 + 1 / (b * math.cos(t))),
            -math.pi / 2, math.pi / 2, limit=200
        )
        oracle = integral / (math.pi * R)
        assert abs(float(j0.mid) - oracle) < max(1e-8, 10 * err)

    def test_domain(self):
        with pytest.raises(ball.DomainViolation):
            C.j0_bound(RealBall.exact(Fraction(1, 10), BITS), RealBall.exact(Fraction(3, 2), BITS), BITS)


@pytest.fixture(scope="module")
def row1_r():
    return C.r_from_lambda("1.6", BITS)


@pytest.fixture(scope="module")
def geometry(row1_r):
    return C.CircleGeometry(row1_r, BITS)


class TestGeometry:
    def test_theta_endpoints(self, geometry):
        half_pi = ball.div(ball.pi(BITS), RealBall.exact(2, BITS), BITS)
        assert geometry.theta[0].overlaps(half_pi)
        assert geometry.theta[5].is_exact() and geometry.theta[5].mid == 0

    def test_theta_strictly_decreasing(self, geometry):
        for k in range(5):
            assert geometry.theta[k].lower() > geometry.theta[k + 1].upper()

    def test_pythagorean_identity(self, geometry, row1_r):
        r1 = geometry.r1
        for k, xk in enumerate(C.CircleGeometry.X_OFFSETS, start=1):
            s = geometry.sin_theta(k)
            ratio = ball.div(ball.add(row1_r, RealBall.exact(xk, BITS), BITS), r1, BITS)
            total = ball.add(ball.mul(s, s, BITS), ball.mul(ratio, ratio, BITS), BITS)
            assert total.lower() <= 1 <= total.upper()
            assert float(total.width()) < 1e-20

    def test_A05_is_minus_one(self, geometry):
        a = geometry.A(0, 5)
        assert a.contains(-1) and float(a.width()) < 1e-20

    def test_diagonal_is_zero(self, geometry):
        assert geometry.A(3, 3).is_exact() and geometry.A(3, 3).mid == 0
        assert geometry.B(3, 3).is_exact() and geometry.B(3, 3).mid == 0


def _k_quadrature_oracle(geom, conv, r, k):
    """K_k re-derived by numerical quadrature of the arc integrand bound,
    solved out of two assembled evaluations at different moduli."""
    r1 = r + 7.0 / 8
    theta = [float(t.mid) for t in geom.theta]
    C2, C4, C8 = (float(conv.C2.mid), float(conv.C4.mid), float(conv.C8.mid))

    def assembled(q, k):
        if k in (2, 3):
            big = 15.0 / 8 + 2.0 ** (k - 4) + 2 * r
            cname = {2: (C4, C8), 3: (C2, C4)}[k]
            e1, e2 = 2.0 ** (k - 5), 2.0 ** (k - 6)

            def logL(t):  # Phragmen-Lindelof interpolation bound on the arc
                x = r + r1 * math.cos(t)
                w1 = (-e1 - x) / e1
                w2 = (2.0 ** (k - 4) + x) / e1
                return (w1 * (math.log(cname[0]) + e1 * math.log(q * big))
                        + w2 * (math.log(cname[1]) + e2 * math.log(q * big)))
        else:
            big = 7.0 / 8 + 2.0 ** (3 - k)
            cname = {4: (C2, C4), 5: (C4, C8)}[k]
            e1, e2 = 2.0 ** (2 - k), 2.0 ** (1 - k)
            mod3 = math.hypot(2 + r - r1 * math.cos(theta[3]), r1 * math.sin(theta[3]))

            def logL(t):
                x = r + r1 * math.cos(t)
                prefix = (-0.5 - x) * math.log(q / (2 * math.pi) * mod3)
                w1 = (1 - 2.0 ** (2 - k) + x) / e1
                w2 = (2.0 ** (3 - k) - 1 - x) / e1
                return (prefix + w1 * (math.log(cname[0]) + e1 * math.log(q * big))
                        + w2 * (math.log(cname[1]) + e2 * math.log(q * big)))

        lo, hi = math.pi - theta[k - 1], math.pi - theta[k]
        val, _ = integrate.quad(lambda t: -math.cos(t) * logL(t), lo, hi, limit=200)
        return 2.0 * val / (math.pi * r1)

    # assembled(q) = coef * log(q) + const; solve from two moduli
    q1, q2 = 10.0, 1000.0
    v1, v2 = assembled(q1, k), assembled(q2, k)
    coef = (v2 - v1) / (math.log(q2) - math.log(q1))
    const = v1 - coef * math.log(q1)
    return coef, const


class TestKConstants:
    def test_against_quadrature_oracle(self, geometry, row1_r):
        conv = C.convexity_constants(BITS)
        ks = C.k_constants(geometry, conv, BITS)
        r = float(row1_r.mid)
        r1 = r + 7.0 / 8
        for k in (2, 3, 4, 5):
            coef, const = _k_quadrature_oracle(geometry, conv, r, k)
            a = float(geometry.A(k - 1, k).mid)
            b = float(geometry.B(k - 1, k).mid)
            want_coef = r * a / (math.pi * r1) + b / math.pi
            assert abs(coef - want_coef) < 1e-9, k
            ours = float(ks[f"K{k}"].mid)
            if k in (4, 5):
                # the arc also carries its share of the K_R term
                mod3 = math.hypot(2 + r - r1 * math.cos(float(geometry.theta[3].mid)),
                                  r1 * math.sin(float(geometry.theta[3].mid)))
                kr_arc = (2 * (math.log(mod3) - math.log(2 * math.pi))
                          * ((r + 0.5) / (math.pi * r1) * a + b / math.pi))
                ours += kr_arc
            assert abs(const - ours) < 1e-7, k

    def test_kr_split_sums_to_kr(self, geometry, row1_r):
        conv = C.convexity_constants(BITS)
        ks = C.k_constants(geometry, conv, BITS)
        # A and B are additive over adjacent arcs, so KR(3,5) = KR(3,4) + KR(4,5)
        a_sum = ball.add(geometry.A(3, 4), geometry.A(4, 5), BITS)
        assert a_sum.overlaps(geometry.A(3, 5))
        b_sum = ball.add(geometry.B(3, 4), geometry.B(4, 5), BITS)
        assert b_sum.overlaps(geometry.B(3, 5))
        assert float(ks["KR"].mid) < 0


class TestPhiAndE:
    @pytest.mark.parametrize("lam,phi_t,e_t", TABLE_ROWS)
    def test_reference_rows(self, lam, phi_t, e_t):
        ic = C.phi_and_e(C.r_from_lambda(lam, BITS), BITS)
        assert float(ic.phi.width()) < 1e-5
        assert float(ic.E.width()) < 1e-5
        assert abs(float(ic.phi.upper()) - phi_t) <= 1e-4
        assert abs(float(ic.E.upper()) - e_t) <= 1e-3
        # upper ends never exceed the reference values by more than 1e-4
        assert float(ic.phi.upper()) <= phi_t + 1e-4
        assert float(ic.E.upper()) <= e_t + 1e-4

    @pytest.mark.parametrize("r", [Fraction(1, 10**4), Fraction(1, 10**3), Fraction(1, 100), Fraction(1, 5)])
    def test_phi_below_quarter(self, r):
        ic = C.phi_and_e(RealBall.exact(r, BITS), BITS)
        assert float(ic.phi.upper()) < 0.25
        assert float(ic.phi.lower()) > 0

    def test_e_definition(self, row1_r):
        ic = C.phi_and_e(row1_r, BITS)
        one = RealBall.exact(1, BITS)
        recomputed = ball.add(
            ic.K, ball.mul(ic.rho, ball.log(ball.add(one, ball.div(one, row1_r, BITS), BITS), BITS), BITS), BITS
        )
        assert recomputed.overlaps(ic.E)

    def test_domain(self):
        with pytest.raises(ball.DomainViolation):
            C.phi_and_e(RealBall.exact(Fraction(3, 10), BITS), BITS)
        with pytest.raises(ball.DomainViolation):
            C.phi_and_e(RealBall.exact(0, BITS), BITS)
