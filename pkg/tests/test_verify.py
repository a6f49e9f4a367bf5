import math
from fractions import Fraction

import gmpy2
import numpy as np
import pytest

from lsz import ball, primes as P, verify as V
from lsz.ball import Cmp, RealBall


@pytest.fixture(scope="module")
def table():
    return P.sieve_primes(60_000)


@pytest.fixture(scope="module")
def buf(table):
    return P.LegendreBuffer(table, 10_000)


@pytest.fixture(scope="module")
def row1(table):
    return V.PassConfig.from_lambda("1.6", Fraction(1, 5), 60_000)


def small_cfg(row1, cutoff):
    return V.PassConfig(r=row1.r, phi=row1.phi, E=row1.E, c=row1.c, cutoff_primes=cutoff)


class TestPassConfig:
    def test_field_relations(self, row1):
        one_plus_r = ball.add(RealBall.exact(1), row1.r)
        assert row1.sigma.overlaps(one_plus_r)
        R = ball.add(row1.r, RealBall.exact(Fraction(7, 8)))
        assert row1.R.overlaps(R)

    def test_validation(self, row1):
        with pytest.raises(ValueError):
            V.PassConfig(r=RealBall.exact(Fraction(1, 2)), phi=row1.phi, E=row1.E,
                         c=Fraction(1, 5), cutoff_primes=10)
        with pytest.raises(ValueError):
            V.PassConfig(r=row1.r, phi=row1.phi, E=row1.E, c=Fraction(-1, 5), cutoff_primes=10)


class TestRhs:
    def test_against_plain_double_formula(self, row1):
        q = 10**10
        got = V.rhs_value(row1, q)
        r = float(row1.r.mid)
        L = math.log(q)
        c = 0.2
        R = r + 7 / 8
        oracle = c / (r * (r * L + c)) + (r + c / L) / R**2 + float(row1.phi.mid) * L + float(row1.E.mid)
        assert abs(float(got.mid) - oracle) < 1e-6

    def test_phi_log_q_term(self, row1):
        q = 10**10
        term = ball.mul(row1.phi, ball.log(RealBall.exact(q)))
        assert abs(float(term.mid) - float(row1.phi.mid) * math.log(q)) < 1e-9

    def test_monotone_probe(self, row1):
        # numerical observation on this row, not a theorem
        assert float(V.rhs_value(row1, 10**6).mid) < float(V.rhs_value(row1, 10**10).mid)

    def test_float_bounds_cover_certified_upper(self, row1):
        # the float path pins phi and E at their certified upper ends, so its
        # upper bound dominates the ball's and its width stays tiny
        for q in (400_003, 10**7, 10**10):
            lo, hi = V.rhs_float_bounds(row1, q)
            b = V.rhs_value(row1, q)
            assert hi >= float(b.upper()) - 1e-12
            assert lo >= float(b.lower()) - 1e-12
            assert lo <= hi and hi - lo < 2e-6

    def test_rejects_tiny_q(self, row1):
        with pytest.raises(ValueError):
            V.rhs_value(row1, 2)


class TestLhsTerm:
    def test_ramified(self, row1, table, buf):
        p = 5
        term = V.lhs_term(5, p, row1.sigma, table, buf)
        sig = float(row1.sigma.mid)
        assert abs(float(term.mid) - math.log(p) / (p**sig - 1)) < 1e-12

    def test_inert_two_fraction_identity(self, row1, table, buf):
        # chi = -1: the summed term equals 2 log p / (p^(2 sigma) - 1)
        d, p = -3, 7
        assert P.chi_at_prime(d, p, buf) == 1  # pick a chi=-1 pair instead below
        d, p = 5, 7  # (5|7) = -1
        assert P.chi_at_prime(d, p, buf) == -1
        term = V.lhs_term(d, p, row1.sigma, table, buf)
        sig = float(row1.sigma.mid)
        oracle = 2 * math.log(p) / (p ** (2 * sig) - 1)
        assert abs(float(term.mid) - oracle) < 1e-12
        two_sigma = ball.mul(RealBall.exact(2), row1.sigma)
        alt = ball.div(
            ball.mul(RealBall.exact(2), ball.log(RealBall.exact(p))),
            ball.sub(ball.exp(ball.mul(two_sigma, ball.log(RealBall.exact(p)))), RealBall.exact(1)),
        )
        assert term.overlaps(alt)

    def test_terms_nonnegative(self, row1, table, buf):
        rng = np.random.default_rng(21)
        sig = row1.sigma
        for _ in range(200):
            i = int(rng.integers(0, 2000))
            d = int(rng.integers(3, 10**9))
            term = V.lhs_term(d, table.prime(i), sig, table, buf)
            assert float(term.upper()) >= 0
            assert float(term.lower()) >= -1e-15


class FakeAllPlusBuffer:
    """chi = +1 for every prime: models the extreme where every term doubles."""

    def __init__(self, count):
        self.count = count

    def chi(self, d, i):
        return 1

    def chi_vec(self, d, i):
        return np.ones(len(d), dtype=np.int8)


class TestVerifyCandidate:
    def test_all_plus_chi_crosses_quickly(self, row1, table):
        cfg = small_cfg(row1, 60_000)
        fake = FakeAllPlusBuffer(60_000)
        out = V.verify_candidate(4 * 10**5 + 1, cfg, table, fake)
        assert out.status is V.Status.VIOLATED
        # scalar simulation oracle: lhs = A + sum a_i, violated at the first
        # batch boundary where it exceeds the rhs upper bound
        tt = cfg.term_table(table)
        rhs_hi = V.rhs_float_bounds(cfg, 4 * 10**5 + 1)[1]
        s = 0.0
        expected = None
        for n in range(64, 60_001, 64):
            for i in range(n - 64, n):
                s += float(tt.a_lo[i])
            err = V.float_err_bound(n, tt.A_hi[n], tt.AB_hi[n])
            if (s + tt.A_lo[n]) - err > rhs_hi:
                expected = n
                break
        assert out.primes_used == expected

    def test_d5_row1_failed_matches_double_reference(self, row1, table, buf):
        # plain-double reference with identical prime order and batch points
        out = V.verify_candidate(5, row1, table, buf)
        sig = float(row1.sigma.mid)
        rhs = float(V.rhs_value(row1, 5).mid)
        s = 0.0
        status = "failed"
        for i in range(60_000):
            p = table.prime(i)
            chi = P.kronecker(5, p)
            lp = math.log(p)
            s += lp / (p**sig - 1) + (chi * lp / (p**sig - chi) if chi else 0.0)
            if (i + 1) % 64 == 0 and s > rhs:
                status = "violated"
                break
        assert status == "failed"
        assert out.status is V.Status.FAILED
        assert out.primes_used == 60_000

    def test_zero_cutoff(self, row1, table, buf):
        cfg = small_cfg(row1, 0)
        out = V.verify_candidate(5, cfg, table, buf)
        assert out.status is V.Status.FAILED
        assert out.primes_used == 0
        assert out.lhs.is_exact() and out.lhs.mid == 0

    def test_monotone_lower_ends(self, row1, table, buf):
        rng = np.random.default_rng(22)
        cfg = small_cfg(row1, 2_000)
        d_arr = P.candidate_array(500_000, 502_000, "both")
        for d in rng.choice(d_arr, 50, replace=False):
            tr = []
            V.verify_candidate(int(d), cfg, table, buf, trace=tr)
            los = [x[1] for x in tr]
            assert all(a <= b + 1e-15 for a, b in zip(los, los[1:])), d

    def test_order_invariance_at_fixed_n(self, row1, table, buf):
        # reversed accumulation lands inside an enclosure overlapping the
        # forward one
        cfg = small_cfg(row1, 1_024)
        tt = cfg.term_table(table)
        tt.ensure(1_024)
        for d in (400_001, -400_043, 555_557):
            fwd = V.verify_candidate(d, cfg, table, buf)
            s_rev = 0.0
            for i in reversed(range(1_024)):
                chi = V._chi_scalar(d, i, table.prime(i), buf)
                if chi == 1:
                    s_rev += float(tt.a_lo[i])
                elif chi == -1:
                    s_rev += -float(tt.b_hi[i])
            n = 1_024
            err = V.float_err_bound(n, tt.A_hi[n], tt.AB_hi[n])
            rev_ball = RealBall.from_endpoints(
                (s_rev + tt.A_lo[n]) - err, ((s_rev + tt.A_hi[n]) + err) + tt.W_hi[n]
            )
            if fwd.status is V.Status.FAILED:
                assert rev_ball.overlaps(fwd.lhs)

    def test_violated_is_ball_certified(self, row1, table, buf):
        out = V.verify_candidate(400_009, row1, table, buf)
        assert out.status is V.Status.VIOLATED
        assert ball.ball_cmp(out.lhs, out.rhs) is Cmp.CERTAINLY_GREATER

    def test_soundness_at_4x_precision(self, row1, table, buf):
        rng = np.random.default_rng(23)
        d_arr = P.candidate_array(600_000, 601_500, "both")
        checked = 0
        for d in rng.choice(d_arr, 20, replace=False):
            out = V.verify_candidate(int(d), row1, table, buf)
            if out.status is not V.Status.VIOLATED:
                continue
            lhs = V.ball_lhs(int(d), row1, table, buf, out.primes_used, 512)
            rhs = V.rhs_value(row1, abs(int(d)), 512)
            assert ball.ball_cmp(lhs, rhs, 512) is Cmp.CERTAINLY_GREATER
            assert lhs.overlaps(out.lhs)
            checked += 1
        assert checked >= 15

    def test_table_too_small(self, row1, buf):
        small = P.sieve_primes(100)
        with pytest.raises(V.TableTooSmall):
            V.verify_candidate(400_009, row1, small, buf)


class TestVerifyBatch:
    def test_matches_scalar_everywhere(self, row1, table, buf):
        d_arr = P.candidate_array(400_000, 401_200, "both")
        st, pu, lo, hi, rlo, rhi = V.verify_batch(d_arr, row1, table, buf)
        for k in range(len(d_arr)):
            out = V.verify_candidate(int(d_arr[k]), row1, table, buf)
            assert out.status.value == st[k]
            assert out.primes_used == pu[k]
            assert out.lhs.lower_float() == lo[k]
            assert out.lhs.upper_float() == hi[k]

    def test_zero_cutoff_all_failed(self, row1, table, buf):
        cfg = small_cfg(row1, 0)
        d_arr = P.candidate_array(400_000, 400_100, "both")
        st, pu, *_ = V.verify_batch(d_arr, cfg, table, buf)
        assert (st == V.Status.FAILED.value).all()
        assert (pu == 0).all()

    def test_no_buffer_matches_buffered(self, row1, table, buf):
        cfg = small_cfg(row1, 3_000)
        d_arr = P.candidate_array(700_000, 700_400, "both")
        a = V.verify_batch(d_arr, cfg, table, buf)
        b = V.verify_batch(d_arr, cfg, table, None)
        for x, y in zip(a, b):
            assert np.array_equal(x, y)


class TestTermTable:
    def test_zeta_prefix_bounds(self, row1, table):
        tt = row1.term_table(table)
        tt.ensure(5_000)
        sig = float(row1.sigma.mid)
        acc = 0.0
        for i in range(5_000):
            p = table.prime(i)
            acc += math.log(p) / (p**sig - 1)
        pref = tt.zeta_term_prefix(5_000)
        assert float(pref.lower()) - 1e-9 <= acc <= float(pref.upper()) + 1e-9
        assert float(pref.upper()) - float(pref.lower()) < 1e-8

    def test_term_bounds_bracket_truth(self, row1, table):
        tt = row1.term_table(table)
        sig_lo, sig_hi = row1.sigma_lo, row1.sigma_hi
        ctx = gmpy2.context(precision=200, round=gmpy2.RoundToNearest)
        for i in (0, 1, 17, 999, 40_000):
            a_lo, b_hi = tt.term_bounds(i)
            p = table.prime(i)
            lp = ctx.log(p)
            a_true = lp / (ctx.exp(ctx.mul(gmpy2.mpfr(sig_lo, precision=200), lp)) - 1)
            b_true = lp / (ctx.exp(ctx.mul(gmpy2.mpfr(sig_hi, precision=200), lp)) + 1)
            assert a_lo <= a_true
            assert b_hi >= b_true
