"""Non-rigorous planning tools: the heuristic runtime exponent theta_c,
the conditional prime-sum predictor, and the pass-parameter optimizer.

Everything here is plain double precision on purpose; these numbers guide
parameter choices and never enter certified comparisons.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from . import constants
from .primes import PrimeTable
from .verify import TableTooSmall

__all__ = [
    "delta_sweep",
    "minimize_theta_c",
    "optimize_r",
    "predicted_lhs",
    "theta_c",
    "theta_c_grid",
]

LOG_Q_REF = 10.0 * math.log(10.0)  # the reference modulus is 10^10


def theta_c(c: float, lam: float) -> float | None:
    """Heuristic runtime exponent -log(1 - c/(lam+c) - lam/4)/lam.

    None (undefined) when the log argument is not positive."""
    if c <= 0 or lam <= 0:
        raise ValueError("need c > 0 and lam > 0")
    arg = 1.0 - c / (lam + c) - lam / 4.0
    if arg <= 0.0:
        return None
    return -math.log(arg) / lam


def theta_c_grid(c: float, lo: float = 0.1, hi: float = 3.9, step: float = 1e-3):
    """(lambda, theta) arrays over the grid; undefined points are NaN."""
    lams = np.arange(round((hi - lo) / step) + 1) * step + lo
    thetas = np.full(len(lams), np.nan)
    for i, lam in enumerate(lams.tolist()):
        t = theta_c(c, lam)
        if t is not None:
            thetas[i] = t
    return lams, thetas


def minimize_theta_c(c: float, lo: float = 0.1, hi: float = 3.9, step: float = 1e-3):
    """Grid minimizer of theta_c: (lambda*, theta*)."""
    lams, thetas = theta_c_grid(c, lo, hi, step)
    if np.all(np.isnan(thetas)):
        raise ValueError("theta_c undefined on the whole grid")
    i = int(np.nanargmin(thetas))
    return float(lams[i]), float(thetas[i])


def predicted_lhs(lam: float, theta: float, q: float) -> float:
    """Leading term (1 - e^(-lam theta))/lam * log q of the conditional
    prime-sum estimate; non-rigorous (assumes GRH), no error term."""
    if lam <= 0 or theta <= 0:
        raise ValueError("need lam > 0 and theta > 0")
    return (1.0 - math.exp(-lam * theta)) / lam * math.log(q)


def _rhs_at_reference(lam: float, c: float) -> float:
    """Right side of the inequality at q = 10^10 in plain doubles."""
    r_ball = constants.r_from_lambda(Fraction(lam).limit_denominator(10**9))
    ic = constants.phi_and_e(r_ball)
    r = lam / LOG_Q_REF
    R = r + 7.0 / 8.0
    phi = float(ic.phi.upper())
    E = float(ic.E.upper())
    return (
        c / (r * (r * LOG_Q_REF + c))
        + (r + c / LOG_Q_REF) / (R * R)
        + phi * LOG_Q_REF
        + E
    )


def delta_sweep(table: PrimeTable, cutoffs: list[int], c: float = 0.2,
                lo: float = 0.5, hi: float = 3.0, step: float = 0.01):
    """Delta_N(lambda) = S - sum_{p <= p_N} log p/(p^sigma - 1) for every
    grid lambda and every cutoff N, sharing one sweep over the primes.

    Returns (lams, {cutoff: deltas array}).
    """
    n_max = max(cutoffs)
    if n_max > len(table):
        raise TableTooSmall(f"need {n_max} primes, table holds {len(table)}")
    lams = (np.arange(round((hi - lo) / step) + 1) * step + lo).round(10)
    marks = sorted(set(cutoffs))
    logp = None
    sums = {n: np.zeros(len(lams)) for n in marks}
    block = 4 << 20
    for start in range(0, n_max, block):
        stop = min(start + block, n_max)
        logp = np.log(table.primes[start:stop].astype(np.float64))
        inside = [n for n in marks if n > start]
        for i, lam in enumerate(lams.tolist()):
            sigma = 1.0 + lam / LOG_Q_REF
            terms = logp / np.expm1(sigma * logp)
            full = None
            for n in inside:
                if n >= stop:
                    if full is None:
                        full = float(terms.sum())
                    sums[n][i] += full
                else:
                    sums[n][i] += float(terms[: n - start].sum())
    deltas = {}
    s_vals = np.array([_rhs_at_reference(float(lam), c) for lam in lams.tolist()])
    for n in cutoffs:
        deltas[n] = s_vals - sums[n]
    return lams, deltas


def optimize_r(table: PrimeTable, cutoff_index: int, c: float = 0.2,
               lo: float = 0.5, hi: float = 3.0, step: float = 0.01) -> float:
    """Grid minimizer lambda* of Delta_N over [lo, hi] for one cutoff."""
    lams, deltas = delta_sweep(table, [cutoff_index], c, lo, hi, step)
    i = int(np.argmin(deltas[cutoff_index]))
    return float(lams[i])


def curve_csv(xs, ys, header: str = "lambda,value") -> str:
    lines = [header]
    for x, y in zip(np.asarray(xs).tolist(), np.asarray(ys).tolist()):
        lines.append(f"{x:.10g},{'nan' if y is None or (isinstance(y, float) and math.isnan(y)) else format(y, '.10g')}")
    return "\n".join(lines) + "\n"
