"""Exact binomial tails, Chernoff bound expressions and Wilson-interval estimators.

Exact tails are rational (``Fraction``) up to ``EXACT_N_MAX`` trials.  Above
that, and up to ``N_MAX``, they are summed in 60-digit mpmath arithmetic via
the pmf ratio recurrence; the relative rounding error after 1e5 products is
below 1e-50, far inside the 1e-12 absolute budget.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Optional

import mpmath
from statsmodels.stats.proportion import proportion_confint

from .errors import DomainError, TooLarge

EXACT_N_MAX = 2000
N_MAX = 100_000
DPS = 60


def as_fraction(v) -> Fraction:
    """Rational view of a number; floats are read by their shortest decimal repr."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise DomainError(f"non-finite value {v}")
        return Fraction(repr(v))
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, mpmath.mpf):
        return Fraction(mpmath.nstr(v, 40, strip_zeros=False)) if v else Fraction(0)
    return Fraction(v)


def as_mpf(v) -> mpmath.mpf:
    with mpmath.workdps(DPS):
        if isinstance(v, Fraction):
            return mpmath.mpf(v.numerator) / v.denominator
        return mpmath.mpf(v)


def exp_neg(v) -> mpmath.mpf:
    """``e^(-v)`` in high precision; ``v`` may be rational."""
    with mpmath.workdps(DPS):
        return mpmath.exp(-as_mpf(v))


# ----------------------------------------------------------------------
# Exact binomial tails
# ----------------------------------------------------------------------


@lru_cache(maxsize=64)
def _pmf_numerators(n: int, a: int, b: int) -> tuple:
    """Integers C(n,k) a^k (b-a)^(n-k); divide by b^n for Pr[Bin(n, a/b) = k]."""
    c = b - a
    out = []
    coef = 1
    apow = [1]
    for _ in range(n):
        apow.append(apow[-1] * a)
    cpow = 1
    rev = []
    for k in range(n, -1, -1):
        rev.append(cpow)
        cpow *= c
    # rev[j] = c^j
    for k in range(n + 1):
        out.append(coef * apow[k] * rev[n - k])
        coef = coef * (n - k) // (k + 1)
    return tuple(out)


def _first_k_ge(threshold) -> int:
    t = as_fraction(threshold)
    return math.ceil(t)


def _exact_sum(n: int, p: Fraction, lo: int, hi: int) -> Fraction:
    """Pr[lo <= Bin(n, p) <= hi] exactly."""
    lo = max(lo, 0)
    hi = min(hi, n)
    if lo > hi:
        return Fraction(0)
    if p == 0:
        return Fraction(1 if lo == 0 else 0)
    if p == 1:
        return Fraction(1 if hi == n else 0)
    nums = _pmf_numerators(n, p.numerator, p.denominator)
    return Fraction(sum(nums[lo:hi + 1]), p.denominator ** n)


def _mp_sum(n: int, p, lo: int, hi: int) -> mpmath.mpf:
    lo = max(lo, 0)
    hi = min(hi, n)
    with mpmath.workdps(DPS):
        if lo > hi:
            return mpmath.mpf(0)
        pm = as_mpf(p)
        if pm == 0:
            return mpmath.mpf(1 if lo == 0 else 0)
        if pm == 1:
            return mpmath.mpf(1 if hi == n else 0)
        q = 1 - pm
        logterm = (mpmath.loggamma(n + 1) - mpmath.loggamma(lo + 1) - mpmath.loggamma(n - lo + 1)
                   + lo * mpmath.log(pm) + (n - lo) * mpmath.log(q))
        term = mpmath.exp(logterm)
        ratio = pm / q
        total = mpmath.mpf(0)
        for k in range(lo, hi + 1):
            total += term
            term = term * (n - k) / (k + 1) * ratio
        return total


def binom_range(n: int, p, lo: int, hi: int):
    """Pr[lo <= Bin(n, p) <= hi]; exact Fraction when n <= EXACT_N_MAX else mpf."""
    if n < 0:
        raise DomainError("n must be non-negative")
    if n > N_MAX:
        raise TooLarge(f"n={n} exceeds {N_MAX}")
    pf = as_fraction(p)
    if not 0 <= pf <= 1:
        raise DomainError(f"p={p} outside [0, 1]")
    if n <= EXACT_N_MAX:
        return _exact_sum(n, pf, lo, hi)
    return _mp_sum(n, pf, lo, hi)


def binom_tail_ge(n: int, p, threshold):
    """Pr[Bin(n, p) >= threshold] for a rational threshold."""
    return binom_range(n, p, _first_k_ge(threshold), n)


def binom_tail_lt(n: int, p, threshold):
    """Pr[Bin(n, p) < threshold], summed directly (no cancellation)."""
    return binom_range(n, p, 0, _first_k_ge(threshold) - 1)


def binom_tail_gt(n: int, p, threshold):
    """Pr[Bin(n, p) > threshold]."""
    return binom_range(n, p, math.floor(as_fraction(threshold)) + 1, n)


# ----------------------------------------------------------------------
# Chernoff expressions
# ----------------------------------------------------------------------


def _check_delta(delta):
    if not 0 < as_fraction(delta) <= 1:
        raise DomainError(f"delta={delta} outside (0, 1]")


def chernoff_lower_bound(mu, delta) -> mpmath.mpf:
    """Bound on Pr[X < (1 - delta) mu]: exp(-mu delta^2 / 2)."""
    _check_delta(delta)
    if as_fraction(mu) < 0:
        raise DomainError("mu must be non-negative")
    return exp_neg(as_fraction(mu) * as_fraction(delta) ** 2 / 2)


def chernoff_upper_bound(mu, delta) -> mpmath.mpf:
    """Bound on Pr[X > (1 + delta) mu]: exp(-mu delta^2 / 3)."""
    _check_delta(delta)
    if as_fraction(mu) < 0:
        raise DomainError("mu must be non-negative")
    return exp_neg(as_fraction(mu) * as_fraction(delta) ** 2 / 3)


def corollary_bounds(mu1, mu2, delta) -> tuple:
    """Bounds for Pr[X < (1-delta) mu2] and Pr[X > (1+delta) mu1] given mu1 >= E[X] >= mu2."""
    if not as_fraction(mu1) >= as_fraction(mu2) >= 0:
        raise DomainError("need mu1 >= mu2 >= 0")
    return chernoff_lower_bound(mu2, delta), chernoff_upper_bound(mu1, delta)


# Rationals with larger denominators are shown in decimal only.
RATIONAL_BITS = 3000


@dataclass
class BoundReport:
    name: str
    exact: object
    bound: object
    satisfied: bool

    @classmethod
    def compare(cls, name, exact, bound) -> "BoundReport":
        with mpmath.workdps(DPS):
            ok = bool(as_mpf(exact) <= as_mpf(bound))
        return cls(name, exact, bound, ok)

    def row(self) -> dict:
        ex = self.exact
        rational = ""
        if isinstance(ex, Fraction) and ex.denominator.bit_length() <= RATIONAL_BITS:
            rational = f"{ex.numerator}/{ex.denominator}"
        return {
            "name": self.name,
            "exact_rational": rational,
            "exact_decimal": mpmath.nstr(as_mpf(ex), 15),
            "bound": mpmath.nstr(as_mpf(self.bound), 15),
            "satisfied": self.satisfied,
        }


DEFAULT_GRID_N = (1, 2, 5, 10, 50, 100, 500, 2000)
DEFAULT_GRID_P = (0.05, 0.1, 0.25, 0.5, 0.75, 0.95)
DEFAULT_GRID_DELTA = (0.1, 0.25, 0.5, 0.75, 1.0)

# Two-mean cells use expectation brackets around the true mean np.
COROLLARY_HIGH = Fraction(5, 4)
COROLLARY_LOW = Fraction(4, 5)


def default_grid() -> list:
    return [(n, p, d) for n in DEFAULT_GRID_N for p in DEFAULT_GRID_P for d in DEFAULT_GRID_DELTA]


def verify_chernoff_grid(grid: Optional[Iterable] = None, corollary: bool = True) -> list:
    """Compare exact binomial tails with both Chernoff shapes on every cell.

    Each cell yields a lower-tail and an upper-tail report at mu = np, and,
    with ``corollary``, the same pair at mu2 = 0.8 np and mu1 = 1.25 np.
    """
    reports = []
    for n, p, delta in (grid if grid is not None else default_grid()):
        pf, df = as_fraction(p), as_fraction(delta)
        if n > EXACT_N_MAX:
            raise TooLarge(f"grid cell n={n} above the exact cap {EXACT_N_MAX}")
        mu = n * pf
        tag = f"n={n},p={p},delta={delta}"
        reports.append(BoundReport.compare(
            f"lower[{tag}]", binom_tail_lt(n, pf, (1 - df) * mu), chernoff_lower_bound(mu, df)))
        reports.append(BoundReport.compare(
            f"upper[{tag}]", binom_tail_gt(n, pf, (1 + df) * mu), chernoff_upper_bound(mu, df)))
        if corollary:
            mu1, mu2 = COROLLARY_HIGH * mu, COROLLARY_LOW * mu
            lo_b, hi_b = corollary_bounds(mu1, mu2, df)
            reports.append(BoundReport.compare(
                f"cor-lower[{tag}]", binom_tail_lt(n, pf, (1 - df) * mu2), lo_b))
            reports.append(BoundReport.compare(
                f"cor-upper[{tag}]", binom_tail_gt(n, pf, (1 + df) * mu1), hi_b))
    return reports


# ----------------------------------------------------------------------
# Monte Carlo estimation
# ----------------------------------------------------------------------


@dataclass
class RateEstimate:
    successes: int
    trials: int
    estimate: float
    low: float
    high: float
    confidence: float = 0.99

    def contains(self, value) -> bool:
        return self.low <= float(value) <= self.high

    def to_dict(self):
        return asdict(self)


def wilson_interval(successes: int, trials: int, confidence: float = 0.99) -> tuple:
    lo, hi = proportion_confint(successes, trials, alpha=1 - confidence, method="wilson")
    # statsmodels can land a hair off the exact endpoints at 0 and n successes
    lo = 0.0 if successes == 0 else max(0.0, float(lo))
    hi = 1.0 if successes == trials else min(1.0, float(hi))
    return lo, hi


def rate_from_counts(successes: int, trials: int, confidence: float = 0.99) -> RateEstimate:
    if trials < 1:
        raise ValueError("trials must be positive")
    lo, hi = wilson_interval(successes, trials, confidence)
    return RateEstimate(successes, trials, successes / trials, lo, hi, confidence)


def empirical_rate(trial: Callable[[int], bool], trials: int, seed: int,
                   confidence: float = 0.99) -> RateEstimate:
    """Run ``trial(seed_i)`` for derived seeds and report the Wilson interval."""
    from .process import derive_seed

    if trials < 30:
        raise ValueError("empirical_rate needs at least 30 trials")
    hits = sum(1 for i in range(trials) if trial(derive_seed(seed, "rate", i)))
    return rate_from_counts(hits, trials, confidence)


def wilson_agrees(trial: Callable[[int], bool], expected, trials: int, seeds=(0, 1, 2),
                  confidence: float = 0.99):
    """Three-seed retry policy: pass if any of the seeds lands expected inside its interval.

    Returns ``(passed, estimates)``; seeds are tried in order and the loop
    stops at the first pass.
    """
    estimates = []
    for s in seeds:
        est = empirical_rate(trial, trials, s, confidence)
        estimates.append(est)
        if est.contains(as_mpf(expected)):
            return True, estimates
    return False, estimates
