import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from autolab.errors import DomainError, TooLarge
from autolab.stats import (
    as_mpf,
    binom_tail_ge,
    binom_tail_lt,
    chernoff_lower_bound,
    chernoff_upper_bound,
    corollary_bounds,
    empirical_rate,
    verify_chernoff_grid,
    wilson_agrees,
)


def close(a, b, rel=1e-12):
    return abs(float(as_mpf(a)) - float(b)) <= rel * max(abs(float(b)), 1e-300)


def test_tail_examples():
    assert binom_tail_ge(2, Fraction(1, 2), 1) == Fraction(3, 4)
    brute = Fraction(sum(math.comb(8, k) for k in range(3, 9)), 256)
    assert binom_tail_ge(8, Fraction(1, 2), 3) == brute == Fraction(219, 256)
    big = binom_tail_ge(10000, Fraction(1, 4), 4000)
    assert as_mpf(big) <= mpmath.mpf("1e-20")
    # log-domain oracle from scipy
    assert close(mpmath.log(as_mpf(big)), binom.logsf(3999, 10000, 0.25), rel=1e-9)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 300), st.fractions(0, 1, max_denominator=50), st.integers(-2, 310))
def test_tails_against_scipy(n, p, t):
    ge = binom_tail_ge(n, p, t)
    want = binom.sf(t - 1, n, float(p)) if t > 0 else 1.0
    assert abs(float(as_mpf(ge)) - want) < 1e-9
    assert binom_tail_lt(n, p, t) == 1 - ge


def test_tail_invariants():
    p = Fraction(3, 10)
    assert binom_tail_ge(50, p, 0) == 1
    assert binom_tail_ge(50, p, Fraction(101, 2)) == 0
    vals = [binom_tail_ge(50, p, t) for t in range(52)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    # symmetry p <-> 1-p with reflected threshold
    for t in range(51):
        assert binom_tail_ge(50, p, t) == 1 - binom_tail_ge(50, 1 - p, 50 - t + 1)


def test_large_n_paths():
    v = binom_tail_ge(5000, Fraction(1, 2), 2500)
    assert close(v, binom.sf(2499, 5000, 0.5), rel=1e-10)
    with pytest.raises(TooLarge):
        binom_tail_ge(10**5 + 1, Fraction(1, 2), 3)


def test_chernoff_examples():
    assert close(chernoff_lower_bound(50, 1), math.exp(-25))
    assert close(chernoff_lower_bound(50, Fraction(1, 2)), math.exp(-6.25))
    assert close(chernoff_upper_bound(48, Fraction(1, 3)), math.exp(-16 / 9))
    with pytest.raises(DomainError):
        chernoff_lower_bound(1, 0)
    with pytest.raises(DomainError):
        chernoff_upper_bound(1, Fraction(3, 2))


def test_corollary_examples():
    lo, hi = corollary_bounds(60, 40, Fraction(1, 2))
    assert close(lo, math.exp(-5)) and close(hi, math.exp(-5))
    lo, hi = corollary_bounds(7, 7, Fraction(1, 4))
    assert lo == chernoff_lower_bound(7, Fraction(1, 4))
    assert hi == chernoff_upper_bound(7, Fraction(1, 4))
    assert corollary_bounds(1, 0, 1)[0] == 1
    with pytest.raises(DomainError):
        corollary_bounds(1, 2, Fraction(1, 2))


def test_grid_examples():
    reports = verify_chernoff_grid([(100, 0.5, 0.5), (1, 1, 1.0), (2000, 0.1, 0.3)])
    assert all(r.satisfied for r in reports)
    first = reports[0]
    assert first.exact == binom_tail_lt(100, Fraction(1, 2), 25)
    assert close(first.bound, math.exp(-6.25))
    assert reports[4].exact == 0


def test_empirical_rate_examples():
    est = empirical_rate(lambda s: True, 100, 0)
    assert est.estimate == 1 and est.low >= 0.93 and est.high == 1
    assert empirical_rate(lambda s: False, 100, 0).estimate == 0
    fair = empirical_rate(lambda s: s & 1 == 1, 10000, 3)
    assert fair.contains(Fraction(1, 2))
    with pytest.raises(ValueError):
        empirical_rate(lambda s: True, 10, 0)


def test_wilson_coverage_against_binomial_quantiles():
    # For n = 200, p = 1/2, count the outcomes whose interval covers p, weighted exactly.
    from autolab.stats import wilson_interval

    n, p = 200, 0.5
    cover = sum(binom.pmf(k, n, p) for k in range(n + 1)
                if wilson_interval(k, n)[0] <= p <= wilson_interval(k, n)[1])
    assert cover >= 0.985


def test_wilson_agrees_retry():
    ok, ests = wilson_agrees(lambda s: s % 4 == 0, Fraction(1, 4), 4000)
    assert ok and len(ests) >= 1
    ok, ests = wilson_agrees(lambda s: False, Fraction(1, 2), 100)
    assert not ok and len(ests) == 3
