from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from autolab.errors import EnumerationTooLarge
from autolab.problems import PARITY
from autolab.process import (
    DIVERGE,
    INFINITE,
    ONE,
    Coins,
    FixedCoins,
    HaltTimeDistribution,
    Process,
    ScheduleTrace,
    all_completed,
    at_least,
    enforce_conditions,
    estimate_quantile_time,
    exact_halt_distribution,
    halt_at,
    idle,
    median_time,
    parallel_body,
    quantile_time,
    run_parallel,
    run_until,
    sample_halt_times,
)
from autolab.stats import binom_tail_ge, rate_from_counts


def coin_halt(coins):
    """Halt with 1 at step 1 iff the first coin is 1, else diverge."""
    if coins.bit():
        return ONE
    yield DIVERGE


def first_one(coins, limit=3):
    for _ in range(limit):
        if coins.bit():
            return ONE
        yield
    yield DIVERGE


def halt_without_output(t):
    for _ in range(t - 1):
        yield
    return "done"


def test_run_until_examples():
    assert run_until(Process(halt_at(7)), 10) == 7
    assert run_until(Process(halt_at(7)), 5) is None
    outcomes = {run_until(Process(coin_halt(Coins(42))), 5) for _ in range(5)}
    assert len(outcomes) == 1


def test_absorbing_states():
    p = Process(idle())
    assert run_until(p, 3) is None and p.status.value == "diverged"
    ticks = p.ticks
    assert p.step() is False and p.ticks == ticks
    q = Process(halt_without_output(2))
    assert run_until(q, 10) is None and q.status.value == "halted"


def test_exact_halt_distribution_examples():
    d = exact_halt_distribution(lambda c: Process(halt_at(7)), 10)
    assert d.mass == {7: 1} and d.infinity == 0
    d = exact_halt_distribution(lambda c: Process(coin_halt(c)), 5)
    assert d.mass == {1: Fraction(1, 2)} and d.infinity == Fraction(1, 2)
    d = exact_halt_distribution(lambda c: Process(first_one(c)), 5)
    # brute force over the 8 coin strings
    brute = {}
    for k in range(8):
        bits = [(k >> 2) & 1, (k >> 1) & 1, k & 1]
        if 1 in bits:
            t = bits.index(1) + 1
            brute[t] = brute.get(t, 0) + Fraction(1, 8)
    assert d.mass == brute and d.infinity == Fraction(1, 8)
    assert d.total == 1


def test_exact_halt_distribution_cap():
    def hungry(coins):
        while True:
            coins.bits(8)
            yield

    with pytest.raises(EnumerationTooLarge):
        exact_halt_distribution(lambda c: Process(hungry(c)), 10, coins_per_step=8)


def test_quantile_examples():
    assert quantile_time(HaltTimeDistribution({7: Fraction(1)}), Fraction(1, 2)) == 7
    d = HaltTimeDistribution({1: Fraction(3, 5), 10: Fraction(2, 5)})
    assert median_time(d) == 1
    assert quantile_time(d, Fraction(7, 10)) == 10
    half = HaltTimeDistribution({3: Fraction(1, 2)}, Fraction(1, 2))
    assert quantile_time(half, Fraction(3, 4)) == INFINITE
    with pytest.raises(ValueError):
        quantile_time(d, 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=6), st.fractions(0, 1), st.fractions(0, 1))
def test_quantile_monotone(weights, p, q):
    total = sum(weights)
    d = HaltTimeDistribution({i + 1: Fraction(w, total) for i, w in enumerate(weights)})
    lo, hi = sorted([p, q])
    if lo > 0:
        assert quantile_time(d, lo) <= quantile_time(d, hi)


def test_estimate_quantile_examples():
    est = estimate_quantile_time(lambda c: Process(halt_at(7)), 0.5, 50, 100, 1)
    assert est.estimate == 7 and est.low == 7 and est.high == 7

    def mixed(coins):
        # halts at 1 w.p. 3/5, else at 10
        if coins.bernoulli(Fraction(3, 5)):
            return ONE
        for _ in range(9):
            yield
        return ONE

    # 3/5 has no finite binary expansion, so the oracle is written down directly
    exact = quantile_time(HaltTimeDistribution({1: Fraction(3, 5), 10: Fraction(2, 5)}),
                          Fraction(1, 2))
    est = estimate_quantile_time(lambda c: Process(mixed(c)), 0.5, 10000, 100, 3)
    assert est.estimate == exact == 1 and est.low <= 1 <= est.high
    never = estimate_quantile_time(lambda c: Process(idle()), 0.5, 20, 50, 0)
    assert never.estimate == INFINITE


def test_monte_carlo_matches_exact_distribution():
    factory = lambda c: Process(first_one(c))
    dist = exact_halt_distribution(factory, 5)
    times = sample_halt_times(factory, 20000, 5, 11)
    for t in (1, 2, 3, INFINITE):
        want = dist.infinity if t == INFINITE else dist.mass[t]
        assert rate_from_counts(times.count(t), len(times)).contains(want)


def test_enforce_conditions_examples():
    x = "0110"
    sd_time = run_until(Process(PARITY.semidecider(x)), 100)
    t = run_until(enforce_conditions(Process(idle()), PARITY, x), 100)
    assert t is not None and t <= 2 * sd_time + 2
    assert run_until(enforce_conditions(Process(halt_at(1)), PARITY, "0111"), 100) <= 3
    assert run_until(enforce_conditions(Process(halt_without_output(3)), PARITY, "0111"),
                     10000) is None


def test_run_parallel_examples():
    tr = run_parallel([Process(halt_at(5)) for _ in range(3)], at_least(1))
    assert tr.stop_reason == "rule" and tr.rounds == 5
    tr = run_parallel([Process(halt_at(2)), Process(halt_at(9))], all_completed)
    assert tr.rounds == 9
    assert tr.total == sum(tr.child_ticks) + tr.control_ticks


def test_parallel_round_one_probability():
    m, need = 8, 3
    hits = 0
    trials = 20000
    for i in range(trials):
        base = Coins(i)
        kids = [Process(coin_halt(base.child("copy", j))) for j in range(m)]
        tr = run_parallel(kids, at_least(need), max_ticks=1000)
        hits += tr.stop_reason == "rule" and tr.rounds == 1
    exact = binom_tail_ge(m, Fraction(1, 2), need)
    assert exact == Fraction(219, 256)
    assert rate_from_counts(hits, trials).contains(exact)


def test_parallel_idle_diverges():
    trace = ScheduleTrace()
    proc = Process(parallel_body([Process(idle()), Process(halt_without_output(2))],
                                 at_least(1), trace))
    assert run_until(proc, 100) is None
    assert proc.status.value == "diverged" and trace.stop_reason == "idle"


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 12), min_size=1, max_size=5), st.integers(0, 60))
def test_fairness(halts, budget):
    kids = [Process(halt_at(t)) for t in halts]
    proc = Process(parallel_body(kids, all_completed, ScheduleTrace()))
    run_until(proc, budget)
    running = [k.ticks for k in kids if k.active]
    if running:
        assert max(running) - min(running) <= 1


def test_trace_reproducible():
    def build(seed):
        base = Coins(seed)
        return [Process(first_one(base.child(j), 6)) for j in range(4)]

    a = run_parallel(build(5), at_least(2), max_ticks=500).to_dict()
    b = run_parallel(build(5), at_least(2), max_ticks=500).to_dict()
    assert a == b


def test_coins_exact_bernoulli_and_children():
    coins = FixedCoins([0, 1, 1])
    # 3/8 = 0.011b: coins 0,1,1 equal the digits, so the draw is False
    assert coins.bernoulli(Fraction(3, 8)) is False
    a, b = Coins(9).child("x", 1), Coins(9).child("x", 1)
    assert [a.bit() for _ in range(600)] == [b.bit() for _ in range(600)]
    c = Coins(9).child("x", 2)
    assert a.seed == Coins(9).child("x", 1).seed and a.seed != c.seed
