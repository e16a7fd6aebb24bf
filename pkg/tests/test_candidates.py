from fractions import Fraction

import pytest

from autolab.candidates import (
    CandidateSpec,
    Wrapped,
    correctness_verdict,
    default_zoo,
    known_error_profile,
    make_candidate,
    parse_candidate,
)
from autolab.errors import MemberInput
from autolab.problems import PARITY
from autolab.process import Coins, derive_seed, exact_halt_distribution, run_until
from autolab.stats import rate_from_counts


def test_make_candidate_examples():
    honest = CandidateSpec("honest", PARITY)
    t = run_until(make_candidate(honest, "0110", 1), 100)
    assert t is not None and t <= 4
    assert run_until(make_candidate(CandidateSpec("always-one", PARITY), "0111", 3), 5) == 1
    liar = CandidateSpec("coin-liar", PARITY, eps=Fraction(1, 8))
    dist = exact_halt_distribution(lambda c: liar.spawn("0111", 1, c), 50)
    assert dist.total == 1 and sum(dist.mass.values()) == Fraction(1, 8)
    assert dist.mass == {1: Fraction(1, 8)}


def test_slow_is_quadratic_on_members():
    slow = CandidateSpec("slow", PARITY, g=2)
    for n in (4, 8, 12):
        t = run_until(make_candidate(slow, "0" * n, 1), 10**5)
        assert n * n <= t <= n * n + n + 1


def test_error_profiles():
    assert known_error_profile(CandidateSpec("honest", PARITY), "0111") == 0
    assert known_error_profile(CandidateSpec("always-one", PARITY), "0111") == 1
    planted = CandidateSpec("planted", PARITY, eps=Fraction(1, 2), prefix="1")
    assert known_error_profile(planted, "1000") == Fraction(1, 2)
    assert known_error_profile(planted, "0001") == 0
    with pytest.raises(MemberInput):
        known_error_profile(planted, "1001")


def test_correctness_verdict_examples():
    assert correctness_verdict(CandidateSpec("honest", PARITY), PARITY, 8, 3, 1, 0).correct
    v = correctness_verdict(CandidateSpec("always-one", PARITY), PARITY, 8, 1, 1, Fraction(1, 2))
    assert not v.correct and v.mass == 1
    planted = CandidateSpec("planted", PARITY, eps=Fraction(1, 2), prefix="111")
    v4 = correctness_verdict(planted, PARITY, 8, 4, 1, Fraction(1, 4))
    assert v4.correct and v4.mass == Fraction(1, 8)
    assert not correctness_verdict(planted, PARITY, 8, 16, 1, Fraction(1, 4)).correct


@pytest.mark.parametrize("spec", default_zoo(PARITY), ids=lambda s: s.name)
def test_zoo_frequencies_match_profiles(spec):
    xs = sorted(PARITY.exact_support(8))[::16]
    for x in xs:
        trials = 2000
        hits = sum(run_until(spec.spawn(x, 1, Coins(derive_seed(5, x, i))), 1000) is not None
                   for i in range(trials))
        assert rate_from_counts(hits, trials).contains(spec.error_profile(x)), (spec.name, x)


@pytest.mark.parametrize("kind", ["honest", "slow"])
def test_honest_kinds_unchanged_by_wrapper(kind):
    spec = CandidateSpec(kind, PARITY)
    wrapped = Wrapped(spec, PARITY)
    for n in range(1, 7):
        for k in range(1 << n):
            x = format(k, f"0{n}b")
            raw = run_until(spec.spawn(x, 1, Coins(0)), 500) is not None
            wr = run_until(wrapped.spawn(x, 1, Coins(0)), 1000) is not None
            assert raw == wr == PARITY.is_member(x)


def test_parse_candidate():
    assert parse_candidate("HonestDecider", PARITY).kind == "honest"
    c = parse_candidate("planted:prefix=11,eps=1/4", PARITY)
    assert c.prefix == "11" and c.eps == Fraction(1, 4)
    assert parse_candidate("slow:g=3", PARITY).g == 3
    with pytest.raises(ValueError):
        parse_candidate("oracle", PARITY)
    with pytest.raises(ValueError):
        parse_candidate("coin-liar:delta=1", PARITY)
