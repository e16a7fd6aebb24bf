import itertools
from fractions import Fraction

import pytest
from scipy.stats import binom

from autolab.errors import EnumerationTooLarge
from autolab.problems import PARITY, Taut, encode_formula
from autolab.process import Coins, Process, run_to_end, run_until
from autolab.proofsys import (
    FULL_VOTES,
    SCALED_VOTES,
    AcceptAll,
    NoisyStamp,
    RejectAll,
    ShapedWitness,
    TableSearch,
    TriPoly,
    TruthTableSystem,
    VoteConfig,
    proof_search_automatizer,
    proof_search_error_exact,
    check_completeness,
    check_ps_poly_bounded,
    check_ps_simulation,
    check_soundness,
    check_time_bound,
    composed_bound,
    is_proof,
    make_search,
    make_system,
    shortest_proof_size,
    tautologies,
    vote_body,
    vote_pass_probability_exact,
    vote_pass_rate,
    vote_passes,
    witnesses,
)
from autolab.stats import as_mpf
from autolab.universal import TimeTable, poly_eval

TAUT2 = Taut(2)
OPS = {3: 1, 4: 2, 5: 2, 6: 2}


def brute_is_tautology(codes, v=2):
    # evaluate the postfix formula with Python booleans under every assignment
    for assign in itertools.product([False, True], repeat=v):
        stack = []
        for c in codes:
            if c < v:
                stack.append(assign[c])
            elif c in OPS and len(stack) >= OPS[c]:
                if c == 3:
                    stack.append(not stack.pop())
                else:
                    b, a = stack.pop(), stack.pop()
                    stack.append({4: a and b, 5: a or b, 6: (not a) or b}[c])
            else:
                return False
        if len(stack) != 1 or not stack[0]:
            return False
    return True


def test_tautology_enumeration_against_brute_force():
    for tokens in (3, 4, 5):
        want = ["".join(format(c, "03b") for c in codes)
                for codes in itertools.product([0, 1, 3, 4, 5, 6], repeat=tokens)
                if brute_is_tautology(codes)]
        assert sorted(tautologies(TAUT2, tokens)) == sorted(want)
    assert len(tautologies(TAUT2, 4)) == 4 and len(tautologies(TAUT2, 5)) == 46


def test_truth_table_system():
    sysm = TruthTableSystem(TAUT2)
    taut = encode_formula(["x1", "x1", "not", "or"])
    assert is_proof(sysm, taut, "", 1).verdict == "proof"
    assert is_proof(sysm, encode_formula(["x1", "x2", "or"]), "", 1).verdict == "not-proof"
    assert shortest_proof_size(sysm, taut, 1, 2) == 0
    assert run_until(Process(sysm.verify_body(taut, "", 1, Coins(0)), "v"),
                     sysm.budget(len(taut), 0, 1)) is not None


def test_is_proof_randomized_verdicts():
    hi = NoisyStamp(default=Fraction(9, 10))
    lo = NoisyStamp(default=Fraction(1, 20))
    mid = NoisyStamp(default=Fraction(3, 8))
    assert is_proof(hi, "1", "", 1, trials=400).verdict == "proof"
    assert is_proof(lo, "1", "", 1, trials=400).verdict == "not-proof"
    assert is_proof(mid, "1", "", 1, trials=400).verdict == "borderline"


def test_witness_enumeration():
    assert list(witnesses(2)) == ["", "0", "1", "00", "01", "10", "11"]
    assert list(witnesses(-1)) == []
    with pytest.raises(EnumerationTooLarge):
        list(witnesses(20))


def test_completeness_and_soundness():
    echo = ShapedWitness(PARITY, "echo")
    assert check_completeness(echo, "011", 1, 3) == (True, "011")
    assert check_completeness(echo, "011", 1, 2) == (False, None)
    rep = check_soundness(echo, PARITY, 3, 2, 3)
    assert rep.sound and rep.offending_mass == 0
    bad = check_soundness(AcceptAll(), PARITY, 3, 2, 0)
    assert not bad.sound and bad.offending_mass == 1
    assert check_soundness(RejectAll(), PARITY, 3, 2, 2).sound


def test_vote_exact_against_scipy():
    for q in (Fraction(1, 4), Fraction(2, 5), Fraction(1, 2)):
        want = binom.sf(39, 100, float(q))
        assert abs(float(vote_pass_probability_exact(q, SCALED_VOTES)) - want) < 1e-12
    assert as_mpf(vote_pass_probability_exact(Fraction(1, 2), FULL_VOTES)) >= 1 - 1e-8
    assert as_mpf(vote_pass_probability_exact(Fraction(1, 4), FULL_VOTES)) <= 1e-20
    with pytest.raises(ValueError):
        vote_pass_probability_exact(2, SCALED_VOTES)
    with pytest.raises(ValueError):
        VoteConfig(1, 10, 11)


def test_vote_direct_matches_scheduled():
    stamp = NoisyStamp(default=Fraction(2, 5))
    cfg = VoteConfig(1, 30, 12)
    for s in range(40):
        sched = run_to_end(Process(vote_body(stamp, "1", "", 1, cfg, Coins(s)), "v"))
        assert sched == vote_passes(stamp, "1", "", 1, cfg, s)


def test_vote_rate_matches_exact():
    stamp = NoisyStamp(default=Fraction(2, 5))
    est = vote_pass_rate(stamp, "1", "", 1, SCALED_VOTES, 1500, 4)
    assert est.contains(vote_pass_probability_exact(Fraction(2, 5), SCALED_VOTES))


def test_proof_search_automatizer_behaviour():
    taut = encode_formula(["x1", "x1", "not", "or"])
    composite = proof_search_automatizer(TruthTableSystem(TAUT2), make_search("empty"), TAUT2, SCALED_VOTES)
    assert run_until(composite.spawn(taut, 1, Coins(0)), 10**5) is not None
    non = encode_formula(["x1", "x2", "or"])
    assert run_until(composite.spawn(non, 1, Coins(0)), 10**5) is None
    # planted liar on one non-member: error is exactly 1 - (1 - pass)^copies
    liar = NoisyStamp({(non, "w"): Fraction(1, 2)})
    cfg = VoteConfig(3, 10, 4)
    p = vote_pass_probability_exact(Fraction(1, 2), cfg)
    assert proof_search_error_exact(liar, TableSearch({non: "w"}), non, 1, cfg) == 1 - (1 - p) ** 3


def test_ps_simulation_and_bounds():
    echo = ShapedWitness(PARITY, "echo")
    square = ShapedWitness(PARITY, "square")
    grid = [(x, 1) for x in ("0", "11", "101")]
    # |square proof| = n^2 <= (d n)(d n |echo proof|) with |echo proof| = n
    assert check_ps_simulation(square, echo, [0, 1], [0, 1], grid, 9).holds
    assert not check_ps_simulation(square, echo, [1], [0, 1], grid, 9).holds
    assert check_ps_poly_bounded(square, grid, [0, 0, 1], 9).holds
    assert not check_ps_poly_bounded(square, grid, [0, 1], 9).holds


def test_composed_bound():
    coeffs = composed_bound([0, 2], [1, 1], [0, 1])  # 2 z (1 + z * z) = 2z + 2z^3
    assert coeffs == [0, 2, 0, 2]
    for z in range(1, 6):
        assert poly_eval(coeffs, z) == 2 * z * (1 + z * z)
    with pytest.raises(ValueError):
        composed_bound([-1], [1], [1])


def test_time_bound_and_tripoly():
    poly = TriPoly.of({(1, 0, 0): 2, (0, 1, 1): 3})
    assert poly(4, 2, 5) == 8 + 30
    table = TimeTable.from_medians({("00", 1): 5, ("01", 1): 100})
    res = check_time_bound(table, {("00", 1): 1, ("01", 1): 1}, poly)
    assert not res.holds and len(res.violations) == 1
    assert not check_time_bound(table, {}, poly).holds


def test_make_factories():
    assert make_system("tt", TAUT2).deterministic
    assert make_system("accept-all", PARITY).name == "accept-all"
    with pytest.raises(ValueError):
        make_system("tt", PARITY)
    with pytest.raises(ValueError):
        make_search("oracle")
