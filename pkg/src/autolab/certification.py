"""TEST and CERTIFY: acceptance sampling of a candidate automatizer's fault rate.

Both procedures are written as process bodies so the universal automatizer
can schedule them tick by tick; :func:`test` and :func:`certify` simply run
the same bodies to completion.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Union

from .problems import DistributionalProblem
from .process import DIVERGE, ONE, Coins, Process, derive_seed, drive, run_to_end, run_until
from .stats import (
    BoundReport,
    RateEstimate,
    as_fraction,
    binom_tail_ge,
    binom_tail_lt,
    exp_neg,
    rate_from_counts,
)

# Constants of the two TEST lemmas and of the certification lemma's first item.
REJECT_SIDE = Fraction(101, 100)
ACCEPT_SIDE = Fraction(99, 100)
CORRECT_SIDE = Fraction(1011, 1000)
REJECT_DIVISOR = 30300
ACCEPT_DIVISOR = 20000


@dataclass(frozen=True)
class TestParams:
    T: int
    l: int
    f: Fraction

    __test__ = False  # not a pytest class

    def __post_init__(self):
        object.__setattr__(self, "f", as_fraction(self.f))
        if self.T < 1 or self.l < 1 or self.f < 1:
            raise ValueError("TEST needs T >= 1, l >= 1, f >= 1")

    @property
    def threshold(self) -> Fraction:
        return Fraction(self.l) / self.f

    @property
    def need(self) -> int:
        """Least fault count meeting the rational threshold l/f."""
        return math.ceil(self.threshold)


@dataclass(frozen=True)
class CertParams:
    n: int
    d_prime: int
    T: int
    k: int
    l: int
    f: Fraction

    def __post_init__(self):
        object.__setattr__(self, "f", as_fraction(self.f))
        if min(self.n, self.d_prime, self.T, self.k, self.l) < 1 or self.f < 1:
            raise ValueError("CERTIFY parameters must be positive (and f >= 1)")

    @property
    def threshold(self) -> Fraction:
        return Fraction(self.k, 2 * self.d_prime)

    @property
    def need(self) -> int:
        return math.ceil(self.threshold)

    @property
    def test_params(self) -> TestParams:
        return TestParams(self.T, self.l, self.f)

    def with_T(self, T: int) -> "CertParams":
        return CertParams(self.n, self.d_prime, T, self.k, self.l, self.f)


@dataclass
class TestResult:
    rejected: bool
    faults: int
    runs: int

    __test__ = False

    @property
    def decision(self) -> str:
        return "reject" if self.rejected else "accept"


@dataclass
class CertifyResult:
    accepted: bool
    rejections: int
    samples: list = field(default_factory=list)

    @property
    def decision(self) -> str:
        return "accept" if self.accepted else "reject"

    def to_dict(self) -> dict:
        return {"decision": self.decision, "rejections": self.rejections,
                "samples": [asdict(s) for s in self.samples]}


@dataclass
class SampleRecord:
    x: str
    faults: int
    runs: int
    rejected: bool


# ----------------------------------------------------------------------
# Procedures
# ----------------------------------------------------------------------


def test_body(candidate, x: str, d_prime: int, params: TestParams, coins: Coins,
              early_stop: bool = False):
    """l fresh runs of candidate(x, d'), each cut at T steps; reject iff faults >= l/f.

    With ``early_stop`` the loop ends once the decision is forced; the
    decision is unchanged, only ``faults``/``runs`` become partial.
    """
    thr = params.need
    l = params.l
    faults = 0
    runs = 0
    for i in range(l):
        proc = candidate.spawn(x, d_prime, coins.child("run", i))
        yield from drive(proc, params.T)
        runs += 1
        if proc.output1:
            faults += 1
        if early_stop and (faults >= thr or faults + (l - runs) < thr):
            break
    return TestResult(faults >= thr, faults, runs)


test_body.__test__ = False


def certify_body(candidate, problem: DistributionalProblem, params: CertParams, coins: Coins,
                 early_stop: bool = False, keep_records: bool = True):
    """k samples from D_n, one TEST each; reject iff rejected TESTs >= k/(2d')."""
    thr = params.need
    tp = params.test_params
    k = params.k
    rejections = 0
    done = 0
    records = []
    for i in range(k):
        sampler = Process(problem.sampler(params.n, coins.child("sample", i)), "sampler")
        yield from drive(sampler)
        x = sampler.result
        res = yield from test_body(candidate, x, params.d_prime, tp, coins.child("test", i),
                                   early_stop)
        done += 1
        if res.rejected:
            rejections += 1
        if keep_records:
            records.append(SampleRecord(x, res.faults, res.runs, res.rejected))
        if early_stop and (rejections >= thr or rejections + (k - done) < thr):
            break
    return CertifyResult(rejections < thr, rejections, records)


def _test_direct(candidate, x, d_prime, params: TestParams, coins: Coins, early_stop):
    # Same procedure as test_body without per-tick yields; used off-scheduler.
    thr = params.need
    l, T = params.l, params.T
    body_of = getattr(candidate, "spawn_body", None)
    spawn = candidate.spawn
    faults = 0
    runs = 0
    for i in range(l):
        if body_of is None:
            hit = run_until(spawn(x, d_prime, coins.child("run", i)), T) is not None
        else:
            # run_until inlined on the bare generator: no Process bookkeeping
            gen = body_of(x, d_prime, coins.child("run", i))
            hit = False
            try:
                for _ in range(T):
                    if next(gen) is DIVERGE:
                        break
            except StopIteration as stop:
                hit = stop.value is ONE
            gen.close()
        if hit:
            faults += 1
        runs += 1
        if early_stop and (faults >= thr or faults + (l - runs) < thr):
            break
    return TestResult(faults >= thr, faults, runs)


def test(candidate, x: str, d_prime: int, params: TestParams, seed: int,
         early_stop: bool = False) -> TestResult:
    """Run TEST once; identical decisions to :func:`test_body` for the same seed."""
    return _test_direct(candidate, x, d_prime, params, Coins(seed), early_stop)


test.__test__ = False


def certify(candidate, problem: DistributionalProblem, params: CertParams, seed: int,
            early_stop: bool = False, keep_records: bool = True) -> CertifyResult:
    """Run CERTIFY once; identical decisions to :func:`certify_body` for the same seed."""
    problem.check_length(params.n)
    coins = Coins(seed)
    thr = params.need
    tp = params.test_params
    k = params.k
    rejections = 0
    done = 0
    records = []
    for i in range(k):
        x = run_to_end(Process(problem.sampler(params.n, coins.child("sample", i)), "sampler"))
        res = _test_direct(candidate, x, params.d_prime, tp, coins.child("test", i), early_stop)
        done += 1
        if res.rejected:
            rejections += 1
        if keep_records:
            records.append(SampleRecord(x, res.faults, res.runs, res.rejected))
        if early_stop and (rejections >= thr or rejections + (k - done) < thr):
            break
    return CertifyResult(rejections < thr, rejections, records)


# ----------------------------------------------------------------------
# Exact oracles and lemma bounds
# ----------------------------------------------------------------------


def test_reject_probability_exact(p_T, l: int, f) -> Fraction:
    """Pr[Bin(l, p_T) >= l/f]: the exact rejection probability of TEST."""
    return binom_tail_ge(l, p_T, Fraction(l) / as_fraction(f))


test_reject_probability_exact.__test__ = False


HaltProbs = Union[Mapping[str, object], Callable[[str], object]]


def certify_accept_probability_exact(problem: DistributionalProblem, halt_probs: HaltProbs,
                                     params: CertParams, n: int = None) -> Fraction:
    """Exact acceptance probability of CERTIFY given p_T(x) on every support point.

    q = sum_x D_n(x) * Pr[TEST rejects x];  result = Pr[Bin(k, q) < k/(2d')].
    """
    n = params.n if n is None else n
    support = problem.exact_support(n)
    lookup = halt_probs if callable(halt_probs) else halt_probs.__getitem__
    cache = {}
    q = Fraction(0)
    for x, w in support.items():
        p = as_fraction(lookup(x))
        if p not in cache:
            cache[p] = test_reject_probability_exact(p, params.l, params.f)
        q += w * cache[p]
    return binom_tail_lt(params.k, q, params.threshold)


def sample_reject_probability_exact(problem, halt_probs: HaltProbs, params: CertParams) -> Fraction:
    """q: probability that one CERTIFY sample's TEST rejects."""
    support = problem.exact_support(params.n)
    lookup = halt_probs if callable(halt_probs) else halt_probs.__getitem__
    return sum((w * test_reject_probability_exact(as_fraction(lookup(x)), params.l, params.f)
                for x, w in support.items()), Fraction(0))


def rate_test_bounds(l, f) -> tuple:
    """(bound on rejecting a rarely-halting candidate, bound on accepting a often-halting one)."""
    f = as_fraction(f)
    return exp_neg(Fraction(l) / (REJECT_DIVISOR * f)), exp_neg(Fraction(l) / (ACCEPT_DIVISOR * f))


def certify_error_bounds(k, d_prime, l, f) -> tuple:
    """(failure bound for a correct candidate, acceptance bound for an incorrect one)."""
    f = as_fraction(f)
    rej, acc = rate_test_bounds(l, f)
    first = exp_neg(Fraction(k, 12 * d_prime)) + k * rej
    second = exp_neg(Fraction(k, 8 * d_prime)) + k * acc
    return first, second


def rate_test_grid_check(ls=(50, 200, 1000, 2000), fs=(2, 10, 50),
                       below=(0, Fraction(1, 4), Fraction(1, 2), Fraction(9, 10), Fraction(999, 1000)),
                       above=(Fraction(1001, 1000), Fraction(11, 10), Fraction(3, 2), 2, None),
                       reject_side=REJECT_SIDE, accept_side=ACCEPT_SIDE) -> list:
    """Exact TEST probabilities against both TEST-lemma bounds.

    ``below`` are fractions of 1/(1.01 f) (all strictly below it); ``above``
    are multiples of 1/(0.99 f), capped at 1, with ``None`` meaning p_T = 1.
    """
    reports = []
    for l in ls:
        for f in fs:
            f = as_fraction(f)
            b_rej, b_acc = rate_test_bounds(l, f)
            lo_edge = 1 / (reject_side * f)
            hi_edge = 1 / (accept_side * f)
            for s in below:
                p = lo_edge * as_fraction(s)
                reports.append(BoundReport.compare(
                    f"reject[l={l},f={f},p={p}]", test_reject_probability_exact(p, l, f), b_rej))
            for s in above:
                p = Fraction(1) if s is None else min(Fraction(1), hi_edge * as_fraction(s))
                if p <= hi_edge:
                    continue
                reports.append(BoundReport.compare(
                    f"accept[l={l},f={f},p={p}]", binom_tail_lt(l, p, Fraction(l) / f), b_acc))
    return reports


# ----------------------------------------------------------------------
# Monte Carlo
# ----------------------------------------------------------------------


def test_reject_rate(candidate, x: str, d_prime: int, params: TestParams, trials: int,
                     seed: int, confidence: float = 0.99) -> RateEstimate:
    hits = sum(test(candidate, x, d_prime, params, derive_seed(seed, "test", i),
                    early_stop=True).rejected for i in range(trials))
    return rate_from_counts(hits, trials, confidence)


test_reject_rate.__test__ = False


def certify_accept_rate(candidate, problem, params: CertParams, trials: int, seed: int,
                        confidence: float = 0.99) -> RateEstimate:
    hits = sum(certify(candidate, problem, params, derive_seed(seed, "certify", i),
                       early_stop=True, keep_records=False).accepted for i in range(trials))
    return rate_from_counts(hits, trials, confidence)


def halt_probability_table(candidate, problem, n: int, d_prime: int, T: int) -> dict:
    """p_T(x) on the whole support, from the candidate's analytic oracle."""
    return {x: candidate.halt_probability(x, d_prime, T) for x in problem.exact_support(n)}
