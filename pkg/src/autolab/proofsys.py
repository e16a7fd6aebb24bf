"""Heuristic proof systems, their automatizations and the composite proof-search automatizer.

A proof system exposes ``verify_body(x, w, d, coins)``: a process body that
always halts, returning :data:`ONE` to accept and anything else to reject.
An automatization exposes ``search_body(x, d, coins)`` returning a witness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from numpy.polynomial import Polynomial

from .errors import EnumerationTooLarge
from .problems import DistributionalProblem, Taut, decode_tokens, truth_table
from .process import (
    DIVERGE,
    ONE,
    Coins,
    Process,
    ScheduleTrace,
    at_least,
    derive_seed,
    drive,
    parallel_body,
    run_to_end,
)
from .stats import as_fraction, binom_tail_ge, rate_from_counts
from .universal import poly_eval

WITNESS_CAP = 1 << 20
PROOF_LEVEL = Fraction(1, 2)
SOUND_LEVEL = Fraction(1, 4)


# ----------------------------------------------------------------------
# Proof systems
# ----------------------------------------------------------------------


class ProofSystem:
    """Base class; ``deterministic`` systems are checked with a single run."""

    name = "system"
    deterministic = False

    def verify_body(self, x: str, w: str, d: int, coins: Coins):
        raise NotImplementedError

    def budget(self, x_len: int, w_len: int, d: int) -> int:
        """Step bound on one verifier run."""
        return x_len + w_len + 16

    def acceptance_rate(self, x: str, w: str, d: int) -> Fraction:
        """Exact Pr[accept]; systems without an oracle raise."""
        raise NotImplementedError

    def accepts(self, x: str, w: str, d: int, coins: Coins) -> bool:
        return run_to_end(Process(self.verify_body(x, w, d, coins), self.name)) is ONE


class TruthTableSystem(ProofSystem):
    """Accepts exactly the tautologies; the witness is ignored."""

    deterministic = True

    def __init__(self, problem: Taut):
        self.problem = problem
        self.name = f"truth-table[{problem.name}]"

    def verify_body(self, x, w, d, coins):
        codes = decode_tokens(x) or []
        for _ in codes:
            yield
        tt = truth_table(codes, self.problem.v) if codes else None
        if tt is None:
            return None
        for r in range(1 << self.problem.v):
            yield
            if not (tt >> r) & 1:
                return None
        return ONE

    def budget(self, x_len, w_len, d):
        return x_len + (1 << self.problem.v) + 1

    def acceptance_rate(self, x, w, d):
        return Fraction(int(self.problem.is_member(x)))


class NoisyStamp(ProofSystem):
    """Accepts (x, w) with a planted probability, decided in one step.

    ``rates`` maps ``(x, w)`` to a probability, or is a callable
    ``(x, w) -> probability``; missing pairs use ``default``.
    """

    def __init__(self, rates=None, default=0, name: str = "noisy-stamp"):
        self.rates = rates if rates is not None else {}
        self.default = as_fraction(default)
        self.name = name

    def acceptance_rate(self, x, w, d):
        if callable(self.rates):
            return as_fraction(self.rates(x, w))
        return as_fraction(self.rates.get((x, w), self.default))

    def verify_body(self, x, w, d, coins):
        yield
        return ONE if coins.bernoulli(self.acceptance_rate(x, w, d)) else None

    def budget(self, x_len, w_len, d):
        return 2


class AcceptAll(ProofSystem):
    name = "accept-all"
    deterministic = True

    def verify_body(self, x, w, d, coins):
        yield
        return ONE

    def acceptance_rate(self, x, w, d):
        return Fraction(1)


class RejectAll(ProofSystem):
    name = "reject-all"
    deterministic = True

    def verify_body(self, x, w, d, coins):
        yield
        return None

    def acceptance_rate(self, x, w, d):
        return Fraction(0)


class ShapedWitness(ProofSystem):
    """Accepts members whose witness has a prescribed shape.

    ``echo``: w must equal x.  ``square``: w must be |x|^2 zeros.
    Membership is read off the problem's oracle after scanning x and w.
    """

    deterministic = True

    def __init__(self, problem: DistributionalProblem, shape: str = "echo"):
        if shape not in ("echo", "square"):
            raise ValueError(f"unknown witness shape {shape!r}")
        self.problem = problem
        self.shape = shape
        self.name = f"{shape}[{problem.name}]"

    def expected(self, x: str) -> str:
        return x if self.shape == "echo" else "0" * (len(x) ** 2)

    def verify_body(self, x, w, d, coins):
        for _ in range(len(x) + len(w)):
            yield
        return ONE if w == self.expected(x) and self.problem.is_member(x) else None

    def acceptance_rate(self, x, w, d):
        return Fraction(int(w == self.expected(x) and self.problem.is_member(x)))


# ----------------------------------------------------------------------
# Automatizations (proof search)
# ----------------------------------------------------------------------


class EmptySearch:
    """Trivial automatization: emit the empty witness."""

    name = "empty"
    deterministic = True

    def search_body(self, x, d, coins):
        yield
        return ""

    def witness(self, x, d) -> str:
        return ""


class EchoSearch:
    """Emit x itself after reading it."""

    name = "echo"
    deterministic = True

    def search_body(self, x, d, coins):
        for _ in x:
            yield
        return x

    def witness(self, x, d) -> str:
        return x


class TableSearch:
    """Emit a planted witness from a lookup table (``default`` otherwise)."""

    deterministic = True

    def __init__(self, table: dict, default: str = "", name: str = "table"):
        self.table = dict(table)
        self.default = default
        self.name = name

    def search_body(self, x, d, coins):
        yield
        return self.table.get(x, self.default)

    def witness(self, x, d) -> str:
        return self.table.get(x, self.default)


def make_system(name: str, problem: DistributionalProblem) -> ProofSystem:
    key = name.strip().lower()
    if key in ("truth-table", "truthtable", "tt"):
        if not isinstance(problem, Taut):
            raise ValueError("truth-table system needs a TAUT problem")
        return TruthTableSystem(problem)
    if key in ("accept-all", "acceptall"):
        return AcceptAll()
    if key in ("reject-all", "rejectall"):
        return RejectAll()
    if key in ("echo", "square"):
        return ShapedWitness(problem, key)
    raise ValueError(f"unknown proof system {name!r}")


def make_search(name: str):
    key = name.strip().lower()
    if key in ("empty", "trivial"):
        return EmptySearch()
    if key == "echo":
        return EchoSearch()
    raise ValueError(f"unknown automatization {name!r}")


# ----------------------------------------------------------------------
# Proof checks
# ----------------------------------------------------------------------


@dataclass
class ProofVerdict:
    verdict: str  # "proof", "not-proof" or "borderline"
    rate: float
    low: float
    high: float
    trials: int


def is_proof(system: ProofSystem, x: str, w: str, d: int, trials: int = 200, seed: int = 0,
             confidence: float = 0.99) -> ProofVerdict:
    """Proof if the lower limit of the acceptance rate is >= 1/2, NotProof if the upper <= 1/4."""
    if system.deterministic:
        acc = system.accepts(x, w, d, Coins(seed))
        r = float(acc)
        return ProofVerdict("proof" if acc else "not-proof", r, r, r, 1)
    hits = sum(system.accepts(x, w, d, Coins(derive_seed(seed, "verify", x, w, i)))
               for i in range(trials))
    est = rate_from_counts(hits, trials, confidence)
    if est.low >= PROOF_LEVEL:
        v = "proof"
    elif est.high <= SOUND_LEVEL:
        v = "not-proof"
    else:
        v = "borderline"
    return ProofVerdict(v, est.estimate, est.low, est.high, trials)


def witnesses(bound: int, cap: int = WITNESS_CAP):
    """All strings of length <= bound, shortest first, lexicographic within a length."""
    if bound < 0:
        return
    total = (1 << (bound + 1)) - 1
    if total > cap:
        raise EnumerationTooLarge(f"{total} witnesses up to length {bound} exceed cap {cap}")
    for n in range(bound + 1):
        for bits in itertools.product("01", repeat=n):
            yield "".join(bits)


def check_completeness(system, x: str, d: int, bound: int, trials: int = 200, seed: int = 0):
    """(found, witness): the first w with |w| <= bound that is a proof of x."""
    for w in witnesses(bound):
        if is_proof(system, x, w, d, trials, seed).verdict == "proof":
            return True, w
    return False, None


@dataclass
class SoundnessReport:
    sound: bool
    offending_mass: Fraction
    limit: Fraction
    offenders: list
    bound: int


def check_soundness(system, problem: DistributionalProblem, n: int, d: int, bound: int,
                    trials: int = 200, seed: int = 0) -> SoundnessReport:
    """Sound up to witness length ``bound``: D_n-mass of x with some w accepted > 1/4 is < 1/d.

    An x counts as offending unless every w gets a NotProof verdict, so the
    reported mass is conservative for randomized systems.
    """
    support = problem.exact_support(n)
    ws = list(witnesses(bound))
    mass = Fraction(0)
    offenders = []
    for x, weight in sorted(support.items()):
        for w in ws:
            if is_proof(system, x, w, d, trials, seed).verdict != "not-proof":
                mass += weight
                offenders.append((x, w))
                break
    limit = Fraction(1, d)
    return SoundnessReport(mass < limit, mass, limit, offenders, bound)


def shortest_proof_size(system, x: str, d: int, bound: int, trials: int = 200,
                        seed: int = 0) -> Optional[int]:
    """Length of the shortest proof with |w| <= bound, or None when none is found."""
    found, w = check_completeness(system, x, d, bound, trials, seed)
    return len(w) if found else None


# ----------------------------------------------------------------------
# Voting and the composite automatizer
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class VoteConfig:
    copies: int = 1000
    votes: int = 10000
    threshold: int = 4000

    def __post_init__(self):
        if self.copies < 1 or self.votes < 1:
            raise ValueError("copies and votes must be >= 1")
        if not 0 <= self.threshold <= self.votes:
            raise ValueError("threshold must lie in [0, votes]")


FULL_VOTES = VoteConfig()
SCALED_VOTES = VoteConfig(copies=10, votes=100, threshold=40)


def vote_pass_probability_exact(q, config: VoteConfig):
    """Pr[Bin(votes, q) >= threshold]."""
    q = as_fraction(q)
    if not 0 <= q <= 1:
        raise ValueError("q must lie in [0, 1]")
    return binom_tail_ge(config.votes, q, config.threshold)


def vote_body(system, x, w, d, config: VoteConfig, coins: Coins):
    """``votes`` verifier runs on (x, w); True iff at least ``threshold`` accept.

    Stops as soon as the outcome is settled; the decision is unaffected.
    """
    need, total = config.threshold, config.votes
    acc = 0
    for i in range(total):
        if acc >= need or acc + (total - i) < need:
            break
        proc = Process(system.verify_body(x, w, d, coins.child("vote", i)), system.name)
        yield from drive(proc)
        if proc.output1:
            acc += 1
    return acc >= need


def vote_passes(system, x, w, d, config: VoteConfig, seed: int) -> bool:
    """Direct (unscheduled) version of :func:`vote_body` with the same coin layout."""
    coins = Coins(seed)
    need, total = config.threshold, config.votes
    acc = 0
    for i in range(total):
        if acc >= need or acc + (total - i) < need:
            break
        if system.accepts(x, w, d, coins.child("vote", i)):
            acc += 1
    return acc >= need


def vote_pass_rate(system, x, w, d, config: VoteConfig, trials: int, seed: int,
                   confidence: float = 0.99):
    hits = sum(vote_passes(system, x, w, d, config, derive_seed(seed, "vote-trial", i))
               for i in range(trials))
    return rate_from_counts(hits, trials, confidence)


def _copy_body(system, search, x, d, config, coins):
    finder = Process(search.search_body(x, d, coins.child("search")), search.name)
    yield from drive(finder)
    if finder.status.value != "halted":
        yield DIVERGE
    ok = yield from vote_body(system, x, finder.result, d, config, coins.child("votes"))
    if ok:
        return ONE
    yield DIVERGE


class ProofSearchAutomatizer:
    """Composite automatizer: ``copies`` searches, each followed by a vote,
    plus the problem's semidecider as an extra parallel branch."""

    def __init__(self, system, search, problem: DistributionalProblem,
                 config: VoteConfig = FULL_VOTES):
        self.system = system
        self.search = search
        self.problem = problem
        self.config = config
        self.name = f"proof-search[{system.name},{search.name}]"

    def spawn_traced(self, x: str, d: int, coins: Coins):
        children = [Process(_copy_body(self.system, self.search, x, d, self.config,
                                       coins.child("copy", j)), f"copy{j}")
                    for j in range(self.config.copies)]
        children.append(Process(self.problem.semidecider(x), "semidecider"))
        trace = ScheduleTrace()
        return Process(parallel_body(children, at_least(1), trace), self.name), trace

    def spawn(self, x: str, d: int, coins: Coins) -> Process:
        return self.spawn_traced(x, d, coins)[0]


def proof_search_automatizer(system, search, problem, config: VoteConfig = FULL_VOTES) -> ProofSearchAutomatizer:
    return ProofSearchAutomatizer(system, search, problem, config)


def proof_search_error_exact(system, search, x: str, d: int, config: VoteConfig) -> Fraction:
    """Pr[the composite outputs 1] on a non-member, for a deterministic search and an exact-rate system.

    Copies vote independently, so the result is 1 - (1 - pass(q))^copies.
    """
    q = system.acceptance_rate(x, search.witness(x, d), d)
    p = vote_pass_probability_exact(q, config)
    if isinstance(p, Fraction):
        return 1 - (1 - p) ** config.copies
    return 1 - (1 - p) ** config.copies


# ----------------------------------------------------------------------
# Proof-size comparisons
# ----------------------------------------------------------------------


@dataclass
class GridCheck:
    holds: bool
    violations: list
    checked: int

    def __bool__(self):
        return self.holds


class _SizeCache:
    def __init__(self, bound, trials, seed):
        self.bound, self.trials, self.seed = bound, trials, seed
        self.memo = {}

    def __call__(self, system, x, d):
        key = (id(system), x, d)
        if key not in self.memo:
            self.memo[key] = shortest_proof_size(system, x, d, self.bound, self.trials,
                                                 self.seed)
        return self.memo[key]


def check_ps_simulation(sys1, sys2, p: Sequence, q: Sequence, grid: Sequence, bound: int,
                        trials: int = 200, seed: int = 0) -> GridCheck:
    """Shortest sys1-proof <= p(d |x| max_{d' <= q(|x| d)} shortest sys2-proof), cellwise.

    ``d'`` ranges over the grid's d values for the same x; a missing proof
    (None) on either side fails the cell.
    """
    size = _SizeCache(bound, trials, seed)
    ds_for = {}
    for x, d in grid:
        ds_for.setdefault(x, set()).add(d)
    violations = []
    for x, d in grid:
        s1 = size(sys1, x, d)
        cols = [dp for dp in sorted(ds_for[x]) if dp <= poly_eval(q, len(x) * d)]
        s2 = [size(sys2, x, dp) for dp in cols]
        if s1 is None or not s2 or any(s is None for s in s2):
            violations.append({"x": x, "d": d, "size": s1, "reason": "missing proof"})
            continue
        rhs = poly_eval(p, d * len(x) * max(s2))
        if s1 > rhs:
            violations.append({"x": x, "d": d, "size": s1, "bound": rhs})
    return GridCheck(not violations, violations, len(grid))


def check_ps_poly_bounded(system, grid: Sequence, p: Sequence, bound: int, trials: int = 200,
                          seed: int = 0) -> GridCheck:
    """Shortest proof of x at d is <= p(|x| d) on every cell (None fails the cell)."""
    size = _SizeCache(bound, trials, seed)
    violations = []
    for x, d in grid:
        s = size(system, x, d)
        lim = poly_eval(p, len(x) * d)
        if s is None or s > lim:
            violations.append({"x": x, "d": d, "size": s, "bound": lim})
    return GridCheck(not violations, violations, len(grid))


def composed_bound(p: Sequence, p2: Sequence, q: Sequence) -> list:
    """Coefficients of z -> p(z * p2(z * q(z))), an upper bound on sys1's proof size.

    If sys1 simulates sys2 via (p, q) and sys2's proofs are bounded by p2,
    then with z = d|x| >= |x| and nonnegative coefficients the shortest
    sys1-proof is at most this polynomial in z.
    """
    for c in (*p, *p2, *q):
        if c < 0:
            raise ValueError("composition needs nonnegative coefficients")
    z = Polynomial([0, 1])
    inner = Polynomial(list(p2))(z * Polynomial(list(q)))
    total = Polynomial(list(p))(z * inner)
    return [int(round(c)) for c in total.coef]


# ----------------------------------------------------------------------
# Time bounds for the composite
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TriPoly:
    """Polynomial in (|x|, d, s) as {(i, j, k): coefficient}."""

    terms: tuple

    @classmethod
    def of(cls, mapping: dict) -> "TriPoly":
        return cls(tuple(sorted(mapping.items())))

    def __call__(self, n, d, s):
        return sum(c * n ** i * d ** j * s ** k for (i, j, k), c in self.terms)


def check_time_bound(table, sizes: dict, bound: TriPoly) -> GridCheck:
    """Median t(x, d) <= bound(|x|, d, shortest proof size) on every cell of ``table``."""
    violations = []
    for (x, d) in sorted(table.cells, key=lambda c: (len(c[0]), c)):
        s = sizes.get((x, d))
        if s is None:
            violations.append({"x": x, "d": d, "reason": "no proof size"})
            continue
        t = table.median(x, d)
        lim = bound(len(x), d, s)
        if not t <= lim:
            violations.append({"x": x, "d": d, "t": t, "bound": lim})
    return GridCheck(not violations, violations, len(table.cells))


def tautologies(problem: Taut, tokens: int) -> list:
    """All tautologies written with exactly ``tokens`` tokens (exhaustive)."""
    alphabet = list(range(problem.v)) + [3, 4, 5, 6]
    full = (1 << (1 << problem.v)) - 1
    out = []
    for codes in itertools.product(alphabet, repeat=tokens):
        if truth_table(codes, problem.v) == full:
            out.append("".join(format(c, "03b") for c in codes))
    return out
