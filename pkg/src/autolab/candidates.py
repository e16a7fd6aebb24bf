"""Candidate automatizers with analytically known error profiles.

Every automatizer in the package exposes ``name`` and
``spawn(x, d, coins) -> Process``; the candidates here add exact
``error_profile`` / ``halt_probability`` values used as oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import MemberInput
from .problems import DistributionalProblem, exact_mass
from .stats import as_fraction
from .process import ONE, Coins, Process, enforce_conditions

KINDS = ("honest", "slow", "always-one", "coin-liar", "planted")


@dataclass(frozen=True)
class CandidateSpec:
    """A zoo member bound to a problem.

    kind:
        ``honest`` (the problem's semidecider), ``slow`` (idles
        ``max(|x|,1)**g`` steps first), ``always-one``, ``coin-liar`` (lies
        with probability ``eps`` on every input) or ``planted`` (lies with
        probability ``eps`` only on inputs starting with ``prefix``).
    """

    kind: str
    problem: DistributionalProblem
    g: int = 2
    eps: Fraction = Fraction(0)
    prefix: str = "1"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown candidate kind {self.kind!r}")
        object.__setattr__(self, "eps", as_fraction(self.eps))
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")

    @property
    def name(self) -> str:
        if self.kind == "slow":
            return f"slow:g={self.g}"
        if self.kind == "coin-liar":
            return f"coin-liar:eps={self.eps}"
        if self.kind == "planted":
            return f"planted:prefix={self.prefix},eps={self.eps}"
        return self.kind

    def in_bad_set(self, x: str) -> bool:
        return self.kind == "planted" and x.startswith(self.prefix)

    # -- behaviour ---------------------------------------------------

    def body(self, x: str, d: int, coins: Coins):
        problem = self.problem
        kind = self.kind
        if kind == "always-one":
            return ONE
        if kind == "slow":
            for _ in range(max(len(x), 1) ** self.g):
                yield
        elif kind == "coin-liar" or (kind == "planted" and x.startswith(self.prefix)):
            # the lie is decided on the first step
            lie = coins.bernoulli(self.eps)
            if lie:
                return ONE
            yield
        result = yield from problem.semidecider(x)
        return result

    def spawn_body(self, x: str, d: int, coins: Coins):
        """The raw generator behind :meth:`spawn` (used by the direct drivers)."""
        if self.kind == "honest":
            # skip the delegating generator layer; same steps, same outcome
            return self.problem.semidecider(x)
        return self.body(x, d, coins)

    def spawn(self, x: str, d: int, coins: Coins) -> Process:
        return Process(self.spawn_body(x, d, coins), self.name)

    # -- oracles -----------------------------------------------------

    def error_profile(self, x: str, d: int = 1) -> Fraction:
        """Pr[candidate outputs 1 on (x, d)] for a non-member ``x``."""
        if self.problem.is_member(x):
            raise MemberInput(f"{x!r} is a member of {self.problem.name}")
        if self.kind in ("honest", "slow"):
            return Fraction(0)
        if self.kind == "always-one":
            return Fraction(1)
        if self.kind == "coin-liar":
            return self.eps
        return self.eps if self.in_bad_set(x) else Fraction(0)

    def halt_probability(self, x: str, d: int, T: int) -> Fraction:
        """Pr[candidate outputs 1 on a non-member within T steps] (all lies happen at step 1)."""
        return self.error_profile(x, d) if T >= 1 else Fraction(0)


def make_candidate(spec: CandidateSpec, x: str, d: int, seed=0) -> Process:
    coins = seed if isinstance(seed, Coins) else Coins(seed)
    return spec.spawn(x, d, coins)


def known_error_profile(spec: CandidateSpec, x: str, d: int = 1) -> Fraction:
    return spec.error_profile(x, d)


@dataclass
class Verdict:
    correct: bool
    mass: Fraction
    limit: Fraction

    def __bool__(self):
        return self.correct


def correctness_verdict(spec: CandidateSpec, problem: DistributionalProblem, n: int, d: int,
                        lam, eps) -> Verdict:
    """Exact (lam, eps)-correctness at (n, d): is D_n{x : profile(x) > eps} < 1/(lam d)?"""
    eps = Fraction(eps)
    mass = exact_mass(problem, n, lambda x: spec.error_profile(x, d) > eps)
    limit = 1 / (Fraction(lam) * d)
    return Verdict(mass < limit, mass, limit)


class Wrapped:
    """An automatizer run under :func:`enforce_conditions`."""

    def __init__(self, inner, problem: DistributionalProblem):
        self.inner = inner
        self.problem = problem
        self.name = f"wrapped({inner.name})"

    def spawn(self, x: str, d: int, coins: Coins) -> Process:
        return enforce_conditions(self.inner.spawn(x, d, coins.child("inner")), self.problem, x)


def parse_candidate(text: str, problem: DistributionalProblem) -> CandidateSpec:
    """Candidate from a CLI name: ``honest``, ``slow:g=2``, ``always-one``,
    ``coin-liar:eps=1/8``, ``planted:prefix=111,eps=1/2``."""
    kind, _, rest = text.strip().partition(":")
    kind = kind.lower().replace("_", "-")
    aliases = {"honestdecider": "honest", "slowhonest": "slow", "alwaysone": "always-one",
               "coinliar": "coin-liar", "plantedliar": "planted"}
    kind = aliases.get(kind.replace("-", ""), kind)
    kw = {}
    for part in filter(None, rest.split(",")):
        key, _, val = part.partition("=")
        key = key.strip()
        if key == "g":
            kw["g"] = int(val)
        elif key == "eps":
            kw["eps"] = Fraction(val.strip())
        elif key == "prefix":
            kw["prefix"] = val.strip()
        else:
            raise ValueError(f"unknown candidate parameter {key!r} in {text!r}")
    return CandidateSpec(kind, problem, **kw)


def default_zoo(problem: DistributionalProblem) -> list:
    return [
        CandidateSpec("honest", problem),
        CandidateSpec("slow", problem, g=2),
        CandidateSpec("always-one", problem),
        CandidateSpec("coin-liar", problem, eps=Fraction(1, 8)),
        CandidateSpec("planted", problem, eps=Fraction(1, 2), prefix="111"),
    ]
