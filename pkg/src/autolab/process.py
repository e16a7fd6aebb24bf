"""Execution substrate: steppable randomized processes and a fair scheduler.

A process body is a generator.  Every ``next()`` on it is one step (one
scheduler tick).  A body signals its fate as follows:

* ``yield`` (or ``yield None``): the step finished, keep going;
* ``yield DIVERGE``: enter the absorbing non-halting state;
* ``return value``: halt with ``value``.  Automatizers return :data:`ONE`.

Bodies draw randomness only from the :class:`Coins` object they were built
with, so halting time and output are functions of the coin tape.
"""

from __future__ import annotations

import enum
import hashlib
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from scipy.stats import binom

from .errors import EnumerationTooLarge


class Signal(enum.Enum):
    ONE = "output-1"
    DIVERGE = "diverge"

    def __repr__(self):
        return self.name


ONE = Signal.ONE
DIVERGE = Signal.DIVERGE


class Status(enum.Enum):
    RUNNING = "running"
    HALTED = "halted"
    DIVERGED = "diverged"


RUNNING = Status.RUNNING
HALTED = Status.HALTED
DIVERGED = Status.DIVERGED

INFINITE = math.inf


# ----------------------------------------------------------------------
# Randomness
# ----------------------------------------------------------------------


def derive_seed(seed: int, *keys) -> int:
    """Deterministically derive a 64-bit child seed from ``seed`` and a key path."""
    data = repr((int(seed),) + keys).encode()
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _ratio(p) -> tuple[int, int]:
    if isinstance(p, Fraction):
        return p.numerator, p.denominator
    if isinstance(p, int):
        return p, 1
    q = Fraction(p)
    return q.numerator, q.denominator


class Coins:
    """Private fair-coin stream of a process, keyed by a 64-bit seed.

    Bits come from BLAKE2b in counter mode; the hash is only computed when a
    coin is actually requested, so coin-free processes cost nothing here.
    """

    __slots__ = ("_seed", "_keys", "_derived", "_block", "_avail", "_counter", "used")

    def __init__(self, seed: int, keys: tuple = ()):
        # a non-empty ``keys`` names a child stream of ``seed``
        self._seed = int(seed)
        self._keys = keys
        self._derived = None
        self._block = 0
        self._avail = 0
        self._counter = 0
        self.used = 0

    @property
    def seed(self) -> int:
        """Seed under which children of this stream are keyed."""
        if not self._keys:
            return self._seed
        if self._derived is None:
            self._derived = derive_seed(self._seed, *self._keys)
        return self._derived

    def _refill(self):
        # A keyed stream hashes its key path into every block instead of
        # deriving a child seed first: one hash per block either way.
        msg = self._seed.to_bytes(8, "little", signed=False) + self._counter.to_bytes(8, "little")
        if self._keys:
            msg += repr(self._keys).encode()
        self._block = int.from_bytes(hashlib.blake2b(msg).digest(), "little")
        self._avail = 512
        self._counter += 1

    def bit(self) -> int:
        if not self._avail:
            self._refill()
        b = self._block & 1
        self._block >>= 1
        self._avail -= 1
        self.used += 1
        return b

    def bits(self, k: int) -> int:
        """``k`` coins packed into an integer, first coin in the highest bit."""
        v = 0
        for _ in range(k):
            v = (v << 1) | self.bit()
        return v

    def bernoulli(self, p) -> bool:
        """True with probability exactly ``p`` (compares coins against p's binary digits)."""
        num, den = _ratio(p)
        if num <= 0:
            return False
        if num >= den:
            return True
        while True:
            num <<= 1
            digit = 1 if num >= den else 0
            if digit:
                num -= den
            b = self.bit()
            if b != digit:
                return b < digit
            if num == 0:
                return False

    def randbelow(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection on ``ceil(log2 n)`` coins."""
        if n <= 1:
            return 0
        k = (n - 1).bit_length()
        while True:
            v = self.bits(k)
            if v < n:
                return v

    def child(self, *keys) -> "Coins":
        return Coins(self.seed, keys)


class CoinsExhausted(Exception):
    """Raised by :class:`FixedCoins` when a process reads past the tape."""


class FixedCoins(Coins):
    """Coins read from an explicit finite tape; used for exhaustive enumeration.

    Children share the parent's tape.  Since the scheduler is deterministic,
    the order in which coins are consumed is a function of the tape prefix,
    so enumerating tapes still enumerates the joint coin space exactly.
    """

    __slots__ = ("_tape", "_pos")

    def __init__(self, tape: Sequence[int], _pos=None):
        super().__init__(0)
        self._tape = tuple(tape)
        self._pos = _pos if _pos is not None else [0]

    def bit(self) -> int:
        pos = self._pos[0]
        if pos >= len(self._tape):
            raise CoinsExhausted(pos)
        self._pos[0] = pos + 1
        self.used += 1
        return self._tape[pos]

    def child(self, *keys) -> "FixedCoins":
        return FixedCoins(self._tape, self._pos)

    @property
    def position(self) -> int:
        return self._pos[0]


# ----------------------------------------------------------------------
# Processes
# ----------------------------------------------------------------------


class Process:
    """A resumable computation advanced one tick at a time."""

    __slots__ = ("name", "_gen", "status", "ticks", "result")

    def __init__(self, body, name: str = "proc"):
        self.name = name
        self._gen = body
        self.status = RUNNING
        self.ticks = 0
        self.result = None

    def step(self) -> bool:
        """Advance one tick.  Returns False (and charges nothing) once absorbed."""
        if self.status is not RUNNING:
            return False
        self.ticks += 1
        try:
            sig = next(self._gen)
        except StopIteration as stop:
            self.status = HALTED
            self.result = stop.value
        else:
            if sig is DIVERGE:
                self.status = DIVERGED
                self._gen.close()
        return True

    @property
    def output1(self) -> bool:
        return self.status is HALTED and self.result is ONE

    @property
    def active(self) -> bool:
        return self.status is RUNNING

    def __repr__(self):
        return f"Process({self.name!r}, {self.status.value}, ticks={self.ticks})"


def run_until(proc: Process, budget: int) -> Optional[int]:
    """Step ``proc`` for at most ``budget`` ticks in total.

    Returns the tick at which it output 1, or None (undecided: still running,
    diverged, or halted without output).
    """
    if budget < 0:
        raise ValueError("budget must be non-negative")
    if proc.status is not RUNNING:
        return proc.ticks if proc.output1 else None
    # inlined Process.step: this loop carries every Monte Carlo experiment
    gen = proc._gen
    t = proc.ticks
    try:
        while t < budget:
            t += 1
            if next(gen) is DIVERGE:
                proc.status = DIVERGED
                gen.close()
                break
    except StopIteration as stop:
        proc.status = HALTED
        proc.result = stop.value
    proc.ticks = t
    return t if proc.status is HALTED and proc.result is ONE else None


def run_to_end(proc: Process, max_ticks: Optional[int] = None):
    """Run a process that is expected to halt; returns its result."""
    step = proc.step
    while proc.status is RUNNING:
        if max_ticks is not None and proc.ticks >= max_ticks:
            raise RuntimeError(f"{proc.name} did not halt within {max_ticks} ticks")
        step()
    return proc.result


def drive(proc: Process, budget: Optional[int] = None):
    """Body helper: step a child, yielding once per child tick.

    ``yield from drive(child, T)`` charges the child's ticks to the caller.
    """
    step = proc.step
    if budget is None:
        while proc.status is RUNNING:
            step()
            yield
    else:
        while proc.status is RUNNING and proc.ticks < budget:
            step()
            yield
    return proc


def exhaust(body):
    """Run a body to completion outside any scheduler; returns its return value."""
    while True:
        try:
            sig = next(body)
        except StopIteration as stop:
            return stop.value
        if sig is DIVERGE:
            raise RuntimeError("body diverged while being exhausted")


def idle():
    """Body that diverges at its first step."""
    yield DIVERGE


def halt_at(t: int, value=ONE):
    """Deterministic body halting with ``value`` at tick ``t`` (t >= 1)."""
    for _ in range(t - 1):
        yield
    return value


# ----------------------------------------------------------------------
# Fair parallel scheduling
# ----------------------------------------------------------------------


@dataclass
class ScheduleTrace:
    child_ids: list = field(default_factory=list)
    child_ticks: list = field(default_factory=list)
    control_ticks: int = 0
    rounds: int = 0
    stop_reason: str = "running"
    total: int = 0
    completed: list = field(default_factory=list)

    def finalize(self, children):
        self.child_ticks = [c.ticks for c in children]
        self.total = sum(self.child_ticks) + self.control_ticks

    def to_dict(self) -> dict:
        return asdict(self)


StopRule = Callable[[frozenset, int], bool]


def at_least(count: int) -> StopRule:
    """Stop rule: at least ``count`` children have output 1."""
    return lambda done, total: len(done) >= count


def all_completed(done: frozenset, total: int) -> bool:
    return len(done) == total


def parallel_body(children: Sequence[Process], stop_rule: StopRule, trace: ScheduleTrace):
    """Round-robin body: one step per live child, then one control tick.

    The stop rule is evaluated at each round end.  Returns ONE when it fires;
    diverges when every child is absorbed and the rule can no longer fire.
    """
    trace.child_ids = [c.name for c in children]
    done = set()
    try:
        while True:
            trace.rounds += 1
            for i, c in enumerate(children):
                if c.status is RUNNING:
                    c.step()
                    yield
                    if c.status is HALTED and c.result is ONE:
                        done.add(i)
            trace.control_ticks += 1
            yield
            if stop_rule(frozenset(done), len(children)):
                trace.stop_reason = "rule"
                trace.completed = sorted(done)
                return ONE
            if not any(c.status is RUNNING for c in children):
                trace.stop_reason = "idle"
                trace.completed = sorted(done)
                yield DIVERGE
    finally:
        trace.finalize(children)


def run_parallel(children: Sequence[Process], stop_rule: StopRule,
                 max_ticks: Optional[int] = None) -> ScheduleTrace:
    """Schedule ``children`` fairly until ``stop_rule`` holds at a round end."""
    if not children:
        raise ValueError("children must be nonempty")
    trace = ScheduleTrace()
    proc = Process(parallel_body(children, stop_rule, trace), "parallel")
    if max_ticks is None:
        while proc.status is RUNNING:
            proc.step()
    else:
        run_until(proc, max_ticks)
        if proc.status is RUNNING:
            trace.stop_reason = "budget"
            trace.completed = [i for i, c in enumerate(children) if c.output1]
            trace.finalize(children)
    return trace


def interleave_body(proc: Process, semidecider: Process):
    """Alternate single steps of ``proc`` and ``semidecider``; 1 if either outputs 1."""
    while True:
        moved = False
        if proc.status is RUNNING:
            proc.step()
            moved = True
            yield
            if proc.output1:
                return ONE
        if semidecider.status is RUNNING:
            semidecider.step()
            moved = True
            yield
            if semidecider.output1:
                return ONE
        if not moved:
            # Both absorbed; a non-output halt of proc lands here as divergence.
            yield DIVERGE


def enforce_conditions(proc: Process, problem, x: str) -> Process:
    """Wrap ``proc`` so it only ever outputs 1 and accepts every member of L."""
    sd = Process(problem.semidecider(x), f"semidecide[{problem.name}]")
    return Process(interleave_body(proc, sd), f"enforce({proc.name})")


# ----------------------------------------------------------------------
# Halting-time distributions
# ----------------------------------------------------------------------


@dataclass
class HaltTimeDistribution:
    """Probability of halting with 1 at each tick, plus the mass never seen halting."""

    mass: dict
    infinity: Fraction = Fraction(0)

    def __post_init__(self):
        self.mass = {int(t): Fraction(v) for t, v in sorted(self.mass.items()) if v}
        self.infinity = Fraction(self.infinity)

    @property
    def total(self) -> Fraction:
        return sum(self.mass.values(), Fraction(0)) + self.infinity

    def cdf(self, t) -> Fraction:
        return sum((v for s, v in self.mass.items() if s <= t), Fraction(0))

    def quantile(self, p):
        return quantile_time(self, p)


def exact_halt_distribution(factory: Callable[[Coins], Process], budget: int,
                            coins_per_step: Optional[int] = None,
                            max_bits: int = 24) -> HaltTimeDistribution:
    """Exact halting distribution within ``budget`` ticks by enumerating coin tapes.

    Tapes are grown only where the process actually asks for another coin, so
    the leaves partition the coin space.  Any path needing more than
    ``max_bits`` coins raises :class:`EnumerationTooLarge`.
    """
    if coins_per_step is not None and coins_per_step * budget > max_bits:
        raise EnumerationTooLarge(
            f"{coins_per_step} coins/step x budget {budget} exceeds {max_bits} bits")
    mass = defaultdict(Fraction)
    infinity = Fraction(0)
    stack = [()]
    while stack:
        tape = stack.pop()
        proc = factory(FixedCoins(tape))
        try:
            t = run_until(proc, budget)
        except CoinsExhausted:
            if len(tape) >= max_bits:
                raise EnumerationTooLarge(f"process needs more than {max_bits} coins")
            stack.append(tape + (1,))
            stack.append(tape + (0,))
            continue
        w = Fraction(1, 1 << len(tape))
        if t is None:
            infinity += w
        else:
            mass[t] += w
    return HaltTimeDistribution(dict(mass), infinity)


def quantile_time(dist: HaltTimeDistribution, p):
    """Least t whose cumulative halting mass reaches ``p``; ``INFINITE`` if none."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    cum = Fraction(0)
    for t in sorted(dist.mass):
        cum += dist.mass[t]
        if cum >= p:
            return t
    return INFINITE


def median_time(dist: HaltTimeDistribution):
    return quantile_time(dist, Fraction(1, 2))


def sample_halt_times(factory: Callable[[Coins], Process], trials: int, budget: int,
                      seed: int) -> list:
    """Halting ticks of ``trials`` independent runs; censored runs are ``INFINITE``."""
    out = []
    for i in range(trials):
        t = run_until(factory(Coins(derive_seed(seed, "trial", i))), budget)
        out.append(INFINITE if t is None else t)
    return out


@dataclass
class QuantileEstimate:
    p: float
    estimate: float
    low: float
    high: float
    trials: int
    censored: int

    def to_dict(self):
        return asdict(self)


def order_statistic_quantile(times: Iterable, p, confidence: float = 0.99) -> QuantileEstimate:
    """Sample p-quantile with a distribution-free order-statistic interval.

    Each side of the interval has coverage at least ``1 - alpha/2`` for any
    (possibly discrete) halting distribution.
    """
    xs = sorted(times)
    n = len(xs)
    if n < 1:
        raise ValueError("need at least one observation")
    p = float(p)
    alpha = 1.0 - confidence
    est = xs[max(1, math.ceil(p * n - 1e-12)) - 1]
    # lower index: largest j with P[Bin(n,p) <= j-1] <= alpha/2
    k = int(binom.ppf(alpha / 2, n, p))
    while k >= 0 and binom.cdf(k, n, p) > alpha / 2:
        k -= 1
    j_lo = k + 1
    low = xs[j_lo - 1] if j_lo >= 1 else 0
    # upper index: smallest h with P[Bin(n,p) <= h-1] >= 1 - alpha/2
    h = int(binom.ppf(1 - alpha / 2, n, p)) + 1
    high = xs[h - 1] if h <= n else INFINITE
    censored = sum(1 for t in xs if t == INFINITE)
    return QuantileEstimate(p, est, low, high, n, censored)


def estimate_quantile_time(factory: Callable[[Coins], Process], p, trials: int, budget: int,
                           seed: int, confidence: float = 0.99) -> QuantileEstimate:
    """Monte Carlo t^(p) estimate; runs censored at ``budget`` count as infinite."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return order_statistic_quantile(sample_halt_times(factory, trials, budget, seed), p,
                                    confidence)
