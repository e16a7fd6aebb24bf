"""Distributional proving problems: a semidecidable language plus samplers on non-members.

Two built-in problems:

``PARITY``
    L is the set of even-parity bit strings; D_n is uniform over the odd-parity
    strings of length n.

``TAUT-v``
    L is the set of tautologies over at most v <= 3 variables written in a
    fixed-width postfix encoding (3 bits per token, see :data:`TOKENS`); D_n is
    uniform over well-formed non-tautologies of length n.

Strings are plain ``str`` objects over ``"0"``/``"1"``.
"""

from __future__ import annotations

import csv
import itertools
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

from .errors import NoExactSupport, UnsupportedLength
from .process import DIVERGE, ONE, Coins, Process, run_to_end, run_until

DEFAULT_RETRY_CAP = 10**6


def is_bitstring(x) -> bool:
    return isinstance(x, str) and all(c in "01" for c in x)


def parity(x: str) -> int:
    return x.count("1") & 1


class DistributionalProblem:
    """Interface shared by the built-in problems.

    Subclasses provide ``semidecider`` and ``sampler`` process bodies, a fast
    membership oracle used only for verification, and optionally an exact
    support table.
    """

    name = "problem"

    def is_member(self, x: str) -> bool:
        raise NotImplementedError

    def semidecider(self, x: str):
        raise NotImplementedError

    def sampler(self, n: int, coins: Coins, retry_cap: int = DEFAULT_RETRY_CAP):
        raise NotImplementedError

    def check_length(self, n: int) -> None:
        """Raise :class:`UnsupportedLength` when D_n has empty support."""

    def exact_support(self, n: int) -> dict:
        raise NoExactSupport(f"{self.name} has no exact table at n={n}")

    def has_exact_support(self, n: int) -> bool:
        try:
            self.check_length(n)
            self.exact_support(n)
        except (NoExactSupport, UnsupportedLength):
            return False
        return True

    def spec(self) -> str:
        return self.name

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


# ----------------------------------------------------------------------
# PARITY
# ----------------------------------------------------------------------


class Parity(DistributionalProblem):
    name = "parity"
    EXACT_MAX_N = 20

    def is_member(self, x: str) -> bool:
        return parity(x) == 0

    def semidecider(self, x: str):
        # One bit per step; the decision is taken on the last bit's step.
        acc = 0
        n = len(x)
        for i, c in enumerate(x):
            acc ^= c == "1"
            if i < n - 1:
                yield
        if acc == 0:
            return ONE
        yield DIVERGE

    def check_length(self, n: int) -> None:
        if n < 1:
            raise UnsupportedLength("no odd-parity string of length 0")

    def sampler(self, n: int, coins: Coins, retry_cap: int = DEFAULT_RETRY_CAP):
        self.check_length(n)
        bits = []
        acc = 0
        for _ in range(n - 1):
            b = coins.bit()
            acc ^= b
            bits.append("1" if b else "0")
            yield
        bits.append("0" if acc else "1")
        return "".join(bits)

    def exact_support(self, n: int) -> dict:
        self.check_length(n)
        if n > self.EXACT_MAX_N:
            raise NoExactSupport(f"parity exact tables stop at n={self.EXACT_MAX_N}")
        return dict(_parity_support(n))


@lru_cache(maxsize=32)
def _parity_support(n: int) -> tuple:
    w = Fraction(1, 1 << (n - 1))
    out = []
    for k in range(1 << n):
        s = format(k, f"0{n}b")
        if parity(s):
            out.append((s, w))
    return tuple(out)


# ----------------------------------------------------------------------
# TAUT-v
# ----------------------------------------------------------------------

TOKEN_BITS = 3
# 3-bit codes; variable codes >= v and code 7 are malformed.
TOKENS = {0: "x1", 1: "x2", 2: "x3", 3: "not", 4: "and", 5: "or", 6: "imp"}
CODES = {name: code for code, name in TOKENS.items()}


def encode_formula(tokens) -> str:
    """Postfix token names -> bit string, e.g. ``["x1", "x1", "not", "or"]``."""
    return "".join(format(CODES[t], "03b") for t in tokens)


def decode_tokens(x: str) -> Optional[list]:
    if len(x) % TOKEN_BITS:
        return None
    return [int(x[i:i + TOKEN_BITS], 2) for i in range(0, len(x), TOKEN_BITS)]


def truth_table(codes, v: int) -> Optional[int]:
    """Truth-table bitmask (bit r = value under assignment r) or None if malformed."""
    rows = 1 << v
    full = (1 << rows) - 1
    var_masks = []
    for i in range(v):
        m = 0
        for r in range(rows):
            if (r >> i) & 1:
                m |= 1 << r
        var_masks.append(m)
    stack = []
    for c in codes:
        if c < v:
            stack.append(var_masks[c])
        elif c == 3:
            if not stack:
                return None
            stack.append(~stack.pop() & full)
        elif 4 <= c <= 6:
            if len(stack) < 2:
                return None
            b, a = stack.pop(), stack.pop()
            if c == 4:
                stack.append(a & b)
            elif c == 5:
                stack.append(a | b)
            else:
                stack.append((~a | b) & full)
        else:
            return None
    if len(stack) != 1:
        return None
    return stack[0]


class Taut(DistributionalProblem):
    """Tautologies over ``v`` variables in the postfix 3-bit token encoding."""

    EXACT_MAX_STRINGS = 1 << 20

    def __init__(self, v: int = 2):
        if not 1 <= v <= 3:
            raise ValueError("TAUT-v supports 1 <= v <= 3")
        self.v = v
        self.name = f"taut-{v}"
        self._full = (1 << (1 << v)) - 1

    def classify(self, x: str) -> str:
        """``"tautology"``, ``"non-tautology"`` or ``"malformed"``."""
        codes = decode_tokens(x)
        tt = None if codes is None or not codes else truth_table(codes, self.v)
        if tt is None:
            return "malformed"
        return "tautology" if tt == self._full else "non-tautology"

    def is_member(self, x: str) -> bool:
        return self.classify(x) == "tautology"

    def semidecider(self, x: str):
        codes = decode_tokens(x)
        if codes:
            for _ in codes[:-1]:
                yield
        tt = None if not codes else truth_table(codes, self.v)
        if tt is None:
            yield DIVERGE
        # one step per row of the truth table
        for r in range(1 << self.v):
            yield
            if not (tt >> r) & 1:
                yield DIVERGE
        return ONE

    def check_length(self, n: int) -> None:
        if n <= 0 or n % TOKEN_BITS:
            raise UnsupportedLength(f"{self.name}: length {n} is not a positive multiple of 3")

    def sampler(self, n: int, coins: Coins, retry_cap: int = DEFAULT_RETRY_CAP):
        self.check_length(n)
        t = n // TOKEN_BITS
        for _ in range(retry_cap):
            codes = []
            for _ in range(t):
                codes.append(coins.bits(TOKEN_BITS))
                yield
            tt = truth_table(codes, self.v)
            yield
            if tt is not None and tt != self._full:
                return "".join(format(c, "03b") for c in codes)
        raise UnsupportedLength(f"{self.name}: sampler gave up after {retry_cap} retries at n={n}")

    def exact_support(self, n: int) -> dict:
        self.check_length(n)
        t = n // TOKEN_BITS
        alphabet = list(range(self.v)) + [3, 4, 5, 6]
        if len(alphabet) ** t > self.EXACT_MAX_STRINGS:
            raise NoExactSupport(f"{self.name}: exhaustion too large at n={n}")
        return dict(_taut_support(self.v, t))

    def spec(self) -> str:
        return self.name


@lru_cache(maxsize=32)
def _taut_support(v: int, t: int) -> tuple:
    alphabet = list(range(v)) + [3, 4, 5, 6]
    full = (1 << (1 << v)) - 1
    good = []
    for codes in itertools.product(alphabet, repeat=t):
        tt = truth_table(codes, v)
        if tt is not None and tt != full:
            good.append("".join(format(c, "03b") for c in codes))
    if not good:
        raise UnsupportedLength(f"taut-{v}: no non-tautology with {t} tokens")
    w = Fraction(1, len(good))
    return tuple((s, w) for s in good)


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------

PARITY = Parity()


def make_problem(spec: str) -> DistributionalProblem:
    """Problem from its CLI identifier: ``parity``, ``taut-2``, ``taut:v=3``."""
    s = spec.strip().lower()
    if s == "parity":
        return PARITY
    if s.startswith("taut"):
        rest = s[4:].lstrip("-:")
        if rest.startswith("v="):
            rest = rest[2:]
        return Taut(int(rest) if rest else 2)
    raise ValueError(f"unknown problem {spec!r}")


def sample(problem: DistributionalProblem, n: int, seed: int,
           retry_cap: int = DEFAULT_RETRY_CAP) -> str:
    """Draw from D_n; a deterministic function of ``(problem, n, seed)``."""
    problem.check_length(n)
    return run_to_end(Process(problem.sampler(n, Coins(seed), retry_cap), "sampler"))


def semidecide(problem: DistributionalProblem, x: str, budget: int) -> bool:
    """True (accepted) iff the semidecider accepts ``x`` within ``budget`` steps."""
    if budget < 0:
        raise ValueError("budget must be non-negative")
    return run_until(Process(problem.semidecider(x)), budget) is not None


def exact_mass(problem: DistributionalProblem, n: int,
               predicate: Callable[[str], bool]) -> Fraction:
    """D_n-mass of the strings satisfying ``predicate``."""
    support = problem.exact_support(n)
    return sum((w for x, w in support.items() if predicate(x)), Fraction(0))


def export_support_csv(problem: DistributionalProblem, n: int, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bitstring", "probability"])
        for x, p in sorted(problem.exact_support(n).items()):
            w.writerow([x, f"{p.numerator}/{p.denominator}"])
