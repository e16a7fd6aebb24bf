"""Error amplification: m parallel copies of an inner automatizer at 4d, stop when 3/8 output 1."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath

from .process import Coins, Process, ScheduleTrace, at_least, parallel_body
from .stats import BoundReport, as_fraction, binom_tail_ge, binom_tail_lt, exp_neg

STOP_FRACTION = Fraction(3, 8)
INNER_FACTOR = 4


def stop_count(m: int) -> int:
    """ceil(3m/8): number of finished copies that stops the amplifier."""
    return max(1, math.ceil(STOP_FRACTION * m))


@dataclass(frozen=True)
class AmplifierConfig:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def threshold(self) -> int:
        return stop_count(self.m)


class Amplified:
    """Run m copies of inner(x, 4d) fairly; output 1 once ceil(3m/8) copies have."""

    def __init__(self, inner, m: int):
        self.inner = inner
        self.config = AmplifierConfig(m)
        self.name = f"amplify({inner.name},m={m})"

    def spawn_traced(self, x: str, d: int, coins: Coins):
        m = self.config.m
        children = [self.inner.spawn(x, INNER_FACTOR * d, coins.child("copy", j))
                    for j in range(m)]
        trace = ScheduleTrace()
        body = parallel_body(children, at_least(self.config.threshold), trace)
        return Process(body, self.name), trace

    def spawn(self, x: str, d: int, coins: Coins) -> Process:
        return self.spawn_traced(x, d, coins)[0]


def amplify(inner, config) -> Amplified:
    m = config.m if isinstance(config, AmplifierConfig) else int(config)
    return Amplified(inner, m)


def amplified_error_exact(eps_x, m: int):
    """Pr[Bin(m, eps_x) >= ceil(3m/8)]: the amplifier's error where the inner automatizer errs w.p. eps_x."""
    return binom_tail_ge(m, eps_x, stop_count(m))


def choose_m(d: int, n: int) -> int:
    """m = ceil(48 ln(18 d log*(n)^2)), at least 1."""
    from .universal import log_star

    if d < 1:
        raise ValueError("d must be >= 1")
    arg = 18 * d * log_star(n) ** 2
    if arg <= 1:
        return 1
    with mpmath.workdps(40):
        return max(1, int(mpmath.ceil(48 * mpmath.log(arg))))


def error_bound(m: int):
    """e^(-m/48)."""
    return exp_neg(Fraction(m, 48))


def strong_simulation_bound(m: int):
    """e^(-m/64)."""
    return exp_neg(Fraction(m, 64))


def amplify_grid_check(ms=range(1, 513), eps_values=(0, 0.05, 0.1, 0.2, 0.25)) -> list:
    """amplified_error_exact(eps, m) <= e^(-m/48) for every cell."""
    return [BoundReport.compare(f"amplify[m={m},eps={e}]", amplified_error_exact(e, m),
                                error_bound(m))
            for m in ms for e in eps_values]


def strong_simulation_check(ms=range(16, 513), ps=(Fraction(1, 2),)) -> list:
    """Failure of the fastest-3/8 event, Pr[Bin(m, p) < ceil(3m/8)], is <= e^(-m/64)."""
    return [BoundReport.compare(f"strong[m={m},p={p}]", binom_tail_lt(m, p, stop_count(m)),
                                strong_simulation_bound(m))
            for m in ms for p in ps]


def error_curve_rows(ms, eps_values) -> list:
    """Rows (m, eps_x, exact error, e^(-m/48)) for CSV export."""
    rows = []
    for m in ms:
        b = error_bound(m)
        for e in eps_values:
            ex = amplified_error_exact(as_fraction(e), m)
            rows.append({"m": m, "eps_x": str(as_fraction(e)),
                         "exact_error": mpmath.nstr(mpmath.mpf(ex.numerator) / ex.denominator
                                                    if isinstance(ex, Fraction) else ex, 15),
                         "bound": mpmath.nstr(b, 15)})
    return rows
