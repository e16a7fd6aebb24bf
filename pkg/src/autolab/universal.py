"""The universal automatizer and the time-table analyzers.

On input (x, d) the universal automatizer runs the first log*(|x|) entries
of an explicit candidate pool in parallel.  Entry i first runs its
candidate on (x, d') until it outputs 1, taking some number of ticks, then
certifies that candidate with the tick count as timeout.  The first
accepting certification makes the whole run output 1.  The pool replaces an enumeration of all
machines: at any fixed input length only finitely many indices are ever
scheduled, so the construction is unchanged where it can be observed.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath

from .amplify import choose_m
from .candidates import Wrapped
from .certification import CertParams, certify_body
from .errors import DomainError, GridMismatch
from .problems import DistributionalProblem
from .process import (
    DIVERGE,
    INFINITE,
    ONE,
    Coins,
    Process,
    ScheduleTrace,
    at_least,
    derive_seed,
    drive,
    order_statistic_quantile,
    parallel_body,
    run_until,
)
from .stats import rate_from_counts


def log_star(n: int) -> int:
    """Iterated base-2 logarithm: 0 for n <= 1, else 1 + log_star(ceil(log2 n))."""
    if n < 1:
        raise DomainError("log_star needs n >= 1")
    count = 0
    while n > 1:
        n = (n - 1).bit_length()  # ceil(log2 n) for integers n >= 2
        count += 1
    return count


# ----------------------------------------------------------------------
# Parameters
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class UParams:
    n: int
    d: int
    d_prime: int
    f: Fraction
    k: int
    l: int
    m: int

    def cert_params(self, T: int) -> CertParams:
        return CertParams(self.n, self.d_prime, T, self.k, self.l, self.f)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["f"] = str(self.f)
        return out


def u_params(n: int, d: int) -> UParams:
    """Universal-automatizer parameters exactly as the construction prescribes (ceilings on k, l, m)."""
    if n < 2:
        raise DomainError("u_params needs n >= 2 so that log*(n) >= 1")
    if d < 1:
        raise DomainError("d must be >= 1")
    L = log_star(n) ** 2
    d_prime = 16 * d * L
    f = Fraction(17 * d * L)
    with mpmath.workdps(50):
        k = int(mpmath.ceil(12 * d_prime * mpmath.log(16 * d * L)))
        l = int(mpmath.ceil(30300 * int(f) * mpmath.log(16 * k * d * L)))
    return UParams(n, d, d_prime, f, k, l, choose_m(d, n))


SCALABLE = ("d_prime", "f", "k", "l", "m")


@dataclass(frozen=True)
class ParamRule:
    """How the universal automatizer picks its parameters at (n, d).

    ``exact``: the exact formulas.  Otherwise each exact value is multiplied
    by ``multipliers[name]`` and rounded up (minimum 1), then ``overrides``
    replace values outright.  Nothing is scaled unless listed.
    """

    exact: bool = True
    multipliers: tuple = ()
    overrides: tuple = ()

    @classmethod
    def scaled(cls, multipliers: Optional[dict] = None, **overrides) -> "ParamRule":
        for key in list((multipliers or {})) + list(overrides):
            if key not in SCALABLE:
                raise ValueError(f"unknown parameter {key!r}; expected one of {SCALABLE}")
        return cls(False, tuple(sorted((multipliers or {}).items())),
                   tuple(sorted(overrides.items())))

    def resolve(self, n: int, d: int) -> UParams:
        base = u_params(max(n, 2), d)
        if self.exact:
            return base
        vals = {key: getattr(base, key) for key in SCALABLE}
        for key, mult in self.multipliers:
            vals[key] = max(1, math.ceil(Fraction(str(mult)) * vals[key]))
        for key, v in self.overrides:
            vals[key] = v
        return UParams(n, d, int(vals["d_prime"]), Fraction(vals["f"]), int(vals["k"]),
                       int(vals["l"]), int(vals["m"]))

    def to_dict(self) -> dict:
        return {"exact": self.exact, "multipliers": dict(self.multipliers),
                "overrides": {k: str(v) for k, v in self.overrides}}


# Desk-scale values used throughout the experiments.
DESK_RULE = ParamRule.scaled(d_prime=8, f=9, k=40, l=80)


def coerce_rule(params) -> ParamRule:
    if isinstance(params, ParamRule):
        return params
    if isinstance(params, UParams):
        return ParamRule.scaled(d_prime=params.d_prime, f=params.f, k=params.k, l=params.l,
                                m=params.m)
    if params is None:
        return DESK_RULE
    raise TypeError(f"cannot use {params!r} as universal-automatizer parameters")


# ----------------------------------------------------------------------
# Pool and the universal automatizer
# ----------------------------------------------------------------------


@dataclass
class PoolEntry:
    index: int
    candidate: object
    wrapped: bool = True
    problem: Optional[DistributionalProblem] = None

    def automatizer(self):
        return Wrapped(self.candidate, self.problem) if self.wrapped else self.candidate

    @property
    def name(self) -> str:
        return self.candidate.name


def make_pool(candidates: Sequence, problem: DistributionalProblem, wrapped: bool = True) -> list:
    return [PoolEntry(i + 1, c, wrapped, problem) for i, c in enumerate(candidates)]


@dataclass
class EntryLog:
    index: int
    name: str
    halt_ticks: Optional[int] = None
    certified: Optional[bool] = None
    rejections: Optional[int] = None


def _entry_body(entry: PoolEntry, problem, x: str, params: UParams, coins: Coins, log: EntryLog):
    auto = entry.automatizer()
    proc = auto.spawn(x, params.d_prime, coins.child("run"))
    yield from drive(proc)
    if not proc.output1:
        yield DIVERGE
    log.halt_ticks = proc.ticks
    res = yield from certify_body(auto, problem, params.cert_params(proc.ticks),
                                  coins.child("certify"), early_stop=True, keep_records=False)
    log.certified = res.accepted
    log.rejections = res.rejections
    if res.accepted:
        return ONE
    yield DIVERGE


class Universal:
    """Universal automatizer over an explicit pool; ``spawn`` follows the automatizer protocol."""

    def __init__(self, pool: Sequence[PoolEntry], problem: DistributionalProblem, params=None):
        if not pool:
            raise ValueError("pool must be nonempty")
        if any(not e.wrapped for e in pool):
            raise ValueError("the universal automatizer assumes every pool entry is wrapped by enforce_conditions")
        idx = [e.index for e in pool]
        if idx != list(range(1, len(pool) + 1)):
            raise ValueError("pool indices must be 1..len(pool)")
        self.pool = list(pool)
        self.problem = problem
        self.rule = coerce_rule(params)
        self.name = "universal[" + ",".join(e.name for e in self.pool) + "]"

    def scheduled(self, n: int) -> list:
        return self.pool[:min(log_star(max(n, 1)), len(self.pool))]

    def spawn_traced(self, x: str, d: int, coins: Coins):
        n = len(x)
        params = self.rule.resolve(n, d)
        entries = self.scheduled(n)
        logs = [EntryLog(e.index, e.name) for e in entries]
        children = [Process(_entry_body(e, self.problem, x, params, coins.child("entry", e.index),
                                        lg), f"entry{e.index}:{e.name}")
                    for e, lg in zip(entries, logs)]
        trace = ScheduleTrace()
        return Process(parallel_body(children, at_least(1), trace), self.name), trace, logs

    def spawn(self, x: str, d: int, coins: Coins) -> Process:
        return self.spawn_traced(x, d, coins)[0]


@dataclass
class URunResult:
    output1: bool
    ticks: int
    status: str
    trace: ScheduleTrace
    entries: list = field(default_factory=list)
    params: Optional[UParams] = None

    def to_dict(self) -> dict:
        return {"output1": self.output1, "ticks": self.ticks, "status": self.status,
                "trace": self.trace.to_dict(), "entries": [asdict(e) for e in self.entries],
                "params": self.params.to_dict() if self.params else None}


def universal_run(pool, problem, x: str, d: int, params=None, budget: int = 10**7,
                  seed: int = 0) -> URunResult:
    """One run of the universal automatizer on (x, d) for at most ``budget`` ticks."""
    univ = Universal(pool, problem, params)
    proc, trace, logs = univ.spawn_traced(x, d, Coins(seed))
    t = run_until(proc, budget)
    if proc.status.value == "running":
        trace.stop_reason = "budget"
    return URunResult(t is not None, proc.ticks, proc.status.value, trace, logs,
                      univ.rule.resolve(len(x), d))


# ----------------------------------------------------------------------
# Empirical correctness
# ----------------------------------------------------------------------


@dataclass
class CorrectnessReport:
    correct: bool
    mass_estimate: float
    mass_upper: float
    limit: Fraction
    inputs: int
    flagged: list
    censored: int
    mode: str

    def to_dict(self) -> dict:
        out = asdict(self)
        out["limit"] = str(self.limit)
        return out


def _inner_rate(automatizer, x, d, runs, budget, seed, confidence):
    hits = 0
    censored = 0
    for r in range(runs):
        proc = automatizer.spawn(x, d, Coins(derive_seed(seed, x, r)))
        if run_until(proc, budget) is not None:
            hits += 1
        elif proc.status.value == "running":
            censored += 1
            hits += 1  # a run cut by the budget might still output 1 later
    return rate_from_counts(hits, runs, confidence), censored


def empirical_correctness(automatizer, problem: DistributionalProblem, n: int, d: int,
                          runs_per_input: int = 30, seed: int = 0, budget: int = 10**6,
                          eps=Fraction(1, 4), lam=1, samples: Optional[int] = None,
                          confidence: float = 0.99) -> CorrectnessReport:
    """Estimate D_n{x : Pr[A(x,d) = 1] > eps} and compare with 1/(lam d).

    With an exact support table every support point is examined and an input
    is flagged when the upper Wilson limit of its output-1 rate exceeds eps,
    so ``mass_upper`` is an upper confidence bound.  Otherwise ``samples``
    inputs are drawn and the flagged fraction gets its own Wilson interval.
    """
    eps = Fraction(eps)
    limit = 1 / (Fraction(lam) * d)
    flagged = []
    censored = 0
    if samples is None and problem.has_exact_support(n):
        support = problem.exact_support(n)
        point = Fraction(0)
        upper = Fraction(0)
        for x, w in sorted(support.items()):
            est, c = _inner_rate(automatizer, x, d, runs_per_input, budget, seed, confidence)
            censored += c
            if est.estimate > eps:
                point += w
            if est.high > eps:
                upper += w
                flagged.append(x)
        return CorrectnessReport(upper < limit, float(point), float(upper), limit, len(support),
                                 flagged, censored, "exact-support")
    from .problems import sample

    samples = samples or 200
    bad_point = 0
    for i in range(samples):
        x = sample(problem, n, derive_seed(seed, "input", i))
        est, c = _inner_rate(automatizer, x, d, runs_per_input, budget, seed, confidence)
        censored += c
        if est.high > eps:
            bad_point += 1
            flagged.append(x)
    outer = rate_from_counts(bad_point, samples, confidence)
    return CorrectnessReport(outer.high < limit, outer.estimate, outer.high, limit, samples,
                             flagged, censored, "sampled")


def empirical_u_correctness(pool, problem, n: int, d: int, params=None, runs_per_input: int = 30,
                            seed: int = 0, budget: int = 10**6, samples: Optional[int] = None
                            ) -> CorrectnessReport:
    return empirical_correctness(Universal(pool, problem, params), problem, n, d,
                                 runs_per_input, seed, budget, samples=samples)


# ----------------------------------------------------------------------
# Time tables
# ----------------------------------------------------------------------

DEFAULT_LEVELS = (Fraction(1, 2), Fraction(3, 4))


@dataclass
class TimeTable:
    """Quantile-time records t^(p)(x, d) for members x."""

    cells: dict = field(default_factory=dict)  # (x, d) -> {p: QuantileEstimate}
    name: str = ""

    def median(self, x: str, d: int):
        return self.cells[(x, d)][Fraction(1, 2)].estimate

    def grid(self) -> set:
        return set(self.cells)

    def xs(self) -> list:
        return sorted({x for x, _ in self.cells}, key=lambda s: (len(s), s))

    def ds(self) -> list:
        return sorted({d for _, d in self.cells})

    def __len__(self):
        return len(self.cells)

    def rows(self) -> list:
        out = []
        for (x, d), recs in sorted(self.cells.items(), key=lambda kv: (len(kv[0][0]), kv[0])):
            for p, q in sorted(recs.items()):
                out.append({"x": x, "n": len(x), "d": d, "p": str(p), "estimate": q.estimate,
                            "low": q.low, "high": q.high, "trials": q.trials,
                            "censored": q.censored})
        return out

    @classmethod
    def from_medians(cls, medians: dict, name: str = "") -> "TimeTable":
        """Table with exact (degenerate-interval) medians; handy for constructed examples."""
        from .process import QuantileEstimate

        half = Fraction(1, 2)
        return cls({key: {half: QuantileEstimate(0.5, t, t, t, 1, int(t == INFINITE))}
                    for key, t in medians.items()}, name)


def measure_time_table(automatizer, problem, xs: Sequence[str], ds: Sequence[int],
                       trials: int = 30, seed: int = 0, budget: int = 10**7,
                       levels=DEFAULT_LEVELS, confidence: float = 0.99) -> TimeTable:
    """Per-cell quantile times from ``trials`` seeded runs (members only)."""
    table = TimeTable(name=getattr(automatizer, "name", ""))
    for x in xs:
        if not problem.is_member(x):
            raise ValueError(f"time tables are defined on members only; {x!r} is not one")
        for d in ds:
            times = []
            for r in range(trials):
                proc = automatizer.spawn(x, d, Coins(derive_seed(seed, x, d, r)))
                t = run_until(proc, budget)
                times.append(INFINITE if t is None else t)
            table.cells[(x, d)] = {p: order_statistic_quantile(times, p, confidence)
                                   for p in levels}
    return table


def poly_eval(coeffs: Sequence, z):
    """Evaluate sum coeffs[i] * z**i (ascending coefficients)."""
    if z == INFINITE:
        return INFINITE if any(coeffs[1:]) else coeffs[0]
    acc = 0
    for c in reversed(list(coeffs)):
        acc = acc * z + c
    return acc


@dataclass
class SimulationCheck:
    holds: bool
    violations: list
    skipped: list
    checked: int

    def __bool__(self):
        return self.holds


def check_simulation(t_sim: TimeTable, t_base: TimeTable, p: Sequence, q: Sequence) -> SimulationCheck:
    """Cellwise t_sim(x,d) <= max over available d' <= q(d|x|) of p(t_base(x,d') |x| d)."""
    sx = {x for x, _ in t_sim.cells}
    wx = {x for x, _ in t_base.cells}
    if sx != wx:
        raise GridMismatch("simulation tables cover different inputs")
    violations, skipped = [], []
    checked = 0
    for (x, d) in sorted(t_sim.cells, key=lambda c: (len(c[0]), c)):
        lim = poly_eval(q, d * len(x))
        cols = [dp for (wxx, dp) in t_base.cells if wxx == x and dp <= lim]
        if not cols:
            skipped.append((x, d))
            continue
        checked += 1
        rhs = max(poly_eval(p, t_base.median(x, dp) * len(x) * d) for dp in cols)
        lhs = t_sim.median(x, d)
        if not lhs <= rhs:
            violations.append({"x": x, "d": d, "t_sim": lhs, "bound": rhs})
    return SimulationCheck(not violations, violations, skipped, checked)


def check_poly_bounded(t: TimeTable, p: Sequence) -> SimulationCheck:
    """Every median t(x, d) <= p(d |x|); an empty table passes."""
    violations = []
    for (x, d) in sorted(t.cells, key=lambda c: (len(c[0]), c)):
        bound = poly_eval(p, d * len(x))
        if not t.median(x, d) <= bound:
            violations.append({"x": x, "d": d, "t": t.median(x, d), "bound": bound})
    return SimulationCheck(not violations, violations, [], len(t.cells))


def propose_bound(t: TimeTable, degree: int = 1) -> list:
    """Smallest c with median <= c (d|x|)^degree on the table; returns coefficients."""
    c = 0
    for (x, d) in t.cells:
        z = max(d * len(x), 1)
        c = max(c, math.ceil(t.median(x, d) / z ** degree))
    return [0] * degree + [c]


def loglog_slope(t: TimeTable, d: int = 1) -> float:
    """Least-squares slope of log median vs log |x| at fixed d."""
    import numpy as np

    pts = [(len(x), t.median(x, dd)) for (x, dd) in t.cells if dd == d]
    xs = np.log([a for a, _ in pts])
    ys = np.log([b for _, b in pts])
    return float(np.polyfit(xs, ys, 1)[0])


def certification_ticks(automatizer, problem, params: UParams, T: int, seed: int = 0) -> int:
    """Ticks one certification run costs inside the universal automatizer (with early stopping)."""
    body = certify_body(automatizer, problem, params.cert_params(T), Coins(seed),
                        early_stop=True, keep_records=False)
    proc = Process(body, "certify")
    while proc.active:
        proc.step()
    return proc.ticks


# ----------------------------------------------------------------------
# Closing inequality chain at exact parameters
# ----------------------------------------------------------------------


@dataclass
class ChainReport:
    terms: dict
    total: float
    limit: Fraction
    holds: bool
    lemma_terms: dict
    lemma_limit: Fraction
    lemma_holds: bool


def final_chain(n: int = 65536, d: int = 1) -> ChainReport:
    """Evaluate the four error terms of the universal automatizer's correctness argument at u_params(n, d).

    The sum of 1/(0.99 f), 1/d', e^(-k/(8d')) and k e^(-l/(2*10^4 f)) must stay
    below 1/(4 d log*(n)^2); each CERTIFY failure bound must stay below
    1/(8 d log*(n)^2).  Rational terms are kept exact; exponentials use
    60-digit mpmath and are compared at that precision.
    """
    from .certification import ACCEPT_DIVISOR, ACCEPT_SIDE, certify_error_bounds
    from .stats import as_mpf, exp_neg

    par = u_params(n, d)
    L = log_star(n) ** 2
    with mpmath.workdps(60):
        terms = {
            "1/(0.99f)": 1 / (ACCEPT_SIDE * par.f),
            "1/d'": Fraction(1, par.d_prime),
            "exp(-k/(8d'))": exp_neg(Fraction(par.k, 8 * par.d_prime)),
            "k*exp(-l/(2e4 f))": par.k * exp_neg(Fraction(par.l) / (ACCEPT_DIVISOR * par.f)),
        }
        total = sum(as_mpf(v) for v in terms.values())
        limit = Fraction(1, 4 * d * L)
        first, second = certify_error_bounds(par.k, par.d_prime, par.l, par.f)
        lemma_limit = Fraction(1, 8 * d * L)
        lemma_terms = {"correct-rejected": first, "incorrect-accepted": second}
        lemma_holds = all(as_mpf(v) < as_mpf(lemma_limit) for v in lemma_terms.values())
        holds = total < as_mpf(limit)
    return ChainReport({k: float(as_mpf(v)) for k, v in terms.items()}, float(total), limit,
                       bool(holds), {k: float(v) for k, v in lemma_terms.items()}, lemma_limit,
                       bool(lemma_holds))
