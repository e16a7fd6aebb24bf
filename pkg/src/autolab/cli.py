"""Command-line experiment runner.

Every subcommand builds an :class:`ExperimentConfig` (defaults, then the
``--config`` YAML file, then explicit flags), runs it and emits an
:class:`~autolab.report.ExperimentReport`.  The exit code is 0 iff every
check in the report passes.
"""

from __future__ import annotations

import argparse
import platform
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import Optional

import yaml

from . import __version__
from .amplify import (
    Amplified,
    amplified_error_exact,
    error_bound,
    error_curve_rows,
    amplify_grid_check,
    strong_simulation_check,
)
from .candidates import parse_candidate
from .certification import (
    certify,
    certify_accept_probability_exact,
    certify_accept_rate,
    halt_probability_table,
    rate_test_grid_check,
    certify_error_bounds,
)
from .errors import AutolabError, ConfigError
from .problems import Taut, make_problem, sample
from .process import Coins, derive_seed, run_until
from .proofsys import (
    VoteConfig,
    proof_search_automatizer,
    check_completeness,
    check_soundness,
    make_search,
    make_system,
    tautologies,
    vote_pass_probability_exact,
    vote_pass_rate,
)
from .report import ExperimentReport, emit_report
from .stats import rate_from_counts, verify_chernoff_grid
from .universal import (
    DESK_RULE,
    SCALABLE,
    ParamRule,
    Universal,
    check_poly_bounded,
    empirical_u_correctness,
    final_chain,
    loglog_slope,
    make_pool,
    measure_time_table,
    propose_bound,
    universal_run,
)

KINDS = ("certify", "amplify", "universal", "proofsys", "verify-bounds", "timetable", "report")
BOUND_FAMILIES = ("chernoff", "test", "amplify", "strong", "chain")


@dataclass
class ExperimentConfig:
    """Everything a run depends on; all randomness derives from ``seed``.

    Parameter mode: ``exact_params`` uses the exact formulas.  With
    ``scale`` the exact values are multiplied and ``params`` then sets
    values outright.  Without ``scale``, ``params`` overrides the desk
    values d'=8, f=9, k=40, l=80.
    """

    kind: str = "certify"
    problem: str = "parity"
    seed: int = 0
    n: int = 8
    d: int = 1
    trials: int = 1000
    budget: int = 10**7
    candidate: str = "honest"
    pool: list = field(default_factory=lambda: ["always-one", "honest", "slow:g=2"])
    x: Optional[str] = None
    xs: list = field(default_factory=list)
    lengths: list = field(default_factory=lambda: [4, 6, 8])
    ds: list = field(default_factory=lambda: [1, 2, 4])
    T: Optional[int] = None
    m: int = 16
    exact_params: bool = False
    scale: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    correctness: bool = False
    runs_per_input: int = 30
    bound: list = field(default_factory=list)
    system: str = "truth-table"
    search: str = "empty"
    votes: dict = field(default_factory=lambda: {"copies": 10, "votes": 100, "threshold": 40})
    witness_bound: int = 0
    tokens: int = 4
    checks: list = field(default_factory=lambda: list(BOUND_FAMILIES))
    input: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        bad = [(k, "unknown field") for k in data if k not in known]
        if bad:
            raise ConfigError(bad)
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scale"] = {k: str(v) for k, v in self.scale.items()}
        out["params"] = {k: str(v) for k, v in self.params.items()}
        return out

    def validate(self) -> None:
        problems = []
        if self.kind not in KINDS:
            problems.append(("kind", f"must be one of {KINDS}"))
        for name in ("n", "d", "trials", "budget", "m", "runs_per_input", "tokens"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                problems.append((name, "must be a positive integer"))
        if self.T is not None and (not isinstance(self.T, int) or self.T < 1):
            problems.append(("T", "must be a positive integer"))
        if not isinstance(self.seed, int) or self.seed < 0:
            problems.append(("seed", "must be a non-negative integer"))
        if self.witness_bound < 0:
            problems.append(("witness_bound", "must be >= 0"))
        for key in list(self.scale) + list(self.params):
            if key not in SCALABLE:
                problems.append(("scale/params", f"unknown parameter {key!r}"))
        for name in ("ds", "lengths"):
            if any(not isinstance(v, int) or v < 1 for v in getattr(self, name)):
                problems.append((name, "entries must be positive integers"))
        for c in self.checks:
            if c not in BOUND_FAMILIES:
                problems.append(("checks", f"unknown bound family {c!r}"))
        try:
            make_problem(self.problem)
        except ValueError as e:
            problems.append(("problem", str(e)))
        else:
            for spec in [self.candidate] + list(self.pool):
                if self.kind == "timetable" and spec.lower() == "universal":
                    continue
                try:
                    parse_candidate(spec, make_problem(self.problem))
                except ValueError as e:
                    problems.append(("candidate/pool", str(e)))
        try:
            VoteConfig(**self.votes)
        except (TypeError, ValueError) as e:
            problems.append(("votes", str(e)))
        if self.kind == "report" and not self.input:
            problems.append(("input", "report needs an input JSON file"))
        if problems:
            raise ConfigError(problems)

    def rule(self) -> ParamRule:
        if self.exact_params:
            return ParamRule()
        overrides = {k: Fraction(str(v)) if k == "f" else int(v) for k, v in self.params.items()}
        if not self.scale:
            # absolute values layer over the desk defaults
            return ParamRule.scaled(**{**dict(DESK_RULE.overrides), **overrides})
        return ParamRule.scaled({k: Fraction(str(v)) for k, v in self.scale.items()},
                                **overrides)


# ----------------------------------------------------------------------
# Runners
# ----------------------------------------------------------------------


def default_members(problem, lengths) -> list:
    """One member per length: all zeros for PARITY, the first tautology for TAUT."""
    out = []
    for n in lengths:
        if isinstance(problem, Taut):
            if n % 3 == 0:
                found = tautologies(problem, n // 3)
                if found:
                    out.append(found[0])
        else:
            out.append("0" * n)
    return out


def _run_certify(cfg, report):
    problem = make_problem(cfg.problem)
    cand = parse_candidate(cfg.candidate, problem)
    up = cfg.rule().resolve(cfg.n, cfg.d)
    cp = up.cert_params(cfg.T or cfg.n)
    exact = None
    if problem.has_exact_support(cfg.n):
        exact = certify_accept_probability_exact(
            problem, halt_probability_table(cand, problem, cfg.n, cp.d_prime, cp.T), cp)
    est = certify_accept_rate(cand, problem, cp, cfg.trials, cfg.seed)
    if exact is None:
        report.add("certify-accept-rate", True, est.estimate, est.low, est.high,
                   comparison="recorded (no exact support)")
    else:
        report.add("certify-accept-rate", est.contains(exact), est.estimate, est.low, est.high,
                   exact=exact, comparison="exact in 99% Wilson interval")
    first, second = certify_error_bounds(cp.k, cp.d_prime, cp.l, cp.f)
    report.add("lemma-bound[correct-rejected]", True, bound=first, comparison="recorded")
    report.add("lemma-bound[incorrect-accepted]", True, bound=second, comparison="recorded")
    one = certify(cand, problem, cp, cfg.seed)
    report.tables["samples"] = [asdict(r) for r in one.samples]
    forced = None if exact is None or 0 < exact < 1 else bool(exact == 1)
    report.add("certify-decision", forced is None or forced == one.accepted, one.decision,
               exact=None if forced is None else ("accept" if forced else "reject"),
               comparison="matches forced decision" if forced is not None else "recorded")
    report.tables["params"] = [{"name": k, "value": str(v)} for k, v in asdict(cp).items()]


def _run_amplify(cfg, report):
    problem = make_problem(cfg.problem)
    cand = parse_candidate(cfg.candidate, problem)
    x = cfg.x or sample(problem, cfg.n, derive_seed(cfg.seed, "amplify-input"))
    amp = Amplified(cand, cfg.m)
    if problem.is_member(x):
        hits = sum(run_until(amp.spawn(x, cfg.d, Coins(derive_seed(cfg.seed, "amp", i))),
                             cfg.budget) is not None for i in range(cfg.trials))
        est = rate_from_counts(hits, cfg.trials)
        report.add(f"amplified-output[{x}]", hits == cfg.trials, est.estimate, est.low, est.high,
                   exact=1, comparison="member always accepted")
    else:
        exact = amplified_error_exact(cand.error_profile(x, 4 * cfg.d), cfg.m)
        hits = sum(run_until(amp.spawn(x, cfg.d, Coins(derive_seed(cfg.seed, "amp", i))),
                             cfg.budget) is not None for i in range(cfg.trials))
        est = rate_from_counts(hits, cfg.trials)
        report.add(f"amplified-error[{x}]", est.contains(exact), est.estimate, est.low, est.high,
                   exact=exact, comparison="exact in 99% Wilson interval")
    for r in amplify_grid_check(ms=[cfg.m]):
        report.add(r.name, r.satisfied, exact=r.exact, bound=r.bound, comparison="exact <= bound")
    report.add(f"error-bound[m={cfg.m}]", True, error_bound(cfg.m), comparison="recorded")
    report.tables["error_curve"] = error_curve_rows(range(1, cfg.m + 1),
                                                    (0, 0.05, 0.1, 0.2, 0.25))


def _run_universal(cfg, report):
    problem = make_problem(cfg.problem)
    pool = make_pool([parse_candidate(s, problem) for s in cfg.pool], problem)
    rule = cfg.rule()
    xs = [cfg.x] if cfg.x else (cfg.xs or default_members(problem, [cfg.n]))
    rows = []
    for i, x in enumerate(xs):
        res = universal_run(pool, problem, x, cfg.d, rule, cfg.budget,
                            derive_seed(cfg.seed, "u", i))
        member = problem.is_member(x)
        if member:
            report.add(f"universal-output[{x}]", res.output1, int(res.output1), exact=1,
                       comparison="member must be accepted")
        else:
            report.add(f"universal-output[{x}]", True, int(res.output1), comparison="recorded (non-member)")
        for e in res.entries:
            rows.append({"x": x, "index": e.index, "name": e.name,
                         "halt_ticks": -1 if e.halt_ticks is None else e.halt_ticks,
                         "certified": "" if e.certified is None else str(e.certified),
                         "universal_ticks": res.ticks})
    report.tables["entries"] = rows
    report.tables["params"] = [{"name": k, "value": str(v)}
                               for k, v in rule.resolve(len(xs[0]), cfg.d).to_dict().items()]
    if cfg.correctness:
        rep = empirical_u_correctness(pool, problem, cfg.n, cfg.d, rule, cfg.runs_per_input,
                                      cfg.seed, cfg.budget)
        report.add(f"universal-correctness[n={cfg.n},d={cfg.d}]", rep.correct, rep.mass_estimate,
                   high=rep.mass_upper, bound=rep.limit, comparison="mass upper limit < 1/d")


def _run_timetable(cfg, report):
    problem = make_problem(cfg.problem)
    if cfg.candidate.lower() == "universal":
        auto = Universal(make_pool([parse_candidate(s, problem) for s in cfg.pool], problem),
                         problem, cfg.rule())
    else:
        auto = parse_candidate(cfg.candidate, problem)
    xs = cfg.xs or default_members(problem, cfg.lengths)
    table = measure_time_table(auto, problem, xs, cfg.ds, cfg.trials, cfg.seed, cfg.budget)
    report.tables["timetable"] = table.rows()
    fitted = propose_bound(table, 1)
    report.add("fitted-linear-bound", True, fitted[-1], comparison="recorded")
    if len({len(x) for x in xs}) > 1:
        report.add("loglog-slope[d=min]", True, loglog_slope(table, min(cfg.ds)),
                   comparison="recorded")
    if cfg.bound:
        chk = check_poly_bounded(table, cfg.bound)
        report.add("poly-bounded", chk.holds, len(chk.violations), exact=0,
                   comparison=f"medians <= poly {cfg.bound}")


def _run_proofsys(cfg, report):
    problem = make_problem(cfg.problem)
    system = make_system(cfg.system, problem)
    search = make_search(cfg.search)
    votes = VoteConfig(**cfg.votes)
    members = cfg.xs or (tautologies(problem, cfg.tokens) if isinstance(problem, Taut)
                         else default_members(problem, cfg.lengths))
    rows = []
    complete = 0
    for x in members:
        ok, w = check_completeness(system, x, cfg.d, cfg.witness_bound, seed=cfg.seed)
        complete += ok
        rows.append({"x": x, "shortest_proof": -1 if w is None else len(w)})
    report.tables["proof_sizes"] = rows
    report.add("completeness", complete == len(members), complete, exact=len(members),
               comparison="every member has a proof within the witness bound")
    composite = proof_search_automatizer(system, search, problem, votes)
    accepted = sum(run_until(composite.spawn(x, cfg.d, Coins(derive_seed(cfg.seed, "composite", i))),
                             cfg.budget) is not None for i, x in enumerate(members))
    report.add("composite-accepts-members", accepted == len(members), accepted, exact=len(members),
               comparison="every member accepted")
    n = cfg.n if not isinstance(problem, Taut) else 3 * max(1, cfg.n // 3)
    if problem.has_exact_support(n):
        snd = check_soundness(system, problem, n, cfg.d, cfg.witness_bound, seed=cfg.seed)
        report.add(f"soundness[n={n},d={cfg.d}]", snd.sound, snd.offending_mass,
                   bound=snd.limit, comparison="offending mass < 1/d")
    for q in (Fraction(1, 2), Fraction(1, 4)):
        p = vote_pass_probability_exact(q, votes)
        report.add(f"vote-pass[q={q}]", True, exact=p, comparison="recorded")
    if cfg.trials and members:
        from .proofsys import NoisyStamp

        stamp = NoisyStamp(default=Fraction(1, 2))
        est = vote_pass_rate(stamp, members[0], "", cfg.d, votes, cfg.trials, cfg.seed)
        exact = vote_pass_probability_exact(Fraction(1, 2), votes)
        report.add("vote-monte-carlo[q=1/2]", est.contains(exact), est.estimate, est.low,
                   est.high, exact=exact, comparison="exact in 99% Wilson interval")


def _run_verify_bounds(cfg, report):
    families = {
        "chernoff": lambda: verify_chernoff_grid(),
        "test": lambda: rate_test_grid_check(),
        "amplify": lambda: amplify_grid_check(),
        "strong": lambda: strong_simulation_check(),
    }
    for fam in cfg.checks:
        if fam == "chain":
            ch = final_chain(65536, 1)
            report.add("chain-sum", ch.holds, ch.total, bound=ch.limit,
                       comparison="sum of error terms < 1/(4 d log*^2 n)")
            for name, v in ch.lemma_terms.items():
                report.add(f"chain-{name}", v < float(ch.lemma_limit), v, bound=ch.lemma_limit,
                           comparison="< 1/(8 d log*^2 n)")
            continue
        reps = families[fam]()
        ok = sum(r.satisfied for r in reps)
        report.add(f"{fam}-grid", ok == len(reps), ok, exact=len(reps),
                   comparison="cells satisfied == cells")
        report.tables[fam] = [r.row() for r in reps]


RUNNERS = {
    "certify": _run_certify,
    "amplify": _run_amplify,
    "universal": _run_universal,
    "timetable": _run_timetable,
    "proofsys": _run_proofsys,
    "verify-bounds": _run_verify_bounds,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    if cfg.kind == "report":
        with open(cfg.input, encoding="utf-8") as fh:
            return ExperimentReport.from_json(fh.read())
    report = ExperimentReport(cfg.kind, cfg.to_dict())
    start = time.perf_counter()
    RUNNERS[cfg.kind](cfg, report)
    report.runtime = {"elapsed_seconds": round(time.perf_counter() - start, 3),
                      "python": platform.python_version(), "autolab": __version__}
    return report


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------


def _kv(text: str) -> dict:
    out = {}
    for part in filter(None, text.split(",")):
        key, sep, val = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected key=value, got {part!r}")
        out[key.strip().replace("'", "_prime")] = val.strip()
    return out


def _ints(text: str) -> list:
    return [int(v) for v in text.split(",") if v]


def _strs(text: str) -> list:
    return [v for v in text.split(",") if v]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--seed", type=int, help="master seed (default 0)")
    g.add_argument("--config", help="YAML config file; flags override its values")
    g.add_argument("--out", help="output path (stdout when omitted)")
    g.add_argument("--format", choices=("json", "csv"), default="json")
    g.add_argument("--exact-params", action="store_true", default=None, dest="exact_params",
                   help="use the exact parameter formulas")
    g.add_argument("--scale", type=_kv, help="multipliers, e.g. k=0.01,l=0.001")
    g.add_argument("--param", type=_kv, dest="params",
                   help="absolute values, e.g. d_prime=8,f=9,k=40,l=80")

    parser = argparse.ArgumentParser(prog="autolab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="kind", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    p = add("certify", "estimate CERTIFY acceptance against the exact oracle")
    p.add_argument("--problem")
    p.add_argument("--candidate")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--d-prime", type=int, dest="d_prime")
    p.add_argument("--k", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--f")
    p.add_argument("--trials", type=int)

    p = add("amplify", "amplifier error on one non-member")
    p.add_argument("--problem")
    p.add_argument("--candidate")
    p.add_argument("--x")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--trials", type=int)

    p = add("universal", "run the universal automatizer over a candidate pool")
    p.add_argument("--problem")
    p.add_argument("--pool", type=_strs, help="ordered candidate names, comma separated")
    p.add_argument("--x")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--correctness", action="store_true", default=None)
    p.add_argument("--runs-per-input", type=int, dest="runs_per_input")

    p = add("timetable", "measure median/quantile times on members")
    p.add_argument("--problem")
    p.add_argument("--candidate", help="candidate name, or 'universal' to time the pool automatizer")
    p.add_argument("--pool", type=_strs)
    p.add_argument("--lengths", type=_ints)
    p.add_argument("--ds", type=_ints)
    p.add_argument("--trials", type=int)
    p.add_argument("--budget", type=int)
    p.add_argument("--bound", type=_ints, help="ascending polynomial coefficients")

    p = add("proofsys", "proof-system checks and the composite automatizer")
    p.add_argument("--problem")
    p.add_argument("--system")
    p.add_argument("--search")
    p.add_argument("--d", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--tokens", type=int)
    p.add_argument("--witness-bound", type=int, dest="witness_bound")
    p.add_argument("--votes", type=_kv, help="copies=..,votes=..,threshold=..")
    p.add_argument("--trials", type=int)

    p = add("verify-bounds", "exact tails against the analytic bounds")
    p.add_argument("--checks", type=_strs, help=f"subset of {','.join(BOUND_FAMILIES)}")

    p = add("report", "re-emit a saved JSON report")
    p.add_argument("input")
    return parser


def config_from_args(args) -> ExperimentConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError([("config", "top level must be a mapping")])
        data.update(loaded)
    skip = {"config", "out", "format"}
    for key, val in vars(args).items():
        if key in skip or val is None:
            continue
        if key in SCALABLE and key != "m":
            # single-parameter shortcuts (amplify's --m is its own copy count) land in the absolute overrides
            data.setdefault("params", {})
            data["params"] = {**data["params"], key: val}
            continue
        data[key] = val
    data["kind"] = args.kind
    if "votes" in data:
        data["votes"] = {k: int(v) for k, v in data["votes"].items()}
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run_experiment(cfg)
    except ConfigError as e:
        for fld, msg in e.problems:
            print(f"config error: {fld}: {msg}", file=sys.stderr)
        return 2
    except (AutolabError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    emit_report(report, args.format, args.out)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
