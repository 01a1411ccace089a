"""Experiment orchestration: config files, sweeps, CSV traces, verification.

An experiment is a cartesian sweep over instance seeds, run seeds,
methods, and step sizes, every run capped at the same query budget.
Results land in three CSV files: ``trace.csv`` (one row per recorded
step), ``runs.csv`` (one status row per run, failures included), and
``summary.csv`` (per method and step size: mean and standard error of
the best normalized objective, with the winning step size marked).

Output is deterministic byte for byte: rows are sorted by key rather
than completion order, floats are printed with 17 significant digits,
and files use UTF-8 with bare newlines.
"""

from __future__ import annotations

import configparser
import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .blackbox import (
    BenchmarkInstance,
    BlackBoxFunction,
    DegenerateDegreeError,
    Graph,
    load_graph,
    make_attack,
    make_distance,
    make_magnitude,
    make_planted_linear,
)
from .estimator import GraceConfig, grace_estimate
from .optimizer import OptimizerConfig, run_optimizer
from .rng import RngStream
from .theory import (
    BASELINE_CONSTANT,
    TheoryParams,
    check_egamma_grid,
    closed_form_maximizer,
    compute_C1,
    compute_C2,
    partition_probability_suite,
    practical_schedule,
    ratio_test_margin,
    step_mass,
    theoretical_lower_bound,
    theoretical_schedule,
    verify_schedule_conditions,
)

__all__ = [
    "ExperimentSpecError",
    "MethodSpec",
    "ExperimentSpec",
    "parse_spec",
    "serialize_spec",
    "ExperimentResult",
    "run_experiment",
    "CheckResult",
    "TheoryReport",
    "verify_theory",
    "query_scaling_probe",
    "scaling_correlation",
    "write_scaling_csv",
    "OUTPUT_DIR_VAR",
]

OUTPUT_DIR_VAR = "ZOSPARSE_OUT"

FAMILIES = ("distance", "magnitude", "attack", "planted-linear")

_INT_KEYS = {"d", "s", "u", "v", "hops", "n", "d1", "m", "directions", "batch", "scales"}
_FLOAT_KEYS = {"lam", "w", "epsilon", "mu"}
_STR_KEYS = {"graph"}


class ExperimentSpecError(ValueError):
    """Invalid experiment document; the message names the offending key."""


@dataclass
class MethodSpec:
    """One method column of the sweep: a label, the algorithm, its knobs."""

    name: str
    method: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentSpec:
    """Everything a sweep needs, round-trippable through an INI document."""

    family: str
    family_params: dict
    methods: list
    instance_seeds: list
    run_seeds: list
    budget: int
    eta_grid: list
    max_steps: int | None = None
    output: str | None = None


def _typed_value(section: str, key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _STR_KEYS:
            return raw
    except ValueError as err:
        raise ExperimentSpecError(f"[{section}] {key}: {err}") from None
    raise ExperimentSpecError(f"[{section}] unknown key {key!r}")


def _int_list(section: str, key: str, raw: str) -> list:
    try:
        values = [int(tok) for tok in raw.split()]
    except ValueError:
        raise ExperimentSpecError(f"[{section}] {key}: expected integers") from None
    if not values:
        raise ExperimentSpecError(f"[{section}] {key}: must be nonempty")
    return values


def parse_spec(text: str) -> ExperimentSpec:
    """Parse an experiment document; see :func:`serialize_spec` for the format."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ExperimentSpecError(str(err)) from None
    if "experiment" not in parser or "family" not in parser:
        raise ExperimentSpecError("need [experiment] and [family] sections")

    exp = parser["experiment"]
    try:
        budget = exp.getint("budget")
    except (ValueError, TypeError):
        raise ExperimentSpecError("[experiment] budget: expected an integer") from None
    if budget is None or budget < 1:
        raise ExperimentSpecError("[experiment] budget: need an integer >= 1")
    try:
        eta_grid = [float(tok) for tok in exp.get("eta-grid", "").split()]
    except ValueError:
        raise ExperimentSpecError("[experiment] eta-grid: expected floats") from None
    if not eta_grid or any(eta <= 0 for eta in eta_grid):
        raise ExperimentSpecError("[experiment] eta-grid: need positive step sizes")
    instance_seeds = _int_list("experiment", "instance-seeds", exp.get("instance-seeds", ""))
    run_seeds = _int_list("experiment", "run-seeds", exp.get("run-seeds", ""))
    max_steps = exp.getint("max-steps") if "max-steps" in exp else None
    output = exp.get("output") if "output" in exp else None

    fam = parser["family"]
    if "name" not in fam:
        raise ExperimentSpecError("[family] needs a name")
    family = fam["name"]
    if family not in FAMILIES:
        raise ExperimentSpecError(f"[family] unknown family {family!r}; expected one of {FAMILIES}")
    family_params = {k: _typed_value("family", k, v) for k, v in fam.items() if k != "name"}

    methods = []
    for section in parser.sections():
        if not section.startswith("method:"):
            continue
        name = section.split(":", 1)[1]
        body = parser[section]
        if "method" not in body:
            raise ExperimentSpecError(f"[{section}] needs a method key")
        algorithm = body["method"]
        params = {k: _typed_value(section, k, v) for k, v in body.items() if k != "method"}
        methods.append(MethodSpec(name, algorithm, params))
    if not methods:
        raise ExperimentSpecError("need at least one [method:NAME] section")

    return ExperimentSpec(
        family=family,
        family_params=family_params,
        methods=methods,
        instance_seeds=instance_seeds,
        run_seeds=run_seeds,
        budget=budget,
        eta_grid=eta_grid,
        max_steps=max_steps,
        output=output,
    )


def serialize_spec(spec: ExperimentSpec) -> str:
    """Render a spec as the INI document parse_spec reads back unchanged."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str

    def fmt(value) -> str:
        return repr(value) if isinstance(value, float) else str(value)

    parser["experiment"] = {
        "budget": str(spec.budget),
        "eta-grid": " ".join(repr(eta) for eta in spec.eta_grid),
        "instance-seeds": " ".join(str(s) for s in spec.instance_seeds),
        "run-seeds": " ".join(str(s) for s in spec.run_seeds),
    }
    if spec.max_steps is not None:
        parser["experiment"]["max-steps"] = str(spec.max_steps)
    if spec.output is not None:
        parser["experiment"]["output"] = spec.output
    parser["family"] = {"name": spec.family}
    for key, value in spec.family_params.items():
        parser["family"][key] = fmt(value)
    for method in spec.methods:
        section = f"method:{method.name}"
        parser[section] = {"method": method.method}
        for key, value in method.params.items():
            parser[section][key] = fmt(value)
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


# --- running ---


@dataclass
class ExperimentResult:
    output_dir: Path
    trace_path: Path
    runs_path: Path
    summary_path: Path
    num_runs: int
    num_failures: int


def _build_instance(spec: ExperimentSpec, graph: Graph | None, instance_seed: int) -> BenchmarkInstance:
    params = spec.family_params
    rng = RngStream(instance_seed)
    if spec.family == "distance":
        return make_distance(params["d"], params["s"], rng)
    if spec.family == "magnitude":
        return make_magnitude(
            params["d"], params["s"], params.get("lam", 0.1), params.get("w", 0.2), rng
        )
    if spec.family == "planted-linear":
        return make_planted_linear(params["d"], params["s"], rng)
    lam = params.get("lam", 100.0 / graph.n**2)
    return make_attack(
        graph, params.get("u", 1), params.get("v", 2), params.get("hops", 4), lam
    )


def _infinite_on_degenerate(f: BlackBoxFunction) -> BlackBoxFunction:
    """Degenerate degrees read as +inf, preserving minimization semantics."""

    def evaluate(x):
        try:
            return f.eval(x)
        except DegenerateDegreeError:
            return math.inf

    return BlackBoxFunction(f.dim, evaluate)


def _optimizer_config(method: MethodSpec, eta: float, spec: ExperimentSpec) -> OptimizerConfig:
    params = method.params
    kwargs = {}
    if "mu" in params:
        kwargs["mu"] = params["mu"]
    if "directions" in params:
        kwargs["directions"] = params["directions"]
    if "batch" in params:
        kwargs["batch"] = params["batch"]
    if "scales" in params:
        kwargs["gld_scales"] = params["scales"]
    return OptimizerConfig(
        method=method.method,
        step_size=eta,
        budget=spec.budget,
        max_steps=spec.max_steps,
        **kwargs,
    )


def _grace_config(method: MethodSpec, spec: ExperimentSpec, d: int) -> GraceConfig:
    params = method.params
    s = params.get("s", spec.family_params.get("s", 1))
    d1 = params.get("d1", 10 if spec.family == "attack" else 20)
    n = params.get("n", max(1, 7 * d // (10 * s)))
    return GraceConfig(
        s=s,
        epsilon=params.get("epsilon", 1e-6),
        n=n,
        m=params.get("m", 1),
        schedule=practical_schedule(d1),
    )


def _execute_unit(payload):
    """One (instance seed, run seed, method, eta) cell; runs in a worker."""
    spec, graph, instance_seed, run_seed, method_index, eta_index = payload
    method = spec.methods[method_index]
    eta = spec.eta_grid[eta_index]
    key = (method_index, instance_seed, run_seed, eta_index)
    try:
        instance = _build_instance(spec, graph, instance_seed)
        f = instance.objective
        if spec.family == "attack":
            f = _infinite_on_degenerate(f)
        opt = _optimizer_config(method, eta, spec)
        grace = _grace_config(method, spec, f.dim) if method.method == "grace" else None
        rng = RngStream(run_seed).derive(instance_seed, method_index, eta_index)
        trace = run_optimizer(f, instance.x1, opt, rng, grace)
    except Exception as err:  # a failed run must not sink the sweep
        return key, "failed", f"{type(err).__name__}: {err}", [], None
    rows = [
        (record.step, record.queries, record.value, record.normalized)
        for record in trace.records
    ]
    if trace.records:
        initial = trace.records[0].value
        best_normalized = trace.best_value / initial if initial != 0.0 else math.nan
        stats = (len(trace.records), trace.records[-1].queries, trace.best_value, best_normalized)
    else:
        stats = (0, 0, math.nan, math.nan)
    return key, "ok", "", rows, stats


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def resolve_output_dir(explicit: str | None, spec_output: str | None) -> Path:
    """Explicit argument, then the spec's output key, then $ZOSPARSE_OUT, then ./results."""
    chosen = explicit or spec_output or os.environ.get(OUTPUT_DIR_VAR) or "results"
    return Path(chosen)


def run_experiment(
    spec: ExperimentSpec, output_dir: str | None = None, jobs: int = 1
) -> ExperimentResult:
    """Run the full sweep and write trace.csv, runs.csv, and summary.csv.

    Reruns with an identical spec produce byte-identical files.  A
    failing run becomes a failed row in runs.csv while the rest of the
    sweep proceeds; startup problems (unreadable graph, bad spec) raise
    instead.
    """
    graph = None
    if spec.family == "attack":
        if "graph" not in spec.family_params:
            raise ExperimentSpecError("[family] attack needs a graph key")
        graph = load_graph(Path(spec.family_params["graph"]).read_text(encoding="utf-8"))

    payloads = [
        (spec, graph, instance_seed, run_seed, method_index, eta_index)
        for method_index in range(len(spec.methods))
        for instance_seed in spec.instance_seeds
        for run_seed in spec.run_seeds
        for eta_index in range(len(spec.eta_grid))
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_execute_unit, payloads, chunksize=1))
    else:
        outcomes = [_execute_unit(p) for p in payloads]
    outcomes.sort(key=lambda item: item[0])

    out = resolve_output_dir(output_dir, spec.output)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / "trace.csv"
    runs_path = out / "runs.csv"
    summary_path = out / "summary.csv"

    num_failures = 0
    per_cell: dict[tuple[int, int], list[float]] = {}  # (method_index, eta_index) -> best normalized
    with open(trace_path, "w", encoding="utf-8", newline="") as trace_file, open(
        runs_path, "w", encoding="utf-8", newline=""
    ) as runs_file:
        trace_writer = csv.writer(trace_file, lineterminator="\n")
        trace_writer.writerow(
            [
                "benchmark",
                "method",
                "instance-seed",
                "run-seed",
                "eta",
                "step",
                "cumulative-queries",
                "f-value",
                "normalized-objective",
            ]
        )
        runs_writer = csv.writer(runs_file, lineterminator="\n")
        runs_writer.writerow(
            [
                "benchmark",
                "method",
                "instance-seed",
                "run-seed",
                "eta",
                "status",
                "steps",
                "queries",
                "best-value",
                "best-normalized",
                "detail",
            ]
        )
        for key, status, detail, rows, stats in outcomes:
            method_index, instance_seed, run_seed, eta_index = key
            method = spec.methods[method_index]
            eta = spec.eta_grid[eta_index]
            shared = [spec.family, method.name, instance_seed, run_seed, _fmt(eta)]
            if status == "failed":
                num_failures += 1
                runs_writer.writerow(shared + ["failed", "", "", "", "", detail])
                continue
            steps, queries, best_value, best_normalized = stats
            runs_writer.writerow(
                shared + ["ok", steps, queries, _fmt(best_value), _fmt(best_normalized), ""]
            )
            per_cell.setdefault((method_index, eta_index), []).append(best_normalized)
            for step, step_queries, value, normalized in rows:
                trace_writer.writerow(shared + [step, step_queries, _fmt(value), _fmt(normalized)])

    with open(summary_path, "w", encoding="utf-8", newline="") as summary_file:
        summary_writer = csv.writer(summary_file, lineterminator="\n")
        summary_writer.writerow(
            [
                "benchmark",
                "method",
                "eta",
                "num-runs",
                "mean-best-normalized",
                "stderr-best-normalized",
                "selected",
            ]
        )
        for method_index, method in enumerate(spec.methods):
            cells = []
            for eta_index, eta in enumerate(spec.eta_grid):
                values = per_cell.get((method_index, eta_index))
                if not values:
                    continue
                mean = float(np.mean(values))
                stderr = (
                    float(np.std(values, ddof=1) / math.sqrt(len(values)))
                    if len(values) > 1
                    else 0.0
                )
                cells.append((eta_index, eta, len(values), mean, stderr))
            if not cells:
                continue
            best_index = min(range(len(cells)), key=lambda i: (cells[i][3], i))
            for i, (eta_index, eta, count, mean, stderr) in enumerate(cells):
                summary_writer.writerow(
                    [
                        spec.family,
                        method.name,
                        _fmt(eta),
                        count,
                        _fmt(mean),
                        _fmt(stderr),
                        1 if i == best_index else 0,
                    ]
                )

    return ExperimentResult(
        output_dir=out,
        trace_path=trace_path,
        runs_path=runs_path,
        summary_path=summary_path,
        num_runs=len(outcomes),
        num_failures=num_failures,
    )


# --- verification report ---


@dataclass
class CheckResult:
    name: str
    value: str
    passed: bool


@dataclass
class TheoryReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def render(self) -> str:
        lines = []
        for check in self.checks:
            verdict = "PASS" if check.passed else "FAIL"
            lines.append(f"{verdict}  {check.name}: {check.value}")
        overall = "PASS" if self.all_passed else "FAIL"
        lines.append(f"{overall}  overall")
        return "\n".join(lines)


def verify_theory() -> TheoryReport:
    """Recompute every constant and identity of the analysis; report per item."""
    checks = []
    p = TheoryParams()

    c1 = compute_C1()
    checks.append(
        CheckResult("ratio-test constant C1", f"{c1:.6f}", 2.2886 <= c1 <= 2.2905 and c1 < 2.29)
    )
    argmax = closed_form_maximizer()
    gap = abs(ratio_test_margin(argmax) - c1)
    checks.append(
        CheckResult(
            "C1 closed-form argmax ln(1/t)",
            f"{argmax:.6f} (margin gap {gap:.2e})",
            abs(argmax - 0.648887) < 1e-3 and gap < 1e-6,
        )
    )
    c2 = compute_C2(p)
    checks.append(CheckResult("dominance constant C2", f"{c2:.4f}", 134.78 <= c2 <= 134.98))
    factor = BASELINE_CONSTANT / c2
    checks.append(CheckResult("reduction over prior constant", f"{factor:.1f}", factor >= 4000.0))

    feasibility = verify_schedule_conditions(p)
    checks.append(
        CheckResult(
            "schedule feasibility at defaults",
            f"x1={feasibility.first_step_mass:.5f}, A={feasibility.amplification:.5f}",
            feasibility.all_ok,
        )
    )

    schedule = theoretical_schedule(p, length=10)
    terms = [schedule.value(r) for r in range(1, 11)]
    nondecreasing = all(a <= b for a, b in zip(terms, terms[1:]))
    above_bound = all(terms[r - 1] >= theoretical_lower_bound(p, r) for r in range(1, 11))
    masses = [step_mass(p, terms[r - 1], r) for r in range(1, 11)]
    mass_monotone = all(a <= b for a, b in zip(masses, masses[1:]))
    checks.append(
        CheckResult(
            "theoretical schedule (10 terms)",
            f"starts {terms[:4]}, nondecreasing={nondecreasing}, "
            f"above lower bound={above_bound}, step mass monotone={mass_monotone}",
            nondecreasing and above_bound and mass_monotone,
        )
    )

    practical = practical_schedule(20)
    first_three = [practical.value(r) for r in (1, 2, 3)]
    checks.append(
        CheckResult("practical schedule from 20", str(first_three), first_three == [20, 89, 839])
    )

    egamma_checked, egamma_failures = check_egamma_grid()
    checks.append(
        CheckResult(
            "isolation inequality grid",
            f"{egamma_checked} combinations, {len(egamma_failures)} failures",
            not egamma_failures,
        )
    )

    suite_checked, suite_failures = partition_probability_suite()
    checks.append(
        CheckResult(
            "partition probabilities (d <= 6, exact)",
            f"{suite_checked} tuples, {len(suite_failures)} failures",
            not suite_failures,
        )
    )
    return TheoryReport(checks)


# --- query scaling probe ---


def query_scaling_probe(d_list, s_list, repeats: int = 5, seed: int = 0) -> list:
    """Mean queries per estimate on planted sparse linear objectives.

    Returns rows (d, s, mean queries, s * log2 log2(d/s)); base-2 logs
    match the shrink iteration cap.  The predictor is NaN when d/s is
    too small for the double logarithm.
    """
    if not d_list or not s_list:
        raise ValueError("need nonempty d and s lists")
    if repeats < 1:
        raise ValueError(f"need repeats >= 1, got {repeats}")
    rows = []
    for d in d_list:
        for s in s_list:
            if s > d:
                continue
            total = 0
            for repeat in range(repeats):
                rng = RngStream(seed).derive(d, s, repeat)
                instance = make_planted_linear(d, s, rng.derive(0))
                cfg = GraceConfig.defaults(d, s, epsilon=1e-3)
                estimate = grace_estimate(instance.objective, instance.x1, cfg, rng.derive(1))
                total += estimate.queries_used
            ratio = d / s
            predictor = s * math.log2(math.log2(ratio)) if ratio > 2.0 else math.nan
            rows.append((d, s, total / repeats, predictor))
    return rows


def scaling_correlation(rows) -> float:
    """Pearson correlation between mean queries and the predictor column."""
    usable = [(queries, predictor) for _, _, queries, predictor in rows if math.isfinite(predictor)]
    if len(usable) < 2:
        return math.nan
    queries, predictors = zip(*usable)
    return float(np.corrcoef(queries, predictors)[0, 1])


def write_scaling_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as out:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["d", "s", "mean-queries", "s-loglog-d-over-s"])
        for d, s, mean_queries, predictor in rows:
            writer.writerow([d, s, _fmt(mean_queries), _fmt(predictor)])
