"""Experiments, records and persistence.

Every record carries the per-replica seed derived from the master seed, so
``replay_record`` can regenerate its value from the record alone.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cuts import AnnealSettings, exact_all, local_search
from .graphs import (
    MultiGraph,
    color_and_decompose,
    conditional_cut_mean,
    cut_size,
    gen_er_gnm,
    gen_poissonized,
    gen_regular,
    gen_sbm,
    red_cut_mean,
    rewire,
    surgery_expectations,
)
from .rng import derive_seed, make_rng
from .sk import Couplings, InterpolatedModel, SkModel, free_energy, interp_derivative
from .spins import SpinConfig

log = logging.getLogger(__name__)

#: Reference value of the Parisi constant used for the deviation lines.
PSTAR_REFERENCE = 0.76321

SCALING_PROBLEMS = (("min", "bisection"), ("max", "bisection"), ("max", "free"))
ENSEMBLE_SCALE = {"er": 0.5, "regular": 0.25}


@dataclass
class ExperimentRecord:
    experiment: str
    ensemble: str
    n: int
    gamma: float | None
    a: float | None
    b: float | None
    beta: float | None
    t: float | None
    seed: int
    objective: str
    constraint: str
    solver: str
    value: float
    normalized: float
    stderr: float | None
    elapsed_ms: int

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return json.dumps(d, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        d = dict(d)
        if d.get("value") is None:
            d["value"] = math.nan
        if d.get("normalized") is None:
            d["normalized"] = math.nan
        return cls(**{f.name: d[f.name] for f in fields(cls)})

    def cell(self) -> tuple:
        return (self.experiment, self.ensemble, self.n, self.gamma, self.a, self.b, self.beta, self.t,
                self.objective, self.constraint, self.solver)


CELL_FIELDS = ("experiment", "ensemble", "n", "gamma", "a", "b", "beta", "t", "objective", "constraint", "solver")


def _record(experiment, ensemble, n, seed, objective, constraint, solver, value, t0, *,
            gamma=None, a=None, b=None, beta=None, t=None, stderr=None) -> ExperimentRecord:
    value = float(value)
    return ExperimentRecord(experiment, ensemble, int(n), gamma, a, b, beta, t, int(seed), objective,
                            constraint, solver, value, value / n, stderr,
                            int(round(1000 * (time.perf_counter() - t0))))


def mean_se(values: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error with compensated summation."""
    x = [float(v) for v in values if math.isfinite(v)]
    if not x:
        return math.nan, math.nan
    mean = math.fsum(x) / len(x)
    if len(x) < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in x) / (len(x) - 1)
    return mean, math.sqrt(var / len(x))


def write_records(records: Iterable[ExperimentRecord], path: str | Path, append: bool = True) -> Path:
    """Append records as JSON lines and rewrite the CSV summary next to it (``.csv``)."""
    path = Path(path)
    with path.open("a" if append else "w") as fh:
        for r in records:
            fh.write(r.to_json() + "\n")
    all_records = read_records(path)
    write_summary(all_records, path.with_suffix(".csv"))
    return path


def read_records(path: str | Path) -> list[ExperimentRecord]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(ExperimentRecord.from_dict(json.loads(line)))
    return out


def summarize(records: Iterable[ExperimentRecord]) -> list[dict]:
    """One row per distinct parameter cell with count, mean value, mean normalized and SE."""
    groups: dict[tuple, list[ExperimentRecord]] = defaultdict(list)
    for r in records:
        groups[r.cell()].append(r)
    rows = []
    for key in sorted(groups, key=lambda k: tuple("" if v is None else str(v) for v in k)):
        recs = groups[key]
        mean, se = mean_se([r.value for r in recs])
        norm, _ = mean_se([r.normalized for r in recs])
        row = dict(zip(CELL_FIELDS, key))
        row.update(count=len(recs), mean_value=mean, mean_normalized=norm, stderr=se)
        rows.append(row)
    return rows


def write_summary(records: Iterable[ExperimentRecord], path: str | Path) -> None:
    rows = summarize(records)
    header = list(CELL_FIELDS) + ["count", "mean_value", "mean_normalized", "stderr"]
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        w.writerows(rows)


# -- solver labels ------------------------------------------------------------------

def solver_label(solver: str, opts: AnnealSettings | None) -> str:
    if solver != "local" or opts is None or opts == AnnealSettings():
        return solver
    return "local:" + ",".join(f"{k}={v}" for k, v in asdict(opts).items())


def parse_solver(label: str) -> tuple[str, AnnealSettings | None]:
    if not label.startswith("local:"):
        return label, None
    kw = {}
    for part in label[len("local:"):].split(","):
        k, v = part.split("=")
        kw[k] = int(v) if k in ("restarts", "n_temps", "moves_per_spin") else float(v)
    return "local", AnnealSettings(**kw)


# -- scaling --------------------------------------------------------------------------

@dataclass
class ScalingSummary:
    ensemble: str
    n: int
    solver: str
    gammas: list[float]
    mcut: list[float]  # per-gamma mean of mcut / n
    MCUT: list[float]
    MaxCut: list[float]
    deviation: dict[str, list[float]]  # d(gamma) per problem
    sandwich_ok: bool
    pstar: float = PSTAR_REFERENCE
    failures: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def scaling_graph(ensemble: str, n: int, gamma: float, seed: int) -> MultiGraph:
    if ensemble == "er":
        return gen_er_gnm(n, int(round(gamma * n)), make_rng(seed, "scaling", 0, "graph"))
    if ensemble == "regular":
        if gamma != int(gamma):
            raise ValueError("regular ensemble needs integer gamma")
        return gen_regular(n, int(gamma), make_rng(seed, "scaling", 0, "graph"))
    raise ValueError(f"unknown ensemble {ensemble!r}")


def deviation(value_per_n: float, gamma: float, ensemble: str) -> float:
    """d = (value/n - c gamma) / sqrt(c gamma), c = 1/2 (ER) or 1/4 (regular)."""
    cg = ENSEMBLE_SCALE[ensemble] * gamma
    return (value_per_n - cg) / math.sqrt(cg)


def _solve_scaling(g: MultiGraph, solver: str, seed: int, problems=SCALING_PROBLEMS) -> dict:
    kind, opts = parse_solver(solver)
    if kind == "exact":
        res = exact_all(g)
        return {p: res[(p[1], p[0])].value for p in problems}
    if kind == "local":
        return {p: local_search(g, p[1], p[0], opts, make_rng(seed, "scaling", 0, f"{p[0]}-{p[1]}")).value
                for p in problems}
    raise ValueError(f"unknown solver {solver!r}")


def run_scaling(ensemble: str, gammas: Sequence[float], n: int, replicas: int, solver: str, seed: int,
                opts: AnnealSettings | None = None) -> tuple[ScalingSummary, list[ExperimentRecord]]:
    """mcut, MCUT and MaxCut per instance; records and rescaled deviations per gamma.

    The trivial free minimum (cut 0) is not run.
    """
    if solver == "exact" and n > 30:
        raise ValueError("exact solver needs n <= 30")
    label = solver_label(solver, opts)
    records, failures = [], []
    sandwich = True
    means = {p: [] for p in SCALING_PROBLEMS}
    for gi, gamma in enumerate(gammas):
        per = {p: [] for p in SCALING_PROBLEMS}
        for r in range(replicas):
            rseed = derive_seed(seed, "scaling", gi * replicas + r)
            t0 = time.perf_counter()
            try:
                g = scaling_graph(ensemble, n, gamma, rseed)
                vals = _solve_scaling(g, label, rseed)
            except Exception as exc:  # recorded, experiment continues
                failures.append(f"gamma={gamma} replica={r}: {exc}")
                log.warning("scaling instance failed: %s", exc)
                vals = {p: math.nan for p in SCALING_PROBLEMS}
            order = [vals[p] for p in SCALING_PROBLEMS]
            if all(math.isfinite(v) for v in order) and not (order[0] <= order[1] <= order[2]):
                sandwich = False
            for p in SCALING_PROBLEMS:
                per[p].append(vals[p] / n)
                records.append(_record("scaling", ensemble, n, rseed, p[0], p[1], label, vals[p], t0,
                                       gamma=float(gamma)))
        for p in SCALING_PROBLEMS:
            means[p].append(mean_se(per[p])[0])
    dev = {f"{o}-{c}": [deviation(v, g, ensemble) for v, g in zip(means[(o, c)], gammas)]
           for o, c in SCALING_PROBLEMS}
    summary = ScalingSummary(ensemble, n, label, [float(g) for g in gammas], means[SCALING_PROBLEMS[0]],
                             means[SCALING_PROBLEMS[1]], means[SCALING_PROBLEMS[2]], dev, sandwich,
                             failures=failures)
    return summary, records


# -- SBM test ---------------------------------------------------------------------------

@dataclass
class SbmTestResult:
    n: int
    a: float
    b: float
    epsilon: float
    theta: float
    pairs: int
    null_mcut: list[int]
    planted_mcut: list[int]
    error_null: float  # fraction of null samples declared planted
    error_planted: float  # fraction of planted samples declared null
    combined_error: float
    degenerate_threshold: bool  # epsilon == 0

    def to_dict(self) -> dict:
        return asdict(self)


def t_cut(mcut: float, theta: float) -> int:
    """0 (planted partition) if mcut <= theta, else 1 (null)."""
    return 0 if mcut <= theta else 1


def sbm_sample(ensemble: str, n: int, a: float, b: float, seed: int) -> MultiGraph:
    rng = make_rng(seed, "sbm", 0, "graph")
    if ensemble == "sbm-null":
        mid = (a + b) / 2
        return gen_sbm(n, mid, mid, rng).graph
    return gen_sbm(n, a, b, rng).graph


def run_sbm_test(n: int, a: float, b: float, epsilon: float, replicas: int, seed: int,
                 opts: AnnealSettings | None = None) -> tuple[SbmTestResult, list[ExperimentRecord]]:
    """T_cut on paired null G(n, (a+b)/(2n)) and planted samples, with heuristic mcut.

    The threshold is theta = n b / 4 + n epsilon in absolute cut counts.
    Annealing gives an upper bound on mcut.
    """
    if n % 2:
        raise ValueError("n must be even")
    theta = n * b / 4 + n * epsilon
    label = solver_label("local", opts)
    records, null, planted = [], [], []
    for r in range(replicas):
        for ensemble, sink in (("sbm-null", null), ("sbm-planted", planted)):
            rseed = derive_seed(seed, ensemble, r)
            t0 = time.perf_counter()
            g = sbm_sample(ensemble, n, a, b, rseed)
            v = local_search(g, "bisection", "min", opts, make_rng(rseed, "sbm", 0, "solve")).value
            sink.append(v)
            records.append(_record("sbm", ensemble, n, rseed, "min", "bisection", label, v, t0,
                                   a=float(a), b=float(b)))
    err0 = sum(t_cut(v, theta) == 0 for v in null) / replicas
    err1 = sum(t_cut(v, theta) == 1 for v in planted) / replicas
    result = SbmTestResult(n, float(a), float(b), float(epsilon), theta, replicas, null, planted, err0, err1,
                           (err0 + err1) / 2, epsilon == 0)
    if result.degenerate_threshold:
        log.warning("epsilon = 0: threshold sits at the planted cut scale (degenerate)")
    return result, records


# -- interpolation trend ------------------------------------------------------------------

def interp_sample(ensemble: str, n: int, beta: float, gamma: float | None, seed: int) -> float:
    """phi_n for one disorder sample: SK at beta, or dilute at beta / sqrt(2 gamma) on rate-gamma graphs."""
    if ensemble == "sk":
        model = SkModel(Couplings(make_rng(seed, "interp", 0, "couplings").standard_normal((n, n))))
    elif ensemble == "dilute":
        g = gen_poissonized(n, gamma, make_rng(seed, "interp", 0, "graph"))
        model = InterpolatedModel(Couplings(np.zeros((n, n))), g, 0.0, gamma)
    else:
        raise ValueError(f"unknown ensemble {ensemble!r}")
    return free_energy(model, beta, constrained=True).free_energy_density


@dataclass
class InterpRow:
    gamma: float
    phi_dilute: float
    se_dilute: float
    phi_sk: float
    se_sk: float
    difference: float
    se_difference: float


@dataclass
class InterpTrend:
    n: int
    beta: float
    samples: int
    rows: list[InterpRow]
    nonincreasing: bool  # within 2 combined SE

    def to_dict(self) -> dict:
        return asdict(self)


def run_interp_check(n: int, beta: float, gammas: Sequence[float], samples: int, seed: int
                     ) -> tuple[InterpTrend, list[ExperimentRecord]]:
    if n > 14:
        raise ValueError("interpolation check limited to n <= 14")
    records = []

    def batch(ensemble, gamma, tag):
        vals = []
        for r in range(samples):
            rseed = derive_seed(seed, f"interp-{tag}", r)
            t0 = time.perf_counter()
            v = interp_sample(ensemble, n, beta, gamma, rseed)
            vals.append(v)
            # value is phi_n per sample; normalized = phi_n / n keeps the record schema uniform
            records.append(_record("interp", ensemble, n, rseed, "phi", "bisection", "exact", v, t0,
                                   gamma=None if gamma is None else float(gamma), beta=float(beta)))
        return mean_se(vals)

    sk_mean, sk_se = batch("sk", None, "sk")
    rows = []
    for gamma in gammas:
        d_mean, d_se = batch("dilute", gamma, f"dilute-{gamma}")
        se = math.hypot(d_se, sk_se) if math.isfinite(d_se) and math.isfinite(sk_se) else 0.0
        rows.append(InterpRow(float(gamma), d_mean, d_se, sk_mean, sk_se, abs(d_mean - sk_mean), se))
    ok = all(r2.difference <= r1.difference + 2 * math.hypot(r1.se_difference, r2.se_difference)
             for r1, r2 in zip(rows, rows[1:]))
    return InterpTrend(n, float(beta), samples, rows, ok), records


# -- interpolation derivative -------------------------------------------------------

INTERP_FD_QUANTITIES = ("fd", "fd_2h", "closed")


def interp_derivative_sample(n: int, beta: float, gamma: float, t: float, dt: float, seed: int) -> dict:
    """Centered differences of phi_n(t) and the closed-form derivative for one disorder sample.

    Graphs at t - 2dt, t - dt, t, t + dt, t + 2dt are nested by thinning a
    single Poissonized graph (rate gamma (1 - t) at parameter t); the SK
    couplings are shared.
    """
    if not (0 < t - 2 * dt and t + 2 * dt < 1):
        raise ValueError("need 0 < t - 2 dt and t + 2 dt < 1")
    rng = make_rng(seed, "interp-derivative", 0, "disorder")
    c = Couplings(rng.standard_normal((n, n)))
    ts = [t - 2 * dt, t - dt, t, t + dt, t + 2 * dt]
    rates = [gamma * (1 - s) for s in ts]
    graphs = [gen_poissonized(n, rates[0], rng)]
    for hi, lo in zip(rates, rates[1:]):
        graphs.append(graphs[-1].thin(lo / hi, rng))
    phi = [free_energy(InterpolatedModel(c, g, s, gamma), beta).free_energy_density for g, s in zip(graphs, ts)]
    return {
        "fd": (phi[3] - phi[1]) / (2 * dt),
        "fd_2h": (phi[4] - phi[0]) / (4 * dt),
        "closed": interp_derivative(c, graphs[2], beta, gamma, t).total,
    }


@dataclass
class InterpDerivativeCheck:
    n: int
    beta: float
    gamma: float
    t: float
    dt: float
    samples: int
    closed: float
    closed_se: float
    fd: float
    fd_se: float
    fd_2h: float
    paired_se: float  # SE of the per-sample difference fd - closed
    richardson: float  # |fd_2h - fd| / 3, the O(dt^2) term
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return asdict(self)


def run_interp_derivative_check(n: int, beta: float, gamma: float, t: float, dt: float, samples: int,
                                seed: int) -> tuple[InterpDerivativeCheck, list[ExperimentRecord]]:
    """Closed-form d phi / dt against the disorder-averaged centered difference.

    Tolerance: 2 SE of the paired difference plus the Richardson estimate
    of the O(dt^2) truncation error.
    """
    vals = {q: [] for q in INTERP_FD_QUANTITIES}
    records = []
    for r in range(samples):
        rseed = derive_seed(seed, "interp-derivative", r)
        t0 = time.perf_counter()
        sample = interp_derivative_sample(n, beta, gamma, t, dt, rseed)
        for q in INTERP_FD_QUANTITIES:
            vals[q].append(sample[q])
            records.append(_record("interp-derivative", "interpolated", n, rseed, q, "bisection",
                                   f"exact:dt={dt}", sample[q], t0, gamma=float(gamma), beta=float(beta),
                                   t=float(t)))
    closed, closed_se = mean_se(vals["closed"])
    fd, fd_se = mean_se(vals["fd"])
    fd2, _ = mean_se(vals["fd_2h"])
    _, paired = mean_se([a - b for a, b in zip(vals["fd"], vals["closed"])])
    rich = abs(fd2 - fd) / 3
    tol = 2 * paired + rich
    check = InterpDerivativeCheck(n, float(beta), float(gamma), float(t), float(dt), samples, closed, closed_se,
                                  fd, fd_se, fd2, paired, rich, tol, abs(fd - closed) <= tol)
    return check, records


# -- surgery --------------------------------------------------------------------------------

SURGERY_QUANTITIES = ("rb_edges", "cut_rb", "cut_bb", "cond_residual", "red_residual")


def surgery_sample(n: int, gamma: int, seed: int, gamma_minus: float | None = None) -> dict[str, float]:
    """One replica: colored graph, rewiring and a uniform balanced sigma."""
    colored = color_and_decompose(n, gamma, make_rng(seed, "surgery", 0, "color"), gamma_minus)
    surgery = rewire(colored, make_rng(seed, "surgery", 0, "rewire"))
    sigma = SpinConfig.random_balanced(n, make_rng(seed, "surgery", 0, "sigma"))
    s = sigma.sigma
    z = colored.Z
    s_total, s_plus = int(z.sum()), int(z[s == 1].sum())
    freed_plus = int(np.sum(s[surgery.freed_red] == 1))
    rb, bb = colored.g_rb, colored.g_bb
    cut_rb, cut_bb = cut_size(rb, sigma), cut_size(bb, sigma)
    return {
        "rb_edges": float(rb.mult[rb.u != rb.v].sum()),
        "cut_rb": float(cut_rb),
        "cut_bb": float(cut_bb),
        "cond_residual": cut_rb + cut_bb - conditional_cut_mean(n, gamma, s_total, s_plus),
        "red_residual": cut_size(surgery.g_rr_tilde, sigma) - red_cut_mean(len(surgery.freed_red), freed_plus),
    }


@dataclass
class SurgeryRow:
    quantity: str
    mean: float
    stderr: float
    predicted: float
    z: float
    passed: bool


def run_surgery_check(n: int, gamma: int, replicas: int, seed: int, gamma_minus: float | None = None,
                      sigmas: float = 3.0) -> tuple[list[SurgeryRow], list[ExperimentRecord]]:
    """Monte Carlo surgery means against the exact finite-n predictions (3-SE verdicts).

    The conditional formulas are tested through paired residuals
    (observed cut minus its conditional prediction), whose mean is 0.
    """
    pred = surgery_expectations(n, gamma, gamma_minus)
    expected = {"rb_edges": pred.rb_edges, "cut_rb": pred.cut_rb, "cut_bb": pred.cut_bb,
                "cond_residual": 0.0, "red_residual": 0.0}
    values = {q: [] for q in SURGERY_QUANTITIES}
    records = []
    for r in range(replicas):
        rseed = derive_seed(seed, "surgery", r)
        t0 = time.perf_counter()
        sample = surgery_sample(n, gamma, rseed, gamma_minus)
        for q in SURGERY_QUANTITIES:
            values[q].append(sample[q])
            records.append(_record("surgery", "regular-colored", n, rseed, q, "bisection", "exact", sample[q], t0,
                                   gamma=float(gamma)))
    rows = []
    for q in SURGERY_QUANTITIES:
        mean, se = mean_se(values[q])
        z = (mean - expected[q]) / se if se > 0 else (0.0 if mean == expected[q] else math.inf)
        rows.append(SurgeryRow(q, mean, se, expected[q], z, abs(z) <= sigmas))
    return rows, records


# -- replay ---------------------------------------------------------------------------------

def replay_record(rec: ExperimentRecord, gamma_minus: float | None = None) -> float:
    """Recompute a record's value from its experiment, parameters and seed."""
    if rec.experiment == "scaling":
        g = scaling_graph(rec.ensemble, rec.n, rec.gamma, rec.seed)
        return float(_solve_scaling(g, rec.solver, rec.seed, [(rec.objective, rec.constraint)])[
            (rec.objective, rec.constraint)])
    if rec.experiment == "sbm":
        g = sbm_sample(rec.ensemble, rec.n, rec.a, rec.b, rec.seed)
        _, opts = parse_solver(rec.solver)
        return float(local_search(g, "bisection", "min", opts, make_rng(rec.seed, "sbm", 0, "solve")).value)
    if rec.experiment == "interp":
        return float(interp_sample(rec.ensemble, rec.n, rec.beta, rec.gamma, rec.seed))
    if rec.experiment == "interp-derivative":
        dt = float(rec.solver.split("dt=")[1])
        return float(interp_derivative_sample(rec.n, rec.beta, rec.gamma, rec.t, dt, rec.seed)[rec.objective])
    if rec.experiment == "surgery":
        return float(surgery_sample(rec.n, int(rec.gamma), rec.seed, gamma_minus)[rec.objective])
    raise ValueError(f"unknown experiment {rec.experiment!r}")
