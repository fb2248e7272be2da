"""Command-line entry point: ``parisicut <group> <command> [options]``.

Results are printed as one JSON object on stdout.  Exit codes: 0 success,
2 usage error, 1 runtime failure.  ``--config FILE`` supplies ``key=value``
defaults (keys are option names without dashes); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import cuts, graphs, harness, parisi, sk
from .rng import make_rng

log = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def _emit(payload: dict) -> None:
    print(json.dumps(_jsonable(payload)))


def _write_out(records, out: str | None) -> dict:
    if not out:
        return {}
    path = harness.write_records(records, out)
    return {"out": str(path), "summary_csv": str(path.with_suffix(".csv")), "records": len(records)}


# -- parisi -------------------------------------------------------------------------

def _parisi_eval(a) -> dict:
    q = [0.0] + _floats(a.q) + [1.0] if a.q else [0.0, 1.0]
    m = _floats(a.m)
    if a.k is not None and len(m) != a.k:
        raise UsageError(f"--m has {len(m)} levels, --k says {a.k}")
    profile = parisi.RsbProfile(q, m, a.beta)
    t0 = time.perf_counter()
    diagnostics = {"method": a.method}
    if a.method == "pde":
        field = parisi.solve_pde(profile, keep_rows=False)
        value = field.origin - profile.correction()
        diagnostics["error_estimate"] = field.error_estimate
    else:
        value = parisi.parisi_functional(profile, quad=a.quad)
        diagnostics["quad"] = a.quad
    diagnostics["elapsed_s"] = time.perf_counter() - t0
    return {"value": value, "profile": profile.to_dict(), "diagnostics": diagnostics}


def _parisi_minimize(a) -> dict:
    opts = parisi.OptimizerSettings(restarts=a.restarts, seed=a.seed or 0)
    t0 = time.perf_counter()
    res = parisi.minimize_parisi(a.k, a.beta, opts)
    return {"value": res.value, "profile": res.profile.to_dict(),
            "diagnostics": {"converged": res.converged, "evaluations": res.evaluations,
                            "restarts": a.restarts, "elapsed_s": time.perf_counter() - t0}}


def _parisi_pstar(a) -> dict:
    opts = parisi.OptimizerSettings(restarts=a.restarts, seed=a.seed or 0)
    t0 = time.perf_counter()
    est = parisi.estimate_pstar(_floats(a.betas), a.k, a.fit, opts)
    d = est.to_dict()
    return {"value": est.pstar, "pstar": est.pstar, "profile": d.pop("profiles"),
            "diagnostics": dict(d, rs_bound=parisi.RS_BOUND, elapsed_s=time.perf_counter() - t0)}


# -- graph / cut ----------------------------------------------------------------------

def _graph_gen(a) -> dict:
    rng = make_rng(a.seed, "cli-graph")
    need = {"er": ["m"], "pois": ["gamma"], "reg": ["gamma"], "cloning": ["gamma"], "sbm": ["a", "b"]}[a.model]
    for key in need:
        if getattr(a, key) is None:
            raise UsageError(f"--{key} is required for model {a.model}")
    extra = {}
    if a.model == "er":
        g = graphs.gen_er_gnm(a.n, int(a.m), rng)
    elif a.model == "pois":
        g = graphs.gen_poissonized(a.n, a.gamma, rng)
    elif a.model == "reg":
        g = graphs.gen_regular(a.n, int(a.gamma), rng)
    elif a.model == "cloning":
        g = graphs.gen_poisson_cloning(a.n, a.gamma, rng)
    else:
        inst = graphs.gen_sbm(a.n, a.a, a.b, rng)
        g = inst.graph
        extra["planted"] = inst.planted.to_list()
    if a.out:
        g.save(a.out)
        extra["out"] = a.out
    else:
        extra["graph"] = g.to_text()
    return dict(n=g.n, m_total=g.m_total, loops=g.n_loops, model=a.model, **extra)


def _cut_solve(a) -> dict:
    g = graphs.MultiGraph.load(a.input)
    if a.solver == "spectral":
        b = cuts.spectral_bounds(g)
        return {"solver": "spectral-bound", "certificate": [b.mcut_lower, b.MCUT_upper], **b._asdict()}
    if a.solver == "exact":
        res = cuts.exact_extremal(g, a.constraint, a.objective)
    else:
        if a.seed is None:
            raise UsageError("--seed is required for the local solver")
        res = cuts.local_search(g, a.constraint, a.objective, cuts.AnnealSettings(restarts=a.restarts), a.seed)
    return res.to_dict()


# -- sk ----------------------------------------------------------------------------------

def _sk_ground(a) -> dict:
    c = sk.Couplings.sample(a.n, a.seed)
    value, config = sk.sk_ground(c, a.constraint, a.method, seed=a.seed)
    out = {"value": value, "normalized": value / a.n, "config": config.to_list(), "constraint": a.constraint,
           "method": a.method}
    if a.constraint == "free" and a.n % 2 == 0:
        reb, within = sk.rebalance(c, config)
        out["rebalanced_value"] = sk.sk_energy(c, reb)
        out["rebalance_within_threshold"] = within
    return out


def _sk_model(kind: str, n: int, gamma: float | None, t: float | None, rng):
    if kind == "sk":
        return sk.SkModel(sk.Couplings(rng.standard_normal((n, n))))
    if gamma is None:
        raise UsageError("--gamma is required for dilute and interp models")
    if kind == "dilute":
        return sk.DiluteModel(graphs.gen_poissonized(n, gamma, rng), 1.0 / math.sqrt(2 * gamma))
    if t is None:
        raise UsageError("--t is required for the interp model")
    c = sk.Couplings(rng.standard_normal((n, n)))
    return sk.InterpolatedModel(c, graphs.gen_poissonized(n, gamma * (1 - t), rng), t, gamma)


def _sk_free_energy(a) -> dict:
    values, moments = [], []
    for r in range(a.samples):
        model = _sk_model(a.model, a.n, a.gamma, a.t, make_rng(a.seed, "cli-free-energy", r))
        s = sk.free_energy(model, a.beta, constrained=not a.unconstrained)
        values.append(s.free_energy_density)
        moments.append(s.overlap_moments)
    mean, se = harness.mean_se(values)
    return {"value": mean, "stderr": se, "model": a.model, "beta": a.beta, "samples": a.samples,
            "overlap_moments": np.mean(moments, axis=0).tolist()}


def _sk_interp_check(a) -> dict:
    check, _ = harness.run_interp_derivative_check(a.n, a.beta, a.gamma, a.t, a.dt, a.samples, a.seed)
    return check.to_dict()


# -- experiments ----------------------------------------------------------------------

def _anneal_opts(a):
    return None if a.restarts is None else cuts.AnnealSettings(restarts=a.restarts)


def _exp_scaling(a) -> dict:
    summary, records = harness.run_scaling(a.ensemble, _floats(a.gammas), a.n, a.replicas, a.solver, a.seed,
                                           _anneal_opts(a))
    return dict(summary.to_dict(), **_write_out(records, a.out))


def _exp_sbm(a) -> dict:
    res, records = harness.run_sbm_test(a.n, a.a, a.b, a.epsilon, a.replicas, a.seed, _anneal_opts(a))
    return dict(res.to_dict(), **_write_out(records, a.out))


def _exp_interp(a) -> dict:
    trend, records = harness.run_interp_check(a.n, a.beta, _floats(a.gammas), a.samples, a.seed)
    return dict(trend.to_dict(), **_write_out(records, a.out))


def _exp_surgery(a) -> dict:
    rows, records = harness.run_surgery_check(a.n, int(a.gamma), a.replicas, a.seed)
    return dict(rows=[r.__dict__ for r in rows], passed=all(r.passed for r in rows), **_write_out(records, a.out))


# -- parser ------------------------------------------------------------------------------

# options that must be present after merging flags and config, per command
REQUIRED = {
    ("parisi", "eval"): ["m", "beta"],
    ("parisi", "minimize"): ["k", "beta"],
    ("parisi", "pstar"): ["betas"],
    ("graph", "gen"): ["model", "n", "seed"],
    ("cut", "solve"): ["input"],
    ("sk", "ground"): ["n", "seed"],
    ("sk", "free-energy"): ["model", "n", "beta", "seed"],
    ("sk", "interp-check"): ["n", "beta", "gamma", "t", "seed"],
    ("exp", "scaling"): ["ensemble", "gammas", "n", "replicas", "seed"],
    ("exp", "sbm"): ["n", "a", "b", "epsilon", "replicas", "seed"],
    ("exp", "interp"): ["n", "beta", "gammas", "samples", "seed"],
    ("exp", "surgery"): ["n", "gamma", "replicas", "seed"],
}

HANDLERS = {
    ("parisi", "eval"): _parisi_eval,
    ("parisi", "minimize"): _parisi_minimize,
    ("parisi", "pstar"): _parisi_pstar,
    ("graph", "gen"): _graph_gen,
    ("cut", "solve"): _cut_solve,
    ("sk", "ground"): _sk_ground,
    ("sk", "free-energy"): _sk_free_energy,
    ("sk", "interp-check"): _sk_interp_check,
    ("exp", "scaling"): _exp_scaling,
    ("exp", "sbm"): _exp_sbm,
    ("exp", "interp"): _exp_interp,
    ("exp", "surgery"): _exp_surgery,
}


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="parisicut", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    groups = parser.add_subparsers(dest="group", required=True)
    leaves = {}

    def leaf(group_parser, group, name, help_text):
        p = group_parser.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value defaults file")
        leaves[(group, name)] = p
        return p

    g = groups.add_parser("parisi", help="Parisi functional").add_subparsers(dest="command", required=True)
    p = leaf(g, "parisi", "eval", "evaluate P_beta at a step profile")
    p.add_argument("--k", type=int)
    p.add_argument("--q", default="", help="interior breakpoints, comma separated")
    p.add_argument("--m", help="levels m_1..m_k, comma separated")
    p.add_argument("--beta", type=float)
    p.add_argument("--method", choices=["pde", "recursion"], default="recursion")
    p.add_argument("--quad", type=int, default=64)
    p = leaf(g, "parisi", "minimize", "minimize over k-level profiles")
    p.add_argument("--k", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int)
    p = leaf(g, "parisi", "pstar", "beta ladder and extrapolation to beta = oo")
    p.add_argument("--betas")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--fit", choices=sorted(parisi.functional.FIT_DEGREE), default="affine")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int)

    g = groups.add_parser("graph", help="graph ensembles").add_subparsers(dest="command", required=True)
    p = leaf(g, "graph", "gen", "sample a graph")
    p.add_argument("--model", choices=["er", "pois", "reg", "cloning", "sbm"])
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")

    g = groups.add_parser("cut", help="cut solvers").add_subparsers(dest="command", required=True)
    p = leaf(g, "cut", "solve", "extremal cut of a graph file")
    p.add_argument("--in", dest="input")
    p.add_argument("--objective", choices=list(cuts.OBJECTIVES), default="min")
    p.add_argument("--constraint", choices=list(cuts.CONSTRAINTS), default="bisection")
    p.add_argument("--solver", choices=["exact", "local", "spectral"], default="exact")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int)

    g = groups.add_parser("sk", help="SK model").add_subparsers(dest="command", required=True)
    p = leaf(g, "sk", "ground", "ground state of one disorder sample")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--constraint", choices=["free", "bisection"], default="free")
    p.add_argument("--method", choices=["exact", "local"], default="exact")
    p = leaf(g, "sk", "free-energy", "disorder-averaged free energy by enumeration")
    p.add_argument("--model", choices=["sk", "dilute", "interp"])
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--unconstrained", action="store_true")
    p.add_argument("--seed", type=int)
    p = leaf(g, "sk", "interp-check", "closed-form derivative vs finite difference")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--dt", type=float, default=0.1)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int)

    g = groups.add_parser("exp", help="experiments").add_subparsers(dest="command", required=True)
    p = leaf(g, "exp", "scaling", "extremal cut scaling")
    p.add_argument("--ensemble", choices=["er", "regular"])
    p.add_argument("--gammas")
    p.add_argument("--n", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--solver", choices=["exact", "local"], default="exact")
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p = leaf(g, "exp", "sbm", "T_cut hypothesis test")
    for name, typ in [("n", int), ("a", float), ("b", float), ("epsilon", float), ("replicas", int),
                      ("restarts", int), ("seed", int)]:
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--out")
    p = leaf(g, "exp", "interp", "dilute vs SK free-energy trend")
    p.add_argument("--n", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gammas")
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p = leaf(g, "exp", "surgery", "surgery expectation formulas")
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    return parser, leaves


def read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def _apply_config(ns, sub: argparse.ArgumentParser, argv: list[str]) -> None:
    cfg = read_config(ns.config)
    given = {tok.split("=", 1)[0] for tok in argv if tok.startswith("--")}
    actions = {a.dest: a for a in sub._actions}
    for key, raw in cfg.items():
        action = actions.get(key)
        if action is None or key == "config":
            raise UsageError(f"unknown config key {key!r}")
        if any(opt in given for opt in action.option_strings):
            continue
        if action.nargs == 0:  # store_true
            value = raw.lower() in ("1", "true", "yes", "on")
        else:
            value = action.type(raw) if action.type else raw
            if action.choices and value not in action.choices:
                raise UsageError(f"config {key}={raw}: choose from {list(action.choices)}")
        setattr(ns, key, value)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, leaves = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr)
    key = (ns.group, ns.command)
    sub = leaves[key]
    try:
        if ns.config:
            _apply_config(ns, sub, argv)
        missing = [name for name in REQUIRED[key] if getattr(ns, name, None) is None]
        if missing:
            raise UsageError("missing required option(s): " + ", ".join(f"--{m.replace('_', '-')}" for m in missing))
    except (UsageError, OSError) as exc:
        sub.print_usage(sys.stderr)
        print(f"{sub.prog}: error: {exc}", file=sys.stderr)
        return 2
    try:
        _emit(HANDLERS[key](ns))
    except UsageError as exc:
        sub.print_usage(sys.stderr)
        print(f"{sub.prog}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        log.debug("command failed", exc_info=True)
        print(f"{sub.prog}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
