"""``cramer`` command-line entry point.

Exit codes: 0 success, 1 usage/config error, 2 numerical error, 3 failed
statistical gate.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from functools import partial

import numpy as np

from . import __version__
from .config import COMMANDS, RunConfig, make_config, parse_grid, read_config_file
from .constants import (CLOSED_FORM, MONTE_CARLO, EstimateWithCI, iglehart_identity_check, iglehart_terms, levy_constants,
                        rw_constants)
from .cpd import eta_tail_estimate, simulate_path
from .errors import CramerError, StatisticalGateError, UsageError
from .models import sample
from .roots import solve_gamma
from .rng import Stream
from .statkit import exponential_tail_fit, poisson_experiment, survival_curve, tail_fit
from .walks import excursions, reflect_and_summarize, sample_first_ladder

CSV_VERSION = 1
DEFAULT_GRID = [0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0]


def _num(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _entry(value, stderr=0.0, method=CLOSED_FORM, **extra):
    return {"value": _num(value), "stderr": _num(stderr), "method": method, **extra}


def _est(e: EstimateWithCI):
    return _entry(e.value, e.stderr, e.method, n=e.n)


class Result:
    def __init__(self):
        self.results: dict = {}
        self.notes: dict = {}
        self.header: list[str] = []
        self.rows: list[list] = []


def _fmt(v) -> str:
    v = _num(v)
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return str(v).lower()
    return repr(v) if isinstance(v, float) else str(v)


def _scalar_rows(res: Result):
    res.header = ["quantity", "value", "stderr", "method"]
    res.rows = [[k, e["value"], e["stderr"], e["method"]] for k, e in res.results.items()]


def cmd_gamma(cfg: RunConfig, model, mapper, res: Result):
    root = solve_gamma(model)
    res.results["gamma"] = _entry(root.gamma)
    res.results["residual"] = _entry(root.residual)
    res.notes.update(iterations=root.iterations, bracket=list(root.bracket), solver=root.method)
    _scalar_rows(res)


def cmd_constants(cfg, model, mapper, res):
    gamma = solve_gamma(model).gamma
    res.results["gamma"] = _entry(gamma)
    if model.is_walk:
        rc = rw_constants(model, gamma, cfg.budget, Stream(cfg.seed).child("constants"), mapper, cfg.step_cap)
        for name in ("C", "K", "alpha", "ladder_finite_prob", "m", "laplace_H1"):
            res.results[name] = _est(getattr(rc, name))
        res.notes.update(span=rc.span, lattice_corrected=rc.lattice_corrected, censored_fraction=rc.censored)
    else:
        lc = levy_constants(model, gamma)
        for name in ("beta", "m", "phi_at_gamma", "C_star", "K_star", "alpha_star"):
            res.results[name] = _entry(getattr(lc, name))
        res.notes.update(normalization=lc.normalization, ascending_normalization=lc.ascending_normalization,
                         beta_m_pair="canonical normalization; only beta/(gamma*m) is invariant")
    _scalar_rows(res)


def cmd_identity(cfg, model, mapper, res):
    worst = iglehart_identity_check(model, cfg.k_max)
    res.results["max_abs_residual"] = _entry(worst)
    res.header = ["k", "lhs", "rhs", "residual"]
    for k in range(cfg.k_max + 1):
        lhs, rhs = iglehart_terms(model.p, k)
        res.rows.append([k, lhs, rhs, lhs - rhs])


def cmd_simulate(cfg, model, mapper, res):
    if cfg.horizon is None:
        raise UsageError("simulate needs --horizon (steps for walks, time for cpd)")
    stream = Stream(cfg.seed).child("simulate")
    if model.is_walk:
        n = int(cfg.horizon)
        steps = sample(model, stream, n)
        ps = reflect_and_summarize(steps)
        ex = excursions(steps)
        res.results["max_segmental_score"] = _entry(ps.max_segmental_score, method=MONTE_CARLO)
        res.results["complete_excursions"] = _entry(len(ex), method=MONTE_CARLO)
        res.header = ["k", "step", "S", "I", "R"]
        res.rows = [[k, steps[k - 1] if k else 0.0, ps.partial_sums[k], ps.running_min[k], ps.reflected[k]]
                    for k in range(n + 1)]
    else:
        path = simulate_path(model, cfg.horizon, stream)
        res.results["local_time"] = _entry(path.local_time, method=MONTE_CARLO)
        res.results["time_at_minimum"] = _entry(path.time_at_minimum, method=MONTE_CARLO)
        res.results["complete_excursions"] = _entry(int(path.complete.sum()), method=MONTE_CARLO)
        hmax = float(path.height.max()) if path.height.size else 0.0
        res.results["max_excursion_height"] = _entry(hmax, method=MONTE_CARLO)
        res.header = ["time", "jump", "X", "I", "Y"]
        res.rows = [[t, j, x, i, x - i] for t, j, x, i in zip(path.times, path.sizes, path.x_after, path.i_after)]


def _walk_heights(cfg, model, mapper):
    return sample_first_ladder(model, Stream(cfg.seed).child("tail"), cfg.budget, cfg.step_cap, mapper)


def cmd_tail(cfg, model, mapper, res):
    gamma = solve_gamma(model).gamma
    grid = cfg.x_grid or DEFAULT_GRID
    if model.is_walk:
        lad = _walk_heights(cfg, model, mapper)
        s, _, _ = survival_curve(lad.h, grid)
        se = np.sqrt(s * (1 - s) / lad.n)
        res.header = ["x", "survival_hat", "stderr", "e_gamma_x_survival_hat"]
        res.rows = [[x, v, e, math.exp(gamma * x) * v] for x, v, e in zip(grid, s, se)]
        res.results["reps"] = _entry(lad.n, method=MONTE_CARLO)
        res.notes["censored_fraction"] = lad.censored_fraction
    else:
        horizon = cfg.horizon or 10**6
        est = eta_tail_estimate(model, gamma, grid, horizon, cfg.batches, Stream(cfg.seed), mapper)
        res.header = ["x", "eta_hat", "stderr", "e_gamma_x_eta_hat"]
        res.rows = [list(r) for r in zip(est.x, est.eta_hat, est.stderr, est.e_gamma_x_eta_hat)]
        res.results["local_time_rate"] = _entry(est.local_time_rate, est.local_time_rate_stderr, MONTE_CARLO)
        res.notes.update(straddling_excluded=est.straddling_excluded, normalization="L=-I",
                         bias_note="excursions open at a batch horizon are not counted")
    res.results["gamma"] = _entry(gamma)


def cmd_tail_fit(cfg, model, mapper, res):
    gamma = solve_gamma(model).gamma
    if model.is_walk:
        grid = cfg.x_grid or [4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0]
        lad = _walk_heights(cfg, model, mapper)
        fit = exponential_tail_fit(lad.h, grid)
        scale, scale_se = 1.0, 0.0
    else:
        grid = cfg.x_grid or [2.0, 4.0, 6.0, 8.0, 10.0]
        horizon = cfg.horizon or 10**6
        est = eta_tail_estimate(model, gamma, [0.0, *grid], horizon, cfg.batches, Stream(cfg.seed), mapper)
        scale, scale_se = est.eta_hat[0], est.stderr[0]
        cond = est.eta_hat[1:] / scale
        w = (est.eta_hat[1:] / est.stderr[1:]) ** 2
        fit = tail_fit(grid, cond, w)
    K = scale * math.exp(fit.intercept)
    res.results["slope"] = _entry(fit.slope, fit.slope_stderr, MONTE_CARLO)
    res.results["intercept"] = _entry(fit.intercept, fit.intercept_stderr, MONTE_CARLO)
    res.results["K_hat"] = _entry(K, K * math.hypot(fit.intercept_stderr, scale_se / scale), MONTE_CARLO)
    res.results["gamma"] = _entry(gamma)
    res.notes.update(points_used=fit.points_used, dropped=fit.dropped, x_grid=list(grid))
    _scalar_rows(res)


def cmd_poisson(cfg, model, mapper, res):
    if cfg.horizon is None:
        raise UsageError("poisson needs --horizon")
    if (cfg.lam is None) == (cfg.y is None):
        raise UsageError("poisson needs exactly one of --lambda and --y")
    rep = poisson_experiment(model, cfg.horizon, cfg.replications, Stream(cfg.seed), lambda_target=cfg.lam,
                             y=cfg.y, budget=cfg.budget, mapper=mapper)
    res.results["lambda_used"] = _entry(rep.lambda_used, method=CLOSED_FORM if rep.lambda_method == "oracle_exact"
                                        else "asymptotic")
    res.results["y_used"] = _entry(rep.y_used)
    res.results["mean_count"] = _entry(rep.mean_count, rep.mean_sigma, MONTE_CARLO)
    res.results["chi_square"] = _entry(rep.chi_square, method=MONTE_CARLO, dof=rep.dof)
    res.results["p_value"] = _entry(rep.p_value, method=MONTE_CARLO)
    res.results["tv_distance"] = _entry(rep.tv_distance, method=MONTE_CARLO)
    rc = rep.rate_check
    res.results[rc["quantity"]] = _entry(rc["value"], rc["stderr"], MONTE_CARLO, expected=_num(rc["expected"]))
    res.notes.update(lambda_method=rep.lambda_method, histogram={str(k): v for k, v in rep.histogram.items()},
                     constants=rep.constants, gates=rep.gates)
    res.header = ["replication", "count"]
    res.rows = [[i, int(c)] for i, c in enumerate(rep.counts)]
    if not rep.passed:
        res.gate_failure = [k for k, v in rep.gates.items() if not v]


HANDLERS = {
    "gamma": cmd_gamma, "constants": cmd_constants, "identity-check": cmd_identity,
    "simulate": cmd_simulate, "tail": cmd_tail, "tail-fit": cmd_tail_fit, "poisson": cmd_poisson,
}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return _num(obj)


def render(cfg: RunConfig, model, res: Result, elapsed: float) -> str:
    if cfg.format == "csv":
        lines = [f"# cramer-excursions csv v{CSV_VERSION} command={cfg.command} seed={cfg.seed}",
                 ",".join(res.header)]
        lines += [",".join(_fmt(v) for v in row) for row in res.rows]
        return "\n".join(lines) + "\n"
    report = {
        "config": {**cfg.resolved(), "model": model.params()},
        "seed": cfg.seed,
        "version": f"cramer-excursions {__version__}",
        "results": res.results,
        "notes": res.notes,
        "timings": {"wall_clock_s": None if cfg.reproducible else elapsed},
    }
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


@contextmanager
def worker_pool(workers: int):
    if workers == 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield partial(pool.map, chunksize=16)


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute one resolved configuration; returns ``(exit_code, output)``."""
    t0 = time.perf_counter()
    model = cfg.build_model()
    res = Result()
    with worker_pool(cfg.workers) as mapper:
        HANDLERS[cfg.command](cfg, model, mapper, res)
    out = render(cfg, model, res, time.perf_counter() - t0)
    failed = getattr(res, "gate_failure", None)
    return (StatisticalGateError.exit_code if failed else 0), out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--model", dest="kind", choices=["twopoint", "gaussian", "cpd", "brownian"])
    g.add_argument("--p", type=float)
    g.add_argument("--a-up", dest="a_up", type=float)
    g.add_argument("--a-down", dest="a_down", type=float)
    g.add_argument("--mu", type=float, help="gaussian: step mean; brownian: drift magnitude")
    g.add_argument("--sigma", type=float)
    g.add_argument("--c", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--nu", type=float)
    r = common.add_argument_group("run")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--budget", type=int)
    r.add_argument("--horizon", type=float)
    r.add_argument("--replications", type=int)
    r.add_argument("--batches", type=int)
    r.add_argument("--y", type=float)
    r.add_argument("--lambda", dest="lambda_", type=float)
    r.add_argument("--x-grid", dest="x_grid", type=parse_grid)
    r.add_argument("--k-max", dest="k_max", type=int)
    r.add_argument("--step-cap", dest="step_cap", type=int)
    r.add_argument("--out")
    r.add_argument("--format", choices=["csv", "json"])
    r.add_argument("--reproducible", action="store_const", const=True,
                   help="omit wall-clock timings so JSON reports are byte-identical across runs")
    r.add_argument("--config", help="INI file with [model] and [run] sections")

    parser = argparse.ArgumentParser(prog="cramer", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(argv: list[str] | None) -> RunConfig:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code == 0:
            raise
        raise UsageError("invalid command line") from None
    flag_model = {k: getattr(ns, k) for k in ("kind", "p", "a_up", "a_down", "mu", "sigma", "c", "rho", "nu")}
    flag_run = {k: getattr(ns, k) for k in ("seed", "workers", "budget", "horizon", "replications", "batches",
                                             "y", "x_grid", "k_max", "step_cap", "out", "format",
                                             "reproducible")}
    flag_run["lambda"] = ns.lambda_
    file_model, file_run = read_config_file(ns.config) if ns.config else ({}, {})
    return make_config(ns.command, file_model, file_run, flag_model, flag_run)


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = config_from_args(argv)
        code, out = run(cfg)
    except CramerError as exc:
        print(json.dumps({"code": exc.code, "message": str(exc)}), file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(json.dumps({"code": "UsageError", "message": str(exc)}), file=sys.stderr)
        return UsageError.exit_code
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
