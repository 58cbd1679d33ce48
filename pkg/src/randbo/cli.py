"""Configuration-driven experiment runner.

Commands:

* ``randbo run CONFIG [--out DIR] [--seed N] [--reps N] [--jobs N]
  [--overwrite]`` parses a config, executes the experiment, and writes
  trace CSVs, summary CSVs, bound-report JSON where applicable, and a
  manifest that (with the config and seed) determines every output byte.
* ``randbo check {lemma42, counterexample, bounds} [--quick]`` runs the
  built-in verification suites and exits 4 when a check fails.
* ``randbo profile-confidence CONFIG [--out DIR]`` tabulates each
  configured schedule's analytic mean and 2.5%/97.5% quantiles per
  iteration.

Exit codes: 0 success, 2 configuration error, 3 numerical error,
4 verification-check failure. The environment variable RANDBO_OUTPUT_ROOT
sets the default output root (default ``runs``).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, bench, confidence, gp
from .config import ExperimentConfig, parse_config, parse_text, serialize_config
from .engine import (
    AcquisitionSpec,
    FixedInstanceSampler,
    RunConfig,
    run_replications,
)
from .errors import ConfigurationError, NumericalError, RandboError
from .rng import substream

CHECK_FAILED = 4

# substream tags local to experiment orchestration
_ZETA_SEQUENCES = 100
_LEMMA_SWEEP = 101


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")


def write_trace_csv(path: Path, traces) -> None:
    """All replications' per-iteration records in one file."""
    dim = traces[0].selected_x.shape[1]
    header = (["rep", "t", "selected_index"] + [f"x{j}" for j in range(dim)]
              + ["zeta", "y", "mu", "sigma", "r_t", "R_t"])

    def rows():
        for rep, tr in enumerate(traces):
            for i in range(tr.horizon):
                yield ([rep, i + 1, int(tr.selected_index[i])]
                       + list(tr.selected_x[i])
                       + [tr.zeta_value[i], tr.observed_y[i], tr.mean_at_selection[i],
                          tr.sd_at_selection[i], tr.instantaneous_regret[i],
                          tr.cumulative_regret[i]])

    _write_csv(path, header, rows())


def write_summary_csv(path: Path, summary: analysis.RegretSummary) -> None:
    header = ["t", "mean_Rt", "stderr_Rt", "mean_simple", "stderr_simple"]

    def rows():
        for i in range(summary.horizon):
            yield [i + 1, summary.mean_cumulative_curve[i],
                   summary.stderr_cumulative_curve[i],
                   summary.mean_simple_curve[i], summary.stderr_simple_curve[i]]

    _write_csv(path, header, rows())


def write_bounds_json(path: Path, reports: list[analysis.BoundReport]) -> None:
    payload = [dataclasses.asdict(r) for r in reports]
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_manifest(path: Path, config: ExperimentConfig, outputs: list[str]) -> None:
    manifest = {
        "version": __version__,
        "kind": config.kind,
        "base_seed": config.base_seed,
        "config": {k: v for k, v in sorted(config.values.items()) if v is not None},
        "outputs": sorted(outputs),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Config -> engine objects
# ---------------------------------------------------------------------------


def build_kernel(config: ExperimentConfig, dim: int) -> gp.KernelSpec:
    ells = [float(v) for v in config["kernel.lengthscale"]]
    if len(ells) == 1:
        ells = ells * dim
    if len(ells) != dim:
        raise ConfigurationError(
            f"kernel.lengthscale has {len(ells)} entries for dimension {dim}"
        )
    return gp.KernelSpec(config["kernel.family"], np.array(ells),
                         config["kernel.signal_variance"])


def build_refit_grid(config: ExperimentConfig, dim: int):
    period = config.values.get("refit.period")
    if period is None:
        return None, None
    lengthscales = config.values.get("refit.lengthscales")
    if not lengthscales:
        raise ConfigurationError("refit.period requires refit.lengthscales")
    family = config["kernel.family"]
    grid = tuple(
        gp.KernelSpec.isotropic(family, float(ell), dim, float(sv))
        for sv in config["refit.signal_variances"]
        for ell in lengthscales
    )
    return period, grid


def build_algorithm(name: str, config: ExperimentConfig, domain_size: int,
                    dim: int) -> tuple[AcquisitionSpec, object]:
    """Map an algorithm name to (acquisition, schedule-or-None)."""
    features = AcquisitionSpec("ucb", config["acquisition.num_features"])
    if name == "gp_ucb":
        return features, confidence.DeterministicUcb(domain_size, config["gp_ucb.delta"])
    if name == "rgp_ucb":
        return features, confidence.GammaRandomized(domain_size, config["rgp_ucb.theta"])
    if name == "irgp_ucb":
        return features, confidence.ShiftedExpFinite(domain_size)
    if name == "irgp_ucb_high_prob":
        return features, confidence.ShiftedExpHighProb(
            domain_size, config["irgp_ucb_high_prob.delta"])
    if name == "irgp_ucb_continuous":
        return features, confidence.ShiftedExpContinuous(
            config["irgp_ucb_continuous.a"], config["irgp_ucb_continuous.b"],
            config["irgp_ucb_continuous.r"], dim)
    if name == "gp_ucb_heuristic":
        return features, confidence.HeuristicUcb(dim)
    if name == "irgp_ucb_heuristic":
        return features, confidence.HeuristicShiftedExp(dim)
    if name == "constant_ucb":
        return features, confidence.Constant(config["constant_ucb.value"])
    if name in ("ei", "ts", "pims"):
        return AcquisitionSpec(name, config["acquisition.num_features"]), None
    raise ConfigurationError(f"unknown algorithm {name!r}")


def _run_config_for(config: ExperimentConfig, name: str, domain_size: int,
                    dim: int, kernel, horizon: int | None = None) -> RunConfig:
    acquisition, schedule = build_algorithm(name, config, domain_size, dim)
    period, grid = build_refit_grid(config, dim)
    return RunConfig(
        kernel=kernel,
        horizon=horizon or config.horizon,
        acquisition=acquisition,
        schedule=schedule,
        noise_variance=config.noise_variance,
        initial_design=config["initial.count"],
        refit_period=period,
        refit_grid=grid,
    )


def _mean_realized_gain(traces, kernel, noise_variance: float) -> float:
    gains = [
        analysis.realized_information_gain(kernel, tr.selected_x, noise_variance)
        for tr in traces
    ]
    return float(np.mean(gains))


# ---------------------------------------------------------------------------
# Experiment kinds
# ---------------------------------------------------------------------------


def _run_grid_experiment(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    grid = bench.GridSpec.uniform(config["grid.low"], config["grid.high"],
                                  config["grid.count"], config["grid.dim"])
    dim = grid.dim
    kernel = build_kernel(config, dim)
    sampler = bench.SyntheticInstanceSampler(kernel, grid, config.noise_stddev)
    return _run_roster(config, out, sampler, kernel, domain_size=grid.size, dim=dim)


def _run_roster(config: ExperimentConfig, out: Path, sampler, kernel,
                domain_size: int, dim: int) -> tuple[list[str], int]:
    """Shared runner: every configured algorithm on one instance family."""
    outputs: list[str] = []
    reports: list[analysis.BoundReport] = []
    for name in config.algorithms:
        run_cfg = _run_config_for(config, name, domain_size, dim, kernel)
        traces = run_replications(sampler, run_cfg, config.n_reps,
                                  config.base_seed, config.n_jobs)
        summary = analysis.summarize_traces(traces)
        trace_file, summary_file = f"traces_{name}.csv", f"summary_{name}.csv"
        write_trace_csv(out / trace_file, traces)
        write_summary_csv(out / summary_file, summary)
        outputs += [trace_file, summary_file]

        if name == "irgp_ucb":
            gain = _mean_realized_gain(traces, kernel, config.noise_variance)
            value = analysis.bcr_bound_finite(summary.horizon, domain_size,
                                              config.noise_variance, gain)
            reports.append(analysis.BoundReport.compare(
                "expected_regret_bound_finite",
                {"T": summary.horizon, "domain_size": domain_size,
                 "noise_variance": config.noise_variance,
                 "gamma_realized_mean": gain},
                value, summary.mean_cumulative_regret))
        if name == "irgp_ucb_high_prob":
            delta = config["irgp_ucb_high_prob.delta"]
            exceed = 0
            for tr in traces:
                gain = analysis.realized_information_gain(
                    kernel, tr.selected_x, config.noise_variance)
                bound = analysis.high_prob_bound(tr.horizon, delta, domain_size,
                                                 config.noise_variance, gain)
                exceed += tr.cumulative_regret[-1] > bound
            frac = exceed / len(traces)
            reports.append(analysis.BoundReport(
                "anytime_regret_bound_coverage",
                {"T": config.horizon, "delta": delta, "domain_size": domain_size,
                 "n_reps": len(traces)},
                value=float(delta), target=frac, satisfied=bool(frac <= delta),
                slack=float(delta - frac)))
    if reports:
        write_bounds_json(out / "bounds.json", reports)
        outputs.append("bounds.json")
    return outputs, 0


def _run_conditional(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    grid = bench.GridSpec.uniform(config["grid.low"], config["grid.high"],
                                  config["grid.count"], config["grid.dim"])
    kernel = build_kernel(config, grid.dim)
    sampler = bench.SyntheticInstanceSampler(kernel, grid, config.noise_stddev)
    name = config.algorithms[0]
    run_cfg = _run_config_for(config, name, grid.size, grid.dim, kernel)
    if run_cfg.schedule is None or not confidence.is_randomized(run_cfg.schedule):
        raise ConfigurationError(
            "conditional_regret needs a randomized UCB algorithm to condition on"
        )

    shifted_exp = isinstance(run_cfg.schedule, (
        confidence.ShiftedExpFinite, confidence.ShiftedExpContinuous,
        confidence.ShiftedExpHighProb, confidence.HeuristicShiftedExp))

    outputs: list[str] = []
    cond_means = []
    for k in range(config["conditional.n_sequences"]):
        rng = substream(config.base_seed, _ZETA_SEQUENCES, k)
        zeta = np.array([
            confidence.next_confidence(run_cfg.schedule, t, rng).value
            for t in range(1, config.horizon + 1)
        ])
        summary = analysis.estimate_conditional_regret(
            sampler, run_cfg, zeta, config.n_reps, config.base_seed + k,
            config.n_jobs)
        cond_means.append(summary.mean_cumulative_regret)
        fname = f"summary_conditional_{k}.csv"
        write_summary_csv(out / fname, summary)
        outputs.append(fname)

    if shifted_exp:
        # deterministic shift at the final iteration: mean minus the 1/rate
        s_T = confidence.schedule_mean(run_cfg.schedule, config.horizon) - 2.0
        delta = config["conditional.delta"]
        gamma = analysis.greedy_information_gain(kernel, grid.points(), config.horizon,
                                                 config.noise_variance)
        value = analysis.conditional_bound_U(config.horizon, delta, s_T,
                                             config.noise_variance, gamma)
        report = analysis.BoundReport.compare(
            "conditional_regret_bound",
            {"T": config.horizon, "delta": delta, "s_T": s_T,
             "gamma_greedy": gamma, "n_sequences": len(cond_means)},
            value, float(np.max(cond_means)))
        write_bounds_json(out / "bounds.json", [report])
        outputs.append("bounds.json")
    return outputs, 0


def _run_benchmark(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    instance = bench.make_benchmark_instance(
        config["benchmark.name"], config.values.get("benchmark.dim"),
        config.noise_stddev, config["candidates.count"])
    dim = instance.metadata["dim"]
    kernel = build_kernel(config, dim)
    sampler = FixedInstanceSampler(instance)
    return _run_roster(config, out, sampler, kernel,
                       domain_size=config["candidates.count"], dim=dim)


def _run_tabular(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    _, instance = bench.ingest_tabular(config["tabular.path"], config["tabular.objective"])
    dim = instance.candidates.dim
    kernel = build_kernel(config, dim)
    sampler = FixedInstanceSampler(instance)
    return _run_roster(config, out, sampler, kernel,
                       domain_size=len(instance.candidates), dim=dim)


def _run_counterexample(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    sampler = analysis.counterexample_instance(config["counterexample.rho"])
    horizons = sorted(int(h) for h in config["counterexample.horizons"])
    if len(horizons) < 2:
        raise ConfigurationError("counterexample.horizons needs two horizons")
    t_short, t_long = horizons[0], horizons[-1]

    def run(schedule, label):
        cfg = RunConfig(kernel=sampler.kernel, horizon=t_long, schedule=schedule,
                        noise_variance=config.noise_variance)
        traces = run_replications(sampler, cfg, config.n_reps, config.base_seed,
                                  config.n_jobs)
        summary = analysis.summarize_traces(traces)
        write_summary_csv(out / f"summary_{label}.csv", summary)
        res = analysis.regret_slope_test(summary.at_horizon(t_short), summary)
        return f"summary_{label}.csv", {
            "label": label,
            "ratio": res.ratio,
            "verdict": res.verdict,
            "per_step_short": res.per_step_first,
            "per_step_long": res.per_step_second,
            "horizons": [t_short, t_long],
        }

    outputs: list[str] = []
    verdicts = []
    for c in config["counterexample.constants"]:
        fname, verdict = run(confidence.Constant(float(c)), f"constant_{c}")
        outputs.append(fname)
        verdicts.append(verdict)
    fname, verdict = run(confidence.ShiftedExpFinite(2), "irgp_ucb")
    outputs.append(fname)
    verdicts.append(verdict)

    (out / "slope_verdicts.json").write_text(
        json.dumps(verdicts, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    outputs.append("slope_verdicts.json")
    return outputs, 0


def _run_lemma_check(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    from .acquisition import CandidateSet

    rows = []
    all_hold = True
    families = ("squared_exponential", "matern52")
    for i in range(config["lemma.n_configs"]):
        rng = substream(config.base_seed, _LEMMA_SWEEP, i)
        m = int(rng.integers(2, config["lemma.max_grid"] + 1))
        n_data = int(rng.integers(0, config["lemma.max_data"] + 1))
        dim = int(rng.integers(1, 4))
        family = families[i % 2]
        kernel = gp.KernelSpec.isotropic(family, float(rng.uniform(0.1, 1.0)), dim)
        cands = CandidateSet(rng.random((m, dim)))
        if n_data:
            X = rng.random((n_data, dim))
            y = gp.sample_prior(kernel, X, rng) + rng.normal(
                0.0, config.noise_stddev, size=n_data)
            dataset = (X, y)
        else:
            dataset = None
        check = analysis.validate_optimum_bound(
            kernel, cands, dataset, config.noise_variance,
            config["lemma.n_mc"], rng)
        holds = check.holds()
        all_hold &= holds
        rows.append([i, m, n_data, family, dim, check.lhs, check.lhs_stderr,
                     check.rhs, check.rhs_stderr, "true" if holds else "false"])

    _write_csv(out / "lemma_check.csv",
               ["config_id", "domain_size", "n_data", "family", "dim",
                "lhs", "lhs_stderr", "rhs", "rhs_stderr", "holds"],
               rows)
    return ["lemma_check.csv"], 0 if all_hold else CHECK_FAILED


def _run_bound_sweep(config: ExperimentConfig, out: Path) -> tuple[list[str], int]:
    reports = []
    m = config["bounds.domain_size"]
    gamma = config["bounds.gamma"]
    s2 = config.noise_variance
    a, b, r = config["bounds.a"], config["bounds.b"], config["bounds.r"]
    d = config["bounds.dim"]
    for T in (int(t) for t in config["bounds.horizons"]):
        for delta in (float(x) for x in config["bounds.deltas"]):
            inputs = {"T": T, "delta": delta, "domain_size": m, "gamma": gamma,
                      "noise_variance": s2}
            reports.append(analysis.BoundReport(
                "expected_regret_bound_finite", inputs,
                analysis.bcr_bound_finite(T, m, s2, gamma)))
            reports.append(analysis.BoundReport(
                "expected_regret_bound_continuous",
                {**inputs, "a": a, "b": b, "r": r, "dim": d},
                analysis.bcr_bound_continuous(T, a, b, r, d, s2, gamma)))
            s_T = confidence.shift_finite(m)
            reports.append(analysis.BoundReport(
                "conditional_regret_bound", {**inputs, "s_T": s_T},
                analysis.conditional_bound_U(T, delta, s_T, s2, gamma)))
            reports.append(analysis.BoundReport(
                "anytime_regret_bound", inputs,
                analysis.high_prob_bound(T, delta, m, s2, gamma)))
            reports.append(analysis.BoundReport(
                "chi_square_upper_quantile", {"D": T, "delta": delta},
                analysis.laurent_bound(T, delta)))
    write_bounds_json(out / "bounds.json", reports)
    return ["bounds.json"], 0


RUNNERS = {
    "synthetic_bcr": _run_grid_experiment,
    "conditional_regret": _run_conditional,
    "benchmark": _run_benchmark,
    "tabular": _run_tabular,
    "counterexample": _run_counterexample,
    "lemma_check": _run_lemma_check,
    "bound_sweep": _run_bound_sweep,
}


# ---------------------------------------------------------------------------
# Confidence profiles
# ---------------------------------------------------------------------------


def emit_confidence_profile(labeled_schedules, horizon: int):
    """Rows of analytic schedule statistics per iteration.

    Each row holds, for every (label, schedule) pair, the mean confidence
    value and the 2.5%/97.5% quantiles (which collapse onto the value for
    deterministic schedules).
    """
    if horizon < 1:
        raise ConfigurationError("horizon must be >= 1")
    header = ["t"]
    for label, _ in labeled_schedules:
        header += [f"{label}_mean", f"{label}_q025", f"{label}_q975"]
    rows = []
    for t in range(1, horizon + 1):
        row = [t]
        for _, sched in labeled_schedules:
            row += [confidence.schedule_mean(sched, t),
                    confidence.schedule_quantile(sched, t, 0.025),
                    confidence.schedule_quantile(sched, t, 0.975)]
        rows.append(row)
    return header, rows


def _profile_outputs(config: ExperimentConfig, out: Path) -> list[str]:
    if config.kind == "counterexample":
        domain_size, dim = 2, 1
    elif config.kind == "benchmark":
        name = config.values.get("benchmark.name")
        default_dim = bench.BENCHMARKS[name].default_dim if name else 2
        domain_size = config["candidates.count"]
        dim = config.values.get("benchmark.dim") or default_dim
    else:
        domain_size = config["grid.count"] ** config["grid.dim"]
        dim = config["grid.dim"]
    labeled = []
    for name in config.algorithms:
        _, sched = build_algorithm(name, config, domain_size, dim)
        if sched is not None:
            labeled.append((name, sched))
    if not labeled:
        raise ConfigurationError("no UCB schedules among the configured algorithms")
    header, rows = emit_confidence_profile(labeled, config.horizon)
    _write_csv(out / "confidence_profile.csv", header, rows)
    return ["confidence_profile.csv"]


# ---------------------------------------------------------------------------
# Built-in verification suites (the `check` command)
# ---------------------------------------------------------------------------

LEMMA_CHECK_CONFIG = """
kind = lemma_check
lemma.n_configs = 50
lemma.n_mc = 100000
noise_variance = 0.01
noise_stddev = 0.1
"""

LEMMA_CHECK_QUICK = """
kind = lemma_check
lemma.n_configs = 10
lemma.n_mc = 20000
noise_variance = 0.01
noise_stddev = 0.1
"""

COUNTEREXAMPLE_CONFIG = """
kind = counterexample
n_reps = 500
counterexample.constants = 0.5, 1, 2
counterexample.horizons = 250, 1000
"""

COUNTEREXAMPLE_QUICK = """
kind = counterexample
n_reps = 80
counterexample.constants = 0.5, 1, 2
counterexample.horizons = 250, 1000
"""


def _check_lemma42(out: Path, quick: bool) -> int:
    config = parse_text(LEMMA_CHECK_QUICK if quick else LEMMA_CHECK_CONFIG)
    outputs, status = _run_lemma_check(config, out)
    table = (out / "lemma_check.csv").read_text(encoding="utf-8").splitlines()
    bad = [line for line in table[1:] if line.endswith("false")]
    print(f"optimum-bound sweep: {len(table) - 1} configurations, "
          f"{len(bad)} violations -> {'FAIL' if bad else 'PASS'}")
    return status


def _check_counterexample(out: Path, quick: bool) -> int:
    config = parse_text(COUNTEREXAMPLE_QUICK if quick else COUNTEREXAMPLE_CONFIG)
    _run_counterexample(config, out)
    verdicts = json.loads((out / "slope_verdicts.json").read_text(encoding="utf-8"))
    status = 0
    for v in verdicts:
        expected = (analysis.SUBLINEAR_CONSISTENT if v["label"] == "irgp_ucb"
                    else analysis.LINEAR_CONSISTENT)
        ok = v["verdict"] == expected
        status = status if ok else CHECK_FAILED
        print(f"{v['label']}: ratio={v['ratio']:.3f} verdict={v['verdict']} "
              f"(expected {expected}) -> {'PASS' if ok else 'FAIL'}")
    return status


def _check_bounds(out: Path, quick: bool) -> int:
    n_mc = 20000 if quick else 100000
    status = 0

    freq_one = analysis.noise_event_frequency(1, n_mc, 0)
    level = 0.8413447460685429
    ok = abs(freq_one - level) < 3 * math.sqrt(level * (1 - level) / n_mc)
    status = status if ok else CHECK_FAILED
    print(f"noise-event frequency T=1: {freq_one:.4f} vs {level:.4f} -> "
          f"{'PASS' if ok else 'FAIL'}")

    horizon = 200 if quick else 1000
    freq = analysis.noise_event_frequency(horizon, n_mc, 1)
    ok = freq >= 0.229
    status = status if ok else CHECK_FAILED
    print(f"noise-event frequency T={horizon}: {freq:.4f} >= 0.229 -> "
          f"{'PASS' if ok else 'FAIL'}")

    rng = np.random.default_rng(42)
    for D in (1, 10, 100):
        for delta in (0.01, 0.05, 0.2):
            exceed = np.mean(rng.chisquare(D, size=n_mc) > analysis.laurent_bound(D, delta))
            ok = exceed <= delta
            status = status if ok else CHECK_FAILED
            print(f"chi-square coverage D={D} delta={delta}: exceedance "
                  f"{exceed:.4f} -> {'PASS' if ok else 'FAIL'}")

    from scipy.stats import norm

    grid = np.arange(0.1, 5.05, 0.1)
    dominated = all(analysis.gaussian_tail_bound(float(c)) >= float(norm.sf(c)) for c in grid)
    status = status if dominated else CHECK_FAILED
    print(f"normal tail dominance on c in [0.1, 5]: -> {'PASS' if dominated else 'FAIL'}")
    return status


CHECKS = {
    "lemma42": _check_lemma42,
    "counterexample": _check_counterexample,
    "bounds": _check_bounds,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _resolve_out_dir(config: ExperimentConfig | None, out_flag: str | None,
                     default_name: str, force_overwrite: bool = False) -> Path:
    if out_flag:
        out = Path(out_flag)
    elif config is not None and config.values.get("output"):
        out = Path(config.values["output"])
    else:
        root = os.environ.get("RANDBO_OUTPUT_ROOT", "runs")
        out = Path(root) / default_name
    overwrite = force_overwrite or bool(config is not None and config.values.get("overwrite"))
    if out.exists() and any(out.iterdir()) and not overwrite:
        raise ConfigurationError(
            f"output directory {out} is not empty; pass --overwrite to reuse it"
        )
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    values = dict(config.values)
    if args.seed is not None:
        values["base_seed"] = args.seed
    if args.reps is not None:
        values["n_reps"] = args.reps
    if args.jobs is not None:
        values["n_jobs"] = args.jobs
    if args.overwrite:
        values["overwrite"] = True
    return ExperimentConfig(kind=config.kind, values=values)


def run_experiment(config: ExperimentConfig, out_dir) -> int:
    """Execute one experiment into ``out_dir``; returns the exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs, status = RUNNERS[config.kind](config, out)
    (out / "config.txt").write_text(serialize_config(config), encoding="utf-8")
    write_manifest(out / "manifest.json", config, outputs + ["config.txt"])
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="randbo",
        description="Randomized-confidence Bayesian optimization experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--reps", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=None)
    p_run.add_argument("--overwrite", action="store_true")

    p_check = sub.add_parser("check", help="run a built-in verification suite")
    p_check.add_argument("suite", choices=sorted(CHECKS))
    p_check.add_argument("--quick", action="store_true")
    p_check.add_argument("--out", default=None)

    p_prof = sub.add_parser("profile-confidence",
                            help="tabulate schedule means and quantiles")
    p_prof.add_argument("config", type=Path)
    p_prof.add_argument("--out", default=None)
    p_prof.add_argument("--overwrite", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            config = _apply_overrides(parse_config(args.config), args)
            out = _resolve_out_dir(config, args.out, args.config.stem)
            status = run_experiment(config, out)
            print(f"wrote {out} (exit {status})")
            return status
        if args.command == "check":
            out = _resolve_out_dir(None, args.out, f"check_{args.suite}",
                                   force_overwrite=True)
            status = CHECKS[args.suite](out, args.quick)
            return status
        config = parse_config(args.config)
        if args.overwrite:
            values = dict(config.values)
            values["overwrite"] = True
            config = ExperimentConfig(kind=config.kind, values=values)
        out = _resolve_out_dir(config, args.out, f"profile_{args.config.stem}")
        outputs = _profile_outputs(config, out)
        write_manifest(out / "manifest.json", config, outputs)
        print(f"wrote {out}")
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except RandboError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
