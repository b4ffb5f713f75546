"""End-to-end sensing experiments: single runs, Monte Carlo sweeps, selftest.

Trial seeding is a pure function of (base seed, rate index, trial index), so
the two recovery methods always see the same scenes, sampling patterns, and
noise (paired comparison).  Reports are written deterministically: identical
configs give byte-identical report files for any worker count; wall-clock
timings go to a separate non-canonical sidecar.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from ._version import __version__
from .correlate import analytic_cav, estimate_cav, sensing_dictionary
from .detect import (
    TrialOutcome,
    aggregate_report,
    detection_event,
    false_alarm_event,
    wilson_interval,
)
from .model import SubbandPlan, WidebandScene, default_paper_plan, generate_scene, synthesize_frames
from .sampling import compress_frames, make_subsampling_matrix, rate_to_m
from .solve import SolverConfig, solve_lasso_cwss, solve_tvm_cwss
from .tvops import build_tv_operator

_SENSE_KEY = 65536  # spawn-key namespace separating sense runs from sweep trials

METHODS = ("lasso", "tvm")


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved parameters of a sensing experiment."""

    n: int = 128
    t_periods: int = 2
    n_active: int = 5
    snr_db: float = 10.0
    subsample_rates: tuple[float, ...] = (0.2, 0.4, 0.6, 0.8)
    trials: int = 200
    mu_factor: float = 0.05
    method: str = "both"
    seed: int = 0
    rate: float = 0.25
    frames_per_period: int = 128
    noise_off: bool = False
    exact_autocorr: bool = False
    designated_subband: int = 4
    cav_estimator: str = "gap"
    plan_file: str | None = None
    # desk-scale harness default: ordering decisions are stable well before
    # the solver's certificate-grade tolerances
    solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(primal_tol=1e-3, dual_tol=1e-3, max_iter=4000)
    )

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.mu_factor < 0:
            raise ValueError("mu_factor must be nonnegative")
        if self.method not in ("lasso", "tvm", "both"):
            raise ValueError("method must be lasso, tvm, or both")
        for r in tuple(self.subsample_rates) + (self.rate,):
            if not 0.0 < r <= 1.0:
                raise ValueError(f"sub-sampling rate {r} outside (0, 1]")
        if self.t_periods < 1:
            raise ValueError("t_periods must be >= 1")
        if self.frames_per_period < 1:
            raise ValueError("frames_per_period must be >= 1")
        object.__setattr__(self, "subsample_rates", tuple(float(r) for r in self.subsample_rates))

    @property
    def methods(self) -> tuple[str, ...]:
        return METHODS if self.method == "both" else (self.method,)

    def plan(self) -> SubbandPlan:
        if self.plan_file:
            plan = SubbandPlan.from_json_dict(json.loads(Path(self.plan_file).read_text()))
            if plan.nyquist_n != self.n:
                raise ValueError(f"plan file has N={plan.nyquist_n}, config has N={self.n}")
        else:
            plan = default_paper_plan(self.n)
        if self.designated_subband not in plan.subband_ids:
            raise ValueError(f"designated subband {self.designated_subband} not in the plan")
        return plan

    def effective_snr_db(self) -> float:
        return math.inf if self.noise_off else self.snr_db

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["subsample_rates"] = list(self.subsample_rates)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        solver = d.pop("solver", None)
        cfg = cls(**{k: (tuple(v) if k == "subsample_rates" else v) for k, v in d.items()})
        if solver is not None:
            cfg = replace(cfg, solver=SolverConfig(**solver))
        return cfg


@lru_cache(maxsize=8)
def _tv_operator(n2: int, t: int):
    return build_tv_operator(n2, t)


def _trial_seeds(base_seed: int, rate_index: int, trial_index: int) -> tuple[int, int, int]:
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(rate_index, trial_index))
    state = ss.generate_state(3)
    return int(state[0]), int(state[1]), int(state[2])


def measure_cav_columns(config: ExperimentConfig, scene: WidebandScene, phi, frame_seed: int) -> np.ndarray:
    """Per-period compressive autocorrelation estimates as a 2M x T matrix."""
    t = config.t_periods
    if config.exact_autocorr:
        col = analytic_cav(scene, phi, include_noise=not config.noise_off).values
        return np.tile(col[:, None], (1, t))
    f = config.frames_per_period
    frames = synthesize_frames(scene, t * f, frame_seed)
    cols = []
    for period in range(t):
        chunk = compress_frames(phi, frames[period * f : (period + 1) * f])
        cols.append(estimate_cav(phi, chunk, estimator=config.cav_estimator).values)
    return np.stack(cols, axis=1)


@dataclass
class MethodOutcome:
    method: str
    event: bool
    active: bool
    converged: bool
    iterations: int
    psd_error: float
    objective: float


@dataclass
class TrialRecord:
    rate_index: int
    trial_index: int
    outcomes: dict


def _normalized_magnitude(p: np.ndarray) -> np.ndarray:
    mag = np.abs(np.asarray(p, dtype=float))
    total = mag.sum()
    return mag / total if total > 0 else mag


def run_trial(config: ExperimentConfig, rate_index: int, trial_index: int, rate: float | None = None) -> TrialRecord:
    """One paired Monte Carlo trial: fresh scene, sampler, and noise."""
    plan = config.plan()
    if rate is None:
        rate = config.subsample_rates[rate_index]
    scene_seed, frame_seed, phi_seed = _trial_seeds(config.seed, rate_index, trial_index)
    scene = generate_scene(plan, config.n_active, config.effective_snr_db(), scene_seed)
    m = rate_to_m(rate, config.n)
    phi = make_subsampling_matrix(m, config.n, phi_seed)
    bundle = sensing_dictionary(phi)
    r_cols = measure_cav_columns(config, scene, phi, frame_seed)

    q = config.designated_subband
    active = q in scene.active_ids
    truth = _normalized_magnitude(scene.true_psd)
    outcomes = {}
    for method in config.methods:
        if method == "lasso":
            res = solve_lasso_cwss(bundle, r_cols[:, -1], config.solver, mu_factor=config.mu_factor)
            p_current = np.asarray(res.p_hat)
        else:
            v = _tv_operator(2 * config.n, config.t_periods)
            res = solve_tvm_cwss(bundle, v, r_cols, config.solver, mu_factor=config.mu_factor)
            p_current = np.asarray(res.p_hat)[:, -1]
        event = detection_event(p_current, scene, q) if active else false_alarm_event(p_current, scene, q)
        est = _normalized_magnitude(p_current)
        err = float(np.linalg.norm(est - truth) / np.linalg.norm(truth)) if truth.sum() > 0 else float("nan")
        outcomes[method] = MethodOutcome(
            method=method,
            event=event,
            active=active,
            converged=res.converged,
            iterations=res.iterations,
            psd_error=err,
            objective=res.objective,
        )
    return TrialRecord(rate_index=rate_index, trial_index=trial_index, outcomes=outcomes)


def _run_trial_task(args) -> TrialRecord:
    config, rate_index, trial_index = args
    return run_trial(config, rate_index, trial_index)


@dataclass
class RateMethodSummary:
    rate: float
    method: str
    p_f: float
    p_d: float
    pf_interval: tuple[float, float]
    pd_interval: tuple[float, float]
    n_h0: int
    n_h1: int
    fa_count: int
    det_count: int
    mean_psd_error: float
    mean_iterations: float
    non_converged: int

    def to_json_dict(self) -> dict:
        def clean(x):
            return None if isinstance(x, float) and math.isnan(x) else x

        return {
            "rate": self.rate,
            "method": self.method,
            "p_f": clean(self.p_f),
            "p_d": clean(self.p_d),
            "pf_ci": [clean(x) for x in self.pf_interval],
            "pd_ci": [clean(x) for x in self.pd_interval],
            "n_h0": self.n_h0,
            "n_h1": self.n_h1,
            "fa_count": self.fa_count,
            "det_count": self.det_count,
            "mean_psd_error": clean(self.mean_psd_error),
            "mean_iterations": self.mean_iterations,
            "non_converged": self.non_converged,
        }


def _summarize(config: ExperimentConfig, rate: float, method: str, records: list[TrialRecord]) -> RateMethodSummary:
    outcomes = [r.outcomes[method] for r in sorted(records, key=lambda r: r.trial_index)]
    q = config.designated_subband
    report = aggregate_report(
        [TrialOutcome(subband_id=q, active=o.active, event=o.event) for o in outcomes],
        l_trials=len(outcomes),
        subband_ids=(q,),
    )
    n_h0 = int(report.n_h0[0])
    n_h1 = int(report.n_h1[0])
    fa = int(report.tm_h1_given_h0[0])
    det = int(report.tm_h1_given_h1[0])
    errs = [o.psd_error for o in outcomes if not math.isnan(o.psd_error)]
    return RateMethodSummary(
        rate=rate,
        method=method,
        p_f=fa / n_h0 if n_h0 else float("nan"),
        p_d=det / n_h1 if n_h1 else float("nan"),
        pf_interval=wilson_interval(fa, n_h0),
        pd_interval=wilson_interval(det, n_h1),
        n_h0=n_h0,
        n_h1=n_h1,
        fa_count=fa,
        det_count=det,
        mean_psd_error=float(np.mean(errs)) if errs else float("nan"),
        mean_iterations=float(np.mean([o.iterations for o in outcomes])),
        non_converged=sum(1 for o in outcomes if not o.converged),
    )


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "n/a"
    return f"{x:.10g}"


MONTECARLO_CSV_HEADER = "rate,method,p_f,p_d,ci_low,ci_high\n"


def run_montecarlo(config: ExperimentConfig, out_dir, workers: int = 1, progress=None) -> dict:
    """Paired sweep over rates x methods.

    Writes ``montecarlo.csv`` (one aggregate row per rate and method; the
    interval columns are the Wilson 95% bounds on the detection ratio),
    ``report.json`` (full summaries plus the config echo), and a
    non-canonical ``run_meta.json`` with timings.  The two canonical files
    are byte-identical across reruns and worker counts.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config.plan()  # validate early
    csv_path = out / "montecarlo.csv"
    started = time.monotonic()
    summaries: list[RateMethodSummary] = []
    interrupted = False

    if workers < 1:
        raise ValueError("workers must be >= 1")
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        with open(csv_path, "w") as fh:
            fh.write(MONTECARLO_CSV_HEADER)
            fh.flush()
            for rate_index, rate in enumerate(config.subsample_rates):
                tasks = [(config, rate_index, t) for t in range(config.trials)]
                try:
                    if executor is None:
                        records = [_run_trial_task(t) for t in tasks]
                    else:
                        records = list(executor.map(_run_trial_task, tasks, chunksize=4))
                except KeyboardInterrupt:
                    interrupted = True
                    break
                for method in config.methods:
                    summary = _summarize(config, rate, method, records)
                    summaries.append(summary)
                    lo, hi = summary.pd_interval
                    fh.write(
                        f"{_fmt(rate)},{method},{_fmt(summary.p_f)},{_fmt(summary.p_d)},{_fmt(lo)},{_fmt(hi)}\n"
                    )
                    fh.flush()
                if progress is not None:
                    progress(rate_index + 1, len(config.subsample_rates))
    finally:
        if executor is not None:
            executor.shutdown(wait=False, cancel_futures=True)

    report = {
        "version": __version__,
        "config": config.to_json_dict(),
        "results": [s.to_json_dict() for s in summaries],
    }
    if not interrupted:
        (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    meta = {
        "wallclock_s": time.monotonic() - started,
        "interrupted": interrupted,
        "workers": workers,
    }
    (out / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if interrupted:
        raise KeyboardInterrupt
    return report


def run_sense(config: ExperimentConfig, out_dir) -> dict:
    """Single end-to-end run at ``config.rate``.

    Writes the true normalized PSD and one estimated PSD per method as
    (bin_hz, value) CSVs, plus ``sense.json`` with solver certificates and
    ordering decisions on the designated subband.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = config.plan()
    scene_seed, frame_seed, phi_seed = _trial_seeds(config.seed, _SENSE_KEY, 0)
    scene = generate_scene(plan, config.n_active, config.effective_snr_db(), scene_seed)
    m = rate_to_m(config.rate, config.n)
    phi = make_subsampling_matrix(m, config.n, phi_seed)
    bundle = sensing_dictionary(phi)
    r_cols = measure_cav_columns(config, scene, phi, frame_seed)

    freqs = plan.bin_frequencies_hz()

    def write_csv(name: str, values: np.ndarray):
        lines = ["bin_hz,value"]
        lines += [f"{_fmt(f)},{_fmt(v)}" for f, v in zip(freqs, values)]
        (out / name).write_text("\n".join(lines) + "\n")

    truth = _normalized_magnitude(scene.true_psd)
    write_csv("ground_truth.csv", truth)

    method_info = {}
    all_converged = True
    for method in config.methods:
        if method == "lasso":
            res = solve_lasso_cwss(bundle, r_cols[:, -1], config.solver, mu_factor=config.mu_factor)
            p_current = np.asarray(res.p_hat)
        else:
            v = _tv_operator(2 * config.n, config.t_periods)
            res = solve_tvm_cwss(bundle, v, r_cols, config.solver, mu_factor=config.mu_factor)
            p_current = np.asarray(res.p_hat)[:, -1]
        est = _normalized_magnitude(p_current)
        write_csv(f"estimate_{method}.csv", est)
        all_converged &= res.converged
        q = config.designated_subband
        active = q in scene.active_ids
        event = detection_event(p_current, scene, q) if active else false_alarm_event(p_current, scene, q)
        err = float(np.linalg.norm(est - truth) / np.linalg.norm(truth)) if truth.sum() > 0 else float("nan")
        method_info[method] = {
            "converged": res.converged,
            "iterations": res.iterations,
            "primal_residual": res.primal_residual,
            "dual_residual": res.dual_residual,
            "objective": res.objective,
            "constraint_residual": res.constraint_residual,
            "mu": res.mu,
            "designated_subband_active": active,
            "designated_subband_event": bool(event),
            "psd_error": err,
        }

    result = {
        "version": __version__,
        "config": config.to_json_dict(),
        "scene": {"active_ids": list(scene.active_ids), "seed": scene.seed},
        "rate": config.rate,
        "m": m,
        "methods": method_info,
        "all_converged": all_converged,
    }
    (out / "sense.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    return result
