"""Per-subband occupancy decisions and Monte Carlo detection statistics.

Decisions work on per-bin magnitudes |p_hat| (the unconstrained solver may
return small negative values).  The ordering events compare entries of p_hat
against each other only, so they are invariant to positive rescaling:

* false alarm on an inactive subband q: some bin of q exceeds the smallest
  bin over all active subbands;
* detection of an active subband q: every bin of q exceeds the largest bin
  over all inactive subbands.

Ties count as no event (an all-zero estimate raises no alarm and detects
nothing).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import SubbandPlan, WidebandScene


@dataclass(frozen=True)
class OccupancyDecision:
    occupied: np.ndarray  # bool per subband, in plan order
    stats: np.ndarray  # mean |p_hat| per subband

    def __post_init__(self):
        object.__setattr__(self, "occupied", np.asarray(self.occupied, dtype=bool))
        object.__setattr__(self, "stats", np.asarray(self.stats, dtype=float))


def _band_magnitudes(p_hat: np.ndarray, plan: SubbandPlan) -> list[np.ndarray]:
    p = np.abs(np.asarray(p_hat).reshape(-1))
    if p.size != plan.grid_size:
        raise ValueError(f"p_hat length {p.size} != grid size {plan.grid_size}")
    return [p[plan.bins_for(q)] for q in plan.subband_ids]


def decide_occupancy(
    p_hat,
    plan: SubbandPlan,
    rule: str = "threshold",
    tau: float = 1.0,
    scene: WidebandScene | None = None,
) -> OccupancyDecision:
    """Declare each subband occupied or idle.

    threshold: occupied iff the subband's mean |p_hat| exceeds tau times the
        global mean over all grid bins.
    ordering: ground-truth-conditioned events (needs ``scene``): active
        subbands use the detection criterion, inactive ones the false-alarm
        criterion.
    """
    mags = _band_magnitudes(p_hat, plan)
    stats = np.array([m.mean() for m in mags])
    if rule == "threshold":
        global_mean = float(np.abs(np.asarray(p_hat).reshape(-1)).mean())
        occupied = stats > tau * global_mean
    elif rule == "ordering":
        if scene is None:
            raise ValueError("ordering rule needs the scene's ground truth")
        occupied = np.array(
            [
                detection_event(p_hat, scene, q) if q in scene.active_ids else false_alarm_event(p_hat, scene, q)
                for q in plan.subband_ids
            ]
        )
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return OccupancyDecision(occupied=occupied, stats=stats)


def false_alarm_event(p_hat, scene: WidebandScene, q: int) -> bool:
    """True iff the inactive subband q would be declared busy by ordering."""
    if q in scene.active_ids:
        raise ValueError(f"subband {q} is active; false alarm is undefined")
    if q not in scene.plan.subband_ids:
        raise ValueError(f"unknown subband {q}")
    if not scene.active_ids:
        raise ValueError("scene has no active subbands to compare against")
    p = np.abs(np.asarray(p_hat).reshape(-1))
    band_max = p[scene.plan.bins_for(q)].max()
    active_min = p[scene.active_bins()].min()
    return bool(band_max > active_min)


def detection_event(p_hat, scene: WidebandScene, q: int) -> bool:
    """True iff the active subband q dominates every inactive-subband bin."""
    if q not in scene.plan.subband_ids:
        raise ValueError(f"unknown subband {q}")
    if q not in scene.active_ids:
        raise ValueError(f"subband {q} is inactive; detection is undefined")
    inactive = scene.inactive_bins()
    if inactive.size == 0:
        raise ValueError("scene has no inactive subbands to compare against")
    p = np.abs(np.asarray(p_hat).reshape(-1))
    band_min = p[scene.plan.bins_for(q)].min()
    inactive_max = p[inactive].max()
    return bool(band_min > inactive_max)


@dataclass(frozen=True)
class TrialOutcome:
    """One subband's conditioned event in one Monte Carlo trial."""

    subband_id: int
    active: bool
    event: bool


@dataclass
class DetectionReport:
    """False-alarm and detection ratios per subband over L trials.

    Ratios divide by the per-condition trial counts; ``ratios(denominator=
    "total")`` reproduces the fixed-L variant.  Conditions with no trials
    report NaN, never 0/0.
    """

    subband_ids: tuple[int, ...]
    trials: int
    n_h0: np.ndarray  # trials with the subband inactive
    n_h1: np.ndarray  # trials with the subband active
    tm_h1_given_h0: np.ndarray  # false alarms
    tm_h1_given_h1: np.ndarray  # detections

    @property
    def p_f(self) -> np.ndarray:
        return self.ratios("condition")[0]

    @property
    def p_d(self) -> np.ndarray:
        return self.ratios("condition")[1]

    def ratios(self, denominator: str = "condition") -> tuple[np.ndarray, np.ndarray]:
        if denominator == "condition":
            den_f = self.n_h0
            den_d = self.n_h1
        elif denominator == "total":
            den_f = np.full(len(self.subband_ids), self.trials)
            den_d = np.full(len(self.subband_ids), self.trials)
        else:
            raise ValueError(f"unknown denominator {denominator!r}")
        with np.errstate(invalid="ignore", divide="ignore"):
            p_f = np.where(den_f > 0, self.tm_h1_given_h0 / np.maximum(den_f, 1), np.nan)
            p_d = np.where(den_d > 0, self.tm_h1_given_h1 / np.maximum(den_d, 1), np.nan)
        return p_f, p_d

    def to_json_dict(self) -> dict:
        p_f, p_d = self.ratios()

        def clean(arr):
            return [None if np.isnan(x) else float(x) for x in arr]

        return {
            "subband_ids": list(self.subband_ids),
            "trials": self.trials,
            "n_h0": self.n_h0.tolist(),
            "n_h1": self.n_h1.tolist(),
            "tm_h1_given_h0": self.tm_h1_given_h0.tolist(),
            "tm_h1_given_h1": self.tm_h1_given_h1.tolist(),
            "p_f": clean(p_f),
            "p_d": clean(p_d),
        }

    def to_csv(self) -> str:
        """Rows (subband_id, condition, condition_count, event_count, ratio)."""
        p_f, p_d = self.ratios()
        lines = ["subband_id,condition,condition_count,event_count,ratio"]
        for i, q in enumerate(self.subband_ids):
            rf = "n/a" if np.isnan(p_f[i]) else f"{p_f[i]:.10g}"
            rd = "n/a" if np.isnan(p_d[i]) else f"{p_d[i]:.10g}"
            lines.append(f"{q},H0,{int(self.n_h0[i])},{int(self.tm_h1_given_h0[i])},{rf}")
            lines.append(f"{q},H1,{int(self.n_h1[i])},{int(self.tm_h1_given_h1[i])},{rd}")
        return "\n".join(lines) + "\n"


def aggregate_report(outcomes: list[TrialOutcome], l_trials: int, subband_ids=None) -> DetectionReport:
    """Reduce per-trial conditioned events into ratio estimates."""
    if l_trials < 1:
        raise ValueError("l_trials must be >= 1")
    if subband_ids is None:
        subband_ids = tuple(sorted({o.subband_id for o in outcomes}))
    subband_ids = tuple(subband_ids)
    index = {q: i for i, q in enumerate(subband_ids)}
    nq = len(subband_ids)
    n_h0 = np.zeros(nq, dtype=int)
    n_h1 = np.zeros(nq, dtype=int)
    fa = np.zeros(nq, dtype=int)
    det = np.zeros(nq, dtype=int)
    for o in outcomes:
        i = index[o.subband_id]
        if o.active:
            n_h1[i] += 1
            det[i] += int(o.event)
        else:
            n_h0[i] += 1
            fa[i] += int(o.event)
    return DetectionReport(
        subband_ids=subband_ids,
        trials=l_trials,
        n_h0=n_h0,
        n_h1=n_h1,
        tm_h1_given_h0=fa,
        tm_h1_given_h1=det,
    )


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (float("nan"), float("nan"))
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def report_to_json(report: DetectionReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True)
