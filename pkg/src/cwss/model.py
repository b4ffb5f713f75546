"""Monitored-band layout, ground-truth scenes, and Nyquist-rate frame synthesis.

The monitored band [0, B) is divided into a 2N-bin frequency grid (N is the
frame length at the Nyquist rate; the autocorrelation of an N-sample frame
lives on a 2N-point lag/frequency grid).  A scene assigns a flat positive
power level to each active subband's bins and normalizes the total active
energy to 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Subbands of the 0-500 MHz reference layout, in Hz.
PAPER_BANDS_HZ = (
    (46e6, 50e6),
    (56e6, 60e6),
    (141e6, 150e6),
    (161e6, 170e6),
    (231e6, 260e6),
    (381e6, 400e6),
    (421e6, 425e6),
    (441e6, 445e6),
)
PAPER_BANDWIDTH_HZ = 500e6


@dataclass(frozen=True)
class SubbandPlan:
    """Layout of the monitored band on a 2N-bin frequency grid.

    Parameters
    ----------
    total_bandwidth_hz : float
        Width B of the monitored band [0, B).
    nyquist_n : int
        Frame length N at the Nyquist rate.  The grid has 2N bins of width
        B / (2N).
    subbands : tuple of (low_hz, high_hz, id)
        Disjoint subband intervals inside [0, B).
    """

    total_bandwidth_hz: float
    nyquist_n: int
    subbands: tuple[tuple[float, float, int], ...]
    # bin index ranges per subband id, derived in __post_init__
    _bins: dict[int, np.ndarray] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.total_bandwidth_hz <= 0:
            raise ValueError("total_bandwidth_hz must be positive")
        if self.nyquist_n < 1:
            raise ValueError("nyquist_n must be a positive integer")
        ids = [q for (_, _, q) in self.subbands]
        if len(set(ids)) != len(ids):
            raise ValueError("subband ids must be unique")
        prev_hi = None
        for lo, hi, _ in sorted(self.subbands):
            if not (0.0 <= lo < hi <= self.total_bandwidth_hz):
                raise ValueError(f"subband ({lo}, {hi}) outside [0, {self.total_bandwidth_hz})")
            if prev_hi is not None and lo < prev_hi:
                raise ValueError("subband intervals overlap")
            prev_hi = hi
        bins: dict[int, np.ndarray] = {}
        used = np.zeros(self.grid_size, dtype=bool)
        df = self.bin_width_hz
        for lo, hi, q in self.subbands:
            lo_bin = int(round(lo / df))
            hi_bin = max(int(round(hi / df)), lo_bin + 1)
            hi_bin = min(hi_bin, self.grid_size)
            lo_bin = min(lo_bin, hi_bin - 1)
            idx = np.arange(lo_bin, hi_bin)
            if idx.size < 1:
                raise ValueError(f"subband {q} covers no grid bin at N={self.nyquist_n}")
            if used[idx].any():
                raise ValueError(f"subband {q} shares grid bins with another subband; increase N")
            used[idx] = True
            bins[q] = idx
        object.__setattr__(self, "_bins", bins)

    @property
    def grid_size(self) -> int:
        return 2 * self.nyquist_n

    @property
    def bin_width_hz(self) -> float:
        return self.total_bandwidth_hz / self.grid_size

    @property
    def subband_ids(self) -> tuple[int, ...]:
        return tuple(q for (_, _, q) in self.subbands)

    def bins_for(self, subband_id: int) -> np.ndarray:
        """Grid-bin indices assigned to a subband."""
        return self._bins[subband_id]

    def bin_frequencies_hz(self) -> np.ndarray:
        """Lower edge frequency of every grid bin."""
        return np.arange(self.grid_size) * self.bin_width_hz

    def occupancy_fraction(self, ids) -> float:
        """Fraction of grid bins covered by the given subband ids."""
        n = sum(self.bins_for(q).size for q in ids)
        return n / self.grid_size

    def to_json_dict(self) -> dict:
        return {
            "bandwidth_hz": self.total_bandwidth_hz,
            "n": self.nyquist_n,
            "subbands": [[lo, hi, q] for (lo, hi, q) in self.subbands],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SubbandPlan":
        return cls(
            total_bandwidth_hz=float(d["bandwidth_hz"]),
            nyquist_n=int(d["n"]),
            subbands=tuple((float(lo), float(hi), int(q)) for lo, hi, q in d["subbands"]),
        )


def default_paper_plan(n: int = 128) -> SubbandPlan:
    """The 0-500 MHz reference layout with its eight subbands.

    Requires N >= 16 so every subband keeps at least one grid bin of its own.
    """
    if n < 16:
        raise ValueError("default_paper_plan needs n >= 16 to keep the eight subbands disjoint on the grid")
    bands = tuple((lo, hi, q) for q, (lo, hi) in enumerate(PAPER_BANDS_HZ))
    return SubbandPlan(PAPER_BANDWIDTH_HZ, n, bands)


@dataclass(frozen=True)
class WidebandScene:
    """Ground truth occupancy: active subbands and their flat PSD levels.

    ``true_psd`` has one entry per grid bin, is zero outside the active
    subbands' bins, and sums to 1 when any subband is active.
    """

    plan: SubbandPlan
    active_ids: tuple[int, ...]
    true_psd: np.ndarray
    snr_db: float
    seed: int | None = None

    def __post_init__(self):
        psd = np.asarray(self.true_psd, dtype=float)
        if psd.shape != (self.plan.grid_size,):
            raise ValueError("true_psd length must equal the grid size 2N")
        if (psd < 0).any():
            raise ValueError("true_psd must be nonnegative")
        mask = np.zeros(self.plan.grid_size, dtype=bool)
        for q in self.active_ids:
            mask[self.plan.bins_for(q)] = True
        if psd[~mask].any():
            raise ValueError("true_psd has energy outside the active subbands")
        total = psd.sum()
        if self.active_ids and not math.isclose(total, 1.0, rel_tol=1e-9):
            raise ValueError("active-band energy must be normalized to 1")
        object.__setattr__(self, "true_psd", psd)
        object.__setattr__(self, "active_ids", tuple(sorted(self.active_ids)))

    @property
    def inactive_ids(self) -> tuple[int, ...]:
        return tuple(q for q in self.plan.subband_ids if q not in self.active_ids)

    def active_bins(self) -> np.ndarray:
        if not self.active_ids:
            return np.empty(0, dtype=int)
        return np.concatenate([self.plan.bins_for(q) for q in self.active_ids])

    def inactive_bins(self) -> np.ndarray:
        if not self.inactive_ids:
            return np.empty(0, dtype=int)
        return np.concatenate([self.plan.bins_for(q) for q in self.inactive_ids])

    def to_json_dict(self) -> dict:
        d = self.plan.to_json_dict()
        d.update(
            {
                "active_ids": list(self.active_ids),
                "snr_db": self.snr_db,
                "seed": self.seed,
            }
        )
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "WidebandScene":
        plan = SubbandPlan.from_json_dict(d)
        seed = d.get("seed")
        if seed is None:
            raise ValueError("scene JSON needs the generating seed to rebuild PSD levels")
        scene = generate_scene(plan, len(d["active_ids"]), float(d["snr_db"]), int(seed))
        if tuple(sorted(int(q) for q in d["active_ids"])) != scene.active_ids:
            raise ValueError("scene JSON active_ids do not match the seed's draw")
        return scene


@dataclass(frozen=True)
class NyquistFrame:
    """One N-sample frame at the output of the full-rate sampler."""

    frame_index: int
    samples: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.ndim != 1:
            raise ValueError("samples must be a vector")
        if not np.isfinite(s).all():
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size


def generate_scene(plan: SubbandPlan, n_active: int, snr_db: float, seed: int) -> WidebandScene:
    """Draw a scene with ``n_active`` uniformly chosen active subbands.

    Each active subband gets a flat per-bin level with a random positive
    amplitude, then the whole PSD is normalized to unit total energy.
    Deterministic for a fixed seed.
    """
    ids = plan.subband_ids
    if not 0 <= n_active <= len(ids):
        raise ValueError(f"n_active must be in [0, {len(ids)}]")
    rng = np.random.default_rng(seed)
    active = tuple(sorted(rng.choice(len(ids), size=n_active, replace=False).tolist()))
    active_ids = tuple(ids[i] for i in active)
    psd = np.zeros(plan.grid_size)
    for q in active_ids:
        level = rng.uniform(0.5, 1.5)
        psd[plan.bins_for(q)] = level
    total = psd.sum()
    if total > 0:
        psd /= total
    return WidebandScene(plan=plan, active_ids=active_ids, true_psd=psd, snr_db=snr_db, seed=seed)


def noise_variance(scene: WidebandScene) -> float:
    """Per-sample complex noise variance for the scene's SNR.

    SNR is total signal power over total noise power per frame; an empty
    scene uses a unit signal reference.
    """
    if math.isinf(scene.snr_db):
        return 0.0
    total = scene.true_psd.sum()
    reference = total if total > 0 else 1.0
    signal_power = reference / scene.plan.nyquist_n  # per sample
    return signal_power / (10.0 ** (scene.snr_db / 10.0))


def analytic_autocorrelation(scene: WidebandScene, lags: np.ndarray, include_noise: bool = False) -> np.ndarray:
    """Exact process autocorrelation r(j) of the synthesized frames.

    r(j) = (1/N) * sum_l p[l] exp(2i pi j l / 2N); frames then carry total
    energy sum(p) per frame (Parseval).  With ``include_noise`` the white
    noise adds its variance at lag 0.
    """
    lags = np.asarray(lags)
    two_n = scene.plan.grid_size
    l = np.arange(two_n)
    phase = np.exp(2j * np.pi * np.outer(lags, l) / two_n)
    r = phase @ scene.true_psd / scene.plan.nyquist_n
    if include_noise:
        r = r + noise_variance(scene) * (lags == 0)
    return r


def synthesize_frames(scene: WidebandScene, n_frames: int, seed: int) -> list[NyquistFrame]:
    """Generate noisy Nyquist-rate frames with per-frame random phases.

    Each frame draws i.i.d. uniform phases on the active bins, so frames are
    zero-mean and wide-sense stationary, with autocorrelation given by
    :func:`analytic_autocorrelation`.  Complex white Gaussian noise is scaled
    to the scene's SNR.  Bit-identical for a fixed seed.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    n = scene.plan.nyquist_n
    two_n = scene.plan.grid_size
    rng = np.random.default_rng(seed)
    amp = np.sqrt(scene.true_psd)
    sigma2 = noise_variance(scene)
    frames = []
    for t in range(n_frames):
        phases = rng.uniform(0.0, 2.0 * np.pi, size=two_n)
        spectrum = amp * np.exp(1j * phases)
        # x[n] = (1/sqrt(N)) sum_l amp_l e^{i phase_l} e^{2i pi n l / 2N}
        x = np.fft.ifft(spectrum) * (two_n / np.sqrt(n))
        x = x[:n]
        if sigma2 > 0:
            noise = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            x = x + noise * np.sqrt(sigma2 / 2.0)
        frames.append(NyquistFrame(frame_index=t, samples=x))
    return frames


def frames_as_array(frames) -> np.ndarray:
    """Stack frames (or raw vectors) into a (n_frames, length) complex array."""
    rows = [f.samples if hasattr(f, "samples") else np.asarray(f, dtype=complex) for f in frames]
    if not rows:
        raise ValueError("no frames given")
    length = rows[0].size
    if any(r.size != length for r in rows):
        raise ValueError("frames have inconsistent lengths")
    return np.asarray(rows, dtype=complex)


def scene_to_json(scene: WidebandScene) -> str:
    return json.dumps(scene.to_json_dict(), indent=2, sort_keys=True)


def scene_from_json(text: str) -> WidebandScene:
    return WidebandScene.from_json_dict(json.loads(text))
