import json
import math

import numpy as np
import pytest

from cwss.model import (
    SubbandPlan,
    default_paper_plan,
    generate_scene,
    noise_variance,
    scene_from_json,
    scene_to_json,
    synthesize_frames,
)
from cwss.correlate import analytic_nav, estimate_autocorr


def test_paper_plan_bands():
    plan = default_paper_plan(128)
    assert len(plan.subbands) == 8
    lo, hi, _ = plan.subbands[4]
    assert (lo, hi) == (231e6, 260e6)


def test_paper_plan_occupancy_fraction():
    plan = default_paper_plan(128)
    widths = sorted(plan.subband_ids, key=lambda q: plan.bins_for(q).size, reverse=True)
    frac = plan.occupancy_fraction(widths[:5])
    assert abs(frac - 0.14) < 0.01


def test_paper_plan_invariants():
    for n in (16, 32, 128, 256):
        plan = default_paper_plan(n)
        assert plan.grid_size == 2 * n
        seen = set()
        for q in plan.subband_ids:
            bins = plan.bins_for(q)
            assert bins.size >= 1
            assert not seen & set(bins.tolist())
            seen |= set(bins.tolist())
    with pytest.raises(ValueError):
        default_paper_plan(8)


def test_plan_rejects_overlap():
    with pytest.raises(ValueError):
        SubbandPlan(100e6, 32, ((0.0, 20e6, 0), (10e6, 30e6, 1)))


def test_scene_zero_active():
    plan = default_paper_plan(64)
    scene = generate_scene(plan, 0, 10.0, seed=1)
    assert not scene.true_psd.any()


def test_scene_all_active():
    plan = default_paper_plan(64)
    scene = generate_scene(plan, 8, 10.0, seed=1)
    assert scene.active_ids == plan.subband_ids
    mask = np.zeros(plan.grid_size, dtype=bool)
    for q in plan.subband_ids:
        mask[plan.bins_for(q)] = True
    assert (scene.true_psd[mask] > 0).all()
    assert not scene.true_psd[~mask].any()
    assert math.isclose(scene.true_psd.sum(), 1.0)


def test_scene_seeds_differ():
    plan = default_paper_plan(64)
    subsets = {generate_scene(plan, 5, 10.0, seed=s).active_ids for s in range(40)}
    assert len(subsets) > 10  # 56 possible subsets; collisions are rare


def test_scene_out_of_range():
    plan = default_paper_plan(64)
    with pytest.raises(ValueError):
        generate_scene(plan, 9, 10.0, seed=0)


def test_zero_scene_frames_are_pure_noise():
    plan = default_paper_plan(64)
    scene = generate_scene(plan, 0, 10.0, seed=3)
    sigma2 = noise_variance(scene)
    assert sigma2 == pytest.approx((1.0 / 64) / 10.0)
    frames = synthesize_frames(scene, 400, seed=5)
    x = np.concatenate([f.samples for f in frames])
    assert np.mean(np.abs(x) ** 2) == pytest.approx(sigma2, rel=0.05)


def test_frame_autocorr_converges_to_analytic():
    # noise off, 1e4 frames at N = 64: lag-domain law of large numbers
    plan = default_paper_plan(64)
    scene = generate_scene(plan, 5, float("inf"), seed=11)
    frames = synthesize_frames(scene, 10_000, seed=12)
    est = estimate_autocorr(frames, 64, estimator="unbiased").values
    ref = analytic_nav(scene).values
    rel = np.linalg.norm(est - ref) / np.linalg.norm(ref)
    assert rel < 0.05


def test_frames_deterministic():
    plan = default_paper_plan(32)
    scene = generate_scene(plan, 4, 10.0, seed=2)
    a = synthesize_frames(scene, 5, seed=9)
    b = synthesize_frames(scene, 5, seed=9)
    for fa, fb in zip(a, b):
        assert np.array_equal(fa.samples, fb.samples)


def test_parseval_consistency():
    plan = default_paper_plan(32)
    scene = generate_scene(plan, 5, float("inf"), seed=4)
    frames = synthesize_frames(scene, 1500, seed=6)
    energy = np.mean([np.sum(np.abs(f.samples) ** 2) for f in frames])
    assert energy == pytest.approx(scene.true_psd.sum(), rel=0.02)


def test_frames_zero_mean():
    plan = default_paper_plan(32)
    scene = generate_scene(plan, 5, 10.0, seed=7)
    n_frames = 2000
    frames = synthesize_frames(scene, n_frames, seed=8)
    x = np.concatenate([f.samples for f in frames])
    sigma = np.sqrt(np.mean(np.abs(x) ** 2))
    assert abs(x.mean()) < 5 * sigma / np.sqrt(n_frames * 32)


def test_scene_json_round_trip():
    plan = default_paper_plan(64)
    scene = generate_scene(plan, 5, 10.0, seed=21)
    text = scene_to_json(scene)
    keys = set(json.loads(text))
    assert {"bandwidth_hz", "n", "subbands", "active_ids", "snr_db", "seed"} <= keys
    back = scene_from_json(text)
    assert back.active_ids == scene.active_ids
    assert np.array_equal(back.true_psd, scene.true_psd)
    assert back.snr_db == scene.snr_db
