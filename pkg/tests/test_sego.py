import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochego import oracles
from stochego.adaptive import AdaptiveConfig
from stochego.kriging import SearchBudget
from stochego.problems import branin_tilted, mean_1d, multimodal_1d
from stochego.sampling import DesignSpace
from stochego.sego import SegoConfig, denormalize, normalize, run

FAST = SearchBudget(particles=20, iterations=20)
D_STAR = oracles.grid_min(mean_1d, [0.0], [1.2], resolution=10_000)[0][0]


def test_normalize_examples():
    space = DesignSpace([-5.0, 0.0], [10.0, 15.0])
    assert np.allclose(normalize([-5.0, 0.0], space), 0)
    assert np.allclose(normalize([10.0, 15.0], space), 1)
    assert np.allclose(normalize([2.5, 7.5], space), 0.5)
    with pytest.raises(ValueError):
        normalize([11.0, 0.0], space)
    with pytest.raises(ValueError):
        denormalize([1.2, 0.0], space)


@given(st.floats(-5, 10), st.floats(0, 15))
@settings(max_examples=100, deadline=None)
def test_normalize_roundtrip(a, b):
    space = DesignSpace([-5.0, 0.0], [10.0, 15.0])
    back = denormalize(normalize([a, b], space), space)
    assert np.allclose(back, [a, b], rtol=0, atol=1e-12)


def test_budget_must_exceed_plan():
    with pytest.raises(ValueError):
        run(multimodal_1d(0.1), SegoConfig(nfe_budget=7))
    with pytest.raises(ValueError):
        SegoConfig(mode="constant", constant_target=1e-9)
    with pytest.raises(ValueError):
        SegoConfig(mode="greedy")


@pytest.mark.parametrize("mode,target", [("adaptive", 1e-3), ("constant", 1e-6)])
def test_deterministic_1d_finds_global_minimizer(mode, target):
    hits = 0
    for seed in range(20):
        rep = run(multimodal_1d(0.0), SegoConfig(nfe_budget=60, mode=mode, constant_target=target,
                                                 seed=seed))
        hits += abs(rep.best_design[0] - D_STAR) <= 0.02
    assert hits >= 16


@pytest.mark.parametrize("mode", ["adaptive", "constant"])
def test_run_contracts(mode):
    prob = multimodal_1d(0.3)
    cfg = SegoConfig(nfe_budget=80, mode=mode, constant_target=1e-2, search=FAST, seed=3)
    rep = run(prob, cfg)
    assert rep.nfe_used == prob.nfe <= 80
    plan, infills = rep.trace[:7], rep.trace[7:]
    assert all(r.iteration == 0 and r.n_r == 1 and r.lam == 1.0 for r in plan)
    assert len(infills) >= 1
    nfe = [r.nfe_cum for r in rep.trace]
    assert nfe == sorted(nfe)
    for r in rep.trace:
        assert 0.0 <= r.point[0] <= 1.2
    ad = cfg.adaptive
    for r in infills:
        if mode == "constant":
            assert r.lam == 1e-2
        else:
            assert r.lam == ad.sigma2_target or ad.sigma2_min <= r.lam <= ad.sigma2_target
    assert 0.0 <= rep.best_design[0] <= 1.2


def test_same_seed_same_report():
    a = run(multimodal_1d(0.3), SegoConfig(nfe_budget=60, search=FAST, seed=5)).to_dict()
    b = run(multimodal_1d(0.3), SegoConfig(nfe_budget=60, search=FAST, seed=5)).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_initial_plans_shared_across_modes():
    a = run(multimodal_1d(0.3), SegoConfig(nfe_budget=40, mode="adaptive", search=FAST, seed=9))
    b = run(multimodal_1d(0.3), SegoConfig(nfe_budget=40, mode="constant", search=FAST, seed=9))
    assert [(r.point, r.mean) for r in a.trace[:7]] == [(r.point, r.mean) for r in b.trace[:7]]


def test_final_incumbent_is_effective_best():
    prob = branin_tilted(0.05)
    rep = run(prob, SegoConfig(nfe_budget=60, search=FAST, seed=1))
    m = rep.final_model
    score = m.predict(m.X) + np.sqrt(m.mse(m.X, m.intrinsic))
    k = int(np.argmin(score))
    assert np.allclose(denormalize(m.X[k], prob.space), rep.best_design, rtol=0, atol=1e-12)
    assert np.all(score[k] <= score)


@pytest.mark.slow
def test_adaptive_beats_stalling_constant_target():
    exact = {"adaptive": [], "constant": []}
    for seed in range(20):
        for mode in exact:
            rep = run(multimodal_1d(0.3), SegoConfig(nfe_budget=150, mode=mode,
                                                     constant_target=1.0, seed=seed))
            exact[mode].append(float(mean_1d(rep.best_design)))
    assert np.mean(exact["adaptive"]) < np.mean(exact["constant"])
