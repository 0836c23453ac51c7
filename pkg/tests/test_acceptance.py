"""Acceptance criteria, one test each, at their stated tolerances and runtime budgets.

Run ``pytest tests/test_acceptance.py -v``; the terminal summary prints one
PASS/FAIL line per criterion. The end-to-end corpus fixture is shared by the
recovery, ranking and determinism criteria.
"""

import time

import numpy as np
import pytest

from conftest import grid_best, rastrigin, sphere, svr_surrogate
from valuedyn.core import BcmParams, EgoNetwork
from valuedyn.dynamics import GroupScheme, InteractionMode, _pair_update, bcm_pair_update, simulate
from valuedyn.io import SynthSpec, generate_synthetic
from valuedyn.labeling import label_sigma, label_sigma_oracle
from valuedyn.pipeline import RunConfig, run_pipeline
from valuedyn.pso import Dimension, PsoConfig, SearchSpace, optimize, svr_space
from valuedyn.regress import RegressorSpec, cross_validate, fit, fit_elasticnet, fit_gp, fit_svr, predict_raw


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


def note(request, **kw):
    for k, v in kw.items():
        request.node.user_properties.append((k, f"{v:.4g}" if isinstance(v, float) else v))


@pytest.mark.criterion("BCM gate suite")
def test_bcm_gate_suite(request):
    r = np.random.default_rng(2024)
    n = 100_000
    vi, vj = r.uniform(size=n), r.uniform(size=n)
    mu, sigma = r.uniform(1e-6, 0.5, size=n), r.uniform(0, 1, size=n)
    # hit the closed-gate boundary exactly on a slice of cases
    sigma[:1000] = np.abs(vj[:1000] - vi[:1000])
    with Timer() as t:
        out = np.array([bcm_pair_update(a, b, BcmParams(m, s))
                        for a, b, m, s in zip(vi[:1000], vj[:1000], mu[:1000], sigma[:1000])])
        out = np.concatenate([out, _pair_update(vi[1000:], vj[1000:], mu[1000:], sigma[1000:])])
    gap = np.abs(vj - vi)
    outside = gap > sigma
    failures = int(np.sum(outside & (out != vi)))
    inside = ~outside
    failures += int(np.sum(inside & ~np.isclose(np.abs(vj - out), (1 - mu) * gap, rtol=0, atol=1e-12)))
    failures += int(np.sum((out < 0) | (out > 1)))
    note(request, cases=n, failures=failures, seconds=t.seconds)
    assert failures == 0
    assert t.seconds < 1.0


@pytest.mark.criterion("Consensus (symmetric, sigma=1, mu=0.4, 6 users)")
def test_consensus(request):
    r = np.random.default_rng(7)
    worst_ratio, worst_drift = 0.0, 0.0
    with Timer() as t:
        for scheme in GroupScheme:
            net = EgoNetwork("ego", ("a", "b", "c", "d", "f"), r.uniform(size=(6, 1, 5)))
            traces = simulate(net, BcmParams(0.4, 1.0), InteractionMode.Symmetric, scheme, steps=50)
            spreads = np.array([tr.spread() for tr in traces])
            sums = np.array([tr.snapshot.sum(axis=0) for tr in traces])
            live = spreads[:-1] > 1e-12  # below this the ratio is rounding noise
            ratios = spreads[1:][live] / spreads[:-1][live]
            worst_ratio = max(worst_ratio, ratios.max())
            worst_drift = max(worst_drift, np.abs(np.diff(sums, axis=0)).max())
            # geometric: the bound r^t with the worst one-step ratio holds throughout
            bound = spreads[0] * ratios.max() ** np.arange(51)
            assert np.all(spreads <= bound * (1 + 1e-9) + 1e-15)
    note(request, max_step_ratio=worst_ratio, max_sum_drift=worst_drift, seconds=t.seconds)
    assert worst_ratio < 1.0
    assert worst_drift <= 1e-12
    assert t.seconds < 1.0


@pytest.mark.criterion("Labeling oracle equivalence")
def test_labeling_oracle(request):
    r = np.random.default_rng(99)
    delta = 0.01
    worst, n_checked, roundtrip_failures = 0.0, 0, 0
    with Timer() as t:
        for _ in range(10_000):
            vi, vj, vn = r.uniform(size=3)
            mu = r.uniform(0.01, 0.5)
            if vi == vj:
                continue
            a = label_sigma(vi, vj, vn, mu, delta)
            b = label_sigma_oracle(vi, vj, vn, mu, 1e-3)
            worst = max(worst, abs(a - b))
            n_checked += 1
            # noiseless interaction branch: relabel and replay
            vn_on = bcm_pair_update(vi, vj, BcmParams(mu, 1.0))
            lab = label_sigma(vi, vj, vn_on, mu, delta)
            if bcm_pair_update(vi, vj, BcmParams(mu, lab)) != vn_on:
                roundtrip_failures += 1
    note(request, tuples=n_checked, max_abs_diff=worst, roundtrip_failures=roundtrip_failures,
         seconds=t.seconds)
    assert worst <= 1e-3 + delta
    assert roundtrip_failures == 0
    assert t.seconds < 10.0


@pytest.mark.criterion("PSO sanity (sphere, Rastrigin)")
def test_pso_sanity(request):
    box = SearchSpace((Dimension("x", "continuous", -5, 5), Dimension("y", "continuous", -5, 5)))
    sph, ras, monotone = [], [], True
    with Timer() as t:
        for seed in range(10):
            cfg = PsoConfig(30, 100, seed=seed)
            for fn, sink in ((sphere, sph), (rastrigin, ras)):
                res = optimize(box, cfg, fn)
                sink.append(res.best_fitness)
                h = [g.best_fitness for g in res.history]
                monotone &= all(b <= a for a, b in zip(h, h[1:]))
    ras_ok = sum(v < 1.0 for v in ras)
    note(request, sphere_worst=max(sph), rastrigin_below_1=f"{ras_ok}/10", seconds=t.seconds)
    assert max(sph) < 1e-3
    assert ras_ok >= 8
    assert monotone
    assert t.seconds < 5.0


@pytest.mark.criterion("PSO vs grid oracle")
def test_pso_vs_grid(request):
    space = svr_space()
    with Timer() as t:
        grid = grid_best(space, svr_surrogate, resolution=0.05)
        best = [optimize(space, PsoConfig(10, 15, seed=s), svr_surrogate).best_fitness for s in range(10)]
    note(request, grid_best=grid, pso_worst=max(best), seconds=t.seconds)
    assert max(best) <= grid * 1.05
    assert t.seconds < 30.0


@pytest.mark.criterion("Regressor correctness")
def test_regressor_correctness(request):
    with Timer() as t:
        x = np.linspace(0, 1, 11)[:, None]
        svr = fit_svr(x, 2 * x[:, 0], RegressorSpec("svr", {"kernel": "linear", "C": 100, "epsilon": 0.01}))
        svr_err = np.max(np.abs(predict_raw(svr, x) - 2 * x[:, 0]))

        r = np.random.default_rng(3)
        X = r.normal(size=(80, 4))
        y = X @ np.array([0.5, -1.0, 2.0, 0.1]) + 0.3 + r.normal(0, 0.2, 80)
        en = fit_elasticnet(X, y, RegressorSpec("elasticnet", {"alpha": 0.0, "l1_ratio": 0.5, "tol": 1e-12}))
        A = np.column_stack([X, np.ones(len(X))])
        ols = A @ np.linalg.lstsq(A, y, rcond=None)[0]
        en_err = np.max(np.abs(predict_raw(en, X) - ols))

        Xg = r.uniform(size=(30, 4))
        yg = r.uniform(size=30)
        gp = fit_gp(Xg, yg, RegressorSpec("gp", {"alpha": 1e-10, "gamma": 1.0, "normalize_y": True}))
        gp_err = np.max(np.abs(predict_raw(gp, Xg) - yg))
    note(request, svr_max_err=svr_err, enet_vs_ols=en_err, gp_interp_err=gp_err, seconds=t.seconds)
    assert svr_err <= 0.02
    assert en_err <= 1e-6
    assert gp_err <= 1e-6
    assert t.seconds < 5.0


# --- end-to-end corpus --------------------------------------------------------------

E2E_SYNTH = SynthSpec(num_networks=50, alters_per_network=5, num_segments=20, true_mu=0.4,
                      true_sigma=(0.1, 0.9), noise=0.005, seed=1)


def _e2e_config(out):
    # documented defaults: mu 0.4, 10 particles x 15 generations, phi1 1.5, phi2 2.0
    return RunConfig(out=str(out), mu=0.4, pso=PsoConfig(10, 15, phi1=1.5, phi2=2.0), seed=0)


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    corpus = generate_synthetic(E2E_SYNTH)
    out = tmp_path_factory.mktemp("e2e")
    start = time.perf_counter()
    result = run_pipeline(_e2e_config(out), corpus.networks, corpus.next_segment)
    return corpus, result, time.perf_counter() - start


@pytest.mark.criterion("End-to-end sigma recovery")
def test_end_to_end(request, e2e):
    _, result, seconds = e2e
    m = result.metrics
    frac = m["forecast"]["all_egos"]["within_tolerance"]
    note(request, svr_test_mse=m["families"]["svr"]["test_mse"], forecast_within_0_02=frac,
         seconds=seconds)
    assert m["primary_family"] == "svr"
    assert m["families"]["svr"]["test_mse"] < 0.01
    assert frac >= 0.90
    assert seconds < 300


@pytest.mark.criterion("Qualitative model ranking (10-fold x 10 CV)")
def test_model_ranking(request, e2e):
    _, result, _ = e2e
    means = {}
    with Timer() as t:
        for fam in ("svr", "gp", "elasticnet", "ridge"):
            spec = result.tuned[fam].spec
            means[fam] = cross_validate(result.dataset, spec, folds=10, iterations=10, seed=0,
                                        max_samples=1000).mean
    note(request, **{f"{k}_cv_mse": v for k, v in means.items()}, seconds=t.seconds)
    assert all(means["svr"] <= means[f] for f in ("gp", "elasticnet", "ridge"))
    assert t.seconds < 600


@pytest.mark.criterion("Determinism")
def test_determinism(request, e2e, tmp_path):
    corpus, first, _ = e2e
    again = run_pipeline(_e2e_config(tmp_path), corpus.networks, corpus.next_segment)
    compared, differing = 0, []
    for key, path in first.artifacts.items():
        other = again.artifacts[key]
        compared += 1
        if path.read_bytes() != other.read_bytes():
            differing.append(path.name)
    note(request, artifacts_compared=compared, differing=len(differing))
    assert "metrics" in first.artifacts
    assert differing == []
