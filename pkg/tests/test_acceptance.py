"""End-to-end acceptance checks. Each test records one PASS/FAIL line for its criterion."""

import math
import time

import numpy as np

from cvmdi.errors import UnphysicalStateError
from cvmdi.experiments import ScenarioConfig, max_distance
from cvmdi.gaussian import diag_block_covariance, entropy_g, symplectic_eigenvalues
from cvmdi.keyrate import FiniteSizeParams, asymptotic_key_rate
from cvmdi.oracle import heterodyne_regression, oracle_report, propagate
from cvmdi.protocol import (
    ChannelParams,
    ModeMatchingSet,
    ProtocolParams,
    Scenario,
    covariance_matrix,
    optimal_excess_noise,
    scenario_covariance,
)
from cvmdi.temporal import gaussian_mode, mode_match


def config(topology, eta_A, eta_B, **kw):
    return ScenarioConfig(topology=topology, matching=ModeMatchingSet.symmetric(eta_A, eta_B), **kw)


def fmt(values):
    return ", ".join(f"{v:.3f}" for v in values)


def test_criterion_1_relay_at_bob_distances(record_criterion):
    expected = {(1.0, 1.0): 87.96, (0.95, 1.0): 86.83, (1.0, 0.95): 18.5, (0.95, 0.95): 17.38}
    t0 = time.perf_counter()
    got = {k: max_distance(config("charlie-at-bob", *k)) for k in expected}
    elapsed = time.perf_counter() - t0
    misses = {k: got[k] - v for k, v in expected.items() if abs(got[k] - v) > 0.1}
    ok = not misses and elapsed < 10.0
    detail = f"L_max = {fmt(got.values())} km vs {fmt(expected.values())} (+/-0.1), {elapsed:.2f} s"
    if misses:
        detail += "; off: " + ", ".join(f"{k}: {d:+.3f}" for k, d in misses.items())
    record_criterion(1, ok, detail)
    assert ok, detail


def _reduction_check(number, topology, ideal, mismatched, ratio, record):
    a = max_distance(config(topology, 1.0, 1.0))
    b = max_distance(config(topology, 0.95, 0.95))
    red = 100 * (1 - b / a)
    ok = abs(a - ideal) <= 0.1 and abs(b - mismatched) <= 0.1 and abs(red - ratio) <= 1.0
    detail = f"L_max = {a:.3f} / {b:.3f} km vs {ideal} / {mismatched}; reduction {red:.2f}% vs {ratio}%"
    record(number, ok, detail)
    assert ok, detail


def test_criterion_2_symmetric(record_criterion):
    _reduction_check(2, "symmetric", 7.04, 4.8, 31.8, record_criterion)


def test_criterion_3_charlie_at_alice(record_criterion):
    _reduction_check(3, "charlie-at-alice", 5.43, 3.49, 35.7, record_criterion)


def test_criterion_4_grid_points(record_criterion):
    def K(ea, eb):
        return asymptotic_key_rate(config("charlie-at-bob", ea, eb).scenario_at(15.0)).K

    k0 = K(1.0, 1.0)
    drop_A = 100 * (1 - K(0.95, 1.0) / k0)
    drop_B = 100 * (1 - K(1.0, 0.95) / k0)
    drop_small = 100 * (1 - K(1.0, 0.989) / k0)
    ok = abs(drop_A - 7.6) <= 1.0 and abs(drop_B - 83.8) <= 1.5 and drop_small > 20.0
    detail = (f"drop(eta_A=0.95) = {drop_A:.2f}% vs 7.6; drop(eta_B=0.95) = {drop_B:.2f}% vs 83.8; "
              f"drop(eta_B=0.989) = {drop_small:.2f}% > 20")
    record_criterion(4, ok, detail)
    assert ok, detail


def test_criterion_5_finite_size(record_criterion):
    fs = FiniteSizeParams(N=1e8)
    losses = {}
    for key in [(1.0, 1.0), (0.95, 1.0), (1.0, 0.95), (0.95, 0.95)]:
        c = config("charlie-at-bob", *key, finite_size=fs)
        losses[key] = max_distance(c) - max_distance(c, finite_size=True)
    ideal_B = [losses[(1.0, 1.0)], losses[(0.95, 1.0)]]
    mism_B = [losses[(1.0, 0.95)], losses[(0.95, 0.95)]]
    ok = all(15.0 <= x <= 23.0 for x in ideal_B) and all(0.0 <= x <= 1.0 for x in mism_B)
    detail = f"loss ideal-B = {fmt(ideal_B)} km (15-23); loss mismatched-B = {fmt(mism_B)} km (<= 1)"
    record_criterion(5, ok, detail)
    assert ok, detail


def test_criterion_6_oracle(record_criterion):
    rng = np.random.default_rng(20240601)
    spans = {"symmetric": 8.0, "charlie-at-alice": 6.0, "charlie-at-bob": 90.0}
    topologies = list(spans)
    t0 = time.perf_counter()
    worst, fails = 0.0, []
    for i in range(20):
        topo = topologies[i % 3]
        eta = rng.uniform(0.9, 1.0, 4)
        L = float(rng.uniform(0.0, spans[topo]))
        c = ScenarioConfig(topology=topo, matching=ModeMatchingSet(*eta))
        sc = c.scenario_at(L)
        gamma, _ = scenario_covariance(sc)
        rep = oracle_report(gamma, propagate(sc, shots=1_000_000, seed=1000 + i))
        worst = max(worst, rep.max_abs_z)
        if not rep.passed:
            fails.append(f"set {i} ({topo}, L={L:.2f}): {rep.worst_entry} z={rep.max_abs_z:.2f}")
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 60.0
    detail = f"20 sets x 1e6 shots, max |z| = {worst:.2f} (<= 4), {elapsed:.1f} s"
    if fails:
        detail += "; " + "; ".join(fails)
    record_criterion(6, ok, detail)
    assert ok, detail


def _single_mode(ch, pr):
    T = ch.eta_A * (pr.V_B - 1) / (ch.eta_B * (pr.V_B + 1))
    eps = ch.eps_A + (ch.eta_B * (ch.eps_B - 2) + 2) / ch.eta_A
    a = math.sqrt(T * (pr.V_A**2 - 1))
    return diag_block_covariance(pr.V_A, a, -a, T * (pr.V_A - 1) + 1 + T * eps, T * (pr.V_A - 1) + 1 + T * eps)


def test_criterion_7_properties(record_criterion):
    rng = np.random.default_rng(7)
    checks = {}

    reduction = []
    for _ in range(50):
        ch = ChannelParams(L_AC=rng.uniform(0, 80), L_BC=rng.uniform(0, 10), eps_A=rng.uniform(0, 0.02),
                           eps_B=rng.uniform(0, 0.02))
        pr = ProtocolParams(V_A=rng.uniform(2, 80), V_B=rng.uniform(2, 80))
        g = covariance_matrix(ch, ModeMatchingSet(), pr)
        reduction.append(np.max(np.abs(g - _single_mode(ch, pr)) / np.maximum(1, np.abs(g))))
    checks["single-mode reduction"] = max(reduction) < 1e-13

    inv = []
    for _ in range(50):
        g, _ = scenario_covariance(Scenario(ChannelParams(L_AC=rng.uniform(0, 60)),
                                            ModeMatchingSet(*rng.uniform(0.9, 1, 4))))
        th = rng.uniform(0, 2 * np.pi)
        r1, r2 = rng.uniform(-1, 1, 2)
        bs = np.block([[np.cos(th) * np.eye(2), np.sin(th) * np.eye(2)],
                       [-np.sin(th) * np.eye(2), np.cos(th) * np.eye(2)]])
        S = np.diag([np.exp(-r1), np.exp(r1), np.exp(-r2), np.exp(r2)]) @ bs
        inv.append(np.max(np.abs(symplectic_eigenvalues(S @ g @ S.T) - symplectic_eigenvalues(g))
                          / symplectic_eigenvalues(g)))
    checks["symplectic invariance"] = max(inv) < 1e-9

    mono = True
    for _ in range(50):
        ch = ChannelParams(L_AC=rng.uniform(0, 80), L_BC=rng.uniform(0, 10))
        etas = np.sort(rng.uniform(0.5, 1.0, 10))
        eps = [optimal_excess_noise(ch, e) for e in etas]
        mono &= all(a >= b for a, b in zip(eps, eps[1:]))
    checks["eps' monotone in eta_B"] = bool(mono)

    checks["g(1) = 0"] = entropy_g(1.0) == 0.0

    sc = Scenario(ChannelParams(L_AC=15.0), ModeMatchingSet(0.92, 0.97, 0.95, 0.93))
    rv, se, pred = heterodyne_regression(sc, shots=1_000_000, seed=11)
    checks["heterodyne regression"] = abs(rv - pred) < 3 * se

    eta = mode_match(gaussian_mode(1.0, span=60.0, n=6001), gaussian_mode(2.0, span=60.0, n=6001))
    checks["Gaussian overlap 0.8"] = abs(eta - 0.8) <= 1e-6

    try:
        symplectic_eigenvalues(diag_block_covariance(40.0, 39.98, -39.98, 35.0, 35.0))
        checks["unphysical detection"] = False
    except UnphysicalStateError:
        checks["unphysical detection"] = True

    ok = all(checks.values())
    detail = "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items())
    record_criterion(7, ok, detail)
    assert ok, detail
