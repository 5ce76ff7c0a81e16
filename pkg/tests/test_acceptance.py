"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; every tolerance is pinned here, not configurable.
"""

import time

import numpy as np

from innofilt.diagnostics import DenseShadow
from innofilt.displacement import EvdGenerator
from innofilt.harness import ExperimentConfig, bench_scaling, compare_fast_slow
from innofilt.model import (
    coefficient_impulse_response,
    draw_invertible_coefficient,
    simulate,
    solve_stein,
)
from innofilt.plr import plr_init, plr_step, plr_step_aposteriori, plr_step_direct
from innofilt.srdf import (
    advance_from_generator,
    compute_w,
    estimated_impulse_response,
    gamma_of,
    rho_covariance,
    srdf_init_exact,
    srdf_init_tib_fast,
    srdf_step,
    srdf_step_aposteriori,
)
from innofilt.tib import gramian_series, tib_from_eigenvalues, verify_tib

from conftest import crandn, random_eigs


def _report(num, desc, ok, detail):
    print(f"\n[ACCEPTANCE {num:02d}] {'PASS' if ok else 'FAIL'} {desc} ({detail})")
    assert ok, f"criterion {num}: {desc}: {detail}"


def _tib_dataset(seed, n, T, kappa=2.0, sigma=1.0, radius=0.85):
    rng = np.random.default_rng(seed)
    tib = tib_from_eigenvalues(random_eigs(rng, n, radius=radius), kappa=kappa, sigma2=sigma**2)
    c_true = draw_invertible_coefficient(rng, tib.A, tib.b)
    eps = sigma * crandn(rng, T)
    ts, _ = simulate(tib.to_model(c_true), eps)
    return tib, c_true, ts.samples


def test_criterion_01_fast_slow_equivalence():
    started = time.monotonic()
    delta, T = 0.99, 500
    tib, _, y = _tib_dataset(seed=101, n=8, T=T)
    P0 = rho_covariance(tib.A, tib.b, 1.0, delta)
    fast, _ = srdf_init_exact(tib.to_model(np.zeros(8)), P0, delta)
    dense = plr_init(tib.A, tib.b, P0, delta=delta)
    worst = 0.0
    for t in range(T):
        e_f = srdf_step(fast, y[t])
        e_d = plr_step(dense, y[t])
        worst = max(worst, abs(e_f - e_d) / (1.0 + abs(e_d)))
    h_f = estimated_impulse_response(fast, 20)
    h_d = coefficient_impulse_response(tib.to_model(np.zeros(8)), dense.chat, 20)
    h_dev = float(np.max(np.abs(h_f - h_d)))
    elapsed = time.monotonic() - started
    _report(1, "fast/slow equivalence (n=8, T=500, exact init)",
            worst <= 1e-8 and h_dev <= 1e-6 and elapsed <= 10.0,
            f"residual dev {worst:.3e} <= 1e-08, impulse dev {h_dev:.3e} <= 1e-06, "
            f"elapsed {elapsed:.2f}s <= 10s")


def test_criterion_02_displacement_identity():
    delta, T = 0.99, 100
    tib, _, y = _tib_dataset(seed=202, n=6, T=T)
    P0 = rho_covariance(tib.A, tib.b, 1.1, delta)
    state, _ = srdf_init_exact(tib.to_model(np.zeros(6)), P0, delta)
    shadow = DenseShadow(tib.to_model(np.zeros(6)), P0, delta)
    worst = 0.0
    for t in range(T):
        eps = srdf_step(state, y[t])
        shadow.step(eps)
        worst = max(worst, shadow.displacement_residual(state.gen))
    _report(2, "displacement identity on shadow-tracked run (n=6, T=100)",
            worst <= 1e-8, f"max residual {worst:.3e} <= 1e-08")


def test_criterion_03_rank_bound():
    delta, T = 0.99, 1000
    tib, _, y = _tib_dataset(seed=303, n=6, T=T)
    state = srdf_init_tib_fast(tib, rho=1.0, delta=delta)
    for t in range(T):
        srdf_step(state, y[t])
    worst = max(state.rank_trace)
    _report(3, "generator rank bound under prewindowed rank-one start (T=1000)",
            worst <= 5, f"max rank {worst} <= 5")


def test_criterion_04_tib_construction():
    rng = np.random.default_rng(404)
    n = 32
    kappa, sigma2 = 0.8, 1.0
    eigs = random_eigs(rng, n, radius=0.99, floor=0.02)
    worst_resid = 0.0
    for attempt in range(2):  # prescribed order, then a shuffled ordering
        order = np.arange(n) if attempt == 0 else rng.permutation(n)
        tib = tib_from_eigenvalues(eigs[order], kappa=kappa, sigma2=sigma2)
        worst_resid = max(worst_resid, verify_tib(tib.A, tib.b, tib.kappa))
        assert np.array_equal(np.diag(tib.A), eigs[order])
    P = solve_stein(tib.A, tib.b, sigma2=sigma2, tol=1e-11)
    stein_dev = float(np.linalg.norm(P - tib.r * np.eye(n), "fro") / (tib.r * np.sqrt(n)))
    G = gramian_series(tib.A, tib.b, tol=1e-11)
    gram_dev = float(np.linalg.norm(G * sigma2 - tib.r * np.eye(n), "fro"))
    _report(4, "TIB construction at n=32 (any ordering) + Gramian levels",
            worst_resid <= 1e-10 * n and stein_dev <= 1e-8 and gram_dev <= 1e-8,
            f"defining residual {worst_resid:.3e} <= {1e-10 * n:.1e}, "
            f"stein rel dev {stein_dev:.3e} <= 1e-08, gramian dev {gram_dev:.3e} <= 1e-08")


def test_criterion_05_advance_factorization():
    rng = np.random.default_rng(505)
    n, delta = 30, 0.97
    worst = 0.0
    phases_ok = True
    for k in (1, 2, 3, 4, 5):
        Q, _ = np.linalg.qr(crandn(rng, n, k))
        D = rng.uniform(0.1, 0.9, k) * rng.choice([-1.0, 1.0], k)
        gen = EvdGenerator(V=Q, D=D)
        phases = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
        adv = advance_from_generator(gen, delta, phases)
        dense = adv.to_dense()
        target = delta * (np.eye(n) - gen.reconstruct())
        worst = max(worst, float(np.linalg.norm(dense @ dense.conj().T - target, "fro")))
        assert np.linalg.norm(np.tril(dense, -1)) == 0.0
        diag = np.diag(dense)
        phases_ok = phases_ok and bool(np.max(np.abs(diag / np.abs(diag) - phases)) <= 1e-12)
    _report(5, "triangular advance factorization from mixed-sign generators (n=30, k<=5)",
            worst <= 1e-9 and phases_ok,
            f"max factorization residual {worst:.3e} <= 1e-09, diagonal phases pinned: {phases_ok}")


def test_criterion_06_w_and_gamma_properties():
    rng = np.random.default_rng(606)
    worst_w = 0.0
    worst_q = 0.0
    for n in (1, 2, 4, 8, 16):
        for _ in range(3):
            u = crandn(rng, n) * rng.uniform(0.2, 2.0)
            delta = rng.uniform(0.6, 1.0)
            W = compute_w(u, delta)
            Winv = W.inverse_dense()
            target = delta * np.eye(n) + np.outer(u, u.conj())
            worst_w = max(worst_w, float(np.linalg.norm(Winv @ Winv.conj().T - target, "fro")))
            g = gamma_of(u, delta)
            B = np.eye(n) - g * np.outer(u, u.conj())
            Q = np.sqrt(delta) * W.to_dense() @ np.linalg.inv(B)
            worst_q = max(worst_q, float(np.linalg.norm(Q.conj().T @ Q - np.eye(n), "fro")))
    _report(6, "square-root coordinate change and its polar split (n<=16)",
            worst_w <= 1e-11 and worst_q <= 1e-10,
            f"W inverse-equation residual {worst_w:.3e} <= 1e-11, "
            f"unitarity defect {worst_q:.3e} <= 1e-10")


def test_criterion_07_complexity_scaling():
    started = time.monotonic()
    report = bench_scaling([128, 256, 512, 1024], steps=200, delta=0.99, seed=7)
    elapsed = time.monotonic() - started
    fast_slope = report.slopes["srdf"]
    dense_slope = report.slopes["plr-dense"]
    speedup = report.speedup_at_largest
    _report(7, "per-step cost scaling over n in {128,256,512,1024}",
            fast_slope <= 1.35 and dense_slope >= 1.7 and speedup >= 5.0 and elapsed <= 120.0,
            f"fast slope {fast_slope:.3f} <= 1.35, dense slope {dense_slope:.3f} >= 1.7, "
            f"speedup at n=1024 {speedup:.1f}x >= 5x, elapsed {elapsed:.1f}s <= 120s")


def test_criterion_08_asymptotic_covariance_conditioning():
    delta = 0.99
    T = 2000
    kappa, sigma = 2.0, 1.0
    r = sigma**2 / kappa
    eigs = [0.9, 0.8 * np.exp(1j * np.pi / 6), 0.6 * np.exp(-1j * np.pi / 4), 0.3]
    tib = tib_from_eigenvalues(eigs, kappa=kappa, sigma2=sigma**2)
    diags = []
    for seed in range(20):
        rng = np.random.default_rng(8000 + seed)
        c_true = draw_invertible_coefficient(rng, tib.A, tib.b)
        eps = sigma * crandn(rng, T)
        ts, _ = simulate(tib.to_model(c_true), eps)
        st = plr_init(tib.A, tib.b, np.eye(4), delta=delta)
        for t in range(T):
            plr_step(st, ts.samples[t])
        diags.append(np.real(np.diag(st.Phat)))
    level = np.mean(diags, axis=0) * (1 - delta)
    worst = float(np.max(np.abs(level / r - 1.0)))
    _report(8, "asymptotic covariance level (n=4, 20 seeds, T=2000)",
            worst <= 0.15, f"max |mean diag (1-delta)/r - 1| = {worst:.3f} <= 0.15")


def test_criterion_09_sign_arbitration_regressions():
    delta, T = 0.98, 200
    tib, _, y = _tib_dataset(seed=909, n=5, T=T)
    P0 = rho_covariance(tib.A, tib.b, 1.0, delta)
    # coefficient-recursion sign: recursive vs fresh normal-equation solves
    st_r = plr_init(tib.A, tib.b, P0, delta=delta)
    st_d = plr_init(tib.A, tib.b, P0, delta=delta)
    worst_plr = 0.0
    for t in range(T):
        er = plr_step(st_r, y[t])
        ed = plr_step_direct(st_d, y[t])
        worst_plr = max(worst_plr, abs(er - ed) / (1.0 + abs(ed)))
    # a-posteriori variant signs: fast vs dense counterpart
    fast, _ = srdf_init_exact(tib.to_model(np.zeros(5)), P0, delta)
    dense = plr_init(tib.A, tib.b, P0, delta=delta)
    worst_post = 0.0
    for t in range(T):
        e_f = srdf_step_aposteriori(fast, y[t])
        e_d = plr_step_aposteriori(dense, y[t])
        worst_post = max(worst_post, abs(e_f - e_d) / (1.0 + abs(e_d)))
    _report(9, "sign arbitration: recursive-vs-direct and a-posteriori variants",
            worst_plr <= 1e-9 and worst_post <= 1e-8,
            f"recursive/direct dev {worst_plr:.3e} <= 1e-09, "
            f"a-posteriori dev {worst_post:.3e} <= 1e-08")


def test_criterion_10_fast_init_consistency():
    # delta = 1: the O(n) initializer is exactly the dense one
    T = 100
    tib, _, y = _tib_dataset(seed=111, n=5, T=T)
    fast = srdf_init_tib_fast(tib, rho=1.2, delta=1.0)
    P0 = rho_covariance(tib.A, tib.b, 1.2, 1.0)
    exact, _ = srdf_init_exact(tib.to_model(np.zeros(5)), P0, 1.0)
    worst_one = 0.0
    for t in range(T):
        e_f = srdf_step(fast, y[t])
        e_e = srdf_step(exact, y[t])
        worst_one = max(worst_one, abs(e_f - e_e) / (1.0 + abs(e_e)))
    # delta < 1: deviation is reported and scales like (1 - delta)
    delta = 0.99
    cfg = ExperimentConfig(n=4, T=300, delta=delta, rho=1.0, sigma=1.0, kappa=1.5,
                           seed=112, method="srdf", init="tib-fast", disk_radius=0.85)
    rep = compare_fast_slow(cfg)
    constant = rep.deviation_per_unit_forgetting
    _report(10, "fast TIB initialization consistency",
            worst_one <= 1e-9 and rep.eps_dev_max <= 100.0 * (1 - delta),
            f"delta=1 deviation {worst_one:.3e} <= 1e-09; delta=0.99 deviation "
            f"{rep.eps_dev_max:.3e} = {constant:.2f} x (1-delta), sanity ceiling 100 x (1-delta)")
