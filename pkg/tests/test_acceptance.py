"""Acceptance criteria, one test per criterion.

Each test records a single ``[ACCEPT n] PASS|FAIL ...`` line, printed in the
terminal summary, and then asserts.
"""

import csv
import math
import time

import numpy as np
import pytest

from dualflow import cli, diagnostics, flows, instances, linop, regularizers, tikhonov

SEEDS = (0, 1, 2, 3, 4)
DELTAS = (0.1, 0.01)
SLACK = 1.5


def elastic_instance(seed, delta):
    return instances.generate_sparse(200, 50, 5, "elastic", delta=delta, rho=1.0, seed=seed, alpha=1.0)


# -- 1 -----------------------------------------------------------------------

def test_criterion_1_adjoint_suite(announce):
    rng = np.random.default_rng(0)
    B = rng.standard_normal((30, 40))
    maps = {
        "dense": linop.dense(B),
        "identity": linop.identity(25),
        "conv1d": linop.conv1d([0.1, 0.2, 0.4, 0.2, 0.1], 64),
        "diff1d": linop.diff1d(50),
        "scaled": linop.scaled(-1.7, linop.dense(B)),
        "composed": linop.composed(linop.diff1d(30), linop.dense(B)),
    }
    t0 = time.perf_counter()
    worst = 0.0
    for A in maps.values():
        for _ in range(100):
            x = rng.standard_normal(A.in_dim)
            y = rng.standard_normal(A.out_dim)
            Ax, Aty = A.apply(x), A.adjoint(y)
            scale = max(np.linalg.norm(Ax) * np.linalg.norm(y), np.linalg.norm(x) * np.linalg.norm(Aty))
            worst = max(worst, abs(Ax @ y - x @ Aty) / scale)
    dt = time.perf_counter() - t0
    announce(1, worst <= 1e-10 and dt < 1.0,
             f"adjoint suite: {len(maps)} kinds x 100 pairs, worst rel err {worst:.2e} (<= 1e-10), {dt:.2f}s (< 1s)")


# -- 2 -----------------------------------------------------------------------

def _prox_obj(reg, tau, v, x):
    return reg.value(x) + float((x - v) @ (x - v)) / (2 * tau)


def _grid_argmin(fun, lo, hi):
    grid = np.linspace(lo, hi, 20001)
    for _ in range(3):
        i = int(np.argmin(fun(grid)))
        h = grid[1] - grid[0]
        grid = np.linspace(grid[i] - h, grid[i] + h, 2001)
    return grid[int(np.argmin(fun(grid)))]


def test_criterion_2_regularizer_suite(announce):
    rng = np.random.default_rng(1)
    p = 8
    regs = [regularizers.sq_l2(p), regularizers.l1(p), regularizers.l1(p, "scaled_sign", 0.5),
            regularizers.elastic(p, 1.0), regularizers.elastic(p, 0.2), regularizers.tv1d(p)]
    t0 = time.perf_counter()

    fy = 0.0
    for reg in regs:
        if not reg.has_selection:
            continue
        for _ in range(100):
            u = 2 * rng.standard_normal(p)
            if reg.kind == "l1":
                u = np.clip(u, -1, 1)
            fy = max(fy, abs(regularizers.fenchel_young_residual(reg, reg.conjugate_subgradient(u), u)))

    perturb = -math.inf
    for reg in regs:
        for tau in (0.2, 1.0, 3.0):
            v = 2 * rng.standard_normal(p)
            x = reg.prox(tau, v)
            best = _prox_obj(reg, tau, v, x)
            for scale in np.geomspace(1e-6, 1.0, 100):
                z = x + scale * rng.standard_normal(p)
                perturb = max(perturb, best - _prox_obj(reg, tau, v, z))

    grid_err = 0.0
    for reg in regs[1:5]:
        a = reg.alpha
        for tau in (0.5, 2.0):
            v = rng.uniform(-3, 3, size=p)
            x = reg.prox(tau, v)
            for vi, xi in zip(v, x):
                z = _grid_argmin(lambda z: np.abs(z) + 0.5 * a * z * z + (z - vi) ** 2 / (2 * tau), -4, 4)
                grid_err = max(grid_err, abs(xi - z))

    tv = regs[-1]
    v = np.repeat([0.0, 1.0], p // 2) + 0.3 * rng.standard_normal(p)
    x = tv.prox(0.4, v)
    best = _prox_obj(tv, 0.4, v, x)
    tv_worse = 0
    for i in range(1000):
        z = x + 10.0 ** rng.uniform(-6, 0) * rng.standard_normal(p) if i % 2 else rng.uniform(-2, 2, p)
        tv_worse += best > _prox_obj(tv, 0.4, v, z) + 1e-12
    dt = time.perf_counter() - t0

    ok = fy <= 1e-8 and perturb <= 1e-10 and grid_err <= 1e-6 and tv_worse == 0 and dt < 10
    announce(2, ok, f"regularizer suite: FY {fy:.1e} (<= 1e-8), prox vs perturbations {perturb:.1e} (<= 1e-10), "
                    f"grid oracle {grid_err:.1e} (<= 1e-6), TV beaten by {tv_worse}/1000 candidates, {dt:.2f}s (< 10s)")


# -- 3 -----------------------------------------------------------------------

def test_criterion_3_closed_form_sq_l2(announce):
    t0 = time.perf_counter()
    inst = instances.generate_l2(50, 20, delta=0.0, seed=0)
    M = inst.A.matrix()
    gamma = 0.5 / linop.norm_estimate(inst.A, iters=200) ** 2
    traj = flows.run(inst, flows.FlowConfig(gamma=gamma, horizon_t=1e4 * gamma))
    x_hat = flows.tail_average(traj, traj.t)
    flow_err = float(np.linalg.norm(x_hat - np.linalg.pinv(M) @ inst.f))

    noisy = instances.generate_l2(50, 20, delta=0.05, seed=0)
    grid = tikhonov.default_grid(noisy, 40)
    tik_err = 0.0
    for s in grid:
        direct = np.linalg.solve(np.eye(50) + s * M.T @ M, s * M.T @ noisy.f_delta)
        tik_err = max(tik_err, float(np.linalg.norm(tikhonov.solve_at(noisy, s) - direct)))
    dt = time.perf_counter() - t0
    announce(3, flow_err <= 1e-6 and tik_err <= 1e-7 and dt < 10,
             f"sq_l2 closed form: flow ||x_hat - A^+ f|| = {flow_err:.1e} (<= 1e-6) after {traj.k} steps, "
             f"Tikhonov vs linear solve {tik_err:.1e} (<= 1e-7) on {grid.size} points, {dt:.2f}s (< 10s)")


# -- 4, 5, 9 ---------------------------------------------------------------

def _certified_run(inst, gamma):
    t_star = flows.oracle_stop_time(inst)
    horizon = 2.0 * t_star
    pts = list(np.geomspace(gamma, horizon, 40))
    traj = flows.run(inst, flows.FlowConfig(gamma=gamma, horizon_t=horizon, checkpoints=pts))
    return traj, diagnostics.bound_report(traj, inst, slack=SLACK)


@pytest.fixture(scope="module")
def rate_runs():
    t0 = time.perf_counter()
    runs = []
    for delta in DELTAS:
        for seed in SEEDS:
            inst = elastic_instance(seed, delta)
            gamma = flows.default_gamma(inst)
            traj, rep = _certified_run(inst, gamma)
            runs.append((seed, delta, inst, gamma, traj, rep))
    return runs, time.perf_counter() - t0


RATE_BOUNDS = ("eq13", "eq14", "eq15")


def test_criterion_4_rate_bounds(rate_runs, announce):
    runs, dt = rate_runs
    t0 = time.perf_counter()
    n_checked = 0
    worst = {b: 0.0 for b in RATE_BOUNDS}
    unresolved = []
    refined = 0
    for seed, delta, inst, gamma, traj, rep in runs:
        checks = [c for c in rep.checks if c.bound in RATE_BOUNDS]
        n_checked += len(checks)
        for c in checks:
            worst[c.bound] = max(worst[c.bound], c.ratio)
        bad = [c for c in checks if not c.passed]
        if bad:
            # fidelity: violations at gamma must disappear at gamma / 2
            refined += 1
            _, rep2 = _certified_run(inst, gamma / 2)
            if any(not c.passed for c in rep2.checks if c.bound in RATE_BOUNDS):
                unresolved.append((seed, delta))
    dt += time.perf_counter() - t0
    ok = not unresolved and n_checked > 0 and dt < 60
    ratios = ", ".join(f"{b} {worst[b]:.3f}" for b in RATE_BOUNDS)
    announce(4, ok, f"rate bounds at slack {SLACK}: {len(runs)} runs, {n_checked} checks with t >= 10 gamma, "
                    f"worst measured/limit {ratios}; {refined} runs needed gamma/2, {len(unresolved)} unresolved; "
                    f"{dt:.1f}s (< 60s)")


def test_criterion_5_early_stopping(rate_runs, announce):
    runs, _ = rate_runs
    lines = []
    ok = True
    for seed, delta, inst, gamma, traj, rep in runs:
        t_star = flows.oracle_stop_time(inst)
        row = min(traj.rows, key=lambda r: abs(r.t - t_star))
        gap_b, feas_b = diagnostics.early_stopping_bounds(traj.c0, delta)
        ok &= row.lagrangian_gap_avg <= SLACK * gap_b and row.feas_gap_avg <= SLACK * feas_b
        lines.append((row.lagrangian_gap_avg / (SLACK * gap_b), row.feas_gap_avg / (SLACK * feas_b)))
    g = max(r[0] for r in lines)
    f = max(r[1] for r in lines)
    announce(5, ok, f"early stopping at t*: worst gap / (1.5*4*C0*delta) = {g:.3f}, "
                    f"worst feas / (1.5*sqrt(14)*delta) = {f:.3f} over {len(runs)} runs")


def test_criterion_9_dual_distance(rate_runs, announce):
    runs, _ = rate_runs
    worst = 0.0
    n = 0
    ok = True
    for seed, delta, inst, gamma, traj, rep in runs:
        for r in traj.rows:
            limit = traj.c0 + 1.1 * delta * r.t
            ok &= r.dual_dist <= limit
            worst = max(worst, r.dual_dist / limit)
            n += 1
    announce(9, ok, f"dual distance ||y_k - y_bar|| <= C0 + 1.1*delta*t_k at {n} checkpoints, worst ratio {worst:.3f}")


# -- 6 -----------------------------------------------------------------------

def test_criterion_6_tikhonov_bounds(announce):
    t0 = time.perf_counter()
    cases = [elastic_instance(s, 0.1) for s in SEEDS]
    cases += [instances.generate_sparse(200, 50, 5, "l1", delta=0.05, seed=s) for s in (0, 1)]
    worst = 0.0
    at_star = 0.0
    ok = True
    n = 0
    for inst in cases:
        ybar = float(np.linalg.norm(inst.certificate.y_bar))
        s_star = tikhonov.optimal_s(inst)
        grid = np.unique(np.append(tikhonov.default_grid(inst, 40), s_star))
        rows = tikhonov.path_rows(inst, tikhonov.solve_path(inst, grid))
        for r in rows:
            n += 1
            ok &= r["bregman_sum"] <= 1.05 * r["rhs_DsymTikh"] and r["feas_gap"] <= 1.05 * r["rhs_feasTikh"]
            worst = max(worst, r["bregman_sum"] / r["rhs_DsymTikh"], r["feas_gap"] / r["rhs_feasTikh"])
        r = rows[int(np.flatnonzero(grid == s_star)[0])]
        ok &= r["feas_gap"] <= 1.05 * 2 * inst.delta and r["bregman_sum"] <= 1.05 * ybar * inst.delta
        at_star = max(at_star, r["feas_gap"] / (2 * inst.delta), r["bregman_sum"] / (ybar * inst.delta))
    dt = time.perf_counter() - t0
    ok &= dt < 60
    announce(6, ok, f"Tikhonov path: {len(cases)} instances, {n} grid points, worst ratio {worst:.3f} (<= 1.05); "
                    f"at s*: worst ratio {at_star:.3f} (<= 1.05); {dt:.1f}s (< 60s)")


# -- 7 -----------------------------------------------------------------------

def test_criterion_7_delta_scaling(tmp_path, announce):
    t0 = time.perf_counter()
    out = tmp_path / "sweep.csv"
    code = cli.main(["sweep", "--deltas", "0.1,0.05,0.025,0.0125", "--kind", "sparse", "--p", "200",
                     "--d", "50", "--sparsity", "5", "--reg", "elastic", "--alpha", "1", "--seed", "1",
                     "--jobs", "4", "--out", str(out)])
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    dt = time.perf_counter() - t0
    ok = code == 0 and all(r["status"] == "ok" for r in rows)
    gaps = np.array([float(r["lagrangian_gap"]) for r in rows])
    bounds = np.array([float(r["gap_bound"]) for r in rows])
    gap_ratio = gaps[1:] / gaps[:-1]
    bound_ratio = bounds[1:] / bounds[:-1]
    ok &= bool(np.all(np.diff(gaps) < 0))
    ok &= bool(np.all(bound_ratio == 0.5))
    ok &= bool(np.all((gap_ratio >= 0.2) & (gap_ratio <= 0.8)))
    ok &= dt < 120
    announce(7, ok, f"delta sweep 0.1 -> 0.0125: gaps {np.array2string(gaps, precision=4)}, "
                    f"measured halving ratios {np.array2string(gap_ratio, precision=3)} (in [0.2, 0.8]), "
                    f"bound ratios {bound_ratio.tolist()} (exactly 0.5), {dt:.1f}s (< 120s)")


# -- 8 -----------------------------------------------------------------------

def _max_lyapunov_increase(inst, gamma, t_max):
    cfg = flows.FlowConfig(gamma=gamma, horizon_t=t_max)
    traj = flows.init_trajectory(inst, cfg)
    v_prev = diagnostics.lyapunov_discrete(traj, inst)
    worst = 0.0
    for _ in range(traj.step_of(t_max)):
        flows.explicit_step(traj, inst, cfg)
        v = diagnostics.lyapunov_discrete(traj, inst)
        worst = max(worst, v - v_prev)
        v_prev = v
    return worst


def test_criterion_8_lyapunov(announce):
    t0 = time.perf_counter()
    inst = instances.generate_l2(50, 20, delta=0.0, seed=3)
    gamma = flows.default_gamma(inst)
    t_max = 20.0
    inc = _max_lyapunov_increase(inst, gamma, t_max)
    inc_half = _max_lyapunov_increase(inst, gamma / 2, t_max)
    dt = time.perf_counter() - t0
    ok = (inc_half <= 0.6 * inc and inc <= 10 * gamma * (1 + t_max)
          and inc_half <= 10 * (gamma / 2) * (1 + t_max) and dt < 30)
    announce(8, ok, f"discrete Lyapunov: max increase {inc:.3e} at gamma, {inc_half:.3e} at gamma/2 "
                    f"(ratio {inc_half / inc:.3f} <= 0.6), caps {10 * gamma * (1 + t_max):.3g}; {dt:.1f}s (< 30s)")


# -- 10 ----------------------------------------------------------------------

def test_criterion_10_determinism(tmp_path, announce):
    prob = tmp_path / "prob.json"
    assert cli.main(["generate", "--kind", "sparse", "--p", "200", "--d", "50", "--sparsity", "5",
                     "--reg", "elastic", "--delta", "0.01", "--seed", "42", "--out", str(prob)]) == 0
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert cli.main(["solve", "--problem", str(prob), "--method", "explicit", "--gamma", "auto",
                         "--stop", "oracle", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    tik = []
    for name in ("ta.csv", "tb.csv"):
        out = tmp_path / name
        assert cli.main(["solve", "--problem", str(prob), "--method", "tikhonov", "--grid-size", "10",
                         "--out", str(out)]) == 0
        tik.append(out.read_bytes())
    ok = outs[0] == outs[1] and tik[0] == tik[1]
    announce(10, ok, f"solve twice with identical flags: flow CSV byte-identical ({len(outs[0])} bytes), "
                     f"Tikhonov CSV byte-identical ({len(tik[0])} bytes)")
