"""Discretizations of the dual subgradient flow.

The continuous system couples a dual trajectory ``y(t)`` with a primal
selection ``x(t) in dJ*(-A^T y(t))`` through ``y' = A x - f_delta``. Two
schemes are provided, both mapping step ``k`` to time ``t = k * gamma``:

``explicit``
    ``x_k = sel dJ*(-A^T y_k)``, ``y_{k+1} = y_k + gamma (A x_k - f_delta)``.
``bregman``
    ``x_{k+1} = argmin J(x) + gamma/2 ||Ax - (f_delta - y_k/gamma)||^2``, then
    the same dual update with ``x_{k+1}``; this is proximal point on the dual.

Runs report the tail average ``x_hat(T)`` of the primal iterates over the
window ``(T/2, T]`` at every checkpoint.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import diagnostics
from ._proxgrad import penalized_lsq
from .errors import InnerSolverStall, MissingCertificate, MissingSnapshot, Unsupported, ZeroNoise
from .linop import norm_estimate

__all__ = [
    "InnerSettings",
    "FlowConfig",
    "Trajectory",
    "default_gamma",
    "default_checkpoints",
    "init_trajectory",
    "explicit_step",
    "bregman_step",
    "tail_average",
    "oracle_stop_time",
    "discrepancy_reached",
    "discrepancy_stop",
    "run",
]

log = logging.getLogger(__name__)

METHODS = ("explicit", "bregman")
STOPS = ("fixed", "oracle", "discrepancy")


@dataclass(frozen=True)
class InnerSettings:
    """Accelerated proximal-gradient settings for the Bregman subproblem.

    The inner loop stops once the gradient-mapping norm is at most `tol`.
    """

    max_iter: int = 20_000
    tol: float = 1e-6


@dataclass(frozen=True)
class FlowConfig:
    method: str = "explicit"
    gamma: float = 1.0
    horizon_t: float = 1.0
    stop: str = "fixed"
    tau_dp: Optional[float] = None
    checkpoints: Optional[Sequence[float]] = None
    inner: InnerSettings = InnerSettings()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.stop not in STOPS:
            raise ValueError(f"stop must be one of {STOPS}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.horizon_t >= self.gamma:
            raise ValueError("horizon_t must be >= gamma")
        if self.stop == "discrepancy" and not (self.tau_dp is not None and self.tau_dp > 1):
            raise ValueError("discrepancy stop needs tau_dp > 1")


@dataclass
class Trajectory:
    """Mutable state of one run.

    ``x`` is always the primal point paired with ``y`` (``-A^T y`` is a
    subgradient of J at ``x``); ``Ax`` caches its image. ``cumsum`` is the
    running sum of every primal iterate that drove a dual update, and
    ``snapshots`` holds copies of it at the steps needed for tail averages.
    """

    gamma: float
    y: np.ndarray
    x: np.ndarray
    Ax: np.ndarray
    y0: np.ndarray
    c0: Optional[float]
    k: int = 0
    cumsum: np.ndarray = None
    snapshots: dict = field(default_factory=dict)
    checkpoint_steps: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    lyap_sums: np.ndarray = field(default_factory=lambda: np.zeros(4))
    stop_reason: str = ""
    lipschitz_A: Optional[float] = None
    inner_iters: int = 0

    @property
    def t(self) -> float:
        return self.k * self.gamma

    def step_of(self, T: float) -> int:
        return max(1, int(round(T / self.gamma)))


def default_gamma(inst, norm_A: Optional[float] = None) -> float:
    """``0.5 / ||A||^2``, scaled by ``mu`` when J is strongly convex with ``mu < 1``."""
    if norm_A is None:
        norm_A = norm_estimate(inst.A, iters=200, seed=0)
    gamma = 0.5 / norm_A ** 2
    mu = inst.reg.mu
    if 0 < mu < 1:
        warnings.warn(f"strong-convexity constant {mu:g} < 1: step size scaled by it", stacklevel=2)
        gamma *= mu
    return gamma


def default_checkpoints(gamma: float, horizon_t: float) -> list[float]:
    """``{gamma, 2 gamma, 4 gamma, ...}`` below the horizon, plus the horizon."""
    pts = []
    t = gamma
    while t < horizon_t * (1 - 1e-12):
        pts.append(t)
        t *= 2.0
    pts.append(horizon_t)
    return pts


def oracle_stop_time(inst, y0=None) -> float:
    """Early-stopping time ``||y0 - y_bar|| / delta``."""
    if inst.certificate is None:
        raise MissingCertificate("oracle stopping needs a certificate")
    if inst.delta == 0:
        raise ZeroNoise("delta = 0: no finite oracle stopping time; use a fixed horizon")
    y0 = np.zeros(inst.d) if y0 is None else np.asarray(y0, dtype=np.float64)
    return float(np.linalg.norm(y0 - inst.certificate.y_bar)) / inst.delta


def _record(traj):
    if traj.k in traj.snapshots:
        traj.snapshots[traj.k] = traj.cumsum.copy()


def init_trajectory(inst, cfg: FlowConfig, y0=None, checkpoints=None, lipschitz_A=None) -> Trajectory:
    """Initial state at ``t = 0`` with snapshot slots for `checkpoints` (times)."""
    if cfg.method == "explicit" and not inst.reg.has_selection:
        raise Unsupported(f"explicit scheme needs a conjugate-subgradient selection; "
                          f"{inst.reg.kind} supports only the bregman method")
    y = np.zeros(inst.d) if y0 is None else np.array(y0, dtype=np.float64)
    if inst.reg.has_selection:
        x = inst.reg.conjugate_subgradient(-inst.A.adjoint(y))
    else:
        # argmin J is a valid pairing for y = 0; otherwise only a warm start
        x = np.zeros(inst.p)
    c0 = None
    if inst.certificate is not None:
        c0 = float(np.linalg.norm(y - inst.certificate.y_bar))
    traj = Trajectory(gamma=cfg.gamma, y=y, x=x, Ax=inst.A.apply(x), y0=y.copy(), c0=c0,
                      cumsum=np.zeros(inst.p), lipschitz_A=lipschitz_A)
    pts = checkpoints if checkpoints is not None else (cfg.checkpoints or [cfg.gamma])
    steps = sorted({traj.step_of(T) for T in pts})
    traj.checkpoint_steps = steps
    for K in steps:
        traj.snapshots[K] = None
        traj.snapshots[K // 2] = None
    _record(traj)
    return traj


def _accumulate_lyapunov(traj, inst):
    c = inst.certificate
    if c is None:
        return
    feas = float(np.linalg.norm(traj.Ax - inst.f))
    t_k = traj.k * traj.gamma
    traj.lyap_sums += (
        t_k * feas * feas,
        float(np.linalg.norm(traj.y - c.y_bar)),
        t_k * feas,
        diagnostics.lagrangian_gap(inst, traj.x),
    )


def explicit_step(traj: Trajectory, inst, cfg: FlowConfig) -> Trajectory:
    """One forward step; the selection for the new dual point is computed eagerly."""
    _accumulate_lyapunov(traj, inst)
    traj.cumsum += traj.x
    traj.y = traj.y + cfg.gamma * (traj.Ax - inst.f_delta)
    traj.x = inst.reg.conjugate_subgradient(-inst.A.adjoint(traj.y))
    traj.Ax = inst.A.apply(traj.x)
    traj.k += 1
    _record(traj)
    return traj


def bregman_step(traj: Trajectory, inst, cfg: FlowConfig) -> Trajectory:
    """One implicit step, solving the primal subproblem warm-started at the current x."""
    if traj.lipschitz_A is None:
        traj.lipschitz_A = norm_estimate(inst.A, iters=200, seed=0) ** 2 * (1 + 1e-6)
    _accumulate_lyapunov(traj, inst)
    g = cfg.gamma
    b = inst.f_delta - traj.y / g
    res = penalized_lsq(inst.reg, inst.A, b, g, traj.lipschitz_A, x0=traj.x,
                        tol=cfg.inner.tol, max_iter=cfg.inner.max_iter)
    if not res.converged:
        raise InnerSolverStall(f"inner residual {res.residual:.3g} > {cfg.inner.tol:g} "
                               f"after {res.iters} iterations at step {traj.k + 1}")
    traj.inner_iters += res.iters
    traj.x = res.x
    traj.Ax = inst.A.apply(res.x)
    traj.y = traj.y + g * (traj.Ax - inst.f_delta)
    traj.cumsum += traj.x
    traj.k += 1
    _record(traj)
    return traj


def tail_average(traj: Trajectory, T: float) -> np.ndarray:
    """Mean of the primal iterates emitted in steps ``(K//2, K]``, ``K`` the step nearest ``T``."""
    K = traj.step_of(T)
    H = K // 2
    hi = traj.snapshots.get(K)
    lo = traj.snapshots.get(H)
    if hi is None or lo is None:
        raise MissingSnapshot(f"no cumulative-sum snapshot for checkpoint T={T:g} (steps {H}, {K})")
    return (hi - lo) / (K - H)


def discrepancy_reached(residual: float, delta: float, tau_dp: float) -> bool:
    if delta == 0:
        return residual <= 1e-12
    return residual <= tau_dp * delta


def discrepancy_stop(traj: Trajectory, inst, tau_dp: float) -> bool:
    """Discrepancy rule on the tail average at the current step (must be a checkpoint)."""
    x_hat = tail_average(traj, traj.t)
    r = float(np.linalg.norm(inst.A.apply(x_hat) - inst.f_delta))
    return discrepancy_reached(r, inst.delta, tau_dp)


def run(inst, cfg: FlowConfig, y0=None) -> Trajectory:
    """Iterate until the stopping rule fires or the horizon is reached.

    A diagnostics row is appended at every checkpoint. When the instance has
    a certificate and ``delta > 0``, the early-stopping time ``t*`` is added to
    the checkpoint grid; the ``oracle`` rule stops there.
    """
    horizon = cfg.horizon_t
    extra = []
    t_star = None
    if cfg.stop == "oracle":
        t_star = oracle_stop_time(inst, y0)
        horizon = min(horizon, max(t_star, cfg.gamma))
    elif inst.certificate is not None and inst.delta > 0:
        t_star = oracle_stop_time(inst, y0)
    if t_star is not None and t_star <= horizon:
        extra.append(max(t_star, cfg.gamma))

    if cfg.checkpoints is not None:
        pts = [T for T in cfg.checkpoints if T <= horizon] + [horizon]
    else:
        pts = default_checkpoints(cfg.gamma, horizon)
    pts = pts + extra

    lip = None
    if cfg.method == "bregman":
        lip = norm_estimate(inst.A, iters=200, seed=0) ** 2 * (1 + 1e-6)
    traj = init_trajectory(inst, cfg, y0, checkpoints=pts, lipschitz_A=lip)
    k_max = traj.step_of(horizon)
    step = explicit_step if cfg.method == "explicit" else bregman_step
    ck = set(traj.checkpoint_steps)

    while traj.k < k_max:
        step(traj, inst, cfg)
        if traj.k not in ck:
            continue
        x_hat = tail_average(traj, traj.t)
        row = diagnostics.make_row(traj, inst, x_hat)
        traj.rows.append(row)
        log.info("k=%d t=%.6g feas_avg=%.3e", row.k, row.t, row.feas_gap_avg)
        if cfg.stop == "discrepancy" and discrepancy_stop(traj, inst, cfg.tau_dp):
            traj.stop_reason = "discrepancy"
            return traj
    traj.stop_reason = "oracle" if cfg.stop == "oracle" else "horizon"
    return traj
