"""Tikhonov regularization path ``u(s) = argmin J(u) + (s/2)||Au - f_delta||^2``.

This is the explicit-regularization baseline the early-stopped flow is
compared against. Each point is solved by accelerated proximal gradient,
warm-started along an ascending grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._proxgrad import penalized_lsq
from .diagnostics import bregman_div
from .errors import MissingCertificate, SolverStall, ZeroNoise
from .linop import norm_estimate
from .regularizers import fenchel_young_residual

__all__ = [
    "PATH_CSV_HEADER",
    "TikhonovPath",
    "solve_at",
    "solve_path",
    "optimal_s",
    "default_grid",
    "tikhonov_rhs",
    "path_rows",
]

PATH_CSV_HEADER = ["s", "feas_gap", "bregman_sum", "rhs_DsymTikh", "rhs_feasTikh", "inner_iters"]

TOL = 1e-8
MAX_ITER = 100_000


@dataclass
class TikhonovPath:
    s_grid: np.ndarray
    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    solver_residuals: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)


def _lipschitz(inst) -> float:
    return norm_estimate(inst.A, iters=200, seed=0) ** 2 * (1 + 1e-6)


def _solve(inst, s, warm_start, lip, tol=TOL, max_iter=MAX_ITER):
    if not s > 0:
        raise ValueError("s must be positive")
    res = penalized_lsq(inst.reg, inst.A, inst.f_delta, s, lip, x0=warm_start,
                        tol=tol, max_iter=max_iter)
    if not res.converged:
        raise SolverStall(f"Tikhonov solve at s={s:g}: residual {res.residual:.3g} > {tol:g} "
                          f"after {res.iters} iterations")
    return res


def solve_at(inst, s: float, warm_start=None, tol: float = TOL) -> np.ndarray:
    """Minimizer ``u(s)`` with gradient-mapping residual at most `tol`."""
    return _solve(inst, s, warm_start, _lipschitz(inst), tol).x


def solve_path(inst, s_grid, tol: float = TOL) -> TikhonovPath:
    s_grid = np.asarray(s_grid, dtype=np.float64)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must be strictly ascending")
    lip = _lipschitz(inst)
    path = TikhonovPath(s_grid=s_grid)
    u = None
    for s in s_grid:
        res = _solve(inst, s, u, lip, tol)
        u = res.x
        path.u.append(u)
        path.v.append(inst.A.apply(u) - inst.f_delta)
        path.solver_residuals.append(res.residual)
        path.inner_iters.append(res.iters)
    return path


def optimal_s(inst) -> float:
    """``||y_bar|| / delta``."""
    if inst.certificate is None:
        raise MissingCertificate("optimal_s needs a certificate")
    if inst.delta == 0:
        raise ZeroNoise("delta = 0: optimal penalty is unbounded")
    return float(np.linalg.norm(inst.certificate.y_bar)) / inst.delta


def default_grid(inst, n: int = 40) -> np.ndarray:
    """``n`` log-spaced points over two decades either side of a reference scale.

    The reference is ``s* = ||y_bar||/delta`` when available, otherwise
    ``1/delta`` capped at 1e6.
    """
    if inst.certificate is not None and inst.delta > 0 and np.any(inst.certificate.y_bar):
        center = optimal_s(inst)
    else:
        center = min(1.0 / (inst.delta + 1e-12), 1e6)
    return np.geomspace(center / 100.0, center * 100.0, n)


def tikhonov_rhs(ybar_norm: float, delta: float, s: float) -> tuple[float, float]:
    """Bounds on the symmetric Bregman sum and on ``||Au(s) - f||``."""
    return (ybar_norm + s * delta) ** 2 / (4.0 * s), ybar_norm / s + delta


def bregman_sum(inst, s: float, u, v) -> float:
    """``D^{-A^T y_bar}(u, x_bar) + D^{-s A^T v}(x_bar, u)``."""
    c = inst.certificate
    if c is None:
        raise MissingCertificate("Bregman sum needs a certificate")
    A = inst.A
    return (bregman_div(inst.reg, -A.adjoint(c.y_bar), u, c.x_bar)
            + bregman_div(inst.reg, -s * A.adjoint(v), c.x_bar, u))


def optimality_residual(inst, s: float, u, v, tol: float = 1e-6) -> float:
    """Fenchel-Young residual of ``-s A^T v`` at ``u``."""
    return fenchel_young_residual(inst.reg, u, -s * inst.A.adjoint(v), tol=tol)


def path_rows(inst, path: TikhonovPath) -> list[dict]:
    """Rows for the path CSV (certificate-dependent columns left empty without one)."""
    rows = []
    c = inst.certificate
    for s, u, v, it in zip(path.s_grid, path.u, path.v, path.inner_iters):
        row = {
            "s": float(s),
            "feas_gap": float(np.linalg.norm(inst.A.apply(u) - inst.f)),
            "bregman_sum": None,
            "rhs_DsymTikh": None,
            "rhs_feasTikh": None,
            "inner_iters": int(it),
        }
        if c is not None:
            row["bregman_sum"] = bregman_sum(inst, s, u, v)
            row["rhs_DsymTikh"], row["rhs_feasTikh"] = tikhonov_rhs(
                float(np.linalg.norm(c.y_bar)), inst.delta, s)
        rows.append(row)
    return rows
