"""Accelerated proximal gradient for ``min_x J(x) + (s/2)*||Ax - b||^2``.

Shared by the Bregman inner step and the Tikhonov path. FISTA with the
gradient-based adaptive restart of O'Donoghue & Candes; optimality is measured
by the norm of the gradient mapping ``(x - prox(x - tau*grad(x))) / tau``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .linop import LinearMap
from .regularizers import Regularizer


class ProxGradResult(NamedTuple):
    x: np.ndarray
    residual: float
    iters: int
    converged: bool


def gradient_mapping(reg: Regularizer, A: LinearMap, b, s: float, tau: float, x) -> float:
    grad = s * A._adjoint(A._apply(x) - b)
    return float(np.linalg.norm(x - reg.prox(tau, x - tau * grad))) / tau


def penalized_lsq(
    reg: Regularizer,
    A: LinearMap,
    b,
    s: float,
    lipschitz_A: float,
    x0=None,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> ProxGradResult:
    """Minimize ``J(x) + (s/2)*||Ax - b||^2``.

    Parameters
    ----------
    reg : Regularizer
    A : LinearMap
    b : ndarray
        Target vector in the range space.
    s : float
        Positive weight of the quadratic term.
    lipschitz_A : float
        Upper bound on ``||A||^2``; the step is ``1 / (s * lipschitz_A)``.
    x0 : ndarray, optional
        Warm start (zeros if omitted).
    tol : float
        Target for the gradient-mapping norm.
    max_iter : int

    Returns
    -------
    ProxGradResult
        ``converged`` is False when `max_iter` was hit first; the caller
        decides which error to raise.
    """
    b = np.asarray(b, dtype=np.float64)
    tau = 1.0 / (s * lipschitz_A)
    x = np.zeros(A.in_dim) if x0 is None else np.array(x0, dtype=np.float64)
    z = x.copy()
    t = 1.0
    res = np.inf
    for it in range(1, max_iter + 1):
        grad = s * A._adjoint(A._apply(z) - b)
        x_new = reg.prox(tau, z - tau * grad)
        step = z - x_new
        if np.linalg.norm(step) <= tol * tau:
            # z itself is optimal to tolerance; confirm at the prox output
            res = gradient_mapping(reg, A, b, s, tau, x_new)
            if res <= tol:
                return ProxGradResult(x_new, res, it, True)
        if step @ (x_new - x) > 0.0:
            t = 1.0
            z = x_new.copy()
        else:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        x = x_new
    res = gradient_mapping(reg, A, b, s, tau, x)
    return ProxGradResult(x, res, max_iter, res <= tol)
