"""Convex regularizers J and the pieces of convex analysis the solvers need.

The catalogue is fixed: ``sq_l2`` (J = 0.5*||x||^2), ``l1``, ``elastic``
(J = ||x||_1 + alpha/2*||x||^2) and ``tv1d`` (J = ||Dx||_1, D forward
differences). Each exposes the value, the Fenchel conjugate value, a single
element of the conjugate subdifferential, and the proximal map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainViolation, NonPositiveStep, Unsupported

__all__ = [
    "DOMAIN_TOL",
    "INF",
    "Regularizer",
    "sq_l2",
    "l1",
    "elastic",
    "tv1d",
    "soft_threshold",
    "tv1d_prox",
    "fenchel_young_residual",
    "from_dict",
]

DOMAIN_TOL = 1e-9
INF = math.inf

KINDS = ("sq_l2", "l1", "elastic", "tv1d")
SELECTIONS = ("minimal_norm", "scaled_sign")


def soft_threshold(v, tau):
    """Componentwise ``sign(v) * max(|v| - tau, 0)``."""
    return np.sign(v) * np.maximum(np.abs(v) - tau, 0.0)


def tv1d_prox(v, lam: float) -> np.ndarray:
    """Exact solution of ``min_x 0.5*||x - v||^2 + lam * sum_i |x[i+1] - x[i]|``.

    Direct (non-iterative) method of L. Condat, "A direct algorithm for 1D
    total variation denoising", IEEE SPL 2013. It tracks the admissible range
    ``[vmin, vmax]`` of the current segment value together with the running
    dual variable and emits a segment whenever the range becomes empty.
    Worst case O(n^2), linear in practice.
    """
    y = np.asarray(v, dtype=np.float64)
    n = y.size
    x = np.empty(n)
    if n == 0:
        return x
    if lam <= 0.0 or n == 1:
        x[:] = y
        return x
    k = k0 = 0
    kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    twolam = 2.0 * lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                # vmin too high: negative jump
                x[k0:kminus + 1] = vmin
                k0 = kminus + 1
                k = kminus = k0
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                # vmax too low: positive jump
                x[k0:kplus + 1] = vmax
                k0 = kplus + 1
                k = kplus = k0
                vmax = y[k]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0:k + 1] = vmin
                return x
        umin += y[k + 1] - vmin
        if umin < -lam:
            x[k0:kminus + 1] = vmin
            k0 = kminus + 1
            k = kplus = kminus = k0
            vmin = y[k]
            vmax = vmin + twolam
            umin, umax = lam, -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            x[k0:kplus + 1] = vmax
            k0 = kplus + 1
            k = kplus = kminus = k0
            vmax = y[k]
            vmin = vmax - twolam
            umin, umax = lam, -lam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = -lam


@dataclass(frozen=True)
class Regularizer:
    """A catalogue regularizer on R^dim.

    Parameters
    ----------
    kind : str
        One of ``sq_l2``, ``l1``, ``elastic``, ``tv1d``.
    dim : int
        Dimension p of the primal space.
    alpha : float
        Quadratic weight for ``elastic``; ignored otherwise.
    selection : str
        For ``l1`` only: which element of the (set-valued) conjugate
        subdifferential to return, ``minimal_norm`` or ``scaled_sign``.
    beta : float
        Scale for the ``scaled_sign`` selection.

    Notes
    -----
    With ``minimal_norm`` the explicit dual iteration on pure ``l1`` returns
    the zero primal iterate until the dual variable hits the boundary of the
    unit box, so it stalls. Prefer ``elastic`` for the explicit scheme and the
    Bregman (implicit) solver for pure ``l1``.
    """

    kind: str
    dim: int
    alpha: float = 0.0
    selection: str = "minimal_norm"
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.kind == "elastic" and not self.alpha > 0:
            raise ValueError("elastic regularizer needs alpha > 0")
        if self.kind == "tv1d" and self.dim < 2:
            raise ValueError("tv1d needs dim >= 2")
        if self.selection not in SELECTIONS:
            raise ValueError(f"unknown selection rule {self.selection!r}")
        if self.selection == "scaled_sign" and not self.beta > 0:
            raise ValueError("scaled_sign selection needs beta > 0")

    @property
    def mu(self) -> float:
        """Strong-convexity constant (0 when J is not strongly convex)."""
        if self.kind == "sq_l2":
            return 1.0
        if self.kind == "elastic":
            return self.alpha
        return 0.0

    @property
    def has_selection(self) -> bool:
        return self.kind != "tv1d"

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"expected vector of length {self.dim}, got shape {x.shape}")
        return x

    def value(self, x) -> float:
        x = self._check(x)
        if self.kind == "sq_l2":
            return 0.5 * float(x @ x)
        if self.kind == "l1":
            return float(np.abs(x).sum())
        if self.kind == "elastic":
            return float(np.abs(x).sum()) + 0.5 * self.alpha * float(x @ x)
        return float(np.abs(np.diff(x)).sum())

    def conjugate_value(self, u, tol: float = DOMAIN_TOL) -> float:
        """Fenchel conjugate ``J*(u)``; returns ``math.inf`` outside the domain.

        `tol` widens the domain of the indicator-type conjugates (``l1``,
        ``tv1d``) to absorb rounding.
        """
        u = self._check(u)
        if self.kind == "sq_l2":
            return 0.5 * float(u @ u)
        if self.kind == "l1":
            return 0.0 if np.max(np.abs(u)) <= 1.0 + tol else INF
        if self.kind == "elastic":
            excess = np.maximum(np.abs(u) - 1.0, 0.0)
            return float(excess @ excess) / (2.0 * self.alpha)
        # u = D^T w has the unique solution w = -cumsum(u)[:-1] iff sum(u) = 0
        w = -np.cumsum(u)[:-1]
        resid = np.linalg.norm(_diff_adjoint(w) - u)
        if resid > 1e-8 or np.max(np.abs(w)) > 1.0 + tol:
            return INF
        return 0.0

    def conjugate_subgradient(self, u, domain_tol: float = DOMAIN_TOL) -> np.ndarray:
        """One element of ``dJ*(u)``, per the selection rule.

        Raises
        ------
        DomainViolation
            For ``l1`` when ``||u||_inf > 1 + domain_tol``.
        Unsupported
            For ``tv1d``.
        """
        u = self._check(u)
        if self.kind == "sq_l2":
            return u.copy()
        if self.kind == "elastic":
            return soft_threshold(u, 1.0) / self.alpha
        if self.kind == "tv1d":
            raise Unsupported("tv1d has no conjugate-subgradient selection; use the Bregman solver")
        amax = float(np.max(np.abs(u)))
        if amax > 1.0 + domain_tol:
            raise DomainViolation(
                f"||u||_inf = {amax:.12g} exceeds 1 + {domain_tol:g}; step size too large?"
            )
        if self.selection == "minimal_norm":
            return np.zeros(self.dim)
        return self.beta * np.sign(u) * (np.abs(u) >= 1.0 - domain_tol)

    def prox(self, tau: float, v) -> np.ndarray:
        """``argmin_x J(x) + ||x - v||^2 / (2*tau)``."""
        if not tau > 0:
            raise NonPositiveStep(f"prox step must be positive, got {tau}")
        v = self._check(v)
        if self.kind == "sq_l2":
            return v / (1.0 + tau)
        if self.kind == "l1":
            return soft_threshold(v, tau)
        if self.kind == "elastic":
            return soft_threshold(v, tau) / (1.0 + tau * self.alpha)
        return tv1d_prox(v, tau)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "elastic":
            out["alpha"] = self.alpha
        if self.kind == "l1":
            out["selection"] = self.selection
            if self.selection == "scaled_sign":
                out["beta"] = self.beta
        return out


def _diff_adjoint(w):
    out = np.empty(w.size + 1)
    out[0] = -w[0]
    out[1:-1] = w[:-1] - w[1:]
    out[-1] = w[-1]
    return out


def sq_l2(dim: int) -> Regularizer:
    return Regularizer("sq_l2", dim)


def l1(dim: int, selection: str = "minimal_norm", beta: float = 1.0) -> Regularizer:
    return Regularizer("l1", dim, selection=selection, beta=beta)


def elastic(dim: int, alpha: float) -> Regularizer:
    return Regularizer("elastic", dim, alpha=alpha)


def tv1d(dim: int) -> Regularizer:
    return Regularizer("tv1d", dim)


def fenchel_young_residual(reg: Regularizer, x, u, tol: float = DOMAIN_TOL) -> float:
    """``J(x) + J*(u) - <u, x>``: nonnegative, zero iff ``u`` is in ``dJ(x)``."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    return reg.value(x) + reg.conjugate_value(u, tol=tol) - float(u @ x)


def from_dict(obj: dict, dim: int) -> Regularizer:
    kind = obj.get("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown regularizer kind {kind!r}")
    return Regularizer(
        kind,
        int(dim),
        alpha=float(obj.get("alpha", 0.0)),
        selection=obj.get("selection", "minimal_norm"),
        beta=float(obj.get("beta", 1.0)),
    )
