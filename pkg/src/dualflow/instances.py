"""Problem instances with ground truth and certified primal-dual pairs.

Certificates are built before the data: pick ``(x_bar, y_bar)`` satisfying
``-A^T y_bar in dJ(x_bar)``, then set ``f = A x_bar``. That gives exact
constants ``||y0 - y_bar||`` and ``||y_bar||`` for the convergence bounds
without relying on an external solver.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import linprog

from . import linop, regularizers
from .errors import CertificateFailure, DimensionMismatch, MissingCertificate, RankDeficient
from .linop import LinearMap
from .regularizers import Regularizer

__all__ = [
    "PrimalDualCertificate",
    "ProblemInstance",
    "KKTResiduals",
    "generate_sparse",
    "generate_l2",
    "generate_tv",
    "certified_l2",
    "verify_kkt",
    "load",
    "save",
]

MARGIN = 0.99
MAX_ATTEMPTS = 50


class KKTResiduals(NamedTuple):
    primal: float
    dual: float


@dataclass(frozen=True)
class PrimalDualCertificate:
    x_bar: np.ndarray
    y_bar: np.ndarray
    kkt_residual_primal: float = np.nan
    kkt_residual_dual: float = np.nan


@dataclass(frozen=True)
class ProblemInstance:
    """Noisy linear inverse problem ``f_delta = A x_star + noise``."""

    A: LinearMap
    reg: Regularizer
    x_star: np.ndarray
    f: np.ndarray
    f_delta: np.ndarray
    delta: float
    certificate: Optional[PrimalDualCertificate] = None
    seed: int = 0

    def __post_init__(self):
        if self.reg.dim != self.A.in_dim:
            raise DimensionMismatch("regularizer dimension differs from A.in_dim")
        for name, n in (("x_star", self.A.in_dim), ("f", self.A.out_dim), ("f_delta", self.A.out_dim)):
            if np.shape(getattr(self, name)) != (n,):
                raise DimensionMismatch(f"{name} must have length {n}")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def p(self) -> int:
        return self.A.in_dim

    @property
    def d(self) -> int:
        return self.A.out_dim

    def to_dict(self) -> dict:
        cert = None
        if self.certificate is not None:
            cert = {
                "x_bar": self.certificate.x_bar.tolist(),
                "y_bar": self.certificate.y_bar.tolist(),
            }
        return {
            "A": self.A.to_dict(),
            "reg": self.reg.to_dict(),
            "x_star": np.asarray(self.x_star).tolist(),
            "f": np.asarray(self.f).tolist(),
            "f_delta": np.asarray(self.f_delta).tolist(),
            "delta": float(self.delta),
            "certificate": cert,
            "seed": int(self.seed),
        }

    def to_json(self) -> str:
        # json uses repr() for floats: shortest round-trip decimal
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def from_dict(cls, obj: dict) -> "ProblemInstance":
        A = linop.from_dict(obj["A"])
        reg = regularizers.from_dict(obj["reg"], A.in_dim)
        inst = cls(
            A=A,
            reg=reg,
            x_star=_vec(obj["x_star"]),
            f=_vec(obj["f"]),
            f_delta=_vec(obj["f_delta"]),
            delta=float(obj["delta"]),
            certificate=None,
            seed=int(obj.get("seed", 0)),
        )
        cert = obj.get("certificate")
        if cert is not None:
            inst = _with_certificate(inst, _vec(cert["x_bar"]), _vec(cert["y_bar"]))
        return inst

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        return cls.from_dict(json.loads(text))


def _vec(a) -> np.ndarray:
    v = np.array(a, dtype=np.float64)
    v.setflags(write=False)
    return v


def save(inst: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(inst.to_json())


def load(path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        return ProblemInstance.from_json(fh.read())


def _kkt(A: LinearMap, reg: Regularizer, f, x_bar, y_bar) -> KKTResiduals:
    primal = float(np.linalg.norm(A.apply(x_bar) - f))
    AtY = A.adjoint(y_bar)
    dual = reg.value(x_bar) + reg.conjugate_value(-AtY) + float(AtY @ x_bar)
    return KKTResiduals(primal, dual)


def _with_certificate(inst: ProblemInstance, x_bar, y_bar) -> ProblemInstance:
    res = _kkt(inst.A, inst.reg, inst.f, x_bar, y_bar)
    cert = PrimalDualCertificate(_vec(x_bar), _vec(y_bar), res.primal, res.dual)
    return ProblemInstance(
        inst.A, inst.reg, inst.x_star, inst.f, inst.f_delta, inst.delta, cert, inst.seed
    )


def verify_kkt(inst: ProblemInstance) -> KKTResiduals:
    """Recompute ``||A x_bar - f||`` and the Fenchel-Young residual of ``-A^T y_bar`` at ``x_bar``."""
    if inst.certificate is None:
        raise MissingCertificate("instance carries no primal-dual certificate")
    c = inst.certificate
    return _kkt(inst.A, inst.reg, inst.f, c.x_bar, c.y_bar)


def _noisy(f, delta, rho, rng) -> np.ndarray:
    # always draw, so the noise direction does not depend on delta
    e = rng.standard_normal(f.size)
    level = rho * delta
    if level == 0.0:
        return f.copy()
    return f + e * (level / np.linalg.norm(e))


def _streams(seed: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def _min_sup_interpolant(A: np.ndarray, support, b):
    """``y`` minimizing ``max_{i not in S} |(A^T y)_i|`` subject to ``A_S^T y = b``."""
    d, p = A.shape
    off = np.setdiff1d(np.arange(p), support)
    B = A[:, off].T
    m = B.shape[0]
    c = np.zeros(d + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    A_ub = np.vstack([np.hstack([B, -ones]), np.hstack([-B, -ones])])
    A_eq = np.hstack([A[:, support].T, np.zeros((len(support), 1))])
    sol = linprog(
        c,
        A_ub=A_ub,
        b_ub=np.zeros(2 * m),
        A_eq=A_eq,
        b_eq=b,
        bounds=[(None, None)] * d + [(0, None)],
        method="highs",
    )
    if sol.status != 0:
        return None
    return sol.x[:d]


def _sparse_certificate(A: np.ndarray, support, rhs):
    """Dual vector with ``(A^T y)_S = rhs`` and off-support sup-norm at most MARGIN, or None."""
    AS = A[:, support]
    if np.linalg.matrix_rank(AS) < len(support):
        return None
    gram = AS.T @ AS
    p = A.shape[1]
    off = np.ones(p, dtype=bool)
    off[support] = False

    y = AS @ np.linalg.solve(gram, rhs)  # minimal-norm interpolant
    if np.max(np.abs(A[:, off].T @ y)) <= MARGIN:
        return y
    y = _min_sup_interpolant(A, support, rhs)
    if y is None:
        return None
    # project back onto the affine constraint to remove LP round-off
    y = y + AS @ np.linalg.solve(gram, rhs - AS.T @ y)
    if np.max(np.abs(A[:, off].T @ y)) <= MARGIN:
        return y
    return None


def generate_sparse(
    p: int,
    d: int,
    sparsity: int,
    reg: str = "l1",
    delta: float = 0.0,
    rho: float = 1.0,
    seed: int = 0,
    alpha: float = 1.0,
    selection: str = "minimal_norm",
) -> ProblemInstance:
    """Sparse recovery instance with a dual certificate.

    ``A`` has i.i.d. N(0, 1/d) entries. A support ``S``, signs and magnitudes
    in [0.5, 1.5] define ``x_bar``; ``y_bar`` solves ``(A^T y)_S = -sign -
    alpha*x_bar_S`` (``alpha = 0`` for ``l1``) with ``|(A^T y)_i| <= 0.99``
    off the support. The minimal-norm interpolant is tried first, then the
    interpolant minimizing the off-support sup-norm. Up to 50 draws of
    ``(S, signs, magnitudes)`` are made before giving up.

    Raises
    ------
    CertificateFailure
        When no strictly feasible certificate was found.
    """
    if not (1 <= sparsity <= d < p):
        raise ValueError("need 1 <= sparsity <= d < p")
    if delta < 0 or not (0 < rho <= 1):
        raise ValueError("need delta >= 0 and rho in (0, 1]")
    if reg == "l1":
        R = regularizers.l1(p, selection=selection)
        quad = 0.0
    elif reg == "elastic":
        R = regularizers.elastic(p, alpha)
        quad = alpha
    else:
        raise ValueError(f"sparse instances support l1 or elastic, not {reg!r}")

    rng_A, rng_cert, rng_noise = _streams(seed)
    A = rng_A.standard_normal((d, p)) / np.sqrt(d)
    for _ in range(MAX_ATTEMPTS):
        S = np.sort(rng_cert.choice(p, size=sparsity, replace=False))
        sgn = rng_cert.choice([-1.0, 1.0], size=sparsity)
        mag = rng_cert.uniform(0.5, 1.5, size=sparsity)
        y_bar = _sparse_certificate(A, S, -sgn - quad * sgn * mag)
        if y_bar is not None:
            break
    else:
        raise CertificateFailure(
            f"no dual certificate with margin {MARGIN} after {MAX_ATTEMPTS} attempts "
            f"(p={p}, d={d}, sparsity={sparsity}); increase d"
        )
    x_bar = np.zeros(p)
    x_bar[S] = sgn * mag
    Amap = linop.dense(A)
    f = Amap.apply(x_bar)
    inst = ProblemInstance(Amap, R, _vec(x_bar), _vec(f), _vec(_noisy(f, delta, rho, rng_noise)),
                           float(delta), None, int(seed))
    return _with_certificate(inst, x_bar, y_bar)


def certified_l2(A: LinearMap, y_bar, delta: float = 0.0, rho: float = 1.0, rng=None,
                 seed: int = 0) -> ProblemInstance:
    """sq_l2 instance from a given dual point: ``x_bar = -A^T y_bar`` is then exactly optimal."""
    y_bar = np.asarray(y_bar, dtype=np.float64)
    x_bar = -A.adjoint(y_bar)
    f = A.apply(x_bar)
    if rng is None:
        rng = _streams(seed)[2]
    inst = ProblemInstance(A, regularizers.sq_l2(A.in_dim), _vec(x_bar), _vec(f),
                           _vec(_noisy(f, delta, rho, rng)), float(delta), None, int(seed))
    return _with_certificate(inst, x_bar, y_bar)


def generate_l2(p: int, d: int, delta: float = 0.0, rho: float = 1.0, seed: int = 0) -> ProblemInstance:
    """Minimal-norm least-squares instance with a closed-form certificate."""
    if not (1 <= d <= p):
        raise ValueError("need 1 <= d <= p")
    rng_A, rng_cert, rng_noise = _streams(seed)
    for _ in range(10):
        A = rng_A.standard_normal((d, p)) / np.sqrt(d)
        if np.linalg.matrix_rank(A, tol=1e-10) == d:
            break
    else:
        raise RankDeficient(f"could not draw a full row rank {d}x{p} matrix in 10 tries")
    y_bar = rng_cert.standard_normal(d)
    return certified_l2(linop.dense(A), y_bar, delta, rho, rng_noise, seed)


def generate_tv(n: int, blur_width: int = 1, delta: float = 0.0, rho: float = 1.0,
                seed: int = 0) -> ProblemInstance:
    """Piecewise-constant signal with three plateaus, observed through a box blur.

    No certificate is attached.
    """
    if n < 8:
        raise ValueError("need n >= 8")
    if blur_width < 1:
        raise ValueError("blur_width must be >= 1")
    rng_sig, rng_lvl, rng_noise = _streams(seed)
    cuts = np.sort(rng_sig.choice(np.arange(2, n - 1), size=2, replace=False))
    while True:
        levels = rng_lvl.uniform(-1.0, 1.0, size=3)
        if np.min(np.abs(np.diff(levels))) >= 0.2:
            break
    x_star = np.empty(n)
    x_star[:cuts[0]] = levels[0]
    x_star[cuts[0]:cuts[1]] = levels[1]
    x_star[cuts[1]:] = levels[2]
    if blur_width == 1:
        A = linop.identity(n)
    else:
        A = linop.conv1d(np.full(blur_width, 1.0 / blur_width), n)
    f = A.apply(x_star)
    return ProblemInstance(A, regularizers.tv1d(n), _vec(x_star), _vec(f),
                           _vec(_noisy(f, delta, rho, rng_noise)), float(delta), None, int(seed))
