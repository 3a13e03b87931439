"""Linear maps with exact adjoints.

Every map is immutable and knows its own adjoint, so ``<Ax, y> = <x, A^T y>``
holds to rounding error. Maps serialize to tagged dictionaries
(``{"kind": ...}``) for the problem JSON format.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch

__all__ = [
    "LinearMap",
    "Dense",
    "Identity",
    "Conv1D",
    "Diff1D",
    "Scaled",
    "Composed",
    "dense",
    "identity",
    "conv1d",
    "diff1d",
    "scaled",
    "composed",
    "apply",
    "adjoint_apply",
    "norm_estimate",
    "from_dict",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


class LinearMap:
    """Base class; subclasses implement ``_apply`` and ``_adjoint``."""

    kind: str = ""

    def __init__(self, in_dim: int, out_dim: int):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("dimensions must be positive")
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.out_dim, self.in_dim)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.in_dim,):
            raise DimensionMismatch(
                f"{self.kind}: expected input of length {self.in_dim}, got shape {x.shape}"
            )
        return self._apply(x)

    def adjoint(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.out_dim,):
            raise DimensionMismatch(
                f"{self.kind}: expected input of length {self.out_dim}, got shape {y.shape}"
            )
        return self._adjoint(y)

    __call__ = apply

    def matrix(self) -> np.ndarray:
        """Materialize the map column by column (testing and small problems only)."""
        eye = np.eye(self.in_dim)
        return np.column_stack([self._apply(e) for e in eye])

    def _apply(self, x):
        raise NotImplementedError

    def _adjoint(self, y):
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.out_dim}x{self.in_dim})"


class Dense(LinearMap):
    kind = "dense"

    def __init__(self, matrix):
        m = _frozen(matrix)
        if m.ndim != 2:
            raise ValueError("dense map needs a 2-D matrix")
        super().__init__(m.shape[1], m.shape[0])
        self.mat = m

    def _apply(self, x):
        return self.mat @ x

    def _adjoint(self, y):
        return self.mat.T @ y

    def matrix(self):
        return self.mat.copy()

    def to_dict(self):
        return {"kind": self.kind, "matrix": self.mat.tolist()}


class Identity(LinearMap):
    kind = "identity"

    def __init__(self, p: int):
        super().__init__(p, p)

    def _apply(self, x):
        return x.copy()

    _adjoint = _apply

    def to_dict(self):
        return {"kind": self.kind, "dim": self.in_dim}


class Conv1D(LinearMap):
    """Centered convolution with zero padding; output length equals input length.

    ``(Ax)_i = sum_j kernel[j] * x[i + c - j]`` with ``c = (len(kernel) - 1) // 2``
    and ``x`` taken as zero outside ``[0, n)``.
    """

    kind = "conv1d"

    def __init__(self, kernel, length: int):
        k = _frozen(kernel)
        if k.ndim != 1 or k.size == 0:
            raise ValueError("kernel must be a non-empty 1-D array")
        super().__init__(length, length)
        self.kernel = k
        self._c = (k.size - 1) // 2

    def _apply(self, x):
        full = np.convolve(x, self.kernel, mode="full")
        return full[self._c:self._c + self.in_dim]

    def _adjoint(self, y):
        z = np.zeros(self.in_dim + self.kernel.size - 1)
        z[self._c:self._c + self.in_dim] = y
        return np.correlate(z, self.kernel, mode="valid")

    def to_dict(self):
        return {"kind": self.kind, "kernel": self.kernel.tolist(), "length": self.in_dim}


class Diff1D(LinearMap):
    """Forward differences ``(Dx)_i = x[i+1] - x[i]``, mapping R^p to R^(p-1)."""

    kind = "diff1d"

    def __init__(self, p: int):
        if p < 2:
            raise ValueError("diff1d needs p >= 2")
        super().__init__(p, p - 1)

    def _apply(self, x):
        return np.diff(x)

    def _adjoint(self, y):
        out = np.empty(self.in_dim)
        out[0] = -y[0]
        out[1:-1] = y[:-1] - y[1:]
        out[-1] = y[-1]
        return out

    def to_dict(self):
        return {"kind": self.kind, "dim": self.in_dim}


class Scaled(LinearMap):
    kind = "scaled"

    def __init__(self, alpha: float, inner: LinearMap):
        super().__init__(inner.in_dim, inner.out_dim)
        self.alpha = float(alpha)
        self.inner = inner

    def _apply(self, x):
        return self.alpha * self.inner._apply(x)

    def _adjoint(self, y):
        return self.alpha * self.inner._adjoint(y)

    def to_dict(self):
        return {"kind": self.kind, "alpha": self.alpha, "inner": self.inner.to_dict()}


class Composed(LinearMap):
    """``outer o inner``."""

    kind = "composed"

    def __init__(self, outer: LinearMap, inner: LinearMap):
        if inner.out_dim != outer.in_dim:
            raise DimensionMismatch(
                f"cannot compose: inner.out_dim={inner.out_dim} != outer.in_dim={outer.in_dim}"
            )
        super().__init__(inner.in_dim, outer.out_dim)
        self.outer = outer
        self.inner = inner

    def _apply(self, x):
        return self.outer._apply(self.inner._apply(x))

    def _adjoint(self, y):
        return self.inner._adjoint(self.outer._adjoint(y))

    def to_dict(self):
        return {"kind": self.kind, "outer": self.outer.to_dict(), "inner": self.inner.to_dict()}


# lowercase constructors mirror the serialized kinds
dense = Dense
identity = Identity
conv1d = Conv1D
diff1d = Diff1D
scaled = Scaled
composed = Composed


def apply(A: LinearMap, x) -> np.ndarray:
    return A.apply(x)


def adjoint_apply(A: LinearMap, y) -> np.ndarray:
    return A.adjoint(y)


def norm_estimate(A: LinearMap, iters: int = 100, seed: int = 0) -> float:
    """Estimate the spectral norm of `A` by power iteration on ``A^T A``.

    Parameters
    ----------
    A : LinearMap
    iters : int
        Number of power iterations, at least 1.
    seed : int
        Seed for the random unit starting vector.

    Returns
    -------
    float
        Estimate of the largest singular value. A zero map gives 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.in_dim)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = A._adjoint(A._apply(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        est = nw
        v = w / nw
    # Rayleigh quotient at the final vector is a sharper estimate of sigma_max^2
    Av = A._apply(v)
    return float(max(np.sqrt(est), np.linalg.norm(Av)))


def from_dict(obj: dict) -> LinearMap:
    kind = obj.get("kind")
    if kind == "dense":
        return Dense(obj["matrix"])
    if kind == "identity":
        return Identity(int(obj["dim"]))
    if kind == "conv1d":
        return Conv1D(obj["kernel"], int(obj["length"]))
    if kind == "diff1d":
        return Diff1D(int(obj["dim"]))
    if kind == "scaled":
        return Scaled(obj["alpha"], from_dict(obj["inner"]))
    if kind == "composed":
        return Composed(from_dict(obj["outer"]), from_dict(obj["inner"]))
    raise ValueError(f"unknown linear map kind {kind!r}")
