"""
Third-order tensor arithmetic on M333.

Tensors are plain numpy arrays whose last three axes have length 3 and are
indexed (i, j, k). Leading axes are batch axes, so every operation here works
node-wise on whole grids without Python loops.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_tensor3",
    "basis3",
    "contract",
    "contract_left",
    "transpose23",
    "QuadraticForm3",
    "qform",
    "bform",
]


def as_tensor3(p) -> np.ndarray:
    """Validate and return ``p`` as a float array with trailing shape (3, 3, 3)."""
    p = np.asarray(p, dtype=float)
    if p.shape[-3:] != (3, 3, 3):
        raise ValueError(f"expected trailing shape (3, 3, 3), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("tensor has non-finite components")
    return p


def basis3(i: int, j: int, k: int) -> np.ndarray:
    """e_i (x) e_j (x) e_k with zero-based indices."""
    t = np.zeros((3, 3, 3))
    t[i, j, k] = 1.0
    return t


def contract(p: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Contracted product P (x)- R: sum over the last index of P and first of R.

    ``result[..., i, j, m] = sum_k p[..., i, j, k] * r[..., k, m]``
    """
    return np.einsum("...ijk,...km->...ijm", p, r)


def contract_left(m: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Matrix-on-the-left contracted product, ``(M (x)- P)[l, i, j] = M[l, k] P[k, i, j]``."""
    return np.einsum("...lk,...kij->...lij", m, p)


def transpose23(p: np.ndarray) -> np.ndarray:
    """Swap the second and third index."""
    return np.swapaxes(p, -1, -2)


@dataclass(frozen=True)
class QuadraticForm3:
    """Diagonal nonnegative quadratic form on M333.

    ``Q(A) = sum_ijk A_ijk**2 * coeffs[i, j, k]``. At least one coefficient
    has to be strictly positive.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.size != 27:
            raise ValueError(f"quadratic form needs 27 coefficients, got {c.size}")
        c = c.reshape(3, 3, 3)
        if not np.all(np.isfinite(c)):
            raise ValueError("quadratic form coefficients must be finite")
        if np.any(c < 0):
            raise ValueError("quadratic form coefficients must be nonnegative")
        if not np.any(c > 0):
            raise ValueError("at least one quadratic form coefficient must be positive")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def frobenius(cls) -> "QuadraticForm3":
        """All coefficients one: the squared Euclidean norm on M333."""
        return cls(np.ones((3, 3, 3)))

    @property
    def is_frobenius(self) -> bool:
        return bool(np.all(self.coeffs == 1.0))

    @classmethod
    def parse(cls, value) -> "QuadraticForm3":
        """Build from ``"frobenius"`` or a row-major list of 27 numbers."""
        if isinstance(value, str):
            if value.lower() != "frobenius":
                raise ValueError(f"unknown quadratic form token {value!r}")
            return cls.frobenius()
        values = list(value)
        if len(values) != 27:
            raise ValueError(f"quadratic form list must have 27 entries, got {len(values)}")
        return cls(np.asarray(values, dtype=float))

    def to_config(self):
        if self.is_frobenius:
            return "frobenius"
        return [float(v) for v in self.coeffs.ravel()]

    def __call__(self, a: np.ndarray) -> np.ndarray:
        return qform(self, a)


def qform(q: QuadraticForm3, a: np.ndarray) -> np.ndarray:
    """Q(A) evaluated over any leading batch axes."""
    a = np.asarray(a, dtype=float)
    return np.einsum("...ijk,ijk->...", a * a, q.coeffs)


def bform(q: QuadraticForm3, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Symmetric bilinear form B(A, A') with B(A, A) = Q(A)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.einsum("...ijk,ijk->...", a * b, q.coeffs)
