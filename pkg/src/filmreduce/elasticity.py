"""Saint Venant-Kirchhoff material: strain, stored energy, elasticity pairing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

__all__ = ["MaterialParams", "strain", "svk_density", "elasticity_contract", "cee"]


@dataclass(frozen=True)
class MaterialParams:
    """Lame constants and an optional growth triple (c1, c2, q).

    Pass ``validate=False`` to allow degenerate constants, e.g. to isolate the
    second-order part of a functional in tests.
    """

    lam: float = 1.0
    mu: float = 1.0
    growth: Optional[Tuple[float, float, float]] = None
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", float(self.mu))
        if self.validate and not (self.lam > 0 and self.mu > 0):
            raise ValueError(f"Lame constants must be positive, got lambda={self.lam}, mu={self.mu}")
        if self.growth is not None:
            c1, c2, q = map(float, self.growth)
            if not (c1 > 0 and c2 > 0 and 2 <= q < 6):
                raise ValueError("growth triple needs c1 > 0, c2 > 0 and 2 <= q < 6")
            object.__setattr__(self, "growth", (c1, c2, q))

    @classmethod
    def from_config(cls, cfg: dict) -> "MaterialParams":
        cfg = dict(cfg)
        lam = float(cfg.pop("lambda", 1.0))
        mu = float(cfg.pop("mu", 1.0))
        growth = cfg.pop("growth", None)
        if cfg:
            raise ValueError(f"unknown material keys: {sorted(cfg)}")
        return cls(lam, mu, tuple(growth) if growth is not None else None)

    def to_config(self) -> dict:
        out = {"lambda": self.lam, "mu": self.mu}
        if self.growth is not None:
            out["growth"] = list(self.growth)
        return out


def strain(F: np.ndarray) -> np.ndarray:
    """Green-Saint Venant strain 1/2 (F^T F - I), batched over leading axes."""
    F = np.asarray(F, dtype=float)
    return 0.5 * (np.swapaxes(F, -1, -2) @ F - np.eye(3))


def svk_density(F: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """W(F) = lambda/8 tr(F^T F - I)^2 + mu/4 tr((F^T F - I)^2)."""
    G = 2.0 * strain(F)
    tr = np.trace(G, axis1=-2, axis2=-1)
    return mat.lam / 8.0 * tr**2 + mat.mu / 4.0 * np.sum(G * G, axis=(-2, -1))


def elasticity_contract(E: np.ndarray, E2: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """C^{ijkl} E_ij E'_kl = lambda tr E tr E' + 2 mu E : E'."""
    E = np.asarray(E, dtype=float)
    E2 = np.asarray(E2, dtype=float)
    tr1 = np.trace(E, axis1=-2, axis2=-1)
    tr2 = np.trace(E2, axis1=-2, axis2=-1)
    return mat.lam * tr1 * tr2 + 2.0 * mat.mu * np.sum(E * E2, axis=(-2, -1))


def cee(E: np.ndarray, mat: MaterialParams) -> np.ndarray:
    """Shorthand for elasticity_contract(E, E)."""
    return elasticity_contract(E, E, mat)
