"""Ground costs on the reference space."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..core import EmpiricalDistribution
from ..errors import CosineNormViolation, DimensionMismatch, SemotError

EUCLIDEAN = "euclidean"
SQEUCLIDEAN = "sqeuclidean"
MAHALANOBIS = "mahalanobis"
COSINE = "cosine"
FLOW = "flow"
KINDS = (EUCLIDEAN, SQEUCLIDEAN, MAHALANOBIS, COSINE, FLOW)


@dataclass(frozen=True, eq=False)
class GroundCost:
    """A pointwise cost ``c(z, z')``.

    flow composite: ``lambda_x * |z - z'|^2 + lambda_u * mean_m |q_m(z) - q_m(z')|^2``
    where ``q_m = u_m / (|u_m| + eps_norm)`` and ``field`` maps an ``(n, d)``
    array of points to the raw ``(n, M, s)`` field values ``u_m``.
    """

    kind: str = EUCLIDEAN
    matrix_a: np.ndarray | None = None
    min_norm: float | None = None
    lambda_x: float = 1.0
    lambda_u: float = 1.0
    field: Callable[[np.ndarray], np.ndarray] | None = None
    eps_norm: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SemotError(f"unknown ground cost {self.kind!r}")
        if self.kind == MAHALANOBIS:
            if self.matrix_a is None:
                raise SemotError("mahalanobis cost needs matrix_a")
            a = np.atleast_2d(np.asarray(self.matrix_a, dtype=np.float64))
            if not np.all(np.isfinite(a)):
                raise SemotError("mahalanobis matrix must be finite")
            object.__setattr__(self, "matrix_a", a)
        if self.kind == COSINE and (self.min_norm is None or self.min_norm <= 0):
            raise SemotError("cosine cost needs min_norm > 0")
        if self.kind == FLOW:
            if self.field is None:
                raise SemotError("flow cost needs a field")
            if self.lambda_x < 0 or self.lambda_u < 0 or self.eps_norm <= 0:
                raise SemotError("flow cost needs lambda_x, lambda_u >= 0 and eps_norm > 0")

    @classmethod
    def euclidean(cls):
        return cls(EUCLIDEAN)

    @classmethod
    def sqeuclidean(cls):
        return cls(SQEUCLIDEAN)

    @classmethod
    def mahalanobis(cls, a):
        return cls(MAHALANOBIS, matrix_a=a)

    @classmethod
    def cosine(cls, min_norm: float = 1e-6):
        return cls(COSINE, min_norm=min_norm)

    @classmethod
    def flow(cls, field, lambda_x=1.0, lambda_u=1.0, eps_norm=1e-8):
        return cls(FLOW, lambda_x=lambda_x, lambda_u=lambda_u, field=field, eps_norm=eps_norm)

    def pairwise(self, x, y) -> np.ndarray:
        """Cost matrix between the rows of ``x`` and the rows of ``y``."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        if x.shape[1] != y.shape[1]:
            raise DimensionMismatch(f"dimension {x.shape[1]} vs {y.shape[1]}")
        if self.kind == EUCLIDEAN:
            return np.sqrt(_sqdist(x, y))
        if self.kind == SQEUCLIDEAN:
            return _sqdist(x, y)
        if self.kind == MAHALANOBIS:
            a = self.matrix_a
            if a.shape[1] != x.shape[1]:
                raise DimensionMismatch(f"matrix_a has {a.shape[1]} columns, points have {x.shape[1]}")
            return np.sqrt(_sqdist(x @ a.T, y @ a.T))
        if self.kind == COSINE:
            nx = np.linalg.norm(x, axis=1)
            ny = np.linalg.norm(y, axis=1)
            if nx.min() < self.min_norm or ny.min() < self.min_norm:
                raise CosineNormViolation(
                    f"support point norm {min(nx.min(), ny.min()):.3g} below r_phi={self.min_norm}"
                )
            sim = (x / nx[:, None]) @ (y / ny[:, None]).T
            return np.clip(1.0 - sim, 0.0, 2.0)
        qx, qy = self.directions(x), self.directions(y)
        if qx.shape[1:] != qy.shape[1:]:
            raise DimensionMismatch("flow field shapes disagree")
        cost = np.zeros((x.shape[0], y.shape[0]))
        if self.lambda_x:
            cost += self.lambda_x * _sqdist(x, y)
        if self.lambda_u:
            m = qx.shape[1]
            dir_cost = sum(_sqdist(qx[:, i], qy[:, i]) for i in range(m)) / m
            cost += self.lambda_u * dir_cost
        return cost

    def directions(self, points) -> np.ndarray:
        """Normalised flow directions ``q_m`` at each point, shape ``(n, M, s)``."""
        u = np.asarray(self.field(np.atleast_2d(points)), dtype=np.float64)
        if u.ndim == 2:
            u = u[:, None, :]
        if u.ndim != 3 or u.shape[1] < 1:
            raise SemotError("flow field must return an (n, M, s) array with M >= 1")
        return u / (np.linalg.norm(u, axis=2, keepdims=True) + self.eps_norm)


def _sqdist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cost_matrix(cost: GroundCost, mu: EmpiricalDistribution, nu: EmpiricalDistribution) -> np.ndarray:
    c = cost.pairwise(mu.support, nu.support)
    if not np.all(np.isfinite(c)):
        raise SemotError("cost matrix has non-finite entries")
    return c
