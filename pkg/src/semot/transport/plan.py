from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidSimplex

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransportPlan:
    coupling: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    cost: float
    # sinkhorn diagnostics; exact plans report violation 0 and iterations = pivots
    violation: float = 0.0
    iterations: int = 0
    converged: bool = True
    basis: tuple[tuple[int, int], ...] | None = field(default=None)

    def marginal_error(self) -> float:
        return float(
            np.abs(self.coupling.sum(1) - self.row_marginal).sum()
            + np.abs(self.coupling.sum(0) - self.col_marginal).sum()
        )


def check_simplex(w, name: str) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidSimplex(f"{name} must be a nonempty vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidSimplex(f"{name} has negative or non-finite entries")
    if abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise InvalidSimplex(f"{name} sums to {w.sum()!r}")
    return w


def check_problem(c, a, b) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = np.atleast_2d(np.asarray(c, dtype=np.float64))
    a = check_simplex(a, "row weights")
    b = check_simplex(b, "column weights")
    if c.shape != (a.size, b.size):
        raise InvalidSimplex(f"cost shape {c.shape} does not match weights ({a.size}, {b.size})")
    if not np.all(np.isfinite(c)):
        raise InvalidSimplex("cost matrix must be finite")
    return c, a, b


def plan_cost(coupling: np.ndarray, c: np.ndarray) -> float:
    return float(np.sum(coupling * c))
