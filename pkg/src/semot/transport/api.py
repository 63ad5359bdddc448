from __future__ import annotations

import logging
from dataclasses import dataclass

from ..core import EmpiricalDistribution
from ..errors import NonConvergence, SemotError
from .costs import GroundCost, cost_matrix
from .exact import exact_ot
from .plan import TransportPlan
from .sinkhorn import DEFAULT_MAX_ITER, DEFAULT_TOL, sinkhorn

log = logging.getLogger(__name__)

SINKHORN = "sinkhorn"
EXACT = "exact"


@dataclass(frozen=True)
class Solver:
    """Which OT solver to run and how.

    ``eps`` is a float, a decreasing tuple (annealing schedule) or ``None`` for
    the scale-adaptive default. With ``strict=False`` a non-converged Sinkhorn
    run still returns the cost of its rounded, feasible plan.
    """

    method: str = SINKHORN
    eps: float | tuple[float, ...] | None = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    strict: bool = False

    def __post_init__(self):
        if self.method not in (SINKHORN, EXACT):
            raise SemotError(f"unknown solver {self.method!r}")
        if isinstance(self.eps, list):
            object.__setattr__(self, "eps", tuple(self.eps))

    @classmethod
    def exact(cls):
        return cls(EXACT)

    def solve(self, c, a, b) -> TransportPlan:
        if self.method == EXACT:
            return exact_ot(c, a, b)
        try:
            return sinkhorn(c, a, b, eps=self.eps, tol=self.tol, max_iter=self.max_iter)
        except NonConvergence as err:
            if self.strict:
                raise
            log.warning("%s; using rounded plan", err)
            return err.plan


def transport(cost: GroundCost, mu: EmpiricalDistribution, nu: EmpiricalDistribution, solver: Solver = Solver()) -> TransportPlan:
    return solver.solve(cost_matrix(cost, mu, nu), mu.weights, nu.weights)


def wasserstein(
    cost: GroundCost,
    mu: EmpiricalDistribution,
    nu: EmpiricalDistribution,
    solver: Solver = Solver(),
) -> float:
    """Transport cost of the plan the solver returns between ``mu`` and ``nu``."""
    return max(transport(cost, mu, nu, solver).cost, 0.0)
