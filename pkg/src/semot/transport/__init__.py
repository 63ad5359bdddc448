from .api import EXACT, SINKHORN, Solver, transport, wasserstein
from .costs import GroundCost, cost_matrix
from .exact import exact_ot
from .oned import Gaussian, wasserstein_1d
from .plan import TransportPlan
from .sinkhorn import default_eps, round_to_feasible, sinkhorn

__all__ = [
    "EXACT",
    "SINKHORN",
    "Gaussian",
    "GroundCost",
    "Solver",
    "TransportPlan",
    "cost_matrix",
    "default_eps",
    "exact_ot",
    "round_to_feasible",
    "sinkhorn",
    "transport",
    "wasserstein",
    "wasserstein_1d",
]
