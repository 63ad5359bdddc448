"""Log-domain Sinkhorn iteration with feasibility rounding."""
from __future__ import annotations

import numpy as np

from ..errors import NonConvergence, SemotError
from .plan import TransportPlan, check_problem, plan_cost

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 2000
EPS_FRACTION = 0.05


def default_eps(c: np.ndarray) -> float:
    """``0.05 * median`` of the positive cost entries (1.0 when there are none)."""
    pos = c[c > 0]
    if pos.size == 0:
        return 1.0
    return EPS_FRACTION * float(np.median(pos))


def _lse_rows(m: np.ndarray) -> np.ndarray:
    top = m.max(axis=1)
    return top + np.log(np.exp(m - top[:, None]).sum(axis=1))


def _violation(f, g, cs, e, a, b):
    plan = np.exp((f[:, None] + g[None, :] - cs) / e)
    return float(np.abs(plan.sum(axis=1) - a).sum() + np.abs(plan.sum(axis=0) - b).sum())


def _run_stage(cs, log_a, log_b, a, b, f, g, e, tol, max_iter, window=10, omega_max=1.9):
    """One eps stage. Returns ``(f, g, iterations, violation)``.

    Plain Sinkhorn until the contraction rate ``r`` of the marginal violation
    is measurable, then over-relaxed updates with ``omega = 2/(1+sqrt(1-r))``.
    Falls back to ``omega = 1`` whenever the violation stops shrinking.
    """
    omega = 1.0
    history: list[float] = []
    violation = _violation(f, g, cs, e, a, b)
    for it in range(1, max_iter + 1):
        f_prev, g_prev = f, g
        f = (1 - omega) * f + omega * e * (log_a - _lse_rows((g[None, :] - cs) / e))
        g = (1 - omega) * g + omega * e * (log_b - _lse_rows((f[None, :] - cs.T) / e))
        violation = _violation(f, g, cs, e, a, b)
        if violation <= tol:
            return f, g, it, violation
        if not np.isfinite(violation):
            f, g, omega, history = f_prev, g_prev, 1.0, []
            continue
        history.append(violation)
        if len(history) > window:
            rate = (history[-1] / history[-1 - window]) ** (1.0 / window)
            if omega > 1.0 and rate >= 1.0:
                omega, history = 1.0, []
            elif omega == 1.0 and rate < 1.0:
                omega = min(omega_max, 2.0 / (1.0 + np.sqrt(1.0 - rate)))
                history = []
    return f, g, max_iter, violation


def round_to_feasible(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Project a nonnegative matrix onto the coupling polytope of ``(a, b)``.

    Rows and columns are scaled down where they exceed their marginal, then the
    leftover mass is put back with a rank-one correction.
    """
    rows = p.sum(axis=1)
    x = np.minimum(1.0, np.divide(a, rows, out=np.ones_like(a), where=rows > 0))
    p = p * x[:, None]
    cols = p.sum(axis=0)
    y = np.minimum(1.0, np.divide(b, cols, out=np.ones_like(b), where=cols > 0))
    p = p * y[None, :]
    err_r = np.maximum(a - p.sum(axis=1), 0.0)
    err_c = np.maximum(b - p.sum(axis=0), 0.0)
    total = err_r.sum()
    if total > 0:
        p = p + np.outer(err_r, err_c) / total
    return p


def sinkhorn(
    c,
    a,
    b,
    eps=None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> TransportPlan:
    """Entropic OT plan, rounded to exact feasibility.

    ``eps`` may be a single regularisation strength or a decreasing sequence;
    a sequence is run as an annealing schedule with the dual potentials carried
    from one stage to the next. ``tol`` bounds the combined L1 violation of
    the row and column marginals; ``max_iter`` applies to each stage. Raises
    :class:`NonConvergence` if the final stage misses ``tol``; the rounded plan
    is attached to the exception.
    """
    c, a, b = check_problem(c, a, b)
    n, m = c.shape
    if eps is None:
        schedule = [default_eps(c)]
    else:
        schedule = [float(e) for e in np.atleast_1d(eps)]
    if any(e <= 0 for e in schedule):
        raise SemotError("sinkhorn eps must be positive")

    # zero-mass atoms carry no flow; solve on the positive part
    rows = np.nonzero(a > 0)[0]
    cols = np.nonzero(b > 0)[0]
    cs = c[np.ix_(rows, cols)]
    a_s, b_s = a[rows], b[cols]
    log_a, log_b = np.log(a_s), np.log(b_s)

    f = np.zeros(rows.size)
    g = np.zeros(cols.size)
    iters = 0
    violation = np.inf
    with np.errstate(over="ignore", invalid="ignore"):
        for e in schedule:
            f, g, used, violation = _run_stage(cs, log_a, log_b, a_s, b_s, f, g, e, tol, max_iter)
            iters += used

    sub = round_to_feasible(np.exp((f[:, None] + g[None, :] - cs) / schedule[-1]), a_s, b_s)
    coupling = np.zeros((n, m))
    coupling[np.ix_(rows, cols)] = sub
    result = TransportPlan(
        coupling,
        a,
        b,
        plan_cost(coupling, c),
        violation=violation,
        iterations=iters,
        converged=violation <= tol,
    )
    if not result.converged:
        raise NonConvergence(violation, result)
    return result
