"""Independent reference implementations used as test oracles."""
import itertools

import numpy as np
from scipy import integrate, optimize, stats


def lp_oracle(c, a, b):
    n, m = c.shape
    eq = np.zeros((n + m, n * m))
    for i in range(n):
        eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        eq[n + j, j::m] = 1
    res = optimize.linprog(c.ravel(), A_eq=eq, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
    return res.fun


def bfs_oracle(c, a, b):
    """Minimum cost over all basic feasible solutions (small problems only)."""
    n, m = c.shape
    cells = [(i, j) for i in range(n) for j in range(m)]
    eq = np.zeros((n + m, n * m))
    for i in range(n):
        eq[i, i * m:(i + 1) * m] = 1
    for j in range(m):
        eq[n + j, j::m] = 1
    rhs = np.concatenate([a, b])
    best = np.inf
    for basis in itertools.combinations(range(n * m), n + m - 1):
        sub = eq[:, basis]
        if np.linalg.matrix_rank(sub) < n + m - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.any(x < -1e-12) or np.abs(sub @ x - rhs).max() > 1e-10:
            continue
        best = min(best, float(sum(x[k] * c[cells[p]] for k, p in enumerate(basis))))
    return best


def folded_mean_oracle(m, s, xi):
    """Adaptive quadrature of E|Z - xi|, split at the kink."""
    f = lambda z: abs(z - xi) * stats.norm.pdf(z, m, s)  # noqa: E731
    lo, hi = m - 40 * s, m + 40 * s
    left, _ = integrate.quad(f, lo, xi, epsabs=1e-13, epsrel=1e-13, limit=200)
    right, _ = integrate.quad(f, xi, hi, epsabs=1e-13, epsrel=1e-13, limit=200)
    return left + right




def scipy_average_clusters(d, m):
    """Average-linkage flat clusters from scipy, as sorted position lists."""
    from scipy.cluster.hierarchy import fcluster, linkage
    from scipy.spatial.distance import squareform

    z = linkage(squareform(d, checks=False), method="average")
    labels = fcluster(z, m, criterion="maxclust")
    groups = {}
    for i, lab in enumerate(labels):
        groups.setdefault(lab, []).append(i)
    return sorted(groups.values())
