"""Executable checks of the stability and recovery guarantees.

Every suite is seeded; per-trial generators are derived from
``SeedSequence([seed, ...trial key])`` so results do not depend on the order
or the number of threads used to run trials.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import ActivationTable, EmpiricalDistribution, FeatureRef, HiddenStateStore, ProjectionSpec, build_distribution
from .errors import InvalidRegime, MissingParam, SemotError
from .matching import MatchResult, certify_match, select_match
from .transport import Gaussian, GroundCost, Solver, cost_matrix, exact_ot, wasserstein, wasserstein_1d

EXACT = Solver.exact()

# ---------------------------------------------------------------------------
# stability constants

_TABLE = {
    # kind: (required params, K, B)
    "euclidean": (("R_phi", "L_phi"), lambda p: p["L_phi"], lambda p: 2 * p["R_phi"]),
    "sqeuclidean": (("R_phi", "L_phi"), lambda p: 4 * p["R_phi"] * p["L_phi"], lambda p: 4 * p["R_phi"] ** 2),
    "mahalanobis": (
        ("R_phi", "L_phi", "A_op"),
        lambda p: p["A_op"] * p["L_phi"],
        lambda p: 2 * p["R_phi"] * p["A_op"],
    ),
    "sq_mahalanobis": (
        ("R_phi", "L_phi", "A_op"),
        lambda p: 4 * p["R_phi"] * p["A_op"] ** 2 * p["L_phi"],
        lambda p: 4 * p["R_phi"] ** 2 * p["A_op"] ** 2,
    ),
    "cosine": (("r_phi", "L_phi"), lambda p: 2 * p["L_phi"] / p["r_phi"], lambda p: 2.0),
    "flow_direction": (("L_u",), lambda p: p["L_u"], lambda p: 2.0),
    "sq_flow_direction": (("L_u",), lambda p: 4 * p["L_u"], lambda p: 4.0),
    "flow": (
        ("R_phi", "L_phi", "L_u", "lambda_x", "lambda_u"),
        lambda p: p["lambda_x"] * p["L_phi"] + p["lambda_u"] * p["L_u"],
        lambda p: 2 * (p["lambda_x"] * p["R_phi"] + p["lambda_u"]),
    ),
    "sq_flow": (
        ("R_phi", "L_phi", "L_u", "lambda_x", "lambda_u"),
        lambda p: 4 * p["lambda_x"] * p["R_phi"] * p["L_phi"] + 4 * p["lambda_u"] * p["L_u"],
        lambda p: 4 * (p["lambda_x"] * p["R_phi"] ** 2 + p["lambda_u"]),
    ),
}
STABILITY_KINDS = tuple(_TABLE)


@dataclass(frozen=True)
class StabilityConstants:
    """Worst-case Lipschitz constant ``K``, on-support range ``B`` and ``K/B``."""

    kind: str
    K: float
    B: float
    K_bar: float
    params: dict = field(default_factory=dict)


def stability_constants(kind: str, params: dict | None = None, **kw) -> StabilityConstants:
    """Constants of a ground cost on a ball of radius ``R_phi``.

    Parameters: ``R_phi`` (support radius), ``r_phi`` (minimum norm, cosine),
    ``L_phi`` and ``L_u`` (Lipschitz constants of the representation map and
    of the normalised flow field), ``lambda_x``, ``lambda_u`` (composite
    weights), and ``A_op`` or ``A`` (Mahalanobis matrix or its operator norm).
    """
    if kind not in _TABLE:
        raise SemotError(f"unknown cost kind {kind!r}; expected one of {STABILITY_KINDS}")
    p = dict(params or {}, **kw)
    if "A_op" not in p and p.get("A") is not None:
        p["A_op"] = float(np.linalg.norm(np.atleast_2d(np.asarray(p["A"], dtype=np.float64)), 2))
    p.pop("A", None)
    required, k_fn, b_fn = _TABLE[kind]
    missing = [name for name in required if p.get(name) is None]
    if missing:
        raise MissingParam(f"{kind} needs {', '.join(missing)}")
    used = {name: float(p[name]) for name in required}
    for name, v in used.items():
        if name.startswith("lambda"):
            if v < 0:
                raise SemotError(f"{name} must be >= 0")
        elif not v > 0:
            raise SemotError(f"{name} must be > 0")
    if "lambda_x" in used and used["lambda_x"] == used["lambda_u"] == 0:
        raise SemotError("lambda_x and lambda_u cannot both be zero")
    k, b = float(k_fn(used)), float(b_fn(used))
    return StabilityConstants(kind, k, b, k / b, used)


# ---------------------------------------------------------------------------
# sample complexity

REGIMES = ("d1", "d2", "d_gt_2", "finite_support")


def sufficient_samples(
    gamma: float,
    regime: str,
    delta: float = 0.05,
    C: float = 1.0,
    d: int | None = None,
    S: int | None = None,
    D_max: float | None = None,
) -> int:
    """Sample size after which the rate bound drops below ``gamma / 2``.

    ``C`` is the unspecified rate constant of each regime and must be
    supplied by the caller. ``d`` is needed for ``d_gt_2``; ``S`` and
    ``D_max`` for ``finite_support`` (which does not use ``C``).
    """
    if regime not in REGIMES:
        raise InvalidRegime(f"unknown regime {regime!r}; expected one of {REGIMES}")
    if not gamma > 0:
        raise SemotError("gamma must be > 0")
    if not 0 < delta < 1:
        raise SemotError("delta must lie in (0, 1)")
    if not C > 0:
        raise SemotError("C must be > 0")
    log_inv = math.log(1.0 / delta)
    if regime == "d1":
        return max(1, math.ceil(4 * C**2 / gamma**2 * log_inv))
    if regime == "finite_support":
        if S is None or D_max is None:
            raise MissingParam("finite_support needs S and D_max")
        if S < 1 or not D_max > 0:
            raise SemotError("need S >= 1 and D_max > 0")
        return max(1, math.ceil(4 * D_max**2 / gamma**2 * (S + log_inv)))
    if regime == "d_gt_2":
        if d is None:
            raise MissingParam("d_gt_2 needs d")
        if d <= 2:
            raise SemotError("d_gt_2 needs d > 2")
        return max(1, math.ceil((2 * C / gamma) ** d))
    return _d2_samples(gamma, log_inv, C)


def _d2_samples(gamma: float, log_inv: float, C: float) -> int:
    def ok(t):
        return C * (math.log(t) + log_inv) / math.sqrt(t) < gamma / 2

    if ok(1):
        return 1
    # (ln T + L) / sqrt(T) rises until T = e^(2 - L), then decreases, so no T
    # before the peak qualifies once T = 1 does not
    lo = max(1, math.ceil(math.exp(2 - log_inv)))
    if ok(lo):
        return lo
    hi = 2 * lo
    while not ok(hi):
        lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# reports


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, rows: Sequence[dict], columns: Sequence[str] | None = None):
    columns = list(columns or (rows[0].keys() if rows else []))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


@dataclass
class SuiteReport:
    name: str
    trials: int
    violations: int
    metrics: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def summary(self) -> dict:
        return {"suite": self.name, "trials": self.trials, "violations": self.violations,
                "passed": self.passed, **self.metrics}

    def write(self, out_dir) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        if self.rows:
            p = os.path.join(out_dir, f"{self.name}.csv")
            write_csv(p, self.rows)
            paths.append(p)
        p = os.path.join(out_dir, f"{self.name}_summary.json")
        with open(p, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        paths.append(p)
        return paths


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def _run_trials(fn, keys, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, keys))
    return [fn(k) for k in keys]


# ---------------------------------------------------------------------------
# activation rescaling invariance

INVARIANCE_ALPHAS = (1e-3, 0.37, 1.0, 42.0, 1e3)


def _invariance_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, 1, trial)
    n_tokens = int(rng.integers(8, 60))
    dims = rng.integers(1, 5, size=2)
    store = HiddenStateStore({l: rng.standard_normal((n_tokens, int(dims[l]))) for l in (0, 1)})
    sparsity = rng.uniform(0.1, 0.9)
    entries = {}
    for f in (FeatureRef(0, 0), FeatureRef(1, 0)):
        mask = rng.random(n_tokens) < sparsity
        mask[rng.integers(n_tokens)] = True
        toks = np.nonzero(mask)[0]
        if rng.random() < 0.5:
            # coarse grid -> many exact ties
            vals = rng.integers(1, 5, size=toks.size) / 8.0
        else:
            vals = rng.lognormal(0.0, 1.0, size=toks.size)
        entries[f] = (toks, vals)
    table = ActivationTable(n_tokens, entries)
    alpha = float(INVARIANCE_ALPHAS[int(rng.integers(len(INVARIANCE_ALPHAS)))])
    k = int(rng.integers(1, 20))
    spec = [ProjectionSpec.target(0), ProjectionSpec.concat(), ProjectionSpec.identity()][int(rng.integers(3))]
    target, source = FeatureRef(0, 0), FeatureRef(1, 0)
    if spec.mode == "identity":
        source = FeatureRef(0, 0)
    scaled = table.scaled(alpha, [target])

    mu = build_distribution(store, target, table, k, spec)
    mu_s = build_distribution(store, target, scaled, k, spec)
    nu = build_distribution(store, source, table, k, spec)
    same_idx = bool(np.array_equal(mu.tokens, mu_s.tokens))
    w_err = float(np.max(np.abs(mu.weights - mu_s.weights))) if same_idx else math.inf
    w = wasserstein(GroundCost.euclidean(), mu, nu, EXACT)
    w_s = wasserstein(GroundCost.euclidean(), mu_s, nu, EXACT)
    ok = same_idx and w_err <= 1e-12 and abs(w - w_s) <= 1e-12
    return {"trial": trial, "alpha": alpha, "k": k, "projection": spec.mode, "selected": int(mu.size),
            "same_indices": same_idx, "max_weight_diff": w_err, "w": w, "w_scaled": w_s, "ok": ok}


def run_invariance_suite(seed: int = 0, trials: int = 1000, threads: int = 1) -> SuiteReport:
    """Rescaling a feature's activations by ``alpha > 0`` leaves its distribution unchanged."""
    rows = _run_trials(lambda t: _invariance_trial(seed, t), range(trials), threads)
    bad = sum(not r["ok"] for r in rows)
    return SuiteReport("invariance", trials, bad, {
        "max_weight_diff": max(r["max_weight_diff"] for r in rows),
        "max_w_diff": max(abs(r["w"] - r["w_scaled"]) for r in rows),
    }, rows)


# ---------------------------------------------------------------------------
# stability under measure / cost perturbation and the flow refinement

STABILITY_SLACK = 1e-9


def _random_measure(rng, n, d, scale=1.0):
    return EmpiricalDistribution(scale * rng.standard_normal((n, d)), rng.dirichlet(np.ones(n)))


def _perturb(rng, mu: EmpiricalDistribution, size):
    """Jitter atoms, re-weight, and sometimes add or drop atoms."""
    pts = mu.support + size * rng.standard_normal(mu.support.shape)
    w = mu.weights * rng.uniform(0.5, 1.5, size=mu.size)
    if rng.random() < 0.3:
        pts = np.vstack([pts, rng.standard_normal((1, pts.shape[1]))])
        w = np.append(w, rng.uniform(0.05, 0.3))
    elif rng.random() < 0.3 and mu.size > 1:
        pts, w = pts[1:], w[1:]
    return EmpiricalDistribution(pts, w / w.sum())


class SineField:
    """Smooth analytic velocity field ``u_m(z) = sin(W_m z + b_m)``."""

    def __init__(self, rng, d, n_times=3, s=2):
        self.w = rng.standard_normal((n_times, s, d))
        self.b = rng.standard_normal((n_times, s))

    def __call__(self, z):
        z = np.atleast_2d(z)
        return np.sin(np.einsum("msd,nd->nms", self.w, z) + self.b[None])


def _stability_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, 2, trial)
    d = int(rng.integers(1, 4))
    mu = _random_measure(rng, int(rng.integers(1, 7)), d)
    nu = _random_measure(rng, int(rng.integers(1, 7)), d)
    size = float(rng.choice([0.0, 1e-3, 0.05, 0.3, 1.0]))
    mu_t, nu_t = _perturb(rng, mu, size), _perturb(rng, nu, size)
    euc = GroundCost.euclidean()

    # coordinate-wise Lipschitz bound, euclidean cost (L_x = L_y = 1)
    lhs1 = abs(wasserstein(euc, mu, nu, EXACT) - wasserstein(euc, mu_t, nu_t, EXACT))
    rhs1 = wasserstein(euc, mu, mu_t, EXACT) + wasserstein(euc, nu, nu_t, EXACT)

    # ground-cost perturbation: random non-negative cost within eps_c of c
    c = cost_matrix(euc, mu, nu)
    eps_c = float(rng.uniform(0, 0.5))
    c_t = np.maximum(c + eps_c * rng.uniform(-1, 1, size=c.shape), 0.0)
    lhs2 = abs(exact_ot(c, mu.weights, nu.weights).cost - exact_ot(c_t, mu.weights, nu.weights).cost)
    rhs2 = float(np.max(np.abs(c - c_t)))

    # flow cost dominates its weighted parts
    fld = SineField(rng, d)
    lx, lu = rng.uniform(0, 2, size=2)
    w_flow = wasserstein(GroundCost.flow(fld, lx, lu), mu, nu, EXACT)
    w_pos = wasserstein(GroundCost.sqeuclidean(), mu, nu, EXACT)
    w_dir = wasserstein(GroundCost.flow(fld, 0.0, 1.0), mu, nu, EXACT)
    lhs3 = lx * w_pos + lu * w_dir

    # tight case: two Diracs, move one away from the other along their axis
    x, y = rng.standard_normal(d), rng.standard_normal(d)
    t = float(rng.uniform(0, 2))
    axis = (x - y) / np.linalg.norm(x - y)
    x_t = x + t * axis
    lhs4 = abs(wasserstein(euc, EmpiricalDistribution.dirac(x), EmpiricalDistribution.dirac(y), EXACT)
               - wasserstein(euc, EmpiricalDistribution.dirac(x_t), EmpiricalDistribution.dirac(y), EXACT))
    rhs4 = wasserstein(euc, EmpiricalDistribution.dirac(x), EmpiricalDistribution.dirac(x_t), EXACT)

    row = {
        "trial": trial, "dim": d, "perturbation": size,
        "measure_lhs": lhs1, "measure_rhs": rhs1, "measure_slack": rhs1 - lhs1,
        "cost_lhs": lhs2, "cost_rhs": rhs2, "cost_slack": rhs2 - lhs2,
        "flow_w": w_flow, "flow_parts": lhs3, "flow_slack": w_flow - lhs3,
        "tight_t": t, "tight_gap": abs(lhs4 - rhs4),
    }
    row["ok"] = (
        row["measure_slack"] >= -STABILITY_SLACK
        and row["cost_slack"] >= -STABILITY_SLACK
        and row["flow_slack"] >= -STABILITY_SLACK
        and row["tight_gap"] <= STABILITY_SLACK
    )
    return row


def run_stability_suite(seed: int = 0, trials: int = 500, threads: int = 1) -> SuiteReport:
    """Measure-perturbation, cost-perturbation and flow-refinement inequalities."""
    rows = _run_trials(lambda t: _stability_trial(seed, t), range(trials), threads)
    bad = sum(not r["ok"] for r in rows)
    ratios = [r["measure_lhs"] / r["measure_rhs"] for r in rows if r["measure_rhs"] > 0]
    return SuiteReport("stability", trials, bad, {
        "worst_measure_slack": min(r["measure_slack"] for r in rows),
        "worst_cost_slack": min(r["cost_slack"] for r in rows),
        "worst_flow_slack": min(r["flow_slack"] for r in rows),
        "worst_tight_gap": max(r["tight_gap"] for r in rows),
        "worst_measure_ratio": max(ratios) if ratios else 0.0,
    }, rows)


# ---------------------------------------------------------------------------
# matching recovery under a score margin


def _recovery_trial(seed: int, trial: int) -> dict:
    rng = _rng(seed, 3, trial)
    d = int(rng.integers(1, 4))
    n_sources = int(rng.integers(2, 8))
    target = _random_measure(rng, int(rng.integers(1, 6)), d)
    sources = [_random_measure(rng, int(rng.integers(1, 6)), d) for _ in range(n_sources)]
    scores = np.array([wasserstein(GroundCost.euclidean(), target, s, EXACT) for s in sources])
    best, _, delta = select_match(scores)
    eps = float(delta * rng.uniform(0.0, 1.0))
    if rng.random() < 0.5:
        # worst case: push the winner up and the runner-up down by eps
        noise = rng.uniform(-eps, eps, size=n_sources)
        noise[best] = eps
        noise[np.argsort(scores)[1]] = -eps
    else:
        noise = rng.uniform(-eps, eps, size=n_sources)
    noisy_best, _, _ = select_match(scores + noise)
    result = MatchResult(FeatureRef(0, 0), FeatureRef(1, best), float(scores[best]), delta, n_sources)
    certified = certify_match(result, eps)
    recovered = noisy_best == best
    return {"trial": trial, "n_sources": n_sources, "delta": delta, "epsilon": eps,
            "certified": certified, "recovered": recovered, "ok": recovered or not certified}


def run_recovery_suite(seed: int = 0, trials: int = 500, threads: int = 1) -> SuiteReport:
    """Perturbing every score by at most ``eps`` keeps the argmin once ``margin > 2 eps``."""
    rows = _run_trials(lambda t: _recovery_trial(seed, t), range(trials), threads)
    bad = sum(not r["ok"] for r in rows)
    certified = sum(r["certified"] for r in rows)
    return SuiteReport("recovery", trials, bad, {
        "certified": certified,
        "recovered_uncertified": sum(r["recovered"] and not r["certified"] for r in rows),
        "failed_uncertified": sum(not r["recovered"] and not r["certified"] for r in rows),
    }, rows)


# ---------------------------------------------------------------------------
# stability constants: empirical Lipschitz/range check on random supports


def _ball(rng, n, d, radius, min_norm=0.0):
    v = rng.standard_normal((n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rng.uniform(min_norm, radius, size=(n, 1))
    return v * r


def run_constants_suite(seed: int = 0, trials: int = 200, threads: int = 1) -> SuiteReport:
    """Sampled Lipschitz ratios and cost values must stay below the tabulated ``K`` and ``B``.

    Points are drawn in a ball of radius ``R_phi`` with the identity map
    (``L_phi = 1``); cosine points additionally satisfy ``|z| >= r_phi``.
    """

    def trial(t):
        rng = _rng(seed, 4, t)
        d = int(rng.integers(1, 5))
        radius = float(rng.uniform(0.5, 3.0))
        a = rng.standard_normal((d, d))
        a_op = float(np.linalg.norm(a, 2))
        r_min = radius * float(rng.uniform(0.1, 0.9))
        out = []
        cases = [
            ("euclidean", GroundCost.euclidean(), {}, 0.0),
            ("sqeuclidean", GroundCost.sqeuclidean(), {}, 0.0),
            ("mahalanobis", GroundCost.mahalanobis(a), {"A_op": a_op}, 0.0),
            ("sq_mahalanobis", None, {"A_op": a_op}, 0.0),
            ("cosine", GroundCost.cosine(r_min), {"r_phi": r_min}, r_min),
        ]
        for kind, cost, extra, min_norm in cases:
            sc = stability_constants(kind, R_phi=radius, L_phi=1.0, **extra)
            z = _ball(rng, 30, d, radius, min_norm)
            zb = _ball(rng, 30, d, radius, min_norm)
            zp = _ball(rng, 30, d, radius, min_norm)
            if cost is None:
                def pair(x, y):
                    return GroundCost.mahalanobis(a).pairwise(x, y) ** 2
            else:
                pair = cost.pairwise
            diff = np.abs(np.diag(pair(z, zp)) - np.diag(pair(zb, zp)))
            step = np.linalg.norm(z - zb, axis=1)
            keep = step > 1e-12
            ratio = float(np.max(diff[keep] / step[keep])) if keep.any() else 0.0
            cmax = float(np.max(pair(np.vstack([z, zb]), zp)))
            ok = ratio <= sc.K * (1 + 1e-12) + 1e-12 and cmax <= sc.B * (1 + 1e-12) + 1e-12
            out.append({"trial": t, "kind": kind, "K": sc.K, "B": sc.B, "K_bar": sc.K_bar,
                        "max_ratio": ratio, "max_cost": cmax, "ok": ok})
        return out

    rows = [r for block in _run_trials(trial, range(trials), threads) for r in block]
    bad = sum(not r["ok"] for r in rows)
    return SuiteReport("constants", trials, bad, {
        "worst_ratio_over_K": max(r["max_ratio"] / r["K"] for r in rows),
        "worst_cost_over_B": max(r["max_cost"] / r["B"] for r in rows),
    }, rows)


# ---------------------------------------------------------------------------
# Voronoi recovery on a one-dimensional Gaussian

DEFAULT_T_GRID = (10, 30, 100, 300, 1000, 3000, 10000)
TRIAL_COLUMNS = ("T", "trial", "w1", "threshold", "certified", "recovered", "q1", "q2")
SUMMARY_COLUMNS = ("T", "mean_w1", "recovery_rate", "certified_rate")


@dataclass(frozen=True)
class VoronoiTrialReport:
    T: int
    trial: int
    w1_error: float
    threshold: float
    certified: bool
    recovered: bool
    empirical_margin: float
    scores: tuple[float, ...]


@dataclass
class VoronoiExperiment:
    mean: float
    sigma: float
    centers: tuple[float, ...]
    population_scores: tuple[float, ...]
    assignment: int
    gamma: float
    trials: list[VoronoiTrialReport]
    summary: list[dict]
    margins: list[dict]
    slope: float

    @property
    def threshold(self) -> float:
        return self.gamma / 2

    @property
    def false_certificates(self) -> int:
        return sum(r.certified and not r.recovered for r in self.trials)

    def trial_rows(self) -> list[dict]:
        rows = []
        for r in self.trials:
            row = {"T": r.T, "trial": r.trial, "w1": r.w1_error, "threshold": r.threshold,
                   "certified": r.certified, "recovered": r.recovered}
            for k, q in enumerate(r.scores):
                row[f"q{k + 1}"] = q
            rows.append(row)
        return rows

    def write(self, out_dir) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        n = len(self.centers)
        cols = list(TRIAL_COLUMNS[:6]) + [f"q{k + 1}" for k in range(n)]
        paths = [os.path.join(out_dir, f) for f in
                 ("voronoi_trials.csv", "voronoi_summary.csv", "voronoi_margins.csv", "voronoi_fit.json")]
        write_csv(paths[0], self.trial_rows(), cols)
        write_csv(paths[1], self.summary, SUMMARY_COLUMNS)
        write_csv(paths[2], self.margins, ("T", "margin_mean", "margin_std"))
        with open(paths[3], "w") as fh:
            json.dump({
                "mean": self.mean, "sigma": self.sigma, "centers": list(self.centers),
                "population_scores": list(self.population_scores),
                "assignment": self.assignment, "gamma": self.gamma, "threshold": self.threshold,
                "slope": self.slope, "false_certificates": self.false_certificates,
            }, fh, indent=2)
            fh.write("\n")
        return paths


def population_scores(mean: float, sigma: float, centers: Sequence[float]) -> np.ndarray:
    g = Gaussian(mean, sigma)
    return np.array([g.mean_abs_deviation(xi) for xi in centers])


def voronoi_margin(scores) -> tuple[int, float]:
    """``(argmin, gap to the runner-up)``; the assignment must be unique."""
    s = np.asarray(scores, dtype=np.float64)
    order = np.argsort(s, kind="stable")
    return int(order[0]), float(s[order[1]] - s[order[0]])


def _voronoi_trial(seed, t, trial, g: Gaussian, xi: np.ndarray, k_star: int, threshold: float) -> VoronoiTrialReport:
    rng = _rng(seed, t, trial)
    z = g.mean + g.sigma * rng.standard_normal(t)
    w1 = wasserstein_1d(z, g)
    q = np.abs(z[:, None] - xi[None, :]).mean(axis=0)
    k_hat = int(np.argmin(q))
    others = np.delete(q, k_star)
    return VoronoiTrialReport(
        t, trial, w1, threshold, bool(w1 < threshold), k_hat == k_star,
        float(others.min() - q[k_star]), tuple(float(v) for v in q),
    )


def run_voronoi_experiment(
    m: float = -1.0,
    sigma: float = 0.6,
    centers: Sequence[float] = (-2.0, 2.0),
    T_grid: Sequence[int] = DEFAULT_T_GRID,
    trials: int = 200,
    seed: int = 0,
    threads: int = 1,
) -> VoronoiExperiment:
    """Empirical W1 radius versus the Voronoi margin for ``N(m, sigma^2)`` samples.

    A trial is certified when the empirical W1 to the population Gaussian is
    below ``gamma / 2``; recovered when the empirical assignment equals the
    population one. The fitted slope is the OLS slope of ``ln mean_w1`` on
    ``ln T``.
    """
    if not sigma > 0:
        raise SemotError("sigma must be > 0")
    xi = np.asarray(centers, dtype=np.float64)
    if xi.ndim != 1 or xi.size < 2:
        raise SemotError("need at least two centers")
    grid = [int(t) for t in T_grid]
    if not grid or min(grid) < 1:
        raise SemotError("T_grid must be a nonempty list of positive sizes")
    if trials < 1:
        raise SemotError("trials must be >= 1")
    g = Gaussian(float(m), float(sigma))
    pop = population_scores(m, sigma, xi)
    k_star, gamma = voronoi_margin(pop)
    if not gamma > 0:
        raise SemotError("population assignment is not unique")
    keys = [(t, i) for t in grid for i in range(trials)]
    reports = _run_trials(lambda key: _voronoi_trial(seed, key[0], key[1], g, xi, k_star, gamma / 2), keys, threads)

    summary, margins = [], []
    for t in grid:
        block = [r for r in reports if r.T == t]
        summary.append({
            "T": t,
            "mean_w1": float(np.mean([r.w1_error for r in block])),
            "recovery_rate": float(np.mean([r.recovered for r in block])),
            "certified_rate": float(np.mean([r.certified for r in block])),
        })
        em = np.array([r.empirical_margin for r in block])
        margins.append({"T": t, "margin_mean": float(em.mean()), "margin_std": float(em.std())})
    if len(set(grid)) > 1:
        x = np.log([s["T"] for s in summary])
        y = np.log([s["mean_w1"] for s in summary])
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = math.nan
    return VoronoiExperiment(float(m), float(sigma), tuple(map(float, xi)), tuple(map(float, pop)),
                             k_star, gamma, reports, summary, margins, slope)


def voronoi_report(exp: VoronoiExperiment) -> SuiteReport:
    """Pass/fail view of the experiment: a certificate must never be wrong."""
    return SuiteReport("voronoi", len(exp.trials), exp.false_certificates, {
        "gamma": exp.gamma, "slope": exp.slope,
        "final_recovery_rate": exp.summary[-1]["recovery_rate"],
        "certified": sum(r.certified for r in exp.trials),
    })
