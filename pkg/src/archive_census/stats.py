"""Numerical procedures: correlations, top-K list overlap, the stratified
video-coverage estimator, and logistic growth fitting.

Everything here is pure; the fitter is a damped least-squares loop with an
analytic Jacobian so accepted steps can be asserted monotone.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .store import TimeSeries, timestamp_to_epoch

logger = logging.getLogger(__name__)

__all__ = [
    "StatsError",
    "NoFitError",
    "spearman",
    "pearson",
    "topk_overlap",
    "StratumSummary",
    "StratumPlan",
    "CoverageReport",
    "stratified_sample",
    "summarize_strata",
    "estimate_coverage",
    "LogisticFit",
    "logistic_model",
    "logistic_jacobian",
    "fit_logistic",
    "fit_logistic_series",
    "STRATUM_COUNT",
]

STRATUM_COUNT = 17  # capture-count bins [2^i, 2^(i+1)) for i = 0..16


class StatsError(ValueError):
    pass


class NoFitError(StatsError):
    """Series too degenerate to fit a growth curve."""


# --- correlations -------------------------------------------------------------


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; ties share the mean of their positions."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation; constant input is an error."""
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(xa) != len(ya) or len(xa) < 2:
        raise StatsError("need two equal-length vectors of size >= 2")
    dx, dy = xa - xa.mean(), ya - ya.mean()
    sx, sy = np.sqrt((dx * dx).sum()), np.sqrt((dy * dy).sum())
    if sx == 0 or sy == 0:
        raise StatsError("correlation undefined for constant input")
    return float((dx * dy).sum() / (sx * sy))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average ranks (ties get mean rank)."""
    xa, ya = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(xa) != len(ya) or len(xa) < 2:
        raise StatsError("need two equal-length vectors of size >= 2")
    rx, ry = _average_ranks(xa), _average_ranks(ya)
    if np.all(rx == rx[0]) or np.all(ry == ry[0]):
        raise StatsError("rank correlation undefined: zero rank variance")
    return pearson(rx, ry)


def topk_overlap(
    a: Sequence[tuple[str, float]],
    b: Sequence[tuple[str, float]],
    k: int,
) -> tuple[int, float | None, float | None]:
    """Compare two ranked (key, subscriber count) lists at depth k.

    Returns (shared keys, Spearman over the shared keys' ranks, Pearson
    over their counts); correlations are None when undefined.  Ties are
    broken by key before truncation so the cut at k is reproducible.
    """
    k_eff = min(k, len(a), len(b))
    if k_eff < k:
        logger.warning("k=%d clamped to %d (list length)", k, k_eff)

    def top(entries):
        ordered = sorted(entries, key=lambda kv: (-kv[1], kv[0]))[:k_eff]
        ranks = {key: rank for rank, (key, _) in enumerate(ordered, start=1)}
        values = {key: value for key, value in ordered}
        return ranks, values

    ranks_a, values_a = top(a)
    ranks_b, values_b = top(b)
    shared = sorted(set(ranks_a) & set(ranks_b))
    count = len(shared)
    if count < 2:
        return count, None, None
    try:
        rho = spearman([ranks_a[k_] for k_ in shared], [ranks_b[k_] for k_ in shared])
    except StatsError:
        rho = None
    try:
        r = pearson([values_a[k_] for k_ in shared], [values_b[k_] for k_ in shared])
    except StatsError:
        r = None
    return count, rho, r


# --- stratified coverage estimator ---------------------------------------------


@dataclass(frozen=True)
class StratumPlan:
    """A sampled stratum awaiting external video counts."""

    index: int
    low: int  # inclusive capture-count bound, 2^i
    high: int  # exclusive bound, 2^(i+1)
    population_size: int
    keys: tuple[str, ...]


@dataclass(frozen=True)
class StratumSummary:
    index: int
    low: int
    high: int
    population_size: int
    sample_size: int
    sample_mean: float
    sample_variance: float


@dataclass(frozen=True)
class CoverageReport:
    weighted_mean: float
    se_standard: float
    se_paper_literal: float
    known_ids: int
    ci95: tuple[float, float]
    method: str


def stratified_sample(
    rows: Iterable[tuple[str, int]], per_stratum_n: int, seed: int
) -> list[StratumPlan]:
    """Uniform sample without replacement of min(per_stratum_n, N_i) keys
    from each capture-count stratum [2^i, 2^(i+1)), i = 0..16."""
    strata: dict[int, list[str]] = {i: [] for i in range(STRATUM_COUNT)}
    for key, count in rows:
        if count < 1:
            continue
        index = count.bit_length() - 1  # floor(log2(count))
        if index < STRATUM_COUNT:
            strata[index].append(key)
    plans = []
    for i in range(STRATUM_COUNT):
        population = sorted(strata[i])
        rng = random.Random(f"{seed}:{i}")
        if per_stratum_n >= len(population):
            chosen = population
        else:
            chosen = sorted(rng.sample(population, per_stratum_n))
        plans.append(
            StratumPlan(
                index=i,
                low=2**i,
                high=2 ** (i + 1),
                population_size=len(population),
                keys=tuple(chosen),
            )
        )
    return plans


def summarize_strata(
    plans: Iterable[StratumPlan], video_counts: dict[str, float]
) -> list[StratumSummary]:
    """Fill sampled strata with externally gathered per-channel video
    counts; sampled keys with no count are dropped with a warning."""
    summaries = []
    for plan in plans:
        observed = [video_counts[k] for k in plan.keys if k in video_counts]
        missing = len(plan.keys) - len(observed)
        if missing:
            logger.warning(
                "stratum %d: %d sampled keys lack video counts", plan.index, missing
            )
        if not observed:
            continue
        arr = np.asarray(observed, dtype=float)
        variance = float(arr.var(ddof=1)) if len(arr) > 1 else 0.0
        summaries.append(
            StratumSummary(
                index=plan.index,
                low=plan.low,
                high=plan.high,
                population_size=plan.population_size,
                sample_size=len(arr),
                sample_mean=float(arr.mean()),
                sample_variance=variance,
            )
        )
    return summaries


def estimate_coverage(
    strata: Sequence[StratumSummary], known_ids: int, method: str = "standard"
) -> CoverageReport:
    """Weighted mean of per-stratum video counts and a 95% CI on total
    videos covered.

    Two standard errors are reported: the stratified-sampling SE
    sqrt(sum w_i^2 s_i^2 / n_i), and a literal across-strata reading,
    sqrt(population variance of the stratum means).  `method` picks which
    one feeds the interval.
    """
    if method not in ("standard", "paper_literal"):
        raise StatsError(f"unknown method {method!r}")
    included = [s for s in strata if s.population_size > 0]
    dropped = len(list(strata)) - len(included)
    if dropped:
        logger.warning("%d empty strata excluded; weights renormalized", dropped)
    if not included:
        raise StatsError("no non-empty strata")
    for s in included:
        if s.sample_size < 1:
            raise StatsError(f"stratum {s.index} has an empty sample")

    n_total = sum(s.population_size for s in included)
    weights = np.array([s.population_size / n_total for s in included])
    means = np.array([s.sample_mean for s in included])
    weighted_mean = float(weights @ means)

    se_standard = float(
        np.sqrt(
            sum(
                w**2 * s.sample_variance / s.sample_size
                for w, s in zip(weights, included)
            )
        )
    )
    se_paper_literal = float(np.sqrt(means.var(ddof=0)))

    se = se_standard if method == "standard" else se_paper_literal
    low = max(0.0, known_ids * (weighted_mean - 1.96 * se))
    high = max(0.0, known_ids * (weighted_mean + 1.96 * se))
    return CoverageReport(
        weighted_mean=weighted_mean,
        se_standard=se_standard,
        se_paper_literal=se_paper_literal,
        known_ids=known_ids,
        ci95=(low, high),
        method=method,
    )


# --- logistic growth fitting ----------------------------------------------------


@dataclass(frozen=True)
class LogisticFit:
    """S-curve S(t) = K / (1 + exp(-r (t - t0))), t in epoch days."""

    K: float
    r: float
    t0: float
    rss: float
    converged: bool
    iterations: int
    rss_history: tuple[float, ...] = ()


def logistic_model(params: Sequence[float], t: np.ndarray) -> np.ndarray:
    K, r, t0 = params
    z = np.clip(-r * (t - t0), -700.0, 700.0)
    return K / (1.0 + np.exp(z))


def logistic_jacobian(params: Sequence[float], t: np.ndarray) -> np.ndarray:
    """d model / d (K, r, t0), shape (len(t), 3)."""
    K, r, t0 = params
    z = np.clip(-r * (t - t0), -700.0, 700.0)
    e = np.exp(z)
    denom = (1.0 + e) ** 2
    d_k = 1.0 / (1.0 + e)
    d_r = K * (t - t0) * e / denom
    d_t0 = -K * r * e / denom
    return np.column_stack([d_k, d_r, d_t0])


def _initial_params(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    k0 = 1.2 * float(y.max())
    above = t[y >= k0 / 2]
    t00 = float(above[0]) if len(above) else float(t[len(t) // 2])
    mask = (y > 0) & (y < k0)
    r0 = 0.1
    if mask.sum() >= 2:
        logit = np.log(y[mask] / (k0 - y[mask]))
        slope = np.polyfit(t[mask], logit, 1)[0]
        if np.isfinite(slope) and slope > 0:
            r0 = float(slope)
    return np.array([k0, r0, t00])


def fit_logistic(
    t: Sequence[float],
    y: Sequence[float],
    max_iterations: int = 200,
    rel_tol: float = 1e-9,
) -> LogisticFit:
    """Damped least squares on the logistic curve.

    Steps that do not reduce the residual sum of squares are rejected and
    the damping raised, so the recorded rss_history is non-increasing.
    """
    ta = np.asarray(t, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(ta) < 5:
        raise NoFitError("need at least 5 points")
    if len(np.unique(ya)) < 2:
        raise NoFitError("need at least 2 distinct subscriber values")
    order = np.argsort(ta)
    ta, ya = ta[order], ya[order]
    diffs = np.diff(ya)
    if np.all(diffs <= 0):
        raise NoFitError("monotone-decreasing series is not growth")

    params = _initial_params(ta, ya)
    residual = logistic_model(params, ta) - ya
    rss = float(residual @ residual)
    history = [rss]
    lam = 1e-3
    converged = False
    iterations = 0

    for _ in range(max_iterations):
        jac = logistic_jacobian(params, ta)
        jtj = jac.T @ jac
        gradient = jac.T @ residual
        accepted = False
        for _damp in range(50):
            damped = jtj + lam * np.diag(np.diag(jtj))
            try:
                step = np.linalg.solve(damped, -gradient)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(damped, -gradient, rcond=None)[0]
            candidate = params + step
            if candidate[0] > 0:
                cand_residual = logistic_model(candidate, ta) - ya
                cand_rss = float(cand_residual @ cand_residual)
                if np.isfinite(cand_rss) and cand_rss <= rss:
                    accepted = True
                    break
            lam = min(lam * 10.0, 1e12)
        if not accepted:
            break
        iterations += 1
        improvement = (rss - cand_rss) / rss if rss > 0 else 0.0
        params, residual, rss = candidate, cand_residual, cand_rss
        history.append(rss)
        lam = max(lam / 10.0, 1e-12)
        if improvement < rel_tol:
            converged = True
            break

    return LogisticFit(
        K=float(params[0]),
        r=float(params[1]),
        t0=float(params[2]),
        rss=rss,
        converged=converged,
        iterations=iterations,
        rss_history=tuple(history),
    )


def fit_logistic_series(series: TimeSeries, **kwargs) -> LogisticFit:
    """Fit a stored subscriber series; time is converted to epoch days."""
    t = [timestamp_to_epoch(p.timestamp) / 86400.0 for p in series.points]
    y = [float(p.subs.value) for p in series.points]
    return fit_logistic(t, y, **kwargs)
