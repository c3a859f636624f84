"""Two-component Gaussian mixture fitting and activity threshold rules."""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import special, stats

from grnformer.activity.models import (
    DistributionClass,
    GaussianMixtureModel,
    ThresholdDecision,
    ThresholdMethod,
)
from grnformer.config import ActivityConfig
from grnformer.errors import ContractError, DegenerateDataError, NumericError

logger = logging.getLogger(__name__)

_Params = Tuple[np.ndarray, np.ndarray, np.ndarray]


def _log_joint(x: np.ndarray, weights: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    """(n, 2) matrix of log(pi_k) + log N(x | mu_k, var_k)."""
    return np.log(weights)[None, :] + stats.norm.logpdf(x[:, None], means[None, :], np.sqrt(variances)[None, :])


def _quantile_split(x: np.ndarray, floor: float) -> _Params:
    ordered = np.sort(x)
    half = ordered.size // 2
    low, high = ordered[:half], ordered[half:]
    weights = np.array([low.size, high.size], dtype=np.float64) / ordered.size
    means = np.array([low.mean(), high.mean()])
    variances = np.maximum(np.array([low.var(), high.var()]), floor)
    return weights, means, variances


def _jitter(base: _Params, x: np.ndarray, rng: np.random.Generator, floor: float) -> _Params:
    weights, means, variances = base
    spread = float(x.std())
    means = means + rng.normal(0.0, 0.25 * spread, size=2)
    variances = np.maximum(variances * rng.uniform(0.5, 1.5, size=2), floor)
    weights = np.clip(weights + rng.uniform(-0.2, 0.2, size=2), 0.05, None)
    return weights / weights.sum(), means, variances


def _run_em(
    x: np.ndarray,
    params: _Params,
    tolerance: float,
    max_iter: int,
    floor: float,
) -> Tuple[_Params, List[float]]:
    weights, means, variances = params
    trace: List[float] = []
    n = x.size
    for _ in range(max_iter):
        log_joint = _log_joint(x, weights, means, variances)
        log_norm = special.logsumexp(log_joint, axis=1)
        ll = float(log_norm.sum())
        if trace and ll - trace[-1] < tolerance:
            trace.append(ll)
            break
        trace.append(ll)
        resp = np.exp(log_joint - log_norm[:, None])
        counts = resp.sum(axis=0)
        # a component that lost every sample keeps its previous parameters
        if np.any(counts <= 0):
            break
        weights = counts / n
        means = (resp * x[:, None]).sum(axis=0) / counts
        variances = np.maximum((resp * (x[:, None] - means[None, :]) ** 2).sum(axis=0) / counts, floor)
    else:
        # the last M-step has not been scored yet
        trace.append(float(special.logsumexp(_log_joint(x, weights, means, variances), axis=1).sum()))
    return (weights, means, variances), trace


def fit_gmm2(samples: np.ndarray, seed: int = 0, config: Optional[ActivityConfig] = None) -> GaussianMixtureModel:
    """Fit a two-component mixture by EM, keeping the best of several restarts.

    The first restart starts from a lower/upper half split of the sorted
    samples; later restarts jitter that start. Each run stops when the
    log-likelihood improves by less than the tolerance or after the
    iteration limit.

    Args:
        samples: 1-D sample vector
        seed: seeds the restart jitter
        config: EM constants (defaults from ActivityConfig)

    Raises:
        ContractError: too few or non-finite samples
        DegenerateDataError: all samples are equal
    """
    config = config or ActivityConfig()
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < config.min_samples:
        raise ContractError(f"need at least {config.min_samples} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ContractError("samples must be finite")
    if np.ptp(x) == 0:
        raise DegenerateDataError(f"all {x.size} samples equal {x[0]}")

    floor = config.variance_floor
    rng = np.random.default_rng(seed)
    base = _quantile_split(x, floor)
    best: Optional[Tuple[_Params, List[float]]] = None
    for restart in range(config.em_restarts):
        start = base if restart == 0 else _jitter(base, x, rng, floor)
        params, trace = _run_em(x, start, config.em_tolerance, config.em_max_iter, floor)
        logger.debug("EM restart %d: %d iterations, log-likelihood %.6f", restart, len(trace), trace[-1])
        if best is None or trace[-1] > best[1][-1]:
            best = (params, trace)

    (weights, means, variances), trace = best
    order = np.argsort(means, kind="stable")
    weights, means, variances = weights[order], means[order], variances[order]
    weights = weights / weights.sum()
    return GaussianMixtureModel(
        weights=(float(weights[0]), float(1.0 - weights[0])),
        means=(float(means[0]), float(means[1])),
        variances=(float(variances[0]), float(variances[1])),
        log_likelihood=trace[-1],
        trace=tuple(trace),
        n_iter=len(trace) - 1,
    )


def classify_distribution(gmm: GaussianMixtureModel, pi_min: float = 0.15, separation: float = 2.0) -> DistributionClass:
    """Bimodal iff both components carry weight and their means are well apart."""
    sigma_max = max(gmm.sigmas)
    gap = gmm.means[1] - gmm.means[0]
    if min(gmm.weights) >= pi_min and gap >= separation * sigma_max:
        return DistributionClass.BIMODAL
    return DistributionClass.SKEWED


def weighted_density(gmm: GaussianMixtureModel, component: int, x: float) -> float:
    return gmm.weights[component] * float(stats.norm.pdf(x, gmm.means[component], gmm.sigmas[component]))


def _intersection(gmm: GaussianMixtureModel) -> float:
    (p1, p2), (m1, m2) = gmm.weights, gmm.means
    v1, v2 = gmm.variances
    s1, s2 = gmm.sigmas
    a = 1.0 / (2 * v2) - 1.0 / (2 * v1)
    b = m1 / v1 - m2 / v2
    c = m2 * m2 / (2 * v2) - m1 * m1 / (2 * v1) + np.log(p1 / s1) - np.log(p2 / s2)

    if abs(a) <= 1e-12 * max(1.0 / v1, 1.0 / v2):
        if b == 0:
            raise NumericError("component densities never intersect (identical means and variances)")
        roots = [-c / b]
    else:
        disc = b * b - 4 * a * c
        if disc < 0:
            raise NumericError("component densities never intersect")
        q = -0.5 * (b + np.copysign(np.sqrt(disc), b))
        roots = [q / a, c / q] if q != 0 else [-b / (2 * a)]

    slack = 1e-12 * max(1.0, abs(m1), abs(m2))
    inside = [r for r in roots if m1 - slack <= r <= m2 + slack]
    if not inside:
        raise NumericError(f"no density intersection in [{m1}, {m2}]: roots {roots}")
    root = min(inside, key=lambda r: abs(r - 0.5 * (m1 + m2)))
    slope = 2 * a * root + b
    if slope != 0:
        root = root - (a * root * root + b * root + c) / slope
    return float(min(max(root, m1), m2))


def select_threshold(gmm: GaussianMixtureModel, classification: DistributionClass) -> ThresholdDecision:
    """Intersection of the weighted densities (Bimodal) or mu + 2 sigma of the dominant component (Skewed).

    Raises:
        NumericError: a Bimodal model whose densities do not cross between the means
    """
    if classification == DistributionClass.BIMODAL:
        return ThresholdDecision(classification, _intersection(gmm), ThresholdMethod.INTERSECTION, gmm)
    dom = gmm.dominant
    threshold = gmm.means[dom] + 2.0 * gmm.sigmas[dom]
    return ThresholdDecision(classification, float(threshold), ThresholdMethod.MU_PLUS_2_SIGMA, gmm)


def decide_threshold(samples: np.ndarray, seed: int = 0, config: Optional[ActivityConfig] = None) -> ThresholdDecision:
    """Fit, classify and threshold one score column.

    Columns without spread get a ``CONSTANT`` decision at their value.
    """
    config = config or ActivityConfig()
    x = np.asarray(samples, dtype=np.float64)
    if x.size and np.ptp(x) == 0:
        logger.warning("activity column is constant (%.6g); no cell will be active", x[0])
        return ThresholdDecision(DistributionClass.SKEWED, float(x[0]), ThresholdMethod.CONSTANT)
    gmm = fit_gmm2(x, seed=seed, config=config)
    classification = classify_distribution(gmm, config.pi_min, config.separation)
    return select_threshold(gmm, classification)


__all__ = [
    "fit_gmm2",
    "classify_distribution",
    "weighted_density",
    "select_threshold",
    "decide_threshold",
]
