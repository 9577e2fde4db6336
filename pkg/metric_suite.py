"""
Ranking evaluation metrics as functions on symmetric groups.

Every metric has a batch form working on (m, n) arrays of 1-based images
(one ranking per row); the scalar functions wrap it. Undefined values
(zero denominators) are NaN inside batch arrays and None from the scalar API.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import gmean

from config import RELEVANT_SIZE
from constants import (
    EXTENSION_METRICS, METRIC_CATALOGUE, METRIC_NOTES, RELEVANCE_DEPENDENT,
)
from perm_core import DimensionError, Permutation

logger = logging.getLogger(__name__)

ArrayLike = Union[Permutation, Sequence[int], np.ndarray]

# Metrics built on pair counts need at least two positions
PAIR_METRICS = ("kendall_tau", "spearman_rho", "ndpm")


class UnknownMetricError(ValueError):
    """Metric name is not in the registry"""


class MetricDomainError(ValueError):
    """Metric applied outside its domain (length, family or arity)"""


@dataclass(frozen=True)
class MetricDescriptor:
    """Registry entry for one metric"""

    id: str
    family: str
    arity: int
    orientation: str  # "higher" or "lower" is more similar
    supports_at_k: bool = True
    bounded_range: Optional[Tuple[float, float]] = None
    uses_relevance: bool = False
    min_length: int = 1
    note: str = ""

    @property
    def higher_is_better(self) -> bool:
        return self.orientation == "higher"


def _build_registry() -> Dict[str, MetricDescriptor]:
    registry = {}
    for name, (family, arity, orientation, bounds) in METRIC_CATALOGUE.items():
        registry[name] = MetricDescriptor(
            id=name,
            family=family,
            arity=arity,
            orientation=orientation,
            bounded_range=bounds,
            uses_relevance=family == "CMB" or name in RELEVANCE_DEPENDENT,
            min_length=2 if name in PAIR_METRICS else 1,
            note=METRIC_NOTES.get(name, ""),
        )
    return registry


REGISTRY: Dict[str, MetricDescriptor] = _build_registry()


def describe(metric: str) -> MetricDescriptor:
    try:
        return REGISTRY[metric]
    except KeyError:
        raise UnknownMetricError(f"Unknown metric {metric!r}; run 'rankeval list' for the catalogue")


def metric_names() -> List[str]:
    """All registry metrics in catalogue order"""
    return list(REGISTRY)


def core_metrics() -> List[str]:
    """The 33 catalogue metrics without registry extensions"""
    return [name for name in REGISTRY if name not in EXTENSION_METRICS]


def family_members(family: str) -> List[str]:
    return [name for name, desc in REGISTRY.items() if desc.family == family]


@dataclass(frozen=True)
class RelevanceConfig:
    """
    Sizes of the relevant set (top-j of the first ranking) and the retrieved
    set (top-k of the second ranking). k defaults to j.
    """

    j: int = RELEVANT_SIZE
    k: Optional[int] = None

    def __post_init__(self):
        if self.k is None:
            object.__setattr__(self, "k", self.j)
        if self.j < 1 or self.k < 1:
            raise MetricDomainError(f"Relevant/retrieved sizes must be >= 1, got j={self.j}, k={self.k}")

    def fit(self, n: int) -> "RelevanceConfig":
        """Clamp sizes larger than n to max(1, n // 2); sizes up to n are kept"""
        j, k = self.j, self.k
        if j <= n and k <= n:
            return self
        fallback = max(1, n // 2)
        j2 = j if j <= n else fallback
        k2 = k if k <= n else fallback
        logger.warning(f"Relevance sizes j={j}, k={k} exceed n={n}; clamped to j={j2}, k={k2}")
        return RelevanceConfig(j2, k2)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise MetricDomainError(f"Confusion counts must be non-negative: {self}")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricOptions:
    """Variant switches shared by every evaluation"""

    beta: float = 1.0
    mean_normalized: bool = False


DEFAULT_OPTIONS = MetricOptions()


# ==================== ARRAY PLUMBING ====================

def as_rows(values: ArrayLike) -> np.ndarray:
    """Coerce a permutation, a sequence or an array to a 2-D int64 array"""
    if isinstance(values, Permutation):
        values = values.image
    return np.atleast_2d(np.asarray(values, dtype=np.int64))


def _pair_rows(ref: ArrayLike, other: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    ref_rows = as_rows(ref)
    other_rows = as_rows(other)
    if ref_rows.shape[1] != other_rows.shape[1]:
        raise DimensionError(
            f"Rankings of different lengths: {ref_rows.shape[1]} vs {other_rows.shape[1]}"
        )
    ref_rows, other_rows = np.broadcast_arrays(ref_rows, other_rows)
    return ref_rows, other_rows


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.full(np.broadcast(num, den).shape, np.nan)
    np.divide(num, den, out=out, where=den != 0)
    return out


def _scalar(values: np.ndarray) -> Optional[float]:
    value = float(values[0])
    return None if np.isnan(value) else value


# ==================== CONFUSION-MATRIX METRICS ====================

def _true_positives(ref: np.ndarray, other: np.ndarray, j: int, k: int) -> np.ndarray:
    m, n = ref.shape
    rows = np.arange(m)[:, None]
    relevant = np.zeros((m, n + 1), dtype=bool)
    relevant[rows, ref[:, :j]] = True
    return relevant[rows, other[:, :k]].sum(axis=1).astype(np.int64)


def _cmb_from_counts(metric: str, tp, fp, fn, tn, beta: float = 1.0) -> np.ndarray:
    tp, fp, fn, tn = (np.asarray(x, dtype=np.int64) for x in (tp, fp, fn, tn))
    n = tp + fp + fn + tn
    tpr = _safe_div(tp, tp + fn)
    tnr = _safe_div(tn, tn + fp)
    fpr = _safe_div(fp, fp + tn)
    ppv = _safe_div(tp, tp + fp)
    npv = _safe_div(tn, tn + fn)

    if metric == "recall":
        return tpr
    if metric == "fnr":
        return _safe_div(fn, tp + fn)
    if metric == "fallout":
        return fpr
    if metric == "tnr":
        return tnr
    if metric == "precision":
        return ppv
    if metric == "fdr":
        return _safe_div(fp, tp + fp)
    if metric == "npv":
        return npv
    if metric == "for":
        return _safe_div(fn, tn + fn)
    if metric == "accuracy":
        return _safe_div(tp + tn, n)
    if metric == "ba":
        return (tpr + tnr) / 2.0
    if metric == "f1":
        b2 = beta * beta
        return _safe_div((1.0 + b2) * tp, (1.0 + b2) * tp + b2 * fn + fp)
    if metric == "fm":
        return np.sqrt(ppv * tpr)
    if metric == "mcc":
        den = np.sqrt(((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)).astype(np.float64))
        return _safe_div(tp * tn - fp * fn, den)
    if metric == "jaccard":
        return _safe_div(tp, tp + fp + fn)
    if metric == "markedness":
        return ppv + npv - 1.0
    if metric == "lr_minus":
        return _safe_div(1.0 - tpr, tnr)
    if metric == "informedness":
        return tpr + tnr - 1.0
    if metric == "pt":
        # TPR == FPR compared on integers: tp * (fp + tn) == fp * (tp + fn)
        degenerate = tp * (fp + tn) == fp * (tp + fn)
        den = np.where(degenerate, 0.0, tpr - fpr)
        return _safe_div(np.sqrt(tpr * fpr) - fpr, den)
    if metric == "lr_plus":
        return _safe_div(tpr, fpr)
    raise MetricDomainError(f"{metric!r} is not a confusion-matrix metric")


def confusion_counts(sigma: Permutation, tau: Permutation, cfg: Optional[RelevanceConfig] = None) -> ConfusionCounts:
    """
    Confusion cells for R = set(sigma|j) and S = set(tau|k).

    Args:
        sigma: Reference ranking (defines the relevant set)
        tau: Compared ranking (defines the retrieved set)
        cfg: Relevant/retrieved sizes

    Returns:
        ConfusionCounts with tp + fp + fn + tn = n
    """
    if sigma.n != tau.n:
        raise DimensionError(f"Rankings of different lengths: {sigma.n} vs {tau.n}")
    cfg = cfg or RelevanceConfig()
    n = sigma.n
    if cfg.j > n or cfg.k > n:
        raise MetricDomainError(f"Relevance sizes j={cfg.j}, k={cfg.k} exceed n={n}")
    ref, other = _pair_rows(sigma, tau)
    tp = int(_true_positives(ref, other, cfg.j, cfg.k)[0])
    return ConfusionCounts(tp=tp, fp=cfg.k - tp, fn=cfg.j - tp, tn=n - cfg.j - cfg.k + tp)


def cmb_metric(metric: str, counts: ConfusionCounts, beta: float = 1.0) -> Optional[float]:
    if describe(metric).family != "CMB":
        raise MetricDomainError(f"{metric!r} is not a confusion-matrix metric")
    return _scalar(_cmb_from_counts(metric, [counts.tp], [counts.fp], [counts.fn], [counts.tn], beta))


# ==================== ERROR-BASED METRICS ====================

def _error_batch(metric: str, a: np.ndarray, b: np.ndarray, mean_normalized: bool = False) -> np.ndarray:
    length = a.shape[1]
    d = a - b
    if metric in ("mse", "rmse"):
        total = (d * d).sum(axis=1).astype(np.float64)
        if mean_normalized:
            total = total / length
        return total if metric == "mse" else np.sqrt(total)
    if metric in ("mae", "rmae"):
        total = np.abs(d).sum(axis=1).astype(np.float64)
        if mean_normalized:
            total = total / length
        return total if metric == "mae" else np.sqrt(total)
    if metric == "mape":
        return 100.0 / length * (np.abs(d) / a).sum(axis=1)
    if metric == "smape":
        return 100.0 / length * (2.0 * np.abs(d) / (a + b)).sum(axis=1)
    if metric == "r2":
        centered = a - b.mean(axis=1, keepdims=True)
        return 1.0 - _safe_div((d * d).sum(axis=1), (centered * centered).sum(axis=1))
    raise MetricDomainError(f"{metric!r} is not an error-based metric")


def error_metric(metric: str, sigma: ArrayLike, tau: ArrayLike, mean_normalized: bool = False) -> Optional[float]:
    if describe(metric).family != "EB":
        raise MetricDomainError(f"{metric!r} is not an error-based metric")
    a, b = _pair_rows(sigma, tau)
    return _scalar(_error_batch(metric, a, b, mean_normalized))


# ==================== CORRELATION-BASED METRICS ====================

def _pair_sign_stats(a: np.ndarray, b: np.ndarray) -> Dict[str, np.ndarray]:
    """
    Ordered-pair sign sums for every row.

    Returns concordant/discordant counts over unordered pairs and the
    NDPM sums C_plus, C_minus, C_u, C_s over ordered pairs (i, j), i != j.
    """
    m, length = a.shape
    stats = {key: np.zeros(m, dtype=np.int64) for key in
             ("concordant", "discordant", "c_plus", "c_minus", "c_u", "c_s")}
    chunk = max(1, 4_000_000 // max(1, length * length))
    for start in range(0, m, chunk):
        stop = min(m, start + chunk)
        sa = np.sign(a[start:stop, :, None] - a[start:stop, None, :]).astype(np.int8)
        sb = np.sign(b[start:stop, :, None] - b[start:stop, None, :]).astype(np.int8)
        prod = sa.astype(np.int64) * sb
        stats["concordant"][start:stop] = (prod > 0).sum(axis=(1, 2)) // 2
        stats["discordant"][start:stop] = (prod < 0).sum(axis=(1, 2)) // 2
        stats["c_plus"][start:stop] = prod.sum(axis=(1, 2))
        stats["c_minus"][start:stop] = -prod.sum(axis=(1, 2))
        stats["c_u"][start:stop] = (sa.astype(np.int64) ** 2).sum(axis=(1, 2))
        stats["c_s"][start:stop] = (sb.astype(np.int64) ** 2).sum(axis=(1, 2))
    return stats


def _pearson(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """
    Row-wise Pearson correlation. On full permutations this is
    1 - 6 sum(d^2) / (n (n^2 - 1)); on @k prefixes the values are not 1..k,
    where only the correlation form stays within [-1, 1].
    """
    x = a - a.mean(axis=1, keepdims=True)
    y = b - b.mean(axis=1, keepdims=True)
    return _safe_div((x * y).sum(axis=1), np.sqrt((x * x).sum(axis=1) * (y * y).sum(axis=1)))


def _correlation_batch(metric: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    length = a.shape[1]
    if metric in PAIR_METRICS and length < 2:
        raise MetricDomainError(f"{metric} needs at least 2 positions, got {length}")
    if metric == "spearman_rho":
        return _pearson(a, b)
    stats = _pair_sign_stats(a, b)
    if metric == "kendall_tau":
        return (stats["concordant"] - stats["discordant"]) / comb(length, 2)
    if metric == "kendall_distance":
        return stats["discordant"].astype(np.float64)
    if metric == "ndpm":
        c_u0 = stats["c_u"] - stats["c_plus"] - stats["c_minus"]
        return _safe_div(stats["c_minus"] + 0.5 * c_u0, stats["c_u"])
    raise MetricDomainError(f"{metric!r} is not a correlation-based metric")


def _check_pairwise(sigma: Permutation, tau: Permutation) -> None:
    if sigma.n != tau.n:
        raise DimensionError(f"Rankings of different lengths: {sigma.n} vs {tau.n}")


def kendall_tau(sigma: Permutation, tau: Permutation) -> float:
    _check_pairwise(sigma, tau)
    return float(_correlation_batch("kendall_tau", *_pair_rows(sigma, tau))[0])


def kendall_distance(sigma: Permutation, tau: Permutation) -> int:
    _check_pairwise(sigma, tau)
    if sigma.n == 1:
        return 0
    return int(_correlation_batch("kendall_distance", *_pair_rows(sigma, tau))[0])


def spearman_rho(sigma: Permutation, tau: Permutation) -> float:
    _check_pairwise(sigma, tau)
    return float(_correlation_batch("spearman_rho", *_pair_rows(sigma, tau))[0])


def ndpm(sigma: Permutation, tau: Permutation) -> float:
    _check_pairwise(sigma, tau)
    return float(_correlation_batch("ndpm", *_pair_rows(sigma, tau))[0])


# ==================== CUMULATIVE-GAIN METRICS ====================

def _discounts(length: int) -> np.ndarray:
    return 1.0 / np.log2(np.arange(2, length + 2, dtype=np.float64))


def idcg(n: int, length: Optional[int] = None) -> float:
    """Maximum DCG over S_n, reached by sigma(i) = n - i + 1, truncated at length"""
    length = n if length is None else length
    gains = np.arange(n, n - length, -1, dtype=np.float64)
    return float((gains * _discounts(length)).sum())


def _gain_batch(metric: str, b: np.ndarray, length: int, top: int) -> np.ndarray:
    n = b.shape[1]
    if metric in ("dcg", "ndcg"):
        values = (b[:, :length] * _discounts(length)).sum(axis=1)
        return values if metric == "dcg" else values / idcg(n, length)
    head = b[:, :top].astype(np.float64)
    if metric == "mrr":
        return (1.0 / head).mean(axis=1)
    if metric == "mean_rank":
        return head.mean(axis=1)
    if metric == "gmr":
        return gmean(head, axis=1)
    raise MetricDomainError(f"{metric!r} is not a cumulative-gain metric")


def dcg(sigma: ArrayLike) -> float:
    rows = as_rows(sigma)
    return float(_gain_batch("dcg", rows, rows.shape[1], rows.shape[1])[0])


def ndcg(sigma: ArrayLike) -> float:
    rows = as_rows(sigma)
    return float(_gain_batch("ndcg", rows, rows.shape[1], rows.shape[1])[0])


def positional_metric(metric: str, sigma: Permutation, cfg: Optional[RelevanceConfig] = None) -> float:
    """
    MRR, GMR or meanRank over the first j positions of sigma.

    Args:
        metric: One of mrr, gmr, mean_rank
        sigma: Ranking whose first j values are aggregated
        cfg: Relevance sizes; j = |R|

    Returns:
        The metric value
    """
    if metric not in RELEVANCE_DEPENDENT:
        raise MetricDomainError(f"{metric!r} is not a positional metric")
    cfg = cfg or RelevanceConfig()
    if cfg.j > sigma.n:
        raise MetricDomainError(f"|R| = {cfg.j} exceeds n = {sigma.n}")
    rows = as_rows(sigma)
    return float(_gain_batch(metric, rows, rows.shape[1], cfg.j)[0])


@lru_cache(maxsize=None)
def _power_base(x: int) -> Tuple[int, int]:
    """Write x >= 2 as b**r with r maximal"""
    for r in range(x.bit_length(), 1, -1):
        b = round(x ** (1.0 / r))
        for candidate in (b - 1, b, b + 1):
            if candidate >= 2 and candidate ** r == x:
                return candidate, r
    return x, 1


def dcg_signature(sigma: ArrayLike, length: Optional[int] = None) -> Tuple[Tuple[int, Fraction], ...]:
    """
    Exact DCG as rational coefficients over the discounts 1/log2(b).

    1/log2(b**r) = (1/r) * 1/log2(b), so every discount is a rational
    multiple of 1/log2(b) for a base b that is not a perfect power; base 2
    carries the rational part. Equal signatures mean equal DCG values.
    """
    image = as_rows(sigma)[0]
    length = len(image) if length is None else length
    coefficients: Dict[int, Fraction] = {}
    for position in range(1, length + 1):
        base, power = _power_base(position + 1)
        coefficients[base] = coefficients.get(base, Fraction(0)) + Fraction(int(image[position - 1]), power)
    return tuple(sorted((b, c) for b, c in coefficients.items() if c != 0))


# ==================== DISPATCH ====================

@lru_cache(maxsize=None)
def _fitted(cfg: RelevanceConfig, n: int) -> RelevanceConfig:
    """RelevanceConfig.fit, warning once per configuration and length"""
    return cfg.fit(n)


def evaluate_batch(
    metric: str,
    ref: ArrayLike,
    other: ArrayLike,
    cfg: Optional[RelevanceConfig] = None,
    k: Optional[int] = None,
    options: MetricOptions = DEFAULT_OPTIONS,
) -> np.ndarray:
    """
    Evaluate a metric row by row.

    Args:
        metric: Registry name
        ref: Reference rankings, (m, n) or a single ranking broadcast to all rows
        other: Compared rankings, (m, n)
        cfg: Relevant/retrieved sizes (clamped when larger than n)
        k: Evaluate @k when given
        options: F-beta and mean-normalization switches

    Returns:
        Float array of length m, NaN where the value is undefined
    """
    desc = describe(metric)
    a, b = _pair_rows(ref, other)
    n = b.shape[1]
    if k is not None:
        if not desc.supports_at_k:
            raise MetricDomainError(f"{metric} has no @k form")
        if not 1 <= k <= n:
            raise MetricDomainError(f"k = {k} outside 1..{n}")
    cfg = _fitted(cfg or RelevanceConfig(), n)
    length = n if k is None else k

    if desc.family == "CMB":
        j_size, k_size = (cfg.j, cfg.k) if k is None else (k, k)
        tp = _true_positives(a, b, j_size, k_size)
        return _cmb_from_counts(metric, tp, k_size - tp, j_size - tp, n - j_size - k_size + tp, options.beta)
    if desc.family == "EB":
        return _error_batch(metric, a[:, :length], b[:, :length], options.mean_normalized)
    if desc.family == "CB":
        return _correlation_batch(metric, a[:, :length], b[:, :length])
    top = cfg.j if k is None else k
    return _gain_batch(metric, b, length, top)


def evaluate(
    metric: str,
    sigma: ArrayLike,
    tau: ArrayLike,
    cfg: Optional[RelevanceConfig] = None,
    options: MetricOptions = DEFAULT_OPTIONS,
) -> Optional[float]:
    """Scalar metric value; arity-one metrics are applied to tau. None if undefined."""
    return _scalar(evaluate_batch(metric, sigma, tau, cfg, None, options))


def evaluate_at_k(
    metric: str,
    sigma: ArrayLike,
    tau: ArrayLike,
    k: int,
    cfg: Optional[RelevanceConfig] = None,
    options: MetricOptions = DEFAULT_OPTIONS,
) -> Optional[float]:
    return _scalar(evaluate_batch(metric, sigma, tau, cfg, k, options))


def oriented(metric: str, values: np.ndarray) -> np.ndarray:
    """Flip lower-is-better metrics so that larger always means closer"""
    return values if describe(metric).higher_is_better else -values


def exact_key(metric: str, tau: ArrayLike):
    """Exact comparison key for metrics whose float values can tie spuriously"""
    if metric in ("dcg", "ndcg"):
        return dcg_signature(tau)
    return None

