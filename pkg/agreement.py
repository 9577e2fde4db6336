"""
Agreement between ranking metrics.

Two metrics are consistent on a pair of candidate rankings (mu, nu) when
they do not order them strictly oppositely relative to a reference sigma.
The agreement ratio is the fraction of sampled pairs on which they are
consistent.
"""
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from config import (
    AGREEMENT_N, AGREEMENT_SAMPLE_PAIRS, AGREEMENT_SAMPLE_RANKINGS, DEFAULT_SEED,
)
from metric_suite import (
    DEFAULT_OPTIONS, MetricOptions, RelevanceConfig, describe, evaluate_batch, oriented,
)
from perm_core import DimensionError, Permutation, identity, rng_for, sample_array, stream_id

logger = logging.getLogger(__name__)

# Rankings per worker task when computing metric values over T
CHUNK_ROWS = 1000


@dataclass(frozen=True)
class AgreementConfig:
    n: int = AGREEMENT_N
    reference: Optional[Permutation] = None
    sample_rankings: int = AGREEMENT_SAMPLE_RANKINGS
    sample_pairs: int = AGREEMENT_SAMPLE_PAIRS
    seed: int = DEFAULT_SEED
    relevance: RelevanceConfig = field(default_factory=RelevanceConfig)
    options: MetricOptions = DEFAULT_OPTIONS

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.sample_rankings < 2:
            raise ValueError(f"sample_rankings must be >= 2, got {self.sample_rankings}")
        if self.sample_pairs < 1:
            raise ValueError(f"sample_pairs must be >= 1, got {self.sample_pairs}")
        max_pairs = self.sample_rankings * (self.sample_rankings - 1)
        if self.sample_pairs > max_pairs:
            raise ValueError(
                f"sample_pairs = {self.sample_pairs} exceeds the {max_pairs} distinct ordered pairs of "
                f"{self.sample_rankings} rankings"
            )
        if self.reference is None:
            object.__setattr__(self, "reference", identity(self.n))
        elif self.reference.n != self.n:
            raise DimensionError(f"Reference has length {self.reference.n}, expected {self.n}")

    def as_dict(self) -> Dict:
        return {
            "n": self.n,
            "reference": str(self.reference),
            "sample_rankings": self.sample_rankings,
            "sample_pairs": self.sample_pairs,
            "seed": self.seed,
            "relevant_j": self.relevance.j,
            "retrieved_k": self.relevance.k,
            "beta": self.options.beta,
            "mean_normalized": self.options.mean_normalized,
        }


@dataclass(frozen=True)
class AgreementReport:
    metric_a: str
    metric_b: str
    ratio: Optional[float]
    pairs_evaluated: int
    pairs_skipped_undefined: int
    seed: int


@dataclass
class AgreementMatrix:
    """All pairwise ratios of one sampling campaign"""

    metrics: List[str]
    ratios: np.ndarray
    evaluated: np.ndarray
    skipped: np.ndarray
    config: AgreementConfig

    def report(self, metric_a: str, metric_b: str) -> AgreementReport:
        a, b = self.metrics.index(metric_a), self.metrics.index(metric_b)
        ratio = self.ratios[a, b]
        return AgreementReport(
            metric_a=metric_a,
            metric_b=metric_b,
            ratio=None if np.isnan(ratio) else float(ratio),
            pairs_evaluated=int(self.evaluated[a, b]),
            pairs_skipped_undefined=int(self.skipped[a, b]),
            seed=self.config.seed,
        )


def _consistency(values_a: np.ndarray, values_b: np.ndarray, first: np.ndarray, second: np.ndarray) -> Tuple[int, int]:
    """
    Count consistent and evaluated pairs for two oriented value vectors.

    Returns:
        (consistent, evaluated); pairs with an undefined value are not evaluated
    """
    da = values_a[first] - values_a[second]
    db = values_b[first] - values_b[second]
    defined = ~(np.isnan(da) | np.isnan(db))
    agree = np.sign(da[defined]) * np.sign(db[defined]) >= 0
    return int(agree.sum()), int(defined.sum())


def pair_consistent(
    m1: str,
    m2: str,
    sigma: Permutation,
    mu: Permutation,
    nu: Permutation,
    cfg: Optional[RelevanceConfig] = None,
    options: MetricOptions = DEFAULT_OPTIONS,
) -> Optional[bool]:
    """
    Consistency indicator of two metrics on one candidate pair.

    Args:
        m1: First metric
        m2: Second metric
        sigma: Reference ranking
        mu: First candidate
        nu: Second candidate
        cfg: Relevance sizes

    Returns:
        True unless the metrics order (mu, nu) strictly oppositely; None when
        either metric is undefined on either candidate
    """
    if not sigma.n == mu.n == nu.n:
        raise DimensionError(f"Rankings of different lengths: {sigma.n}, {mu.n}, {nu.n}")
    candidates = np.array([mu.image, nu.image], dtype=np.int64)
    first, second = np.array([0]), np.array([1])
    values = [
        oriented(m, evaluate_batch(m, sigma, candidates, cfg, options=options)) for m in (m1, m2)
    ]
    consistent, evaluated = _consistency(values[0], values[1], first, second)
    if evaluated == 0:
        return None
    return consistent == 1


# ==================== SAMPLING CAMPAIGN ====================

def _values_chunk(args) -> np.ndarray:
    """Worker: oriented values of every metric over rankings [start, stop) of T"""
    metrics, cfg, start, stop = args
    rows = sample_array(cfg.n, stop - start, cfg.seed, stream_id("agreement", "rankings"), start)
    return np.vstack([
        oriented(metric, evaluate_batch(metric, cfg.reference, rows, cfg.relevance, options=cfg.options))
        for metric in metrics
    ])


class AgreementCampaign:
    """
    One sampling campaign: the ranking set T and the index pairs drawn from it.

    Every ranking of T is regenerated from (seed, index), so metric values can
    be computed in any partition across workers; results are concatenated in
    index order.
    """

    def __init__(self, cfg: AgreementConfig, workers: int = 1):
        self.cfg = cfg
        self.workers = max(1, workers)
        self._pairs = None

    def rankings(self) -> np.ndarray:
        return sample_array(self.cfg.n, self.cfg.sample_rankings, self.cfg.seed, stream_id("agreement", "rankings"))

    def pairs(self) -> Tuple[np.ndarray, np.ndarray]:
        """Distinct ordered index pairs (a, b), a != b, in draw order"""
        if self._pairs is None:
            size = self.cfg.sample_rankings
            rng = rng_for(self.cfg.seed, stream_id("agreement", "pairs"), 0)
            codes = rng.choice(size * (size - 1), size=self.cfg.sample_pairs, replace=False)
            first = codes // (size - 1)
            rest = codes % (size - 1)
            second = np.where(rest < first, rest, rest + 1)
            self._pairs = (first.astype(np.int64), second.astype(np.int64))
        return self._pairs

    def _tasks(self, metrics: Sequence[str]) -> List[Tuple]:
        size = self.cfg.sample_rankings
        return [
            (list(metrics), self.cfg, start, min(size, start + CHUNK_ROWS))
            for start in range(0, size, CHUNK_ROWS)
        ]

    def metric_values(self, metrics: Sequence[str]) -> Dict[str, np.ndarray]:
        """Oriented values of every metric on every ranking of T"""
        for metric in metrics:
            describe(metric)
        if not metrics:
            return {}
        tasks = self._tasks(metrics)
        logger.info(f"Evaluating {len(metrics)} metrics on {self.cfg.sample_rankings} rankings ({self.workers} workers)")
        if self.workers > 1:
            with Pool(processes=self.workers) as pool:
                chunks = pool.map(_values_chunk, tasks)
        else:
            chunks = [_values_chunk(task) for task in tasks]

        table = np.hstack(chunks)
        return {metric: table[row] for row, metric in enumerate(metrics)}


def _ratio(consistent: int, evaluated: int) -> float:
    return consistent / evaluated if evaluated else float("nan")


def agreement_ratio(m1: str, m2: str, cfg: AgreementConfig, workers: int = 1) -> AgreementReport:
    """Estimated agreement ratio of two metrics over one sampled campaign"""
    matrix = agreement_matrix([m1, m2] if m1 != m2 else [m1], cfg, workers)
    return matrix.report(m1, m2)


def agreement_matrix(metrics: Sequence[str], cfg: AgreementConfig, workers: int = 1) -> AgreementMatrix:
    """
    Pairwise agreement ratios over the same sampled rankings and pairs.

    Args:
        metrics: Metric names (rows and columns, in order)
        cfg: Campaign configuration
        workers: Worker processes used for metric evaluation

    Returns:
        AgreementMatrix with symmetric ratios and a unit diagonal
    """
    metrics = list(metrics)
    campaign = AgreementCampaign(cfg, workers)
    values = campaign.metric_values(metrics)
    first, second = campaign.pairs()

    size = len(metrics)
    ratios = np.ones((size, size))
    evaluated = np.zeros((size, size), dtype=np.int64)
    skipped = np.zeros((size, size), dtype=np.int64)

    for a in range(size):
        for b in range(a, size):
            consistent, count = _consistency(values[metrics[a]], values[metrics[b]], first, second)
            ratio = 1.0 if a == b else _ratio(consistent, count)
            ratios[a, b] = ratios[b, a] = ratio
            evaluated[a, b] = evaluated[b, a] = count
            skipped[a, b] = skipped[b, a] = cfg.sample_pairs - count
            if cfg.sample_pairs - count:
                logger.warning(
                    f"{metrics[a]} / {metrics[b]}: {cfg.sample_pairs - count} of {cfg.sample_pairs} pairs "
                    f"skipped on undefined values"
                )
    logger.info(f"Agreement matrix over {size} metrics done ({cfg.sample_pairs} pairs)")
    return AgreementMatrix(metrics=metrics, ratios=ratios, evaluated=evaluated, skipped=skipped, config=cfg)
