"""
Mechanical checks of formal properties of ranking metrics.

Provable claims are checked by exhaustive search over small symmetric
groups; statistical claims follow sampling protocols at larger n. Each
check returns a PropertyReport; property_table runs a metrics x properties
grid of them.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from math import comb
from multiprocessing import Pool
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import (
    BOUNDS_LENGTHS, BOUNDS_SAMPLES, DEFAULT_SEED, EQUALITY_RTOL, EXHAUSTIVE_LIMIT,
    EXHAUSTIVE_SIZES, PROTOCOL_N, PROTOCOL_PAIRS, RELEVANT_SIZE, ROBUSTNESS_2_TOLERANCE,
    ROBUSTNESS_2_TRIPLES, ROBUSTNESS_ROUNDING, ROBUSTNESS_SWAP_SAMPLES,
    STABILITY_PASS_FRACTION,
)
from constants import (
    AMBIGUOUS_CELLS, FAIL, PASS, PROPERTIES, INDISCERNIBLE_COLUMNS, INDISCERNIBLE_EXEMPT,
    INDISCERNIBLE_EXPECTED, INDISCERNIBLE_ROWS, UNDEFINED,
)
from metric_suite import (
    DEFAULT_OPTIONS, MetricDomainError, MetricOptions, RelevanceConfig, dcg_signature,
    describe, evaluate_batch, exact_key, family_members, kendall_tau, oriented,
)
from perm_core import (
    EnumerationLimitError, SwapSpec, all_swaps, compose_arrays, enumerate_array, identity,
    reverse, rng_for, stream_id, swap, swap_array, swaps_of_width, to_text_image,
)

logger = logging.getLogger(__name__)

# The triangle inequality is cubic in |S_n|
DISTANCE_LIMIT = 5
MAX_WITNESSES = 3
# ioi falls back to a swap search above the enumeration limit; wsd never enumerates
PROPERTY_SIZE_LIMITS = {"distance": DISTANCE_LIMIT, "ioi": 64, "wsd": 64}
ORACLE_SUBJECTS = ("dcg-ioi", "kendall-swap", "distance-axioms", "wsd", "indiscernibles", "sensitivity")
ORACLE_LIMITS = {
    "dcg-ioi": EXHAUSTIVE_LIMIT,
    "kendall-swap": 64,
    "distance-axioms": DISTANCE_LIMIT,
    "wsd": 64,
    "sensitivity": EXHAUSTIVE_LIMIT,
}
ORACLE_DEFAULT_N = {
    "dcg-ioi": 6,
    "kendall-swap": 10,
    "distance-axioms": 4,
    "wsd": 8,
    "sensitivity": 6,
    "indiscernibles": 10,
}


@dataclass(frozen=True)
class ProtocolConfig:
    n: int = PROTOCOL_N
    pair_count: int = PROTOCOL_PAIRS
    swap_samples: Optional[int] = ROBUSTNESS_SWAP_SAMPLES  # None samples every swap
    pass_fraction: float = STABILITY_PASS_FRACTION
    rounding: int = ROBUSTNESS_ROUNDING
    exhaustive_n: Dict[str, int] = field(default_factory=lambda: dict(EXHAUSTIVE_SIZES))
    seed: int = DEFAULT_SEED
    relevance: RelevanceConfig = field(default_factory=RelevanceConfig)
    options: MetricOptions = DEFAULT_OPTIONS
    triples: int = ROBUSTNESS_2_TRIPLES
    tolerance: float = ROBUSTNESS_2_TOLERANCE
    bounds_samples: int = BOUNDS_SAMPLES
    bounds_lengths: Tuple[int, ...] = BOUNDS_LENGTHS

    def __post_init__(self):
        if not 0.0 < self.pass_fraction <= 1.0:
            raise ValueError(f"pass_fraction must lie in (0, 1], got {self.pass_fraction}")
        if self.n < 2:
            raise ValueError(f"Protocols need n >= 2, got {self.n}")
        if self.pair_count < 1 or self.triples < 1 or self.bounds_samples < 1:
            raise ValueError("Sample counts must be >= 1")
        if self.swap_samples is not None and self.swap_samples < 1:
            raise ValueError(f"swap_samples must be >= 1 or None, got {self.swap_samples}")
        sizes = dict(EXHAUSTIVE_SIZES)
        sizes.update(self.exhaustive_n)
        object.__setattr__(self, "exhaustive_n", sizes)
        for prop, size in sizes.items():
            limit = PROPERTY_SIZE_LIMITS.get(prop, EXHAUSTIVE_LIMIT)
            if not 2 <= size <= limit:
                raise EnumerationLimitError(f"Exhaustive size for {prop} must lie in 2..{limit}, got {size}")

    def size_for(self, prop: str) -> int:
        return self.exhaustive_n[prop]

    def as_dict(self) -> Dict:
        data = asdict(self)
        data["bounds_lengths"] = list(self.bounds_lengths)
        return data

    @property
    def config_hash(self) -> str:
        payload = json.dumps(self.as_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class Witness:
    """Counterexample or example: rankings (images) and the metric values involved"""

    label: str
    rankings: Tuple[Tuple[int, ...], ...]
    values: Tuple[Optional[float], ...] = ()

    def to_text(self) -> str:
        images = " | ".join(to_text_image(r) for r in self.rankings)
        values = " | ".join("undef" if v is None else f"{v:.12g}" for v in self.values)
        text = f"{self.label}: {images}"
        return f"{text} -> {values}" if values else text


@dataclass(frozen=True)
class PropertyReport:
    metric: str
    property: str
    verdict: str
    witnesses: Tuple[Witness, ...] = ()
    statistic: Optional[float] = None
    config_hash: str = ""
    n: Optional[int] = None
    note: str = ""

    @property
    def ambiguous(self) -> bool:
        return (self.metric, self.property) in AMBIGUOUS_CELLS


@dataclass
class PropertyGrid:
    metrics: List[str]
    properties: List[str]
    reports: Dict[Tuple[str, str], PropertyReport]

    def report(self, metric: str, prop: str) -> PropertyReport:
        return self.reports[(metric, prop)]

    def verdict(self, metric: str, prop: str) -> str:
        return self.reports[(metric, prop)].verdict

    def rows(self) -> List[List[PropertyReport]]:
        return [[self.reports[(m, p)] for m in self.metrics] for p in self.properties]


# ==================== HELPERS ====================

def _as_value(x) -> Optional[float]:
    x = float(x)
    return None if np.isnan(x) else x


def _rows(*arrays) -> Tuple[Tuple[int, ...], ...]:
    return tuple(tuple(int(v) for v in np.asarray(a).ravel()) for a in arrays)


def values_equal(x: np.ndarray, y: np.ndarray, rtol: float = EQUALITY_RTOL) -> np.ndarray:
    """Element-wise equality up to rtol; two undefined values are equal"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    both_nan = np.isnan(x) & np.isnan(y)
    with np.errstate(invalid="ignore"):
        close = np.abs(x - y) <= rtol * np.maximum(np.abs(x), np.abs(y))
    return both_nan | close


def _random_perms(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    return rng.permuted(np.tile(np.arange(1, n + 1, dtype=np.int64), (count, 1)), axis=1)


def _cell_rng(cfg: ProtocolConfig, metric: str, prop: str) -> np.random.Generator:
    return rng_for(cfg.seed, stream_id(metric, prop), 0)


def _report(metric: str, prop: str, verdict: str, cfg: ProtocolConfig, **kwargs) -> PropertyReport:
    note = kwargs.pop("note", "")
    if (metric, prop) in AMBIGUOUS_CELLS:
        flag = f"published mark disputed: {AMBIGUOUS_CELLS[(metric, prop)]}"
        note = f"{note}; {flag}" if note else flag
    return PropertyReport(metric=metric, property=prop, verdict=verdict, config_hash=cfg.config_hash, note=note, **kwargs)


def _find_equal_pair(metric: str, candidates: np.ndarray, values: np.ndarray) -> Optional[Tuple[int, int]]:
    """Indices of two distinct candidates with equal values (exact keys for dcg/ndcg)"""
    if exact_key(metric, candidates[0]) is not None:
        seen: Dict = {}
        for index, row in enumerate(candidates):
            key = exact_key(metric, row)
            if key in seen:
                return seen[key], index
            seen[key] = index
        return None
    order = np.argsort(values, kind="stable")
    ordered = values[order]
    equal = values_equal(ordered[:-1], ordered[1:])
    hits = np.flatnonzero(equal)
    if hits.size == 0:
        return None
    first = hits[0]
    return int(order[first]), int(order[first + 1])


# ==================== IDENTITY OF INDISCERNIBLES ====================

def check_ioi(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    """
    Injectivity of tau -> m(id, tau).

    Exhaustive over S_n when n is within the enumeration limit; above it only
    id and the single swaps are searched, so a pass cannot be certified and
    the verdict is undefined when no witness turns up.
    """
    n = cfg.size_for("ioi")
    describe(metric)
    exhaustive = n <= EXHAUSTIVE_LIMIT
    if exhaustive:
        candidates = enumerate_array(n)
    else:
        candidates = np.vstack([identity(n).as_array()] + [swap(n, s).as_array() for s in all_swaps(n)])
    values = evaluate_batch(metric, identity(n), candidates, cfg.relevance, options=cfg.options)
    pair = _find_equal_pair(metric, candidates, values)

    if pair is not None:
        a, b = pair
        witness = Witness("equal values", _rows(candidates[a], candidates[b]), (_as_value(values[a]), _as_value(values[b])))
        return _report(metric, "ioi", FAIL, cfg, witnesses=(witness,), n=n)
    if exhaustive:
        return _report(metric, "ioi", PASS, cfg, n=n, statistic=float(len(candidates)))
    return _report(metric, "ioi", UNDEFINED, cfg, n=n, note="no witness among id and single swaps; n above the enumeration limit")


# ==================== SYMMETRY ====================

def check_symmetry(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    n = cfg.size_for("symmetry")
    desc = describe(metric)
    perms = enumerate_array(n)
    first, second = np.triu_indices(len(perms), 1)
    a, b = perms[first], perms[second]
    forward = evaluate_batch(metric, a, b, cfg.relevance, options=cfg.options)
    backward = evaluate_batch(metric, b, a, cfg.relevance, options=cfg.options)
    mismatch = np.flatnonzero(~values_equal(forward, backward))

    witnesses = tuple(
        Witness("m(s, v) != m(v, s)", _rows(a[i], b[i]), (_as_value(forward[i]), _as_value(backward[i])))
        for i in mismatch[:MAX_WITNESSES]
    )
    note = "arity-one metrics are not symmetric by convention" if desc.arity == 1 else ""
    if witnesses or desc.arity == 1:
        return _report(metric, "symmetry", FAIL, cfg, witnesses=witnesses, n=n, note=note)
    return _report(metric, "symmetry", PASS, cfg, n=n, statistic=float(len(first)))


# ==================== ROBUSTNESS ====================

def _swap_draws(rng: np.random.Generator, n: int, count: int, per_pair: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    """0-based swap positions for every (pair, swap) combination, pair-major"""
    if per_pair is None:
        i, j = np.triu_indices(n, 1)
        return np.tile(i, count), np.tile(j, count)
    i = rng.integers(0, n, size=count * per_pair)
    j = (i + rng.integers(1, n, size=count * per_pair)) % n
    return i, j


def check_robustness_1(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    """
    Average change of m(sigma, nu) under a single swap nu -> nu o (i j).

    Args:
        metric: Registry name
        cfg: Protocol configuration (n, pair_count, swap_samples, rounding)

    Returns:
        Report whose statistic is the rounded average; pass iff it rounds to zero
    """
    describe(metric)
    n = cfg.n
    rng = _cell_rng(cfg, metric, "robustness_1")
    sigma = _random_perms(rng, cfg.pair_count, n)
    nu = _random_perms(rng, cfg.pair_count, n)
    per_pair = cfg.swap_samples if cfg.swap_samples is not None else comb(n, 2)
    pos_i, pos_j = _swap_draws(rng, n, cfg.pair_count, cfg.swap_samples)
    base = evaluate_batch(metric, sigma, nu, cfg.relevance, options=cfg.options)

    total, evaluated = 0.0, 0
    chunk_pairs = max(1, 100_000 // per_pair)
    for start in range(0, cfg.pair_count, chunk_pairs):
        stop = min(cfg.pair_count, start + chunk_pairs)
        rows = slice(start * per_pair, stop * per_pair)
        owners = np.repeat(np.arange(start, stop), per_pair)
        swapped = nu[owners].copy()
        idx = np.arange(len(owners))
        swapped[idx, pos_i[rows]], swapped[idx, pos_j[rows]] = nu[owners, pos_j[rows]], nu[owners, pos_i[rows]]
        after = evaluate_batch(metric, sigma[owners], swapped, cfg.relevance, options=cfg.options)
        diffs = np.abs(after - base[owners])
        defined = ~np.isnan(diffs)
        total += float(diffs[defined].sum())
        evaluated += int(defined.sum())

    skipped = cfg.pair_count * per_pair - evaluated
    if evaluated == 0:
        return _report(metric, "robustness_1", UNDEFINED, cfg, n=n, note="every comparison undefined")
    statistic = round(total / evaluated, cfg.rounding)
    verdict = PASS if statistic == 0.0 else FAIL
    logger.debug(f"robustness_1 {metric}: mean change {total / evaluated:.6g} -> {statistic}")
    note = f"{skipped} undefined comparisons skipped" if skipped else ""
    return _report(metric, "robustness_1", verdict, cfg, n=n, statistic=statistic, note=note)


def check_robustness_2(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    """Invariance m(mu o nu, sigma o nu) = m(mu, sigma) over sampled triples"""
    describe(metric)
    n = cfg.n
    rng = _cell_rng(cfg, metric, "robustness_2")
    mu = _random_perms(rng, cfg.triples, n)
    sigma = _random_perms(rng, cfg.triples, n)
    nu = _random_perms(rng, cfg.triples, n)
    composed = evaluate_batch(metric, compose_arrays(mu, nu), compose_arrays(sigma, nu), cfg.relevance, options=cfg.options)
    plain = evaluate_batch(metric, mu, sigma, cfg.relevance, options=cfg.options)

    with np.errstate(invalid="ignore"):
        deviation = np.abs(composed - plain)
    both_undefined = np.isnan(composed) & np.isnan(plain)
    violating = ~both_undefined & ~(deviation <= cfg.tolerance)
    defined = ~np.isnan(deviation)
    statistic = float(deviation[defined].max()) if defined.any() else None

    hits = np.flatnonzero(violating)
    if hits.size:
        t = hits[0]
        witness = Witness("m(mu o nu, sigma o nu) != m(mu, sigma)", _rows(mu[t], sigma[t], nu[t]),
                          (_as_value(composed[t]), _as_value(plain[t])))
        return _report(metric, "robustness_2", FAIL, cfg, witnesses=(witness,), n=n, statistic=statistic,
                       note=f"{hits.size} of {cfg.triples} triples violate")
    return _report(metric, "robustness_2", PASS, cfg, n=n, statistic=statistic)


# ==================== WIDTH-SWAP DEPENDENCY AND SENSITIVITY ====================

def wsd_witness(metric: str, n: int, relevance: Optional[RelevanceConfig] = None,
                options: MetricOptions = DEFAULT_OPTIONS) -> Optional[Witness]:
    """Two swaps of equal width with different m(id, swap), or None"""
    ref = identity(n)
    for width in range(1, n):
        swaps = swaps_of_width(n, width)
        if len(swaps) < 2:
            continue
        candidates = np.vstack([swap(n, s).as_array() for s in swaps])
        values = evaluate_batch(metric, ref, candidates, relevance, options=options)
        first_key = exact_key(metric, candidates[0])
        for index in range(1, len(swaps)):
            if first_key is not None:
                same = first_key == exact_key(metric, candidates[index])
            else:
                same = bool(values_equal(values[:1], values[index:index + 1])[0])
            if not same:
                return Witness(
                    f"width {width}: {swaps[0]} vs {swaps[index]}",
                    _rows(candidates[0], candidates[index]),
                    (_as_value(values[0]), _as_value(values[index])),
                )
    return None


def check_wsd(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    n = cfg.size_for("wsd")
    describe(metric)
    witness = wsd_witness(metric, n, cfg.relevance, cfg.options)
    if witness is None:
        return _report(metric, "wsd", PASS, cfg, n=n)
    return _report(metric, "wsd", FAIL, cfg, witnesses=(witness,), n=n)


def _disjoint_equal_width_swaps(n: int) -> List[Tuple[SwapSpec, SwapSpec]]:
    pairs = []
    for width in range(1, n):
        for first in swaps_of_width(n, width):
            for second in swaps_of_width(n, width):
                if first.j < second.i:
                    pairs.append((first, second))
    return pairs


def sensitivity_witness(metric: str, n: int, relevance: Optional[RelevanceConfig] = None,
                        options: MetricOptions = DEFAULT_OPTIONS, identity_only: bool = False) -> Optional[Witness]:
    """
    Search sigma and disjoint equal-width swaps (i j), (k l) with
    m(sigma, (i j) o sigma) != m(sigma, (k l) o sigma).
    """
    sigmas = identity(n).as_array()[None, :] if identity_only else enumerate_array(n)
    cache: Dict[SwapSpec, Tuple[np.ndarray, np.ndarray]] = {}

    def swapped_values(spec: SwapSpec) -> Tuple[np.ndarray, np.ndarray]:
        if spec not in cache:
            moved = compose_arrays(swap_array(n, spec.i, spec.j), sigmas)
            cache[spec] = (moved, evaluate_batch(metric, sigmas, moved, relevance, options=options))
        return cache[spec]

    for first, second in _disjoint_equal_width_swaps(n):
        moved_a, values_a = swapped_values(first)
        moved_b, values_b = swapped_values(second)
        hits = np.flatnonzero(~values_equal(values_a, values_b))
        if hits.size:
            s = hits[0]
            return Witness(
                f"{first} vs {second}",
                _rows(sigmas[s], moved_a[s], moved_b[s]),
                (_as_value(values_a[s]), _as_value(values_b[s])),
            )
    return None


def check_sensitivity(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    """Pass iff a witness exists at the configured size; fail when the search is exhausted"""
    n = cfg.size_for("sensitivity")
    describe(metric)
    witness = sensitivity_witness(metric, n, cfg.relevance, cfg.options)
    if witness is None:
        return _report(metric, "sensitivity", FAIL, cfg, n=n, note=f"no witness over all of S_{n}")
    return _report(metric, "sensitivity", PASS, cfg, witnesses=(witness,), n=n)


# ==================== STABILITY ====================

def check_stability(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    """
    Fraction of (pair, k) cases with |m@(k-1) - m@k| < 1/k, k = 2..n.

    Args:
        metric: Registry name
        cfg: Protocol configuration (n, pair_count, pass_fraction)

    Returns:
        Report with the passing fraction as statistic
    """
    desc = describe(metric)
    if not desc.supports_at_k:
        return _report(metric, "stability", UNDEFINED, cfg, note="no @k form")
    n = cfg.n
    rng = _cell_rng(cfg, metric, "stability")
    sigma = _random_perms(rng, cfg.pair_count, n)
    nu = _random_perms(rng, cfg.pair_count, n)

    previous = None
    passed, evaluated = 0, 0
    witness = None
    for k in range(1, n + 1):
        if k < desc.min_length:
            current = np.full(cfg.pair_count, np.nan)
        else:
            current = evaluate_batch(metric, sigma, nu, cfg.relevance, k=k, options=cfg.options)
        if previous is not None:
            with np.errstate(invalid="ignore"):
                diffs = np.abs(previous - current)
            defined = ~np.isnan(diffs)
            ok = diffs[defined] < 1.0 / k
            passed += int(ok.sum())
            evaluated += int(defined.sum())
            if witness is None and not ok.all():
                p = np.flatnonzero(defined)[np.flatnonzero(~ok)[0]]
                witness = Witness(f"k = {k}, epsilon = 1/{k}", _rows(sigma[p], nu[p]),
                                  (_as_value(previous[p]), _as_value(current[p])))
        previous = current

    skipped = cfg.pair_count * (n - 1) - evaluated
    if evaluated == 0:
        return _report(metric, "stability", UNDEFINED, cfg, n=n, note="every case undefined")
    statistic = passed / evaluated
    verdict = PASS if statistic >= cfg.pass_fraction else FAIL
    note = f"{skipped} undefined cases skipped" if skipped else ""
    witnesses = (witness,) if witness is not None and verdict == FAIL else ()
    return _report(metric, "stability", verdict, cfg, witnesses=witnesses, n=n, statistic=statistic, note=note)


# ==================== DISTANCE ====================

class InducedDistance:
    """
    Two-argument function derived from an arity-one metric: m(s) - m(v),
    or |m(s) - m(v)| when absolute.
    """

    def __init__(self, metric: str, absolute: bool = True,
                 relevance: Optional[RelevanceConfig] = None, options: MetricOptions = DEFAULT_OPTIONS):
        if describe(metric).arity != 1:
            raise MetricDomainError(f"induced distances need an arity-one metric, {metric} has arity 2")
        self.metric = metric
        self.absolute = absolute
        self.relevance = relevance
        self.options = options

    @property
    def name(self) -> str:
        return f"f~{self.metric}" if self.absolute else f"f_{self.metric}"

    def values(self, rankings: np.ndarray) -> np.ndarray:
        return evaluate_batch(self.metric, rankings, rankings, self.relevance, options=self.options)

    def batch(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        diff = self.values(first) - self.values(second)
        return np.abs(diff) if self.absolute else diff

    def __call__(self, sigma, nu) -> float:
        return float(self.batch(np.atleast_2d(np.asarray(getattr(sigma, "image", sigma))),
                                np.atleast_2d(np.asarray(getattr(nu, "image", nu))))[0])


def induced_distance(metric: str, absolute: bool, relevance: Optional[RelevanceConfig] = None,
                     options: MetricOptions = DEFAULT_OPTIONS) -> InducedDistance:
    return InducedDistance(metric, absolute, relevance, options)


DistanceLike = Union[str, InducedDistance]


def _distance_matrix(subject: DistanceLike, perms: np.ndarray, relevance, options) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full distance matrix over perms and a mask of exactly-zero entries.

    Zero entries of dcg-based induced distances are decided on exact
    signatures; other entries by float comparison.
    """
    size = len(perms)
    if isinstance(subject, InducedDistance):
        values = subject.values(perms)
        matrix = values[:, None] - values[None, :]
        if subject.absolute:
            matrix = np.abs(matrix)
        keys = [exact_key(subject.metric, row) for row in perms]
        if keys[0] is not None:
            zero = np.array([[ka == kb for kb in keys] for ka in keys])
            matrix = np.where(zero, 0.0, matrix)
        else:
            zero = values_equal(values[:, None], values[None, :])
        return matrix, zero
    first = np.repeat(np.arange(size), size)
    second = np.tile(np.arange(size), size)
    matrix = evaluate_batch(subject, perms[first], perms[second], relevance, options=options).reshape(size, size)
    with np.errstate(invalid="ignore"):
        zero = matrix == 0.0
    return matrix, zero


def distance_violations(subject: DistanceLike, n: int, relevance: Optional[RelevanceConfig] = None,
                        options: MetricOptions = DEFAULT_OPTIONS) -> List[Tuple[str, Witness]]:
    """
    Check the four distance axioms exhaustively on S_n.

    Returns:
        (axiom, witness) for every violated axiom among identity,
        positivity, symmetry and triangle, in that order
    """
    if n > DISTANCE_LIMIT:
        raise EnumerationLimitError(f"Distance axioms are checked for n <= {DISTANCE_LIMIT}, got {n}")
    perms = enumerate_array(n)
    matrix, zero = _distance_matrix(subject, perms, relevance, options)
    size = len(perms)
    violations = []

    diagonal = np.flatnonzero(~np.diag(zero))
    if diagonal.size:
        i = diagonal[0]
        violations.append(("identity", Witness("d(s, s) != 0", _rows(perms[i]), (_as_value(matrix[i, i]),))))

    with np.errstate(invalid="ignore"):
        positive = (matrix > 0) & ~zero
    positive |= np.eye(size, dtype=bool)
    bad = np.argwhere(~positive)
    if bad.size:
        i, j = bad[0]
        violations.append(("positivity", Witness("d(s, v) <= 0 for s != v", _rows(perms[i], perms[j]),
                                                 (_as_value(matrix[i, j]),))))

    asym = np.argwhere(~values_equal(matrix, matrix.T))
    if asym.size:
        i, j = asym[0]
        violations.append(("symmetry", Witness("d(s, v) != d(v, s)", _rows(perms[i], perms[j]),
                                               (_as_value(matrix[i, j]), _as_value(matrix[j, i])))))

    scale = np.nanmax(np.abs(matrix)) if np.isfinite(matrix).any() else 1.0
    slack = EQUALITY_RTOL * max(1.0, float(scale))
    for b in range(size):
        through = matrix[:, b][:, None] + matrix[b, :][None, :]
        with np.errstate(invalid="ignore"):
            broken = np.argwhere(~(matrix <= through + slack))
        if broken.size:
            a, c = broken[0]
            violations.append(("triangle", Witness(
                "d(a, c) > d(a, b) + d(b, c)", _rows(perms[a], perms[b], perms[c]),
                (_as_value(matrix[a, c]), _as_value(matrix[a, b]), _as_value(matrix[b, c])),
            )))
            break
    return violations


def distance_subject(metric: str, cfg: ProtocolConfig) -> DistanceLike:
    """The function whose axioms stand for a metric's distance cell"""
    if metric == "kendall_tau":
        return "kendall_distance"
    if describe(metric).arity == 1:
        return induced_distance(metric, True, cfg.relevance, cfg.options)
    return metric


def check_distance_axioms(subject: DistanceLike, cfg: ProtocolConfig, metric: Optional[str] = None) -> PropertyReport:
    n = cfg.size_for("distance")
    label = metric or (subject.metric if isinstance(subject, InducedDistance) else subject)
    violations = distance_violations(subject, n, cfg.relevance, cfg.options)
    checked = subject.name if isinstance(subject, InducedDistance) else subject
    note = f"checked on {checked}"
    if violations:
        note += "; violated: " + ", ".join(axiom for axiom, _ in violations)
        return _report(label, "distance", FAIL, cfg, witnesses=tuple(w for _, w in violations), n=n, note=note)
    return _report(label, "distance", PASS, cfg, n=n, note=note)


def _check_distance_cell(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    return check_distance_axioms(distance_subject(metric, cfg), cfg, metric=metric)


# ==================== MAXIMAL / MINIMAL AGREEMENT ====================

def check_agreement_bounds(metric: str, cfg: ProtocolConfig) -> PropertyReport:
    """
    Constant self-value m(s, s) across rankings and lengths, never exceeded
    by m(s, v) once oriented. Observed ranges are reported in the note.
    """
    describe(metric)
    rng = _cell_rng(cfg, metric, "agreement_bounds")
    self_value = None
    observed_min, observed_max = np.inf, -np.inf
    reversal = []

    for n in cfg.bounds_lengths:
        sigma = _random_perms(rng, cfg.bounds_samples, n)
        nu = _random_perms(rng, cfg.bounds_samples, n)
        own = evaluate_batch(metric, sigma, sigma, cfg.relevance, options=cfg.options)
        if np.isnan(own).any():
            s = int(np.flatnonzero(np.isnan(own))[0])
            return _report(metric, "agreement_bounds", UNDEFINED, cfg,
                           witnesses=(Witness(f"undefined self-value at n = {n}", _rows(sigma[s])),),
                           note="self-value undefined")
        varies = np.flatnonzero(~values_equal(own, own[0]))
        if varies.size:
            s = varies[0]
            witness = Witness(f"self-values within n = {n}", _rows(sigma[0], sigma[s]),
                              (_as_value(own[0]), _as_value(own[s])))
            return _report(metric, "agreement_bounds", FAIL, cfg, witnesses=(witness,),
                           note=f"self-value depends on the ranking at n = {n}")
        if self_value is None:
            self_value = (float(own[0]), n, sigma[0])
        elif not values_equal(own[:1], self_value[0])[0]:
            witness = Witness(f"self-values at n = {self_value[1]} and n = {n}", _rows(self_value[2], sigma[0]),
                              (self_value[0], _as_value(own[0])))
            return _report(metric, "agreement_bounds", FAIL, cfg, witnesses=(witness,),
                           note="self-value depends on the length")

        others = evaluate_batch(metric, sigma, nu, cfg.relevance, options=cfg.options)
        defined = others[~np.isnan(others)]
        if defined.size:
            observed_min = min(observed_min, float(defined.min()))
            observed_max = max(observed_max, float(defined.max()))
        top = oriented(metric, np.array([self_value[0]]))[0]
        slack = EQUALITY_RTOL * max(1.0, abs(top))
        with np.errstate(invalid="ignore"):
            above = np.flatnonzero(oriented(metric, others) > top + slack)
        if above.size:
            p = above[0]
            witness = Witness("m(s, v) beyond m(s, s)", _rows(sigma[p], nu[p]), (_as_value(others[p]), self_value[0]))
            return _report(metric, "agreement_bounds", FAIL, cfg, witnesses=(witness,),
                           note="self-value is not the bound")
        rev = evaluate_batch(metric, identity(n), reverse(n), cfg.relevance, options=cfg.options)[0]
        reversal.append(f"n={n}: m(id, rev)={_as_value(rev)}")

    note = f"observed range [{observed_min:.6g}, {observed_max:.6g}]; " + ", ".join(reversal)
    return _report(metric, "agreement_bounds", PASS, cfg, statistic=self_value[0], note=note)


# ==================== GRID ====================

CHECKERS: Dict[str, Callable[[str, ProtocolConfig], PropertyReport]] = {
    "ioi": check_ioi,
    "symmetry": check_symmetry,
    "robustness_1": check_robustness_1,
    "robustness_2": check_robustness_2,
    "wsd": check_wsd,
    "sensitivity": check_sensitivity,
    "stability": check_stability,
    "distance": _check_distance_cell,
    "agreement_bounds": check_agreement_bounds,
}


def _run_cell(args) -> PropertyReport:
    metric, prop, cfg = args
    try:
        report = CHECKERS[prop](metric, cfg)
        logger.debug(f"{prop} / {metric}: {report.verdict}")
        return report
    except Exception as e:
        logger.error(f"{prop} / {metric} failed: {e}")
        return PropertyReport(metric=metric, property=prop, verdict=UNDEFINED, config_hash=cfg.config_hash,
                              note=f"error: {e}")


def property_table(metrics: Sequence[str], properties: Sequence[str], cfg: ProtocolConfig,
                   workers: int = 1) -> PropertyGrid:
    """
    Run every checker for every metric.

    Args:
        metrics: Metric names (grid columns)
        properties: Property ids (grid rows)
        cfg: Protocol configuration
        workers: Worker processes; cells are independent

    Returns:
        PropertyGrid; per-cell errors are recorded as undefined
    """
    unknown = [p for p in properties if p not in PROPERTIES]
    if unknown:
        raise ValueError(f"Unknown properties: {', '.join(unknown)}; choose from {', '.join(PROPERTIES)}")
    for metric in metrics:
        describe(metric)
    tasks = [(metric, prop, cfg) for prop in properties for metric in metrics]
    logger.info(f"Property grid: {len(properties)} properties x {len(metrics)} metrics ({workers} workers)")
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            results = pool.map(_run_cell, tasks)
    else:
        results = [_run_cell(task) for task in tasks]
    reports = {(r.metric, r.property): r for r in results}
    return PropertyGrid(metrics=list(metrics), properties=list(properties), reports=reports)


# ==================== FIXTURES AND ORACLES ====================

@dataclass
class OracleResult:
    subject: str
    n: int
    passed: bool
    lines: List[str] = field(default_factory=list)
    witnesses: List[Witness] = field(default_factory=list)


def _indiscernible_columns() -> List[Tuple[str, str]]:
    """(published column, metric) for every metric in the fixture table"""
    columns = []
    for column in INDISCERNIBLE_COLUMNS:
        members = family_members("CMB") if column == "CMB" else [column]
        columns.extend((column, metric) for metric in members)
    return columns


def indistinguishability_rows() -> List[Dict]:
    """
    Whether each metric tells the candidate (1 2) from tau, with reference id,
    n = 10 and j = k = 5, next to the published mark.

    Returns:
        One record per (row, metric): row, column, metric, expected,
        observed, exempt
    """
    n = 10
    relevance = RelevanceConfig(5, 5)
    ref = identity(n)
    candidate = swap(n, SwapSpec(1, 2)).as_array()
    records = []
    for row, spec in INDISCERNIBLE_ROWS.items():
        tau = identity(n).as_array() if spec is None else swap(n, SwapSpec(*spec)).as_array()
        for column, metric in _indiscernible_columns():
            key_a, key_b = exact_key(metric, candidate), exact_key(metric, tau)
            if key_a is not None:
                same = key_a == key_b
            else:
                values = evaluate_batch(metric, ref, np.vstack([candidate, tau]), relevance)
                same = bool(values_equal(values[:1], values[1:])[0])
            records.append({
                "row": row,
                "column": column,
                "metric": metric,
                "expected": INDISCERNIBLE_EXPECTED[row][column],
                "observed": not same,
                "exempt": (row, column) in INDISCERNIBLE_EXEMPT,
            })
    return records


def oracle_indiscernibles(n: int = 10) -> OracleResult:
    result = OracleResult("indiscernibles", 10, True)
    for record in indistinguishability_rows():
        if record["exempt"] or record["expected"] == record["observed"]:
            continue
        result.passed = False
        result.lines.append(
            f"tau = {record['row']}, {record['metric']}: expected "
            f"{'distinguish' if record['expected'] else 'no distinction'}, observed the opposite"
        )
    exempt = sorted({f"{row}/{col}" for row, col in INDISCERNIBLE_EXEMPT})
    result.lines.append(f"exempt cells: {', '.join(exempt)}")
    return result


def oracle_dcg_ioi(n: int) -> OracleResult:
    """All DCG values on S_n pairwise distinct (exact signatures), dcg(id) the strict minimum"""
    perms = enumerate_array(n, ORACLE_LIMITS["dcg-ioi"])
    values = evaluate_batch("dcg", perms, perms)
    result = OracleResult("dcg-ioi", n, True)
    seen: Dict = {}
    for index, row in enumerate(perms):
        key = dcg_signature(row)
        if key in seen:
            result.passed = False
            if len(result.witnesses) < MAX_WITNESSES:
                other = seen[key]
                result.witnesses.append(Witness("equal DCG", _rows(perms[other], row),
                                                (float(values[other]), float(values[index]))))
        else:
            seen[key] = index
    minimal = bool((values[1:] > values[0]).all())
    result.passed = result.passed and minimal
    result.lines.append(f"{len(perms)} rankings, {len(seen)} distinct DCG values")
    result.lines.append(f"dcg(id) = {values[0]:.12g} strict minimum: {'yes' if minimal else 'no'}")
    return result


def oracle_kendall_swap(n: int) -> OracleResult:
    """Brute-force discordant counts against (C(m,2) - 4|i-j| + 2) / C(m,2) for m = 2..n"""
    result = OracleResult("kendall-swap", n, True)
    checked = 0
    for size in range(2, n + 1):
        pairs = comb(size, 2)
        for spec in all_swaps(size):
            image = swap(size, spec).image
            discordant = sum(1 for a in range(size) for b in range(a + 1, size) if image[a] > image[b])
            brute = Fraction(pairs - 2 * discordant, pairs)
            closed = Fraction(pairs - 4 * spec.width + 2, pairs)
            computed = kendall_tau(identity(size), swap(size, spec))
            checked += 1
            if brute != closed or abs(computed - float(closed)) > 1e-12:
                result.passed = False
                result.witnesses.append(Witness(f"n = {size}, swap {spec}", _rows(image),
                                                (float(brute), float(closed), computed)))
    result.lines.append(f"{checked} swaps checked for n = 2..{n}")
    return result


def oracle_distance_axioms(n: int) -> OracleResult:
    """Expected distances pass all axioms; f_dcg breaks symmetry and mse the triangle inequality"""
    claims = [
        (induced_distance("dcg", True), None),
        (induced_distance("ndcg", True), None),
        ("rmse", None),
        ("mae", None),
        ("kendall_distance", None),
        (induced_distance("dcg", False), "symmetry"),
        ("mse", "triangle"),
    ]
    result = OracleResult("distance-axioms", n, True)
    for subject, expected_violation in claims:
        name = subject.name if isinstance(subject, InducedDistance) else subject
        violations = distance_violations(subject, n)
        violated = [axiom for axiom, _ in violations]
        if expected_violation is None:
            ok = not violated
        else:
            ok = expected_violation in violated
        result.passed = result.passed and ok
        state = "pass" if not violated else f"fail ({', '.join(violated)})"
        result.lines.append(f"{name}: {state}{'' if ok else '  UNEXPECTED'}")
        result.witnesses.extend(w for _, w in violations[:1])
    return result


def _oracle_relevance(n: int, j: int = RELEVANT_SIZE) -> RelevanceConfig:
    """A relevant set strictly inside S_n, so that swaps can cross its boundary"""
    return RelevanceConfig(j if j < n else max(1, n // 2))


def oracle_wsd(n: int) -> OracleResult:
    """Pair-count metrics are width-swap dependent; dcg and recall are not"""
    relevance = _oracle_relevance(n)
    result = OracleResult("wsd", n, True)
    for metric in ("kendall_tau", "spearman_rho", "ndpm"):
        witness = wsd_witness(metric, n, relevance)
        ok = witness is None
        result.passed = result.passed and ok
        result.lines.append(f"{metric}: {'equal-width swaps agree' if ok else 'UNEXPECTED witness'}")
        if witness is not None:
            result.witnesses.append(witness)
    for metric in ("dcg", "recall"):
        witness = wsd_witness(metric, n, relevance)
        ok = witness is not None
        result.passed = result.passed and ok
        result.lines.append(f"{metric}: {'witness found' if ok else 'UNEXPECTED: no witness'}")
        if witness is not None:
            result.witnesses.append(witness)
    # informational: squared and absolute errors from id depend on the width only
    mse_witness = wsd_witness("mse", n, relevance)
    result.lines.append(f"mse: {'witness found' if mse_witness else 'equal-width swaps agree'}")
    return result


def oracle_sensitivity(n: int) -> OracleResult:
    """dcg and mean_rank (j = 3) are sensitive; kendall_tau is not"""
    result = OracleResult("sensitivity", n, True)
    claims = [
        ("dcg", _oracle_relevance(n), True),
        ("mean_rank", _oracle_relevance(n, 3), True),
        ("kendall_tau", _oracle_relevance(n), False),
    ]
    for metric, relevance, expected in claims:
        witness = sensitivity_witness(metric, n, relevance)
        ok = (witness is not None) == expected
        result.passed = result.passed and ok
        found = "witness found" if witness is not None else "no witness"
        result.lines.append(f"{metric}: {found}{'' if ok else '  UNEXPECTED'}")
        if witness is not None:
            result.witnesses.append(witness)
    return result


ORACLES = {
    "dcg-ioi": oracle_dcg_ioi,
    "kendall-swap": oracle_kendall_swap,
    "distance-axioms": oracle_distance_axioms,
    "wsd": oracle_wsd,
    "indiscernibles": oracle_indiscernibles,
    "sensitivity": oracle_sensitivity,
}


def run_oracle(subject: str, n: Optional[int] = None) -> OracleResult:
    if subject not in ORACLES:
        raise ValueError(f"Unknown oracle subject {subject!r}; choose from {', '.join(ORACLE_SUBJECTS)}")
    n = ORACLE_DEFAULT_N[subject] if n is None else n
    limit = ORACLE_LIMITS.get(subject)
    if limit is not None and not 2 <= n <= limit:
        raise EnumerationLimitError(f"Oracle {subject} runs for 2 <= n <= {limit}, got {n}")
    logger.info(f"Running oracle {subject} at n = {n}")
    return ORACLES[subject](n)
