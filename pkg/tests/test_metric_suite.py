import logging
from math import comb, log2, sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx
from scipy.stats import kendalltau, spearmanr

from metric_suite import (
    ConfusionCounts, MetricDomainError, MetricOptions, RelevanceConfig, UnknownMetricError,
    cmb_metric, confusion_counts, core_metrics, dcg, dcg_signature, describe, error_metric,
    evaluate, evaluate_at_k, evaluate_batch, exact_key, family_members, idcg, kendall_distance,
    kendall_tau, metric_names, ndcg, ndpm, oriented, positional_metric, spearman_rho,
)
from perm_core import DimensionError, Permutation, SwapSpec, identity, reverse, swap

_log = logging.getLogger(__name__)

pairs = st.integers(2, 12).flatmap(
    lambda n: st.tuples(st.permutations(range(1, n + 1)), st.permutations(range(1, n + 1)))
)


def id_swap(n, i, j):
    return swap(n, SwapSpec(i, j))


# ==================== REGISTRY ====================

def test_registry_sizes():
    assert len(metric_names()) == 35
    assert len(core_metrics()) == 33
    assert "kendall_distance" not in core_metrics()
    assert len(family_members("CMB")) == 19
    assert len(family_members("EB")) == 7
    assert len(family_members("CB")) == 4
    assert len(family_members("CGB")) == 5


def test_descriptor_fields():
    desc = describe("dcg")
    assert desc.arity == 1
    assert desc.higher_is_better
    assert not describe("mse").higher_is_better
    assert describe("kendall_tau").min_length == 2
    assert describe("mrr").uses_relevance


def test_unknown_metric():
    with pytest.raises(UnknownMetricError):
        describe("nope")
    with pytest.raises(UnknownMetricError):
        evaluate("nope", identity(3), identity(3))


# ==================== CONFUSION MATRIX ====================

def test_relevance_fit_clamps_oversized_sets():
    assert RelevanceConfig(30).fit(100) == RelevanceConfig(30, 30)
    assert RelevanceConfig(30).fit(10) == RelevanceConfig(5, 5)
    assert RelevanceConfig(3, 12).fit(10) == RelevanceConfig(3, 5)
    with pytest.raises(MetricDomainError):
        RelevanceConfig(0)


def test_relevance_fit_keeps_sizes_equal_to_n(caplog):
    with caplog.at_level(logging.WARNING, logger="metric_suite"):
        assert RelevanceConfig(10).fit(10) == RelevanceConfig(10, 10)
        assert RelevanceConfig(4, 10).fit(10) == RelevanceConfig(4, 10)
    assert not caplog.records


def test_relevance_fit_warns_when_clamping(caplog):
    with caplog.at_level(logging.WARNING, logger="metric_suite"):
        RelevanceConfig(12).fit(10)
    assert "clamped to j=5, k=5" in caplog.text


@pytest.mark.parametrize("sizes", [(10, 10), (10, 7), (4, 10), (7, 7)])
@pytest.mark.parametrize("metric", family_members("CMB"))
def test_evaluate_matches_confusion_counts(metric, sizes):
    cfg = RelevanceConfig(*sizes)
    sigma, tau = identity(10), Permutation((3, 9, 1, 10, 2, 8, 4, 7, 5, 6))
    assert evaluate(metric, sigma, tau, cfg) == cmb_metric(metric, confusion_counts(sigma, tau, cfg))


@pytest.mark.parametrize("j", [3, 9, 10])
@pytest.mark.parametrize("metric", ["mrr", "gmr", "mean_rank"])
def test_evaluate_matches_positional_metric(metric, j):
    cfg = RelevanceConfig(j)
    assert evaluate(metric, identity(10), reverse(10), cfg) == approx(positional_metric(metric, reverse(10), cfg))


def test_mean_rank_over_the_whole_ranking():
    assert evaluate("mean_rank", identity(10), reverse(10), RelevanceConfig(10, 10)) == approx(5.5)


def test_confusion_counts():
    cfg = RelevanceConfig(5, 5)
    assert confusion_counts(identity(10), id_swap(10, 1, 2), cfg) == ConfusionCounts(5, 0, 0, 5)
    counts = confusion_counts(identity(5), reverse(5), RelevanceConfig(2, 2))
    assert counts == ConfusionCounts(tp=0, fp=2, fn=2, tn=1)
    assert counts.n == 5


def test_confusion_counts_reject_oversized_sets():
    with pytest.raises(MetricDomainError):
        confusion_counts(identity(4), identity(4), RelevanceConfig(5))


@pytest.mark.parametrize(
    "metric, expected",
    [
        ("recall", 0.6),
        ("precision", 0.75),
        ("fallout", 0.2),
        ("tnr", 0.8),
        ("npv", 4 / 6),
        ("for", 2 / 6),
        ("fdr", 0.25),
        ("fnr", 0.4),
        ("accuracy", 0.7),
        ("ba", 0.7),
        ("f1", 2 / 3),
        ("fm", sqrt(0.45)),
        ("mcc", 10 / sqrt(600)),
        ("jaccard", 0.5),
        ("markedness", 0.75 + 4 / 6 - 1),
        ("informedness", 0.4),
        ("lr_plus", 3.0),
        ("lr_minus", 0.5),
        ("pt", (sqrt(0.12) - 0.2) / 0.4),
    ],
)
def test_cmb_values(metric, expected):
    counts = ConfusionCounts(tp=3, fp=1, fn=2, tn=4)
    assert cmb_metric(metric, counts) == approx(expected)


def test_f_beta_weights_recall():
    counts = ConfusionCounts(tp=3, fp=1, fn=2, tn=4)
    # (1 + b^2) tp / ((1 + b^2) tp + b^2 fn + fp) with b = 2
    assert cmb_metric("f1", counts, beta=2.0) == approx(15 / 24)


def test_undefined_cmb_values():
    perfect = ConfusionCounts(5, 0, 0, 5)
    assert cmb_metric("lr_plus", perfect) is None
    assert cmb_metric("pt", perfect) == approx(0.0)
    assert cmb_metric("mcc", perfect) == approx(1.0)
    assert cmb_metric("pt", ConfusionCounts(2, 2, 2, 2)) is None
    assert evaluate("lr_plus", identity(10), identity(10), RelevanceConfig(5)) is None


def test_cmb_metric_rejects_other_families():
    with pytest.raises(MetricDomainError):
        cmb_metric("mse", ConfusionCounts(1, 1, 1, 1))


# ==================== ERROR BASED ====================

def test_error_metrics_on_a_swap():
    ref, tau = identity(10), id_swap(10, 1, 2)
    assert error_metric("mse", ref, tau) == approx(2.0)
    assert error_metric("rmse", ref, tau) == approx(sqrt(2.0))
    assert error_metric("mae", ref, tau) == approx(2.0)
    assert error_metric("rmae", ref, tau) == approx(sqrt(2.0))
    assert error_metric("mape", ref, tau) == approx(15.0)
    assert error_metric("mape", ref, id_swap(10, 3, 4)) == approx(100 / 10 * (1 / 3 + 1 / 4))
    assert error_metric("smape", ref, tau) == approx(100 / 10 * (2 / 3 + 2 / 3))
    assert error_metric("mse", ref, id_swap(10, 3, 4)) == approx(2.0)


def test_mape_uses_the_reference_denominator():
    a, b = Permutation((1, 2, 3)), Permutation((2, 3, 1))
    assert error_metric("mape", a, b) == approx(100 / 3 * (1 + 1 / 2 + 2 / 3))
    assert error_metric("mape", b, a) == approx(100 / 3 * (1 / 2 + 1 / 3 + 2))


def test_mean_normalized_variant():
    ref, tau = identity(10), id_swap(10, 1, 2)
    assert error_metric("mse", ref, tau, mean_normalized=True) == approx(0.2)
    options = MetricOptions(mean_normalized=True)
    assert evaluate("mae", ref, tau, options=options) == approx(0.2)


def test_r2():
    assert error_metric("r2", identity(6), identity(6)) == approx(1.0)
    # residuals 2, mean of tau is 3.5, sum of (a - 3.5)^2 over 1..6 is 17.5
    assert error_metric("r2", identity(6), id_swap(6, 1, 2)) == approx(1 - 2 / 17.5)


# ==================== CORRELATION BASED ====================

def test_kendall_values():
    assert kendall_tau(identity(5), identity(5)) == approx(1.0)
    assert kendall_tau(identity(5), reverse(5)) == approx(-1.0)
    assert kendall_tau(identity(4), id_swap(4, 1, 2)) == approx(4 / 6)
    assert kendall_distance(identity(4), reverse(4)) == 6
    assert kendall_distance(identity(1), identity(1)) == 0


@pytest.mark.parametrize("n, i, j", [(5, 1, 2), (6, 2, 5), (10, 1, 10), (10, 3, 4)])
def test_kendall_single_swap_closed_form(n, i, j):
    pairs_count = comb(n, 2)
    expected = (pairs_count - 4 * abs(i - j) + 2) / pairs_count
    assert kendall_tau(identity(n), id_swap(n, i, j)) == approx(expected)


def test_adjacent_swap_moves_kendall_by_a_fixed_step():
    rng = np.random.default_rng(5)
    n = 9
    sigma = Permutation.from_array(rng.permutation(n) + 1)
    nu = rng.permutation(n) + 1
    moved = nu.copy()
    moved[3], moved[4] = moved[4], moved[3]
    change = kendall_tau(sigma, Permutation.from_array(nu)) - kendall_tau(sigma, Permutation.from_array(moved))
    assert abs(change) == approx(2 / comb(n, 2))


def test_spearman_values():
    assert spearman_rho(identity(5), reverse(5)) == approx(-1.0)
    assert spearman_rho(identity(4), id_swap(4, 1, 2)) == approx(0.8)


@given(pairs)
@settings(max_examples=60)
def test_correlations_match_scipy(images):
    a, b = images
    sigma, nu = Permutation(a), Permutation(b)
    assert kendall_tau(sigma, nu) == approx(kendalltau(a, b)[0], abs=1e-12)
    assert spearman_rho(sigma, nu) == approx(spearmanr(a, b)[0], abs=1e-12)


@given(pairs)
@settings(max_examples=60)
def test_ndpm_is_half_minus_kendall(images):
    sigma, nu = (Permutation(p) for p in images)
    assert ndpm(sigma, nu) == approx(0.5 - kendall_tau(sigma, nu), abs=1e-12)


def test_ndpm_literal_values():
    assert ndpm(identity(3), id_swap(3, 1, 2)) == approx(1 / 6)
    assert ndpm(identity(6), identity(6)) == approx(-0.5)


def test_pair_metrics_need_two_positions():
    with pytest.raises(MetricDomainError):
        evaluate("kendall_tau", identity(1), identity(1))
    with pytest.raises(MetricDomainError):
        evaluate_at_k("spearman_rho", identity(5), reverse(5), 1)


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        kendall_tau(identity(3), identity(4))
    with pytest.raises(DimensionError):
        evaluate("mse", identity(3), identity(4))


# ==================== CUMULATIVE GAIN ====================

def test_dcg_values():
    assert dcg(identity(2)) == approx(1 + 2 / log2(3))
    assert dcg(Permutation((2, 1))) == approx(2 + 1 / log2(3))
    assert dcg(identity(3)) == approx(1 + 2 / log2(3) + 3 / 2)
    assert abs(dcg(identity(2)) - dcg(Permutation((2, 1)))) == approx(0.36907, abs=1e-5)


def test_idcg_is_reached_by_the_reversal():
    for n in (1, 4, 9):
        assert idcg(n) == approx(dcg(reverse(n)))
        assert ndcg(reverse(n)) == approx(1.0)
    assert 0.0 < ndcg(identity(9)) < 1.0


def test_arity_one_metrics_use_the_second_argument():
    assert evaluate("dcg", reverse(3), identity(3)) == approx(dcg(identity(3)))
    assert evaluate("ndcg", identity(3), reverse(3)) == approx(1.0)


def test_positional_metrics():
    cfg = RelevanceConfig(2)
    assert positional_metric("mrr", identity(5), cfg) == approx(0.75)
    assert positional_metric("mean_rank", identity(5), cfg) == approx(1.5)
    assert positional_metric("gmr", identity(5), RelevanceConfig(3)) == approx(6 ** (1 / 3))
    with pytest.raises(MetricDomainError):
        positional_metric("dcg", identity(5), cfg)
    with pytest.raises(MetricDomainError):
        positional_metric("mrr", identity(5), RelevanceConfig(6))


def test_dcg_signature_detects_exact_ties():
    first = Permutation((2, 3, 1, 4, 6, 7, 5))
    second = Permutation((1, 3, 5, 4, 6, 7, 2))
    assert dcg_signature(first) == dcg_signature(second)
    assert dcg(first) == approx(dcg(second))
    assert dcg_signature(identity(7)) != dcg_signature(first)
    assert exact_key("ndcg", first) == dcg_signature(first)
    assert exact_key("mse", first) is None


# ==================== DISPATCH ====================

def test_evaluate_batch_broadcasts_the_reference():
    others = np.array([[1, 2, 3, 4], [2, 1, 3, 4], [4, 3, 2, 1]])
    values = evaluate_batch("kendall_tau", identity(4), others)
    assert values == approx([1.0, 4 / 6, -1.0])


def test_undefined_values_are_nan_in_batches():
    values = evaluate_batch("lr_plus", identity(10), np.array([identity(10).image]), RelevanceConfig(5))
    assert np.isnan(values[0])


@pytest.mark.parametrize("metric", metric_names())
def test_at_full_length_matches_plain_evaluation(metric):
    rng = np.random.default_rng(11)
    sigma, tau = rng.permutation(8) + 1, rng.permutation(8) + 1
    cfg = RelevanceConfig(8, 8)
    full = evaluate(metric, sigma, tau, cfg)
    at_n = evaluate_at_k(metric, sigma, tau, 8, cfg)
    assert (full is None and at_n is None) or at_n == approx(full)


def test_spearman_at_k_stays_a_correlation():
    # prefixes (1, 2, 3) and (6, 5, 4) are perfectly anti-correlated
    assert evaluate_at_k("spearman_rho", identity(6), reverse(6), 3) == approx(-1.0)
    rng = np.random.default_rng(8)
    sigma, tau = rng.permutation(40) + 1, rng.permutation(40) + 1
    for k in range(2, 41):
        assert -1.0 - 1e-12 <= evaluate_at_k("spearman_rho", sigma, tau, k) <= 1.0 + 1e-12


def test_at_k_truncates():
    sigma, tau = identity(6), reverse(6)
    assert evaluate_at_k("mse", sigma, tau, 2) == approx(25 + 9)
    assert evaluate_at_k("dcg", sigma, tau, 1) == approx(6.0)
    assert evaluate_at_k("recall", identity(6), identity(6), 3) == approx(1.0)
    with pytest.raises(MetricDomainError):
        evaluate_at_k("mse", sigma, tau, 7)


def test_identical_rankings_are_perfect_at_every_k():
    sigma = Permutation((4, 2, 6, 1, 5, 3))
    for k in range(1, 7):
        assert evaluate_at_k("recall", sigma, sigma, k) == approx(1.0)
        assert evaluate_at_k("mse", sigma, sigma, k) == approx(0.0)


def test_oriented_flips_lower_is_better():
    values = np.array([1.0, 2.0])
    assert list(oriented("mse", values)) == [-1.0, -2.0]
    assert list(oriented("kendall_tau", values)) == [1.0, 2.0]
