import logging

import numpy as np
import pytest
from pytest import approx, fixture, mark

import property_lab
from constants import FAIL, PASS, PUBLISHED_VERDICTS, UNDEFINED
from metric_suite import MetricDomainError, RelevanceConfig, core_metrics, dcg_signature, evaluate
from perm_core import EnumerationLimitError, Permutation, SwapSpec, identity, swap
from property_lab import (
    InducedDistance, ProtocolConfig, check_agreement_bounds, check_distance_axioms, check_ioi,
    check_robustness_1, check_robustness_2, check_sensitivity, check_stability, check_symmetry,
    check_wsd, distance_subject, distance_violations, indistinguishability_rows, induced_distance,
    property_table, run_oracle, sensitivity_witness, values_equal, wsd_witness,
)
from reporting import comparison_frame

_log = logging.getLogger(__name__)

CB_BLOCK = ["kendall_tau", "spearman_rho", "ndpm"]
CGB_BLOCK = ["dcg", "ndcg", "mrr", "gmr", "mean_rank"]


@fixture(scope="module")
def cfg():
    return ProtocolConfig(
        n=20, pair_count=50, swap_samples=10, triples=200, bounds_samples=100,
        exhaustive_n={"ioi": 5, "symmetry": 4, "wsd": 8, "sensitivity": 5, "distance": 4},
    )


def test_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(n=1)
    with pytest.raises(ValueError):
        ProtocolConfig(pass_fraction=0.0)
    with pytest.raises(EnumerationLimitError):
        ProtocolConfig(exhaustive_n={"distance": 6})
    with pytest.raises(EnumerationLimitError):
        ProtocolConfig(exhaustive_n={"symmetry": 9})


def test_config_hash_tracks_settings():
    assert ProtocolConfig(n=10).config_hash == ProtocolConfig(n=10).config_hash
    assert ProtocolConfig(n=10).config_hash != ProtocolConfig(n=11).config_hash
    assert len(ProtocolConfig().config_hash) == 16


def test_values_equal_treats_undefined_as_equal():
    x = np.array([1.0, np.nan, 2.0, np.nan])
    y = np.array([1.0 + 1e-15, np.nan, 2.1, 0.0])
    assert list(values_equal(x, y)) == [True, True, False, False]


# ==================== IOI / SYMMETRY ====================

@pytest.mark.parametrize("metric", ["dcg", "ndcg"])
def test_ioi_holds_for_gain_metrics(cfg, metric):
    report = check_ioi(metric, cfg)
    assert report.verdict == PASS
    assert report.statistic == 120.0


def test_ioi_fails_for_kendall_with_equal_values():
    small = ProtocolConfig(exhaustive_n={"ioi": 4})
    report = check_ioi("kendall_tau", small)
    assert report.verdict == FAIL
    witness = report.witnesses[0]
    assert witness.rankings[0] != witness.rankings[1]
    assert witness.values[0] == approx(witness.values[1])


def test_ioi_fails_for_precision_with_the_swap_search():
    cfg = ProtocolConfig(exhaustive_n={"ioi": 10}, relevance=RelevanceConfig(5, 5))
    report = check_ioi("precision", cfg)
    assert report.verdict == FAIL
    first, second = report.witnesses[0].rankings
    ref = identity(10)
    assert evaluate("precision", ref, Permutation(first), RelevanceConfig(5)) == evaluate(
        "precision", ref, Permutation(second), RelevanceConfig(5)
    )


def test_dcg_ioi_breaks_on_an_exact_tie_at_seven():
    report = check_ioi("dcg", ProtocolConfig(exhaustive_n={"ioi": 7}))
    assert report.verdict == FAIL
    first, second = report.witnesses[0].rankings
    assert dcg_signature(first) == dcg_signature(second)


def test_ioi_above_the_enumeration_limit_is_undefined():
    report = check_ioi("dcg", ProtocolConfig(exhaustive_n={"ioi": 12}))
    assert report.verdict == UNDEFINED


@pytest.mark.parametrize("metric", ["kendall_tau", "spearman_rho", "mse", "mae", "recall"])
def test_symmetric_metrics(cfg, metric):
    assert check_symmetry(metric, cfg).verdict == PASS


def test_mape_is_not_symmetric(cfg):
    report = check_symmetry("mape", cfg)
    assert report.verdict == FAIL
    a, b = (Permutation(r) for r in report.witnesses[0].rankings)
    assert evaluate("mape", a, b) != approx(evaluate("mape", b, a))


def test_arity_one_metrics_fail_symmetry_by_convention(cfg):
    report = check_symmetry("dcg", cfg)
    assert report.verdict == FAIL
    assert "convention" in report.note


def test_disputed_cells_are_flagged(cfg):
    report = check_symmetry("smape", cfg)
    assert report.verdict == PASS
    assert report.ambiguous
    assert "disputed" in report.note


@pytest.mark.parametrize("metric", core_metrics())
def test_symmetry_row_at_n_5(metric):
    report = check_symmetry(metric, ProtocolConfig(exhaustive_n={"symmetry": 5}))
    published = PASS if metric in PUBLISHED_VERDICTS["symmetry"] else FAIL
    if report.ambiguous:
        assert report.verdict != published
    else:
        assert report.verdict == published


# ==================== ROBUSTNESS ====================

def test_robustness_1_fails_for_dcg(cfg):
    report = check_robustness_1("dcg", cfg)
    assert report.verdict == FAIL
    assert report.statistic > 0


def test_robustness_1_is_deterministic(cfg):
    assert check_robustness_1("mse", cfg) == check_robustness_1("mse", cfg)


@mark.slow
def test_robustness_1_at_protocol_defaults():
    grid = property_table(CB_BLOCK + CGB_BLOCK, ["robustness_1"], ProtocolConfig())
    verdicts = {metric: grid.verdict(metric, "robustness_1") for metric in grid.metrics}
    assert verdicts == {
        "kendall_tau": FAIL, "spearman_rho": FAIL, "ndpm": FAIL,
        "dcg": FAIL, "ndcg": PASS, "mrr": PASS, "gmr": FAIL, "mean_rank": FAIL,
    }
    # a random swap moves tau by about 0.0095, one rounding step above zero
    for metric in ("kendall_tau", "ndpm"):
        report = grid.report(metric, "robustness_1")
        assert report.statistic == approx(0.01)
        assert report.ambiguous
        assert "disputed" in report.note
    frame = comparison_frame(grid)
    assert frame.loc[~frame["ambiguous"], "match"].all()


@pytest.mark.parametrize("metric", ["mse", "rmse", "mae", "mape", "smape", "r2", "kendall_tau", "spearman_rho", "ndpm"])
def test_position_sums_are_invariant_under_relabelling(cfg, metric):
    report = check_robustness_2(metric, cfg)
    assert report.verdict == PASS
    assert report.statistic <= cfg.tolerance


@pytest.mark.parametrize("metric", ["precision", "recall", "dcg", "mrr"])
def test_prefix_metrics_are_not_invariant(cfg, metric):
    report = check_robustness_2(metric, cfg)
    assert report.verdict == FAIL
    mu, sigma, nu = (np.array(r) for r in report.witnesses[0].rankings)
    composed_values = report.witnesses[0].values
    assert composed_values[0] != approx(composed_values[1])
    assert len(mu) == len(sigma) == len(nu) == cfg.n


# ==================== WSD / SENSITIVITY ====================

@pytest.mark.parametrize("metric", ["kendall_tau", "spearman_rho", "ndpm"])
def test_pair_metrics_are_width_swap_dependent(cfg, metric):
    assert check_wsd(metric, cfg).verdict == PASS


@pytest.mark.parametrize("metric", ["dcg", "recall"])
def test_wsd_witnesses(cfg, metric):
    report = check_wsd(metric, cfg)
    assert report.verdict == FAIL
    assert report.witnesses[0].label.startswith("width ")


def test_wsd_witness_for_recall_at_width_one():
    witness = wsd_witness("recall", 8, RelevanceConfig(4))
    assert witness is not None
    assert witness.label.startswith("width 1")


def test_sensitivity(cfg):
    assert check_sensitivity("dcg", cfg).verdict == PASS
    report = check_sensitivity("kendall_tau", cfg)
    assert report.verdict == FAIL
    assert report.witnesses == ()


def test_mean_rank_is_sensitive_with_three_relevant_items():
    witness = sensitivity_witness("mean_rank", 6, RelevanceConfig(3))
    assert witness is not None
    sigma, first, second = witness.rankings
    assert witness.values[0] != approx(witness.values[1])
    assert len(sigma) == len(first) == len(second) == 6


@pytest.mark.parametrize("metric", ["kendall_tau", "spearman_rho", "ndpm", "mse"])
def test_width_swap_dependence_excludes_sensitivity_from_identity(metric):
    assert wsd_witness(metric, 6) is None
    assert sensitivity_witness(metric, 6, identity_only=True) is None


@pytest.mark.parametrize("metric", core_metrics())
def test_width_swap_witness_means_sensitivity_at_identity(cfg, metric):
    n = cfg.size_for("wsd")
    dependent = check_wsd(metric, cfg).verdict == PASS
    witness = sensitivity_witness(metric, n, cfg.relevance, identity_only=True)
    assert (witness is None) == dependent


# ==================== STABILITY ====================

def test_mean_rank_is_unstable():
    cfg = ProtocolConfig(n=30, pair_count=50)
    report = check_stability("mean_rank", cfg)
    assert report.verdict == FAIL
    assert 0.0 <= report.statistic < cfg.pass_fraction
    assert report.witnesses


def test_stability_statistic_is_a_fraction(cfg):
    report = check_stability("kendall_tau", cfg)
    assert report.verdict in (PASS, FAIL)
    assert 0.0 <= report.statistic <= 1.0


@mark.slow
def test_stability_at_protocol_defaults():
    grid = property_table(CB_BLOCK + ["gmr", "mean_rank"], ["stability"], ProtocolConfig())
    for metric in grid.metrics:
        assert grid.verdict(metric, "stability") == FAIL
    for metric in CB_BLOCK:
        report = grid.report(metric, "stability")
        assert report.ambiguous
        assert "disputed" in report.note
    assert grid.report("kendall_tau", "stability").statistic == approx(0.796, abs=0.01)
    assert grid.report("ndpm", "stability").statistic == approx(0.796, abs=0.01)
    assert grid.report("spearman_rho", "stability").statistic < 0.9
    frame = comparison_frame(grid)
    assert frame.loc[~frame["ambiguous"], "match"].all()


# ==================== DISTANCE ====================

def test_induced_distance_value():
    f = induced_distance("dcg", True)
    assert f.name == "f~dcg"
    assert f(identity(2), Permutation((2, 1))) == approx(0.36907, abs=1e-5)
    signed = induced_distance("dcg", False)
    assert signed.name == "f_dcg"
    assert signed(identity(2), Permutation((2, 1))) == approx(-0.36907, abs=1e-5)


def test_induced_distance_needs_arity_one():
    with pytest.raises(MetricDomainError):
        InducedDistance("mse")


@pytest.mark.parametrize("subject", ["rmse", "mae", "kendall_distance"])
def test_true_distances(subject):
    assert distance_violations(subject, 4) == []


def test_induced_distances_are_distances():
    assert distance_violations(induced_distance("dcg", True), 4) == []
    assert distance_violations(induced_distance("ndcg", True), 4) == []


def test_signed_induced_distance_is_not_symmetric():
    violated = [axiom for axiom, _ in distance_violations(induced_distance("dcg", False), 4)]
    assert "symmetry" in violated


def test_mse_breaks_the_triangle_inequality():
    violations = dict(distance_violations("mse", 4))
    witness = violations["triangle"]
    a, b, c = (Permutation(r) for r in witness.rankings)
    assert evaluate("mse", a, c) > evaluate("mse", a, b) + evaluate("mse", b, c)


def test_distance_limit():
    with pytest.raises(EnumerationLimitError):
        distance_violations("mae", 6)


def test_distance_cells(cfg):
    assert distance_subject("kendall_tau", cfg) == "kendall_distance"
    assert isinstance(distance_subject("dcg", cfg), InducedDistance)
    report = check_distance_axioms(distance_subject("kendall_tau", cfg), cfg, metric="kendall_tau")
    assert report.verdict == PASS
    assert "kendall_distance" in report.note
    assert check_distance_axioms("mse", cfg).verdict == FAIL


def test_ndpm_distance_matches_the_published_mark(cfg):
    # ndpm(s, s) = -1/2, so the identity axiom fails as marked
    report = property_lab._check_distance_cell("ndpm", cfg)
    assert report.verdict == FAIL
    assert "identity" in report.note
    assert not report.ambiguous
    assert "ndpm" not in PUBLISHED_VERDICTS["distance"]


# ==================== AGREEMENT BOUNDS ====================

@pytest.mark.parametrize("metric", ["kendall_tau", "spearman_rho"])
def test_correlations_reach_one_on_identical_rankings(cfg, metric):
    report = check_agreement_bounds(metric, cfg)
    assert report.verdict == PASS
    assert report.statistic == approx(1.0)
    assert "m(id, rev)=-1.0" in report.note


def test_dcg_has_no_constant_self_value(cfg):
    report = check_agreement_bounds("dcg", cfg)
    assert report.verdict == FAIL
    assert report.witnesses[0].label == "self-values within n = 5"
    assert "depends on the ranking" in report.note


def test_undefined_self_value():
    cfg = ProtocolConfig(bounds_samples=10, relevance=RelevanceConfig(2))
    assert check_agreement_bounds("lr_plus", cfg).verdict == UNDEFINED


# ==================== GRID ====================

def test_property_table(cfg):
    grid = property_table(["dcg", "kendall_tau"], ["ioi", "wsd"], cfg)
    assert grid.verdict("dcg", "ioi") == PASS
    assert grid.verdict("kendall_tau", "ioi") == FAIL
    assert grid.verdict("dcg", "wsd") == FAIL
    assert grid.verdict("kendall_tau", "wsd") == PASS
    assert [[r.metric for r in row] for row in grid.rows()] == [["dcg", "kendall_tau"]] * 2


def test_empty_grid(cfg):
    grid = property_table([], ["ioi"], cfg)
    assert grid.reports == {}


def test_unknown_property(cfg):
    with pytest.raises(ValueError):
        property_table(["dcg"], ["nope"], cfg)


def test_cell_errors_become_undefined(cfg, monkeypatch):
    def boom(metric, cfg):
        raise RuntimeError("broken checker")

    monkeypatch.setitem(property_lab.CHECKERS, "ioi", boom)
    grid = property_table(["dcg"], ["ioi"], cfg)
    report = grid.report("dcg", "ioi")
    assert report.verdict == UNDEFINED
    assert "broken checker" in report.note


# ==================== ORACLES ====================

@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_dcg_ioi_oracle(n):
    result = run_oracle("dcg-ioi", n)
    assert result.passed
    assert result.witnesses == []


def test_dcg_ioi_oracle_at_seven():
    result = run_oracle("dcg-ioi", 7)
    assert not result.passed
    first, second = result.witnesses[0].rankings
    assert dcg_signature(first) == dcg_signature(second)


def test_kendall_swap_oracle():
    assert run_oracle("kendall-swap", 10).passed


def test_distance_oracle():
    result = run_oracle("distance-axioms", 4)
    assert result.passed, result.lines


def test_wsd_oracle():
    result = run_oracle("wsd", 8)
    assert result.passed, result.lines


def test_sensitivity_oracle():
    result = run_oracle("sensitivity", 6)
    assert result.passed, result.lines


def test_indiscernibles_oracle():
    result = run_oracle("indiscernibles")
    assert result.passed, result.lines
    assert result.n == 10


def test_indiscernible_rows():
    rows = indistinguishability_rows()
    by_key = {(r["row"], r["metric"]): r for r in rows}
    assert by_key[("id", "precision")]["observed"] is False
    assert by_key[("(3 4)", "mape")]["observed"] is True
    assert by_key[("(3 4)", "mse")]["observed"] is False
    assert by_key[("(2 4)", "kendall_tau")]["observed"] is True
    assert by_key[("id", "mrr")]["exempt"]


def test_oracle_bounds():
    with pytest.raises(EnumerationLimitError):
        run_oracle("dcg-ioi", 9)
    with pytest.raises(EnumerationLimitError):
        run_oracle("distance-axioms", 1)
    with pytest.raises(ValueError):
        run_oracle("nope")


def test_swap_of_ten_for_fixtures():
    assert swap(10, SwapSpec(3, 4)).image == (1, 2, 4, 3, 5, 6, 7, 8, 9, 10)
