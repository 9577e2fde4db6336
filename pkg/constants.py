"""Constants for rankeval"""

# Metric families
FAMILIES = {
    "CMB": "Confusion-matrix based",
    "EB": "Error based",
    "CB": "Correlation based",
    "CGB": "Cumulative-gain based",
}

# Metric catalogue: name -> (family, arity, orientation, bounded range)
# "higher" means larger values are closer to the reference ranking.
METRIC_CATALOGUE = {
    # CMB
    "recall": ("CMB", 2, "higher", (0.0, 1.0)),
    "fnr": ("CMB", 2, "lower", (0.0, 1.0)),
    "fallout": ("CMB", 2, "lower", (0.0, 1.0)),
    "tnr": ("CMB", 2, "higher", (0.0, 1.0)),
    "precision": ("CMB", 2, "higher", (0.0, 1.0)),
    "fdr": ("CMB", 2, "lower", (0.0, 1.0)),
    "npv": ("CMB", 2, "higher", (0.0, 1.0)),
    "for": ("CMB", 2, "lower", (0.0, 1.0)),
    "accuracy": ("CMB", 2, "higher", (0.0, 1.0)),
    "ba": ("CMB", 2, "higher", (0.0, 1.0)),
    "f1": ("CMB", 2, "higher", (0.0, 1.0)),
    "fm": ("CMB", 2, "higher", (0.0, 1.0)),
    "mcc": ("CMB", 2, "higher", (-1.0, 1.0)),
    "jaccard": ("CMB", 2, "higher", (0.0, 1.0)),
    "markedness": ("CMB", 2, "higher", (-1.0, 1.0)),
    "lr_minus": ("CMB", 2, "lower", None),
    "informedness": ("CMB", 2, "higher", (-1.0, 1.0)),
    "pt": ("CMB", 2, "lower", None),
    "lr_plus": ("CMB", 2, "higher", None),
    # EB
    "mse": ("EB", 2, "lower", None),
    "rmse": ("EB", 2, "lower", None),
    "mae": ("EB", 2, "lower", None),
    "rmae": ("EB", 2, "lower", None),
    "mape": ("EB", 2, "lower", None),
    "smape": ("EB", 2, "lower", (0.0, 200.0)),
    "r2": ("EB", 2, "higher", None),
    # CB
    "kendall_tau": ("CB", 2, "higher", (-1.0, 1.0)),
    "kendall_distance": ("CB", 2, "lower", None),
    "spearman_rho": ("CB", 2, "higher", (-1.0, 1.0)),
    "ndpm": ("CB", 2, "lower", (-0.5, 1.5)),
    # CGB
    "dcg": ("CGB", 1, "higher", None),
    "ndcg": ("CGB", 1, "higher", (0.0, 1.0)),
    "mrr": ("CGB", 1, "higher", (0.0, 1.0)),
    "gmr": ("CGB", 1, "lower", None),
    "mean_rank": ("CGB", 1, "lower", None),
}

# Registry extensions left out of the property table by default
EXTENSION_METRICS = ("kendall_distance", "rmae")

# Metrics whose value depends on the relevant/retrieved sizes
RELEVANCE_DEPENDENT = ("mrr", "gmr", "mean_rank")

METRIC_NOTES = {
    "mse": "literal sum without 1/n (mean-normalized variant available)",
    "mae": "literal sum without 1/n (mean-normalized variant available)",
    "mape": "denominator uses the first (reference) ranking",
    "f1": "harmonic mean of precision and recall (beta = 1)",
    "mcc": "standard square-root denominator",
    "ndpm": "signed-sum formula over ordered pairs; equals 1/2 - kendall_tau without ties",
    "kendall_distance": "discordant-pair count (registry extension)",
    "rmae": "sqrt(MAE) (registry extension)",
}

# Properties (rows of the verdict grid)
PROPERTIES = {
    "ioi": "Identity of indiscernibles",
    "symmetry": "Symmetry",
    "robustness_1": "Type I robustness",
    "robustness_2": "Type II robustness",
    "wsd": "Width-swap dependency",
    "sensitivity": "Sensitivity",
    "stability": "Stability",
    "distance": "Distance",
    "agreement_bounds": "Maximal / minimal agreement",
}

# Verdicts
PASS = "pass"
FAIL = "fail"
UNDEFINED = "undef"

# Cells where the published summary conflicts with the formulas or with
# itself; reported, excluded from pass/fail comparisons
AMBIGUOUS_CELLS = {
    ("ndpm", "sensitivity"): "ndpm is width-swap dependent, which rules out sensitivity",
    ("ndpm", "robustness_2"): "pair-sign structure is invariant under right composition",
    ("smape", "symmetry"): "2|a-b|/(a+b) is symmetric in its arguments",
    ("smape", "robustness_2"): "a per-position sum is unchanged when items are relabelled",
    ("mse", "wsd"): "mse(id, (i j)) = 2 w^2 depends on the width only",
    ("rmse", "wsd"): "rmse(id, (i j)) = sqrt(2) w depends on the width only",
    ("mae", "wsd"): "mae(id, (i j)) = 2 w depends on the width only",
    ("r2", "wsd"): "numerator 2 w^2 over a fixed denominator",
    ("kendall_tau", "robustness_1"): "a random swap moves tau by about 0.0095 at n = 100, which rounds to 0.01",
    ("ndpm", "robustness_1"): "ndpm = 1/2 - tau moves with tau under a swap and rounds to 0.01 at n = 100",
    ("kendall_tau", "stability"): "one more position moves tau@k by about 2/(3k), above 1/k in about a fifth of cases",
    ("spearman_rho", "stability"): "one more position moves rho@k by about z_x z_y / k, above 1/k in about a third of cases",
    ("ndpm", "stability"): "ndpm@k = 1/2 - tau@k inherits the kendall_tau stability rate",
}

# Published summary marks: property -> metrics marked as satisfied
PUBLISHED_VERDICTS = {
    "ioi": {"dcg", "ndcg"},
    "symmetry": {
        "recall", "fnr", "fallout", "tnr", "precision", "fdr", "npv", "for",
        "accuracy", "ba", "f1", "fm", "mcc", "jaccard", "markedness",
        "lr_minus", "informedness", "pt", "lr_plus", "mse", "rmse", "mae",
        "r2", "kendall_tau", "spearman_rho", "ndpm",
    },
    "robustness_1": {
        "recall", "fnr", "fallout", "tnr", "precision", "fdr", "npv", "for",
        "accuracy", "ba", "f1", "fm", "mcc", "jaccard", "markedness",
        "lr_minus", "informedness", "kendall_tau", "ndpm", "ndcg", "mrr",
    },
    "robustness_2": {"mse", "rmse", "mae", "mape", "r2", "kendall_tau", "spearman_rho"},
    "wsd": {"kendall_tau", "spearman_rho", "ndpm"},
    "sensitivity": {"mape", "smape", "ndpm", "dcg", "ndcg", "mrr", "gmr", "mean_rank"},
    "stability": {
        "recall", "fnr", "precision", "fdr", "f1", "fm", "mcc", "markedness",
        "informedness", "pt", "lr_plus", "mse", "rmse", "mae", "mape", "smape",
        "r2", "kendall_tau", "spearman_rho", "ndpm", "dcg", "ndcg", "mrr",
    },
    "distance": {"rmse", "mae", "kendall_tau", "dcg", "ndcg"},
}

# Heatmap colour stops (agreement 0 -> 0.5 -> 1)
HEATMAP_COLORS = {
    "disagree": "#E75480",
    "partial": "#FFFFFF",
    "agree": "#2E8B57",
    "text": "#2C3E50",
    "grid": "#D0D0D0",
}

# Process exit codes
EXIT_OK = 0
EXIT_ORACLE_FAIL = 1
EXIT_USAGE = 2
EXIT_IO = 3

# Token used for undefined values in text outputs
UNDEF_TOKEN = "undef"

# Indistinguishability fixtures: n = 10, j = k = 5, reference id, candidate (1 2).
# Each row compares the candidate against tau; True marks "distinguishes".
INDISCERNIBLE_COLUMNS = (
    "CMB", "mse", "rmse", "mae", "mape", "smape", "r2", "kendall_tau",
    "spearman_rho", "dcg", "ndcg", "mrr", "gmr", "ndpm", "mean_rank",
)
INDISCERNIBLE_ROWS = {
    "id": None,
    "(3 4)": (3, 4),
    "(2 4)": (2, 4),
}
INDISCERNIBLE_EXPECTED = {
    "id": dict(zip(INDISCERNIBLE_COLUMNS, (False,) + (True,) * 14)),
    "(3 4)": dict(zip(INDISCERNIBLE_COLUMNS, (
        False, False, False, False, True, True, False, False,
        False, True, True, False, False, False, False,
    ))),
    "(2 4)": dict(zip(INDISCERNIBLE_COLUMNS, (
        False, True, True, True, False, False, True, True,
        True, True, True, False, False, True, False,
    ))),
}
# Published marks that the aggregate-over-top-j formulas cannot produce
INDISCERNIBLE_EXEMPT = {("id", "mrr"), ("id", "gmr"), ("id", "mean_rank")}
