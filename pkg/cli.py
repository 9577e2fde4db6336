"""
rankeval command-line interface.

Commands: list | eval | agreement | properties | oracle. Results go to
stdout or files; logs go to stderr.
"""
import argparse
import logging
import sys
from typing import Dict, List, Optional

from config import (
    AGREEMENT_N, AGREEMENT_SAMPLE_PAIRS, AGREEMENT_SAMPLE_RANKINGS, APP_DESCRIPTION, APP_NAME,
    APP_VERSION, DEFAULT_SEED, DEFAULT_WORKERS, EXHAUSTIVE_SIZES, LOG_LEVEL, PROTOCOL_N,
    PROTOCOL_PAIRS, RELEVANT_SIZE, ROBUSTNESS_SWAP_SAMPLES, load_config_file,
)
from constants import EXIT_IO, EXIT_OK, EXIT_ORACLE_FAIL, EXIT_USAGE, PROPERTIES
from agreement import AgreementConfig, agreement_matrix
from metric_suite import MetricOptions, RelevanceConfig, evaluate, evaluate_at_k, core_metrics
from perm_core import PermutationError, identity
from property_lab import DISTANCE_LIMIT, ORACLE_SUBJECTS, ProtocolConfig, property_table, run_oracle
from reporting import (
    RunManifest, catalogue_frame, load_manifest, oracle_text, write_heatmap, write_manifest,
    write_matrix_csv, write_report, write_sidecar, write_verdict_csv,
)
from utils import describe_error, format_value, parse_csv_list, parse_permutation_arg

logger = logging.getLogger(__name__)


# ==================== SETTINGS ====================

def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def _as_list(value) -> List[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return parse_csv_list(value) or []


def _as_swap_samples(value) -> Optional[int]:
    if value is None or str(value).strip().lower() == "all":
        return None
    return int(value)


def _as_exhaustive(value) -> Dict[str, int]:
    """'ioi=6,wsd=8' per property, or a single size for every property"""
    if isinstance(value, dict):
        return {k: int(v) for k, v in value.items()}
    text = str(value).strip()
    if "=" not in text:
        size = int(text)
        return {prop: (min(size, DISTANCE_LIMIT) if prop == "distance" else size) for prop in EXHAUSTIVE_SIZES}
    sizes = {}
    for item in parse_csv_list(text):
        prop, _, size = item.partition("=")
        if prop.strip() not in EXHAUSTIVE_SIZES:
            raise ValueError(f"--exhaustive-n: unknown property {prop.strip()!r}")
        sizes[prop.strip()] = int(size)
    return sizes


class Settings:
    """
    Resolves each setting as flag > config file (or replayed manifest) >
    environment-backed default.
    """

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.base: Dict = {}
        replay = getattr(args, "replay", None)
        if replay:
            manifest = load_manifest(replay)
            if manifest.command != args.command:
                raise ValueError(f"Manifest {replay} records command {manifest.command!r}, not {args.command!r}")
            self.base = dict(manifest.config)
            logger.info(f"Replaying configuration from {replay}")
        elif getattr(args, "config", None):
            self.base = load_config_file(args.config)

    def get(self, key: str, default, cast=str):
        value = getattr(self.args, key, None)
        if value is not None:
            return cast(value)
        if key in self.base and self.base[key] is not None:
            return cast(self.base[key])
        return default


def _relevance(settings: Settings) -> RelevanceConfig:
    relevant = settings.get("relevant", RELEVANT_SIZE, int)
    return RelevanceConfig(relevant, settings.get("retrieved", relevant, int))


# ==================== COMMANDS ====================

def cmd_list(args: argparse.Namespace) -> int:
    """Print the metric catalogue"""
    frame = catalogue_frame()
    print(frame.to_string(index=False))
    if args.manifest:
        write_manifest(RunManifest(command="list", config={"metrics": len(frame)}), args.manifest)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    """Print one metric value (or undef) with 12 significant digits"""
    try:
        sigma = parse_permutation_arg(args.sigma)
    except ValueError as e:
        raise PermutationError(f"--sigma {args.sigma!r}: {e}")
    try:
        tau = parse_permutation_arg(args.tau)
    except ValueError as e:
        raise PermutationError(f"--tau {args.tau!r}: {e}")

    relevant = args.relevant if args.relevant is not None else RELEVANT_SIZE
    cfg = RelevanceConfig(relevant, args.retrieved if args.retrieved is not None else relevant).fit(tau.n)
    options = MetricOptions(beta=args.beta, mean_normalized=bool(args.mean_normalized))
    if args.k is not None:
        value = evaluate_at_k(args.metric, sigma, tau, args.k, cfg, options)
    else:
        value = evaluate(args.metric, sigma, tau, cfg, options)
    print(format_value(value))

    if args.manifest:
        config = {
            "metric": args.metric, "sigma": str(sigma), "tau": str(tau), "k": args.k,
            "relevant": cfg.j, "retrieved": cfg.k, "beta": args.beta,
            "mean_normalized": options.mean_normalized, "value": format_value(value),
        }
        write_manifest(RunManifest(command="eval", config=config), args.manifest)
    return EXIT_OK


def cmd_agreement(args: argparse.Namespace) -> int:
    """Agreement matrix CSV, metadata sidecar, SVG heatmap and run manifest"""
    settings = Settings(args)
    n = settings.get("n", AGREEMENT_N, int)
    metrics = settings.get("metrics", core_metrics(), _as_list)
    reference = settings.get("reference", None, str)
    out_csv = settings.get("out_csv", "agreement.csv")
    resolved = {
        "n": n,
        "samples": settings.get("samples", AGREEMENT_SAMPLE_RANKINGS, int),
        "pairs": settings.get("pairs", AGREEMENT_SAMPLE_PAIRS, int),
        "seed": settings.get("seed", DEFAULT_SEED, int),
        "relevant": _relevance(settings).j,
        "retrieved": _relevance(settings).k,
        "metrics": metrics,
        "reference": reference or str(identity(n)),
        "mean_normalized": settings.get("mean_normalized", False, _as_bool),
        "out_csv": out_csv,
        "out_svg": settings.get("out_svg", f"{out_csv.rsplit('.', 1)[0]}.svg"),
        "meta": settings.get("meta", f"{out_csv}.meta"),
    }
    workers = settings.get("workers", DEFAULT_WORKERS, int)

    cfg = AgreementConfig(
        n=n,
        reference=parse_permutation_arg(resolved["reference"]),
        sample_rankings=resolved["samples"],
        sample_pairs=resolved["pairs"],
        seed=resolved["seed"],
        relevance=RelevanceConfig(resolved["relevant"], resolved["retrieved"]),
        options=MetricOptions(mean_normalized=resolved["mean_normalized"]),
    )
    if len(metrics) < 2:
        raise ValueError("agreement needs at least 2 metrics")
    matrix = agreement_matrix(metrics, cfg, workers)

    write_matrix_csv(matrix, resolved["out_csv"])
    write_sidecar(matrix, resolved["meta"])
    write_heatmap(matrix, resolved["out_svg"])
    manifest = RunManifest(command="agreement", config=resolved, seed=cfg.seed)
    for path in (resolved["out_csv"], resolved["meta"], resolved["out_svg"]):
        manifest.add_output(path)
    write_manifest(manifest, f"{resolved['out_csv']}.manifest.json")
    print(resolved["out_csv"])
    return EXIT_OK


def cmd_properties(args: argparse.Namespace) -> int:
    """Verdict grid CSV, full report and run manifest"""
    settings = Settings(args)
    out = settings.get("out", "properties.csv")
    resolved = {
        "n": settings.get("n", PROTOCOL_N, int),
        "pairs": settings.get("pairs", PROTOCOL_PAIRS, int),
        "seed": settings.get("seed", DEFAULT_SEED, int),
        "metrics": settings.get("metrics", core_metrics(), _as_list),
        "properties": settings.get("properties", list(PROPERTIES), _as_list),
        "exhaustive_n": settings.get("exhaustive_n", dict(EXHAUSTIVE_SIZES), _as_exhaustive),
        "swap_samples": settings.get("swap_samples", ROBUSTNESS_SWAP_SAMPLES, _as_swap_samples) or "all",
        "relevant": _relevance(settings).j,
        "retrieved": _relevance(settings).k,
        "mean_normalized": settings.get("mean_normalized", False, _as_bool),
        "out": out,
        "report": settings.get("report", f"{out.rsplit('.', 1)[0]}.report.txt"),
    }
    workers = settings.get("workers", DEFAULT_WORKERS, int)

    cfg = ProtocolConfig(
        n=resolved["n"],
        pair_count=resolved["pairs"],
        swap_samples=_as_swap_samples(resolved["swap_samples"]),
        exhaustive_n=resolved["exhaustive_n"],
        seed=resolved["seed"],
        relevance=RelevanceConfig(resolved["relevant"], resolved["retrieved"]),
        options=MetricOptions(mean_normalized=resolved["mean_normalized"]),
    )
    resolved["exhaustive_n"] = dict(cfg.exhaustive_n)
    grid = property_table(resolved["metrics"], resolved["properties"], cfg, workers)

    write_verdict_csv(grid, resolved["out"])
    write_report(grid, resolved["report"])
    manifest = RunManifest(command="properties", config=resolved, seed=cfg.seed)
    manifest.add_output(resolved["out"])
    manifest.add_output(resolved["report"])
    write_manifest(manifest, f"{resolved['out']}.manifest.json")
    print(resolved["out"])
    return EXIT_OK


def cmd_oracle(args: argparse.Namespace) -> int:
    """Run a brute-force verification; exit 0 on pass, 1 on fail"""
    result = run_oracle(args.subject, args.n)
    print(oracle_text(result), end="")
    if args.manifest:
        config = {"subject": args.subject, "n": result.n, "passed": result.passed}
        write_manifest(RunManifest(command="oracle", config=config), args.manifest)
    return EXIT_OK if result.passed else EXIT_ORACLE_FAIL


# ==================== PARSER ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=APP_NAME, description=APP_DESCRIPTION)
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="List the metric catalogue")
    p.add_argument("--manifest", help="Write a run manifest to this path")
    p.set_defaults(handler=cmd_list)

    p = sub.add_parser("eval", help="Evaluate one metric on two rankings")
    p.add_argument("metric")
    p.add_argument("--sigma", required=True, help="Reference ranking: file, inline image or idN/revN[/i-j]")
    p.add_argument("--tau", required=True, help="Compared ranking: file, inline image or idN/revN[/i-j]")
    p.add_argument("--k", type=int, help="Evaluate @k")
    p.add_argument("--relevant", type=int, help=f"Relevant set size j (default {RELEVANT_SIZE})")
    p.add_argument("--retrieved", type=int, help="Retrieved set size k (default j)")
    p.add_argument("--beta", type=float, default=1.0, help="F-beta weight (default 1)")
    p.add_argument("--mean-normalized", action="store_true", default=None, help="Divide MSE/MAE by n")
    p.add_argument("--manifest", help="Write a run manifest to this path")
    p.set_defaults(handler=cmd_eval)

    for name, handler, help_text in (
        ("agreement", cmd_agreement, "Estimate the agreement matrix of a metric list"),
        ("properties", cmd_properties, "Check metric properties and write the verdict grid"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--n", type=int, help="Ranking length")
        p.add_argument("--pairs", type=int, help="Sampled pairs")
        p.add_argument("--seed", type=int, help=f"Seed (default RANKEVAL_SEED or {DEFAULT_SEED})")
        p.add_argument("--relevant", type=int, help=f"Relevant set size j (default {RELEVANT_SIZE})")
        p.add_argument("--retrieved", type=int, help="Retrieved set size k (default j)")
        p.add_argument("--metrics", help="Comma-separated metric names (default: the 33 catalogue metrics)")
        p.add_argument("--workers", type=int, help="Worker processes (never changes outputs)")
        p.add_argument("--mean-normalized", action="store_true", default=None, help="Divide MSE/MAE by n")
        p.add_argument("--config", help="KEY=value config file")
        p.add_argument("--replay", help="Reuse the configuration recorded in a run manifest")
        p.set_defaults(handler=handler)
        if name == "agreement":
            p.add_argument("--samples", type=int, help="Sampled rankings |T|")
            p.add_argument("--reference", help="Reference ranking (default id)")
            p.add_argument("--out-csv", dest="out_csv", help="Matrix CSV path")
            p.add_argument("--out-svg", dest="out_svg", help="Heatmap SVG path")
            p.add_argument("--meta", help="Metadata sidecar path")
        else:
            p.add_argument("--properties", help="Comma-separated property ids (default: all)")
            p.add_argument("--exhaustive-n", dest="exhaustive_n", help="Exhaustive sizes: N or prop=N,...")
            p.add_argument("--swap-samples", dest="swap_samples", help="Swaps per pair for robustness_1, or 'all'")
            p.add_argument("--out", help="Verdict grid CSV path")
            p.add_argument("--report", help="Full report path")

    p = sub.add_parser("oracle", help="Run a brute-force verification")
    p.add_argument("subject", choices=ORACLE_SUBJECTS)
    p.add_argument("--n", type=int, help="Size of the symmetric group")
    p.add_argument("--manifest", help="Write a run manifest to this path")
    p.set_defaults(handler=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    try:
        return args.handler(args)
    except OSError as e:
        print(f"{APP_NAME}: {describe_error(e)}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"{APP_NAME}: {describe_error(e)}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
