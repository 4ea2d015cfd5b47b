"""Command-line entry point.

Every flag can also be set through an environment variable named
``CLMM_LP_<FLAG>`` (upper case, dashes as underscores), e.g.
``CLMM_LP_LAMBDA=-2``. Explicit flags win over the environment.

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

from . import __version__
from .counterfactual import (
    ClassifierConfig,
    classify,
    default_threads,
    read_reports_csv,
    read_reports_json,
    run_analysis,
    sort_reports,
    top_percentile,
    write_reports_csv,
    write_reports_json,
)
from .etwl import compute_etwl, lambda_range, lambda_sweep, rank_lps, write_ranking_csv, write_sweep_csv
from .events import DirectoryStore, IngestError, load_dataset, persist
from .gatekeeper import GateThresholds, ServeConfig, serve
from .liquidity import build_liquidity_profile
from .swap_math import generate_synthetic_swaps, percentage_grid, write_swaps_jsonl

logger = logging.getLogger(__name__)

ENV_PREFIX = "CLMM_LP_"
TOOL = "clmm-lp-impact"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_default(flag: str, default):
    name = ENV_PREFIX + flag.lstrip("-").replace("-", "_").upper()
    return os.environ.get(name, default)


def _decimal(text) -> Decimal:
    try:
        value = Decimal(str(text))
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"not a decimal: {text!r}") from None
    if not value.is_finite():
        raise argparse.ArgumentTypeError(f"not finite: {text!r}")
    return value


def _grid(text) -> tuple[Decimal, Decimal, Decimal]:
    parts = str(text).split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start,end,step")
    return tuple(_decimal(p) for p in parts)


def _add(p, flag, **kw):
    if "default" in kw:
        kw["default"] = _env_default(flag, kw["default"])
    p.add_argument(flag, **kw)


def _add_input(p):
    _add(p, "--input", default=None, help="events JSONL, dataset JSON, or a directory written by `ingest`")
    _add(p, "--pool", default=None, help="pool address recorded for JSONL inputs")
    _add(p, "--strict", action="store_true", help="fail on the first malformed JSONL line")


def _add_out(p):
    _add(p, "--out", default=".", help="output directory")


def _add_etwl(p):
    _add(p, "--k", type=int, default=100, help="number of top LPs by ETWL")
    _add(p, "--lambda", dest="lam", type=_decimal, default="-1.5", help="ETWL decay factor (negative)")
    _add(p, "--close-at", action="store_true", help="accrue standing liquidity up to the last block")


def _add_grid(p):
    _add(p, "--grid", type=_grid, default="0.0001,0.01,0.001", help="swap size grid start,end,step (fractions of reserves)")
    _add(p, "--seed", type=int, default=42, help="synthetic swap RNG seed")


def _add_classifier(p):
    d = ClassifierConfig()
    _add(p, "--lsis-epsilon", type=_decimal, default=str(d.lsis_epsilon), help="LSIS below this counts as zero")
    _add(p, "--lsis-significant", type=_decimal, default=str(d.lsis_significant), help="LSIS significance threshold")
    _add(p, "--lsis-linchpin", type=_decimal, default=str(d.lsis_linchpin), help="LSIS linchpin threshold")
    _add(p, "--active-rank-max", type=int, default=d.active_rank_max, help="largest ETWL rank still counted as active")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL, description="Concentrated-liquidity LP impact analytics.")
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    _add(parser, "--log-level", default="WARNING", help="logging level")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    p = sub.add_parser("ingest", help="validate a JSONL event file and store it as a dataset")
    _add_input(p)
    _add_out(p)

    p = sub.add_parser("rank", help="rank LPs by ETWL")
    _add_input(p)
    _add_etwl(p)
    _add_out(p)

    p = sub.add_parser("analyze", help="counterfactual LSIS analysis of the top-k LPs")
    _add_input(p)
    _add_etwl(p)
    _add_grid(p)
    _add_classifier(p)
    _add(p, "--threads", type=int, default=default_threads(), help="worker processes for exclusion runs")
    _add(p, "--format", choices=["csv", "json"], default="csv", help="report format")
    _add(p, "--b2-share", type=_decimal, default="0.01", help="B2 share-of-pool threshold")
    _add(p, "--top-percentile", type=float, default=None, help="keep only the top N%% of LPs by LSIS")
    _add(p, "--signed-mean", action="store_true", help="average signed impacts instead of magnitudes")
    _add(p, "--canonical-math", action="store_true", help="use L + dX*P for token0 swaps")
    _add_out(p)

    p = sub.add_parser("classify", help="relabel an LSIS report with new thresholds")
    _add(p, "--reports", default=None, help="lsis.csv or lsis.json from `analyze`")
    _add_classifier(p)
    _add_out(p)

    p = sub.add_parser("sweep-lambda", help="ETWL ranking stability across decay factors")
    _add_input(p)
    _add(p, "--from", dest="lam_from", type=_decimal, default="-0.5", help="first decay factor")
    _add(p, "--to", dest="lam_to", type=_decimal, default="-5.0", help="last decay factor")
    _add(p, "--step", type=_decimal, default="0.5", help="decay factor step")
    _add(p, "--k", type=int, default=100, help="top-k used for overlap")
    _add(p, "--close-at", action="store_true", help="accrue standing liquidity up to the last block")
    _add_out(p)

    p = sub.add_parser("export-swaps", help="write the fixed synthetic swap set as JSONL")
    _add_input(p)
    _add_grid(p)
    _add_out(p)

    p = sub.add_parser("serve", help="run the burn gatekeeper HTTP service")
    _add_input(p)
    _add_grid(p)
    _add(p, "--host", default="127.0.0.1", help="bind address")
    _add(p, "--port", type=int, default=8080, help="bind port")
    _add(p, "--reports", default=None, help="LSIS report served by /v1/rankings")
    _add(p, "--allow-threshold", type=_decimal, default="0.005", help="max degradation for Allow")
    _add(p, "--deny-threshold", type=_decimal, default="0.05", help="degradation above this is denied")
    _add(p, "--min-depth", type=int, default=0, help="minimum depth after the burn")
    _add(p, "--depth-window", type=int, default=100, help="ticks either side of the current tick")
    _add(p, "--current-tick", type=int, default=None, help="current pool tick (default: densest tick)")
    return parser


# argparse does not run `type` on string defaults pulled from the environment
# for store_true flags, so normalize those here
def _truthy(v) -> bool:
    return v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes", "on")


def _validate(args) -> None:
    for flag in ("strict", "close_at", "signed_mean", "canonical_math"):
        if hasattr(args, flag):
            setattr(args, flag, _truthy(getattr(args, flag)))
    if args.command in ("ingest", "rank", "analyze", "sweep-lambda", "export-swaps", "serve"):
        if not args.input:
            raise UsageError("--input is required")
        if not Path(args.input).exists():
            raise UsageError(f"missing input: {args.input}")
    if getattr(args, "k", 1) < 1:
        raise UsageError("--k must be >= 1 (k is the number of top LPs)")
    if hasattr(args, "lam") and args.lam > 0:
        raise UsageError("--lambda must be <= 0")
    if hasattr(args, "grid"):
        start, end, step = args.grid
        try:
            percentage_grid(start, end, step)
        except ValueError as exc:
            raise UsageError(f"--grid: {exc}") from None
    if hasattr(args, "threads") and args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if getattr(args, "top_percentile", None) is not None and not 0 < args.top_percentile <= 100:
        raise UsageError("--top-percentile must be in (0, 100]")
    if hasattr(args, "lsis_epsilon"):
        try:
            args.classifier = ClassifierConfig(args.lsis_epsilon, args.lsis_significant, args.lsis_linchpin,
                                               args.active_rank_max)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.command == "classify":
        if not args.reports or not Path(args.reports).exists():
            raise UsageError(f"missing input: {args.reports}")
    if args.command == "sweep-lambda":
        if args.step <= 0:
            raise UsageError("--step must be positive")
        if len(lambda_range(args.lam_from, args.lam_to, args.step)) < 2:
            raise UsageError("sweep needs at least two lambda values")
    if args.command == "serve":
        try:
            args.thresholds = GateThresholds(args.allow_threshold, args.deny_threshold, args.min_depth,
                                             args.depth_window, args.current_tick)
        except ValueError as exc:
            raise UsageError(str(exc)) from None


def _config_of(args) -> dict:
    skip = {"classifier", "thresholds", "log_level"}
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, tuple):
            v = [str(x) for x in v]
        elif isinstance(v, Decimal):
            v = str(v)
        out[k] = v
    return out


def _write_manifest(out: Path, args, dataset_hash: str | None, outputs: list[str]) -> None:
    manifest = {
        "tool": TOOL,
        "version": __version__,
        "subcommand": args.command,
        "config": _config_of(args),
        "dataset_hash": dataset_hash,
        "outputs": outputs,
    }
    (out / "run-manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _run(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.command == "classify":
        path = args.reports
        reports = read_reports_json(path) if path.endswith(".json") else read_reports_csv(path)
        labeled = sort_reports(classify(reports, args.classifier))
        write_reports_csv(labeled, out / "classified.csv")
        _write_manifest(out, args, None, ["classified.csv"])
        print(f"classified {len(labeled)} LPs -> {out / 'classified.csv'}")
        return

    dataset = load_dataset(args.input, args.pool, args.strict)
    digest = dataset.content_hash()

    if args.command == "ingest":
        persist(dataset, DirectoryStore(out), "dataset")
        _write_manifest(out, args, digest, ["dataset.json"])
        print(f"ingested {len(dataset)} events ({dataset.skipped} skipped), blocks "
              f"{dataset.min_block}..{dataset.max_block} -> {out / 'dataset.json'}")

    elif args.command == "rank":
        ranking = rank_lps(compute_etwl(dataset, args.lam, args.close_at), args.k)
        write_ranking_csv(ranking, out / "rankings.csv")
        _write_manifest(out, args, digest, ["rankings.csv"])
        print(f"ranked {len(ranking)} LPs -> {out / 'rankings.csv'}")

    elif args.command == "analyze":
        result = run_analysis(
            dataset, args.k, args.lam, args.grid, args.seed, args.classifier,
            threads=args.threads, signed=args.signed_mean, canonical=args.canonical_math,
            close_at=args.close_at, b2_share=args.b2_share,
        )
        if args.top_percentile is not None:
            result.reports = top_percentile(result.reports, args.top_percentile)
        name = f"lsis.{args.format}"
        if args.format == "csv":
            write_reports_csv(result.reports, out / name)
        else:
            write_reports_json(result, out / name)
        _write_manifest(out, args, digest, [name])
        print(f"analyzed {len(result.reports)} LPs over {result.swap_count} swaps -> {out / name}")

    elif args.command == "sweep-lambda":
        rows = lambda_sweep(dataset, lambda_range(args.lam_from, args.lam_to, args.step), args.k,
                            close_at=args.close_at)
        write_sweep_csv(rows, out / "sweep.csv")
        _write_manifest(out, args, digest, ["sweep.csv"])
        print(f"swept {len(rows)} decay factors -> {out / 'sweep.csv'}")

    elif args.command == "export-swaps":
        swaps = generate_synthetic_swaps(build_liquidity_profile(dataset), *args.grid, rng_seed=args.seed)
        write_swaps_jsonl(swaps, out / "swaps.jsonl", args.seed)
        _write_manifest(out, args, digest, ["swaps.jsonl"])
        print(f"exported {len(swaps)} swaps -> {out / 'swaps.jsonl'}")

    elif args.command == "serve":
        serve(ServeConfig(args.input, args.host, args.port, args.grid, args.seed, args.thresholds,
                          args.reports, args.pool))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        _validate(args)
    except UsageError as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING))
    try:
        _run(args)
    except (IngestError, ValueError, RuntimeError, OSError) as exc:
        print(f"{TOOL}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
