"""Command-line entry point.

Subcommands: ``summarize``, ``explain``, ``evaluate``, ``audit``,
``triangles``. Every flag can be defaulted through a ``TRIEX_``-prefixed
environment variable (``TRIEX_DATASET``, ``TRIEX_CLASSIFIER``, ``TRIEX_TAU``,
``TRIEX_SEED``, ``TRIEX_JOBS``, ``TRIEX_CF_CAP``, ``TRIEX_OUT``,
``TRIEX_FORMAT``); explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import shlex
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import report as reporting
from .classifier import (
    BridgeMatcher,
    BridgeTransportError,
    HttpBridgeMatcher,
    Matcher,
    ReferenceMatcher,
)
from .dataset import Dataset, DatasetError, load_dataset
from .explainer import ExplainConfig, ExplanationUnavailable, explain
from .lattice import AuditReport, audit_monotonicity
from .metrics import evaluate_split, masking_effect
from .triangles import DEFAULT_TAU, get_triangles

ENV_PREFIX = "TRIEX_"

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3


def _env(name: str, fallback: str | None = None) -> str | None:
    return os.environ.get(ENV_PREFIX + name, fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triex",
        description="Saliency and counterfactual explanations for black-box ER classifiers.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", default=_env("DATASET"), help="dataset directory")
    common.add_argument(
        "--classifier",
        default=_env("CLASSIFIER", "reference"),
        help="reference | bridge:<command> | http:<url>",
    )
    common.add_argument("--tau", type=int, default=int(_env("TAU", str(DEFAULT_TAU))))
    common.add_argument("--seed", type=int, default=int(_env("SEED", "0")))
    common.add_argument("--jobs", type=int, default=int(_env("JOBS", "1")))
    common.add_argument("--no-augment", action="store_true")
    common.add_argument("--no-prune", action="store_true")
    common.add_argument("--cf-cap", type=int, default=int(_env("CF_CAP", "10")))
    common.add_argument("--out", default=_env("OUT", "triex-out"))
    common.add_argument("--format", choices=("json", "md"), default=_env("FORMAT", "json"))
    common.add_argument("--no-figures", action="store_true")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("summarize", parents=[common], help="dataset overview as JSON")
    p = sub.add_parser("explain", parents=[common], help="explain selected pairs")
    p.add_argument(
        "--pair",
        required=True,
        help="<split>:<row>, all:<split>, or <idA>,<idB>",
    )
    p = sub.add_parser("evaluate", parents=[common], help="evaluate a whole split")
    p.add_argument("--split", default="test")
    p = sub.add_parser("audit", parents=[common], help="monotonicity audit over a split")
    p.add_argument("--split", default="test")
    p.add_argument("--limit", type=int, default=5, help="pairs to audit")
    p = sub.add_parser("triangles", parents=[common], help="triangle acquisition report")
    p.add_argument("--pair", required=True)
    return parser


def make_matcher(spec: str) -> Matcher:
    if spec == "reference":
        return ReferenceMatcher()
    if spec.startswith("bridge:"):
        return BridgeMatcher(shlex.split(spec[len("bridge:") :]))
    if spec.startswith(("http://", "https://")):
        return HttpBridgeMatcher(spec)
    if spec.startswith("http:"):
        rest = spec[len("http:") :]
        return HttpBridgeMatcher("http:" + rest if rest.startswith("//") else rest)
    raise ValueError(f"unknown classifier spec {spec!r}")


def _config(args: argparse.Namespace) -> ExplainConfig:
    return ExplainConfig(
        tau=args.tau,
        seed=args.seed,
        allow_augment=not args.no_augment,
        pruning=not args.no_prune,
        cf_cap=args.cf_cap,
    )


def _sanitize(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", text)


def select_pairs(dataset: Dataset, selector: str) -> list[tuple[str, str, str]]:
    """Resolve a pair selector to (tag, id_u, id_v) triples."""
    if selector.startswith("all:"):
        split = selector[len("all:") :]
        if split not in dataset.splits:
            raise ValueError(f"unknown split {split!r}")
        return [
            (f"{split}{i}", p.id_u, p.id_v)
            for i, p in enumerate(dataset.splits[split])
        ]
    head, sep, tail = selector.partition(":")
    if sep and head in dataset.splits:
        try:
            index = int(tail)
            pair = dataset.splits[head][index]
        except (ValueError, IndexError):
            raise ValueError(f"bad row index in selector {selector!r}") from None
        return [(f"{head}{index}", pair.id_u, pair.id_v)]
    if "," in selector:
        id_u, id_v = (part.strip() for part in selector.split(",", 1))
        if id_u not in dataset.table_u:
            raise ValueError(f"unknown tableA id {id_u!r}")
        if id_v not in dataset.table_v:
            raise ValueError(f"unknown tableB id {id_v!r}")
        return [(_sanitize(f"{id_u}__{id_v}"), id_u, id_v)]
    raise ValueError(f"cannot parse pair selector {selector!r}")


def _write_json(path: Path, payload: dict) -> None:
    reporting.atomic_write_text(
        path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    )


def cmd_summarize(args: argparse.Namespace, dataset: Dataset) -> int:
    print(json.dumps(dataset.summary(), ensure_ascii=False, indent=2))
    return EXIT_OK


def cmd_explain(args: argparse.Namespace, dataset: Dataset, matcher: Matcher) -> int:
    out = Path(args.out)
    config = _config(args)
    selected = select_pairs(dataset, args.pair)

    def run_one(entry: tuple[str, str, str]):
        tag, id_u, id_v = entry
        target = matcher.predict(dataset.table_u[id_u], dataset.table_v[id_v])
        return tag, target, explain(matcher, target, dataset, config)

    results = []
    failures = []
    if args.jobs > 1:
        order = {entry[0]: i for i, entry in enumerate(selected)}
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = {pool.submit(run_one, entry): entry for entry in selected}
            for future, entry in futures.items():
                try:
                    results.append(future.result())
                except ExplanationUnavailable as exc:
                    failures.append((entry[0], str(exc)))
        results.sort(key=lambda r: order[r[0]])
    else:
        for entry in selected:
            try:
                results.append(run_one(entry))
            except ExplanationUnavailable as exc:
                failures.append((entry[0], str(exc)))

    explanations = []
    for tag, target, explanation in results:
        explanations.append(explanation)
        _write_json(out / f"explanation_{tag}.json", explanation.to_json_dict())
        if args.format == "md":
            reporting.atomic_write_text(
                out / f"explanation_{tag}.md",
                reporting.explanation_markdown(explanation),
            )
        if not args.no_figures:
            total = len(dataset.schema_u) + len(dataset.schema_v)
            effect = masking_effect(
                matcher,
                target,
                explanation.saliency,
                explanation.schemas,
                ks=list(range(1, min(total, 5) + 1)),
            )
            reporting.save_saliency_figure(
                explanation, out / f"saliency_{tag}.png", actual=effect
            )
    if explanations:
        reporting.atomic_write_text(
            out / "summary.csv", reporting.saliency_csv(explanations)
        )
    _write_json(
        out / "summary.json",
        {
            "explained": len(explanations),
            "failed": [{"pair": tag, "reason": reason} for tag, reason in failures],
        },
    )
    for tag, reason in failures:
        print(f"explain {tag}: {reason}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(args: argparse.Namespace, dataset: Dataset, matcher: Matcher) -> int:
    out = Path(args.out)
    result = evaluate_split(matcher, dataset, args.split, _config(args))
    _write_json(out / "report.json", result.to_json_dict())
    reporting.atomic_write_text(out / "rows.csv", reporting.evaluation_rows_csv(result))
    if args.format == "md":
        reporting.atomic_write_text(
            out / "report.md", reporting.evaluation_markdown(result)
        )
    if not args.no_figures and result.faithfulness is not None:
        reporting.save_faithfulness_figure(result.faithfulness, out / "faithfulness.png")
    return EXIT_OK


def cmd_audit(args: argparse.Namespace, dataset: Dataset, matcher: Matcher) -> int:
    out = Path(args.out)
    if args.split not in dataset.splits:
        raise ValueError(f"unknown split {args.split!r}")
    rows = []
    for pair in dataset.splits[args.split][: args.limit]:
        record_u, record_v = dataset.pair_records(pair)
        target = matcher.predict(record_u, record_v)
        triangles, _ = get_triangles(
            matcher,
            target,
            dataset,
            tau=args.tau,
            allow_augment=not args.no_augment,
            seed=args.seed,
        )
        rows.extend(audit_monotonicity(matcher, target, triangles).rows)
    audit = AuditReport(rows=rows)
    _write_json(out / "audit.json", audit.to_json_dict())
    reporting.atomic_write_text(out / "audit.csv", reporting.audit_csv(audit))
    if not args.no_figures:
        reporting.save_audit_figure(audit, out / "audit_savings.png")
    return EXIT_OK


def cmd_triangles(args: argparse.Namespace, dataset: Dataset, matcher: Matcher) -> int:
    selected = select_pairs(dataset, args.pair)
    if not selected:
        raise ValueError(f"selector {args.pair!r} matches no pairs")
    _, id_u, id_v = selected[0]
    target = matcher.predict(dataset.table_u[id_u], dataset.table_v[id_v])
    _, tri_report = get_triangles(
        matcher,
        target,
        dataset,
        tau=args.tau,
        allow_augment=not args.no_augment,
        seed=args.seed,
    )
    payload = {
        "pair": {"id_u": id_u, "id_v": id_v},
        "score": target.score,
        "label": "match" if target.label else "non-match",
        **tri_report.to_json_dict(),
    }
    print(json.dumps(payload, ensure_ascii=False, indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not args.dataset:
        print("error: --dataset is required (or set TRIEX_DATASET)", file=sys.stderr)
        return EXIT_USAGE
    try:
        dataset = load_dataset(args.dataset)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "summarize":
        return cmd_summarize(args, dataset)
    try:
        matcher = make_matcher(args.classifier)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "explain":
            return cmd_explain(args, dataset, matcher)
        if args.command == "evaluate":
            return cmd_evaluate(args, dataset, matcher)
        if args.command == "audit":
            return cmd_audit(args, dataset, matcher)
        if args.command == "triangles":
            return cmd_triangles(args, dataset, matcher)
        raise AssertionError(f"unhandled command {args.command}")
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BridgeTransportError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    finally:
        closer = getattr(matcher, "close", None)
        if closer is not None:
            closer()


if __name__ == "__main__":
    sys.exit(main())
