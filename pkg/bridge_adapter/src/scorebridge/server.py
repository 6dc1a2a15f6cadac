"""Stdio server speaking the engine's line bridge protocol.

One JSON request per line; the reply to ``{"op":"hello"}`` is ``{"ok":true}``
and every scoring request ``{"l": {...}, "r": {...}}`` gets exactly one
decimal score line back, in request order, with 9 fractional digits. The
process exits cleanly on end-of-input and emits a single ``{"error": ...}``
line plus a nonzero exit code on a scorer failure or malformed request.
"""

from __future__ import annotations

import argparse
import importlib
import json
import math
import sys
from dataclasses import dataclass
from typing import Callable, TextIO

Scorer = Callable[[dict, dict], float]

DEFAULT_SCORER = "scorebridge.scorers:token_jaccard_score"


@dataclass(frozen=True)
class AdapterConfig:
    scorer_spec: str = DEFAULT_SCORER
    batch_hint: int = 64  # advisory only; serving is strictly sequential


def resolve_scorer(spec: str) -> Scorer:
    """Import ``package.module:callable`` and verify it is callable."""
    module_path, sep, attr = spec.partition(":")
    if not sep or not module_path or not attr:
        raise ValueError(f"scorer spec {spec!r} is not of the form module:callable")
    module = importlib.import_module(module_path)
    try:
        scorer = getattr(module, attr)
    except AttributeError:
        raise ValueError(f"module {module_path!r} has no attribute {attr!r}") from None
    if not callable(scorer):
        raise ValueError(f"{spec!r} does not resolve to a callable")
    return scorer


def _emit(stdout: TextIO, text: str) -> None:
    stdout.write(text + "\n")
    stdout.flush()


def _error(stdout: TextIO, message: str) -> int:
    _emit(stdout, json.dumps({"error": message}, ensure_ascii=False))
    return 1


def serve(scorer: Scorer, stdin: TextIO, stdout: TextIO) -> int:
    """Process requests until end-of-input; returns the process exit code."""
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error(stdout, f"malformed request line: {exc}")
        if not isinstance(request, dict):
            return _error(stdout, "request must be a JSON object")
        if request.get("op") == "hello":
            _emit(stdout, '{"ok":true}')
            continue
        if "l" not in request or "r" not in request:
            return _error(stdout, "scoring request needs 'l' and 'r' objects")
        try:
            score = float(scorer(request["l"], request["r"]))
        except Exception as exc:
            return _error(stdout, f"scorer failed: {exc}")
        if not math.isfinite(score) or not 0.0 <= score <= 1.0:
            return _error(stdout, f"scorer returned {score!r}, outside [0, 1]")
        _emit(stdout, f"{score:.9f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorebridge",
        description="Serve a pair-scoring callable over the stdio bridge protocol.",
    )
    parser.add_argument(
        "--scorer",
        default=DEFAULT_SCORER,
        help="module:callable taking (left, right) attribute mappings",
    )
    parser.add_argument("--batch-hint", type=int, default=64)
    args = parser.parse_args(argv)
    config = AdapterConfig(scorer_spec=args.scorer, batch_hint=args.batch_hint)
    try:
        scorer = resolve_scorer(config.scorer_spec)
    except (ImportError, ValueError) as exc:
        print(f"scorebridge: {exc}", file=sys.stderr)
        return 2
    return serve(scorer, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
