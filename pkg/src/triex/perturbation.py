"""Record perturbation: value copying from a support record and token drops."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .dataset import Record, tokenize

DEFAULT_AUGMENT_CAP = 256


@dataclass(frozen=True)
class PerturbedRecord:
    """Copy of ``base`` whose ``changed`` attributes carry ``source`` values."""

    base: Record
    source: Record
    changed: frozenset[str]
    result: Record


def psi(u: Record, w: Record, attrs: set[str] | frozenset[str]) -> PerturbedRecord:
    """Copy the values of ``attrs`` from support ``w`` into ``u``.

    An empty set returns ``u`` unchanged; the full attribute set returns a
    record attribute-equal to ``w``.
    """
    if u.side != w.side:
        raise ValueError(f"side mismatch: {u.side} vs {w.side}")
    changed = frozenset(attrs)
    unknown = changed - set(u.values)
    if unknown:
        raise ValueError(f"unknown attribute(s) {sorted(unknown)} on side {u.side}")
    values = {a: (w.values[a] if a in changed else v) for a, v in u.values.items()}
    result = Record(id=u.id, side=u.side, values=values)
    return PerturbedRecord(base=u, source=w, changed=changed, result=result)


def _drop_actions(value: str) -> list[tuple[str, int]]:
    """Legal token drops for one value: first-k then last-k, k ascending."""
    n = len(tokenize(value))
    if n <= 1:
        return []
    return [("first", k) for k in range(1, n)] + [("last", k) for k in range(1, n)]


def _apply_drop(value: str, action: tuple[str, int]) -> str:
    kind, k = action
    tokens = tokenize(value)
    kept = tokens[k:] if kind == "first" else tokens[: len(tokens) - k]
    return " ".join(kept)


def augment(w: Record, cap: int = DEFAULT_AUGMENT_CAP) -> list[Record]:
    """Variants of ``w`` obtained by dropping leading or trailing tokens.

    For each non-empty attribute subset (by size, then lexicographic), each
    chosen attribute independently takes one drop action; combinations are the
    cartesian product of the per-attribute actions. Attributes with at most
    one token admit no drop, so subsets requiring them are skipped. Output is
    deterministic, attribute-equal duplicates are removed, and the sequence is
    truncated at ``cap``.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    attrs = list(w.values)
    actions = {a: _drop_actions(w.values[a]) for a in attrs}
    variants: list[Record] = []
    seen: set[tuple] = set()
    counter = 0
    for size in range(1, len(attrs) + 1):
        for subset in itertools.combinations(range(len(attrs)), size):
            chosen = [attrs[i] for i in subset]
            if any(not actions[a] for a in chosen):
                continue
            for combo in itertools.product(*(actions[a] for a in chosen)):
                values = dict(w.values)
                for attr, action in zip(chosen, combo):
                    values[attr] = _apply_drop(w.values[attr], action)
                key = tuple(values.items())
                if key in seen:
                    continue
                seen.add(key)
                variants.append(
                    Record(id=f"{w.id}~a{counter}", side=w.side, values=values)
                )
                counter += 1
                if len(variants) >= cap:
                    return variants
    return variants
