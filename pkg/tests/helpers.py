"""Shared test fixtures: scripted oracles, scenario builders, brute-force twin.

The scripted oracle maps (left fingerprint, right fingerprint) to a flip
decision, so tag patterns over attribute subsets can be prescribed exactly.
The brute-force explainer recounts necessity/sufficiency by scoring every
subset perturbation directly, with no lattice and no pruning; it is the
independent oracle the engine is checked against.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from triex.classifier import Matcher, Pair, Prediction
from triex.dataset import (
    Dataset,
    LabeledPair,
    Record,
    Schema,
    SIDE_U,
    SIDE_V,
)
from triex.triangles import LEFT, OpenTriangle

# Tag patterns of the four worked lattices over attributes (N, D, P):
# masks use N=bit0, D=bit1, P=bit2.
WORKED_EXAMPLE_PATTERNS = (
    {0: False, 1: True, 2: True, 3: True, 4: False, 5: True, 6: True, 7: True},
    {0: False, 1: True, 2: False, 3: True, 4: False, 5: True, 6: True, 7: True},
    {0: False, 1: True, 2: False, 3: True, 4: False, 5: True, 6: False, 7: True},
    {0: False, 1: False, 2: False, 3: True, 4: False, 5: True, 6: True, 7: True},
)


def make_record(rec_id: str, side: str, values: dict[str, str]) -> Record:
    return Record(id=rec_id, side=side, values=values)


class ScriptedMatcher(Matcher):
    """Content-keyed oracle: a fingerprint-pair table decides flips.

    Pairs found in the table with True score on the side opposite the base
    label; everything else (including all unknown pairs) scores on the base
    label's side.
    """

    def __init__(self, table: dict[tuple, bool], base_label: bool) -> None:
        self.table = table
        self.keep_score = 0.9 if base_label else 0.1
        self.flip_score = 1.0 - self.keep_score
        self.calls = 0

    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        self.calls += len(pairs)
        out = []
        for u, v in pairs:
            flip = self.table.get((u.fingerprint, v.fingerprint), False)
            out.append(self.flip_score if flip else self.keep_score)
        return out


class ConstantMatcher(Matcher):
    def __init__(self, score: float) -> None:
        self.score = score

    def predict_batch(self, pairs: list[Pair]) -> list[float]:
        return [self.score] * len(pairs)


def _perturbed_values(base: Record, source: Record, mask: int) -> dict[str, str]:
    attrs = list(base.values)
    return {
        a: (source.values[a] if (mask >> i) & 1 else base.values[a])
        for i, a in enumerate(attrs)
    }


@dataclass
class Scenario:
    dataset: Dataset
    matcher: ScriptedMatcher
    target: Prediction
    left_supports: list[Record]
    right_supports: list[Record]
    left_patterns: tuple[dict[int, bool], ...]
    right_patterns: tuple[dict[int, bool], ...]

    def left_triangles(self) -> list[OpenTriangle]:
        u, v = self.target.record_u, self.target.record_v
        return [
            OpenTriangle(
                free=u,
                pivot=v,
                support=w,
                side="left",
                support_score=self.matcher.flip_score,
            )
            for w in self.left_supports
        ]


def build_scenario(
    left_patterns,
    right_patterns=(),
    attrs_u=("N", "D", "P"),
    attrs_v=None,
    base_label: bool = True,
    extra_records: int = 2,
) -> Scenario:
    """Dataset plus scripted oracle realizing the given per-support tag patterns.

    Each pattern maps every subset mask of the side's attributes to its flip
    tag; pattern i belongs to support i. Every support's full-schema copy
    flips by construction, so each support forms exactly one open triangle.
    """
    attrs_v = attrs_u if attrs_v is None else attrs_v
    u = make_record("u0", SIDE_U, {a: f"u0 {a} val" for a in attrs_u})
    v = make_record("v0", SIDE_V, {a: f"v0 {a} val" for a in attrs_v})
    left_supports = [
        make_record(f"w{i}", SIDE_U, {a: f"w{i} {a} val" for a in attrs_u})
        for i in range(len(left_patterns))
    ]
    right_supports = [
        make_record(f"q{i}", SIDE_V, {a: f"q{i} {a} val" for a in attrs_v})
        for i in range(len(right_patterns))
    ]
    # padding records that never flip, to give triangle search something to scan
    filler_u = [
        make_record(f"fu{i}", SIDE_U, {a: f"fu{i} {a} val" for a in attrs_u})
        for i in range(extra_records)
    ]
    filler_v = [
        make_record(f"fv{i}", SIDE_V, {a: f"fv{i} {a} val" for a in attrs_v})
        for i in range(extra_records)
    ]

    table: dict[tuple, bool] = {}

    def put(key: tuple, flip: bool) -> None:
        if key in table and table[key] != flip:
            raise AssertionError("conflicting scripted oracle entry")
        table[key] = flip

    for pattern, support in zip(left_patterns, left_supports):
        if pattern[0] or not pattern[max(pattern)]:
            raise AssertionError("patterns must keep the infimum and flip the supremum")
        for mask, flip in pattern.items():
            perturbed = Record(
                id=u.id, side=SIDE_U, values=_perturbed_values(u, support, mask)
            )
            put((perturbed.fingerprint, v.fingerprint), flip)
    for pattern, support in zip(right_patterns, right_supports):
        if pattern[0] or not pattern[max(pattern)]:
            raise AssertionError("patterns must keep the infimum and flip the supremum")
        for mask, flip in pattern.items():
            perturbed = Record(
                id=v.id, side=SIDE_V, values=_perturbed_values(v, support, mask)
            )
            put((u.fingerprint, perturbed.fingerprint), flip)

    matcher = ScriptedMatcher(table, base_label=base_label)
    dataset = Dataset(
        schema_u=Schema(side=SIDE_U, attributes=tuple(attrs_u)),
        schema_v=Schema(side=SIDE_V, attributes=tuple(attrs_v)),
        table_u={r.id: r for r in [u, *left_supports, *filler_u]},
        table_v={r.id: r for r in [v, *right_supports, *filler_v]},
        splits={
            "train": [LabeledPair(id_u=u.id, id_v=v.id, label=base_label)],
        },
    )
    target = Prediction(
        record_u=u, record_v=v, score=matcher.keep_score
    )
    assert target.label == base_label
    return Scenario(
        dataset=dataset,
        matcher=matcher,
        target=target,
        left_supports=left_supports,
        right_supports=right_supports,
        left_patterns=tuple(left_patterns),
        right_patterns=tuple(right_patterns),
    )


def synthetic_product_dataset(n_per_side: int = 50) -> Dataset:
    """Family-structured records for the reference matcher.

    Record i on each side belongs to family i: the pair (A_i, B_i) shares most
    tokens (match), while cross-family pairs are nearly token-disjoint
    (non-match). The test split alternates matching pairs with off-by-one
    non-matching pairs.
    """
    table_u: dict[str, Record] = {}
    table_v: dict[str, Record] = {}
    for i in range(n_per_side):
        table_u[str(i)] = make_record(
            str(i),
            SIDE_U,
            {
                "name": f"brand{i} model{i} series{i % 7}",
                "desc": f"brand{i} item{i} feature{i % 5} common",
                "price": f"{10 + i}.00",
            },
        )
        table_v[str(i)] = make_record(
            str(i),
            SIDE_V,
            {
                "name": f"brand{i} model{i} series{i % 7}",
                "desc": f"brand{i} item{i} feature{i % 5} extra",
                "price": f"{10 + i}.00",
            },
        )
    pairs = []
    for i in range(n_per_side):
        if i % 2 == 0:
            pairs.append(LabeledPair(str(i), str(i), True))
        else:
            pairs.append(LabeledPair(str(i), str((i + 1) % n_per_side), False))
    return Dataset(
        schema_u=Schema(side=SIDE_U, attributes=("name", "desc", "price")),
        schema_v=Schema(side=SIDE_V, attributes=("name", "desc", "price")),
        table_u=table_u,
        table_v=table_v,
        splits={"test": pairs},
    )


def random_monotone_pattern(l: int, rng: random.Random, density: float = 0.3) -> dict[int, bool]:
    """Upward-closed tag pattern with the infimum kept and the supremum flipped."""
    full = (1 << l) - 1
    gamma: dict[int, bool] = {0: False}
    for mask in sorted(range(1, full + 1), key=lambda m: (m.bit_count(), m)):
        forced = any(
            gamma[mask & ~(1 << i)] for i in range(l) if (mask >> i) & 1
        )
        gamma[mask] = forced or rng.random() < density
    gamma[full] = True
    return gamma


def enumerate_monotone_patterns(l: int) -> list[dict[int, bool]]:
    """Every monotone tag function on l attributes with gamma(0)=0, gamma(full)=1."""
    full = (1 << l) - 1
    n = full + 1
    patterns = []
    for bits in range(1 << n):
        gamma = [(bits >> m) & 1 == 1 for m in range(n)]
        if gamma[0] or not gamma[full]:
            continue
        monotone = True
        for mask in range(n):
            if not gamma[mask]:
                continue
            for i in range(l):
                if not (mask >> i) & 1 and not gamma[mask | (1 << i)]:
                    monotone = False
                    break
            if not monotone:
                break
        if monotone:
            patterns.append({m: gamma[m] for m in range(n)})
    return patterns


def brute_force_explain(matcher: Matcher, target: Prediction, triangles):
    """Independent recount of saliency and sufficiency by direct enumeration.

    Scores the perturbation of every attribute subset of every triangle (the
    empty set and full set included), counts flips straight off the scores,
    and applies the documented selection rule for the best subset. No lattice,
    no pruning, no tag propagation.
    """
    y = target.label
    sides = (SIDE_U, SIDE_V)
    flips = {s: 0 for s in sides}
    triangle_count = {s: 0 for s in sides}
    necessity: dict[str, dict[str, int]] = {s: {} for s in sides}
    sufficiency_count: dict[str, dict[int, int]] = {s: {} for s in sides}
    schema = {
        SIDE_U: tuple(target.record_u.values),
        SIDE_V: tuple(target.record_v.values),
    }
    for s in sides:
        necessity[s] = {a: 0 for a in schema[s]}

    for triangle in triangles:
        side = SIDE_U if triangle.side == LEFT else SIDE_V
        triangle_count[side] += 1
        attrs = schema[side]
        full = (1 << len(attrs)) - 1
        for mask in range(full + 1):
            values = _perturbed_values(triangle.free, triangle.support, mask)
            perturbed = Record(id="bf", side=triangle.free.side, values=values)
            pair = (
                (perturbed, triangle.pivot)
                if triangle.side == LEFT
                else (triangle.pivot, perturbed)
            )
            score = matcher.predict_batch([pair])[0]
            if (score > 0.5) != y:
                flips[side] += 1
                for i, a in enumerate(attrs):
                    if (mask >> i) & 1:
                        necessity[side][a] += 1
                if 0 < mask < full:
                    sufficiency_count[side][mask] = (
                        sufficiency_count[side].get(mask, 0) + 1
                    )

    phi = {
        side: {
            a: (necessity[side][a] / flips[side] if flips[side] else 0.0)
            for a in schema[side]
        }
        for side in sides
    }
    chi: dict[str, dict[frozenset[str], float]] = {}
    best = None
    for side_index, side in enumerate(sides):
        if triangle_count[side] == 0:
            continue
        attrs = schema[side]
        full = (1 << len(attrs)) - 1
        chi[side] = {}
        for mask in range(1, full):
            value = sufficiency_count[side].get(mask, 0) / triangle_count[side]
            names = frozenset(a for i, a in enumerate(attrs) if (mask >> i) & 1)
            chi[side][names] = value
            key = (-value, mask.bit_count(), side_index, mask)
            if best is None or key < best[0]:
                best = (key, side, mask, value)
    if best is not None and best[3] > 0.0:
        _, astar_side, astar_mask, chistar = best
        astar = frozenset(
            a for i, a in enumerate(schema[astar_side]) if (astar_mask >> i) & 1
        )
    else:
        astar_side, astar, chistar = None, frozenset(), 0.0
    return {
        "phi": phi,
        "chi": chi,
        "astar_side": astar_side,
        "astar": astar,
        "chistar": chistar,
        "flips": flips,
    }
