"""End-to-end explanation pipeline for one prediction.

Acquires open triangles, tags one lattice per triangle, and aggregates the
flip tags into attribute saliency (probability of necessity) and subset
sufficiency, from which the counterfactual set is drawn: all verified flipped
perturbations whose changed attributes equal the best sufficiency subset.
"""

from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass, field

from .classifier import CachingMatcher, Matcher, Prediction, score_label
from .dataset import Dataset, Record, SIDE_U, SIDE_V
from .lattice import FlippedNode, build_lattice, get_flipped, get_lmfa, tag_lattice
from .triangles import DEFAULT_BATCH_SIZE, DEFAULT_TAU, LEFT, get_triangles

SIDE_PREFIX = {SIDE_U: "L_", SIDE_V: "R_"}


def display_name(side: str, attr: str) -> str:
    """Report-facing attribute name; internal names stay unprefixed."""
    return SIDE_PREFIX[side] + attr


def subset_attrs(schema_attrs: tuple[str, ...], mask: int) -> tuple[str, ...]:
    return tuple(a for i, a in enumerate(schema_attrs) if mask >> i & 1)


@dataclass(frozen=True)
class ExplainConfig:
    tau: int = DEFAULT_TAU
    seed: int = 0
    allow_augment: bool = True
    pruning: bool = True
    cf_cap: int = 10
    global_flip_denominator: bool = False
    batch_size: int = DEFAULT_BATCH_SIZE

    def to_json_dict(self) -> dict:
        return {
            "tau": self.tau,
            "seed": self.seed,
            "allow_augment": self.allow_augment,
            "pruning": self.pruning,
            "cf_cap": self.cf_cap,
            "global_flip_denominator": self.global_flip_denominator,
            "batch_size": self.batch_size,
        }


class ExplanationUnavailable(Exception):
    """No open triangle could be found on either side."""

    def __init__(self, message: str, diagnostics: dict) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class Counterfactual:
    """A verified flipped pair; ``changed`` names the copied attributes."""

    side: str
    changed: tuple[str, ...]
    record_u: Record
    record_v: Record
    score: float


@dataclass
class Explanation:
    target: Prediction
    schemas: dict[str, tuple[str, ...]]
    saliency: dict[str, dict[str, float]]
    sufficiency: dict[str, dict[frozenset[str], float]]
    astar_side: str | None
    astar: tuple[str, ...]
    chistar: float
    counterfactuals: list[Counterfactual]
    counterfactual_total: int
    diagnostics: dict = field(default_factory=dict)

    def saliency_by_display_name(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for side in (SIDE_U, SIDE_V):
            for attr in self.schemas[side]:
                out[display_name(side, attr)] = self.saliency[side][attr]
        return out

    def chi(self, side: str, attrs) -> float:
        return self.sufficiency[side][frozenset(attrs)]

    def _ordered_sufficiency(self, side: str) -> list[tuple[tuple[str, ...], float]]:
        schema = self.schemas[side]
        index = {a: i for i, a in enumerate(schema)}
        entries = []
        for attrs, value in self.sufficiency.get(side, {}).items():
            ordered = tuple(sorted(attrs, key=index.__getitem__))
            entries.append((ordered, value))
        entries.sort(key=lambda e: (len(e[0]), tuple(index[a] for a in e[0])))
        return entries

    def to_json_dict(self) -> dict:
        side_key = {SIDE_U: "L", SIDE_V: "R"}
        return {
            "target": {
                "id_u": self.target.record_u.id,
                "id_v": self.target.record_v.id,
                "score": self.target.score,
                "label": "match" if self.target.label else "non-match",
            },
            "saliency": self.saliency_by_display_name(),
            "sufficiency": {
                side_key[side]: [
                    {"attrs": list(attrs), "chi": value}
                    for attrs, value in self._ordered_sufficiency(side)
                ]
                for side in (SIDE_U, SIDE_V)
                if side in self.sufficiency
            },
            "astar": [display_name(self.astar_side, a) for a in self.astar]
            if self.astar_side
            else [],
            "chistar": self.chistar,
            "counterfactuals": [
                {
                    "side": cf.side,
                    "changed": list(cf.changed),
                    "score": cf.score,
                    "record_u": cf.record_u.values,
                    "record_v": cf.record_v.values,
                }
                for cf in self.counterfactuals
            ],
            "counterfactual_total": self.counterfactual_total,
            "diagnostics": self.diagnostics,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, indent=2)


def explain(
    matcher: Matcher,
    target: Prediction,
    dataset: Dataset,
    config: ExplainConfig | None = None,
) -> Explanation:
    """Explain one prediction: saliency per attribute plus counterfactuals.

    Necessity counts increment once per flipped node containing the attribute
    and are divided by that side's total flips (or the global total behind the
    config flag). Sufficiency of a subset is the fraction of that side's
    triangles whose lattice flipped it; the best subset (highest sufficiency,
    then fewest attributes, then canonical order) selects the counterfactuals,
    each re-scored before being returned.
    """
    config = config or ExplainConfig()
    oracle = matcher if isinstance(matcher, CachingMatcher) else CachingMatcher(matcher)
    scored_before = oracle.scored_pairs

    triangles, tri_report = get_triangles(
        oracle,
        target,
        dataset,
        tau=config.tau,
        allow_augment=config.allow_augment,
        seed=config.seed,
        batch_size=config.batch_size,
    )
    diagnostics: dict = {
        "triangles": tri_report.to_json_dict(),
        "config": config.to_json_dict(),
    }
    if not triangles:
        raise ExplanationUnavailable(
            "no open triangles found on either side", diagnostics
        )

    schemas = {
        SIDE_U: dataset.schema_u.attributes,
        SIDE_V: dataset.schema_v.attributes,
    }
    triangle_count = {SIDE_U: 0, SIDE_V: 0}
    flips = {SIDE_U: 0, SIDE_V: 0}
    necessity = {side: {a: 0 for a in schemas[side]} for side in (SIDE_U, SIDE_V)}
    flip_counts: dict[str, Counter] = {SIDE_U: Counter(), SIDE_V: Counter()}
    candidates: list[tuple[str, FlippedNode]] = []
    mfa_sizes: Counter = Counter()
    expected = performed = 0

    for triangle in triangles:
        side = SIDE_U if triangle.side == LEFT else SIDE_V
        triangle_count[side] += 1
        lattice = build_lattice(triangle)
        stats = tag_lattice(lattice, oracle, target, pruning=config.pruning)
        expected += stats.expected
        performed += stats.performed
        mfa_sizes[len(get_lmfa(lattice).masks)] += 1
        for node in get_flipped(lattice):
            flips[side] += 1
            for attr in node.attrs:
                necessity[side][attr] += 1
            if not node.is_supremum:
                flip_counts[side][node.mask] += 1
                candidates.append((side, node))

    total_flips = flips[SIDE_U] + flips[SIDE_V]
    saliency: dict[str, dict[str, float]] = {}
    for side in (SIDE_U, SIDE_V):
        denom = total_flips if config.global_flip_denominator else flips[side]
        saliency[side] = {
            a: (necessity[side][a] / denom if denom else 0.0) for a in schemas[side]
        }

    sufficiency: dict[str, dict[frozenset[str], float]] = {}
    best = None  # (sort key, side, mask, chi)
    for side_index, side in enumerate((SIDE_U, SIDE_V)):
        if triangle_count[side] == 0:
            continue
        full = (1 << len(schemas[side])) - 1
        chi_map: dict[frozenset[str], float] = {}
        for mask in range(1, full):
            chi = flip_counts[side][mask] / triangle_count[side]
            chi_map[frozenset(subset_attrs(schemas[side], mask))] = chi
            key = (-chi, mask.bit_count(), side_index, mask)
            if best is None or key < best[0]:
                best = (key, side, mask, chi)
        sufficiency[side] = chi_map

    if best is not None and best[3] > 0.0:
        _, astar_side, astar_mask, chistar = best
        astar = subset_attrs(schemas[astar_side], astar_mask)
        only_full_schema_flips = False
    else:
        # only full-schema copies flipped: no admissible counterfactual subset
        astar_side, astar_mask, chistar = None, 0, 0.0
        astar = ()
        only_full_schema_flips = True

    qualifying = [
        node
        for side, node in candidates
        if side == astar_side and node.mask == astar_mask
    ]
    verified: list[Counterfactual] = []
    if qualifying:
        scores = oracle.predict_batch([node.pair for node in qualifying])
        for node, score in zip(qualifying, scores):
            if score_label(score) != target.label:
                verified.append(
                    Counterfactual(
                        side=astar_side,
                        changed=node.attrs,
                        record_u=node.pair[0],
                        record_v=node.pair[1],
                        score=score,
                    )
                )
    counterfactuals = verified
    if len(counterfactuals) > config.cf_cap:
        rng = random.Random(f"{config.seed}:cf")
        keep = sorted(rng.sample(range(len(counterfactuals)), config.cf_cap))
        counterfactuals = [counterfactuals[i] for i in keep]

    diagnostics.update(
        {
            "flips": {SIDE_U: flips[SIDE_U], SIDE_V: flips[SIDE_V]},
            "lattices": {
                "count": len(triangles),
                "expected": expected,
                "performed": performed,
                "saved": expected - performed,
            },
            "mfa_set_size_counts": {
                str(k): v for k, v in sorted(mfa_sizes.items())
            },
            "counterfactual_candidates": len(qualifying),
            "counterfactual_verified": len(verified),
            "counterfactual_rejected": len(qualifying) - len(verified),
            "only_full_schema_flips": only_full_schema_flips,
            "oracle_pairs_scored": oracle.scored_pairs - scored_before,
        }
    )

    return Explanation(
        target=target,
        schemas=schemas,
        saliency=saliency,
        sufficiency=sufficiency,
        astar_side=astar_side,
        astar=astar,
        chistar=chistar,
        counterfactuals=counterfactuals,
        counterfactual_total=len(verified),
        diagnostics=diagnostics,
    )
