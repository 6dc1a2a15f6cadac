"""Open-triangle acquisition for a target prediction.

A left open triangle keeps the V-side record fixed (pivot) and picks a U-side
support record whose pair with the pivot is predicted with the opposite label
of the target prediction; right triangles are symmetric. Supports are found by
scoring table records in a seeded-shuffled order, falling back to token-drop
augmentation when a side runs short.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .classifier import Matcher, Pair, Prediction, score_label
from .dataset import Dataset, Record, SIDE_U, SIDE_V
from .perturbation import augment

DEFAULT_TAU = 100
LEFT = "left"
RIGHT = "right"

DEFAULT_BATCH_SIZE = 64
AUGMENT_PER_RECORD = 20
AUGMENT_BUDGET_FACTOR = 10


@dataclass(frozen=True)
class OpenTriangle:
    """(free, pivot, support) with the support pair predicted as the flip label."""

    free: Record
    pivot: Record
    support: Record
    side: str
    support_score: float

    def pair_for(self, perturbed: Record) -> Pair:
        """Orient a perturbed copy of the free record into a (U, V) pair."""
        if self.side == LEFT:
            return (perturbed, self.pivot)
        return (self.pivot, perturbed)

    @property
    def support_pair(self) -> Pair:
        return self.pair_for(self.support)


@dataclass
class SideReport:
    side: str
    requested: int
    found: int = 0
    from_augmentation: int = 0
    table_candidates_scored: int = 0
    augmented_candidates_scored: int = 0

    @property
    def shortfall(self) -> int:
        return self.requested - self.found

    def to_json_dict(self) -> dict:
        return {
            "requested": self.requested,
            "found": self.found,
            "from_augmentation": self.from_augmentation,
            "shortfall": self.shortfall,
            "table_candidates_scored": self.table_candidates_scored,
            "augmented_candidates_scored": self.augmented_candidates_scored,
        }


@dataclass
class TriangleReport:
    left: SideReport
    right: SideReport

    @property
    def total_found(self) -> int:
        return self.left.found + self.right.found

    def to_json_dict(self) -> dict:
        return {"left": self.left.to_json_dict(), "right": self.right.to_json_dict()}


def _chunks(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _collect_side(
    matcher: Matcher,
    target: Prediction,
    dataset: Dataset,
    side: str,
    want: int,
    allow_augment: bool,
    seed: int,
    batch_size: int,
) -> tuple[list[OpenTriangle], SideReport]:
    y = target.label
    if side == LEFT:
        free, pivot = target.record_u, target.record_v
        table = dataset.table(SIDE_U)
    else:
        free, pivot = target.record_v, target.record_u
        table = dataset.table(SIDE_V)

    def pair_of(candidate: Record) -> Pair:
        return (candidate, pivot) if side == LEFT else (pivot, candidate)

    report = SideReport(side=side, requested=want)
    triangles: list[OpenTriangle] = []

    pool = [r for r in table.values() if r.id != free.id and not r.same_values(free)]
    random.Random(f"{seed}:{side}").shuffle(pool)
    for batch in _chunks(pool, batch_size):
        scores = matcher.predict_batch([pair_of(c) for c in batch])
        report.table_candidates_scored += len(batch)
        for candidate, score in zip(batch, scores):
            if score_label(score) != y:
                triangles.append(
                    OpenTriangle(
                        free=free,
                        pivot=pivot,
                        support=candidate,
                        side=side,
                        support_score=score,
                    )
                )
                if len(triangles) == want:
                    break
        if len(triangles) == want:
            break

    if len(triangles) < want and allow_augment:
        budget = AUGMENT_BUDGET_FACTOR * (want - len(triangles))
        bases = list(table.values())
        random.Random(f"{seed}:{side}:aug").shuffle(bases)
        for base in bases:
            if len(triangles) == want or budget <= 0:
                break
            variants = [
                v
                for v in augment(base, cap=AUGMENT_PER_RECORD)
                if not v.same_values(free)
            ][:budget]
            for batch in _chunks(variants, batch_size):
                scores = matcher.predict_batch([pair_of(c) for c in batch])
                report.augmented_candidates_scored += len(batch)
                budget -= len(batch)
                for candidate, score in zip(batch, scores):
                    if score_label(score) != y:
                        triangles.append(
                            OpenTriangle(
                                free=free,
                                pivot=pivot,
                                support=candidate,
                                side=side,
                                support_score=score,
                            )
                        )
                        report.from_augmentation += 1
                        if len(triangles) == want:
                            break
                if len(triangles) == want:
                    break

    report.found = len(triangles)
    return triangles, report


def get_triangles(
    matcher: Matcher,
    target: Prediction,
    dataset: Dataset,
    tau: int = DEFAULT_TAU,
    allow_augment: bool = True,
    seed: int = 0,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> tuple[list[OpenTriangle], TriangleReport]:
    """Collect up to tau/2 left plus tau/2 right open triangles.

    Never fatal on shortage: whatever was found comes back together with a
    per-side report of requested/found/augmentation counts.
    """
    if tau < 2 or tau % 2 != 0:
        raise ValueError(f"tau must be even and >= 2, got {tau}")
    for record, schema in (
        (target.record_u, dataset.schema(SIDE_U)),
        (target.record_v, dataset.schema(SIDE_V)),
    ):
        if record.attributes != schema.attributes:
            raise ValueError(
                f"target record {record.id!r} does not follow the side "
                f"{schema.side} schema"
            )
    left, left_report = _collect_side(
        matcher, target, dataset, LEFT, tau // 2, allow_augment, seed, batch_size
    )
    right, right_report = _collect_side(
        matcher, target, dataset, RIGHT, tau // 2, allow_augment, seed, batch_size
    )
    return left + right, TriangleReport(left=left_report, right=right_report)
