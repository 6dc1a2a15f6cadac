"""Attribute-subset lattices over one open triangle.

Each subset A of the free record's attributes is a node; the node's tag says
whether copying A from the support record flips the target prediction. The
empty set can never flip (the perturbation is the identity) and the full set
always flips (the perturbed record is attribute-equal to the support, whose
pair carries the opposite label by triangle construction), so both are tagged
axiomatically and the remaining 2^l - 2 nodes are resolved by a bottom-up
breadth-first visit. Under the monotone-classifier assumption a computed flip
is propagated upward to every superset, saving oracle calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .classifier import Matcher, Pair, Prediction, score_label
from .perturbation import psi
from .triangles import OpenTriangle

MAX_ATTRIBUTES = 30


class Tag(Enum):
    UNTAGGED = "untagged"
    FLIP = "flip"
    NON_FLIP = "non-flip"


class Provenance(Enum):
    AXIOMATIC = "axiomatic"
    COMPUTED = "computed"
    INFERRED = "inferred"


@dataclass(frozen=True)
class PredictionStats:
    """Oracle-call accounting for tagging one lattice."""

    attributes: int
    expected: int
    performed: int

    @property
    def saved(self) -> int:
        return self.expected - self.performed

    def to_json_dict(self) -> dict:
        return {
            "attributes": self.attributes,
            "expected": self.expected,
            "performed": self.performed,
            "saved": self.saved,
        }


class TaggingError(Exception):
    """Oracle failure mid-tagging; carries the stats accumulated so far."""

    def __init__(self, message: str, stats: PredictionStats) -> None:
        super().__init__(message)
        self.stats = stats


class AttributeLattice:
    """Powerset of the free record's attributes, nodes addressed by bitmask."""

    def __init__(self, triangle: OpenTriangle) -> None:
        attributes = triangle.free.attributes
        l = len(attributes)
        if l > MAX_ATTRIBUTES:
            raise ValueError(f"{l} attributes exceed the bitmask limit of {MAX_ATTRIBUTES}")
        self.triangle = triangle
        self.attributes = attributes
        self.size = l
        self.full = (1 << l) - 1
        self.tags: list[Tag] = [Tag.UNTAGGED] * (self.full + 1)
        self.provenance: list[Provenance | None] = [None] * (self.full + 1)
        self.tags[0] = Tag.NON_FLIP
        self.provenance[0] = Provenance.AXIOMATIC
        self.tags[self.full] = Tag.FLIP
        self.provenance[self.full] = Provenance.AXIOMATIC
        self._levels: list[list[int]] = [[] for _ in range(l + 1)]
        for m in range(self.full + 1):
            self._levels[m.bit_count()].append(m)
        self._pairs: dict[int, Pair] = {}

    def attrs_of(self, mask: int) -> tuple[str, ...]:
        return tuple(a for i, a in enumerate(self.attributes) if mask >> i & 1)

    def level(self, k: int) -> list[int]:
        return self._levels[k]

    def canonical_masks(self) -> list[int]:
        """All masks ordered by (subset size, mask value): the tie-break order."""
        return [m for level in self._levels for m in level]

    def pair_of(self, mask: int) -> Pair:
        """Perturbed pair for a node, materialized lazily."""
        if mask not in self._pairs:
            perturbed = psi(
                self.triangle.free, self.triangle.support, set(self.attrs_of(mask))
            ).result
            self._pairs[mask] = self.triangle.pair_for(perturbed)
        return self._pairs[mask]

    def flip_masks(self) -> list[int]:
        return [m for m in self.canonical_masks() if self.tags[m] is Tag.FLIP]

    def untagged_count(self) -> int:
        return sum(1 for t in self.tags if t is Tag.UNTAGGED)


def build_lattice(triangle: OpenTriangle) -> AttributeLattice:
    """Fresh lattice with only the two axiomatic tags set."""
    return AttributeLattice(triangle)


def _propagate_flip(lattice: AttributeLattice, mask: int) -> None:
    # visit every strict superset by enumerating submasks of the complement
    rest = lattice.full & ~mask
    s = rest
    while s:
        sup = mask | s
        if lattice.tags[sup] is Tag.UNTAGGED:
            lattice.tags[sup] = Tag.FLIP
            lattice.provenance[sup] = Provenance.INFERRED
        s = (s - 1) & rest


def tag_lattice(
    lattice: AttributeLattice,
    matcher: Matcher,
    target: Prediction,
    pruning: bool = True,
) -> PredictionStats:
    """Resolve every node tag, scoring level by level from the bottom.

    All untagged nodes of one level form a single oracle batch. With pruning
    on, each computed flip is immediately propagated to its strict supersets
    as inferred flips (the levels above are never scored for those nodes);
    computed non-flips are never propagated. With pruning off every
    non-axiomatic node is scored, which is the audit baseline.
    """
    y = target.label
    expected = 2**lattice.size - 2
    performed = 0
    for k in range(1, lattice.size):
        nodes = [m for m in lattice.level(k) if lattice.tags[m] is Tag.UNTAGGED]
        if not nodes:
            continue
        pairs = [lattice.pair_of(m) for m in nodes]
        try:
            scores = matcher.predict_batch(pairs)
        except Exception as exc:
            stats = PredictionStats(lattice.size, expected, performed)
            raise TaggingError(f"oracle failed at level {k}: {exc}", stats) from exc
        performed += len(nodes)
        flipped: list[int] = []
        for m, score in zip(nodes, scores):
            if score_label(score) != y:
                lattice.tags[m] = Tag.FLIP
                lattice.provenance[m] = Provenance.COMPUTED
                flipped.append(m)
            else:
                lattice.tags[m] = Tag.NON_FLIP
                lattice.provenance[m] = Provenance.COMPUTED
        if pruning:
            for m in flipped:
                _propagate_flip(lattice, m)
    return PredictionStats(lattice.size, expected, performed)


@dataclass(frozen=True)
class FlippingAntichain:
    """Pairwise inclusion-incomparable flip-tagged subsets."""

    attributes: tuple[str, ...]
    masks: tuple[int, ...]

    @property
    def sets(self) -> tuple[frozenset[str], ...]:
        return tuple(
            frozenset(a for i, a in enumerate(self.attributes) if m >> i & 1)
            for m in self.masks
        )


def get_lmfa(lattice: AttributeLattice) -> FlippingAntichain:
    """Largest minimal flipping antichain: inclusion-minimal flip nodes.

    With upward-closed tags this antichain is unique and every other flipping
    antichain only contains supersets of its members. Minimality is checked
    against all proper subsets, so the result is correct even for tags
    produced by an exhaustive run over a non-monotone oracle.
    """
    flips = set(lattice.flip_masks())
    minimal: list[int] = []
    for m in sorted(flips, key=lambda m: (m.bit_count(), m)):
        s = (m - 1) & m
        while s:
            if s in flips:
                break
            s = (s - 1) & m
        else:
            minimal.append(m)
    return FlippingAntichain(attributes=lattice.attributes, masks=tuple(minimal))


@dataclass(frozen=True)
class FlippedNode:
    """One flip-tagged node with its materialized perturbed pair.

    The supremum is part of the enumeration (it counts as a flip) but is
    marked so it can be excluded from counterfactual candidacy: changing the
    whole schema is not an admissible counterfactual.
    """

    mask: int
    attrs: tuple[str, ...]
    pair: Pair
    provenance: Provenance
    is_supremum: bool


def get_flipped(lattice: AttributeLattice) -> list[FlippedNode]:
    """Every flip-tagged node (computed, inferred, axiomatic) in canonical order."""
    nodes = []
    for m in lattice.flip_masks():
        nodes.append(
            FlippedNode(
                mask=m,
                attrs=lattice.attrs_of(m),
                pair=lattice.pair_of(m),
                provenance=lattice.provenance[m],
                is_supremum=m == lattice.full,
            )
        )
    return nodes


@dataclass(frozen=True)
class AuditRow:
    attributes: int
    expected: int
    performed: int
    saved: int
    error_rate: float

    def to_json_dict(self) -> dict:
        return {
            "attributes": self.attributes,
            "expected": self.expected,
            "performed": self.performed,
            "saved": self.saved,
            "errorRate": self.error_rate,
        }


@dataclass
class AuditReport:
    """Per-lattice and averaged savings/error accounting for the pruning mode."""

    rows: list[AuditRow]

    def _mean(self, getter) -> float:
        if not self.rows:
            return 0.0
        return sum(getter(r) for r in self.rows) / len(self.rows)

    def to_json_dict(self) -> dict:
        return {
            "lattices": len(self.rows),
            "average": {
                "attributes": self._mean(lambda r: r.attributes),
                "expected": self._mean(lambda r: r.expected),
                "performed": self._mean(lambda r: r.performed),
                "saved": self._mean(lambda r: r.saved),
                "errorRate": self._mean(lambda r: r.error_rate),
            },
            "perLattice": [row.to_json_dict() for row in self.rows],
        }


def audit_monotonicity(
    matcher: Matcher, target: Prediction, triangles: list[OpenTriangle]
) -> AuditReport:
    """Tag every triangle's lattice with and without pruning and compare.

    The error rate of one lattice is the fraction of inferred tags whose
    exhaustively computed tag disagrees, out of the predictions the pruning
    saved. The pruned tags stay upward-closed by construction even when the
    oracle is not monotone.
    """
    rows: list[AuditRow] = []
    for triangle in triangles:
        pruned = build_lattice(triangle)
        stats = tag_lattice(pruned, matcher, target, pruning=True)
        exhaustive = build_lattice(triangle)
        tag_lattice(exhaustive, matcher, target, pruning=False)
        mistakes = sum(
            1
            for m in range(pruned.full + 1)
            if pruned.provenance[m] is Provenance.INFERRED
            and exhaustive.tags[m] is not pruned.tags[m]
        )
        error_rate = mistakes / stats.saved if stats.saved else 0.0
        rows.append(
            AuditRow(
                attributes=stats.attributes,
                expected=stats.expected,
                performed=stats.performed,
                saved=stats.saved,
                error_rate=error_rate,
            )
        )
    return AuditReport(rows=rows)
