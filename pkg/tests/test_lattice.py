from __future__ import annotations

import pytest

from helpers import (
    WORKED_EXAMPLE_PATTERNS,
    build_scenario,
    enumerate_monotone_patterns,
)
from triex.classifier import Matcher
from triex.lattice import (
    Provenance,
    Tag,
    TaggingError,
    audit_monotonicity,
    build_lattice,
    get_flipped,
    get_lmfa,
    tag_lattice,
)

N, D, P = 1, 2, 4  # attribute bit positions for the ("N", "D", "P") schema

ONLY_SUPREMUM = {0: False, 1: False, 2: False, 3: False, 4: False, 5: False, 6: False, 7: True}

# non-monotone: {N} flips but {N,D} does not
ADVERSARIAL = {0: False, 1: True, 2: False, 3: False, 4: False, 5: True, 6: False, 7: True}

ATTRS_BY_L = {2: ("N", "D"), 3: ("N", "D", "P"), 4: ("N", "D", "P", "Q")}


def tagged_scenario(pattern, attrs=("N", "D", "P"), pruning=True):
    scenario = build_scenario([pattern], attrs_u=attrs)
    triangle = scenario.left_triangles()[0]
    lattice = build_lattice(triangle)
    stats = tag_lattice(lattice, scenario.matcher, scenario.target, pruning=pruning)
    return lattice, stats, scenario


class TestBuild:
    @pytest.mark.parametrize(
        "attrs,nodes,untagged",
        [
            (("N", "D", "P"), 8, 6),
            (("N", "D"), 4, 2),
            (tuple(f"a{i}" for i in range(8)), 256, 254),
        ],
    )
    def test_node_and_axiomatic_counts(self, attrs, nodes, untagged):
        scenario = build_scenario(
            [{0: False, (1 << len(attrs)) - 1: True}], attrs_u=attrs
        )
        lattice = build_lattice(scenario.left_triangles()[0])
        assert len(lattice.tags) == nodes
        assert lattice.untagged_count() == untagged
        assert lattice.tags[0] is Tag.NON_FLIP
        assert lattice.provenance[0] is Provenance.AXIOMATIC
        assert lattice.tags[lattice.full] is Tag.FLIP
        assert lattice.provenance[lattice.full] is Provenance.AXIOMATIC


class TestTagging:
    def test_singleton_flips_are_propagated(self):
        # first worked lattice: N and D flip alone, P does not
        lattice, stats, _ = tagged_scenario(WORKED_EXAMPLE_PATTERNS[0])
        assert stats.performed == 3
        assert stats.expected == 6
        for m in (N | D, N | P, D | P, N | D | P):
            assert lattice.tags[m] is Tag.FLIP
        assert lattice.provenance[N | D] is Provenance.INFERRED
        assert lattice.provenance[N | P] is Provenance.INFERRED
        assert lattice.provenance[D | P] is Provenance.INFERRED
        assert lattice.untagged_count() == 0

    def test_no_singleton_flips_forces_full_level(self):
        lattice, stats, _ = tagged_scenario(WORKED_EXAMPLE_PATTERNS[3])
        assert stats.performed == 6 == stats.expected
        assert stats.saved == 0

    def test_exhaustive_mode_scores_every_non_axiomatic_node(self):
        for pattern in WORKED_EXAMPLE_PATTERNS:
            _, stats, _ = tagged_scenario(pattern, pruning=False)
            assert stats.performed == stats.expected == 6

    def test_tag_accounting_identity(self):
        for pattern in WORKED_EXAMPLE_PATTERNS:
            lattice, stats, _ = tagged_scenario(pattern)
            axiomatic = sum(1 for p in lattice.provenance if p is Provenance.AXIOMATIC)
            inferred = sum(1 for p in lattice.provenance if p is Provenance.INFERRED)
            assert stats.performed + axiomatic + inferred == 2**lattice.size

    def test_upward_closure_holds_even_for_adversarial_oracle(self):
        lattice, _, _ = tagged_scenario(ADVERSARIAL)
        for m in range(lattice.full + 1):
            if lattice.tags[m] is Tag.FLIP:
                rest = lattice.full & ~m
                s = rest
                while s:
                    assert lattice.tags[m | s] is Tag.FLIP
                    s = (s - 1) & rest

    def test_oracle_failure_carries_partial_stats(self):
        scenario = build_scenario([WORKED_EXAMPLE_PATTERNS[3]])

        class FailingMatcher(Matcher):
            def __init__(self, inner, allowed_calls):
                self.inner = inner
                self.allowed_calls = allowed_calls

            def predict_batch(self, pairs):
                if self.allowed_calls <= 0:
                    raise RuntimeError("oracle down")
                self.allowed_calls -= 1
                return self.inner.predict_batch(pairs)

        lattice = build_lattice(scenario.left_triangles()[0])
        failing = FailingMatcher(scenario.matcher, allowed_calls=1)
        with pytest.raises(TaggingError) as info:
            tag_lattice(lattice, failing, scenario.target)
        assert info.value.stats.performed == 3  # level 1 completed


class TestMonotoneEquivalence:
    @pytest.mark.parametrize("l", [2, 3, 4])
    def test_pruned_equals_exhaustive_for_every_monotone_function(self, l):
        attrs = ATTRS_BY_L[l]
        patterns = enumerate_monotone_patterns(l)
        assert patterns  # the enumeration itself found functions
        for pattern in patterns:
            scenario = build_scenario([pattern], attrs_u=attrs)
            triangle = scenario.left_triangles()[0]
            pruned = build_lattice(triangle)
            stats_p = tag_lattice(pruned, scenario.matcher, scenario.target, pruning=True)
            exhaustive = build_lattice(triangle)
            stats_e = tag_lattice(
                exhaustive, scenario.matcher, scenario.target, pruning=False
            )
            assert pruned.tags == exhaustive.tags
            assert stats_p.performed <= stats_e.performed
            report = audit_monotonicity(
                scenario.matcher, scenario.target, [triangle]
            )
            assert report.rows[0].error_rate == 0.0

    @pytest.mark.parametrize("l", [2, 3, 4])
    def test_monotone_function_counts(self, l):
        # Dedekind numbers minus the two constant functions
        expected = {2: 4, 3: 18, 4: 166}[l]
        assert len(enumerate_monotone_patterns(l)) == expected


class TestLmfa:
    def test_first_worked_lattice(self):
        lattice, _, _ = tagged_scenario(WORKED_EXAMPLE_PATTERNS[0])
        assert set(get_lmfa(lattice).sets) == {frozenset({"N"}), frozenset({"D"})}

    def test_second_worked_lattice(self):
        lattice, _, _ = tagged_scenario(WORKED_EXAMPLE_PATTERNS[1])
        assert set(get_lmfa(lattice).sets) == {
            frozenset({"N"}),
            frozenset({"D", "P"}),
        }

    def test_only_supremum(self):
        lattice, _, _ = tagged_scenario(ONLY_SUPREMUM)
        assert set(get_lmfa(lattice).sets) == {frozenset({"N", "D", "P"})}

    def test_antichain_properties(self):
        for pattern in WORKED_EXAMPLE_PATTERNS:
            lattice, _, _ = tagged_scenario(pattern)
            antichain = get_lmfa(lattice)
            flips = set(lattice.flip_masks())
            for m in antichain.masks:
                assert lattice.tags[m] is Tag.FLIP
            for a in antichain.masks:
                for b in antichain.masks:
                    if a != b:
                        assert a & b != a and a & b != b  # incomparable
            # no flip-tagged node is a strict subset of any member
            for m in flips:
                for member in antichain.masks:
                    assert not (m != member and m & member == m)


class TestGetFlipped:
    def test_worked_lattices_total_19_flips(self):
        total = 0
        for pattern in WORKED_EXAMPLE_PATTERNS:
            lattice, _, _ = tagged_scenario(pattern)
            total += len(get_flipped(lattice))
        assert total == 19

    def test_third_worked_lattice_nodes(self):
        lattice, _, _ = tagged_scenario(WORKED_EXAMPLE_PATTERNS[2])
        flipped = get_flipped(lattice)
        assert [set(node.attrs) for node in flipped] == [
            {"N"},
            {"N", "D"},
            {"N", "P"},
            {"N", "D", "P"},
        ]

    def test_only_supremum_marked_non_candidate(self):
        lattice, _, _ = tagged_scenario(ONLY_SUPREMUM)
        flipped = get_flipped(lattice)
        assert len(flipped) == 1
        assert flipped[0].is_supremum
        assert flipped[0].provenance is Provenance.AXIOMATIC

    def test_pairs_are_materialized(self):
        lattice, _, scenario = tagged_scenario(WORKED_EXAMPLE_PATTERNS[0])
        support = scenario.left_supports[0]
        for node in flipped_nodes(lattice):
            perturbed, pivot = node.pair
            assert pivot is scenario.target.record_v
            for attr in perturbed.values:
                expected = (
                    support.values[attr]
                    if attr in node.attrs
                    else scenario.target.record_u.values[attr]
                )
                assert perturbed.values[attr] == expected


def flipped_nodes(lattice):
    return get_flipped(lattice)


class TestAudit:
    def test_monotone_oracle_error_rate_zero(self):
        scenario = build_scenario(list(WORKED_EXAMPLE_PATTERNS))
        report = audit_monotonicity(
            scenario.matcher, scenario.target, scenario.left_triangles()
        )
        assert len(report.rows) == 4
        assert all(row.error_rate == 0.0 for row in report.rows)
        summary = report.to_json_dict()
        assert summary["average"]["expected"] == 6.0
        assert summary["average"]["errorRate"] == 0.0

    def test_adversarial_oracle_reports_positive_error_rate(self):
        scenario = build_scenario([ADVERSARIAL])
        report = audit_monotonicity(
            scenario.matcher, scenario.target, scenario.left_triangles()
        )
        row = report.rows[0]
        assert row.error_rate > 0.0
        assert row.saved == 2  # {N,D} and {N,P} were inferred
        assert row.error_rate == pytest.approx(0.5)
