"""Built-in pair scorers.

A scorer is any callable taking two attribute mappings (left record, right
record) and returning a score in [0, 1]. Attribute order in the mappings is
the schema order of the sending engine.
"""

from __future__ import annotations


def token_jaccard_score(left: dict[str, str], right: dict[str, str]) -> float:
    """Mean token-set Jaccard over positionally aligned attributes.

    Attribute i of the left record is compared with attribute i of the right
    record up to the shorter schema. Pairs empty on both sides are skipped
    unless every aligned pair is empty, in which case the score is 0.
    """
    left_values = list(left.values())
    right_values = list(right.values())
    n = min(len(left_values), len(right_values))
    if n == 0:
        raise ValueError("records share no aligned attributes")
    similarities = []
    for i in range(n):
        tokens_l = set(left_values[i].split())
        tokens_r = set(right_values[i].split())
        union = tokens_l | tokens_r
        if not union:
            continue
        similarities.append(len(tokens_l & tokens_r) / len(union))
    if not similarities:
        return 0.0
    score = sum(similarities) / len(similarities)
    return min(1.0, max(0.0, score))


def constant_nine(left: dict[str, str], right: dict[str, str]) -> float:
    """Fixed 0.9 for every pair; handy for smoke-testing a deployment."""
    return 0.9
