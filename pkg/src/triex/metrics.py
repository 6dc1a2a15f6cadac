"""Quantitative evaluation of explanations.

Saliency is judged by faithfulness (area under the F1-vs-masking-fraction
curve; lower means the salient attributes really drive the model) and by
confidence indication (how well a logistic-link regressor recovers the model
score from the saliency vector). Counterfactual sets are judged by proximity,
sparsity and diversity, all oriented so that higher is better.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .classifier import Matcher, Pair, Prediction, mask, score_label
from .dataset import Dataset, SIDE_U, SIDE_V, tokenize
from .explainer import ExplainConfig, Explanation, ExplanationUnavailable, display_name, explain

FAITHFULNESS_THRESHOLDS = (0.1, 0.2, 0.33, 0.5, 0.7, 0.9)

REGRESSOR_EPOCHS = 500
REGRESSOR_STEP = 0.1


class MetricError(Exception):
    """A metric's preconditions are not met for the given evaluation set."""


def f1_score(truth: list[bool], predicted: list[bool]) -> float:
    if not any(truth):
        raise MetricError(
            "split has no positive pairs, F1 is undefined; evaluate a different split"
        )
    tp = sum(1 for t, p in zip(truth, predicted) if t and p)
    fp = sum(1 for t, p in zip(truth, predicted) if not t and p)
    fn = sum(1 for t, p in zip(truth, predicted) if t and not p)
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def ranked_attributes(
    saliency: dict[str, dict[str, float]], schemas: dict[str, tuple[str, ...]]
) -> list[tuple[str, str]]:
    """(side, attr) pairs by descending saliency; ties resolve in schema order."""
    entries = []
    for side_index, side in enumerate((SIDE_U, SIDE_V)):
        for attr_index, attr in enumerate(schemas[side]):
            entries.append((-saliency[side][attr], side_index, attr_index, side, attr))
    entries.sort()
    return [(side, attr) for *_, side, attr in entries]


def _masked_pair(pair: Pair, top: list[tuple[str, str]]) -> Pair:
    u_attrs = {a for side, a in top if side == SIDE_U}
    v_attrs = {a for side, a in top if side == SIDE_V}
    u, v = pair
    return (mask(u, u_attrs) if u_attrs else u, mask(v, v_attrs) if v_attrs else v)


@dataclass(frozen=True)
class FaithfulnessResult:
    auc: float
    thresholds: tuple[float, ...]
    f1_curve: tuple[float, ...]  # F1 at t=0 then at each threshold

    def to_json_dict(self) -> dict:
        return {
            "auc": self.auc,
            "thresholds": [0.0, *self.thresholds],
            "f1": list(self.f1_curve),
        }


def faithfulness(
    matcher: Matcher,
    pairs: list[Pair],
    truth: list[bool],
    saliencies: list[dict[str, dict[str, float]]],
    schemas: dict[str, tuple[str, ...]],
    thresholds: tuple[float, ...] = FAITHFULNESS_THRESHOLDS,
) -> FaithfulnessResult:
    """Mask the top-saliency attributes at increasing fractions and track F1.

    At threshold t the ceil(t * (h + k)) most salient attributes of both
    records are masked before re-scoring. Lower AUC means higher faithfulness.
    """
    total_attrs = len(schemas[SIDE_U]) + len(schemas[SIDE_V])
    base_scores = matcher.predict_batch(pairs)
    curve = [f1_score(truth, [score_label(s) for s in base_scores])]
    rankings = [ranked_attributes(sal, schemas) for sal in saliencies]
    for t in thresholds:
        count = math.ceil(t * total_attrs)
        masked = [
            _masked_pair(pair, ranking[:count])
            for pair, ranking in zip(pairs, rankings)
        ]
        scores = matcher.predict_batch(masked)
        curve.append(f1_score(truth, [score_label(s) for s in scores]))
    auc = float(np.trapezoid(curve, x=[0.0, *thresholds]))
    return FaithfulnessResult(
        auc=auc, thresholds=tuple(thresholds), f1_curve=tuple(curve)
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class ConfidenceResult:
    mae: float
    weights: tuple[float, ...]
    bias: float

    def to_json_dict(self) -> dict:
        return {"mae": self.mae}


def confidence_indication(
    saliencies: list[dict[str, dict[str, float]]],
    labels: list[bool],
    scores: list[float],
    schemas: dict[str, tuple[str, ...]],
) -> ConfidenceResult:
    """MAE of a logistic-link regressor predicting the model score.

    Features are the per-attribute saliency vector plus the predicted label;
    training is fixed (500 full-batch epochs, step 0.1, zero init) so the
    metric is deterministic. Lower MAE means the saliency scores are a better
    proxy of the model's confidence.
    """
    if len(saliencies) < 10:
        raise MetricError(
            f"confidence indication needs at least 10 explained predictions, got {len(saliencies)}"
        )
    features = []
    for sal, label in zip(saliencies, labels):
        row = [sal[SIDE_U][a] for a in schemas[SIDE_U]]
        row += [sal[SIDE_V][a] for a in schemas[SIDE_V]]
        row.append(1.0 if label else 0.0)
        features.append(row)
    x = np.asarray(features, dtype=float)
    s = np.asarray(scores, dtype=float)
    n, d = x.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(REGRESSOR_EPOCHS):
        p = _sigmoid(x @ w + b)
        grad_z = 2.0 * (p - s) * p * (1.0 - p) / n
        w -= REGRESSOR_STEP * (x.T @ grad_z)
        b -= REGRESSOR_STEP * float(grad_z.sum())
    fitted = _sigmoid(x @ w + b)
    mae = float(np.mean(np.abs(fitted - s)))
    return ConfidenceResult(mae=mae, weights=tuple(w.tolist()), bias=b)


def attribute_distance(a: str, b: str) -> float:
    """Token-Jaccard distance; zero when both values are empty."""
    ta, tb = set(tokenize(a)), set(tokenize(b))
    union = ta | tb
    if not union:
        return 0.0
    return 1.0 - len(ta & tb) / len(union)


def _pair_distance(left: Pair, right: Pair) -> float:
    """Mean attribute-wise distance over both records of two pairs."""
    distances = []
    for rec_a, rec_b in ((left[0], right[0]), (left[1], right[1])):
        for attr, value in rec_a.values.items():
            distances.append(attribute_distance(value, rec_b.values[attr]))
    return sum(distances) / len(distances)


def _changed_attributes(original: Pair, candidate: Pair) -> int:
    changed = 0
    for rec_a, rec_b in ((original[0], candidate[0]), (original[1], candidate[1])):
        changed += sum(1 for a, v in rec_a.values.items() if rec_b.values[a] != v)
    return changed


@dataclass(frozen=True)
class CfQuality:
    proximity: float | None
    sparsity: float | None
    diversity: float | None

    def to_json_dict(self) -> dict:
        return {
            "proximity": self.proximity,
            "sparsity": self.sparsity,
            "diversity": self.diversity,
        }


def cf_quality(original: Pair, counterfactual_pairs: list[Pair]) -> CfQuality:
    """Proximity, sparsity and diversity of a counterfactual set.

    All three are in [0, 1] with higher better; an empty set leaves all three
    absent and a singleton set leaves diversity absent (no pairs to compare).
    """
    if not counterfactual_pairs:
        return CfQuality(proximity=None, sparsity=None, diversity=None)
    total_attrs = len(original[0].values) + len(original[1].values)
    proximity = 1.0 - sum(
        _pair_distance(original, cf) for cf in counterfactual_pairs
    ) / len(counterfactual_pairs)
    sparsity = 1.0 - sum(
        _changed_attributes(original, cf) / total_attrs for cf in counterfactual_pairs
    ) / len(counterfactual_pairs)
    if len(counterfactual_pairs) < 2:
        diversity = None
    else:
        pair_distances = [
            _pair_distance(a, b)
            for a, b in itertools.combinations(counterfactual_pairs, 2)
        ]
        diversity = sum(pair_distances) / len(pair_distances)
    return CfQuality(proximity=proximity, sparsity=sparsity, diversity=diversity)


@dataclass(frozen=True)
class MaskingResult:
    """Per-attribute isolated masking effect plus top-k combined effects."""

    actual: dict[str, float]  # display-name keyed
    aggr: dict[int, float]

    def to_json_dict(self) -> dict:
        return {
            "actual": self.actual,
            "aggr": {str(k): v for k, v in sorted(self.aggr.items())},
        }


def masking_effect(
    matcher: Matcher,
    target: Prediction,
    saliency: dict[str, dict[str, float]],
    schemas: dict[str, tuple[str, ...]],
    ks: list[int],
) -> MaskingResult:
    """Score deltas from masking each attribute alone and the top-k together."""
    singles = [
        (side, attr) for side in (SIDE_U, SIDE_V) for attr in schemas[side]
    ]
    pairs = [_masked_pair(target.pair, [entry]) for entry in singles]
    ranking = ranked_attributes(saliency, schemas)
    pairs += [_masked_pair(target.pair, ranking[:k]) for k in ks]
    scores = matcher.predict_batch(pairs)
    actual = {
        display_name(side, attr): abs(target.score - score)
        for (side, attr), score in zip(singles, scores[: len(singles)])
    }
    aggr = {
        k: abs(target.score - score)
        for k, score in zip(ks, scores[len(singles) :])
    }
    return MaskingResult(actual=actual, aggr=aggr)


@dataclass
class PredictionRow:
    id_u: str
    id_v: str
    truth: bool
    score: float
    label: bool
    astar: list[str]
    chistar: float
    counterfactuals: int
    proximity: float | None
    sparsity: float | None
    diversity: float | None
    triangles_found: int
    top_saliency: list[str]

    def to_json_dict(self) -> dict:
        return {
            "id_u": self.id_u,
            "id_v": self.id_v,
            "truth": "match" if self.truth else "non-match",
            "score": self.score,
            "label": "match" if self.label else "non-match",
            "astar": self.astar,
            "chistar": self.chistar,
            "counterfactuals": self.counterfactuals,
            "proximity": self.proximity,
            "sparsity": self.sparsity,
            "diversity": self.diversity,
            "triangles_found": self.triangles_found,
            "top_saliency": self.top_saliency,
        }


@dataclass
class EvaluationReport:
    split: str
    faithfulness: FaithfulnessResult | None
    confidence_mae: float | None
    proximity: float | None
    sparsity: float | None
    diversity: float | None
    avg_counterfactuals: float
    rows: list[PredictionRow]
    skipped: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "split": self.split,
            "predictions": len(self.rows),
            "faithfulness_auc": self.faithfulness.auc if self.faithfulness else None,
            "faithfulness_curve": self.faithfulness.to_json_dict()
            if self.faithfulness
            else None,
            "confidence_mae": self.confidence_mae,
            "proximity": self.proximity,
            "sparsity": self.sparsity,
            "diversity": self.diversity,
            "avg_counterfactuals": self.avg_counterfactuals,
            "skipped": self.skipped,
            "config": self.config,
            "rows": [row.to_json_dict() for row in self.rows],
        }


def _mean_defined(values: list[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return sum(defined) / len(defined)


def evaluate_split(
    matcher: Matcher,
    dataset: Dataset,
    split: str,
    config: ExplainConfig | None = None,
) -> EvaluationReport:
    """Explain every pair of a split and aggregate all evaluation metrics."""
    config = config or ExplainConfig()
    if split not in dataset.splits:
        raise MetricError(f"dataset has no split named {split!r}")
    labeled = dataset.splits[split]
    rows: list[PredictionRow] = []
    skipped: list[dict] = []
    explained: list[Explanation] = []
    explained_pairs: list[Pair] = []
    explained_truth: list[bool] = []
    for pair in labeled:
        record_u, record_v = dataset.pair_records(pair)
        target = matcher.predict(record_u, record_v)
        try:
            explanation = explain(matcher, target, dataset, config)
        except ExplanationUnavailable as exc:
            skipped.append(
                {
                    "id_u": pair.id_u,
                    "id_v": pair.id_v,
                    "reason": str(exc),
                    "triangles": exc.diagnostics.get("triangles"),
                }
            )
            continue
        explained.append(explanation)
        explained_pairs.append(target.pair)
        explained_truth.append(pair.label)
        quality = cf_quality(
            target.pair,
            [(cf.record_u, cf.record_v) for cf in explanation.counterfactuals],
        )
        astar = (
            [display_name(explanation.astar_side, a) for a in explanation.astar]
            if explanation.astar_side
            else []
        )
        ranking = ranked_attributes(explanation.saliency, explanation.schemas)
        rows.append(
            PredictionRow(
                id_u=pair.id_u,
                id_v=pair.id_v,
                truth=pair.label,
                score=target.score,
                label=target.label,
                astar=astar,
                chistar=explanation.chistar,
                counterfactuals=explanation.counterfactual_total,
                proximity=quality.proximity,
                sparsity=quality.sparsity,
                diversity=quality.diversity,
                triangles_found=explanation.diagnostics["triangles"]["left"]["found"]
                + explanation.diagnostics["triangles"]["right"]["found"],
                top_saliency=[display_name(s, a) for s, a in ranking[:2]],
            )
        )

    schemas = {SIDE_U: dataset.schema_u.attributes, SIDE_V: dataset.schema_v.attributes}
    faithfulness_result = None
    if explained:
        faithfulness_result = faithfulness(
            matcher,
            explained_pairs,
            explained_truth,
            [e.saliency for e in explained],
            schemas,
        )
    confidence_mae = None
    if len(explained) >= 10:
        confidence_mae = confidence_indication(
            [e.saliency for e in explained],
            [e.target.label for e in explained],
            [e.target.score for e in explained],
            schemas,
        ).mae
    return EvaluationReport(
        split=split,
        faithfulness=faithfulness_result,
        confidence_mae=confidence_mae,
        proximity=_mean_defined([r.proximity for r in rows]),
        sparsity=_mean_defined([r.sparsity for r in rows]),
        diversity=_mean_defined([r.diversity for r in rows]),
        avg_counterfactuals=(
            sum(r.counterfactuals for r in rows) / len(rows) if rows else 0.0
        ),
        rows=rows,
        skipped=skipped,
        config=config.to_json_dict(),
    )
