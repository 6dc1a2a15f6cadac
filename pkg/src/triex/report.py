"""Report rendering: figures, Markdown, and delimited rows.

Every artifact is written atomically (temp file then rename) so a failing run
never corrupts outputs that were already produced.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .explainer import Explanation, display_name
from .lattice import AuditReport
from .metrics import EvaluationReport, FaithfulnessResult, MaskingResult


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _save_figure(fig, path: str | Path) -> None:
    buffer = io.BytesIO()
    fig.savefig(buffer, format="png", bbox_inches="tight", dpi=150)
    plt.close(fig)
    atomic_write_bytes(path, buffer.getvalue())


def save_saliency_figure(
    explanation: Explanation, path: str | Path, actual: MaskingResult | None = None
) -> None:
    """Horizontal bar chart of saliency, optionally next to the masking effect."""
    names = list(explanation.saliency_by_display_name())
    values = list(explanation.saliency_by_display_name().values())
    positions = range(len(names))
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(names) + 1.5))
    if actual is not None:
        height = 0.38
        ax.barh(
            [p + height / 2 for p in positions],
            values,
            height=height,
            label="saliency",
            color="tab:blue",
        )
        ax.barh(
            [p - height / 2 for p in positions],
            [actual.actual.get(n, 0.0) for n in names],
            height=height,
            label="masking effect",
            color="tab:orange",
        )
        ax.legend(loc="lower right", fontsize=8)
    else:
        ax.barh(list(positions), values, color="tab:blue")
    ax.set_yticks(list(positions))
    ax.set_yticklabels(names, fontsize=9)
    ax.invert_yaxis()
    ax.set_xlabel("saliency")
    ax.set_xlim(0, 1)
    pair = f"{explanation.target.record_u.id} / {explanation.target.record_v.id}"
    label = "match" if explanation.target.label else "non-match"
    ax.set_title(f"pair {pair}: {label} ({explanation.target.score:.3f})", fontsize=10)
    _save_figure(fig, path)


def save_faithfulness_figure(result: FaithfulnessResult, path: str | Path) -> None:
    xs = [0.0, *result.thresholds]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, result.f1_curve, marker="o", color="tab:blue")
    ax.set_xlabel("fraction of attributes masked")
    ax.set_ylabel("F1")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"faithfulness AUC = {result.auc:.4f}", fontsize=10)
    ax.grid(True, alpha=0.3)
    _save_figure(fig, path)


def save_audit_figure(report: AuditReport, path: str | Path) -> None:
    summary = report.to_json_dict()["average"]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    labels = ["expected", "performed", "saved"]
    ax.bar(labels, [summary[k] for k in labels], color=["gray", "tab:blue", "tab:green"])
    ax.set_ylabel("predictions per lattice (avg)")
    ax.set_title(f"error rate = {summary['errorRate']:.4f}", fontsize=10)
    _save_figure(fig, path)


def _markdown_escape(value: str) -> str:
    return value.replace("|", "\\|").replace("\n", " ")


def explanation_markdown(explanation: Explanation) -> str:
    """Human-readable report: ranked attributes plus counterfactual value diffs."""
    target = explanation.target
    label = "match" if target.label else "non-match"
    lines = [
        f"# Explanation for pair ({target.record_u.id}, {target.record_v.id})",
        "",
        f"Prediction: **{label}** (score {target.score:.6f})",
        "",
        "## Saliency",
        "",
        "| attribute | saliency |",
        "| --- | --- |",
    ]
    ranked = sorted(
        explanation.saliency_by_display_name().items(), key=lambda kv: -kv[1]
    )
    for name, value in ranked:
        lines.append(f"| {name} | {value:.4f} |")
    lines += ["", "## Counterfactuals", ""]
    if explanation.astar_side:
        astar = ", ".join(display_name(explanation.astar_side, a) for a in explanation.astar)
        lines.append(
            f"Best sufficiency subset: {astar} "
            f"(sufficiency {explanation.chistar:.4f}, "
            f"{explanation.counterfactual_total} counterfactual(s))"
        )
    else:
        lines.append(
            "No attribute subset short of the full schema flips the prediction."
        )
    for i, cf in enumerate(explanation.counterfactuals, start=1):
        lines += ["", f"### Counterfactual {i} (score {cf.score:.6f})", ""]
        changed = set(cf.changed)
        for side, original, modified in (
            ("U", target.record_u, cf.record_u),
            ("V", target.record_v, cf.record_v),
        ):
            lines.append(f"| {side} attribute | original | counterfactual |")
            lines.append("| --- | --- | --- |")
            for attr, value in original.values.items():
                new = modified.values[attr]
                shown = f"**{_markdown_escape(new)}**" if (
                    cf.side == side and attr in changed
                ) else _markdown_escape(new)
                lines.append(f"| {attr} | {_markdown_escape(value)} | {shown} |")
            lines.append("")
    return "\n".join(lines) + "\n"


def evaluation_markdown(report: EvaluationReport) -> str:
    data = report.to_json_dict()

    def fmt(value) -> str:
        return "-" if value is None else f"{value:.4f}"

    lines = [
        f"# Evaluation report ({report.split} split, {len(report.rows)} predictions)",
        "",
        "| faithfulness AUC | confidence MAE | proximity | sparsity | diversity | avg CFs |",
        "| --- | --- | --- | --- | --- | --- |",
        "| "
        + " | ".join(
            fmt(data[k])
            for k in (
                "faithfulness_auc",
                "confidence_mae",
                "proximity",
                "sparsity",
                "diversity",
                "avg_counterfactuals",
            )
        )
        + " |",
        "",
        "| pair | truth | score | A* | chi* | CFs | proximity | sparsity | diversity |",
        "| --- | --- | --- | --- | --- | --- | --- | --- | --- |",
    ]
    for row in report.rows:
        lines.append(
            "| "
            + " | ".join(
                [
                    f"({row.id_u}, {row.id_v})",
                    "match" if row.truth else "non-match",
                    f"{row.score:.4f}",
                    ", ".join(row.astar) if row.astar else "-",
                    f"{row.chistar:.4f}",
                    str(row.counterfactuals),
                    fmt(row.proximity),
                    fmt(row.sparsity),
                    fmt(row.diversity),
                ]
            )
            + " |"
        )
    return "\n".join(lines) + "\n"


def evaluation_rows_csv(report: EvaluationReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    header = [
        "id_u",
        "id_v",
        "truth",
        "score",
        "label",
        "astar",
        "chistar",
        "counterfactuals",
        "proximity",
        "sparsity",
        "diversity",
        "triangles_found",
        "top_saliency",
    ]
    writer.writerow(header)
    for row in report.rows:
        writer.writerow(
            [
                row.id_u,
                row.id_v,
                int(row.truth),
                f"{row.score:.9f}",
                int(row.label),
                "+".join(row.astar),
                f"{row.chistar:.9f}",
                row.counterfactuals,
                "" if row.proximity is None else f"{row.proximity:.9f}",
                "" if row.sparsity is None else f"{row.sparsity:.9f}",
                "" if row.diversity is None else f"{row.diversity:.9f}",
                row.triangles_found,
                "+".join(row.top_saliency),
            ]
        )
    return buffer.getvalue()


def audit_csv(report: AuditReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["attributes", "expected", "performed", "saved", "error_rate"])
    for row in report.rows:
        writer.writerow(
            [row.attributes, row.expected, row.performed, row.saved, f"{row.error_rate:.9f}"]
        )
    return buffer.getvalue()


def saliency_csv(explanations: list[Explanation]) -> str:
    """One delimited summary row per explained pair."""
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(
        ["id_u", "id_v", "score", "label", "astar", "chistar", "counterfactuals", "top_saliency"]
    )
    for explanation in explanations:
        target = explanation.target
        astar = (
            "+".join(display_name(explanation.astar_side, a) for a in explanation.astar)
            if explanation.astar_side
            else ""
        )
        ranked = sorted(
            explanation.saliency_by_display_name().items(), key=lambda kv: -kv[1]
        )
        writer.writerow(
            [
                target.record_u.id,
                target.record_v.id,
                f"{target.score:.9f}",
                int(target.label),
                astar,
                f"{explanation.chistar:.9f}",
                explanation.counterfactual_total,
                "+".join(name for name, _ in ranked[:2]),
            ]
        )
    return buffer.getvalue()
