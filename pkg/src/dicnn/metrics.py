"""Confusion-matrix accounting, the derived metric suite, and report
rendering (JSON, CSV, Markdown comparison table, SVG robustness curve).

Accuracy is (TP+TN)/total, i.e. trace over total for any class count;
precision TP/(TP+FP); recall TP/(TP+FN); F1 the harmonic mean of the two.
Ratios with a zero denominator are reported as 0 and flagged undefined so
reports stay JSON-clean.  Multi-class reports carry per-class one-vs-rest
scores plus unweighted macro averages.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ShapeError, StateError

PUBLISHED_RESOURCE = "table1_baselines.csv"


@dataclass
class ConfusionMatrix:
    """k x k counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ShapeError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ShapeError("confusion matrix counts must be non-negative")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def binary_counts(self, positive: int) -> tuple[int, int, int, int]:
        """(TP, FP, FN, TN) treating ``positive`` one-vs-rest."""
        tp = int(self.counts[positive, positive])
        fn = int(self.counts[positive, :].sum()) - tp
        fp = int(self.counts[:, positive].sum()) - tp
        tn = self.total - tp - fn - fp
        return tp, fp, fn, tn


def confusion(predicted, true, k: int) -> ConfusionMatrix:
    pred = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(true, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ShapeError(
            f"predicted ({pred.shape}) and true ({truth.shape}) lengths differ"
        )
    if pred.size and (
        pred.min() < 0 or pred.max() >= k or truth.min() < 0 or truth.max() >= k
    ):
        raise ShapeError(f"label outside 0..{k - 1}")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (truth, pred), 1)
    return ConfusionMatrix(counts)


@dataclass
class ClassScores:
    name: str
    precision: float
    recall: float
    f1: float
    undefined: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    accuracy: float
    per_class: list[ClassScores]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    matrix: ConfusionMatrix
    class_names: list[str]
    positive_class: str | None = None
    dataset_id: str = ""
    arch_id: str = ""
    epsilon: float = 0.0

    # headline scores: the positive class for binary tasks, macro otherwise
    @property
    def precision(self) -> float:
        return self._headline().precision

    @property
    def recall(self) -> float:
        return self._headline().recall

    @property
    def f1(self) -> float:
        return self._headline().f1

    def _headline(self) -> ClassScores:
        if self.positive_class is not None:
            for scores in self.per_class:
                if scores.name == self.positive_class:
                    return scores
        return ClassScores(
            "macro", self.macro_precision, self.macro_recall, self.macro_f1
        )

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class": [
                {
                    "name": s.name,
                    "precision": s.precision,
                    "recall": s.recall,
                    "f1": s.f1,
                    "undefined": s.undefined,
                }
                for s in self.per_class
            ],
            "macro": {
                "precision": self.macro_precision,
                "recall": self.macro_recall,
                "f1": self.macro_f1,
            },
            "matrix": self.matrix.counts.tolist(),
            "class_names": self.class_names,
            "positive_class": self.positive_class,
            "dataset_id": self.dataset_id,
            "arch_id": self.arch_id,
            "epsilon": self.epsilon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "EvalReport":
        return cls(
            accuracy=raw["accuracy"],
            per_class=[
                ClassScores(
                    s["name"], s["precision"], s["recall"], s["f1"],
                    list(s.get("undefined", [])),
                )
                for s in raw["per_class"]
            ],
            macro_precision=raw["macro"]["precision"],
            macro_recall=raw["macro"]["recall"],
            macro_f1=raw["macro"]["f1"],
            matrix=ConfusionMatrix(np.array(raw["matrix"])),
            class_names=list(raw["class_names"]),
            positive_class=raw.get("positive_class"),
            dataset_id=raw.get("dataset_id", ""),
            arch_id=raw.get("arch_id", ""),
            epsilon=raw.get("epsilon", 0.0),
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def table_row(self, label: str = "measured") -> str:
        return (
            f"{label}: accuracy {self.accuracy * 100:.2f}  "
            f"precision {self.precision * 100:.2f}  "
            f"recall {self.recall * 100:.2f}  "
            f"F1 {self.f1 * 100:.2f}"
        )


def _ratio(num: int, den: int, flag: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def metrics(
    matrix: ConfusionMatrix,
    class_names=None,
    positive_class: str | None = None,
    dataset_id: str = "",
    arch_id: str = "",
    epsilon: float = 0.0,
) -> EvalReport:
    """Derive the full score report from a confusion matrix."""
    if matrix.total == 0:
        raise StateError("metrics on an empty confusion matrix")
    k = matrix.k
    names = list(class_names) if class_names else [f"class{i}" for i in range(k)]
    if len(names) != k:
        raise ShapeError(f"{k}x{k} matrix with {len(names)} class names")
    if positive_class is not None and positive_class not in names:
        raise ShapeError(f"positive class {positive_class!r} not in {names}")
    per_class = []
    for c in range(k):
        tp, fp, fn, _ = matrix.binary_counts(c)
        flags: list[str] = []
        precision = _ratio(tp, tp + fp, "precision", flags)
        recall = _ratio(tp, tp + fn, "recall", flags)
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else _ratio(0, 0, "f1", flags)
        )
        per_class.append(ClassScores(names[c], precision, recall, f1, flags))
    accuracy = float(np.trace(matrix.counts) / matrix.total)
    if positive_class is None and k == 2:
        positive_class = names[1]
    return EvalReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_precision=float(np.mean([s.precision for s in per_class])),
        macro_recall=float(np.mean([s.recall for s in per_class])),
        macro_f1=float(np.mean([s.f1 for s in per_class])),
        matrix=matrix,
        class_names=names,
        positive_class=positive_class,
        dataset_id=dataset_id,
        arch_id=arch_id,
        epsilon=epsilon,
    )


def load_published_rows(role: str = "baseline") -> list[dict]:
    """Rows of the bundled comparison table (percent units, verbatim).

    A blank cell means the source did not report that score.
    """
    text = (
        resources.files("dicnn.published").joinpath(PUBLISHED_RESOURCE).read_text()
    )
    rows = []
    for row in csv.DictReader(io.StringIO(text)):
        if role and row["role"] != role:
            continue
        rows.append(
            {
                key: (float(row[key]) if row[key] else None)
                if key in ("accuracy", "precision", "recall", "f1")
                else row[key]
                for key in row
            }
        )
    return rows


def _fmt_cell(value: float | None) -> str:
    return "-" if value is None else f"{value:.2f}"


def comparison_table(
    report: EvalReport, published_rows: list[dict] | None = None
) -> tuple[str, str]:
    """Markdown and CSV renderings of published baseline scores next to the
    measured report.  Published numbers are passed through verbatim, never
    recomputed; missing published cells render as '-'."""
    if published_rows is None:
        published_rows = load_published_rows()
    rows = [
        (
            row["method"],
            "published",
            row["accuracy"],
            row["precision"],
            row["recall"],
            row["f1"],
        )
        for row in published_rows
    ]
    rows.append(
        (
            "FGSM-DICNN (this run)",
            "measured",
            report.accuracy * 100,
            report.precision * 100,
            report.recall * 100,
            report.f1 * 100,
        )
    )
    header = ("method", "source", "accuracy", "precision", "recall", "f1")
    md_lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join(["---"] * len(header)) + "|",
    ]
    csv_buf = io.StringIO()
    writer = csv.writer(csv_buf, lineterminator="\n")
    writer.writerow(header)
    for method, source, acc, prec, rec, f1 in rows:
        cells = [_fmt_cell(v) for v in (acc, prec, rec, f1)]
        md_lines.append("| " + " | ".join([method, source] + cells) + " |")
        writer.writerow([method, source] + cells)
    return "\n".join(md_lines) + "\n", csv_buf.getvalue()


def sweep_to_csv(reports: list[EvalReport]) -> str:
    """Robustness-curve rows: epsilon, accuracy, precision, recall, f1."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "accuracy", "precision", "recall", "f1"])
    for report in reports:
        writer.writerow(
            [
                repr(report.epsilon),
                repr(report.accuracy),
                repr(report.precision),
                repr(report.recall),
                repr(report.f1),
            ]
        )
    return buf.getvalue()


def sweep_to_svg(reports: list[EvalReport], width=640, height=420) -> str:
    """Minimal dependency-free line chart of the robustness sweep."""
    margin = 60
    metric_names = ("accuracy", "precision", "recall", "f1")
    colors = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728")
    eps = [r.epsilon for r in reports]
    lo, hi = min(eps), max(eps)
    span = hi - lo if hi > lo else 1.0

    def sx(e):
        return margin + (e - lo) / span * (width - 2 * margin)

    def sy(v):
        return height - margin - v * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 15}" text-anchor="middle" '
        f'font-size="13">perturbation size</text>',
        f'<text x="18" y="{height / 2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {height / 2:.0f})">score</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(
            f'<text x="{margin - 8}" y="{sy(tick):.1f}" text-anchor="end" '
            f'font-size="11">{tick:.2f}</text>'
        )
    for e in eps:
        parts.append(
            f'<text x="{sx(e):.1f}" y="{height - margin + 16}" '
            f'text-anchor="middle" font-size="11">{e:g}</text>'
        )
    for name, color in zip(metric_names, colors):
        pts = " ".join(
            f"{sx(r.epsilon):.1f},{sy(getattr(r, name)):.1f}" for r in reports
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
    for i, (name, color) in enumerate(zip(metric_names, colors)):
        y = margin + 16 * i
        parts.append(
            f'<rect x="{width - margin - 110}" y="{y - 9}" width="10" height="10" '
            f'fill="{color}"/>'
            f'<text x="{width - margin - 95}" y="{y}" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
