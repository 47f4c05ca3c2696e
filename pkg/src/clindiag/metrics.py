"""Confusion matrix and the four diagnostic ratios.

Ratios are kept as exact fractions and rendered to 6 decimals with
round-half-even. A ratio whose denominator is zero is ``None`` and prints as
"undefined".
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from pathlib import Path

import numpy as np

from .encoding import LabeledDataset
from .errors import DimensionMismatch, EmptyDataset, EmptyMatrix, IoFailure, SchemaError
from .svm import model_dim, predict_any

UNDEFINED = "undefined"
PLACES = 6


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for name in ("tp", "fp", "fn", "tn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def patients(self) -> int:
        return self.tp + self.fn

    @property
    def normals(self) -> int:
        return self.fp + self.tn

    @property
    def called_positive(self) -> int:
        return self.tp + self.fp

    @property
    def called_negative(self) -> int:
        return self.fn + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    def swapped(self) -> "ConfusionMatrix":
        """Same calls with the Patient and Normal roles exchanged."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def _ratio(num: int, den: int) -> Fraction | None:
    return Fraction(num, den) if den else None


def render(value: Fraction | None, places: int = PLACES) -> str:
    if value is None:
        return UNDEFINED
    # round() on a Fraction is exact and rounds half to even
    scaled = round(Fraction(value) * 10 ** places)
    return str(Decimal(scaled).scaleb(-places))


@dataclass(frozen=True)
class EvaluationSummary:
    matrix: ConfusionMatrix
    sensitivity: Fraction | None
    specificity: Fraction | None
    ppv: Fraction | None
    npv: Fraction | None
    mode: str = "resubstitution"

    def rendered(self) -> dict[str, str]:
        return {k: render(getattr(self, k))
                for k in ("sensitivity", "specificity", "ppv", "npv")}

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "matrix": self.matrix.to_dict()}
        for k, v in self.rendered().items():
            d[k] = None if v == UNDEFINED else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationSummary":
        try:
            m = ConfusionMatrix(**{k: d["matrix"][k] for k in ("tp", "fp", "fn", "tn")})
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed evaluation document: {exc}") from None
        return summarize(m, mode=d.get("mode", "resubstitution"))


def summarize(matrix: ConfusionMatrix, mode: str = "resubstitution") -> EvaluationSummary:
    if matrix.total < 1:
        raise EmptyMatrix("confusion matrix is empty")
    return EvaluationSummary(
        matrix,
        sensitivity=_ratio(matrix.tp, matrix.tp + matrix.fn),
        specificity=_ratio(matrix.tn, matrix.tn + matrix.fp),
        ppv=_ratio(matrix.tp, matrix.tp + matrix.fp),
        npv=_ratio(matrix.tn, matrix.tn + matrix.fn),
        mode=mode,
    )


def confusion_from_labels(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true)
    p = np.asarray(y_pred)
    if t.shape != p.shape:
        raise DimensionMismatch("true and predicted labels differ in length")
    if t.size == 0:
        raise EmptyDataset("no labels to tally")
    return ConfusionMatrix(
        tp=int(((t > 0) & (p > 0)).sum()),
        fp=int(((t < 0) & (p > 0)).sum()),
        fn=int(((t > 0) & (p < 0)).sum()),
        tn=int(((t < 0) & (p < 0)).sum()),
    )


def confusion(predictor, dataset: LabeledDataset) -> ConfusionMatrix:
    """Tally a model, partition tree or vector->label callable on ``dataset``.

    ``dataset`` must be in the predictor's input coordinates (raw vectors for
    a model that stores its own scaling).
    """
    dim = model_dim(predictor)
    if dim is not None and dim != dataset.dim:
        raise DimensionMismatch(f"predictor expects dimension {dim}, dataset has {dataset.dim}")
    return confusion_from_labels(dataset.labels, predict_any(predictor, dataset.vectors))


def format_table(summary: EvaluationSummary, title: str | None = None) -> str:
    """Text table laid out like the Patient/Normal tables of a diagnostic study."""
    m = summary.matrix
    rows = [
        ("", "Patient", "Normal", "Total"),
        ("Positive", m.tp, m.fp, m.called_positive),
        ("Negative", m.fn, m.tn, m.called_negative),
        ("Total", m.patients, m.normals, m.total),
    ]
    lines = []
    if title:
        lines.append(title)
    for r in rows:
        lines.append(f"{r[0]:<10}{r[1]!s:>9}{r[2]!s:>9}{r[3]!s:>9}")
    r = summary.rendered()
    lines += [
        "",
        f"Sensitivity: {r['sensitivity']}",
        f"Specificity: {r['specificity']}",
        f"Predictive value for positive: {r['ppv']}",
        f"Predictive value for negative: {r['npv']}",
        f"(evaluated by {summary.mode})",
    ]
    return "\n".join(lines) + "\n"


def save_evaluation(summary: EvaluationSummary, path) -> None:
    path = Path(path)
    try:
        if path.suffix == ".json":
            path.write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
        else:
            path.write_text(format_table(summary), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write evaluation {path}: {exc}") from None


def load_evaluation(path) -> EvaluationSummary:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read evaluation {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})") from None
    return EvaluationSummary.from_dict(doc)
