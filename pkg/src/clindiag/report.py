"""Multi-disease statistical diagnosis for a single clinical record.

Each registry entry pairs a trained model with the schema that encodes
records for it and the evaluation measured for it. The confidence printed
next to a call is the predictive value of that call from the stored
evaluation: PPV for a Positive call, NPV for a Negative one. This is a
convention for reading the tables, not a calibrated probability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .encoding import ClinicalRecord, EncodingSchema, encode_record, load_schema
from .errors import ClinDiagError, DimensionMismatch, EmptyRegistry, IoFailure, SchemaError
from .metrics import EvaluationSummary, load_evaluation
from .svm import PartitionTree, SvmModel, decision_value, load_model, tree_route


@dataclass(frozen=True)
class RegistryEntry:
    model: SvmModel | PartitionTree
    schema: EncodingSchema
    evaluation: EvaluationSummary

    def __post_init__(self):
        if self.schema.dim != self.model.dim:
            raise DimensionMismatch(
                f"schema has {self.schema.dim} features but model expects {self.model.dim}")
        if self.evaluation.matrix.total < 1:
            raise SchemaError("registry evaluation has an empty confusion matrix")


class ModelRegistry:
    """Read-only mapping disease name -> RegistryEntry."""

    def __init__(self, entries: Mapping[str, RegistryEntry]):
        self._entries = MappingProxyType(dict(entries))

    @property
    def entries(self) -> Mapping[str, RegistryEntry]:
        return self._entries

    def __len__(self):
        return len(self._entries)

    def names(self) -> list[str]:
        return sorted(self._entries)


def load_registry(path) -> ModelRegistry:
    """Manifest: {"entries": [{"disease", "model", "schema", "evaluation"}, ...]}.

    Relative file paths are resolved against the manifest's directory.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read registry {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})") from None
    base = path.parent
    entries = {}
    for item in doc.get("entries", []):
        try:
            name = str(item["disease"])
            files = [base / item[k] for k in ("model", "schema", "evaluation")]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"{path}: malformed registry entry {item!r}: {exc}") from None
        if name in entries:
            raise SchemaError(f"{path}: duplicate disease {name!r}")
        entries[name] = RegistryEntry(load_model(files[0]), load_schema(files[1]),
                                      load_evaluation(files[2]))
    return ModelRegistry(entries)


@dataclass(frozen=True)
class DiagnosisRow:
    disease: str
    predicted: str | None
    confidence: Fraction | None
    decision_value: float | None
    error: str | None = None

    @property
    def available(self) -> bool:
        return self.error is None

    @property
    def confidence_percent(self) -> float | None:
        return None if self.confidence is None else float(self.confidence * 100)

    def to_dict(self) -> dict:
        return {
            "disease": self.disease,
            "predicted": self.predicted,
            "confidence_percent": self.confidence_percent,
            "decision_value": self.decision_value,
            "error": self.error,
        }


@dataclass(frozen=True)
class DiagnosticReport:
    rows: tuple[DiagnosisRow, ...]

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}


def _diagnose_one(name: str, entry: RegistryEntry, record: ClinicalRecord) -> DiagnosisRow:
    try:
        x = encode_record(record, entry.schema)
    except ClinDiagError as exc:
        return DiagnosisRow(name, None, None, None, error=str(exc))
    if isinstance(entry.model, PartitionTree):
        label, dv = tree_route(entry.model, x)
    else:
        dv = decision_value(entry.model, x)
        label = 1 if dv >= 0 else -1
    ev = entry.evaluation
    if label > 0:
        return DiagnosisRow(name, "Positive", ev.ppv, dv)
    return DiagnosisRow(name, "Negative", ev.npv, dv)


def diagnose(registry: ModelRegistry, record: ClinicalRecord) -> DiagnosticReport:
    if len(registry) == 0:
        raise EmptyRegistry("registry has no diseases")
    rows = tuple(_diagnose_one(n, registry.entries[n], record) for n in registry.names())
    return DiagnosticReport(rows)


def format_report(report: DiagnosticReport, title="Statistical Diagnosis") -> str:
    header = ("Disease", "Call", "Confidence", "Decision value")
    body = []
    for r in report.rows:
        if not r.available:
            body.append((r.disease, "unavailable", "-", r.error))
            continue
        conf = "undefined" if r.confidence is None else f"{r.confidence_percent:.4f}%"
        dv = "-" if r.decision_value is None else f"{r.decision_value:.6f}"
        body.append((r.disease, r.predicted, conf, dv))
    widths = [max(len(str(row[i])) for row in [header, *body]) for i in range(3)]
    lines = [title] if title else []
    for row in [header, *body]:
        lines.append("  ".join(str(c).ljust(w) for c, w in zip(row[:3], widths))
                     + "  " + str(row[3]))
    return "\n".join(line.rstrip() for line in lines) + "\n"
