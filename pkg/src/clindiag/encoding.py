"""Turning clinical test records into labeled vectors.

A record is a mapping from column name to raw cell. Each schema feature
contributes one vector component, in schema order: numeric results are
taken as-is, staged results (e.g. urine WBC "Negative", "Trace",
"Positive 1", ...) are replaced by the number the schema assigns to that
stage. One extra column carries the class label, mapped to +1 / -1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import (
    AlreadyStandardized,
    DatasetTooSmall,
    EmptyDataset,
    EncodingError,
    IoFailure,
    MissingColumn,
    NonFiniteValue,
    NonNumericCell,
    SchemaError,
    UnknownLabelValue,
    UnknownStage,
)

NUMERIC = "Numeric"
STAGED = "Staged"

ClinicalRecord = Mapping[str, Any]


@dataclass(frozen=True)
class FeatureSpec:
    name: str
    kind: str = NUMERIC
    # ordered (stage name, assigned number) pairs; only for Staged features
    stages: tuple[tuple[str, float], ...] = ()
    # opt-in replacement for a missing column or an empty cell
    impute: float | None = None

    def __post_init__(self):
        kind = _normalize_kind(self.kind)
        object.__setattr__(self, "kind", kind)
        stages = tuple((str(n), float(v)) for n, v in self.stages)
        object.__setattr__(self, "stages", stages)
        if kind == STAGED:
            if not stages:
                raise SchemaError(f"staged feature {self.name!r} has no stages")
            names = [n for n, _ in stages]
            values = [v for _, v in stages]
            if len(set(names)) != len(names):
                raise SchemaError(f"duplicate stage names in {self.name!r}")
            if len(set(values)) != len(values):
                raise SchemaError(f"stage numbers in {self.name!r} are not distinct")
            if not all(math.isfinite(v) for v in values):
                raise SchemaError(f"non-finite stage number in {self.name!r}")
        elif stages:
            raise SchemaError(f"numeric feature {self.name!r} must not list stages")
        if self.impute is not None:
            imp = float(self.impute)
            if not math.isfinite(imp):
                raise SchemaError(f"non-finite impute value for {self.name!r}")
            object.__setattr__(self, "impute", imp)

    def stage_map(self) -> dict[str, float]:
        return dict(self.stages)

    def encode_cell(self, cell) -> float:
        if cell is None or (isinstance(cell, str) and cell.strip() == ""):
            if self.impute is not None:
                return self.impute
        if self.kind == STAGED:
            key = cell.strip() if isinstance(cell, str) else str(cell)
            try:
                return self.stage_map()[key]
            except KeyError:
                known = ", ".join(n for n, _ in self.stages)
                raise UnknownStage(
                    f"{self.name}: stage {cell!r} is not one of [{known}]") from None
        if isinstance(cell, bool):
            raise NonNumericCell(f"{self.name}: boolean cell {cell!r}")
        try:
            value = float(cell.strip() if isinstance(cell, str) else cell)
        except (TypeError, ValueError):
            raise NonNumericCell(f"{self.name}: cannot parse {cell!r} as a number") from None
        if not math.isfinite(value):
            raise NonFiniteValue(f"{self.name}: value {cell!r} is not finite")
        return value

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.kind == STAGED:
            d["stages"] = [{"name": n, "value": v} for n, v in self.stages]
        if self.impute is not None:
            d["impute"] = self.impute
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "FeatureSpec":
        try:
            stages = tuple((s["name"], s["value"]) for s in d.get("stages", ()))
            return cls(name=str(d["name"]), kind=d.get("kind", NUMERIC),
                       stages=stages, impute=d.get("impute"))
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed feature entry {d!r}: {exc}") from None


def _normalize_kind(kind) -> str:
    k = str(kind).strip().lower()
    if k == "numeric":
        return NUMERIC
    if k == "staged":
        return STAGED
    raise SchemaError(f"unknown feature kind {kind!r}")


@dataclass(frozen=True)
class LabelRule:
    label_column: str
    positive_value: str
    negative_value: str

    def __post_init__(self):
        pos, neg = str(self.positive_value), str(self.negative_value)
        if pos == neg:
            raise SchemaError("positive and negative label values must differ")
        object.__setattr__(self, "positive_value", pos)
        object.__setattr__(self, "negative_value", neg)

    def label_of(self, cell) -> int:
        value = cell.strip() if isinstance(cell, str) else str(cell)
        if value == self.positive_value:
            return 1
        if value == self.negative_value:
            return -1
        raise UnknownLabelValue(
            f"{self.label_column}: label {cell!r} is neither "
            f"{self.positive_value!r} nor {self.negative_value!r}")


@dataclass(frozen=True)
class EncodingSchema:
    features: tuple[FeatureSpec, ...]
    label_rule: LabelRule | None = None

    def __post_init__(self):
        feats = tuple(self.features)
        object.__setattr__(self, "features", feats)
        if not feats:
            raise SchemaError("schema needs at least one feature")
        names = [f.name for f in feats]
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.label_rule is not None and self.label_rule.label_column in names:
            raise SchemaError("label column must not also be a feature")

    @property
    def dim(self) -> int:
        return len(self.features)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"features": [f.to_dict() for f in self.features]}
        if self.label_rule is not None:
            d["label_rule"] = {
                "label_column": self.label_rule.label_column,
                "positive_value": self.label_rule.positive_value,
                "negative_value": self.label_rule.negative_value,
            }
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "EncodingSchema":
        if not isinstance(d, Mapping) or "features" not in d:
            raise SchemaError("schema document must be an object with 'features'")
        feats = tuple(FeatureSpec.from_dict(f) for f in d["features"])
        rule = None
        if d.get("label_rule") is not None:
            r = d["label_rule"]
            try:
                rule = LabelRule(r["label_column"], r["positive_value"], r["negative_value"])
            except (KeyError, TypeError) as exc:
                raise SchemaError(f"malformed label_rule: {exc}") from None
        return cls(feats, rule)


def load_schema(path) -> EncodingSchema:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read schema {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return EncodingSchema.from_dict(doc)


def save_schema(schema: EncodingSchema, path) -> None:
    Path(path).write_text(json.dumps(schema.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class Scaling:
    """Per-dimension (mean, std) used to standardize inputs."""

    mean: np.ndarray
    std: np.ndarray
    zero_variance: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float)
        std = np.array(self.std, dtype=float)
        if mean.ndim != 1 or mean.shape != std.shape or mean.size == 0:
            raise SchemaError("scaling mean/std must be equal-length 1-D arrays")
        if not np.all(std > 0):
            raise SchemaError("scaling std entries must be positive")
        zv = (np.zeros(mean.size, dtype=bool) if self.zero_variance is None
              else np.array(self.zero_variance, dtype=bool))
        for a in (mean, std, zv):
            a.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "zero_variance", zv)

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.std

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) * self.std + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": [repr(float(v)) for v in self.mean],
            "std": [repr(float(v)) for v in self.std],
            "zero_variance": [bool(v) for v in self.zero_variance],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Scaling":
        return cls(np.array([float(v) for v in d["mean"]]),
                   np.array([float(v) for v in d["std"]]),
                   np.array(d.get("zero_variance") or [False] * len(d["mean"]), dtype=bool))


@dataclass(frozen=True)
class LabeledDataset:
    """``vectors`` is an (l, M) float array, ``labels`` holds +1/-1."""

    vectors: np.ndarray
    labels: np.ndarray
    scaling: Scaling | None = None

    def __post_init__(self):
        X = np.array(self.vectors, dtype=float)
        y = np.array(self.labels)
        if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
            raise EmptyDataset("dataset needs at least one vector of dimension >= 1")
        if y.shape != (X.shape[0],):
            raise SchemaError("vectors and labels must have equal length")
        if not np.all(np.isin(y, (-1, 1))):
            raise SchemaError("labels must be +1 or -1")
        if not np.all(np.isfinite(X)):
            raise NonFiniteValue("dataset contains non-finite components")
        if self.scaling is not None and self.scaling.mean.size != X.shape[1]:
            raise SchemaError("scaling dimension does not match vectors")
        y = y.astype(np.int64)
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "vectors", X)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.vectors[idx], self.labels[idx], self.scaling)


def encode_record(record: ClinicalRecord, schema: EncodingSchema) -> np.ndarray:
    out = np.empty(schema.dim)
    for i, feat in enumerate(schema.features):
        if feat.name not in record:
            if feat.impute is None:
                raise MissingColumn(f"record has no column {feat.name!r}")
            out[i] = feat.impute
            continue
        out[i] = feat.encode_cell(record[feat.name])
    return out


def encode_dataset(records: Sequence[ClinicalRecord], schema: EncodingSchema) -> LabeledDataset:
    if schema.label_rule is None:
        raise SchemaError("schema has no label_rule; cannot label a dataset")
    if len(records) == 0:
        raise EmptyDataset("no records to encode")
    rule = schema.label_rule
    X = np.empty((len(records), schema.dim))
    y = np.empty(len(records), dtype=np.int64)
    for i, rec in enumerate(records):
        try:
            X[i] = encode_record(rec, schema)
            if rule.label_column not in rec:
                raise MissingColumn(f"record has no label column {rule.label_column!r}")
            y[i] = rule.label_of(rec[rule.label_column])
        except EncodingError as exc:
            raise exc.at_row(i) from None
    return LabeledDataset(X, y)


def standardize(dataset: LabeledDataset) -> LabeledDataset:
    """Center each dimension and divide by its population std (divisor l).

    Zero-variance dimensions are only centered; their stored std is 1 and
    they are flagged in ``scaling.zero_variance``.
    """
    if dataset.scaling is not None:
        raise AlreadyStandardized("dataset is already standardized")
    if len(dataset) < 2:
        raise DatasetTooSmall("standardization needs at least 2 vectors")
    X = dataset.vectors
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    zero = ~(std > 0)
    std = np.where(zero, 1.0, std)
    scaling = Scaling(mean, std, zero)
    return LabeledDataset(scaling.transform(X), dataset.labels, scaling)


def read_csv(path) -> list[dict[str, str]]:
    """Read a headered UTF-8 CSV into a list of column->cell dicts."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise SchemaError(f"{path}: missing header row")
            rows = []
            for row in reader:
                if None in row:
                    raise SchemaError(
                        f"{path}: line {reader.line_num} has more cells than the header")
                rows.append(row)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from None
    except UnicodeDecodeError as exc:
        raise SchemaError(f"{path}: not valid UTF-8 ({exc.reason})") from None
    return rows


def split_holdout(n: int, fraction: float, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Seeded (train, holdout) index split; both index arrays sorted."""
    if not 0.0 <= fraction <= 0.9:
        raise ValueError("holdout fraction must lie in [0, 0.9]")
    n_hold = int(round(fraction * n))
    order = np.random.default_rng(np.random.SeedSequence(seed)).permutation(n)
    return np.sort(order[n_hold:]), np.sort(order[:n_hold])
