"""Linear soft-margin SVM models and the recursive partition tree.

A trained ``SvmModel`` holds the hyperplane w.x + b = 0 in the coordinates
it was trained in, plus the scaling (if any) that maps raw clinical vectors
into those coordinates, so callers always pass raw vectors.

A ``PartitionTree`` re-applies the SVM inside each half-space it produced,
so a class region may be made of several disconnected pieces.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from .encoding import LabeledDataset, Scaling
from .errors import (
    CorruptModel,
    DimensionMismatch,
    IoFailure,
    SingleClassDataset,
    VersionMismatch,
    ZeroWeightVector,
)
from .qp import DEFAULT_MAX_PASSES, DEFAULT_TOL, QpProblem, kkt_violation, solve_dual

FORMAT_VERSION = 1
DEFAULT_C = 1.0
DEFAULT_MAX_DEPTH = 3
DEFAULT_MIN_LEAF = 5


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray
    offset: float
    C: float
    support_indices: np.ndarray
    support_alphas: np.ndarray
    scaling: Scaling | None = None
    training_summary: dict = field(default_factory=dict)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise DimensionMismatch("weights must be a non-empty vector")
        if self.scaling is not None and self.scaling.mean.size != w.size:
            raise DimensionMismatch("scaling dimension does not match weights")
        idx = np.array(self.support_indices, dtype=np.int64)
        al = np.array(self.support_alphas, dtype=float)
        for arr in (w, idx, al):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "support_indices", idx)
        object.__setattr__(self, "support_alphas", al)
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "C", float(self.C))

    @property
    def dim(self) -> int:
        return self.weights.size

    @property
    def standardized(self) -> bool:
        return self.scaling is not None

    @property
    def converged(self) -> bool:
        return bool(self.training_summary.get("converged", True))


@dataclass(frozen=True)
class Leaf:
    label: int
    purity: float
    size: int = 0


@dataclass(frozen=True)
class Split:
    model: SvmModel
    positive: "Node"
    negative: "Node"


Node = Union[Leaf, Split]


@dataclass(frozen=True)
class PartitionTree:
    root: Node
    dim: int
    max_depth: int = DEFAULT_MAX_DEPTH
    min_leaf_size: int = DEFAULT_MIN_LEAF

    def depth(self) -> int:
        def _d(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(_d(node.positive), _d(node.negative))
        return _d(self.root)

    def splits(self):
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Split):
                yield node
                stack.extend((node.positive, node.negative))


# -- training ---------------------------------------------------------------

def train(dataset: LabeledDataset, C: float = DEFAULT_C, tol: float = DEFAULT_TOL,
          max_passes: int = DEFAULT_MAX_PASSES) -> SvmModel:
    """Fit w, b on ``dataset`` through the dual.

    The solver runs at tol * min(1, 1/C): that keeps every free support
    vector within ``tol`` of its margin and the primal-dual gap below
    tol * l, since the gap is bounded by C * l * (max KKT residual).
    A non-converged solve still yields a model, tagged in training_summary.
    """
    if not (math.isfinite(C) and C > 0):
        raise ValueError(f"C must be positive, got {C}")
    y = dataset.labels
    if not ((y > 0).any() and (y < 0).any()):
        missing = "-1" if (y > 0).all() else "+1"
        raise SingleClassDataset(f"dataset has no {missing} labels; need both classes")
    X = dataset.vectors
    problem = QpProblem(X @ X.T, y, C)
    sol = solve_dual(problem, tol=tol * min(1.0, 1.0 / C), max_passes=max_passes)
    sv = np.flatnonzero(sol.alphas > 0)
    coef = sol.alphas[sv] * y[sv]
    w = coef @ X[sv] if sv.size else np.zeros(X.shape[1])
    summary = {
        "l": int(len(dataset)),
        "iterations": int(sol.iterations),
        "kkt_violation": kkt_violation(problem, sol),
        "objective": float(sol.objective),
        "tol": float(tol),
        "converged": bool(sol.converged),
    }
    return SvmModel(w, sol.offset, C, sv, sol.alphas[sv], dataset.scaling, summary)


def _as_matrix(model_dim: int, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model_dim:
        raise DimensionMismatch(
            f"expected vectors of length {model_dim}, got shape {np.shape(X)}")
    return X


def decision_values(model: SvmModel, X) -> np.ndarray:
    X = _as_matrix(model.dim, X)
    if model.scaling is not None:
        X = model.scaling.transform(X)
    return X @ model.weights + model.offset


def decision_value(model: SvmModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DimensionMismatch("decision_value takes a single vector")
    return float(decision_values(model, x)[0])


def predict(model: SvmModel, x) -> int:
    """+1 when w.x + b >= 0 (a point on the hyperplane counts as positive)."""
    return 1 if decision_value(model, x) >= 0 else -1


def predict_many(model: SvmModel, X) -> np.ndarray:
    return np.where(decision_values(model, X) >= 0, 1, -1)


def margin_distance(model: SvmModel, x) -> float:
    """Geometric distance |w.x + b| / ||w|| in the model's coordinates."""
    norm = float(np.linalg.norm(model.weights))
    if norm == 0:
        raise ZeroWeightVector("model has w = 0; the hyperplane is undefined")
    return abs(decision_value(model, x)) / norm


def _leaf(y, side: int = 1) -> Leaf:
    n = len(y)
    npos = int((y > 0).sum())
    if npos * 2 == n:
        label = side
    else:
        label = 1 if npos * 2 > n else -1
    hits = npos if label > 0 else n - npos
    return Leaf(label, hits / n if n else 0.0, n)


def train_partition_tree(dataset: LabeledDataset, C: float = DEFAULT_C,
                         tol: float = DEFAULT_TOL, max_depth: int = DEFAULT_MAX_DEPTH,
                         min_leaf_size: int = DEFAULT_MIN_LEAF,
                         max_passes: int = DEFAULT_MAX_PASSES) -> PartitionTree:
    """Split recursively with linear SVMs.

    A node is split only when its subset holds both classes, its depth is
    below ``max_depth``, the solver converged, and both sides of the new
    hyperplane receive at least ``min_leaf_size`` points. Otherwise it
    becomes a leaf with the majority label; a tied leaf takes the label of
    the side of its parent's hyperplane it sits on (+1 at the root).
    """
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    if min_leaf_size < 1:
        raise ValueError("min_leaf_size must be >= 1")
    y = dataset.labels
    if not ((y > 0).any() and (y < 0).any()):
        raise SingleClassDataset("root dataset must contain both classes")

    def grow(subset: LabeledDataset, depth: int, side: int) -> Node:
        ys = subset.labels
        if depth >= max_depth or (ys == ys[0]).all():
            return _leaf(ys, side)
        model = train(subset, C=C, tol=tol, max_passes=max_passes)
        if not model.converged:
            return _leaf(ys, side)
        # subset vectors are already in the model's coordinates
        pos = subset.vectors @ model.weights + model.offset >= 0
        npos = int(pos.sum())
        if min(npos, len(ys) - npos) < min_leaf_size:
            return _leaf(ys, side)
        return Split(model,
                     grow(subset.subset(np.flatnonzero(pos)), depth + 1, 1),
                     grow(subset.subset(np.flatnonzero(~pos)), depth + 1, -1))

    return PartitionTree(grow(dataset, 0, 1), dataset.dim, max_depth, min_leaf_size)


def tree_route(tree: PartitionTree, x) -> tuple[int, float | None]:
    """Label for ``x`` and the decision value of the last split on its path."""
    x = np.asarray(x, dtype=float)
    if x.shape != (tree.dim,):
        raise DimensionMismatch(f"expected a vector of length {tree.dim}, got {x.shape}")
    node, dv = tree.root, None
    while isinstance(node, Split):
        dv = decision_value(node.model, x)
        node = node.positive if dv >= 0 else node.negative
    return node.label, dv


def predict_tree(tree: PartitionTree, x) -> int:
    return tree_route(tree, x)[0]


def predict_tree_many(tree: PartitionTree, X) -> np.ndarray:
    X = _as_matrix(tree.dim, X)
    out = np.empty(X.shape[0], dtype=np.int64)

    def route(node, idx):
        if isinstance(node, Leaf):
            out[idx] = node.label
            return
        pos = decision_values(node.model, X[idx]) >= 0
        route(node.positive, idx[pos])
        route(node.negative, idx[~pos])

    route(tree.root, np.arange(X.shape[0]))
    return out


def predict_any(predictor, X) -> np.ndarray:
    """Vectorized labels for an SvmModel, a PartitionTree or a callable."""
    if isinstance(predictor, SvmModel):
        return predict_many(predictor, X)
    if isinstance(predictor, PartitionTree):
        return predict_tree_many(predictor, X)
    return np.array([int(predictor(x)) for x in np.asarray(X, dtype=float)])


def model_dim(predictor) -> int | None:
    return getattr(predictor, "dim", None)


# -- persistence ------------------------------------------------------------

def _f(v) -> str:
    return repr(float(v))


def _model_payload(m: SvmModel) -> dict:
    return {
        "weights": [_f(v) for v in m.weights],
        "offset": _f(m.offset),
        "C": _f(m.C),
        "scaling": m.scaling.to_dict() if m.scaling is not None else None,
        "support": {
            "indices": [int(i) for i in m.support_indices],
            "alphas": [_f(a) for a in m.support_alphas],
        },
        "training_summary": {k: (_f(v) if isinstance(v, float) else v)
                             for k, v in m.training_summary.items()},
    }


def _model_from_payload(d: dict) -> SvmModel:
    summary = {}
    for k, v in d.get("training_summary", {}).items():
        summary[k] = float(v) if isinstance(v, str) else v
    sup = d.get("support") or {"indices": [], "alphas": []}
    scaling = Scaling.from_dict(d["scaling"]) if d.get("scaling") else None
    return SvmModel(np.array([float(v) for v in d["weights"]]), float(d["offset"]),
                    float(d["C"]), np.array(sup["indices"], dtype=np.int64),
                    np.array([float(a) for a in sup["alphas"]]), scaling, summary)


def _node_payload(node: Node) -> dict:
    if isinstance(node, Leaf):
        return {"type": "leaf", "label": node.label, "purity": _f(node.purity),
                "size": node.size}
    return {"type": "split", "model": _model_payload(node.model),
            "positive": _node_payload(node.positive),
            "negative": _node_payload(node.negative)}


def _node_from_payload(d: dict) -> Node:
    if d["type"] == "leaf":
        return Leaf(int(d["label"]), float(d["purity"]), int(d.get("size", 0)))
    if d["type"] == "split":
        return Split(_model_from_payload(d["model"]),
                     _node_from_payload(d["positive"]),
                     _node_from_payload(d["negative"]))
    raise ValueError(f"unknown node type {d['type']!r}")


def _checksum(doc: dict) -> str:
    body = {k: v for k, v in doc.items() if k != "checksum"}
    canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def to_document(obj) -> dict:
    if isinstance(obj, SvmModel):
        doc = {"format_version": FORMAT_VERSION, "kind": "linear", **_model_payload(obj)}
    elif isinstance(obj, PartitionTree):
        doc = {"format_version": FORMAT_VERSION, "kind": "tree", "dim": obj.dim,
               "max_depth": obj.max_depth, "min_leaf_size": obj.min_leaf_size,
               "root": _node_payload(obj.root)}
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    doc["checksum"] = _checksum(doc)
    return doc


def from_document(doc) -> SvmModel | PartitionTree:
    if not isinstance(doc, dict):
        raise CorruptModel("model document is not a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(
            f"model format_version {version!r} is not supported (expected {FORMAT_VERSION})")
    if doc.get("checksum") != _checksum(doc):
        raise CorruptModel("model checksum does not match its contents")
    try:
        if doc["kind"] == "linear":
            return _model_from_payload(doc)
        if doc["kind"] == "tree":
            return PartitionTree(_node_from_payload(doc["root"]), int(doc["dim"]),
                                 int(doc["max_depth"]), int(doc["min_leaf_size"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"malformed model document: {exc}") from None
    raise CorruptModel(f"unknown model kind {doc.get('kind')!r}")


def save_model(obj, path) -> None:
    text = json.dumps(to_document(obj), indent=1, sort_keys=True) + "\n"
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write model {path}: {exc}") from None


def load_model(path) -> SvmModel | PartitionTree:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IoFailure(f"cannot read model {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"{path}: not a complete JSON document ({exc.msg})") from None
    return from_document(doc)
