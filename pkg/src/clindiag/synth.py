"""Seeded synthetic two-class cohorts standing in for real clinical data."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .encoding import EncodingSchema, FeatureSpec, LabelRule, save_schema
from .errors import IoFailure

PATIENT = "patient"
NORMAL = "normal"
LABEL_COLUMN = "diagnosis"


def feature_names(dims: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dims)]


def synth_schema(dims: int) -> EncodingSchema:
    return EncodingSchema(tuple(FeatureSpec(n) for n in feature_names(dims)),
                          LabelRule(LABEL_COLUMN, PATIENT, NORMAL))


def generate(n_per_class: int, dims: int = 5, separation: float = 6.0,
             overlap: float = 0.0, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Two unit-variance Gaussian clusters centred at +-(separation/2) * u.

    ``u`` is a random unit vector. In each class, round(overlap * n) points
    are drawn from the opposite cluster while keeping their own label. Rows
    come back shuffled. Everything derives from ``seed``.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if not separation > 0:
        raise ValueError("separation must be positive")
    if not 0.0 <= overlap <= 1.0:
        raise ValueError("overlap must lie in [0, 1]")
    ss = np.random.SeedSequence(seed)
    rng_dir, rng_pos, rng_neg, rng_mix, rng_order = (np.random.default_rng(s)
                                                     for s in ss.spawn(5))
    u = rng_dir.standard_normal(dims)
    u /= np.linalg.norm(u)
    centre = (separation / 2.0) * u
    pos = centre + rng_pos.standard_normal((n_per_class, dims))
    neg = -centre + rng_neg.standard_normal((n_per_class, dims))
    k = int(round(overlap * n_per_class))
    if k:
        # a swapped point is re-centred on the other cluster, keeping its noise
        swap_pos = rng_mix.choice(n_per_class, size=k, replace=False)
        swap_neg = rng_mix.choice(n_per_class, size=k, replace=False)
        pos[swap_pos] -= 2 * centre
        neg[swap_neg] += 2 * centre
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(n_per_class, dtype=np.int64),
                        -np.ones(n_per_class, dtype=np.int64)])
    order = rng_order.permutation(2 * n_per_class)
    return X[order], y[order]


def write_cohort_csv(X, y, path) -> None:
    names = feature_names(np.shape(X)[1])
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*names, LABEL_COLUMN])
            for row, label in zip(X, y):
                w.writerow([repr(float(v)) for v in row] + [PATIENT if label > 0 else NORMAL])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from None


def write_cohort(path, n_per_class, dims=5, separation=6.0, overlap=0.0, seed=0,
                 schema_path=None) -> None:
    X, y = generate(n_per_class, dims, separation, overlap, seed)
    write_cohort_csv(X, y, path)
    if schema_path is not None:
        save_schema(synth_schema(dims), Path(schema_path))
