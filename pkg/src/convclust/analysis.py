"""Cluster evaluation: class composition, adjusted Rand index, synthetic data.

Composition reports answer "what fraction of each cluster carries which
class label" for labeled datasets; ARI scores partition agreement in a
relabeling-invariant, chance-corrected way; the synthetic generator
provides ground-truth partitions for validating the whole pipeline.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .points import PointMatrix, VECTOR

__all__ = [
    "ClusterStats",
    "ClusterReport",
    "SynthSpec",
    "composition",
    "ari",
    "synth_generate",
    "write_report_json",
]


@dataclass(frozen=True)
class ClusterStats:
    """Composition of one occupied cluster."""

    cluster_id: int
    size: int
    composition: dict
    dominant_class: str
    purity: float
    expected_weight: float | None = None
    patient_breakdown: dict | None = None


@dataclass(frozen=True)
class ClusterReport:
    """Per-cluster statistics over a labeled dataset."""

    clusters: tuple
    total_points: int
    alpha: float | None = None
    truncation: int | None = None


def composition(labels, meta):
    """Per-cluster class composition against dataset metadata.

    Alignment is positional: labels[i] describes meta.records[i]. Empty
    clusters are omitted. When any record carries a patient id, a
    per-cluster patient breakdown is included.

    Raises
    ------
    DataError
        If the label count differs from the record count.
    """
    labels = np.asarray(labels).astype(np.int64, casting="unsafe")
    if labels.ndim != 1 or len(labels) != len(meta):
        raise DataError(
            f"label count {labels.shape} does not match {len(meta)} metadata records"
        )
    has_patients = any(p is not None for p in meta.patient_ids)

    stats = []
    for cluster_id in np.unique(labels):
        member_rows = np.nonzero(labels == cluster_id)[0]
        size = len(member_rows)
        class_counts = {}
        patient_counts = {}
        for i in member_rows:
            _, class_label, patient = meta.records[i]
            class_counts[class_label] = class_counts.get(class_label, 0) + 1
            if patient is not None:
                patient_counts[patient] = patient_counts.get(patient, 0) + 1
        fractions = {c: count / size for c, count in sorted(class_counts.items())}
        # deterministic tie rule: highest fraction, lexicographically first label
        dominant = sorted(fractions, key=lambda c: (-fractions[c], c))[0]
        stats.append(
            ClusterStats(
                cluster_id=int(cluster_id),
                size=size,
                composition=fractions,
                dominant_class=dominant,
                purity=fractions[dominant],
                patient_breakdown=dict(sorted(patient_counts.items())) if has_patients else None,
            )
        )
    return ClusterReport(clusters=tuple(stats), total_points=len(labels))


def attach_model_info(report, model):
    """Fill expected weights and mixture config from a fitted model."""
    from .dpgmm import expected_weights

    weights = expected_weights(model)
    clusters = tuple(
        ClusterStats(
            cluster_id=c.cluster_id,
            size=c.size,
            composition=c.composition,
            dominant_class=c.dominant_class,
            purity=c.purity,
            expected_weight=(
                float(weights[c.cluster_id]) if c.cluster_id < len(weights) else None
            ),
            patient_breakdown=c.patient_breakdown,
        )
        for c in report.clusters
    )
    return ClusterReport(
        clusters=clusters,
        total_points=report.total_points,
        alpha=model.alpha,
        truncation=model.truncation,
    )


def write_report_json(report, path):
    """Serialize a ClusterReport to its JSON interchange form."""
    doc = {
        "clusters": [
            {
                "id": c.cluster_id,
                "size": c.size,
                "expected_weight": c.expected_weight,
                "composition": c.composition,
                "purity": c.purity,
                "dominant_class": c.dominant_class,
                **(
                    {"patient_breakdown": c.patient_breakdown}
                    if c.patient_breakdown is not None
                    else {}
                ),
            }
            for c in report.clusters
        ],
        "total_points": report.total_points,
        "alpha": report.alpha,
        "truncation": report.truncation,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _comb2(x):
    return x * (x - 1) // 2


def ari(a, b):
    """Adjusted Rand index between two partitions, in [-1, 1].

    Chance-corrected pair-counting agreement from the contingency table;
    invariant to relabeling of either argument. When the adjustment
    denominator vanishes (both partitions all-singletons or both a single
    cluster), the partitions are necessarily identical and the score is 1.

    Raises
    ------
    DataError
        On length mismatch or fewer than two points.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError(f"partition shapes {a.shape} and {b.shape} differ")
    n = len(a)
    if n < 2:
        raise DataError("ARI needs at least two points")

    _, a_ids = np.unique(a, return_inverse=True)
    _, b_ids = np.unique(b, return_inverse=True)
    table = {}
    for i, j in zip(a_ids.tolist(), b_ids.tolist()):
        table[(i, j)] = table.get((i, j), 0) + 1

    row_sums = {}
    col_sums = {}
    for (i, j), count in table.items():
        row_sums[i] = row_sums.get(i, 0) + count
        col_sums[j] = col_sums.get(j, 0) + count

    sum_cells = sum(_comb2(c) for c in table.values())
    sum_rows = sum(_comb2(c) for c in row_sums.values())
    sum_cols = sum(_comb2(c) for c in col_sums.values())
    pairs = _comb2(n)

    expected = sum_rows * sum_cols / pairs
    denom = 0.5 * (sum_rows + sum_cols) - expected
    if denom == 0.0:
        return 1.0 if np.array_equal(a_ids, b_ids) else 0.0
    return (sum_cells - expected) / denom


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic isotropic-Gaussian mixture."""

    k_true: int
    dim: int
    n_points: int
    separation: float
    sigma: float
    seed: int = 0

    def validate(self):
        if self.k_true < 1:
            raise DataError(f"k_true must be >= 1, got {self.k_true}")
        if self.dim < 1:
            raise DataError(f"dim must be >= 1, got {self.dim}")
        if self.n_points < self.k_true:
            raise DataError("n_points must be at least k_true")
        if self.sigma <= 0:
            raise DataError(f"sigma must be positive, got {self.sigma}")


def synth_means(spec):
    """Deterministic lattice of component means.

    Component k sits at separation * (1 + k // dim) along axis (k % dim),
    guaranteeing (not just probabilistically suggesting) the requested
    separation between means.
    """
    means = np.zeros((spec.k_true, spec.dim))
    for k in range(spec.k_true):
        means[k, k % spec.dim] = spec.separation * (1 + k // spec.dim)
    return means


def synth_generate(spec):
    """Draw a labeled sample from the synthetic mixture.

    Component sizes are as equal as possible (remainders go to the
    earliest components); points are drawn component by component from
    isotropic Gaussians with standard deviation sigma, and truth labels
    are returned in draw order. Deterministic for a fixed seed.

    Returns
    -------
    (PointMatrix, ndarray)
        Vector-mode points and the integer truth partition.
    """
    spec.validate()
    means = synth_means(spec)
    base, remainder = divmod(spec.n_points, spec.k_true)
    sizes = [base + (1 if k < remainder else 0) for k in range(spec.k_true)]

    rng = np.random.default_rng(spec.seed)
    blocks = []
    labels = []
    for k, size in enumerate(sizes):
        blocks.append(rng.normal(loc=means[k], scale=spec.sigma, size=(size, spec.dim)))
        labels.extend([k] * size)
    values = np.ascontiguousarray(np.vstack(blocks))
    pm = PointMatrix(values=values, mode=VECTOR, origin_shape=tuple(values.shape))
    return pm, np.asarray(labels, dtype=np.int64)
