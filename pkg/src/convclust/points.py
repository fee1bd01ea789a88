"""Tensor-to-point-matrix conversion, value scaling, and label reshaping.

A rank-4 activation tensor ``(n, c, h, w)`` becomes one point per feature-map
pixel (``n*h*w`` points of dimension ``c``); a rank-2 tensor ``(n, d)``
becomes one point per image. Row ordering is image-major then row-major over
pixels: row ``p = (i*h + r)*w + q``, which makes label maps reproducible
byte-for-byte and lets the pixel lattice be reconstructed from the row index
alone.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError
from .labelmap import LabelMap

__all__ = [
    "ScaleRecord",
    "PointMatrix",
    "flatten_spatial",
    "as_vector_points",
    "scale_to_range",
    "unflatten_labels",
]

SPATIAL = "spatial"
VECTOR = "vector"


@dataclass(frozen=True)
class ScaleRecord:
    """Affine scaling applied to a point matrix: [src_min, src_max] -> [lo, hi]."""

    src_min: float
    src_max: float
    lo: float
    hi: float
    degenerate: bool = False


@dataclass(frozen=True)
class PointMatrix:
    """Rows-as-points view of a feature tensor with provenance.

    values is an (n_points, dim) float64 matrix. mode is "spatial" (one
    point per feature-map pixel) or "vector" (one point per image).
    origin_shape is the source tensor shape, scale the applied
    ScaleRecord, if any.
    """

    values: np.ndarray
    mode: str
    origin_shape: tuple
    scale: ScaleRecord | None = None

    @property
    def n_points(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]


def flatten_spatial(tensor):
    """Reshape an (n, c, h, w) tensor into an (n*h*w, c) point matrix.

    Row p = (i*h + r)*w + q holds the c channel values of pixel (r, q) of
    image i.
    """
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 4:
        raise DataError(f"flatten_spatial expects a rank-4 tensor, got rank {tensor.ndim}")
    n, c, h, w = tensor.shape
    values = np.ascontiguousarray(tensor.transpose(0, 2, 3, 1).reshape(n * h * w, c))
    return PointMatrix(values=values, mode=SPATIAL, origin_shape=tuple(tensor.shape))


def as_vector_points(tensor):
    """View an (n, d) tensor as n points of dimension d."""
    tensor = np.asarray(tensor, dtype=np.float64)
    if tensor.ndim != 2:
        raise DataError(f"as_vector_points expects a rank-2 tensor, got rank {tensor.ndim}")
    values = np.ascontiguousarray(tensor)
    return PointMatrix(values=values, mode=VECTOR, origin_shape=tuple(tensor.shape))


def scale_to_range(pm, lo=0.0, hi=10.0, per_feature=False):
    """Affinely map all entries onto [lo, hi] and attach the scale record.

    The min and max are taken globally over every entry (the default) so
    relative channel magnitudes are preserved; ``per_feature=True`` scales
    each column independently instead (experimentation escape hatch; the
    attached record then stores the global extrema for provenance only).

    A constant input cannot be spread over the range: all outputs become
    ``lo`` and the record's degenerate flag is set, because all-zero
    feature maps legitimately occur downstream of relu layers.

    Raises
    ------
    DataError
        If the matrix is already scaled or hi <= lo.
    """
    if pm.scale is not None:
        raise DataError("point matrix is already scaled")
    if not hi > lo:
        raise DataError(f"invalid range: hi={hi} must exceed lo={lo}")

    values = pm.values
    src_min = float(values.min())
    src_max = float(values.max())

    if per_feature:
        col_min = values.min(axis=0, keepdims=True)
        col_max = values.max(axis=0, keepdims=True)
        span = col_max - col_min
        degenerate = bool(np.all(span == 0.0))
        with np.errstate(invalid="ignore", divide="ignore"):
            scaled = lo + (values - col_min) / span * (hi - lo)
        scaled = np.where(span == 0.0, lo, scaled)
    elif src_max == src_min:
        degenerate = True
        scaled = np.full_like(values, lo)
    else:
        degenerate = False
        scaled = lo + (values - src_min) / (src_max - src_min) * (hi - lo)

    record = ScaleRecord(
        src_min=src_min, src_max=src_max, lo=float(lo), hi=float(hi), degenerate=degenerate
    )
    return replace(pm, values=scaled, scale=record)


def unflatten_labels(pm, labels):
    """Reshape per-point cluster ids of a spatial matrix back into h x w grids.

    Returns one LabelMap per source image, grid[r][q] = labels[(i*h + r)*w + q].
    """
    if pm.mode != SPATIAL:
        raise DataError("unflatten_labels requires a spatial-mode point matrix")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != pm.n_points:
        raise DataError(
            f"label count {labels.shape} does not match n_points {pm.n_points}"
        )
    n, _, h, w = pm.origin_shape
    grids = labels.astype(np.int64).reshape(n, h, w)
    return [
        LabelMap(image_index=i, labels=np.ascontiguousarray(grids[i]))
        for i in range(n)
    ]
