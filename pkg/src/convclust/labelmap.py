"""Label-map coloring, rendering, and cluster-center projection.

Cluster ids become colors through a golden-angle palette (hue stepped by
137.508 degrees), which keeps up to dozens of clusters visually distinct
and order-stable without a stored table. The most populous cluster is
treated as background by default and rendered gray; the remaining
clusters' pixel centroids can be projected back to input-image
coordinates through the layer's cumulative subsample factor.
"""

import colorsys
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError

__all__ = [
    "LabelMap",
    "Palette",
    "ClusterCenter",
    "palette_color",
    "make_palette",
    "select_background",
    "render",
    "write_ppm",
    "cluster_centers",
    "write_centers_csv",
]

GOLDEN_ANGLE = 137.508
BACKGROUND_COLOR = (128, 128, 128)


@dataclass(frozen=True)
class LabelMap:
    """Integer grid of cluster ids for one image's feature map."""

    image_index: int
    labels: np.ndarray
    background_id: int | None = None

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def with_background(self, background_id):
        return replace(self, background_id=background_id)


@dataclass(frozen=True)
class Palette:
    """One RGB triple per cluster id plus the background color."""

    colors: tuple
    background_color: tuple = BACKGROUND_COLOR


@dataclass(frozen=True)
class ClusterCenter:
    """Centroid of one non-background cluster, in input-image coordinates."""

    cluster_id: int
    image_index: int
    input_row: float
    input_col: float


def palette_color(k):
    """Deterministic RGB triple for cluster id k.

    Hue walks the golden angle, (k * 137.508) mod 360, at saturation 0.75
    and value 0.95; the standard HSV->RGB conversion is rounded to
    integers in [0, 255]. Bit-stable across runs.
    """
    if k < 0:
        raise ValueError(f"cluster id must be non-negative, got {k}")
    hue = (k * GOLDEN_ANGLE) % 360.0
    r, g, b = colorsys.hsv_to_rgb(hue / 360.0, 0.75, 0.95)
    return (round(r * 255.0), round(g * 255.0), round(b * 255.0))


def make_palette(n_colors):
    """Palette covering cluster ids 0..n_colors-1."""
    return Palette(colors=tuple(palette_color(k) for k in range(n_colors)))


def select_background(label_map):
    """Id with the largest pixel count in the grid; ties go to the lowest id.

    The dominant cluster is usually the image background; callers may
    override the choice.
    """
    labels = label_map.labels
    if labels.size == 0:
        raise DataError("cannot select a background cluster from an empty grid")
    counts = np.bincount(labels.ravel())
    return int(np.argmax(counts))


def render(label_map, palette):
    """Color the grid: pixel (r, q) takes the palette color of its id.

    Pixels of the designated background id take the palette's background
    color instead.
    """
    labels = label_map.labels
    max_id = int(labels.max(initial=0))
    if max_id >= len(palette.colors):
        raise DataError(
            f"palette has {len(palette.colors)} colors but grid holds id {max_id}"
        )
    table = np.asarray(palette.colors, dtype=np.uint8)
    img = table[labels]
    if label_map.background_id is not None:
        img[labels == label_map.background_id] = np.asarray(
            palette.background_color, dtype=np.uint8
        )
    return img


def write_ppm(image, path):
    """Write an (h, w, 3) uint8 image as binary PPM (P6), bit-exact.

    Layout: ASCII ``P6\\n<width> <height>\\n255\\n`` followed by h*w*3
    row-major RGB bytes.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3 or image.shape[0] == 0 or image.shape[1] == 0:
        raise DataError(f"invalid image shape {image.shape} for PPM output")
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes(order="C"))


def cluster_centers(label_map, subsample_factor):
    """Project each non-background cluster's pixel centroid into input space.

    The centroid (mean row, mean col) of the pixels carrying an id is
    mapped through ``s * (coord + 0.5)`` — pixel centers, not corners, so
    centers sit unbiased on the receptive-field grid. ``subsample_factor``
    is the cumulative downsampling between input image and this feature
    map (e.g. 8 after three 2x poolings).

    Returns one ClusterCenter per non-background id present, ordered by id.
    """
    if subsample_factor < 1:
        raise DataError(f"subsample factor must be >= 1, got {subsample_factor}")
    labels = label_map.labels
    background = label_map.background_id
    ids = np.unique(labels)
    centers = []
    for k in ids:
        if background is not None and k == background:
            continue
        rows, cols = np.nonzero(labels == k)
        centers.append(
            ClusterCenter(
                cluster_id=int(k),
                image_index=label_map.image_index,
                input_row=float(subsample_factor * (rows.mean() + 0.5)),
                input_col=float(subsample_factor * (cols.mean() + 0.5)),
            )
        )
    if not centers:
        raise DataError("no foreground clusters: every pixel carries the background id")
    return centers


def write_centers_csv(centers, path):
    """Emit centers as CSV rows image_index,cluster_id,input_row,input_col."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("image_index,cluster_id,input_row,input_col\n")
        for c in centers:
            fh.write(f"{c.image_index},{c.cluster_id},{c.input_row!r},{c.input_col!r}\n")
