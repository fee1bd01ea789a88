"""Unsupervised analysis of convnet layer representations.

Feature tensors in, cluster models, colored label maps, input-space
cluster centers, and class-composition reports out. The clustering core
is a truncated stick-breaking variational Dirichlet process mixture of
diagonal Gaussians; :class:`DirichletProcessGMM` exposes it with the
scikit-learn estimator API, and :mod:`convclust.cli` wires the full
pipeline end to end.
"""

from .analysis import ClusterReport, SynthSpec, ari, composition, synth_generate
from .dpgmm import (
    DpgmmConfig,
    DpgmmModel,
    FitResult,
    Priors,
    effective_components,
    expected_weights,
    load_model,
    save_model,
)
from .errors import DataError, MetadataError, NpyFormatError, NumericalError
from .estimator import DirichletProcessGMM, RangeScaler
from .labelmap import LabelMap, Palette, cluster_centers, make_palette, render, write_ppm
from .points import (
    PointMatrix,
    ScaleRecord,
    as_vector_points,
    flatten_spatial,
    scale_to_range,
    unflatten_labels,
)
from .tensor_io import DatasetMeta, load_meta, load_npy, save_npy

__version__ = "0.1.0"

__all__ = [
    "ClusterReport",
    "SynthSpec",
    "ari",
    "composition",
    "synth_generate",
    "DpgmmConfig",
    "DpgmmModel",
    "FitResult",
    "Priors",
    "effective_components",
    "expected_weights",
    "load_model",
    "save_model",
    "DataError",
    "MetadataError",
    "NpyFormatError",
    "NumericalError",
    "DirichletProcessGMM",
    "RangeScaler",
    "LabelMap",
    "Palette",
    "cluster_centers",
    "make_palette",
    "render",
    "write_ppm",
    "PointMatrix",
    "ScaleRecord",
    "as_vector_points",
    "flatten_spatial",
    "scale_to_range",
    "unflatten_labels",
    "DatasetMeta",
    "load_meta",
    "load_npy",
    "save_npy",
    "__version__",
]
