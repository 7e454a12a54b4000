"""Hierarchical multi-label classification with a max-constraint output layer."""
from .constraint import mcloss, mcm_backward, mcm_forward, predict_labels, predict_masks
from .hierarchy import LabelHierarchy, build_from_edges, build_from_prefix_codes, load_hierarchy
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "LabelHierarchy",
    "build_from_edges",
    "build_from_prefix_codes",
    "load_hierarchy",
    "mcloss",
    "mcm_backward",
    "mcm_forward",
    "predict_labels",
    "predict_masks",
]

__version__ = "0.1.0"
