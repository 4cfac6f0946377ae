"""Radiomic feature families computed on a CT volume within an ROI mask."""
from __future__ import annotations

from ._base import (
    ANGLES,
    NGTDM_COARSENESS_CAP,
    DiscretizedRoi,
    ExtractionSettings,
    FeatureVector,
    discretize,
)
from .firstorder import first_order_features
from .glcm import glcm_features, glcm_matrices
from .gldm import gldm_features, gldm_matrix
from .glrlm import glrlm_features, glrlm_matrices
from .glszm import glszm_features, glszm_matrix
from .ngtdm import ngtdm_features, ngtdm_vectors
from .shape import shape3d_features

__all__ = [
    "ANGLES",
    "NGTDM_COARSENESS_CAP",
    "DiscretizedRoi",
    "ExtractionSettings",
    "FeatureVector",
    "discretize",
    "first_order_features",
    "glcm_features",
    "glcm_matrices",
    "glrlm_features",
    "glrlm_matrices",
    "glszm_features",
    "glszm_matrix",
    "gldm_features",
    "gldm_matrix",
    "ngtdm_features",
    "ngtdm_vectors",
    "shape3d_features",
    "extract_all",
    "FAMILIES",
]

FAMILIES = ("firstorder", "glcm", "glrlm", "glszm", "gldm", "ngtdm", "shape")


def extract_all(v, roi, s: ExtractionSettings = ExtractionSettings()) -> FeatureVector:
    """All seven families, family-prefixed, in a fixed order."""
    d = discretize(v, roi, s)
    out: FeatureVector = {}
    out.update(first_order_features(v, roi, s))
    out.update(glcm_features(d, s))
    out.update(glrlm_features(d, s))
    out.update(glszm_features(d))
    out.update(gldm_features(d, s))
    out.update(ngtdm_features(d))
    out.update(shape3d_features(roi))
    return out
