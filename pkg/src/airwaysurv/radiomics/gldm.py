"""Gray level dependence matrix features."""
from __future__ import annotations

import numpy as np

from ._base import NEIGHBOURS, DiscretizedRoi, ExtractionSettings, FeatureVector, emphasis_stats, strides

NAMES = (
    ("SmallDependenceEmphasis", "small"),
    ("LargeDependenceEmphasis", "large"),
    ("GrayLevelNonUniformity", "gln"),
    ("DependenceNonUniformity", "sn"),
    ("DependenceNonUniformityNormalized", "snn"),
    ("GrayLevelVariance", "glv"),
    ("DependenceVariance", "sv"),
    ("DependenceEntropy", "entropy"),
    ("LowGrayLevelEmphasis", "lgle"),
    ("HighGrayLevelEmphasis", "hgle"),
    ("SmallDependenceLowGrayLevelEmphasis", "slgle"),
    ("SmallDependenceHighGrayLevelEmphasis", "shgle"),
    ("LargeDependenceLowGrayLevelEmphasis", "llgle"),
    ("LargeDependenceHighGrayLevelEmphasis", "lhgle"),
)


def dependence_counts(d: DiscretizedRoi, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """Level and dependence count (0..26) of every ROI voxel."""
    padded = d.padded(1)
    flat = padded.ravel()
    idx = np.flatnonzero(flat)
    lev = flat[idx]
    dep = np.zeros(len(idx), dtype=np.int64)
    for step in strides(padded.shape, NEIGHBOURS):
        nb = flat[idx + step]
        dep += (nb > 0) & (np.abs(nb - lev) <= alpha)
    return lev, dep


def gldm_matrix(d: DiscretizedRoi, s: ExtractionSettings = ExtractionSettings()) -> np.ndarray:
    """``(Ng, 27)`` counts; column ``k`` holds voxels with dependence ``k``."""
    lev, dep = dependence_counts(d, s.gldm_alpha)
    P = np.zeros((d.n_levels, len(NEIGHBOURS) + 1))
    np.add.at(P, (lev - 1, dep), 1)
    return P


def gldm_features(d: DiscretizedRoi, s: ExtractionSettings = ExtractionSettings()) -> FeatureVector:
    st = emphasis_stats(gldm_matrix(d, s))
    return {f"gldm_{name}": float(st[key]) for name, key in NAMES}
