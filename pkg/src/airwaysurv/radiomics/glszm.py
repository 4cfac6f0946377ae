"""Gray level size zone matrix features (26-connected zones)."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from ._base import DiscretizedRoi, FeatureVector, emphasis_stats

NAMES = (
    ("SmallAreaEmphasis", "small"),
    ("LargeAreaEmphasis", "large"),
    ("GrayLevelNonUniformity", "gln"),
    ("GrayLevelNonUniformityNormalized", "glnn"),
    ("SizeZoneNonUniformity", "sn"),
    ("SizeZoneNonUniformityNormalized", "snn"),
    ("ZonePercentage", None),
    ("GrayLevelVariance", "glv"),
    ("ZoneVariance", "sv"),
    ("ZoneEntropy", "entropy"),
    ("LowGrayLevelZoneEmphasis", "lgle"),
    ("HighGrayLevelZoneEmphasis", "hgle"),
    ("SmallAreaLowGrayLevelEmphasis", "slgle"),
    ("SmallAreaHighGrayLevelEmphasis", "shgle"),
    ("LargeAreaLowGrayLevelEmphasis", "llgle"),
    ("LargeAreaHighGrayLevelEmphasis", "lhgle"),
)

_CONN26 = np.ones((3, 3, 3), dtype=bool)


def glszm_matrix(d: DiscretizedRoi) -> np.ndarray:
    """``(Ng, max_zone)`` counts of 26-connected equal-level zones."""
    levels, sizes = [], []
    for lv in np.unique(d.levels):
        lab, n = ndimage.label(d.grid == lv, structure=_CONN26)
        zone = np.bincount(lab.ravel())[1:]
        levels.append(np.full(n, lv))
        sizes.append(zone)
    levels = np.concatenate(levels)
    sizes = np.concatenate(sizes)
    P = np.zeros((d.n_levels, int(sizes.max())))
    np.add.at(P, (levels - 1, sizes - 1), 1)
    return P


def glszm_features(d: DiscretizedRoi) -> FeatureVector:
    st = emphasis_stats(glszm_matrix(d))
    st[None] = st["count"] / np.count_nonzero(d.grid)
    return {f"glszm_{name}": float(st[key]) for name, key in NAMES}
