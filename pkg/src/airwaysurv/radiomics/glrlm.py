"""Gray level run length matrix features, averaged over the 13 directions."""
from __future__ import annotations

import numpy as np

from ._base import DiscretizedRoi, ExtractionSettings, FeatureVector, emphasis_stats, strides

NAMES = (
    ("ShortRunEmphasis", "small"),
    ("LongRunEmphasis", "large"),
    ("GrayLevelNonUniformity", "gln"),
    ("GrayLevelNonUniformityNormalized", "glnn"),
    ("RunLengthNonUniformity", "sn"),
    ("RunLengthNonUniformityNormalized", "snn"),
    ("RunPercentage", None),
    ("GrayLevelVariance", "glv"),
    ("RunVariance", "sv"),
    ("RunEntropy", "entropy"),
    ("LowGrayLevelRunEmphasis", "lgle"),
    ("HighGrayLevelRunEmphasis", "hgle"),
    ("ShortRunLowGrayLevelEmphasis", "slgle"),
    ("ShortRunHighGrayLevelEmphasis", "shgle"),
    ("LongRunLowGrayLevelEmphasis", "llgle"),
    ("LongRunHighGrayLevelEmphasis", "lhgle"),
)


def glrlm_matrices(d: DiscretizedRoi, s: ExtractionSettings = ExtractionSettings()) -> list[np.ndarray]:
    """One ``(Ng, max_run)`` count matrix per angle.

    Runs are maximal chains of equal-level ROI voxels along a direction.
    Working on the zero-padded flat array, every direction is a constant
    positive stride, and no chain can wrap across the padding.
    """
    padded = d.padded(1)
    flat = padded.ravel()
    idx = np.flatnonzero(flat)
    lev = flat[idx]
    ng = d.n_levels
    max_run = max(d.grid.shape)
    mats = []
    for step in strides(padded.shape, s.angles):
        step = int(step)
        starts = idx[flat[idx - step] != lev]
        ends = idx[flat[idx + step] != lev]
        starts = starts[np.lexsort((starts, starts % step))]
        ends = ends[np.lexsort((ends, ends % step))]
        length = (ends - starts) // step + 1
        P = np.zeros((ng, max_run))
        np.add.at(P, (flat[starts] - 1, length - 1), 1)
        mats.append(P)
    return mats


def glrlm_features(d: DiscretizedRoi, s: ExtractionSettings = ExtractionSettings()) -> FeatureVector:
    n_vox = int(np.count_nonzero(d.grid))
    rows = []
    for P in glrlm_matrices(d, s):
        st = emphasis_stats(P)
        st[None] = st["count"] / n_vox
        rows.append([st[key] for _, key in NAMES])
    values = np.mean(rows, axis=0)
    return {f"glrlm_{name}": float(v) for (name, _), v in zip(NAMES, values)}
