"""First-order intensity statistics over an ROI."""
from __future__ import annotations

import numpy as np

from ..volume_io import Mask, Volume
from ._base import ExtractionSettings, FeatureVector, discretize, plogp, roi_values

NAMES = (
    "Energy", "TotalEnergy", "Entropy", "Minimum", "Maximum", "Range", "Mean",
    "Median", "10Percentile", "90Percentile", "InterquartileRange", "Variance",
    "StandardDeviation", "Skewness", "Kurtosis", "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation", "RootMeanSquared", "Uniformity",
)


def first_order_features(v: Volume, roi: Mask,
                         s: ExtractionSettings = ExtractionSettings()) -> FeatureVector:
    """Intensity statistics of the voxels inside ``roi``.

    Variance is the population variance and kurtosis is not excess-corrected.
    Entropy and uniformity use the discretised histogram. Skewness and
    kurtosis of a flat ROI are reported as 0.
    """
    x = roi_values(v, roi)
    n = x.size
    if x.min() == x.max():
        # Flat ROI: keep the closed forms exact (mean c, energy N c^2).
        mean = x[0]
        energy = float(n * (mean * mean))
    else:
        mean = x.mean()
        energy = float(np.sum(x ** 2))
    dev = x - mean
    m2 = np.mean(dev ** 2)
    p10, p25, p50, p75, p90 = np.percentile(x, [10, 25, 50, 75, 90])
    robust = x[(x >= p10) & (x <= p90)]

    levels = discretize(v, roi, s).levels
    hist = np.bincount(levels)[1:] / n

    if m2 > 0:
        skew = np.mean(dev ** 3) / m2 ** 1.5
        kurt = np.mean(dev ** 4) / m2 ** 2
    else:
        skew = kurt = 0.0
    values = (
        energy,
        energy * roi.geometry.voxel_volume,
        plogp(hist),
        x.min(),
        x.max(),
        x.max() - x.min(),
        mean,
        p50,
        p10,
        p90,
        p75 - p25,
        m2,
        np.sqrt(m2),
        skew,
        kurt,
        np.mean(np.abs(dev)),
        np.mean(np.abs(robust - robust.mean())),
        np.sqrt(energy / n),
        float(np.sum(hist ** 2)),
    )
    return {f"firstorder_{k}": float(val) for k, val in zip(NAMES, values)}
