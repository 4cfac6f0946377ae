"""Gray level co-occurrence matrix features.

One symmetric matrix is accumulated per angle at the configured distance,
normalised to probabilities, and features are averaged over the angles that
have at least one voxel pair. The maximal correlation coefficient is not
computed.
"""
from __future__ import annotations

import numpy as np

from ._base import DiscretizedRoi, ExtractionSettings, FeatureVector, plogp, strides

NAMES = (
    "Autocorrelation", "JointAverage", "ClusterProminence", "ClusterShade",
    "ClusterTendency", "Contrast", "Correlation", "DifferenceAverage",
    "DifferenceEntropy", "DifferenceVariance", "JointEnergy", "JointEntropy",
    "Imc1", "Imc2", "Idm", "Idmn", "Id", "Idn", "InverseVariance",
    "MaximumProbability", "SumAverage", "SumEntropy", "SumSquares",
)


def glcm_matrices(d: DiscretizedRoi, s: ExtractionSettings = ExtractionSettings()) -> np.ndarray:
    """Raw symmetric co-occurrence counts, shape ``(n_angles, Ng, Ng)``."""
    dist = int(s.glcm_distance)
    padded = d.padded(dist)
    flat = padded.ravel()
    idx = np.flatnonzero(flat)
    ng = d.n_levels
    out = np.zeros((len(s.angles), ng, ng))
    for a, step in enumerate(strides(padded.shape, np.asarray(s.angles) * dist)):
        nb = flat[idx + step]
        ok = nb > 0
        i = flat[idx[ok]] - 1
        j = nb[ok] - 1
        counts = np.bincount(i * ng + j, minlength=ng * ng).reshape(ng, ng)
        out[a] = counts + counts.T
    return out


def _features(p: np.ndarray) -> list[float]:
    ng = p.shape[0]
    lv = np.arange(1, ng + 1, dtype=np.float64)
    i = lv[:, None]
    j = lv[None, :]
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    ux = np.sum(p * i)
    uy = np.sum(p * j)
    sx = np.sqrt(np.sum(p * (i - ux) ** 2))
    sy = np.sqrt(np.sum(p * (j - uy) ** 2))

    k_sum = (i + j).astype(np.int64).ravel()
    p_sum = np.bincount(k_sum, weights=p.ravel(), minlength=2 * ng + 1)[2:]
    k_diff = np.abs(i - j).astype(np.int64).ravel()
    p_diff = np.bincount(k_diff, weights=p.ravel(), minlength=ng)
    ks = np.arange(2, 2 * ng + 1)
    kd = np.arange(ng)

    hx, hy, hxy = plogp(px), plogp(py), plogp(p.ravel())
    pxpy = px[:, None] * py[None, :]
    pos = p > 0
    hxy1 = float(-np.sum(p[pos] * np.log2(pxpy[pos])))
    hxy2 = plogp(pxpy.ravel())

    autocorr = np.sum(p * i * j)
    corr = (autocorr - ux * uy) / (sx * sy) if sx * sy > 0 else 0.0
    diff_avg = np.sum(kd * p_diff)
    hmax = max(hx, hy)
    return [
        autocorr,
        ux,
        np.sum(p * (i + j - ux - uy) ** 4),
        np.sum(p * (i + j - ux - uy) ** 3),
        np.sum(p * (i + j - ux - uy) ** 2),
        np.sum(p * (i - j) ** 2),
        corr,
        diff_avg,
        plogp(p_diff),
        np.sum(p_diff * (kd - diff_avg) ** 2),
        np.sum(p ** 2),
        hxy,
        (hxy - hxy1) / hmax if hmax > 0 else 0.0,
        np.sqrt(1.0 - np.exp(-2.0 * max(hxy2 - hxy, 0.0))),
        np.sum(p / (1.0 + (i - j) ** 2)),
        np.sum(p / (1.0 + (i - j) ** 2 / ng ** 2)),
        np.sum(p / (1.0 + np.abs(i - j))),
        np.sum(p / (1.0 + np.abs(i - j) / ng)),
        np.sum(p_diff[1:] / kd[1:] ** 2),
        p.max(),
        np.sum(ks * p_sum),
        plogp(p_sum),
        np.sum(p * (i - ux) ** 2),
    ]


def glcm_features(d: DiscretizedRoi, s: ExtractionSettings = ExtractionSettings()) -> FeatureVector:
    """Angle-averaged GLCM features.

    An ROI with no voxel pair in any direction yields 0 for every feature.
    """
    mats = glcm_matrices(d, s)
    totals = mats.sum(axis=(1, 2))
    rows = [_features(m / t) for m, t in zip(mats, totals) if t > 0]
    values = np.mean(rows, axis=0) if rows else np.zeros(len(NAMES))
    return {f"glcm_{k}": float(v) for k, v in zip(NAMES, values)}
