"""Neighbouring gray tone difference matrix features."""
from __future__ import annotations

import numpy as np

from ._base import NEIGHBOURS, NGTDM_COARSENESS_CAP, DiscretizedRoi, FeatureVector, strides

NAMES = ("Coarseness", "Contrast", "Busyness", "Complexity", "Strength")


def ngtdm_vectors(d: DiscretizedRoi) -> tuple[np.ndarray, np.ndarray]:
    """Per-level voxel counts ``n`` and summed tone differences ``s``.

    Only voxels with at least one 26-neighbour in the ROI contribute.
    """
    padded = d.padded(1)
    flat = padded.ravel()
    idx = np.flatnonzero(flat)
    lev = flat[idx]
    total = np.zeros(len(idx))
    count = np.zeros(len(idx))
    for step in strides(padded.shape, NEIGHBOURS):
        nb = flat[idx + step]
        total += nb
        count += nb > 0
    has = count > 0
    diff = np.abs(lev[has] - total[has] / count[has])
    ng = d.n_levels
    n = np.bincount(lev[has] - 1, minlength=ng).astype(np.float64)
    s = np.bincount(lev[has] - 1, weights=diff, minlength=ng)
    return n, s


def ngtdm_features(d: DiscretizedRoi) -> FeatureVector:
    """Coarseness, contrast, busyness, complexity and strength.

    Degenerate cases: coarseness is capped at 1e6 when no tone difference
    exists; the other features fall back to 0 when their denominators vanish.
    """
    n, s = ngtdm_vectors(d)
    nvp = n.sum()
    if nvp == 0:
        values = (NGTDM_COARSENESS_CAP, 0.0, 0.0, 0.0, 0.0)
        return {f"ngtdm_{k}": float(v) for k, v in zip(NAMES, values)}
    valid = n > 0
    p = n[valid] / nvp
    s = s[valid]
    i = np.flatnonzero(valid).astype(np.float64) + 1
    ngp = len(i)
    ps = p * s
    di = i[:, None] - i[None, :]

    denom = np.sum(ps)
    coarseness = 1.0 / denom if denom != 0 else NGTDM_COARSENESS_CAP
    if ngp > 1:
        contrast = np.sum(p[:, None] * p[None, :] * di ** 2) / (ngp * (ngp - 1)) * s.sum() / nvp
    else:
        contrast = 0.0
    ip = i * p
    bden = np.sum(np.abs(ip[:, None] - ip[None, :]))
    busyness = denom / bden if bden != 0 else 0.0
    complexity = np.sum(np.abs(di) * (ps[:, None] + ps[None, :]) / (p[:, None] + p[None, :])) / nvp
    ssum = s.sum()
    strength = np.sum((p[:, None] + p[None, :]) * di ** 2) / ssum if ssum != 0 else 0.0
    values = (coarseness, contrast, busyness, complexity, strength)
    return {f"ngtdm_{k}": float(v) for k, v in zip(NAMES, values)}
