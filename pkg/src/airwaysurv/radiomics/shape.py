"""3D shape descriptors of a binary ROI.

Surface area counts exposed voxel faces, so the enclosed mesh volume equals
the voxel volume and sphericity is lower than with a smoothed mesh.
Axis lengths come from the population covariance of the world-space voxel
centres: ``4 * sqrt(eigenvalue)``.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist, pdist

from ..errors import EmptyRoiError
from ..morphology import bounding_box_slices
from ..volume_io import Mask
from ._base import FeatureVector

NAMES = (
    "MeshVolume", "VoxelVolume", "SurfaceArea", "SurfaceVolumeRatio", "Sphericity",
    "Maximum3DDiameter", "MajorAxisLength", "MinorAxisLength", "LeastAxisLength",
    "Elongation", "Flatness",
)

_BRUTE_FORCE_LIMIT = 3000


def voxel_face_area(roi: np.ndarray, spacing) -> float:
    """Area of voxel faces separating the ROI from background."""
    sx, sy, sz = spacing
    face = (sy * sz, sx * sz, sx * sy)
    padded = np.pad(roi, 1).astype(np.int8)
    area = 0.0
    for axis in range(3):
        exposed = np.count_nonzero(np.diff(padded, axis=axis))
        area += exposed * face[axis]
    return area


def _surface_points(roi: np.ndarray) -> np.ndarray:
    """Indices of ROI voxels with at least one face neighbour outside."""
    padded = np.pad(roi, 1)
    inner = padded[1:-1, 1:-1, 1:-1].copy()
    for axis in range(3):
        for shift in (-1, 1):
            inner &= np.roll(padded, shift, axis=axis)[1:-1, 1:-1, 1:-1]
    return np.argwhere(roi & ~inner)


def max_diameter(points: np.ndarray) -> float:
    """Largest pairwise distance, via the convex hull when the set is large."""
    if len(points) < 2:
        return 0.0
    if len(points) <= _BRUTE_FORCE_LIMIT:
        return float(pdist(points).max())
    centred = points - points.mean(axis=0)
    _, sv, vt = np.linalg.svd(centred, full_matrices=False)
    rank = int(np.sum(sv > 1e-9 * sv[0]))
    if rank == 1:
        t = centred @ vt[0]
        return float(t.max() - t.min())
    proj = centred if rank == 3 else centred @ vt[:2].T
    try:
        hull = ConvexHull(proj)
    except QhullError:
        return max(float(cdist(points[k:k + 1024], points).max())
                   for k in range(0, len(points), 1024))
    return float(pdist(points[hull.vertices]).max())


def shape3d_features(roi: Mask) -> FeatureVector:
    if not roi.voxels.any():
        raise EmptyRoiError("ROI is empty")
    g = roi.geometry
    sl = bounding_box_slices(roi)
    crop = roi.voxels[sl]
    offset = np.array([s.start for s in sl])

    n = int(np.count_nonzero(crop))
    volume = n * g.voxel_volume
    area = voxel_face_area(crop, g.spacing)

    coords = g.to_world(np.argwhere(crop) + offset)
    cov = np.cov(coords, rowvar=False, ddof=0) if n > 1 else np.zeros((3, 3))
    eig = np.clip(np.linalg.eigvalsh(cov), 0.0, None)  # ascending
    least, minor, major = eig
    surface = g.to_world(_surface_points(crop) + offset)

    values = (
        volume,
        volume,
        area,
        area / volume,
        (36.0 * np.pi * volume ** 2) ** (1.0 / 3.0) / area,
        max_diameter(surface),
        4.0 * np.sqrt(major),
        4.0 * np.sqrt(minor),
        4.0 * np.sqrt(least),
        np.sqrt(minor / major) if major > 0 else 0.0,
        np.sqrt(least / major) if major > 0 else 0.0,
    )
    return {f"shape_{k}": float(v) for k, v in zip(NAMES, values)}
