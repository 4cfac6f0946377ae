from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from ..errors import EmptyRoiError, GeometryError
from ..morphology import bounding_box_slices
from ..volume_io import Geometry, Mask, Volume, check_same_geometry

# 13 unique directions of the 26-neighbourhood (first non-zero component > 0).
ANGLES = tuple(o for o in product((-1, 0, 1), repeat=3) if o > (0, 0, 0))
NEIGHBOURS = tuple(o for o in product((-1, 0, 1), repeat=3) if o != (0, 0, 0))

# Sentinel used where a feature is undefined on a degenerate ROI.
NGTDM_COARSENESS_CAP = 1e6

FeatureVector = dict


@dataclass(frozen=True)
class ExtractionSettings:
    """Discretisation and texture parameters.

    ``bin_width`` is in HU. Texture matrices are built per direction over the
    13 unique 3D angles and features are averaged across angles.
    """

    bin_width: float = 25.0
    glcm_distance: int = 1
    gldm_alpha: int = 0
    angles: tuple = ANGLES
    aggregate: str = "mean"

    def __post_init__(self):
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if int(self.glcm_distance) != self.glcm_distance or self.glcm_distance < 1:
            raise ValueError("glcm_distance must be a positive integer")
        if self.gldm_alpha < 0:
            raise ValueError("gldm_alpha must be non-negative")
        if set(self.angles) != set(ANGLES) or len(self.angles) != 13:
            raise ValueError("angles must be the 13 unique 3D neighbour directions")
        if self.aggregate != "mean":
            raise ValueError("only mean-over-angles aggregation is supported")


@dataclass(frozen=True)
class DiscretizedRoi:
    """Gray levels of an ROI, cropped to its bounding box.

    ``grid`` holds levels ``1..n_levels`` inside the ROI and 0 elsewhere;
    ``offset`` is the index of ``grid[0, 0, 0]`` in the source volume.
    """

    grid: np.ndarray
    n_levels: int
    roi: Mask
    source_geometry: Geometry
    offset: tuple

    @property
    def levels(self) -> np.ndarray:
        """Levels of ROI voxels in raster order."""
        return self.grid[self.grid > 0]

    def padded(self, width: int = 1) -> np.ndarray:
        return np.pad(self.grid, width)


def check_pair(v: Volume, roi: Mask) -> None:
    if not check_same_geometry(v.geometry, roi.geometry):
        raise GeometryError(f"volume {v.geometry.dims} and ROI {roi.geometry.dims} grids differ")
    if not roi.voxels.any():
        raise EmptyRoiError("ROI is empty")


def roi_values(v: Volume, roi: Mask) -> np.ndarray:
    check_pair(v, roi)
    return v.voxels[roi.voxels]


def discretize(v: Volume, roi: Mask, s: ExtractionSettings = ExtractionSettings()) -> DiscretizedRoi:
    """Fixed-bin-width discretisation anchored at the ROI minimum.

    ``level = floor((x - min_roi) / bin_width) + 1``.
    """
    check_pair(v, roi)
    sl = bounding_box_slices(roi)
    inside = roi.voxels[sl]
    vals = v.voxels[sl]
    vmin = vals[inside].min()
    levels = np.floor((vals - vmin) / s.bin_width).astype(np.int64) + 1
    grid = np.where(inside, levels, 0)
    return DiscretizedRoi(
        grid=grid,
        n_levels=int(grid.max()),
        roi=roi,
        source_geometry=v.geometry,
        offset=tuple(x.start for x in sl),
    )


def strides(shape, offsets) -> np.ndarray:
    """Flat-index displacement of each offset in a C-ordered array."""
    mult = np.array([shape[1] * shape[2], shape[2], 1])
    return np.asarray(offsets) @ mult


def plogp(p: np.ndarray) -> float:
    """-sum p log2 p over positive entries."""
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def emphasis_stats(P: np.ndarray) -> dict:
    """Statistics shared by run-length, size-zone and dependence matrices.

    ``P[i - 1, j - 1]`` counts entries with gray level ``i`` and size ``j``
    (run length, zone size, or dependence + 1).
    """
    ng, ns = P.shape
    i = np.arange(1, ng + 1, dtype=np.float64)[:, None]
    j = np.arange(1, ns + 1, dtype=np.float64)[None, :]
    nz = P.sum()
    p = P / nz
    mu_i = np.sum(p * i)
    mu_j = np.sum(p * j)
    return {
        "small": np.sum(P / j ** 2) / nz,
        "large": np.sum(P * j ** 2) / nz,
        "gln": np.sum(P.sum(axis=1) ** 2) / nz,
        "glnn": np.sum(P.sum(axis=1) ** 2) / nz ** 2,
        "sn": np.sum(P.sum(axis=0) ** 2) / nz,
        "snn": np.sum(P.sum(axis=0) ** 2) / nz ** 2,
        "glv": np.sum(p * (i - mu_i) ** 2),
        "sv": np.sum(p * (j - mu_j) ** 2),
        "entropy": plogp(p.ravel()),
        "lgle": np.sum(P / i ** 2) / nz,
        "hgle": np.sum(P * i ** 2) / nz,
        "slgle": np.sum(P / (i ** 2 * j ** 2)) / nz,
        "shgle": np.sum(P * i ** 2 / j ** 2) / nz,
        "llgle": np.sum(P * j ** 2 / i ** 2) / nz,
        "lhgle": np.sum(P * i ** 2 * j ** 2) / nz,
        "count": nz,
    }
