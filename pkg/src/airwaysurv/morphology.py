"""Binary 3D morphology and the airway mask constructions.

Covers closing-based artifact cleanup, centroid-distance filtering of
connected components, trachea isolation from the superior third of the grid,
and minimum bounding boxes.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import ndimage

from .errors import ContainmentError, EmptyInputError, GeometryError, TracheaNotFoundError
from .volume_io import Mask, check_same_geometry

logger = logging.getLogger(__name__)

__all__ = [
    "StructuringElement",
    "ComponentSet",
    "PostprocessParams",
    "PostprocessResult",
    "neighbourhood_offsets",
    "dilate",
    "erode",
    "close",
    "connected_components",
    "postprocess_airway",
    "postprocess_airway_detailed",
    "extract_trachea",
    "extract_non_trachea",
    "bounding_box_mask",
]


def neighbourhood_offsets(connectivity: int) -> list[tuple[int, int, int]]:
    """Non-zero offsets of the 6-, 18- or 26-neighbourhood."""
    if connectivity not in (6, 18, 26):
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity}")
    max_l1 = {6: 1, 18: 2, 26: 3}[connectivity]
    return [
        o for o in product((-1, 0, 1), repeat=3)
        if o != (0, 0, 0) and sum(map(abs, o)) <= max_l1
    ]


@dataclass(frozen=True)
class StructuringElement:
    """Origin-symmetric set of integer offsets."""

    offsets: frozenset

    def __post_init__(self):
        offs = frozenset(tuple(int(c) for c in o) for o in self.offsets)
        if (0, 0, 0) not in offs:
            raise ValueError("structuring element must contain the origin")
        if any((-a, -b, -c) not in offs for a, b, c in offs):
            raise ValueError("structuring element must be symmetric about the origin")
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def box(cls, radius: int = 1) -> "StructuringElement":
        r = range(-radius, radius + 1)
        return cls(frozenset(product(r, r, r)))

    @classmethod
    def from_connectivity(cls, connectivity: int) -> "StructuringElement":
        return cls(frozenset([(0, 0, 0), *neighbourhood_offsets(connectivity)]))

    @property
    def radius(self) -> int:
        return max(max(abs(c) for c in o) for o in self.offsets)

    def as_array(self) -> np.ndarray:
        r = self.radius
        arr = np.zeros((2 * r + 1,) * 3, dtype=bool)
        for a, b, c in self.offsets:
            arr[a + r, b + r, c + r] = True
        return arr


@dataclass(frozen=True)
class ComponentSet:
    labels: np.ndarray
    sizes: np.ndarray       # sizes[c - 1] is the voxel count of label c
    centroids_mm: np.ndarray  # (n, 3) world-space centroid per label

    @property
    def n(self) -> int:
        return len(self.sizes)

    def largest(self) -> int:
        """Label of the largest component; lowest label wins ties."""
        if self.n == 0:
            raise EmptyInputError("no components")
        return int(np.argmax(self.sizes)) + 1


@dataclass(frozen=True)
class PostprocessParams:
    closing_element: StructuringElement = field(default_factory=StructuringElement.box)
    centroid_threshold_mm: float = 100.0
    connectivity: int = 26

    def __post_init__(self):
        if not self.centroid_threshold_mm > 0:
            raise ValueError("centroid_threshold_mm must be positive")
        if self.connectivity not in (6, 18, 26):
            raise ValueError("connectivity must be 6, 18 or 26")


def dilate(m: Mask, se: StructuringElement) -> Mask:
    """Minkowski sum of the foreground with ``se``, clipped to the grid."""
    out = ndimage.binary_dilation(m.voxels, structure=se.as_array(), border_value=0)
    return m.with_voxels(out)


def erode(m: Mask, se: StructuringElement) -> Mask:
    """Erosion with out-of-grid voxels treated as background.

    A voxel survives only if every offset of ``se`` lands on an in-grid
    foreground voxel, so foreground touching the border is peeled.
    """
    out = ndimage.binary_erosion(m.voxels, structure=se.as_array(), border_value=0)
    return m.with_voxels(out)


def close(m: Mask, se: StructuringElement) -> Mask:
    """Morphological closing.

    The grid is zero-padded by the element radius before dilating so the
    erosion never sees the artificial border; the result is then cropped.
    This keeps closing extensive and idempotent up to the grid edge.
    """
    r = se.radius
    padded = np.pad(m.voxels, r)
    structure = se.as_array()
    d = ndimage.binary_dilation(padded, structure=structure, border_value=0)
    e = ndimage.binary_erosion(d, structure=structure, border_value=0)
    if r:
        e = e[r:-r, r:-r, r:-r]
    return m.with_voxels(e)


def _structure(connectivity: int) -> np.ndarray:
    rank = {6: 1, 18: 2, 26: 3}[connectivity]
    return ndimage.generate_binary_structure(3, rank)


def connected_components(m: Mask, connectivity: int = 26) -> ComponentSet:
    """Label foreground components (raster order of first voxel)."""
    if connectivity not in (6, 18, 26):
        raise ValueError(f"connectivity must be 6, 18 or 26, got {connectivity}")
    labels, n = ndimage.label(m.voxels, structure=_structure(connectivity))
    if n == 0:
        return ComponentSet(labels, np.zeros(0, dtype=np.int64), np.zeros((0, 3)))
    sizes = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    idx = np.nonzero(labels)
    lab = labels[idx]
    centroid_ijk = np.stack(
        [np.bincount(lab, weights=c, minlength=n + 1)[1:] for c in idx], axis=1
    ) / sizes[:, None]
    centroids = m.geometry.to_world(centroid_ijk)
    return ComponentSet(labels, sizes.astype(np.int64), centroids)


@dataclass(frozen=True)
class PostprocessResult:
    mask: Mask
    removed_sizes: tuple
    removed_distances_mm: tuple


def postprocess_airway_detailed(m: Mask, p: PostprocessParams = PostprocessParams()) -> PostprocessResult:
    """Close, then drop components whose centroid is far from the main one.

    Component centroids are compared in world millimetres against the
    centroid of the largest component (by voxel count). Components strictly
    further than ``p.centroid_threshold_mm`` are removed.
    """
    if not m.voxels.any():
        raise EmptyInputError("cannot post-process an empty mask")
    closed = close(m, p.closing_element)
    comps = connected_components(closed, p.connectivity)
    main = comps.largest()
    dist = np.linalg.norm(comps.centroids_mm - comps.centroids_mm[main - 1], axis=1)
    keep = dist <= p.centroid_threshold_mm
    keep[main - 1] = True
    lut = np.concatenate([[False], keep])
    removed = np.nonzero(~keep)[0]
    logger.debug("removed %d of %d components", len(removed), comps.n)
    return PostprocessResult(
        mask=m.with_voxels(lut[comps.labels]),
        removed_sizes=tuple(int(comps.sizes[i]) for i in removed),
        removed_distances_mm=tuple(float(dist[i]) for i in removed),
    )


def postprocess_airway(m: Mask, p: PostprocessParams = PostprocessParams()) -> Mask:
    return postprocess_airway_detailed(m, p).mask


def upper_third_start(nz: int) -> int:
    """First slice index of the superior third: ceil(2 * nz / 3)."""
    return -(-2 * nz // 3)


def extract_trachea(m: Mask, region: str = "upper-third") -> Mask:
    """Largest 26-connected component within the superior slices.

    ``region="upper-third"`` restricts candidates to slices
    ``k >= ceil(2 nz / 3)``. ``region="above-lower-third"`` only excludes the
    inferior third, i.e. uses ``k >= ceil(nz / 3)``.
    """
    nz = m.geometry.dims[2]
    if region == "upper-third":
        k0 = upper_third_start(nz)
    elif region == "above-lower-third":
        k0 = -(-nz // 3)
    else:
        raise ValueError(f"unknown trachea region {region!r}")
    upper = np.zeros_like(m.voxels)
    upper[:, :, k0:] = m.voxels[:, :, k0:]
    if not upper.any():
        raise TracheaNotFoundError(f"no foreground in slices k >= {k0} of {nz}")
    comps = connected_components(m.with_voxels(upper), 26)
    return m.with_voxels(comps.labels == comps.largest())


def extract_non_trachea(m: Mask, t: Mask) -> Mask:
    """Set difference ``m \\ t``; ``t`` must be contained in ``m``."""
    if not check_same_geometry(m.geometry, t.geometry):
        raise GeometryError("mask and trachea grids differ")
    if np.any(t.voxels & ~m.voxels):
        raise ContainmentError("trachea mask is not a subset of the airway mask")
    return m.with_voxels(m.voxels & ~t.voxels)


def bounding_box_slices(m: Mask) -> tuple[slice, slice, slice]:
    if not m.voxels.any():
        raise EmptyInputError("bounding box of an empty mask")
    sl = ndimage.find_objects(m.voxels.astype(np.uint8))[0]
    return sl


def bounding_box_mask(m: Mask) -> Mask:
    """Filled axis-aligned box spanning the foreground extent."""
    box = np.zeros_like(m.voxels)
    box[bounding_box_slices(m)] = True
    return m.with_voxels(box)

