"""Synthetic airway phantoms with ground-truth metadata.

Airways are unions of capsules (line segments thickened to a radius). The
trunk runs down from near the top slice (superior end, high ``k``) and the
tree branches below it, alternating the split plane between x and y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PhantomSpecError
from .volume_io import Geometry, Mask, Volume

__all__ = ["PhantomSpec", "Phantom", "Segment", "generate_phantom", "generate_cohort"]

AIR_HU = -950.0
TISSUE_HU = -750.0


@dataclass(frozen=True)
class Segment:
    start: tuple   # voxel-index coordinates
    end: tuple
    radius: float  # voxels
    depth: int


@dataclass(frozen=True)
class PhantomSpec:
    """Parameters for :func:`generate_phantom`.

    ``kind`` is one of ``tube``, ``y-split``, ``binary-tree`` or ``cohort``.
    Lengths and radii are in voxels. ``satellites_mm`` places spherical
    artifacts at the given world distances from the airway centroid.
    """

    kind: str = "binary-tree"
    dims: tuple = (64, 64, 96)
    spacing: tuple = (1.0, 1.0, 1.0)
    trunk_length: float | None = None
    trunk_radius: float = 3.0
    depth: int = 2
    noise: float = 20.0
    signal: float = 1.0
    seed: int = 0
    n_cases: int = 20
    satellites_mm: tuple = ()
    satellite_radius: float = 2.0

    def __post_init__(self):
        if self.kind not in ("tube", "y-split", "binary-tree", "cohort"):
            raise PhantomSpecError(f"unknown phantom kind {self.kind!r}")
        if len(self.dims) != 3 or any(int(d) < 8 for d in self.dims):
            raise PhantomSpecError(f"phantom dims must be three integers >= 8, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise PhantomSpecError("spacing must be positive")
        if self.trunk_radius <= 0 or self.depth < 0 or self.noise < 0:
            raise PhantomSpecError("trunk_radius must be > 0, depth and noise >= 0")
        if self.kind == "cohort" and self.n_cases < 2:
            raise PhantomSpecError("a cohort needs at least two cases")


@dataclass
class Phantom:
    volume: Volume
    mask: Mask
    segments: list
    branch_voxels: list          # boolean arrays, one per segment
    trunk_voxels: np.ndarray     # boolean array of segment 0
    artifact_voxels: np.ndarray  # boolean array of all satellites
    satellite_distances_mm: tuple
    extents: tuple               # (lo_ijk, hi_ijk) of the airway foreground
    meta: dict = field(default_factory=dict)

    @property
    def branch_count(self) -> int:
        return len(self.segments)


def _tree_segments(spec: PhantomSpec) -> list[Segment]:
    nx, ny, nz = spec.dims
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    top = nz - 1 - spec.trunk_radius - 1
    k0 = -(-2 * nz // 3)
    if spec.kind == "tube":
        length = spec.trunk_length or (top - spec.trunk_radius - 1)
        return [Segment((cx, cy, top), (cx, cy, top - length), spec.trunk_radius, 0)]

    depth = 1 if spec.kind == "y-split" else spec.depth
    r_child = spec.trunk_radius * 0.8
    # Junction sits far enough below the superior third that child capsules
    # never reach into it.
    junction = spec.trunk_length and top - spec.trunk_length
    if not junction:
        junction = k0 - r_child - 3
    segs = [Segment((cx, cy, top), (cx, cy, junction), spec.trunk_radius, 0)]
    available = junction - spec.trunk_radius - 2
    length = available / max(1.0, sum(0.75 ** d for d in range(depth)))
    drop = 0.8
    # Shrink the sideways spread when the branches would leave the grid.
    reach = [sum(0.6 * length * 0.75 ** (lv - 1) for lv in range(1, depth + 1) if (lv % 2) != a)
             for a in (0, 1)]
    room = [cx - r_child - 2, cy - r_child - 2]
    spread = min([1.0] + [rm / rc for rm, rc in zip(room, reach) if rc > 0])

    def grow(start, level, r, seg_len):
        if level > depth:
            return
        axis = 0 if level % 2 == 1 else 1
        for sign in (-1.0, 1.0):
            end = list(start)
            end[axis] += sign * seg_len * 0.6 * spread
            end[2] -= seg_len * drop
            segs.append(Segment(tuple(start), tuple(end), r, level))
            grow(tuple(end), level + 1, r * 0.8, seg_len * 0.75)

    grow((cx, cy, junction), 1, r_child, length)
    return segs


def _segment_distance(points: np.ndarray, seg: Segment) -> np.ndarray:
    a = np.asarray(seg.start)
    b = np.asarray(seg.end)
    ab = b - a
    t = np.clip(((points - a) @ ab) / max(ab @ ab, 1e-12), 0.0, 1.0)
    return np.linalg.norm(points - (a + t[:, None] * ab), axis=1)


def _rasterize(dims, segments):
    grid = np.indices(dims).reshape(3, -1).T.astype(np.float64)
    dist = np.stack([_segment_distance(grid, s) / s.radius for s in segments], axis=1)
    inside = (dist <= 1.0).any(axis=1)
    owner = np.argmin(dist, axis=1)
    branch = [((owner == i) & inside).reshape(dims) for i in range(len(segments))]
    return inside.reshape(dims), branch


def _ball(dims, centre, radius):
    grid = np.indices(dims).astype(np.float64)
    d2 = sum((grid[i] - centre[i]) ** 2 for i in range(3))
    return d2 <= radius ** 2


def _make_volume(geometry, airway, rng, noise, tissue_hu=TISSUE_HU, air_hu=AIR_HU):
    base = np.where(airway, air_hu, tissue_hu)
    noisy = base + rng.normal(0.0, noise, size=geometry.dims) if noise else base
    return Volume(geometry, noisy)


def generate_phantom(spec: PhantomSpec) -> Phantom:
    """Build one phantom. Deterministic given ``spec.seed``."""
    if spec.kind == "cohort":
        raise PhantomSpecError("use generate_cohort for kind='cohort'")
    dims = tuple(int(d) for d in spec.dims)
    geometry = Geometry.from_spacing(dims, spec.spacing)
    rng = np.random.default_rng(spec.seed)
    segments = _tree_segments(spec)
    for s in segments:
        for p in (s.start, s.end):
            if min(p[0], p[1], p[2]) - s.radius < 0 or any(
                p[i] + s.radius > dims[i] - 1 for i in range(3)
            ):
                raise PhantomSpecError("tree does not fit inside the grid; enlarge dims")
    airway, branches = _rasterize(dims, segments)

    artifacts = np.zeros(dims, dtype=bool)
    sat_dist = []
    if spec.satellites_mm:
        idx = np.argwhere(airway)
        centre_mm = geometry.to_world(idx.mean(axis=0))
        n = len(spec.satellites_mm)
        for i, d_mm in enumerate(spec.satellites_mm):
            theta = 2 * math.pi * i / n
            direction = np.array([math.cos(theta), math.sin(theta), 0.0])
            target = centre_mm + d_mm * direction
            ijk = np.round((target - geometry.affine[:3, 3]) / np.asarray(spec.spacing))
            if np.any(ijk - spec.satellite_radius < 0) or np.any(
                ijk + spec.satellite_radius > np.asarray(dims) - 1
            ):
                raise PhantomSpecError(f"satellite at {d_mm} mm falls outside the grid")
            ball = _ball(dims, ijk, spec.satellite_radius)
            artifacts |= ball
            sat_dist.append(float(np.linalg.norm(geometry.to_world(ijk) - centre_mm)))
        artifacts &= ~airway

    idx = np.argwhere(airway)
    extents = (tuple(idx.min(axis=0)), tuple(idx.max(axis=0)))
    mask = Mask(geometry, airway | artifacts)
    volume = _make_volume(geometry, mask.voxels, rng, spec.noise)
    return Phantom(
        volume=volume,
        mask=mask,
        segments=segments,
        branch_voxels=branches,
        trunk_voxels=branches[0],
        artifact_voxels=artifacts,
        satellite_distances_mm=tuple(sat_dist),
        extents=extents,
        meta={"kind": spec.kind, "seed": spec.seed, "branch_count": len(segments)},
    )


def generate_cohort(spec: PhantomSpec) -> list[tuple[str, Phantom, int]]:
    """Cohort of labelled tree phantoms.

    Survivors (label 1) get a wider trunk; ``spec.signal`` scales the
    separation. Returns
    ``(case_id, phantom, label)`` triples.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_cases
    labels = np.zeros(n, dtype=int)
    labels[rng.permutation(n)[: (n + 1) // 2]] = 1
    cases = []
    for c in range(n):
        label = int(labels[c])
        jitter = rng.normal(0.0, 0.15)
        radius = spec.trunk_radius * (1.0 + 0.35 * spec.signal * (label - 0.5)) + jitter
        sub = PhantomSpec(
            kind="binary-tree",
            dims=spec.dims,
            spacing=spec.spacing,
            trunk_radius=max(1.5, radius),
            depth=spec.depth,
            noise=spec.noise,
            seed=int(rng.integers(2**31)),
        )
        ph = generate_phantom(sub)
        ph.meta["label"] = label
        ph.meta["planted_signal"] = {
            "feature": "trunk radius",
            "relative_shift": 0.35 * spec.signal,
            "jitter_sd_voxels": 0.15,
        }
        cases.append((f"case{c:03d}", ph, label))
    return cases
