"""Airway segmentation scoring.

Voxel overlap metrics, centreline-based detected length and branch ratios,
and the composite score::

    overall = 0.25 * 0.7 * (iou + precision + dbr + dlr) + 0.3 * clamp(1 - leakage, 0, 1)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._thinning import OFFSETS, thin
from .errors import EmptyInputError, GeometryError
from .volume_io import Mask, check_same_geometry

__all__ = [
    "Skeleton",
    "BranchSet",
    "SegMetricsReport",
    "iou",
    "voxel_precision",
    "leakage",
    "skeletonize",
    "skeleton_graph",
    "branch_decompose",
    "dlr",
    "dbr",
    "combine_score",
    "overall_score",
    "DEFAULT_DETECT_FRACTION",
]

DEFAULT_DETECT_FRACTION = 0.8

# Half of the 26 offsets; each undirected edge is found once.
_HALF = [o for o in OFFSETS if o > (0, 0, 0)]


def _check(pred: Mask, gt: Mask) -> None:
    if not check_same_geometry(pred.geometry, gt.geometry):
        raise GeometryError(f"grids differ: {pred.geometry.dims} vs {gt.geometry.dims}")


def iou(pred: Mask, gt: Mask) -> float:
    _check(pred, gt)
    union = np.count_nonzero(pred.voxels | gt.voxels)
    if union == 0:
        raise EmptyInputError("both masks are empty")
    return np.count_nonzero(pred.voxels & gt.voxels) / union


def voxel_precision(pred: Mask, gt: Mask) -> float:
    """TP / (TP + FP). An empty prediction scores 0."""
    _check(pred, gt)
    n_pred = np.count_nonzero(pred.voxels)
    if n_pred == 0:
        return 0.0
    return np.count_nonzero(pred.voxels & gt.voxels) / n_pred


def leakage(pred: Mask, gt: Mask) -> float:
    """False-positive volume over ground-truth volume; may exceed 1."""
    _check(pred, gt)
    n_gt = np.count_nonzero(gt.voxels)
    if n_gt == 0:
        raise EmptyInputError("ground truth is empty")
    return np.count_nonzero(pred.voxels & ~gt.voxels) / n_gt


@dataclass(frozen=True)
class Skeleton:
    """Centreline voxels plus their adjacency graph.

    ``edges`` holds index pairs into ``voxels``. Adjacency is 26-neighbour,
    minus the long side of any triangle whose two other sides are strictly
    shorter (a diagonal shortcut around a corner).
    """

    voxels: np.ndarray  # (n, 3) int indices, raster order
    edges: np.ndarray   # (e, 2) int, i < j
    geometry: object

    @property
    def mask(self) -> Mask:
        arr = np.zeros(self.geometry.dims, dtype=bool)
        if len(self.voxels):
            arr[tuple(self.voxels.T)] = True
        return Mask(self.geometry, arr)

    def edge_lengths_mm(self) -> np.ndarray:
        if len(self.edges) == 0:
            return np.zeros(0)
        d = self.voxels[self.edges[:, 1]] - self.voxels[self.edges[:, 0]]
        return np.linalg.norm(d @ self.geometry.affine[:3, :3].T, axis=1)

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=len(self.voxels))


def skeleton_graph(m: Mask) -> Skeleton:
    """Build the skeleton graph of an already-thin mask without thinning it."""
    vox = np.argwhere(m.voxels)
    index = -np.ones(np.add(m.geometry.dims, 2), dtype=np.int64)
    index[tuple((vox + 1).T)] = np.arange(len(vox))
    pairs = []
    for o in _HALF:
        nb = index[tuple((vox + 1 + np.asarray(o)).T)]
        ok = nb >= 0
        pairs.append(np.stack([np.nonzero(ok)[0], nb[ok]], axis=1))
    edges = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    edges = np.sort(edges, axis=1)
    edges = _drop_shortcuts(vox, edges)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    return Skeleton(vox, edges[order], m.geometry)


def _drop_shortcuts(vox: np.ndarray, edges: np.ndarray) -> np.ndarray:
    if len(edges) == 0:
        return edges.reshape(0, 2)
    sq = np.sum((vox[edges[:, 0]] - vox[edges[:, 1]]) ** 2, axis=1)
    nbrs: dict[int, dict[int, int]] = {}
    for (a, b), d in zip(edges.tolist(), sq.tolist()):
        nbrs.setdefault(a, {})[b] = d
        nbrs.setdefault(b, {})[a] = d
    keep = np.ones(len(edges), dtype=bool)
    for e, ((a, b), d) in enumerate(zip(edges.tolist(), sq.tolist())):
        if d == 1:
            continue
        na, nb = nbrs[a], nbrs[b]
        for w in na.keys() & nb.keys():
            if na[w] < d and nb[w] < d:
                keep[e] = False
                break
    return edges[keep]


def skeletonize(m: Mask) -> Skeleton:
    """Topology-preserving centreline of ``m``."""
    if not m.voxels.any():
        raise EmptyInputError("cannot skeletonize an empty mask")
    return skeleton_graph(m.with_voxels(thin(m.voxels)))


@dataclass(frozen=True)
class BranchSet:
    """Skeleton split at junctions.

    Each branch is a voxel path (indices into the skeleton) whose interior
    voxels have exactly two graph neighbours; ``edge_ids`` lists the skeleton
    edges walked, so branches partition the edge set.
    """

    branches: list = field(default_factory=list)
    edge_ids: list = field(default_factory=list)

    def __len__(self):
        return len(self.branches)


def branch_decompose(s: Skeleton) -> BranchSet:
    n = len(s.voxels)
    if n == 0:
        return BranchSet()
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for e, (a, b) in enumerate(s.edges.tolist()):
        adj[a].append((b, e))
        adj[b].append((a, e))
    deg = [len(a) for a in adj]
    used = np.zeros(len(s.edges), dtype=bool)
    branches, edge_ids = [], []

    def walk(start, first_edge, nxt):
        path, ids = [start], [first_edge]
        used[first_edge] = True
        prev, cur = start, nxt
        while True:
            path.append(cur)
            if deg[cur] != 2 or cur == start:
                break
            nb = next(((v, e) for v, e in adj[cur] if not used[e]), None)
            if nb is None:
                break
            used[nb[1]] = True
            ids.append(nb[1])
            prev, cur = cur, nb[0]
        return path, ids

    for v in range(n):
        if deg[v] == 0:
            branches.append([v])
            edge_ids.append([])
        elif deg[v] != 2:
            for u, e in adj[v]:
                if not used[e]:
                    p, ids = walk(v, e, u)
                    branches.append(p)
                    edge_ids.append(ids)
    # Remaining edges belong to closed loops with no junction.
    for e in np.flatnonzero(~used):
        if not used[e]:
            a, b = s.edges[e]
            p, ids = walk(int(a), int(e), int(b))
            branches.append(p)
            edge_ids.append(ids)
    return BranchSet(branches, edge_ids)


def dlr(pred: Mask, gt_skeleton: Skeleton) -> float:
    """Length of centreline edges with both ends inside ``pred`` over total length (mm)."""
    _check(pred, gt_skeleton.mask)
    lengths = gt_skeleton.edge_lengths_mm()
    total = lengths.sum()
    if len(lengths) == 0 or total == 0:
        raise EmptyInputError("ground-truth skeleton has no edges")
    inside = pred.voxels[tuple(gt_skeleton.voxels.T)]
    hit = inside[gt_skeleton.edges[:, 0]] & inside[gt_skeleton.edges[:, 1]]
    if hit.all():
        return 1.0
    return float(lengths[hit].sum() / total)


def dbr(pred: Mask, skeleton: Skeleton, branches: BranchSet,
        detect_fraction: float = DEFAULT_DETECT_FRACTION) -> float:
    """Fraction of branches with at least ``detect_fraction`` of their voxels in ``pred``."""
    if not 0 < detect_fraction <= 1:
        raise ValueError("detect_fraction must lie in (0, 1]")
    if len(branches) == 0:
        raise EmptyInputError("no branches")
    _check(pred, skeleton.mask)
    inside = pred.voxels[tuple(skeleton.voxels.T)]
    detected = sum(inside[b].mean() >= detect_fraction for b in branches.branches)
    return detected / len(branches)


@dataclass(frozen=True)
class SegMetricsReport:
    iou: float
    precision: float
    dlr: float
    dbr: float
    leakage: float
    overall: float
    detect_fraction: float = DEFAULT_DETECT_FRACTION
    empty_prediction: bool = False

    CSV_FIELDS = ("iou", "precision", "dlr", "dbr", "leakage", "overall", "detect_fraction")

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.CSV_FIELDS}


def combine_score(iou_: float, precision: float, dbr_: float, dlr_: float, leakage_: float) -> float:
    leak_term = min(1.0, max(0.0, 1.0 - leakage_))
    return 0.25 * 0.7 * (iou_ + precision + dbr_ + dlr_) + 0.3 * leak_term


def overall_score(pred: Mask, gt: Mask, detect_fraction: float = DEFAULT_DETECT_FRACTION,
                  gt_skeleton: Skeleton | None = None) -> SegMetricsReport:
    """Score one prediction against its ground truth.

    The ground-truth skeleton is computed unless supplied.
    """
    _check(pred, gt)
    if not gt.voxels.any():
        raise EmptyInputError("ground truth is empty")
    skel = gt_skeleton if gt_skeleton is not None else skeletonize(gt)
    branches = branch_decompose(skel)
    values = dict(
        iou=iou(pred, gt),
        precision=voxel_precision(pred, gt),
        dlr=dlr(pred, skel) if len(skel.edges) else float(pred.voxels[tuple(skel.voxels.T)].all()),
        dbr=dbr(pred, skel, branches, detect_fraction),
        leakage=leakage(pred, gt),
    )
    overall = combine_score(values["iou"], values["precision"], values["dbr"],
                            values["dlr"], values["leakage"])
    return SegMetricsReport(**values, overall=overall, detect_fraction=detect_fraction,
                            empty_prediction=not pred.voxels.any())
