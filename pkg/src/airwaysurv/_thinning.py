"""Topology-preserving 3D thinning.

Directional border-point deletion in the style of Lee, Kashyap and Chu:
six sub-iterations per pass (one per face direction). A voxel is removed
only if it is a border point for the current direction, is not a curve end
(exactly one 26-neighbour), and is *simple*: its deletion changes neither the
26-connected foreground nor the 6-connected background locally. Simplicity
is decided with the topological numbers T26(p, X) = 1 and T6(p, ~X) = 1.
Candidates are re-checked sequentially in raster order before deletion,
which keeps the result topologically equivalent to the input.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product

import numpy as np

OFFSETS = [o for o in product((-1, 0, 1), repeat=3) if o != (0, 0, 0)]
_POS = {o: i for i, o in enumerate(OFFSETS)}
_FACES = [i for i, o in enumerate(OFFSETS) if sum(map(abs, o)) == 1]
_N18 = [i for i, o in enumerate(OFFSETS) if sum(map(abs, o)) <= 2]


def _adjacency(max_l1: int, members: list[int]) -> dict[int, list[int]]:
    adj = {}
    for i in members:
        a = OFFSETS[i]
        adj[i] = [
            j for j in members
            if j != i
            and max(abs(a[k] - OFFSETS[j][k]) for k in range(3)) == 1
            and sum(abs(a[k] - OFFSETS[j][k]) for k in range(3)) <= max_l1
        ]
    return adj


_ADJ26 = _adjacency(3, list(range(26)))
_ADJ6_N18 = _adjacency(1, _N18)


def _components(nodes: set, adj: dict) -> list[set]:
    comps = []
    nodes = set(nodes)
    while nodes:
        seed = nodes.pop()
        comp = {seed}
        stack = [seed]
        while stack:
            for nb in adj[stack.pop()]:
                if nb in nodes:
                    nodes.remove(nb)
                    comp.add(nb)
                    stack.append(nb)
        comps.append(comp)
    return comps


@lru_cache(maxsize=None)
def is_simple(code: int) -> bool:
    """Simplicity of the centre voxel given its 26-neighbourhood bit code."""
    fg = {i for i in range(26) if code >> i & 1}
    if len(_components(fg, _ADJ26)) != 1:
        return False
    bg = {i for i in _N18 if not code >> i & 1}
    touching = [c for c in _components(bg, _ADJ6_N18) if any(f in c for f in _FACES)]
    return len(touching) == 1


def neighbour_codes(padded: np.ndarray, flat_idx: np.ndarray, strides: list[int]) -> np.ndarray:
    flat = padded.ravel()
    code = np.zeros(len(flat_idx), dtype=np.int64)
    for bit, s in enumerate(strides):
        code |= flat[flat_idx + s].astype(np.int64) << bit
    return code


def thin(mask: np.ndarray) -> np.ndarray:
    """Curve skeleton of a boolean 3D array."""
    arr = np.pad(np.asarray(mask, dtype=bool), 1).astype(np.uint8)
    shape = arr.shape
    strides = [int(np.ravel_multi_index(np.add((1, 1, 1), o), shape)
                   - np.ravel_multi_index((1, 1, 1), shape)) for o in OFFSETS]
    flat = arr.ravel()
    face_dirs = [(-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1)]
    changed = True
    while changed:
        changed = False
        for d in face_dirs:
            s_dir = strides[_POS[d]]
            fg = np.flatnonzero(flat)
            border = fg[flat[fg + s_dir] == 0]
            if len(border) == 0:
                continue
            codes = neighbour_codes(arr, border, strides)
            keep = np.bitwise_count(codes) != 1
            border, codes = border[keep], codes[keep]
            cand = [int(p) for p, c in zip(border, codes) if is_simple(int(c))]
            for p in cand:
                code = 0
                nbrs = 0
                for bit, s in enumerate(strides):
                    if flat[p + s]:
                        code |= 1 << bit
                        nbrs += 1
                if nbrs != 1 and is_simple(code):
                    flat[p] = 0
                    changed = True
    return arr[1:-1, 1:-1, 1:-1].astype(bool)
