"""Skeleton edge enumeration by exhaustive pair scanning."""
import math
from itertools import combinations


def skeleton_edges(voxels):
    """26-adjacent voxel pairs minus corner shortcuts.

    A pair is dropped when some third voxel is adjacent to both and strictly
    closer to each than the pair members are to one another.
    """
    pts = [tuple(map(int, v)) for v in voxels]
    pset = set(pts)

    def d2(a, b):
        return sum((x - y) ** 2 for x, y in zip(a, b))

    def adjacent(a, b):
        return a != b and max(abs(x - y) for x, y in zip(a, b)) == 1

    edges = []
    for a, b in combinations(pts, 2):
        if not adjacent(a, b):
            continue
        dab = d2(a, b)
        shortcut = False
        for w in pset:
            if adjacent(a, w) and adjacent(b, w) and d2(a, w) < dab and d2(b, w) < dab:
                shortcut = True
                break
        if not shortcut:
            edges.append((a, b))
    return edges


def detected_length_ratio(pred, voxels, spacing):
    """Spacing-weighted share of skeleton edges with both ends in ``pred``."""
    total = hit = 0.0
    for a, b in skeleton_edges(voxels):
        length = math.sqrt(sum(((x - y) * s) ** 2 for x, y, s in zip(a, b, spacing)))
        total += length
        if pred[a] and pred[b]:
            hit += length
    return hit / total
