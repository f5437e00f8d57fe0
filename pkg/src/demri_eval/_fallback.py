"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``."""
import heapq

import numpy as np

_NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def flood_2d(elevation, markers, mask):
    h, w = elevation.shape
    out = np.zeros((h, w), dtype=np.int32)
    inside = mask.astype(bool)
    seeded = inside & (markers > 0)
    out[seeded] = markers[seeded]
    seeds = [(float(elevation[r, c]), int(r) * w + int(c)) for r, c in zip(*np.nonzero(seeded))]
    heapq.heapify(seeds)
    heap = []
    for queue in (seeds, heap):
        while queue:
            _, idx = heapq.heappop(queue)
            r, c = divmod(idx, w)
            lab = out[r, c]
            for dr, dc in _NEIGHBOURS:
                rr, cc = r + dr, c + dc
                if 0 <= rr < h and 0 <= cc < w and inside[rr, cc] and out[rr, cc] == 0:
                    out[rr, cc] = lab
                    heapq.heappush(heap, (float(elevation[rr, cc]), rr * w + cc))
    return out


def directed_hausdorff_sq(a, b, chunk=512):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("point sets must be non-empty")
    if a.shape[1] != b.shape[1]:
        raise ValueError("point sets must share dimensionality")
    worst = 0.0
    for start in range(0, len(a), chunk):
        blk = a[start:start + chunk]
        # explicit differences rather than the |a|^2 - 2ab + |b|^2 expansion: exact for grid points
        d2 = ((blk[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        worst = max(worst, float(d2.min(axis=1).max()))
    return worst


def glcm_counts(q, mask, dx, dy, levels):
    nx, ny, _ = q.shape
    out = np.zeros((levels, levels), dtype=np.int64)
    xs = slice(max(0, -dx), nx - max(0, dx))
    ys = slice(max(0, -dy), ny - max(0, dy))
    xs2 = slice(max(0, dx), nx + min(0, dx))
    ys2 = slice(max(0, dy), ny + min(0, dy))
    a, b = q[xs, ys, :], q[xs2, ys2, :]
    both = mask[xs, ys, :].astype(bool) & mask[xs2, ys2, :].astype(bool)
    both &= (a >= 0) & (a < levels) & (b >= 0) & (b < levels)
    np.add.at(out, (a[both], b[both]), 1)
    return out
