"""Independent brute-force reference implementations used as test oracles."""
import itertools
import math


def dice_oracle(a, b):
    na = nb = inter = 0
    for x, y in zip(a.ravel().tolist(), b.ravel().tolist()):
        na += x
        nb += y
        inter += x and y
    return 1.0 if na + nb == 0 else 2.0 * inter / (na + nb)


def surface_points(mask, spacing):
    nx, ny, nz = mask.shape
    pts = []
    for i, j, k in itertools.product(range(nx), range(ny), range(nz)):
        if not mask[i, j, k]:
            continue
        for di, dj, dk in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]:
            a, b, c = i + di, j + dj, k + dk
            if not (0 <= a < nx and 0 <= b < ny and 0 <= c < nz) or not mask[a, b, c]:
                pts.append((i * spacing[0], j * spacing[1], k * spacing[2]))
                break
    return pts


def hausdorff_oracle(a, b, spacing):
    pa, pb = surface_points(a, spacing), surface_points(b, spacing)

    def directed(p, q):
        return max(min(math.dist(x, y) for y in q) for x in p)

    return max(directed(pa, pb), directed(pb, pa))
