# cython: language_level=3
"""Compiled inner loops. ``_fallback`` mirrors every function here."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

cdef int[8] _DR = [-1, -1, -1, 0, 0, 1, 1, 1]
cdef int[8] _DC = [-1, 0, 1, -1, 1, -1, 0, 1]


cdef struct HeapItem:
    double key
    Py_ssize_t idx


cdef inline bint _less(HeapItem a, HeapItem b) nogil:
    return a.key < b.key or (a.key == b.key and a.idx < b.idx)


cdef class _Heap:
    cdef HeapItem* items
    cdef Py_ssize_t size, cap

    def __cinit__(self, Py_ssize_t cap):
        self.cap = cap if cap > 16 else 16
        self.size = 0
        self.items = <HeapItem*> malloc(self.cap * sizeof(HeapItem))
        if self.items == NULL:
            raise MemoryError()

    def __dealloc__(self):
        free(self.items)

    cdef int push(self, double key, Py_ssize_t idx) except -1:
        cdef Py_ssize_t i, parent
        cdef HeapItem item
        cdef HeapItem* grown
        if self.size == self.cap:
            grown = <HeapItem*> realloc(self.items, 2 * self.cap * sizeof(HeapItem))
            if grown == NULL:
                raise MemoryError()
            self.items = grown
            self.cap *= 2
        item.key = key
        item.idx = idx
        i = self.size
        self.size += 1
        while i > 0:
            parent = (i - 1) >> 1
            if _less(item, self.items[parent]):
                self.items[i] = self.items[parent]
                i = parent
            else:
                break
        self.items[i] = item
        return 0

    cdef HeapItem pop(self):
        cdef HeapItem top = self.items[0]
        cdef HeapItem last
        cdef Py_ssize_t i = 0, child
        self.size -= 1
        if self.size > 0:
            last = self.items[self.size]
            while True:
                child = 2 * i + 1
                if child >= self.size:
                    break
                if child + 1 < self.size and _less(self.items[child + 1], self.items[child]):
                    child += 1
                if _less(self.items[child], last):
                    self.items[i] = self.items[child]
                    i = child
                else:
                    break
            self.items[i] = last
        return top


def flood_2d(cnp.float64_t[:, ::1] elevation, cnp.int32_t[:, ::1] markers,
             cnp.uint8_t[:, ::1] mask):
    """Marker-controlled priority flood on one slice (8-connectivity).

    Markers are activated first, in ascending ``(elevation, raster index)``
    order, each claiming its free neighbours; the remaining pixels are then
    claimed in the same order from the growing fronts.
    """
    cdef Py_ssize_t h = elevation.shape[0], w = elevation.shape[1]
    cdef Py_ssize_t r, c, rr, cc, k, idx
    cdef cnp.int32_t lab
    cdef HeapItem item
    out_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] out = out_arr
    cdef _Heap seeds = _Heap(h * w)
    cdef _Heap heap = _Heap(h * w)
    cdef _Heap src
    cdef int stage

    for r in range(h):
        for c in range(w):
            if mask[r, c] and markers[r, c] > 0:
                out[r, c] = markers[r, c]
                seeds.push(elevation[r, c], r * w + c)
    for stage in range(2):
        src = seeds if stage == 0 else heap
        while src.size > 0:
            item = src.pop()
            idx = item.idx
            r = idx // w
            c = idx - r * w
            lab = out[r, c]
            for k in range(8):
                rr = r + _DR[k]
                cc = c + _DC[k]
                if 0 <= rr < h and 0 <= cc < w and mask[rr, cc] and out[rr, cc] == 0:
                    out[rr, cc] = lab
                    heap.push(elevation[rr, cc], rr * w + cc)
    return out_arr


def directed_hausdorff_sq(cnp.float64_t[:, ::1] a, cnp.float64_t[:, ::1] b):
    """``max_a min_b |a - b|^2`` with the early-break scan."""
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j, d
    cdef Py_ssize_t dims = a.shape[1]
    cdef double cmax = 0.0, cmin, dist, diff
    if n == 0 or m == 0:
        raise ValueError("point sets must be non-empty")
    if b.shape[1] != dims:
        raise ValueError("point sets must share dimensionality")
    with nogil:
        for i in range(n):
            cmin = INFINITY
            for j in range(m):
                dist = 0.0
                for d in range(dims):
                    diff = a[i, d] - b[j, d]
                    dist = dist + diff * diff
                if dist < cmin:
                    cmin = dist
                    if cmin <= cmax:
                        break
            if cmin > cmax:
                cmax = cmin
    return cmax


def glcm_counts(cnp.int32_t[:, :, ::1] q, cnp.uint8_t[:, :, ::1] mask,
                Py_ssize_t dx, Py_ssize_t dy, Py_ssize_t levels):
    """Directed co-occurrence counts for in-plane offset ``(dx, dy)``."""
    cdef Py_ssize_t nx = q.shape[0], ny = q.shape[1], nz = q.shape[2]
    cdef Py_ssize_t x, y, z, x2, y2, a, b
    out_arr = np.zeros((levels, levels), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    for x in range(nx):
        x2 = x + dx
        if x2 < 0 or x2 >= nx:
            continue
        for y in range(ny):
            y2 = y + dy
            if y2 < 0 or y2 >= ny:
                continue
            for z in range(nz):
                if mask[x, y, z] and mask[x2, y2, z]:
                    a = q[x, y, z]
                    b = q[x2, y2, z]
                    if 0 <= a < levels and 0 <= b < levels:
                        out[a, b] += 1
    return out_arr
