# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics must match _kernels_py exactly (tests compare both)."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport qsort, malloc, free
from libc.string cimport memcpy
from cpython.bytes cimport PyBytes_FromStringAndSize

cnp.import_array()

ctypedef long long i64

# comparator state (the module is single-threaded per call)
cdef const i64* _rows = NULL
cdef Py_ssize_t _width = 0


cdef int _cmp_rows(const void* a, const void* b) noexcept nogil:
    cdef i64 ia = (<const i64*>a)[0]
    cdef i64 ib = (<const i64*>b)[0]
    cdef const i64* ra = _rows + ia * _width
    cdef const i64* rb = _rows + ib * _width
    cdef Py_ssize_t j
    for j in range(_width):
        if ra[j] < rb[j]:
            return -1
        if ra[j] > rb[j]:
            return 1
    # stable: fall back to original position
    if ia < ib:
        return -1
    if ia > ib:
        return 1
    return 0


def ring_push(i64[:, ::1] nbr, double[:, ::1] nt, i64[:, ::1] ns, i64[:, ::1] ne,
              i64[::1] cnt, i64[::1] src, i64[::1] dst, double[::1] t, i64[::1] s,
              i64[::1] eid):
    cdef Py_ssize_t cap = nbr.shape[1]
    cdef Py_ssize_t i, pos
    cdef i64 a, b
    for i in range(src.shape[0]):
        a = src[i]
        b = dst[i]
        pos = cnt[a] % cap
        nbr[a, pos] = b
        nt[a, pos] = t[i]
        ns[a, pos] = s[i]
        ne[a, pos] = eid[i]
        cnt[a] += 1
        if a != b:
            pos = cnt[b] % cap
            nbr[b, pos] = a
            nt[b, pos] = t[i]
            ns[b, pos] = s[i]
            ne[b, pos] = eid[i]
            cnt[b] += 1


def multiset_keys(i64[::1] indptr, i64[:, ::1] rows, i64[:, ::1] prefix):
    global _rows, _width
    cdef Py_ssize_t g, n_groups = indptr.shape[0] - 1
    cdef Py_ssize_t width = rows.shape[1]
    cdef Py_ssize_t pw = prefix.shape[1]
    cdef Py_ssize_t start, stop, n, j, maxn = 0
    cdef i64* idx
    cdef i64* buf
    cdef i64 base
    out = []
    for g in range(n_groups):
        n = indptr[g + 1] - indptr[g]
        if n > maxn:
            maxn = n
    idx = <i64*>malloc((maxn + 1) * sizeof(i64))
    buf = <i64*>malloc((3 + pw + maxn * width) * sizeof(i64))
    if idx == NULL or buf == NULL:
        free(idx)
        free(buf)
        raise MemoryError()
    try:
        _width = width
        if rows.shape[0] > 0:
            _rows = &rows[0, 0]
        for g in range(n_groups):
            start = indptr[g]
            stop = indptr[g + 1]
            n = stop - start
            for j in range(n):
                idx[j] = start + j
            if n > 1:
                qsort(idx, n, sizeof(i64), _cmp_rows)
            buf[0] = pw
            buf[1] = n
            buf[2] = width
            for j in range(pw):
                buf[3 + j] = prefix[g, j]
            base = 3 + pw
            for j in range(n):
                memcpy(buf + base + j * width, &rows[idx[j], 0], width * sizeof(i64))
            out.append(PyBytes_FromStringAndSize(<char*>buf, (base + n * width) * sizeof(i64)))
    finally:
        _rows = NULL
        free(idx)
        free(buf)
    return out


def unique_rows(i64[:, ::1] rows):
    global _rows, _width
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t width = rows.shape[1]
    cdef Py_ssize_t i, j, n_groups = 0
    cdef bint same
    order_arr = np.arange(n, dtype=np.int64)
    cdef i64[::1] order = order_arr
    group_of_sorted = np.empty(n, dtype=np.int64)
    cdef i64[::1] gs = group_of_sorted
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    _rows = &rows[0, 0]
    _width = width
    qsort(&order[0], n, sizeof(i64), _cmp_rows)
    _rows = NULL
    gs[0] = 0
    for i in range(1, n):
        same = True
        for j in range(width):
            if rows[order[i], j] != rows[order[i - 1], j]:
                same = False
                break
        if not same:
            n_groups += 1
        gs[i] = n_groups
    n_groups += 1
    first_arr = np.empty(n_groups, dtype=np.int64)
    cdef i64[::1] first = first_arr
    for i in range(n):
        if i == 0 or gs[i] != gs[i - 1]:
            first[gs[i]] = order[i]
    # renumber groups by first appearance
    rank_order = np.argsort(first_arr, kind="stable")
    new_id = np.empty(n_groups, dtype=np.int64)
    new_id[rank_order] = np.arange(n_groups, dtype=np.int64)
    inverse = np.empty(n, dtype=np.int64)
    inverse[order_arr] = new_id[group_of_sorted]
    return first_arr[rank_order], inverse
