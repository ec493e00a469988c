"""Numpy fallback for the compiled kernels in _kernels.pyx."""
import numpy as np


def ring_push(nbr, nt, ns, ne, cnt, src, dst, t, s, eid):
    cap = nbr.shape[1]
    for i in range(len(src)):
        a = int(src[i])
        b = int(dst[i])
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


def _sort_within_groups(indptr, rows):
    n = rows.shape[0]
    group = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    # lexsort: last key is primary
    keys = [np.arange(n)] + [rows[:, j] for j in range(rows.shape[1] - 1, -1, -1)] + [group]
    return rows[np.lexsort(keys)]


def multiset_keys(indptr, rows, prefix):
    indptr = np.asarray(indptr, dtype=np.int64)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    prefix = np.ascontiguousarray(prefix, dtype=np.int64)
    width = rows.shape[1]
    pw = prefix.shape[1]
    srt = _sort_within_groups(indptr, rows) if rows.shape[0] else rows
    blob = srt.tobytes()
    step = width * 8
    out = []
    for g in range(len(indptr) - 1):
        a, b = int(indptr[g]), int(indptr[g + 1])
        head = np.array([pw, b - a, width], dtype=np.int64).tobytes() + prefix[g].tobytes()
        out.append(head + blob[a * step:b * step])
    return out


def unique_rows(rows):
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    n = rows.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    keys = [np.arange(n)] + [rows[:, j] for j in range(rows.shape[1] - 1, -1, -1)]
    order = np.lexsort(keys)
    srt = rows[order]
    brk = np.ones(n, dtype=bool)
    brk[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    gs = np.cumsum(brk) - 1
    first = order[brk]
    rank_order = np.argsort(first, kind="stable")
    new_id = np.empty(len(first), dtype=np.int64)
    new_id[rank_order] = np.arange(len(first), dtype=np.int64)
    inverse = np.empty(n, dtype=np.int64)
    inverse[order] = new_id[gs]
    return first[rank_order], inverse
