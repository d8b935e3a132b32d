"""Compiled CSR loops.  All routines expect sorted column indices."""

import heapq

import numpy as np
from numba import njit

U_NODE = -1
F_NODE = 0
C_NODE = 1


@njit(cache=True)
def ilu0_factor(indptr, indices, data):
    """In-place IKJ ILU(0).  Returns (lu, diag_pos, bad_row); bad_row = -1 on success."""
    n = len(indptr) - 1
    lu = data.copy()
    diag = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] == i:
                diag[i] = jj
                break
        if diag[i] < 0:
            return lu, diag, i
    work = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        start, end = indptr[i], indptr[i + 1]
        for jj in range(start, end):
            work[indices[jj]] = jj
        for kk in range(start, end):
            k = indices[kk]
            if k >= i:
                break
            pivot = lu[diag[k]]
            if abs(pivot) < 1e-300:
                return lu, diag, k
            lik = lu[kk] / pivot
            lu[kk] = lik
            for jj in range(diag[k] + 1, indptr[k + 1]):
                pos = work[indices[jj]]
                if pos >= 0:
                    lu[pos] -= lik * lu[jj]
        for jj in range(start, end):
            work[indices[jj]] = -1
        if abs(lu[diag[i]]) < 1e-300:
            return lu, diag, i
    return lu, diag, -1


@njit(cache=True)
def ilu0_solve(indptr, indices, lu, diag, b):
    n = len(indptr) - 1
    x = b.astype(np.float64).copy()
    for i in range(n):
        s = x[i]
        for jj in range(indptr[i], diag[i]):
            s -= lu[jj] * x[indices[jj]]
        x[i] = s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for jj in range(diag[i] + 1, indptr[i + 1]):
            s -= lu[jj] * x[indices[jj]]
        x[i] = s / lu[diag[i]]
    return x


@njit(cache=True)
def gauss_seidel_forward(indptr, indices, data, x, b):
    n = len(indptr) - 1
    for i in range(n):
        s = b[i]
        d = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if j == i:
                d += data[jj]
            else:
                s -= data[jj] * x[j]
        if d != 0.0:
            x[i] = s / d


@njit(cache=True)
def strength_abs(indptr, indices, data, theta):
    """Mask of entries with |a_ij| >= theta * max_{k != i} |a_ik| (j != i)."""
    n = len(indptr) - 1
    mask = np.zeros(len(indices), dtype=np.bool_)
    for i in range(n):
        m = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] != i:
                v = abs(data[jj])
                if v > m:
                    m = v
        if m <= 0.0:
            continue
        cut = theta * m
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] != i and abs(data[jj]) >= cut:
                mask[jj] = True
    return mask


@njit(cache=True)
def strength_negative(indptr, indices, data, theta):
    """Classical sign-aware strength: -s*a_ij >= theta * max_k(-s*a_ik), s = sign(a_ii)."""
    n = len(indptr) - 1
    mask = np.zeros(len(indices), dtype=np.bool_)
    for i in range(n):
        sgn = 1.0
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] == i and data[jj] < 0.0:
                sgn = -1.0
        m = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] != i:
                v = -sgn * data[jj]
                if v > m:
                    m = v
        if m <= 0.0:
            continue
        cut = theta * m
        for jj in range(indptr[i], indptr[i + 1]):
            if indices[jj] != i and -sgn * data[jj] >= cut:
                mask[jj] = True
    return mask


@njit(cache=True)
def rs_first_pass(n, s_ptr, s_idx, t_ptr, t_idx):
    """Ruge-Stuben greedy C/F selection on the strength graph.

    ``S`` rows list the points each point strongly depends on, ``T = S^T``
    the points it strongly influences.  Ties on the influence measure go to
    the lowest index.
    """
    state = np.full(n, U_NODE, dtype=np.int64)
    lam = np.empty(n, dtype=np.int64)
    for i in range(n):
        lam[i] = t_ptr[i + 1] - t_ptr[i]
    base = 4 * n + 16
    stride = n + 1
    heap = [np.int64(0)]
    heap.pop()
    for i in range(n):
        if s_ptr[i + 1] == s_ptr[i] and t_ptr[i + 1] == t_ptr[i]:
            state[i] = F_NODE
        else:
            heapq.heappush(heap, (base - lam[i]) * stride + i)
    while len(heap) > 0:
        key = heapq.heappop(heap)
        i = key % stride
        if state[i] != U_NODE or base - key // stride != lam[i]:
            continue
        if lam[i] <= 0:
            has_c = False
            for jj in range(s_ptr[i], s_ptr[i + 1]):
                if state[s_idx[jj]] == C_NODE:
                    has_c = True
            if has_c or s_ptr[i + 1] == s_ptr[i]:
                state[i] = F_NODE
                continue
        state[i] = C_NODE
        for jj in range(t_ptr[i], t_ptr[i + 1]):
            j = t_idx[jj]
            if state[j] == U_NODE:
                state[j] = F_NODE
                for kk in range(s_ptr[j], s_ptr[j + 1]):
                    k = s_idx[kk]
                    if state[k] == U_NODE and lam[k] < base - 1:
                        lam[k] += 1
                        heapq.heappush(heap, (base - lam[k]) * stride + k)
        for jj in range(s_ptr[i], s_ptr[i + 1]):
            j = s_idx[jj]
            if state[j] == U_NODE and lam[j] > 0:
                lam[j] -= 1
                heapq.heappush(heap, (base - lam[j]) * stride + j)
    return state


@njit(cache=True)
def rs_second_pass(n, s_ptr, s_idx, state):
    """Enforce that strongly connected F-F pairs share a strong C point."""
    marker = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        if state[i] != F_NODE:
            continue
        for jj in range(s_ptr[i], s_ptr[i + 1]):
            k = s_idx[jj]
            if state[k] == C_NODE:
                marker[k] = i
        tentative = -1
        for jj in range(s_ptr[i], s_ptr[i + 1]):
            j = s_idx[jj]
            if state[j] != F_NODE:
                continue
            shared = False
            for kk in range(s_ptr[j], s_ptr[j + 1]):
                k = s_idx[kk]
                if state[k] == C_NODE and marker[k] == i:
                    shared = True
                    break
            if shared:
                continue
            if tentative < 0:
                tentative = j
                state[j] = C_NODE
                marker[j] = i
            else:
                state[tentative] = F_NODE
                state[i] = C_NODE
                break
    return state


@njit(cache=True)
def classical_interpolation(indptr, indices, data, strong, state, coarse_index):
    """Ruge-Stuben direct + standard interpolation weights as CSR arrays.

    Strong F neighbours distribute their coupling over the interpolatory
    set using only entries whose sign is opposite to their diagonal; a
    neighbour with no such entry is lumped into the diagonal like a weak one.
    """
    n = len(indptr) - 1
    p_ptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        if state[i] == C_NODE:
            p_ptr[i + 1] = 1
        else:
            cnt = 0
            for jj in range(indptr[i], indptr[i + 1]):
                if strong[jj] and state[indices[jj]] == C_NODE:
                    cnt += 1
            p_ptr[i + 1] = cnt
    for i in range(n):
        p_ptr[i + 1] += p_ptr[i]
    p_idx = np.empty(p_ptr[n], dtype=np.int64)
    p_val = np.empty(p_ptr[n], dtype=np.float64)

    mark = np.full(n, -1, dtype=np.int64)
    strong_f = np.full(n, -1, dtype=np.int64)
    num = np.zeros(n, dtype=np.float64)
    diag_of = np.zeros(n, dtype=np.float64)
    for k in range(n):
        for jj in range(indptr[k], indptr[k + 1]):
            if indices[jj] == k:
                diag_of[k] += data[jj]

    for i in range(n):
        pos = p_ptr[i]
        if state[i] == C_NODE:
            p_idx[pos] = coarse_index[i]
            p_val[pos] = 1.0
            continue
        if p_ptr[i + 1] == pos:
            continue
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if strong[jj] and j != i:
                if state[j] == C_NODE:
                    mark[j] = i
                    num[j] = 0.0
                else:
                    strong_f[j] = i
        diag = 0.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            a = data[jj]
            if j == i:
                diag += a
            elif mark[j] == i and state[j] == C_NODE:
                num[j] += a
            elif strong_f[j] == i:
                sgn = 1.0 if diag_of[j] >= 0.0 else -1.0
                denom = 0.0
                for ll in range(indptr[j], indptr[j + 1]):
                    l = indices[ll]
                    if mark[l] == i and state[l] == C_NODE and data[ll] * sgn < 0.0:
                        denom += data[ll]
                if denom == 0.0:
                    diag += a
                else:
                    for ll in range(indptr[j], indptr[j + 1]):
                        l = indices[ll]
                        if mark[l] == i and state[l] == C_NODE and data[ll] * sgn < 0.0:
                            num[l] += a * data[ll] / denom
            else:
                diag += a
        if diag == 0.0:
            diag = diag_of[i] if diag_of[i] != 0.0 else 1.0
        for jj in range(indptr[i], indptr[i + 1]):
            j = indices[jj]
            if strong[jj] and j != i and state[j] == C_NODE:
                p_idx[pos] = coarse_index[j]
                p_val[pos] = -num[j] / diag
                pos += 1
    return p_ptr, p_idx, p_val
