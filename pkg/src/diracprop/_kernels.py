"""Fused loops for the phase-space hot paths.

Each kernel replaces a chain of numpy broadcasts over (batch, K, K, n) arrays
by a single pass. Arrays are assumed C-contiguous; leading batch axes are
flattened by the callers.
"""
from __future__ import annotations

import numba
import numpy as np


@numba.njit(cache=True)
def gather_windowed(flat, idx_add, wconj, out):
    """out[b, k, l, c] = flat[b, idx_add[k, l], c] * wconj[k, l]."""
    B, K, L, n = out.shape
    for b in range(B):
        for k in range(K):
            for l in range(L):
                src = idx_add[k, l]
                w = wconj[k, l]
                for c in range(n):
                    out[b, k, l, c] = flat[b, src, c] * w


@numba.njit(cache=True)
def apply_separable_phase(E, px, Z, out):
    """out[b, k, m] = px[k] * E[m] @ Z[b, k, m] (E is (M, n, n), px is (K,))."""
    B, K, M, n = Z.shape
    for b in range(B):
        for k in range(K):
            p = px[k]
            for m in range(M):
                for i in range(n):
                    acc = 0j
                    for j in range(n):
                        acc += E[m, i, j] * Z[b, k, m, j]
                    out[b, k, m, i] = p * acc


@numba.njit(cache=True)
def apply_full_phase(P, Z, adjoint, out):
    """out[b, k, m] = P[k, m] @ Z[b, k, m] (or P[k, m]^dagger @ Z[b, k, m])."""
    B, K, M, n = Z.shape
    for b in range(B):
        for k in range(K):
            for m in range(M):
                for i in range(n):
                    acc = 0j
                    if adjoint:
                        for j in range(n):
                            acc += np.conj(P[k, m, j, i]) * Z[b, k, m, j]
                    else:
                        for j in range(n):
                            acc += P[k, m, i, j] * Z[b, k, m, j]
                    out[b, k, m, i] = acc


@numba.njit(cache=True)
def kernel_scatter_sum(coeffs, idx_add, weights, mats, has_mat, flow, use_flow, out):
    """out[b, idx_add[k, l]] += sum_t weights[t, k, l] (mats[t] or 1) coeffs[b, k, l] (times flow[k, l]).

    ``out`` must be zero-initialized; reads are contiguous in (k, l).
    """
    B, K, L, n = coeffs.shape
    T = weights.shape[0]
    acc = np.empty(n, dtype=np.complex128)
    for b in range(B):
        for k in range(K):
            for l in range(L):
                fl = flow[k, l] if use_flow else 1.0 + 0j
                for c in range(n):
                    acc[c] = 0j
                for t in range(T):
                    w = weights[t, k, l] * fl
                    if w == 0:
                        continue
                    if has_mat[t]:
                        for i in range(n):
                            s = 0j
                            for q in range(n):
                                s += mats[t, i, q] * coeffs[b, k, l, q]
                            acc[i] += w * s
                    else:
                        for i in range(n):
                            acc[i] += w * coeffs[b, k, l, i]
                j = idx_add[k, l]
                for c in range(n):
                    out[b, j, c] += acc[c]
