"""Batched banded-matrix arithmetic in diagonal storage.

A band array ``G`` of half-width ``w`` has shape ``(..., 2w+1, n)`` and stores
``M[i, i+k]`` at ``G[..., w+k, i]``; entries that fall outside the matrix are
zero.  Leading axes are batch axes.
"""
import numpy as np


def half_width(G) -> int:
    return (G.shape[-2] - 1) // 2


def shift(arr, l):
    """``out[..., i] = arr[..., i + l]`` with zero fill."""
    if l == 0:
        return arr
    out = np.zeros_like(arr)
    if l > 0:
        out[..., :-l] = arr[..., l:]
    else:
        out[..., -l:] = arr[..., :l]
    return out


def from_tridiagonal(diag, off):
    """Band array of the symmetric tridiagonal matrix with the given diagonals."""
    diag = np.asarray(diag)
    G = np.zeros(diag.shape[:-1] + (3, diag.shape[-1]), dtype=np.result_type(diag, off))
    G[..., 1, :] = diag
    G[..., 2, :-1] = off
    G[..., 0, 1:] = off
    return G


def identity_like(G):
    out = np.zeros(G.shape[:-2] + (1, G.shape[-1]), dtype=G.dtype)
    out[..., 0, :] = 1.0
    return out


def mul(A, B):
    """Banded product ``A @ B``; the result has half-width ``wa + wb``."""
    wa, wb = half_width(A), half_width(B)
    w = wa + wb
    shape = np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + (2 * w + 1, A.shape[-1])
    C = np.zeros(shape, dtype=np.result_type(A, B))
    for l in range(-wa, wa + 1):
        Bs = shift(B, l)
        # C[i, i+k] += A[i, i+l] * B[i+l, i+k], k - l in [-wb, wb]
        C[..., w + l - wb: w + l + wb + 1, :] += A[..., wa + l, None, :] * Bs
    return C


def add(A, B):
    wa, wb = half_width(A), half_width(B)
    w = max(wa, wb)
    shape = np.broadcast_shapes(A.shape[:-2], B.shape[:-2]) + (2 * w + 1, A.shape[-1])
    C = np.zeros(shape, dtype=np.result_type(A, B))
    C[..., w - wa: w + wa + 1, :] += A
    C[..., w - wb: w + wb + 1, :] += B
    return C


def frobenius(A, B):
    """``tr(A B^T)``, i.e. ``tr(A B)`` for symmetric ``B``, over the last two axes."""
    wa, wb = half_width(A), half_width(B)
    w = min(wa, wb)
    return np.einsum("...ij,...ij->...", A[..., wa - w: wa + w + 1, :], B[..., wb - w: wb + w + 1, :])


def scale(A, c):
    return A * c


def diagonal(G, k=0):
    """Entries ``M[i, i+k]`` for valid ``i`` (length ``n - |k|``)."""
    w = half_width(G)
    if abs(k) > w:
        return np.zeros(G.shape[:-2] + (G.shape[-1] - abs(k),), dtype=G.dtype)
    row = G[..., w + k, :]
    return row[..., : G.shape[-1] - k] if k >= 0 else row[..., -k:]


def to_dense(G):
    w = half_width(G)
    n = G.shape[-1]
    out = np.zeros(G.shape[:-2] + (n, n), dtype=G.dtype)
    for k in range(-w, w + 1):
        if abs(k) >= n:
            continue
        idx = np.arange(max(0, -k), min(n, n - k))
        out[..., idx, idx + k] = G[..., w + k, idx]
    return out
