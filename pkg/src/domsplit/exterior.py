"""Compound matrices and log-scaled products.

Small singular values of a long product are lost when the product is formed and
then decomposed in double precision.  ``log V_q(A^n)`` is instead read off as the
top singular value of the q-th compound of the product, which is computed to full
relative accuracy; ``log c_q = log V_q - log V_{q-1}``.  Singular subspaces are
recovered the same way from the top singular vectors of the compound.
"""
from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations

import numpy as np
import scipy.linalg

NEG_INF = -math.inf


@lru_cache(maxsize=None)
def subsets(d: int, q: int) -> tuple:
    return tuple(combinations(range(d), q))


@lru_cache(maxsize=None)
def _subset_index(d: int, q: int) -> dict:
    return {s: i for i, s in enumerate(subsets(d, q))}


def compound(A: np.ndarray, q: int) -> np.ndarray:
    """q-th compound matrix: all q x q minors, rows/cols in lexicographic subset order."""
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    if q == 0:
        return np.ones((1, 1))
    if q == 1:
        return A.copy()
    idx = np.array(subsets(d, q))
    blocks = A[idx[:, None, :, None], idx[None, :, None, :]]
    return np.linalg.det(blocks)


def log_top_singular_values(mats, q: int, with_products: bool = False):
    """``log sigma_1`` of the q-th compound of every prefix product ``A_{m-1}..A_0``.

    Entry ``m`` (m = 0..len(mats)) is ``log V_q(A_{m-1} ... A_0)`` in the Euclidean
    norm; ``-inf`` once the product vanishes.  With ``with_products`` also returns
    the normalized compound products and their log scales.
    """
    mats = list(mats)
    d = mats[0].shape[0] if mats else 0
    n = len(mats)
    out = np.empty(n + 1)
    out[0] = 0.0
    if q == 0:
        out[:] = 0.0
        return (out, None, None) if with_products else out
    size = math.comb(d, q) if d else 1
    prods = np.empty((n + 1, size, size))
    scales = np.zeros(n + 1)
    P = np.eye(size)
    prods[0] = P
    log_scale = 0.0
    dead = n + 1
    for m, A in enumerate(mats, start=1):
        P = (A if q == 1 else compound(A, q)) @ P
        s = np.max(np.linalg.norm(P, axis=0))
        if not np.isfinite(s):
            raise FloatingPointError("non-finite entry in cocycle product")
        if s == 0.0:
            dead = m
            break
        P = P / s
        log_scale += math.log(s)
        prods[m] = P
        scales[m] = log_scale
    live = min(dead, n + 1)
    if live > 1:
        sv = np.linalg.norm(prods[1:live], ord=2, axis=(1, 2))
        with np.errstate(divide="ignore"):
            out[1:live] = np.log(sv) + scales[1:live]
    out[live:] = NEG_INF
    if with_products:
        return out, prods[:live], scales[:live]
    return out


def normalized_product(mats, q: int = 1):
    """Returns ``(P, log_scale)`` with ``compound(A_{n-1}..A_0, q) = exp(log_scale) * P``."""
    mats = list(mats)
    d = mats[0].shape[0]
    size = math.comb(d, q)
    P = np.eye(size)
    log_scale = 0.0
    for A in mats:
        P = (A if q == 1 else compound(A, q)) @ P
        s = np.max(np.linalg.norm(P, axis=0))
        if s == 0.0:
            return np.zeros_like(P), NEG_INF
        if not np.isfinite(s):
            raise FloatingPointError("non-finite entry in cocycle product")
        P = P / s
        log_scale += math.log(s)
    return P, log_scale


def successive_differences(log_v: np.ndarray) -> np.ndarray:
    """Differences ``log V_q - log V_{q-1}`` along axis 0, with ``-inf`` propagation."""
    out = np.empty_like(log_v)
    prev = np.zeros(log_v.shape[1:])
    for q in range(log_v.shape[0]):
        cur = log_v[q]
        with np.errstate(invalid="ignore"):
            diff = cur - prev
        out[q] = np.where(np.isneginf(cur), NEG_INF, diff)
        prev = cur
    return out


def blade_basis(omega: np.ndarray, d: int, k: int) -> np.ndarray:
    """Orthonormal basis (d x k) of the subspace whose Pluecker vector is ``omega``.

    Uses ``E = ker(v -> v ^ omega)``.
    """
    if k == d:
        return np.eye(d)
    if k == 0:
        return np.zeros((d, 0))
    if k == 1:
        v = np.asarray(omega, dtype=float)
        return (v / np.linalg.norm(v)).reshape(d, 1)
    higher = _subset_index(d, k + 1)
    W = np.zeros((len(higher), d))
    for col, I in enumerate(subsets(d, k)):
        w = omega[col]
        if w == 0.0:
            continue
        for i in range(d):
            if i in I:
                continue
            J = tuple(sorted(I + (i,)))
            sign = -1.0 if sum(1 for j in I if j < i) % 2 else 1.0
            W[higher[J], i] += sign * w
    _, _, vt = np.linalg.svd(W)
    return vt[d - k:].T


def top_left_subspace(mats, k: int):
    """Top-k left singular subspace of ``A_{n-1}..A_0`` with the relative gap ``1 - s_{k+1}/s_k``."""
    d = mats[0].shape[0]
    P, _ = normalized_product(mats, k)
    u, s, _ = np.linalg.svd(P)
    gap = 1.0 - (s[1] / s[0] if len(s) > 1 else 0.0)
    return blade_basis(u[:, 0], d, k), gap


def top_right_subspace(mats, k: int):
    d = mats[0].shape[0]
    P, _ = normalized_product(mats, k)
    _, s, vt = np.linalg.svd(P)
    gap = 1.0 - (s[1] / s[0] if len(s) > 1 else 0.0)
    return blade_basis(vt[0], d, k), gap


def orthonormal(B: np.ndarray) -> np.ndarray:
    q, _ = np.linalg.qr(np.asarray(B, dtype=float))
    return q


def complement(Q: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(Q)``."""
    d = Q.shape[0]
    if Q.shape[1] == 0:
        return np.eye(d)
    return scipy.linalg.null_space(Q.T)


def principal_angles(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Principal angles (radians, descending) between ``span(A)`` and ``span(B)``."""
    return scipy.linalg.subspace_angles(A, B)


def subspace_distance(A: np.ndarray, B: np.ndarray) -> float:
    """Largest principal angle; for equal dimensions this is the gap metric's arcsine."""
    if A.shape[1] == 0 and B.shape[1] == 0:
        return 0.0
    return float(np.max(principal_angles(A, B)))


def intersection(A: np.ndarray, B: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Orthonormal basis of ``span(A) & span(B)`` (both given by orthonormal columns)."""
    M = np.hstack([A, -B])
    _, s, vt = np.linalg.svd(M)
    s_full = np.zeros(M.shape[1])
    s_full[: len(s)] = s
    null = vt[s_full <= tol * max(1.0, s_full[0])].T
    if null.shape[1] == 0:
        return np.zeros((A.shape[0], 0))
    return orthonormal(A @ null[: A.shape[1]])


COMPOUND_LIMIT = 256


def log_volumes(mats, q_max: int) -> np.ndarray:
    """``log V_q`` of every prefix product for q = 1..q_max, shape (q_max, n+1).

    Compounds are used while their size stays below ``COMPOUND_LIMIT``; beyond that
    the singular values of the rescaled product are used directly, so volumes below
    ``eps`` times the top one read as ``-inf``.
    """
    mats = list(mats)
    n = len(mats)
    d = mats[0].shape[0] if mats else 1
    out = np.full((q_max, n + 1), NEG_INF)
    out[:, 0] = 0.0
    small = [q for q in range(1, q_max + 1) if math.comb(d, q) <= COMPOUND_LIMIT]
    for q in small:
        out[q - 1] = log_top_singular_values(mats, q)
    rest = [q for q in range(1, q_max + 1) if q not in small]
    if rest and n:
        P = np.eye(d)
        log_scale = 0.0
        floor = d * np.finfo(float).eps
        for m, A in enumerate(mats, start=1):
            P = A @ P
            s = np.max(np.linalg.norm(P, axis=0))
            if s == 0.0:
                break
            P = P / s
            log_scale += math.log(s)
            sv = np.linalg.svd(P, compute_uv=False)
            with np.errstate(divide="ignore"):
                logs = np.where(sv > floor * sv[0], np.log(np.maximum(sv, 1e-300)), NEG_INF)
            cum = np.cumsum(logs) + np.arange(1, d + 1) * log_scale
            for q in rest:
                out[q - 1, m] = cum[q - 1]
    return out
