"""Gelfand numbers, maximal volume growth and the finite-rank noncompactness value.

Only the Euclidean norm has exact Gelfand numbers (singular values).  Under the
polyhedral norms L1 and LInf, ``c_k`` is bracketed: the upper end is a minimum of
exact restricted norms over sampled codimension-(k-1) subspaces, the lower end
comes from norm equivalence and, for lines in the plane, a Lipschitz bound over
an angle grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.spatial import QhullError

from .errors import DomainError
from .exterior import compound, orthonormal

NEG_INF = -math.inf


class NormKind(str, Enum):
    EUCLIDEAN = "euclidean"
    L1 = "l1"
    LINF = "linf"


@dataclass(frozen=True)
class NormContext:
    kind: NormKind = NormKind.EUCLIDEAN
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", NormKind(self.kind))
        if self.dimension < 1:
            raise DomainError("dimension must be positive")

    @classmethod
    def euclidean(cls, d: int) -> "NormContext":
        return cls(NormKind.EUCLIDEAN, d)

    @property
    def is_euclidean(self) -> bool:
        return self.kind is NormKind.EUCLIDEAN

    def vector_norm(self, v) -> float:
        v = np.asarray(v, dtype=float)
        if self.kind is NormKind.EUCLIDEAN:
            return float(np.linalg.norm(v))
        if self.kind is NormKind.L1:
            return float(np.abs(v).sum())
        return float(np.abs(v).max())

    def column_norms(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=float)
        if self.kind is NormKind.EUCLIDEAN:
            return np.linalg.norm(M, axis=0)
        if self.kind is NormKind.L1:
            return np.abs(M).sum(axis=0)
        return np.abs(M).max(axis=0)

    def operator_norm(self, T) -> float:
        T = np.asarray(T, dtype=float)
        if self.kind is NormKind.EUCLIDEAN:
            return float(np.linalg.norm(T, 2))
        if self.kind is NormKind.L1:
            return float(np.abs(T).sum(axis=0).max())
        return float(np.abs(T).sum(axis=1).max())

    def dual(self) -> "NormContext":
        swap = {NormKind.EUCLIDEAN: NormKind.EUCLIDEAN, NormKind.L1: NormKind.LINF, NormKind.LINF: NormKind.L1}
        return NormContext(swap[self.kind], self.dimension)

    def dual_norm(self, w) -> float:
        """``sup{<w, v> : ||v|| <= 1}``."""
        return self.dual().vector_norm(w)

    # constants a, b with a|v|_2 <= |v| <= b|v|_2
    def equivalence(self) -> tuple[float, float]:
        r = math.sqrt(self.dimension)
        if self.kind is NormKind.EUCLIDEAN:
            return 1.0, 1.0
        if self.kind is NormKind.L1:
            return 1.0, r
        return 1.0 / r, 1.0

    def from_euclidean_bound(self, T) -> float:
        """An upper bound for ``sup{|Tu| : |u|_2 = 1}``."""
        T = np.asarray(T, dtype=float)
        if self.kind is NormKind.LINF:
            return float(np.linalg.norm(T, axis=1).max())
        return self.equivalence()[1] * float(np.linalg.norm(T, 2))


@dataclass(frozen=True)
class NoncompactnessValue:
    value: float = 0.0
    log_value: float = NEG_INF


def noncompactness(T) -> NoncompactnessValue:
    """Every finite matrix is compact: ``(0, -inf)``."""
    np.asarray(T)
    return NoncompactnessValue(0.0, NEG_INF)


def kappa_condition(lambda_next: float, kappa: float = NEG_INF) -> bool:
    """``lambda_{k+1} > sup kappa``; always true for finite rank unless lambda is -inf."""
    return lambda_next > kappa


def singular_values(T) -> np.ndarray:
    s = np.linalg.svd(np.asarray(T, dtype=float), compute_uv=False)
    s = np.sort(np.where(s < 0, 0.0, s))[::-1]
    return s


def _check_k(T, k):
    d = np.asarray(T).shape[0]
    if not 1 <= k <= d:
        raise DomainError(f"index k={k} outside 1..{d}")
    return d


def gelfand(T, k: int, norm: NormContext | None = None, samples: int = 500, seed: int = 0) -> float:
    """k-th Gelfand number; exact in the Euclidean norm, certified upper bound otherwise."""
    d = _check_k(T, k)
    norm = norm or NormContext.euclidean(d)
    if norm.is_euclidean:
        return float(singular_values(T)[k - 1])
    if k == 1:
        return norm.operator_norm(T)
    return gelfand_bracket(T, k, norm, samples, seed)[1]


def restricted_norm(T, B, norm: NormContext) -> float:
    """``||T restricted to span(B)||`` for a d x m basis ``B`` (exact vertex maximization)."""
    T = np.asarray(T, dtype=float)
    B = np.asarray(B, dtype=float)
    m = B.shape[1]
    if norm.is_euclidean:
        return float(np.linalg.norm(T @ orthonormal(B), 2))
    if m == 1:
        b = B[:, 0]
        return norm.vector_norm(T @ b) / norm.vector_norm(b)
    verts = _section_vertices(B, norm)
    return max(norm.vector_norm(T @ (B @ y)) for y in verts)


def _section_halfspaces(B, norm):
    d, m = B.shape
    if norm.kind is NormKind.LINF:
        rows = np.vstack([B, -B])
    else:
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * d, indexing="ij")).reshape(d, -1).T
        rows = signs @ B
    # qhull format: A y + b <= 0
    return np.hstack([rows, -np.ones((rows.shape[0], 1))])


def _section_vertices(B, norm):
    """Vertices of the polytope ``{y : ||B y|| <= 1}``."""
    hs = _section_halfspaces(B, norm)
    try:
        return HalfspaceIntersection(hs, np.zeros(B.shape[1])).intersections
    except QhullError:
        hs = hs[np.unique(np.round(hs, 14), axis=0, return_index=True)[1]]
        return HalfspaceIntersection(hs, np.zeros(B.shape[1]), qhull_options="QJ").intersections


def section_volume(Q, norm: NormContext) -> float:
    """Euclidean k-volume of the unit ball intersected with ``span(Q)`` (orthonormal Q)."""
    k = Q.shape[1]
    if norm.is_euclidean:
        return math.pi ** (k / 2) / math.gamma(k / 2 + 1)
    if k == 1:
        return 2.0 / norm.vector_norm(Q[:, 0])
    return float(ConvexHull(_section_vertices(Q, norm)).volume)


def _random_subspaces(rng, d, m, count):
    for _ in range(count):
        yield orthonormal(rng.normal(size=(d, m)))


def _line_grid(samples, rng):
    offset = rng.uniform(0, math.pi / samples)
    return offset + np.arange(samples) * (math.pi / samples)


def gelfand_bracket(T, k: int, norm: NormContext | None = None, samples: int = 1000, seed: int = 0,
                    volume_constant: float | None = None) -> tuple[float, float]:
    """``(lower, upper)`` with ``lower <= c_k(T) <= upper``.

    ``volume_constant`` supplies the constant relating volume growth to products
    of Gelfand numbers; it is 1 for the Euclidean norm and unknown otherwise, so the
    corresponding lower bound is only used when given.
    """
    T = np.asarray(T, dtype=float)
    d = _check_k(T, k)
    norm = norm or NormContext.euclidean(d)
    if samples < 1:
        raise DomainError("samples must be >= 1")
    if not np.any(T):
        return 0.0, 0.0
    if k == 1:
        op = norm.operator_norm(T)
        return op, op
    rng = np.random.default_rng(seed)
    m = d - k + 1
    sv, vt = np.linalg.svd(T)[1:]
    lower = singular_values(T)[k - 1] / (norm.equivalence()[1] / norm.equivalence()[0])

    if d == 2 and m == 1:
        thetas = _line_grid(samples, rng)
        V = np.vstack([np.cos(thetas), np.sin(thetas)])
        TV = T @ V
        num = norm.column_norms(TV)
        den = norm.column_norms(V)
        upper = float(np.min(num / den))
        # for a polyhedral norm the ratio is monotone between the lines where v or Tv
        # meets a vertex direction of the unit ball, so those lines contain the minimum
        kinks = [vt[-1]]
        if not norm.is_euclidean:
            verts = [np.array([1.0, 1.0]), np.array([1.0, -1.0])] if norm.kind is NormKind.LINF else list(np.eye(2))
            kinks += verts
            if sv[-1] > 1e-14 * sv[0]:
                kinks += [np.linalg.solve(T, u) for u in verts]
        for v in kinks:
            upper = min(upper, norm.vector_norm(T @ v) / norm.vector_norm(v))
        # Lipschitz bound between neighbouring grid lines (wrap-around at pi)
        LT = norm.from_euclidean_bound(T)
        LI = norm.equivalence()[1]
        gaps = np.diff(np.append(thetas, thetas[0] + math.pi))
        left = (num - LT * gaps) / (den + LI * gaps)
        right = (np.roll(num, -1) - LT * gaps) / (np.roll(den, -1) + LI * gaps)
        lower = max(lower, float(np.min(np.maximum(left, right))))
    else:
        # the Euclidean optimum is always a candidate
        upper = restricted_norm(T, vt[k - 1:].T, norm)
        for B in _random_subspaces(rng, d, m, samples):
            upper = min(upper, restricted_norm(T, B, norm))

    if norm.is_euclidean:
        volume_constant = 1.0
    if volume_constant is not None:
        uppers = [gelfand_bracket(T, j, norm, samples, seed)[1] for j in range(1, k)]
        denom = volume_constant * math.prod(uppers)
        if denom > 0:
            lower = max(lower, volume_growth(T, k, norm, samples, seed) / denom)
    lower = min(max(lower, 0.0), upper)
    return float(lower), float(upper)


def restricted_determinant(T, Q, norm: NormContext) -> float:
    """``det(T|_V)`` for ``V = span(Q)`` with Haar measures normalized on unit balls; 0 if not injective."""
    T = np.asarray(T, dtype=float)
    TQ = T @ Q
    k = Q.shape[1]
    U, s, _ = np.linalg.svd(TQ, full_matrices=False)
    if s[-1] <= 1e-14 * max(1.0, s[0]):
        return 0.0
    detE = float(np.prod(s))
    if norm.is_euclidean:
        return detE
    return detE * section_volume(Q, norm) / section_volume(U[:, :k], norm)


def volume_growth(T, k: int, norm: NormContext | None = None, samples: int = 500, seed: int = 0) -> float:
    """Maximal k-volume growth ``V_k(T)``.

    Euclidean: top singular value of the k-th compound (exact).  L1/LInf: maximum
    of exact restricted determinants over sampled k-subspaces, so an estimate from
    below only.
    """
    T = np.asarray(T, dtype=float)
    d = _check_k(T, k)
    norm = norm or NormContext.euclidean(d)
    if norm.is_euclidean:
        return float(np.linalg.norm(compound(T, k), 2))
    if k == d:
        return abs(float(np.linalg.det(T)))
    rng = np.random.default_rng(seed)
    _, _, vt = np.linalg.svd(T)
    best = restricted_determinant(T, vt[:k].T, norm)
    for Q in _random_subspaces(rng, d, k, samples):
        best = max(best, restricted_determinant(T, Q, norm))
    return best


@dataclass
class GelfandProfile:
    """``log c_q(A^n(x))`` and ``log V_q(A^n(x))`` for q = 1..q_max, n = 0..n_max.

    Row ``q - 1`` holds index q.  Entries are ``-inf`` where the product has rank < q.
    """

    point: object
    log_c: np.ndarray
    log_v: np.ndarray

    @property
    def q_max(self) -> int:
        return self.log_c.shape[0]

    @property
    def n_max(self) -> int:
        return self.log_c.shape[1] - 1

    def c(self, q: int, n: int) -> float:
        return float(self.log_c[q - 1, n])

    def rows(self):
        for q in range(1, self.q_max + 1):
            for n in range(self.n_max + 1):
                yield n, q, float(self.log_c[q - 1, n])
