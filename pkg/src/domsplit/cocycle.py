"""Locally constant matrix cocycles over an SFT.

Three constructive families, all determined by a finite window of the point:

* :class:`LocallyConstant` - table lookup on ``x[-r..r]``;
* :class:`ConjugatedDiagonal` - ``A(x) = P(sigma x) D(x) P(x)^{-1}`` with ``P`` and
  ``D`` locally constant, so ``A^n(x) = P(sigma^n x) D_n P(x)^{-1}``;
* :class:`WeightedShift` - the Galerkin truncation of ``(Tv)_i = w_i(x) v_{i+1}``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DomainError, NumericOverflowError, SingularityError
from .exterior import orthonormal, subspace_distance
from .sft import Point, SftSystem, point_distance
from .snumbers import NormContext


def admissible_words(sys: SftSystem, length: int) -> list[tuple]:
    words = [(s,) for s in range(sys.alphabet_size)]
    for _ in range(length - 1):
        words = [w + (b,) for w in words for b in sys.successors[w[-1]]]
    return sorted(words)


def _as_word(key) -> tuple:
    if isinstance(key, (int, np.integer)):
        return (int(key),)
    if isinstance(key, str):
        return tuple(int(c) for c in key.replace(",", ""))
    return tuple(int(c) for c in key)


def _check_matrix(M, d=None, what="matrix") -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError(f"{what} must be square")
    if d is not None and M.shape[0] != d:
        raise DomainError(f"{what} has size {M.shape[0]}, expected {d}")
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{what} has non-finite entries")
    M.setflags(write=False)
    return M


def _check_table(sys: SftSystem, radius: int, table: Mapping, what: str) -> dict:
    table = {_as_word(k): v for k, v in table.items()}
    expected = set(admissible_words(sys, 2 * radius + 1))
    got = set(table)
    if got != expected:
        missing = sorted(expected - got)[:3]
        extra = sorted(got - expected)[:3]
        raise DomainError(f"{what} must cover exactly the admissible words of length {2 * radius + 1}"
                          f" (missing {missing}, unexpected {extra})")
    return table


@dataclass(frozen=True)
class LocallyConstant:
    radius: int
    table: dict

    name = "locally_constant"

    def prepare(self, sys):
        table = _check_table(sys, self.radius, self.table, "table")
        mats = {w: _check_matrix(M, what=f"table[{w}]") for w, M in table.items()}
        dims = {M.shape[0] for M in mats.values()}
        if len(dims) != 1:
            raise DomainError("table matrices have different sizes")
        object.__setattr__(self, "table", mats)
        return dims.pop()

    @property
    def window_radius(self) -> int:
        return self.radius

    def matrix(self, window: tuple) -> np.ndarray:
        return self.table[window]


@dataclass(frozen=True)
class ConjugatedDiagonal:
    """``A(x) = P(sigma x) diag(exp(lambda(x))) P(x)^{-1}``.

    ``exponents`` is either one vector or a table (radius ``exponent_radius``) of
    per-window vectors; ``conjugacy`` is a table of invertible matrices.
    """

    exponents: object
    conjugacy: dict
    conjugacy_radius: int = 0
    exponent_radius: int = 0
    cond_bound: float = 1e6

    name = "conjugated_diagonal"

    def prepare(self, sys):
        conj = _check_table(sys, self.conjugacy_radius, self.conjugacy, "conjugacy")
        conj = {w: _check_matrix(P, what=f"conjugacy[{w}]") for w, P in conj.items()}
        d = {P.shape[0] for P in conj.values()}
        if len(d) != 1:
            raise DomainError("conjugacy matrices have different sizes")
        d = d.pop()
        for w, P in conj.items():
            cond = np.linalg.cond(P)
            if not cond < self.cond_bound:
                raise DomainError(f"conjugacy[{w}] has condition number {cond:.3g} >= {self.cond_bound}")
        if isinstance(self.exponents, Mapping):
            exps = _check_table(sys, self.exponent_radius, self.exponents, "exponents")
            exps = {w: np.array(v, dtype=float) for w, v in exps.items()}
        else:
            object.__setattr__(self, "exponent_radius", 0)
            v = np.array(self.exponents, dtype=float)
            exps = {w: v for w in admissible_words(sys, 1)}
        for w, v in exps.items():
            if v.shape != (d,) or not np.all(np.isfinite(v)):
                raise DomainError(f"exponents[{w}] must be {d} finite reals")
        object.__setattr__(self, "conjugacy", conj)
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "_inverses", {w: np.linalg.inv(P) for w, P in conj.items()})
        return d

    @property
    def window_radius(self) -> int:
        return max(self.conjugacy_radius + 1, self.exponent_radius)

    def conjugacy_at(self, x: Point) -> np.ndarray:
        r = self.conjugacy_radius
        return self.conjugacy[x.window(-r, r + 1)]

    def exponents_at(self, x: Point) -> np.ndarray:
        r = self.exponent_radius
        return self.exponents[x.window(-r, r + 1)]

    def matrix(self, window: tuple) -> np.ndarray:
        r = self.window_radius
        rp, rd = self.conjugacy_radius, self.exponent_radius
        here = window[r - rp: r + rp + 1]
        there = window[r + 1 - rp: r + rp + 2]
        lam = self.exponents[window[r - rd: r + rd + 1]]
        return self.conjugacy[there] @ np.diag(np.exp(lam)) @ self._inverses[here]


@dataclass(frozen=True)
class WeightedShift:
    """Truncation to ``truncation`` coordinates of ``(Tv)_i = a(x) decay^i v_{i+1}``."""

    truncation: int
    amplitudes: dict
    radius: int = 0
    decay: float = 1.0

    name = "galerkin"

    def prepare(self, sys):
        if self.truncation < 2:
            raise DomainError("truncation must be >= 2")
        amps = _check_table(sys, self.radius, self.amplitudes, "amplitudes")
        object.__setattr__(self, "amplitudes", {w: float(a) for w, a in amps.items()})
        return self.truncation

    @property
    def window_radius(self) -> int:
        return self.radius

    def matrix(self, window: tuple) -> np.ndarray:
        D = self.truncation
        a = self.amplitudes[window]
        T = np.zeros((D, D))
        idx = np.arange(D - 1)
        T[idx, idx + 1] = a * self.decay ** idx
        return T


class CocycleSpec:
    """A generator ``x -> A(x)`` over an SFT, plus norm context and Hoelder metadata.

    Immutable after construction; every window's matrix is precomputed.
    """

    def __init__(self, system: SftSystem, family, norm_context: NormContext | None = None,
                 holder_alpha: float = 1.0, injective: bool | None = None):
        self.system = system
        self.family = family
        self.dimension = family.prepare(system)
        self.norm_context = norm_context or NormContext.euclidean(self.dimension)
        if self.norm_context.dimension != self.dimension:
            raise DomainError("norm context dimension does not match the cocycle")
        if not 0 < holder_alpha <= 1:
            raise DomainError("holder_alpha must lie in (0, 1]")
        self.holder_alpha = float(holder_alpha)
        r = family.window_radius
        self.window_radius = r
        self._table = {w: _check_matrix(family.matrix(w), self.dimension)
                       for w in admissible_words(system, 2 * r + 1)}
        self.min_singular_value = min(float(np.linalg.svd(M, compute_uv=False)[-1]) for M in self._table.values())
        actually_injective = self.min_singular_value > 0
        if injective is None:
            injective = actually_injective and not isinstance(family, WeightedShift)
        if injective and not actually_injective:
            raise DomainError("injective=true but some generator matrix is singular")
        self.injective = bool(injective)
        self.max_log_norm = max(math.log(np.linalg.norm(M, 2)) if np.any(M) else -math.inf
                                for M in self._table.values())

    def __repr__(self):
        return f"CocycleSpec({self.family.name}, d={self.dimension}, {self.system!r})"

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, system, A0, **kw):
        return cls.locally_constant(system, 0, {(s,): A0 for s in range(system.alphabet_size)}, **kw)

    @classmethod
    def locally_constant(cls, system, radius, table, **kw):
        return cls(system, LocallyConstant(radius, dict(table)), **kw)

    @classmethod
    def one_step(cls, system, by_symbol: Mapping, **kw):
        return cls.locally_constant(system, 0, {(int(s),): M for s, M in by_symbol.items()}, **kw)

    @classmethod
    def conjugated_diagonal(cls, system, exponents, conjugacy, conjugacy_radius=0, exponent_radius=0,
                            cond_bound=1e6, **kw):
        return cls(system, ConjugatedDiagonal(exponents, dict(conjugacy), conjugacy_radius, exponent_radius,
                                              cond_bound), **kw)

    @classmethod
    def weighted_shift(cls, system, truncation, amplitudes, radius=0, decay=1.0, **kw):
        kw.setdefault("injective", False)
        return cls(system, WeightedShift(truncation, dict(amplitudes), radius, decay), **kw)

    # -- evaluation ---------------------------------------------------------
    def _check_point(self, x: Point):
        if x.system is not None and x.system is not self.system:
            raise DomainError("point belongs to a different system")

    def matrix_for_window(self, window: tuple) -> np.ndarray:
        try:
            return self._table[window]
        except KeyError:
            raise DomainError(f"inadmissible window {window}") from None

    def stack(self, x: Point, start: int, stop: int) -> np.ndarray:
        """``A(f^i x)`` for ``start <= i < stop`` as an array of shape (stop-start, d, d)."""
        self._check_point(x)
        r = self.window_radius
        syms = x.window(start - r, stop + r)
        w = 2 * r + 1
        out = np.empty((max(stop - start, 0), self.dimension, self.dimension))
        for i in range(stop - start):
            out[i] = self.matrix_for_window(syms[i: i + w])
        return out

    def generator_matrices(self) -> list[np.ndarray]:
        return list(self._table.values())


def evaluate(spec: CocycleSpec, x: Point) -> np.ndarray:
    spec._check_point(x)
    r = spec.window_radius
    return spec.matrix_for_window(x.window(-r, r + 1))


def product(spec: CocycleSpec, x: Point, n: int) -> np.ndarray:
    """``A^n(x) = A(f^{n-1}x) ... A(x)``; identity for n = 0."""
    if n < 0:
        raise DomainError("n must be >= 0")
    P = np.eye(spec.dimension)
    with np.errstate(over="ignore", invalid="ignore"):
        for A in spec.stack(x, 0, n):
            P = A @ P
    if not np.all(np.isfinite(P)):
        raise NumericOverflowError(f"A^{n}(x) overflows double precision; use the log-scaled profile operations")
    return P


@dataclass
class RestrictedInverse:
    """``A^{-n}(x)``: the inverse of ``A^n(f^{-n}x)`` restricted to ``E(f^{-n}x) -> E(x)``.

    ``matrix`` acts on coordinates in the orthonormal basis ``domain`` (of ``E(x)``)
    and returns coordinates in ``codomain`` (of ``E(f^{-n}x)``).
    """

    domain: np.ndarray
    codomain: np.ndarray
    matrix: np.ndarray
    alignment: float = 0.0

    def __call__(self, u) -> np.ndarray:
        return self.codomain @ (self.matrix @ (self.domain.T @ np.asarray(u, dtype=float)))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))


def propagate_frame(mats, Q: np.ndarray):
    """Push an orthonormal frame through ``mats`` with QR at each step.

    Returns ``(Q_n, Rs)`` with ``A_{n-1}..A_0 Q_0 = Q_n R_{n-1} ... R_0``.
    """
    Rs = []
    for A in mats:
        Q, R = np.linalg.qr(A @ Q)
        Rs.append(R)
    return Q, Rs


def restricted_inverse(spec: CocycleSpec, x: Point, n: int, E: np.ndarray, E_source: np.ndarray | None = None,
                       tol: float = 1e-6) -> RestrictedInverse:
    """Inverse of ``A^n(f^{-n}x)`` on the k-dimensional bundle ending at ``E`` (d x k basis).

    ``E_source`` is a basis of the preimage subspace at ``f^{-n}x``; without it the
    preimage is pulled back one step at a time, which is refused once the step
    condition numbers could amplify round-off beyond ``tol``.
    """
    E = orthonormal(E)
    k = E.shape[1]
    if n == 0:
        return RestrictedInverse(E, E, np.eye(k))
    mats = spec.stack(x, -n, 0)
    if E_source is None:
        # round-off in the pull-back can grow like the product of the step condition numbers,
        # and the forward check cannot see it when E attracts
        amp = float(np.sum(np.log(np.linalg.cond(mats))))
        if amp + math.log(np.finfo(float).eps) > math.log(tol):
            raise DomainError(f"pulling E back {n} steps is too ill-conditioned (log amplification {amp:.3g});"
                              " pass an independently computed E_source")
        W = E
        for A in mats[::-1]:
            W = orthonormal(np.linalg.lstsq(A, W, rcond=None)[0])
        E_source = W
    E_source = orthonormal(E_source)
    Q, Rs = propagate_frame(mats, E_source)
    angle = subspace_distance(Q, E)
    if angle > tol:
        raise DomainError(f"A^{n}(f^-{n} x) does not map the source subspace onto E (angle {angle:.3g})")
    T = E.T @ Q
    # (T R_{n-1} .. R_0)^{-1} = R_0^{-1} .. R_{n-1}^{-1} T^{-1}
    inv = np.eye(k)
    for R in Rs:
        inv = inv @ np.linalg.inv(R)
    inv = inv @ np.linalg.inv(T)
    smin = 1.0 / np.linalg.norm(inv, 2) if np.all(np.isfinite(inv)) else 0.0
    if not smin >= 1e-12:
        raise SingularityError(f"restricted product is numerically singular (smallest singular value {smin:.3g})")
    return RestrictedInverse(E, E_source, inv, angle)


@dataclass
class HolderEstimate:
    alpha_hat: float
    C_hat: float
    flag: str  # "fit", "locally_constant" or "degenerate"
    pairs_used: int = 0
    zero_below: float | None = field(default=None)


def holder_estimate(spec: CocycleSpec, sample_pairs: int = 200, seed: int = 0) -> HolderEstimate:
    """Fit ``||A(x) - A(y)|| <= C d(x, y)^alpha`` over random pairs.

    Locally constant generators vanish below ``exp(-(r + 1))``; they get
    ``alpha_hat = inf`` and a ``C_hat`` valid for every ``alpha <= 1``.
    """
    if sample_pairs < 2:
        raise DomainError("sample_pairs must be >= 2")
    rng = np.random.default_rng(seed)
    sys = spec.system
    r = spec.window_radius
    dist, diff = [], []
    for i in range(sample_pairs):
        x = sys.random_point(rng)
        if i % 2:
            # pairs close to x exercise the small-distance regime
            m = int(rng.integers(1, r + 4))
            y = _perturb_far(sys, x, m, rng)
        else:
            y = sys.random_point(rng)
        d = point_distance(x, y)
        if d == 0:
            continue
        dist.append(d)
        diff.append(float(np.linalg.norm(evaluate(spec, x) - evaluate(spec, y), 2)))
    dist, diff = np.array(dist), np.array(diff)
    if not np.any(diff > 0):
        return HolderEstimate(math.inf, 0.0, "degenerate", len(dist))
    nz = diff > 0
    # d <= 1, so a bound with alpha = 1 holds for every alpha <= 1
    if np.all(dist[nz] > math.exp(-(r + 1)) * (1 - 1e-12)):
        C_hat = float(np.max(diff[nz] / dist[nz]))
        return HolderEstimate(math.inf, C_hat, "locally_constant", len(dist), math.exp(-(r + 1)))
    slope, intercept = np.polyfit(np.log(dist[nz]), np.log(diff[nz]), 1)
    return HolderEstimate(float(slope), float(math.exp(intercept)), "fit", int(nz.sum()))


def _perturb_far(sys: SftSystem, x: Point, m: int, rng) -> Point:
    """A point agreeing with ``x`` on ``[-m+1, m-1]`` whose tails are resampled."""
    core = x.window(-m + 1, m)
    right_walk = sys.random_word(rng, int(rng.integers(1, 5)),
                                 start=sys.successors[core[-1]][int(rng.integers(len(sys.successors[core[-1]])))])
    right = right_walk + sys.connector(right_walk[-1], right_walk[0])
    preds = [a for a in range(sys.alphabet_size) if sys.allowed(a, core[0])]
    last = preds[int(rng.integers(len(preds)))]
    left_walk = sys.random_word(rng, int(rng.integers(1, 5)))
    left = left_walk + sys.connector(left_walk[-1], left_walk[0])
    bridge = sys.connector(left[-1], last)
    center = bridge + (last,) + core
    return sys.point(left, center, right, len(bridge) + 1 + m - 1)
