"""Volume-growth rates, exceptional exponents and the convergence probes.

Everything is measured in the Euclidean norm: finite-time values differ between
equivalent norms only by O(1/n), and the limits coincide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cocycle import CocycleSpec
from .errors import DomainError
from .exterior import log_volumes, successive_differences
from .periodic_data import NarrownessReport, eigen_moduli, scan_narrowness
from .sft import PeriodicOrbit, Point, SftSystem, close_orbit
from .snumbers import GelfandProfile, NEG_INF

KAPPA = NEG_INF
KAPPA_NOTE = "kappa = -inf for finite-rank generators; the essential-radius condition holds for every index"


def gelfand_profile(spec: CocycleSpec, x: Point, q_max: int | None = None, n_max: int = 60) -> GelfandProfile:
    d = spec.dimension
    q_max = d if q_max is None else q_max
    if not 1 <= q_max <= d:
        raise DomainError(f"q_max={q_max} outside 1..{d}")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    if n_max == 0:
        z = np.zeros((q_max, 1))
        return GelfandProfile(x, z, z.copy())
    log_v = log_volumes(spec.stack(x, 0, n_max), q_max)
    return GelfandProfile(x, successive_differences(log_v), log_v)


def finite_time_lq(spec: CocycleSpec, x: Point, q: int, n: int) -> float:
    """``(1/n) log V_q(A^n(x))``."""
    if not 1 <= q <= spec.dimension:
        raise DomainError(f"q={q} outside 1..{spec.dimension}")
    if n < 1:
        raise DomainError("n must be >= 1")
    return float(log_volumes(spec.stack(x, 0, n), q)[q - 1, n] / n)


def group_multiplicities(zeta: np.ndarray, tol: float) -> list[int]:
    """Run lengths of consecutive exponents closer than ``tol`` (``-inf`` values group together)."""
    runs = []
    prev = None
    for z in zeta:
        same = prev is not None and ((np.isneginf(z) and np.isneginf(prev)) or
                                     (np.isfinite(z) and np.isfinite(prev) and abs(z - prev) <= tol))
        if same:
            runs[-1] += 1
        else:
            runs.append(1)
        prev = z
    return runs


@dataclass
class LyapunovSpectrum:
    l: np.ndarray
    zeta: np.ndarray
    multiplicities: list
    n: int
    sample_count: int
    tol_group: float
    kappa: float = KAPPA
    notes: list = field(default_factory=list)

    @property
    def neg_inf_indices(self) -> list[int]:
        return [i + 1 for i, z in enumerate(self.zeta) if np.isneginf(z)]


def spectrum_estimate(spec: CocycleSpec, points: Sequence[Point] | Callable | None = None, q_max: int | None = None,
                      n: int = 200, seed: int = 0, sample_count: int = 8,
                      tol_group: float | None = None) -> LyapunovSpectrum:
    """Average ``l_q`` over sampled points and difference into ``zeta``.

    ``points`` is a list of points or a callable ``rng -> Point``; by default
    random eventually periodic points of the base system are drawn.
    """
    d = spec.dimension
    q_max = d if q_max is None else q_max
    if not 1 <= q_max <= d:
        raise DomainError(f"q_max={q_max} outside 1..{d}")
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = np.random.default_rng(seed)
    if points is None:
        points = spec.system.random_point
    if callable(points):
        points = [points(rng) for _ in range(sample_count)]
    points = list(points)
    if not points:
        raise DomainError("no sample points")
    rows = np.array([log_volumes(spec.stack(x, 0, n), q_max)[:, n] / n for x in points])
    l = rows.mean(axis=0)  # any -inf sample drives the mean to -inf
    zeta = successive_differences(l[:, None])[:, 0]
    fin = zeta[np.isfinite(zeta)]
    if tol_group is None:
        tol_group = 0.02 * (float(fin[0] - fin[-1]) + 1.0) if fin.size else 0.02
    notes = [KAPPA_NOTE]
    if np.any(np.isneginf(zeta)):
        notes.append("products lose rank: exponents at indices "
                     f"{[i + 1 for i, z in enumerate(zeta) if np.isneginf(z)]} are -inf")
    return LyapunovSpectrum(l, zeta, group_multiplicities(zeta, tol_group), n, len(points), tol_group, KAPPA, notes)


@dataclass
class UniformConvergenceProfile:
    k: int
    lambda_hat: float
    rows: list  # (n, e_n)
    convergent: bool
    advisory: bool
    sample_count: int

    def csv_rows(self):
        return [(n, self.k, e) for n, e in self.rows]


def uniform_convergence_profile(spec: CocycleSpec, sys: SftSystem, k: int, n_list: Sequence[int],
                                sample_count: int = 100, seed: int = 0,
                                narrowness: NarrownessReport | None = None, N: int = 8) -> UniformConvergenceProfile:
    """``e_n = max_x |(1/n) log c_k(A^n(x)) - lambda_hat_k|`` over sampled points.

    The profile counts as convergent when ``n e_n`` does not grow: the last value
    of ``n e_n`` is at most twice the first.
    """
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise DomainError("n_list must contain positive integers")
    if narrowness is None:
        narrowness = scan_narrowness(spec, sys, k, N)
    lam = float(narrowness.lambda_hat[k - 1])
    rng = np.random.default_rng(seed)
    pts = [sys.random_point(rng) for _ in range(sample_count)]
    n_top = n_list[-1]
    e = np.zeros(len(n_list))
    idx = np.array(n_list)
    for x in pts:
        c = gelfand_profile(spec, x, k, n_top).log_c[k - 1, idx] / idx
        with np.errstate(invalid="ignore"):
            dev = np.where(np.isneginf(c), np.inf, np.abs(c - lam))
        e = np.maximum(e, dev)
    rows = [(n, float(v)) for n, v in zip(n_list, e)]
    ne = idx * e
    convergent = bool(np.all(np.isfinite(ne)) and ne[-1] <= 2 * max(ne[0], 1e-12))
    return UniformConvergenceProfile(k, lam, rows, convergent, not narrowness.constant_data, sample_count)


def periodic_lq(spec: CocycleSpec, orbit, q: int) -> float:
    """``l_q`` of the periodic measure: ``log|gamma_1 .. gamma_q| / period``."""
    lm = eigen_moduli(spec, orbit).log_moduli[:q]
    return NEG_INF if np.any(np.isneginf(lm)) else float(lm.sum() / orbit.period)


@dataclass
class SemicontinuityReport:
    q: int
    periods: list
    orbits: list
    values: list  # l_q of each closing orbit's measure
    one_period_values: list  # (1/m) log V_q(A^m(p)) for a single period m
    reference: float
    reference_kind: str
    gap: float
    closing_verified: bool


def semicontinuity_probe(spec: CocycleSpec, sys: SftSystem, x: Point, q: int, periods: Sequence[int],
                         n_ref: int | None = None) -> SemicontinuityReport:
    """Close ``x[0:n]`` into a periodic orbit for each n and compare ``l_q`` of those measures with ``x``.

    The reference is the exact value when ``x`` is periodic (periods that are
    multiples of its period then return its own orbit) and otherwise the
    finite-time value at ``n_ref`` (default: the largest requested period).
    ``gap`` is the excess of the upper half of the sequence over the reference,
    clipped at 0; it is reported, never enforced.
    """
    periods = list(periods)
    if not periods or any(b <= a for a, b in zip(periods, periods[1:])) or periods[0] < 1:
        raise DomainError("periods must be a nonempty increasing list of positive integers")
    values, single, orbits, ok = [], [], [], True
    for n in periods:
        orbit, _, report = close_orbit(sys, x, n)
        ok &= report.verified
        orbits.append(orbit)
        values.append(periodic_lq(spec, orbit, q))
        m = orbit.period
        single.append(float(log_volumes(spec.stack(orbit.point(), 0, m), q)[q - 1, m] / m))
    if x.is_periodic:
        ref, kind = periodic_lq(spec, PeriodicOrbit(x.window(0, x.period), sys), q), "periodic"
    else:
        ref, kind = finite_time_lq(spec, x, q, n_ref or periods[-1]), "finite_time"
    tail = values[len(values) // 2:]
    top = max(tail)
    gap = 0.0 if top == NEG_INF or ref == math.inf else max(0.0, top - ref)
    return SemicontinuityReport(q, periods, orbits, values, single, float(ref), kind, float(gap), bool(ok))
