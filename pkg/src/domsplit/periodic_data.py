"""Eigenvalue moduli along periodic orbits and the constant / narrow periodic-data scans."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cocycle import CocycleSpec
from .errors import DomainError, EigenSolverError
from .exterior import normalized_product
from .sft import PeriodicOrbit, SftSystem, enumerate_orbits, primitive_root

NEG_INF = -math.inf
# above this compound size the moduli come from one eigen-solve of the product
_COMPOUND_LIMIT = 256


@dataclass
class PeriodicDatum:
    orbit: PeriodicOrbit
    log_moduli: np.ndarray  # descending, -inf for zero eigenvalues

    @property
    def period(self) -> int:
        return self.orbit.period

    @property
    def moduli(self) -> np.ndarray:
        return np.exp(self.log_moduli)

    @property
    def exponents(self) -> np.ndarray:
        return self.log_moduli / self.period

    @property
    def has_zero_modulus(self) -> bool:
        return bool(np.any(np.isneginf(self.log_moduli)))


def _log_spectral_radius(P: np.ndarray, word) -> float:
    try:
        ev = np.linalg.eigvals(P)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigenvalue solver failed on orbit {word}", word) from exc
    r = float(np.max(np.abs(ev)))
    return math.log(r) if r > 0 else NEG_INF


def eigen_moduli(spec: CocycleSpec, p: PeriodicOrbit) -> PeriodicDatum:
    """Moduli ``|gamma_1| >= .. >= |gamma_d|`` of ``A^n(p)``, kept in log form.

    ``log|gamma_1 .. gamma_q|`` is the log spectral radius of the q-th compound of
    the rescaled product, so small moduli keep full relative accuracy.
    """
    d = spec.dimension
    mats = spec.stack(p.point(), 0, p.period)
    if math.comb(d, d // 2) <= _COMPOUND_LIMIT:
        cum = np.empty(d + 1)
        cum[0] = 0.0
        for q in range(1, d + 1):
            P, scale = normalized_product(mats, q)
            cum[q] = NEG_INF if scale == NEG_INF else _log_spectral_radius(P, p.word) + scale
        out = np.empty(d)
        for q in range(d):
            out[q] = NEG_INF if np.isneginf(cum[q + 1]) else cum[q + 1] - cum[q]
        # round-off can break the ordering between nearly equal moduli
        out = np.sort(out)[::-1]
    else:
        P, scale = normalized_product(mats, 1)
        try:
            ev = np.abs(np.linalg.eigvals(P))
        except np.linalg.LinAlgError as exc:
            raise EigenSolverError(f"eigenvalue solver failed on orbit {p.word}", p.word) from exc
        ev[ev <= d * np.finfo(float).eps * max(ev.max(), 1e-300)] = 0.0
        with np.errstate(divide="ignore"):
            out = np.sort(np.log(ev))[::-1] + (scale if scale != NEG_INF else 0.0)
        if scale == NEG_INF:
            out[:] = NEG_INF
    return PeriodicDatum(p, out)


def exponents_at(datum_or_moduli, n: int | None = None) -> np.ndarray:
    """``lambda_i(p) = log|gamma_i(p)| / n``; zero moduli give ``-inf``."""
    if isinstance(datum_or_moduli, PeriodicDatum):
        return datum_or_moduli.exponents
    if n is None or n < 1:
        raise DomainError("period n >= 1 required")
    m = np.asarray(datum_or_moduli, dtype=float)
    if np.any(m < 0):
        raise DomainError("moduli must be nonnegative")
    with np.errstate(divide="ignore"):
        return np.sort(np.log(m))[::-1] / n


@dataclass
class NarrownessReport:
    k: int
    N: int
    lambda_hat: np.ndarray
    delta_hat: float
    constant_data: bool
    viable: bool
    advisory: bool
    offenders: list = field(default_factory=list)  # (deviation, word, index)
    data: list = field(default_factory=list)
    excluded: int = 0

    @property
    def orbit_count(self) -> int:
        return len(self.data)


def scan_narrowness(spec: CocycleSpec, sys: SftSystem, k: int, N: int, tol_const: float = 1e-8,
                    max_offenders: int = 5) -> NarrownessReport:
    """Scan every primitive orbit of period <= N.

    ``lambda_hat_i`` is the midpoint of the observed range of ``lambda_i(p)`` and
    ``delta_hat`` the largest half-range over ``i <= k+1``, i.e. the smallest delta
    for which the scanned data is delta-narrow around ``lambda_hat``.
    """
    d = spec.dimension
    if not 1 <= k <= d:
        raise DomainError(f"index k={k} outside 1..{d}")
    if spec.system is not sys:
        raise DomainError("cocycle was built over a different system")
    if N < 1:
        raise DomainError("no periodic orbits for N < 1")
    m = min(k + 1, d)
    data = []
    for n in range(1, N + 1):
        for orb in enumerate_orbits(sys, n):
            if len(primitive_root(orb.word)) == n:
                data.append(eigen_moduli(spec, orb))
    if not data:
        raise DomainError(f"no periodic orbits of period <= {N}")
    ex = np.array([dt.exponents[:m] for dt in data])
    finite = np.isfinite(ex)
    hi = np.where(finite, ex, -np.inf).max(axis=0)
    lo = np.where(finite, ex, np.inf).min(axis=0)
    have = finite.any(axis=0)
    with np.errstate(invalid="ignore"):
        lam = np.where(have, (hi + lo) / 2, NEG_INF)
        half = np.where(have, (hi - lo) / 2, 0.0)
    delta = float(half.max())
    dev = np.where(finite, np.abs(ex - np.where(have, lam, 0.0)), -1.0)
    order = np.argsort(-dev.max(axis=1), kind="stable")[:max_offenders]
    offenders = [(float(dev[j].max()), data[j].orbit.word, int(np.argmax(dev[j])) + 1) for j in order
                 if dev[j].max() > 0]
    viable = bool(m > k and np.isfinite(lam[k - 1]) and lam[k - 1] - lam[k] > 2 * delta)
    return NarrownessReport(k, N, lam, delta, delta <= tol_const, viable, not spec.injective, offenders, data,
                            int((~finite).any(axis=1).sum()))
