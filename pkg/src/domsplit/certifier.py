"""Domination certificates, splitting reconstruction and hyperbolicity classification.

The gap criterion compares ``max{c_{k+1}(A^n(x)), c_{k+1}(A^n(fx))}`` with
``c_k(A^{n+1}(x))`` on the upper envelope over a finite sample of points (all
periodic points up to some period plus random eventually periodic points).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cocycle import CocycleSpec, restricted_inverse
from .errors import (DiagnosticsConflictError, DomainError, IllConditionedSubspaceError, InjectivityError)
from .exterior import (complement, intersection, log_volumes, orthonormal, principal_angles, subspace_distance,
                       top_left_subspace, top_right_subspace)
from .periodic_data import NarrownessReport
from .sft import Point, SftSystem, periodic_points_upto

NEG_INF = -math.inf
CERTIFIED, REJECTED, INCONCLUSIVE = "certified", "rejected", "inconclusive"


# -- gap profiles ------------------------------------------------------------

@dataclass
class GapProfile:
    point: Point
    k: int
    log_ratio: np.ndarray  # index n = 0..n_max
    log_ratio_bg: np.ndarray  # c_{k+1}(A^n x) / c_k(A^n x)
    diagnostic_only: bool = False

    @property
    def n_max(self) -> int:
        return len(self.log_ratio) - 1

    def rows(self):
        return [(n, float(v)) for n, v in enumerate(self.log_ratio)]


def _log_c(log_v: np.ndarray, q: int) -> np.ndarray:
    """``log c_q`` from the rows of ``log V`` (row q-1 holds q)."""
    hi = log_v[q - 1]
    lo = log_v[q - 2] if q > 1 else np.zeros_like(hi)
    with np.errstate(invalid="ignore"):
        return np.where(np.isneginf(hi), NEG_INF, hi - lo)


def gap_profile(spec: CocycleSpec, x: Point, k: int, n_max: int) -> GapProfile:
    """``log max{c_{k+1}(A^n x), c_{k+1}(A^n fx)} - log c_k(A^{n+1} x)`` for n = 0..n_max."""
    d = spec.dimension
    if not 1 <= k < d:
        raise DomainError(f"index k={k} must satisfy 1 <= k < {d}")
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    mats = spec.stack(x, 0, n_max + 2)
    vx = log_volumes(mats[: n_max + 1], k + 1)
    vf = log_volumes(mats[1: n_max + 1], k + 1)
    ck_x = _log_c(vx, k)
    ck1_x = _log_c(vx, k + 1)
    ck1_f = _log_c(vf, k + 1)
    denom = ck_x[1: n_max + 2]
    if np.any(np.isneginf(denom)):
        n = int(np.argmax(np.isneginf(denom)))
        raise InjectivityError(f"c_{k}(A^{n + 1}(x)) = 0 at x = {x}")
    ratio = np.maximum(ck1_x[: n_max + 1], ck1_f) - denom
    with np.errstate(invalid="ignore"):
        bg = np.where(np.isneginf(ck1_x[: n_max + 1]), NEG_INF, ck1_x[: n_max + 1] - ck_x[: n_max + 1])
    return GapProfile(x, k, ratio, bg, diagnostic_only=not spec.injective)


def sample_points(sys: SftSystem, N: int, random_count: int = 0, seed: int = 0) -> list[Point]:
    """All points on periodic orbits of period <= N, then ``random_count`` random points."""
    rng = np.random.default_rng(seed)
    return periodic_points_upto(sys, N) + [sys.random_point(rng) for _ in range(random_count)]


# -- fitting -----------------------------------------------------------------

@dataclass
class DominationCertificate:
    k: int
    C_fit: float
    tau_fit: float
    residual: float
    n_range: tuple
    verdict: str
    slope: float
    witnesses: list = field(default_factory=list)  # (point, n) pairs
    bg_slope: float | None = None
    note: str = ""

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED


def _line(n: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(n, y, 1)
    resid = y - (intercept + slope * n)
    return float(slope), float(intercept), resid


def fit_certificate(profiles: Sequence[GapProfile], n_min: int = 10, n_max: int = 60, tau_accept: float = 0.999,
                    res_accept: float = 1.0, slope_reject: float = 0.0, slope_tol: float = 1e-9,
                    max_witnesses: int = 32) -> DominationCertificate:
    """Fit ``log C + n log tau`` to the pointwise maximum of the profiles over ``[n_min, n_max]``.

    ``C_fit`` is shifted up by the largest positive residual so the fitted line
    bounds the envelope.  ``slope_tol`` absorbs round-off in the rejection test.
    """
    profiles = list(profiles)
    if not profiles:
        raise DomainError("no gap profiles")
    if not 0 <= n_min < n_max:
        raise DomainError("need 0 <= n_min < n_max")
    k = profiles[0].k
    for p in profiles:
        if p.n_max < n_max:
            raise DomainError(f"profile at {p.point} covers n <= {p.n_max} < {n_max}")
        if p.k != k:
            raise DomainError("profiles mix different indices")
    n = np.arange(n_min, n_max + 1)
    Y = np.array([p.log_ratio[n_min: n_max + 1] for p in profiles])
    env = Y.max(axis=0)
    if np.any(np.isneginf(env)):
        raise DomainError("envelope is -inf (every sampled product lost rank)")
    slope, intercept, resid = _line(n, env)
    residual = float(np.abs(resid).max())
    C_fit = math.exp(intercept + max(0.0, float(resid.max())))
    tau_fit = math.exp(slope)
    bg = np.array([p.log_ratio_bg[n_min: n_max + 1] for p in profiles]).max(axis=0)
    bg_slope = _line(n, bg)[0] if np.all(np.isfinite(bg)) else None
    diag = any(p.diagnostic_only for p in profiles)
    note = "non-injective cocycle: gap profile is diagnostic only" if diag else ""
    if tau_fit <= tau_accept and residual <= res_accept and not diag:
        verdict = CERTIFIED
    elif slope >= slope_reject - slope_tol:
        verdict = REJECTED
    else:
        verdict = INCONCLUSIVE
    witnesses = []
    if verdict == REJECTED:
        bad = []
        for p, y in zip(profiles, Y):
            s = _line(n, y)[0] if np.all(np.isfinite(y)) else NEG_INF
            if s >= slope_reject - slope_tol:
                per = p.point.period if p.point.is_periodic else math.inf
                bad.append(((per, p.point.key()), p.point, n_min + int(np.argmax(y))))
        bad.sort(key=lambda t: t[0])
        seen = set()
        for key, pt, nn in bad:
            if key not in seen and len(witnesses) < max_witnesses:
                seen.add(key)
                witnesses.append((pt, nn))
    return DominationCertificate(k, C_fit, tau_fit, residual, (n_min, n_max), verdict, slope, witnesses, bg_slope,
                                 note)


def certify(spec: CocycleSpec, sys: SftSystem, k: int, N: int = 8, random_count: int = 20, n_min: int = 10,
            n_max: int = 60, seed: int = 0, points: Sequence[Point] | None = None, **fit_kw) -> DominationCertificate:
    if points is None:
        points = sample_points(sys, N, random_count, seed)
    return fit_certificate([gap_profile(spec, x, k, n_max) for x in points], n_min, n_max, **fit_kw)


# -- splittings ----------------------------------------------------------------

@dataclass
class SplittingSample:
    point: Point
    k: int
    E: np.ndarray  # d x k orthonormal
    F: np.ndarray  # d x (d-k) orthonormal
    transversality: float  # smallest principal angle between E and F
    convergence_gap: float
    spectral_gap: float
    depth: int
    forced: bool = False

    @classmethod
    def forced_splitting(cls, x: Point, E, F) -> "SplittingSample":
        """A user-chosen splitting, e.g. to exercise the verifier on a wrong guess."""
        E, F = orthonormal(E), orthonormal(F)
        ang = float(np.min(principal_angles(E, F)))
        return cls(x, E.shape[1], E, F, ang, math.nan, math.nan, 0, True)


def _bundles(spec: CocycleSpec, x: Point, k: int, n: int):
    d = spec.dimension
    if not 1 <= k < d:
        raise DomainError(f"index k={k} must satisfy 1 <= k < {d}")
    if n < 1:
        raise DomainError("depth must be >= 1")
    E, gap_e = top_left_subspace(spec.stack(x, -n, 0), k)
    R, gap_f = top_right_subspace(spec.stack(x, 0, n), k)
    gap = min(gap_e, gap_f)
    if gap < 1e-10:
        raise IllConditionedSubspaceError(f"singular-value gap {gap:.3g} at index {k} is too small at x = {x}")
    return E, complement(R), gap


def reconstruct_splitting(spec: CocycleSpec, x: Point, k: int, n: int = 60) -> SplittingSample:
    """``E(x)`` from the backward product, ``F(x)`` from the forward one, at depth n."""
    if not spec.norm_context.is_euclidean:
        raise DomainError("splitting reconstruction needs the Euclidean norm context")
    E, F, gap = _bundles(spec, x, k, n)
    E2, F2, _ = _bundles(spec, x, k, n + 1)
    conv = max(subspace_distance(E, E2), subspace_distance(F, F2))
    ang = float(np.min(principal_angles(E, F)))
    return SplittingSample(x, k, E, F, ang, conv, gap, n)


class _BundleCache:
    def __init__(self, spec, k, depth):
        self.spec, self.k, self.depth = spec, k, depth
        self._store = {}

    def __call__(self, x: Point):
        key = x.key()
        if key not in self._store:
            self._store[key] = _bundles(self.spec, x, self.k, self.depth)[:2]
        return self._store[key]


def _project(W, keep, other):
    """Component of the columns of W in span(keep) along span(other)."""
    c = np.linalg.solve(np.hstack([keep, other]), W)
    return keep @ c[: keep.shape[1]]


def transport_log_norms(spec: CocycleSpec, x: Point, W: np.ndarray, n: int, bundle=None) -> np.ndarray:
    """``log |A^m(x) w|`` for m = 1..n and each column w (shape n x cols).

    ``bundle(y) -> (keep, other)`` re-projects the iterate onto ``keep(y)`` along
    ``other(y)`` after every step, which stops round-off leaking into faster
    directions; pass None for raw iteration.
    """
    W = np.array(W, dtype=float)
    if W.ndim == 1:
        W = W[:, None]
    mats = spec.stack(x, 0, n)
    logs = np.zeros(W.shape[1])
    out = np.empty((n, W.shape[1]))
    s = np.linalg.norm(W, axis=0)
    W = W / s
    logs += np.log(s)
    for m, A in enumerate(mats, start=1):
        W = A @ W
        if bundle is not None:
            keep, other = bundle(x.shifted(m))
            W = _project(W, keep, other)
        s = np.linalg.norm(W, axis=0)
        with np.errstate(divide="ignore"):
            logs = logs + np.log(s)
        W = W / np.where(s > 0, s, 1.0)
        out[m - 1] = logs
    return out


@dataclass
class VerificationReport:
    pass_rate: float
    worst_margin: float  # max of log(|A^n v|) - log(slack C tau^n |A^n u|); <= 0 means pass
    checks: int
    C: float
    tau: float
    equivariance_angle: float
    equivariance_ok: bool
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.pass_rate == 1.0 and self.equivariance_ok


def _random_units(rng, B, count):
    W = B @ rng.normal(size=(B.shape[1], count))
    return W / np.linalg.norm(W, axis=0)


def verify_domination(spec: CocycleSpec, samples: Sequence[SplittingSample], C: float | None, tau: float,
                      n_check: int = 40, pairs: int = 20, slack: float = 2.0, seed: int = 0, stabilize: bool = True,
                      equivariance_tol: float = 1e-4, n_fit: int = 10) -> VerificationReport:
    """Check ``|A^n v| <= slack C tau^n |A^n u|`` for random unit ``u in E``, ``v in F``, n <= n_check.

    The gap certificate's constant bounds a different ratio, so with ``C=None`` the
    constant is fitted on ``n <= n_fit`` (for the given tau) and then checked on
    the whole range.  With ``stabilize`` the iterates are re-projected onto
    freshly reconstructed bundles along the orbit (same depth as each sample);
    forced samples are always iterated raw.
    """
    rng = np.random.default_rng(seed)
    caches = {}
    total = passed = 0
    worst = NEG_INF
    eq_angle = 0.0
    failures = []
    nn = np.arange(1, n_check + 1)[:, None]
    runs = []
    for smp in samples:
        U = _random_units(rng, smp.E, pairs)
        V = _random_units(rng, smp.F, pairs)
        if stabilize and not smp.forced:
            cache = caches.setdefault((smp.k, smp.depth), _BundleCache(spec, smp.k, smp.depth))
            fast = lambda y, c=cache: c(y)
            slow = lambda y, c=cache: c(y)[::-1]
            lu = transport_log_norms(spec, smp.point, U, n_check, fast)
            lv = transport_log_norms(spec, smp.point, V, n_check, slow)
            A = spec.stack(smp.point, 0, 1)[0]
            E1, F1 = cache(smp.point.shifted(1))
            eq_angle = max(eq_angle, subspace_distance(orthonormal(A @ smp.E), E1),
                           subspace_distance(orthonormal(A @ smp.F), F1))
        else:
            lu = transport_log_norms(spec, smp.point, U, n_check)
            lv = transport_log_norms(spec, smp.point, V, n_check)
        runs.append((smp, lv - nn * math.log(tau) - lu))
    if C is None:
        C = math.exp(max(0.0, max(float(r[: n_fit].max()) for _, r in runs))) if runs else 1.0
    logc = math.log(slack * C)
    for smp, excess in runs:
        margin = excess - logc
        ok = np.all(margin <= 0, axis=0)
        total += pairs
        passed += int(ok.sum())
        worst = max(worst, float(margin.max()))
        if not ok.all():
            failures.append((smp.point, int(np.argmax(margin.max(axis=1))) + 1))
    return VerificationReport(passed / total if total else 1.0, worst, total * n_check, float(C), float(tau),
                              eq_angle, eq_angle <= equivariance_tol, failures)


# -- classification ------------------------------------------------------------

@dataclass
class Classification:
    kind: str  # uniformly_hyperbolic, partially_hyperbolic, dominated, none
    indices: tuple
    dominated_indices: tuple
    exponents: np.ndarray
    zero_tol: float
    checks: dict = field(default_factory=dict)

    def label(self) -> str:
        return f"{self.kind}({', '.join(map(str, self.indices))})"


def all_exponents(narrowness: NarrownessReport):
    """Midpoint exponents for every index and the largest half-spread, from the scan's orbit data."""
    ex = np.array([dt.exponents for dt in narrowness.data])
    fin = np.isfinite(ex)
    hi = np.where(fin, ex, -np.inf).max(axis=0)
    lo = np.where(fin, ex, np.inf).min(axis=0)
    have = fin.any(axis=0)
    with np.errstate(invalid="ignore"):
        lam = np.where(have, (hi + lo) / 2, NEG_INF)
        half = float(np.where(have, (hi - lo) / 2, 0.0).max())
    return lam, half


def _verdicts(certificates: Mapping) -> dict:
    out = {}
    for k, certs in certificates.items():
        if isinstance(certs, DominationCertificate):
            certs = [certs]
        v = {c.verdict for c in certs}
        if CERTIFIED in v and REJECTED in v:
            ranges = sorted({c.n_range for c in certs})
            raise DiagnosticsConflictError(f"index {k} is both certified and rejected (n ranges {ranges})")
        out[int(k)] = [c for c in certs if c.verdict == CERTIFIED] or list(certs)
    return out


def _sup_growth(spec, x, F, n, bundle):
    """``log ||A^m(x)|_F||`` for m = 1..n via a projected QR frame."""
    Q = orthonormal(F)
    mats = spec.stack(x, 0, n)
    T = np.eye(Q.shape[1])
    log_scale = 0.0
    out = np.empty(n)
    for m, A in enumerate(mats, start=1):
        W = A @ Q
        keep, other = bundle(x.shifted(m))
        W = _project(W, keep, other)
        Q, R = np.linalg.qr(W)
        T = R @ T
        s = np.abs(T).max()
        T /= s
        log_scale += math.log(s)
        out[m - 1] = math.log(np.linalg.norm(T, 2)) + log_scale
    return out


def _check_uniform(spec, points, k, lam, eps, n_fit, n_check, slack, depth):
    cache = _BundleCache(spec, k, depth)
    tau_f = math.exp(lam[k] + eps)
    tau_e = math.exp(-lam[k - 1] + eps)
    fwd, bwd = [], []
    for x in points:
        E, F = cache(x)
        fwd.append(_sup_growth(spec, x, F, n_check, lambda y: cache(y)[::-1]))
        row = []
        for m in range(1, n_check + 1):
            src = cache(x.shifted(-m))[0]
            row.append(math.log(restricted_inverse(spec, x, m, E, E_source=src).norm))
        bwd.append(row)
    m = np.arange(1, n_check + 1)
    out = {}
    for name, data, tau in (("contraction_F", np.array(fwd), tau_f), ("expansion_E", np.array(bwd), tau_e)):
        excess = data - m * math.log(tau)
        C = math.exp(max(0.0, float(excess[:, :n_fit].max())))
        margin = float((excess - math.log(slack * C)).max())
        out[name] = {"tau": tau, "C": C, "worst_margin": margin, "ok": margin <= 0}
    return out


def _check_partial(spec, points, k1, k2, eps, n, depth, samples=5, seed=0):
    c1 = _BundleCache(spec, k1, depth)
    c2 = _BundleCache(spec, k2, depth)
    rng = np.random.default_rng(seed)

    def split(y):
        E1, F1 = c1(y)
        E2, F2 = c2(y)
        H = intersection(E2, F1, tol=1e-6)
        if H.shape[1] != k2 - k1:
            raise IllConditionedSubspaceError(f"center bundle has dimension {H.shape[1]}, expected {k2 - k1}")
        return H, np.hstack([E1, F2])

    worst = 0.0
    for x in points:
        H, _ = split(x)
        rates = transport_log_norms(spec, x, _random_units(rng, H, samples), n, split)[-1] / n
        worst = max(worst, float(np.abs(rates).max()))
    return {"center_growth": {"n": n, "worst_rate": worst, "ok": worst <= eps}}


def classify(spec: CocycleSpec, sys: SftSystem, narrowness: NarrownessReport, certificates: Mapping,
             points: Sequence[Point] | None = None, sample_count: int = 50, eps: float = 0.05, n_fit: int = 10,
             n_check: int = 40, n_center: int = 100, slack: float = 2.0, depth: int = 60, seed: int = 0,
             zero_tol: float | None = None) -> Classification:
    """Uniform or partial hyperbolicity from certified indices and exponent signs.

    Uniform hyperbolicity at k needs a certificate at k with ``lambda_k > 0 >
    lambda_{k+1}`` plus the forward contraction on F and backward contraction on E
    verified on the sample points.  Partial hyperbolicity needs certificates at
    the last positive index and the last non-negative one, and near-zero growth on
    ``H = E_{k2} & F_{k1}``.
    """
    verdicts = _verdicts(certificates)
    dominated = tuple(sorted(k for k, cs in verdicts.items() if cs[0].verdict == CERTIFIED))
    lam, half = all_exponents(narrowness)
    tol = 1e-6 + half if zero_tol is None else zero_tol
    d = spec.dimension
    if points is None:
        rng = np.random.default_rng(seed)
        points = [sys.random_point(rng) for _ in range(sample_count)]
    pos = [i for i in range(1, d + 1) if lam[i - 1] > tol]
    neg = [i for i in range(1, d + 1) if lam[i - 1] < -tol]
    t = max(pos) if pos else 0
    j = min(neg) if neg else d + 1
    checks = {"kappa": "-inf (finite rank); the essential-radius condition holds at every index"}
    if not spec.injective:
        checks["note"] = "non-injective cocycle: no certificates, no classification"
        return Classification("none", (), (), lam, tol, checks)
    if 1 <= t < d and j == t + 1 and t in dominated:
        checks.update(_check_uniform(spec, points, t, lam, eps, n_fit, n_check, slack, depth))
        if checks["contraction_F"]["ok"] and checks["expansion_E"]["ok"]:
            return Classification("uniformly_hyperbolic", (t,), dominated, lam, tol, checks)
    elif 1 <= t and j <= d and j > t + 1 and t in dominated and (j - 1) in dominated:
        checks.update(_check_partial(spec, points[: max(1, len(points) // 5)], t, j - 1, eps, n_center, depth))
        if checks["center_growth"]["ok"]:
            return Classification("partially_hyperbolic", (t, j - 1), dominated, lam, tol, checks)
    if dominated:
        return Classification("dominated", dominated, dominated, lam, tol, checks)
    return Classification("none", (), (), lam, tol, checks)
