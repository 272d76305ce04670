import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import HALF, LOG2
from domsplit.certifier import (CERTIFIED, INCONCLUSIVE, REJECTED, SplittingSample, certify, classify,
                                fit_certificate, gap_profile, reconstruct_splitting, sample_points,
                                transport_log_norms, verify_domination)
from domsplit.cocycle import CocycleSpec, admissible_words
from domsplit.errors import DiagnosticsConflictError, DomainError, InjectivityError
from domsplit.exterior import subspace_distance
from domsplit.lyapunov import spectrum_estimate
from domsplit.periodic_data import scan_narrowness
from domsplit.sft import Point, SftSystem
from oracles import mat_product

seeds = st.integers(0, 2**32 - 1)


def log_c(M, q):
    return math.log(np.linalg.svd(M, compute_uv=False)[q - 1])


def test_constant_diagonal_profile_and_fit(full2, half, rng):
    x = full2.random_point(rng)
    prof = gap_profile(half, x, 1, 30)
    n = np.arange(31)
    assert np.allclose(prof.log_ratio, -(2 * n + 1) * LOG2, atol=1e-12)
    cert = certify(half, full2, 1, N=3, random_count=3)
    assert cert.verdict == CERTIFIED
    assert cert.tau_fit == pytest.approx(0.25, abs=1e-6)
    assert cert.C_fit == pytest.approx(0.5, rel=1e-6)
    assert cert.residual < 1e-9 and cert.witnesses == []


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(0, 8))
def test_gap_profile_matches_products(seed, d, n_max):
    sys = SftSystem.full_shift(2)
    rng = np.random.default_rng(seed)
    spec = CocycleSpec.locally_constant(sys, 1, {w: rng.normal(size=(d, d)) for w in admissible_words(sys, 3)})
    x = sys.random_point(rng)
    k = int(rng.integers(1, d))
    prof = gap_profile(spec, x, k, n_max)
    mats = spec.stack(x, 0, n_max + 2)
    for n in range(n_max + 1):
        a = log_c(mat_product(mats[:n], d), k + 1)
        b = log_c(mat_product(mats[1: n + 1], d), k + 1)
        c = log_c(mat_product(mats[: n + 1], d), k)
        # singular values of short products are resolved to about eps * sigma_1 / sigma_q
        assert prof.log_ratio[n] == pytest.approx(max(a, b) - c, abs=1e-6)


def test_conjugated_family_is_certified(full2, hyp2):
    cert = certify(hyp2, full2, 1)
    assert cert.verdict == CERTIFIED
    assert cert.slope == pytest.approx(-2.0, abs=0.05)
    assert cert.residual <= 1.0 and cert.tau_fit <= 0.999
    # same inputs, same certificate
    again = certify(hyp2, full2, 1)
    assert (again.C_fit, again.tau_fit, again.residual) == (cert.C_fit, cert.tau_fit, cert.residual)


def test_swap_family_is_rejected_with_witnesses(full2, swap):
    cert = certify(swap, full2, 1)
    assert cert.verdict == REJECTED
    assert cert.slope >= -0.01
    words = {pt.window(0, pt.period) for pt, _ in cert.witnesses if pt.is_periodic}
    assert (0, 1) in words or (1, 0) in words
    assert (1,) in words
    assert len({pt.key() for pt, _ in cert.witnesses}) == len(cert.witnesses)


def test_fit_rejects_bad_inputs(full2, half, rng):
    x = full2.random_point(rng)
    with pytest.raises(DomainError):
        fit_certificate([])
    with pytest.raises(DomainError):
        fit_certificate([gap_profile(half, x, 1, 20)], n_min=10, n_max=60)
    with pytest.raises(DomainError):
        fit_certificate([gap_profile(half, x, 1, 60)], n_min=30, n_max=30)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_fit_bounds_envelope_and_ignores_order(seed):
    sys = SftSystem.full_shift(2)
    rng = np.random.default_rng(seed)
    spec = CocycleSpec.locally_constant(sys, 1, {w: rng.normal(size=(2, 2)) for w in admissible_words(sys, 3)})
    profs = [gap_profile(spec, sys.random_point(rng), 1, 30) for _ in range(4)]
    a = fit_certificate(profs, 5, 30)
    b = fit_certificate(profs[::-1], 5, 30)
    assert (a.C_fit, a.tau_fit, a.verdict) == (b.C_fit, b.tau_fit, b.verdict)
    n = np.arange(5, 31)
    env = np.max([p.log_ratio[5:31] for p in profs], axis=0)
    assert np.all(env <= math.log(a.C_fit) + n * math.log(a.tau_fit) + 1e-9)


def test_injectivity_failures(full2, galerkin):
    dead = CocycleSpec.one_step(full2, {0: HALF, 1: np.zeros((2, 2))})
    with pytest.raises(InjectivityError):
        gap_profile(dead, Point.periodic((1,), full2), 1, 5)
    # a short window stays rank-positive but is diagnostic only; a long one loses rank
    cert = certify(galerkin, full2, 1, N=2, random_count=2, n_min=2, n_max=12)
    assert cert.verdict != CERTIFIED and "diagnostic" in cert.note
    with pytest.raises(InjectivityError):
        certify(galerkin, full2, 1, N=2, random_count=2)


def test_reconstruct_diagonal_and_conjugated(full2, half, hyp2, rng):
    x = full2.random_point(rng)
    smp = reconstruct_splitting(half, x, 1)
    assert subspace_distance(smp.E, np.eye(2)[:, :1]) < 1e-12
    assert subspace_distance(smp.F, np.eye(2)[:, 1:]) < 1e-12
    smp = reconstruct_splitting(hyp2, x, 1)
    P = hyp2.family.conjugacy_at(x)
    assert subspace_distance(smp.E, P[:, :1]) < 1e-6 and subspace_distance(smp.F, P[:, 1:]) < 1e-6
    assert smp.transversality > 1e-3 and smp.convergence_gap < 1e-6


def test_verify_constant_diagonal(full2, half):
    pts = sample_points(full2, 3, 3)
    samples = [reconstruct_splitting(half, x, 1) for x in pts]
    rep = verify_domination(half, samples, 1.0, 0.25)
    assert rep.passed and rep.worst_margin <= 0 and rep.equivariance_angle < 1e-12


def test_verify_conjugated_family(full2, hyp2):
    cert = certify(hyp2, full2, 1)
    samples = [reconstruct_splitting(hyp2, x, 1) for x in sample_points(full2, 3, 5, seed=2)]
    rep = verify_domination(hyp2, samples, None, cert.tau_fit)
    assert rep.passed and rep.equivariance_angle < 1e-4
    assert all(s.transversality > 1e-3 for s in samples)


def test_verify_flags_wrong_splitting(full2, swap):
    x = Point.periodic((0,), full2)
    # swapped roles: the expanding axis is offered as the dominated one
    wrong = SplittingSample.forced_splitting(x, np.eye(2)[:, 1:], np.eye(2)[:, :1])
    rep = verify_domination(swap, [wrong], 1.0, 0.5)
    assert not rep.passed and rep.worst_margin > 0 and rep.failures


def test_transport_raw_matches_product(full2, hyp2, rng):
    x = full2.random_point(rng)
    v = np.array([0.3, -1.2])
    out = transport_log_norms(hyp2, x, v, 6)
    for m in range(1, 7):
        assert out[m - 1, 0] == pytest.approx(math.log(np.linalg.norm(mat_product(hyp2.stack(x, 0, m)) @ v)))


def test_certified_gap_matches_exponent_gap(full2, hyp3):
    sp = spectrum_estimate(hyp3, n=200)
    for k in (1, 2):
        cert = certify(hyp3, full2, k, random_count=10)
        assert cert.verdict == CERTIFIED
        assert sp.zeta[k - 1] - sp.zeta[k] >= -math.log(cert.tau_fit) - 0.1


def test_conflicting_certificates(full2, hyp2, swap):
    good = certify(hyp2, full2, 1, N=3, random_count=2)
    bad = certify(swap, full2, 1, N=3, random_count=2)
    nar = scan_narrowness(hyp2, full2, 1, 4)
    with pytest.raises(DiagnosticsConflictError):
        classify(hyp2, full2, nar, {1: [good, bad]})


def test_classify_examples(full2, hyp2, hyp3, diag21, galerkin):
    nar = scan_narrowness(hyp2, full2, 1, 6)
    cls = classify(hyp2, full2, nar, {1: certify(hyp2, full2, 1)}, sample_count=8)
    assert cls.label() == "uniformly_hyperbolic(1)"
    assert cls.checks["contraction_F"]["ok"] and cls.checks["expansion_E"]["ok"]

    nar = scan_narrowness(hyp3, full2, 2, 5)
    certs = {k: certify(hyp3, full2, k, random_count=10) for k in (1, 2)}
    cls = classify(hyp3, full2, nar, certs, sample_count=10)
    assert cls.label() == "partially_hyperbolic(1, 2)"
    assert cls.checks["center_growth"]["worst_rate"] <= 0.05

    nar = scan_narrowness(diag21, full2, 1, 4)
    cls = classify(diag21, full2, nar, {1: certify(diag21, full2, 1, N=3, random_count=3)}, sample_count=5)
    assert cls.label() == "dominated(1)"

    nar = scan_narrowness(galerkin, full2, 1, 2)
    cls = classify(galerkin, full2, nar, {}, sample_count=2)
    assert cls.kind == "none" and "non-injective" in cls.checks["note"]


def test_inconclusive_between_thresholds(full2):
    # a slowly decaying envelope: slope -1e-4 is neither certified (tau > 0.999) nor rejected
    spec = CocycleSpec.constant(full2, np.diag([1.0, math.exp(-1e-4)]))
    cert = certify(spec, full2, 1, N=2, random_count=2)
    assert cert.verdict == INCONCLUSIVE and cert.witnesses == []
