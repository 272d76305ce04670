import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import LOG2
from domsplit.cocycle import CocycleSpec, admissible_words
from domsplit.errors import DomainError
from domsplit.lyapunov import (KAPPA, finite_time_lq, gelfand_profile, group_multiplicities, periodic_lq,
                               semicontinuity_probe, spectrum_estimate, uniform_convergence_profile)
from domsplit.sft import PeriodicOrbit, Point, SftSystem
from oracles import mat_product

seeds = st.integers(0, 2**32 - 1)


def random_cocycle(sys, d, seed):
    rng = np.random.default_rng(seed)
    return CocycleSpec.locally_constant(sys, 1, {w: rng.normal(size=(d, d)) for w in admissible_words(sys, 3)})


def test_finite_time_examples(full2, half, rng):
    x = full2.random_point(rng)
    assert finite_time_lq(half, x, 1, 7) == pytest.approx(LOG2)
    assert finite_time_lq(half, x, 2, 7) == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        finite_time_lq(half, x, 3, 7)
    with pytest.raises(DomainError):
        finite_time_lq(half, x, 1, 0)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), st.integers(1, 12))
def test_finite_time_matches_svd_of_product(seed, d, n):
    sys = SftSystem.full_shift(2)
    spec = random_cocycle(sys, d, seed)
    x = sys.random_point(np.random.default_rng(seed + 1))
    mats = spec.stack(x, 0, n)
    s = np.linalg.svd(mat_product(mats, d), compute_uv=False)
    for q in range(1, d):
        # a plain SVD of the product resolves sigma_q only to about eps * sigma_1 / sigma_q
        tol = 1e-9 + 1e-14 * s[0] / s[q - 1]
        assert finite_time_lq(spec, x, q, n) == pytest.approx(np.log(s[:q]).sum() / n, abs=tol)
    det = sum(np.linalg.slogdet(M)[1] for M in mats) / n
    assert finite_time_lq(spec, x, d, n) == pytest.approx(det, abs=1e-9)


def test_gelfand_profile_shape_and_monotone(full2, hyp3, rng):
    x = full2.random_point(rng)
    prof = gelfand_profile(hyp3, x, n_max=30)
    assert prof.log_c.shape == (3, 31) and prof.q_max == 3 and prof.n_max == 30
    assert np.all(np.diff(prof.log_c[:, 1:], axis=0) <= 1e-9)
    assert np.allclose(prof.log_c[:, 0], 0.0)
    with pytest.raises(DomainError):
        gelfand_profile(hyp3, x, q_max=4)


def test_spectrum_of_conjugated_diagonal(full2, hyp3):
    sp = spectrum_estimate(hyp3, n=200, seed=3)
    assert np.allclose(sp.zeta, [1.0, 0.0, -1.0], atol=0.05)
    assert sp.multiplicities == [1, 1, 1]
    assert sp.kappa == KAPPA == -math.inf and sp.neg_inf_indices == []


def test_spectrum_of_truncated_shift_is_flagged(galerkin):
    sp = spectrum_estimate(galerkin, n=8, sample_count=3)
    # an 8-step product of a nilpotent 16x16 weighted shift keeps rank 8
    assert sp.neg_inf_indices == list(range(9, 17))
    assert np.all(np.isfinite(sp.zeta[:8]))
    assert sp.multiplicities[-1] == 8 and any("-inf" in note for note in sp.notes)
    sp = spectrum_estimate(galerkin, n=20, sample_count=2)
    assert sp.neg_inf_indices == list(range(1, 17))


def test_spectrum_accepts_point_lists(full2, half):
    pts = [Point.periodic((0,), full2), Point.periodic((0, 1), full2)]
    sp = spectrum_estimate(half, pts, n=5)
    assert sp.sample_count == 2 and np.allclose(sp.zeta, [LOG2, -LOG2])
    assert sp.multiplicities == [1, 1]
    with pytest.raises(DomainError):
        spectrum_estimate(half, [], n=5)


def test_group_multiplicities():
    assert group_multiplicities(np.array([1.0, 0.99, 0.0, -math.inf, -math.inf]), 0.05) == [2, 1, 2]
    assert group_multiplicities(np.array([0.0, 0.0, 0.0]), 1e-9) == [3]


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(2, 4))
def test_zeta_telescopes_and_top_volume_is_det(seed, d):
    sys = SftSystem.full_shift(2)
    spec = random_cocycle(sys, d, seed)
    rng = np.random.default_rng(seed + 7)
    pts = [sys.random_point(rng) for _ in range(3)]
    n = 25
    sp = spectrum_estimate(spec, pts, n=n)
    for q in range(1, d + 1):
        assert sp.zeta[:q].sum() == pytest.approx(sp.l[q - 1], abs=1e-9)
    det = np.mean([sum(np.linalg.slogdet(M)[1] for M in spec.stack(x, 0, n)) / n for x in pts])
    assert sp.l[d - 1] == pytest.approx(det, abs=1e-9)
    assert np.all(np.diff(sp.zeta) <= 1e-9)


def test_uniform_convergence_on_conjugated_family(full2, hyp2):
    prof = uniform_convergence_profile(hyp2, full2, 1, [10, 20, 40, 80], sample_count=30)
    assert prof.convergent and not prof.advisory
    # the deviation is O(1/n): n e_n stays below twice the conjugacy log-condition bound
    K = 2 * max(math.log(np.linalg.cond(P)) for P in hyp2.family.conjugacy.values())
    assert all(n * e <= K for n, e in prof.rows)
    assert prof.csv_rows()[0][:2] == (10, 1)


def test_uniform_convergence_constant_and_swap(full2, half, swap):
    prof = uniform_convergence_profile(half, full2, 1, [10, 20, 40], sample_count=5)
    assert prof.convergent and all(e < 1e-12 for _, e in prof.rows)
    prof = uniform_convergence_profile(swap, full2, 1, [10, 20, 40, 80], sample_count=30)
    assert not prof.convergent and prof.advisory
    assert all(e == pytest.approx(LOG2 / 2, abs=1e-9) for _, e in prof.rows)
    with pytest.raises(DomainError):
        uniform_convergence_profile(half, full2, 1, [0, 4])


def test_periodic_lq_examples(full2, swap):
    assert periodic_lq(swap, PeriodicOrbit((0,), full2), 1) == pytest.approx(LOG2)
    assert periodic_lq(swap, PeriodicOrbit((0, 1, 1), full2), 1) == pytest.approx(LOG2 / 3)
    assert periodic_lq(swap, PeriodicOrbit((0, 1, 1), full2), 2) == pytest.approx(0.0, abs=1e-12)


def test_semicontinuity_on_periodic_point(full2, swap):
    x = Point.periodic((0, 1, 1), full2)
    rep = semicontinuity_probe(swap, full2, x, 1, [3, 6, 9, 12])
    assert rep.reference_kind == "periodic" and rep.reference == pytest.approx(LOG2 / 3)
    assert all(v == pytest.approx(LOG2 / 3) for v in rep.values)
    assert rep.gap == 0.0 and rep.closing_verified


def test_semicontinuity_on_generic_point(full2, hyp2, rng):
    x = full2.random_point(rng)
    rep = semicontinuity_probe(hyp2, full2, x, 1, [5, 10, 20, 40])
    assert rep.reference_kind == "finite_time" and rep.closing_verified
    assert all(v == pytest.approx(1.0, abs=1e-9) for v in rep.values)
    assert rep.gap <= 0.1
    with pytest.raises(DomainError):
        semicontinuity_probe(hyp2, full2, x, 1, [5, 5])
