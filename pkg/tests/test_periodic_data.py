import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import LOG2
from domsplit.cocycle import CocycleSpec, admissible_words
from domsplit.errors import DomainError, EigenSolverError
from domsplit.periodic_data import eigen_moduli, exponents_at, scan_narrowness
from domsplit.sft import PeriodicOrbit, SftSystem
from oracles import mat_product

seeds = st.integers(0, 2**32 - 1)
words = st.lists(st.integers(0, 1), min_size=1, max_size=6).map(tuple)


def random_cocycle(sys, d, seed):
    rng = np.random.default_rng(seed)
    return CocycleSpec.locally_constant(sys, 1, {w: rng.normal(size=(d, d)) for w in admissible_words(sys, 3)})


def test_constant_diagonal_period_three(full2, half):
    dt = eigen_moduli(half, PeriodicOrbit((0, 1, 1), full2))
    assert np.allclose(dt.moduli, [8.0, 0.125], rtol=1e-12)
    assert np.allclose(dt.exponents, [LOG2, -LOG2], atol=1e-14)


def test_conjugated_orbits_have_exact_exponents(full2, hyp2):
    for orb in (PeriodicOrbit(w, full2) for w in [(0,), (1,), (0, 1), (0, 0, 1, 1, 1)]):
        dt = eigen_moduli(hyp2, orb)
        assert np.allclose(dt.exponents, [1.0, -1.0], atol=1e-12)


def test_rotation_has_unit_moduli(full2):
    th = math.pi / 2
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    spec = CocycleSpec.constant(full2, R)
    for w in [(0,), (0, 1, 1, 0)]:
        assert np.allclose(eigen_moduli(spec, PeriodicOrbit(w, full2)).moduli, [1, 1], atol=1e-12)


def test_exponents_at_examples():
    assert np.allclose(exponents_at([8.0, 0.125], 3), [LOG2, -LOG2])
    out = exponents_at([0.0, 1.0], 2)
    assert out[0] == 0.0 and out[1] == -math.inf
    with pytest.raises(DomainError):
        exponents_at([1.0], 0)
    with pytest.raises(DomainError):
        exponents_at([-1.0], 1)


def test_swap_family_range(full2, swap):
    # fixed point 0 sees diag(2, 1/2); fixed point 1 and the orbit 01 see unit moduli
    assert np.allclose(eigen_moduli(swap, PeriodicOrbit((0,), full2)).exponents, [LOG2, -LOG2])
    assert np.allclose(eigen_moduli(swap, PeriodicOrbit((1,), full2)).exponents, [0, 0], atol=1e-14)
    assert np.allclose(eigen_moduli(swap, PeriodicOrbit((0, 1), full2)).exponents, [0, 0], atol=1e-14)
    rep = scan_narrowness(swap, full2, 1, 6)
    assert np.allclose(rep.lambda_hat, [LOG2 / 2, -LOG2 / 2], atol=1e-12)
    assert rep.delta_hat == pytest.approx(LOG2 / 2, abs=1e-12)
    assert not rep.viable and not rep.constant_data


def test_constant_and_narrow_data(full2, hyp2, narrow2):
    rep = scan_narrowness(hyp2, full2, 1, 6)
    assert rep.constant_data and rep.viable and rep.delta_hat < 1e-8
    rep = scan_narrowness(narrow2, full2, 1, 6)
    assert rep.delta_hat == pytest.approx(0.01, abs=1e-9)
    assert rep.viable and not rep.constant_data
    assert rep.offenders and rep.offenders[0][0] == pytest.approx(0.01, abs=1e-9)


def primitive_orbit_count(sys, n):
    # Moebius inversion of the fixed-point counts
    def mu(m):
        out, p = 1, 2
        while m > 1:
            if m % p == 0:
                m //= p
                if m % p == 0:
                    return 0
                out = -out
            p += 1
        return out
    return sum(mu(n // e) * sys.fixed_point_count(e) for e in range(1, n + 1) if n % e == 0) // n


@pytest.mark.parametrize("name,N", [("golden", 6), ("full2", 6)])
def test_scan_counts_primitive_orbits(name, N):
    sys = SftSystem.golden_mean() if name == "golden" else SftSystem.full_shift(2)
    rep = scan_narrowness(CocycleSpec.constant(sys, np.diag([2.0, 1.0])), sys, 1, N)
    assert rep.orbit_count == sum(primitive_orbit_count(sys, n) for n in range(1, N + 1))
    assert all(len(set(dt.orbit.word[i:] + dt.orbit.word[:i] for i in range(dt.period))) == dt.period
               for dt in rep.data)


def test_zero_moduli_and_advisory(full2, galerkin):
    dt = eigen_moduli(galerkin, PeriodicOrbit((0,), full2))
    assert dt.has_zero_modulus and np.all(np.isneginf(dt.exponents))
    rep = scan_narrowness(galerkin, full2, 1, 3)
    assert rep.advisory and rep.excluded == rep.orbit_count


def test_large_dimension_direct_path(full2):
    vals = np.linspace(0.5, 3.0, 11)
    spec = CocycleSpec.constant(full2, np.diag(vals))
    dt = eigen_moduli(spec, PeriodicOrbit((0, 1), full2))
    assert np.allclose(dt.exponents, np.sort(np.log(vals))[::-1], atol=1e-12)


def test_scan_errors(full2, golden, hyp2, monkeypatch):
    with pytest.raises(DomainError):
        scan_narrowness(hyp2, full2, 3, 4)
    with pytest.raises(DomainError):
        scan_narrowness(hyp2, golden, 1, 4)
    with pytest.raises(DomainError):
        scan_narrowness(hyp2, full2, 1, 0)
    flip = SftSystem([[0, 1], [1, 0]])
    with pytest.raises(DomainError):
        scan_narrowness(CocycleSpec.constant(flip, np.eye(2)), flip, 1, 1)

    def broken(_):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(np.linalg, "eigvals", broken)
    with pytest.raises(EigenSolverError) as info:
        eigen_moduli(hyp2, PeriodicOrbit((0, 1), full2))
    assert info.value.word == (0, 1)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), words)
def test_rotation_invariance(seed, d, w):
    sys = SftSystem.full_shift(2)
    spec = random_cocycle(sys, d, seed)
    orb = PeriodicOrbit(w, sys)
    base = eigen_moduli(spec, orb).log_moduli
    for i in range(1, len(w)):
        assert np.allclose(eigen_moduli(spec, orb.rotation(i)).log_moduli, base, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), words)
def test_power_consistency(seed, d, w):
    sys = SftSystem.full_shift(2)
    spec = random_cocycle(sys, d, seed)
    one = eigen_moduli(spec, PeriodicOrbit(w, sys))
    two = eigen_moduli(spec, PeriodicOrbit(w + w, sys))
    assert np.allclose(two.log_moduli, 2 * one.log_moduli, atol=1e-8)
    assert np.allclose(two.exponents, one.exponents, atol=1e-8)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(2, 4), words)
def test_moduli_product_is_det(seed, d, w):
    sys = SftSystem.full_shift(2)
    spec = random_cocycle(sys, d, seed)
    orb = PeriodicOrbit(w, sys)
    dt = eigen_moduli(spec, orb)
    det = np.linalg.slogdet(mat_product(spec.stack(orb.point(), 0, len(w))))[1]
    assert dt.log_moduli.sum() == pytest.approx(det, abs=1e-8)
    assert np.all(np.diff(dt.log_moduli) <= 0)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_delta_hat_monotone_in_N(seed):
    sys = SftSystem.full_shift(2)
    spec = random_cocycle(sys, 2, seed)
    deltas = [scan_narrowness(spec, sys, 1, N).delta_hat for N in range(1, 6)]
    assert all(a <= b + 1e-12 for a, b in zip(deltas, deltas[1:]))
