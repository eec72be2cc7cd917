import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plstomo.designs import (
    DesignKind,
    born_probabilities,
    corrupt,
    estimator_range,
    make_design,
    mub_design,
    pauli_local_design,
    sic_design_d2,
    single_shot_estimate,
    verify_moment_identities,
    verify_two_design,
)
from plstomo.matcore import ket_projector, random_density, spectral_norm, tensor

SHIPPED = [("mub", 2), ("mub", 3), ("mub", 5), ("sic", 2), ("pauli", 1), ("pauli", 2)]


@pytest.mark.parametrize("family,size", SHIPPED + [("mub", 7), ("pauli", 3)])
def test_design_invariants(family, size):
    make_design(family, size).check(1e-10)


def test_mub_qubit_is_pauli_eigenbases():
    design = mub_design(2)
    assert design.num_outcomes == 6
    assert np.isclose(design.povm_weight, 1 / 3)
    x_plus = ket_projector(np.array([1, 1]) / np.sqrt(2))
    y_plus = ket_projector(np.array([1, 1j]) / np.sqrt(2))
    assert any(np.allclose(p, x_plus) for p in design.projectors)
    assert any(np.allclose(p, y_plus) for p in design.projectors)


def test_mub_d3_completeness():
    design = mub_design(3)
    assert design.num_outcomes == 12
    assert np.max(np.abs(3 / 12 * design.projectors.sum(axis=0) - np.eye(3))) <= 1e-10


@pytest.mark.parametrize("d", [2, 3, 5, 7])
def test_mub_unbiased(d):
    kets = mub_design(d).kets.reshape(d + 1, d, d)
    for a in range(d + 1):
        for b in range(a + 1, d + 1):
            assert np.allclose(np.abs(kets[a].conj() @ kets[b].T) ** 2, 1 / d, atol=1e-10)


@pytest.mark.parametrize("d", [4, 6, 1])
def test_mub_rejects_non_prime(d):
    with pytest.raises(ValueError):
        mub_design(d)


def test_sic_overlaps_and_completeness():
    design = sic_design_d2()
    g = np.abs(design.kets.conj() @ design.kets.T) ** 2
    off = g[~np.eye(4, dtype=bool)]
    assert np.allclose(off, 1 / 3, atol=1e-10)
    assert np.allclose(0.5 * design.projectors.sum(axis=0), np.eye(2), atol=1e-10)
    assert verify_two_design(design, tol=1e-9).passed


def test_pauli_local_counts():
    assert np.allclose(pauli_local_design(1).projectors, mub_design(2).projectors)
    design = pauli_local_design(2)
    assert design.kind is DesignKind.LOCAL
    assert design.num_outcomes == 36
    assert np.isclose(design.povm_weight, 1 / 9)
    assert verify_two_design(design, tol=1e-10).passed


@pytest.mark.parametrize("n", [0, 5])
def test_pauli_local_range(n):
    with pytest.raises(ValueError):
        pauli_local_design(n)


def test_single_shot_examples():
    z0 = mub_design(2).encode(0)
    assert np.allclose(single_shot_estimate(mub_design(2), z0), np.diag([2, -1]))
    assert np.allclose(single_shot_estimate(pauli_local_design(2), (0, 0)), np.diag([4, -2, -2, 1]))


@pytest.mark.parametrize("family,size", SHIPPED)
def test_single_shot_trace_and_range(family, size):
    design = make_design(family, size)
    for k in design.outcomes():
        est = single_shot_estimate(design, k)
        assert np.isclose(np.trace(est), 1, atol=1e-12)
        assert np.allclose(est, est.conj().T)
        assert spectral_norm(est) <= design.dim + 1e-12
    assert estimator_range(design) <= design.dim + 1e-12


def test_two_design_mub3_and_identity_input():
    assert verify_two_design(mub_design(3), trials=100, tol=1e-9).passed
    design = mub_design(3)
    assert np.allclose(design.projectors.mean(axis=0), np.eye(3) / 3)


def test_corrupted_design_fails():
    report = verify_two_design(corrupt(mub_design(3)), trials=100, tol=1e-9)
    assert not report.passed
    assert report.max_deviation > 1e-3
    assert 0 <= report.worst_seed < 100


def test_moments_maximally_mixed_qubit():
    rep = verify_moment_identities(mub_design(2), np.eye(2) / 2)
    assert np.allclose(rep.mean, np.eye(2) / 2, atol=1e-12)
    assert np.allclose(rep.second_moment, 2.5 * np.eye(2), atol=1e-12)


def test_moments_d3_random():
    rho = random_density(3, np.random.default_rng(4))
    assert verify_moment_identities(mub_design(3), rho).passed(1e-10)


def test_moments_pauli_product_state():
    rng = np.random.default_rng(9)
    r1, r2 = random_density(2, rng), random_density(2, rng)
    rep = verify_moment_identities(pauli_local_design(2), tensor(r1, r2))
    target = tensor(r1 + 2 * np.eye(2), r2 + 2 * np.eye(2))
    assert np.max(np.abs(rep.second_moment - target)) <= 1e-10


def test_moment_enumeration_guard(monkeypatch):
    monkeypatch.setattr("plstomo.designs.MAX_ENUMERATION", 100)
    with pytest.raises(ValueError, match="outcomes"):
        verify_moment_identities(pauli_local_design(3), np.eye(8) / 8)


def test_born_probabilities_basic():
    design = mub_design(2)
    assert np.allclose(born_probabilities(design, np.eye(2) / 2), 1 / 6)
    p = born_probabilities(design, np.diag([1.0, 0.0]))
    assert np.isclose(p[design.encode(1)], 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(SHIPPED))
def test_unbiased_and_variance_property(seed, fam):
    design = make_design(*fam)
    rho = random_density(design.dim, np.random.default_rng(seed))
    rep = verify_moment_identities(design, rho)
    assert rep.passed(1e-10)
    bound = 2 * design.dim if design.kind is DesignKind.GLOBAL else 3**design.n_qubits
    assert rep.variance_norm <= bound + 1e-10


def test_encode_decode_round_trip():
    design = pauli_local_design(3)
    for i in (0, 17, 215):
        assert design.encode(design.decode(i)) == i
    assert design.decode(1) == (0, 0, 1)
