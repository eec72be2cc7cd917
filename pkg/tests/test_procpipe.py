import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plstomo.designs import mub_design, pauli_local_design, sic_design_d2
from plstomo.matcore import ket_projector, partial_trace, random_density, random_unitary, tensor
from plstomo.procpipe import (
    CHANNEL_SOURCE_NAMES,
    Channel,
    DriftDepolarizingSource,
    DriftUnitarySource,
    FeedbackChannelSource,
    IidChannelSource,
    apply_channel,
    apply_choi,
    builtin_channel_sources,
    choi_from_rounds,
    choi_single_shot,
    depolarizing_channel,
    diamond_bound,
    effective_probabilities,
    exact_choi_mean,
    identity_channel,
    random_kraus_channel,
    run_process_tomography,
    unitary_channel,
)
from plstomo.projection import choi_residuals
from plstomo.sources import History


def rng(seed=0):
    return np.random.default_rng(seed)


def test_identity_choi_is_bell_state():
    phi = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(identity_channel(2).choi, ket_projector(phi))


def test_completely_depolarizing_choi():
    assert np.allclose(depolarizing_channel(2, 1.0).choi, np.eye(4) / 4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([2, 3, 4]))
def test_random_channel_choi_marginal_and_action(seed, d):
    r = rng(seed)
    ch = random_kraus_channel(d, r, rank=3)
    assert np.max(np.abs(partial_trace(ch.choi, [d, d], [1]) - np.eye(d) / d)) <= 1e-10
    sigma = random_density(d, r)
    assert np.max(np.abs(apply_choi(ch.choi, sigma) - apply_channel(ch, sigma))) <= 1e-10


def test_apply_channel_examples():
    sigma = random_density(2, rng(1))
    assert np.allclose(apply_channel(identity_channel(2), sigma), sigma)
    z0 = ket_projector([1, 0])
    assert np.allclose(apply_channel(depolarizing_channel(2, 0.3), z0), 0.7 * z0 + 0.3 * np.eye(2) / 2)


def test_channel_rejects_non_trace_preserving():
    with pytest.raises(ValueError, match="trace preserving"):
        Channel([np.diag([1.0, 0.5])])


ENUMERABLE = [
    (mub_design(2), mub_design(2)),
    (sic_design_d2(), sic_design_d2()),
    (pauli_local_design(1), pauli_local_design(1)),
    (mub_design(2), sic_design_d2()),
]


@pytest.mark.parametrize("pair", ENUMERABLE)
def test_choi_estimator_unbiased(pair):
    inp, out = pair
    for ch in (identity_channel(2), random_kraus_channel(2, rng(2)), unitary_channel(random_unitary(2, rng(3)))):
        assert np.max(np.abs(exact_choi_mean(ch, inp, out) - ch.choi)) <= 1e-10


def test_choi_estimator_unbiased_local_two_qubits():
    design = pauli_local_design(2)
    ch = random_kraus_channel(4, rng(4))
    assert np.max(np.abs(exact_choi_mean(ch, design, design) - ch.choi)) <= 1e-10


def test_effective_povm_equivalence():
    design = mub_design(2)
    ch = random_kraus_channel(2, rng(5))
    probs = effective_probabilities(ch, design, design)
    d, m = 2, design.num_outcomes
    for j in range(m):
        for k in range(m):
            sigma, p = design.projector(j), design.projector(k)
            direct = d / m**2 * np.trace(p @ ch(sigma)).real
            via_choi = d**2 / m**2 * np.trace(ch.choi @ tensor(sigma.T, p)).real
            assert abs(direct - via_choi) <= 1e-12
            assert abs(probs[j, k] - direct) <= 1e-12


def test_single_round_is_single_shot():
    design = mub_design(2)
    run = run_process_tomography(IidChannelSource(identity_channel(2)), design, design, 1, rng(6))
    z, y = run.history.inputs[0], run.history.outcomes[0]
    assert np.allclose(run.linear.matrix, choi_single_shot(design, design, z, y))


def test_histogram_path_equals_rounds_path():
    design = pauli_local_design(1)
    src = FeedbackChannelSource(2, 0.2, window=5, num_outcomes=6)
    run = run_process_tomography(src, design, design, 500, rng(7))
    ref = choi_from_rounds(design, design, run.history)
    assert np.max(np.abs(run.linear.matrix - ref.matrix)) <= 1e-12


def test_drift_depolarizing_average_is_mean_p():
    n = 300
    src = DriftDepolarizingSource(2, lambda t: t / n)
    run = run_process_tomography(src, mub_design(2), mub_design(2), n, rng(8))
    p_bar = np.mean([t / n for t in range(1, n + 1)])
    assert np.max(np.abs(run.rho_bar - depolarizing_channel(2, p_bar).choi)) <= 1e-12


def test_projected_process_estimate_is_valid_channel():
    design = mub_design(2)
    run = run_process_tomography(IidChannelSource(random_kraus_channel(2, rng(9))), design, design, 200, rng(10))
    lam_min, marginal = choi_residuals(run.pls, 2)
    assert lam_min >= -1e-8 and marginal <= 1e-8


def test_diamond_bound_examples():
    assert diamond_bound(np.zeros((4, 4)), 2) == 0
    assert np.isclose(diamond_bound(np.diag([0.01, 0, 0, 0]), 2), 0.04)
    with pytest.raises(ValueError):
        diamond_bound(np.zeros((2, 2)), 2)


@pytest.mark.parametrize("p,q", [(0.1, 0.3), (0.0, 1.0), (0.5, 0.45)])
def test_diamond_bound_dominates_depolarizing_gap(p, q):
    delta = depolarizing_channel(2, p).choi - depolarizing_channel(2, q).choi
    trace_dist = 0.5 * np.abs(np.linalg.eigvalsh(delta)).sum()
    assert diamond_bound(delta, 2) >= trace_dist >= abs(p - q) / 2


def _trajectory(src, n=20):
    h = History()
    out = []
    for t in range(n):
        out.append(src.next_channel(h).choi)
        h.append(t % 6, t % 6)
    return out


def test_degenerate_sources_are_iid():
    const = DriftDepolarizingSource(2, lambda t: 0.2)
    still = DriftUnitarySource(2, omega=0.0, p=0.2)
    lazy = FeedbackChannelSource(2, 0.2, window=0)
    target = depolarizing_channel(2, 0.2).choi
    for src in (const, still, lazy):
        assert all(np.allclose(c, target) for c in _trajectory(src))


@pytest.mark.parametrize("d", [2, 4])
def test_builtin_channel_catalog(d):
    catalog = builtin_channel_sources(d, seed=3)
    assert tuple(catalog) == CHANNEL_SOURCE_NAMES
    for src in catalog.values():
        for c in _trajectory(src, 5):
            assert np.allclose(partial_trace(c, [d, d], [1]), np.eye(d) / d)


def test_builtin_channel_dimension_guard():
    with pytest.raises(ValueError):
        builtin_channel_sources(3, seed=0)
