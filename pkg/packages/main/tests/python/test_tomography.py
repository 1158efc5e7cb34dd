import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from QFP.Measurement import (
    CoincidenceRecord,
    ValidationError,
    label_pairs,
    load_record,
)
from QFP.Tomography import (
    PHI_PLUS,
    DensityMatrix,
    ReconstructionError,
    Tomography,
    TomographySet,
    count_probabilities,
    linear_inversion,
    monte_carlo_errors,
    project_to_physical,
    projector_matrix,
    reconstruct,
    reconstruct_from_probabilities,
    state_fidelity,
    tomography_report,
)


RESOURCES = Path(__file__).parent / ".." / "resources"

BELL = np.outer(PHI_PLUS, PHI_PLUS.conj())


def exact_probabilities(rho):
    return {
        labels: float(np.trace(projector_matrix(labels) @ rho).real)
        for labels in label_pairs()
    }


def random_pure_state(rng):
    vector = rng.normal(size=4) + 1j * rng.normal(size=4)
    vector /= np.linalg.norm(vector)
    return np.outer(vector, vector.conj())


def trace_distance(a, b):
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b)))


@pytest.fixture
def table_one():
    return TomographySet(load_record(RESOURCES / "coincidences_n34.json"))


@pytest.fixture
def bell_counts():
    probabilities = exact_probabilities(BELL)
    counts = {labels: int(round(p * 1e7)) for labels, p in probabilities.items()}
    return TomographySet(CoincidenceRecord(counts, 125.0))


def test_projector_is_rank_one():
    p = projector_matrix(("+", "+i"))
    assert np.allclose(p @ p, p)
    assert np.trace(p).real == pytest.approx(1.0)


def test_bell_state_from_exact_probabilities():
    rho = reconstruct_from_probabilities(exact_probabilities(BELL))
    assert np.allclose(rho.matrix, BELL, atol=1e-10)


def test_mixed_state_from_uniform_probabilities():
    rho = reconstruct_from_probabilities(exact_probabilities(np.eye(4) / 4))
    assert np.allclose(rho.matrix, np.eye(4) / 4, atol=1e-10)


def test_random_states_round_trip():
    rng = np.random.default_rng(2021)
    for _ in range(100):
        rho = random_pure_state(rng)
        estimate = reconstruct_from_probabilities(exact_probabilities(rho))
        assert trace_distance(estimate.matrix, rho) < 1e-8


IDLER_FLIP = np.kron(np.array([[0, 1], [1, 0]], dtype=complex), np.eye(2))
FLIPPED_LABEL = {"0": "1", "1": "0", "+": "+", "-": "-", "+i": "-i", "-i": "+i"}


def test_reconstruction_commutes_with_local_flip():
    rng = np.random.default_rng(11)
    rho = 0.7 * random_pure_state(rng) + 0.3 * random_pure_state(rng)
    flipped = IDLER_FLIP @ rho @ IDLER_FLIP

    estimate = reconstruct_from_probabilities(exact_probabilities(rho))
    flipped_estimate = reconstruct_from_probabilities(exact_probabilities(flipped))
    assert np.allclose(
        flipped_estimate.matrix, IDLER_FLIP @ estimate.matrix @ IDLER_FLIP, atol=1e-10
    )


def test_relabelled_idler_outcomes_give_flipped_state():
    rng = np.random.default_rng(12)
    rho = 0.6 * random_pure_state(rng) + 0.4 * random_pure_state(rng)
    relabelled = {
        (FLIPPED_LABEL[idler], signal): p
        for (idler, signal), p in exact_probabilities(rho).items()
    }
    estimate = reconstruct_from_probabilities(relabelled)
    assert np.allclose(estimate.matrix, IDLER_FLIP @ rho @ IDLER_FLIP, atol=1e-10)


def test_flux_anchor_recovers_any_state():
    rng = np.random.default_rng(7)
    rho = random_pure_state(rng)
    expected = {labels: p * 5e4 for labels, p in exact_probabilities(rho).items()}
    estimate = linear_inversion(expected, anchor="flux")
    assert trace_distance(estimate.matrix, rho) < 1e-8


def test_too_few_projections():
    probabilities = exact_probabilities(BELL)
    del probabilities[("+i", "+i")]
    with pytest.raises(ReconstructionError):
        reconstruct_from_probabilities(probabilities)


def test_negative_probability():
    probabilities = exact_probabilities(BELL)
    probabilities[("0", "1")] = -0.01
    with pytest.raises(ValidationError):
        reconstruct_from_probabilities(probabilities)


def test_projection_to_diagonal():
    rho = project_to_physical(np.diag([1.1, -0.1, 0.0, 0.0]))
    assert np.allclose(rho.matrix, np.diag([1.0, 0.0, 0.0, 0.0]))
    assert rho.method == "projected"


def test_projection_is_idempotent():
    rng = np.random.default_rng(3)
    noisy = random_pure_state(rng) + 0.05 * np.diag([1, -1, 1, -1])
    once = project_to_physical(noisy)
    twice = project_to_physical(once)
    assert once.is_physical()
    assert np.allclose(once.matrix, twice.matrix)


def test_projection_non_positive_trace():
    with pytest.raises(ReconstructionError):
        project_to_physical(-np.eye(4))


@pytest.mark.parametrize(
    "rho, expected",
    [(BELL, 1.0), (np.eye(4) / 4, 0.25), (np.diag([1.0, 0, 0, 0]), 0.5)],
    ids=["bell", "mixed", "product"],
)
def test_fidelity_examples(rho, expected):
    assert state_fidelity(rho) == pytest.approx(expected)


@settings(max_examples=25, deadline=None)
@given(st.floats(min_value=0.0, max_value=1.0))
def test_fidelity_is_linear_in_mixture(weight):
    other = np.diag([0.0, 0.5, 0.5, 0.0])
    mixture = weight * BELL + (1 - weight) * other
    assert state_fidelity(mixture) == pytest.approx(
        weight * state_fidelity(BELL) + (1 - weight) * state_fidelity(other)
    )


def test_density_matrix_properties():
    rho = DensityMatrix(BELL)
    assert rho.purity == pytest.approx(1.0)
    assert rho.eigenvalues[0] == pytest.approx(1.0)
    assert rho.trace_residual == pytest.approx(0.0)
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(2))


def test_table_one_context_anchor(table_one):
    rho = reconstruct(table_one, anchor="context")
    assert rho.is_physical()
    assert state_fidelity(rho) == pytest.approx(0.961, abs=0.02)


def test_table_one_x_marginals_are_balanced(table_one):
    probabilities = count_probabilities(table_one, anchor="context")
    for label in ("+", "+i"):
        assert probabilities[(label, "0")] + probabilities[(label, "1")] == pytest.approx(0.5)
        assert probabilities[("0", label)] + probabilities[("1", label)] == pytest.approx(0.5)


def test_table_one_flux_anchor(table_one):
    fidelity = state_fidelity(reconstruct(table_one, anchor="flux"))
    assert 0.8 < fidelity < 0.93


def test_unknown_anchor(table_one):
    with pytest.raises(ValueError):
        count_probabilities(table_one, anchor="maximum-likelihood")


def test_table_one_monte_carlo(table_one):
    result = monte_carlo_errors(table_one, n_resamples=200, seed=2021)
    assert 0.003 <= result.std <= 0.015
    assert result.failures == 0
    assert result.mean == pytest.approx(0.961, abs=0.03)


def test_monte_carlo_is_reproducible(table_one):
    first = monte_carlo_errors(table_one, n_resamples=100, seed=5)
    second = monte_carlo_errors(table_one, n_resamples=100, seed=5)
    assert first == second


def test_monte_carlo_needs_resamples(table_one):
    with pytest.raises(ValueError):
        monte_carlo_errors(table_one, n_resamples=99)


def test_monte_carlo_without_noise(bell_counts):
    result = monte_carlo_errors(bell_counts, n_resamples=100, seed=1)
    assert result.std < 1e-3
    assert result.mean == pytest.approx(1.0, abs=1e-3)


def test_missing_projection():
    counts = {labels: 10 for labels in label_pairs()}
    del counts[("+", "+i")]
    with pytest.raises(ValidationError):
        TomographySet(CoincidenceRecord(counts, 1.0))


def test_empty_basis():
    counts = {labels: 10 for labels in label_pairs()}
    counts[("+", "0")] = counts[("+", "1")] = 0
    with pytest.raises(ReconstructionError):
        reconstruct(TomographySet(CoincidenceRecord(counts, 1.0)))


def test_empty_z_basis():
    counts = {labels: 10 for labels in label_pairs()}
    for labels in (("0", "0"), ("0", "1"), ("1", "0"), ("1", "1")):
        counts[labels] = 0
    with pytest.raises(ReconstructionError):
        reconstruct(TomographySet(CoincidenceRecord(counts, 1.0)), anchor="flux")


def test_report_without_resampling(table_one):
    report = tomography_report(table_one)
    assert report["fidelity_std"] is None
    assert len(report["raw_eigenvalues"]) == 4
    assert report["rho"]["method"] == "projected"
    assert report["rho"]["anchor"] == "context"


def test_report_resampling_needs_counts():
    expected = {labels: p * 1e4 for labels, p in exact_probabilities(BELL).items()}
    with pytest.raises(ValueError):
        tomography_report(expected, n_resamples=100)


def test_keywords():
    library = Tomography()
    record = load_record(RESOURCES / "coincidences_n34.json")
    rho = library.reconstruct_density_matrix(record)
    assert library.get_state_fidelity(rho) == pytest.approx(0.961, abs=0.02)
    assert math.isclose(np.trace(rho.matrix).real, 1.0)
