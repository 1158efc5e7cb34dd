import math

import numpy as np
import pytest
from scipy.special import jv

from QFP.core.lattice import ModeRangeError, ModeWindow
from QFP.Gates import (
    HADAMARD,
    IDENTITY,
    EomSettings,
    FidelityError,
    GateConfig,
    Gates,
    LayoutError,
    PfMask,
    TruncationError,
    build_gate,
    compose_gate,
    crosstalk,
    eom_unitary,
    extract_qubit_block,
    gate_fidelity,
    parallel_mask,
    pf_unitary,
    success_probability,
    transmission_matrix,
    tunability_sweep,
    validate_layout,
)


WINDOW = ModeWindow(-40, 40)


@pytest.fixture
def hadamard():
    return build_gate(0)


@pytest.fixture
def hadamard_block(hadamard):
    return extract_qubit_block(compose_gate(hadamard, (0, 1)), (0, 1))


def test_unmodulated_eom_is_identity():
    u = eom_unitary(EomSettings(0.0), ModeWindow(-10, 10))
    assert np.allclose(u.matrix, np.eye(21))
    assert u.truncation_error == 0.0


@pytest.mark.parametrize("mu", [0.2, 0.81, 1.5])
def test_eom_interior_is_unitary(mu):
    u = eom_unitary(EomSettings(mu, rf_phase=0.3), WINDOW, margin=16)
    assert u.column_norm_deviation() < 1e-10
    assert u.row_norm_deviation() < 1e-10


@pytest.mark.parametrize("mu", [0.2, 0.81, 1.5])
def test_truncation_error_shrinks_with_margin(mu):
    settings = EomSettings(mu)
    small = eom_unitary(settings, WINDOW, margin=8).truncation_error
    large = eom_unitary(settings, WINDOW, margin=16).truncation_error
    assert large < small


def test_eom_sideband_amplitudes():
    u = eom_unitary(EomSettings(0.81), WINDOW, margin=16)
    for k in range(-3, 4):
        assert abs(u[k, 0]) == pytest.approx(abs(jv(k, 0.81)))


def test_window_without_interior():
    with pytest.raises(TruncationError):
        eom_unitary(EomSettings(0.81), ModeWindow(0, 10), margin=8)


def test_lost_sideband_weight_is_bounded():
    # 1.3e-11 of the weight leaves a 41-mode window at margin 8
    with pytest.raises(TruncationError):
        eom_unitary(EomSettings(2.0), ModeWindow(-20, 20), margin=8)
    u = eom_unitary(EomSettings(2.0), ModeWindow(-20, 20), margin=16)
    assert u.truncation_error < 1e-12


def test_strong_modulation_in_small_window():
    with pytest.raises(TruncationError):
        eom_unitary(EomSettings(20.0), ModeWindow(-10, 10), margin=2)


def test_hadamard_fidelity_and_success(hadamard_block):
    assert gate_fidelity(hadamard_block, HADAMARD) >= 0.99
    assert 0.95 <= success_probability(hadamard_block, HADAMARD) <= 0.99


def test_zero_step_is_identity():
    gate = build_gate(0, alpha=0.0)
    block = extract_qubit_block(compose_gate(gate, (0, 1)), (0, 1))
    assert gate_fidelity(block, IDENTITY) >= 0.99
    assert success_probability(block, IDENTITY) == pytest.approx(1.0, abs=1e-6)


def test_gate_is_translation_invariant(hadamard_block):
    shifted = build_gate(30)
    block = extract_qubit_block(compose_gate(shifted, (30, 31)), (30, 31))
    assert np.allclose(np.abs(block), np.abs(hadamard_block))


def test_compose_matches_explicit_product(hadamard):
    window = ModeWindow(-3, 4)
    padded = window.expand(hadamard.truncation_margin)
    first = eom_unitary(hadamard.eom1, padded, hadamard.truncation_margin)
    second = eom_unitary(hadamard.eom2, padded, hadamard.truncation_margin)
    product = second.matrix @ pf_unitary(hadamard.mask, padded).matrix @ first.matrix
    sub = padded.slice_of(window)
    assert np.allclose(compose_gate(hadamard, window).matrix, product[sub, sub])


def test_sweep_is_monotone():
    alphas = np.linspace(0.0, math.pi, 32)
    points = tunability_sweep(build_gate(0), alphas)
    f_identity = np.array([p.f_identity for p in points])
    f_hadamard = np.array([p.f_hadamard for p in points])
    assert len(points) == 32
    assert np.all(np.diff(f_hadamard) >= -1e-12)
    assert np.all(np.diff(f_identity) <= 1e-12)
    assert points[0].f_identity >= 0.99
    assert points[-1].f_hadamard >= 0.99


def test_fidelity_of_equal_operators():
    assert gate_fidelity(HADAMARD, HADAMARD) == pytest.approx(1.0)
    assert gate_fidelity(IDENTITY, HADAMARD) == pytest.approx(0.0)


def test_fidelity_ignores_scale(hadamard_block):
    assert gate_fidelity(0.3 * hadamard_block, HADAMARD) == pytest.approx(
        gate_fidelity(hadamard_block, HADAMARD)
    )


def test_fidelity_of_zero_operator():
    with pytest.raises(FidelityError):
        gate_fidelity(np.zeros((2, 2)), HADAMARD)
    with pytest.raises(ValueError):
        gate_fidelity(HADAMARD, np.zeros((2, 2)))


def test_block_outside_window(hadamard):
    u = compose_gate(hadamard, (0, 1))
    with pytest.raises(ModeRangeError):
        extract_qubit_block(u, (1, 2))


def test_guarded_layout_crosstalk(hadamard):
    config = hadamard.with_mask(parallel_mask([0, 4], math.pi, guard_modes=2))
    assert crosstalk(config, 1, (4, 5)) <= 1e-3
    assert crosstalk(config, 4, (0, 1)) <= 1e-3


def test_unguarded_layout_crosstalk(hadamard):
    config = hadamard.with_mask(parallel_mask([0, 2], math.pi, guard_modes=0))
    assert crosstalk(config, 1, (2, 3)) > 1e-3


def test_parallel_block_matches_single_gate(hadamard):
    config = hadamard.with_mask(parallel_mask([0, 4], math.pi, guard_modes=2))
    parallel = extract_qubit_block(compose_gate(config, (4, 5)), (4, 5))
    single = extract_qubit_block(compose_gate(build_gate(4), (4, 5)), (4, 5))
    assert gate_fidelity(parallel, single) >= 0.999


def test_crosstalk_source_inside_block(hadamard):
    with pytest.raises(ValueError):
        crosstalk(hadamard, 4, (4, 5))


@pytest.mark.parametrize(
    "bases, guard",
    [([0, 1], 0), ([0, 3], 2), ([10, 4, 6], 2)],
    ids=["overlap", "no-guard", "unsorted-close"],
)
def test_invalid_layout(bases, guard):
    with pytest.raises(LayoutError):
        validate_layout(bases, guard)


def test_valid_layout_is_sorted():
    assert validate_layout([8, 0, 4], 2) == [0, 4, 8]


def test_parallel_mask_needs_one_step_per_qubit():
    with pytest.raises(ValueError):
        parallel_mask([0, 4], [math.pi], guard_modes=2)


def test_transmission_matrix_is_substochastic(hadamard):
    t = transmission_matrix(hadamard, ModeWindow(-5, 6))
    assert np.all(t >= 0)
    assert np.all(t.sum(axis=0) <= 1 + 1e-9)


def test_mask_below_filter_resolution():
    with pytest.raises(LayoutError):
        PfMask(spacing_ghz=5.0, resolution_ghz=10.0)


def test_dispersion_phase_is_quadratic():
    mask = PfMask(dispersion_ps_per_nm=-0.4)
    assert mask.dispersion_phase(0) == 0.0
    assert mask.dispersion_phase(3) == pytest.approx(mask.dispersion_phase(-3))
    assert mask.dispersion_phase(6) == pytest.approx(4 * mask.dispersion_phase(3))
    assert PfMask().dispersion_phase(6) == 0.0


def test_gate_margin_too_small():
    with pytest.raises(ValueError):
        build_gate(0, truncation_margin=7)


def test_gate_rf_must_match_grid(hadamard):
    hadamard.validate_for_grid(21.18)
    with pytest.raises(ValueError):
        hadamard.validate_for_grid(25.0)


def test_modulators_share_rf():
    with pytest.raises(ValueError):
        GateConfig(EomSettings(0.8, 21.18), PfMask(), EomSettings(0.8, 25.0))


def test_eom_from_voltage():
    settings = EomSettings.from_voltage(2.0, 4.0)
    assert settings.modulation_index == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        EomSettings.from_voltage(1.0, 0.0)


def test_keywords_build_hadamard():
    library = Gates()
    config = library.build_gate(0)
    block = library.get_gate_block(config, 0)
    assert library.get_gate_fidelity(block, "hadamard") >= 0.99
