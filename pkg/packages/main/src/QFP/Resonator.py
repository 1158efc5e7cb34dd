import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from robot.api.deco import keyword

from QFP.core.lattice import GHZ, THZ, FrequencyGrid, ModeRangeError


DEFAULT_BRIGHTNESS = 15.87e6
DEFAULT_REFERENCE_MW = 0.75
Q_TOLERANCE = 0.10

PhaseProfile = Callable[[int], float]

logger = logging.getLogger(__name__)


class DegenerateStateError(ValueError):
    """Raised when a transmission table cannot produce a normalizable state."""


def zero_phase(n: int) -> float:
    # pylint: disable=unused-argument
    return 0.0


def quadratic_phase(coeff: float) -> PhaseProfile:
    """Residual phase profile alpha_n = coeff * n**2."""
    coeff = float(coeff)

    def profile(n: int) -> float:
        return coeff * n * n

    return profile


def flat_envelope(grid: FrequencyGrid) -> Dict[int, float]:
    return {n: 1.0 for n in grid}


def gaussian_envelope(grid: FrequencyGrid, width: float) -> Dict[int, float]:
    """Smooth coupler roll-off, exp(-(n / width)**2)."""
    if width <= 0:
        raise ValueError("Invalid envelope width")
    return {n: math.exp(-((n / width) ** 2)) for n in grid}


def transmission_table(
    envelope: Mapping[int, float], factors: Optional[Mapping[int, float]] = None
) -> Dict[int, float]:
    """Combine an envelope with per-mode multiplicative factors (dips)."""
    factors = factors or {}
    unknown = set(factors) - set(envelope)
    if unknown:
        raise ModeRangeError(
            "Transmission factor(s) outside grid: {}".format(
                ", ".join(str(n) for n in sorted(unknown))
            )
        )
    return {n: t * float(factors.get(n, 1.0)) for n, t in envelope.items()}


@dataclass(frozen=True)
class ResonatorModel:
    """Spectral description of the microring pair source.

    :param grid: frequency lattice
    :param linewidth_fwhm: resonance linewidth in GHz
    :param quality_factor: loaded quality factor
    :param per_mode_transmission: factor in [0, 1] per index n
    :param internal_pair_rate: pairs/s summed over the comb at reference power
    :param reference_power_mw: pump power at which `internal_pair_rate` holds
    """

    grid: FrequencyGrid
    linewidth_fwhm: float
    quality_factor: float
    per_mode_transmission: Mapping[int, float]
    internal_pair_rate: float = DEFAULT_BRIGHTNESS
    reference_power_mw: float = DEFAULT_REFERENCE_MW

    def __post_init__(self):
        if self.linewidth_fwhm <= 0:
            raise ValueError("Invalid linewidth")
        if self.quality_factor <= 0:
            raise ValueError("Invalid quality factor")
        if self.internal_pair_rate < 0:
            raise ValueError("Invalid internal pair rate")
        if self.reference_power_mw <= 0:
            raise ValueError("Invalid reference power")

        missing = [n for n in self.grid if n not in self.per_mode_transmission]
        if missing:
            raise ValueError(f"Missing transmission for mode(s): {missing}")
        for n, value in self.per_mode_transmission.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Invalid transmission {value} at mode {n}")

        if not self.is_q_consistent():
            logger.warning(
                "Quality factor %.3g differs from f/FWHM %.3g by more than %d%%",
                self.quality_factor,
                self.expected_quality_factor,
                Q_TOLERANCE * 100,
            )

    @property
    def expected_quality_factor(self) -> float:
        return self.grid.pump_frequency * THZ / (self.linewidth_fwhm * GHZ)

    def is_q_consistent(self) -> bool:
        expected = self.expected_quality_factor
        return abs(self.quality_factor - expected) <= Q_TOLERANCE * expected

    def transmission(self, n: int) -> float:
        self.grid.require(n)
        return float(self.per_mode_transmission[n])

    def scaled(self, factor: float) -> "ResonatorModel":
        """Copy of the model with every transmission factor multiplied."""
        table = {n: t * factor for n, t in self.per_mode_transmission.items()}
        return ResonatorModel(
            grid=self.grid,
            linewidth_fwhm=self.linewidth_fwhm,
            quality_factor=self.quality_factor,
            per_mode_transmission=table,
            internal_pair_rate=self.internal_pair_rate,
            reference_power_mw=self.reference_power_mw,
        )


@dataclass(frozen=True)
class BiphotonState:
    """Comb-wide biphoton state, one complex amplitude per pair index."""

    grid: FrequencyGrid
    amplitudes: Mapping[int, complex]
    residual_phases: Mapping[int, float]

    @property
    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, n: int) -> complex:
        self.grid.require(n)
        return self.amplitudes[n]


@dataclass(frozen=True)
class QubitPairSelection:
    """Two adjacent pairs used as a two-qubit system.

    |0> is mode ``base_index`` and |1> is mode ``base_index + 1``
    for both the signal and the idler photon.
    """

    base_index: int
    compensation_phase: float = 0.0
    relative_phase: float = 0.0
    weights: Tuple[float, float] = field(default=(0.5, 0.5))

    @property
    def modes(self) -> Tuple[int, int]:
        return self.base_index, self.base_index + 1


def biphoton_state(
    model: ResonatorModel, phase_profile: Optional[PhaseProfile] = None
) -> BiphotonState:
    """Build the normalized comb state from the transmission table.

    :param model: resonator model
    :param phase_profile: residual phase per index, zero if not given
    :raises DegenerateStateError: all transmission factors are zero
    """
    phase_profile = phase_profile or zero_phase
    indices = list(model.grid)

    magnitudes = np.sqrt(np.array([model.transmission(n) for n in indices]))
    norm = np.linalg.norm(magnitudes)
    if norm == 0.0:
        raise DegenerateStateError("Transmission table is all zeros")
    magnitudes = magnitudes / norm

    phases = {n: float(phase_profile(n)) for n in indices}
    amplitudes = {
        n: complex(mag * np.exp(1j * phases[n])) for n, mag in zip(indices, magnitudes)
    }
    return BiphotonState(grid=model.grid, amplitudes=amplitudes, residual_phases=phases)


def jsi_diagonal(model: ResonatorModel, pump_power_mw: float) -> Dict[int, float]:
    """Expected generated-pair rate per index (pairs/s).

    The rate is quadratic in pump power and weighted by the transmission
    of both arms. With a flat table the rates add up to the internal
    brightness at the reference power.
    """
    if pump_power_mw <= 0:
        raise ValueError("Pump power must be positive")

    scale = (pump_power_mw / model.reference_power_mw) ** 2
    per_mode = model.internal_pair_rate * scale / len(model.grid)
    return {n: per_mode * model.transmission(n) ** 2 for n in model.grid}


def select_qubit_pair(
    state: BiphotonState, n: int, compensation_phase: Optional[float] = None
) -> Tuple[np.ndarray, QubitPairSelection]:
    """Two-qubit state a|00> + b|11> carried by pairs n and n + 1.

    Amplitudes are ordered |00>, |01>, |10>, |11> (idler, signal).

    :param state: comb state
    :param n: base index
    :param compensation_phase: phase removed from the residual phase
        difference, defaults to full compensation
    :raises ModeRangeError: n or n + 1 is outside the grid
    """
    first = state.amplitude(n)
    second = state.amplitude(n + 1)

    difference = state.residual_phases[n + 1] - state.residual_phases[n]
    if compensation_phase is None:
        compensation_phase = difference

    a, b = abs(first), abs(second)
    norm = math.hypot(a, b)
    if norm == 0.0:
        raise DegenerateStateError(f"Pairs {n} and {n + 1} carry no amplitude")

    phase = difference - compensation_phase
    vector = np.zeros(4, dtype=complex)
    vector[0] = a / norm
    vector[3] = b / norm * np.exp(1j * phase)

    selection = QubitPairSelection(
        base_index=n,
        compensation_phase=float(compensation_phase),
        relative_phase=float(phase),
        weights=(float((a / norm) ** 2), float((b / norm) ** 2)),
    )
    return vector, selection


class Resonator:
    """`Resonator` is a library for modelling the biphoton frequency comb
    of a microring source: mode frequencies, the generated state and its
    joint spectral intensity.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Get mode frequencies")
    def get_mode_frequencies(self, grid: FrequencyGrid, n: int):
        """Idler and signal frequencies in THz of pair `n`."""
        self.logger.info("Mode frequencies for pair %s", n)
        return grid.mode_frequencies(int(n))

    @keyword("Create biphoton state")
    def create_biphoton_state(
        self, model: ResonatorModel, phase_coefficient: float = 0.0
    ) -> BiphotonState:
        """Normalized comb state with a quadratic residual phase.

        :param model: resonator model
        :param phase_coefficient: coefficient c of alpha_n = c * n**2
        """
        self.logger.info("Building biphoton state over %d modes", len(model.grid))
        return biphoton_state(model, quadratic_phase(phase_coefficient))

    @keyword("Get joint spectral intensity")
    def get_joint_spectral_intensity(self, model: ResonatorModel, pump_mw: float):
        """Expected pair rate per index at the given pump power."""
        self.logger.info("JSI diagonal at %s mW", pump_mw)
        return jsi_diagonal(model, float(pump_mw))

    @keyword("Select qubit pair")
    def select_qubit_pair(self, state: BiphotonState, n: int, compensation=None):
        """Two-qubit state and selection for base index `n`."""
        self.logger.info("Selecting qubit pair at n=%s", n)
        if compensation is not None:
            compensation = float(compensation)
        return select_qubit_pair(state, int(n), compensation)
