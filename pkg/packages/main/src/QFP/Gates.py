"""Electro-optic frequency gates on the comb lattice.

A gate is the sequence [EOM - PF - EOM]: two sinusoidal phase
modulators scatter light into Bessel sidebands and a programmable
filter in between applies a diagonal amplitude/phase mask. Matrices
are indexed ``[output mode, input mode]`` over a :class:`ModeWindow`.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from robot.api.deco import keyword
from scipy import constants
from scipy.special import jv

from QFP.core.helpers import clamp
from QFP.core.lattice import GHZ, THZ, ModeRangeError, ModeWindow, to_window


DEFAULT_MARGIN = 16
MIN_MARGIN = 8
TRUNCATION_TOLERANCE = 1e-10
LOST_WEIGHT_TOLERANCE = 1e-12
TAIL_TERMS = 64

DEFAULT_RF_GHZ = 21.18
DEFAULT_MU = 0.81
DEFAULT_THETA1 = math.pi / 2
DEFAULT_THETA2 = DEFAULT_THETA1 + math.pi
DEFAULT_RESOLUTION_GHZ = 10.0
DEFAULT_REFERENCE_THZ = 193.4
DEFAULT_GUARD_MODES = 2

IDENTITY = np.eye(2, dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)

logger = logging.getLogger(__name__)


class TruncationError(ArithmeticError):
    """Raised when a mode window is too small for the requested accuracy."""


class LayoutError(ValueError):
    """Raised when qubit blocks overlap or violate the guard spacing."""


class FidelityError(ZeroDivisionError):
    """Raised when a fidelity is undefined (zero operator)."""


@dataclass(frozen=True)
class EomSettings:
    """Drive of a single electro-optic phase modulator.

    :param modulation_index: mu = pi * V / V_pi, in radians
    :param rf_frequency: drive frequency in GHz
    :param rf_phase: drive phase theta in radians
    """

    modulation_index: float
    rf_frequency: float = DEFAULT_RF_GHZ
    rf_phase: float = 0.0

    def __post_init__(self):
        if self.modulation_index < 0:
            raise ValueError("Invalid modulation index")
        if self.rf_frequency <= 0:
            raise ValueError("Invalid RF frequency")

    @classmethod
    def from_voltage(cls, voltage, v_pi, rf_frequency=DEFAULT_RF_GHZ, rf_phase=0.0):
        if v_pi <= 0:
            raise ValueError("Invalid V_pi")
        return cls(math.pi * abs(voltage) / v_pi, rf_frequency, rf_phase)


@dataclass(frozen=True)
class PfMask:
    """Diagonal spectral mask of a programmable filter.

    The phase of mode ``m`` is the sum of every step whose edge is at or
    below ``m``, plus an optional per-mode phase. Dispersion adds a
    quadratic spectral phase around ``reference_mode``.
    """

    steps: Tuple[Tuple[int, float], ...] = ()
    phases: Mapping[int, float] = field(default_factory=dict)
    amplitudes: Mapping[int, float] = field(default_factory=dict)
    dispersion_ps_per_nm: float = 0.0
    resolution_ghz: float = DEFAULT_RESOLUTION_GHZ
    spacing_ghz: float = DEFAULT_RF_GHZ
    reference_mode: int = 0
    reference_thz: float = DEFAULT_REFERENCE_THZ

    def __post_init__(self):
        for mode, value in self.amplitudes.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Invalid amplitude {value} at mode {mode}")
        if self.resolution_ghz <= 0:
            raise ValueError("Invalid filter resolution")
        if self.spacing_ghz < self.resolution_ghz:
            raise LayoutError(
                f"Mode spacing {self.spacing_ghz} GHz is below "
                f"filter resolution {self.resolution_ghz} GHz"
            )

    def phase(self, mode: int) -> float:
        total = sum(height for edge, height in self.steps if mode >= edge)
        return total + self.phases.get(mode, 0.0)

    def amplitude(self, mode: int) -> float:
        return self.amplitudes.get(mode, 1.0)

    def dispersion_phase(self, mode: int) -> float:
        """Quadratic phase of the programmed dispersion at `mode`.

        phi = pi * D * c / f_ref**2 * (f - f_ref)**2, with D in s/m.
        """
        if not self.dispersion_ps_per_nm:
            return 0.0
        dispersion = self.dispersion_ps_per_nm * 1e-12 / 1e-9
        reference = self.reference_thz * THZ
        detuning = (mode - self.reference_mode) * self.spacing_ghz * GHZ
        return math.pi * dispersion * constants.c / reference ** 2 * detuning ** 2

    def with_steps(self, steps) -> "PfMask":
        return replace(self, steps=tuple(steps))


@dataclass(frozen=True)
class GateConfig:
    """Full [EOM - PF - EOM] parameterization.

    ``input_mask`` is the phase pattern of the filter in front of the
    gate, used for the phase gates that rotate the Y basis onto X.
    """

    eom1: EomSettings
    mask: PfMask
    eom2: EomSettings
    truncation_margin: int = DEFAULT_MARGIN
    input_mask: Optional[PfMask] = None

    def __post_init__(self):
        if self.truncation_margin < MIN_MARGIN:
            raise ValueError(
                f"Truncation margin must be at least {MIN_MARGIN} modes"
            )
        if not math.isclose(self.eom1.rf_frequency, self.eom2.rf_frequency):
            raise ValueError("Both modulators must share the RF frequency")

    def validate_for_grid(self, fsr_ghz: float) -> None:
        """Check that the RF drive matches the mode spacing."""
        if not math.isclose(self.eom1.rf_frequency, fsr_ghz, rel_tol=1e-9):
            raise ValueError(
                f"RF frequency {self.eom1.rf_frequency} GHz does not match "
                f"FSR {fsr_ghz} GHz"
            )

    def with_mask(self, mask: PfMask) -> "GateConfig":
        return replace(self, mask=mask)


class ModeUnitary:
    """Dense complex matrix over a window of modes.

    :param matrix: square matrix indexed [output, input]
    :param window: modes covered by the matrix
    :param interior: modes for which truncation accuracy is guaranteed
    :param truncation_error: 1 - smallest interior column norm
    """

    def __init__(
        self,
        matrix: np.ndarray,
        window: ModeWindow,
        interior: Optional[ModeWindow] = None,
        truncation_error: float = 0.0,
    ):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != (len(window), len(window)):
            raise ValueError("Matrix shape does not match window")
        self.matrix = matrix
        self.window = window
        self.interior = interior or window
        self.truncation_error = truncation_error

    def __repr__(self):
        return "ModeUnitary(window={}, truncation_error={:.3g})".format(
            self.window.as_tuple(), self.truncation_error
        )

    def __getitem__(self, modes):
        out, inp = modes
        return self.matrix[self.window.index_of(out), self.window.index_of(inp)]

    def restrict(self, window: ModeWindow) -> "ModeUnitary":
        window = to_window(window)
        sub = self.window.slice_of(window)
        return ModeUnitary(
            self.matrix[sub, sub], window, window, self.truncation_error
        )

    def column_norm_deviation(self) -> float:
        """Largest |1 - norm| over interior columns."""
        columns = self.matrix[:, self.window.slice_of(self.interior)]
        return float(np.max(np.abs(1.0 - np.linalg.norm(columns, axis=0))))

    def row_norm_deviation(self) -> float:
        rows = self.matrix[self.window.slice_of(self.interior), :]
        return float(np.max(np.abs(1.0 - np.linalg.norm(rows, axis=1))))


class SweepPoint(NamedTuple):
    alpha: float
    f_identity: float
    f_hadamard: float
    p_success: float


def bessel_tail(mu: float, distance: int) -> float:
    """Weight of one-sided sidebands beyond `distance`, sum J_k(mu)**2."""
    orders = np.arange(distance + 1, distance + 1 + TAIL_TERMS)
    return float(np.sum(jv(orders, mu) ** 2))


def _truncation_error(
    mu: float, window: ModeWindow, interior: ModeWindow
) -> Tuple[float, float]:
    """Column norm deviation and sideband weight lost outside `window`."""
    lost = 0.0
    for column in (interior.first, interior.last):
        below = bessel_tail(mu, column - window.first)
        above = bessel_tail(mu, window.last - column)
        lost = max(lost, below + above)
    lost = min(lost, 1.0)
    # 1 - sqrt(1 - lost), without cancellation
    return lost / (1.0 + math.sqrt(1.0 - lost)), lost


def eom_unitary(
    settings: EomSettings, window, margin: int = MIN_MARGIN
) -> ModeUnitary:
    """Sideband matrix of a phase modulator over `window`.

    Input mode n couples to output n + k with i^k J_k(mu) e^{ik theta}.

    :param settings: modulator drive
    :param window: modes to represent
    :param margin: modes at each edge excluded from the accuracy guarantee
    :raises TruncationError: the window leaves no interior, interior columns
        deviate from unit norm by more than 1e-10, or 1e-12 of the sideband
        weight falls outside the window
    """
    window = to_window(window)
    try:
        interior = window.shrink(margin)
    except ModeRangeError as err:
        raise TruncationError(str(err)) from err

    modes = np.arange(window.first, window.last + 1)
    k = modes[:, None] - modes[None, :]
    mu, theta = settings.modulation_index, settings.rf_phase
    matrix = jv(k, mu) * np.exp(1j * k * (math.pi / 2 + theta))

    error, lost = _truncation_error(mu, window, interior)
    logger.debug(
        "EOM mu=%.3f over %d modes: truncation %.3g, lost weight %.3g",
        mu,
        len(window),
        error,
        lost,
    )
    if error > TRUNCATION_TOLERANCE or lost >= LOST_WEIGHT_TOLERANCE:
        raise TruncationError(
            f"Window of {len(window)} modes loses {lost:.3g} of the sideband "
            f"weight at mu={mu}"
        )
    return ModeUnitary(matrix, window, interior, error)


def pf_unitary(mask: PfMask, window) -> ModeUnitary:
    """Diagonal filter matrix amplitude_n * exp(i(phase_n + dispersion_n))."""
    window = to_window(window)
    diagonal = [
        mask.amplitude(m) * np.exp(1j * (mask.phase(m) + mask.dispersion_phase(m)))
        for m in window
    ]
    return ModeUnitary(np.diag(diagonal), window)


def compose_gate(config: GateConfig, window) -> ModeUnitary:
    """Gate matrix eom2 . pf . eom1 restricted to `window`.

    The product is evaluated on the window padded by the truncation
    margin on both sides.
    """
    window = to_window(window)
    margin = config.truncation_margin
    padded = window.expand(margin)

    first = eom_unitary(config.eom1, padded, margin)
    second = eom_unitary(config.eom2, padded, margin)
    matrix = second.matrix @ pf_unitary(config.mask, padded).matrix @ first.matrix
    if config.input_mask is not None:
        matrix = matrix @ pf_unitary(config.input_mask, padded).matrix

    sub = padded.slice_of(window)
    return ModeUnitary(
        matrix[sub, sub],
        window,
        window,
        first.truncation_error + second.truncation_error,
    )


def extract_qubit_block(u: ModeUnitary, modes: Tuple[int, int]) -> np.ndarray:
    """2x2 submatrix of `u` on the computational modes.

    :raises ModeRangeError: a mode is outside the matrix window
    """
    index = [u.window.index_of(m) for m in modes]
    return u.matrix[np.ix_(index, index)].copy()


def gate_fidelity(W: np.ndarray, T: np.ndarray) -> float:
    """F = Tr(W^+ T) Tr(T^+ W) / (Tr(W^+ W) Tr(T^+ T))."""
    W, T = np.asarray(W, dtype=complex), np.asarray(T, dtype=complex)
    target_norm = np.trace(T.conj().T @ T).real
    if target_norm == 0.0:
        raise ValueError("Target operator is zero")
    norm = np.trace(W.conj().T @ W).real
    if norm == 0.0:
        raise FidelityError("Fidelity of a zero operator is undefined")

    overlap = np.trace(W.conj().T @ T) * np.trace(T.conj().T @ W)
    return clamp(0.0, float(overlap.real / (norm * target_norm)), 1.0)


def success_probability(W: np.ndarray, T: np.ndarray) -> float:
    """P = Tr(W^+ W) / Tr(T^+ T)."""
    W, T = np.asarray(W, dtype=complex), np.asarray(T, dtype=complex)
    return float(np.trace(W.conj().T @ W).real / np.trace(T.conj().T @ T).real)


def step_mask(base: int, alpha: float, **kwargs) -> PfMask:
    """Step of height `alpha` between modes `base` and `base + 1`."""
    steps = ((base + 1, float(alpha)),) if alpha else ()
    return PfMask(steps=steps, **kwargs)


def phase_mask(base: int, phi: float, **kwargs) -> PfMask:
    """Single-mode phase `phi` on mode `base + 1`."""
    return PfMask(phases={base + 1: float(phi)}, **kwargs)


def validate_layout(qubit_bases: Sequence[int], guard_modes: int) -> List[int]:
    """Sorted qubit bases, checked for overlap and guard spacing.

    :raises LayoutError: two blocks are closer than 2 + guard_modes
    """
    if guard_modes < 0:
        raise ValueError("Invalid number of guard modes")
    bases = sorted(int(b) for b in qubit_bases)
    for lower, upper in zip(bases, bases[1:]):
        if upper - lower < 2 + guard_modes:
            raise LayoutError(
                f"Qubit blocks at {lower} and {upper} need {guard_modes} "
                f"guard mode(s) between them"
            )
    return bases


def parallel_mask(
    qubit_bases: Sequence[int],
    alphas: Union[float, Sequence[float]],
    guard_modes: int = DEFAULT_GUARD_MODES,
    **kwargs,
) -> PfMask:
    """One mask applying an independent step to every qubit block.

    Steps accumulate towards higher modes, so inside any block the
    other qubits only contribute a constant phase.
    """
    bases = list(qubit_bases)
    if isinstance(alphas, (int, float)):
        alphas = [float(alphas)] * len(bases)
    if len(alphas) != len(bases):
        raise ValueError("Need one step height per qubit")

    validate_layout(bases, guard_modes)
    steps = tuple(
        (base + 1, float(alpha)) for base, alpha in sorted(zip(bases, alphas)) if alpha
    )
    return PfMask(steps=steps, **kwargs)


def build_gate(
    base: int = 0,
    alpha: float = math.pi,
    mu1: float = DEFAULT_MU,
    theta1: float = DEFAULT_THETA1,
    mu2: float = DEFAULT_MU,
    theta2: float = DEFAULT_THETA2,
    rf_ghz: float = DEFAULT_RF_GHZ,
    truncation_margin: int = DEFAULT_MARGIN,
    input_phase: Optional[float] = None,
    **mask_kwargs,
) -> GateConfig:
    """Single-qubit gate on modes (base, base + 1).

    The defaults give a Hadamard; ``alpha=0`` gives the identity.
    """
    mask_kwargs.setdefault("spacing_ghz", rf_ghz)
    input_mask = None
    if input_phase is not None:
        input_mask = phase_mask(base, input_phase, spacing_ghz=rf_ghz)
    return GateConfig(
        eom1=EomSettings(mu1, rf_ghz, theta1),
        mask=step_mask(base, alpha, **mask_kwargs),
        eom2=EomSettings(mu2, rf_ghz, theta2),
        truncation_margin=truncation_margin,
        input_mask=input_mask,
    )


def identity_gate(rf_ghz: float = DEFAULT_RF_GHZ) -> GateConfig:
    """Unmodulated pass-through, used for Z-basis projections."""
    return build_gate(alpha=0.0, mu1=0.0, mu2=0.0, rf_ghz=rf_ghz)


def crosstalk(config: GateConfig, source_mode: int, target_block: Tuple[int, int]) -> float:
    """Intensity reaching `target_block` for unit input at `source_mode`."""
    if source_mode in target_block:
        raise ValueError("Source mode lies inside the target block")
    window = ModeWindow.covering(source_mode, *target_block)
    u = compose_gate(config, window)
    return float(sum(abs(u[mode, source_mode]) ** 2 for mode in target_block))


def transmission_matrix(config: GateConfig, window) -> np.ndarray:
    """Intensity transfer |U|^2 of a gate, indexed [output, input]."""
    return np.abs(compose_gate(config, window).matrix) ** 2


def tunability_sweep(
    config: GateConfig, alphas: Sequence[float], base: int = 0
) -> List[SweepPoint]:
    """Fidelity to Identity and Hadamard and success probability per step height."""
    points = []
    modes = (base, base + 1)
    window = ModeWindow(*modes)
    for alpha in alphas:
        gate = config.with_mask(config.mask.with_steps(
            ((base + 1, float(alpha)),) if alpha else ()
        ))
        W = extract_qubit_block(compose_gate(gate, window), modes)
        points.append(
            SweepPoint(
                alpha=float(alpha),
                f_identity=gate_fidelity(W, IDENTITY),
                f_hadamard=gate_fidelity(W, HADAMARD),
                p_success=success_probability(W, HADAMARD),
            )
        )
    return points


class Gates:
    """`Gates` is a library for synthesizing electro-optic frequency-bin
    gates and characterizing them against target operations.

    A gate is given as a :class:`GateConfig` or built with
    ``Build gate`` from its modulation indices, RF phases and the
    filter step height.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Build gate")
    def build_gate(self, base: int = 0, alpha: float = math.pi, **kwargs) -> GateConfig:
        """Gate on modes (base, base + 1) with filter step `alpha`.

        :param base: mode index of logical |0>
        :param alpha: step height in radians, 0 for identity, pi for Hadamard
        """
        self.logger.info("Building gate at base %s with alpha=%s", base, alpha)
        return build_gate(int(base), float(alpha), **kwargs)

    @keyword("Get gate block")
    def get_gate_block(self, config: GateConfig, base: int = 0) -> np.ndarray:
        """2x2 block of the composed gate on modes (base, base + 1)."""
        modes = (int(base), int(base) + 1)
        return extract_qubit_block(compose_gate(config, ModeWindow(*modes)), modes)

    @keyword("Get gate fidelity")
    def get_gate_fidelity(self, block: np.ndarray, target: str = "hadamard") -> float:
        """Fidelity of a 2x2 block to ``hadamard`` or ``identity``."""
        fidelity = gate_fidelity(block, self._target(target))
        self.logger.info("Fidelity to %s: %.5f", target, fidelity)
        return fidelity

    @keyword("Get success probability")
    def get_success_probability(self, block: np.ndarray) -> float:
        return success_probability(block, IDENTITY)

    @keyword("Get crosstalk")
    def get_crosstalk(self, config: GateConfig, source: int, target_base: int) -> float:
        """Intensity leaking from mode `source` into block (target_base, +1)."""
        target = (int(target_base), int(target_base) + 1)
        return crosstalk(config, int(source), target)

    @keyword("Sweep gate phase")
    def sweep_gate_phase(self, config: GateConfig, steps: int = 32, base: int = 0):
        """Fidelities over `steps` step heights evenly covering [0, pi]."""
        alphas = np.linspace(0.0, math.pi, int(steps))
        self.logger.info("Sweeping %d step heights", len(alphas))
        return tunability_sweep(config, alphas, int(base))

    @staticmethod
    def _target(name: str) -> np.ndarray:
        targets = {"hadamard": HADAMARD, "identity": IDENTITY}
        try:
            return targets[str(name).lower()]
        except KeyError as err:
            raise ValueError(f"Unknown target gate: {name}") from err
