"""Projective measurements on frequency-bin qubit pairs and the
detection chain that turns them into coincidence counts.

Two-qubit states are 4-vectors ordered |00>, |01>, |10>, |11>
with the idler photon as the first qubit.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np
from robot.api.deco import keyword
from scipy.optimize import brentq

from QFP.core.lattice import ModeWindow
from QFP.Gates import GateConfig, build_gate, compose_gate, identity_gate
from QFP.Tables import Table, read_table_from_csv, write_table_to_csv


LABELS = ("0", "1", "+", "-", "+i", "-i")
TOMOGRAPHY_LABELS = ("0", "1", "+", "+i")
NORM_TOLERANCE = 1e-9

LabelPair = Tuple[str, str]

logger = logging.getLogger(__name__)


class ValidationError(ValueError):
    """Raised for invalid states, probabilities or coincidence data."""


def to_label(label) -> str:
    """Normalize a projector label, accepting the unicode minus sign."""
    label = str(label).strip().replace("−", "-")
    if label not in LABELS:
        raise ValidationError(f"Unknown projector label: {label}")
    return label


def to_label_pair(labels) -> LabelPair:
    if isinstance(labels, str):
        labels = labels.split(",")
    idler, signal = labels
    return to_label(idler), to_label(signal)


def label_vector(label: str) -> np.ndarray:
    """Unit vector of a single-qubit projector."""
    label = to_label(label)
    s = 1 / math.sqrt(2)
    vectors = {
        "0": (1, 0),
        "1": (0, 1),
        "+": (s, s),
        "-": (s, -s),
        "+i": (s, 1j * s),
        "-i": (s, -1j * s),
    }
    return np.array(vectors[label], dtype=complex)


def pair_vector(labels) -> np.ndarray:
    idler, signal = to_label_pair(labels)
    return np.kron(label_vector(idler), label_vector(signal))


def validate_state(state) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape != (4,):
        raise ValidationError("Two-qubit state needs 4 amplitudes")
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > NORM_TOLERANCE:
        raise ValidationError(f"State is not normalized (norm {norm:.6g})")
    return state


def projection_probability(state, labels) -> float:
    """|<a, b|psi>|^2 for the idler and signal projectors `labels`.

    :raises ValidationError: the state is not normalized
    """
    state = validate_state(state)
    return float(abs(np.vdot(pair_vector(labels), state)) ** 2)


@dataclass(frozen=True)
class MeasurementSetting:
    """Gate and output mode realizing a single-photon projector."""

    gate: GateConfig
    output_offset: int

    def output_mode(self, base: int) -> int:
        return base + self.output_offset


def measurement_setting(label: str, **gate_kwargs) -> MeasurementSetting:
    """Gate configuration and output mode for a projector label.

    Z projections pass the photon unmodulated, X projections use the
    Hadamard gate and Y projections add a -pi/2 phase on |1> first.
    The gate is built for base index 0.
    """
    label = to_label(label)
    offset = 1 if label in ("1", "-", "-i") else 0
    if label in ("0", "1"):
        rf_ghz = gate_kwargs.get("rf_ghz")
        gate = identity_gate(rf_ghz) if rf_ghz else identity_gate()
    elif label in ("+", "-"):
        gate = build_gate(0, **gate_kwargs)
    else:
        gate = build_gate(0, input_phase=-math.pi / 2, **gate_kwargs)
    return MeasurementSetting(gate, offset)


def gate_projection_probability(
    state,
    gate_idler: GateConfig,
    gate_signal: GateConfig,
    output_modes: Tuple[int, int],
    base: int = 0,
) -> float:
    """Joint detection probability after each photon passes its gate.

    The qubit pair is embedded on modes (base, base + 1) of both
    photons; the probability includes the gates' success loss.

    :param state: normalized two-qubit state
    :param gate_idler: gate acting on the idler photon
    :param gate_signal: gate acting on the signal photon
    :param output_modes: (p, q) detected idler and signal modes
    :param base: mode index of logical |0>
    """
    state = validate_state(state).reshape(2, 2)
    p, q = output_modes
    window = ModeWindow.covering(base, base + 1, p, q)
    u_idler = compose_gate(gate_idler, window)
    u_signal = compose_gate(gate_signal, window)

    row_idler = np.array([u_idler[p, base], u_idler[p, base + 1]])
    row_signal = np.array([u_signal[q, base], u_signal[q, base + 1]])
    amplitude = row_idler @ state @ row_signal
    return float(abs(amplitude) ** 2)


def db_to_transmission(loss_db: float) -> float:
    if loss_db < 0:
        raise ValueError("Loss must be non-negative")
    return 10 ** (-loss_db / 10)


@dataclass(frozen=True)
class DetectorModel:
    """Detection chain of the two arms.

    :param efficiency: detector efficiency (idler, signal)
    :param window_ns: coincidence window
    :param dead_time_ns: detector dead time
    :param dark_counts_per_s: dark count rate of each detector
    :param path_transmission: lumped optical transmission (idler, signal)
    :param accidentals: include accidental coincidences
    """

    efficiency: Tuple[float, float] = (0.7, 0.7)
    window_ns: float = 1.0
    dead_time_ns: float = 20.0
    dark_counts_per_s: float = 100.0
    path_transmission: Tuple[float, float] = (1.0, 1.0)
    accidentals: bool = True

    def __post_init__(self):
        for name in ("efficiency", "path_transmission"):
            values = getattr(self, name)
            if len(values) != 2 or not all(0.0 <= v <= 1.0 for v in values):
                raise ValueError(f"Invalid {name}: {values}")
        if self.window_ns <= 0:
            raise ValueError("Invalid coincidence window")
        if self.dead_time_ns < 0:
            raise ValueError("Invalid dead time")
        if self.dark_counts_per_s < 0:
            raise ValueError("Invalid dark count rate")

    @classmethod
    def from_losses(
        cls,
        device_loss_db: float,
        coupler_loss_db: float,
        efficiency: float = 0.7,
        **kwargs,
    ) -> "DetectorModel":
        """Detector model with both arms behind the same lumped loss."""
        transmission = db_to_transmission(device_loss_db + coupler_loss_db)
        return cls(
            efficiency=(efficiency, efficiency),
            path_transmission=(transmission, transmission),
            **kwargs,
        )

    @property
    def arm_efficiency(self) -> Tuple[float, float]:
        return (
            self.efficiency[0] * self.path_transmission[0],
            self.efficiency[1] * self.path_transmission[1],
        )

    def dead_time_factor(self, rate: float) -> float:
        """Fraction of counts surviving detector dead time at `rate`."""
        return 1.0 / (1.0 + rate * self.dead_time_ns * 1e-9)

    def singles(
        self, pair_rate: float, marginals: Tuple[float, float] = (0.5, 0.5)
    ) -> Tuple[float, float]:
        """Detected singles rate per arm, dark counts included."""
        rates = []
        for arm_eff, marginal in zip(self.arm_efficiency, marginals):
            raw = pair_rate * arm_eff * marginal + self.dark_counts_per_s
            rates.append(raw * self.dead_time_factor(raw))
        return rates[0], rates[1]


def expected_coincidences(
    prob: float,
    pair_rate: float,
    det: DetectorModel,
    tau: float,
    marginals: Tuple[float, float] = (0.5, 0.5),
) -> float:
    """Mean coincidences of a projection over integration time `tau`.

    True coincidences scale with both arm efficiencies; accidentals
    are the product of singles rates times the coincidence window.
    """
    if tau <= 0:
        raise ValueError("Integration time must be positive")
    if not 0.0 <= prob <= 1.0:
        raise ValidationError(f"Invalid probability: {prob}")
    if pair_rate < 0:
        raise ValueError("Pair rate must be non-negative")

    eff_idler, eff_signal = det.arm_efficiency
    rate = prob * pair_rate * eff_idler * eff_signal
    if det.accidentals:
        singles_idler, singles_signal = det.singles(pair_rate, marginals)
        rate += singles_idler * singles_signal * det.window_ns * 1e-9
    return rate * tau


def pair_rate_for_counts(
    counts: float, prob: float, det: DetectorModel, tau: float
) -> float:
    """Generated pair rate for which a projection expects `counts`.

    :raises ValueError: counts are below the accidental floor
    """

    def residual(rate):
        return expected_coincidences(prob, rate, det, tau) - counts

    floor = residual(0.0)
    if floor > 0:
        raise ValueError(f"{counts} counts are below the accidental floor")
    if floor == 0:
        return 0.0

    upper = 1.0
    while residual(upper) < 0:
        upper *= 2
        if upper > 1e15:
            raise ValueError(f"No pair rate yields {counts} counts")
    return float(brentq(residual, 0.0, upper, xtol=1e-9, rtol=1e-12))


@dataclass
class CoincidenceRecord:
    """Counts per (idler, signal) projector pair.

    :param counts: integer counts keyed by label pair
    :param tau_s: integration time in seconds
    :param seed: random seed the counts were drawn with
    """

    counts: Dict[LabelPair, int] = field(default_factory=dict)
    tau_s: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.tau_s <= 0:
            raise ValidationError("Integration time must be positive")
        counts = {}
        for labels, value in self.counts.items():
            if value < 0 or int(value) != value:
                raise ValidationError(f"Invalid count {value} for {labels}")
            counts[to_label_pair(labels)] = int(value)
        self.counts = counts

    def __getitem__(self, labels) -> int:
        return self.counts[to_label_pair(labels)]

    def __contains__(self, labels) -> bool:
        return to_label_pair(labels) in self.counts

    def __len__(self):
        return len(self.counts)

    def get(self, labels, default=None):
        return self.counts.get(to_label_pair(labels), default)

    @property
    def labels(self):
        return list(self.counts)

    def to_dict(self) -> dict:
        return {
            "pairs": [
                {"i_label": i, "s_label": s, "counts": c}
                for (i, s), c in self.counts.items()
            ],
            "tau_s": self.tau_s,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "CoincidenceRecord":
        try:
            counts = {(p["i_label"], p["s_label"]): p["counts"] for p in doc["pairs"]}
            return cls(counts, float(doc["tau_s"]), doc.get("seed"))
        except ValidationError:
            raise
        except (KeyError, TypeError, ValueError) as err:
            raise ValidationError(f"Malformed coincidence record: {err}") from err

    def to_table(self) -> Table:
        rows = [(i, s, c) for (i, s), c in self.counts.items()]
        return Table(rows, columns=["i_label", "s_label", "counts"])


def sample_coincidences(
    expectations: Mapping, seed: Optional[int] = None, tau_s: float = 1.0
) -> CoincidenceRecord:
    """Independent Poisson draw per projection, reproducible per seed."""
    labels = [to_label_pair(key) for key in expectations]
    means = np.array([float(value) for value in expectations.values()])
    if np.any(means < 0) or not np.all(np.isfinite(means)):
        raise ValidationError("Expectations must be finite and non-negative")

    rng = np.random.default_rng(seed)
    draws = rng.poisson(means)
    return CoincidenceRecord(
        {key: int(value) for key, value in zip(labels, draws)}, tau_s, seed
    )


def save_record(record: CoincidenceRecord, path, metadata: Optional[Mapping] = None) -> None:
    """Write a record as JSON or CSV depending on the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        items = {"tau_s": record.tau_s, "seed": record.seed}
        items.update(metadata or {})
        write_table_to_csv(record.to_table(), path, items)
    else:
        doc = record.to_dict()
        doc.update(metadata or {})
        with open(path, "w") as outfile:
            json.dump(doc, outfile, indent=2)


def load_record(path) -> CoincidenceRecord:
    """Read a record from a JSON or CSV file.

    :raises ValidationError: the file content is malformed
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        table, metadata = read_table_from_csv(path)
        missing = {"i_label", "s_label", "counts"} - set(table.columns)
        if missing:
            raise ValidationError(f"Missing column(s): {sorted(missing)}")
        seed = metadata.get("seed")
        try:
            counts = {(r["i_label"], r["s_label"]): int(r["counts"]) for r in table}
            tau = float(metadata.get("tau_s", 1.0))
            seed = int(seed) if seed not in (None, "None", "") else None
        except (TypeError, ValueError) as err:
            raise ValidationError(f"Malformed coincidence table: {err}") from err
        return CoincidenceRecord(counts, tau, seed)

    try:
        with open(path) as json_file:
            doc = json.load(json_file)
    except json.JSONDecodeError as err:
        raise ValidationError(f"Invalid JSON in {path}: {err}") from err
    return CoincidenceRecord.from_dict(doc)


def label_pairs(labels: Iterable[str] = TOMOGRAPHY_LABELS):
    """All (idler, signal) combinations of `labels`, idler-major."""
    labels = list(labels)
    return [(i, s) for i in labels for s in labels]


class Measurement:
    """`Measurement` is a library for projective measurements on
    frequency-bin qubit pairs and for simulating the coincidence
    counts a detection setup records.

    Projector labels are ``0``, ``1``, ``+``, ``-``, ``+i`` and ``-i``,
    given for the idler photon first.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Get projection probability")
    def get_projection_probability(self, state, idler: str, signal: str) -> float:
        """Probability of projecting `state` on (idler, signal)."""
        self.logger.info("Projection probability for (%s, %s)", idler, signal)
        return projection_probability(state, (idler, signal))

    @keyword("Get expected coincidences")
    def get_expected_coincidences(
        self, prob: float, pair_rate: float, detector: DetectorModel, tau: float
    ) -> float:
        return expected_coincidences(float(prob), float(pair_rate), detector, float(tau))

    @keyword("Sample coincidences")
    def sample(self, expectations: Mapping, seed=None, tau: float = 1.0):
        """Poisson-sampled coincidence record from expected counts."""
        seed = int(seed) if seed is not None else None
        self.logger.info("Sampling %d projections with seed %s", len(expectations), seed)
        return sample_coincidences(expectations, seed, float(tau))

    @keyword("Load coincidence record")
    def load_coincidence_record(self, path) -> CoincidenceRecord:
        self.logger.info("Loading coincidences from %s", path)
        return load_record(path)

    @keyword("Save coincidence record")
    def save_coincidence_record(self, record: CoincidenceRecord, path) -> None:
        self.logger.info("Saving %d projections to %s", len(record), path)
        save_record(record, path)
