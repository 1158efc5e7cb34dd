"""Simulated experiments: the source, gates and detection chain run
together to produce the coincidence data of a measurement campaign.

Every pair of a batch gets its own integer seed derived from the run
seed, so single pairs can be rerun in isolation.
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from robot.api.deco import keyword

from QFP.Config import RunConfig
from QFP.core.lattice import ModeRangeError
from QFP.Gates import validate_layout
from QFP.Measurement import (
    TOMOGRAPHY_LABELS,
    CoincidenceRecord,
    DetectorModel,
    LabelPair,
    expected_coincidences,
    gate_projection_probability,
    label_pairs,
    measurement_setting,
    sample_coincidences,
    to_label_pair,
)
from QFP.QKD import BasisCounts
from QFP.Resonator import (
    BiphotonState,
    ResonatorModel,
    biphoton_state,
    jsi_diagonal,
    select_qubit_pair,
)
from QFP.Tables import Table


QKD_LABELS = [
    ("0", "0"),
    ("0", "1"),
    ("1", "0"),
    ("1", "1"),
    ("+", "+"),
    ("+", "-"),
    ("-", "+"),
    ("-", "-"),
]

logger = logging.getLogger(__name__)


def pair_seeds(seed: Optional[int], count: int) -> List[int]:
    """Independent integer seeds for `count` sub-experiments."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def batch_bases(first_index: int, pairs: int, guard_modes: int, n_max: Optional[int] = None):
    """Base indices of `pairs` qubit blocks separated by guard modes."""
    bases = [first_index + k * (2 + guard_modes) for k in range(pairs)]
    validate_layout(bases, guard_modes)
    if n_max is not None and bases and bases[-1] + 1 > n_max:
        raise ModeRangeError(
            f"{pairs} pairs from n={first_index} do not fit below n_max={n_max}"
        )
    return bases


@dataclass
class ExperimentSetup:
    """Everything needed to simulate measurements on the comb."""

    model: ResonatorModel
    state: BiphotonState
    detector: DetectorModel
    gate_kwargs: Dict[str, Any]
    pump_mw: float
    tau_s: float

    @classmethod
    def from_config(cls, config: RunConfig, tau_s: Optional[float] = None) -> "ExperimentSetup":
        model = config.resonator.model()
        return cls(
            model=model,
            state=biphoton_state(model, config.resonator.phase_profile()),
            detector=config.detector.detector(),
            gate_kwargs=config.gate.gate_kwargs(),
            pump_mw=config.resonator.pump_mw,
            tau_s=config.tomography.tau_s if tau_s is None else tau_s,
        )

    def pair_rates(self) -> Dict[int, float]:
        return jsi_diagonal(self.model, self.pump_mw)

    def qubit_flux(self, n: int) -> float:
        """Generated pairs/s carried by the qubit pair on n and n + 1."""
        rates = self.pair_rates()
        self.model.grid.require(n + 1)
        return rates[n] + rates[n + 1]

    def qubit_state(self, n: int) -> np.ndarray:
        vector, _ = select_qubit_pair(self.state, n)
        return vector


def simulate_pair_expectations(
    setup: ExperimentSetup, n: int, labels: Sequence = None
) -> Dict[LabelPair, float]:
    """Expected coincidences of each projection on the qubit pair at `n`.

    Each photon passes the gate realizing its projector, then the
    detection chain adds losses and accidentals.
    """
    labels = [to_label_pair(pair) for pair in (labels or label_pairs(TOMOGRAPHY_LABELS))]
    state = setup.qubit_state(n)
    flux = setup.qubit_flux(n)

    settings = {}
    expectations = {}
    for idler, signal in labels:
        for label in (idler, signal):
            if label not in settings:
                settings[label] = measurement_setting(label, **setup.gate_kwargs)
        gate_i, gate_s = settings[idler], settings[signal]
        prob = gate_projection_probability(
            state, gate_i.gate, gate_s.gate, (gate_i.output_offset, gate_s.output_offset)
        )
        expectations[(idler, signal)] = expected_coincidences(
            min(prob, 1.0), flux, setup.detector, setup.tau_s
        )

    logger.debug("Pair %d: flux %.4g pairs/s", n, flux)
    return expectations


def simulate_tomography_record(
    setup: ExperimentSetup, n: int, seed: Optional[int] = None
) -> CoincidenceRecord:
    """Poisson-sampled counts of the 16 tomography projections."""
    expectations = simulate_pair_expectations(setup, n)
    return sample_coincidences(expectations, seed, setup.tau_s)


def simulate_basis_counts(
    setup: ExperimentSetup, n: int, seed: Optional[int] = None, noiseless: bool = False
) -> BasisCounts:
    """Z and X basis coincidences of the qubit pair at `n`.

    :param noiseless: return the expected counts instead of a sample
    """
    expectations = simulate_pair_expectations(setup, n, QKD_LABELS)
    if noiseless:
        values = [expectations[labels] for labels in QKD_LABELS]
    else:
        record = sample_coincidences(expectations, seed, setup.tau_s)
        values = [record[labels] for labels in QKD_LABELS]
    return BasisCounts(*values, tau_s=setup.tau_s)


def simulate_jsi(setup: ExperimentSetup, seed: Optional[int] = None) -> Table:
    """Generated pair rate and sampled coincidences for every index.

    Coincidences are those of pair n with both photons detected,
    accidentals included.
    """
    rates = setup.pair_rates()
    expected = {
        n: expected_coincidences(1.0, rate, setup.detector, setup.tau_s, (1.0, 1.0))
        for n, rate in rates.items()
    }
    rng = np.random.default_rng(seed)
    sampled = rng.poisson([expected[n] for n in rates])

    table = Table(columns=["n", "expected_rate", "sampled_counts"])
    for (n, rate), counts in zip(rates.items(), sampled):
        table.append_row([n, rate, int(counts)])
    return table


def run_batch(
    setup: ExperimentSetup,
    bases: Sequence[int],
    seed: Optional[int],
    simulate,
) -> List[Tuple[int, Any]]:
    """Apply `simulate(setup, n, seed)` to every base with derived seeds."""
    results = []
    for n, child in zip(bases, pair_seeds(seed, len(bases))):
        logger.info("Simulating pair n=%d", n)
        results.append((n, simulate(setup, n, child)))
    return results


class Experiment:
    """`Experiment` is a library for running simulated measurement
    campaigns on the biphoton comb: joint spectral intensity, state
    tomography and key distribution counts for every accessible pair.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)
        self.setup: Optional[ExperimentSetup] = None

    @keyword("Set up experiment")
    def set_up_experiment(self, config: RunConfig) -> ExperimentSetup:
        """Prepare the simulated source and detectors from a configuration."""
        self.logger.info("Setting up experiment, config hash %s", config.hash)
        self.setup = ExperimentSetup.from_config(config)
        return self.setup

    @keyword("Simulate tomography counts")
    def simulate_tomography_counts(self, n: int, seed=None) -> CoincidenceRecord:
        """Sampled 16-projection record of the pair at `n`."""
        seed = int(seed) if seed is not None else None
        return simulate_tomography_record(self._require_setup(), int(n), seed)

    @keyword("Simulate basis counts")
    def simulate_counts(self, n: int, seed=None) -> BasisCounts:
        seed = int(seed) if seed is not None else None
        return simulate_basis_counts(self._require_setup(), int(n), seed)

    @keyword("Simulate joint spectral intensity")
    def simulate_joint_spectral_intensity(self, seed=None) -> Table:
        seed = int(seed) if seed is not None else None
        return simulate_jsi(self._require_setup(), seed)

    def _require_setup(self) -> ExperimentSetup:
        if self.setup is None:
            raise RuntimeError("Experiment not set up")
        return self.setup

