"""Two-qubit state tomography from 16 projective measurements.

Counts for the projectors {0, 1, +, +i} on each photon are turned into
probabilities, inverted by least squares over the Pauli basis and
projected onto the closest physical density matrix.
"""
import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Mapping, NamedTuple, Optional, Union

import numpy as np
from robot.api.deco import keyword

from QFP.core.helpers import clamp
from QFP.Measurement import (
    TOMOGRAPHY_LABELS,
    CoincidenceRecord,
    LabelPair,
    ValidationError,
    label_pairs,
    pair_vector,
    to_label_pair,
)


ANCHORS = ("context", "flux")
DEFAULT_RESAMPLES = 1000
MIN_RESAMPLES = 100
MAX_FAILURE_RATE = 0.05
EIGENVALUE_TOLERANCE = 1e-10

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
PAULI_PAIRS = [np.kron(a, b) for a, b in itertools.product(PAULI, PAULI)]

PHI_PLUS = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)

# Local basis of each tomography label
BASIS = {"0": "Z", "1": "Z", "+": "X", "+i": "Y"}

logger = logging.getLogger(__name__)


class ReconstructionError(ArithmeticError):
    """Raised when counts cannot be inverted into a density matrix."""


def projector_matrix(labels) -> np.ndarray:
    """Rank-1 projector |a, b><a, b| for (idler, signal) labels."""
    vector = pair_vector(labels)
    return np.outer(vector, vector.conj())


@dataclass
class TomographySet:
    """The 16 tomography projections and their counts."""

    record: CoincidenceRecord
    labels: List[LabelPair] = field(default_factory=lambda: label_pairs(TOMOGRAPHY_LABELS))

    def __post_init__(self):
        self.labels = [to_label_pair(labels) for labels in self.labels]
        if len(set(self.labels)) != len(self.labels):
            raise ValidationError("Duplicate projections in tomography set")
        expected = set(label_pairs(TOMOGRAPHY_LABELS))
        if set(self.labels) != expected:
            raise ValidationError("Tomography set needs the 16 {0,1,+,+i} projections")
        missing = [labels for labels in self.labels if labels not in self.record]
        if missing:
            raise ValidationError(f"Missing counts for projection(s): {missing}")

    def counts(self) -> Dict[LabelPair, int]:
        return {labels: self.record[labels] for labels in self.labels}

    def resampled(self, rng: np.random.Generator) -> "TomographySet":
        counts = self.counts()
        draws = rng.poisson([counts[labels] for labels in self.labels])
        record = CoincidenceRecord(
            dict(zip(self.labels, (int(d) for d in draws))), self.record.tau_s
        )
        return TomographySet(record, self.labels)


@dataclass
class DensityMatrix:
    """Reconstructed 4x4 two-qubit density matrix.

    :param matrix: complex matrix, idler qubit first
    :param method: ``linear`` before and ``projected`` after the
        positivity projection
    :param anchor: count normalization used
    """

    matrix: np.ndarray
    method: str = "linear"
    anchor: Optional[str] = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.shape != (4, 4):
            raise ValueError("Density matrix must be 4x4")

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of the Hermitian part, in descending order."""
        hermitian = (self.matrix + self.matrix.conj().T) / 2
        return np.linalg.eigvalsh(hermitian)[::-1]

    @property
    def trace_residual(self) -> float:
        return float(abs(np.trace(self.matrix) - 1.0))

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def is_physical(self, tolerance: float = EIGENVALUE_TOLERANCE) -> bool:
        hermitian = np.allclose(self.matrix, self.matrix.conj().T, atol=tolerance)
        return (
            hermitian
            and self.trace_residual <= tolerance
            and bool(np.all(self.eigenvalues >= -tolerance))
        )

    def to_dict(self) -> dict:
        return {
            "re": self.matrix.real.tolist(),
            "im": self.matrix.imag.tolist(),
            "method": self.method,
            "anchor": self.anchor,
            "eigenvalues": self.eigenvalues.tolist(),
            "trace_residual": self.trace_residual,
            "purity": self.purity,
        }


class MonteCarloResult(NamedTuple):
    mean: float
    std: float
    failures: int
    resamples: int


def _basis_ratios(counts: Mapping[LabelPair, float], flux: float):
    """Flux of each local basis relative to the Z basis, per photon.

    The '+' outcome of a basis is taken to carry half of that basis'
    flux, summed over the partner's Z outcomes.
    """
    idler = {"Z": 1.0}
    signal = {"Z": 1.0}
    for label, basis in (("+", "X"), ("+i", "Y")):
        idler[basis] = 2 * (counts[(label, "0")] + counts[(label, "1")]) / flux
        signal[basis] = 2 * (counts[("0", label)] + counts[("1", label)]) / flux
    for side, ratios in (("idler", idler), ("signal", signal)):
        for basis, ratio in ratios.items():
            if ratio <= 0:
                raise ReconstructionError(f"No counts in the {side} {basis} basis")
    return idler, signal


def _count_mapping(counts) -> Dict[LabelPair, float]:
    """Counts keyed by label pair, from a tomography set or a mapping
    of possibly fractional expected counts."""
    if isinstance(counts, TomographySet):
        return counts.counts()

    result = {to_label_pair(key): float(value) for key, value in counts.items()}
    missing = set(label_pairs(TOMOGRAPHY_LABELS)) - set(result)
    if missing:
        raise ValidationError(f"Missing counts for projection(s): {sorted(missing)}")
    result = {labels: result[labels] for labels in label_pairs(TOMOGRAPHY_LABELS)}
    if any(value < 0 for value in result.values()):
        raise ValidationError("Negative counts")
    return result


def count_probabilities(
    tset: Union[TomographySet, Mapping], anchor: str = "context"
) -> Dict[LabelPair, float]:
    """Normalize tomography counts into projection probabilities.

    ``flux`` divides every count by the Z-basis total. ``context``
    additionally rescales each measurement context by the relative flux
    of its local bases.

    :raises ReconstructionError: a normalization group is empty
    """
    if anchor not in ANCHORS:
        raise ValueError(f"Unknown anchor: {anchor}")

    counts = _count_mapping(tset)
    flux = sum(counts[(i, s)] for i in ("0", "1") for s in ("0", "1"))
    if flux <= 0:
        raise ReconstructionError("No counts in the Z basis")

    if anchor == "flux":
        return {labels: count / flux for labels, count in counts.items()}

    idler, signal = _basis_ratios(counts, flux)
    return {
        (i, s): count / (flux * idler[BASIS[i]] * signal[BASIS[s]])
        for (i, s), count in counts.items()
    }


@lru_cache(maxsize=8)
def _design_matrix(labels) -> np.ndarray:
    """Rows Tr(P_k sigma_j) / 4 for every projector and Pauli pair."""
    return np.array(
        [
            [np.trace(projector_matrix(pair) @ pauli).real / 4 for pauli in PAULI_PAIRS]
            for pair in labels
        ]
    )


def reconstruct_from_probabilities(probabilities: Mapping, anchor: Optional[str] = None) -> DensityMatrix:
    """Least-squares density matrix reproducing the given probabilities.

    The matrix is expanded in the two-qubit Pauli basis and the
    coefficients solved from Tr(P_k rho) = p_k.

    :raises ValidationError: a probability is negative
    :raises ReconstructionError: the projectors do not span the space
    """
    labels = [to_label_pair(key) for key in probabilities]
    values = np.array([float(v) for v in probabilities.values()])
    if np.any(values < 0):
        raise ValidationError("Negative projection probability")

    design = _design_matrix(tuple(labels))
    coefficients, _, rank, _ = np.linalg.lstsq(design, values, rcond=None)
    if rank < len(PAULI_PAIRS):
        raise ReconstructionError(
            f"Projections span rank {rank}, need {len(PAULI_PAIRS)}"
        )

    matrix = sum(c * pauli for c, pauli in zip(coefficients, PAULI_PAIRS)) / 4
    return DensityMatrix(matrix, method="linear", anchor=anchor)


def linear_inversion(
    tset: Union[TomographySet, Mapping], anchor: str = "context"
) -> DensityMatrix:
    """Unconstrained reconstruction from the 16 tomography counts.

    Counts may be a :class:`TomographySet` or a mapping of label pairs
    to expected counts.
    """
    probabilities = count_probabilities(tset, anchor)
    rho = reconstruct_from_probabilities(probabilities, anchor)
    logger.debug("Linear inversion eigenvalues: %s", np.round(rho.eigenvalues, 5))
    return rho


def project_to_physical(rho) -> DensityMatrix:
    """Closest density matrix in 2-norm to a Hermitian estimate.

    Eigenvalues are normalized to unit sum, then negative ones are
    zeroed from the smallest upwards while their deficit is spread
    evenly over the remaining ones.
    """
    if isinstance(rho, DensityMatrix):
        anchor, matrix = rho.anchor, rho.matrix
    else:
        anchor, matrix = None, np.asarray(rho, dtype=complex)

    hermitian = (matrix + matrix.conj().T) / 2
    trace = np.trace(hermitian).real
    if trace <= 0:
        raise ReconstructionError("Estimate has non-positive trace")

    values, vectors = np.linalg.eigh(hermitian / trace)
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]

    deficit = 0.0
    last = len(values) - 1
    while last >= 0 and values[last] + deficit / (last + 1) < 0:
        deficit += values[last]
        values[last] = 0.0
        last -= 1
    values[: last + 1] += deficit / (last + 1)

    physical = (vectors * values) @ vectors.conj().T
    return DensityMatrix(physical, method="projected", anchor=anchor)


def state_fidelity(rho, target=PHI_PLUS) -> float:
    """Fidelity <t|rho|t> to a pure target state."""
    matrix = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    target = np.asarray(target, dtype=complex)
    target = target / np.linalg.norm(target)
    return clamp(0.0, float(np.vdot(target, matrix @ target).real), 1.0)


def reconstruct(tset: Union[TomographySet, Mapping], anchor: str = "context") -> DensityMatrix:
    """Physical density matrix from tomography counts."""
    return project_to_physical(linear_inversion(tset, anchor))


def monte_carlo_errors(
    tset: TomographySet,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: Optional[int] = None,
    target=PHI_PLUS,
    anchor: str = "context",
) -> MonteCarloResult:
    """Fidelity statistics over Poisson-resampled counts.

    Each resample gets its own generator spawned from `seed`.

    :raises ReconstructionError: more than 5% of the resamples fail
    """
    if n_resamples < MIN_RESAMPLES:
        raise ValueError(f"Need at least {MIN_RESAMPLES} resamples")

    fidelities = []
    failures = 0
    for child in np.random.SeedSequence(seed).spawn(n_resamples):
        sample = tset.resampled(np.random.default_rng(child))
        try:
            fidelities.append(state_fidelity(reconstruct(sample, anchor), target))
        except ReconstructionError as err:
            logger.debug("Resample failed: %s", err)
            failures += 1

    if failures:
        logger.warning("%d of %d resamples failed", failures, n_resamples)
    if failures > MAX_FAILURE_RATE * n_resamples:
        raise ReconstructionError(
            f"{failures} of {n_resamples} resamples failed to reconstruct"
        )

    values = np.array(fidelities)
    return MonteCarloResult(
        mean=float(values.mean()),
        std=float(values.std(ddof=1)),
        failures=failures,
        resamples=n_resamples,
    )


def tomography_report(
    tset: Union[TomographySet, Mapping],
    anchor: str = "context",
    n_resamples: Optional[int] = None,
    seed: Optional[int] = None,
    target=PHI_PLUS,
) -> dict:
    """Reconstruction, fidelity and optional error bar as a JSON document."""
    raw = linear_inversion(tset, anchor)
    rho = project_to_physical(raw)
    report = {
        "rho": rho.to_dict(),
        "raw_eigenvalues": raw.eigenvalues.tolist(),
        "fidelity": state_fidelity(rho, target),
        "fidelity_std": None,
        "resample_failures": None,
    }
    if n_resamples:
        if not isinstance(tset, TomographySet):
            raise ValueError("Resampling needs measured counts")
        errors = monte_carlo_errors(tset, n_resamples, seed, target, anchor)
        report["fidelity_std"] = errors.std
        report["resample_failures"] = errors.failures
    return report


class Tomography:
    """`Tomography` is a library for reconstructing two-qubit density
    matrices from the 16 projections {0, 1, +, +i} on each photon.

    Counts are normalized per measurement context (``anchor=context``)
    or by the Z-basis total only (``anchor=flux``).
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Reconstruct density matrix")
    def reconstruct_density_matrix(self, record: CoincidenceRecord, anchor: str = "context"):
        """Physical density matrix from a coincidence record."""
        self.logger.info("Reconstructing with %s anchor", anchor)
        return reconstruct(TomographySet(record), anchor)

    @keyword("Get state fidelity")
    def get_state_fidelity(self, rho: DensityMatrix, target=None) -> float:
        """Fidelity to `target`, the maximally entangled state by default."""
        fidelity = state_fidelity(rho, PHI_PLUS if target is None else target)
        self.logger.info("Fidelity: %.4f", fidelity)
        return fidelity

    @keyword("Estimate fidelity error")
    def estimate_fidelity_error(
        self, record: CoincidenceRecord, resamples: int = DEFAULT_RESAMPLES, seed=None
    ) -> MonteCarloResult:
        """Monte-Carlo mean and standard deviation of the fidelity."""
        seed = int(seed) if seed is not None else None
        self.logger.info("Resampling %s times with seed %s", resamples, seed)
        return monte_carlo_errors(TomographySet(record), int(resamples), seed)
