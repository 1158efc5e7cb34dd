"""Run configuration: one JSON document with a section per module.

The document path is given explicitly, or read from the ``QFP_CONFIG``
environment variable, or the bundled default is used. Values can be
overridden with ``expression=value`` pairs, where the expression is a
JSONPath into the document.
"""
import json
import logging
import math
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from jsonpath_ng.ext import parse
from robot.api.deco import keyword

from QFP.core.helpers import config_hash, required_env
from QFP.core.lattice import FrequencyGrid
from QFP.core.types import is_dict_like, is_list_like, is_number
from QFP.Gates import MIN_MARGIN
from QFP.Measurement import DetectorModel
from QFP.Resonator import (
    ResonatorModel,
    flat_envelope,
    gaussian_envelope,
    quadratic_phase,
    transmission_table,
    zero_phase,
)


ENV_CONFIG = "QFP_CONFIG"
DEFAULT_CONFIG = Path(__file__).parent / "resources" / "default_config.json"

SECTIONS = ("resonator", "gate", "detector", "qkd", "tomography", "network")

logger = logging.getLogger(__name__)


class SchemaError(ValueError):
    """Raised when a configuration document does not match the schema."""


def _default_of(item):
    if item.default is not MISSING:
        return item.default
    if item.default_factory is not MISSING:  # type: ignore
        return item.default_factory()  # type: ignore
    return None


def _check_type(value: Any, default: Any, path: str) -> Any:
    """Validate `value` against the type of the field default."""
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = is_number(value)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, dict):
        ok = is_dict_like(value)
        value = dict(value) if ok else value
    elif isinstance(default, list):
        ok = is_list_like(value)
        value = list(value) if ok else value
    else:
        ok = True

    if not ok:
        raise SchemaError(
            f"Invalid type for {path}: expected {type(default).__name__}, "
            f"got {type(value).__name__}"
        )
    return value


class Section:
    """Base for configuration sections."""

    @classmethod
    def from_dict(cls, doc: Any, path: str):
        if not is_dict_like(doc):
            raise SchemaError(f"Section {path} must be an object")

        known = {item.name: item for item in fields(cls)}  # type: ignore
        values = {}
        for key, value in doc.items():
            if key not in known:
                raise SchemaError(f"Unknown key: {path}.{key}")
            values[key] = _check_type(value, _default_of(known[key]), f"{path}.{key}")

        try:
            return cls(**values)  # type: ignore
        except SchemaError:
            raise
        except (TypeError, ValueError) as err:
            raise SchemaError(f"Invalid section {path}: {err}") from err


def _require_keys(doc: Dict, allowed: Sequence[str], name: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise SchemaError(f"Unknown key(s) in {name}: {sorted(unknown)}")


@dataclass(frozen=True)
class ResonatorSection(Section):
    pump_thz: float = 193.4
    fsr_ghz: float = 21.18
    n_min: int = 3
    n_max: int = 83
    linewidth_mhz: float = 600.0
    q_factor: float = 3.1e5
    brightness_pairs_per_s: float = 15.87e6
    reference_mw: float = 0.75
    pump_mw: float = 0.75
    envelope: Dict[str, Any] = field(
        default_factory=lambda: {"model": "gaussian", "width": 90.0}
    )
    transmission: List[Dict[str, Any]] = field(default_factory=list)
    phase: Dict[str, Any] = field(default_factory=lambda: {"model": "zero", "coeff": 0.0})

    def __post_init__(self):
        _require_keys(self.envelope, ("model", "width"), "resonator.envelope")
        if self.envelope.get("model", "flat") not in ("flat", "gaussian"):
            raise SchemaError(f"Unknown envelope model: {self.envelope.get('model')}")
        _require_keys(self.phase, ("model", "coeff"), "resonator.phase")
        if self.phase.get("model", "zero") not in ("zero", "quadratic"):
            raise SchemaError(f"Unknown phase model: {self.phase.get('model')}")
        for entry in self.transmission:
            if not is_dict_like(entry) or set(entry) != {"n", "t"}:
                raise SchemaError("Transmission entries need exactly keys n and t")
        if self.pump_mw <= 0:
            raise SchemaError("Pump power must be positive")

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.pump_thz, self.fsr_ghz, self.n_min, self.n_max)

    def model(self) -> ResonatorModel:
        grid = self.grid()
        if self.envelope.get("model", "flat") == "gaussian":
            envelope = gaussian_envelope(grid, float(self.envelope.get("width", 90.0)))
        else:
            envelope = flat_envelope(grid)
        factors = {int(e["n"]): float(e["t"]) for e in self.transmission}
        return ResonatorModel(
            grid=grid,
            linewidth_fwhm=self.linewidth_mhz / 1000.0,
            quality_factor=self.q_factor,
            per_mode_transmission=transmission_table(envelope, factors),
            internal_pair_rate=self.brightness_pairs_per_s,
            reference_power_mw=self.reference_mw,
        )

    def phase_profile(self):
        if self.phase.get("model", "zero") == "quadratic":
            return quadratic_phase(float(self.phase.get("coeff", 0.0)))
        return zero_phase


@dataclass(frozen=True)
class GateSection(Section):
    mu1: float = 0.81
    theta1: float = math.pi / 2
    mu2: float = 0.81
    theta2: float = 3 * math.pi / 2
    rf_ghz: float = 21.18
    alpha: float = math.pi
    guard_modes: int = 2
    truncation_margin: int = 16
    dispersion_ps_nm: float = 0.0
    resolution_ghz: float = 10.0

    def __post_init__(self):
        if self.mu1 < 0 or self.mu2 < 0:
            raise SchemaError("gate.mu1 and gate.mu2 must be non-negative")
        if self.truncation_margin < MIN_MARGIN:
            raise SchemaError(f"gate.truncation_margin must be at least {MIN_MARGIN}")
        if self.rf_ghz <= 0:
            raise SchemaError("gate.rf_ghz must be positive")
        if self.resolution_ghz <= 0:
            raise SchemaError("gate.resolution_ghz must be positive")
        if self.guard_modes < 0:
            raise SchemaError("guard_modes must be non-negative")

    def gate_kwargs(self) -> Dict[str, Any]:
        """Keyword arguments of Gates.build_gate, without base and alpha."""
        return {
            "mu1": self.mu1,
            "theta1": self.theta1,
            "mu2": self.mu2,
            "theta2": self.theta2,
            "rf_ghz": self.rf_ghz,
            "truncation_margin": self.truncation_margin,
            "dispersion_ps_per_nm": self.dispersion_ps_nm,
            "resolution_ghz": self.resolution_ghz,
        }


@dataclass(frozen=True)
class DetectorSection(Section):
    efficiency: float = 0.7
    window_ns: float = 1.0
    dead_time_ns: float = 20.0
    dark_counts_per_s: float = 100.0
    device_loss_db: float = 15.0
    coupler_loss_db: float = 3.8
    accidentals: bool = True

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise SchemaError("detector.efficiency must be in [0, 1]")
        if self.window_ns <= 0:
            raise SchemaError("detector.window_ns must be positive")
        for name in ("dead_time_ns", "dark_counts_per_s", "device_loss_db", "coupler_loss_db"):
            if getattr(self, name) < 0:
                raise SchemaError(f"detector.{name} must be non-negative")

    def detector(self) -> DetectorModel:
        return DetectorModel.from_losses(
            self.device_loss_db,
            self.coupler_loss_db,
            self.efficiency,
            window_ns=self.window_ns,
            dead_time_ns=self.dead_time_ns,
            dark_counts_per_s=self.dark_counts_per_s,
            accidentals=self.accidentals,
        )


@dataclass(frozen=True)
class QkdSection(Section):
    threshold: float = 0.11
    sifting_factor: float = 0.5
    ec_efficiency: float = 1.1
    tau_s: float = 125.0

    def __post_init__(self):
        if not 0.0 < self.threshold <= 0.5:
            raise SchemaError("qkd.threshold must be in (0, 0.5]")
        if self.tau_s <= 0:
            raise SchemaError("qkd.tau_s must be positive")


@dataclass(frozen=True)
class TomographySection(Section):
    anchor: str = "context"
    resamples: int = 1000
    tau_s: float = 125.0

    def __post_init__(self):
        if self.anchor not in ("context", "flux"):
            raise SchemaError(f"Unknown tomography anchor: {self.anchor}")
        if self.tau_s <= 0:
            raise SchemaError("tomography.tau_s must be positive")


@dataclass(frozen=True)
class NetworkSection(Section):
    first_index: int = 10
    pairs: int = 17
    users: int = 5
    policy: str = "ordered"

    def __post_init__(self):
        if self.policy not in ("ordered", "balanced"):
            raise SchemaError(f"Unknown allocation policy: {self.policy}")
        if self.pairs < 1 or self.users < 1:
            raise SchemaError("network.pairs and network.users must be positive")


SECTION_TYPES = {
    "resonator": ResonatorSection,
    "gate": GateSection,
    "detector": DetectorSection,
    "qkd": QkdSection,
    "tomography": TomographySection,
    "network": NetworkSection,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of a run."""

    resonator: ResonatorSection = field(default_factory=ResonatorSection)
    gate: GateSection = field(default_factory=GateSection)
    detector: DetectorSection = field(default_factory=DetectorSection)
    qkd: QkdSection = field(default_factory=QkdSection)
    tomography: TomographySection = field(default_factory=TomographySection)
    network: NetworkSection = field(default_factory=NetworkSection)
    seed: int = 0
    output_dir: str = "output"

    @classmethod
    def from_dict(cls, doc: Any) -> "RunConfig":
        """Validate a configuration document.

        :raises SchemaError: unknown key, wrong type or invalid value
        """
        if not is_dict_like(doc):
            raise SchemaError("Configuration must be a JSON object")
        unknown = set(doc) - set(SECTIONS) - {"seed", "output_dir"}
        if unknown:
            raise SchemaError(f"Unknown key(s): {sorted(unknown)}")

        sections = {
            name: SECTION_TYPES[name].from_dict(doc[name], name)
            for name in SECTIONS
            if name in doc
        }
        seed = _check_type(doc.get("seed", 0), 0, "seed")
        output_dir = _check_type(doc.get("output_dir", "output"), "", "output_dir")
        return cls(**sections, seed=seed, output_dir=output_dir)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def hash(self) -> str:
        return config_hash(self.to_dict())


def parse_value(text: str) -> Any:
    """JSON value if `text` parses as one, otherwise the string itself."""
    try:
        return json.loads(text)
    except ValueError:
        return text


def apply_overrides(doc: Dict, overrides: Sequence[str]) -> Dict:
    """Set ``expression=value`` overrides in a configuration document.

    :raises SchemaError: an override is malformed
    """
    for override in overrides:
        expr, sep, text = override.partition("=")
        if not sep or not expr.strip():
            raise SchemaError(f"Override must be of the form path=value: {override}")
        try:
            path = parse(expr.strip())
        except Exception as err:  # pylint: disable=broad-except
            raise SchemaError(f"Invalid override path {expr}: {err}") from err
        logger.debug("Override %s = %s", expr, text)
        path.update_or_create(doc, parse_value(text))
    return doc


def resolve_config_path(path: Optional[str] = None) -> Path:
    """Explicit path, else the QFP_CONFIG variable, else the bundled default."""
    if path is None:
        path = required_env(ENV_CONFIG, str(DEFAULT_CONFIG))
    return Path(path)


def load_document(path) -> Dict:
    try:
        with open(path) as json_file:
            return json.load(json_file)
    except json.JSONDecodeError as err:
        raise SchemaError(f"Invalid JSON in {path}: {err}") from err


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """Load, override and validate a run configuration."""
    path = resolve_config_path(path)
    logger.info("Loading configuration from %s", path)
    doc = apply_overrides(load_document(path), overrides)
    return RunConfig.from_dict(doc)


class Config:
    """`Config` is a library for loading and inspecting run
    configurations.

    Values can be overridden with ``path=value`` pairs where ``path``
    is a JSONPath expression, e.g. ``gate.alpha=1.57``.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Load run config")
    def load_run_config(self, path=None, *overrides) -> RunConfig:
        """Load a configuration, the bundled default if no path is given."""
        config = load_config(path, overrides)
        self.logger.info("Configuration hash %s", config.hash)
        return config

    @keyword("Get config hash")
    def get_config_hash(self, config: RunConfig) -> str:
        return config.hash
