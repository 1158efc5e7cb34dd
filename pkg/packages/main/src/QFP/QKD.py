"""Entanglement-based key distribution metrics per frequency pair."""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Tuple

from robot.api.deco import keyword
from scipy.special import entr

from QFP.Measurement import CoincidenceRecord, ValidationError
from QFP.Tables import Table, read_table_from_csv, write_table_to_csv


DEFAULT_THRESHOLD = 0.11
DEFAULT_SIFTING = 0.5
DEFAULT_EC_EFFICIENCY = 1.1

COUNT_COLUMNS = ("c00", "c01", "c10", "c11", "cpp", "cpm", "cmp", "cmm")
METRIC_COLUMNS = (
    "n",
    "raw_rate",
    "qber",
    "sifted_bps",
    "secure",
    "secure_fraction",
    "secret_bps",
    "synthesized",
)

logger = logging.getLogger(__name__)


class QberError(ZeroDivisionError):
    """Raised when no coincidences are available to estimate the QBER."""


class NoKeyError(ValueError):
    """Raised when the error rate leaves no extractable key."""


@dataclass(frozen=True)
class BasisCounts:
    """Coincidences in the Z basis (0/1) and X basis (+/-).

    :param synthesized: X-basis minus outcomes were inferred rather
        than measured
    """

    c00: int
    c01: int
    c10: int
    c11: int
    cpp: int
    cpm: int
    cmp: int
    cmm: int
    tau_s: float
    synthesized: bool = False

    def __post_init__(self):
        for name in COUNT_COLUMNS:
            if getattr(self, name) < 0:
                raise ValueError(f"Invalid count {name}: {getattr(self, name)}")
        if self.tau_s <= 0:
            raise ValueError("Integration time must be positive")

    @classmethod
    def from_record(cls, record: CoincidenceRecord) -> "BasisCounts":
        """Z and X counts of a record.

        When the minus outcomes were not measured they are completed
        from the Z/X cross contexts, assuming equal flux per context.
        """
        z = [record[(i, s)] for i in ("0", "1") for s in ("0", "1")]
        minus = [("+", "-"), ("-", "+"), ("-", "-")]
        if all(labels in record for labels in minus):
            x = [record[("+", "+")]] + [record[labels] for labels in minus]
            return cls(*z, *x, tau_s=record.tau_s)

        flux = sum(z)
        plus = record[("+", "+")]
        idler_plus = record[("+", "0")] + record[("+", "1")]
        signal_plus = record[("0", "+")] + record[("1", "+")]
        x = [
            plus,
            max(0, idler_plus - plus),
            max(0, signal_plus - plus),
            max(0, flux - idler_plus - signal_plus + plus),
        ]
        logger.warning("Synthesizing X-basis minus outcomes from context complements")
        return cls(*z, *x, tau_s=record.tau_s, synthesized=True)

    def scaled(self, factor: float) -> "BasisCounts":
        values = {name: getattr(self, name) * factor for name in COUNT_COLUMNS}
        return BasisCounts(**values, tau_s=self.tau_s, synthesized=self.synthesized)


class SiftedKey(NamedTuple):
    sifted_rate: float
    secure_fraction: float


@dataclass(frozen=True)
class LinkMetrics:
    """Key metrics of one frequency pair."""

    n: int
    raw_rate: float
    qber: float
    sifted_rate: float
    secure_fraction: float
    secret_rate: float
    secure: bool
    synthesized: bool = False

    def to_row(self) -> dict:
        return {
            "n": self.n,
            "raw_rate": self.raw_rate,
            "qber": self.qber,
            "sifted_bps": self.sifted_rate,
            "secure": self.secure,
            "secure_fraction": self.secure_fraction,
            "secret_bps": self.secret_rate,
            "synthesized": self.synthesized,
        }

    @classmethod
    def from_row(cls, row) -> "LinkMetrics":
        try:
            return cls(
                n=int(row["n"]),
                raw_rate=float(row["raw_rate"]),
                qber=float(row["qber"]),
                sifted_rate=float(row["sifted_bps"]),
                secure_fraction=float(row.get("secure_fraction") or 0.0),
                secret_rate=float(row.get("secret_bps") or 0.0),
                secure=_to_bool(row["secure"]),
                synthesized=_to_bool(row.get("synthesized") or False),
            )
        except (KeyError, TypeError, ValueError) as err:
            raise ValidationError(f"Malformed link metrics row: {err}") from err


def _to_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no", ""):
        return False
    raise ValueError(f"Not a boolean: {value}")


def basis_totals(c: BasisCounts) -> Tuple[float, float]:
    """(C_Z, C_X), each half of the basis' four counts."""
    c_z = (c.c00 + c.c01 + c.c10 + c.c11) / 2
    c_x = (c.cpp + c.cpm + c.cmp + c.cmm) / 2
    return c_z, c_x


def raw_rate(c: BasisCounts) -> float:
    """R_raw = (C_Z + C_X) / (2 tau)."""
    c_z, c_x = basis_totals(c)
    return (c_z + c_x) / 2 / c.tau_s


def qber(c: BasisCounts) -> float:
    """e = (C_01 + C_10 + C_+- + C_-+) / (C_Z + C_X), clipped to 1.

    :raises QberError: there are no coincidences
    """
    c_z, c_x = basis_totals(c)
    total = c_z + c_x
    if total == 0:
        raise QberError("No coincidences to estimate the error rate from")
    error = (c.c01 + c.c10 + c.cpm + c.cmp) / total
    if error > 1.0:
        logger.warning("Error rate %.3f exceeds 1, clipping", error)
    return min(error, 1.0)


def binary_entropy(e: float) -> float:
    return float((entr(e) + entr(1.0 - e)) / math.log(2))


def secure_fraction(e: float, ec_efficiency: float = DEFAULT_EC_EFFICIENCY) -> float:
    """max(0, 1 - (1 + f) h2(e))."""
    return max(0.0, 1.0 - (1.0 + ec_efficiency) * binary_entropy(e))


def sifted_key_rate(
    m: float,
    e: float,
    sifting_factor: float = DEFAULT_SIFTING,
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY,
) -> SiftedKey:
    """Sifted key rate of raw rate `m` and its secure fraction.

    :raises NoKeyError: e >= 0.5
    """
    if e < 0.0:
        raise ValueError(f"Invalid error rate: {e}")
    if e >= 0.5:
        raise NoKeyError(f"No key can be distilled at error rate {e:.3f}")
    if not 0.0 < sifting_factor <= 1.0:
        raise ValueError(f"Invalid sifting factor: {sifting_factor}")
    return SiftedKey(sifting_factor * m, secure_fraction(e, ec_efficiency))


def evaluate_link(
    c: BasisCounts,
    n: int,
    threshold: float = DEFAULT_THRESHOLD,
    sifting_factor: float = DEFAULT_SIFTING,
    ec_efficiency: float = DEFAULT_EC_EFFICIENCY,
    allow_no_key: bool = False,
) -> LinkMetrics:
    """All key metrics of pair `n`; the link is secure if qber < threshold.

    :param allow_no_key: report links at e >= 0.5 as insecure with a
        zero secure fraction instead of raising
    """
    rate = raw_rate(c)
    error = qber(c)
    try:
        sifted, fraction = sifted_key_rate(rate, error, sifting_factor, ec_efficiency)
    except NoKeyError:
        if not allow_no_key:
            raise
        sifted, fraction = sifting_factor * rate, 0.0

    return LinkMetrics(
        n=int(n),
        raw_rate=rate,
        qber=error,
        sifted_rate=sifted,
        secure_fraction=fraction,
        secret_rate=sifted * fraction,
        secure=error < threshold,
        synthesized=c.synthesized,
    )


def read_basis_counts(path) -> List[Tuple[int, BasisCounts]]:
    """Per-pair counts from a CSV with columns n, c00 ... cmm, tau_s."""
    table, _ = read_table_from_csv(path)
    missing = {"n", "tau_s", *COUNT_COLUMNS} - set(table.columns)
    if missing:
        raise ValidationError(f"Missing column(s): {sorted(missing)}")

    result = []
    for row in table:
        try:
            counts = {name: int(row[name]) for name in COUNT_COLUMNS}
            entry = BasisCounts(**counts, tau_s=float(row["tau_s"]))
            result.append((int(row["n"]), entry))
        except (TypeError, ValueError) as err:
            raise ValidationError(f"Invalid counts for pair {row['n']}: {err}") from err
    return result


def write_basis_counts(pairs, path, metadata=None) -> None:
    table = Table(columns=["n", *COUNT_COLUMNS, "tau_s"])
    for n, counts in pairs:
        row = {name: getattr(counts, name) for name in COUNT_COLUMNS}
        table.append_row({"n": n, **row, "tau_s": counts.tau_s})
    write_table_to_csv(table, path, metadata)


def read_link_metrics(path) -> List[LinkMetrics]:
    table, _ = read_table_from_csv(path)
    return [LinkMetrics.from_row(row) for row in table]


def write_link_metrics(metrics, path, metadata=None) -> None:
    table = Table([m.to_row() for m in metrics], columns=list(METRIC_COLUMNS))
    write_table_to_csv(table, path, metadata)


class QKD:
    """`QKD` is a library for evaluating entanglement-based key
    distribution on frequency pairs: raw rate, error rate, sifted and
    secret key rates, and the security decision.
    """

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    @keyword("Get basis counts")
    def get_basis_counts(self, record: CoincidenceRecord) -> BasisCounts:
        return BasisCounts.from_record(record)

    @keyword("Get QBER")
    def get_qber(self, counts: BasisCounts) -> float:
        error = qber(counts)
        self.logger.info("QBER: %.4f", error)
        return error

    @keyword("Evaluate link")
    def evaluate(
        self, counts: BasisCounts, n: int, threshold: float = DEFAULT_THRESHOLD
    ) -> LinkMetrics:
        """Key metrics for pair `n`, secure below `threshold`."""
        metrics = evaluate_link(counts, int(n), float(threshold), allow_no_key=True)
        self.logger.info(
            "Pair %d: qber %.4f, sifted %.3f bit/s, secure %s",
            metrics.n,
            metrics.qber,
            metrics.sifted_rate,
            metrics.secure,
        )
        return metrics

    @keyword("Evaluate links from file")
    def evaluate_file(self, path, threshold: float = DEFAULT_THRESHOLD):
        self.logger.info("Evaluating links from %s", path)
        return [
            evaluate_link(c, n, float(threshold), allow_no_key=True)
            for n, c in read_basis_counts(path)
        ]
