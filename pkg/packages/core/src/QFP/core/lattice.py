"""Frequency-mode lattice of a biphoton comb.

Signal photons sit at ``pump + n * fsr`` and idler photons at
``pump - n * fsr``. Frequencies are handled in Hz internally and
reported in THz, with the spacing configured in GHz.
"""
from dataclasses import dataclass, astuple
from typing import Iterator, Tuple

THZ = 1e12
GHZ = 1e9


class ModeRangeError(IndexError):
    """Raised when a mode index falls outside a grid or window."""


def to_window(obj):
    """Convert `obj` to instance of ModeWindow."""
    if obj is None or isinstance(obj, ModeWindow):
        return obj
    if isinstance(obj, str):
        obj = obj.split(",")
    return ModeWindow(*(int(i) for i in obj))


@dataclass(frozen=True)
class FrequencyGrid:
    """The lattice of comb modes around the pump.

    :param pump_frequency: pump frequency in THz
    :param fsr: mode spacing in GHz
    :param n_min: first usable resonance index
    :param n_max: last usable resonance index
    """

    pump_frequency: float
    fsr: float
    n_min: int
    n_max: int

    def __post_init__(self):
        if self.pump_frequency <= 0:
            raise ValueError("Invalid pump frequency")
        if self.fsr <= 0:
            raise ValueError("Invalid FSR")
        if self.n_min < 1:
            raise ValueError("Invalid n_min")
        if self.n_max < self.n_min:
            raise ValueError("Invalid n_max")

    def __contains__(self, n):
        return self.n_min <= n <= self.n_max

    def __iter__(self):
        return iter(range(self.n_min, self.n_max + 1))

    def __len__(self):
        return self.n_max - self.n_min + 1

    @property
    def indices(self) -> range:
        return range(self.n_min, self.n_max + 1)

    def require(self, n: int) -> int:
        """Return `n` unchanged, or raise if it is not on the grid."""
        if n not in self:
            raise ModeRangeError(
                f"Mode index {n} outside grid [{self.n_min}, {self.n_max}]"
            )
        return n

    def mode_frequencies(self, n: int) -> Tuple[float, float]:
        """Idler and signal frequencies (THz) of resonance pair `n`."""
        self.require(n)
        offset = n * self.fsr * GHZ / THZ
        return self.pump_frequency - offset, self.pump_frequency + offset


def mode_frequencies(grid: FrequencyGrid, n: int) -> Tuple[float, float]:
    """Idler and signal frequencies in THz for resonance pair `n`.

    :raises ModeRangeError: `n` is not in [n_min, n_max]
    """
    return grid.mode_frequencies(n)


@dataclass(frozen=True)
class ModeWindow:
    """Contiguous, inclusive range of mode indices."""

    first: int
    last: int

    def __post_init__(self):
        if self.last < self.first:
            raise ValueError("Invalid window")

    def __iter__(self) -> Iterator[int]:
        return iter(range(self.first, self.last + 1))

    def __len__(self):
        return self.last - self.first + 1

    def __contains__(self, n):
        return self.first <= n <= self.last

    @classmethod
    def covering(cls, *modes: int) -> "ModeWindow":
        return cls(min(modes), max(modes))

    @property
    def size(self):
        return len(self)

    def as_tuple(self):
        return astuple(self)

    def expand(self, margin: int) -> "ModeWindow":
        return ModeWindow(self.first - margin, self.last + margin)

    def shrink(self, margin: int) -> "ModeWindow":
        """Window reduced by `margin` on both sides.

        :raises ModeRangeError: nothing is left of the window
        """
        if 2 * margin >= len(self):
            raise ModeRangeError(
                f"Window {self.as_tuple()} too small for margin {margin}"
            )
        return ModeWindow(self.first + margin, self.last - margin)

    def index_of(self, n: int) -> int:
        """Matrix index of mode `n` inside the window."""
        if n not in self:
            raise ModeRangeError(f"Mode {n} outside window {self.as_tuple()}")
        return n - self.first

    def slice_of(self, other: "ModeWindow") -> slice:
        """Matrix slice selecting `other` inside this window."""
        start = self.index_of(other.first)
        stop = self.index_of(other.last) + 1
        return slice(start, stop)
