"""Finite-horizon sampled signals and the gain/phase functionals.

A :class:`SampledSignal` stands in for an element of the extended L2 space:
sample ``k`` sits at time ``k * dt`` and every integral is the rectangle rule
``dt * sum(...)``. Truncation keeps the samples with ``t <= T``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatchError, DomainError

# Tolerance used when snapping a horizon T onto the sample grid.
_SNAP_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled multichannel real signal.

    ``values`` has one row per time step and one column per channel.
    """

    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise DimensionMismatchError(f"values must be 1-D or 2-D, got shape {values.shape}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError(f"dt must be positive and finite, got {self.dt}")
        if values.shape[0] < 1 or values.shape[1] < 1:
            raise DomainError("a signal needs at least one sample and one channel")
        if not np.all(np.isfinite(values)):
            raise DomainError("signal values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "values", values)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> float:
        """Time of the last sample."""
        return (self.n_samples - 1) * self.dt

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    @classmethod
    def from_function(cls, f, dt: float, n_samples: int) -> "SampledSignal":
        t = np.arange(n_samples) * dt
        return cls(dt, np.asarray(f(t), dtype=float))

    @classmethod
    def zeros(cls, dt: float, n_samples: int, channels: int = 1) -> "SampledSignal":
        return cls(dt, np.zeros((n_samples, channels)))

    def with_values(self, values) -> "SampledSignal":
        return SampledSignal(self.dt, values)

    def conformable(self, other: "SampledSignal") -> bool:
        return self.dt == other.dt and self.values.shape == other.values.shape

    def __add__(self, other):
        _check_conformable(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_conformable(self, other)
        return self.with_values(self.values - other.values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, scalar):
        return self.with_values(float(scalar) * self.values)

    __rmul__ = __mul__


class GainPhasePair(NamedTuple):
    gain: float
    phase: float
    phase_defined: bool


def _check_conformable(u: SampledSignal, v: SampledSignal) -> None:
    if not u.conformable(v):
        raise DimensionMismatchError(
            f"signals not conformable: dt {u.dt} vs {v.dt}, shape {u.values.shape} vs {v.values.shape}"
        )


def inner_product(u: SampledSignal, v: SampledSignal) -> float:
    """Rectangle-rule approximation of the L2 inner product."""
    _check_conformable(u, v)
    return u.dt * float(np.sum(u.values * v.values))


def norm(u: SampledSignal) -> float:
    return math.sqrt(u.dt * float(np.sum(u.values * u.values)))


def snap_index(T: float, dt: float) -> int:
    """Index of the last sample with ``t <= T``."""
    if T < 0:
        raise DomainError(f"truncation horizon must be nonnegative, got {T}")
    return int(math.floor(T / dt + _SNAP_EPS))


def truncate(u: SampledSignal, T: float) -> SampledSignal:
    k = snap_index(T, u.dt)
    if k >= u.n_samples - 1:
        return u
    values = np.array(u.values)
    values[k + 1:] = 0.0
    return u.with_values(values)


def _gain_arrays(a: np.ndarray, b: np.ndarray, dt: float) -> float:
    na = math.sqrt(dt * float(np.sum(a * a)))
    if na == 0.0:
        return math.inf
    return math.sqrt(dt * float(np.sum(b * b))) / na


def _phase_arrays(a: np.ndarray, b: np.ndarray, dt: float) -> tuple[float, bool]:
    # Half-angle form of arccos(<a,b>/(|a||b|)); same value, no round-off
    # blow-up near 0 and pi.
    na = math.sqrt(dt * float(np.sum(a * a)))
    nb = math.sqrt(dt * float(np.sum(b * b)))
    if na == 0.0 or nb == 0.0:
        return 0.0, False
    ah = a / na
    bh = b / nb
    diff = math.sqrt(dt * float(np.sum((ah - bh) ** 2)))
    summ = math.sqrt(dt * float(np.sum((ah + bh) ** 2)))
    return 2.0 * math.atan2(diff, summ), True


def gain(u: SampledSignal, v: SampledSignal) -> float:
    """``|v| / |u|``, or infinity when ``u`` is the zero signal."""
    _check_conformable(u, v)
    return _gain_arrays(u.values, v.values, u.dt)


def phase(u: SampledSignal, v: SampledSignal) -> float:
    """Angle between ``u`` and ``v`` in [0, pi]; 0 if either is zero."""
    _check_conformable(u, v)
    return _phase_arrays(u.values, v.values, u.dt)[0]


def gain_phase(u: SampledSignal, v: SampledSignal) -> GainPhasePair:
    _check_conformable(u, v)
    th, defined = _phase_arrays(u.values, v.values, u.dt)
    return GainPhasePair(_gain_arrays(u.values, v.values, u.dt), th, defined)


def gain_phase_T(u: SampledSignal, v: SampledSignal, T: float) -> GainPhasePair:
    """Gain and phase of the truncations ``u_T``, ``v_T``."""
    _check_conformable(u, v)
    return gain_phase(truncate(u, T), truncate(v, T))


def tail_energy_fraction(u: SampledSignal, fraction_window: float) -> float:
    """Share of the energy of ``u`` carried by the final ``fraction_window`` of the horizon."""
    if not 0 < fraction_window < 1:
        raise DomainError(f"fraction_window must lie in (0, 1), got {fraction_window}")
    sq = np.sum(u.values * u.values, axis=1)
    total = float(np.sum(sq))
    if total == 0.0:
        return 0.0
    m = int(round(fraction_window * u.n_samples))
    if m == 0:
        return 0.0
    return float(np.sum(sq[-m:])) / total


def write_csv(u: SampledSignal, path, columns=None) -> None:
    columns = columns or [f"ch{i}" for i in range(u.channels)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", *columns])
        for k, row in enumerate(u.values):
            w.writerow([repr(k * u.dt), *(repr(float(x)) for x in row)])


def read_csv(path, dt: float | None = None) -> SampledSignal:
    """Read a signal written as ``t,ch0,ch1,...``.

    The time column must start at 0 and be uniform to 1e-9 relative
    tolerance; ``dt`` is inferred from the first step when not given.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0].strip() != "t":
        raise DomainError(f"{path}: header must start with 't'")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2:
        raise DomainError(f"{path}: no channel columns")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise DomainError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] != len(header):
        raise DomainError(f"{path}: ragged or empty data")
    t = data[:, 0]
    if dt is None:
        if len(t) < 2:
            raise DomainError(f"{path}: cannot infer dt from a single sample")
        dt = float(t[1] - t[0])
    if dt <= 0:
        raise DomainError(f"{path}: dt must be positive")
    expected = np.arange(len(t)) * dt
    bad = np.abs(t - expected) > 1e-9 * np.maximum(np.abs(expected), dt)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DomainError(f"{path}: time column not uniform at row {k + 1} (t={t[k]}, expected {expected[k]})")
    return SampledSignal(dt, data[:, 1:])
