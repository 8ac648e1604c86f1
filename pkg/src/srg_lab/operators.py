"""Causal operators on sampled signals.

Every operator maps the zero signal to the zero signal (zero initial state)
and is causal. Operators are immutable; evaluation is pure.

Two evaluation paths exist and agree bit-for-bit:

* ``op.apply(values, dt)`` evaluates a whole (possibly batched) signal,
  ``values`` having shape ``(..., n_samples, channels)``;
* ``op.stepper(dt, batch_shape)`` gives a sample-by-sample evaluator used by
  the feedback solver, with ``output(u_k)`` (no state change) and
  ``commit(u_k)`` (advance one step).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionMismatchError, DomainError, EvaluationError
from .signals import SampledSignal

__all__ = [
    "Operator", "LTI", "StaticNonlinearity", "Integrator", "Series", "ParallelSum",
    "Scale", "Negate", "DiscreteLTI", "discretize_lti", "evaluate", "evaluate_batch",
    "check_causality", "has_direct_feedthrough", "is_stable", "incremental_gain_bound",
    "contains_integrator", "operator_to_dict", "operator_from_dict", "lag", "identity",
    "static_gain", "zero_operator",
]


class Operator:
    """Base class for causal square systems."""

    io_dim: int

    def apply(self, values: np.ndarray, dt: float) -> np.ndarray:
        raise NotImplementedError

    def stepper(self, dt: float, batch_shape=()):
        raise NotImplementedError

    # composition sugar
    def __rmul__(self, factor):
        return Scale(float(factor), self)

    def __neg__(self):
        return Negate(self)

    def __add__(self, other):
        return ParallelSum((self, other))

    def then(self, other):
        """Series connection: ``other`` applied to the output of ``self``."""
        return Series((self, other))


class DiscreteLTI(NamedTuple):
    Ad: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float


def discretize_lti(A, B, C, D, dt: float) -> DiscreteLTI:
    """Zero-order-hold discretization via the exponential of ``[[A, B], [0, 0]] * dt``."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionMismatchError(f"A must be square, got {A.shape}")
    B = B.reshape(n, -1)
    m = B.shape[1]
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = scipy.linalg.expm(M * dt)
    if not np.all(np.isfinite(E)):
        raise EvaluationError("matrix exponential did not produce finite values")
    return DiscreteLTI(E[:n, :n], E[:n, n:], np.asarray(C, dtype=float), np.asarray(D, dtype=float), float(dt))


def _check_finite(y: np.ndarray, what: str) -> None:
    if np.all(np.isfinite(y)):
        return
    bad = ~np.isfinite(y)
    # first bad time index over batch and channels
    per_time = np.any(bad.reshape(-1, y.shape[-2], y.shape[-1]), axis=(0, 2))
    k = int(np.argmax(per_time))
    raise EvaluationError(f"{what}: non-finite output at sample {k}")


# ---------------------------------------------------------------------------
# LTI state space


class _LTIStepper:
    def __init__(self, d: DiscreteLTI, batch_shape):
        self.d = d
        self.x = np.zeros(tuple(batch_shape) + (d.Ad.shape[0],))

    def output(self, u):
        return self.x @ self.d.C.T + u @ self.d.D.T

    def commit(self, u):
        self.x = self.x @ self.d.Ad.T + u @ self.d.Bd.T


@dataclass(frozen=True, eq=False)
class LTI(Operator):
    """Continuous-time state space ``x' = Ax + Bu, y = Cx + Du`` with zero initial state."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        m = D.shape[0]
        if D.shape != (m, m):
            raise DimensionMismatchError(f"D must be square (square systems only), got {D.shape}")
        A = np.asarray(self.A, dtype=float)
        n = A.shape[0] if A.size else 0
        A = A.reshape(n, n)
        B = np.asarray(self.B, dtype=float).reshape(n, m)
        C = np.asarray(self.C, dtype=float).reshape(m, n)
        for name, arr in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} has non-finite entries")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def io_dim(self) -> int:
        return self.D.shape[0]

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def discrete(self, dt: float) -> DiscreteLTI:
        key = float(dt)
        if key not in self._cache:
            self._cache[key] = discretize_lti(self.A, self.B, self.C, self.D, key)
        return self._cache[key]

    def apply(self, values, dt):
        d = self.discrete(dt)
        u = np.asarray(values, dtype=float)
        y = np.empty(u.shape[:-1] + (self.io_dim,))
        x = np.zeros(u.shape[:-2] + (self.n_states,))
        CT, DT, AT, BT = d.C.T, d.D.T, d.Ad.T, d.Bd.T
        # overflow surfaces as a non-finite sample, reported by the caller
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(u.shape[-2]):
                uk = u[..., k, :]
                y[..., k, :] = x @ CT + uk @ DT
                x = x @ AT + uk @ BT
        return y

    def stepper(self, dt, batch_shape=()):
        return _LTIStepper(self.discrete(dt), batch_shape)


# ---------------------------------------------------------------------------
# Static nonlinearities

_SHAPES = {
    "linear": lambda x: x,
    "tanh": np.tanh,
    "saturation": lambda x: np.clip(x, -1.0, 1.0),
}

_KIND_PARAMS = {
    "tanh_gain": ("k",),
    "saturation": ("limit",),
    "relu": (),
    "deadzone": ("width",),
    "sector": ("a", "b", "shape"),
}


class _StaticStepper:
    def __init__(self, f):
        self.output = f

    def commit(self, u):
        pass


@dataclass(frozen=True, eq=False)
class StaticNonlinearity(Operator):
    """Memoryless map applied elementwise at every sample.

    Kinds and parameters:

    ``tanh_gain``  ``k * tanh(x)``
    ``saturation`` ``clip(x, -limit, limit)``
    ``relu``       ``max(x, 0)``
    ``deadzone``   ``sign(x) * max(|x| - width, 0)``
    ``sector``     ``a*x + (b - a)*shape(x)`` with ``shape`` in
                   {linear, tanh, saturation}; slopes lie in [a, b].
    """

    kind: str
    params: dict = field(default_factory=dict)
    dim: int = 1

    def __post_init__(self):
        if self.kind not in _KIND_PARAMS:
            raise DomainError(f"unknown nonlinearity kind {self.kind!r}")
        expected = set(_KIND_PARAMS[self.kind])
        params = dict(self.params)
        if self.kind == "sector":
            params.setdefault("shape", "tanh")
        if set(params) != expected:
            raise DomainError(f"{self.kind} expects parameters {sorted(expected)}, got {sorted(params)}")
        for key, val in params.items():
            if key == "shape":
                if val not in _SHAPES:
                    raise DomainError(f"unknown sector shape {val!r}")
                continue
            params[key] = float(val)
            if not math.isfinite(params[key]):
                raise DomainError(f"{key} must be finite")
        if self.kind == "saturation" and params["limit"] <= 0:
            raise DomainError("saturation limit must be positive")
        if self.kind == "deadzone" and params["width"] < 0:
            raise DomainError("deadzone width must be nonnegative")
        if self.kind == "sector" and params["b"] < params["a"]:
            raise DomainError("sector requires a <= b")
        if int(self.dim) < 1:
            raise DomainError("dim must be positive")
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def io_dim(self) -> int:
        return self.dim

    def f(self, x):
        p = self.params
        if self.kind == "tanh_gain":
            return p["k"] * np.tanh(x)
        if self.kind == "saturation":
            return np.clip(x, -p["limit"], p["limit"])
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "deadzone":
            return np.sign(x) * np.maximum(np.abs(x) - p["width"], 0.0)
        return p["a"] * x + (p["b"] - p["a"]) * _SHAPES[p["shape"]](x)

    def slope_bounds(self) -> tuple[float, float]:
        p = self.params
        if self.kind == "tanh_gain":
            return (min(0.0, p["k"]), max(0.0, p["k"]))
        if self.kind == "sector":
            return (p["a"], p["b"])
        return (0.0, 1.0)

    def apply(self, values, dt):
        return self.f(np.asarray(values, dtype=float))

    def stepper(self, dt, batch_shape=()):
        return _StaticStepper(self.f)


# ---------------------------------------------------------------------------
# Integrator


class _IntegratorStepper:
    def __init__(self, dt, batch_shape, dim):
        self.dt = dt
        self.s = np.zeros(tuple(batch_shape) + (dim,))

    def output(self, u):
        return self.s + self.dt * u

    def commit(self, u):
        self.s = self.s + self.dt * u


@dataclass(frozen=True, eq=False)
class Integrator(Operator):
    """Running integral ``y_k = dt * (u_0 + ... + u_k)``.

    The current sample is included (backward-Euler rule). With rectangle-rule
    inner products this gives ``<u, y>_T = y_T^2/2 + dt^2/2 * sum(u_k^2) >= 0``,
    the discrete counterpart of the continuous identity ``<u, y>_T = y(T)^2/2``.
    """

    dim: int = 1

    @property
    def io_dim(self) -> int:
        return self.dim

    def apply(self, values, dt):
        u = np.asarray(values, dtype=float)
        return np.cumsum(dt * u, axis=-2)

    def stepper(self, dt, batch_shape=()):
        return _IntegratorStepper(dt, batch_shape, self.dim)


# ---------------------------------------------------------------------------
# Combinators


class _SeriesStepper:
    def __init__(self, steppers):
        self.steppers = steppers

    def output(self, u):
        for s in self.steppers:
            u = s.output(u)
        return u

    def commit(self, u):
        for s in self.steppers:
            nxt = s.output(u)
            s.commit(u)
            u = nxt


class _ParallelStepper:
    def __init__(self, steppers):
        self.steppers = steppers

    def output(self, u):
        total = self.steppers[0].output(u)
        for s in self.steppers[1:]:
            total = total + s.output(u)
        return total

    def commit(self, u):
        for s in self.steppers:
            s.commit(u)


class _MapStepper:
    def __init__(self, inner, g):
        self.inner = inner
        self.g = g

    def output(self, u):
        return self.g(self.inner.output(u))

    def commit(self, u):
        self.inner.commit(u)


def _common_dim(ops, what):
    if not ops:
        raise DomainError(f"{what} needs at least one member")
    dims = {op.io_dim for op in ops}
    if len(dims) != 1:
        raise DimensionMismatchError(f"{what} members have different io dimensions {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True, eq=False)
class Series(Operator):
    """``stages[-1] o ... o stages[0]``: the first stage sees the input."""

    stages: tuple

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        _common_dim(self.stages, "series")

    @property
    def io_dim(self):
        return self.stages[0].io_dim

    def apply(self, values, dt):
        for s in self.stages:
            values = s.apply(values, dt)
        return values

    def stepper(self, dt, batch_shape=()):
        return _SeriesStepper([s.stepper(dt, batch_shape) for s in self.stages])


@dataclass(frozen=True, eq=False)
class ParallelSum(Operator):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        _common_dim(self.terms, "parallel_sum")

    @property
    def io_dim(self):
        return self.terms[0].io_dim

    def apply(self, values, dt):
        total = self.terms[0].apply(values, dt)
        for t in self.terms[1:]:
            total = total + t.apply(values, dt)
        return total

    def stepper(self, dt, batch_shape=()):
        return _ParallelStepper([t.stepper(dt, batch_shape) for t in self.terms])


@dataclass(frozen=True, eq=False)
class Scale(Operator):
    factor: float
    inner: Operator

    def __post_init__(self):
        if not math.isfinite(self.factor):
            raise DomainError("scale factor must be finite")
        object.__setattr__(self, "factor", float(self.factor))

    @property
    def io_dim(self):
        return self.inner.io_dim

    def apply(self, values, dt):
        return self.factor * self.inner.apply(values, dt)

    def stepper(self, dt, batch_shape=()):
        f = self.factor
        return _MapStepper(self.inner.stepper(dt, batch_shape), lambda y: f * y)


@dataclass(frozen=True, eq=False)
class Negate(Operator):
    inner: Operator

    @property
    def io_dim(self):
        return self.inner.io_dim

    def apply(self, values, dt):
        return -self.inner.apply(values, dt)

    def stepper(self, dt, batch_shape=()):
        return _MapStepper(self.inner.stepper(dt, batch_shape), lambda y: -y)


# ---------------------------------------------------------------------------
# constructors


def lag(time_constant: float = 1.0, dc_gain: float = 1.0, dim: int = 1) -> LTI:
    """``dc_gain / (time_constant * s + 1)`` on each channel."""
    I = np.eye(dim)
    return LTI(-I / time_constant, I / time_constant, dc_gain * I, np.zeros((dim, dim)))


def identity(dim: int = 1) -> StaticNonlinearity:
    return StaticNonlinearity("sector", {"a": 1.0, "b": 1.0, "shape": "linear"}, dim)


def static_gain(k: float, dim: int = 1) -> StaticNonlinearity:
    return StaticNonlinearity("sector", {"a": float(k), "b": float(k), "shape": "linear"}, dim)


def zero_operator(dim: int = 1) -> StaticNonlinearity:
    return static_gain(0.0, dim)


# ---------------------------------------------------------------------------
# evaluation and structural queries


def evaluate(spec: Operator, u: SampledSignal) -> SampledSignal:
    """Output of ``spec`` driven by ``u`` from zero initial state."""
    if u.channels != spec.io_dim:
        raise DimensionMismatchError(f"input has {u.channels} channels, operator expects {spec.io_dim}")
    y = spec.apply(u.values, u.dt)
    _check_finite(y, type(spec).__name__)
    return SampledSignal(u.dt, y)


def evaluate_batch(spec: Operator, values: np.ndarray, dt: float) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != spec.io_dim:
        raise DimensionMismatchError(f"input has {values.shape[-1]} channels, operator expects {spec.io_dim}")
    y = spec.apply(values, dt)
    _check_finite(y, type(spec).__name__)
    return y


class CausalityReport(NamedTuple):
    max_violation: float
    passed: bool
    trials: int


def check_causality(spec: Operator, trials: int = 100, rng_seed: int = 0,
                    n_samples: int = 200, dt: float = 0.01) -> CausalityReport:
    """Largest ``|Gamma_T P u - Gamma_T P Gamma_T u|`` over random ``(u, T)``."""
    if trials < 1:
        raise DomainError("trials must be at least 1")
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    for _ in range(trials):
        u = rng.standard_normal((n_samples, spec.io_dim))
        k = int(rng.integers(0, n_samples))
        ut = u.copy()
        ut[k + 1:] = 0.0
        y = spec.apply(u, dt)[: k + 1]
        yt = spec.apply(ut, dt)[: k + 1]
        worst = max(worst, math.sqrt(dt * float(np.sum((y - yt) ** 2))))
    return CausalityReport(worst, worst <= 1e-9, trials)


def has_direct_feedthrough(spec: Operator) -> bool:
    """Whether output sample k can depend on input sample k."""
    if isinstance(spec, LTI):
        return bool(np.any(spec.D != 0))
    if isinstance(spec, (StaticNonlinearity, Integrator)):
        return True
    if isinstance(spec, Series):
        return all(has_direct_feedthrough(s) for s in spec.stages)
    if isinstance(spec, ParallelSum):
        return any(has_direct_feedthrough(t) for t in spec.terms)
    if isinstance(spec, Scale):
        return spec.factor != 0 and has_direct_feedthrough(spec.inner)
    if isinstance(spec, Negate):
        return has_direct_feedthrough(spec.inner)
    # unknown operator types: assume the worst
    return True


def is_stable(spec: Operator) -> bool:
    """Structural finite-incremental-gain check.

    Hurwitz LTI blocks and Lipschitz static maps are stable; the integrator
    is not; series, parallel sums and scalings of stable blocks are stable.
    """
    if isinstance(spec, LTI):
        if spec.n_states == 0:
            return True
        return bool(np.max(np.linalg.eigvals(spec.A).real) < 0)
    if isinstance(spec, StaticNonlinearity):
        return True
    if isinstance(spec, Integrator):
        return False
    if isinstance(spec, Series):
        return all(is_stable(s) for s in spec.stages)
    if isinstance(spec, ParallelSum):
        return all(is_stable(t) for t in spec.terms)
    if isinstance(spec, (Scale, Negate)):
        return is_stable(spec.inner)
    return False


def incremental_gain_bound(spec: Operator, n_freq: int = 4000) -> float:
    """Upper bound on the incremental gain; ``inf`` for unstable systems.

    For LTI blocks the peak singular value is evaluated on a logarithmic
    frequency grid, so that part is an estimate rather than a bound.
    """
    if isinstance(spec, StaticNonlinearity):
        lo, hi = spec.slope_bounds()
        return max(abs(lo), abs(hi))
    if isinstance(spec, LTI):
        if not is_stable(spec):
            return math.inf
        if spec.n_states == 0:
            return float(np.linalg.norm(spec.D, 2))
        w = np.concatenate([[0.0], np.logspace(-4, 4, n_freq)])
        I = np.eye(spec.n_states)
        peak = 0.0
        for wi in w:
            H = spec.C @ np.linalg.solve(1j * wi * I - spec.A, spec.B) + spec.D
            peak = max(peak, float(np.linalg.norm(H, 2)))
        return peak
    if isinstance(spec, Integrator):
        return math.inf
    if isinstance(spec, Series):
        return math.prod(incremental_gain_bound(s, n_freq) for s in spec.stages)
    if isinstance(spec, ParallelSum):
        return sum(incremental_gain_bound(t, n_freq) for t in spec.terms)
    if isinstance(spec, Scale):
        return abs(spec.factor) * incremental_gain_bound(spec.inner, n_freq)
    if isinstance(spec, Negate):
        return incremental_gain_bound(spec.inner, n_freq)
    return math.inf


def contains_integrator(spec: Operator) -> bool:
    """True when the operator has a pure integrator (pole at the origin)."""
    if isinstance(spec, Integrator):
        return True
    if isinstance(spec, LTI):
        return spec.n_states > 0 and bool(np.min(np.abs(np.linalg.eigvals(spec.A))) < 1e-12)
    if isinstance(spec, Series):
        return any(contains_integrator(s) for s in spec.stages)
    if isinstance(spec, ParallelSum):
        return any(contains_integrator(t) for t in spec.terms)
    if isinstance(spec, (Scale, Negate)):
        return contains_integrator(spec.inner)
    return False


# ---------------------------------------------------------------------------
# JSON description


def operator_to_dict(spec: Operator) -> dict:
    if isinstance(spec, LTI):
        return {"variant": "lti_state_space", "params": {
            "n_states": spec.n_states, "io_dim": spec.io_dim,
            "A": spec.A.tolist(), "B": spec.B.tolist(), "C": spec.C.tolist(), "D": spec.D.tolist()}}
    if isinstance(spec, StaticNonlinearity):
        return {"variant": "static_nonlinearity",
                "params": {"kind": spec.kind, "dim": spec.dim, **spec.params}}
    if isinstance(spec, Integrator):
        return {"variant": "integrator", "params": {"dim": spec.dim}}
    if isinstance(spec, Series):
        return {"variant": "series", "params": {"stages": [operator_to_dict(s) for s in spec.stages]}}
    if isinstance(spec, ParallelSum):
        return {"variant": "parallel_sum", "params": {"terms": [operator_to_dict(t) for t in spec.terms]}}
    if isinstance(spec, Scale):
        return {"variant": "scale", "params": {"factor": spec.factor, "inner": operator_to_dict(spec.inner)}}
    if isinstance(spec, Negate):
        return {"variant": "negate", "params": {"inner": operator_to_dict(spec.inner)}}
    raise ConfigError(f"cannot serialize operator of type {type(spec).__name__}")


def _keys(d, required, where, optional=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    unknown = set(d) - set(required) - set(optional)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _matrix(x, shape, where):
    try:
        arr = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: not a numeric matrix") from None
    if arr.size == 0 and 0 in shape:
        return arr.reshape(shape)
    if arr.shape != shape:
        raise ConfigError(f"{where}: expected shape {shape}, got {arr.shape}")
    return arr


def operator_from_dict(d: dict, where: str = "operator") -> Operator:
    """Parse the JSON operator description; unknown keys are rejected."""
    _keys(d, ("variant", "params"), where)
    variant, p = d["variant"], d["params"]
    w = f"{where}.params"
    try:
        if variant == "lti_state_space":
            _keys(p, ("n_states", "io_dim", "A", "B", "C", "D"), w)
            n, m = int(p["n_states"]), int(p["io_dim"])
            return LTI(_matrix(p["A"], (n, n), w + ".A"), _matrix(p["B"], (n, m), w + ".B"),
                       _matrix(p["C"], (m, n), w + ".C"), _matrix(p["D"], (m, m), w + ".D"))
        if variant == "static_nonlinearity":
            if not isinstance(p, dict) or "kind" not in p:
                raise ConfigError(f"{w}: missing key 'kind'")
            kind = p["kind"]
            if kind not in _KIND_PARAMS:
                raise ConfigError(f"{w}.kind: unknown nonlinearity {kind!r}")
            names = _KIND_PARAMS[kind]
            required = [k for k in names if not (kind == "sector" and k == "shape")]
            _keys(p, ("kind", *required), w, optional=("dim", "shape") if kind == "sector" else ("dim",))
            params = {k: p[k] for k in names if k in p}
            return StaticNonlinearity(kind, params, int(p.get("dim", 1)))
        if variant == "integrator":
            _keys(p, (), w, optional=("dim",))
            return Integrator(int(p.get("dim", 1)))
        if variant == "series":
            _keys(p, ("stages",), w)
            return Series(tuple(operator_from_dict(s, f"{w}.stages[{i}]") for i, s in enumerate(p["stages"])))
        if variant == "parallel_sum":
            _keys(p, ("terms",), w)
            return ParallelSum(tuple(operator_from_dict(s, f"{w}.terms[{i}]") for i, s in enumerate(p["terms"])))
        if variant == "scale":
            _keys(p, ("factor", "inner"), w)
            return Scale(float(p["factor"]), operator_from_dict(p["inner"], f"{w}.inner"))
        if variant == "negate":
            _keys(p, ("inner",), w)
            return Negate(operator_from_dict(p["inner"], f"{w}.inner"))
    except (DomainError, DimensionMismatchError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{w}: {exc}") from None
    raise ConfigError(f"{where}.variant: unknown variant {variant!r}")
