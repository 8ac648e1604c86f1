"""Sampled soft and hard scaled relative graphs.

A cloud stores one point per admitted trajectory pair (soft) or per pair
and truncation horizon (hard), in polar form with the angle in [0, pi]; the
conjugate point is implied. Gains are kept as the pair of norms
``|dy| / |du|`` so that inversion is an exact swap.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.signal
from scipy.spatial import cKDTree

from .errors import ConfigError, DomainError, EmptyCloudError
from .operators import Operator, contains_integrator, evaluate_batch
from .signals import _phase_arrays, snap_index

FAMILIES = ("filtered_noise", "multisine", "steps", "chirp")
INPUT_MODES = ("auto", "windowed", "derivative", "free")


@dataclass(frozen=True)
class ExcitationConfig:
    """Trajectory ensemble used to sample a cloud.

    ``input_mode`` picks how inputs are shaped: ``windowed`` inputs vanish
    after ``support_fraction`` of the horizon (finite-energy stand-ins);
    ``derivative`` inputs are exact discrete derivatives of windowed signals,
    so an integrator returns to zero; ``free`` inputs run over the whole
    horizon. ``auto`` uses ``derivative`` for systems with a pole at the
    origin and ``windowed`` otherwise. Hard sampling adds ``l2e_pairs``
    free-running pairs after the first ``n_pairs``.
    """

    n_pairs: int = 200
    horizon: float = 20.0
    dt: float = 0.01
    families: tuple = FAMILIES
    amplitude: tuple = (0.2, 2.0)
    seed: int = 0
    tail_tolerance: float = 1e-4
    tail_window: float = 0.25
    t_grid: tuple | None = None
    perturbations: tuple = (1e-2, 1e-1, 1.0)
    input_mode: str = "auto"
    l2e_pairs: int = 100
    support_fraction: float = 0.5
    bandwidth: float = 2.0  # rad/s; rectangle-rule phase error grows like dt * bandwidth / 2

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "amplitude", tuple(float(a) for a in self.amplitude))
        object.__setattr__(self, "perturbations", tuple(float(e) for e in self.perturbations))
        if self.t_grid is not None:
            object.__setattr__(self, "t_grid", tuple(float(t) for t in self.t_grid))
        self.validate()

    def validate(self):
        if self.n_pairs < 2:
            raise ConfigError("n_pairs must be at least 2")
        if self.l2e_pairs < 0:
            raise ConfigError("l2e_pairs must be nonnegative")
        if not (self.dt > 0 and self.horizon > self.dt):
            raise ConfigError("need dt > 0 and horizon > dt")
        if not 0 < self.tail_tolerance < 1:
            raise ConfigError("tail_tolerance must lie in (0, 1)")
        if not 0 < self.tail_window < 1:
            raise ConfigError("tail_window must lie in (0, 1)")
        if not 0 < self.support_fraction <= 1 - self.tail_window:
            raise ConfigError("support_fraction must lie in (0, 1 - tail_window]")
        if not self.families or any(f not in FAMILIES for f in self.families):
            raise ConfigError(f"families must be a nonempty subset of {FAMILIES}")
        lo, hi = self.amplitude
        if not 0 < lo <= hi:
            raise ConfigError("amplitude range must satisfy 0 < lo <= hi")
        if self.input_mode not in INPUT_MODES:
            raise ConfigError(f"input_mode must be one of {INPUT_MODES}")
        if any(e <= 0 for e in self.perturbations):
            raise ConfigError("perturbation sizes must be positive")
        if self.bandwidth <= 0:
            raise ConfigError("bandwidth must be positive")
        if self.t_grid is not None:
            g = np.asarray(self.t_grid)
            if g.size == 0 or np.any(np.diff(g) <= 0) or g[0] <= 0 or g[-1] > self.horizon + 1e-12:
                raise ConfigError("t_grid must be nonempty, strictly increasing and within (0, horizon]")

    @property
    def n_samples(self) -> int:
        return int(round(self.horizon / self.dt)) + 1

    def hard_grid(self) -> np.ndarray:
        if self.t_grid is not None:
            return np.asarray(self.t_grid, dtype=float)
        horizon = (self.n_samples - 1) * self.dt
        g = np.geomspace(4 * self.dt, horizon, 16)
        g[-1] = horizon
        return g

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class SrgPoint(NamedTuple):
    magnitude: float
    angle: float
    kind: str
    horizon_T: float | None
    pair_id: int

    @property
    def z(self) -> complex:
        return self.magnitude * complex(math.cos(self.angle), math.sin(self.angle))


@dataclass(frozen=True, eq=False)
class SrgCloud:
    kind: str
    out_norm: np.ndarray
    in_norm: np.ndarray
    angle: np.ndarray
    horizon_T: np.ndarray
    pair_id: np.ndarray
    digest: str = ""
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("soft", "hard"):
            raise DomainError(f"cloud kind must be soft or hard, got {self.kind!r}")
        for name in ("out_norm", "in_norm", "angle", "horizon_T"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        pid = np.asarray(self.pair_id, dtype=np.int64).reshape(-1)
        pid.setflags(write=False)
        object.__setattr__(self, "pair_id", pid)
        n = len(self.angle)
        if any(len(getattr(self, k)) != n for k in ("out_norm", "in_norm", "horizon_T", "pair_id")):
            raise DomainError("cloud arrays must have equal length")

    def __len__(self):
        return len(self.angle)

    @property
    def magnitude(self) -> np.ndarray:
        return self.out_norm / self.in_norm

    @property
    def z(self) -> np.ndarray:
        """Complex points (upper branch; conjugates implied)."""
        m = self.magnitude
        return m * np.cos(self.angle) + 1j * (m * np.sin(self.angle))

    @property
    def points(self) -> list[SrgPoint]:
        mags = self.magnitude
        out = []
        for i in range(len(self)):
            T = None if math.isnan(self.horizon_T[i]) else float(self.horizon_T[i])
            out.append(SrgPoint(float(mags[i]), float(self.angle[i]), self.kind, T, int(self.pair_id[i])))
        return out


def _empty_like(kind):
    return dict(kind=kind, out_norm=[], in_norm=[], angle=[], horizon_T=[], pair_id=[])


# ---------------------------------------------------------------------------
# excitation


def _lowpass(x, wc, dt, passes=4):
    a = math.exp(-wc * dt)
    for _ in range(passes):
        x = scipy.signal.lfilter([1 - a], [1, -a], x)
    return x


def _base(rng, family, t, bandwidth, smooth):
    n = len(t)
    dt = t[1] - t[0]
    if family == "filtered_noise":
        wc = rng.uniform(0.2, bandwidth)
        x = _lowpass(rng.standard_normal(n), wc, dt)
    elif family == "multisine":
        k = int(rng.integers(3, 7))
        w = rng.uniform(0.1, bandwidth, k)
        ph = rng.uniform(0, 2 * np.pi, k)
        x = np.sin(np.outer(t, w) + ph).sum(axis=1)
    elif family == "steps":
        k = int(rng.integers(2, 6))
        switches = np.sort(rng.uniform(0, t[-1], k))
        levels = rng.standard_normal(k + 1)
        x = levels[np.searchsorted(switches, t, side="right")]
        if smooth:
            x = _lowpass(x, bandwidth, dt)
    elif family == "chirp":
        w0, w1 = np.sort(rng.uniform(0.1, bandwidth, 2))
        x = np.sin(w0 * t + (w1 - w0) * t * t / (2 * t[-1]) + rng.uniform(0, 2 * np.pi))
    else:  # pragma: no cover - guarded by config validation
        raise ConfigError(f"unknown family {family!r}")
    rms = math.sqrt(float(np.mean(x * x)))
    return x / rms if rms > 0 else x


def _window(rng, t, support):
    horizon = t[-1]
    end_max = support * horizon
    length = rng.uniform(0.3, 1.0) * end_max
    start = rng.uniform(0.0, end_max - length)
    s = (t - start) / length
    w = np.where((s > 0) & (s < 1), np.sin(np.pi * np.clip(s, 0, 1)) ** 2, 0.0)
    return w


def _draw(rng, cfg, mode, t, channels):
    family = cfg.families[int(rng.integers(len(cfg.families)))]
    amp = rng.uniform(*cfg.amplitude)
    cols = []
    for _ in range(channels):
        b = _base(rng, family, t, cfg.bandwidth, smooth=(mode != "free"))
        if mode != "free":
            b = b * _window(rng, t, cfg.support_fraction)
        cols.append(b)
    return amp * np.stack(cols, axis=1)


def _derivative(w, dt):
    return np.diff(w, axis=0, prepend=np.zeros((1, w.shape[1]))) / dt


def resolve_mode(spec: Operator, cfg: ExcitationConfig) -> str:
    if cfg.input_mode != "auto":
        return cfg.input_mode
    return "derivative" if contains_integrator(spec) else "windowed"


def generate_pairs(cfg: ExcitationConfig, mode: str, channels: int, first_id: int, count: int):
    """Input pairs ``(U1, U2)`` of shape ``(count, n_samples, channels)``.

    Pair ``i`` draws from its own generator seeded by ``(seed, i)``, so a
    pair does not depend on how many others are generated. Pairs cycle
    through independent draws and perturbations ``u2 = u1 + eps * delta``.
    """
    t = np.arange(cfg.n_samples) * cfg.dt
    shape_mode = "windowed" if mode == "derivative" else mode
    U1 = np.empty((count, cfg.n_samples, channels))
    U2 = np.empty_like(U1)
    n_var = 1 + len(cfg.perturbations)
    for j in range(count):
        pid = first_id + j
        rng = np.random.default_rng([cfg.seed, pid])
        a = _draw(rng, cfg, shape_mode, t, channels)
        variant = pid % n_var
        if variant == 0:
            b = _draw(rng, cfg, shape_mode, t, channels)
        else:
            delta = _draw(rng, cfg, shape_mode, t, channels)
            b = a + cfg.perturbations[variant - 1] * delta
        if mode == "derivative":
            a, b = _derivative(a, cfg.dt), _derivative(b, cfg.dt)
        U1[j], U2[j] = a, b
    return U1, U2


# ---------------------------------------------------------------------------
# point computation


def _workers():
    try:
        return max(1, int(os.environ.get("SRG_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _tail_fraction_rows(x, window):
    sq = np.sum(x * x, axis=-1)
    total = np.sum(sq, axis=-1)
    m = int(round(window * x.shape[-2]))
    tail = np.sum(sq[..., x.shape[-2] - m:], axis=-1) if m else np.zeros_like(total)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.where(total > 0, tail / np.where(total > 0, total, 1.0), 0.0)
    return frac


def _pair_points(du, dy, dt, ks):
    """Points of one pair at the truncation indices ``ks`` (None = no truncation)."""
    rows = []
    n = du.shape[0]
    for k in ks:
        if k is None or k >= n - 1:
            a, b = du, dy
        else:
            a = np.array(du)
            a[k + 1:] = 0.0
            b = np.array(dy)
            b[k + 1:] = 0.0
        na = math.sqrt(dt * float(np.sum(a * a)))
        nb = math.sqrt(dt * float(np.sum(b * b)))
        if na == 0.0 or nb == 0.0:
            rows.append(None)
            continue
        th, _ = _phase_arrays(a, b, dt)
        rows.append((nb, na, th))
    return rows


def cloud_from_trajectories(U1, Y1, U2, Y2, dt: float, kind: str, t_grid=None,
                            pair_ids=None, digest: str = "", stats=None) -> SrgCloud:
    """Cloud from explicit trajectory pairs (no admission filtering).

    Soft points use the whole horizon; hard points are taken at every T in
    ``t_grid``. Pairs or horizons with a zero input or output increment are
    skipped.
    """
    U1, Y1, U2, Y2 = (np.asarray(x, dtype=float) for x in (U1, Y1, U2, Y2))
    if U1.ndim == 2:
        U1, Y1, U2, Y2 = (x[None] for x in (U1, Y1, U2, Y2))
    count = U1.shape[0]
    pair_ids = np.arange(count) if pair_ids is None else np.asarray(pair_ids)
    if kind == "hard":
        if t_grid is None or len(t_grid) == 0:
            raise ConfigError("hard clouds need a nonempty T grid")
        Ts = [float(T) for T in t_grid]
        ks = [snap_index(T, dt) for T in Ts]
    else:
        Ts, ks = [math.nan], [None]
    dU, dY = U1 - U2, Y1 - Y2

    def work(i):
        return _pair_points(dU[i], dY[i], dt, ks)

    workers = _workers()
    if workers > 1 and count > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(work, range(count)))
    else:
        results = [work(i) for i in range(count)]

    cols = _empty_like(kind)
    for i, rows in enumerate(results):
        for T, row in zip(Ts, rows):
            if row is None:
                continue
            nb, na, th = row
            cols["out_norm"].append(nb)
            cols["in_norm"].append(na)
            cols["angle"].append(th)
            cols["horizon_T"].append(T)
            cols["pair_id"].append(int(pair_ids[i]))
    return SrgCloud(**cols, digest=digest, stats=dict(stats or {}))


def _stats(tried, admitted, rejected, extra=None):
    s = {"pairs_tried": int(tried), "pairs_admitted": int(admitted),
         "rejected": {k: int(v) for k, v in sorted(rejected.items())}}
    if extra:
        s.update(extra)
    return s


def _empty_error(kind, stats):
    return EmptyCloudError(f"no {kind} SRG points: every pair was rejected ({stats['rejected']})")


def sample_soft_srg(spec: Operator, cfg: ExcitationConfig) -> SrgCloud:
    """Soft SRG sample: one point per admitted pair over the whole horizon.

    A pair is admitted when both input and output increments are nonzero
    and the tail-energy fraction of every input and output trajectory is
    below ``cfg.tail_tolerance``.
    """
    mode = resolve_mode(spec, cfg)
    U1, U2 = generate_pairs(cfg, mode, spec.io_dim, 0, cfg.n_pairs)
    Y = evaluate_batch(spec, np.concatenate([U1, U2]), cfg.dt)
    Y1, Y2 = Y[: cfg.n_pairs], Y[cfg.n_pairs:]

    w, tol = cfg.tail_window, cfg.tail_tolerance
    in_tail = np.maximum(_tail_fraction_rows(U1, w), _tail_fraction_rows(U2, w))
    out_tail = np.maximum(_tail_fraction_rows(Y1, w), _tail_fraction_rows(Y2, w))
    du_zero = ~np.any(U1 != U2, axis=(1, 2))
    dy_zero = ~np.any(Y1 != Y2, axis=(1, 2))
    causes = Counter()
    keep = []
    for i in range(cfg.n_pairs):
        if du_zero[i]:
            causes["zero_input_increment"] += 1
        elif not in_tail[i] < tol:
            causes["input_tail_energy"] += 1
        elif not out_tail[i] < tol:
            causes["output_tail_energy"] += 1
        elif dy_zero[i]:
            causes["zero_output_increment"] += 1
        else:
            keep.append(i)
    stats = _stats(cfg.n_pairs, len(keep), causes, {"input_mode": mode, "seed": cfg.seed})
    if not keep:
        raise _empty_error("soft", stats)
    keep = np.asarray(keep)
    cloud = cloud_from_trajectories(U1[keep], Y1[keep], U2[keep], Y2[keep], cfg.dt, "soft",
                                    pair_ids=keep, digest=cfg.digest(), stats=stats)
    if len(cloud) == 0:
        raise _empty_error("soft", stats)
    return cloud


def sample_hard_srg(spec: Operator, cfg: ExcitationConfig) -> SrgCloud:
    """Hard SRG sample over every pair and every T of the hard grid.

    The first ``n_pairs`` pairs are the same trajectories the soft sampler
    uses (no admission filter is applied); ``l2e_pairs`` free-running pairs
    follow.
    """
    mode = resolve_mode(spec, cfg)
    U1, U2 = generate_pairs(cfg, mode, spec.io_dim, 0, cfg.n_pairs)
    if cfg.l2e_pairs:
        F1, F2 = generate_pairs(replace(cfg, input_mode="free"), "free", spec.io_dim,
                                cfg.n_pairs, cfg.l2e_pairs)
        U1, U2 = np.concatenate([U1, F1]), np.concatenate([U2, F2])
    count = U1.shape[0]
    Y = evaluate_batch(spec, np.concatenate([U1, U2]), cfg.dt)
    Y1, Y2 = Y[:count], Y[count:]
    grid = cfg.hard_grid()
    cloud = cloud_from_trajectories(U1, Y1, U2, Y2, cfg.dt, "hard", t_grid=grid, digest=cfg.digest())
    zero_du = int(np.sum(~np.any(U1 != U2, axis=(1, 2))))
    stats = _stats(count, len(set(cloud.pair_id.tolist())),
                   {"zero_increment": count - len(set(cloud.pair_id.tolist()))},
                   {"input_mode": mode, "seed": cfg.seed, "t_grid_size": int(len(grid)),
                    "pairs_zero_input_increment": zero_du})
    if len(cloud) == 0:
        raise _empty_error("hard", stats)
    return replace(cloud, stats=stats)


# ---------------------------------------------------------------------------
# cloud transforms


def invert_cloud(cloud: SrgCloud) -> SrgCloud:
    """Swap input and output roles: gains invert, angles stay."""
    return replace(cloud, out_norm=cloud.in_norm, in_norm=cloud.out_norm)


def scale_cloud(cloud: SrgCloud, tau: float) -> SrgCloud:
    """Cloud of ``tau * P`` from the cloud of ``P``."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    return replace(cloud, out_norm=cloud.out_norm * tau)


def negate_cloud(cloud: SrgCloud) -> SrgCloud:
    """Cloud of ``-P``: each point ``z`` maps to ``-conj(z)``."""
    return replace(cloud, angle=np.pi - cloud.angle)


def merge_clouds(a: SrgCloud, b: SrgCloud) -> SrgCloud:
    if a.kind != b.kind:
        raise DomainError("cannot merge soft and hard clouds")
    return SrgCloud(a.kind, np.concatenate([a.out_norm, b.out_norm]), np.concatenate([a.in_norm, b.in_norm]),
                    np.concatenate([a.angle, b.angle]), np.concatenate([a.horizon_T, b.horizon_T]),
                    np.concatenate([a.pair_id, b.pair_id]), digest=a.digest, stats=dict(a.stats))


class CloudDistance(NamedTuple):
    value: float
    z1: complex
    z2: complex


def _symmetric(z):
    return np.concatenate([z, np.conj(z)])


def points_min_distance(za: np.ndarray, zb: np.ndarray) -> CloudDistance:
    """Smallest distance between ``{z, conj z}`` over ``za`` and ``{w, conj w}`` over ``zb``."""
    za = np.asarray(za, dtype=complex)
    zb = _symmetric(np.asarray(zb, dtype=complex))
    if za.size == 0 or zb.size == 0:
        raise EmptyCloudError("distance needs two nonempty point sets")
    tree = cKDTree(np.column_stack([zb.real, zb.imag]))
    d, j = tree.query(np.column_stack([za.real, za.imag]))
    i = int(np.argmin(d))
    z1, z2 = complex(za[i]), complex(zb[j[i]])
    return CloudDistance(abs(z1 - z2), z1, z2)


def cloud_min_distance(a: SrgCloud, b: SrgCloud) -> CloudDistance:
    if len(a) == 0 or len(b) == 0:
        raise EmptyCloudError("cloud distance needs nonempty clouds")
    return points_min_distance(a.z, b.z)


# ---------------------------------------------------------------------------
# export


def _num(x):
    return None if (isinstance(x, float) and math.isnan(x)) else x


def cloud_to_json(cloud: SrgCloud) -> dict:
    z = cloud.z
    pts = []
    for i in range(len(cloud)):
        pts.append({"re": float(z[i].real), "im": float(z[i].imag), "kind": cloud.kind,
                    "T": _num(float(cloud.horizon_T[i])), "pair_id": int(cloud.pair_id[i])})
    return {"kind": cloud.kind, "conjugate_symmetric": True, "excitation_digest": cloud.digest,
            "stats": cloud.stats, "points": pts}


def cloud_from_json(d: dict) -> SrgCloud:
    try:
        kind = d["kind"]
        pts = d["points"]
        re = np.array([p["re"] for p in pts], dtype=float)
        im = np.array([p["im"] for p in pts], dtype=float)
        T = np.array([math.nan if p.get("T") is None else p["T"] for p in pts], dtype=float)
        pid = np.array([p["pair_id"] for p in pts], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed cloud JSON: {exc}") from None
    mag = np.hypot(re, im)
    if np.any(mag <= 0):
        raise ConfigError("cloud points must be nonzero")
    ang = np.arctan2(np.abs(im), re)
    return SrgCloud(kind, mag, np.ones_like(mag), ang, T, pid,
                    digest=d.get("excitation_digest", ""), stats=d.get("stats", {}))


def cloud_to_csv(cloud: SrgCloud) -> str:
    lines = ["re,im,kind,T,pair_id"]
    z = cloud.z
    for i in range(len(cloud)):
        T = "" if math.isnan(cloud.horizon_T[i]) else repr(float(cloud.horizon_T[i]))
        lines.append(f"{float(z[i].real)!r},{float(z[i].imag)!r},{cloud.kind},{T},{int(cloud.pair_id[i])}")
    return "\n".join(lines) + "\n"
