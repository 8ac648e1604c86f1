"""Conjugate-symmetric regions of the complex plane.

Regions over-approximate the SRG of a class of systems. All regions are
closed sets, except for documented punctures at the origin, and are
symmetric about the real axis by construction (real centres, bounds on the
real part, symmetric angle bounds).

Distances use closed forms where they exist and otherwise sample the
boundary of a bounded region and measure exact point distances to the
other region, refining the boundary until successive estimates agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigError, DomainError, EmptyCloudError, IndeterminateDistanceError

TOL = 1e-12
INITIAL_VERTICES = 256
MAX_REFINEMENTS = 4
CONVERGENCE = 1e-6


def _tol(z):
    return TOL * np.maximum(1.0, np.abs(z))


def _as_array(z):
    return np.asarray(z, dtype=complex)


def _scalar_or_array(res, z):
    return bool(res) if np.ndim(z) == 0 else res


def _line_params(n, half_length=None):
    """Ordinates for a vertical boundary line.

    Uniform over ``[-L, L]`` when a half length is given, otherwise a
    tangent spacing that reaches far out while staying dense near 0.
    """
    if half_length is not None:
        return np.linspace(-half_length, half_length, n)
    s = np.linspace(-0.5 * np.pi + 1e-6, 0.5 * np.pi - 1e-6, n)
    return np.tan(s)


def _segment_distance(p, a, b):
    """Distance from points ``p`` to segments ``[a, b]`` (broadcast) and nearest points."""
    ab = b - a
    L2 = np.abs(ab) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(L2 > 0, ((p - a) * np.conj(ab)).real / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    q = a + t * ab
    return np.abs(p - q), q


def _polyline_distance(p, polylines, k=8):
    """Exact distance from points to a set of polylines using k-nearest vertex candidates."""
    p = _as_array(p).reshape(-1)
    segs_a, segs_b = [], []
    for pl in polylines:
        pl = _as_array(pl)
        if len(pl) == 1:
            segs_a.append(pl)
            segs_b.append(pl)
        else:
            segs_a.append(pl[:-1])
            segs_b.append(pl[1:])
    A = np.concatenate(segs_a)
    B = np.concatenate(segs_b)
    mids = np.column_stack([(0.5 * (A + B)).real, (0.5 * (A + B)).imag])
    tree = cKDTree(mids)
    k = min(k, len(A))
    _, idx = tree.query(np.column_stack([p.real, p.imag]), k=k)
    idx = np.asarray(idx).reshape(len(p), k)
    d, q = _segment_distance(p[:, None], A[idx], B[idx])
    j = np.argmin(d, axis=1)
    rows = np.arange(len(p))
    return d[rows, j], q[rows, j]


class Region:
    """Base class; subclasses implement membership and exact point distances."""

    bounded: bool = True

    @property
    def extended(self) -> bool:
        """True when the region contains the point at infinity."""
        return False

    def contains(self, z):
        raise NotImplementedError

    def point_distance(self, z, n: int = INITIAL_VERTICES):
        """Distances from points ``z`` to the region and the nearest region points."""
        raise NotImplementedError

    def boundary(self, n: int = INITIAL_VERTICES, half_length=None) -> list:
        """Boundary polylines (both conjugate branches)."""
        raise NotImplementedError

    @property
    def max_modulus(self) -> float:
        raise NotImplementedError

    @property
    def min_modulus(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# primitive regions


@dataclass(frozen=True)
class Disk(Region):
    center: float
    radius: float
    punctured: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.center) and math.isfinite(self.radius)) or self.radius < 0:
            raise DomainError("disk needs a finite real centre and a nonnegative radius")

    def contains(self, z):
        z = _as_array(z)
        res = np.abs(z - self.center) <= self.radius + _tol(z)
        if self.punctured:
            res = res & (z != 0)
        return _scalar_or_array(res, z)

    def point_distance(self, z, n=INITIAL_VERTICES):
        z = _as_array(z)
        off = z - self.center
        r = np.abs(off)
        d = np.maximum(0.0, r - self.radius)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(r > 0, off / np.where(r > 0, r, 1.0), 1.0)
        q = np.where(d > 0, self.center + self.radius * u, z)
        return d, q

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        th = np.linspace(0, 2 * np.pi, n + 1)
        return [self.center + self.radius * np.exp(1j * th)]

    @property
    def max_modulus(self):
        return abs(self.center) + self.radius

    @property
    def min_modulus(self):
        return max(0.0, abs(self.center) - self.radius)

    def to_dict(self):
        return {"variant": "disk", "center": self.center, "radius": self.radius, "punctured": self.punctured}


@dataclass(frozen=True)
class HalfPlane(Region):
    """``Re z >= c`` (side ``ge``) or ``Re z <= c`` (side ``le``)."""

    c: float
    side: str = "ge"
    punctured: bool = False
    bounded = False

    def __post_init__(self):
        if self.side not in ("ge", "le"):
            raise DomainError("half-plane side must be 'ge' or 'le'")
        if not math.isfinite(self.c):
            raise DomainError("half-plane offset must be finite")

    def _gap(self, x):
        return self.c - x if self.side == "ge" else x - self.c

    def contains(self, z):
        z = _as_array(z)
        res = self._gap(z.real) <= _tol(z)
        if self.punctured:
            res = res & (z != 0)
        return _scalar_or_array(res, z)

    def point_distance(self, z, n=INITIAL_VERTICES):
        z = _as_array(z)
        d = np.maximum(0.0, self._gap(z.real))
        q = np.where(d > 0, self.c + 1j * z.imag, z)
        return d, q

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        return [self.c + 1j * _line_params(n, half_length)]

    @property
    def max_modulus(self):
        return math.inf

    @property
    def min_modulus(self):
        return max(0.0, self.c) if self.side == "ge" else max(0.0, -self.c)

    def to_dict(self):
        return {"variant": "half_plane", "c": self.c, "side": self.side, "punctured": self.punctured}


@dataclass(frozen=True)
class SectorDisk(Region):
    """Truncated disk sector ``{|arg z| <= acos(2 sqrt(delta eps)), |z| <= 1/eps, Re z >= delta}``."""

    delta: float
    epsilon: float

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not self.epsilon > 0:
            raise DomainError(f"epsilon must be positive, got {self.epsilon}")
        if 2 * math.sqrt(self.delta * self.epsilon) > 1:
            raise DomainError(
                f"need 2*sqrt(delta*epsilon) <= 1, got {2 * math.sqrt(self.delta * self.epsilon):.6g}")

    @property
    def angle_bound(self) -> float:
        return math.acos(min(1.0, 2 * math.sqrt(self.delta * self.epsilon)))

    @property
    def radius(self) -> float:
        return 1.0 / self.epsilon

    def contains(self, z):
        z = _as_array(z)
        tol = _tol(z)
        ang = np.abs(np.angle(z))
        res = ((ang <= self.angle_bound + TOL) & (np.abs(z) <= self.radius + tol)
               & (z.real >= self.delta - tol) & (z != 0))
        return _scalar_or_array(res, z)

    def _corners(self):
        phi = self.angle_bound
        cut = self.delta * math.tan(phi)
        return (complex(self.delta, -cut), complex(self.delta, cut),
                self.radius * complex(math.cos(phi), math.sin(phi)))

    def point_distance(self, z, n=INITIAL_VERTICES):
        z = _as_array(z)
        shape = z.shape
        p = z.reshape(-1)
        lo, hi, top = self._corners()
        phi = self.angle_bound
        cands = [
            _segment_distance(p, lo, hi),
            _segment_distance(p, hi, top),
            _segment_distance(p, np.conj(hi), np.conj(top)),
        ]
        # arc |z| = R, |arg z| <= phi
        ang = np.angle(p)
        on_arc = np.abs(ang) <= phi
        arc_q = np.where(on_arc, self.radius * np.exp(1j * np.clip(ang, -phi, phi)), top)
        arc_q = np.where(~on_arc & (ang < 0), np.conj(top), arc_q)
        cands.append((np.abs(p - arc_q), arc_q))
        d = np.stack([c[0] for c in cands])
        q = np.stack([c[1] for c in cands])
        j = np.argmin(d, axis=0)
        rows = np.arange(len(p))
        dist, near = d[j, rows], q[j, rows]
        inside = self.contains(p) if len(p) else np.zeros(0, bool)
        dist = np.where(inside, 0.0, dist)
        near = np.where(inside, p, near)
        return dist.reshape(shape), near.reshape(shape)

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        lo, hi, top = self._corners()
        phi = self.angle_bound
        s = np.linspace(0, 1, n)
        cut = lo + s * (hi - lo)
        ray_up = hi + s * (top - hi)
        arc = self.radius * np.exp(1j * np.linspace(phi, -phi, n))
        ray_down = np.conj(top) + s * (np.conj(hi) - np.conj(top))
        return [np.concatenate([cut, ray_up[1:], arc[1:], ray_down[1:]])]

    @property
    def max_modulus(self):
        return self.radius

    @property
    def min_modulus(self):
        return self.delta

    def to_dict(self):
        return {"variant": "sector_disk_D", "delta": self.delta, "epsilon": self.epsilon}


def make_sector_disk_D(delta: float, epsilon: float) -> SectorDisk:
    return SectorDisk(float(delta), float(epsilon))


@dataclass(frozen=True)
class ImaginaryAxis(Region):
    punctured: bool = True
    bounded = False

    def contains(self, z):
        z = _as_array(z)
        res = np.abs(z.real) <= _tol(z)
        if self.punctured:
            res = res & (z != 0)
        return _scalar_or_array(res, z)

    def point_distance(self, z, n=INITIAL_VERTICES):
        z = _as_array(z)
        return np.abs(z.real), 1j * z.imag

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        return [1j * _line_params(n, half_length)]

    @property
    def max_modulus(self):
        return math.inf

    @property
    def min_modulus(self):
        return 0.0

    def to_dict(self):
        return {"variant": "imaginary_axis", "punctured": self.punctured}


@dataclass(frozen=True, eq=False)
class HullOfCloud(Region):
    """Union of closed disks of radius ``pad`` around sample points and their conjugates."""

    points: np.ndarray
    pad: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex).reshape(-1)
        if pts.size == 0:
            raise EmptyCloudError("hull of an empty cloud")
        if self.pad < 0:
            raise DomainError("pad must be nonnegative")
        pts = np.concatenate([pts, np.conj(pts)])
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_tree", cKDTree(np.column_stack([pts.real, pts.imag])))

    @classmethod
    def from_cloud(cls, cloud, pad=0.0):
        return cls(cloud.z, pad)

    def _nearest(self, z):
        z = _as_array(z)
        flat = z.reshape(-1)
        d, j = self._tree.query(np.column_stack([flat.real, flat.imag]))
        return d.reshape(z.shape), self.points[j].reshape(z.shape)

    def contains(self, z):
        z = _as_array(z)
        d, _ = self._nearest(z)
        return _scalar_or_array(d <= self.pad + _tol(z), z)

    def point_distance(self, z, n=INITIAL_VERTICES):
        z = _as_array(z)
        d, p = self._nearest(z)
        dist = np.maximum(0.0, d - self.pad)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(d > 0, (z - p) / np.where(d > 0, d, 1.0), 0.0)
        q = np.where(dist > 0, p + self.pad * u, z)
        return dist, q

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        if self.pad == 0:
            return [np.array([p]) for p in self.points]
        th = np.linspace(0, 2 * np.pi, max(8, min(n, 64)) + 1)
        return [p + self.pad * np.exp(1j * th) for p in self.points]

    @property
    def max_modulus(self):
        return float(np.max(np.abs(self.points))) + self.pad

    @property
    def min_modulus(self):
        return max(0.0, float(np.min(np.abs(self.points))) - self.pad)

    def to_dict(self):
        half = self.points[: len(self.points) // 2]
        return {"variant": "hull_of_cloud", "points": [[float(p.real), float(p.imag)] for p in half],
                "pad": self.pad}


# ---------------------------------------------------------------------------
# lazy transforms


@dataclass(frozen=True)
class Scaled(Region):
    tau: float
    inner: Region

    @property
    def bounded(self):
        return self.inner.bounded

    @property
    def extended(self):
        return self.inner.extended

    def contains(self, z):
        return self.inner.contains(_as_array(z) / self.tau) if np.ndim(z) else self.inner.contains(z / self.tau)

    def point_distance(self, z, n=INITIAL_VERTICES):
        d, q = self.inner.point_distance(_as_array(z) / self.tau, n)
        return self.tau * d, self.tau * q

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        hl = None if half_length is None else half_length / self.tau
        return [self.tau * b for b in self.inner.boundary(n, hl)]

    @property
    def max_modulus(self):
        return self.tau * self.inner.max_modulus

    @property
    def min_modulus(self):
        return self.tau * self.inner.min_modulus

    def to_dict(self):
        return {"variant": "scaled", "tau": self.tau, "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Negated(Region):
    inner: Region

    @property
    def bounded(self):
        return self.inner.bounded

    @property
    def extended(self):
        return self.inner.extended

    def contains(self, z):
        return self.inner.contains(-_as_array(z)) if np.ndim(z) else self.inner.contains(-z)

    def point_distance(self, z, n=INITIAL_VERTICES):
        d, q = self.inner.point_distance(-_as_array(z), n)
        return d, -q

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        return [-b for b in self.inner.boundary(n, half_length)]

    @property
    def max_modulus(self):
        return self.inner.max_modulus

    @property
    def min_modulus(self):
        return self.inner.min_modulus

    def to_dict(self):
        return {"variant": "negated", "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Inverted(Region):
    """``{1/z : z in inner, z != 0}``; contains infinity when ``inner`` reaches 0."""

    inner: Region

    @property
    def extended(self):
        return self.inner.extended or self.inner.min_modulus == 0.0

    @property
    def bounded(self):
        return not self.extended

    def contains(self, z):
        z = _as_array(z)
        nz = z != 0
        w = np.where(nz, 1.0 / np.where(nz, z, 1.0), 0.0)
        res = nz & self.inner.contains(w)
        return _scalar_or_array(res, z)

    def point_distance(self, z, n=INITIAL_VERTICES):
        if self.extended:
            raise IndeterminateDistanceError("distance to a region containing infinity is undefined")
        z = _as_array(z)
        flat = z.reshape(-1)
        d, q = _polyline_distance(flat, self.boundary(n))
        inside = np.asarray(self.contains(flat), dtype=bool)
        d = np.where(inside, 0.0, d)
        q = np.where(inside, flat, q)
        return d.reshape(z.shape), q.reshape(z.shape)

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        out = []
        for b in self.inner.boundary(n, None):
            b = b[b != 0]
            out.append(1.0 / b)
        return out

    @property
    def max_modulus(self):
        m = self.inner.min_modulus
        return math.inf if m == 0 else 1.0 / m

    @property
    def min_modulus(self):
        m = self.inner.max_modulus
        return 0.0 if math.isinf(m) else 1.0 / m

    def to_dict(self):
        return {"variant": "inverted", "inner": self.inner.to_dict()}


@dataclass(frozen=True)
class Union(Region):
    members: tuple

    def __post_init__(self):
        if not self.members:
            raise DomainError("union needs at least one member")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def bounded(self):
        return all(m.bounded for m in self.members)

    @property
    def extended(self):
        return any(m.extended for m in self.members)

    def contains(self, z):
        res = self.members[0].contains(z)
        for m in self.members[1:]:
            res = res | m.contains(z)
        return res

    def point_distance(self, z, n=INITIAL_VERTICES):
        results = [m.point_distance(z, n) for m in self.members]
        d = np.stack([np.asarray(r[0]) for r in results])
        q = np.stack([np.asarray(r[1]) for r in results])
        j = np.argmin(d, axis=0)
        return np.take_along_axis(d, j[None], 0)[0], np.take_along_axis(q, j[None], 0)[0]

    def boundary(self, n=INITIAL_VERTICES, half_length=None):
        return [b for m in self.members for b in m.boundary(n, half_length)]

    @property
    def max_modulus(self):
        return max(m.max_modulus for m in self.members)

    @property
    def min_modulus(self):
        return min(m.min_modulus for m in self.members)

    def to_dict(self):
        return {"variant": "union", "members": [m.to_dict() for m in self.members]}


# ---------------------------------------------------------------------------
# transforms with analytic simplification


def scale_region(region: Region, tau: float) -> Region:
    """Region ``tau * R``; ``z`` belongs to it iff ``z / tau`` belongs to ``R``."""
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau}")
    tau = float(tau)
    if isinstance(region, Disk):
        return Disk(tau * region.center, tau * region.radius, region.punctured)
    if isinstance(region, HalfPlane):
        return HalfPlane(tau * region.c, region.side, region.punctured)
    if isinstance(region, SectorDisk):
        return SectorDisk(tau * region.delta, region.epsilon / tau)
    if isinstance(region, ImaginaryAxis):
        return region
    if isinstance(region, HullOfCloud):
        half = region.points[: len(region.points) // 2]
        return HullOfCloud(tau * half, tau * region.pad)
    if isinstance(region, Scaled):
        return scale_region(region.inner, region.tau * tau)
    if isinstance(region, Negated):
        return Negated(scale_region(region.inner, tau))
    if isinstance(region, Union):
        return Union(tuple(scale_region(m, tau) for m in region.members))
    return Scaled(tau, region)


def invert_region(region: Region) -> Region:
    """Region ``{1/z}``; analytic for half-planes, disks and the imaginary axis."""
    if isinstance(region, Inverted):
        return region.inner
    if isinstance(region, HalfPlane):
        c = region.c
        if c == 0:
            return HalfPlane(0.0, region.side, punctured=True)
        if (region.side == "ge") == (c > 0):
            return Disk(1 / (2 * c), 1 / (2 * abs(c)), punctured=True)
        return Inverted(region)
    if isinstance(region, Disk):
        c, r = region.center, region.radius
        if r == 0:
            return Disk(1 / c, 0.0) if c != 0 else Inverted(region)
        if abs(c) > r:
            den = c * c - r * r
            return Disk(c / den, r / den)
        if abs(c) == r:
            return HalfPlane(1 / (2 * c), "ge" if c > 0 else "le", punctured=True)
        return Inverted(region)
    if isinstance(region, ImaginaryAxis):
        return ImaginaryAxis(punctured=True)
    if isinstance(region, Scaled):
        return scale_region(invert_region(region.inner), 1.0 / region.tau)
    if isinstance(region, Negated):
        return negate_region(invert_region(region.inner))
    if isinstance(region, Union):
        return Union(tuple(invert_region(m) for m in region.members))
    if isinstance(region, HullOfCloud) and region.pad == 0:
        half = region.points[: len(region.points) // 2]
        return HullOfCloud(np.conj(1.0 / half))
    return Inverted(region)


def negate_region(region: Region) -> Region:
    """Region ``{-z}`` (equivalently ``{-conj z}`` by symmetry)."""
    if isinstance(region, Disk):
        return Disk(-region.center, region.radius, region.punctured)
    if isinstance(region, HalfPlane):
        return HalfPlane(-region.c, "le" if region.side == "ge" else "ge", region.punctured)
    if isinstance(region, ImaginaryAxis):
        return region
    if isinstance(region, Negated):
        return region.inner
    if isinstance(region, Scaled):
        return Scaled(region.tau, negate_region(region.inner))
    if isinstance(region, Inverted):
        return Inverted(negate_region(region.inner))
    if isinstance(region, HullOfCloud):
        half = region.points[: len(region.points) // 2]
        return HullOfCloud(-np.conj(half), region.pad)
    if isinstance(region, Union):
        return Union(tuple(negate_region(m) for m in region.members))
    return Negated(region)


# ---------------------------------------------------------------------------
# distance


class DistanceResult(NamedTuple):
    value: float
    z1: complex
    z2: complex
    method: str
    refinement: int
    converged: bool = True


def _analytic(a: Region, b: Region):
    """Closed-form distance for supported pairs, else None."""
    if isinstance(a, Disk) and isinstance(b, Disk):
        gap = b.center - a.center
        dist = abs(gap)
        s = 1.0 if gap >= 0 else -1.0
        d = dist - a.radius - b.radius
        if d <= 0:
            z = complex(a.center + s * min(a.radius, dist))
            return 0.0, z, z
        return d, complex(a.center + s * a.radius), complex(b.center - s * b.radius)
    if isinstance(a, Disk) and isinstance(b, HalfPlane):
        x0, r, c = a.center, a.radius, b.c
        if b.side == "ge":
            if x0 + r >= c:
                z = complex(max(x0, c))
                return 0.0, z, z
            return c - (x0 + r), complex(x0 + r), complex(c)
        if x0 - r <= c:
            z = complex(min(x0, c))
            return 0.0, z, z
        return (x0 - r) - c, complex(x0 - r), complex(c)
    if isinstance(a, HalfPlane) and isinstance(b, HalfPlane):
        if a.side == b.side:
            z = complex(max(a.c, b.c) if a.side == "ge" else min(a.c, b.c))
            return 0.0, z, z
        ge, le = (a, b) if a.side == "ge" else (b, a)
        if ge.c <= le.c:
            z = complex(ge.c)
            return 0.0, z, z
        zg, zl = complex(ge.c), complex(le.c)
        return ge.c - le.c, (zg if a is ge else zl), (zl if a is ge else zg)
    if isinstance(a, SectorDisk) and isinstance(b, HalfPlane):
        if b.side == "le":
            if a.delta <= b.c:
                z = complex(a.delta)
                return 0.0, z, z
            return a.delta - b.c, complex(a.delta), complex(b.c)
        if a.radius >= b.c:
            z = complex(max(a.delta, b.c))
            return 0.0, z, z
        return b.c - a.radius, complex(a.radius), complex(b.c)
    if isinstance(a, ImaginaryAxis) and isinstance(b, HalfPlane):
        if b._gap(0.0) <= 0:
            return 0.0, 1j, 1j
        return abs(b.c), 0j, complex(b.c)
    if isinstance(a, ImaginaryAxis) and isinstance(b, Disk):
        if abs(b.center) <= b.radius:
            z = 1j * math.sqrt(b.radius ** 2 - b.center ** 2)
            return 0.0, z, z
        s = 1.0 if b.center > 0 else -1.0
        return abs(b.center) - b.radius, 0j, complex(b.center - s * b.radius)
    if isinstance(a, ImaginaryAxis) and isinstance(b, ImaginaryAxis):
        return 0.0, 1j, 1j
    return None


def _from_points(points: np.ndarray, pad: float, other: Region, n: int):
    d, q = other.point_distance(points, n)
    d = np.asarray(d).reshape(-1)
    i = int(np.argmin(d))
    p = complex(points.reshape(-1)[i])
    q = complex(np.asarray(q).reshape(-1)[i])
    if d[i] <= pad:
        return 0.0, q, q
    # witness on the padded disk around p
    z1 = p + pad * (q - p) / abs(q - p) if pad > 0 else p
    return float(d[i] - pad), z1, q


def sampled_distance(a: Region, b: Region, n: int = INITIAL_VERTICES):
    """One boundary-sampling estimate at ``n`` vertices per boundary piece.

    Uses exact point distances from boundary vertices of each bounded region
    to the other region; intersection is detected by membership of boundary
    vertices.
    """
    best = None
    extent = max((r.max_modulus for r in (a, b) if r.bounded), default=math.inf)
    if math.isinf(extent):
        raise IndeterminateDistanceError("both regions are unbounded and no closed form is available")
    half_length = 2 * extent + 2
    for first, second, flip in ((a, b, False), (b, a, True)):
        verts = np.concatenate(first.boundary(n, None if first.bounded else half_length))
        verts = verts[np.isfinite(verts)]
        inside = np.asarray(second.contains(verts), dtype=bool)
        if np.any(inside):
            z = complex(verts[int(np.argmax(inside))])
            return 0.0, z, z
        if not first.bounded:
            continue
        d, z1, z2 = _from_points(verts, 0.0, second, n)
        if flip:
            z1, z2 = z2, z1
        if best is None or d < best[0]:
            best = (d, z1, z2)
    return best


def region_distance(a: Region, b: Region, refinement: int = MAX_REFINEMENTS) -> DistanceResult:
    """Infimum of ``|z1 - z2|`` over ``z1`` in ``a`` and ``z2`` in ``b`` (with conjugates)."""
    if a.extended or b.extended:
        raise IndeterminateDistanceError("distance involving a region that contains infinity")
    if isinstance(a, Union) or isinstance(b, Union):
        flip = not isinstance(a, Union)
        u, other = (b, a) if flip else (a, b)
        results = [region_distance(m, other, refinement) for m in u.members]
        r = min(results, key=lambda r: r.value)
        return r._replace(z1=r.z2, z2=r.z1) if flip else r
    if isinstance(a, HullOfCloud):
        d, z1, z2 = _from_points(a.points, a.pad, b, INITIAL_VERTICES * 4 ** refinement)
        return DistanceResult(d, z1, z2, "analytic", 0)
    if isinstance(b, HullOfCloud):
        d, z2, z1 = _from_points(b.points, b.pad, a, INITIAL_VERTICES * 4 ** refinement)
        return DistanceResult(d, z1, z2, "analytic", 0)
    res = _analytic(a, b)
    if res is not None:
        return DistanceResult(float(res[0]), res[1], res[2], "analytic", 0)
    res = _analytic(b, a)
    if res is not None:
        return DistanceResult(float(res[0]), res[2], res[1], "analytic", 0)
    prev = None
    for level in range(refinement + 1):
        d, z1, z2 = sampled_distance(a, b, INITIAL_VERTICES * 4 ** level)
        if prev is not None and abs(d - prev) < CONVERGENCE:
            return DistanceResult(float(d), z1, z2, "sampled-boundary", level)
        prev = d
    if not (a.bounded or b.bounded):  # pragma: no cover - sampled_distance raises first
        raise IndeterminateDistanceError("sampling did not converge for unbounded regions")
    return DistanceResult(float(d), z1, z2, "sampled-boundary", refinement, converged=False)


class ContainmentReport(NamedTuple):
    fraction_inside: float
    worst_violation_distance: float
    violating_pair_ids: tuple


def containment_report(cloud, region: Region) -> ContainmentReport:
    """Share of cloud points inside ``region`` and the worst outside distance."""
    if len(cloud) == 0:
        raise EmptyCloudError("containment report of an empty cloud")
    z = cloud.z
    inside = np.asarray(region.contains(z), dtype=bool)
    worst = 0.0
    bad = ()
    if not np.all(inside):
        out = z[~inside]
        d, _ = region.point_distance(out)
        worst = float(np.max(d))
        bad = tuple(sorted(set(int(p) for p in cloud.pair_id[~inside])))
    return ContainmentReport(float(np.mean(inside)), worst, bad)


# ---------------------------------------------------------------------------
# JSON


def region_from_dict(d: dict, where: str = "region") -> Region:
    if not isinstance(d, dict) or "variant" not in d:
        raise ConfigError(f"{where}: expected an object with a 'variant' key")
    v = d["variant"]
    fields = {
        "disk": ({"center", "radius"}, {"punctured"}),
        "half_plane": ({"c", "side"}, {"punctured"}),
        "sector_disk_D": ({"delta", "epsilon"}, set()),
        "imaginary_axis": (set(), {"punctured"}),
        "scaled": ({"tau", "inner"}, set()),
        "inverted": ({"inner"}, set()),
        "negated": ({"inner"}, set()),
        "hull_of_cloud": ({"points"}, {"pad"}),
        "union": ({"members"}, set()),
    }
    if v not in fields:
        raise ConfigError(f"{where}.variant: unknown region variant {v!r}")
    req, opt = fields[v]
    keys = set(d) - {"variant"}
    if keys - req - opt:
        raise ConfigError(f"{where}: unknown keys {sorted(keys - req - opt)}")
    if req - keys:
        raise ConfigError(f"{where}: missing keys {sorted(req - keys)}")
    try:
        if v == "disk":
            return Disk(float(d["center"]), float(d["radius"]), bool(d.get("punctured", False)))
        if v == "half_plane":
            return HalfPlane(float(d["c"]), d["side"], bool(d.get("punctured", False)))
        if v == "sector_disk_D":
            return SectorDisk(float(d["delta"]), float(d["epsilon"]))
        if v == "imaginary_axis":
            return ImaginaryAxis(bool(d.get("punctured", True)))
        if v == "scaled":
            return Scaled(float(d["tau"]), region_from_dict(d["inner"], where + ".inner"))
        if v == "inverted":
            return Inverted(region_from_dict(d["inner"], where + ".inner"))
        if v == "negated":
            return Negated(region_from_dict(d["inner"], where + ".inner"))
        if v == "hull_of_cloud":
            pts = np.array([complex(p[0], p[1]) for p in d["points"]])
            return HullOfCloud(pts, float(d.get("pad", 0.0)))
        return Union(tuple(region_from_dict(m, f"{where}.members[{i}]") for i, m in enumerate(d["members"])))
    except (DomainError, EmptyCloudError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: malformed region ({exc})") from None
