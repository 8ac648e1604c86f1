"""Feedback stability certificates from graph separation.

Evidence for each block is either a region (a sound over-approximation
supplied by the user or built from system-class indices) or a sampled
cloud (an inner approximation, so separation of clouds is only evidence).

All certificates concern the loop ``P # C`` with the second disturbance
set to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import jsonschema
import numpy as np

from .errors import ConfigError, DomainError, IndeterminateDistanceError
from .operators import Operator, has_direct_feedthrough, is_stable
from .regions import (HalfPlane, Region, containment_report, invert_region, make_sector_disk_D,
                      negate_region, region_distance, scale_region)
from .sampler import SrgCloud, cloud_min_distance, negate_cloud, scale_cloud

SCHEMA_VERSION = "1.0"
MARGIN_FLOOR = 1e-6
STATUSES = ("satisfied", "asserted_by_user", "violated", "unchecked")
ACCEPTED = ("satisfied", "asserted_by_user")

CAVEAT_CLOUDS = "inner-approximation evidence"
CAVEAT_D2 = "applies to the loop with the second disturbance fixed to zero"
CAVEAT_ONE_SIDED = ("P stability not established: hard separation alone still gives stable maps "
                    "d1 -> u1 and d1 -> y2")

# premises per theorem
REQUIRED = {
    "hard_separation": ("well_posed", "P_stable", "d2_zero"),
    "soft_separation": ("well_posed", "P_stable", "C_stable", "d2_zero", "tau_wellposed"),
    "passivity_corollary": ("well_posed", "P_stable", "d2_zero", "P_strictly_passive", "negC_passive"),
}


@dataclass(frozen=True)
class Assumption:
    name: str
    required_by: tuple
    status: str = "unchecked"
    note: str = ""

    def __post_init__(self):
        if self.status not in STATUSES:
            raise DomainError(f"assumption status must be one of {STATUSES}, got {self.status!r}")


@dataclass(frozen=True)
class AssumptionChecklist:
    items: tuple

    @classmethod
    def blank(cls, theorem: str) -> "AssumptionChecklist":
        """Every premise of ``theorem`` unchecked, except the structural d2 = 0."""
        if theorem not in REQUIRED:
            raise DomainError(f"unknown theorem {theorem!r}")
        items = []
        for name in REQUIRED[theorem]:
            users = tuple(t for t, req in REQUIRED.items() if name in req)
            if name == "d2_zero":
                items.append(Assumption(name, users, "satisfied", "structural: the solver fixes d2 = 0"))
            else:
                items.append(Assumption(name, users))
        return cls(tuple(items))

    def get(self, name: str) -> Assumption | None:
        for a in self.items:
            if a.name == name:
                return a
        return None

    def set(self, name: str, status: str, note: str = "") -> "AssumptionChecklist":
        users = tuple(t for t, req in REQUIRED.items() if name in req) or ("user",)
        new = Assumption(name, users, status, note)
        items = [new if a.name == name else a for a in self.items]
        if self.get(name) is None:
            items.append(new)
        return AssumptionChecklist(tuple(items))

    def update(self, statuses: dict) -> "AssumptionChecklist":
        out = self
        for name, status in statuses.items():
            out = out.set(name, status, "user override" if status == "asserted_by_user" else "")
        return out

    def blocking(self, theorem: str) -> list[str]:
        """Required premises whose status does not allow certification."""
        bad = []
        for name in REQUIRED[theorem]:
            a = self.get(name)
            if a is None or a.status not in ACCEPTED:
                bad.append(name)
        return bad

    def to_json(self) -> list:
        return [{"name": a.name, "required_by": list(a.required_by), "status": a.status, "note": a.note}
                for a in self.items]


def checklist_from_specs(P: Operator, C: Operator, theorem: str, probe: bool = False,
                         tau_grid=(0.25, 0.5, 0.75, 1.0), seed: int = 0) -> AssumptionChecklist:
    """Checklist filled from structural facts about ``P`` and ``C``.

    With ``probe`` the well-posedness items are backed by solver runs when
    no structural argument applies.
    """
    cl = AssumptionChecklist.blank(theorem)
    explicit = not (has_direct_feedthrough(P) and has_direct_feedthrough(C))
    names = {a.name for a in cl.items}
    if "P_stable" in names:
        cl = cl.set("P_stable", *(("satisfied", "structural check") if is_stable(P)
                                  else ("violated", "structural check: P has unbounded incremental gain")))
    if "C_stable" in names:
        cl = cl.set("C_stable", *(("satisfied", "structural check") if is_stable(C)
                                  else ("violated", "structural check: C has unbounded incremental gain")))
    if explicit:
        note = "structural: one block has no direct feedthrough, every step is explicit"
        cl = cl.set("well_posed", "satisfied", note)
        if "tau_wellposed" in names:
            cl = cl.set("tau_wellposed", "satisfied", note)
    elif probe:
        from .feedback import wellposedness_probe

        r = wellposedness_probe(P, C, [1.0], seed=seed)[0]
        cl = cl.set("well_posed", "satisfied" if r.passed else "unchecked",
                    f"per-step solver converged on {r.trials} random trials" if r.passed
                    else f"solver failure at step {r.first_failure_step}")
        if "tau_wellposed" in names:
            rs = wellposedness_probe(P, C, tau_grid, seed=seed)
            failed = [x.tau for x in rs if not x.passed]
            cl = cl.set("tau_wellposed", "unchecked",
                        f"solver failure at tau {failed}" if failed else
                        f"solver converged on tau grid {list(tau_grid)}; all tau only by assertion")
    return cl


# ---------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class Certificate:
    verdict: str
    theorem: str
    margin: float
    margin_kind: str
    evidence_kind: str
    assumptions: AssumptionChecklist
    witnesses: tuple | None = None
    caveats: tuple = ()
    reason: str = ""
    margin_floor: float = MARGIN_FLOOR
    tau_grid: tuple | None = None
    tau_margins: tuple | None = None
    worst_tau: float | None = None
    continuum: str | None = None
    continuum_detail: dict = field(default_factory=dict)

    @property
    def grade(self) -> str:
        return "sound" if self.evidence_kind == "analytic_regions" else "evidence"

    def to_json(self) -> dict:
        w = None
        if self.witnesses is not None:
            z1, z2 = self.witnesses
            w = {"z1": [z1.real, z1.imag], "z2": [z2.real, z2.imag]}
        return {
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict,
            "theorem": self.theorem,
            "margin": self.margin,
            "margin_kind": self.margin_kind,
            "margin_floor": self.margin_floor,
            "evidence_kind": self.evidence_kind,
            "grade": self.grade,
            "reason": self.reason,
            "tau_grid": None if self.tau_grid is None else list(self.tau_grid),
            "tau_margins": None if self.tau_margins is None else list(self.tau_margins),
            "worst_tau": self.worst_tau,
            "continuum": self.continuum,
            "continuum_detail": self.continuum_detail,
            "assumptions": self.assumptions.to_json(),
            "witnesses": w,
            "caveats": list(self.caveats),
        }


_POINT = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_NUMS = {"type": ["array", "null"], "items": {"type": "number"}}
CERTIFICATE_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "verdict", "theorem", "margin", "margin_kind", "margin_floor",
                 "evidence_kind", "grade", "reason", "tau_grid", "tau_margins", "worst_tau", "continuum",
                 "continuum_detail", "assumptions", "witnesses", "caveats"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "verdict": {"enum": ["certified", "not_certified", "indeterminate"]},
        "theorem": {"enum": list(REQUIRED)},
        "margin": {"type": "number", "minimum": 0},
        "margin_kind": {"enum": ["sm_e", "sm"]},
        "margin_floor": {"type": "number", "exclusiveMinimum": 0},
        "evidence_kind": {"enum": ["analytic_regions", "sampled_clouds", "mixed"]},
        "grade": {"enum": ["sound", "evidence"]},
        "reason": {"type": "string"},
        "tau_grid": _NUMS,
        "tau_margins": _NUMS,
        "worst_tau": {"type": ["number", "null"]},
        "continuum": {"enum": [None, "covered", "not_covered", "indeterminate", "not_applicable"]},
        "continuum_detail": {"type": "object"},
        "assumptions": {"type": "array", "items": {
            "type": "object", "additionalProperties": False,
            "required": ["name", "required_by", "status", "note"],
            "properties": {"name": {"type": "string"},
                           "required_by": {"type": "array", "items": {"type": "string"}},
                           "status": {"enum": list(STATUSES)}, "note": {"type": "string"}}}},
        "witnesses": {"oneOf": [{"type": "null"}, {
            "type": "object", "additionalProperties": False, "required": ["z1", "z2"],
            "properties": {"z1": _POINT, "z2": _POINT}}]},
        "caveats": {"type": "array", "items": {"type": "string"}},
    },
}


def validate_certificate(doc: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` is not a valid certificate."""
    jsonschema.validate(doc, CERTIFICATE_SCHEMA)


# ---------------------------------------------------------------------------
# evidence distance


def _check_kind(ev, kind: str, what: str):
    if isinstance(ev, SrgCloud):
        if ev.kind != kind:
            raise TypeError(f"{what}: {ev.kind} cloud passed where {kind} evidence is required")
    elif not isinstance(ev, Region):
        raise TypeError(f"{what}: expected a Region or an SrgCloud, got {type(ev).__name__}")


def _evidence_kind(a, b) -> str:
    ca, cb = isinstance(a, SrgCloud), isinstance(b, SrgCloud)
    if ca and cb:
        return "sampled_clouds"
    if ca or cb:
        return "mixed"
    return "analytic_regions"


def evidence_distance(a, b) -> tuple[float, complex, complex]:
    """Distance between two pieces of evidence with witnesses (conjugates included)."""
    if isinstance(a, SrgCloud) and isinstance(b, SrgCloud):
        d = cloud_min_distance(a, b)
        return d.value, d.z1, d.z2
    if isinstance(a, Region) and isinstance(b, Region):
        r = region_distance(a, b)
        return r.value, complex(r.z1), complex(r.z2)
    cloud, region = (a, b) if isinstance(a, SrgCloud) else (b, a)
    z = cloud.z
    pts = np.concatenate([z, np.conj(z)])
    d, q = region.point_distance(pts)
    i = int(np.argmin(d))
    zc, zr = complex(pts[i]), complex(np.asarray(q).reshape(-1)[i])
    value = float(np.asarray(d).reshape(-1)[i])
    return (value, zc, zr) if cloud is a else (value, zr, zc)


def _scale(ev, factor: float):
    return scale_cloud(ev, factor) if isinstance(ev, SrgCloud) else scale_region(ev, factor)


def _caveats(evidence_kind, checklist, extra=()):
    cav = [CAVEAT_D2]
    if evidence_kind != "analytic_regions":
        cav.append(CAVEAT_CLOUDS)
    for a in checklist.items:
        if a.status == "asserted_by_user":
            cav.append(f"asserted by user: {a.name}")
    cav.extend(extra)
    return tuple(cav)


def _verdict(margin, floor, checklist, theorem):
    blocking = checklist.blocking(theorem)
    if margin <= floor:
        return "not_certified", f"margin {margin:.6g} does not exceed floor {floor:g}"
    if blocking:
        return "not_certified", "premises not established: " + ", ".join(blocking)
    return "certified", "graph separation with all premises established"


def certify_hard(srg_P, inv_srg_C, checklist: AssumptionChecklist | None = None,
                 margin_floor: float = MARGIN_FLOOR) -> Certificate:
    """Hard separation: ``inf |z1 - z2| > 0`` over hard-SRG evidence of P and
    inverse hard-SRG evidence of C."""
    _check_kind(srg_P, "hard", "srg_P")
    _check_kind(inv_srg_C, "hard", "inv_srg_C")
    checklist = checklist or AssumptionChecklist.blank("hard_separation")
    kind = _evidence_kind(srg_P, inv_srg_C)
    try:
        margin, z1, z2 = evidence_distance(srg_P, inv_srg_C)
    except IndeterminateDistanceError as exc:
        return Certificate("indeterminate", "hard_separation", 0.0, "sm_e", kind, checklist,
                           caveats=_caveats(kind, checklist), reason=f"indeterminate distance: {exc}",
                           margin_floor=margin_floor)
    verdict, reason = _verdict(margin, margin_floor, checklist, "hard_separation")
    extra = ()
    p = checklist.get("P_stable")
    if p is not None and p.status == "violated" and margin > margin_floor:
        extra = (CAVEAT_ONE_SIDED,)
    return Certificate(verdict, "hard_separation", float(margin), "sm_e", kind, checklist, (z1, z2),
                       _caveats(kind, checklist, extra), reason, margin_floor)


def _validate_tau_grid(tau_grid) -> tuple:
    g = tuple(float(t) for t in tau_grid)
    if not g:
        raise ConfigError("tau_grid: empty")
    if any(not 0 < t <= 1 for t in g):
        raise ConfigError("tau_grid: values must lie in (0, 1]")
    if any(b <= a for a, b in zip(g, g[1:])):
        raise ConfigError("tau_grid: must be strictly increasing")
    if g[-1] != 1.0:
        raise ConfigError("tau_grid: must contain 1")
    return g


def continuum_check(srg_P, inv_srg_C_base, tau_grid, margin: float) -> tuple[str, dict]:
    """Whether grid margins extend to every tau in (0, 1].

    Between adjacent grid values ``t1 < t2`` the distance can change by at
    most ``(1/t1 - 1/t2) * M`` with ``M`` bounding ``|z|`` on the inverse
    evidence of C, so the grid margin covers the gap when it exceeds that
    variation. Below the smallest grid value the scaled evidence sits at
    modulus at least ``m / tau`` (``m`` its smallest modulus), which clears a
    bounded P region of radius ``R`` once ``m / tau_min > R``.
    """
    if isinstance(srg_P, SrgCloud) or isinstance(inv_srg_C_base, SrgCloud):
        return "not_applicable", {"why": "continuum bound needs region evidence"}
    M = inv_srg_C_base.max_modulus
    if not (inv_srg_C_base.bounded and math.isfinite(M)):
        return "indeterminate", {"why": "inverse evidence of C is unbounded"}
    variations = [(1 / a - 1 / b) * M for a, b in zip(tau_grid, tau_grid[1:])]
    worst_var = max(variations, default=0.0)
    gaps_ok = all(margin > v for v in variations)
    R = srg_P.max_modulus
    m = inv_srg_C_base.min_modulus
    tail = m / tau_grid[0] - R if math.isfinite(R) else -math.inf
    detail = {"modulus_bound": M, "gap_variations": variations, "max_gap_variation": worst_var,
              "gaps_covered": gaps_ok, "tail_clearance": tail if math.isfinite(tail) else None,
              "tail_covered": tail > 0}
    return ("covered" if gaps_ok and tail > 0 else "not_covered"), detail


def certify_soft(srg_P, inv_srg_C_base, tau_grid, checklist: AssumptionChecklist | None = None,
                 margin_floor: float = MARGIN_FLOOR, continuum: bool = True) -> Certificate:
    """Soft separation over the homotopy ``P # (tau C)``.

    The inverse evidence of ``tau C`` is the base inverse evidence scaled by
    ``1 / tau``. The margin is the minimum over the grid; ties go to the
    smallest tau.
    """
    g = _validate_tau_grid(tau_grid)
    _check_kind(srg_P, "soft", "srg_P")
    _check_kind(inv_srg_C_base, "soft", "inv_srg_C_base")
    checklist = checklist or AssumptionChecklist.blank("soft_separation")
    kind = _evidence_kind(srg_P, inv_srg_C_base)
    margins, wit = [], []
    try:
        for tau in g:
            d, z1, z2 = evidence_distance(srg_P, _scale(inv_srg_C_base, 1.0 / tau))
            margins.append(float(d))
            wit.append((z1, z2))
    except IndeterminateDistanceError as exc:
        return Certificate("indeterminate", "soft_separation", 0.0, "sm", kind, checklist,
                           caveats=_caveats(kind, checklist), reason=f"indeterminate distance: {exc}",
                           margin_floor=margin_floor, tau_grid=g)
    i = int(np.argmin(margins))
    margin = margins[i]
    verdict, reason = _verdict(margin, margin_floor, checklist, "soft_separation")
    if margin <= margin_floor:
        reason += f" at tau = {g[i]}"
    cont, detail = (continuum_check(srg_P, inv_srg_C_base, g, margin) if continuum
                    else ("not_applicable", {"why": "not requested"}))
    return Certificate(verdict, "soft_separation", margin, "sm", kind, checklist, wit[i],
                       _caveats(kind, checklist), reason, margin_floor, g, tuple(margins), g[i],
                       cont, detail)


def homotopy_step_bound(c0: float, inc_gain_C: float) -> float:
    """Largest tau step ``1 / (c0 * gain(C))`` that keeps the homotopy induction valid."""
    if not (c0 > 0 and inc_gain_C > 0):
        raise DomainError("c0 and the incremental gain of C must be positive")
    return 1.0 / (c0 * inc_gain_C)


def grid_spacing_ok(tau_grid, mu: float) -> tuple[bool, float]:
    """Whether every gap of ``tau_grid`` (including the one from 0) is below ``mu``."""
    g = np.concatenate([[0.0], np.asarray(tau_grid, dtype=float)])
    spacing = float(np.max(np.diff(g)))
    return spacing < mu, spacing


def certify_passivity_corollary(P: Operator, C: Operator, delta: float, epsilon: float,
                                cloud_P: SrgCloud | None = None, cloud_C: SrgCloud | None = None,
                                margin_floor: float = MARGIN_FLOOR, probe: bool = True,
                                seed: int = 0, overrides: dict | None = None) -> Certificate:
    """Strictly passive ``P`` with indices ``(delta, epsilon)`` against ``C``
    with ``-C`` incrementally passive.

    ``P`` is placed in the sector disk and the inverse SRG of ``C`` in the
    closed left half-plane. Hard clouds, when given, are checked against
    these regions; a cloud point outside marks the premise violated.
    """
    D = make_sector_disk_D(delta, epsilon)
    c_region = negate_region(HalfPlane(0.0, "ge"))
    inv_c_region = invert_region(c_region)
    cl = checklist_from_specs(P, C, "hard_separation", probe=probe, seed=seed)
    cl = AssumptionChecklist(tuple(
        replace(a, required_by=tuple(t for t, req in REQUIRED.items() if a.name in req))
        for a in cl.items))
    cl = cl.set("P_stable", "satisfied", "strict incremental passivity gives a finite incremental gain")
    extra = []
    if cloud_P is not None:
        _check_kind(cloud_P, "hard", "cloud_P")
        rep = containment_report(cloud_P, D)
        if rep.fraction_inside < 1.0:
            cl = cl.set("P_strictly_passive", "violated",
                        f"{len(rep.violating_pair_ids)} pairs outside the sector disk, worst distance "
                        f"{rep.worst_violation_distance:.3g}")
            extra.append("violated-assumption: P cloud leaves the sector disk")
        else:
            cl = cl.set("P_strictly_passive", "satisfied", f"hard cloud of {len(cloud_P)} points inside the sector disk")
    else:
        cl = cl.set("P_strictly_passive", "asserted_by_user", f"indices delta={delta}, epsilon={epsilon}")
    if cloud_C is not None:
        _check_kind(cloud_C, "hard", "cloud_C")
        rep = containment_report(negate_cloud(cloud_C), HalfPlane(0.0, "ge"))
        if rep.fraction_inside < 1.0:
            cl = cl.set("negC_passive", "violated",
                        f"{len(rep.violating_pair_ids)} pairs of -C outside Re >= 0, worst distance "
                        f"{rep.worst_violation_distance:.3g}")
            extra.append("violated-assumption: -C cloud leaves the closed right half-plane")
        else:
            cl = cl.set("negC_passive", "satisfied", f"hard cloud of {len(cloud_C)} points of -C in Re >= 0")
    else:
        cl = cl.set("negC_passive", "asserted_by_user", "-C incrementally passive")
    if overrides:
        cl = cl.update(overrides)
    margin, z1, z2 = evidence_distance(D, inv_c_region)
    verdict, reason = _verdict(margin, margin_floor, cl, "passivity_corollary")
    if extra:
        reason = "violated assumption: " + "; ".join(extra)
    return Certificate(verdict, "passivity_corollary", float(margin), "sm_e", "analytic_regions", cl,
                       (z1, z2), _caveats("analytic_regions", cl, extra), reason, margin_floor)

