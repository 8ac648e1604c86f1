"""Command-line front end.

Every command takes ``--config FILE.json --out DIR [--seed N]``. Artifacts are
built in memory and written only after the command succeeds, each through a
temporary file renamed into place.

Exit codes: 0 success (certificate commands: certified), 1 invalid
configuration or input file, 2 not certified, 3 indeterminate, 4 runtime
failure (solver failure, empty cloud, non-finite evaluation).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile

import numpy as np

from . import certifier, feedback, regions, sampler
from .errors import ConfigError, DomainError, SrgLabError
from .operators import operator_from_dict
from .plotting import render_svg
from .signals import SampledSignal, read_csv

COMMANDS = ("srg-soft", "srg-hard", "region", "cert-hard", "cert-soft", "cert-passivity",
            "simulate", "gain-estimate", "plot")
EXIT_OK, EXIT_CONFIG, EXIT_NOT_CERTIFIED, EXIT_INDETERMINATE, EXIT_RUNTIME = 0, 1, 2, 3, 4
VERDICT_EXIT = {"certified": EXIT_OK, "not_certified": EXIT_NOT_CERTIFIED, "indeterminate": EXIT_INDETERMINATE}


# ---------------------------------------------------------------------------
# strict config helpers


def _keys(d, where, required=(), optional=()):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    missing = sorted(set(required) - set(d))
    if missing:
        raise ConfigError(f"{where}: missing keys {missing}")


def _load_json(path, where):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{where}: file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{where}: {path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


class _Ctx:
    """Resolves relative paths against the config file directory."""

    def __init__(self, base_dir, seed):
        self.base_dir = base_dir
        self.seed = seed

    def path(self, p):
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)

    def operator(self, value, where):
        if isinstance(value, str):
            value = _load_json(self.path(value), where)
        return operator_from_dict(value, where)

    def excitation(self, value, where):
        value = value or {}
        names = [f.name for f in dataclasses.fields(sampler.ExcitationConfig)]
        _keys(value, where, optional=[n for n in names if n != "seed"])
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in value.items()}
        try:
            return sampler.ExcitationConfig(**kw, seed=self.seed)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise ConfigError(f"{where}: {exc}") from None
            raise ConfigError(f"{where}: {exc}") from None

    def solver(self, value, where):
        value = value or {}
        _keys(value, where, optional=("tol", "max_iter", "divergence_ratio"))
        try:
            return feedback.SolverConfig(**value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: {exc}") from None

    def evidence(self, value, where, kind):
        """Region, cloud file, inline cloud, or a sampling request."""
        _keys(value, where, optional=("region", "cloud_file", "cloud", "sample"))
        if len(value) != 1:
            raise ConfigError(f"{where}: give exactly one of region, cloud_file, cloud, sample")
        (key, v), = value.items()
        if key == "region":
            return regions.region_from_dict(v, f"{where}.region")
        if key in ("cloud_file", "cloud"):
            doc = _load_json(self.path(v), f"{where}.cloud_file") if key == "cloud_file" else v
            return sampler.cloud_from_json(doc)
        _keys(v, f"{where}.sample", required=("operator",), optional=("excitation", "invert"))
        op = self.operator(v["operator"], f"{where}.sample.operator")
        cfg = self.excitation(v.get("excitation"), f"{where}.sample.excitation")
        cloud = sampler.sample_hard_srg(op, cfg) if kind == "hard" else sampler.sample_soft_srg(op, cfg)
        return sampler.invert_cloud(cloud) if v.get("invert", False) else cloud


def _dumps(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n").encode()


# ---------------------------------------------------------------------------
# commands; each returns (exit_code, {name: bytes}, summary)


def _cmd_srg(cfg, ctx, kind):
    _keys(cfg, "config", required=("operator",), optional=("excitation", "seed", "invert"))
    op = ctx.operator(cfg["operator"], "config.operator")
    ex = ctx.excitation(cfg.get("excitation"), "config.excitation")
    cloud = sampler.sample_soft_srg(op, ex) if kind == "soft" else sampler.sample_hard_srg(op, ex)
    if cfg.get("invert", False):
        cloud = sampler.invert_cloud(cloud)
    svg = render_svg(clouds=[(cloud, f"{kind} SRG")], title=f"{kind} SRG cloud")
    arts = {"cloud.json": _dumps(sampler.cloud_to_json(cloud)),
            "cloud.csv": sampler.cloud_to_csv(cloud).encode(),
            "cloud.svg": svg.encode()}
    return EXIT_OK, arts, {"points": len(cloud), "stats": cloud.stats}


def _cmd_region(cfg, ctx):
    _keys(cfg, "config", required=("region",), optional=("probes", "distance_to", "seed"))
    reg = regions.region_from_dict(cfg["region"], "config.region")
    out = {"region": reg.to_dict(), "bounded": bool(reg.bounded), "extended": bool(reg.extended),
           "max_modulus": None if not np.isfinite(reg.max_modulus) else reg.max_modulus,
           "min_modulus": reg.min_modulus}
    code = EXIT_OK
    if "probes" in cfg:
        try:
            pts = np.array([complex(p[0], p[1]) for p in cfg["probes"]])
        except (TypeError, IndexError, ValueError):
            raise ConfigError("config.probes: expected a list of [re, im] pairs") from None
        out["probes"] = [{"z": [p.real, p.imag], "inside": bool(reg.contains(p))} for p in pts]
    witnesses = []
    drawn = [(reg, "region")]
    if "distance_to" in cfg:
        other = regions.region_from_dict(cfg["distance_to"], "config.distance_to")
        drawn.append((other, "other"))
        try:
            r = regions.region_distance(reg, other)
            out["distance"] = {"value": r.value, "z1": [r.z1.real, r.z1.imag], "z2": [r.z2.real, r.z2.imag],
                               "method": r.method, "refinement": r.refinement, "converged": r.converged}
            witnesses.append((r.z1, r.z2))
        except SrgLabError as exc:
            out["distance"] = {"indeterminate": str(exc)}
            code = EXIT_INDETERMINATE
    arts = {"region.json": _dumps(out)}
    try:
        arts["region.svg"] = render_svg(regions=drawn, witnesses=witnesses).encode()
    except SrgLabError:
        pass
    return code, arts, out.get("distance", {})


def _cert_artifacts(cert, left, right):
    doc = cert.to_json()
    certifier.validate_certificate(doc)
    clouds, regs = [], []
    for ev, label in ((left, "P evidence"), (right, "inverse C evidence")):
        if isinstance(ev, sampler.SrgCloud):
            clouds.append((ev, label))
        else:
            regs.append((ev, label))
    wit = [cert.witnesses] if cert.witnesses is not None else []
    arts = {"certificate.json": _dumps(doc)}
    try:
        arts["certificate.svg"] = render_svg(clouds, regs, wit, title=cert.theorem).encode()
    except SrgLabError:
        pass
    return VERDICT_EXIT[cert.verdict], arts, {"verdict": cert.verdict, "margin": cert.margin}


def _checklist(cfg, theorem):
    overrides = cfg.get("assumptions", {})
    if not isinstance(overrides, dict):
        raise ConfigError("config.assumptions: expected an object of name -> status")
    for k, v in overrides.items():
        if v not in certifier.STATUSES:
            raise ConfigError(f"config.assumptions.{k}: status must be one of {certifier.STATUSES}")
    return certifier.AssumptionChecklist.blank(theorem).update(overrides)


def _cmd_cert_hard(cfg, ctx):
    _keys(cfg, "config", required=("srg_P", "inv_srg_C"), optional=("assumptions", "margin_floor", "seed"))
    a = ctx.evidence(cfg["srg_P"], "config.srg_P", "hard")
    b = ctx.evidence(cfg["inv_srg_C"], "config.inv_srg_C", "hard")
    cert = certifier.certify_hard(a, b, _checklist(cfg, "hard_separation"),
                                  float(cfg.get("margin_floor", certifier.MARGIN_FLOOR)))
    return _cert_artifacts(cert, a, b)


def _cmd_cert_soft(cfg, ctx):
    _keys(cfg, "config", required=("srg_P", "inv_srg_C", "tau_grid"),
          optional=("assumptions", "margin_floor", "continuum", "seed"))
    a = ctx.evidence(cfg["srg_P"], "config.srg_P", "soft")
    b = ctx.evidence(cfg["inv_srg_C"], "config.inv_srg_C", "soft")
    cert = certifier.certify_soft(a, b, cfg["tau_grid"], _checklist(cfg, "soft_separation"),
                                  float(cfg.get("margin_floor", certifier.MARGIN_FLOOR)),
                                  bool(cfg.get("continuum", True)))
    return _cert_artifacts(cert, a, b)


def _cmd_cert_passivity(cfg, ctx):
    _keys(cfg, "config", required=("P", "C", "delta", "epsilon"),
          optional=("sample_clouds", "excitation", "margin_floor", "assumptions", "seed"))
    P = ctx.operator(cfg["P"], "config.P")
    C = ctx.operator(cfg["C"], "config.C")
    cP = cC = None
    if cfg.get("sample_clouds", True):
        ex = ctx.excitation(cfg.get("excitation"), "config.excitation")
        cP, cC = sampler.sample_hard_srg(P, ex), sampler.sample_hard_srg(C, ex)
    overrides = cfg.get("assumptions") or None
    try:
        cert = certifier.certify_passivity_corollary(
            P, C, float(cfg["delta"]), float(cfg["epsilon"]), cP, cC,
            float(cfg.get("margin_floor", certifier.MARGIN_FLOOR)), seed=ctx.seed, overrides=overrides)
    except DomainError as exc:
        raise ConfigError(f"config.delta/epsilon: {exc}") from None
    D = regions.make_sector_disk_D(cfg["delta"], cfg["epsilon"])
    code, arts, summary = _cert_artifacts(cert, D, regions.HalfPlane(0.0, "le", punctured=True))
    if cP is not None:
        arts["certificate.svg"] = render_svg(
            [(cP, "P hard cloud"), (sampler.invert_cloud(cC), "inverse C hard cloud")],
            [(D, "sector disk"), (regions.HalfPlane(0.0, "le"), "Re <= 0")],
            [cert.witnesses], title=cert.theorem).encode()
    return code, arts, summary


def _disturbance(value, ctx, channels):
    _keys(value, "config.d1", optional=("csv", "signal"))
    if len(value) != 1:
        raise ConfigError("config.d1: give exactly one of csv, signal")
    if "csv" in value:
        try:
            return read_csv(ctx.path(value["csv"]))
        except (OSError, SrgLabError) as exc:
            raise ConfigError(f"config.d1.csv: {exc}") from None
    sig = value["signal"]
    _keys(sig, "config.d1.signal", required=("family",),
          optional=("amplitude", "horizon", "dt", "width", "frequency"))
    dt = float(sig.get("dt", 0.01))
    horizon = float(sig.get("horizon", 20.0))
    amp = float(sig.get("amplitude", 1.0))
    if not (dt > 0 and horizon > dt):
        raise ConfigError("config.d1.signal: need dt > 0 and horizon > dt")
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    fam = sig["family"]
    if fam == "step":
        v = amp * np.ones_like(t)
    elif fam == "pulse":
        v = amp * (t < float(sig.get("width", 1.0)))
    elif fam == "sine":
        v = amp * np.sin(2 * np.pi * float(sig.get("frequency", 0.5)) * t)
    elif fam == "noise":
        v = amp * np.random.default_rng(ctx.seed).standard_normal(len(t))
    else:
        raise ConfigError(f"config.d1.signal.family: unknown family {fam!r}")
    return SampledSignal(dt, np.repeat(v[:, None], channels, axis=1))


def _cmd_simulate(cfg, ctx):
    _keys(cfg, "config", required=("P", "C", "d1"), optional=("solver", "seed"))
    P = ctx.operator(cfg["P"], "config.P")
    C = ctx.operator(cfg["C"], "config.C")
    d1 = _disturbance(cfg["d1"], ctx, P.io_dim)
    scfg = ctx.solver(cfg.get("solver"), "config.solver")
    s = feedback._solve_values(P, C, d1.values, d1.dt, scfg, stop_on_divergence=True)
    n = s.u1.shape[0]
    cut = d1.with_values(d1.values[:n]) if n else None
    summary = {"mode": s.mode, "diverged_at": s.diverged_at, "max_iterations": int(np.max(s.iterations, initial=0)),
               "max_residual": s.max_residual, "samples": n}
    arts = {"loop.json": _dumps(summary)}
    if cut is not None:
        mk = cut.with_values
        trace = feedback.LoopTrace(cut, mk(s.u1), mk(s.u2), mk(s.y1), mk(s.y2))
        arts["trace.csv"] = feedback.trace_to_csv(trace).encode()
    return EXIT_OK, arts, summary


def _cmd_gain(cfg, ctx):
    _keys(cfg, "config", required=("P", "C"), optional=("gain", "solver", "seed"))
    P = ctx.operator(cfg["P"], "config.P")
    C = ctx.operator(cfg["C"], "config.C")
    g = cfg.get("gain") or {}
    _keys(g, "config.gain", optional=("amplitudes", "pairs_per_amplitude", "horizon", "dt", "t_grid"))
    kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in g.items()}
    try:
        gcfg = feedback.GainConfig(**kw, seed=ctx.seed, solver=ctx.solver(cfg.get("solver"), "config.solver"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config.gain: {exc}") from None
    est = feedback.estimate_loop_incremental_gain(P, C, gcfg)
    doc = est.to_json()
    return EXIT_OK, {"gain.json": _dumps(doc)}, {"sup_gain": doc["sup_gain"], "divergent": est.divergent}


def _cmd_plot(cfg, ctx):
    _keys(cfg, "config", optional=("clouds", "regions", "witnesses", "certificate_file", "width", "height",
                                   "title", "seed"))
    clouds = []
    for i, c in enumerate(cfg.get("clouds", [])):
        _keys(c, f"config.clouds[{i}]", required=("file",), optional=("label", "invert"))
        cl = sampler.cloud_from_json(_load_json(ctx.path(c["file"]), f"config.clouds[{i}].file"))
        if c.get("invert", False):
            cl = sampler.invert_cloud(cl)
        clouds.append((cl, c.get("label", os.path.basename(c["file"]))))
    regs = []
    for i, r in enumerate(cfg.get("regions", [])):
        _keys(r, f"config.regions[{i}]", required=("region",), optional=("label",))
        regs.append((regions.region_from_dict(r["region"], f"config.regions[{i}].region"), r.get("label", f"region {i}")))
    wits = []
    for i, w in enumerate(cfg.get("witnesses", [])):
        _keys(w, f"config.witnesses[{i}]", required=("z1", "z2"))
        wits.append((complex(*w["z1"]), complex(*w["z2"])))
    if "certificate_file" in cfg:
        doc = _load_json(ctx.path(cfg["certificate_file"]), "config.certificate_file")
        if doc.get("witnesses"):
            wits.append((complex(*doc["witnesses"]["z1"]), complex(*doc["witnesses"]["z2"])))
    if not clouds and not regs:
        raise ConfigError("config: plot needs at least one cloud or region")
    svg = render_svg(clouds, regs, wits, int(cfg.get("width", 520)), int(cfg.get("height", 520)),
                     cfg.get("title", ""))
    return EXIT_OK, {"plot.svg": svg.encode()}, {"clouds": len(clouds), "regions": len(regs)}


_HANDLERS = {
    "srg-soft": lambda c, x: _cmd_srg(c, x, "soft"),
    "srg-hard": lambda c, x: _cmd_srg(c, x, "hard"),
    "region": _cmd_region,
    "cert-hard": _cmd_cert_hard,
    "cert-soft": _cmd_cert_soft,
    "cert-passivity": _cmd_cert_passivity,
    "simulate": _cmd_simulate,
    "gain-estimate": _cmd_gain,
    "plot": _cmd_plot,
}


# ---------------------------------------------------------------------------
# driver


def _write_atomic(directory, name, data: bytes):
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, os.path.join(directory, name))
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def run(command: str, config_path: str, out_dir: str, seed: int | None = None) -> int:
    """Run one command; returns the exit code."""
    if command not in COMMANDS:
        print(f"error: unknown command {command!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _load_json(config_path, "config")
        if not isinstance(cfg, dict):
            raise ConfigError("config: top level must be an object")
        if seed is None:
            seed = cfg.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("config.seed: must be a nonnegative integer")
        ctx = _Ctx(os.path.dirname(os.path.abspath(config_path)), seed)
        code, arts, summary = _HANDLERS[command](cfg, ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SrgLabError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = {"command": command, "seed": seed, "exit_code": code,
                "artifacts": sorted(arts), "summary": summary}
    arts["run.json"] = _dumps(manifest)
    os.makedirs(out_dir, exist_ok=True)
    for name in sorted(arts):
        _write_atomic(out_dir, name, arts[name])
    print(json.dumps({"command": command, "exit_code": code, **{k: v for k, v in summary.items()
                                                                 if k in ("verdict", "margin", "points")}}))
    return code


class _Parser(argparse.ArgumentParser):
    # usage errors share the config-error exit code; argparse's default 2 means "not certified" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="srg-lab", description="Scaled relative graph sampling and certification.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON configuration file")
        s.add_argument("--out", required=True, help="output directory")
        s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.command, args.config, args.out, args.seed)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
