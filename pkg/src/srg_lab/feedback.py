"""Closed-loop simulation of ``P # C`` with the second disturbance fixed to zero.

Loop equations, solved causally one sample at a time::

    u1 = d1 + y2,   u2 = y1,   y1 = P u1,   y2 = C u2

When one block has no direct feedthrough the step is explicit. Otherwise the
sample-level algebraic loop is solved by successive substitution, whose
failure to converge is reported as a solver failure at that step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatchError, DivergenceError, DomainError, WellPosednessError
from .operators import LTI, DiscreteLTI, Operator, Scale, StaticNonlinearity, discretize_lti, has_direct_feedthrough
from .sampler import ExcitationConfig, generate_pairs
from .signals import SampledSignal


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    max_iter: int = 100
    # a trace diverges when a loop signal exceeds this multiple of max|d1|
    divergence_ratio: float = 1e6

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1 or not self.divergence_ratio > 1:
            raise DomainError("need tol > 0, max_iter >= 1 and divergence_ratio > 1")


@dataclass(frozen=True, eq=False)
class LoopTrace:
    d1: SampledSignal
    u1: SampledSignal
    u2: SampledSignal
    y1: SampledSignal
    y2: SampledSignal
    stats: dict = field(default_factory=dict)

    @property
    def t(self) -> np.ndarray:
        return self.d1.t


class _Solved(NamedTuple):
    u1: np.ndarray
    u2: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    iterations: np.ndarray
    max_residual: float
    mode: str
    diverged_at: int | None


def _loop_mode(P: Operator, C: Operator) -> str:
    if not has_direct_feedthrough(P):
        return "explicit-P-first"
    if not has_direct_feedthrough(C):
        return "explicit-C-first"
    return "fixed-point"


def _solve_values(P: Operator, C: Operator, D1: np.ndarray, dt: float, cfg: SolverConfig,
                  stop_on_divergence: bool = False) -> _Solved:
    """Batched causal solve; ``D1`` has shape ``(..., N, ch)``.

    With ``stop_on_divergence`` the arrays are cut at the first divergent
    step instead of raising.
    """
    if P.io_dim != C.io_dim or D1.shape[-1] != P.io_dim:
        raise DimensionMismatchError(
            f"channel mismatch: P {P.io_dim}, C {C.io_dim}, d1 {D1.shape[-1]}")
    batch = D1.shape[:-2]
    N = D1.shape[-2]
    sp, sc = P.stepper(dt, batch), C.stepper(dt, batch)
    U1, U2, Y1, Y2 = (np.zeros_like(D1) for _ in range(4))
    iters = np.zeros(N, dtype=np.int64)
    mode = _loop_mode(P, C)
    zero = np.zeros(batch + (P.io_dim,))
    limit = cfg.divergence_ratio * max(float(np.max(np.abs(D1))) if D1.size else 0.0, 1e-300)
    max_res = 0.0
    y2 = zero
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N):
            d = D1[..., k, :]
            if mode == "explicit-P-first":
                y1 = sp.output(zero)
                u2 = y1
                y2 = sc.output(u2)
                u1 = d + y2
                n_it = 1
            elif mode == "explicit-C-first":
                y2 = sc.output(zero)
                u1 = d + y2
                y1 = sp.output(u1)
                u2 = y1
                n_it = 1
            else:
                u1 = d + y2
                n_it = 0
                while True:
                    n_it += 1
                    y1 = sp.output(u1)
                    y2 = sc.output(y1)
                    u1_new = d + y2
                    res = np.abs(u1_new - u1)
                    if not np.all(np.isfinite(u1_new)):
                        break
                    u1 = u1_new
                    if np.all(res <= cfg.tol * np.maximum(1.0, np.abs(u1_new))):
                        break
                    if n_it >= cfg.max_iter:
                        raise WellPosednessError(
                            f"solver failure: fixed-point iteration did not converge at step {k} "
                            f"(residual {float(np.max(res)):.3g} after {n_it} iterations)", step=k)
                y1 = sp.output(u1)
                u2 = y1
                y2 = sc.output(u2)
                max_res = max(max_res, float(np.max(np.abs(u1 - d - y2))) if np.all(np.isfinite(y2)) else math.inf)
            iters[k] = n_it
            big = max(float(np.max(np.abs(u1))), float(np.max(np.abs(u2))))
            if not math.isfinite(big) or big > limit:
                if stop_on_divergence:
                    return _Solved(U1[..., :k, :], U2[..., :k, :], Y1[..., :k, :], Y2[..., :k, :],
                                   iters[:k], max_res, mode, k)
                raise DivergenceError(f"loop diverged at step {k} (|signal| = {big:.3g})", step=k)
            U1[..., k, :], U2[..., k, :], Y1[..., k, :], Y2[..., k, :] = u1, u2, y1, y2
            sp.commit(u1)
            sc.commit(u2)
    return _Solved(U1, U2, Y1, Y2, iters, max_res, mode, None)


def solve_feedback(P: Operator, C: Operator, d1: SampledSignal, cfg: SolverConfig | None = None) -> LoopTrace:
    """Solve the loop for disturbance ``d1`` from zero initial state."""
    cfg = cfg or SolverConfig()
    s = _solve_values(P, C, d1.values, d1.dt, cfg)
    stats = {"mode": s.mode, "iterations": s.iterations.tolist(),
             "max_iterations": int(np.max(s.iterations)), "max_residual": s.max_residual}
    mk = d1.with_values
    return LoopTrace(d1, mk(s.u1), mk(s.u2), mk(s.y1), mk(s.y2), stats)


def trace_consistency(trace: LoopTrace, P: Operator, C: Operator) -> tuple[float, float]:
    """Largest loop-equation residual and largest re-evaluation mismatch."""
    alg = max(float(np.max(np.abs(trace.u1.values - trace.d1.values - trace.y2.values))),
              float(np.max(np.abs(trace.u2.values - trace.y1.values))))
    dt = trace.d1.dt
    re = max(float(np.max(np.abs(P.apply(trace.u1.values, dt) - trace.y1.values))),
             float(np.max(np.abs(C.apply(trace.u2.values, dt) - trace.y2.values))))
    return alg, re


def trace_to_csv(trace: LoopTrace) -> str:
    names = ["t"]
    cols = [trace.t[:, None]]
    for label in ("d1", "u1", "u2", "y1", "y2"):
        sig = getattr(trace, label)
        names += [f"{label}_{i}" for i in range(sig.channels)]
        cols.append(sig.values)
    data = np.hstack(cols)
    lines = [",".join(names)]
    lines += [",".join(repr(float(x)) for x in row) for row in data]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# linear reference


def _as_discrete(op: Operator, dt: float):
    if isinstance(op, LTI):
        return discretize_lti(op.A, op.B, op.C, op.D, dt)
    if isinstance(op, StaticNonlinearity) and op.kind == "sector" and op.params["a"] == op.params["b"]:
        n = op.io_dim
        return DiscreteLTI(np.zeros((0, 0)), np.zeros((0, n)), np.zeros((n, 0)), op.params["a"] * np.eye(n), dt)
    raise DomainError("linear reference needs LTI blocks or linear static gains")


def closed_loop_lti_response(P: Operator, C: Operator, d1: SampledSignal) -> np.ndarray:
    """``u1`` of the loop from the discretized closed-loop state space."""
    p, c = _as_discrete(P, d1.dt), _as_discrete(C, d1.dt)
    n = P.io_dim
    M = np.linalg.inv(np.eye(n) - p.D @ c.D)
    xp = np.zeros(p.Ad.shape[0])
    xc = np.zeros(c.Ad.shape[0])
    out = np.zeros_like(d1.values)
    for k, d in enumerate(d1.values):
        y1 = M @ (p.C @ xp + p.D @ (c.C @ xc) + p.D @ d)
        y2 = c.C @ xc + c.D @ y1
        u1 = d + y2
        out[k] = u1
        xp = p.Ad @ xp + p.Bd @ u1
        xc = c.Ad @ xc + c.Bd @ y1
    return out


# ---------------------------------------------------------------------------
# well-posedness probe


class ProbeResult(NamedTuple):
    tau: float
    passed: bool
    failures: int
    trials: int
    max_iterations: int
    mean_iterations: float
    first_failure_step: int | None


def _random_disturbances(rng, trials, n_samples, channels):
    amps = 10.0 ** rng.uniform(-2, 1, size=(trials, 1, 1))
    return amps * rng.standard_normal((trials, n_samples, channels))


def wellposedness_probe(P: Operator, C: Operator, tau_grid, trials: int = 8, seed: int = 0,
                        n_samples: int = 200, dt: float = 0.01,
                        cfg: SolverConfig | None = None) -> list[ProbeResult]:
    """Try to solve ``P # (tau C)`` on random disturbances for each ``tau``.

    A failure is a solver failure, numerical evidence only.
    """
    cfg = cfg or SolverConfig()
    out = []
    for i, tau in enumerate(tau_grid):
        rng = np.random.default_rng([seed, i])
        D1 = _random_disturbances(rng, trials, n_samples, P.io_dim)
        Ct = Scale(float(tau), C)
        fails, steps, its = 0, None, []
        for j in range(trials):
            try:
                s = _solve_values(P, Ct, D1[j], dt, cfg, stop_on_divergence=True)
                its.append(s.iterations)
            except WellPosednessError as exc:
                fails += 1
                steps = exc.step if steps is None else min(steps, exc.step)
        allit = np.concatenate(its) if its else np.zeros(1, dtype=np.int64)
        out.append(ProbeResult(float(tau), fails == 0, fails, trials, int(np.max(allit)),
                               float(np.mean(allit)), steps))
    return out


# ---------------------------------------------------------------------------
# incremental gain estimate


@dataclass(frozen=True)
class GainConfig:
    amplitudes: tuple = (0.01, 0.1, 1.0, 10.0)
    pairs_per_amplitude: int = 8
    horizon: float = 20.0
    dt: float = 0.01
    seed: int = 0
    t_grid: tuple | None = None
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in self.amplitudes))
        if not self.amplitudes or any(a <= 0 for a in self.amplitudes):
            raise DomainError("amplitudes must be positive")
        if self.pairs_per_amplitude < 1:
            raise DomainError("pairs_per_amplitude must be at least 1")

    def excitation(self, amplitude: float) -> ExcitationConfig:
        return ExcitationConfig(n_pairs=max(2, self.pairs_per_amplitude), horizon=self.horizon, dt=self.dt,
                                amplitude=(amplitude, amplitude), seed=self.seed, input_mode="free",
                                t_grid=self.t_grid, l2e_pairs=0)


@dataclass(frozen=True)
class GainEstimate:
    sup_gain: float
    per_amplitude: dict
    curves: list
    divergent: bool
    divergent_amplitudes: tuple
    ensemble: dict

    def to_json(self) -> dict:
        def num(x):
            return None if not math.isfinite(x) else x
        return {"sup_gain": num(self.sup_gain), "divergent": self.divergent,
                "divergent_amplitudes": list(self.divergent_amplitudes),
                "per_amplitude": [{"amplitude": a, "sup_gain": num(g)} for a, g in self.per_amplitude.items()],
                "curves": self.curves, "ensemble": self.ensemble}


def estimate_loop_incremental_gain(P: Operator, C: Operator, cfg: GainConfig | None = None) -> GainEstimate:
    """Sampled lower bound on the incremental gain ``d1 -> (u1, u2)``.

    Each pair is solved in one batch; ``gamma_T`` is recorded on the T grid.
    A divergent batch marks its amplitude divergent with infinite gain; its
    curves cover the horizons reached before divergence.
    """
    cfg = cfg or GainConfig()
    curves, per_amp, div_amps = [], {}, []
    for ai, amp in enumerate(cfg.amplitudes):
        ex = cfg.excitation(amp)
        grid = ex.hard_grid()
        W1, W2 = generate_pairs(ex, "free", P.io_dim, 0, cfg.pairs_per_amplitude)
        s = _solve_values(P, C, np.concatenate([W1, W2]), cfg.dt, cfg.solver, stop_on_divergence=True)
        n = cfg.pairs_per_amplitude
        reached = s.u1.shape[-2]
        dD = (W1 - W2)[:, :reached]
        dU = np.concatenate([s.u1[:n] - s.u1[n:], s.u2[:n] - s.u2[n:]], axis=-1)
        best = 0.0
        for j in range(n):
            Ts, gs = [], []
            for T in grid:
                k = int(math.floor(T / cfg.dt + 1e-9))
                if k >= reached:
                    break
                nd = math.sqrt(cfg.dt * float(np.sum(dD[j, : k + 1] ** 2)))
                if nd == 0.0:
                    continue
                g = math.sqrt(cfg.dt * float(np.sum(dU[j, : k + 1] ** 2))) / nd
                Ts.append(float(T))
                gs.append(g)
            if gs:
                best = max(best, max(gs))
            curves.append({"amplitude": amp, "pair_id": j, "T": Ts, "gamma": gs})
        if s.diverged_at is not None:
            div_amps.append(amp)
            per_amp[amp] = math.inf
        else:
            per_amp[amp] = best
    sup = max(per_amp.values())
    ensemble = {"amplitudes": list(cfg.amplitudes), "pairs_per_amplitude": cfg.pairs_per_amplitude,
                "horizon": cfg.horizon, "dt": cfg.dt, "seed": cfg.seed}
    return GainEstimate(sup, per_amp, curves, bool(div_amps), tuple(div_amps), ensemble)
