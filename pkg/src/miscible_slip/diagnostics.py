"""Energy monitors, Gronwall envelopes and the continuous-dependence experiment."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import HypothesisError, MeshError
from .friction import verify_hypotheses

CSV_FIELDS = ("t", "kinetic", "grad_C_sq", "total", "viscous_dissipation",
              "diffusive_dissipation", "friction_power", "est1_residual",
              "est9_monitor", "fp_iters")


@dataclass
class EnergyRecord:
    """Energy quantities after one step.

    ``est1_residual`` is the discrete concentration energy balance
    ``(|C_new|^2 - |C_old|^2) / (2 dt) + d |grad C_new|^2 - (g C_new, C_new) - (s, C_new)``,
    nonpositive for exact solves; ``est1_scale`` is the magnitude of its
    terms, used to judge rounding. ``est9_monitor`` is
    ``|u|^2 + |grad C|^2``.
    """

    t: float
    kinetic: float
    grad_C_sq: float
    total: float
    viscous_dissipation: float
    diffusive_dissipation: float
    friction_power: float
    est1_residual: float
    est9_monitor: float
    fp_iters: int
    est1_scale: float = 0.0

    def row(self) -> list:
        return [getattr(self, f) for f in CSV_FIELDS]


def _check_sizes(problem, *states):
    S = problem.spaces
    for st in states:
        if st.u.shape != (S.n_velocity,) or st.C.shape != (S.n_concentration,):
            raise MeshError("state does not belong to the discretization of this problem")


def state_energy(problem, state, fp_iters: int = 0) -> EnergyRecord:
    """Record for a single state (balance residual zero)."""
    _check_sizes(problem, state)
    F, k = problem.forms, problem.config.k
    u, C = state.u, state.C
    kinetic = 0.5 * float(u @ (F.M_u @ u))
    gc = float(C @ (F.S @ C))
    fp = 0.0
    if problem.has_friction:
        s = problem.trace.slip(u)
        fp = float(np.sum(problem.trace.weights * problem.mlaw.grad(s) * s))
    return EnergyRecord(
        t=float(state.t), kinetic=kinetic, grad_C_sq=gc, total=kinetic + 0.5 * k * gc,
        viscous_dissipation=float(u @ (F.A0 @ u)), diffusive_dissipation=F.d * gc,
        friction_power=fp, est1_residual=0.0, est9_monitor=2.0 * kinetic + gc, fp_iters=fp_iters)


def step_energy_residuals(state_old, state_new, dt: float, problem, fp_iters: int = 0) -> EnergyRecord:
    """Energy record of ``state_new`` including the concentration balance residual."""
    _check_sizes(problem, state_old, state_new)
    rec = state_energy(problem, state_new, fp_iters)
    F = problem.forms
    Cn, Co = state_new.C, state_old.C
    mn, mo = float(Cn @ (F.M_c @ Cn)), float(Co @ (F.M_c @ Co))
    react = float(Cn @ (F.G @ Cn))
    src = problem.source_load(state_new.t)
    src_term = 0.0 if src is None else float(src @ Cn)
    rec.est1_residual = 0.5 * (mn - mo) / dt + rec.diffusive_dissipation - react - src_term
    rec.est1_scale = 0.5 * (mn + mo) / dt + rec.diffusive_dissipation + abs(react) + abs(src_term)
    return rec


# -- trajectory ------------------------------------------------------------------

@dataclass
class GronwallFit:
    c1: float
    c2: float
    envelope_final: float
    holds: bool


def fit_gronwall(t, total, total0: float, tol: float = 1e-12) -> GronwallFit:
    """Smallest envelope ``(total0 + c1 t) exp(c2 t)`` (at the final time) over a c2 grid.

    For each ``c2`` the least admissible ``c1`` is
    ``max_t max(0, total exp(-c2 t) - total0) / t``.
    """
    t = np.asarray(t, dtype=float)
    total = np.asarray(total, dtype=float)
    if t.size == 0:
        return GronwallFit(0.0, 0.0, total0, True)
    T = float(t.max())
    best = None
    for c2 in np.concatenate([[0.0], np.logspace(-4, 3, 281)]):
        if c2 * T > 700:
            break
        c1 = float(np.max(np.maximum(0.0, total * np.exp(-c2 * t) - total0) / t))
        env = (total0 + c1 * T) * math.exp(c2 * T)
        if best is None or env < best[2] * (1 - 1e-12):
            best = (c1, float(c2), env)
    c1, c2, env = best
    bound = (total0 + c1 * t) * np.exp(c2 * t)
    holds = bool(np.all(total <= bound * (1 + tol) + tol))
    return GronwallFit(c1, c2, env, holds)


def sources_vanish(config) -> bool:
    return config.force == "zero" and config.g == "zero" and config.source == "zero"


def trajectory_monitors(records, config, initial: EnergyRecord | None = None,
                        growth_tol: float = 1e-12) -> dict:
    """Gronwall envelope, growth flags and max-over-time statistics of a run.

    A step is flagged when the total energy grows although the body force,
    reaction and source are zero and the friction power is nonnegative.
    """
    if initial is None and records:
        initial = records[0]
    if not records:
        return {"steps": 0, "c1": 0.0, "c2": 0.0, "envelope_holds": True, "flags": [], "passed": True}
    t = np.array([r.t for r in records])
    total = np.array([r.total for r in records])
    total0 = initial.total
    fit = fit_gronwall(t, total, total0)
    flags = []
    if sources_vanish(config):
        prev = total0
        for i, r in enumerate(records):
            if r.friction_power >= 0 and r.total > prev * (1 + growth_tol) + growth_tol * 1e-3:
                flags.append({"step": i + 1, "t": r.t, "growth": r.total - prev})
            prev = r.total
    est1 = [r.est1_residual / r.est1_scale for r in records if r.est1_scale > 0]
    return {
        "steps": len(records),
        "total_initial": total0,
        "total_final": float(total[-1]),
        "c1": fit.c1,
        "c2": fit.c2,
        "envelope_final": fit.envelope_final,
        "envelope_holds": fit.holds,
        "flags": flags,
        "max_kinetic": float(max(r.kinetic for r in records)),
        "max_grad_C_sq": float(max(r.grad_C_sq for r in records)),
        "max_est9_monitor": float(max(r.est9_monitor for r in records)),
        "min_friction_power": float(min(r.friction_power for r in records)),
        "max_est1_relative": float(max(est1)) if est1 else 0.0,
        "total_fp_iters": int(sum(r.fp_iters for r in records)),
        "passed": bool(fit.holds and not flags),
    }


# -- continuous dependence ----------------------------------------------------------

@dataclass
class StabilityReport:
    """``amplification = sup_t (|du|^2 + k |grad dC|^2) / delta0^2`` (0 when delta0 = 0)."""

    delta0: float
    sup_difference: float
    amplification: float
    times: list = field(default_factory=list, repr=False)
    differences: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return asdict(self)


def perturbation_field(config):
    """Smooth divergence-free field vanishing with its gradient on the boundary, unit amplitude."""
    from .presets import _stream_velocity
    return lambda pts, t=0.0: _stream_velocity(pts, config.Lx, config.Ly, 1.0)


def stability_study(config, delta0: float, base=None) -> StabilityReport:
    """Run the configuration from ``u0`` and from ``u0 + delta0 w`` and compare.

    Parameters
    ----------
    base : RunResult, optional
        Unperturbed run with ``keep_states=True``; computed when omitted.

    Raises
    ------
    HypothesisError
        If the configured law fails the relaxed monotonicity check, under
        which continuous dependence is not guaranteed.
    """
    from .stepper import project_initial, project_velocity, run

    report = verify_hypotheses(config.make_law())
    if not report.ok:
        raise HypothesisError("stability study refused: " + "; ".join(report.failures))
    if base is None:
        base = run(config, keep_states=True)
    problem = base.problem
    if delta0 == 0:
        return StabilityReport(0.0, 0.0, 0.0, [s.t for s in base.states], [0.0] * len(base.states))
    F = problem.forms
    w = perturbation_field(config)
    wh = project_velocity(problem, lambda x: w(x, 0.0))
    init = project_initial(problem)
    init.u = init.u + delta0 * wh
    pert = run(config, keep_states=True, problem=problem, initial=init)
    k = config.k
    diffs = []
    for a, b in zip(base.states, pert.states):
        du, dC = b.u - a.u, b.C - a.C
        diffs.append(float(du @ (F.M_u @ du)) + k * float(dC @ (F.S @ dC)))
    sup = max(diffs)
    return StabilityReport(float(delta0), sup, sup / delta0**2, [s.t for s in base.states], diffs)
