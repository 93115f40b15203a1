"""Implicit Euler time stepping of the coupled velocity / concentration system.

Each step solves the Taylor-Hood saddle-point problem for ``(u, p)`` with
lagged convection, the Korteweg load of the previous concentration and the
mollified friction law resolved by a relaxed fixed point on the slip
trace; then the concentration equation is solved with the new velocity.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .config import ProblemConfig, sample_grid
from .exceptions import FixedPointError, SolvabilityError, SolverError
from .forms import (FormsCache, assemble_constant_forms, assemble_convection,
                    assemble_korteweg_load, load_vector)
from .friction import BoundaryTrace, MollifiedLaw, ZeroLaw, boundary_trace
from .geometry import build_rect_mesh
from .spaces import DiscreteSpaces, apply_constraints, build_spaces

log = logging.getLogger(__name__)


@dataclass
class State:
    """Time level with velocity, pressure (pinned at dof 0) and concentration coefficients."""

    t: float
    u: np.ndarray
    p: np.ndarray
    C: np.ndarray

    def copy(self) -> "State":
        return State(self.t, self.u.copy(), self.p.copy(), self.C.copy())


@dataclass
class StepReport:
    t: float
    dt: float
    fp_iters: int
    fp_change: float
    velocity_residual: float
    concentration_residual: float
    wall_time: float
    retried: bool = False


@dataclass
class Problem:
    """Everything a run needs besides its state: discretization, matrices and data."""

    config: ProblemConfig
    spaces: DiscreteSpaces
    forms: FormsCache
    trace: BoundaryTrace
    mlaw: MollifiedLaw | None
    force: object
    source: object
    g_max: float
    _force_cache: dict = field(default_factory=dict, repr=False)

    @property
    def has_friction(self) -> bool:
        return self.mlaw is not None and not self.trace.empty

    def force_load(self, t: float) -> np.ndarray:
        if self.config.force == "zero":
            return np.zeros(self.spaces.n_velocity)
        if self.config.force != "manufactured":
            # time-independent presets
            if "steady" not in self._force_cache:
                self._force_cache["steady"] = load_vector(self.spaces, lambda x: self.force(x, 0.0))
            return self._force_cache["steady"]
        return load_vector(self.spaces, lambda x: self.force(x, t))

    def source_load(self, t: float) -> np.ndarray | None:
        if self.source is None:
            return None
        return load_vector(self.spaces, lambda x: self.source(x, t))


def setup(config: ProblemConfig) -> Problem:
    """Build mesh, spaces, constant matrices and data callables for ``config``."""
    mesh = build_rect_mesh(config.nx, config.ny, config.Lx, config.Ly, config.partition())
    spaces = build_spaces(mesh)
    g = config.preset("g")
    forms = assemble_constant_forms(spaces, config.nu0, config.d, g)
    law = config.make_law()
    mlaw = None if isinstance(law, ZeroLaw) else MollifiedLaw(law, config.m_reg)
    g_max = 0.0
    if g is not None:
        g_max = float(g) if np.isscalar(g) else float(np.max(g(sample_grid(config))))
    return Problem(config=config, spaces=spaces, forms=forms, trace=boundary_trace(spaces),
                   mlaw=mlaw, force=config.preset("force"), source=config.preset("source"),
                   g_max=g_max)


# -- linear algebra ----------------------------------------------------------

class _Factorized:
    """LU factorization of a constrained system with a residual check."""

    def __init__(self, spaces, matrix, lin_tol):
        self.red = apply_constraints(spaces, matrix, np.zeros(matrix.shape[0]))
        try:
            self.lu = splu(self.red.matrix, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise SolverError(f"singular system: {exc}") from None
        self.lin_tol = lin_tol

    def solve(self, rhs) -> tuple[np.ndarray, float]:
        b = np.asarray(rhs)[self.red.free]
        x = self.lu.solve(b)
        nb = np.linalg.norm(b)
        res = np.linalg.norm(self.red.matrix @ x - b) / nb if nb > 0 else 0.0
        if not np.isfinite(res) or res > self.lin_tol:
            # one step of iterative refinement before giving up
            x = x + self.lu.solve(b - self.red.matrix @ x)
            res = np.linalg.norm(self.red.matrix @ x - b) / nb if nb > 0 else 0.0
            if not np.isfinite(res) or res > self.lin_tol:
                raise SolverError(f"linear residual {res:.3e} exceeds tolerance {self.lin_tol:.1e}")
        return self.red.extend(x), float(res)


def saddle_matrix(forms: FormsCache, velocity_block) -> sp.csr_matrix:
    B = forms.B_div
    return sp.bmat([[velocity_block, B.T], [B, None]], format="csr")


# -- initial data ------------------------------------------------------------

def project_velocity(problem: Problem, field) -> np.ndarray:
    """L2-closest velocity satisfying the wall constraints and the weak divergence constraint.

    ``field`` maps points (n, 2) to values (n, 2).
    """
    S, F = problem.spaces, problem.forms
    rhs = np.concatenate([load_vector(S, field), np.zeros(S.n_pressure)])
    sol, _ = _Factorized(S, saddle_matrix(F, F.M_u), problem.config.lin_tol).solve(rhs)
    return sol[:S.n_velocity]


def project_concentration(problem: Problem, field) -> np.ndarray:
    """L2 projection of a scalar field onto the concentration space."""
    S, F = problem.spaces, problem.forms
    return _Factorized(S, F.M_c, problem.config.lin_tol).solve(load_vector(S, field))[0]


def project_initial(problem: Problem) -> State:
    """Projections of the configured initial data at ``t = 0``; the pressure starts at zero."""
    cfg, S = problem.config, problem.spaces
    u0, C0 = cfg.preset("u0"), cfg.preset("C0")
    u = np.zeros(S.n_velocity) if cfg.u0 == "zero" else project_velocity(problem, lambda x: u0(x, 0.0))
    C = np.zeros(S.n_concentration) if cfg.C0 == "zero" else \
        project_concentration(problem, lambda x: C0(x, 0.0))
    return State(0.0, u, np.zeros(S.n_pressure), C)


# -- steps ---------------------------------------------------------------------

def velocity_step(problem: Problem, state: State, C_used: np.ndarray, dt: float):
    """One implicit Euler velocity/pressure step.

    Returns ``(u_new, p_new, fp_iters, fp_change, residual)``; ``fp_iters``
    counts the fixed-point corrections after the first solve.

    Raises
    ------
    FixedPointError
        If the friction iteration does not reach ``fp_tol`` within
        ``fp_max_iter`` corrections.
    """
    cfg, S, F = problem.config, problem.spaces, problem.forms
    n_u = S.n_velocity
    K = F.M_u / dt + F.A0
    if cfg.convection:
        K = K + assemble_convection(S, state.u)[0]
    rhs_u = F.M_u @ state.u / dt + problem.force_load(state.t + dt)
    if cfg.k > 0:
        rhs_u = rhs_u + assemble_korteweg_load(S, C_used, cfg.k)
    zeros_p = np.zeros(S.n_pressure)

    if not problem.has_friction:
        sol, res = _Factorized(S, saddle_matrix(F, K), cfg.lin_tol).solve(np.concatenate([rhs_u, zeros_p]))
        return sol[:n_u], sol[n_u:], 0, 0.0, res

    tr, mlaw = problem.trace, problem.mlaw
    A = K
    u_it = state.u
    s_it = tr.slip(u_it)

    def relaxed(slip):
        # nonnegative part of the law's slope at the given slip
        R = tr.mass(np.maximum(mlaw.hessian(slip), 0.0))
        return R, _Factorized(S, saddle_matrix(F, A + R), cfg.lin_tol)

    R, solver = relaxed(s_it)
    change, prev_change = np.inf, np.inf
    for it in range(cfg.fp_max_iter + 1):
        rhs = rhs_u - tr.load(mlaw.grad(s_it)) + R @ u_it
        sol, res = solver.solve(np.concatenate([rhs, zeros_p]))
        u_new = sol[:n_u]
        s_new = tr.slip(u_new)
        change = float(np.sqrt(np.sum(tr.weights * (s_new - s_it) ** 2)))
        u_it, s_it = u_new, s_new
        if change <= cfg.fp_tol:
            return u_new, sol[n_u:], it, change, res
        if it >= 1 and change > 0.5 * prev_change:
            # slow contraction: relinearize at the current iterate
            R, solver = relaxed(s_it)
        prev_change = change
    raise FixedPointError(
        f"friction fixed point not converged after {cfg.fp_max_iter} iterations at "
        f"t={state.t + dt:.6g}, dt={dt:.3g} (last change {change:.3e})")


def concentration_step(problem: Problem, state: State, u_new: np.ndarray, dt: float):
    """Implicit Euler concentration step with the new velocity. Returns ``(C_new, residual)``."""
    cfg, S, F = problem.config, problem.spaces, problem.forms
    if dt * problem.g_max >= 1.0:
        raise SolvabilityError(
            f"dt * max(g) = {dt * problem.g_max:.3g} >= 1: the concentration system may be "
            "singular; reduce dt")
    A = F.M_c / dt + F.B0 - F.G
    if cfg.convection:
        A = A + assemble_convection(S, u_new)[1]
    rhs = F.M_c @ state.C / dt
    src = problem.source_load(state.t + dt)
    if src is not None:
        rhs = rhs + src
    return _Factorized(S, A, cfg.lin_tol).solve(rhs)


def step(problem: Problem, state: State, dt: float) -> tuple[State, StepReport]:
    """Advance by ``dt``: velocity with the old concentration, then concentration."""
    t0 = time.perf_counter()
    u, p, iters, change, res_u = velocity_step(problem, state, state.C, dt)
    C, res_c = concentration_step(problem, state, u, dt)
    new = State(state.t + dt, u, p, C)
    return new, StepReport(new.t, dt, iters, change, res_u, res_c, time.perf_counter() - t0)


@dataclass
class RunResult:
    problem: Problem
    initial: State
    final: State
    records: list
    reports: list
    states: list | None = None
    initial_record: object = None


def run(config: ProblemConfig, keep_states: bool = False, on_step=None, problem: Problem | None = None,
        initial: State | None = None) -> RunResult:
    """Integrate from ``t = 0`` to ``T`` in ``ceil(T / dt)`` steps.

    A step whose friction iteration fails is retried once as two half
    steps (each producing its own record); a second failure aborts.

    Parameters
    ----------
    keep_states : bool
        Keep every state (needed by comparison studies).
    on_step : callable, optional
        Called as ``on_step(index, state, record)`` after every accepted step.
    """
    from .diagnostics import state_energy, step_energy_residuals

    problem = setup(config) if problem is None else problem
    state = project_initial(problem) if initial is None else initial
    first = state
    states = [state] if keep_states else None
    records, reports = [], []
    dt = config.dt

    def advance(st, h, retried=False):
        new, rep = step(problem, st, h)
        rep.retried = retried
        rec = step_energy_residuals(st, new, h, problem, fp_iters=rep.fp_iters)
        records.append(rec)
        reports.append(rep)
        if states is not None:
            states.append(new)
        if on_step is not None:
            on_step(len(records), new, rec)
        return new

    for n in range(config.n_steps):
        h = min(dt, config.T - n * dt) if n == config.n_steps - 1 else dt
        try:
            state = advance(state, h)
        except FixedPointError as exc:
            log.warning("%s; retrying as two half steps", exc)
            try:
                state = advance(state, h / 2, retried=True)
                state = advance(state, h / 2, retried=True)
            except FixedPointError as exc2:
                raise FixedPointError(f"{exc2} (after retry with dt/2)") from None
    return RunResult(problem, first, state, records, reports, states, state_energy(problem, first))
