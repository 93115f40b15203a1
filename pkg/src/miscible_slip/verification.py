"""Independent oracles for the discretization.

* steady shear flow over a frictional wall reduced to a scalar root problem;
* manufactured-solution convergence tables;
* element-level quadrature cross-checks;
* the two expressions of the Korteweg body force compared by quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import SolverError
from .quadrature import square_rule

# -- steady channel flow with a frictional bottom wall ------------------------------


@dataclass
class CouetteOracle:
    """Steady unidirectional flow ``u = (U(y), 0)`` on ``0 <= y <= H``.

    The momentum balance is ``nu0 U'' = G - F(y)`` with ``U(H) = 0`` and the
    wall law ``nu0 U'(0) = Dj_m(U(0))`` at the slip wall ``y = 0`` (outward
    normal ``(0, -1)``, tangent ``(1, 0)``). In an open channel the pressure
    gradient ``G`` is zero; in a closed one it is fixed by zero net flux.

    Attributes
    ----------
    roots : list of float
        Every slip velocity solving the wall law (nonmonotone laws may have
        several).
    slip : float
        The root closest to zero.
    """

    H: float
    f0: float
    nu0: float
    forcing: str
    closed: bool
    roots: list
    slip: float
    pressure_gradient: float
    wall_shear: float
    _coef: tuple = field(repr=False, default=())

    def profile(self, y):
        """``U(y)`` for the selected root."""
        s, a, G = self._coef
        y = np.asarray(y, dtype=float)
        Q, _ = _forcing_primitives(self.forcing, self.f0, self.H, y)
        return s + a * y + (0.5 * G * y * y - Q) / self.nu0

    def momentum_residual(self, n: int = 201) -> float:
        """Max of ``|nu0 U'' - G + F|`` on a grid, from exact second derivatives."""
        y = np.linspace(0.0, self.H, n)
        _, _, G = self._coef
        F = _forcing_values(self.forcing, self.f0, self.H, y)
        _, Fq = _forcing_primitives(self.forcing, self.f0, self.H, y, second=True)
        upp = (G - Fq) / self.nu0
        return float(np.max(np.abs(self.nu0 * upp - G + F)))


def _forcing_values(kind, f0, H, y):
    if kind == "uniform":
        return np.full_like(np.asarray(y, dtype=float), f0)
    return f0 * (1.0 - 2.0 * np.asarray(y) / H)


def _forcing_primitives(kind, f0, H, y, second=False):
    """``Q`` with ``Q'' = F``, ``Q(0) = Q'(0) = 0``; with ``second`` return ``Q''`` too."""
    y = np.asarray(y, dtype=float)
    if kind == "uniform":
        Q = 0.5 * f0 * y * y
    else:
        Q = f0 * (0.5 * y * y - y**3 / (3.0 * H))
    return Q, (_forcing_values(kind, f0, H, y) if second else None)


def _forcing_moments(kind, f0, H):
    """``Q(H)`` and ``int_0^H Q``."""
    if kind == "uniform":
        return 0.5 * f0 * H * H, f0 * H**3 / 6.0
    return f0 * H * H / 6.0, f0 * H**3 / 12.0


def _shear_given_slip(s, H, f0, nu0, kind, closed):
    """``(a, G)`` with ``U = s + a y + (G y^2/2 - Q)/nu0`` meeting ``U(H) = 0`` (and zero flux)."""
    QH, Qint = _forcing_moments(kind, f0, H)
    if not closed:
        return (QH / nu0 - s) / H, 0.0
    # nu0 s + nu0 a H + G H^2/2 = QH ; nu0 s H + nu0 a H^2/2 + G H^3/6 = Qint
    A = np.array([[nu0 * H, H * H / 2.0], [nu0 * H * H / 2.0, H**3 / 6.0]])
    b = np.array([QH - nu0 * s, Qint - nu0 * s * H])
    a, G = np.linalg.solve(A, b)
    return float(a), float(G)


def couette_oracle(H: float, f0: float, nu0: float, mlaw, forcing: str = "uniform",
                   closed: bool = False, tol: float = 1e-12, n_scan: int = 4001) -> CouetteOracle:
    """Solve the wall law for the slip velocity by scanning and bisection.

    Parameters
    ----------
    H, f0, nu0 : float
        Channel height, forcing amplitude, viscosity.
    mlaw : callable or None
        Mollified law ``s -> Dj_m(s)``; ``None`` for a frictionless wall.
    forcing : {"uniform", "shear"}
        ``F = f0`` or ``F = f0 (1 - 2 y / H)``.
    closed : bool
        Impose zero net flux through an unknown pressure gradient.
    """
    if nu0 <= 0 or H <= 0:
        raise ValueError("nu0 and H must be positive")
    Dj = (lambda s: np.zeros_like(np.asarray(s, dtype=float))) if mlaw is None else mlaw

    def resid(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        a = np.array([_shear_given_slip(v, H, f0, nu0, forcing, closed)[0] for v in s])
        return nu0 * a - np.asarray(Dj(s))

    # residual is affine in s minus the law, so it changes sign on a wide enough bracket
    r0 = float(resid(0.0)[0])
    slope = -nu0 * (1.0 / H if not closed else 4.0 / H)
    S = 2.0 * (abs(r0) / abs(slope) + 1.0)
    for _ in range(60):
        ends = resid(np.array([-S, S]))
        if ends[0] > 0 > ends[1]:
            break
        S *= 2.0
    else:
        raise SolverError("no sign change of the wall-law residual found while widening the bracket")
    grid = np.linspace(-S, S, n_scan)
    r = resid(grid)
    roots = [float(g) for g, v in zip(grid, r) if v == 0.0]
    for i in np.flatnonzero(np.sign(r[:-1]) * np.sign(r[1:]) < 0):
        lo, hi = grid[i], grid[i + 1]
        flo = r[i]
        while hi - lo > tol * max(1.0, abs(lo)):
            mid = 0.5 * (lo + hi)
            fm = float(resid(mid)[0])
            if fm == 0.0:
                lo = hi = mid
                break
            if np.sign(fm) == np.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    roots = sorted(roots)
    slip = min(roots, key=abs)
    a, G = _shear_given_slip(slip, H, f0, nu0, forcing, closed)
    return CouetteOracle(H=H, f0=f0, nu0=nu0, forcing=forcing, closed=closed, roots=roots,
                         slip=slip, pressure_gradient=G, wall_shear=nu0 * a, _coef=(slip, a, G))


def couette_config(nx: int = 64, ny: int = 32, Lx: float = 6.0, Ly: float = 1.0, f0: float = 30.0,
                   m_reg: int = 64, dt: float = 0.5, T: float = 10.0, **law_params):
    """Channel ``[0, Lx] x [0, Ly]`` with a frictional bottom and shear forcing."""
    from .config import ProblemConfig
    params = {"mu_s": 0.5, "mu_0": 1.5, "alpha": 2.0, **law_params}
    return ProblemConfig.from_dict({
        "domain": {"Lx": Lx, "Ly": Ly, "slip_sides": ["bottom"]},
        "physics": {"nu0": 1.0, "d": 1.0, "k": 0.0, "T": T, "force": "shear",
                    "force_params": {"f0": f0}, "C0": "constant"},
        "friction": {"law": "exp_decay", "params": params, "m_reg": m_reg},
        "discretization": {"nx": nx, "ny": ny, "dt": dt},
    })


@dataclass
class CouetteComparison:
    oracle: CouetteOracle
    slip_2d: float
    relative_error: float
    steps: int
    steady_change: float


def couette_comparison(config=None, steady_tol: float = 1e-10) -> CouetteComparison:
    """Run the channel to steady state and compare mid-channel slip with the oracle."""
    from .friction import MollifiedLaw
    from .stepper import project_initial, setup, step

    config = couette_config() if config is None else config
    problem = setup(config)
    state = project_initial(problem)
    probe = np.array([[0.5 * config.Lx, 0.0]])
    prev = 0.0
    change = np.inf
    n = 0
    for n in range(1, config.n_steps + 1):
        state, _ = step(problem, state, config.dt)
        cur = float(problem.spaces.evaluate(state.u, probe)[0, 0])
        change = abs(cur - prev)
        prev = cur
        if change <= steady_tol * max(1.0, abs(cur)):
            break
    mlaw = MollifiedLaw(config.make_law(), config.m_reg)
    oracle = couette_oracle(config.Ly, config.force_params["f0"], config.nu0, mlaw,
                            forcing="shear", closed=True)
    rel = abs(prev - oracle.slip) / max(abs(oracle.slip), 1e-300)
    return CouetteComparison(oracle, prev, rel, n, change)


# -- manufactured solutions -----------------------------------------------------------

@dataclass
class ConvergenceTable:
    """Errors per mesh level with observed orders ``log2(e_L / e_{L+1})``."""

    case: str
    levels: list
    errors: dict
    orders: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.orders:
            self.orders = {k: [math.log2(a / b) if a > 0 and b > 0 else float("nan")
                               for a, b in zip(v[:-1], v[1:])] for k, v in self.errors.items()}

    def rows(self):
        keys = sorted(self.errors)
        yield ["n"] + keys + [f"order_{k}" for k in keys]
        for i, n in enumerate(self.levels):
            yield [n] + [self.errors[k][i] for k in keys] + [
                (self.orders[k][i - 1] if i > 0 else "") for k in keys]

    def format(self) -> str:
        lines = []
        for r in self.rows():
            lines.append("  ".join(f"{v:>12.4e}" if isinstance(v, float) else f"{v!s:>12}" for v in r))
        return "\n".join(lines)


MANUFACTURED_CASES = {
    "manufactured": {"nu0": 1.0, "d": 1.0, "k": 0.5, "g": 0.5, "T": 0.01, "steps0": 1},
    "manufactured_stokes": {"nu0": 1.0, "d": 1.0, "k": 0.5, "g": 0.5, "T": 0.01, "steps0": 1,
                            "convection": False},
}


def manufactured_config(case: str, n: int, steps: int):
    from .config import ProblemConfig
    if case not in MANUFACTURED_CASES:
        raise ValueError(f"unknown case {case!r}; choose from {sorted(MANUFACTURED_CASES)}")
    c = MANUFACTURED_CASES[case]
    return ProblemConfig.from_dict({
        "domain": {"Lx": 1.0, "Ly": 1.0, "slip_sides": []},
        "physics": {"nu0": c["nu0"], "d": c["d"], "k": c["k"], "T": c["T"],
                    "convection": c.get("convection", True),
                    "force": "manufactured", "u0": "manufactured", "C0": "manufactured",
                    "g": "constant", "g_params": {"value": c["g"]}, "source": "manufactured"},
        "friction": {"law": "zero"},
        "discretization": {"nx": n, "ny": n, "dt": c["T"] / steps},
    })


def l2_errors(problem, state, fields, degree: int = 8) -> dict:
    """L2 errors of velocity, concentration and (mean-free) pressure against exact fields."""
    S = problem.spaces
    q = S.quad(degree)
    pts = q.points.reshape(-1, 2)
    w = q.weights.ravel()
    N = S.n_nodes
    phi = q.phi
    uc = state.u.reshape(2, N)[:, S.elem_dofs]
    uh = np.einsum("cei,qi->eqc", uc, phi).reshape(-1, 2)
    Ch = np.einsum("ei,qi->eq", state.C[S.elem_dofs], phi).ravel()
    ph = np.einsum("ei,qi->eq", state.p[S.p1_dofs], q.psi).ravel()
    t = state.t
    ue = fields.velocity(pts, t)
    Ce = fields.concentration(pts, t)
    pe = fields.modified_pressure(pts, t)
    area = w.sum()
    ph = ph - np.sum(w * ph) / area
    pe = pe - np.sum(w * pe) / area
    return {
        "velocity": float(np.sqrt(np.sum(w * np.sum((uh - ue) ** 2, axis=1)))),
        "concentration": float(np.sqrt(np.sum(w * (Ch - Ce) ** 2))),
        "pressure": float(np.sqrt(np.sum(w * (ph - pe) ** 2))),
    }


def manufactured_convergence(case: str = "manufactured", levels=(4, 8, 16, 32)) -> ConvergenceTable:
    """Errors at ``T`` on meshes ``n x n`` with ``dt`` shrinking like ``h^2``.

    The coarsest level takes ``steps0`` steps and each halving of ``h``
    quadruples the step count.
    """
    from .manufactured import manufactured_fields
    from .stepper import run

    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least three levels")
    c = MANUFACTURED_CASES[case]
    fields = manufactured_fields(c["nu0"], c["d"], c["k"], c["g"], c.get("convection", True))
    errors = {"velocity": [], "concentration": [], "pressure": []}
    for i, n in enumerate(levels):
        steps = c["steps0"] * round((n / levels[0]) ** 2)
        res = run(manufactured_config(case, n, steps))
        for key, val in l2_errors(res.problem, res.final, fields).items():
            errors[key].append(val)
    return ConvergenceTable(case, levels, errors)


def single_step_errors(case: str = "manufactured", n: int = 8, dts=(2e-5, 1e-5, 5e-6)) -> dict:
    """One-step concentration defect for several ``dt``.

    Starting from the L2 projection of the exact data, the defect is
    ``|C_1 - P C*(dt)|`` with the same projection ``P``; it vanishes at
    ``dt = 0`` and is first order in ``dt`` for a consistent scheme.
    """
    from .manufactured import manufactured_fields
    from .stepper import project_concentration, project_initial, setup, step

    c = MANUFACTURED_CASES[case]
    fields = manufactured_fields(c["nu0"], c["d"], c["k"], c["g"], c.get("convection", True))
    out = {}
    for dt in dts:
        cfg = manufactured_config(case, n, 1).replace(T=dt, dt=dt)
        problem = setup(cfg)
        s1, _ = step(problem, project_initial(problem), dt)
        e = s1.C - project_concentration(problem, lambda x: fields.concentration(x, dt))
        out[dt] = float(np.sqrt(e @ (problem.forms.M_c @ e)))
    return out


# -- quadrature cross-check -------------------------------------------------------------

@dataclass
class QuadratureReport:
    discrepancies: dict
    worst_elements: dict
    tolerance: float
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def quadrature_oracle_check(spaces, nu0: float = 1.0, d: float = 1.0, C=None, k: float = 1.0,
                            tol: float = 1e-12, bump: int = 2) -> QuadratureReport:
    """Recompute element matrices with a rule ``bump`` degrees higher and compare.

    Bilinear forms (mass, viscous, divergence, diffusion) are integrated
    exactly by the assembly rules, so any discrepancy above ``tol`` is a
    failure. The Korteweg load of a given ``C`` is reported but only
    checked when its integrand is polynomial of the assembly degree.
    """
    from .forms import (BILINEAR_DEGREE, TRILINEAR_DEGREE, local_divergence, local_gradient_products,
                        local_mass)

    def visc(q):
        Sl = local_gradient_products(q)
        return np.stack([2 * Sl[:, 0, 0] + Sl[:, 1, 1], Sl[:, 1, 0], Sl[:, 0, 1],
                         Sl[:, 0, 0] + 2 * Sl[:, 1, 1]], axis=1) * nu0

    def diff(q):
        Sl = local_gradient_products(q)
        return d * (Sl[:, 0, 0] + Sl[:, 1, 1])

    def korteweg(q):
        lap = spaces.elementwise_laplacian(C)
        gc = np.einsum("ei,eqia->eqa", C[spaces.elem_dofs], q.grad)
        return -k * np.einsum("e,eq,eqa,qi->eai", lap, q.weights, gc, q.phi)

    forms = {"mass": (local_mass, BILINEAR_DEGREE), "viscous": (visc, BILINEAR_DEGREE),
             "divergence": (local_divergence, BILINEAR_DEGREE), "diffusion": (diff, BILINEAR_DEGREE)}
    if C is not None:
        forms["korteweg"] = (korteweg, TRILINEAR_DEGREE)
    disc, worst, failures = {}, {}, []
    for name, (fn, deg) in forms.items():
        a = fn(spaces.quad(deg))
        b = fn(spaces.quad(deg + bump))
        axes = tuple(range(1, a.ndim))
        scale = np.maximum(np.max(np.abs(b), axis=axes), 1e-300)
        rel = np.max(np.abs(a - b), axis=axes) / scale
        e = int(np.argmax(rel))
        disc[name], worst[name] = float(rel[e]), e
        if name != "korteweg" and rel[e] > tol:
            failures.append(f"{name}: element {e} relative discrepancy {rel[e]:.3e} > {tol:.1e}")
    return QuadratureReport(disc, worst, tol, failures)


# -- Korteweg identity ---------------------------------------------------------------------

@dataclass
class KortewegIdentityReport:
    divergence_form: float
    reduced_form: float
    relative_difference: float
    tolerance: float
    integrand_scale: float = 0.0

    @property
    def ok(self) -> bool:
        return self.relative_difference <= self.tolerance


def korteweg_identity_check(k: float = 1.0, concentration: str = "cosine", n_quad: int = 20,
                            tol: float = 1e-10) -> KortewegIdentityReport:
    """Compare ``int Div K(C) . v`` with ``-k int lap(C) grad(C) . v`` on the unit square.

    ``Div K`` is obtained by symbolic differentiation of the stress
    components; ``v = curl psi`` with ``psi = [x(1-x) y(1-y)]^2``.

    The difference is relative to the larger of ``int |integrand|`` over
    the two forms, which stays meaningful when both integrals vanish: for
    the ``"cosine"`` concentration ``lap C grad C`` is a gradient, so both
    sides are zero up to rounding. ``"mixed"`` adds ``x^3 y^2`` and gives
    nonzero integrals. With identically zero integrands the difference is 0.

    Parameters
    ----------
    concentration : {"cosine", "linear", "mixed"}
    """
    import sympy as s

    from .forms import korteweg_tensor

    x, y = s.symbols("x y", real=True)
    if concentration == "cosine":
        C = s.cos(s.pi * x) * s.cos(s.pi * y)
    elif concentration == "linear":
        C = 2 * x - 3 * y + 1
    elif concentration == "mixed":
        C = s.cos(s.pi * x) * s.cos(s.pi * y) + x**3 * y**2
    else:
        raise ValueError(f"unknown concentration {concentration!r}")
    psi = (x * (1 - x) * y * (1 - y)) ** 2
    v = [s.diff(psi, y), -s.diff(psi, x)]
    grad = [s.diff(C, x), s.diff(C, y)]
    K = s.Matrix(korteweg_tensor_symbolic(grad, k))
    X = [x, y]
    divK = [sum(s.diff(K[i, j], X[j]) for j in range(2)) for i in range(2)]
    lhs_expr = divK[0] * v[0] + divK[1] * v[1]
    lap = s.diff(C, x, 2) + s.diff(C, y, 2)
    rhs_expr = -k * lap * (grad[0] * v[0] + grad[1] * v[1])
    pts, w = square_rule(n_quad)
    f_l = s.lambdify((x, y), lhs_expr, "numpy")
    f_r = s.lambdify((x, y), rhs_expr, "numpy")
    vl = np.broadcast_to(np.asarray(f_l(pts[:, 0], pts[:, 1]), dtype=float), w.shape)
    vr = np.broadcast_to(np.asarray(f_r(pts[:, 0], pts[:, 1]), dtype=float), w.shape)
    L, R = float(np.sum(w * vl)), float(np.sum(w * vr))
    # cross-check the symbolic stress against the numeric one at a point
    g0 = np.array([[float(gi.subs({x: 0.3, y: 0.7})) for gi in grad]])
    Kn = korteweg_tensor(g0, k)[0]
    Ks = np.array(K.subs({x: 0.3, y: 0.7}), dtype=float)
    if not np.allclose(Kn, Ks, rtol=1e-14, atol=1e-14):
        raise SolverError("symbolic and numeric Korteweg stresses disagree")
    scale = max(float(np.sum(w * np.abs(vl))), float(np.sum(w * np.abs(vr))))
    rel = 0.0 if scale == 0.0 else abs(L - R) / scale
    return KortewegIdentityReport(L, R, rel, tol, scale)


def korteweg_tensor_symbolic(grad, k):
    cx, cy = grad
    return [[k * cy**2, -k * cx * cy], [-k * cx * cy, k * cx**2]]


# -- Galerkin refinement proxy -----------------------------------------------------------

@dataclass
class GalerkinStudy:
    levels: list
    differences: list
    strictly_decreasing: bool


def galerkin_config(n: int = 8, T: float = 0.2, dt: float = 0.01):
    from .config import ProblemConfig
    return ProblemConfig.from_dict({
        "domain": {"slip_sides": ["bottom"]},
        "physics": {"nu0": 1.0, "d": 0.1, "k": 0.01, "T": T, "force": "vortex",
                    "force_params": {"amplitude": 20.0}, "C0": "gaussian"},
        "friction": {"law": "exp_decay", "m_reg": 64},
        "discretization": {"nx": n, "ny": n, "dt": dt},
    })


def galerkin_study(config=None, levels=(4, 8, 16, 32), degree: int = 6) -> GalerkinStudy:
    """``|u_L - u_{L+1}|`` in ``L2(0, T; L2)`` over successive mesh levels.

    The coarser velocity is evaluated at quadrature points of the finer
    mesh; the meshes are nested so the integrand is polynomial per fine
    triangle.
    """
    from .stepper import run

    config = galerkin_config() if config is None else config
    levels = list(levels)
    runs = [run(config.replace(nx=n, ny=n), keep_states=True) for n in levels]
    diffs = []
    for coarse, fine in zip(runs[:-1], runs[1:]):
        Sf = fine.problem.spaces
        q = Sf.quad(degree)
        pts = q.points.reshape(-1, 2)
        w = q.weights.ravel()
        Sc = coarse.problem.spaces
        tri, ref = Sc.mesh.locate(pts)
        from .spaces import p2_basis
        phic = p2_basis(ref)
        dofs_c = Sc.elem_dofs[tri]
        total = 0.0
        if len(coarse.states) != len(fine.states):
            raise SolverError("runs have different step sequences")
        for sc, sf in zip(coarse.states[1:], fine.states[1:]):
            uc = np.einsum("cni,ni->nc", sc.u.reshape(2, -1)[:, dofs_c], phic)
            uf = np.einsum("cei,qi->eqc", sf.u.reshape(2, -1)[:, Sf.elem_dofs], q.phi).reshape(-1, 2)
            total += config.dt * float(np.sum(w * np.sum((uc - uf) ** 2, axis=1)))
        diffs.append(math.sqrt(total))
    dec = all(b < a for a, b in zip(diffs[:-1], diffs[1:]))
    return GalerkinStudy(levels, diffs, dec)


def tabulate_law(mlaw, samples: int = 201, smax: float = 3.0):
    """Rows ``(s, Dj_m(s), clarke_lo, clarke_hi)`` on a uniform grid."""
    from .friction import clarke_interval
    s = np.linspace(-smax, smax, samples)
    lo, hi = clarke_interval(mlaw.base, s)
    return np.column_stack([s, mlaw.grad(s), lo, hi])


__all__ = ["CouetteOracle", "couette_oracle", "couette_comparison", "couette_config",
           "ConvergenceTable", "manufactured_convergence", "single_step_errors",
           "quadrature_oracle_check", "korteweg_identity_check", "galerkin_study",
           "galerkin_config", "tabulate_law"]
