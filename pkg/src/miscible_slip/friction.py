"""Nonmonotone slip laws, their Clarke subgradients and mollified derivatives.

The slip variable is the signed tangential velocity ``u . tau`` on the slip
boundary, so every law is a locally Lipschitz function ``j: R -> R`` with
``j(0) = 0``. Built-in laws are odd in their derivative.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import HypothesisError, QuadratureError
from .geometry import GAMMA1, side_frame
from .quadrature import gauss_legendre
from .spaces import DiscreteSpaces, p2_basis


class FrictionLaw:
    """Base class for a scalar slip potential ``j``.

    Subclasses provide ``potential``, ``derivative`` (a.e. derivative),
    ``one_sided`` (left/right limits of the derivative) and the finite,
    sorted array ``kinks`` of points where the derivative is not smooth.
    """

    name = "law"
    kinks = np.zeros(0)
    # j even, so j' and every mollification of it are odd
    even = True

    def __init__(self, m0: float, m1: float):
        if not m0 > 0:
            raise HypothesisError(f"growth constant m0 must be positive, got {m0}")
        if m1 < 0:
            raise HypothesisError(f"relaxed monotonicity constant m1 must be >= 0, got {m1}")
        self.m0 = float(m0)
        self.m1 = float(m1)

    def potential(self, s):
        raise NotImplementedError

    def derivative(self, s):
        raise NotImplementedError

    def one_sided(self, s):
        s = np.asarray(s, dtype=float)
        d = self.derivative(s)
        return d, d

    def params(self) -> dict:
        return {"m0": self.m0, "m1": self.m1}

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({inner})"


class ExpDecayLaw(FrictionLaw):
    """Friction coefficient decaying from ``mu_0`` at rest to ``mu_s`` while sliding.

    ``j'(s) = (mu_s + (mu_0 - mu_s) exp(-alpha |s|)) sign(s)``, and
    ``dj(0) = [-mu_0, mu_0]``. Defaults: ``m0 = mu_0``, ``m1 = alpha (mu_0 - mu_s)``.
    """

    name = "exp_decay"
    kinks = np.zeros(1)

    def __init__(self, mu_s=0.5, mu_0=1.5, alpha=2.0, m0=None, m1=None):
        if not (mu_0 >= mu_s > 0):
            raise HypothesisError(f"need mu_0 >= mu_s > 0, got mu_s={mu_s}, mu_0={mu_0}")
        if not alpha > 0:
            raise HypothesisError(f"decay rate alpha must be positive, got {alpha}")
        self.mu_s, self.mu_0, self.alpha = float(mu_s), float(mu_0), float(alpha)
        super().__init__(mu_0 if m0 is None else m0,
                         alpha * (mu_0 - mu_s) if m1 is None else m1)

    def params(self):
        return {"mu_s": self.mu_s, "mu_0": self.mu_0, "alpha": self.alpha, **super().params()}

    def _modulus(self, r):
        return self.mu_s + (self.mu_0 - self.mu_s) * np.exp(-self.alpha * r)

    def potential(self, s):
        r = np.abs(np.asarray(s, dtype=float))
        return self.mu_s * r + (self.mu_0 - self.mu_s) * (1.0 - np.exp(-self.alpha * r)) / self.alpha

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.sign(s) * self._modulus(np.abs(s))

    def one_sided(self, s):
        s = np.asarray(s, dtype=float)
        d = self.derivative(s)
        zero = s == 0
        return np.where(zero, -self.mu_0, d), np.where(zero, self.mu_0, d)

    def second_derivative(self, s):
        """Derivative of ``j'`` away from the origin."""
        s = np.asarray(s, dtype=float)
        return -self.alpha * (self.mu_0 - self.mu_s) * np.exp(-self.alpha * np.abs(s))


class PiecewiseLinearLaw(FrictionLaw):
    """Law whose derivative is odd and piecewise linear on ``s >= 0``.

    On ``[knots[i], knots[i+1])`` the modulus ``phi = |j'|`` runs linearly
    from ``start[i]`` to ``end[i]``; beyond the last knot it stays at
    ``end[-1]``. Discontinuities between segments are allowed and make the
    Clarke subgradient multivalued there.
    """

    name = "piecewise"

    def __init__(self, knots, start, end, m0=None, m1=None):
        knots = np.asarray(knots, dtype=float)
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        if knots[0] != 0.0 or np.any(np.diff(knots) <= 0):
            raise HypothesisError("knots must start at 0 and increase strictly")
        if not (len(start) == len(end) == len(knots) - 1):
            raise HypothesisError("need one (start, end) pair per segment")
        self.knots, self.start, self.end = knots, start, end
        slopes = (end - start) / np.diff(knots)
        vals = np.concatenate([start, end])
        if m0 is None:
            # phi is bounded on every segment, so (d) holds with its maximum
            m0 = max(float(np.max(np.abs(vals))), 1e-300)
        if m1 is None:
            m1 = max(0.0, float(-slopes.min()))
        super().__init__(m0, m1)
        inner = knots[1:]
        self.kinks = np.unique(np.concatenate([-inner[::-1], [0.0], inner]))

    def params(self):
        return {"knots": self.knots.tolist(), "start": self.start.tolist(),
                "end": self.end.tolist(), **super().params()}

    def _phi(self, r, right=True):
        r = np.asarray(r, dtype=float)
        kn = self.knots
        side = "right" if right else "left"
        i = np.searchsorted(kn, r, side=side) - 1
        i = np.clip(i, 0, len(kn) - 1)
        tail = i >= len(kn) - 1
        seg = np.minimum(i, len(kn) - 2)
        frac = (r - kn[seg]) / (kn[seg + 1] - kn[seg])
        val = self.start[seg] + frac * (self.end[seg] - self.start[seg])
        return np.where(tail, self.end[-1], val)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        return np.sign(s) * self._phi(np.abs(s))

    def one_sided(self, s):
        s = np.asarray(s, dtype=float)
        r = np.abs(s)
        # approaching from the left means r decreasing for s > 0, increasing for s < 0
        left = np.where(s > 0, self._phi(r, right=False), -self._phi(r, right=True))
        right = np.where(s < 0, -self._phi(r, right=False), self._phi(r, right=True))
        return left, right

    def potential(self, s):
        s = np.asarray(s, dtype=float)
        r = np.abs(s)
        kn = self.knots
        out = np.zeros_like(r)
        for a, b, p, q in zip(kn[:-1], kn[1:], self.start, self.end):
            x = np.clip(r, a, b) - a
            out += p * x + 0.5 * (q - p) * x * x / (b - a)
        out += self.end[-1] * np.maximum(r - kn[-1], 0.0)
        return out


def sawtooth_law(mu_s=0.5, mu_0=1.5, width=0.5, teeth=2, m0=None, m1=None) -> PiecewiseLinearLaw:
    """Sawtooth modulus: each tooth drops linearly from ``mu_0`` to ``mu_s``
    over ``width`` and then jumps back up; after ``teeth`` teeth it stays at ``mu_s``."""
    knots = width * np.arange(teeth + 1)
    law = PiecewiseLinearLaw(knots, [mu_0] * teeth, [mu_s] * teeth, m0=m0, m1=m1)
    law.name = "sawtooth"
    return law


class QuadraticLaw(FrictionLaw):
    """Monotone (linear Navier slip) law ``j(s) = beta s^2 / 2``."""

    name = "quadratic"

    def __init__(self, beta=1.0, m0=None, m1=0.0):
        if beta <= 0:
            raise HypothesisError("beta must be positive")
        self.beta = float(beta)
        super().__init__(beta if m0 is None else m0, m1)

    def params(self):
        return {"beta": self.beta, **super().params()}

    def potential(self, s):
        return 0.5 * self.beta * np.asarray(s, dtype=float) ** 2

    def derivative(self, s):
        return self.beta * np.asarray(s, dtype=float)


class ZeroLaw(FrictionLaw):
    """Frictionless slip."""

    name = "zero"

    def __init__(self):
        super().__init__(1.0, 0.0)

    def potential(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))

    def derivative(self, s):
        return np.zeros_like(np.asarray(s, dtype=float))


LAWS = {
    "exp_decay": ExpDecayLaw,
    "sawtooth": sawtooth_law,
    "quadratic": QuadraticLaw,
    "zero": ZeroLaw,
}


def make_law(name: str, **params) -> FrictionLaw:
    try:
        factory = LAWS[name]
    except KeyError:
        raise HypothesisError(f"unknown friction law {name!r}; choose from {sorted(LAWS)}") from None
    return factory(**params)


def clarke_interval(law: FrictionLaw, s):
    """Clarke subgradient of ``law`` at ``s`` as an interval ``(lo, hi)``.

    For a piecewise C1 function of one variable this is the convex hull of
    the one-sided derivative limits.
    """
    left, right = law.one_sided(s)
    return np.minimum(left, right), np.maximum(left, right)


# -- mollification ----------------------------------------------------------

def _bump(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 / (ti * ti - 1.0))
    return out


def _bump_slope(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 / (ti * ti - 1.0)) * (-2.0 * ti / (ti * ti - 1.0) ** 2)
    return out


_x, _w = gauss_legendre(256)
BUMP_NORMALIZER = 1.0 / float(_w @ _bump(_x))


def mollifier(x, m: int = 1):
    """Scaled bump ``rho_m(x) = m rho(m x)`` supported on ``[-1/m, 1/m]``, unit mass."""
    return m * BUMP_NORMALIZER * _bump(m * np.asarray(x, dtype=float))


class MollifiedLaw:
    """Convolution of a law's derivative with the bump ``rho_m``.

    ``Dj_m(s) = int rho(t) j'(s - t/m) dt`` is evaluated by Gauss-Legendre
    quadrature on the pieces of ``[-1, 1]`` cut at the law's kinks, so each
    piece has a smooth integrand. The node count is raised at construction
    until doubling it changes results by less than ``rtol``.
    """

    def __init__(self, base: FrictionLaw, m_reg: int = 64, rtol: float = 1e-10,
                 n_nodes: int = 48, max_nodes: int = 768):
        if int(m_reg) != m_reg or m_reg < 1:
            raise HypothesisError(f"mollification index must be a positive integer, got {m_reg}")
        self.base = base
        self.m_reg = int(m_reg)
        self.rtol = rtol
        self.n_nodes = self._calibrate(n_nodes, max_nodes)

    def _calibrate(self, n, max_nodes):
        m = self.m_reg
        probe = np.linspace(-4.0, 4.0, 81)
        near = (self.base.kinks[:, None] + np.array([0.0, 0.3, 0.99, 1.0, 1.7]) / m).ravel()
        probe = np.concatenate([probe, near, -near])
        while n <= max_nodes:
            a = self._convolve(probe, n, slope=False)
            b = self._convolve(probe, 2 * n, slope=False)
            scale = max(1.0, float(np.max(np.abs(b))))
            if np.max(np.abs(a - b)) <= self.rtol * scale:
                return 2 * n
            n *= 2
        raise QuadratureError(
            f"mollified derivative did not converge to rtol={self.rtol} with {max_nodes} nodes")

    def _convolve(self, s, n, slope):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        m = self.m_reg
        kinks = self.base.kinks
        cuts = np.clip(m * (s[:, None] - kinks[None, :]), -1.0, 1.0)
        ends = np.sort(np.concatenate([-np.ones((len(s), 1)), cuts, np.ones((len(s), 1))], axis=1), axis=1)
        lo, hi = ends[:, :-1], ends[:, 1:]
        x, w = gauss_legendre(n)
        half = 0.5 * (hi - lo)
        t = 0.5 * (hi + lo)[..., None] + half[..., None] * x      # (ns, pieces, n)
        z = s[:, None, None] - t / m
        dj = self.base.derivative(z)
        kern = _bump_slope(t) if slope else _bump(t)
        vals = np.einsum("spn,n,sp->s", kern * dj, w, half) * BUMP_NORMALIZER
        if slope:
            vals = vals * m
        return vals

    def grad(self, s):
        """Mollified derivative ``Dj_m(s)``; exactly odd (zero at zero) for even potentials."""
        s_arr = np.asarray(s, dtype=float)
        flat = s_arr.ravel()
        if self.base.even:
            out = np.sign(flat) * self._convolve(np.abs(flat), self.n_nodes, slope=False)
        else:
            out = self._convolve(flat, self.n_nodes, slope=False)
        return out.reshape(s_arr.shape)

    __call__ = grad

    def hessian(self, s):
        """Derivative of ``Dj_m`` (exists everywhere, ``Dj_m`` being smooth)."""
        s_arr = np.asarray(s, dtype=float)
        flat = np.abs(s_arr.ravel()) if self.base.even else s_arr.ravel()
        return self._convolve(flat, self.n_nodes, slope=True).reshape(s_arr.shape)

    @cached_property
    def lipschitz(self) -> float:
        """Sampled Lipschitz constant of ``Dj_m``."""
        m = self.m_reg
        grid = np.concatenate([np.linspace(-10, 10, 2001)]
                              + [k + np.linspace(-1.0, 1.0, 201) / m for k in self.base.kinks])
        return float(np.max(np.abs(self.hessian(grid))))

    def growth_bound(self, s):
        return self.base.m0 * (1.0 + np.abs(s) + 1.0 / self.m_reg)


def mollified_grad(mlaw: MollifiedLaw, s):
    return mlaw.grad(s)


# -- hypothesis verification -------------------------------------------------

@dataclass
class HypothesisReport:
    """Outcome of checking the sign, growth and relaxed monotonicity conditions.

    ``margins`` holds the worst value of each condition written as
    ``quantity >= 0``; ``witnesses`` the slip value(s) where it occurs.
    """

    law: str
    margins: dict = field(default_factory=dict)
    witnesses: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def raise_if_failed(self):
        if self.failures:
            raise HypothesisError("; ".join(self.failures))

    def summary(self) -> str:
        lines = [f"law {self.law}: {'PASS' if self.ok else 'FAIL'}"]
        for key in sorted(self.margins):
            lines.append(f"  ({key}) worst margin {self.margins[key]:.3e} at {self.witnesses[key]}")
        lines.extend(f"  {f}" for f in self.failures)
        return "\n".join(lines)


def verify_hypotheses(law: FrictionLaw, grid=None, tol: float = 1e-12,
                      chunk: int = 1024) -> HypothesisReport:
    """Check sign (c), growth (d) and relaxed monotonicity (e) on a slip grid.

    Parameters
    ----------
    law : FrictionLaw
    grid : array_like, optional
        Slip samples; defaults to 10^4 points on [-10, 10] plus the kinks.
    tol : float
        Absolute slack for rounding.
    """
    if grid is None:
        grid = np.linspace(-10.0, 10.0, 10_000)
    s = np.unique(np.concatenate([np.asarray(grid, dtype=float).ravel(), law.kinks]))
    lo, hi = clarke_interval(law, s)
    rep = HypothesisReport(law=getattr(law, "name", type(law).__name__))

    j0 = float(law.potential(np.array(0.0)))
    rep.margins["a"] = -abs(j0)
    rep.witnesses["a"] = 0.0
    if abs(j0) > tol:
        rep.failures.append(f"(a) j(0) = {j0} != 0")

    sign = np.minimum(lo * s, hi * s)
    i = int(np.argmin(sign))
    rep.margins["c"] = float(sign[i])
    rep.witnesses["c"] = float(s[i])
    if sign[i] < -tol:
        rep.failures.append(f"(c) sign condition violated at s={s[i]:.6g}: zeta*s={sign[i]:.3e}")

    growth = law.m0 * (1.0 + np.abs(s)) - np.maximum(np.abs(lo), np.abs(hi))
    i = int(np.argmin(growth))
    rep.margins["d"] = float(growth[i])
    rep.witnesses["d"] = float(s[i])
    if growth[i] < -tol:
        rep.failures.append(
            f"(d) growth bound with m0={law.m0} violated at s={s[i]:.6g}: margin {growth[i]:.3e}")

    # (e): for s1 > s2 the worst pair is zeta1 = lo(s1), zeta2 = hi(s2)
    worst, wit = np.inf, (np.nan, np.nan)
    for a in range(0, len(s), chunk):
        s1, lo1 = s[a:a + chunk, None], lo[a:a + chunk, None]
        ds = s1 - s[None, :]
        margin = (lo1 - hi[None, :]) * ds + law.m1 * ds * ds
        margin = np.where(ds > 0, margin, np.inf)
        k = np.unravel_index(np.argmin(margin), margin.shape)
        if margin[k] < worst:
            worst, wit = float(margin[k]), (float(s[a + k[0]]), float(s[k[1]]))
    rep.margins["e"] = worst
    rep.witnesses["e"] = wit
    if worst < -tol:
        rep.failures.append(
            f"(e) relaxed monotonicity with m1={law.m1} violated at s1={wit[0]:.6g}, "
            f"s2={wit[1]:.6g}: margin {worst:.3e}")
    return rep


# -- boundary trace and loads -------------------------------------------------

class BoundaryTrace:
    """Tangential trace of velocity fields at Gauss points of the slip edges.

    ``matrix @ u`` gives the slip ``u . tau`` at every point; ``weights``
    are the corresponding line-quadrature weights.
    """

    def __init__(self, spaces: DiscreteSpaces, n_points: int = 4):
        mesh = spaces.mesh
        N = spaces.n_nodes
        xg, wg = gauss_legendre(n_points, 0.0, 1.0)
        rows, cols, vals, pts, wts, tau = [], [], [], [], [], []
        edges = np.flatnonzero(mesh.edge_tags == GAMMA1)
        for r0, k in enumerate(edges):
            a, b = mesh.nodes[mesh.boundary_edges[k]]
            t = side_frame(mesh.boundary_side[k]).tangent
            owner = mesh.boundary_owner[k]
            x = a[None, :] + xg[:, None] * (b - a)[None, :]
            ref = (x - spaces.x0[owner]) @ spaces.Jinv[owner].T
            phi = p2_basis(ref)
            dofs = spaces.elem_dofs[owner]
            for q in range(n_points):
                row = r0 * n_points + q
                for c in (0, 1):
                    if t[c] == 0.0:
                        continue
                    rows.extend([row] * 6)
                    cols.extend((c * N + dofs).tolist())
                    vals.extend((t[c] * phi[q]).tolist())
            pts.append(x)
            wts.append(wg * np.linalg.norm(b - a))
            tau.append(np.repeat(t[None, :], n_points, axis=0))
        import scipy.sparse as sp
        nq = len(edges) * n_points
        self.matrix = sp.coo_matrix((vals, (rows, cols)), shape=(nq, 2 * N)).tocsr()
        self.points = np.vstack(pts) if pts else np.zeros((0, 2))
        self.weights = np.concatenate(wts) if wts else np.zeros(0)
        self.tangents = np.vstack(tau) if tau else np.zeros((0, 2))

    @property
    def empty(self) -> bool:
        return self.weights.size == 0

    def slip(self, u):
        return self.matrix @ u

    def load(self, traction):
        """Velocity load ``v -> int traction * v_tau`` for traction values at the points."""
        return self.matrix.T @ (self.weights * traction)

    def mass(self, coef):
        """Boundary matrix ``int coef * u_tau * v_tau``."""
        import scipy.sparse as sp
        return (self.matrix.T @ sp.diags(self.weights * coef) @ self.matrix).tocsr()

    def norm(self, u) -> float:
        s = self.slip(u)
        return float(np.sqrt(np.sum(self.weights * s * s)))


def boundary_trace(spaces: DiscreteSpaces, n_points: int = 4) -> BoundaryTrace:
    cache = spaces.__dict__.setdefault("_trace_cache", {})
    if n_points not in cache:
        cache[n_points] = BoundaryTrace(spaces, n_points)
    return cache[n_points]


@dataclass
class FrictionTrace:
    points: np.ndarray
    slip: np.ndarray
    traction: np.ndarray
    weights: np.ndarray

    @property
    def power(self) -> float:
        return float(np.sum(self.weights * self.traction * self.slip))


def friction_trace(spaces: DiscreteSpaces, mlaw: MollifiedLaw, u) -> FrictionTrace:
    tr = boundary_trace(spaces)
    s = tr.slip(u)
    return FrictionTrace(tr.points, s, mlaw.grad(s) if s.size else s.copy(), tr.weights)


def assemble_friction_load(spaces: DiscreteSpaces, mlaw: MollifiedLaw, u) -> np.ndarray:
    """Velocity load ``v -> int_{Gamma1} Dj_m(u_tau) v_tau`` with 4 Gauss points per edge."""
    tr = boundary_trace(spaces)
    if tr.empty:
        return np.zeros(spaces.n_velocity)
    return tr.load(mlaw.grad(tr.slip(u)))


def dissipation_floor(mlaw: MollifiedLaw, smax: float = 10.0, n: int = 20001) -> float:
    """``delta(m) = max(0, -min_s s Dj_m(s))`` from dense sampling of ``[-smax, smax]``."""
    s = np.linspace(-smax, smax, n)
    return float(max(0.0, -np.min(s * mlaw.grad(s))))
