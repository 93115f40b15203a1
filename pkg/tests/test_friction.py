import numpy as np
import pytest
from scipy.integrate import quad

from miscible_slip.exceptions import HypothesisError, QuadratureError
from miscible_slip.friction import (BUMP_NORMALIZER, ExpDecayLaw, MollifiedLaw, PiecewiseLinearLaw,
                                    QuadraticLaw, ZeroLaw, assemble_friction_load, boundary_trace,
                                    clarke_interval, dissipation_floor, friction_trace, make_law,
                                    mollified_grad, mollifier, sawtooth_law, verify_hypotheses)
from miscible_slip.geometry import build_rect_mesh, partition_from_slip_sides
from miscible_slip.spaces import build_spaces, interpolate

SMOOTH = np.array([-2.3, -0.7, 0.4, 1.1, 2.9])


@pytest.mark.parametrize("law", [ExpDecayLaw(), sawtooth_law(), QuadraticLaw(2.0)], ids=str)
def test_derivative_matches_potential(law):
    s = np.array([-2.3, -0.7, 0.4, 0.6, 1.1, 2.9])
    h = 1e-6
    fd = (law.potential(s + h) - law.potential(s - h)) / (2 * h)
    assert np.allclose(law.derivative(s), fd, atol=1e-7)
    assert law.potential(np.array(0.0)) == 0.0


def test_exp_decay_values_and_clarke():
    law = ExpDecayLaw(mu_s=0.5, mu_0=1.5, alpha=2.0)
    assert law.derivative(np.array(1.0)) == pytest.approx(0.5 + np.exp(-2.0))
    lo, hi = clarke_interval(law, np.array([0.0, 1.0]))
    assert lo.tolist() == [-1.5, pytest.approx(0.5 + np.exp(-2.0))]
    assert hi[0] == 1.5
    assert law.m0 == 1.5 and law.m1 == 2.0


def test_sawtooth_jumps():
    law = sawtooth_law(mu_s=0.5, mu_0=1.5, width=0.5, teeth=2)
    assert law.kinks.tolist() == [-1.0, -0.5, 0.0, 0.5, 1.0]
    lo, hi = clarke_interval(law, np.array([0.5, -0.5, 0.0, 2.0]))
    assert (lo[0], hi[0]) == (0.5, 1.5)
    assert (lo[1], hi[1]) == (-1.5, -0.5)
    assert (lo[2], hi[2]) == (-1.5, 1.5)
    assert lo[3] == hi[3] == 0.5
    assert law.m1 == pytest.approx(2.0)


def test_piecewise_validation():
    with pytest.raises(HypothesisError):
        PiecewiseLinearLaw([0.1, 1.0], [1.0], [1.0])
    with pytest.raises(HypothesisError):
        PiecewiseLinearLaw([0.0, 1.0], [1.0, 2.0], [1.0])
    with pytest.raises(HypothesisError):
        ExpDecayLaw(mu_s=2.0, mu_0=1.0)
    with pytest.raises(HypothesisError):
        ExpDecayLaw(alpha=0.0)
    with pytest.raises(HypothesisError):
        QuadraticLaw(-1.0)


def test_registry():
    assert isinstance(make_law("exp_decay", mu_s=0.2), ExpDecayLaw)
    assert make_law("sawtooth").name == "sawtooth"
    assert isinstance(make_law("zero"), ZeroLaw)
    with pytest.raises(HypothesisError, match="unknown friction law"):
        make_law("coulomb")
    assert "mu_s=0.5" in repr(ExpDecayLaw())


@pytest.mark.parametrize("law", [ExpDecayLaw(), sawtooth_law(), QuadraticLaw(), ZeroLaw()], ids=str)
def test_hypotheses_hold_for_builtin_laws(law):
    rep = verify_hypotheses(law)
    assert rep.ok, rep.summary()
    assert set(rep.margins) == {"a", "c", "d", "e"}
    rep.raise_if_failed()


def test_relaxed_monotonicity_violation_is_reported():
    law = ExpDecayLaw(m1=0.5)    # the true constant is 2
    rep = verify_hypotheses(law)
    assert not rep.ok
    assert rep.margins["e"] < 0
    s1, s2 = rep.witnesses["e"]
    assert s1 > s2
    assert "relaxed monotonicity" in rep.summary()
    with pytest.raises(HypothesisError):
        rep.raise_if_failed()


def test_sign_and_growth_violations_are_reported():
    rep = verify_hypotheses(PiecewiseLinearLaw([0.0, 1.0], [-1.0], [-1.0]))
    assert any(f.startswith("(c)") for f in rep.failures)
    rep = verify_hypotheses(QuadraticLaw(3.0, m0=1.0))
    assert any(f.startswith("(d)") for f in rep.failures)


def test_mollifier_mass_and_support():
    for m in (1, 8, 64):
        x = np.linspace(-1.0 / m, 1.0 / m, 200001)
        assert np.trapezoid(mollifier(x, m), x) == pytest.approx(1.0, rel=1e-8)
    assert mollifier(np.array([1.0 / 8, 0.2, -1.0]), 8).tolist() == [0.0, 0.0, 0.0]
    assert BUMP_NORMALIZER == pytest.approx(1 / 0.443993816168079, rel=1e-12)


def adaptive_convolution(law, m, s):
    # independent oracle: adaptive quadrature split at the kinks inside the support
    out = []
    for si in s:
        brk = [si - k for k in law.kinks if abs(si - k) < 1.0 / m]
        val, _ = quad(lambda t: float(mollifier(np.array(t), m) * law.derivative(np.array(si - t))),
                      -1.0 / m, 1.0 / m, points=brk or None, epsabs=1e-13, epsrel=1e-13, limit=400)
        out.append(val)
    return np.array(out)


@pytest.mark.parametrize("law", [ExpDecayLaw(), sawtooth_law()], ids=str)
def test_mollified_gradient_against_dense_convolution(law):
    m = 16
    s = np.array([-0.52, -0.03, 0.0, 0.01, 0.04, 0.49, 0.5, 0.55, 1.0, 1.7])
    ml = MollifiedLaw(law, m)
    assert np.allclose(ml.grad(s), adaptive_convolution(law, m, s), atol=1e-10)
    assert np.array_equal(mollified_grad(ml, s), ml.grad(s))
    assert np.allclose(ml.grad(-s), -ml.grad(s), atol=1e-14)


def test_mollified_hessian_matches_finite_difference():
    ml = MollifiedLaw(ExpDecayLaw(), 8)
    s = np.array([-0.2, -0.05, 0.0, 0.03, 0.1, 0.5])
    h = 1e-6
    fd = (ml.grad(s + h) - ml.grad(s - h)) / (2 * h)
    assert np.allclose(ml.hessian(s), fd, rtol=1e-6, atol=1e-6)
    # steepest ascent at the origin: mass times the jump 2 mu_0 spread over the support
    assert ml.lipschitz >= ml.hessian(np.array(0.0))


def test_mollified_law_reproduces_smooth_derivative_far_from_kinks():
    ml = MollifiedLaw(QuadraticLaw(2.0), 4)
    # symmetric kernel: the convolution of a linear function is exact
    assert np.allclose(ml.grad(SMOOTH), 2.0 * SMOOTH, atol=1e-12)


def test_mollified_law_validation():
    with pytest.raises(HypothesisError):
        MollifiedLaw(ExpDecayLaw(), 0)
    with pytest.raises(HypothesisError):
        MollifiedLaw(ExpDecayLaw(), 2.5)
    with pytest.raises(QuadratureError):
        MollifiedLaw(ExpDecayLaw(), 64, rtol=1e-15, n_nodes=4, max_nodes=8)


def test_growth_bound_holds():
    ml = MollifiedLaw(sawtooth_law(), 8)
    s = np.linspace(-5, 5, 1001)
    assert np.all(np.abs(ml.grad(s)) <= ml.growth_bound(s))


def test_dissipation_floor_shrinks():
    floors = [dissipation_floor(MollifiedLaw(ExpDecayLaw(), m)) for m in (8, 64)]
    assert all(f >= 0 for f in floors)
    assert floors[1] <= floors[0]


@pytest.fixture(scope="module")
def slip_spaces():
    return build_spaces(build_rect_mesh(6, 3, 2.0, 1.0, partition_from_slip_sides(["bottom", "right"])))


def test_boundary_trace_geometry(slip_spaces):
    tr = boundary_trace(slip_spaces)
    assert tr is boundary_trace(slip_spaces)
    assert tr.weights.sum() == pytest.approx(3.0, rel=1e-14)
    bottom = tr.points[:, 1] == 0.0
    assert np.allclose(tr.tangents[bottom], [1.0, 0.0])
    assert np.allclose(tr.tangents[~bottom], [0.0, 1.0])


def test_trace_of_polynomial_field(slip_spaces):
    tr = boundary_trace(slip_spaces)
    u = interpolate(slip_spaces, lambda p: np.column_stack([p[:, 0] ** 2, p[:, 1]]))
    s = tr.slip(u)
    expect = np.where(tr.points[:, 1] == 0.0, tr.points[:, 0] ** 2, tr.points[:, 1])
    assert np.allclose(s, expect, atol=1e-13)
    # int_bottom x^4 + int_right y^2
    assert tr.norm(u) ** 2 == pytest.approx(32 / 5 + 1 / 3, rel=1e-13)
    assert u @ tr.mass(np.ones_like(s)) @ u == pytest.approx(32 / 5 + 1 / 3, rel=1e-13)


def test_friction_load_and_power(slip_spaces):
    ml = MollifiedLaw(ExpDecayLaw(), 16)
    u = interpolate(slip_spaces, lambda p: np.column_stack([np.full(len(p), 1.5), np.zeros(len(p))]))
    load = assemble_friction_load(slip_spaces, ml, u)
    ft = friction_trace(slip_spaces, ml, u)
    # slip is 1.5 on the bottom and 0 on the right side
    assert load @ u == pytest.approx(2.0 * 1.5 * float(ml.grad(np.array(1.5))), rel=1e-12)
    assert ft.power == pytest.approx(load @ u, rel=1e-12)
    noslip = build_spaces(build_rect_mesh(2, 2))
    assert np.all(assemble_friction_load(noslip, ml, np.zeros(noslip.n_velocity)) == 0)
