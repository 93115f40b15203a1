"""Acceptance criteria, one test each; a summary line per criterion is printed at the end."""
import time

import numpy as np
import pytest
import scipy.linalg as sla
from scipy.sparse.linalg import splu

from miscible_slip.cli import main
from miscible_slip.config import ProblemConfig
from miscible_slip.diagnostics import stability_study
from miscible_slip.forms import (assemble_constant_forms, convection_forms, korteweg_tensor,
                                 skew_convection_matrix, symmetric_gradient_norm_sq)
from miscible_slip.friction import MollifiedLaw, dissipation_floor, make_law, verify_hypotheses
from miscible_slip.geometry import build_rect_mesh, partition_from_slip_sides
from miscible_slip.spaces import apply_constraints, build_spaces
from miscible_slip.stepper import run
from miscible_slip.verification import (couette_comparison, galerkin_study, korteweg_identity_check,
                                        manufactured_convergence)


def _spaces(n):
    return build_spaces(build_rect_mesh(n, n, partition=partition_from_slip_sides(["bottom"])))


def test_criterion_01_korteweg_pointwise(acceptance):
    start = time.perf_counter()
    g = np.linspace(-3.0, 3.0, 10)
    cx, cy = (a.ravel() for a in np.meshgrid(g, g[::-1] * 0.7))
    ks = np.linspace(0.0, 2.5, 100)
    worst = 0.0
    for a, b, k in zip(cx, cy, ks):
        K = korteweg_tensor(np.array([a, b]), k)
        ref = np.array([[k * b * b, -k * a * b], [-k * a * b, k * a * a]])
        worst = max(worst, float(np.max(np.abs(K - ref) / np.maximum(np.abs(ref), 1e-300))))
    K = korteweg_tensor(np.stack([cx, cy], axis=-1), 1.3)
    ref = np.empty_like(K)
    ref[:, 0, 0], ref[:, 1, 1] = 1.3 * cy * cy, 1.3 * cx * cx
    ref[:, 0, 1] = ref[:, 1, 0] = -1.3 * cx * cy
    worst = max(worst, float(np.max(np.abs(K - ref))))
    secs = time.perf_counter() - start
    acceptance(1, "Korteweg pointwise formula", f"max rel dev {worst:.1e}")
    assert worst <= 1e-15
    assert secs < 1.0


def test_criterion_02_korteweg_identity(acceptance):
    start = time.perf_counter()
    cos = korteweg_identity_check()
    mixed = korteweg_identity_check(concentration="mixed")
    secs = time.perf_counter() - start
    acceptance(2, "Korteweg dual-formula identity",
               f"rel diff cosine {cos.relative_difference:.1e}, mixed {mixed.relative_difference:.1e}")
    assert cos.relative_difference <= 1e-10
    assert mixed.relative_difference <= 1e-10
    assert abs(mixed.reduced_form) > 1e-3
    assert secs < 5.0


def test_criterion_03_skew_diagonal_vanishing(acceptance, rng):
    S = _spaces(8)
    F = assemble_constant_forms(S, 1.0, 1.0)
    l2u = lambda x: float(np.sqrt(x @ (F.M_u @ x)))
    l2c = lambda x: float(np.sqrt(x @ (F.M_c @ x)))
    worst_a = worst_b = 0.0
    for _ in range(20):
        u, v = rng.standard_normal((2, S.n_velocity))
        eta = rng.standard_normal(S.n_concentration)
        _, a_sk = convection_forms(S, u, v, v)
        b_sk = float(eta @ (skew_convection_matrix(S, u) @ eta))
        worst_a = max(worst_a, abs(a_sk) / (l2u(u) * l2u(v) ** 2))
        worst_b = max(worst_b, abs(b_sk) / (l2u(u) * l2c(eta) ** 2))
    acceptance(3, "skew-form diagonal vanishing", f"a1 {worst_a:.1e}, b1 {worst_b:.1e}")
    assert worst_a <= 1e-12
    assert worst_b <= 1e-12


def _inverse_iteration(A, H, iters=5000, tol=1e-10):
    """Smallest eigenvalue of the pencil (A, H); stops on the relative eigen-residual."""
    lu = splu(A.tocsc())
    x = np.ones(A.shape[0])
    x /= np.sqrt(x @ (H @ x))
    lam = float(x @ (A @ x))
    for _ in range(iters):
        y = lu.solve(H @ x)
        x = y / np.sqrt(y @ (H @ y))
        lam = float(x @ (A @ x))
        r = A @ x - lam * (H @ x)
        if np.linalg.norm(r) <= tol * lam * np.linalg.norm(H @ x):
            break
    return lam


def test_criterion_04_discrete_korn(acceptance, rng):
    lams = {}
    dense = None
    for n in (8, 16):
        S = _spaces(n)
        F = assemble_constant_forms(S, 1.0, 1.0)
        A = apply_constraints(S, F.A0, np.zeros(S.n_velocity)).matrix
        H = apply_constraints(S, F.H1_u, np.zeros(S.n_velocity)).matrix
        lams[n] = _inverse_iteration(A, H)
        if n == 8:
            dense = float(sla.eigh(A.toarray(), H.toarray(), eigvals_only=True)[0])
    S = _spaces(8)
    nu0 = 0.7
    F = assemble_constant_forms(S, nu0, 1.0)
    worst = 0.0
    for _ in range(20):
        u = rng.standard_normal(S.n_velocity)
        a = float(u @ (F.A0 @ u))
        worst = max(worst, abs(a - 2 * nu0 * symmetric_gradient_norm_sq(S, u)) / a)
    acceptance(4, "discrete Korn / coercivity",
               f"lambda_min 8x8 {lams[8]:.4f}, 16x16 {lams[16]:.4f}; a0 identity {worst:.1e}")
    assert lams[8] > 0 and lams[16] > 0
    assert lams[8] == pytest.approx(dense, rel=1e-8)
    assert worst <= 1e-12


def test_criterion_05_concentration_energy_law(acceptance):
    cfg = ProblemConfig.from_dict({
        "domain": {"slip_sides": ["bottom"]},
        "physics": {"nu0": 1.0, "d": 0.1, "k": 0.01, "T": 0.25, "force": "vortex",
                    "force_params": {"amplitude": 20.0}, "C0": "gaussian", "g": "zero"},
        "friction": {"law": "exp_decay", "m_reg": 64},
        "discretization": {"nx": 16, "ny": 16, "dt": 1e-3},
    })
    res = run(cfg, keep_states=True)
    ratios = np.array([r.est1_residual / r.est1_scale for r in res.records])
    M = res.problem.forms.M_c
    norms = np.array([np.sqrt(s.C @ (M @ s.C)) for s in res.states])
    growth = float(np.max(np.diff(norms) / norms[:-1]))
    acceptance(5, "concentration energy law",
               f"{len(res.records)} steps, max r1/scale {ratios.max():.1e}, max rel growth {growth:.1e}")
    assert len(res.records) == 250
    assert np.all(ratios <= 1e-10)
    assert growth <= 1e-14


def test_criterion_06_friction_hypotheses_and_mollification(acceptance):
    ms = (8, 16, 32, 64)
    exp_law, saw = make_law("exp_decay"), make_law("sawtooth")
    reports = [verify_hypotheses(law) for law in (exp_law, saw)]
    # smooth points: farther than 1/8 from every kink
    s_exp = np.array([0.3, 0.7, 1.5, -0.5, -2.0])
    err = [float(np.max(np.abs(MollifiedLaw(exp_law, m).grad(s_exp) - exp_law.derivative(s_exp))))
           for m in ms]
    orders = np.log2(np.array(err[:-1]) / np.array(err[1:]))
    # piecewise linear between kinks: mollification reproduces j' exactly there
    s_saw = np.array([0.25, 0.75, 1.3, -0.7, 2.2])
    saw_err = max(float(np.max(np.abs(MollifiedLaw(saw, m).grad(s_saw) - saw.derivative(s_saw))))
                  for m in ms)
    floors, bounds = {}, {}
    for law in (exp_law, saw):
        for m in ms:
            floors[law.name, m] = dissipation_floor(MollifiedLaw(law, m))
            # s Dj_m(s) >= -(1/m) m0 (1 + 1/m) from the growth bound on the window |s| < 1/m
            bounds[law.name, m] = law.m0 * (1.0 + 1.0 / m) / m
    acceptance(6, "friction hypotheses and mollification",
               f"orders {np.round(orders, 2).tolist()}, sawtooth err {saw_err:.1e}")
    assert all(r.ok for r in reports), [r.failures for r in reports]
    assert np.all(orders >= 1.0)
    assert saw_err <= 1e-12
    for law in (exp_law, saw):
        assert all(floors[law.name, m] <= bounds[law.name, m] for m in ms)
        assert floors[law.name, 64] <= floors[law.name, 8]


def test_criterion_07_couette_oracle(acceptance):
    start = time.perf_counter()
    cmp = couette_comparison()
    secs = time.perf_counter() - start
    acceptance(7, "Couette friction oracle",
               f"slip 2D {cmp.slip_2d:.6f} vs 1D {cmp.oracle.slip:.6f}, rel err {cmp.relative_error:.1e}")
    assert cmp.relative_error <= 1e-3
    assert secs < 300


def test_criterion_08_manufactured_convergence(acceptance):
    table = manufactured_convergence(levels=(4, 8, 16, 32))
    ov, oc = table.orders["velocity"][-1], table.orders["concentration"][-1]
    acceptance(8, "manufactured convergence", f"finest orders velocity {ov:.2f}, concentration {oc:.2f}")
    assert oc >= 2.5
    assert ov >= 2.5


@pytest.fixture(scope="module")
def stability_config():
    return ProblemConfig.from_dict({
        "domain": {"slip_sides": ["bottom"]},
        "physics": {"nu0": 1.0, "d": 0.1, "k": 0.01, "T": 0.5, "force": "zero",
                    "u0": "vortex", "u0_params": {"amplitude": 2.0}, "C0": "gaussian"},
        "friction": {"law": "exp_decay", "m_reg": 64},
        "discretization": {"nx": 16, "ny": 16, "dt": 0.01},
    })


def test_criterion_09_continuous_dependence(acceptance, stability_config):
    hyp = verify_hypotheses(stability_config.make_law())
    base = run(stability_config, keep_states=True)
    amps = [stability_study(stability_config, d0, base=base).amplification for d0 in (1e-2, 5e-3)]
    ratio = amps[0] / amps[1]
    acceptance(9, "continuous dependence",
               f"amplification {amps[0]:.4e} / {amps[1]:.4e} = {ratio:.4f}")
    assert hyp.ok and hyp.margins["e"] >= -1e-12
    assert 0.5 <= ratio <= 2.0


def test_criterion_10_galerkin_proxy(acceptance):
    study = galerkin_study(levels=(4, 8, 16, 32))
    acceptance(10, "Galerkin convergence proxy",
               "differences " + ", ".join(f"{d:.2e}" for d in study.differences))
    assert len(study.differences) == 3
    assert study.strictly_decreasing


def test_criterion_11_determinism(acceptance, tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(
        '[domain]\nslip_sides = ["bottom"]\n'
        '[physics]\nnu0 = 1.0\nd = 0.1\nk = 0.01\nT = 0.1\nforce = "vortex"\nC0 = "gaussian"\n'
        '[physics.force_params]\namplitude = 20.0\n'
        '[friction]\nlaw = "sawtooth"\nm_reg = 32\n'
        '[discretization]\nnx = 8\nny = 8\ndt = 0.01\n')
    for name in ("a", "b"):
        assert main(["run", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "timeseries.csv").read_bytes()
    b = (tmp_path / "b" / "timeseries.csv").read_bytes()
    acceptance(11, "determinism", f"{len(a)} bytes, identical={a == b}")
    assert a == b
