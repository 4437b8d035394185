import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ETA, central_jacobian, stress_energy, velocity_addition
from torushyp import (
    EquationOfState,
    SolveConfig,
    TorusField,
    TorusGrid,
    assemble_symbol,
    boosted_speeds,
    bulk_inequalities,
    bulk_state,
    burgers_breaking_time,
    characteristic_speeds,
    check_admissible,
    eigendecompose,
    euler_state,
    four_velocity,
    make_advection,
    make_bulk_viscous,
    make_burgers,
    make_relativistic_euler,
    make_sink,
    picard_solve,
    velocity_norm,
)
from torushyp.errors import AdmissibilityViolation, SingularTimeMatrix
from torushyp.models import bulk_covariant_matrices, euler_covariant_matrices

BULK_EOS = EquationOfState.mixed(0.2, 0.1, 1.5)
TAU, ZETA = 1.3, 0.2


# ---------------------------------------------------------- equations of state


@pytest.mark.parametrize("eos", [
    EquationOfState.barotropic(0.5, 1.6),
    EquationOfState.linear(0.3),
    EquationOfState.mixed(0.2, 0.1, 1.5),
])
def test_eos_partials_match_finite_differences(eos):
    rho, aux, h = 0.9, 1.1, 1e-6
    d_rho = (eos.p(rho + h, aux) - eos.p(rho - h, aux)) / (2 * h)
    d_aux = (eos.p(rho, aux + h) - eos.p(rho, aux - h)) / (2 * h)
    assert float(eos.dp_drho(rho, aux)) == pytest.approx(float(d_rho), rel=1e-8)
    assert float(eos.dp_daux(rho, aux)) == pytest.approx(float(d_aux), abs=1e-8)


def test_tabulated_eos_is_monotone_and_reads_csv(tmp_path):
    rho = np.linspace(0.1, 3.0, 12)
    path = tmp_path / "eos.csv"
    path.write_text("rho,p\n" + "".join(f"{float(r)!r},{0.3 * float(r) ** 1.4!r}\n" for r in rho))
    eos = EquationOfState.from_csv(path)
    fine = np.linspace(0.1, 3.0, 400)
    assert np.all(np.diff(eos.p(fine, 0)) > 0)
    assert np.all(eos.dp_drho(fine, 0) > 0)
    assert float(eos.p(1.0, 0)) == pytest.approx(0.3, rel=1e-3)
    with pytest.raises(ValueError):
        EquationOfState.tabulated([1.0, 1.0], [0.1, 0.2])
    (tmp_path / "bad.csv").write_text("x,y\n1,2\n")
    with pytest.raises(ValueError):
        EquationOfState.from_csv(tmp_path / "bad.csv")


# ------------------------------------------------------------------- toys


def test_advection_speeds_and_gap():
    sys = make_advection([1.0, -1.0])
    np.testing.assert_allclose(characteristic_speeds(sys, 0.0, None, [0.0, 0.0], [1.0]), [-1, 1])
    es = eigendecompose(assemble_symbol(sys, 0.0, [0.0], [0.0, 0.0], [1.0]))
    assert es.gap == 2.0


def test_burgers_symbol_and_breaking_time():
    sys = make_burgers()
    assert assemble_symbol(sys, 0.0, [0.0], [2.0], [1.0])[0, 0] == 2.0
    assert eigendecompose(assemble_symbol(sys, 0.0, [0.0], [2.0], [1.0])).P[0, 0] == 1.0
    np.testing.assert_allclose(characteristic_speeds(sys, 0.0, None, [0.0], [1.0]), [0.0])
    x = np.linspace(0, 2 * math.pi, 1001)
    assert burgers_breaking_time(float(np.min(np.cos(x)))) == pytest.approx(1.0)
    assert burgers_breaking_time(0.0) == math.inf


def test_sink_margin_is_the_state_itself():
    sys = make_sink()
    z = np.array([[0.1, 0.5, 2.0]])
    np.testing.assert_allclose(sys.domain.margin(z), [0.1, 0.5, 2.0], rtol=1e-8)
    assert not sys.domain.contains(np.array([0.0]))


# ------------------------------------------------------- relativistic Euler


def test_rest_frame_speeds_for_radiation_fluid():
    sys = make_relativistic_euler(EquationOfState.linear(1.0 / 3.0))
    speeds = characteristic_speeds(sys, 0.0, None, euler_state([0, 0, 0], 1.0, 0.0), [1, 0, 0])
    c = 1 / math.sqrt(3)
    np.testing.assert_allclose(speeds, [-c, 0, 0, 0, 0, c], atol=1e-12)


def test_stiff_fluid_speeds_reach_light_speed_and_stay_admissible():
    sys = make_relativistic_euler(EquationOfState.linear(1.0))
    z = euler_state([0, 0, 0], 1.0, 0.0)
    check_admissible(sys, z)
    np.testing.assert_allclose(characteristic_speeds(sys, 0.0, None, z, [0, 1, 0])[[0, -1]],
                               [-1.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("v", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("cs", [0.2, 0.6, 1.0])
def test_boosted_speeds_follow_velocity_addition(v, cs):
    sys = make_relativistic_euler(EquationOfState.linear(cs * cs), N=1)
    speeds = characteristic_speeds(sys, 0.0, None, euler_state([v, 0, 0], 1.0, 0.0), [1.0])
    lo, hi = velocity_addition(v, cs)
    assert speeds[0] == pytest.approx(lo, abs=1e-10)
    assert speeds[-1] == pytest.approx(hi, abs=1e-10)
    np.testing.assert_allclose(speeds[1:-1], v, atol=1e-10)
    assert boosted_speeds(v, cs) == pytest.approx((lo, hi), abs=1e-15)


def test_euler_speeds_are_causal_over_admissible_states():
    eos = EquationOfState.barotropic(0.5, 1.6)
    sys = make_relativistic_euler(eos)
    rng = np.random.default_rng(12)
    checked = 0
    while checked < 1000:
        d = rng.standard_normal(3)
        v = d / np.linalg.norm(d) * rng.uniform(0, 0.99)
        z = euler_state(v, rng.uniform(0.01, 1.45), rng.uniform(-1, 1))
        if not sys.domain.contains(z):
            continue
        xi = rng.standard_normal(3)
        speeds = characteristic_speeds(sys, 0.0, None, z, xi)
        assert np.max(np.abs(speeds)) <= 1 + 1e-9
        checked += 1


def test_singular_time_matrix_is_reported():
    sys = make_relativistic_euler(EquationOfState.linear(0.3))
    z = euler_state([0, 0, 0], 1.0, 0.0)
    z[:4] = [0.0, 1.0, 0.0, 0.0]  # spacelike velocity makes A^0 singular
    with pytest.raises(SingularTimeMatrix):
        assemble_symbol(sys, 0.0, np.zeros(3), z, [1, 0, 0], closure=True)


def test_euler_admissibility_names_failing_condition():
    sys = make_relativistic_euler(EquationOfState.linear(1.5))
    with pytest.raises(AdmissibilityViolation) as info:
        check_admissible(sys, euler_state([0, 0, 0], 1.0, 0.0))
    assert info.value.inequality == "dp/drho<=1"


# ------------------------------------------------- covariant linearization


def _spacetime_field(X, params, n_scalars):
    """Smooth spacetime field with an exactly normalized four-velocity."""
    a, b, c = params
    v = 0.3 * np.tanh(a @ X + c[:3])
    u = four_velocity(v)
    scalars = 1.0 + 0.2 * np.sin(b[:n_scalars] @ X + c[3:3 + n_scalars])
    return u, scalars


def _random_params(seed, n_scalars):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((3, 4)), rng.standard_normal((n_scalars, 4)), rng.uniform(0, 1, 3 + n_scalars)


@pytest.mark.parametrize("seed", range(5))
def test_euler_matrices_reproduce_projected_conservation_laws(seed):
    eos = EquationOfState.barotropic(0.4, 1.5)
    params = _random_params(seed, 2)
    X0 = np.random.default_rng(seed + 50).uniform(-1, 1, 4)

    def phi(X):
        u, sc = _spacetime_field(X, params, 2)
        return np.concatenate([u, sc])

    def T(X):
        u, (rho, s) = _spacetime_field(X, params, 2)
        return stress_energy(rho, eos.p(rho, s), 0.0, u)

    dphi = central_jacobian(phi, X0)               # (6, 4)
    divT = np.einsum("mnm->n", central_jacobian(T, X0))
    u, (rho, s) = _spacetime_field(X0, params, 2)
    ds = dphi[5]
    proj = np.eye(4) + np.outer(u, ETA @ u)        # Pi^b_n
    expected = np.concatenate([proj @ divT, [-(ETA @ u) @ divT], [u @ ds]])
    A = euler_covariant_matrices(eos, phi(X0))     # (4, 6, 6)
    lhs = np.einsum("aij,ja->i", A, dphi)
    np.testing.assert_allclose(lhs, expected, atol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_bulk_matrices_reproduce_conservation_and_relaxation_laws(seed):
    eos = BULK_EOS
    params = _random_params(seed, 3)
    X0 = np.random.default_rng(seed + 70).uniform(-1, 1, 4)

    def fields(X):
        u, sc = _spacetime_field(X, params, 3)
        rho, n, Pi = sc[0], sc[1], sc[2] - 1.05
        return u, rho, n, Pi

    def phi(X):
        u, rho, n, Pi = fields(X)
        return np.concatenate([u, [rho, n, Pi]])

    def T(X):
        u, rho, n, Pi = fields(X)
        return stress_energy(rho, eos.p(rho, n), Pi, u)

    def N(X):
        u, rho, n, Pi = fields(X)
        return n * u

    dphi = central_jacobian(phi, X0)
    divT = np.einsum("mnm->n", central_jacobian(T, X0))
    divN = np.trace(central_jacobian(N, X0))
    u, rho, n, Pi = fields(X0)
    div_u = np.trace(dphi[:4])
    proj = np.eye(4) + np.outer(u, ETA @ u)
    relax = TAU * u @ dphi[6] + ZETA * div_u
    expected = np.concatenate([proj @ divT, [-(ETA @ u) @ divT], [divN], [relax]])
    tau = lambda r, nn, p: TAU * np.ones_like(np.asarray(r, float))
    zeta = lambda r, nn, p: ZETA * np.ones_like(np.asarray(r, float))
    A, R = bulk_covariant_matrices(eos, tau, zeta, phi(X0))
    lhs = np.einsum("aij,ja->i", A, dphi)
    np.testing.assert_allclose(lhs, expected, atol=1e-7)
    np.testing.assert_allclose(R, [0, 0, 0, 0, 0, 0, -Pi])


@given(st.integers(0, 10 ** 6))
def test_evolution_form_preserves_velocity_normalization(seed):
    rng = np.random.default_rng(seed)
    sys = make_bulk_viscous(BULK_EOS, TAU, ZETA)
    z = bulk_state(rng.uniform(-0.4, 0.4, 3), rng.uniform(0.8, 1.2), rng.uniform(0.8, 1.2),
                   rng.uniform(-0.01, 0.01))
    u_low = ETA @ z[:4]
    # spatial gradients consistent with the normalization constraint
    grads = rng.standard_normal((3, 7))
    for g in grads:
        g[:4] -= (u_low @ g[:4]) / (u_low @ z[:4]) * z[:4]
    dt = -sum(np.asarray(sys.coeff(0.0, np.zeros(3), z, j)) @ grads[j] for j in range(3))
    dt = dt + np.asarray(sys.source(0.0, np.zeros(3), z))
    assert abs(u_low @ dt[:4]) < 1e-10 * (1 + np.abs(dt).max())


# ------------------------------------------------------- bulk viscosity


def test_vanishing_viscosity_recovers_effective_sound_speed():
    rho, n = 1.0, 1.0
    sys = make_bulk_viscous(BULK_EOS, tau=1.0, zeta=1e-12)
    z = bulk_state([0, 0, 0], rho, n, 0.0)
    p = float(BULK_EOS.p(rho, n))
    c2 = float(BULK_EOS.dp_drho(rho, n) + n / (rho + p) * BULK_EOS.dp_daux(rho, n))
    speeds = characteristic_speeds(sys, 0.0, None, z, [1, 0, 0])
    assert speeds[-1] == pytest.approx(math.sqrt(c2), abs=1e-8)
    assert speeds[0] == pytest.approx(-math.sqrt(c2), abs=1e-8)
    np.testing.assert_allclose(speeds[1:-1], 0.0, atol=1e-8)


def test_bulk_sound_speed_includes_viscous_contribution():
    rho, n = 1.0, 1.0
    sys = make_bulk_viscous(BULK_EOS, TAU, ZETA)
    p = float(BULK_EOS.p(rho, n))
    c2 = 0.2 + (n * float(BULK_EOS.dp_daux(rho, n)) + ZETA / TAU) / (rho + p)
    speeds = characteristic_speeds(sys, 0.0, None, bulk_state([0, 0, 0], rho, n), [0, 0, 1])
    assert speeds[-1] == pytest.approx(math.sqrt(c2), abs=1e-10)


def test_bulk_inequalities_are_named_in_order():
    names = [c.name for c in bulk_inequalities(BULK_EOS, lambda *a: 1.0, lambda *a: 1.0)]
    assert names[:6] == ["rho+p+Pi>0", "n>0", "dp/drho>0", "dp/dn>0", "tau>0", "zeta>0"]
    assert len(names) == 8


def test_acausal_state_is_rejected_before_solving():
    sys = make_bulk_viscous(BULK_EOS, tau=0.1, zeta=1.0, N=1)
    g = TorusGrid(1, 8)
    vals = np.stack([bulk_state([0, 0, 0], 1.0, 1.0)] * 8, axis=1)
    with pytest.raises(AdmissibilityViolation) as info:
        picard_solve(sys, TorusField(g, vals), SolveConfig())
    assert "zeta/tau" in info.value.inequality


def test_margin_vanishes_on_the_causality_boundary():
    rho, n = 1.0, 1.0
    p = float(BULK_EOS.p(rho, n))
    h = rho + p
    zeta_star = TAU * (h * (1 - 0.2) - n * float(BULK_EOS.dp_daux(rho, n)))
    z = bulk_state([0, 0, 0], rho, n)
    on = make_bulk_viscous(BULK_EOS, TAU, zeta_star)
    assert bool(on.domain.contains(z))
    assert float(on.domain.margin(z)) == pytest.approx(0.0, abs=1e-12)
    inside = make_bulk_viscous(BULK_EOS, TAU, 0.9 * zeta_star)
    assert float(inside.domain.margin(z)) > 0
    outside = make_bulk_viscous(BULK_EOS, TAU, 1.01 * zeta_star)
    assert float(outside.domain.margin(z)) == 0.0
    assert not bool(outside.domain.contains(z))


def test_velocity_norm_helpers():
    u = four_velocity([0.3, -0.4, 0.5])
    assert float(velocity_norm(u)) == pytest.approx(-1.0, abs=1e-14)
    assert u[0] > 0
