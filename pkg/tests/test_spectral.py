import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import sobolev_norm_by_quadrature
from torushyp import (
    EquationOfState,
    QuantizedSymmetrizer,
    TorusField,
    TorusGrid,
    apply_quantized_symmetrizer,
    energy_functional,
    l2_norm,
    make_advection,
    make_burgers,
    make_constant_coefficient,
    make_relativistic_euler,
    read_snapshot,
    sobolev_norm,
    write_snapshot,
)
from torushyp.errors import GridMismatch, NonFiniteField, StateOutsideDomain, SymbolFailure
from torushyp.spectral import (
    bessel_potential,
    dealias,
    hermitian_defect,
    inner,
    inverse_transform,
    mode_norm,
    spectral_derivative,
    tail_fraction,
    transform,
    write_field_csv,
)


def smooth_random_field(grid, m, seed, kmax=4):
    """Real band-limited random field."""
    rng = np.random.default_rng(seed)
    c = np.zeros((m,) + grid.shape, dtype=complex)
    keep = grid.kinf <= kmax
    c[:, keep] = rng.standard_normal((m, int(keep.sum()))) + 1j * rng.standard_normal((m, int(keep.sum())))
    vals = np.fft.ifftn(c, axes=tuple(range(1, grid.N + 1))).real
    return TorusField(grid, vals / np.max(np.abs(vals)))


def wave_system():
    return make_constant_coefficient([[[0.0, 1.0], [1.0, 0.0]]])


def euler_1d_state(grid, amp=0.1):
    x = grid.points[0]
    v = amp * np.sin(x)
    g = 1 / np.sqrt(1 - v * v)
    return TorusField(grid, np.stack([g, g * v, 0 * x, 0 * x, 1 + amp * np.cos(x), 0.1 * np.sin(2 * x)]))


EULER1 = make_relativistic_euler(EquationOfState.barotropic(0.5, 1.6), N=1)


# ------------------------------------------------------------------ grids


def test_grid_points_and_spacing():
    g = TorusGrid(2, 8)
    assert g.spacing == pytest.approx(2 * math.pi / 8)
    np.testing.assert_allclose(g.points[0][:, 0], 2 * math.pi * np.arange(8) / 8)
    np.testing.assert_allclose(g.points[1][0, :], 2 * math.pi * np.arange(8) / 8)


@pytest.mark.parametrize("n", [3, 6, 12, 2])
def test_grid_requires_power_of_two(n):
    with pytest.raises(ValueError):
        TorusGrid(1, n)


@pytest.mark.parametrize("N,n", [(1, 16), (2, 8), (3, 4)])
def test_mode_set_is_symmetric_and_obeys_two_thirds_rule(N, n):
    g = TorusGrid(N, n)
    modes = {tuple(m) for m in g.mode_set}
    assert modes == {tuple(-np.array(m)) for m in modes}
    assert max(abs(v) for m in modes for v in m) == n // 3


# ------------------------------------------------------------- transforms


def test_transform_of_constant_and_cosine():
    for N in (1, 2):
        g = TorusGrid(N, 8)
        one = transform(TorusField(g, np.ones(g.shape)))
        expected = np.zeros_like(one)
        expected[(0,) * (N + 1)] = (2 * math.pi) ** N
        np.testing.assert_allclose(one, expected, atol=1e-12)
        c = transform(TorusField(g, np.cos(g.points[0])))
        expected = np.zeros_like(c)
        e1 = [0] * N
        e1[0] = 1
        expected[(0, *e1)] = (2 * math.pi) ** N / 2
        e1[0] = -1
        expected[(0, *e1)] = (2 * math.pi) ** N / 2
        np.testing.assert_allclose(c, expected, atol=1e-12)


@given(st.integers(1, 2), st.integers(0, 10 ** 6))
def test_round_trip_hermitian_symmetry_and_plancherel(N, seed):
    g = TorusGrid(N, 16)
    f = TorusField(g, np.random.default_rng(seed).standard_normal((2,) + g.shape))
    back = inverse_transform(g, transform(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-12 * np.max(np.abs(f.values))
    assert hermitian_defect(f) < 1e-12
    assert mode_norm(f) == pytest.approx(l2_norm(f), rel=1e-10)


def test_non_finite_values_are_rejected():
    g = TorusGrid(1, 8)
    with pytest.raises(NonFiniteField):
        transform(TorusField(g, np.full(g.shape, np.nan)))


def test_non_hermitian_coefficients_rejected():
    g = TorusGrid(1, 8)
    c = np.zeros((1, 8), dtype=complex)
    c[0, 1] = 1.0
    with pytest.raises(ValueError):
        inverse_transform(g, c)


def test_fields_are_immutable_and_grid_checked():
    g = TorusGrid(1, 8)
    f = TorusField(g, np.zeros(8))
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0
    with pytest.raises(GridMismatch):
        f + TorusField(TorusGrid(1, 16), np.zeros(16))


# ------------------------------------------------------- Bessel potentials


def test_bessel_potential_scales_single_mode():
    g = TorusGrid(2, 16)
    f = TorusField(g, np.cos(2 * g.points[0] + 3 * g.points[1]))
    out = bessel_potential(f, 2.0)
    np.testing.assert_allclose(out.values, (1 + 4 + 9) * f.values, atol=1e-11)
    assert bessel_potential(f, 0.0) is f


@given(st.floats(-3, 3), st.integers(0, 1000))
def test_bessel_potential_inverse_composition(s, seed):
    g = TorusGrid(1, 32)
    f = smooth_random_field(g, 2, seed, kmax=10)
    back = bessel_potential(bessel_potential(f, s), -s)
    assert np.max(np.abs(back.values - f.values)) < 1e-11


def test_sobolev_norm_of_cosine():
    g = TorusGrid(1, 32)
    f = TorusField(g, np.cos(g.points[0]))
    for s in (0, 1, 2, 2.5):
        assert sobolev_norm(f, s) == pytest.approx(math.sqrt(2 ** s * math.pi), rel=1e-12)


def test_sobolev_norm_matches_derivative_quadrature():
    g = TorusGrid(1, 64)
    x = g.points[0]
    f = TorusField(g, np.sin(x) + 0.3 * np.cos(3 * x))
    derivs = [f.values[0], np.cos(x) - 0.9 * np.sin(3 * x), -np.sin(x) - 2.7 * np.cos(3 * x)]
    assert sobolev_norm(f, 2) == pytest.approx(sobolev_norm_by_quadrature(x, 2, derivs), rel=1e-12)


def test_sobolev_norm_of_constant_is_independent_of_order():
    g = TorusGrid(2, 8)
    f = TorusField(g, np.full(g.shape, 3.0))
    assert sobolev_norm(f, 0) == pytest.approx(sobolev_norm(f, 4.0), rel=1e-14)


@given(st.integers(0, 1000))
def test_sobolev_norm_monotone_in_order(seed):
    f = smooth_random_field(TorusGrid(1, 32), 1, seed, kmax=8)
    assert sobolev_norm(f, 0) <= sobolev_norm(f, 1) <= sobolev_norm(f, 2)


# -------------------------------------------------------------- derivatives


def test_spectral_derivative_examples():
    g = TorusGrid(1, 16)
    x = g.points[0]
    np.testing.assert_allclose(spectral_derivative(TorusField(g, np.sin(x)), 0).values[0],
                               np.cos(x), atol=1e-13)
    assert np.max(np.abs(spectral_derivative(TorusField(g, np.full(16, 2.0)), 0).values)) < 1e-14
    np.testing.assert_allclose(spectral_derivative(TorusField(g, np.sin(3 * x)), 0).values[0],
                               3 * np.cos(3 * x), atol=1e-12)
    # |xi| = 6 exceeds 16 // 3 and is removed
    assert np.max(np.abs(spectral_derivative(TorusField(g, np.sin(6 * x)), 0).values)) < 1e-12


@given(st.integers(0, 1000), st.floats(-2, 2))
def test_bessel_potential_commutes_with_derivative(seed, s):
    g = TorusGrid(2, 16)
    f = smooth_random_field(g, 1, seed, kmax=5)
    a = bessel_potential(spectral_derivative(f, 1), s)
    b = spectral_derivative(bessel_potential(f, s), 1)
    assert np.max(np.abs(a.values - b.values)) < 1e-10 * (1 + np.max(np.abs(a.values)))


def test_dealias_removes_only_high_modes():
    g = TorusGrid(1, 16)
    x = g.points[0]
    f = TorusField(g, np.sin(2 * x) + np.cos(7 * x))
    np.testing.assert_allclose(dealias(f).values[0], np.sin(2 * x), atol=1e-13)


def test_tail_fraction():
    g = TorusGrid(1, 64)
    x = g.points[0]
    assert tail_fraction(TorusField(g, np.sin(x)), 2) == pytest.approx(0.0, abs=1e-12)
    assert tail_fraction(TorusField(g, np.sin(20 * x)), 2) == pytest.approx(1.0)
    assert tail_fraction(TorusField.zeros(g), 2) == 0.0


# -------------------------------------------------- quantized symmetrizer


def test_symmetric_and_scalar_systems_give_identity_on_retained_modes():
    g = TorusGrid(1, 32)
    for sys, m in ((wave_system(), 2), (make_burgers(), 1), (make_advection([1.0, -2.0]), 2)):
        f = smooth_random_field(g, m, 1, kmax=8)
        v = smooth_random_field(g, m, 2)
        out = apply_quantized_symmetrizer(v, f, sys)
        np.testing.assert_allclose(out.values, f.values, atol=1e-12)


def test_quantized_symmetrizer_of_zero_is_zero():
    g = TorusGrid(1, 16)
    out = apply_quantized_symmetrizer(euler_1d_state(g), TorusField.zeros(g, 6), EULER1)
    assert not np.any(out.values)


def test_one_dimensional_quantization_is_pointwise_multiplication_off_the_mean():
    g = TorusGrid(1, 32)
    v = euler_1d_state(g)
    op = QuantizedSymmetrizer(EULER1, v)
    f = smooth_random_field(g, 6, 7, kmax=6)
    mean = f.values.mean(axis=1, keepdims=True)
    (_, _, P), = op.groups
    expected = mean + np.einsum("ab...,b...->a...", P, f.values - mean)
    np.testing.assert_allclose(op.apply(f).values, expected, atol=1e-12)


@pytest.mark.parametrize("N,n", [(1, 32), (2, 16)])
def test_adjoint_is_exact_and_symmetrized_form_is_self_adjoint(N, n):
    g = TorusGrid(N, n)
    if N == 1:
        sys, v = EULER1, euler_1d_state(g)
    else:
        sys = make_relativistic_euler(EquationOfState.barotropic(0.5, 1.6), N=2)
        x, y = g.points
        vx, vy = 0.1 * np.sin(x + y), 0.1 * np.cos(y)
        gam = 1 / np.sqrt(1 - vx ** 2 - vy ** 2)
        v = TorusField(g, np.stack([gam, gam * vx, gam * vy, 0 * x, 1 + 0.1 * np.cos(x), 0 * x]))
    op = QuantizedSymmetrizer(sys, v)
    for seed in range(5):
        f = smooth_random_field(g, 6, seed, kmax=n // 3)
        h = smooth_random_field(g, 6, seed + 100, kmax=n // 3)
        scale = l2_norm(f) * l2_norm(h)
        assert abs(inner(op.apply(f), h) - inner(f, op.adjoint(h))) < 1e-11 * scale
        assert abs(inner(op.symmetric(f), h) - inner(f, op.symmetric(h))) < 1e-11 * scale


def test_state_outside_region_reports_witness_point():
    g = TorusGrid(1, 16)
    vals = euler_1d_state(g).values.copy()
    vals[0, 5] = 3.0
    with pytest.raises(StateOutsideDomain) as info:
        QuantizedSymmetrizer(EULER1, TorusField(g, vals))
    assert info.value.witness == pytest.approx([g.points[0][5]])


def test_symbol_failure_carries_point_and_frequency():
    from torushyp import AdmissibleRegion, SystemDef

    def coeff(t, x, z, i):
        z = np.asarray(z, float)
        a = np.zeros((2, 2) + z.shape[1:])
        a[0, 1] = 1.0
        a[1, 0] = z[0]  # complex spectrum where z[0] < 0
        return a

    sys = SystemDef(m=2, N=1, coeff=coeff, source=lambda t, x, z: np.zeros_like(z),
                    domain=AdmissibleRegion.whole_space(2))
    g = TorusGrid(1, 8)
    vals = np.ones((2, 8))
    vals[0, 3] = -1.0
    with pytest.raises(SymbolFailure) as info:
        QuantizedSymmetrizer(sys, TorusField(g, vals))
    assert info.value.x == pytest.approx([g.points[0][3]])
    assert info.value.xi == [1.0]


# ------------------------------------------------------------------ energy


def test_energy_of_symmetric_system_is_squared_sobolev_norm():
    g = TorusGrid(1, 32)
    u = smooth_random_field(g, 2, 3, kmax=8)
    e = energy_functional(u, u, wave_system(), 2.0)
    assert e == pytest.approx(sobolev_norm(u, 2.0) ** 2, rel=1e-9)
    assert energy_functional(u, TorusField.zeros(g, 2), wave_system(), 2.0) == 0.0


def test_energy_is_positive_and_sandwiched_by_pointwise_symmetrizer_bounds():
    g = TorusGrid(1, 32)
    v = euler_1d_state(g)
    op = QuantizedSymmetrizer(EULER1, v)
    (_, _, P), = op.groups
    ev = np.linalg.eigvalsh(np.moveaxis(P, -1, 0))
    lo, hi = min(ev.min(), 1.0), max(ev.max(), 1.0)
    for seed in range(10):
        u = smooth_random_field(g, 6, seed, kmax=8)
        e = energy_functional(v, u, EULER1, 2.0, op=op)
        norm2 = sobolev_norm(u, 2.0) ** 2
        assert 0 < lo * norm2 <= e + 1e-12 and e <= hi * norm2 + 1e-12


# -------------------------------------------------------------------- I/O


def test_snapshot_round_trip_and_layout(tmp_path):
    g = TorusGrid(2, 8)
    f = smooth_random_field(g, 3, 0)
    path = tmp_path / "f.bin"
    write_snapshot(path, f, 0.25)
    raw = path.read_bytes()
    assert raw[:4] == b"THYP"
    assert len(raw) == 4 + 4 * 4 + 8 + 8 * 3 * 64
    back, t = read_snapshot(path)
    assert t == 0.25 and back.grid == g
    np.testing.assert_array_equal(back.values, f.values)


def test_snapshot_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(40))
    with pytest.raises(ValueError):
        read_snapshot(path)


def test_field_csv_round_trips_exactly(tmp_path):
    g = TorusGrid(1, 8)
    f = smooth_random_field(g, 2, 4)
    write_field_csv(tmp_path / "f.csv", f)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "x1,u0,u1"
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    np.testing.assert_array_equal(data[:, 1:].T, f.values)
