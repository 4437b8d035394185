"""Built-in systems: toy oracles and relativistic fluids on Minkowski space.

Fluid states carry the contravariant four-velocity ``u^lambda`` (signature
``-+++``) followed by the thermodynamic scalars.  Both fluid models are
written covariantly as ``A^alpha(Phi) d_alpha Phi = R(Phi)`` and returned in
evolution form ``d_t Phi + (A^0)^{-1} A^j d_j Phi = (A^0)^{-1} R``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import AdmissibilityViolation, SingularTimeMatrix
from .symbol import (
    DEFAULT_TOLS,
    AdmissibleRegion,
    Constraint,
    SystemDef,
    ToleranceSet,
    assemble_symbol,
    eigendecompose,
)

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


@dataclass(frozen=True)
class EquationOfState:
    """Pressure ``p(rho, aux)`` with its partial derivatives.

    ``aux`` is the entropy for the Euler model and the baryon density for
    the bulk-viscous model.  All callables are elementwise on arrays.
    """

    p: Callable
    dp_drho: Callable
    dp_daux: Callable
    aux_label: str = "s"
    description: dict = field(default_factory=dict)

    @classmethod
    def barotropic(cls, K: float, gamma: float, aux_label: str = "s") -> "EquationOfState":
        """``p = K rho^gamma``; the auxiliary variable is passively advected."""
        return cls(
            p=lambda rho, aux: K * np.asarray(rho, float) ** gamma,
            dp_drho=lambda rho, aux: K * gamma * np.asarray(rho, float) ** (gamma - 1),
            dp_daux=lambda rho, aux: np.zeros_like(np.asarray(rho, float)),
            aux_label=aux_label,
            description={"kind": "barotropic", "K": K, "gamma": gamma})

    @classmethod
    def linear(cls, cs2: float, aux_label: str = "s") -> "EquationOfState":
        """``p = cs2 * rho`` (constant sound speed squared)."""
        eos = cls.barotropic(cs2, 1.0, aux_label)
        return cls(eos.p, eos.dp_drho, eos.dp_daux, aux_label,
                   {"kind": "linear", "cs2": cs2})

    @classmethod
    def mixed(cls, a: float, b: float, gamma: float, aux_label: str = "n") -> "EquationOfState":
        """``p = a rho + b aux^gamma``; both partials positive for ``a, b > 0``."""
        return cls(
            p=lambda rho, aux: a * np.asarray(rho, float) + b * np.asarray(aux, float) ** gamma,
            dp_drho=lambda rho, aux: a * np.ones_like(np.asarray(rho, float)),
            dp_daux=lambda rho, aux: b * gamma * np.asarray(aux, float) ** (gamma - 1),
            aux_label=aux_label,
            description={"kind": "mixed", "a": a, "b": b, "gamma": gamma})

    @classmethod
    def tabulated(cls, rho: Sequence[float], p: Sequence[float],
                  aux_label: str = "s") -> "EquationOfState":
        """Monotone cubic (PCHIP) interpolation of ``p(rho)`` samples."""
        from scipy.interpolate import PchipInterpolator

        rho = np.asarray(rho, float)
        p = np.asarray(p, float)
        if rho.ndim != 1 or rho.size < 2 or np.any(np.diff(rho) <= 0):
            raise ValueError("tabulated EOS needs strictly increasing rho samples")
        interp = PchipInterpolator(rho, p, extrapolate=True)
        deriv = interp.derivative()
        return cls(
            p=lambda r, aux: interp(np.asarray(r, float)),
            dp_drho=lambda r, aux: deriv(np.asarray(r, float)),
            dp_daux=lambda r, aux: np.zeros_like(np.asarray(r, float)),
            aux_label=aux_label,
            description={"kind": "table", "points": int(rho.size)})

    @classmethod
    def from_csv(cls, path, aux_label: str = "s") -> "EquationOfState":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or not {"rho", "p"} <= set(rows[0]):
            raise ValueError(f"{path}: expected CSV columns rho,p")
        rho = [float(r["rho"]) for r in rows]
        p = [float(r["p"]) for r in rows]
        return cls.tabulated(rho, p, aux_label)


# ---------------------------------------------------------------------------
# toy systems


def _const_coeff(mats):
    mats = [np.asarray(a, float) for a in mats]

    def coeff(t, x, zeta, i):
        zeta = np.asarray(zeta, float)
        a = mats[i]
        return np.broadcast_to(a.reshape(a.shape + (1,) * (zeta.ndim - 1)),
                               a.shape + zeta.shape[1:]).copy()

    return coeff


def _zero_source(t, x, zeta):
    return np.zeros_like(np.asarray(zeta, float))


def make_constant_coefficient(matrices: Sequence, source=None, name: str = "linear") -> SystemDef:
    """Linear system with constant ``A^i`` (one matrix per space dimension).

    ``source`` is an optional constant vector.
    """
    mats = [np.atleast_2d(np.asarray(a, float)) for a in matrices]
    m = mats[0].shape[0]
    if source is None:
        src = _zero_source
    else:
        r = np.asarray(source, float).reshape(m)

        def src(t, x, zeta):
            zeta = np.asarray(zeta, float)
            return np.broadcast_to(r.reshape((m,) + (1,) * (zeta.ndim - 1)), zeta.shape).copy()

    return SystemDef(m=m, N=len(mats), coeff=_const_coeff(mats), source=src,
                     domain=AdmissibleRegion.whole_space(m), name=name, quasilinear=False,
                     params={"matrices": [a.tolist() for a in mats]})


def make_advection(speeds: Sequence[float]) -> SystemDef:
    """Decoupled transport ``d_t u_k + c_k d_x u_k = 0`` in one dimension."""
    speeds = [float(c) for c in speeds]
    if not speeds:
        raise ValueError("need at least one speed")
    sys = make_constant_coefficient([np.diag(speeds)], name="advection")
    return replace(sys, params={"speeds": speeds})


def make_burgers() -> SystemDef:
    """Inviscid Burgers ``d_t u + u d_x u = 0``."""

    def coeff(t, x, zeta, i):
        return np.asarray(zeta, float)[None].copy()

    return SystemDef(m=1, N=1, coeff=coeff, source=_zero_source,
                     domain=AdmissibleRegion.whole_space(1), name="burgers")


def make_sink(speed: float = 1.0, rate: float = 1.0) -> SystemDef:
    """Scalar transport with constant drain, admissible only for ``u > 0``.

    ``d_t u + speed d_x u = -rate``; a constant datum ``u0`` reaches the
    boundary of the admissible region at ``t = u0 / rate``.
    """
    base = make_constant_coefficient([[[speed]]], source=[-rate], name="sink")
    domain = AdmissibleRegion(1, (Constraint("u>0", lambda z: np.asarray(z, float)[0]),))
    return replace(base, domain=domain,
                   params={"speed": speed, "rate": rate})


def burgers_breaking_time(u0_derivative_min: float) -> float:
    """``-1 / min u0'`` (infinite when the datum is nowhere decreasing)."""
    return math.inf if u0_derivative_min >= 0 else -1.0 / u0_derivative_min


# ---------------------------------------------------------------------------
# relativistic fluids


def _flat(zeta):
    zeta = np.asarray(zeta, float)
    return zeta.reshape(zeta.shape[0], -1), zeta.shape[1:]


def _projector(u):
    """``Pi^{ab} = eta^{ab} + u^a u^b`` for ``u`` of shape ``(4, K)``."""
    return ETA[:, :, None] + u[:, None, :] * u[None, :, :]


def velocity_norm(zeta) -> np.ndarray:
    """``u_mu u^mu`` for the leading four components."""
    u = np.asarray(zeta, float)[:4]
    return -u[0] ** 2 + u[1] ** 2 + u[2] ** 2 + u[3] ** 2


def four_velocity(v: Sequence[float]) -> np.ndarray:
    """Normalized four-velocity for a spatial three-velocity ``v``."""
    v = np.asarray(v, float).reshape(3)
    g = 1.0 / math.sqrt(1.0 - float(v @ v))
    return g * np.concatenate([[1.0], v])


def euler_state(v, rho: float, s: float = 0.0) -> np.ndarray:
    return np.concatenate([four_velocity(v), [rho, s]])


def bulk_state(v, rho: float, n: float, Pi: float = 0.0) -> np.ndarray:
    return np.concatenate([four_velocity(v), [rho, n, Pi]])


def euler_covariant_matrices(eos: EquationOfState, zeta) -> np.ndarray:
    """``A^alpha`` for alpha = 0..3, shape ``(4, 6, 6, *pts)``."""
    z, shape = _flat(zeta)
    K = z.shape[1]
    u, rho, s = z[:4], z[4], z[5]
    p = np.asarray(eos.p(rho, s), float) * np.ones(K)
    h = p + rho
    pr = np.asarray(eos.dp_drho(rho, s), float) * np.ones(K)
    ps = np.asarray(eos.dp_daux(rho, s), float) * np.ones(K)
    proj = _projector(u)
    A = np.zeros((4, 6, 6, K))
    for a in range(4):
        for b in range(4):
            A[a, b, b] = h * u[a]
        A[a, :4, 4] = proj[:, a] * pr
        A[a, :4, 5] = proj[:, a] * ps
        A[a, 4, a] = h
        A[a, 4, 4] = u[a]
        A[a, 5, 5] = u[a]
    return A.reshape((4, 6, 6) + shape)


def bulk_covariant_matrices(eos: EquationOfState, tau: Callable, zeta_coef: Callable,
                            zeta) -> tuple[np.ndarray, np.ndarray]:
    """``A^alpha`` (shape ``(4, 7, 7, *pts)``) and ``R`` (shape ``(7, *pts)``).

    Rows: the momentum equation projected orthogonally to ``u``
    (``h u^a d_a u^b + Pi^{ba} d_a(p + Pi) = 0``), the projection along ``u``
    (``u^a d_a rho + h d_a u^a = 0``), particle conservation and the bulk
    relaxation equation, with ``h = rho + p + Pi``.
    """
    z, shape = _flat(zeta)
    K = z.shape[1]
    u, rho, n, Pi = z[:4], z[4], z[5], z[6]
    p = np.asarray(eos.p(rho, n), float) * np.ones(K)
    h = rho + p + Pi
    pr = np.asarray(eos.dp_drho(rho, n), float) * np.ones(K)
    pn = np.asarray(eos.dp_daux(rho, n), float) * np.ones(K)
    ta = np.asarray(tau(rho, n, Pi), float) * np.ones(K)
    ze = np.asarray(zeta_coef(rho, n, Pi), float) * np.ones(K)
    proj = _projector(u)
    A = np.zeros((4, 7, 7, K))
    for a in range(4):
        for b in range(4):
            A[a, b, b] = h * u[a]
        A[a, :4, 4] = proj[:, a] * pr
        A[a, :4, 5] = proj[:, a] * pn
        A[a, :4, 6] = proj[:, a]
        A[a, 4, a] = h
        A[a, 4, 4] = u[a]
        A[a, 5, a] = n
        A[a, 5, 5] = u[a]
        A[a, 6, a] = ze
        A[a, 6, 6] = ta * u[a]
    R = np.zeros((7, K))
    R[6] = -Pi
    return A.reshape((4, 7, 7) + shape), R.reshape((7,) + shape)


def _evolution_form(A: np.ndarray, R: np.ndarray | None, N: int):
    """``(A^0)^{-1} A^j`` for j = 1..N and ``(A^0)^{-1} R``; flat point axis."""
    m = A.shape[1]
    K = A.shape[3]
    A0 = np.moveaxis(A[0], 2, 0)
    cond = np.linalg.cond(A0)
    bad = ~np.isfinite(cond) | (cond > 1e14)
    if np.any(bad):
        raise SingularTimeMatrix(f"time-direction matrix is singular at {int(np.sum(bad))} points")
    rhs = [np.moveaxis(A[j], 2, 0) for j in range(1, N + 1)]
    if R is not None:
        rhs.append(np.moveaxis(R, 1, 0)[:, :, None])
    stacked = np.concatenate(rhs, axis=2)
    sol = np.linalg.solve(A0, stacked)
    hats = [np.moveaxis(sol[:, :, j * m:(j + 1) * m], 0, 2) for j in range(N)]
    src = np.moveaxis(sol[:, :, N * m], 0, 1) if R is not None else np.zeros((m, K))
    return hats, src


def _fluid_system(m, N, matrices, name, domain, params) -> SystemDef:
    cache: dict = {}

    def evaluate(zeta):
        zeta = np.asarray(zeta, float)
        key = (zeta.shape, zeta.tobytes())
        hit = cache.get("last")
        if hit is not None and hit[0] == key:
            return hit[1]
        A, R = matrices(zeta)
        flatA = A.reshape(A.shape[:3] + (-1,))
        flatR = None if R is None else R.reshape(R.shape[0], -1)
        hats, src = _evolution_form(flatA, flatR, N)
        shape = zeta.shape[1:]
        out = ([h.reshape((m, m) + shape) for h in hats], src.reshape((m,) + shape))
        cache["last"] = (key, out)
        return out

    def coeff(t, x, zeta, i):
        return evaluate(zeta)[0][i].copy()

    def source(t, x, zeta):
        return evaluate(zeta)[1].copy()

    return SystemDef(m=m, N=N, coeff=coeff, source=source, domain=domain, name=name,
                     params=params)


def _normalization_constraint(slack: float) -> Constraint:
    return Constraint("u_mu u^mu = -1", lambda z: slack - np.abs(velocity_norm(z) + 1.0))


def _future_constraint() -> Constraint:
    return Constraint("u^0 > 0", lambda z: np.asarray(z, float)[0])


def make_relativistic_euler(eos: EquationOfState, N: int = 3,
                            normalization_slack: float = 1e-2) -> SystemDef:
    """Perfect fluid ``Phi = (u^0..u^3, rho, s)`` in evolution form on T^N.

    Admissible states: ``|u.u + 1| < slack``, ``u^0 > 0``, ``p + rho > 0``
    and ``0 < dp/drho <= 1``.
    """
    if not 1 <= N <= 3:
        raise ValueError("space dimension must be 1, 2 or 3")

    def z_parts(z):
        z = np.asarray(z, float)
        return z[4], z[5]

    constraints = (
        _normalization_constraint(normalization_slack),
        _future_constraint(),
        Constraint("p+rho>0", lambda z: eos.p(*z_parts(z)) + z_parts(z)[0]),
        Constraint("dp/drho>0", lambda z: eos.dp_drho(*z_parts(z))),
        Constraint("dp/drho<=1", lambda z: 1.0 - eos.dp_drho(*z_parts(z)), strict=False),
    )
    domain = AdmissibleRegion(6, constraints)
    return _fluid_system(6, N, lambda z: (euler_covariant_matrices(eos, z), None),
                         "relativistic-euler", domain,
                         {"eos": eos.description, "normalization_slack": normalization_slack})


def _as_coefficient(c) -> Callable:
    if callable(c):
        return c
    value = float(c)
    return lambda rho, n, Pi: value * np.ones_like(np.asarray(rho, float))


def bulk_inequalities(eos: EquationOfState, tau: Callable, zeta_coef: Callable
                      ) -> tuple[Constraint, ...]:
    """The admissibility inequalities of the bulk-viscous model, in order."""

    def parts(z):
        z = np.asarray(z, float)
        rho, n, Pi = z[4], z[5], z[6]
        p = eos.p(rho, n)
        return rho, n, Pi, rho + p + Pi, eos.dp_drho(rho, n), eos.dp_daux(rho, n)

    def causal(z):
        rho, n, Pi, h, pr, pn = parts(z)
        return 1.0 - pr - (n * pn + zeta_coef(rho, n, Pi) / tau(rho, n, Pi)) / h

    def effective(z):
        rho, n, Pi, h, pr, pn = parts(z)
        return pr + n / h * pn

    return (
        Constraint("rho+p+Pi>0", lambda z: parts(z)[3]),
        Constraint("n>0", lambda z: parts(z)[1]),
        Constraint("dp/drho>0", lambda z: parts(z)[4]),
        Constraint("dp/dn>0", lambda z: parts(z)[5]),
        Constraint("tau>0", lambda z: tau(*parts(z)[:3])),
        Constraint("zeta>0", lambda z: zeta_coef(*parts(z)[:3])),
        Constraint("dp/drho+n/(rho+p+Pi)*dp/dn>=0", effective, strict=False),
        Constraint("(n*dp/dn+zeta/tau)/(rho+p+Pi)<=1-dp/drho", causal, strict=False),
    )


def make_bulk_viscous(eos: EquationOfState, tau, zeta, N: int = 3,
                      normalization_slack: float = 1e-2) -> SystemDef:
    """Relaxed bulk viscosity, ``Phi = (u^0..u^3, rho, n, Pi)``, on T^N.

    ``tau`` and ``zeta`` are positive functions of ``(rho, n, Pi)`` or
    constants.  The relaxation term ``-Pi`` on the covariant right-hand side
    becomes a state-dependent source in evolution form.
    """
    if not 1 <= N <= 3:
        raise ValueError("space dimension must be 1, 2 or 3")
    tau_f = _as_coefficient(tau)
    zeta_f = _as_coefficient(zeta)
    constraints = (_normalization_constraint(normalization_slack), _future_constraint()
                   ) + bulk_inequalities(eos, tau_f, zeta_f)
    domain = AdmissibleRegion(7, constraints)
    params = {"eos": eos.description,
              "tau": None if callable(tau) else float(tau),
              "zeta": None if callable(zeta) else float(zeta),
              "normalization_slack": normalization_slack}
    return _fluid_system(7, N, lambda z: bulk_covariant_matrices(eos, tau_f, zeta_f, z),
                         "bulk-viscous", domain, params)


def check_admissible(sys: SystemDef, state) -> None:
    """Raise :class:`AdmissibilityViolation` naming the first failing inequality."""
    sys.domain.check(state)


def characteristic_speeds(sys: SystemDef, t, x, zeta, direction,
                          tols: ToleranceSet = DEFAULT_TOLS) -> np.ndarray:
    """Ascending eigenvalues (with multiplicity) of the symbol in a unit direction."""
    d = np.asarray(direction, float).reshape(-1)
    d = d / np.linalg.norm(d)
    x = np.zeros(sys.N) if x is None else x
    return eigendecompose(assemble_symbol(sys, t, x, zeta, d), tols).speeds()


def boosted_speeds(v: float, cs: float) -> tuple[float, float]:
    """Relativistic velocity addition of ``-cs`` and ``+cs`` to a flow ``v``."""
    return (v - cs) / (1 - v * cs), (v + cs) / (1 + v * cs)
