"""Independent reference computations used by the tests.

Nothing here imports the package's solver or symbol code.  Each oracle uses
a different method from the implementation it checks.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])


def burgers_characteristics(x, t, amplitude=1.0):
    """Exact Burgers solution for ``u0 = amplitude * sin x`` before breaking.

    Solves ``x = x0 + t u0(x0)`` for the foot ``x0`` of each characteristic by
    bracketed root finding and returns ``u0(x0)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    reach = abs(amplitude) * t + 1.0
    for j, xj in enumerate(x.ravel()):
        foot = brentq(lambda y: y + t * amplitude * math.sin(y) - xj, xj - reach, xj + reach,
                      xtol=1e-15, rtol=1e-15)
        out.ravel()[j] = amplitude * math.sin(foot)
    return out


def modewise_evolution(matrices, u0_values, t):
    """Exact solution of ``u_t + A^i d_i u = 0`` with constant ``A^i``.

    Each Fourier mode evolves by the matrix exponential ``exp(-i t k.A)``.
    ``u0_values`` has shape ``(m, n, ..., n)``.
    """
    u0_values = np.asarray(u0_values, dtype=float)
    m = u0_values.shape[0]
    N = u0_values.ndim - 1
    n = u0_values.shape[1]
    axes = tuple(range(1, N + 1))
    c = np.fft.fftn(u0_values, axes=axes)
    k1 = np.fft.fftfreq(n, 1.0 / n)
    out = np.zeros_like(c)
    for idx in np.ndindex(*(n,) * N):
        k = np.array([k1[i] for i in idx])
        symbol = sum(k[i] * np.asarray(matrices[i], float) for i in range(N))
        out[(slice(None),) + idx] = expm(-1j * t * symbol) @ c[(slice(None),) + idx]
    return np.fft.ifftn(out, axes=axes).real


def velocity_addition(v, c):
    """Speeds of the two acoustic modes seen from a frame where the fluid moves at ``v``."""
    return (v - c) / (1.0 - v * c), (v + c) / (1.0 + v * c)


def rest_frame_euler_symbol(h, dp_drho, dp_ds):
    """Evolution-form matrix in direction x^1 for the rest frame, assembled by hand.

    In the rest frame the time matrix is ``diag(h, h, h, h, 1, 1)`` plus the
    entry ``h`` in the density row, so its inverse subtracts the ``u^0`` row
    from the density row; the result couples ``u^1`` and ``rho`` only.
    """
    A = np.zeros((6, 6))
    A[1, 4] = dp_drho / h
    A[1, 5] = dp_ds / h
    A[4, 1] = h
    return A


def stress_energy(rho, p, Pi, u):
    """``T^{mu nu} = (rho + p + Pi) u^mu u^nu + (p + Pi) eta^{mu nu}``."""
    return (rho + p + Pi) * np.outer(u, u) + (p + Pi) * ETA


def central_jacobian(fn, X, step=1e-5):
    """Central-difference derivatives of ``fn`` with respect to each entry of ``X``.

    Returns an array whose last axis indexes the coordinate.
    """
    X = np.asarray(X, dtype=float)
    cols = []
    for a in range(X.size):
        e = np.zeros_like(X)
        e[a] = step
        cols.append((np.asarray(fn(X + e)) - np.asarray(fn(X - e))) / (2 * step))
    return np.stack(cols, axis=-1)


def sobolev_norm_by_quadrature(values, s, derivative_terms):
    """``H^s`` norm for integer ``s`` from grid quadrature of derivatives.

    ``derivative_terms[j]`` is the ``j``-th derivative sampled on a 1D grid
    and the norm is ``sqrt(sum_j binom(s, j) ||d^j f||^2)``.
    """
    h = 2 * math.pi / np.asarray(values).shape[-1]
    total = 0.0
    for j, d in enumerate(derivative_terms):
        total += math.comb(int(s), j) * float(np.sum(np.asarray(d) ** 2)) * h
    return math.sqrt(total)
