"""Fourier analysis on the periodic box ``[0, 2 pi)^N``.

The forward transform is the unnormalized integral
``f_hat(xi) = \\int e^{-i x.xi} f(x) dx`` evaluated by the grid quadrature
(weight ``spacing**N``), so that a constant 1 has ``f_hat(0) = (2 pi)^N`` and
the inverse carries the factor ``(2 pi)^{-N}``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import GridMismatch, NonFiniteField, StateOutsideDomain, SymbolError, SymbolFailure
from .symbol import DEFAULT_TOLS, SystemDef, ToleranceSet, assemble_symbol, symmetrizer_batch

MAGIC = b"THYP"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIId")


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid ``x_j = 2 pi j / n`` in each of ``N`` dimensions."""

    N: int
    n: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("space dimension must be at least 1")
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"points per dimension must be a power of two >= 4, got {self.n}")

    @property
    def spacing(self) -> float:
        return 2 * np.pi / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.N

    @property
    def size(self) -> int:
        return self.n ** self.N

    @property
    def kmax(self) -> int:
        """Largest retained |frequency| per axis under the 2/3 rule."""
        return self.n // 3

    @property
    def weight(self) -> float:
        return self.spacing ** self.N

    @cached_property
    def points(self) -> np.ndarray:
        x1 = self.spacing * np.arange(self.n)
        return np.stack(np.meshgrid(*([x1] * self.N), indexing="ij"))

    @cached_property
    def k(self) -> tuple:
        """Integer wavenumbers per axis, each broadcastable to ``shape``."""
        k1 = np.fft.fftfreq(self.n, 1.0 / self.n)
        out = []
        for i in range(self.N):
            sh = [1] * self.N
            sh[i] = self.n
            out.append(k1.reshape(sh))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        return sum(ki ** 2 for ki in self.k) * np.ones(self.shape)

    @cached_property
    def kinf(self) -> np.ndarray:
        return np.max(np.stack([np.abs(ki) * np.ones(self.shape) for ki in self.k]), axis=0)

    @cached_property
    def mask(self) -> np.ndarray:
        return self.kinf <= self.kmax

    @cached_property
    def mode_set(self) -> np.ndarray:
        """Retained integer frequencies, shape ``(count, N)``."""
        idx = np.nonzero(self.mask)
        return np.stack([np.fft.fftfreq(self.n, 1.0 / self.n)[i] for i in idx], axis=1).astype(int)


class TorusField:
    """Real ``m``-component field sampled on a :class:`TorusGrid`.

    Values have shape ``(m, *grid.shape)``; Fourier coefficients are computed
    on first access and cached.  Both arrays are read-only.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: TorusGrid, values):
        values = np.array(values, dtype=float)
        if values.shape == grid.shape:
            values = values[None]
        if values.shape[1:] != grid.shape:
            raise GridMismatch(f"values of shape {values.shape} do not fit grid {grid.shape}")
        values.flags.writeable = False
        self.grid = grid
        self._values = values
        self._coeffs = None

    @classmethod
    def from_function(cls, grid: TorusGrid, fn) -> "TorusField":
        return cls(grid, fn(grid.points))

    @classmethod
    def from_coeffs(cls, grid: TorusGrid, coeffs, check_real: bool = True) -> "TorusField":
        vals = np.fft.ifftn(np.asarray(coeffs) / grid.weight, axes=_axes(grid))
        if check_real:
            scale = max(float(np.max(np.abs(vals.real), initial=0.0)), 1e-300)
            if float(np.max(np.abs(vals.imag), initial=0.0)) > 1e-10 * max(scale, 1.0):
                raise ValueError("coefficients are not Hermitian; inverse is not real")
        return cls(grid, vals.real)

    @classmethod
    def zeros(cls, grid: TorusGrid, m: int = 1) -> "TorusField":
        return cls(grid, np.zeros((m,) + grid.shape))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def m(self) -> int:
        return self._values.shape[0]

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            if not np.all(np.isfinite(self._values)):
                raise NonFiniteField("field has non-finite values")
            c = np.fft.fftn(self._values, axes=_axes(self.grid)) * self.grid.weight
            c.flags.writeable = False
            self._coeffs = c
        return self._coeffs

    def _same(self, other):
        if not isinstance(other, TorusField) or other.grid != self.grid or other.m != self.m:
            raise GridMismatch("fields live on different grids or have different widths")

    def __add__(self, other):
        if isinstance(other, TorusField):
            self._same(other)
            return TorusField(self.grid, self._values + other._values)
        return TorusField(self.grid, self._values + other)

    def __sub__(self, other):
        if isinstance(other, TorusField):
            self._same(other)
            return TorusField(self.grid, self._values - other._values)
        return TorusField(self.grid, self._values - other)

    def __mul__(self, c):
        return TorusField(self.grid, self._values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return TorusField(self.grid, -self._values)

    def __repr__(self):
        return f"TorusField(N={self.grid.N}, n={self.grid.n}, m={self.m})"


def _axes(grid: TorusGrid) -> tuple:
    return tuple(range(1, grid.N + 1))


def transform(f: TorusField) -> np.ndarray:
    """Fourier coefficients ``f_hat``, shape ``(m, *grid.shape)`` in FFT order."""
    return f.coeffs


def inverse_transform(grid: TorusGrid, coeffs) -> TorusField:
    return TorusField.from_coeffs(grid, coeffs)


def hermitian_defect(f: TorusField) -> float:
    """Relative violation of ``f_hat(-xi) = conj(f_hat(xi))``."""
    c = f.coeffs
    flipped = np.conj(np.roll(np.flip(c, axis=_axes(f.grid)), 1, axis=_axes(f.grid)))
    scale = max(float(np.max(np.abs(c))), 1e-300)
    return float(np.max(np.abs(c - flipped))) / scale


def inner(f: TorusField, g: TorusField) -> float:
    """Grid-quadrature L^2 inner product of real fields."""
    f._same(g)
    return float(np.sum(f.values * g.values) * f.grid.weight)


def l2_norm(f: TorusField) -> float:
    return math.sqrt(max(inner(f, f), 0.0))


def mode_norm(f: TorusField) -> float:
    """L^2 norm computed from Fourier coefficients (Plancherel)."""
    return math.sqrt(float(np.sum(np.abs(f.coeffs) ** 2)) / (2 * np.pi) ** f.grid.N)


def bessel_potential(f: TorusField, s: float) -> TorusField:
    """Apply ``<grad>^s = (1 - Laplacian)^{s/2}``."""
    if s == 0:
        return f
    return TorusField.from_coeffs(f.grid, f.coeffs * (1.0 + f.grid.k2) ** (s / 2.0))


def sobolev_norm(f: TorusField, s: float) -> float:
    """``|| <grad>^s f ||_{L^2}``, summed over components."""
    w = (1.0 + f.grid.k2) ** s
    return math.sqrt(float(np.sum(w * np.abs(f.coeffs) ** 2)) / (2 * np.pi) ** f.grid.N)


def dealias(f: TorusField) -> TorusField:
    return TorusField.from_coeffs(f.grid, f.coeffs * f.grid.mask, check_real=False)


def dealias_array(grid: TorusGrid, values: np.ndarray) -> np.ndarray:
    """2/3-rule truncation of an arbitrary stack of grid functions.

    ``values`` has the grid axes last.
    """
    axes = tuple(range(values.ndim - grid.N, values.ndim))
    c = np.fft.fftn(values, axes=axes)
    return np.fft.ifftn(c * grid.mask, axes=axes).real


def spectral_derivative(f: TorusField, i: int) -> TorusField:
    """``d f / d x_i`` on the retained modes."""
    c = f.coeffs * (1j * f.grid.k[i]) * f.grid.mask
    return TorusField.from_coeffs(f.grid, c, check_real=False)


def gradient_values(f: TorusField) -> np.ndarray:
    """All spectral first derivatives, shape ``(N, m, *grid.shape)``."""
    return np.stack([spectral_derivative(f, i).values for i in range(f.grid.N)])


def tail_fraction(f: TorusField, s: float = 0.0) -> float:
    """Share of the ``H^s`` norm carried by the under-resolved band.

    The band is every mode outside the lower half of the retained range
    (``max_i |xi_i| > kmax / 2``), i.e. the truncated modes together with the
    outer half of the dealiased band.  Returns 0 for a zero field.
    """
    w = (1.0 + f.grid.k2) ** s * np.abs(f.coeffs) ** 2
    total = float(np.sum(w))
    if total == 0.0:
        return 0.0
    hi = f.grid.kinf > f.grid.kmax / 2
    return math.sqrt(float(np.sum(w[:, hi])) / total)


# ---------------------------------------------------------------------------
# quantized symmetrizer


def _direction_groups(grid: TorusGrid):
    """Group retained nonzero modes by direction, identifying ``d`` with ``-d``.

    Yields ``(unit direction, boolean mode mask)`` pairs.  The symmetrizer is
    homogeneous of degree 0 and even in ``xi`` (it does not depend on the
    order or sign of the eigenvector rows), so one evaluation per group
    serves every mode in it.
    """
    groups: dict = {}
    modes = grid.mode_set
    for mode in modes:
        if not np.any(mode):
            continue
        g = math.gcd(*[abs(int(v)) for v in mode])
        d = tuple(int(v) // g for v in mode)
        first = next(v for v in d if v != 0)
        if first < 0:
            d = tuple(-v for v in d)
        groups.setdefault(d, []).append(mode)
    out = []
    k1 = np.fft.fftfreq(grid.n, 1.0 / grid.n).astype(int)
    pos = {int(k): j for j, k in enumerate(k1)}
    for d in sorted(groups):
        mask = np.zeros(grid.shape, dtype=bool)
        for mode in groups[d]:
            mask[tuple(pos[int(v)] for v in mode)] = True
        vec = np.array(d, dtype=float)
        out.append((vec / np.linalg.norm(vec), mask))
    return out


class QuantizedSymmetrizer:
    """The operator ``Op(S^T S)`` frozen at a state field ``v`` and time ``t``.

    ``apply`` realizes ``f -> sum_xi e^{i x.xi} P(t, x, v(x), xi) f_hat(xi)``
    (with the inverse-transform normalization), summed over retained modes;
    ``adjoint`` is its exact L^2 adjoint on the grid; ``symmetric`` is the
    average of the two.
    """

    def __init__(self, sys: SystemDef, v: TorusField, t: float = 0.0,
                 tols: ToleranceSet = DEFAULT_TOLS):
        grid = v.grid
        if grid.N != sys.N or v.m != sys.m:
            raise GridMismatch("state field does not match the system dimensions")
        inside = sys.domain.contains(v.values)
        if not np.all(inside):
            j = np.unravel_index(int(np.argmin(inside)), grid.shape)
            x = grid.points[(slice(None),) + j]
            raise StateOutsideDomain("state field leaves the admissible region",
                                     witness=x.tolist(), t=t)
        self.grid = grid
        self.m = sys.m
        self.groups = []
        npts = grid.size
        for xi, mask in _direction_groups(grid):
            if sys.m == 1:
                P = None
            else:
                A = assemble_symbol(sys, t, grid.points, v.values, xi)
                A = np.moveaxis(A.reshape(sys.m, sys.m, npts), 2, 0)
                try:
                    P = symmetrizer_batch(A, tols)
                except SymbolError as exc:
                    j = np.unravel_index(getattr(exc, "index", 0), grid.shape)
                    x = grid.points[(slice(None),) + j]
                    raise SymbolFailure(f"symbol not diagonalizable at x={x.tolist()}, "
                                        f"xi={xi.tolist()}: {exc}", exc,
                                        x=x.tolist(), xi=xi.tolist()) from exc
                P = np.moveaxis(P, 0, 2).reshape((sys.m, sys.m) + grid.shape)
            self.groups.append((xi, mask, P))
        self.zero_mask = np.zeros(grid.shape, dtype=bool)
        self.zero_mask[(0,) * grid.N] = True

    def _axes(self):
        return _axes(self.grid)

    def _finish(self, terms):
        acc = np.sum(np.stack(terms), axis=0)
        scale = max(float(np.max(np.abs(acc.real), initial=0.0)), 1.0)
        if float(np.max(np.abs(acc.imag), initial=0.0)) > 1e-10 * scale:
            raise ValueError("quantized symmetrizer produced a non-real field")
        return TorusField(self.grid, acc.real)

    def apply(self, f: TorusField) -> TorusField:
        if f.grid != self.grid or f.m != self.m:
            raise GridMismatch("field does not match the frozen state")
        c = f.coeffs / self.grid.weight
        ax = self._axes()
        terms = [np.fft.ifftn(c * self.zero_mask, axes=ax)]
        for _, mask, P in self.groups:
            part = np.fft.ifftn(c * mask, axes=ax)
            terms.append(part if P is None else np.einsum("ab...,b...->a...", P, part))
        return self._finish(terms)

    def adjoint(self, g: TorusField) -> TorusField:
        if g.grid != self.grid or g.m != self.m:
            raise GridMismatch("field does not match the frozen state")
        ax = self._axes()
        c = g.coeffs / self.grid.weight
        terms = [np.fft.ifftn(c * self.zero_mask, axes=ax)]
        for _, mask, P in self.groups:
            pg = g.values if P is None else np.einsum("ab...,b...->a...", P, g.values)
            terms.append(np.fft.ifftn(np.fft.fftn(pg, axes=ax) * mask, axes=ax))
        return self._finish(terms)

    def symmetric(self, f: TorusField) -> TorusField:
        a = self.apply(f)
        b = self.adjoint(f)
        return TorusField(self.grid, 0.5 * (a.values + b.values))


def apply_quantized_symmetrizer(v: TorusField, f: TorusField, sys: SystemDef, t: float = 0.0,
                                tols: ToleranceSet = DEFAULT_TOLS) -> TorusField:
    return QuantizedSymmetrizer(sys, v, t, tols).apply(f)


def energy_functional(v: TorusField, u: TorusField, sys: SystemDef, s: float, t: float = 0.0,
                      tols: ToleranceSet = DEFAULT_TOLS, op: QuantizedSymmetrizer | None = None
                      ) -> float:
    """``(N_s u, u)`` with ``N_s = <grad>^s Q_sym(v) <grad>^s``.

    ``Q_sym`` is the symmetrized quantization, so the value is real by
    construction.  Pass a prebuilt ``op`` to reuse symbol evaluations.
    """
    op = op or QuantizedSymmetrizer(sys, v, t, tols)
    g = bessel_potential(u, s)
    return inner(op.symmetric(g), g)


# ---------------------------------------------------------------------------
# snapshot I/O


def write_snapshot(path, f: TorusField, t: float = 0.0) -> None:
    """Binary snapshot: little-endian header then float64 values in C order."""
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, f.grid.N, f.grid.n, f.m, float(t))
    Path(path).write_bytes(header + np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_snapshot(path) -> tuple[TorusField, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated snapshot header")
    magic, version, N, n, m, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    grid = TorusGrid(N, n)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != m * grid.size:
        raise ValueError(f"{path}: expected {m * grid.size} values, found {body.size}")
    return TorusField(grid, body.reshape((m,) + grid.shape).astype(float)), t


def write_field_csv(path, f: TorusField) -> None:
    """Plot-ready CSV: one row per grid point, coordinates then components."""
    grid = f.grid
    cols = [grid.points[i].reshape(-1) for i in range(grid.N)]
    cols += [f.values[c].reshape(-1) for c in range(f.m)]
    header = [f"x{i + 1}" for i in range(grid.N)] + [f"u{c}" for c in range(f.m)]
    data = np.stack(cols, axis=1)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
