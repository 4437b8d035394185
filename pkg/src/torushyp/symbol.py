"""Principal-symbol analysis: assembly, diagonalization, symmetrizers, scans.

A quasilinear first-order system on the torus,

    du/dt + A^i(t, x, u) d_i u = R(t, x, u),

is described by a :class:`SystemDef`.  Its principal symbol at frequency
``xi`` is ``A(t, x, zeta, xi) = sum_i A^i(t, x, zeta) xi_i``.  Strong
hyperbolicity means this matrix is real-diagonalizable,

    S A = D S,

and the energy estimates use the symmetrizer ``P = S^T S`` built from unit
left eigenvectors.

Array conventions used throughout the package: component axes lead and
spatial axes trail, so a single state has shape ``(m,)`` and a field of
states has shape ``(m, *pts)``; points have shape ``(N,)`` or
``(N, *pts)``; coefficient evaluators return ``(m, m, *pts)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import (
    ComplexSpectrum,
    Defective,
    EmptyPlan,
    EvaluationOutsideDomain,
    IllConditionedProjection,
    SingularTimeMatrix,
    SymbolError,
    AdmissibilityViolation,
)

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ToleranceSet:
    """Numerical thresholds for eigenstructure decisions.

    ``cluster`` and ``real`` are relative to ``max(1, |A|)`` and ``|A|``
    respectively; ``rank`` is a relative singular-value floor; ``cond``
    caps the condition number of the diagonalizer.
    """

    cluster: float = 1e-8
    real: float = 1e-9
    rank: float = 1e-8
    cond: float = 1e8
    resid: float = 1e-8


DEFAULT_TOLS = ToleranceSet()


# ---------------------------------------------------------------------------
# admissible regions


@dataclass(frozen=True)
class Constraint:
    """One defining inequality ``fn(zeta) > 0`` (``>= 0`` if not strict)."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    strict: bool = True


@dataclass(frozen=True)
class AdmissibleRegion:
    """Open state region ``U`` given as an intersection of inequalities.

    The margin is ``min_k g_k / |grad g_k|`` over the defining functions,
    clipped at zero.  It is the exact distance to the complement for
    half-spaces and a first-order estimate otherwise.
    """

    m: int
    constraints: tuple[Constraint, ...] = ()

    @classmethod
    def whole_space(cls, m: int) -> "AdmissibleRegion":
        return cls(m, ())

    def _values(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        return [np.asarray(c.fn(zeta), dtype=float) for c in self.constraints]

    def contains(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        ok = np.ones(zeta.shape[1:], dtype=bool)
        for c, g in zip(self.constraints, self._values(zeta)):
            ok &= (g > 0) if c.strict else (g >= 0)
        return ok & np.all(np.isfinite(zeta), axis=0)

    def first_violation(self, zeta) -> str | None:
        """Name of the first failing inequality at a single state, if any."""
        zeta = np.asarray(zeta, dtype=float)
        for c in self.constraints:
            g = float(c.fn(zeta))
            if not ((g > 0) if c.strict else (g >= 0)):
                return c.name
        return None

    def check(self, zeta) -> None:
        name = self.first_violation(zeta)
        if name is not None:
            raise AdmissibilityViolation(
                f"state violates admissibility inequality: {name}",
                inequality=name,
                witness=np.asarray(zeta, dtype=float).tolist(),
            )

    def margin(self, zeta) -> np.ndarray:
        zeta = np.asarray(zeta, dtype=float)
        out = np.full(zeta.shape[1:], np.inf)
        if not self.constraints:
            return out
        steps = 1e-6 * np.maximum(1.0, np.abs(zeta))
        values = self._values(zeta)
        grad_sq = [np.zeros(zeta.shape[1:]) for _ in self.constraints]
        for j in range(self.m):
            e = np.zeros_like(zeta)
            e[j] = steps[j]
            plus = self._values(zeta + e)
            minus = self._values(zeta - e)
            for k in range(len(self.constraints)):
                grad_sq[k] = grad_sq[k] + ((plus[k] - minus[k]) / (2 * steps[j])) ** 2
        for g, gs in zip(values, grad_sq):
            gn = np.sqrt(gs)
            with np.errstate(divide="ignore", invalid="ignore"):
                d = np.where(gn > 1e-300, g / np.where(gn > 1e-300, gn, 1.0), np.inf)
            d = np.where(g > 0, d, 0.0)
            out = np.minimum(out, d)
        return np.where(self.contains(zeta), out, 0.0)


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class SystemDef:
    """A quasilinear system ``du/dt + A^i(t,x,u) d_i u = R(t,x,u)`` on T^N.

    ``coeff(t, x, zeta, i)`` returns ``A^i`` with shape ``(m, m, *pts)`` and
    ``source(t, x, zeta)`` returns ``R`` with shape ``(m, *pts)``.
    ``quasilinear`` is False when neither depends on the state.
    """

    m: int
    N: int
    coeff: Callable
    source: Callable
    domain: AdmissibleRegion
    name: str = "system"
    quasilinear: bool = True
    params: dict = field(default_factory=dict)

    def coeff_stack(self, t, x, zeta) -> np.ndarray:
        """All ``A^i`` stacked along a leading axis: ``(N, m, m, *pts)``."""
        return np.stack([np.asarray(self.coeff(t, x, zeta, i), dtype=float)
                         for i in range(self.N)])


def _check_state(sys: SystemDef, zeta, closure: bool):
    if closure:
        return
    inside = sys.domain.contains(zeta)
    if not np.all(inside):
        raise EvaluationOutsideDomain(
            f"{sys.name}: coefficient evaluation outside the admissible region")


def assemble_symbol(sys: SystemDef, t, x, zeta, xi, closure: bool = False) -> np.ndarray:
    """Principal symbol ``sum_i A^i(t, x, zeta) xi_i``."""
    zeta = np.asarray(zeta, dtype=float)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if xi.shape[0] != sys.N:
        raise ValueError(f"frequency has {xi.shape[0]} entries, system has N={sys.N}")
    _check_state(sys, zeta, closure)
    out = np.zeros((sys.m, sys.m) + zeta.shape[1:])
    for i in range(sys.N):
        if xi[i] != 0.0:
            out = out + xi[i] * np.asarray(sys.coeff(t, x, zeta, i), dtype=float)
    return out


# ---------------------------------------------------------------------------
# eigenstructure


@dataclass(frozen=True, eq=False)
class EigenStructure:
    """Clustered real eigendecomposition of one symbol matrix.

    Rows of ``S`` are unit left eigenvectors, grouped by cluster in ascending
    eigenvalue order; ``right`` holds an orthonormal basis of each right
    eigenspace (one ``(m, k)`` block per cluster).
    """

    lambdas: np.ndarray
    multiplicities: np.ndarray
    S: np.ndarray
    D: np.ndarray
    P: np.ndarray
    gap: float
    condS: float
    right: tuple
    imag_ratio: float = 0.0
    norm: float = 0.0
    tols: ToleranceSet = DEFAULT_TOLS

    @property
    def m(self) -> int:
        return self.S.shape[0]

    def cluster_slices(self):
        ends = np.cumsum(self.multiplicities)
        starts = ends - self.multiplicities
        return [slice(int(a), int(b)) for a, b in zip(starts, ends)]

    def speeds(self) -> np.ndarray:
        return np.repeat(self.lambdas, self.multiplicities)


def _trivial_structure(m: int, tols: ToleranceSet) -> EigenStructure:
    eye = np.eye(m)
    return EigenStructure(
        lambdas=np.zeros(1), multiplicities=np.array([m]), S=eye, D=np.zeros((m, m)),
        P=eye.copy(), gap=math.inf, condS=1.0, right=(eye.copy(),), tols=tols)


def _canonical_rows(rows: np.ndarray) -> np.ndarray:
    """Fix row signs (first largest-magnitude entry positive), sort rows."""
    mag = np.abs(rows)
    j = np.argmax(mag >= mag.max(axis=1, keepdims=True) - 1e-12, axis=1)
    rows = rows * np.where(rows[np.arange(len(rows)), j] < 0, -1.0, 1.0)[:, None]
    if len(rows) == 1:
        return rows
    keys = np.round(rows, 12)
    return rows[np.lexsort(keys.T[::-1])]


def eigendecompose(A, tols: ToleranceSet = DEFAULT_TOLS) -> EigenStructure:
    """Diagonalize a real matrix with real spectrum.

    Raises :class:`ComplexSpectrum` when an eigenvalue has a non-negligible
    imaginary part and :class:`Defective` when some cluster lacks a full set
    of eigenvectors or the diagonalizer is too ill-conditioned.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    norm = float(np.linalg.norm(A, 2))
    if norm == 0.0:
        return _trivial_structure(A.shape[0], tols)
    w, V = np.linalg.eig(A)
    return _structure_from_eig(w, V, norm, tols)


def _structure_from_eig(w, V, norm: float, tols: ToleranceSet) -> EigenStructure:
    m = len(w)
    imag_ratio = float(np.max(np.abs(w.imag))) / norm
    if imag_ratio > tols.real:
        raise ComplexSpectrum(f"eigenvalue with relative imaginary part {imag_ratio:.3e}",
                              value=imag_ratio)
    scale = max(1.0, norm)
    order = np.argsort(w.real, kind="stable")
    lam = w.real[order]
    V = V[:, order]
    breaks = np.nonzero(np.diff(lam) > tols.cluster * scale)[0] + 1
    groups = np.split(np.arange(m), breaks)

    reps, mults, blocks = [], [], []
    for g in groups:
        k = len(g)
        Vg = V[:, g] / np.linalg.norm(V[:, g], axis=0)
        if k == 1:
            # a simple real eigenvalue has a real eigenvector up to a phase
            v = Vg[:, 0]
            v = (v * np.conj(v[np.argmax(np.abs(v))])).real
            reps.append(float(lam[g[0]]))
            mults.append(1)
            blocks.append((v / np.linalg.norm(v))[:, None])
            continue
        span = np.hstack([Vg.real, Vg.imag])
        U, sv, _ = np.linalg.svd(span, full_matrices=False)
        if sv[k - 1] <= tols.rank * sv[0]:
            raise Defective(f"eigenvalue {lam[g].mean():.6g} of multiplicity {k} "
                            f"has a rank-deficient eigenvector block",
                            value=float(sv[k - 1] / sv[0]))
        reps.append(float(lam[g].mean()))
        mults.append(k)
        blocks.append(U[:, :k])

    Vfull = np.hstack(blocks)
    try:
        W = np.linalg.inv(Vfull)
    except np.linalg.LinAlgError as exc:
        raise Defective("eigenvector matrix is singular", value=math.inf) from exc

    rows = []
    start = 0
    for k in mults:
        Wg = W[start:start + k]
        start += k
        if k == 1:
            rows.append(_canonical_rows(Wg / np.linalg.norm(Wg)))
            continue
        proj = Wg.T @ np.linalg.solve(Wg @ Wg.T, Wg)
        Q, _, _ = scipy.linalg.qr(proj, pivoting=True)
        rows.append(_canonical_rows(Q[:, :k].T))
    S = np.vstack(rows)
    condS = float(np.linalg.cond(S))
    if not np.isfinite(condS) or condS > tols.cond:
        raise Defective(f"diagonalizer condition number {condS:.3e} exceeds cap", value=condS)

    lambdas = np.array(reps)
    mults = np.array(mults)
    gap = float(np.min(np.diff(lambdas))) if len(lambdas) > 1 else math.inf
    return EigenStructure(
        lambdas=lambdas, multiplicities=mults, S=S,
        D=np.diag(np.repeat(lambdas, mults)), P=S.T @ S, gap=gap, condS=condS,
        right=tuple(blocks), imag_ratio=imag_ratio, norm=norm, tols=tols)


def build_projections(es: EigenStructure) -> list[np.ndarray]:
    """Spectral projections ``V_i (W_i V_i)^{-1} W_i``, one per cluster."""
    out = []
    for sl, Vi in zip(es.cluster_slices(), es.right):
        Wi = es.S[sl]
        Pi = Vi @ np.linalg.solve(Wi @ Vi, Wi)
        if np.linalg.norm(Pi, 2) > 1.0 / es.tols.rank:
            raise IllConditionedProjection("spectral projection norm too large",
                                           value=float(np.linalg.norm(Pi, 2)))
        out.append(Pi)
    return out


def contour_projection(A, center: float, radius: float, nodes: int = 64) -> np.ndarray:
    """Riesz projection ``(2 pi i)^{-1} \\oint (z - A)^{-1} dz`` by the trapezoid rule.

    The circle must enclose exactly one eigenvalue cluster.  Used only as a
    cross-check of :func:`build_projections`.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    acc = np.zeros((m, m), dtype=complex)
    for theta in 2 * np.pi * (np.arange(nodes) + 0.5) / nodes:
        dz = radius * np.exp(1j * theta)
        acc += dz * np.linalg.inv((center + dz) * np.eye(m) - A)
    return (acc / nodes).real


def build_symmetrizer(es: EigenStructure) -> np.ndarray:
    """``P = S^T S``; makes ``P A`` symmetric."""
    return es.S.T @ es.S


def symbol_structure(sys: SystemDef, t, x, zeta, xi, tols: ToleranceSet = DEFAULT_TOLS,
                     closure: bool = False) -> EigenStructure:
    """Eigenstructure of the symbol, with the ``xi = 0`` convention ``S = I``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if not np.any(xi):
        _check_state(sys, np.asarray(zeta, dtype=float), closure)
        return _trivial_structure(sys.m, tols)
    return eigendecompose(assemble_symbol(sys, t, x, zeta, xi, closure=closure), tols)


def symmetrizer_batch(A: np.ndarray, tols: ToleranceSet = DEFAULT_TOLS) -> np.ndarray:
    """Vectorized ``build_symmetrizer(eigendecompose(A_k))`` over a stack ``(K, m, m)``.

    Returns the ``(K, m, m)`` stack of symmetrizers.  ``P`` does not depend
    on the basis chosen inside a cluster (it is the sum of the orthogonal
    projectors onto the left eigenspaces), so no row canonicalization is
    needed here.  On failure the first offending index is attached to the
    raised error as ``index``.
    """
    A = np.asarray(A, dtype=float)
    K, m, _ = A.shape
    out = np.broadcast_to(np.eye(m), (K, m, m)).copy()
    if m == 1 or K == 0:
        return out
    norms = np.linalg.norm(A, ord=2, axis=(1, 2))
    live = np.nonzero(norms > 0)[0]
    if live.size == 0:
        return out
    Al = A[live]
    nl = norms[live]
    w, V = np.linalg.eig(Al)
    ratio = np.max(np.abs(w.imag), axis=1) / nl
    bad = np.nonzero(ratio > tols.real)[0]
    if bad.size:
        err = ComplexSpectrum(f"eigenvalue with relative imaginary part {ratio[bad[0]]:.3e}",
                              value=float(ratio[bad[0]]))
        err.index = int(live[bad[0]])
        raise err
    order = np.argsort(w.real, axis=1, kind="stable")
    lam = np.take_along_axis(w.real, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    splits = np.diff(lam, axis=1) > tols.cluster * np.maximum(1.0, nl)[:, None]
    patterns, inverse = np.unique(splits, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for p_idx, pattern in enumerate(patterns):
        sel = np.nonzero(inverse == p_idx)[0]
        breaks = np.nonzero(pattern)[0] + 1
        groups = np.split(np.arange(m), breaks)
        Vs = V[sel]
        blocks = []
        for g in groups:
            k = len(g)
            Vg = Vs[:, :, g]
            Vg = Vg / np.linalg.norm(Vg, axis=1, keepdims=True)
            span = np.concatenate([Vg.real, Vg.imag], axis=2)
            U, sv, _ = np.linalg.svd(span, full_matrices=False)
            weak = np.nonzero(sv[:, k - 1] <= tols.rank * sv[:, 0])[0]
            if weak.size:
                err = Defective("rank-deficient eigenvector block",
                                value=float(sv[weak[0], k - 1] / sv[weak[0], 0]))
                err.index = int(live[sel[weak[0]]])
                raise err
            blocks.append(U[:, :, :k])
        Vfull = np.concatenate(blocks, axis=2)
        cond_v = np.linalg.cond(Vfull)
        weak = np.nonzero(~np.isfinite(cond_v) | (cond_v > 1e16))[0]
        if weak.size:
            err = Defective("eigenvector matrix is singular", value=math.inf)
            err.index = int(live[sel[weak[0]]])
            raise err
        W = np.linalg.inv(Vfull)
        P = np.zeros((len(sel), m, m))
        for g in groups:
            Wg = W[:, g, :]
            gram = Wg @ np.swapaxes(Wg, 1, 2)
            P += np.swapaxes(Wg, 1, 2) @ np.linalg.solve(gram, Wg)
        condS = np.sqrt(np.linalg.cond(P))
        weak = np.nonzero(~np.isfinite(condS) | (condS > tols.cond))[0]
        if weak.size:
            err = Defective(f"diagonalizer condition number {condS[weak[0]]:.3e} exceeds cap",
                            value=float(condS[weak[0]]))
            err.index = int(live[sel[weak[0]]])
            raise err
        out[live[sel]] = 0.5 * (P + np.swapaxes(P, 1, 2))
    return out


# ---------------------------------------------------------------------------
# hyperbolicity scans


def unit_directions(N: int, count: int, seed: int = 0) -> np.ndarray:
    """Quasi-uniform unit vectors on the sphere ``S^{N-1}``, shape ``(count, N)``.

    N=1 always yields ``[[1], [-1]]``; N=2 uses equally spaced angles with a
    seeded offset; N=3 a Fibonacci lattice under a seeded rotation; higher N
    normalized Gaussian draws.
    """
    rng = np.random.default_rng(seed)
    if N == 1:
        return np.array([[1.0], [-1.0]])
    if N == 2:
        theta = 2 * np.pi * (np.arange(count) + rng.random()) / count
        return np.stack([np.cos(theta), np.sin(theta)], axis=1)
    if N == 3:
        from scipy.spatial.transform import Rotation

        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        r = np.sqrt(1 - z * z)
        phi = np.pi * (3 - np.sqrt(5)) * k
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
        return Rotation.random(random_state=seed).apply(pts)
    g = rng.standard_normal((count, N))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass
class SamplePlan:
    """Finite sample sets for a hyperbolicity scan."""

    times: list
    points: list
    states: list
    directions: list
    radius: float = math.inf
    max_witnesses: int = 10
    seed: int = 0
    tols: ToleranceSet = DEFAULT_TOLS

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "times": [float(t) for t in self.times],
            "points": [np.asarray(p, float).tolist() for p in self.points],
            "states": [np.asarray(z, float).tolist() for z in self.states],
            "directions": [np.asarray(d, float).tolist() for d in self.directions],
            "radius": None if math.isinf(self.radius) else self.radius,
            "max_witnesses": self.max_witnesses,
            "seed": self.seed,
            "tols": vars(self.tols).copy(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplePlan":
        return cls(
            times=list(d["times"]), points=list(d["points"]), states=list(d["states"]),
            directions=list(d["directions"]),
            radius=math.inf if d.get("radius") is None else float(d["radius"]),
            max_witnesses=int(d.get("max_witnesses", 10)), seed=int(d.get("seed", 0)),
            tols=ToleranceSet(**d.get("tols", {})))


@dataclass
class HyperbolicityReport:
    samples: int
    worst_imag: float
    worst_condS: float
    min_gap: float
    lambda0: float
    lambda1: float
    passed: bool
    witnesses: list
    failures: dict

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or not math.isfinite(v) else float(v)

        return {
            "schema_version": SCHEMA_VERSION,
            "samples": self.samples,
            "worst_imag": num(self.worst_imag),
            "worst_condS": num(self.worst_condS),
            "min_gap": num(self.min_gap),
            "lambda0": num(self.lambda0),
            "lambda1": num(self.lambda1),
            "verdict": self.verdict,
            "failures": dict(self.failures),
            "witnesses": self.witnesses,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def scan_hyperbolicity(sys: SystemDef, plan: SamplePlan) -> HyperbolicityReport:
    """Check strong hyperbolicity over every (t, x, zeta, xi) in the plan.

    Directions are normalized to unit length (eigenvalues are homogeneous of
    degree one, ``P`` of degree zero).  Scanning does not stop at the first
    failure; up to ``plan.max_witnesses`` witnesses are recorded.
    """
    for name in ("times", "points", "states", "directions"):
        if len(getattr(plan, name)) == 0:
            raise EmptyPlan(f"sample plan has no {name}")
    tols = plan.tols
    dirs = np.array([np.asarray(d, float) / np.linalg.norm(d) for d in plan.directions])
    samples = 0
    worst_imag = 0.0
    worst_cond = 1.0
    min_gap = math.inf
    lam0 = math.inf
    lam1 = 0.0
    witnesses: list = []
    failures: dict = {}

    def fail(kind, t, x, z, xi):
        failures[kind] = failures.get(kind, 0) + 1
        if len(witnesses) < plan.max_witnesses:
            witnesses.append({"t": float(t), "x": np.asarray(x, float).tolist(),
                              "zeta": np.asarray(z, float).tolist(),
                              "xi": None if xi is None else np.asarray(xi, float).tolist(),
                              "failure_kind": kind})

    for t in plan.times:
        for x in plan.points:
            x = np.asarray(x, float)
            for z in plan.states:
                z = np.asarray(z, float)
                if not sys.domain.contains(z):
                    samples += len(dirs)
                    fail("outside_domain", t, x, z, None)
                    continue
                try:
                    coeffs = sys.coeff_stack(t, x, z)
                except SingularTimeMatrix:
                    samples += len(dirs)
                    fail("singular_time_matrix", t, x, z, None)
                    continue
                within = float(np.linalg.norm(z)) <= plan.radius
                stack = np.tensordot(dirs, coeffs, axes=1)
                if not np.all(np.isfinite(stack)):
                    raise ValueError("symbol has non-finite entries")
                norms = np.linalg.norm(stack, 2, axis=(1, 2))
                ws, Vs = np.linalg.eig(stack)
                for xi, norm, w, V in zip(dirs, norms, ws, Vs):
                    samples += 1
                    try:
                        if norm == 0.0:
                            es = _trivial_structure(len(w), tols)
                        else:
                            es = _structure_from_eig(w, V, float(norm), tols)
                    except SymbolError as exc:
                        if isinstance(exc, ComplexSpectrum):
                            worst_imag = max(worst_imag, float(exc.value))
                        fail(exc.kind, t, x, z, xi)
                        continue
                    worst_imag = max(worst_imag, es.imag_ratio)
                    worst_cond = max(worst_cond, es.condS)
                    min_gap = min(min_gap, es.gap)
                    ev = np.linalg.eigvalsh(es.P)
                    lam1 = max(lam1, float(ev[-1]))
                    if within:
                        lam0 = min(lam0, float(ev[0]))
    return HyperbolicityReport(
        samples=samples, worst_imag=worst_imag, worst_condS=worst_cond, min_gap=min_gap,
        lambda0=lam0, lambda1=lam1, passed=not failures, witnesses=witnesses,
        failures=failures)
