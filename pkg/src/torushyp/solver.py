"""Frozen-coefficient evolution, Picard iteration and continuation monitoring.

The quasilinear problem is solved as a sequence of linear problems

    d_t u_n + A^i(u_{n-1}) d_i u_n = R(u_{n-1}),   u_n(t0) = datum,

each integrated with classical RK4 on the pseudospectral grid.  Iterates are
compared in ``C(I; L^2)``.  When the iteration fails to settle on a window
the window is halved; converged windows are chained from their end states
until the requested horizon or until the continuation monitor halts.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import (
    AdmissibilityViolation,
    GridMismatch,
    InsufficientSamples,
    NoConvergence,
    NonFinite,
    StateOutsideDomain,
)
from .spectral import (
    QuantizedSymmetrizer,
    TorusField,
    TorusGrid,
    dealias_array,
    energy_functional,
    sobolev_norm,
    tail_fraction,
)
from .symbol import SystemDef

REACHED_HORIZON = "ReachedHorizon"
MARGIN_VANISHING = "MarginVanishing"
NORM_BLOWUP = "NormBlowup"

# guard against runaway step counts when a diverging iterate inflates speeds
MAX_STEPS = 200_000


@dataclass(frozen=True)
class SolveConfig:
    """Parameters of :func:`picard_solve`.

    The blow-up sentinels (``blowup_abs``, ``blowup_growth`` within
    ``blowup_window * |T|``, and the resolution sentinel ``tail_max``) are
    arbitrary thresholds, not derived constants.
    """

    s: float = 2.0
    T_request: float = 1.0
    dt_cfl: float = 0.4
    picard_tol: float = 1e-10
    picard_max: int = 30
    T_halvings_max: int = 10
    energy_stride: int = 10
    margin_floor: float = 1e-3
    N: int = 1
    blowup_abs: float = 1e6
    blowup_growth: float = 10.0
    blowup_window: float = 0.01
    tail_max: float = 0.75
    diverge_streak: int = 3
    dt_fixed: float | None = None

    def __post_init__(self):
        if not self.s > self.N / 2 + 1:
            raise ValueError(f"Sobolev index s={self.s} must exceed N/2 + 1 = {self.N / 2 + 1}")
        for name in ("dt_cfl", "picard_tol", "margin_floor", "blowup_abs", "blowup_growth",
                     "blowup_window", "tail_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.T_request == 0:
            raise ValueError("T_request must be nonzero")
        if self.picard_max < 1 or self.energy_stride < 1 or self.T_halvings_max < 0:
            raise ValueError("iteration caps must be positive")
        if self.dt_fixed is not None and not self.dt_fixed > 0:
            raise ValueError("dt_fixed must be positive")


# ---------------------------------------------------------------------------
# trajectories


class Trajectory:
    """Time-indexed snapshots with time derivatives, on a monotone time grid.

    Values between snapshots come from cubic Hermite interpolation of the
    stored states and rates.
    """

    def __init__(self, grid: TorusGrid, times, states, rates):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        self.rates = np.asarray(rates, dtype=float)
        if len(self.times) < 1 or self.states.shape != self.rates.shape \
                or self.states.shape[0] != len(self.times):
            raise ValueError("inconsistent trajectory arrays")
        d = np.diff(self.times)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError("trajectory times must be strictly monotone")

    @classmethod
    def constant(cls, f: TorusField, t0: float, t1: float) -> "Trajectory":
        vals = np.stack([f.values, f.values])
        return cls(f.grid, [t0, t1], vals, np.zeros_like(vals))

    @property
    def m(self) -> int:
        return self.states.shape[1]

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return len(self.times)

    def field(self, k: int) -> TorusField:
        return TorusField(self.grid, self.states[k])

    def rate(self, k: int) -> TorusField:
        return TorusField(self.grid, self.rates[k])

    @property
    def final(self) -> TorusField:
        return self.field(-1)

    def _locate(self, t):
        sgn = 1.0 if len(self.times) < 2 or self.times[-1] > self.times[0] else -1.0
        key = sgn * self.times
        j = int(np.searchsorted(key, sgn * t, side="right")) - 1
        return min(max(j, 0), len(self.times) - 2)

    def at(self, t: float, derivative: bool = False) -> np.ndarray:
        if len(self.times) == 1:
            return self.rates[0] if derivative else self.states[0]
        j = self._locate(t)
        t0, t1 = self.times[j], self.times[j + 1]
        if t == t0:
            return self.rates[j] if derivative else self.states[j]
        if t == t1:
            return self.rates[j + 1] if derivative else self.states[j + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1 = self.states[j], self.states[j + 1]
        d0, d1 = self.rates[j] * h, self.rates[j + 1] * h
        if derivative:
            h00, h10, h01, h11 = 6 * s * s - 6 * s, 3 * s * s - 4 * s + 1, \
                -6 * s * s + 6 * s, 3 * s * s - 2 * s
            return (h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1) / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1

    def resample(self, times) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        return Trajectory(self.grid, times, np.stack([self.at(t) for t in times]),
                          np.stack([self.at(t, derivative=True) for t in times]))

    def truncate(self, t_end: float) -> "Trajectory":
        """Restrict to times up to ``t_end``, appending an interpolated end point."""
        sgn = 1.0 if self.times[-1] >= self.times[0] else -1.0
        keep = sgn * self.times < sgn * t_end
        times = list(self.times[keep])
        states = list(self.states[keep])
        rates = list(self.rates[keep])
        times.append(t_end)
        states.append(self.at(t_end))
        rates.append(self.at(t_end, derivative=True))
        return Trajectory(self.grid, times, np.stack(states), np.stack(rates))

    def concat(self, other: "Trajectory") -> "Trajectory":
        if other.times[0] != self.times[-1]:
            raise ValueError("trajectories do not join")
        return Trajectory(self.grid, np.concatenate([self.times, other.times[1:]]),
                          np.concatenate([self.states, other.states[1:]]),
                          np.concatenate([self.rates, other.rates[1:]]))


# ---------------------------------------------------------------------------
# records


@dataclass
class IterateRecord:
    window: int
    n: int
    sup_norm_s: float
    sup_rate_norm: float
    diff_prev: float
    min_margin: float
    t_start: float
    t_end: float


@dataclass
class IterateHistory:
    """Per-iterate Picard diagnostics across all windows and attempts."""

    records: list = field(default_factory=list)

    def append(self, rec: IterateRecord):
        self.records.append(rec)

    def window(self, w: int) -> list:
        return [r for r in self.records if r.window == w]

    def ratios(self, w: int = 0) -> list:
        """Successive-difference ratios ``diff(n+1) / diff(n)`` in window ``w``.

        Only the accepted (last) attempt on the window is used.
        """
        recs = self.window(w)
        starts = [i for i, r in enumerate(recs) if r.n == 1]
        recs = recs[starts[-1]:] if starts else recs
        out = []
        for a, b in zip(recs, recs[1:]):
            out.append(b.diff_prev / a.diff_prev if a.diff_prev > 0 else 0.0)
        return out

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return {"schema_version": 1,
                "records": [{k: clean(v) for k, v in asdict(r).items()} for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class ContinuationStatus:
    kind: str
    t: float
    evidence: dict = field(default_factory=dict)


@dataclass
class EnergyRecord:
    t: float
    energy: float
    sobolev: float
    margin: float
    bnorm: float
    tail: float


@dataclass
class SolveOutcome:
    trajectory: Trajectory
    energies: list
    history: IterateHistory
    status: str
    continuation: ContinuationStatus
    T_actual: float

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def energy_rows(self) -> list:
        return [(e.t, e.energy, e.sobolev, e.margin, e.bnorm) for e in self.energies]

    def write_energy_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t,energy_Ns,sobolev_s,margin,bnorm_proxy\n")
            for row in self.energy_rows():
                fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")


# ---------------------------------------------------------------------------
# linear evolution


def _outside(sys: SystemDef, grid: TorusGrid, vals, t):
    inside = sys.domain.contains(vals)
    if np.all(inside):
        return
    j = np.unravel_index(int(np.argmin(inside)), grid.shape)
    x = grid.points[(slice(None),) + j]
    state = vals[(slice(None),) + j]
    name = sys.domain.first_violation(state)
    msg = f"{sys.name}: state leaves the admissible region at t={t:.6g}, x={x.tolist()}"
    if name is not None:
        raise AdmissibilityViolation(msg + f" ({name})", inequality=name,
                                     witness=x.tolist(), t=t)
    raise StateOutsideDomain(msg, witness=x.tolist(), t=t)


def _rhs_values(sys: SystemDef, grid: TorusGrid, v, u, t) -> np.ndarray:
    _outside(sys, grid, v, t)
    X = grid.points
    axes = tuple(range(1, grid.N + 1))
    uhat = np.fft.fftn(u, axes=axes)
    out = np.zeros_like(u)
    for i in range(sys.N):
        A = np.asarray(sys.coeff(t, X, v, i), dtype=float)
        if sys.quasilinear:
            A = dealias_array(grid, A)
        du = np.fft.ifftn(uhat * (1j * grid.k[i]) * grid.mask, axes=axes).real
        out -= np.einsum("ab...,b...->a...", A, du)
    R = np.asarray(sys.source(t, X, v), dtype=float)
    if sys.quasilinear:
        R = dealias_array(grid, R)
    return dealias_array(grid, out + R)


def linear_rhs(sys: SystemDef, v: TorusField, u: TorusField, t: float = 0.0) -> TorusField:
    """``-A^i(t, x, v) d_i u + R(t, x, v)``, dealiased."""
    if v.grid != u.grid:
        raise GridMismatch("frozen state and unknown live on different grids")
    return TorusField(u.grid, _rhs_values(sys, u.grid, v.values, u.values, t))


def max_speed(sys: SystemDef, v_traj: Trajectory, samples: int = 9) -> float:
    """Largest pointwise ``sum_i rho(A^i)`` over a few snapshots of ``v_traj``."""
    grid = v_traj.grid
    idx = np.unique(np.linspace(0, len(v_traj) - 1, min(samples, len(v_traj))).round().astype(int))
    best = 0.0
    npts = grid.size
    for k in idx:
        t = float(v_traj.times[k])
        vals = v_traj.states[k]
        total = np.zeros(npts)
        for i in range(sys.N):
            A = np.asarray(sys.coeff(t, grid.points, vals, i), dtype=float)
            A = np.moveaxis(A.reshape(sys.m, sys.m, npts), 2, 0)
            total += np.max(np.abs(np.linalg.eigvals(A)), axis=1)
        best = max(best, float(np.max(total)))
    return best


def _time_grid(t0: float, t1: float, dt: float) -> np.ndarray:
    span = t1 - t0
    steps = max(1, int(math.ceil(abs(span) / dt - 1e-9)))
    times = t0 + np.sign(span) * dt * np.arange(steps + 1)
    times[-1] = t1
    return times


def cfl_step(sys: SystemDef, v_traj: Trajectory, cfg: SolveConfig) -> float:
    if cfg.dt_fixed is not None:
        return cfg.dt_fixed
    lam = max_speed(sys, v_traj)
    if not math.isfinite(lam):
        raise NonFinite("non-finite characteristic speed in the frozen coefficient")
    if lam <= 1e-12:
        lam = 1.0
    dt = cfg.dt_cfl * v_traj.grid.spacing / lam
    span = abs(v_traj.end - v_traj.start)
    if span / dt > MAX_STEPS:
        raise NonFinite(f"time step collapsed to {dt:.3e} (speed {lam:.3e})")
    return dt


def evolve_linear(sys: SystemDef, v_traj: Trajectory, u0: TorusField, interval,
                  cfg: SolveConfig, times=None) -> Trajectory:
    """RK4 solution of the frozen-coefficient problem on ``interval``.

    ``interval = (t0, t1)`` may run backward (``t1 < t0``).  The step is
    ``dt_cfl * spacing / lambda_max`` with the last step shortened to land
    on ``t1``, unless an explicit monotone ``times`` grid is passed.
    """
    t0, t1 = float(interval[0]), float(interval[1])
    grid = u0.grid
    if v_traj.grid != grid:
        raise GridMismatch("frozen coefficient trajectory lives on another grid")
    if times is None:
        times = _time_grid(t0, t1, cfl_step(sys, v_traj, cfg))
    times = np.asarray(times, dtype=float)

    def L(t, u):
        return _rhs_values(sys, grid, v_traj.at(t), u, t)

    u = np.array(u0.values, dtype=float)
    states = [u]
    rates = []
    for k in range(len(times) - 1):
        t, h = times[k], times[k + 1] - times[k]
        k1 = L(t, u)
        rates.append(k1)
        k2 = L(t + h / 2, u + (h / 2) * k1)
        k3 = L(t + h / 2, u + (h / 2) * k2)
        k4 = L(t + h, u + h * k3)
        u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"non-finite state at t={times[k + 1]:.6g}")
        states.append(u)
    rates.append(L(times[-1], u))
    return Trajectory(grid, times, np.stack(states), np.stack(rates))


def difference_norm(a: Trajectory, b: Trajectory) -> float:
    """``max_t ||a(t) - b(t)||_{L^2}`` over the snapshot times both share."""
    if a.grid != b.grid or a.m != b.m:
        raise GridMismatch("trajectories live on different grids")
    common, ia, ib = np.intersect1d(a.times, b.times, assume_unique=True, return_indices=True)
    if common.size == 0:
        raise GridMismatch("trajectories share no snapshot times")
    d = a.states[ia] - b.states[ib]
    axes = tuple(range(1, d.ndim))
    return float(np.sqrt(np.max(np.sum(d * d, axis=axes)) * a.grid.weight))


# ---------------------------------------------------------------------------
# continuation monitoring


def bnorm_proxy(u: TorusField, rate: TorusField) -> float:
    """``max_x |u| + |grad u| + |d_t u|`` (Euclidean norms over components)."""
    grid = u.grid
    axes = tuple(range(1, grid.N + 1))
    uhat = np.fft.fftn(u.values, axes=axes)
    g2 = np.zeros(grid.shape)
    for i in range(grid.N):
        du = np.fft.ifftn(uhat * (1j * grid.k[i]) * grid.mask, axes=axes).real
        g2 += np.sum(du * du, axis=0)
    total = (np.sqrt(np.sum(u.values ** 2, axis=0)) + np.sqrt(g2)
             + np.sqrt(np.sum(rate.values ** 2, axis=0)))
    return float(np.max(total))


class ContinuationMonitor:
    """Incremental check of the continuation alternatives along a solve.

    ``check`` is called once per accepted step and returns a halting
    :class:`ContinuationStatus` or ``None``.
    """

    def __init__(self, sys: SystemDef, cfg: SolveConfig):
        self.sys = sys
        self.cfg = cfg
        self.window = cfg.blowup_window * abs(cfg.T_request)
        self.recent: list = []

    def check(self, t: float, u: TorusField, rate: TorusField) -> ContinuationStatus | None:
        cfg = self.cfg
        margin = float(np.min(self.sys.domain.margin(u.values)))
        if margin <= cfg.margin_floor:
            return ContinuationStatus(MARGIN_VANISHING, t, {"min_margin": margin})
        b = bnorm_proxy(u, rate)
        if not math.isfinite(b) or b > cfg.blowup_abs:
            return ContinuationStatus(NORM_BLOWUP, t, {"bnorm": b, "trigger": "absolute"})
        self.recent = [(tt, bb) for tt, bb in self.recent if abs(t - tt) <= self.window]
        if self.recent:
            low = min(bb for _, bb in self.recent)
            if b > cfg.blowup_growth * low:
                return ContinuationStatus(NORM_BLOWUP, t, {"bnorm": b, "trigger": "growth"})
        self.recent.append((t, b))
        tail = tail_fraction(u, cfg.s)
        if tail > cfg.tail_max:
            return ContinuationStatus(NORM_BLOWUP, t,
                                      {"bnorm": b, "tail": tail, "trigger": "resolution"})
        return None


def monitor_continuation(sys: SystemDef, traj: Trajectory, cfg: SolveConfig,
                         monitor: ContinuationMonitor | None = None, skip_first: bool = False
                         ) -> ContinuationStatus:
    """Run the monitor along a trajectory.

    Returns the first halting status, or ``ReachedHorizon`` at the final
    time if nothing triggers.
    """
    monitor = monitor or ContinuationMonitor(sys, cfg)
    for k in range(1 if skip_first else 0, len(traj)):
        st = monitor.check(float(traj.times[k]), traj.field(k), traj.rate(k))
        if st is not None:
            return st
    return ContinuationStatus(REACHED_HORIZON, traj.end, {})


# ---------------------------------------------------------------------------
# Picard iteration


class _Diverged(Exception):
    pass


def _min_margin(sys, vals) -> float:
    return float(np.min(sys.domain.margin(vals)))


def _truncate_at_margin(sys: SystemDef, traj: Trajectory, floor: float) -> Trajectory:
    """Cut ``traj`` where its minimal margin first drops to ``floor``.

    The crossing is located by bisection on the Hermite interpolant.
    """
    if not sys.domain.constraints:
        return traj
    margins = [_min_margin(sys, traj.states[k]) for k in range(len(traj))]
    below = [k for k, mg in enumerate(margins) if mg <= floor]
    if not below:
        return traj
    k = below[0]
    if k == 0:
        raise StateOutsideDomain("iterate starts within the margin floor", t=traj.start)
    a, b = float(traj.times[k - 1]), float(traj.times[k])
    for _ in range(60):
        mid = 0.5 * (a + b)
        if mid in (a, b):
            break
        if _min_margin(sys, traj.at(mid)) <= floor:
            b = mid
        else:
            a = mid
    return traj.truncate(b)


def _sup_norms(traj: Trajectory, s: float) -> tuple[float, float]:
    sn = max(sobolev_norm(traj.field(k), s) for k in range(len(traj)))
    rn = max(sobolev_norm(traj.rate(k), s - 1) for k in range(len(traj)))
    return sn, rn


def _picard_window(sys, datum, ta, tb, cfg, history, window, seed) -> Trajectory:
    v = Trajectory.constant(seed if seed is not None else datum, ta, tb)
    times = None
    prev = None
    streak = 0
    for it in range(1, cfg.picard_max + 1):
        dt = cfl_step(sys, v, cfg)
        if times is None or np.max(np.abs(np.diff(times))) > dt * (1 + 1e-12):
            times = _time_grid(ta, v.end, dt)
        u = evolve_linear(sys, v, datum, (ta, v.end), cfg, times=times)
        u = _truncate_at_margin(sys, u, cfg.margin_floor)
        ref = v if np.array_equal(v.times, u.times) else v.resample(u.times)
        diff = difference_norm(u, ref)
        sn, rn = _sup_norms(u, cfg.s)
        margin = min(_min_margin(sys, u.states[k]) for k in range(len(u)))
        history.append(IterateRecord(window, it, sn, rn, diff, margin, ta, u.end))
        if diff <= cfg.picard_tol:
            return u
        streak = streak + 1 if prev is not None and diff > prev else 0
        if streak >= cfg.diverge_streak:
            raise _Diverged(f"differences grew {streak} times in a row")
        prev = diff
        v = u
        times = u.times
    raise _Diverged("iteration cap reached")


def _check_datum(sys: SystemDef, u0: TorusField, cfg: SolveConfig):
    if u0.m != sys.m or u0.grid.N != sys.N:
        raise GridMismatch("initial datum does not match the system dimensions")
    if cfg.N != sys.N:
        raise ValueError(f"config is for N={cfg.N}, system has N={sys.N}")
    _outside(sys, u0.grid, u0.values, 0.0)
    margin = _min_margin(sys, u0.values)
    if margin <= cfg.margin_floor:
        raise StateOutsideDomain(f"initial datum is within the margin floor "
                                 f"({margin:.3e} <= {cfg.margin_floor:.3e})", t=0.0)


def _record_energies(sys: SystemDef, traj: Trajectory, cfg: SolveConfig) -> list:
    if len(traj) < 3:
        # a single long step: sample the interpolant so the fit has three points
        traj = traj.resample(np.linspace(traj.start, traj.end, 3))
    idx = list(range(0, len(traj), cfg.energy_stride))
    if idx[-1] != len(traj) - 1:
        idx.append(len(traj) - 1)
    if len(idx) < 3:
        idx = sorted(set(np.linspace(0, len(traj) - 1, 3).round().astype(int)))
    out = []
    for k in idx:
        t = float(traj.times[k])
        u = traj.field(k)
        op = QuantizedSymmetrizer(sys, u, t)
        out.append(EnergyRecord(
            t=t, energy=energy_functional(u, u, sys, cfg.s, t, op=op),
            sobolev=sobolev_norm(u, cfg.s), margin=_min_margin(sys, u.values),
            bnorm=bnorm_proxy(u, traj.rate(k)), tail=tail_fraction(u, cfg.s)))
    return out


def picard_solve(sys: SystemDef, u0: TorusField, cfg: SolveConfig,
                 seed: TorusField | None = None, record_energies: bool = True) -> SolveOutcome:
    """Solve the quasilinear Cauchy problem on ``[0, T_request]`` by Picard iteration.

    ``seed`` replaces the datum as the constant-in-time zeroth iterate.
    Raises :class:`NoConvergence` when a window cannot be made to converge
    within ``T_halvings_max`` halvings.
    """
    _check_datum(sys, u0, cfg)
    history = IterateHistory()
    monitor = ContinuationMonitor(sys, cfg)
    T = float(cfg.T_request)
    t0 = 0.0
    datum = u0
    full = None
    halt = None
    window = 0
    eps = 1e-12 * max(1.0, abs(T))
    while abs(T - t0) > eps:
        span = T - t0
        for _ in range(cfg.T_halvings_max + 1):
            try:
                piece = _picard_window(sys, datum, t0, t0 + span, cfg, history, window,
                                       seed if window == 0 else None)
                break
            except (_Diverged, StateOutsideDomain, NonFinite):
                span /= 2
                window += 1
        else:
            raise NoConvergence(f"Picard iteration did not converge after "
                                f"{cfg.T_halvings_max} halvings at t={t0:.6g}")
        st = monitor_continuation(sys, piece, cfg, monitor, skip_first=full is not None)
        if st.kind != REACHED_HORIZON:
            piece = piece.truncate(st.t) if st.t != piece.end else piece
            halt = st
        full = piece if full is None else full.concat(piece)
        window += 1
        if halt is not None:
            break
        t0 = piece.end
        datum = piece.final
    status = halt or ContinuationStatus(REACHED_HORIZON, full.end, {})
    energies = _record_energies(sys, full, cfg) if record_energies else []
    return SolveOutcome(trajectory=full, energies=energies, history=history,
                        status="converged" if halt is None else "halted",
                        continuation=status, T_actual=full.end)


# ---------------------------------------------------------------------------
# post-processing


@dataclass
class EnergyReport:
    a: float
    b: float
    max_slack: float
    min_slack: float
    samples: int


def verify_energy_growth(outcome: SolveOutcome) -> EnergyReport:
    """Fit an envelope ``E(t) <= a e^{b t} (E(0) + b t)`` to the energy series.

    ``b`` is the smallest nonnegative exponent for which the envelope with
    unit prefactor dominates every sample; ``a`` is then the tightest
    prefactor for that ``b``.  Slack is ``1 - E / envelope`` per sample.
    """
    es = outcome.energies
    if len(es) < 3:
        raise InsufficientSamples(f"need at least 3 energy samples, got {len(es)}")
    t = np.array([abs(e.t - es[0].t) for e in es])
    E = np.array([e.energy for e in es])
    E0 = E[0]
    b = 0.0
    for tk, Ek in zip(t[1:], E[1:]):
        if tk == 0 or Ek <= E0:
            continue
        f = lambda bb: math.exp(bb * tk) * (E0 + bb * tk) - Ek
        hi = 1.0
        while f(hi) < 0:
            hi *= 2
        b = max(b, brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-13))
    env = np.exp(b * t) * (E0 + b * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(env > 0, E / env, 0.0)
    a = float(np.max(ratio)) if np.max(ratio) > 0 else 1.0
    slack = 1.0 - ratio / a
    return EnergyReport(a=a, b=float(b), max_slack=float(np.max(slack)),
                        min_slack=float(np.min(slack)), samples=len(es))


@dataclass
class DependenceTable:
    deltas: list
    differences: list
    order: float
    base: SolveOutcome

    def rows(self) -> list:
        return list(zip(self.deltas, self.differences))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("delta,difference_C0L2\n")
            for d, v in self.rows():
                fh.write(f"{format(float(d), '.17g')},{format(float(v), '.17g')}\n")


def default_profile(grid: TorusGrid, m: int, s: float) -> TorusField:
    """Fixed smooth perturbation shape with unit ``H^s`` norm."""
    x = grid.points
    base = sum(np.cos(x[i]) + 0.5 * np.sin(2 * x[i]) for i in range(grid.N))
    w = TorusField(grid, np.stack([base] * m))
    return w * (1.0 / sobolev_norm(w, s))


def continuous_dependence_probe(sys: SystemDef, u0: TorusField, deltas, cfg: SolveConfig,
                                profile: TorusField | None = None) -> DependenceTable:
    """Measure ``||u_delta - u||_{C(I; L^2)}`` for data ``u0 + delta * profile``.

    The perturbed solves reuse the base solve's time step so that
    trajectories share snapshot times.  ``order`` is the slope of a
    log-log least-squares fit over the nonzero entries.
    """
    w = profile if profile is not None else default_profile(u0.grid, u0.m, cfg.s)
    base = picard_solve(sys, u0, cfg, record_energies=False)
    dt = float(np.max(np.abs(np.diff(base.trajectory.times))))
    pcfg = replace(cfg, dt_fixed=cfg.dt_fixed or dt)
    if pcfg.dt_fixed != cfg.dt_fixed:
        base = picard_solve(sys, u0, pcfg, record_energies=False)
    diffs = []
    for d in deltas:
        if d == 0:
            diffs.append(0.0)
            continue
        out = picard_solve(sys, u0 + w * d, pcfg, record_energies=False)
        a = out.trajectory
        if not np.array_equal(a.times, base.trajectory.times):
            a = a.resample(base.trajectory.times[
                np.abs(base.trajectory.times) <= abs(a.end) + 1e-15])
        diffs.append(difference_norm(a, base.trajectory))
    pts = [(math.log(d), math.log(v)) for d, v in zip(deltas, diffs) if d > 0 and v > 0]
    order = float(np.polyfit(*zip(*pts), 1)[0]) if len(pts) >= 2 else math.nan
    return DependenceTable(list(map(float, deltas)), diffs, order, base)
