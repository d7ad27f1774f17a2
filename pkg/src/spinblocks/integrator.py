"""Deterministic fixed-step time evolution of the blocked master equation.

Classical RK4 with per-step re-Hermitization (round-off control only; no
positivity projection, so representation or scatter bugs stay visible to
the physicality monitor).  The right-hand side is a precompiled sparse
matrix, so stepping is a short sequence of vector operations with a fixed
evaluation order; identical inputs give bitwise-identical trajectories.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .liouvillian import CompiledLiouvillian
from .operators import collective_op
from .states import BlockedDensity, BlockedKet, ket_to_density

__all__ = [
    "TimeGrid",
    "TrajectoryRecord",
    "PhysicalityError",
    "rk4_step",
    "evolve",
    "convergence_check",
    "default_dt",
]

TRACE_ABORT = 1e-6
NEGATIVITY_ABORT = -1e-6


class PhysicalityError(RuntimeError):
    """Trace drift or negativity beyond tolerance: unstable dt or a bug."""


@dataclass(frozen=True)
class TimeGrid:
    """Fixed-step grid; t_max is rounded to a whole number of steps."""

    t_max: float
    dt: float
    record_stride: int = 1
    t0: float = 0.0

    def __post_init__(self):
        if self.dt <= 0 or self.t_max <= self.t0:
            raise ValueError("need dt > 0 and t_max > t0")
        if self.dt > (self.t_max - self.t0):
            raise ValueError("dt exceeds the time span")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return max(1, round((self.t_max - self.t0) / self.dt))


@dataclass
class TrajectoryRecord:
    """Recorded observables plus physicality diagnostics of one run.

    ``final_state`` holds the end-of-run state in whichever representation
    produced the record (blocked or full-space).
    """

    times: np.ndarray
    columns: dict[str, np.ndarray]
    max_trace_deviation: float
    min_eigenvalue: float
    dropped_weight: float = 0.0
    final_state: object = field(default=None, repr=False)


def default_dt(unit_rate: float, compiled: CompiledLiouvillian) -> float:
    """Step size resolving both the unit rate and the stiffest mode.

    1e-3 in units of the dominant rate, shrunk so dt times the compiled
    right-hand side's spectral bound stays at the 0.1 advisory level.
    """
    dt = 1e-3 / max(unit_rate, 1e-30)
    if compiled.rate_bound > 0:
        dt = min(dt, 0.1 / compiled.rate_bound)
    return dt


def _format_j(tj: int) -> str:
    return str(tj // 2) if tj % 2 == 0 else f"{tj / 2:.1f}"


def population_column_names(spec) -> list[str]:
    """Column names N_<J> for every block, top block first."""
    from .irreps import j_range

    return [f"N_{_format_j(tj)}" for tj in reversed(j_range(spec))]


class _Recorder:
    """Precompiled observable extraction on the packed vector."""

    def __init__(self, compiled, observables, fidelity_ref):
        self.layout = compiled.layout
        spec = compiled.spec
        self.names: list[str] = []
        self._dots = {}  # name -> weight vector
        self._special = {}  # name -> callable(y)
        need_xi2 = False
        for name in observables:
            if name == "fidelity":
                if fidelity_ref is None:
                    raise ValueError("fidelity requested without a reference ket")
                self._dots[name] = self.layout.ket_weight_vector(fidelity_ref)
                self.names.append(name)
            elif name in ("jx", "jy", "jz"):
                op = collective_op(spec, name)
                self._dots[name] = self.layout.op_weight_vector(op)
                self.names.append(name)
            elif name == "xi2":
                need_xi2 = True
                self.names.append(name)
            elif name == "trace":
                self._special[name] = self.layout.trace
                self.names.append(name)
            elif name == "min_eig":
                self.names.append(name)
            elif name == "populations":
                self._pop_names = population_column_names(spec)
                self.names.extend(self._pop_names)
            elif name == "dropped_weight":
                self.names.append(name)
            else:
                raise ValueError(f"unknown observable {name!r}")
        if need_xi2:
            jy = collective_op(spec, "jy")
            jz = collective_op(spec, "jz")
            self._w_jy = self.layout.op_weight_vector(jy)
            self._w_jy2 = self.layout.op_weight_vector(jy @ jy)
            self._w_jz = self.layout.op_weight_vector(jz)
        self._need_pops = "populations" in observables
        self._need_mineig = "min_eig" in observables
        self._need_dropped = "dropped_weight" in observables
        self._n = spec.n_particles
        self.rows = {name: [] for name in self.names}

    def min_block_eigenvalue(self, y) -> float:
        lo = math.inf
        for tj in self.layout.tjs:
            b = self.layout.block_view(y, tj)
            lo = min(lo, float(np.linalg.eigvalsh(b).min()))
        return lo

    def record(self, y, min_eig, dropped):
        for name, w in self._dots.items():
            val = complex(np.dot(w, y))
            self.rows[name].append(val.real)
        for name, f in self._special.items():
            self.rows[name].append(f(y))
        if hasattr(self, "_w_jy"):
            mean_y = np.dot(self._w_jy, y).real
            mean_y2 = np.dot(self._w_jy2, y).real
            mean_z = np.dot(self._w_jz, y).real
            if abs(mean_z) < 1e-12:
                xi2 = math.nan
            else:
                xi2 = self._n * (mean_y2 - mean_y**2) / (mean_z * mean_z)
            self.rows["xi2"].append(xi2)
        if self._need_pops:
            traces = self.layout.block_traces(y)
            for name, val in zip(self._pop_names, traces[::-1]):
                self.rows[name].append(float(val))
        if self._need_mineig:
            self.rows["min_eig"].append(min_eig)
        if self._need_dropped:
            self.rows["dropped_weight"].append(dropped)

    def finalize(self) -> dict[str, np.ndarray]:
        return {name: np.asarray(self.rows[name]) for name in self.names}


def _as_density(initial):
    if isinstance(initial, BlockedKet):
        return ket_to_density(initial), initial
    if isinstance(initial, BlockedDensity):
        return initial, None
    raise TypeError("initial state must be a BlockedKet or BlockedDensity")


def rk4_step(rho: BlockedDensity, rhs, dt: float) -> BlockedDensity:
    """One classical RK4 step for an arbitrary blocked right-hand side.

    ``rhs`` maps a BlockedDensity to a blocked table (dict of matrices).
    Blocks are re-Hermitized after the update.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    spec = rho.spec
    from .irreps import j_range

    tjs = j_range(spec)

    def full(blocks):
        return {
            tj: blocks.get(tj, np.zeros((tj + 1, tj + 1), dtype=complex))
            for tj in tjs
        }

    def shifted(base, table, c):
        return BlockedDensity(
            spec,
            {tj: base[tj] + c * table[tj] for tj in tjs},
            check=False,
        )

    r0 = full(rho.blocks)
    rho0 = BlockedDensity(spec, r0, check=False)
    k1 = full(rhs(rho0))
    k2 = full(rhs(shifted(r0, k1, dt / 2.0)))
    k3 = full(rhs(shifted(r0, k2, dt / 2.0)))
    k4 = full(rhs(shifted(r0, k3, dt)))
    out = {}
    for tj in tjs:
        b = r0[tj] + (dt / 6.0) * (k1[tj] + 2.0 * (k2[tj] + k3[tj]) + k4[tj])
        out[tj] = 0.5 * (b + b.conj().T)
    return BlockedDensity(spec, out, check=False)


def evolve(
    initial,
    hamiltonian=None,
    channels=(),
    grid: TimeGrid = None,
    observables=("fidelity", "jz", "trace"),
    fidelity_ref: BlockedKet | None = None,
    truncation: float | None = None,
    compiled: CompiledLiouvillian | None = None,
) -> TrajectoryRecord:
    """Evolve an initial collective state and record observables.

    Parameters
    ----------
    initial : BlockedKet or BlockedDensity
        Starting state.  A ket doubles as the default fidelity reference.
    hamiltonian : BlockOperator or None
    channels : sequence of ChannelSpec
    grid : TimeGrid
    observables : sequence of str
        Any of fidelity, jx, jy, jz, xi2, trace, min_eig, populations
        (one column per block), dropped_weight.
    fidelity_ref : BlockedKet, optional
        Overrides the fidelity reference state.
    truncation : float, optional
        Population threshold below which outlying blocks are zeroed each
        step.  The removed weight accumulates in ``dropped_weight`` and the
        trace monitor accounts for it; leave ``None`` for exact evolution.
    compiled : CompiledLiouvillian, optional
        Reuse a previously compiled right-hand side.

    Raises
    ------
    PhysicalityError
        If the trace drifts by more than 1e-6 or a recorded block develops
        an eigenvalue below -1e-6.
    """
    if grid is None:
        raise ValueError("a TimeGrid is required")
    rho0, ket0 = _as_density(initial)
    if fidelity_ref is None:
        fidelity_ref = ket0
    if compiled is None:
        compiled = CompiledLiouvillian(rho0.spec, hamiltonian, tuple(channels))
    layout = compiled.layout
    mat = compiled.matrix
    dt = grid.dt

    if compiled.rate_bound * dt > 0.1:
        warnings.warn(
            f"dt*rate = {compiled.rate_bound * dt:.2f} > 0.1; "
            "the grid may under-resolve the fastest mode",
            stacklevel=2,
        )

    rec = _Recorder(compiled, observables, fidelity_ref)
    y = layout.pack(rho0)
    n_steps = grid.n_steps
    stride = grid.record_stride

    times = [grid.t0]
    dropped = 0.0
    min_eig_seen = rec.min_block_eigenvalue(y)
    max_trace_dev = abs(layout.trace(y) - 1.0)
    rec.record(y, min_eig_seen, dropped)

    nb = len(layout.tjs)
    for step in range(1, n_steps + 1):
        k1 = mat @ y
        k2 = mat @ (y + (0.5 * dt) * k1)
        k3 = mat @ (y + (0.5 * dt) * k2)
        k4 = mat @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        y = layout.hermitize(y)

        if truncation is not None:
            traces = layout.block_traces(y)
            active = np.nonzero(traces >= truncation)[0]
            if active.size:
                lo = max(0, active[0] - 1)
                hi = min(nb - 1, active[-1] + 1)
                for i, tj in enumerate(layout.tjs):
                    if i < lo or i > hi:
                        v = layout.block_view(y, tj)
                        dropped += float(np.trace(v).real)
                        v[:] = 0.0

        trace_dev = abs(layout.trace(y) + dropped - 1.0)
        max_trace_dev = max(max_trace_dev, trace_dev)
        if trace_dev > TRACE_ABORT:
            raise PhysicalityError(
                f"trace drifted by {trace_dev:.3e} at t = {grid.t0 + step * dt:.6g}; "
                "reduce dt or investigate the generator"
            )

        if step % stride == 0:
            min_eig = rec.min_block_eigenvalue(y)
            min_eig_seen = min(min_eig_seen, min_eig)
            if min_eig < NEGATIVITY_ABORT:
                raise PhysicalityError(
                    f"negativity {min_eig:.3e} at t = {grid.t0 + step * dt:.6g}; "
                    "reduce dt or investigate the generator"
                )
            times.append(grid.t0 + step * dt)
            rec.record(y, min_eig, dropped)

    return TrajectoryRecord(
        times=np.asarray(times),
        columns=rec.finalize(),
        max_trace_deviation=max_trace_dev,
        min_eigenvalue=min_eig_seen,
        dropped_weight=dropped,
        final_state=layout.unpack(y, check=False),
    )


def convergence_check(
    initial,
    hamiltonian,
    channels,
    grid: TimeGrid,
    observables=("fidelity",),
    fidelity_ref=None,
) -> dict[str, float]:
    """Max per-column deviation between a dt run and a dt/2 run.

    Both runs record at the same physical times; the deviation estimates
    the time-discretization error of the coarser run.
    """
    fine = TimeGrid(
        t_max=grid.t_max,
        dt=grid.dt / 2.0,
        record_stride=grid.record_stride * 2,
        t0=grid.t0,
    )
    a = evolve(initial, hamiltonian, channels, grid, observables, fidelity_ref)
    b = evolve(initial, hamiltonian, channels, fine, observables, fidelity_ref)
    out = {}
    for name in a.columns:
        av, bv = a.columns[name], b.columns[name]
        m = min(av.size, bv.size)
        out[name] = float(np.nanmax(np.abs(av[:m] - bv[:m]))) if m else 0.0
    return out
