"""Blocked collective states (kets and density operators) and observables.

A collective ket stores one complex vector per total-J block; a collective
density operator stores one Hermitian matrix per block and carries no
coherence between blocks.  Within a block, basis order is M descending
from +J to -J, matching the ladder-operator matrix convention used by the
operator and scatter modules.

Cross-block observable sums always run in ascending-J order so repeated
runs are bitwise reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .irreps import EnsembleSpec, collective_dim, j_range, twice

__all__ = [
    "BlockedKet",
    "BlockedDensity",
    "BlockLayout",
    "dicke_state",
    "cat_state",
    "coherent_pole_state",
    "ket_to_density",
    "trace",
    "fidelity",
    "expectation",
    "variance",
    "irrep_populations",
    "squeezing_parameter",
    "truncate",
]

#: |<J_z>| below this is reported as undefined squeezing (NaN), never a crash.
SQUEEZING_JZ_CUTOFF = 1e-12


def _check_blocks(spec: EnsembleSpec, blocks, ndim: int):
    valid = set(j_range(spec))
    out = {}
    for tj in sorted(blocks):
        arr = np.asarray(blocks[tj], dtype=complex)
        if tj not in valid:
            raise ValueError(f"block J={tj}/2 not in the N={spec.n_particles} range")
        if arr.shape != (tj + 1,) * ndim:
            raise ValueError(f"block J={tj}/2 has shape {arr.shape}")
        out[tj] = arr
    return out


@dataclass
class BlockedKet:
    """Pure collective state: one coefficient vector per J block, M descending."""

    spec: EnsembleSpec
    blocks: dict[int, np.ndarray]

    def __post_init__(self):
        self.blocks = _check_blocks(self.spec, self.blocks, ndim=1)
        n = self.norm()
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ket is not normalized (norm = {n})")

    def norm(self) -> float:
        return math.sqrt(
            sum(float(np.vdot(v, v).real) for _, v in sorted(self.blocks.items()))
        )

    def coefficient(self, j, m) -> complex:
        """Coefficient c_{J,M}; zero for absent blocks."""
        tj, tm = twice(j), twice(m)
        if tj not in self.blocks:
            return 0.0 + 0.0j
        return complex(self.blocks[tj][(tj - tm) // 2])

    def to_density(self) -> "BlockedDensity":
        return ket_to_density(self)


@dataclass
class BlockedDensity:
    """Collective density operator: one matrix per J block, no cross-block terms."""

    spec: EnsembleSpec
    blocks: dict[int, np.ndarray]
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        self.blocks = _check_blocks(self.spec, self.blocks, ndim=2)
        if self.check:
            for tj, b in self.blocks.items():
                dev = np.abs(b - b.conj().T).max() if b.size else 0.0
                if dev > 1e-10:
                    raise ValueError(f"block J={tj}/2 is not Hermitian (dev {dev:.2e})")

    def validate(self, trace_tol=1e-9, psd_tol=1e-9) -> None:
        """Raise if the state is unphysical: trace must be 1, blocks PSD."""
        t = trace(self)
        if abs(t - 1.0) > trace_tol:
            raise ValueError(f"trace deviates from 1 by {t - 1.0:.2e}")
        for tj, b in sorted(self.blocks.items()):
            lo = float(np.linalg.eigvalsh(b).min())
            if lo < -psd_tol:
                raise ValueError(f"block J={tj}/2 has eigenvalue {lo:.2e}")

    def block(self, j) -> np.ndarray:
        """Matrix of block J (zeros if the block is absent)."""
        tj = twice(j)
        if tj in self.blocks:
            return self.blocks[tj]
        return np.zeros((tj + 1, tj + 1), dtype=complex)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def dicke_state(spec: EnsembleSpec, j, m) -> BlockedKet:
    """|J, M> with a single unit coefficient in block J."""
    tj, tm = twice(j), twice(m)
    if tj not in j_range(spec):
        raise ValueError(f"no J = {j} block for N = {spec.n_particles}")
    if abs(tm) > tj or (tj - tm) % 2 != 0:
        raise ValueError(f"M = {m} out of range for J = {j}")
    v = np.zeros(tj + 1, dtype=complex)
    v[(tj - tm) // 2] = 1.0
    return BlockedKet(spec, {tj: v})


def cat_state(spec: EnsembleSpec) -> BlockedKet:
    """(|N/2, +N/2> + |N/2, -N/2>) / sqrt(2), all in the top block."""
    tj = spec.n_particles
    v = np.zeros(tj + 1, dtype=complex)
    v[0] = v[-1] = 1.0 / math.sqrt(2.0)
    return BlockedKet(spec, {tj: v})


def coherent_pole_state(spec: EnsembleSpec) -> BlockedKet:
    """Spin-coherent state at the pole, |N/2, N/2> (all spins up)."""
    n = spec.n_particles
    return dicke_state(spec, n / 2, n / 2)


def ket_to_density(ket: BlockedKet) -> BlockedDensity:
    """Per-block outer products; cross-block ket coherences are dropped
    by construction of the blocked density type."""
    blocks = {tj: np.outer(v, v.conj()) for tj, v in ket.blocks.items()}
    return BlockedDensity(ket.spec, blocks, check=False)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------


def _check_same_spec(a, b):
    if a.spec != b.spec:
        raise ValueError("ensemble specs do not match")


def trace(rho: BlockedDensity) -> float:
    return float(
        sum(np.trace(b).real for _, b in sorted(rho.blocks.items()))
    )


def fidelity(rho: BlockedDensity, ket: BlockedKet) -> float:
    """<k|rho|k> summed over blocks; real and in [0, 1] for physical rho."""
    _check_same_spec(rho, ket)
    out = 0.0
    for tj, v in sorted(ket.blocks.items()):
        if tj in rho.blocks:
            out += float(np.vdot(v, rho.blocks[tj] @ v).real)
    return out


def expectation(rho: BlockedDensity, op) -> complex:
    """tr(rho O) for a block-diagonal operator, summed ascending in J."""
    _check_same_spec(rho, op)
    out = 0.0 + 0.0j
    for tj, b in sorted(rho.blocks.items()):
        out += complex(np.einsum("ij,ji->", b, op.blocks[tj]))
    return out


def variance(rho: BlockedDensity, op) -> float:
    """<O^2> - <O>^2 for a Hermitian block operator."""
    mean = expectation(rho, op)
    sq = 0.0 + 0.0j
    for tj, b in sorted(rho.blocks.items()):
        o = op.blocks[tj]
        sq += complex(np.einsum("ij,ji->", b, o @ o))
    return float((sq - mean * mean).real)


def irrep_populations(rho: BlockedDensity) -> dict[int, float]:
    """Weight tr(rho_J) carried by each block, keyed by twice-J."""
    return {tj: float(np.trace(b).real) for tj, b in sorted(rho.blocks.items())}


def squeezing_parameter(rho: BlockedDensity) -> float:
    """N <dJ_y^2> / <J_z>^2; NaN when <J_z> vanishes (undefined squeezing)."""
    from .operators import collective_op

    jy = collective_op(rho.spec, "jy")
    jz = collective_op(rho.spec, "jz")
    mean_z = expectation(rho, jz).real
    if abs(mean_z) < SQUEEZING_JZ_CUTOFF:
        return math.nan
    var_y = variance(rho, jy)
    return rho.spec.n_particles * var_y / (mean_z * mean_z)


def truncate(rho: BlockedDensity, j_min_keep) -> tuple[BlockedDensity, float]:
    """Drop blocks with J below ``j_min_keep``; no renormalization.

    Returns the truncated state and the total population removed, so the
    caller can account for the truncation error explicitly.
    """
    tj_keep = twice(j_min_keep)
    if tj_keep not in j_range(rho.spec):
        raise ValueError(f"J = {j_min_keep} not in the block range")
    kept = {tj: b for tj, b in rho.blocks.items() if tj >= tj_keep}
    dropped = float(
        sum(np.trace(b).real for tj, b in sorted(rho.blocks.items()) if tj < tj_keep)
    )
    return BlockedDensity(rho.spec, kept, check=False), dropped


# ---------------------------------------------------------------------------
# flat packing
# ---------------------------------------------------------------------------


class BlockLayout:
    """Fixed flat layout for the blocked representation of one ensemble.

    The time stepper works on a single complex vector holding every block
    matrix row-major, in ascending-J order.  The layout provides offsets,
    pack/unpack, and precomputed index arrays for the frequent operations
    (per-block traces, Hermitian symmetrization).
    """

    def __init__(self, spec: EnsembleSpec):
        self.spec = spec
        self.tjs = j_range(spec)
        self.sizes = [tj + 1 for tj in self.tjs]
        self.offsets = {}
        off = 0
        for tj, n in zip(self.tjs, self.sizes):
            self.offsets[tj] = off
            off += n * n
        self.total = off  # == sum of (2J+1)^2
        self.dim = collective_dim(spec)

        # flat indices of each block's diagonal, ascending J
        diag = []
        self._block_diag = {}
        for tj, n in zip(self.tjs, self.sizes):
            idx = self.offsets[tj] + np.arange(n) * (n + 1)
            self._block_diag[tj] = idx
            diag.append(idx)
        self.diag_indices = np.concatenate(diag)

        # permutation mapping entry (J, a, b) -> (J, b, a)
        perm = np.empty(self.total, dtype=np.int64)
        for tj, n in zip(self.tjs, self.sizes):
            o = self.offsets[tj]
            block = o + (np.arange(n * n).reshape(n, n).T).reshape(-1)
            perm[o : o + n * n] = block
        self.transpose_perm = perm

    def flat_index(self, tj: int, row: int, col: int) -> int:
        n = tj + 1
        return self.offsets[tj] + row * n + col

    def pack(self, rho: BlockedDensity) -> np.ndarray:
        y = np.zeros(self.total, dtype=complex)
        for tj, b in rho.blocks.items():
            o = self.offsets[tj]
            y[o : o + b.size] = b.reshape(-1)
        return y

    def unpack(self, y: np.ndarray, check: bool = False) -> BlockedDensity:
        blocks = {}
        for tj, n in zip(self.tjs, self.sizes):
            o = self.offsets[tj]
            b = y[o : o + n * n].reshape(n, n).copy()
            if np.abs(b).max() > 0.0:
                blocks[tj] = b
        return BlockedDensity(self.spec, blocks, check=check)

    def block_view(self, y: np.ndarray, tj: int) -> np.ndarray:
        n = tj + 1
        o = self.offsets[tj]
        return y[o : o + n * n].reshape(n, n)

    def block_traces(self, y: np.ndarray) -> np.ndarray:
        """tr of every block, ascending J."""
        return np.array(
            [y[self._block_diag[tj]].sum().real for tj in self.tjs]
        )

    def trace(self, y: np.ndarray) -> float:
        return float(y[self.diag_indices].sum().real)

    def hermitize(self, y: np.ndarray) -> np.ndarray:
        """(y + y^dagger)/2 blockwise, as one vectorized operation."""
        return 0.5 * (y + y[self.transpose_perm].conj())

    def ket_weight_vector(self, ket: BlockedKet) -> np.ndarray:
        """w with dot(w, y) = <k|rho|k> for packed rho."""
        w = np.zeros(self.total, dtype=complex)
        for tj, v in ket.blocks.items():
            o = self.offsets[tj]
            w[o : o + v.size**2] = np.outer(v.conj(), v).reshape(-1)
        return w

    def op_weight_vector(self, op) -> np.ndarray:
        """w with dot(w, y) = tr(rho O) for packed rho and block operator O."""
        w = np.zeros(self.total, dtype=complex)
        for tj in self.tjs:
            o = self.offsets[tj]
            n = tj + 1
            w[o : o + n * n] = op.blocks[tj].T.reshape(-1)
        return w
