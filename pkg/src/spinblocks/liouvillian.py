"""Dissipators on the blocked representation and their compiled form.

The central object is the scatter rule for a symmetric sum of identical
single-particle jumps: acting on a source element |J,M><J,M'| with
components (q, r) drawn from {-, +, z}, it produces up to three entries,

  same block:  1/(2J) * A_q(J,M) A_r(J,M') * (1 + au(J)(2J+1)/(J+1))
  block J-1:   1/(2J) * B_q(J,M) B_r(J,M') * ad(J)
  block J+1:   1/(2(J+1)) * D_q(J,M) D_r(J,M') * au(J)

with M shifted by q on the ket side and by r on the bra side, and where
ad(J) = alpha(N,J)/d(N,J) and au(J) = alpha(N,J+1)/d(N,J) are cumulative
multiplicity ratios.  The A and B families vanish identically at J = 0,
so the same-J and down terms are defined as zero there and the 1/J is
never evaluated.

For time stepping, the entire right-hand side (Hamiltonian commutator
plus all dissipators) is precompiled into one flat sparse matrix acting
on the packed block vector, so an application is a single sparse
matrix-vector product.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .irreps import (
    EnsembleSpec,
    alpha_over_d,
    coeff_a,
    coeff_a_vec,
    coeff_b,
    coeff_b_vec,
    coeff_d,
    coeff_d_vec,
    j_range,
    twice,
)
from .operators import BlockOperator, LocalOperatorCoeffs, symmetric_sum_collective
from .states import BlockedDensity, BlockLayout

__all__ = [
    "ChannelSpec",
    "GScatterEntry",
    "local_channel",
    "collective_channel",
    "g_scatter",
    "apply_local_jump",
    "symmetric_local_dissipator",
    "collective_dissipator",
    "liouvillian_apply",
    "CompiledLiouvillian",
]

_SHIFT = {"-": -1, "+": 1, "z": 0}


@dataclass(frozen=True)
class ChannelSpec:
    """One decoherence channel: a traceless single-particle operator,
    applied either as a symmetric sum of local jumps or as one collective
    jump, with rate gamma >= 0."""

    coeffs: LocalOperatorCoeffs
    kind: str  # "local" | "collective"
    rate: float

    def __post_init__(self):
        if abs(self.coeffs.c0) > 1e-12:
            raise ValueError("channel operators must be traceless (c0 = 0)")
        if self.kind not in ("local", "collective"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.rate < 0:
            raise ValueError("channel rate must be non-negative")


def local_channel(coeffs: LocalOperatorCoeffs, gamma: float) -> ChannelSpec:
    return ChannelSpec(coeffs=coeffs, kind="local", rate=gamma)


def collective_channel(coeffs: LocalOperatorCoeffs, gamma: float) -> ChannelSpec:
    return ChannelSpec(coeffs=coeffs, kind="collective", rate=gamma)


@dataclass(frozen=True)
class GScatterEntry:
    """One scatter contribution; indices are twice-values (tj, tm, tm')."""

    source: tuple[int, int, int]
    target: tuple[int, int, int]
    weight: float


def _branch_weights(spec: EnsembleSpec, tj: int) -> tuple[float, float, float]:
    """(same, down, up) scalar prefactors for source block J = tj/2."""
    j = tj / 2.0
    au = alpha_over_d(spec, tj + 2, tj)
    if tj == 0:
        w_same = 0.0
        w_down = 0.0
    else:
        ad = alpha_over_d(spec, tj, tj)
        w_same = 0.5 / j * (1.0 + au * (tj + 1.0) / (j + 1.0))
        w_down = 0.5 * ad / j
    w_up = 0.5 * au / (j + 1.0)
    return w_same, w_down, w_up


def g_scatter(spec: EnsembleSpec, j, m, mp, q: str, r: str) -> list[GScatterEntry]:
    """Scatter entries for the symmetric single-particle map on one element.

    Parameters
    ----------
    spec : EnsembleSpec
    j, m, mp :
        Source element |J, M><J, M'| (physical values, half-integers allowed).
    q, r : {'-', '+', 'z'}
        Component acting on the ket side (q) and bra side (r).

    Returns
    -------
    list of GScatterEntry
        Up to three entries (same block, J-1, J+1).  Entries whose weight
        vanishes, including all out-of-range targets, are omitted.
    """
    tj, tm, tmp = twice(j), twice(m), twice(mp)
    if tj not in j_range(spec):
        raise ValueError(f"no J = {j} block for N = {spec.n_particles}")
    if abs(tm) > tj or abs(tmp) > tj:
        raise ValueError("|M| exceeds J")
    if q not in _SHIFT or r not in _SHIFT:
        raise ValueError("components must be one of '-', '+', 'z'")

    jf, mf, mpf = tj / 2.0, tm / 2.0, tmp / 2.0
    ttm = tm + 2 * _SHIFT[q]
    ttmp = tmp + 2 * _SHIFT[r]
    w_same, w_down, w_up = _branch_weights(spec, tj)

    entries = []
    if tj > 0:
        w = w_same * coeff_a(q, jf, mf) * coeff_a(r, jf, mpf)
        if w != 0.0:
            entries.append(GScatterEntry((tj, tm, tmp), (tj, ttm, ttmp), w))
        w = w_down * coeff_b(q, jf, mf) * coeff_b(r, jf, mpf)
        if w != 0.0:
            entries.append(GScatterEntry((tj, tm, tmp), (tj - 2, ttm, ttmp), w))
    if tj < spec.n_particles:
        w = w_up * coeff_d(q, jf, mf) * coeff_d(r, jf, mpf)
        if w != 0.0:
            entries.append(GScatterEntry((tj, tm, tmp), (tj + 2, ttm, ttmp), w))
    return entries


# ---------------------------------------------------------------------------
# compiled superoperators
#
# Flat convention: a blocked matrix is packed row-major, blocks ascending
# in J (states.BlockLayout).  vec(A rho B) = kron(A, B^T) vec(rho), so a
# jump A rho A^dag becomes kron(A, conj(A)).
# ---------------------------------------------------------------------------


def _m_desc(tj: int) -> np.ndarray:
    return (tj - 2 * np.arange(tj + 1)) / 2.0


def _branch_ops(spec: EnsembleSpec, tj: int, comps: dict[str, complex]):
    """Per-block branch matrices (same, down, up) for one channel.

    Each is the component-weighted sum of the coefficient bands; ``None``
    marks a branch that is identically absent for this block.
    """
    n = tj + 1
    j = tj / 2.0
    m = _m_desc(tj)

    same = None
    if tj > 0:
        bands, offs = [], []
        if comps["-"] != 0:
            bands.append(comps["-"] * coeff_a_vec("-", j, m[: n - 1]))
            offs.append(-1)
        if comps["+"] != 0:
            bands.append(comps["+"] * coeff_a_vec("+", j, m[1:]))
            offs.append(1)
        if comps["z"] != 0:
            bands.append(comps["z"] * coeff_a_vec("z", j, m))
            offs.append(0)
        if bands:
            same = sp.diags(bands, offs, shape=(n, n), format="csr", dtype=complex)

    down = None
    if tj >= 2:
        bands, offs = [], []
        if comps["-"] != 0:
            bands.append(comps["-"] * coeff_b_vec("-", j, m[: n - 2]))
            offs.append(0)
        if comps["+"] != 0:
            bands.append(comps["+"] * coeff_b_vec("+", j, m[2:]))
            offs.append(2)
        if comps["z"] != 0:
            bands.append(comps["z"] * coeff_b_vec("z", j, m[1 : n - 1]))
            offs.append(1)
        if bands:
            down = sp.diags(bands, offs, shape=(n - 2, n), format="csr", dtype=complex)

    up = None
    if tj < spec.n_particles:
        bands, offs = [], []
        if comps["-"] != 0:
            bands.append(comps["-"] * coeff_d_vec("-", j, m))
            offs.append(-2)
        if comps["+"] != 0:
            bands.append(comps["+"] * coeff_d_vec("+", j, m))
            offs.append(0)
        if comps["z"] != 0:
            bands.append(comps["z"] * coeff_d_vec("z", j, m))
            offs.append(-1)
        if bands:
            up = sp.diags(bands, offs, shape=(n + 2, n), format="csr", dtype=complex)

    return same, down, up


class _CooBuilder:
    """Accumulates global COO triplets and finalizes to CSR (duplicates sum)."""

    def __init__(self, total: int):
        self.total = total
        self.rows = []
        self.cols = []
        self.data = []

    def add(self, piece: sp.spmatrix, target_off: int, source_off: int, scale=1.0):
        c = piece.tocoo()
        if c.nnz == 0:
            return
        self.rows.append(c.row.astype(np.int64) + target_off)
        self.cols.append(c.col.astype(np.int64) + source_off)
        self.data.append(scale * c.data.astype(complex))

    def finalize(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix((self.total, self.total), dtype=complex)
        rows = np.concatenate(self.rows)
        cols = np.concatenate(self.cols)
        data = np.concatenate(self.data)
        out = sp.csr_matrix((data, (rows, cols)), shape=(self.total, self.total))
        out.sum_duplicates()
        return out


def _add_jump_local(builder, spec, layout, coeffs: LocalOperatorCoeffs, scale=1.0):
    """Sum over particles of s rho s^dag, assembled branch by branch."""
    comps = coeffs.components()
    for tj in layout.tjs:
        w_same, w_down, w_up = _branch_weights(spec, tj)
        same, down, up = _branch_ops(spec, tj, comps)
        o = layout.offsets[tj]
        if same is not None and w_same != 0.0:
            builder.add(sp.kron(same, same.conj()), o, o, scale * w_same)
        if down is not None and w_down != 0.0:
            builder.add(
                sp.kron(down, down.conj()), layout.offsets[tj - 2], o, scale * w_down
            )
        if up is not None and w_up != 0.0:
            builder.add(
                sp.kron(up, up.conj()), layout.offsets[tj + 2], o, scale * w_up
            )


def _add_sandwich(builder, layout, op: BlockOperator, scale=1.0):
    """S rho S^dag for a block-diagonal operator."""
    for tj in layout.tjs:
        s = sp.csr_matrix(op.blocks[tj])
        s.eliminate_zeros()
        if s.nnz:
            o = layout.offsets[tj]
            builder.add(sp.kron(s, s.conj()), o, o, scale)


def _add_left_right(builder, layout, op: BlockOperator, left_scale, right_scale):
    """left_scale * (K rho) + right_scale * (rho K) blockwise."""
    for tj in layout.tjs:
        k = sp.csr_matrix(op.blocks[tj])
        k.eliminate_zeros()
        if not k.nnz:
            continue
        o = layout.offsets[tj]
        n = tj + 1
        eye = sp.identity(n, format="csr", dtype=complex)
        builder.add(sp.kron(k, eye), o, o, left_scale)
        builder.add(sp.kron(eye, k.T), o, o, right_scale)


def _anticommutator_op(spec: EnsembleSpec, ch: ChannelSpec) -> BlockOperator:
    """K = sum_n (s^dag s)^(n) for local channels, S^dag S for collective."""
    if ch.kind == "local":
        ssd = ch.coeffs.adjoint().product(ch.coeffs)
        return symmetric_sum_collective(spec, ssd)
    s = symmetric_sum_collective(spec, ch.coeffs)
    return s.adjoint() @ s


@lru_cache(maxsize=64)
def _channel_matrix(spec: EnsembleSpec, ch: ChannelSpec) -> sp.csr_matrix:
    """Full dissipator of one channel (rate included) as a flat CSR."""
    layout = BlockLayout(spec)
    builder = _CooBuilder(layout.total)
    if ch.kind == "local":
        _add_jump_local(builder, spec, layout, ch.coeffs, scale=ch.rate)
    else:
        s = symmetric_sum_collective(spec, ch.coeffs)
        _add_sandwich(builder, layout, s, scale=ch.rate)
    k = _anticommutator_op(spec, ch)
    _add_left_right(builder, layout, k, -0.5 * ch.rate, -0.5 * ch.rate)
    return builder.finalize()


def _hamiltonian_matrix(layout: BlockLayout, h: BlockOperator) -> sp.csr_matrix:
    """-i [H, rho] as a flat CSR."""
    builder = _CooBuilder(layout.total)
    _add_left_right(builder, layout, h, -1.0j, +1.0j)
    return builder.finalize()


class CompiledLiouvillian:
    """Precompiled right-hand side of the master equation.

    d rho / dt = -i [H, rho] + sum over channels of gamma * dissipator,
    held as one sparse matrix on the packed block vector.  Application is
    a pure function; the compiled tables are immutable and shareable.
    """

    def __init__(self, spec: EnsembleSpec, hamiltonian=None, channels=()):
        self.spec = spec
        self.layout = BlockLayout(spec)
        self.channels = tuple(channels)
        self.hamiltonian = hamiltonian
        mat = sp.csr_matrix((self.layout.total, self.layout.total), dtype=complex)
        rate = 0.0
        if hamiltonian is not None:
            if hamiltonian.spec != spec:
                raise ValueError("ensemble specs do not match")
            mat = mat + _hamiltonian_matrix(self.layout, hamiltonian)
            rate += 2.0 * hamiltonian.infinity_norm()
        for ch in self.channels:
            mat = mat + _channel_matrix(spec, ch)
            rate += 2.0 * ch.rate * _anticommutator_op(spec, ch).infinity_norm()
        self.matrix = mat.tocsr()
        self.rate_bound = rate

    def apply_flat(self, y: np.ndarray) -> np.ndarray:
        return self.matrix @ y

    def apply(self, rho: BlockedDensity) -> dict[int, np.ndarray]:
        """One application, returned as a full blocked table."""
        if rho.spec != self.spec:
            raise ValueError("ensemble specs do not match")
        y = self.matrix @ self.layout.pack(rho)
        return {
            tj: self.layout.block_view(y, tj).copy() for tj in self.layout.tjs
        }


def apply_local_jump(
    rho: BlockedDensity, coeffs: LocalOperatorCoeffs
) -> dict[int, np.ndarray]:
    """Jump part only: sum over particles of s rho s^dag, as a blocked table.

    The result is not a state (its trace equals tr(rho K) with
    K = sum_n (s^dag s)^(n), not 1).
    """
    if abs(coeffs.c0) > 1e-12:
        raise ValueError("jump operators must be traceless (c0 = 0)")
    layout = BlockLayout(rho.spec)
    builder = _CooBuilder(layout.total)
    _add_jump_local(builder, rho.spec, layout, coeffs)
    y = builder.finalize() @ layout.pack(rho)
    return {tj: layout.block_view(y, tj).copy() for tj in layout.tjs}


def symmetric_local_dissipator(
    rho: BlockedDensity, ch: ChannelSpec
) -> dict[int, np.ndarray]:
    """Lindblad dissipator of a symmetric-local channel (trace-free table)."""
    if ch.kind != "local":
        raise ValueError("channel kind must be 'local'")
    return CompiledLiouvillian(rho.spec, channels=(ch,)).apply(rho)


def collective_dissipator(
    rho: BlockedDensity, ch: ChannelSpec
) -> dict[int, np.ndarray]:
    """Lindblad dissipator of a collective channel; block-diagonal in J."""
    if ch.kind != "collective":
        raise ValueError("channel kind must be 'collective'")
    return CompiledLiouvillian(rho.spec, channels=(ch,)).apply(rho)


def liouvillian_apply(
    rho: BlockedDensity, hamiltonian=None, channels=()
) -> dict[int, np.ndarray]:
    """-i[H, rho] plus all channel dissipators, as a blocked table."""
    return CompiledLiouvillian(rho.spec, hamiltonian, channels).apply(rho)
