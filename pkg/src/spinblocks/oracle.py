"""Brute-force full 2^N Hilbert-space reference implementation.

Everything here works in the raw tensor-product space with no symmetry
reduction: explicit site operators, a total-spin eigenbasis built by
coupling particles one at a time with spin-1/2 Clebsch-Gordan
coefficients, projectors, the embedding that distributes blocked states
uniformly over degenerate copies, and full master-equation evolution with
the same fixed-step RK4 arithmetic as the reduced integrator.  It is the
ground truth the reduced representation is tested against, and is capped
at desk scale (n <= 12 operators, n <= 10 basis work and evolution).

Site 1 is the leftmost tensor factor (most significant bit); basis index
0 is all spins up.  Within a (J, copy) subspace, columns run M descending
from +J to -J, matching the blocked convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .irreps import EnsembleSpec, j_range
from .operators import BlockOperator, LocalOperatorCoeffs
from .states import BlockedDensity, BlockedKet, ket_to_density

__all__ = [
    "FullState",
    "IrrepBasis",
    "local_op_full",
    "collective_op_full",
    "cg_irrep_basis",
    "jsq_projector",
    "embed_ket",
    "embed_collective",
    "embed_block_operator",
    "project_to_collective",
    "build_full_liouvillian",
    "evolve_full",
]

MAX_OPERATOR_QUBITS = 12
MAX_BASIS_QUBITS = 10


def _check_size(n: int, cap: int) -> None:
    if n < 1 or n > cap:
        raise ValueError(f"full-space work is capped at {cap} qubits (got {n})")


@dataclass
class FullState:
    """Dense density matrix on the full 2^n tensor-product space."""

    n: int
    rho: np.ndarray

    def __post_init__(self):
        _check_size(self.n, MAX_OPERATOR_QUBITS)
        self.rho = np.asarray(self.rho, dtype=complex)
        d = 2**self.n
        if self.rho.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix")

    def validate(self, tol=1e-9) -> None:
        if np.abs(self.rho - self.rho.conj().T).max() > 1e-9:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(self.rho).real - 1.0) > tol:
            raise ValueError("state trace is not 1")
        if float(np.linalg.eigvalsh(self.rho).min()) < -tol:
            raise ValueError("state is not positive semidefinite")


def local_op_full(n: int, site: int, coeffs: LocalOperatorCoeffs) -> sp.csr_matrix:
    """Single-site operator 1 x ... x s x ... x 1 (site is 1-based)."""
    _check_size(n, MAX_OPERATOR_QUBITS)
    if not 1 <= site <= n:
        raise ValueError(f"site {site} outside 1..{n}")
    s = sp.csr_matrix(coeffs.to_matrix())
    eye2 = sp.identity(2, format="csr", dtype=complex)
    out = None
    for k in range(1, n + 1):
        factor = s if k == site else eye2
        out = factor if out is None else sp.kron(out, factor, format="csr")
    return out


def collective_op_full(n: int, which: str) -> sp.csr_matrix:
    """Total-spin operator as an explicit sum of site operators."""
    which = which.lower()
    if which == "identity":
        return sp.identity(2**n, format="csr", dtype=complex)
    base = {
        "jminus": LocalOperatorCoeffs(cm=1.0),
        "jplus": LocalOperatorCoeffs(cp=1.0),
        "jz": LocalOperatorCoeffs(cz=1.0),
    }
    if which in base:
        out = sum(local_op_full(n, k, base[which]) for k in range(1, n + 1))
        return out.tocsr()
    if which == "jx":
        return ((collective_op_full(n, "jplus") + collective_op_full(n, "jminus")) / 2.0).tocsr()
    if which == "jy":
        return ((collective_op_full(n, "jplus") - collective_op_full(n, "jminus")) / 2.0j).tocsr()
    raise ValueError(f"unknown collective operator {which!r}")


class IrrepBasis:
    """Total-spin eigenbasis from left-to-right pairwise coupling.

    ``copies[tj]`` is the list of orthonormal (2^n, 2J+1) column stacks,
    one per coupling path reaching total spin J; the list length equals
    the block multiplicity d(n, J).
    """

    def __init__(self, n: int, copies: dict[int, list[np.ndarray]]):
        self.n = n
        self.copies = copies

    def copy_count(self, tj: int) -> int:
        return len(self.copies.get(tj, ()))

    def basis_matrix(self) -> np.ndarray:
        """All basis columns side by side, (J, copy, M desc) ordered."""
        cols = []
        for tj in sorted(self.copies):
            for v in self.copies[tj]:
                cols.append(v)
        return np.hstack(cols)


def cg_irrep_basis(n: int) -> IrrepBasis:
    """Couple n spins one at a time with standard spin-1/2 CG coefficients.

    Each distinct path (J_1 = 1/2, J_2, ..., J_n = J) contributes one
    orthonormal copy of the spin-J block; copy counts reproduce the
    multiplicity formula exactly.
    """
    _check_size(n, MAX_BASIS_QUBITS)
    e_up = np.array([1.0, 0.0], dtype=complex)
    e_dn = np.array([0.0, 1.0], dtype=complex)
    # each path: (tj, matrix (2^k, tj+1)) with columns M descending
    paths = [(1, np.eye(2, dtype=complex))]
    for _ in range(n - 1):
        new_paths = []
        for tj, v in paths:
            dim = v.shape[0]
            # couple up: J' = J + 1/2
            tJ = tj + 1
            up = np.zeros((dim * 2, tJ + 1), dtype=complex)
            for a in range(tJ + 1):
                tm = tJ - 2 * a  # target twice-M
                c_up = math.sqrt((tj + tm + 1) / (2.0 * (tj + 1)))
                c_dn = math.sqrt((tj - tm + 1) / (2.0 * (tj + 1)))
                if abs(tm - 1) <= tj and c_up:
                    up[:, a] += c_up * np.kron(v[:, (tj - (tm - 1)) // 2], e_up)
                if abs(tm + 1) <= tj and c_dn:
                    up[:, a] += c_dn * np.kron(v[:, (tj - (tm + 1)) // 2], e_dn)
            new_paths.append((tJ, up))
            # couple down: J' = J - 1/2 (absent for J = 0)
            if tj >= 1:
                tJ = tj - 1
                dn = np.zeros((dim * 2, tJ + 1), dtype=complex)
                for a in range(tJ + 1):
                    tm = tJ - 2 * a
                    c_up = -math.sqrt((tj - tm + 1) / (2.0 * (tj + 1)))
                    c_dn = math.sqrt((tj + tm + 1) / (2.0 * (tj + 1)))
                    if abs(tm - 1) <= tj and c_up:
                        dn[:, a] += c_up * np.kron(v[:, (tj - (tm - 1)) // 2], e_up)
                    if abs(tm + 1) <= tj and c_dn:
                        dn[:, a] += c_dn * np.kron(v[:, (tj - (tm + 1)) // 2], e_dn)
                new_paths.append((tJ, dn))
        paths = new_paths
    copies: dict[int, list[np.ndarray]] = {}
    for tj, v in paths:
        copies.setdefault(tj, []).append(v)
    return IrrepBasis(n, {tj: copies[tj] for tj in sorted(copies)})


def jsq_projector(basis: IrrepBasis, tj: int) -> np.ndarray:
    """Projector onto the full spin-J subspace (all copies, all M)."""
    d = 2**basis.n
    p = np.zeros((d, d), dtype=complex)
    for v in basis.copies.get(tj, ()):
        p += v @ v.conj().T
    return p


def embed_ket(basis: IrrepBasis, ket: BlockedKet) -> np.ndarray:
    """Pure-state embedding: each block coefficient spreads as 1/sqrt(d)
    over the degenerate copies.  Norm-preserving."""
    d = 2**basis.n
    out = np.zeros(d, dtype=complex)
    for tj, v in ket.blocks.items():
        copies = basis.copies[tj]
        w = 1.0 / math.sqrt(len(copies))
        for vc in copies:
            out += w * (vc @ v)
    return out


def embed_collective(basis: IrrepBasis, state) -> FullState:
    """Embed a blocked state as the copy-uniform full-space density.

    Each block matrix is distributed as a uniform mixture over its
    degenerate copies, the unique form that projects back to the same
    blocked state.  A ket input embeds as its blocked density (for a ket
    spanning blocks with several copies this is the copy-uniform mixture,
    not the pure uniform superposition).
    """
    if isinstance(state, BlockedKet):
        state = ket_to_density(state)
    d = 2**basis.n
    out = np.zeros((d, d), dtype=complex)
    for tj, b in state.blocks.items():
        copies = basis.copies[tj]
        w = 1.0 / len(copies)
        for vc in copies:
            out += w * (vc @ b @ vc.conj().T)
    return FullState(basis.n, out)


def embed_block_operator(basis: IrrepBasis, op) -> np.ndarray:
    """Observable embedding: weight one per copy, so full-space
    expectations of the result equal blocked expectations."""
    d = 2**basis.n
    out = np.zeros((d, d), dtype=complex)
    if isinstance(op, BlockOperator):
        items = op.blocks.items()
    else:
        items = op.items()
    for tj, b in items:
        for vc in basis.copies[tj]:
            out += vc @ np.asarray(b, dtype=complex) @ vc.conj().T
    return out


def project_to_collective(
    basis: IrrepBasis, full: FullState | np.ndarray
) -> tuple[BlockedDensity, float]:
    """Copy-averaged blocked state and the weight the blocked form misses.

    The returned residual is the Frobenius norm of the difference between
    the input and the re-embedded result; it collects both copy
    non-uniformity and coherence between blocks.
    """
    rho = full.rho if isinstance(full, FullState) else np.asarray(full, dtype=complex)
    n = basis.n
    blocks = {}
    for tj, copies in basis.copies.items():
        b = np.zeros((tj + 1, tj + 1), dtype=complex)
        for vc in copies:
            b += vc.conj().T @ rho @ vc
        blocks[tj] = b
    reduced = BlockedDensity(EnsembleSpec(n), blocks, check=False)
    residual = float(np.linalg.norm(rho - embed_collective(basis, reduced).rho))
    return reduced, residual


# ---------------------------------------------------------------------------
# full-space master equation
# ---------------------------------------------------------------------------


def _lindblad_superop(jump: sp.spmatrix) -> sp.csr_matrix:
    """vec form of J rho J^dag - (J^dag J rho + rho J^dag J)/2 (row-major vec)."""
    d = jump.shape[0]
    eye = sp.identity(d, format="csr", dtype=complex)
    k = (jump.conj().T @ jump).tocsr()
    return (
        sp.kron(jump, jump.conj(), format="csr")
        - 0.5 * sp.kron(k, eye, format="csr")
        - 0.5 * sp.kron(eye, k.T, format="csr")
    ).tocsr()


def build_full_liouvillian(
    n: int,
    hamiltonian_full: sp.spmatrix | None = None,
    channels=(),
    single_site_channels=(),
) -> sp.csr_matrix:
    """Flat superoperator on vec(rho) for the full master equation.

    ``channels`` holds ChannelSpec values: local kinds enter as a sum of
    per-site Lindblad terms, collective kinds as a single Lindblad term
    built from the summed site operator.  ``single_site_channels`` takes
    (site, LocalOperatorCoeffs, rate) triples and deliberately breaks the
    particle symmetry (negative-control use).
    """
    _check_size(n, MAX_BASIS_QUBITS)
    d = 2**n
    total = sp.csr_matrix((d * d, d * d), dtype=complex)
    if hamiltonian_full is not None:
        h = sp.csr_matrix(hamiltonian_full)
        eye = sp.identity(d, format="csr", dtype=complex)
        total = total + (-1j) * (
            sp.kron(h, eye, format="csr") - sp.kron(eye, h.T, format="csr")
        )
    for ch in channels:
        if ch.kind == "local":
            piece = sum(
                _lindblad_superop(local_op_full(n, site, ch.coeffs))
                for site in range(1, n + 1)
            )
        else:
            piece = _lindblad_superop(
                sum(
                    local_op_full(n, site, ch.coeffs) for site in range(1, n + 1)
                ).tocsr()
            )
        total = total + ch.rate * piece
    for site, coeffs, rate in single_site_channels:
        total = total + rate * _lindblad_superop(local_op_full(n, site, coeffs))
    return total.tocsr()


class _FullRecorder:
    def __init__(self, n, observables, basis, fidelity_ref):
        self.n = n
        d = 2**n
        self.names: list[str] = []
        self._dots = {}
        self._need_pops = False
        self._need_residual = False
        self.basis = basis
        spec = EnsembleSpec(n)
        for name in observables:
            if name == "fidelity":
                if fidelity_ref is None or basis is None:
                    raise ValueError("fidelity needs a reference ket and a basis")
                proj = embed_block_operator(
                    basis,
                    {tj: np.outer(v, v.conj()) for tj, v in fidelity_ref.blocks.items()},
                )
                self._dots[name] = proj.T.reshape(-1)
                self.names.append(name)
            elif name in ("jx", "jy", "jz"):
                op = collective_op_full(n, name).toarray()
                self._dots[name] = op.T.reshape(-1)
                self.names.append(name)
            elif name == "trace":
                eye = np.eye(d, dtype=complex)
                self._dots[name] = eye.reshape(-1)
                self.names.append(name)
            elif name == "populations":
                if basis is None:
                    raise ValueError("populations need an irrep basis")
                from .integrator import population_column_names

                self._need_pops = True
                self._pop_dots = {}
                for tj in reversed(j_range(spec)):
                    p = jsq_projector(basis, tj)
                    self._pop_dots[tj] = p.T.reshape(-1)
                self._pop_names = population_column_names(spec)
                self.names.extend(self._pop_names)
            elif name == "residual":
                if basis is None:
                    raise ValueError("residual needs an irrep basis")
                self._need_residual = True
                self.names.append(name)
            else:
                raise ValueError(f"unknown full-space observable {name!r}")
        self.rows = {name: [] for name in self.names}

    def record(self, y):
        d = 2**self.n
        for name, w in self._dots.items():
            self.rows[name].append(float(np.dot(w, y).real))
        if self._need_pops:
            for name, tj in zip(self._pop_names, sorted(self._pop_dots, reverse=True)):
                self.rows[name].append(float(np.dot(self._pop_dots[tj], y).real))
        if self._need_residual:
            _, res = project_to_collective(self.basis, y.reshape(d, d))
            self.rows["residual"].append(res)

    def finalize(self):
        return {name: np.asarray(v) for name, v in self.rows.items()}


def evolve_full(
    initial: FullState,
    hamiltonian_full=None,
    channels=(),
    grid=None,
    observables=("fidelity", "jz", "trace"),
    basis: IrrepBasis | None = None,
    fidelity_ref: BlockedKet | None = None,
    single_site_channels=(),
    superop: sp.csr_matrix | None = None,
) -> "TrajectoryRecord":
    """Full-space RK4 evolution with the same stepper arithmetic as the
    reduced integrator, recording full-space observables.

    Observables: fidelity (vs the copy-weighted projector on the
    reference ket), jx, jy, jz, trace, populations (via spin projectors),
    residual (distance from the embedded-collective manifold).
    """
    from .integrator import TrajectoryRecord

    if grid is None:
        raise ValueError("a TimeGrid is required")
    n = initial.n
    _check_size(n, MAX_BASIS_QUBITS)
    d = 2**n
    if superop is None:
        superop = build_full_liouvillian(
            n, hamiltonian_full, channels, single_site_channels
        )
    rec = _FullRecorder(n, observables, basis, fidelity_ref)
    y = initial.rho.reshape(-1).copy()
    tperm = np.arange(d * d).reshape(d, d).T.reshape(-1)
    dt = grid.dt
    n_steps = grid.n_steps
    stride = grid.record_stride

    times = [grid.t0]
    rec.record(y)
    for step in range(1, n_steps + 1):
        k1 = superop @ y
        k2 = superop @ (y + (0.5 * dt) * k1)
        k3 = superop @ (y + (0.5 * dt) * k2)
        k4 = superop @ (y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
        y = 0.5 * (y + y[tperm].conj())
        if step % stride == 0:
            times.append(grid.t0 + step * dt)
            rec.record(y)

    rho = y.reshape(d, d)
    return TrajectoryRecord(
        times=np.asarray(times),
        columns=rec.finalize(),
        max_trace_deviation=abs(float(np.trace(rho).real) - 1.0),
        min_eigenvalue=float(np.linalg.eigvalsh(rho).min()),
        final_state=FullState(n, rho),
    )
