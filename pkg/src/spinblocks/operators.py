"""Block-diagonal collective operators and single-particle coefficient algebra.

Single-particle operators are expanded in the basis {1, b-, b+, bz} where
b- and b+ are the unit-matrix-element lowering/raising operators and
bz = diag(1/2, -1/2).  With this normalization the symmetric sum over
particles maps (c0, cm, cp, cz) to c0*N*1 + cm*J- + cp*J+ + cz*Jz, and the
block scatter weights reproduce full-space dynamics with no extra factors.
Pauli-z dephasing corresponds to cz = 2 (equivalently a 4x rate).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .irreps import EnsembleSpec, coeff_a_vec, j_range

__all__ = [
    "LocalOperatorCoeffs",
    "BlockOperator",
    "collective_op",
    "counter_twisting_hamiltonian",
    "symmetric_sum_collective",
]

_B_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
_B_PLUS = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_B_Z = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)


@dataclass(frozen=True)
class LocalOperatorCoeffs:
    """Expansion of a 2x2 single-particle operator over {1, b-, b+, bz}."""

    c0: complex = 0.0
    cm: complex = 0.0
    cp: complex = 0.0
    cz: complex = 0.0

    @classmethod
    def sigma_minus(cls) -> "LocalOperatorCoeffs":
        return cls(cm=1.0)

    @classmethod
    def sigma_plus(cls) -> "LocalOperatorCoeffs":
        return cls(cp=1.0)

    @classmethod
    def pauli_z(cls) -> "LocalOperatorCoeffs":
        # sigma_z with eigenvalues +-1 is twice bz
        return cls(cz=2.0)

    @classmethod
    def from_matrix(cls, s) -> "LocalOperatorCoeffs":
        s = np.asarray(s, dtype=complex)
        if s.shape != (2, 2):
            raise ValueError("single-particle operators are 2x2")
        return cls(
            c0=(s[0, 0] + s[1, 1]) / 2.0,
            cm=s[1, 0],
            cp=s[0, 1],
            cz=s[0, 0] - s[1, 1],
        )

    def to_matrix(self) -> np.ndarray:
        return (
            self.c0 * np.eye(2, dtype=complex)
            + self.cm * _B_MINUS
            + self.cp * _B_PLUS
            + self.cz * _B_Z
        )

    def adjoint(self) -> "LocalOperatorCoeffs":
        return LocalOperatorCoeffs(
            c0=np.conj(self.c0),
            cm=np.conj(self.cp),
            cp=np.conj(self.cm),
            cz=np.conj(self.cz),
        )

    def product(self, other: "LocalOperatorCoeffs") -> "LocalOperatorCoeffs":
        """Coefficients of (self @ other) as 2x2 operators."""
        return LocalOperatorCoeffs.from_matrix(self.to_matrix() @ other.to_matrix())

    def components(self) -> dict[str, complex]:
        """Traceless components keyed like the scatter machinery expects."""
        return {"-": complex(self.cm), "+": complex(self.cp), "z": complex(self.cz)}


@dataclass
class BlockOperator:
    """Block-diagonal operator: one dense matrix per J block, M descending.

    Every block in the J range is present (zero blocks are explicit), so
    operator algebra never needs to reconcile differing block sets.
    """

    spec: EnsembleSpec
    blocks: dict[int, np.ndarray]

    def __post_init__(self):
        tjs = j_range(self.spec)
        if sorted(self.blocks) != tjs:
            raise ValueError("operator must define every block in the J range")
        self.blocks = {
            tj: np.asarray(self.blocks[tj], dtype=complex) for tj in tjs
        }
        for tj, b in self.blocks.items():
            if b.shape != (tj + 1, tj + 1):
                raise ValueError(f"block J={tj}/2 has shape {b.shape}")

    def _binary(self, other, f) -> "BlockOperator":
        if self.spec != other.spec:
            raise ValueError("ensemble specs do not match")
        return BlockOperator(
            self.spec, {tj: f(b, other.blocks[tj]) for tj, b in self.blocks.items()}
        )

    def __add__(self, other) -> "BlockOperator":
        return self._binary(other, lambda a, b: a + b)

    def __sub__(self, other) -> "BlockOperator":
        return self._binary(other, lambda a, b: a - b)

    def __matmul__(self, other) -> "BlockOperator":
        return self._binary(other, lambda a, b: a @ b)

    def __mul__(self, c) -> "BlockOperator":
        c = complex(c)
        return BlockOperator(self.spec, {tj: c * b for tj, b in self.blocks.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "BlockOperator":
        return self * (-1.0)

    def adjoint(self) -> "BlockOperator":
        return BlockOperator(
            self.spec, {tj: b.conj().T for tj, b in self.blocks.items()}
        )

    def max_abs(self) -> float:
        return max(np.abs(b).max() if b.size else 0.0 for b in self.blocks.values())

    def infinity_norm(self) -> float:
        """Max absolute row sum over blocks; cheap spectral bound."""
        return max(
            float(np.abs(b).sum(axis=1).max()) if b.size else 0.0
            for b in self.blocks.values()
        )


def _m_values(tj: int) -> np.ndarray:
    """Physical M values of a block, descending from +J to -J."""
    return (tj - 2 * np.arange(tj + 1)) / 2.0


def collective_op(spec: EnsembleSpec, which: str) -> BlockOperator:
    """Collective operator {jz, jplus, jminus, jx, jy, identity} blockwise.

    Per block: (J_z) is diag(M), (J_+-) carry the ladder elements
    sqrt((J -+ M)(J +- M + 1)) on the first off-diagonals, and
    J_x = (J_+ + J_-)/2, J_y = (J_+ - J_-)/(2i).
    """
    which = which.lower()
    blocks = {}
    for tj in j_range(spec):
        n = tj + 1
        j = tj / 2.0
        m = _m_values(tj)
        if which == "identity":
            b = np.eye(n, dtype=complex)
        elif which == "jz":
            b = np.diag(m).astype(complex)
        elif which == "jplus":
            b = np.zeros((n, n), dtype=complex)
            if n > 1:
                b[np.arange(n - 1), np.arange(1, n)] = coeff_a_vec("+", j, m[1:])
        elif which == "jminus":
            b = np.zeros((n, n), dtype=complex)
            if n > 1:
                b[np.arange(1, n), np.arange(n - 1)] = coeff_a_vec("-", j, m[:-1])
        elif which in ("jx", "jy"):
            bp = collective_op(spec, "jplus").blocks[tj]
            bm = collective_op(spec, "jminus").blocks[tj]
            b = (bp + bm) / 2.0 if which == "jx" else (bp - bm) / 2.0j
        else:
            raise ValueError(f"unknown collective operator {which!r}")
        blocks[tj] = b
    return BlockOperator(spec, blocks)


def counter_twisting_hamiltonian(spec: EnsembleSpec, lam: float) -> BlockOperator:
    """Two-axis squeezing generator H = -i * lam * (J_+^2 - J_-^2)."""
    jp = collective_op(spec, "jplus")
    jm = collective_op(spec, "jminus")
    return (-1j * lam) * (jp @ jp - jm @ jm)


def symmetric_sum_collective(
    spec: EnsembleSpec, coeffs: LocalOperatorCoeffs
) -> BlockOperator:
    """Sum of one single-particle operator over all particles, blockwise.

    With bz = diag(1/2, -1/2) the particle sums of the basis elements are
    exactly N*1, J-, J+ and Jz, so the embedding is coefficient-wise.
    """
    n = spec.n_particles
    out = (coeffs.c0 * n) * collective_op(spec, "identity")
    if coeffs.cm != 0:
        out = out + coeffs.cm * collective_op(spec, "jminus")
    if coeffs.cp != 0:
        out = out + coeffs.cp * collective_op(spec, "jplus")
    if coeffs.cz != 0:
        out = out + coeffs.cz * collective_op(spec, "jz")
    return out
