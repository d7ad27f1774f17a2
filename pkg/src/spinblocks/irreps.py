"""Combinatorics of the total-spin decomposition of N spin-1/2 particles.

The joint Hilbert space of N qubits splits into irreducible total-spin
blocks.  A block with total angular momentum J appears with multiplicity

    d(N, J) = N! (2J+1) / ((N/2 - J)! (N/2 + J + 1)!)

and the cumulative multiplicity alpha(N, J) = sum_{J' >= J} d(N, J') enters
the weights that couple neighbouring blocks under symmetric single-particle
maps.

Angular momenta are stored as *twice* their physical value (``tj = 2J``,
an ``int``), which keeps half-integer spins exact for odd N.  Functions in
this module take ``tj``/``tm`` integers; the state- and operator-level API
converts from physical values at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

__all__ = [
    "EnsembleSpec",
    "Degeneracy",
    "j_range",
    "degeneracy",
    "alpha",
    "collective_dim",
    "coeff_a",
    "coeff_b",
    "coeff_d",
    "coeff_a_vec",
    "coeff_b_vec",
    "coeff_d_vec",
    "alpha_over_d",
    "twice",
]

#: Valid single-particle component labels, ordered (lowering, raising, z).
COMPONENTS = ("-", "+", "z")


def twice(x) -> int:
    """Convert a physical (half-)integer angular momentum to its exact 2x int."""
    t = 2 * x
    ti = int(round(t))
    if abs(t - ti) > 1e-9:
        raise ValueError(f"{x} is not an integer or half-integer")
    return ti


@dataclass(frozen=True)
class EnsembleSpec:
    """Number of spin-1/2 particles making up the ensemble."""

    n_particles: int

    def __post_init__(self):
        if not isinstance(self.n_particles, int) or self.n_particles < 1:
            raise ValueError("n_particles must be a positive integer")

    @property
    def tj_min(self) -> int:
        return self.n_particles % 2

    @property
    def tj_max(self) -> int:
        return self.n_particles


@dataclass(frozen=True)
class Degeneracy:
    """A block multiplicity held both exactly and as a natural log.

    ``exact`` is an arbitrary-precision integer; ``log_value`` is computed
    independently through log-gamma so the two routes cross-check each
    other.  ``log_value`` is ``-inf`` when ``exact`` is zero.
    """

    exact: int
    log_value: float


def j_range(spec: EnsembleSpec) -> list[int]:
    """Ascending twice-J labels of the blocks present for N particles.

    Runs from 0 (N even) or 1 (N odd) up to N in steps of 2.
    """
    return list(range(spec.tj_min, spec.n_particles + 1, 2))


def _check_tj(spec: EnsembleSpec, tj: int) -> None:
    if tj < 0 or tj > spec.n_particles or (tj - spec.n_particles) % 2 != 0:
        raise ValueError(
            f"no J = {tj}/2 block for N = {spec.n_particles} particles"
        )


@lru_cache(maxsize=None)
def _binomial_row(n: int) -> list[int]:
    """comb(n, k) for k = 0 .. n//2, built by the ratio recurrence."""
    row = [1]
    for k in range(n // 2):
        row.append(row[-1] * (n - k) // (k + 1))
    return row


def _comb_half(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    return _binomial_row(n)[min(k, n - k)]


@lru_cache(maxsize=None)
def _degeneracy_cached(n: int, tj: int) -> Degeneracy:
    k = (n - tj) // 2
    exact = _comb_half(n, k) - _comb_half(n, k - 1)
    # log route: ln N! + ln(2J+1) - ln k! - ln (N-k+1)!
    log_value = (
        math.lgamma(n + 1)
        + math.log(tj + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 2)
    )
    return Degeneracy(exact=exact, log_value=log_value)


def degeneracy(spec: EnsembleSpec, tj: int) -> Degeneracy:
    """Multiplicity d(N, J) of the spin-J block, J given as tj = 2J."""
    _check_tj(spec, tj)
    return _degeneracy_cached(spec.n_particles, tj)


@lru_cache(maxsize=None)
def _alpha_table(n: int) -> dict[int, Degeneracy]:
    """Cumulative multiplicities for every block, one descending sweep.

    The log route accumulates with log-add-exp, independent of the exact
    integers, so the two representations cross-check each other.
    """
    table: dict[int, Degeneracy] = {}
    exact = 0
    log_value = -math.inf
    for tj in range(n, n % 2 - 1, -2):
        d = _degeneracy_cached(n, tj)
        exact += d.exact
        if log_value == -math.inf:
            log_value = d.log_value
        else:
            hi = max(log_value, d.log_value)
            log_value = hi + math.log(
                math.exp(log_value - hi) + math.exp(d.log_value - hi)
            )
        table[tj] = Degeneracy(exact=exact, log_value=log_value)
    return table


def alpha(spec: EnsembleSpec, tj: int) -> Degeneracy:
    """Cumulative multiplicity alpha(N, J) = sum over J' >= J of d(N, J').

    ``tj = n + 2`` (one block above the top) is legal and yields zero;
    the block-coupling weights rely on that value at J = N/2.
    """
    if tj == spec.n_particles + 2:
        return Degeneracy(exact=0, log_value=-math.inf)
    _check_tj(spec, tj)
    return _alpha_table(spec.n_particles)[tj]


def collective_dim(spec: EnsembleSpec) -> int:
    """Total dimension of the blocked state space, sum of (2J+1).

    Equals (N+2)^2/4 for even N and (N+1)(N+3)/4 for odd N.
    """
    return sum(tj + 1 for tj in j_range(spec))


@lru_cache(maxsize=None)
def alpha_over_d(spec: EnsembleSpec, tj_alpha: int, tj_d: int) -> float:
    """Ratio alpha(N, J_a) / d(N, J_d) rounded once to float.

    Computed from the exact integers through a rational so the result is
    correct to 0.5 ulp even where the raw multiplicities overflow any
    fixed-width type.
    """
    a = alpha(spec, tj_alpha).exact
    if a == 0:
        return 0.0
    d = degeneracy(spec, tj_d).exact
    return float(Fraction(a, d))


# ---------------------------------------------------------------------------
# transition coefficients
#
# For component q in {-,+,z} and a state |J, M>, three real coefficient
# families control where a single-particle operator sends weight:
#
#   A: within the same block       A_+- = +sqrt((J -+ M)(J +- M + 1)),  A_z = M
#   B: down to block J-1           B_+- = +-sqrt((J -+ M)(J -+ M - 1)), B_z = sqrt((J+M)(J-M))
#   D: up to block J+1             D_+- = -+sqrt((J +- M + 1)(J +- M + 2)),
#                                  D_z = sqrt((J+M+1)(J-M+1))
#
# Square roots of non-positive radicands are defined as 0: those entries
# correspond to transitions that land outside the target block and are
# physically absent, so the scatter loops can run uniformly over M.
# ---------------------------------------------------------------------------


def _sqrt0(x: float) -> float:
    return math.sqrt(x) if x > 0.0 else 0.0


def _check_jm(j: float, m: float) -> None:
    if abs(m) > j + 1e-9:
        raise ValueError(f"|M| = {abs(m)} exceeds J = {j}")


def coeff_a(q: str, j: float, m: float) -> float:
    """Same-block coefficient A_q(J, M)."""
    _check_jm(j, m)
    if q == "+":
        return _sqrt0((j - m) * (j + m + 1.0))
    if q == "-":
        return _sqrt0((j + m) * (j - m + 1.0))
    if q == "z":
        return m
    raise ValueError(f"unknown component {q!r}")


def coeff_b(q: str, j: float, m: float) -> float:
    """Down-coupling coefficient B_q(J, M) into block J-1."""
    _check_jm(j, m)
    if q == "+":
        return _sqrt0((j - m) * (j - m - 1.0))
    if q == "-":
        return -_sqrt0((j + m) * (j + m - 1.0))
    if q == "z":
        return _sqrt0((j + m) * (j - m))
    raise ValueError(f"unknown component {q!r}")


def coeff_d(q: str, j: float, m: float) -> float:
    """Up-coupling coefficient D_q(J, M) into block J+1."""
    _check_jm(j, m)
    if q == "+":
        return -_sqrt0((j + m + 1.0) * (j + m + 2.0))
    if q == "-":
        return _sqrt0((j - m + 1.0) * (j - m + 2.0))
    if q == "z":
        return _sqrt0((j + m + 1.0) * (j - m + 1.0))
    raise ValueError(f"unknown component {q!r}")


def _sqrt0_vec(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(x, 0.0))


def coeff_a_vec(q: str, j: float, m: np.ndarray) -> np.ndarray:
    """Vectorized A_q over an array of M values."""
    if q == "+":
        return _sqrt0_vec((j - m) * (j + m + 1.0))
    if q == "-":
        return _sqrt0_vec((j + m) * (j - m + 1.0))
    if q == "z":
        return np.asarray(m, dtype=float)
    raise ValueError(f"unknown component {q!r}")


def coeff_b_vec(q: str, j: float, m: np.ndarray) -> np.ndarray:
    """Vectorized B_q over an array of M values."""
    if q == "+":
        return _sqrt0_vec((j - m) * (j - m - 1.0))
    if q == "-":
        return -_sqrt0_vec((j + m) * (j + m - 1.0))
    if q == "z":
        return _sqrt0_vec((j + m) * (j - m))
    raise ValueError(f"unknown component {q!r}")


def coeff_d_vec(q: str, j: float, m: np.ndarray) -> np.ndarray:
    """Vectorized D_q over an array of M values."""
    if q == "+":
        return -_sqrt0_vec((j + m + 1.0) * (j + m + 2.0))
    if q == "-":
        return _sqrt0_vec((j - m + 1.0) * (j - m + 2.0))
    if q == "z":
        return _sqrt0_vec((j + m + 1.0) * (j - m + 1.0))
    raise ValueError(f"unknown component {q!r}")
