import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinblocks.irreps import (
    Degeneracy,
    EnsembleSpec,
    alpha,
    alpha_over_d,
    coeff_a,
    coeff_a_vec,
    coeff_b,
    coeff_b_vec,
    coeff_d,
    coeff_d_vec,
    collective_dim,
    degeneracy,
    j_range,
    twice,
)


def couple_paths(n):
    """Independent oracle: enumerate spin-coupling paths one particle at a
    time, returning {tj: path count}."""
    counts = {1: 1}
    for _ in range(n - 1):
        new = {}
        for tj, c in counts.items():
            new[tj + 1] = new.get(tj + 1, 0) + c
            if tj >= 1:
                new[tj - 1] = new.get(tj - 1, 0) + c
        counts = new
    return counts


class TestJRange:
    def test_single_spin(self):
        assert j_range(EnsembleSpec(1)) == [1]

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6, 7, 8])
    def test_matches_coupling_enumeration(self, n):
        expected = sorted(couple_paths(n))
        assert j_range(EnsembleSpec(n)) == expected

    def test_even_n_reaches_zero(self):
        # the printed lower bound mod(N/2, 2) would exclude J=0 at N=6
        assert j_range(EnsembleSpec(6))[0] == 0

    def test_endpoints_and_steps(self):
        for n in (1, 2, 9, 10):
            tjs = j_range(EnsembleSpec(n))
            assert tjs[0] == n % 2
            assert tjs[-1] == n
            assert all(b - a == 2 for a, b in zip(tjs, tjs[1:]))

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            EnsembleSpec(0)
        with pytest.raises(ValueError):
            EnsembleSpec(-3)


class TestDegeneracy:
    def test_four_particles(self):
        spec = EnsembleSpec(4)
        assert degeneracy(spec, 4).exact == 1
        assert degeneracy(spec, 2).exact == 3
        assert degeneracy(spec, 0).exact == 2

    @pytest.mark.parametrize("n", range(1, 9))
    def test_matches_coupling_enumeration(self, n):
        spec = EnsembleSpec(n)
        expected = couple_paths(n)
        for tj in j_range(spec):
            assert degeneracy(spec, tj).exact == expected[tj]

    def test_invalid_pairing(self):
        spec = EnsembleSpec(4)
        with pytest.raises(ValueError):
            degeneracy(spec, 1)  # parity mismatch
        with pytest.raises(ValueError):
            degeneracy(spec, 6)  # above N

    def test_checksum_to_30(self):
        for n in range(1, 31):
            spec = EnsembleSpec(n)
            total = sum(degeneracy(spec, tj).exact * (tj + 1) for tj in j_range(spec))
            assert total == 2**n

    def test_top_block_unique(self):
        for n in range(1, 301):
            assert degeneracy(EnsembleSpec(n), n).exact == 1

    def test_log_agrees_with_exact(self):
        for n in range(1, 31):
            spec = EnsembleSpec(n)
            for tj in j_range(spec):
                d = degeneracy(spec, tj)
                assert d.log_value == pytest.approx(math.log(d.exact), rel=1e-12)

    def test_log_route_finite_and_monotone_at_large_n(self):
        # exact values here exceed any fixed-width integer
        spec = EnsembleSpec(300)
        logs = [alpha(spec, tj).log_value for tj in j_range(spec)]
        assert all(math.isfinite(v) for v in logs)
        assert all(a >= b for a, b in zip(logs, logs[1:]))
        assert degeneracy(spec, 150).exact > 2**63


class TestAlpha:
    def test_two_particles(self):
        spec = EnsembleSpec(2)
        assert alpha(spec, 2).exact == 1
        assert alpha(spec, 4).exact == 0  # one block above the top

    def test_four_particles(self):
        assert alpha(EnsembleSpec(4), 2).exact == 4  # 1 + 3

    def test_non_increasing_and_dominates(self):
        for n in (5, 12, 25):
            spec = EnsembleSpec(n)
            tjs = j_range(spec)
            vals = [alpha(spec, tj).exact for tj in tjs]
            assert all(a >= b for a, b in zip(vals, vals[1:]))
            lowest = alpha(spec, tjs[0]).exact
            assert all(lowest >= degeneracy(spec, tj).exact for tj in tjs)

    def test_log_agrees_with_exact(self):
        spec = EnsembleSpec(30)
        for tj in j_range(spec):
            a = alpha(spec, tj)
            assert a.log_value == pytest.approx(math.log(a.exact), rel=1e-12)

    def test_ratio_accuracy(self):
        # ratios stay well-conditioned where raw counts overflow doubles
        spec = EnsembleSpec(300)
        for tj in (0, 10, 100, 298):
            r = alpha_over_d(spec, tj + 2, tj)
            from fractions import Fraction

            expected = Fraction(alpha(spec, tj + 2).exact, degeneracy(spec, tj).exact)
            assert r == pytest.approx(float(expected), rel=1e-12)

    @given(st.integers(min_value=1, max_value=60))
    @settings(max_examples=25, deadline=None)
    def test_alpha_telescopes(self, n):
        spec = EnsembleSpec(n)
        for tj in j_range(spec):
            lhs = alpha(spec, tj).exact - alpha(spec, tj + 2).exact
            assert lhs == degeneracy(spec, tj).exact


class TestCollectiveDim:
    def test_paper_values(self):
        assert collective_dim(EnsembleSpec(4)) == 9
        assert collective_dim(EnsembleSpec(2)) == 4
        assert collective_dim(EnsembleSpec(5)) == 12

    def test_closed_forms(self):
        for n in range(1, 200):
            dim = collective_dim(EnsembleSpec(n))
            if n % 2 == 0:
                assert dim == (n + 2) ** 2 // 4
            else:
                assert dim == (n + 1) * (n + 3) // 4


class TestCoefficients:
    def test_point_values(self):
        assert coeff_a("+", 1, 0) == pytest.approx(math.sqrt(2))
        assert coeff_b("-", 1, 1) == pytest.approx(-math.sqrt(2))
        assert coeff_d("z", 1, 1) == pytest.approx(math.sqrt(3))
        assert coeff_a("-", 1, -1) == 0.0

    def test_zero_at_boundaries(self):
        # shifted targets outside the block come out as exact zeros
        assert coeff_a("+", 2, 2) == 0.0
        assert coeff_b("+", 1.5, 0.5) == 0.0
        assert coeff_b("z", 3, 3) == 0.0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            coeff_a("z", 1, 2)
        with pytest.raises(ValueError):
            coeff_a("x", 1, 0)

    def test_ladder_elements_match_oracle_matrices(self):
        # cross-check against full-space total-spin matrices sandwiched in
        # the coupled basis, for every copy, up to J = 4
        from spinblocks.oracle import cg_irrep_basis, collective_op_full

        for n in (2, 3, 4, 6, 8):
            basis = cg_irrep_basis(n)
            jp = collective_op_full(n, "jplus").toarray()
            for tj, copies in basis.copies.items():
                j = tj / 2.0
                for v in copies:
                    block = v.conj().T @ jp @ v
                    for a in range(1, tj + 1):
                        m = (tj - 2 * a) / 2.0
                        assert block[a - 1, a] == pytest.approx(
                            coeff_a("+", j, m), abs=1e-12
                        )

    @given(
        st.integers(min_value=0, max_value=40),
        st.integers(min_value=0, max_value=80),
    )
    @settings(max_examples=60, deadline=None)
    def test_vectorized_matches_scalar(self, tj, a):
        if a > tj:
            a = a % (tj + 1)
        j = tj / 2.0
        m = j - a
        for q in "-+z":
            assert coeff_a_vec(q, j, np.array([m]))[0] == pytest.approx(
                coeff_a(q, j, m), abs=1e-14
            )
            assert coeff_b_vec(q, j, np.array([m]))[0] == pytest.approx(
                coeff_b(q, j, m), abs=1e-14
            )
            assert coeff_d_vec(q, j, np.array([m]))[0] == pytest.approx(
                coeff_d(q, j, m), abs=1e-14
            )


def test_twice_parses_half_integers():
    assert twice(0.5) == 1
    assert twice(3) == 6
    with pytest.raises(ValueError):
        twice(0.3)


def test_degeneracy_type_is_frozen():
    d = Degeneracy(exact=3, log_value=math.log(3))
    with pytest.raises(Exception):
        d.exact = 4
