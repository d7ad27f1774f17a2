import numpy as np
import pytest

from spinblocks.irreps import EnsembleSpec, j_range
from spinblocks.liouvillian import (
    ChannelSpec,
    CompiledLiouvillian,
    apply_local_jump,
    collective_channel,
    collective_dissipator,
    g_scatter,
    liouvillian_apply,
    local_channel,
    symmetric_local_dissipator,
)
from spinblocks.operators import (
    LocalOperatorCoeffs,
    collective_op,
    counter_twisting_hamiltonian,
    symmetric_sum_collective,
)
from spinblocks.states import (
    BlockedDensity,
    cat_state,
    dicke_state,
    expectation,
    ket_to_density,
)

COMPONENTS = ("-", "+", "z")


def random_density(spec, seed=0):
    rng = np.random.default_rng(seed)
    blocks = {}
    for tj in j_range(spec):
        n = tj + 1
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        b = a @ a.conj().T
        blocks[tj] = b
    w = sum(np.trace(b).real for b in blocks.values())
    return BlockedDensity(spec, {tj: b / w for tj, b in blocks.items()})


def jump_by_entries(rho, coeffs):
    """Independent slow route: accumulate g_scatter entries one by one."""
    spec = rho.spec
    comps = coeffs.components()
    out = {tj: np.zeros((tj + 1, tj + 1), dtype=complex) for tj in j_range(spec)}
    for tj, block in rho.blocks.items():
        n = tj + 1
        for a in range(n):
            for b in range(n):
                val = block[a, b]
                if val == 0:
                    continue
                m = (tj - 2 * a) / 2.0
                mp = (tj - 2 * b) / 2.0
                for q in COMPONENTS:
                    for r in COMPONENTS:
                        w_qr = comps[q] * np.conj(comps[r])
                        if w_qr == 0:
                            continue
                        for entry in g_scatter(spec, tj / 2, m, mp, q, r):
                            ttj, ttm, ttmp = entry.target
                            ra = (ttj - ttm) // 2
                            rb = (ttj - ttmp) // 2
                            out[ttj][ra, rb] += entry.weight * w_qr * val
    return out


class TestGScatter:
    def test_calibration_lowering(self):
        spec = EnsembleSpec(2)
        entries = {e.target: e.weight for e in g_scatter(spec, 1, 1, 1, "-", "-")}
        assert entries[(2, 0, 0)] == pytest.approx(1.0, abs=1e-12)
        assert entries[(0, 0, 0)] == pytest.approx(1.0, abs=1e-12)
        assert len(entries) == 2

    def test_calibration_z(self):
        spec = EnsembleSpec(2)
        entries = {e.target: e.weight for e in g_scatter(spec, 1, 1, 1, "z", "z")}
        assert entries == {(2, 2, 2): pytest.approx(0.5, abs=1e-12)}

    def test_lowest_weight_annihilated(self):
        spec = EnsembleSpec(2)
        assert g_scatter(spec, 1, -1, -1, "-", "-") == []

    def test_no_upward_entry_from_top_block(self):
        for n in (2, 5, 8):
            spec = EnsembleSpec(n)
            j = n / 2
            for q in COMPONENTS:
                for r in COMPONENTS:
                    for e in g_scatter(spec, j, j - 1, j - 1, q, r):
                        assert e.target[0] <= n

    def test_no_downward_entry_from_bottom_block(self):
        spec = EnsembleSpec(3)
        for e in g_scatter(spec, 0.5, 0.5, -0.5, "-", "z"):
            assert e.target[0] in (1, 3)

    def test_sources_recorded(self):
        spec = EnsembleSpec(4)
        for e in g_scatter(spec, 1, 0, 1, "+", "z"):
            assert e.source == (2, 0, 2)

    def test_preconditions(self):
        spec = EnsembleSpec(4)
        with pytest.raises(ValueError):
            g_scatter(spec, 1.5, 0.5, 0.5, "-", "-")
        with pytest.raises(ValueError):
            g_scatter(spec, 1, 2, 0, "-", "-")
        with pytest.raises(ValueError):
            g_scatter(spec, 1, 0, 0, "a", "-")


class TestApplyLocalJump:
    def test_lowering_on_top_state(self):
        spec = EnsembleSpec(2)
        rho = ket_to_density(dicke_state(spec, 1, 1))
        out = apply_local_jump(rho, LocalOperatorCoeffs.sigma_minus())
        assert out[2][1, 1] == pytest.approx(1.0, abs=1e-12)
        assert out[0][0, 0] == pytest.approx(1.0, abs=1e-12)
        assert abs(out[2][0, 0]) < 1e-14

    def test_lowering_on_bottom_state(self):
        spec = EnsembleSpec(2)
        rho = ket_to_density(dicke_state(spec, 1, -1))
        out = apply_local_jump(rho, LocalOperatorCoeffs.sigma_minus())
        assert all(np.abs(b).max() < 1e-14 for b in out.values())

    def test_single_qubit(self):
        spec = EnsembleSpec(1)
        rho = ket_to_density(dicke_state(spec, 0.5, 0.5))
        out = apply_local_jump(rho, LocalOperatorCoeffs.sigma_minus())
        assert out[1][1, 1] == pytest.approx(1.0, abs=1e-12)

    def test_requires_traceless(self):
        spec = EnsembleSpec(2)
        rho = ket_to_density(cat_state(spec))
        with pytest.raises(ValueError):
            apply_local_jump(rho, LocalOperatorCoeffs(c0=1.0, cm=1.0))

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize(
        "coeffs",
        [
            LocalOperatorCoeffs.sigma_minus(),
            LocalOperatorCoeffs.sigma_plus(),
            LocalOperatorCoeffs(cz=1.0),
            LocalOperatorCoeffs(cm=0.3 + 0.4j, cp=0.1, cz=0.8 - 0.2j),
        ],
    )
    def test_matches_entrywise_reference(self, n, coeffs):
        spec = EnsembleSpec(n)
        rho = random_density(spec, seed=n)
        fast = apply_local_jump(rho, coeffs)
        slow = jump_by_entries(rho, coeffs)
        for tj in j_range(spec):
            assert np.abs(fast[tj] - slow[tj]).max() < 1e-12

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_trace_identity(self, n):
        # trace of the jump table equals <K> with K the summed s^dag s
        spec = EnsembleSpec(n)
        rho = random_density(spec, seed=2 * n)
        coeffs = LocalOperatorCoeffs(cm=0.7, cp=0.2j, cz=0.5)
        out = apply_local_jump(rho, coeffs)
        got = sum(np.trace(b).real for b in out.values())
        k = symmetric_sum_collective(spec, coeffs.adjoint().product(coeffs))
        assert got == pytest.approx(expectation(rho, k).real, abs=1e-11)


class TestDissipators:
    def test_local_dephasing_rates_on_cat(self):
        spec = EnsembleSpec(2)
        rho = ket_to_density(cat_state(spec))
        out = symmetric_local_dissipator(rho, local_channel(LocalOperatorCoeffs(cz=1.0), 1.0))
        # coherence decays at rate N/2 = 1; populations frozen
        assert out[2][0, 2] == pytest.approx(-1.0 * rho.blocks[2][0, 2], abs=1e-12)
        assert abs(out[2][0, 0]) < 1e-13
        assert abs(out[2][2, 2]) < 1e-13

    def test_trace_free(self):
        spec = EnsembleSpec(5)
        rho = random_density(spec, seed=1)
        for ch in (
            local_channel(LocalOperatorCoeffs.sigma_minus(), 1.3),
            local_channel(LocalOperatorCoeffs(cm=0.5, cz=0.5), 0.7),
        ):
            out = symmetric_local_dissipator(rho, ch)
            assert abs(sum(np.trace(b) for b in out.values())) < 1e-12

    def test_kind_checked(self):
        spec = EnsembleSpec(2)
        rho = ket_to_density(cat_state(spec))
        with pytest.raises(ValueError):
            symmetric_local_dissipator(
                rho, collective_channel(LocalOperatorCoeffs.sigma_minus(), 1.0)
            )
        with pytest.raises(ValueError):
            collective_dissipator(
                rho, local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0)
            )

    def test_collective_dephasing_rule(self):
        n = 6
        spec = EnsembleSpec(n)
        rho = ket_to_density(cat_state(spec))
        out = collective_dissipator(rho, collective_channel(LocalOperatorCoeffs(cz=1.0), 1.0))
        tj = n
        for a in (0, n):
            for b in (0, n):
                ma = (tj - 2 * a) / 2.0
                mb = (tj - 2 * b) / 2.0
                expected = -0.5 * (ma - mb) ** 2 * rho.blocks[tj][a, b]
                assert out[tj][a, b] == pytest.approx(expected, abs=1e-12)

    def test_collective_preserves_block_traces(self):
        spec = EnsembleSpec(5)
        rho = random_density(spec, seed=9)
        for coeffs in (LocalOperatorCoeffs.sigma_minus(), LocalOperatorCoeffs(cz=1.0)):
            out = collective_dissipator(rho, collective_channel(coeffs, 2.0))
            for tj in j_range(spec):
                assert abs(np.trace(out[tj])) < 1e-12

    def test_collective_lowering_annihilates_bottom(self):
        spec = EnsembleSpec(2)
        rho = ket_to_density(dicke_state(spec, 1, -1))
        out = collective_dissipator(
            rho, collective_channel(LocalOperatorCoeffs.sigma_minus(), 1.0)
        )
        assert all(np.abs(b).max() < 1e-13 for b in out.values())


class TestLiouvillianApply:
    def test_empty_generator(self):
        spec = EnsembleSpec(4)
        rho = ket_to_density(cat_state(spec))
        out = liouvillian_apply(rho)
        assert all(np.abs(b).max() == 0.0 for b in out.values())

    def test_trace_free_and_hermitian(self):
        spec = EnsembleSpec(6)
        rho = random_density(spec, seed=4)
        h = counter_twisting_hamiltonian(spec, 0.8)
        channels = (
            local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0),
            collective_channel(LocalOperatorCoeffs(cz=1.0), 0.5),
        )
        out = liouvillian_apply(rho, h, channels)
        assert abs(sum(np.trace(b) for b in out.values())) < 1e-11
        for b in out.values():
            assert np.abs(b - b.conj().T).max() < 1e-11

    def test_spec_mismatch(self):
        rho = ket_to_density(cat_state(EnsembleSpec(4)))
        h = counter_twisting_hamiltonian(EnsembleSpec(6), 1.0)
        with pytest.raises(ValueError):
            liouvillian_apply(rho, h, ())

    def test_local_channels_conserve_total_population(self):
        spec = EnsembleSpec(4)
        rho = random_density(spec, seed=5)
        out = symmetric_local_dissipator(
            rho, local_channel(LocalOperatorCoeffs(cm=0.6, cp=0.1, cz=0.4), 1.0)
        )
        assert abs(sum(np.trace(b).real for b in out.values())) < 1e-12

    def test_hamiltonian_rate_matches_finite_difference(self):
        # d<Jz>/dt from the generator table vs a one-step difference
        from spinblocks.integrator import TimeGrid, evolve
        from spinblocks.states import coherent_pole_state

        spec = EnsembleSpec(6)
        ket = coherent_pole_state(spec)
        rho = ket_to_density(ket)
        h = counter_twisting_hamiltonian(spec, 1.0)
        jz = collective_op(spec, "jz")
        table = liouvillian_apply(rho, h, ())
        rate = sum(
            np.einsum("ij,ji->", table[tj], jz.blocks[tj]).real
            for tj in j_range(spec)
        )
        def fd(dt):
            rec = evolve(ket, h, (), TimeGrid(t_max=dt, dt=dt), observables=("jz",))
            return (rec.columns["jz"][1] - rec.columns["jz"][0]) / dt

        dt = 1e-5
        err, err_half = abs(fd(dt) - rate), abs(fd(dt / 2) - rate)
        assert err < 1e3 * dt  # first-order consistency
        assert err_half == pytest.approx(err / 2, rel=0.05)  # O(dt) scaling


class TestChannelSpec:
    def test_rejects_identity_component(self):
        with pytest.raises(ValueError):
            ChannelSpec(LocalOperatorCoeffs(c0=0.1, cm=1.0), "local", 1.0)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "local", -1.0)

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "both", 1.0)


class TestCompiled:
    def test_matches_convenience_path(self):
        spec = EnsembleSpec(5)
        rho = random_density(spec, seed=8)
        h = counter_twisting_hamiltonian(spec, 0.3)
        chans = (local_channel(LocalOperatorCoeffs.sigma_minus(), 0.9),)
        compiled = CompiledLiouvillian(spec, h, chans)
        a = compiled.apply(rho)
        b = liouvillian_apply(rho, h, chans)
        for tj in j_range(spec):
            assert np.abs(a[tj] - b[tj]).max() < 1e-14

    def test_rate_bound_positive(self):
        spec = EnsembleSpec(10)
        compiled = CompiledLiouvillian(
            spec, None, (local_channel(LocalOperatorCoeffs.sigma_minus(), 2.0),)
        )
        assert compiled.rate_bound > 0

    def test_scatter_weight_mutation_breaks_equivalence(self, monkeypatch):
        # sensitivity guard: a 1e-3 error in one branch weight must be
        # caught by the oracle comparison
        import spinblocks.liouvillian as lv
        from spinblocks.integrator import TimeGrid
        from spinblocks.verify import compare_representations, standard_channels

        original = lv._branch_weights

        def perturbed(spec, tj):
            w_same, w_down, w_up = original(spec, tj)
            return w_same, w_down * (1.0 + 1e-3), w_up

        monkeypatch.setattr(lv, "_branch_weights", perturbed)
        lv._channel_matrix.cache_clear()
        try:
            grid = TimeGrid(t_max=0.2, dt=1e-3, record_stride=20)
            dev = compare_representations(3, standard_channels()[0], grid)
        finally:
            lv._channel_matrix.cache_clear()
        assert dev > 1e-6
