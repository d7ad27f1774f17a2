import math

import numpy as np
import pytest
import scipy.linalg

from spinblocks.integrator import (
    PhysicalityError,
    TimeGrid,
    convergence_check,
    default_dt,
    evolve,
    rk4_step,
)
from spinblocks.irreps import EnsembleSpec
from spinblocks.liouvillian import (
    CompiledLiouvillian,
    collective_channel,
    liouvillian_apply,
    local_channel,
)
from spinblocks.operators import (
    LocalOperatorCoeffs,
    collective_op,
    counter_twisting_hamiltonian,
)
from spinblocks.states import (
    BlockedDensity,
    BlockedKet,
    cat_state,
    coherent_pole_state,
    dicke_state,
    ket_to_density,
)


class TestTimeGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(t_max=1.0, dt=0.0)
        with pytest.raises(ValueError):
            TimeGrid(t_max=0.0, dt=0.1)
        with pytest.raises(ValueError):
            TimeGrid(t_max=0.1, dt=0.5)
        with pytest.raises(ValueError):
            TimeGrid(t_max=1.0, dt=0.1, record_stride=0)

    def test_step_count(self):
        assert TimeGrid(t_max=1.0, dt=1e-3).n_steps == 1000


class TestRk4Step:
    def test_zero_rhs(self):
        spec = EnsembleSpec(4)
        rho = ket_to_density(cat_state(spec))

        def rhs(r):
            return {tj: np.zeros_like(b) for tj, b in r.blocks.items()}

        out = rk4_step(rho, rhs, 0.1)
        for tj, b in rho.blocks.items():
            assert np.abs(out.blocks[tj] - b).max() < 1e-15

    def test_jz_phase_rotation(self):
        spec = EnsembleSpec(2)
        v = np.zeros(3, complex)
        v[0] = v[1] = 1 / math.sqrt(2)  # (|1,1> + |1,0>)/sqrt(2)
        rho = ket_to_density(BlockedKet(spec, {2: v}))
        h = collective_op(spec, "jz")

        def rhs(r):
            return liouvillian_apply(r, h, ())

        dt = 1e-3
        out = rk4_step(rho, rhs, dt)
        # coherence <M=1|rho|M=0> rotates by exp(-i dt)
        expected = 0.5 * np.exp(-1j * dt)
        assert abs(out.blocks[2][0, 1] - expected) < 1e-10

    def test_fourth_order_accuracy(self):
        spec = EnsembleSpec(3)
        ch = local_channel(LocalOperatorCoeffs(cm=0.6, cz=0.8), 1.0)
        compiled = CompiledLiouvillian(spec, None, (ch,))
        layout = compiled.layout
        rho = ket_to_density(cat_state(spec))
        y0 = layout.pack(rho)
        t_final = 0.4
        exact = scipy.linalg.expm(compiled.matrix.toarray() * t_final) @ y0

        def run(dt):
            state = rho
            for _ in range(round(t_final / dt)):
                state = rk4_step(state, compiled.apply, dt)
            return layout.pack(state)

        err = {dt: np.abs(run(dt) - exact).max() for dt in (0.05, 0.025)}
        ratio = err[0.05] / err[0.025]
        assert 8.0 < ratio < 32.0

    def test_agrees_with_evolve_loop(self):
        spec = EnsembleSpec(4)
        ch = local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0)
        compiled = CompiledLiouvillian(spec, None, (ch,))
        rho = ket_to_density(cat_state(spec))
        grid = TimeGrid(t_max=3e-3, dt=1e-3)
        rec = evolve(rho, None, (ch,), grid, observables=("trace",),
                     fidelity_ref=None, compiled=compiled)
        stepped = rho
        for _ in range(3):
            stepped = rk4_step(stepped, compiled.apply, 1e-3)
        for tj, b in rec.final_state.blocks.items():
            assert np.abs(b - stepped.blocks[tj]).max() < 1e-14


class TestEvolve:
    def test_collective_dephasing_closed_form(self):
        n = 10
        spec = EnsembleSpec(n)
        ket = cat_state(spec)
        grid = TimeGrid(t_max=0.08, dt=5e-4, record_stride=10)
        rec = evolve(
            ket,
            None,
            (collective_channel(LocalOperatorCoeffs(cz=1.0), 1.0),),
            grid,
            observables=("fidelity",),
        )
        expected = 0.5 + 0.5 * np.exp(-(n**2) * rec.times / 2)
        assert np.abs(rec.columns["fidelity"] - expected).max() < 1e-6

    def test_local_dephasing_closed_form(self):
        n = 10
        spec = EnsembleSpec(n)
        ket = cat_state(spec)
        grid = TimeGrid(t_max=0.4, dt=5e-4, record_stride=20)
        rec = evolve(
            ket,
            None,
            (local_channel(LocalOperatorCoeffs(cz=1.0), 1.0),),
            grid,
            observables=("fidelity",),
        )
        expected = 0.5 + 0.5 * np.exp(-n * rec.times / 2)
        assert np.abs(rec.columns["fidelity"] - expected).max() < 1e-6

    def test_unitary_conserves_trace_and_top_population(self):
        spec = EnsembleSpec(10)
        ket = coherent_pole_state(spec)
        h = counter_twisting_hamiltonian(spec, 1.0)
        compiled = CompiledLiouvillian(spec, h, ())
        dt = default_dt(1.0, compiled)
        grid = TimeGrid(t_max=0.5, dt=dt, record_stride=max(1, round(0.05 / dt)))
        rec = evolve(ket, h, (), grid, observables=("trace", "populations"))
        assert np.abs(rec.columns["trace"] - 1.0).max() < 1e-9
        assert np.abs(rec.columns["N_5"] - 1.0).max() < 1e-9
        assert rec.max_trace_deviation < 1e-9

    def test_deterministic(self):
        spec = EnsembleSpec(6)
        ket = cat_state(spec)
        ch = (local_channel(LocalOperatorCoeffs(cm=0.5, cz=0.5), 1.0),)
        grid = TimeGrid(t_max=0.1, dt=1e-3, record_stride=10)
        a = evolve(ket, None, ch, grid, observables=("fidelity", "jz"))
        b = evolve(ket, None, ch, grid, observables=("fidelity", "jz"))
        assert np.array_equal(a.times, b.times)
        for name in a.columns:
            assert np.array_equal(a.columns[name], b.columns[name])

    def test_negativity_abort(self):
        spec = EnsembleSpec(10)
        ket = cat_state(spec)
        ch = (collective_channel(LocalOperatorCoeffs(cz=1.0), 1.0),)
        grid = TimeGrid(t_max=1.0, dt=0.08, record_stride=2)
        with pytest.warns(UserWarning):
            with pytest.raises(PhysicalityError):
                evolve(ket, None, ch, grid, observables=("fidelity",))

    def test_trace_abort(self):
        spec = EnsembleSpec(6)
        ket = cat_state(spec)
        ch = (local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0),)
        grid = TimeGrid(t_max=5.0, dt=1.0, record_stride=1)
        with pytest.warns(UserWarning):
            with pytest.raises(PhysicalityError):
                evolve(ket, None, ch, grid, observables=("fidelity",))

    def test_step_warning(self):
        spec = EnsembleSpec(10)
        ket = cat_state(spec)
        ch = (collective_channel(LocalOperatorCoeffs(cz=1.0), 1.0),)
        grid = TimeGrid(t_max=0.02, dt=1e-2, record_stride=1)
        with pytest.warns(UserWarning, match="dt\\*rate"):
            evolve(ket, None, ch, grid, observables=("trace",))

    def test_physical_run_diagnostics(self):
        spec = EnsembleSpec(8)
        ket = cat_state(spec)
        ch = (local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0),)
        grid = TimeGrid(t_max=0.5, dt=1e-3, record_stride=50)
        rec = evolve(ket, None, ch, grid, observables=("trace", "min_eig"))
        assert rec.max_trace_deviation < 1e-9
        assert rec.min_eigenvalue > -1e-9
        assert np.all(np.diff(rec.times) > 0)

    def test_fidelity_requires_reference(self):
        spec = EnsembleSpec(4)
        rho = ket_to_density(cat_state(spec))
        grid = TimeGrid(t_max=0.01, dt=1e-3)
        with pytest.raises(ValueError):
            evolve(rho, None, (), grid, observables=("fidelity",))

    def test_xi2_column(self):
        spec = EnsembleSpec(10)
        grid = TimeGrid(t_max=0.01, dt=1e-3, record_stride=5)
        rec = evolve(coherent_pole_state(spec), None, (), grid, observables=("xi2",))
        assert rec.columns["xi2"][0] == pytest.approx(1.0, abs=1e-9)
        rec = evolve(dicke_state(spec, 5, 0), None, (), grid, observables=("xi2",))
        assert np.all(np.isnan(rec.columns["xi2"]))

    def test_unknown_observable(self):
        spec = EnsembleSpec(4)
        grid = TimeGrid(t_max=0.01, dt=1e-3)
        with pytest.raises(ValueError):
            evolve(cat_state(spec), None, (), grid, observables=("purity",))


class TestTruncation:
    def test_matches_exact_run(self):
        spec = EnsembleSpec(10)
        ket = cat_state(spec)
        ch = (local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0),)
        grid = TimeGrid(t_max=0.3, dt=1e-3, record_stride=30)
        exact = evolve(ket, None, ch, grid, observables=("fidelity", "jz"))
        trunc = evolve(
            ket, None, ch, grid, observables=("fidelity", "jz", "dropped_weight"),
            truncation=1e-12,
        )
        for name in ("fidelity", "jz"):
            assert np.abs(exact.columns[name] - trunc.columns[name]).max() < 1e-8
        assert trunc.dropped_weight >= 0.0
        assert np.all(np.diff(trunc.columns["dropped_weight"]) >= 0.0)

    def test_dropped_weight_accounting(self):
        from spinblocks.states import trace

        spec = EnsembleSpec(8)
        ket = cat_state(spec)
        ch = (local_channel(LocalOperatorCoeffs.sigma_minus(), 1.0),)
        grid = TimeGrid(t_max=0.5, dt=1e-3, record_stride=100)
        rec = evolve(ket, None, ch, grid, observables=("trace",), truncation=1e-6)
        assert rec.dropped_weight > 0.0
        assert trace(rec.final_state) + rec.dropped_weight == pytest.approx(
            1.0, abs=1e-9
        )


class TestConvergence:
    def test_deviation_small_at_working_step(self):
        spec = EnsembleSpec(4)
        ket = cat_state(spec)
        ch = (collective_channel(LocalOperatorCoeffs(cz=1.0), 1.0),)
        grid = TimeGrid(t_max=0.5, dt=5e-4, record_stride=100)
        dev = convergence_check(ket, None, ch, grid, observables=("fidelity",))
        assert dev["fidelity"] < 1e-9

    def test_default_dt_respects_stability(self):
        spec = EnsembleSpec(100)
        compiled = CompiledLiouvillian(
            spec, None, (collective_channel(LocalOperatorCoeffs(cz=1.0), 1.0),)
        )
        dt = default_dt(1.0, compiled)
        assert compiled.rate_bound * dt <= 0.1 + 1e-12
