"""Command-line front end: experiments, figure presets, verification, tables.

Exit codes: 0 success, 1 usage or configuration error, 2 physicality
abort during integration, 3 verification failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, parse_config
from .integrator import PhysicalityError, TimeGrid, default_dt, evolve
from .irreps import EnsembleSpec, alpha, collective_dim, degeneracy, j_range
from .liouvillian import ChannelSpec, CompiledLiouvillian
from .operators import LocalOperatorCoeffs, counter_twisting_hamiltonian
from .states import cat_state, coherent_pole_state, dicke_state

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(path, times, columns: dict[str, np.ndarray]) -> None:
    """17-significant-digit CSV; byte-stable across reruns."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("t," + ",".join(columns) + "\n")
        cols = list(columns.values())
        for i, t in enumerate(times):
            fh.write(",".join([_fmt(t)] + [_fmt(c[i]) for c in cols]) + "\n")


def _initial_ket(cfg: ExperimentConfig):
    spec = EnsembleSpec(cfg.n_particles)
    kind, args = cfg.initial_state_args()
    if kind == "cat":
        return cat_state(spec)
    if kind == "coherent_pole":
        return coherent_pole_state(spec)
    return dicke_state(spec, *args)


def _channels(cfg: ExperimentConfig) -> tuple[ChannelSpec, ...]:
    return tuple(
        ChannelSpec(coeffs=ch.coeffs(), kind=ch.kind, rate=ch.gamma)
        for ch in cfg.channels
    )


def run_experiment(cfg: ExperimentConfig):
    """Evolve one configured experiment; returns the trajectory record."""
    spec = EnsembleSpec(cfg.n_particles)
    ket = _initial_ket(cfg)
    lam = cfg.hamiltonian_lambda()
    h = counter_twisting_hamiltonian(spec, lam) if lam is not None else None
    channels = _channels(cfg)
    compiled = CompiledLiouvillian(spec, h, channels)
    dt = cfg.dt if cfg.dt is not None else default_dt(1.0, compiled)
    outputs = cfg.outputs
    if cfg.truncation is not None and "dropped_weight" not in outputs:
        outputs = tuple(outputs) + ("dropped_weight",)
    grid = TimeGrid(t_max=cfg.t_max, dt=dt, record_stride=cfg.record_stride)
    return evolve(
        ket,
        h,
        channels,
        grid,
        observables=outputs,
        truncation=cfg.truncation,
        compiled=compiled,
    )


def _cmd_run(args) -> int:
    try:
        cfg = parse_config(args.config)
    except FileNotFoundError:
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.echo_config:
        sys.stdout.write(cfg.to_text())
        return 0
    try:
        rec = run_experiment(cfg)
    except PhysicalityError as exc:
        print(f"physicality abort: {exc}", file=sys.stderr)
        return 2
    write_csv(args.out, rec.times, rec.columns)
    print(
        f"wrote {args.out}: {len(rec.times)} rows, "
        f"max |trace-1| = {rec.max_trace_deviation:.2e}, "
        f"min eigenvalue = {rec.min_eigenvalue:.2e}"
    )
    if args.plot:
        from .plotting import render_csv

        png = str(Path(args.out).with_suffix(".png"))
        render_csv(args.out, png)
        print(f"wrote {png}")
    return 0


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def _curves_csv(out_path, spec, ket, h, labelled_channels, grid, observable):
    """One evolution per channel set, merged on a shared grid."""
    columns: dict[str, np.ndarray] = {}
    times = None
    for label, channels in labelled_channels:
        rec = evolve(ket, h, channels, grid, observables=(observable,))
        if rec.max_trace_deviation > 1e-9:
            raise PhysicalityError(
                f"{label}: trace deviated by {rec.max_trace_deviation:.2e}"
            )
        columns[label] = rec.columns[observable]
        times = rec.times
    write_csv(out_path, times, columns)
    return out_path


def _grid_for(spec, h, channel_lists, t_max, dt, record_target=400):
    if dt is None:
        dt = min(
            default_dt(1.0, CompiledLiouvillian(spec, h, chs)) for chs in channel_lists
        )
    stride = max(1, round(t_max / dt / record_target))
    return TimeGrid(t_max=t_max, dt=dt, record_stride=stride)


def _preset_cat_fidelity(args, outdir: Path) -> list[Path]:
    gamma = args.gamma if args.gamma is not None else 1.0
    written = []
    for n in [args.n] if args.n else [10, 100]:
        spec = EnsembleSpec(n)
        ket = cat_state(spec)
        cases = [
            ("fidelity_local_minus", (ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "local", gamma),)),
            ("fidelity_collective_minus", (ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "collective", gamma),)),
            ("fidelity_local_z", (ChannelSpec(LocalOperatorCoeffs.pauli_z(), "local", gamma),)),
            ("fidelity_collective_z", (ChannelSpec(LocalOperatorCoeffs(cz=1.0), "collective", gamma),)),
        ]
        t_max = args.tmax if args.tmax is not None else 8.0 / (n * gamma)
        grid = _grid_for(spec, None, [c for _, c in cases], t_max, args.dt)
        out = outdir / f"cat_fidelity_n{n}.csv"
        _curves_csv(out, spec, ket, None, cases, grid, "fidelity")
        written.append(out)
    return written


def _preset_cat_leakage(args, outdir: Path) -> list[Path]:
    gamma = args.gamma if args.gamma is not None else 1.0
    written = []
    for n in [args.n] if args.n else [10]:
        spec = EnsembleSpec(n)
        ket = cat_state(spec)
        channels = (ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "local", gamma),)
        t_max = args.tmax if args.tmax is not None else 1.0 / gamma
        grid = _grid_for(spec, None, [channels], t_max, args.dt)
        rec = evolve(ket, None, channels, grid, observables=("populations",))
        if rec.max_trace_deviation > 1e-9:
            raise PhysicalityError(
                f"leakage run: trace deviated by {rec.max_trace_deviation:.2e}"
            )
        out = outdir / f"cat_leakage_n{n}.csv"
        write_csv(out, rec.times, rec.columns)
        written.append(out)
    return written


def _preset_squeeze(args, outdir: Path) -> list[Path]:
    n = args.n if args.n else 100
    lam = 1.0
    gammas = [args.gamma] if args.gamma is not None else [0.2 * lam, lam, 5.0 * lam]
    spec = EnsembleSpec(n)
    ket = coherent_pole_state(spec)
    h = counter_twisting_hamiltonian(spec, lam)
    t_max = args.tmax if args.tmax is not None else 0.03 / lam
    dt = args.dt if args.dt is not None else 1e-4 / lam
    grid = _grid_for(spec, h, [()], t_max, dt, record_target=200)
    cases = [("xi2_free", ())]
    for g in gammas:
        cases.append(
            (f"xi2_local_g{g:g}", (ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "local", g),))
        )
    for g in gammas:
        cases.append(
            (f"xi2_collective_g{g:g}", (ChannelSpec(LocalOperatorCoeffs.sigma_minus(), "collective", g),))
        )
    out = outdir / f"squeeze_n{n}.csv"
    _curves_csv(out, spec, ket, h, cases, grid, "xi2")
    return [out]


_PRESETS = {
    "cat-fidelity": _preset_cat_fidelity,
    "cat-leakage": _preset_cat_leakage,
    "squeeze": _preset_squeeze,
}


def _cmd_preset(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    import warnings

    try:
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="dt\\*rate")
            written = _PRESETS[args.name](args, outdir)
    except PhysicalityError as exc:
        print(f"physicality abort: {exc}", file=sys.stderr)
        return 2
    for path in written:
        print(f"wrote {path}")
    if not args.no_plot:
        from .plotting import render_csv, render_squeezing_csv

        for path in written:
            png = path.with_suffix(".png")
            if args.name == "squeeze":
                render_squeezing_csv(path, png, title=path.stem)
            else:
                render_csv(path, png, title=path.stem)
            print(f"wrote {png}")
    return 0


# ---------------------------------------------------------------------------
# dims and verify
# ---------------------------------------------------------------------------


def _fmt_count(d) -> str:
    if d.exact < 2**63:
        return str(d.exact)
    e = d.log_value / math.log(10.0)
    frac, whole = math.modf(e)
    return f"{10.0**frac:.6f}e+{int(whole)}"


def _cmd_dims(args) -> int:
    n = args.n
    if n < 1 or n > 10**4:
        print("dims supports 1 <= N <= 10000", file=sys.stderr)
        return 1
    spec = EnsembleSpec(n)
    print(f"N = {n} spin-1/2 particles")
    print(f"{'J':>8} {'2J+1':>8} {'multiplicity':>24} {'cumulative':>24}")
    checksum = 0
    for tj in reversed(j_range(spec)):
        d = degeneracy(spec, tj)
        a = alpha(spec, tj)
        checksum += d.exact * (tj + 1)
        jlabel = str(tj // 2) if tj % 2 == 0 else f"{tj}/2"
        print(f"{jlabel:>8} {tj + 1:>8} {_fmt_count(d):>24} {_fmt_count(a):>24}")
    dim = collective_dim(spec)
    ok = checksum == 2**n
    print(f"blocked dimension: {dim}")
    print(f"sum of multiplicity*(2J+1) = 2^N: {'ok' if ok else 'MISMATCH'}")
    return 0 if ok else 3


def _cmd_verify(args) -> int:
    from .verify import run_checks

    results = run_checks(args.level)
    failed = [r for r in results if not r.passed]
    print(
        f"{len(results) - len(failed)}/{len(results)} checks passed"
        + (f"; FAILED: {', '.join(r.name for r in failed)}" if failed else "")
    )
    return 3 if failed else 0


def build_parser() -> _Parser:
    parser = _Parser(prog="spinblocks", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configured experiment to CSV")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--plot", action="store_true", help="also render a PNG")
    p.add_argument(
        "--echo-config",
        action="store_true",
        help="print the normalized configuration and exit",
    )
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("preset", help="run a built-in experiment family")
    p.add_argument("name", choices=sorted(_PRESETS))
    p.add_argument("--n", type=int, default=None, help="particle count override")
    p.add_argument("--gamma", type=float, default=None, help="rate override")
    p.add_argument("--tmax", type=float, default=None, help="time horizon override")
    p.add_argument("--dt", type=float, default=None, help="step override")
    p.add_argument("--outdir", required=True, help="output directory")
    p.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--level", choices=("quick", "full"), default="quick")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("dims", help="print block dimensions and multiplicities")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=_cmd_dims)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    code = args.func(args)
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
