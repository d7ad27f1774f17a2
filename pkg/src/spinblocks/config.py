"""Experiment configuration: flat key = value text with [channel] sections.

Example::

    # ensemble and initial state
    n_particles = 10
    initial_state = cat            # cat | coherent_pole | dicke(J, M)
    hamiltonian = none             # none | counter_twisting(lambda)
    t_max = 1.0
    dt = 1e-3                      # omit for an automatic stable choice
    record_stride = 10
    outputs = fidelity, jz, populations, trace

    [channel]
    operator = sigma_minus         # sigma_minus | sigma_plus | pauli_z
    kind = local                   # | custom(cm, cp, cz)
    gamma = 1.0

Times are in units where the dominant rate is one.  ``pauli_z`` is the
+-1-eigenvalue convention and maps to cz = 2 in the internal half-unit
basis.  A parsed configuration echoes back to text that re-parses to an
identical configuration.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .operators import LocalOperatorCoeffs

__all__ = ["ConfigError", "ChannelConfig", "ExperimentConfig", "parse_config", "parse_config_text"]

KNOWN_OUTPUTS = (
    "fidelity",
    "jx",
    "jy",
    "jz",
    "xi2",
    "trace",
    "min_eig",
    "populations",
    "dropped_weight",
)


class ConfigError(ValueError):
    """Malformed configuration; message carries the line number."""


@dataclass
class ChannelConfig:
    operator: str  # sigma_minus | sigma_plus | pauli_z | custom(cm,cp,cz)
    kind: str  # local | collective
    gamma: float

    def coeffs(self) -> LocalOperatorCoeffs:
        name = self.operator
        if name == "sigma_minus":
            return LocalOperatorCoeffs.sigma_minus()
        if name == "sigma_plus":
            return LocalOperatorCoeffs.sigma_plus()
        if name == "pauli_z":
            return LocalOperatorCoeffs.pauli_z()
        m = re.fullmatch(r"custom\(([^,]+),([^,]+),([^)]+)\)", name.replace(" ", ""))
        if m:
            cm, cp, cz = (complex(tok) for tok in m.groups())
            return LocalOperatorCoeffs(cm=cm, cp=cp, cz=cz)
        raise ConfigError(f"unknown channel operator {name!r}")


@dataclass
class ExperimentConfig:
    n_particles: int
    initial_state: str = "cat"
    hamiltonian: str = "none"
    t_max: float = 1.0
    dt: float | None = None
    record_stride: int = 1
    truncation: float | None = None
    outputs: tuple[str, ...] = ("fidelity", "jz", "trace")
    channels: list[ChannelConfig] = field(default_factory=list)

    def validate(self) -> None:
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if not re.fullmatch(
            r"cat|coherent_pole|dicke\(\s*[\d.]+\s*,\s*-?[\d.]+\s*\)", self.initial_state
        ):
            raise ConfigError(f"unknown initial_state {self.initial_state!r}")
        if not re.fullmatch(
            r"none|counter_twisting\(\s*-?[\d.eE+-]+\s*\)", self.hamiltonian
        ):
            raise ConfigError(f"unknown hamiltonian {self.hamiltonian!r}")
        for name in self.outputs:
            if name not in KNOWN_OUTPUTS:
                raise ConfigError(f"unknown output {name!r}")
        for ch in self.channels:
            if ch.kind not in ("local", "collective"):
                raise ConfigError(f"unknown channel kind {ch.kind!r}")
            if ch.gamma < 0:
                raise ConfigError("channel gamma must be >= 0")
            ch.coeffs()  # raises on a bad operator string

    def initial_state_args(self):
        """('cat', None) | ('coherent_pole', None) | ('dicke', (j, m))."""
        m = re.fullmatch(r"dicke\(\s*([\d.]+)\s*,\s*(-?[\d.]+)\s*\)", self.initial_state)
        if m:
            return "dicke", (float(m.group(1)), float(m.group(2)))
        return self.initial_state, None

    def hamiltonian_lambda(self) -> float | None:
        m = re.fullmatch(r"counter_twisting\(\s*(-?[\d.eE+-]+)\s*\)", self.hamiltonian)
        return float(m.group(1)) if m else None

    def to_text(self) -> str:
        lines = [
            f"n_particles = {self.n_particles}",
            f"initial_state = {self.initial_state}",
            f"hamiltonian = {self.hamiltonian}",
            f"t_max = {self.t_max!r}",
        ]
        if self.dt is not None:
            lines.append(f"dt = {self.dt!r}")
        lines.append(f"record_stride = {self.record_stride}")
        if self.truncation is not None:
            lines.append(f"truncation = {self.truncation!r}")
        lines.append(f"outputs = {', '.join(self.outputs)}")
        for ch in self.channels:
            lines.extend(
                [
                    "",
                    "[channel]",
                    f"operator = {ch.operator}",
                    f"kind = {ch.kind}",
                    f"gamma = {ch.gamma!r}",
                ]
            )
        return "\n".join(lines) + "\n"


_GLOBAL_KEYS = {
    "n_particles",
    "initial_state",
    "hamiltonian",
    "t_max",
    "dt",
    "record_stride",
    "truncation",
    "outputs",
}
_CHANNEL_KEYS = {"operator", "kind", "gamma"}


def parse_config_text(text: str) -> ExperimentConfig:
    globals_: dict[str, str] = {}
    channels: list[dict[str, str]] = []
    current: dict[str, str] | None = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[channel]":
                raise ConfigError(f"line {lineno}: unknown section {line!r}")
            current = {}
            channels.append(current)
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if current is None:
            if key not in _GLOBAL_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in globals_:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            globals_[key] = value
        else:
            if key not in _CHANNEL_KEYS:
                raise ConfigError(f"line {lineno}: unknown channel key {key!r}")
            if key in current:
                raise ConfigError(f"line {lineno}: duplicate channel key {key!r}")
            current[key] = value

    if "n_particles" not in globals_:
        raise ConfigError("missing required key 'n_particles'")

    def _num(key, conv, default=None):
        if key not in globals_:
            return default
        try:
            return conv(globals_[key])
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {exc}") from None

    outputs = tuple(
        tok.strip()
        for tok in globals_.get("outputs", "fidelity, jz, trace").split(",")
        if tok.strip()
    )
    cfg = ExperimentConfig(
        n_particles=_num("n_particles", int),
        initial_state=globals_.get("initial_state", "cat"),
        hamiltonian=globals_.get("hamiltonian", "none"),
        t_max=_num("t_max", float, 1.0),
        dt=_num("dt", float),
        record_stride=_num("record_stride", int, 1),
        truncation=_num("truncation", float),
        outputs=outputs,
    )
    for i, ch in enumerate(channels, start=1):
        for key in _CHANNEL_KEYS:
            if key not in ch:
                raise ConfigError(f"channel {i}: missing key {key!r}")
        try:
            gamma = float(ch["gamma"])
        except ValueError as exc:
            raise ConfigError(f"channel {i}: gamma: {exc}") from None
        cfg.channels.append(
            ChannelConfig(operator=ch["operator"], kind=ch["kind"], gamma=gamma)
        )
    cfg.validate()
    return cfg


def parse_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())
