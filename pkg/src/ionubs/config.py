"""Run configuration: INI sections per experiment, strict keys, typed values.

Example::

    [run]
    mass_u = 39.96259098
    freq_hz = 1e6
    coulomb = derived

    [fig4]
    sigma_sq = 2, 3, 4, 5, 7, 9
    n_max = 8
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .core_lr import PhysicalParams
from .errors import ConfigError
from .two_ion import COULOMB


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _complexes(text: str) -> tuple:
    return tuple(complex(x.replace("i", "j")) for x in text.replace(",", " ").split())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str):
    return None if text.strip() in ("", "none") else float(text)


@dataclass(frozen=True)
class RunSection:
    mass_u: float = 39.96259098
    freq_hz: float = 1e6
    coulomb: str = "derived"
    output: str = "results.csv"

    def validate(self):
        if self.mass_u <= 0 or self.freq_hz <= 0:
            raise ConfigError("run.mass_u and run.freq_hz must be positive")
        if self.coulomb not in COULOMB:
            raise ConfigError(f"run.coulomb must be one of {sorted(COULOMB)}")


@dataclass(frozen=True)
class Fig4Section:
    sigma_sq: tuple = (2.0, 3.0, 4.0, 5.0, 7.0, 9.0)
    n_max: int = 8
    n_cut: int = 48
    pickup: float = 50.0
    theta: float = np.pi / 2

    def validate(self):
        if not self.sigma_sq or min(self.sigma_sq) <= 0.5:
            raise ConfigError("fig4.sigma_sq values must exceed 0.5")
        if self.n_max < 0 or self.n_cut < 4 * max(self.n_max, 1):
            raise ConfigError("fig4.n_cut must be at least 4 * n_max")
        if self.pickup < 20:
            raise ConfigError("fig4.pickup must be >= 20 (units l0)")
        if not 0 < self.theta <= np.pi:
            raise ConfigError("fig4.theta must lie in (0, pi]")


@dataclass(frozen=True)
class SeparateSection:
    sigma: float = 2.0
    target_distance: float | None = None
    n_cut: int = 24
    frozen: bool = False

    def validate(self):
        if self.sigma <= 0:
            raise ConfigError("separate.sigma must be positive")
        if self.target_distance is not None and self.target_distance < 50:
            raise ConfigError("separate.target_distance must be >= 50 (units l0)")
        if self.n_cut < 8:
            raise ConfigError("separate.n_cut must be >= 8")


GATES = ("displacement", "phase", "squeeze", "nonlinear", "beamsplitter")


@dataclass(frozen=True)
class SynthesizeSection:
    gate: str = "phase"
    value: complex = complex(np.pi / 2)
    duration: float = 8.0
    sigma: float = 1.0
    n_max: int = 4
    tolerance: float = 1e-6

    def validate(self):
        if self.gate not in GATES:
            raise ConfigError(f"synthesize.gate must be one of {GATES}")
        if self.duration <= 0 or self.sigma <= 0 or self.tolerance <= 0:
            raise ConfigError("synthesize.duration, sigma and tolerance must be positive")


@dataclass(frozen=True)
class SimulateSection:
    circuit: str = ""
    backend: str = "auto"
    n_cut: int = 16
    inputs: tuple = ()

    def validate(self):
        if self.backend not in ("auto", "gaussian", "fock"):
            raise ConfigError("simulate.backend must be auto, gaussian or fock")
        if self.n_cut < 4:
            raise ConfigError("simulate.n_cut must be >= 4")


PARSERS = {
    "mass_u": float, "freq_hz": float, "coulomb": str.strip, "output": str.strip,
    "sigma_sq": _floats, "n_max": int, "n_cut": int, "pickup": float, "theta": float,
    "sigma": float, "target_distance": _opt_float, "frozen": _bool,
    "gate": str.strip, "value": lambda s: complex(s.replace("i", "j")), "duration": float,
    "tolerance": float, "circuit": str.strip, "backend": str.strip, "inputs": _complexes,
}

SECTIONS = {"run": RunSection, "fig4": Fig4Section, "separate": SeparateSection,
            "synthesize": SynthesizeSection, "simulate": SimulateSection}


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    fig4: Fig4Section = field(default_factory=Fig4Section)
    separate: SeparateSection = field(default_factory=SeparateSection)
    synthesize: SynthesizeSection = field(default_factory=SynthesizeSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)

    def validate(self) -> "RunConfig":
        for name in SECTIONS:
            getattr(self, name).validate()
        return self

    @property
    def params(self) -> PhysicalParams:
        return PhysicalParams.from_species(self.run.mass_u, self.run.freq_hz)

    def canonical(self) -> str:
        """Stable text form (output path excluded) used for hashing."""
        lines = []
        for name in SECTIONS:
            for k, v in sorted(asdict(getattr(self, name)).items()):
                if (name, k) != ("run", "output"):
                    lines.append(f"{name}.{k}={v!r}")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def parse_config(text: str = "", overrides: dict | None = None) -> RunConfig:
    """Parse INI text plus ``section.key -> value`` overrides; reject unknown keys."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = {s: dict(cp[s]) for s in cp.sections()}
    for dotted, value in (overrides or {}).items():
        sec, _, key = dotted.partition(".")
        if not key:
            raise ConfigError(f"override {dotted!r} must look like section.key")
        raw.setdefault(sec, {})[key] = value
    built = {}
    for sec, items in raw.items():
        if sec not in SECTIONS:
            raise ConfigError(f"unknown section [{sec}]; expected one of {sorted(SECTIONS)}")
        cls = SECTIONS[sec]
        allowed = {f.name for f in fields(cls)}
        kw = {}
        for key, value in items.items():
            if key not in allowed:
                raise ConfigError(f"unknown key {key!r} in [{sec}]; allowed: {sorted(allowed)}")
            try:
                kw[key] = PARSERS[key](value)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {value!r}: {exc}") from exc
        built[sec] = cls(**kw)
    return RunConfig(**built).validate()


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    if path is None:
        return parse_config("", overrides)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides)
