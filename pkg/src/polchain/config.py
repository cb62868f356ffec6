"""Run configuration: a strict ``[section]`` / ``key = value`` format.

``configparser`` is not used because it does not report line numbers for
bad values and silently accepts some duplicates; this parser rejects unknown
sections and keys, duplicates, and invalid values with the offending line.

Ranges accept ``a..b`` (inclusive), ``a..b:step`` and comma lists.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

from .analysis import LambdaRule, brightest_exciton_energy
from .disorder import DisorderSpec
from .errors import InvalidInputError
from .model import AggregateSpec, Arrangement, CavitySpec, CouplingMode
from .units import OMEGA_BULK_EV, OMEGA_IMPURITY_EV, ev_to_hartree

MODELS = ("jc", "tc", "tc_impurity", "tc_kasha", "kasha")
RESONANCES = ("bulk", "impurity", "E2")


class ConfigError(InvalidInputError):
    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line else "config: "
        super().__init__(prefix + message)
        self.line = line


@dataclass(frozen=True)
class SystemConfig:
    model: str = "tc_kasha"
    geometry: str = "H"
    n: int = 7
    spacing_angstrom: float = 5.0
    omega_bulk_ev: float = OMEGA_BULK_EV
    omega_impurity_ev: float = OMEGA_IMPURITY_EV
    dipole_au: float = 1.0
    impurity_dipole_au: float | None = None
    dielectric: float = 1.0
    impurity_index: int | None = None
    coupling: str = "nearest"
    replicas: int = 1


@dataclass(frozen=True)
class CavityConfig:
    omega_ph_ev: float | None = None
    """Explicit photon energy; overrides ``resonance`` when set."""
    resonance: str = "bulk"
    lambda_au: float = 0.005
    lambda_rule: str = "fixed"
    polarization: tuple = (1.0, 0.0, 0.0)


@dataclass(frozen=True)
class DisorderConfig:
    sigma_ev: float = 0.02
    angle_max: float = math.pi / 2
    seed: int = 0
    samples: int = 1
    protected: tuple | None = None
    """1-based chain positions; ``None`` means P and its two neighbours."""
    coulomb: bool = True


@dataclass(frozen=True)
class ScanConfig:
    n_range: tuple = (4,)
    d_range_angstrom: tuple = (5.0,)
    flip_mode: str = "first"


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."
    formats: tuple = ("csv",)


@dataclass(frozen=True)
class SpectrumConfig:
    width_ev: float = 0.02
    step_ev: float | None = None
    """Grid step; defaults to width / 20."""


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    cavity: CavityConfig = field(default_factory=CavityConfig)
    disorder: DisorderConfig | None = None
    scan: ScanConfig | None = None
    output: OutputConfig = field(default_factory=OutputConfig)
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)

    def aggregate_spec(self, **overrides):
        s = self.system
        spec = AggregateSpec(
            n_emitters=s.n,
            spacing=s.spacing_angstrom,
            arrangement=Arrangement(s.geometry),
            impurity_index=s.impurity_index,
            omega_bulk=ev_to_hartree(s.omega_bulk_ev),
            omega_impurity=ev_to_hartree(s.omega_impurity_ev),
            dipole_magnitude=s.dipole_au,
            dielectric=s.dielectric,
            impurity_dipole_magnitude=s.impurity_dipole_au,
        )
        return spec.replace(**overrides) if overrides else spec

    def photon_energy(self):
        """Cavity frequency in Hartree."""
        c = self.cavity
        if c.omega_ph_ev is not None:
            return ev_to_hartree(c.omega_ph_ev)
        spec = self.aggregate_spec()
        if c.resonance == "bulk":
            return spec.omega_bulk
        if c.resonance == "impurity":
            return spec.omega_impurity
        return brightest_exciton_energy(spec)

    def cavity_spec(self):
        c = self.cavity
        return CavitySpec(self.photon_energy(), c.lambda_au, c.polarization)

    def disorder_spec(self, seed=None, samples=None):
        d = self.disorder or DisorderConfig()
        protected = None if d.protected is None else frozenset(k - 1 for k in d.protected)
        return DisorderSpec(
            sigma_energy=ev_to_hartree(d.sigma_ev),
            angle_max=d.angle_max,
            protected_indices=protected,
            seed=d.seed if seed is None else seed,
            n_samples=d.samples if samples is None else samples,
        )


# -- value parsers ------------------------------------------------------------


def _int(text):
    return int(text)


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _optional(parse):
    def inner(text):
        return None if text in ("none", "None", "") else parse(text)

    return inner


def _choice(options):
    def inner(text):
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text

    return inner


def _bool(text):
    if text in ("true", "yes", "1"):
        return True
    if text in ("false", "no", "0"):
        return False
    raise ValueError("must be true or false")


def _vector(text):
    parts = [_float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("must have three comma-separated components")
    return tuple(parts)


def _range(parse):
    def inner(text):
        if ".." in text:
            lo, _, rest = text.partition("..")
            hi, _, step = rest.partition(":")
            lo, hi = parse(lo.strip()), parse(hi.strip())
            step = parse(step.strip()) if step else 1
            if not step > 0:
                raise ValueError("range step must be positive")
            if hi < lo:
                raise ValueError("range end is below its start")
            count = int(math.floor((hi - lo) / step + 1e-9)) + 1
            values = [lo + i * step for i in range(count)]
            if isinstance(lo, float) or isinstance(step, float):
                values = [round(v, 12) for v in values]
            return tuple(values)
        values = tuple(parse(p.strip()) for p in text.split(","))
        if not values:
            raise ValueError("empty range")
        return values

    return inner


def _ints(text):
    return tuple(_int(p.strip()) for p in text.split(","))


def _strings(text):
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _positive(v):
    return v is None or v > 0


def _at_least_one(v):
    return v is None or v >= 1


SCHEMA = {
    "system": (SystemConfig, {
        "model": (_choice(MODELS), None),
        "geometry": (_choice(("H", "J")), None),
        "n": (_int, (_at_least_one, "n must be >= 1")),
        "spacing_angstrom": (_float, (_positive, "spacing must be > 0")),
        "omega_bulk_ev": (_float, (_positive, "omega_bulk_ev must be > 0")),
        "omega_impurity_ev": (_float, (_positive, "omega_impurity_ev must be > 0")),
        "dipole_au": (_float, None),
        "impurity_dipole_au": (_optional(_float), None),
        "dielectric": (_float, (_at_least_one, "dielectric must be >= 1")),
        "impurity_index": (_optional(_int), (_at_least_one, "impurity_index must be >= 1")),
        "coupling": (_choice(tuple(m.value for m in CouplingMode)), None),
        "replicas": (_int, (_at_least_one, "replicas must be >= 1")),
    }),
    "cavity": (CavityConfig, {
        "omega_ph_ev": (_optional(_float), (_positive, "omega_ph_ev must be > 0")),
        "resonance": (_choice(RESONANCES), None),
        "lambda_au": (_float, (lambda v: v >= 0, "lambda_au must be >= 0")),
        "lambda_rule": (_choice(tuple(r.value for r in LambdaRule)), None),
        "polarization": (_vector, (lambda v: abs(math.sqrt(sum(x * x for x in v)) - 1) <= 1e-12,
                                   "polarization must be a unit vector")),
    }),
    "disorder": (DisorderConfig, {
        "sigma_ev": (_float, (lambda v: v >= 0, "sigma_ev must be >= 0")),
        "angle_max": (_float, (lambda v: 0 <= v <= math.pi / 2, "angle_max must lie in [0, pi/2]")),
        "seed": (_int, (lambda v: 0 <= v < 2**64, "seed must be an unsigned 64-bit integer")),
        "samples": (_int, (_at_least_one, "samples must be >= 1")),
        "protected": (_optional(_ints), (lambda v: v is None or all(k >= 1 for k in v),
                                         "protected positions are 1-based")),
        "coulomb": (_bool, None),
    }),
    "scan": (ScanConfig, {
        "n_range": (_range(_int), (lambda v: all(k >= 1 for k in v), "n_range values must be >= 1")),
        "d_range_angstrom": (_range(_float), (lambda v: all(k > 0 for k in v),
                                              "d_range_angstrom values must be > 0")),
        "flip_mode": (_choice(("first", "persistent")), None),
    }),
    "output": (OutputConfig, {
        "directory": (str, None),
        "formats": (_strings, (lambda v: set(v) <= {"csv"}, "only the csv format is supported")),
    }),
    "spectrum": (SpectrumConfig, {
        "width_ev": (_float, (_positive, "width_ev must be > 0")),
        "step_ev": (_optional(_float), (_positive, "step_ev must be > 0")),
    }),
}


def parse_config(text):
    """Parse configuration text into a validated :class:`RunConfig`.

    Raises
    ------
    ConfigError
        For unknown sections or keys, duplicates, unparsable values and
        violated invariants, naming the line.
    """
    values = {}
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", lineno)
            if section in values:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            values[section] = {}
            lines[section] = {"": lineno}
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key outside of a section", lineno)
        key, _, value = (p.strip() for p in line.partition("="))
        fields = SCHEMA[section][1]
        if key not in fields:
            raise ConfigError(f"unknown key {key!r} in [{section}]", lineno)
        if key in values[section]:
            raise ConfigError(f"duplicate key {key!r} in [{section}]", lineno)
        parse, check = fields[key]
        try:
            parsed = parse(value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r} ({exc})", lineno) from None
        if check is not None and not check[0](parsed):
            raise ConfigError(check[1], lineno)
        values[section][key] = parsed
        lines[section][key] = lineno

    parts = {}
    for name, (cls, _) in SCHEMA.items():
        if name in values:
            parts[name] = cls(**values[name])
    config = RunConfig(**parts)
    _check_consistency(config, lines)
    return config


def _check_consistency(config, lines):
    def line_of(section, *keys):
        for k in keys:
            if k in lines.get(section, {}):
                return lines[section][k]
        return lines.get(section, {}).get("")

    s = config.system
    if s.impurity_index is not None and s.impurity_index > s.n:
        raise ConfigError(f"impurity_index {s.impurity_index} exceeds n = {s.n}",
                          line_of("system", "impurity_index"))
    if s.model in ("tc_kasha", "kasha") and s.n < 2:
        raise ConfigError(f"model {s.model} needs n >= 2", line_of("system", "n", "model"))
    if s.model == "jc" and s.n != 1:
        raise ConfigError("model jc needs n = 1", line_of("system", "n", "model"))
    if s.replicas > 1 and s.model != "tc_kasha":
        raise ConfigError("replicas need model tc_kasha", line_of("system", "replicas"))
    if config.disorder and config.disorder.protected is not None:
        bad = [k for k in config.disorder.protected if k > s.n]
        if bad:
            raise ConfigError(f"protected positions {bad} exceed n = {s.n}",
                              line_of("disorder", "protected"))
    try:
        config.aggregate_spec()
    except InvalidInputError as exc:
        raise ConfigError(str(exc), line_of("system")) from None


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def serialize(config: RunConfig):
    """Text that :func:`parse_config` maps back to ``config``."""
    out = []
    for name in SCHEMA:
        part = getattr(config, name)
        if part is None:
            continue
        out.append(f"[{name}]")
        for f in dataclasses.fields(part):
            out.append(f"{f.name} = {_format(getattr(part, f.name))}")
        out.append("")
    return "\n".join(out)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
