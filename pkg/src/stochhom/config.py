"""Run configuration: an INI-style ``key = value`` file with bracketed
sections.

Every key, its type and its default is listed in ``FIELDS``; ``[problem]``
``instance`` is the only required key.  Lists are comma-separated and all
numbers are decimal.  Unknown sections or keys are rejected by name.

Default table:

=============  ===============  ==============================
section        key              default
=============  ===============  ==============================
problem        instance         (required)
problem        dimension        1
problem        matrix           (the instance's own)
problem        reaction         (the instance's own)
problem        horizon          0.5
problem        epsilon          0.2, 0.1, 0.05
problem        replicas         16
problem        seed             20240611
noise          modes            16
noise          q0               0.2
numerics       dt               0.0015625
numerics       points           0 (resolve the smallest epsilon)
numerics       cell_resolution  256
numerics       hermite_order    20
numerics       snapshots        33
mixing         tau              1.0
mixing         samples          10000
mixing         times            0.25, 0.5, ..., 3.0
mixing         points           63
mixing         eps_cell         0.1
khasminskii    tau              0.02
khasminskii    samples          10000
khasminskii    deltas           0.1, 0.2, 0.4, 0.8, 1.6
khasminskii    points           63
khasminskii    eps_cell         0.1
corrector      replicas         4
output         directory        out
output         plot             false
=============  ===============  ==============================
"""
import configparser
from dataclasses import dataclass, fields, replace

from .problems import lookup, matrix_by_name, reaction_by_name


class ConfigError(ValueError):
    pass


def _floats(text):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ValueError("empty list")
    return tuple(float(s) for s in items)


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    return int(text.strip())


def _str(text):
    return text.strip()


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_MIXING_TIMES = tuple(0.25 * k for k in range(1, 13))

# (section, key, RunConfig attribute, parser); defaults live on RunConfig
FIELDS = (
    ("problem", "instance", "instance", _str),
    ("problem", "dimension", "dimension", _int),
    ("problem", "matrix", "matrix", _str),
    ("problem", "reaction", "reaction", _str),
    ("problem", "horizon", "horizon", float),
    ("problem", "epsilon", "epsilon", _floats),
    ("problem", "replicas", "replicas", _int),
    ("problem", "seed", "seed", _int),
    ("noise", "modes", "modes", _int),
    ("noise", "q0", "q0", float),
    ("numerics", "dt", "dt", float),
    ("numerics", "points", "points", _int),
    ("numerics", "cell_resolution", "cell_resolution", _int),
    ("numerics", "hermite_order", "hermite_order", _int),
    ("numerics", "snapshots", "snapshots", _int),
    ("mixing", "tau", "mixing_tau", float),
    ("mixing", "samples", "mixing_samples", _int),
    ("mixing", "times", "mixing_times", _floats),
    ("mixing", "points", "mixing_points", _int),
    ("mixing", "eps_cell", "mixing_eps_cell", float),
    ("khasminskii", "tau", "khasminskii_tau", float),
    ("khasminskii", "samples", "khasminskii_samples", _int),
    ("khasminskii", "deltas", "khasminskii_deltas", _floats),
    ("khasminskii", "points", "khasminskii_points", _int),
    ("khasminskii", "eps_cell", "khasminskii_eps_cell", float),
    ("corrector", "replicas", "corrector_replicas", _int),
    ("output", "directory", "directory", _str),
    ("output", "plot", "plot", _bool),
)

SECTIONS = tuple(dict.fromkeys(f[0] for f in FIELDS))


@dataclass(frozen=True)
class RunConfig:
    instance: str
    dimension: int = 1
    matrix: str = ""
    reaction: str = ""
    horizon: float = 0.5
    epsilon: tuple = (0.2, 0.1, 0.05)
    replicas: int = 16
    seed: int = 20240611
    modes: int = 16
    q0: float = 0.2
    dt: float = 0.0015625
    points: int = 0
    cell_resolution: int = 256
    hermite_order: int = 20
    snapshots: int = 33
    mixing_tau: float = 1.0
    mixing_samples: int = 10000
    mixing_times: tuple = _MIXING_TIMES
    mixing_points: int = 63
    mixing_eps_cell: float = 0.1
    khasminskii_tau: float = 0.02
    khasminskii_samples: int = 10000
    khasminskii_deltas: tuple = (0.1, 0.2, 0.4, 0.8, 1.6)
    khasminskii_points: int = 63
    khasminskii_eps_cell: float = 0.1
    corrector_replicas: int = 4
    directory: str = "out"
    plot: bool = False

    def problem(self):
        """The ProblemInstance described by the [problem] and [noise] sections."""
        try:
            inst = lookup(self.instance, self.dimension, T=self.horizon, eps=self.epsilon, replicas=self.replicas,
                          seed=self.seed)
            if self.matrix:
                inst = replace(inst, A=matrix_by_name(self.matrix, self.dimension))
            if self.reaction:
                inst = replace(inst, alpha=reaction_by_name(self.reaction))
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
        return inst.with_noise(modes=self.modes, q0=self.q0)


def _check(cfg):
    if cfg.dimension not in (1, 2):
        raise ConfigError(f"[problem] dimension must be 1 or 2, got {cfg.dimension}")
    if not cfg.horizon > 0 or not cfg.dt > 0:
        raise ConfigError("[problem] horizon and [numerics] dt must be positive")
    if any(not e > 0 for e in cfg.epsilon):
        raise ConfigError("[problem] epsilon values must be positive")
    for name in ("replicas", "modes", "snapshots", "mixing_samples", "khasminskii_samples", "corrector_replicas"):
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be at least 1")
    if cfg.snapshots < 2:
        raise ConfigError("[numerics] snapshots must be at least 2")
    return cfg


def parse_text(text, source="<string>"):
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    known = {(s, k): (attr, conv) for s, k, attr, conv in FIELDS}
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if (section, key) not in known:
                raise ConfigError(f"{source}: unknown key {key!r} in section [{section}]")
            attr, conv = known[(section, key)]
            try:
                values[attr] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{source}: bad value for [{section}] {key}: {exc}") from None
    if "instance" not in values or not values["instance"]:
        raise ConfigError(f"{source}: missing required key 'instance' in section [problem]")
    return _check(RunConfig(**values))


def parse_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_text(text, str(path))


def write_config(cfg):
    """Render every key; ``parse_text(write_config(c)) == c``."""
    lines = []
    current = None
    for section, key, attr, _ in FIELDS:
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {_fmt(getattr(cfg, attr))}")
    return "\n".join(lines) + "\n"


def field_names():
    return [f.name for f in fields(RunConfig)]
