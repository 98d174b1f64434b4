"""Experiment configuration in ``key = value`` text form."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, fields, replace

from ..errors import ConfigError
from ..operators import Kind
from ..schemes import Scheme

__all__ = [
    "Problem",
    "ExperimentConfig",
    "parse_config",
    "serialize_config",
    "load_config",
    "DEFAULT_SCHEMES",
    "ALLOWED_SCHEMES",
    "config_dict",
]


class Problem(str, enum.Enum):
    HEAT = "heat"
    ALLEN_CAHN = "allen_cahn"
    CAHN_HILLIARD = "cahn_hilliard"
    INPAINT = "inpaint"
    SEGMENT = "segment"
    STABILITY = "stability"
    CONVERGENCE = "convergence"


DEFAULT_SCHEMES = {
    Problem.HEAT: Scheme.HEAT_RSS_EULER,
    Problem.ALLEN_CAHN: Scheme.AC_RSS_IMEX,
    Problem.CAHN_HILLIARD: Scheme.CH_RSS_IMEX,
    Problem.INPAINT: Scheme.CH_INPAINT,
    Problem.SEGMENT: Scheme.AC_SEGMENT,
    Problem.STABILITY: Scheme.HEAT_RSS_EULER,
    Problem.CONVERGENCE: Scheme.HEAT_RSS_EULER,
}

_HEAT = {Scheme.HEAT_RSS_EULER, Scheme.HEAT_RSS_CN, Scheme.HEAT_RSS_GEAR,
         Scheme.HEAT_RSS_ADI, Scheme.HEAT_RSS_STRANG}
_AC = {Scheme.AC_IMEX, Scheme.AC_RSS_IMEX, Scheme.AC_DF, Scheme.AC_CONVEX_SPLIT,
       Scheme.AC_SPLITTING}
_CH = {Scheme.CH_RSS_IMEX, Scheme.CH_NLRSS, Scheme.CH_SAV}

ALLOWED_SCHEMES = {
    Problem.HEAT: _HEAT,
    Problem.ALLEN_CAHN: _AC,
    Problem.CAHN_HILLIARD: _CH,
    Problem.INPAINT: {Scheme.CH_INPAINT},
    Problem.SEGMENT: {Scheme.AC_SEGMENT},
    Problem.STABILITY: set(Scheme),
    Problem.CONVERGENCE: set(Scheme),
}

_PATTERN = {Problem.HEAT, Problem.ALLEN_CAHN, Problem.CAHN_HILLIARD}

# config-file key -> dataclass field
_KEY_TO_FIELD = {"lambda": "lam", "scheme_id": "scheme"}
_FIELD_TO_KEY = {"lam": "lambda"}


@dataclass(frozen=True)
class ExperimentConfig:
    problem: Problem = Problem.ALLEN_CAHN
    scheme: Scheme | None = None
    n: int = 64
    dim: int = 2
    dt: float = 1e-4
    t_max: float = 0.01
    tau: float = 2.0
    epsilon: float = 0.01
    lambda0: float = 0.0
    lam: float = 0.0
    C0: float = 1.0
    operator_kind: Kind = Kind.LELE4
    project_mean: bool | None = None
    initial_condition: str = "ac2d"
    mask_path: str | None = None
    output_dir: str = "output"
    snapshot_times: tuple = ()
    max_fixed_point_iters: int = 50
    fixed_point_tol: float = 1e-10

    def __post_init__(self):
        try:
            object.__setattr__(self, "problem", Problem(self.problem))
            if self.scheme is not None:
                object.__setattr__(self, "scheme", Scheme(self.scheme))
            object.__setattr__(self, "operator_kind", Kind(self.operator_kind))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        object.__setattr__(self, "snapshot_times", tuple(float(t) for t in self.snapshot_times))

    def resolved(self) -> "ExperimentConfig":
        """Fill problem-dependent defaults (scheme and projection)."""
        scheme = self.scheme if self.scheme is not None else DEFAULT_SCHEMES[self.problem]
        project = self.project_mean
        if project is None:
            project = self.problem in _PATTERN
        return replace(self, scheme=scheme, project_mean=project)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_times(text: str) -> tuple:
    parts = [p for p in text.replace(",", " ").split() if p]
    return tuple(float(p) for p in parts)


def _parse_optional_str(text: str):
    return None if text.strip().lower() in ("", "none") else text.strip()


_PARSERS = {
    "problem": lambda s: Problem(s.strip().lower()),
    "scheme": lambda s: Scheme(s.strip().lower()),
    "n": int,
    "dim": int,
    "dt": float,
    "t_max": float,
    "tau": float,
    "epsilon": float,
    "lambda0": float,
    "lam": float,
    "C0": float,
    "operator_kind": lambda s: Kind(s.strip().lower()),
    "project_mean": _parse_bool,
    "initial_condition": str.strip,
    "mask_path": _parse_optional_str,
    "output_dir": str.strip,
    "snapshot_times": _parse_times,
    "max_fixed_point_iters": int,
    "fixed_point_tol": float,
}


def _validate(cfg: ExperimentConfig, lines: dict) -> ExperimentConfig:
    def fail(name, message):
        raise ConfigError(message, lines.get(name))

    if cfg.n < 8:
        fail("n", f"n must be at least 8, got {cfg.n}")
    if cfg.dim not in (1, 2, 3):
        fail("dim", f"dim must be 1, 2 or 3, got {cfg.dim}")
    if not cfg.dt > 0:
        fail("dt", f"dt must be positive, got {cfg.dt}")
    if not cfg.t_max >= 0:
        fail("t_max", f"t_max must be nonnegative, got {cfg.t_max}")
    if not cfg.tau >= 0:
        fail("tau", f"tau must be nonnegative, got {cfg.tau}")
    if not cfg.epsilon > 0:
        fail("epsilon", f"epsilon must be positive, got {cfg.epsilon}")
    if not cfg.lambda0 >= 0:
        fail("lambda0", f"lambda0 must be nonnegative, got {cfg.lambda0}")
    if not cfg.lam >= 0:
        fail("lam", f"lambda must be nonnegative, got {cfg.lam}")
    if not cfg.C0 > 0:
        fail("C0", f"C0 must be positive, got {cfg.C0}")
    if cfg.max_fixed_point_iters < 1:
        fail("max_fixed_point_iters", "max_fixed_point_iters must be at least 1")
    if not cfg.fixed_point_tol > 0:
        fail("fixed_point_tol", "fixed_point_tol must be positive")
    for t in cfg.snapshot_times:
        if not 0 <= t <= cfg.t_max:
            fail("snapshot_times", f"snapshot time {t} lies outside [0, t_max={cfg.t_max}]")
    if cfg.scheme is not None and cfg.scheme not in ALLOWED_SCHEMES[cfg.problem]:
        fail("scheme", f"scheme {cfg.scheme.value!r} cannot run problem {cfg.problem.value!r}")
    if cfg.problem is Problem.INPAINT and cfg.dim != 2:
        fail("dim", "inpainting works on 2D images")
    if cfg.problem is Problem.SEGMENT and cfg.dim != 2:
        fail("dim", "segmentation works on 2D images")
    return cfg


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated,
    default-resolved :class:`ExperimentConfig`."""
    values = {}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        name = _KEY_TO_FIELD.get(key, key)
        if name not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if name in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[name] = _PARSERS[name](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
        lines[name] = lineno
    cfg = _validate(ExperimentConfig(**values), lines)
    return cfg.resolved()


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _format(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(v)) for v in value)
    if value is None:
        return "none"
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Inverse of :func:`parse_config` for resolved configs."""
    out = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None and f.name in ("scheme", "project_mean"):
            continue
        out.append(f"{_FIELD_TO_KEY.get(f.name, f.name)} = {_format(value)}")
    return "\n".join(out) + "\n"


def config_dict(cfg: ExperimentConfig) -> dict:
    """JSON-friendly view of the configuration."""
    d = asdict(cfg)
    return {k: (v.value if isinstance(v, enum.Enum) else list(v) if isinstance(v, tuple) else v)
            for k, v in d.items()}
