"""Flat dotted-key configuration files (``section.key = value``, ``#`` comments).

Any key can be overridden from the environment: ``VISCONTACT_MATERIAL__RHO=0.1``
sets ``material.rho`` (double underscore stands for the dot).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .material import MaterialParams

ENV_PREFIX = "VISCONTACT_"

KNOWN_KEYS = {
    "material.lambda",
    "material.mu",
    "material.theta",
    "material.xi",
    "material.rho",
    "mesh.lower",
    "mesh.upper",
    "mesh.subdivisions",
    "mesh.dirichlet_face",
    "obstacle.normal",
    "time.T",
    "time.dt",
    "time.T0",
    "force.vector",
    "force.until",
    "penalty.kappa",
    "penalty.sweep",
    "refine.levels",
    "initial.displacement",
    "initial.offset",
    "initial.file",
    "initial.velocity",
    "initial.velocity_file",
    "output.dir",
    "run.seed",
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(key, f"unknown key ({source}:{lineno})")
        values[key] = value
    return values


def env_overrides(environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    out = {}
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX):
            key = name[len(ENV_PREFIX) :].replace("__", ".")
            # section names are lower case; time.T / time.T0 keep their case
            section, _, rest = key.partition(".")
            key = f"{section.lower()}.{rest if rest in ('T', 'T0') else rest.lower()}"
            if key not in KNOWN_KEYS:
                raise ConfigError(key, f"unknown key from environment variable {name}")
            out[key] = value
    return out


def _floats(raw: dict, key: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in raw[key].replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(key, f"not a number list: {raw[key]!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(key, f"expected {n} values, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise ConfigError(key, "values must be finite")
    return vals


def _float(raw: dict, key: str) -> float:
    return _floats(raw, key, 1)[0]


def _ints(raw: dict, key: str, n: int | None = None) -> list[int]:
    try:
        vals = [int(v) for v in raw[key].replace(",", " ").split()]
    except ValueError as exc:
        raise ConfigError(key, f"not an integer list: {raw[key]!r}") from exc
    if n is not None and len(vals) != n:
        raise ConfigError(key, f"expected {n} values, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class SimConfig:
    material: MaterialParams
    lower: tuple
    upper: tuple
    subdivisions: tuple
    dirichlet_face: str
    normal: tuple
    T: float
    dt: float
    T0: float | None
    force: tuple
    force_until: float | None
    kappa: float
    kappa_sweep: tuple = ()
    refine_levels: tuple = ()
    initial_displacement: str = "zero"
    initial_offset: float = 0.0
    initial_file: str | None = None
    initial_velocity: str = "zero"
    initial_velocity_file: str | None = None
    out: str = "out"
    seed: int = 0
    source: dict = field(default_factory=dict, compare=False, repr=False)

    def with_(self, **changes) -> "SimConfig":
        from dataclasses import replace

        return replace(self, **changes)


REQUIRED = ("material.lambda", "material.mu", "material.theta", "material.xi", "material.rho", "time.T", "time.dt")


def build_config(raw: dict[str, str], base_dir: Path | None = None) -> SimConfig:
    """Validate raw key/value strings into a SimConfig; errors name the offending key."""
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(key, "missing required key")
    try:
        material = MaterialParams(
            _float(raw, "material.lambda"),
            _float(raw, "material.mu"),
            _float(raw, "material.theta"),
            _float(raw, "material.xi"),
            _float(raw, "material.rho"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        name = str(exc).split()[-1].split("=")[0]
        raise ConfigError(f"material.{name}", str(exc)) from exc

    lower = tuple(_floats(raw, "mesh.lower", 3)) if "mesh.lower" in raw else (0.0, 0.0, 0.0)
    upper = tuple(_floats(raw, "mesh.upper", 3)) if "mesh.upper" in raw else (1.0, 1.0, 1.0)
    if any(u <= l for l, u in zip(lower, upper)):
        raise ConfigError("mesh.upper", "box is degenerate: every upper coordinate must exceed the lower one")
    subdivisions = tuple(_ints(raw, "mesh.subdivisions", 3)) if "mesh.subdivisions" in raw else (1, 1, 1)
    if any(n < 1 for n in subdivisions):
        raise ConfigError("mesh.subdivisions", "must be positive")
    face = raw.get("mesh.dirichlet_face", "+z")
    if face not in ("-x", "+x", "-y", "+y", "-z", "+z"):
        raise ConfigError("mesh.dirichlet_face", f"must be one of -x +x -y +y -z +z, got {face!r}")
    normal = tuple(_floats(raw, "obstacle.normal", 3)) if "obstacle.normal" in raw else (0.0, 0.0, 1.0)
    if np.linalg.norm(normal) == 0:
        raise ConfigError("obstacle.normal", "must be nonzero")

    T, dt = _float(raw, "time.T"), _float(raw, "time.dt")
    if T <= 0:
        raise ConfigError("time.T", "must be positive")
    if dt <= 0:
        raise ConfigError("time.dt", "must be positive")
    steps = round(T / dt)
    if steps < 1 or abs(steps * dt - T) > 1e-12 * T:
        raise ConfigError("time.dt", f"{dt!r} does not divide T={T!r}")
    T0 = _float(raw, "time.T0") if "time.T0" in raw else None
    if T0 is not None:
        if not 0 < T0 < T:
            raise ConfigError("time.T0", "must satisfy 0 < T0 < T")
        k = T0 / dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ConfigError("time.T0", "must lie on the time grid")

    force = tuple(_floats(raw, "force.vector", 3)) if "force.vector" in raw else (0.0, 0.0, 0.0)
    if "force.until" in raw:
        until = raw["force.until"].strip().lower()
        force_until = None if until in ("none", "inf", "never") else _float(raw, "force.until")
    else:
        force_until = T0
    if force_until is not None and force_until <= 0:
        raise ConfigError("force.until", "must be positive")

    kappa = _float(raw, "penalty.kappa") if "penalty.kappa" in raw else 1e-3
    if kappa <= 0:
        raise ConfigError("penalty.kappa", "must be positive")
    sweep = tuple(_floats(raw, "penalty.sweep")) if "penalty.sweep" in raw else ()
    if any(k <= 0 for k in sweep):
        raise ConfigError("penalty.sweep", "all values must be positive")

    levels = ()
    if "refine.levels" in raw:
        parts = [p.split() for p in raw["refine.levels"].split(",") if p.strip()]
        try:
            levels = tuple(tuple(int(v) for v in (p * 3 if len(p) == 1 else p)) for p in parts)
        except ValueError as exc:
            raise ConfigError("refine.levels", f"not integers: {raw['refine.levels']!r}") from exc
        if any(len(l) != 3 or min(l) < 1 for l in levels):
            raise ConfigError("refine.levels", "each level needs 1 or 3 positive integers")

    kind = raw.get("initial.displacement", "zero")
    if kind not in ("zero", "offset", "file"):
        raise ConfigError("initial.displacement", f"must be zero, offset or file, got {kind!r}")
    offset = _float(raw, "initial.offset") if "initial.offset" in raw else 0.0
    if kind == "offset" and "initial.offset" not in raw:
        raise ConfigError("initial.offset", "required when initial.displacement = offset")
    init_file = raw.get("initial.file")
    if kind == "file" and not init_file:
        raise ConfigError("initial.file", "required when initial.displacement = file")
    vkind = raw.get("initial.velocity", "zero")
    if vkind not in ("zero", "file"):
        raise ConfigError("initial.velocity", f"must be zero or file, got {vkind!r}")
    vfile = raw.get("initial.velocity_file")
    if vkind == "file" and not vfile:
        raise ConfigError("initial.velocity_file", "required when initial.velocity = file")
    if base_dir is not None:
        init_file = str(base_dir / init_file) if init_file and not os.path.isabs(init_file) else init_file
        vfile = str(base_dir / vfile) if vfile and not os.path.isabs(vfile) else vfile

    try:
        seed = int(raw.get("run.seed", "0"))
    except ValueError as exc:
        raise ConfigError("run.seed", "must be an integer") from exc
    if not 0 <= seed < 2**64:
        raise ConfigError("run.seed", "must fit in an unsigned 64-bit integer")

    return SimConfig(
        material=material,
        lower=lower,
        upper=upper,
        subdivisions=subdivisions,
        dirichlet_face=face,
        normal=normal,
        T=T,
        dt=dt,
        T0=T0,
        force=force,
        force_until=force_until,
        kappa=kappa,
        kappa_sweep=sweep,
        refine_levels=levels,
        initial_displacement=kind,
        initial_offset=offset,
        initial_file=init_file,
        initial_velocity=vkind,
        initial_velocity_file=vfile,
        out=raw.get("output.dir", "out"),
        seed=seed,
        source=dict(raw),
    )


def load_config(path, environ=None) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    raw = parse_text(text, str(path))
    raw.update(env_overrides(environ))
    return build_config(raw, path.parent)
