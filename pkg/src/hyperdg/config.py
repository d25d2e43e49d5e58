"""Run configuration: a flat set of fields read from and written to YAML."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field, fields, replace

import yaml

from .basis import QUADRATURE_KINDS
from .kernels import V_LENGTHS
from .mesh import build_topology
from .operators import FLUX_KINDS, MAPPING_MODES
from .vector import BUFFERED, MODES, NON_BUFFERED

LOOPS = ("ecl", "fcl")
STRATEGIES = ("even_odd", "dense")


class ConfigError(ValueError):
    pass


def _tuple(value, dim, name):
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return (value,) * dim
    value = tuple(value)
    if len(value) != dim:
        raise ConfigError(f"{name} needs {dim} entries, got {len(value)}")
    return value


@dataclass(frozen=True)
class RunConfig:
    d_x: int = 1
    d_v: int = 1
    k: int = 3
    subdivisions_x: tuple = (8,)
    subdivisions_v: tuple = (8,)
    extents_x: tuple = None
    extents_v: tuple = None
    deformation_x: float = 0.0
    deformation_v: float = 0.0
    quadrature: str = "gauss_legendre"
    flux: str = "upwind"
    loop: str = "ecl"
    strategy: str = "even_odd"
    mapping: str = "tensor_per_space"
    v_len: int = 0  # 0: one batch with all owned cells
    p_x: int = None
    p_v: int = None
    node_block: tuple = None
    mode: str = None  # default: non_buffered for ecl, buffered for fcl
    cfl: float = 0.3
    dt: float = None
    n_steps: int = 10
    t_final: float = None
    seed: int = 0
    velocity: tuple = None  # default: all ones
    track_mass: bool = False
    alpha: float = 0.01
    kappa: float = 0.5
    v_max: float = 6.0
    output: str = None
    snapshot: str = None
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "subdivisions_x", _tuple(self.subdivisions_x, self.d_x, "subdivisions_x"))
        set_(self, "subdivisions_v", _tuple(self.subdivisions_v, self.d_v, "subdivisions_v"))
        for name, dim in (("extents_x", self.d_x), ("extents_v", self.d_v)):
            ext = getattr(self, name)
            if ext is not None:
                ext = tuple(tuple(float(c) for c in e) for e in ext)
                if len(ext) != dim:
                    raise ConfigError(f"{name} needs {dim} intervals")
                set_(self, name, ext)
        if self.velocity is not None:
            set_(self, "velocity", tuple(float(a) for a in _tuple(self.velocity, self.d, "velocity")))
        if self.node_block is not None:
            set_(self, "node_block", tuple(int(b) for b in self.node_block))
        self.validate()

    @property
    def d(self):
        return self.d_x + self.d_v

    def validate(self):
        if not 1 <= self.d_x <= 3 or not 1 <= self.d_v <= 3:
            raise ConfigError("d_x and d_v must be between 1 and 3")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        checks = (
            ("quadrature", QUADRATURE_KINDS),
            ("flux", FLUX_KINDS),
            ("loop", LOOPS),
            ("strategy", STRATEGIES),
            ("mapping", MAPPING_MODES),
        )
        for name, allowed in checks:
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.mode is not None and self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.loop == "fcl" and self.mode == NON_BUFFERED:
            raise ConfigError("the face-centric loop requires buffered mode")
        if self.v_len not in (0,) + V_LENGTHS:
            raise ConfigError(f"v_len must be 0 or one of {V_LENGTHS}")
        if self.mapping == "cartesian_single_set" and (self.deformation_x or self.deformation_v):
            raise ConfigError("cartesian_single_set mapping needs undeformed meshes")
        if self.cfl <= 0 or (self.dt is not None and self.dt <= 0):
            raise ConfigError("cfl and dt must be positive")
        if self.n_steps < 0:
            raise ConfigError("n_steps must be non-negative")
        for name in ("p_x", "p_v"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ConfigError(f"{name} must be positive")

    # ------------------------------------------------------------- derived
    def vector_mode(self):
        if self.mode is not None:
            return self.mode
        return BUFFERED if self.loop == "fcl" else NON_BUFFERED

    def velocity_vector(self):
        return self.velocity if self.velocity is not None else (1.0,) * self.d

    def topology(self):
        try:
            return build_topology(self.d_x, self.d_v, self.subdivisions_x, self.subdivisions_v,
                                  self.extents_x, self.extents_v, self.deformation_x or None,
                                  self.deformation_v or None)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def process_grid(self):
        """(p_x, p_v); unset entries come from HYPERDG_THREADS (default 1)."""
        if self.p_x is not None and self.p_v is not None:
            return self.p_x, self.p_v
        workers = int(os.environ.get("HYPERDG_THREADS", "1"))
        if workers < 1:
            raise ConfigError("HYPERDG_THREADS must be positive")
        if self.p_x is not None:
            if workers % self.p_x:
                raise ConfigError("HYPERDG_THREADS is not a multiple of p_x")
            return self.p_x, workers // self.p_x
        if self.p_v is not None:
            if workers % self.p_v:
                raise ConfigError("HYPERDG_THREADS is not a multiple of p_v")
            return workers // self.p_v, self.p_v
        p_v = max(q for q in range(1, int(math.isqrt(workers)) + 1) if workers % q == 0)
        return workers // p_v, p_v

    def time_step(self, topo):
        """(dt, n_steps) from dt / cfl and n_steps / t_final."""
        from .timeint import advection_dt

        if self.dt is not None:
            dt = self.dt
        else:
            h = list(topo.mesh_x.cell_size) + list(topo.mesh_v.cell_size)
            dt = advection_dt(self.cfl, self.k, self.velocity_vector(), h)
        if self.t_final is not None:
            n_steps = max(1, math.ceil(self.t_final / dt - 1e-12))
            return self.t_final / n_steps, n_steps
        return dt, self.n_steps

    # ---------------------------------------------------------------- I/O
    def to_dict(self):
        out = {}
        for f in fields(self):
            if f.name == "extra":
                continue
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = [list(v) if isinstance(v, tuple) else v for v in val]
            out[f.name] = val
        return out

    def replace(self, **changes):
        return replace(self, **changes)


def config_from_dict(data):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    known = {f.name for f in fields(RunConfig)} - {"extra"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path) as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def defaults_dict():
    return asdict(RunConfig(), dict_factory=dict)
