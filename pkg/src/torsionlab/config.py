"""Run configuration: named geometries, complexes, jobs and numeric knobs.

JSON layout::

    {"geometries": {"T3": {"type": "flat", "gram": [[1,0,0],[0,1,0],[0,0,1]]},
                    "E":  {"type": "complex", "tau": [0, 1], "area_scale": 1.0}},
     "complexes":  {"c": {"geometry": "T3", "kind": "de-rham",
                          "flux": {"0,1,2": 1.0}, "char": [0.3, 0.15, 0.4]}},
     "jobs":       [{"command": "compute", "spec": "c", "output": "c.json"}],
     "suites":     ["circle"],
     "knobs":      {"threads": 1}}

Complex numbers are [re, im] pairs; form keys are comma-separated
coordinate indices ("" for the 0-form part).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .complexes import (
    ComplexSpec,
    ConstantForm,
    SuperconnectionData,
    TwistedDeRham,
    TwistedDolbeault,
)
from .geometry import Character, ComplexTorus, FlatTorus, GeometryError, MetricPath
from .zeta import HeatSettings


class ConfigError(ValueError):
    pass


def parse_complex(x) -> complex:
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(a, (int, float)) for a in x):
        return complex(x[0], x[1])
    raise ConfigError(f"expected a number or [re, im], got {x!r}")


def dump_complex(z: complex):
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _coeff(x):
    """Scalar (number or [re, im]) or matrix (list of rows of scalars)."""
    if isinstance(x, list) and x and isinstance(x[0], list):
        return np.array([[parse_complex(e) for e in row] for row in x])
    return parse_complex(x)


def _dump_coeff(c):
    c = np.asarray(c)
    if c.ndim == 2:
        return [[dump_complex(e) for e in row] for row in c]
    return dump_complex(complex(c))


def parse_form(n: int, d, parity: str | None = None) -> ConstantForm:
    """Form from {"0,2": coeff} or [{"indices": [0, 2], "coefficient": coeff}]."""
    comps = {}
    if isinstance(d, list):
        items = [(tuple(int(i) for i in e["indices"]), e["coefficient"]) for e in d]
    else:
        items = [(tuple(int(s) for s in k.split(",") if s.strip() != ""), v) for k, v in (d or {}).items()]
    for idx, val in items:
        comps[idx] = _coeff(val)
    if parity is None:
        degs = {len(k) % 2 for k in comps}
        parity = "even" if degs == {0} else "odd"
    return ConstantForm(n, comps, parity)


def dump_form(f: ConstantForm) -> dict:
    return {",".join(str(i) for i in k): _dump_coeff(v) for k, v in f.components.items()}


@dataclass
class GeometryConfig:
    type: str
    gram: list | None = None
    tau: list | None = None
    area_scale: float = 1.0

    def build(self, char=(0.0, 0.0)):
        if self.type == "flat":
            return FlatTorus(np.array(self.gram, dtype=float))
        if self.type == "complex":
            return ComplexTorus(parse_complex(self.tau), self.area_scale, tuple(char))
        raise ConfigError(f"unknown geometry type {self.type!r}")


@dataclass
class ComplexConfig:
    geometry: str
    kind: str
    char: list = field(default_factory=list)
    flux: dict | list = field(default_factory=dict)
    p: int = 0
    r0: int = 0
    r1: int = 0


@dataclass
class JobConfig:
    command: str
    spec: str = ""
    output: str = ""
    method: str = "auto"
    sweep: str = "metric"
    path: dict = field(default_factory=dict)
    samples: list = field(default_factory=list)
    relative: list = field(default_factory=list)
    generator: list = field(default_factory=list)
    tolerance: float = 1e-4


@dataclass
class Knobs:
    threads: int | None = None
    margin: float = 32.0
    ratio: float = 4.0
    samples: int = 24
    extra_order: int = 3
    tol: float = 1e-13

    def heat_settings(self) -> HeatSettings:
        return HeatSettings(self.margin, self.ratio, self.samples, self.extra_order, self.tol)


@dataclass
class RunConfig:
    geometries: dict = field(default_factory=dict)
    complexes: dict = field(default_factory=dict)
    jobs: list = field(default_factory=list)
    suites: list = field(default_factory=list)
    knobs: Knobs = field(default_factory=Knobs)

    # ---- serialization
    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            geos = {k: GeometryConfig(**v) for k, v in d.get("geometries", {}).items()}
            cxs = {k: ComplexConfig(**v) for k, v in d.get("complexes", {}).items()}
            jobs = [JobConfig(**j) for j in d.get("jobs", [])]
            knobs = Knobs(**d.get("knobs", {}))
        except TypeError as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        cfg = cls(geos, cxs, jobs, list(d.get("suites", [])), knobs)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {
            "geometries": {k: asdict(v) for k, v in self.geometries.items()},
            "complexes": {k: asdict(v) for k, v in self.complexes.items()},
            "jobs": [asdict(j) for j in self.jobs],
            "suites": list(self.suites),
            "knobs": asdict(self.knobs),
        }

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # ---- validation and construction
    def validate(self) -> None:
        for name, c in self.complexes.items():
            if c.geometry not in self.geometries:
                raise ConfigError(f"complex {name!r} references unknown geometry {c.geometry!r}")
            if c.kind not in ("de-rham", "dolbeault", "superconnection"):
                raise ConfigError(f"complex {name!r}: unknown kind {c.kind!r}")
        for j in self.jobs:
            if j.command not in ("compute", "sweep"):
                raise ConfigError(f"unknown job command {j.command!r}")
            if j.spec not in self.complexes:
                raise ConfigError(f"job references unknown complex {j.spec!r}")
            if not j.tolerance > 0:
                raise ConfigError("tolerances must be positive")
        if self.knobs.threads is not None and self.knobs.threads < 1:
            raise ConfigError("threads must be positive")

    def geometry(self, name: str, char=(0.0, 0.0)):
        try:
            return self.geometries[name].build(char)
        except (GeometryError, ValueError) as exc:
            raise ConfigError(f"geometry {name!r}: {exc}") from exc

    def spec(self, name: str) -> ComplexSpec:
        c = self.complexes[name]
        try:
            if c.kind == "dolbeault":
                geom = self.geometry(c.geometry, tuple(c.char) or (0.0, 0.0))
                flux = parse_form(1, c.flux, "odd") if c.flux else None
                return ComplexSpec(TwistedDolbeault(c.p, flux), geom, name=name)
            geom = self.geometry(c.geometry)
            n = geom.n
            char = Character(tuple(c.char) if c.char else (0.0,) * n)
            if c.kind == "de-rham":
                return ComplexSpec(TwistedDeRham(parse_form(n, c.flux, "odd")), geom, char, name)
            form = parse_form(n, c.flux, "odd")
            return ComplexSpec(SuperconnectionData(c.r0, c.r1, form), geom, char, name)
        except ConfigError:
            raise
        except (GeometryError, ValueError) as exc:
            raise ConfigError(f"complex {name!r}: {exc}") from exc

    def path(self, job: JobConfig, spec: ComplexSpec) -> MetricPath:
        p = dict(job.path)
        kind = p.pop("kind", "conformal")
        try:
            return MetricPath(spec.geometry, kind, p.get("params", {}))
        except (GeometryError, ValueError) as exc:
            raise ConfigError(f"path: {exc}") from exc


def load(path: str) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return RunConfig.loads(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
