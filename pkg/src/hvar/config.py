"""Experiment configuration: JSON documents checked against a versioned schema."""
import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import jsonschema

from .errors import UsageError
from .expr import Expression
from .grid import DomainSpec
from .hgroup import GroupElement

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "config_schema",
           "SCHEMA_VERSION"]

SCHEMA_VERSION = "hvar/1"


class ConfigError(UsageError):
    pass


def config_schema():
    text = resources.files("hvar").joinpath("schemas/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    N: int
    domain: DomainSpec
    h: float
    ht: Optional[float] = None
    R_trunc: Optional[float] = None
    delta_sing: Optional[float] = None
    collar: Optional[int] = None
    collar_width: Optional[float] = None
    max_nodes: int = 50_000
    s: float = 0.5
    scale: float = 1.0
    data: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    suites: tuple = ("group", "commutator", "duality", "admissibility", "form")
    samples: int = 1000
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def expression(self, key, default):
        return Expression(self.data.get(key, default), self.N)

    def r_schedule(self):
        sched = self.solver.get("r_schedule", {})
        if isinstance(sched, list):
            return [float(r) for r in sched]
        base = sched.get("base", 0.5)
        k0, k1 = sched.get("k_min", 1), sched.get("k_max", 10)
        if k1 < k0:
            raise ConfigError("r_schedule: k_max must not be below k_min")
        return [base ** k for k in range(k0, k1 + 1)]


def _where(err):
    path = "/".join(str(p) for p in err.absolute_path)
    return f"/{path}" if path else "/"


def parse_config(doc):
    """Validate a decoded JSON document and build an ExperimentConfig."""
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    validator = jsonschema.Draft202012Validator(config_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"{_where(e)}: {e.message}")
    N = doc.get("N", 1)
    dom = doc["domain"]
    d = 2 * N + 1
    center = dom.get("center", [0.0] * d)
    if len(center) != d:
        raise ConfigError(f"/domain/center: expected {d} coordinates for N={N}")
    c = GroupElement.from_array(center)
    if dom["shape"] == "box":
        if "half_widths" not in dom or "radius" in dom:
            raise ConfigError("/domain: a box needs half_widths and no radius")
        hw = dom["half_widths"]
        if isinstance(hw, list) and len(hw) != d:
            raise ConfigError(f"/domain/half_widths: expected {d} values for N={N}")
        domain = DomainSpec("box", c, half_widths=tuple(hw) if isinstance(hw, list) else (hw,) * d)
    else:
        if "radius" not in dom or "half_widths" in dom:
            raise ConfigError("/domain: a koranyi_ball needs radius and no half_widths")
        domain = DomainSpec("koranyi_ball", c, radius=dom["radius"])
    g = doc["grid"]
    if "collar" in g and "collar_width" in g:
        raise ConfigError("/grid: give collar or collar_width, not both")
    ker = doc.get("kernel", {})
    solver = dict(doc.get("solver", {}))
    problem = doc["problem"]
    if problem == "mountain_pass":
        q = solver.get("q", 2.5)
        Q, s = 2 * N + 2, ker.get("s", 0.5)
        qs = 2.0 * Q / (Q - 2.0 * s)
        if not q < qs:
            raise ConfigError(f"/solver/q: {q} is not below the critical exponent {qs:.6g}")
    data = dict(doc.get("data", {}))
    for key, val in data.items():
        try:
            Expression(val, N)
        except UsageError as exc:
            raise ConfigError(f"/data/{key}: {exc}") from None
    return ExperimentConfig(
        problem=problem, N=N, domain=domain, h=g["h"], ht=g.get("ht"), R_trunc=g.get("R_trunc"),
        delta_sing=g.get("delta_sing"), collar=g.get("collar"), collar_width=g.get("collar_width"),
        max_nodes=g.get("max_nodes", 50_000), s=ker.get("s", 0.5), scale=ker.get("scale", 1.0),
        data=data, solver=solver,
        suites=tuple(doc.get("suites", ("group", "commutator", "duality", "admissibility", "form"))),
        samples=doc.get("samples", 1000), seed=doc.get("seed", 0), raw=doc)


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc)
