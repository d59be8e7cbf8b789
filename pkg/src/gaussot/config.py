"""Scenario files: parsing, validation and object construction.

A scenario is a TOML document::

    name = "gauss-1d.toy"
    dim = 1
    seed = 0

    [quadrature]
    order = 60                  # optional, per-dimension default otherwise

    [potentials.V]
    kind = "zero"

    [potentials.W]
    kind = "gaussian"
    mean = [0.0]
    cov = [[2.0]]

    [maps.T]
    source = "V"
    target = "W"
    solver = "gaussian"         # gaussian | quantile | product | entropic

    [[verify]]
    tag = "thm24"
    map = "T"
    c = 0.5

    [output]
    dir = "out"                 # optional

Potentials use the literal format of :func:`gaussot.potentials.from_literal`
and are normalized against ``gamma`` unless ``normalize = false``.
Verification tags: ``thm21``, ``cor22``, ``thm23``, ``thm24``, ``thm25``,
``thm26``, ``thm29``, ``talagrand``, ``poincare`` and ``ma-residual``.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import ConfigError
from .potentials import from_literal, normalize
from .quadrature import default_order, gauss_hermite

__all__ = ["Scenario", "VerifySpec", "MapSpec", "load_scenario", "parse_scenario", "TAGS"]

TWO_MAP_TAGS = {"thm21", "cor22", "thm26", "thm29"}
ONE_MAP_TAGS = {"thm23", "thm24", "thm25", "talagrand", "ma-residual"}
TAGS = tuple(sorted(TWO_MAP_TAGS | ONE_MAP_TAGS | {"poincare"}))
NEEDS_C = {"thm24", "thm25", "thm26", "thm29", "poincare"}
NEEDS_P = {"thm25", "thm26", "thm29"}
SOLVERS = ("gaussian", "quantile", "product", "entropic")
VERIFY_KEYS = {"tag", "id", "map", "maps", "potential", "c", "p", "floor", "tolerance", "radius", "points"}


@dataclass(frozen=True)
class MapSpec:
    name: str
    source: str
    target: str
    solver: str
    component: str = "quantile"
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VerifySpec:
    id: str
    tag: str
    maps: tuple = ()
    potential: str | None = None
    c: float | None = None
    p: float | None = None
    floor: float | None = None
    tolerance: float | None = None
    radius: float = 3.0
    points: int | None = None


@dataclass
class Scenario:
    name: str
    dim: int
    seed: int
    quad_order: int
    potentials: dict
    maps: dict
    verify: list
    raw: dict
    output_dir: str | None = None
    sweep: dict = field(default_factory=dict)
    tower: dict = field(default_factory=dict)

    def rule(self):
        return gauss_hermite(self.dim, self.quad_order)

    def echo(self):
        out = copy.deepcopy(self.raw)
        out["seed"] = self.seed
        out.setdefault("quadrature", {})["order"] = self.quad_order
        return out


def _num(value, where, integer=False):
    ok = isinstance(value, int) if integer else isinstance(value, (int, float))
    if isinstance(value, bool) or not ok:
        kind = "an integer" if integer else "a number"
        raise ConfigError(f"must be {kind}, got {value!r}", where)
    return int(value) if integer else float(value)


def _str(value, where):
    if not isinstance(value, str) or not value:
        raise ConfigError(f"must be a non-empty string, got {value!r}", where)
    return value


def _parse_verify(i, entry, maps, potentials):
    where = f"verify[{i}]"
    if not isinstance(entry, dict):
        raise ConfigError("must be a table", where)
    unknown = sorted(set(entry) - VERIFY_KEYS)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r}", where)
    tag = _str(entry.get("tag"), f"{where}.tag")
    if tag not in TAGS:
        raise ConfigError(f"unknown tag {tag!r}; expected one of {', '.join(TAGS)}", f"{where}.tag")
    vid = _str(entry.get("id", tag), f"{where}.id")

    names = entry.get("maps")
    if names is None and "map" in entry:
        names = [entry["map"]]
    if names is None:
        names = [next(iter(maps))] if maps and tag != "poincare" else []
    if isinstance(names, str):
        names = [names]
    need = 2 if tag in TWO_MAP_TAGS else (1 if tag in ONE_MAP_TAGS else 0)
    if len(names) != need:
        raise ConfigError(f"{tag} needs {need} map(s), got {len(names)}", f"{where}.maps")
    for n in names:
        if n not in maps:
            raise ConfigError(f"unknown map {n!r}", f"{where}.maps")

    potential = entry.get("potential")
    if tag == "poincare":
        if potential is None:
            if not maps:
                raise ConfigError("poincare needs a potential", f"{where}.potential")
            potential = next(iter(maps.values())).target
        if potential not in potentials:
            raise ConfigError(f"unknown potential {potential!r}", f"{where}.potential")

    c = entry.get("c")
    if c is not None:
        c = _num(c, f"{where}.c")
    if tag in NEEDS_C:
        if c is None:
            raise ConfigError(f"{tag} requires c", f"{where}.c")
        if not 0.0 <= c < 1.0:
            raise ConfigError(f"must lie in [0, 1), got {c:g}", f"{where}.c")
    if tag == "cor22":
        if c is None or not c > 0:
            raise ConfigError(f"cor22 requires c > 0, got {c}", f"{where}.c")
    p = entry.get("p")
    if p is not None:
        p = _num(p, f"{where}.p")
    if tag in NEEDS_P:
        p = 1.0 if p is None else p
        if not 1.0 <= p < 2.0:
            raise ConfigError(f"must lie in [1, 2), got {p:g}", f"{where}.p")
    floor = None if entry.get("floor") is None else _num(entry["floor"], f"{where}.floor")
    tol = None if entry.get("tolerance") is None else _num(entry["tolerance"], f"{where}.tolerance")
    radius = _num(entry.get("radius", 3.0), f"{where}.radius")
    points = None if entry.get("points") is None else _num(entry["points"], f"{where}.points", integer=True)
    return VerifySpec(vid, tag, tuple(names), potential, c, p, floor, tol, radius, points)


def parse_scenario(data, seed=None, quad_order=None) -> Scenario:
    """Validate a parsed TOML mapping; CLI overrides take precedence."""
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a table")
    name = _str(data.get("name"), "name")
    dim = _num(data.get("dim"), "dim", integer=True)
    if not 1 <= dim <= 4:
        raise ConfigError(f"must lie in 1..4, got {dim}", "dim")
    seed = _num(data.get("seed", 0) if seed is None else seed, "seed", integer=True)
    quad = data.get("quadrature", {})
    order = quad_order if quad_order is not None else quad.get("order", default_order(dim))
    order = _num(order, "quadrature.order", integer=True)
    if order < 2:
        raise ConfigError(f"must be >= 2, got {order}", "quadrature.order")
    try:
        q = gauss_hermite(dim, order)
    except Exception as exc:
        raise ConfigError(str(exc), "quadrature.order") from exc

    potentials = {}
    for pname, lit in (data.get("potentials") or {}).items():
        where = f"potentials.{pname}"
        if not isinstance(lit, dict):
            raise ConfigError("must be a table", where)
        lit = dict(lit)
        norm = lit.pop("normalize", True)
        try:
            pot = from_literal(lit)
        except Exception as exc:
            raise ConfigError(str(exc), where) from exc
        if pot.dim != dim:
            raise ConfigError(f"has dim {pot.dim}, scenario dim is {dim}", where)
        potentials[pname] = normalize(pot, q) if norm else pot

    maps = {}
    for mname, m in (data.get("maps") or {}).items():
        where = f"maps.{mname}"
        if not isinstance(m, dict):
            raise ConfigError("must be a table", where)
        for key in ("source", "target"):
            ref = _str(m.get(key), f"{where}.{key}")
            if ref not in potentials:
                raise ConfigError(f"unknown potential {ref!r}", f"{where}.{key}")
        solver = m.get("solver", "gaussian")
        if solver not in SOLVERS:
            raise ConfigError(f"unknown solver {solver!r}; expected one of {', '.join(SOLVERS)}", f"{where}.solver")
        component = m.get("component", "quantile")
        if component not in ("quantile", "gaussian"):
            raise ConfigError(f"unknown component solver {component!r}", f"{where}.component")
        options = m.get("options", {})
        if not isinstance(options, dict):
            raise ConfigError("must be a table", f"{where}.options")
        maps[mname] = MapSpec(mname, m["source"], m["target"], solver, component, dict(options))

    entries = data.get("verify", [])
    if not isinstance(entries, list):
        raise ConfigError("must be an array of tables", "verify")
    verify = [_parse_verify(i, e, maps, potentials) for i, e in enumerate(entries)]
    seen = set()
    for i, v in enumerate(verify):
        if v.id in seen:
            raise ConfigError(f"duplicate verification id {v.id!r}", f"verify[{i}].id")
        seen.add(v.id)

    out = data.get("output", {})
    out_dir = out.get("dir") if isinstance(out, dict) else None
    return Scenario(name, dim, seed, order, potentials, maps, verify, copy.deepcopy(data), out_dir,
                    dict(data.get("sweep", {})), dict(data.get("tower", {})))


def load_scenario(path, seed=None, quad_order=None) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}", "scenario") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}", "scenario") from exc
    return parse_scenario(data, seed=seed, quad_order=quad_order)
