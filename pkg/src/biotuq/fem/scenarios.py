"""The three reference problems and JSON scenario configs.

A :class:`ScenarioTemplate` holds everything except the coefficients. All
data are constants so templates pickle cleanly for process pools, and
``template.build(sample)`` gives the deterministic problem for one sample.

Config layout (JSON)::

    {
      "scenario": "injection",            # builtin defaults, optional
      "mesh": {"n": 16, "pattern": "slash"} | {"path": "mesh.txt"},
      "time": {"t_final": 1.0, "n_steps": 10},
      "displacement_bcs": [{"tags": ["left", "right"], "components": [1], "value": 0.0}],
      "pressure_bcs": [{"tags": ["bottom"], "value": 0.0}],
      "tractions": [{"tags": ["load"], "value": [0.0, -5.0]}],
      "point_sources": [{"x": [0.25, 0.25], "magnitude": 10.0}]
    }

Keys given in the config replace the builtin ones.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ..coefficients import PoroelasticSample
from .mesh import MeshError, TriMesh, rectangle_mesh, unit_square_mesh
from .solver import BiotScenario, BiotSolver, DisplacementBC, PressureBC, Traction

SIDES = ("bottom", "right", "top", "left")
DEFAULT_HOLES = ((0.9, 1.1, 0.4, 0.6), (2.9, 3.1, 0.4, 0.6))


@dataclass(frozen=True, eq=False)
class ScenarioTemplate:
    name: str
    mesh: TriMesh
    t_final: float
    n_steps: int
    displacement_bcs: tuple[DisplacementBC, ...] = ()
    pressure_bcs: tuple[PressureBC, ...] = ()
    tractions: tuple[Traction, ...] = ()
    point_sources: tuple = ()
    zero_mean_pressure: bool = False
    fix_rigid_motions: bool = False
    units: str = ""

    def build(self, sample: PoroelasticSample) -> BiotScenario:
        return BiotScenario(
            mesh=self.mesh, sample=sample, t_final=self.t_final, n_steps=self.n_steps,
            displacement_bcs=self.displacement_bcs, pressure_bcs=self.pressure_bcs,
            tractions=self.tractions, point_sources=self.point_sources,
            zero_mean_pressure=self.zero_mean_pressure,
            fix_rigid_motions=self.fix_rigid_motions, name=self.name)

    def solve(self, sample: PoroelasticSample):
        return BiotSolver(self.build(sample)).run()


def injection(n: int = 16, pattern: str = "slash", x0=(0.25, 0.25), magnitude: float = 10.0,
              t_final: float = 1.0, n_steps: int = 10) -> ScenarioTemplate:
    """Point injection in the unit square.

    Tangential displacement, normal stress derivative and pressure vanish on
    the boundary. On axis-aligned sides the zero normal derivative of the
    normal displacement is the natural condition once ``u.t = 0`` and
    ``p = 0`` are imposed, so only the tangential components are fixed.
    """
    mesh = unit_square_mesh(n, pattern)
    return ScenarioTemplate(
        "injection", mesh, t_final, n_steps,
        displacement_bcs=(DisplacementBC(("left", "right"), (1,), 0.0),
                          DisplacementBC(("bottom", "top"), (0,), 0.0)),
        pressure_bcs=(PressureBC(SIDES, 0.0),),
        point_sources=((tuple(map(float, x0)), float(magnitude)),),
        units="kPa-m-s")


def footing(n: int = 20, pattern: str = "slash", load=(0.3, 0.7), traction=(0.0, -5.0),
            t_final: float = 0.2, n_steps: int = 2) -> ScenarioTemplate:
    """Strip load on the top of a drained unit square clamped on three sides."""
    lo, hi = load
    tol = 1e-9

    def tagger(m):
        xm, ym = m
        if abs(ym - 1.0) < tol:
            return "load" if lo - tol <= xm <= hi + tol else "top"
        if abs(ym) < tol:
            return "bottom"
        return "left" if abs(xm) < tol else "right"

    mesh = unit_square_mesh(n, pattern, tagger=tagger)
    loaded = mesh.edges_with_tag("load")
    xs = mesh.vertices[loaded][..., 0]
    if len(loaded) == 0 or not (np.isclose(xs.min(), lo) and np.isclose(xs.max(), hi)):
        raise MeshError(f"load ends {load} do not sit on mesh vertices for n={n}")
    return ScenarioTemplate(
        "footing", mesh, t_final, n_steps,
        displacement_bcs=(DisplacementBC(("bottom", "left", "right"), (0, 1), 0.0),),
        pressure_bcs=(PressureBC(("bottom", "left", "right", "top", "load"), 0.0),),
        tractions=(Traction(("load",), tuple(map(float, traction))),),
        units="kPa-m-s")


def injection_extraction(nx: int = 40, ny: int = 10, holes=DEFAULT_HOLES,
                         pressures=(-1e-4, 1e-4), t_final: float = 1.0,
                         n_steps: int = 10) -> ScenarioTemplate:
    """Two wells in a 4 km x 1 km layer, pressures in GPa, time in days.

    The mesh is mirror-symmetric about x1 = 2. Bottom and well walls are
    clamped, lateral sides are on rollers, the top is free. Only the wells
    drain.
    """
    mesh = rectangle_mesh(0.0, 4.0, 0.0, 1.0, nx, ny, pattern="mirror", holes=holes)
    hole_tags = tuple(f"hole{i + 1}" for i in range(len(holes)))
    return ScenarioTemplate(
        "injection_extraction", mesh, t_final, n_steps,
        displacement_bcs=(DisplacementBC(("left", "right"), (0,), 0.0),
                          DisplacementBC(("bottom",) + hole_tags, (0, 1), 0.0)),
        pressure_bcs=tuple(PressureBC((tag,), float(p)) for tag, p in zip(hole_tags, pressures)),
        units="GPa-km-day")


def superposed_injection_extraction(template: ScenarioTemplate, sample: PoroelasticSample):
    """Solve the two unit-pressure problems once; return a synthesizer.

    The model is linear and every other datum vanishes, so the solution for
    well pressures ``(p1, p2)`` is ``p1 * S1 + p2 * S2``.
    """
    units = []
    for k in range(len(template.pressure_bcs)):
        bcs = tuple(PressureBC(bc.tags, 1.0 if j == k else 0.0)
                    for j, bc in enumerate(template.pressure_bcs))
        units.append(replace(template, pressure_bcs=bcs).solve(sample)[-1])

    def synthesize(*pressures):
        u = sum(w * s.u for w, s in zip(pressures, units))
        p = sum(w * s.p for w, s in zip(pressures, units))
        return u, p
    return synthesize


BUILTIN_SCENARIOS = {"injection": injection, "footing": footing,
                     "injection_extraction": injection_extraction}


def _mesh_from_config(cfg: dict, base: Path) -> TriMesh:
    if "path" in cfg:
        return TriMesh.read(base / cfg["path"])
    if "x" in cfg:
        (x0, x1), (y0, y1) = cfg["x"], cfg["y"]
        return rectangle_mesh(x0, x1, y0, y1, cfg["nx"], cfg["ny"], cfg.get("pattern", "slash"),
                              holes=[tuple(h) for h in cfg.get("holes", [])])
    return unit_square_mesh(cfg["n"], cfg.get("pattern", "slash"))


def _value(v):
    return tuple(map(float, v)) if isinstance(v, (list, tuple)) else float(v)


def scenario_from_config(cfg: dict | str | Path, base: Path | None = None) -> ScenarioTemplate:
    """Build a template from a config dict or JSON file."""
    if not isinstance(cfg, dict):
        path = Path(cfg)
        base = path.parent if base is None else base
        cfg = json.loads(path.read_text())
    base = Path(".") if base is None else Path(base)
    name = cfg.get("scenario")
    if name is not None:
        if name not in BUILTIN_SCENARIOS:
            raise ValueError(f"unknown scenario {name!r}; choose from {sorted(BUILTIN_SCENARIOS)}")
        tpl = BUILTIN_SCENARIOS[name](**cfg.get("params", {}))
    elif "mesh" not in cfg:
        raise ValueError("config needs a builtin 'scenario' or a 'mesh'")
    else:
        tpl = None
    changes = {}
    if "mesh" in cfg:
        changes["mesh"] = _mesh_from_config(cfg["mesh"], base)
    time = cfg.get("time", {})
    if "t_final" in time:
        changes["t_final"] = float(time["t_final"])
    if "n_steps" in time:
        changes["n_steps"] = int(time["n_steps"])
    if "displacement_bcs" in cfg:
        changes["displacement_bcs"] = tuple(
            DisplacementBC(tuple(b["tags"]), tuple(b.get("components", (0, 1))),
                           _value(b.get("value", 0.0))) for b in cfg["displacement_bcs"])
    if "pressure_bcs" in cfg:
        changes["pressure_bcs"] = tuple(PressureBC(tuple(b["tags"]), _value(b.get("value", 0.0)))
                                        for b in cfg["pressure_bcs"])
    if "tractions" in cfg:
        changes["tractions"] = tuple(Traction(tuple(b["tags"]), _value(b["value"]))
                                     for b in cfg["tractions"])
    if "point_sources" in cfg:
        changes["point_sources"] = tuple((tuple(map(float, s["x"])), float(s["magnitude"]))
                                         for s in cfg["point_sources"])
    for flag in ("zero_mean_pressure", "fix_rigid_motions"):
        if flag in cfg:
            changes[flag] = bool(cfg[flag])
    if tpl is None:
        if "time" not in cfg or "t_final" not in time or "n_steps" not in time:
            raise ValueError("custom scenario needs time.t_final and time.n_steps")
        tpl = ScenarioTemplate(cfg.get("name", "custom"), changes.pop("mesh"),
                               changes.pop("t_final"), changes.pop("n_steps"))
    return replace(tpl, **changes)
