"""Sparse-grid PSP campaigns: node solves, projection, statistics, validation.

A campaign evaluates a payload function at every node of the Smolyak grid,
projects each payload entry onto the chaos basis of the grid and derives
moment, covariance and Sobol fields. The payload is the final-time DOF
vector ``[u1 (P2 nodes), u2 (P2 nodes), p (vertices)]`` of the Biot solver,
or any user callable (``evaluator``) for stub studies.

Campaign config (JSON)::

    {
      "scenario": {"scenario": "injection", "mesh": {"n": 16}},   # or a path
      "model": "validation",              # builtin name or a model mapping
      "level": 3,
      "validation": {"samples": 500, "seed": 0},
      "convergence_levels": [1, 2, 3],
      "output_dir": "out/injection",
      "workers": 4,
      "sensitivity_output": "p",
      "deformation_scale": 1.0,
      "all_times": false,
      "korn_constant": 1.0
    }
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .basis import (ChaosExpansion, expansion_covariance, expansion_mean, expansion_variance,
                    read_modes_csv, sobol_partial_variance, write_modes_csv)
from .coefficients import BUILTIN_MODELS, UncertaintyModel, sample_params
from .fem.io import write_field_csv, write_vtk
from .fem.scenarios import ScenarioTemplate, scenario_from_config
from .quadrature import SparseGrid, lhs_samples, psp_project, smolyak_grid

log = logging.getLogger(__name__)

FIELDS = ("u1", "u2", "p")
COVARIANCE_PAIRS = (("u1", "u2"), ("u1", "p"), ("u2", "p"))


class CampaignError(RuntimeError):
    pass


@dataclass
class CampaignConfig:
    scenario: dict | str | None = None
    model: dict | str = "validation"
    level: int = 2
    validation_samples: int = 500
    seed: int = 0
    output_dir: str = "out"
    workers: int = 1
    sensitivity_output: str = "p"
    deformation_scale: float = 1.0
    all_times: bool = False
    korn_constant: float = 1.0
    convergence_levels: tuple[int, ...] = (1, 2, 3)
    base_dir: str = "."

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be >= 0")
        if self.validation_samples < 1:
            raise ValueError("validation sample count must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.sensitivity_output not in FIELDS:
            raise ValueError(f"sensitivity_output must be one of {FIELDS}")

    @classmethod
    def from_dict(cls, cfg: dict, base_dir: str | Path = ".") -> "CampaignConfig":
        val = cfg.get("validation", {})
        known = {"scenario", "model", "level", "validation", "output_dir", "workers",
                 "sensitivity_output", "deformation_scale", "all_times", "korn_constant",
                 "convergence_levels"}
        unknown = set(cfg) - known
        if unknown:
            raise ValueError(f"unknown campaign config keys: {sorted(unknown)}")
        return cls(scenario=cfg.get("scenario"), model=cfg.get("model", "validation"),
                   level=int(cfg.get("level", 2)),
                   validation_samples=int(val.get("samples", 500)), seed=int(val.get("seed", 0)),
                   output_dir=cfg.get("output_dir", "out"), workers=int(cfg.get("workers", 1)),
                   sensitivity_output=cfg.get("sensitivity_output", "p"),
                   deformation_scale=float(cfg.get("deformation_scale", 1.0)),
                   all_times=bool(cfg.get("all_times", False)),
                   korn_constant=float(cfg.get("korn_constant", 1.0)),
                   convergence_levels=tuple(cfg.get("convergence_levels", (1, 2, 3))),
                   base_dir=str(base_dir))

    @classmethod
    def from_file(cls, path) -> "CampaignConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def uncertainty_model(self) -> UncertaintyModel:
        if isinstance(self.model, str):
            if self.model not in BUILTIN_MODELS:
                raise ValueError(f"unknown model {self.model!r}; choose from {sorted(BUILTIN_MODELS)}")
            return BUILTIN_MODELS[self.model]()
        return UncertaintyModel.from_dict(self.model)

    def template(self) -> ScenarioTemplate:
        if self.scenario is None:
            raise ValueError("campaign config has no scenario")
        if isinstance(self.scenario, str):
            return scenario_from_config(Path(self.base_dir) / self.scenario)
        return scenario_from_config(self.scenario, base=Path(self.base_dir))


@dataclass(frozen=True)
class FieldLayout:
    """Positions of u1, u2 and p inside a payload vector."""
    n_nodes: int       # P2 nodes per displacement component
    n_vertices: int
    n_times: int = 1

    @property
    def size(self) -> int:
        return 2 * self.n_nodes + self.n_vertices

    def slice(self, name: str, time_index: int = -1) -> slice:
        off = (time_index % self.n_times) * self.size
        if name == "u1":
            return slice(off, off + self.n_nodes)
        if name == "u2":
            return slice(off + self.n_nodes, off + 2 * self.n_nodes)
        if name == "p":
            return slice(off + 2 * self.n_nodes, off + self.size)
        raise ValueError(f"unknown field {name!r}")

    def vertex_slice(self, name: str, time_index: int = -1) -> slice:
        s = self.slice(name, time_index)
        return slice(s.start, s.start + self.n_vertices)


@dataclass(frozen=True, eq=False)
class FieldEvaluator:
    """Picklable payload function: coefficients at xi -> Biot solve -> DOF vector."""
    template: ScenarioTemplate
    model: UncertaintyModel
    all_times: bool = False

    def layout(self) -> FieldLayout:
        from .fem.elements import DofMap
        dm = DofMap.build(self.template.mesh)
        n_times = self.template.n_steps + 1 if self.all_times else 1
        return FieldLayout(dm.n_nodes, dm.n_p, n_times)

    def __call__(self, xi) -> np.ndarray:
        states = self.template.solve(sample_params(xi, self.model))
        if self.all_times:
            return np.concatenate([s.payload() for s in states])
        return states[-1].payload()


class _Guarded:
    def __init__(self, fn):
        self.fn = fn

    def __call__(self, xi):
        try:
            return True, np.asarray(self.fn(np.asarray(xi, dtype=float)), dtype=float)
        except Exception as exc:  # reported with the node by the caller
            return False, f"{type(exc).__name__}: {exc}"


def evaluate_points(fn: Callable, points: np.ndarray, workers: int = 1) -> list[tuple[bool, object]]:
    """Evaluate ``fn`` at each row of ``points``; results come back in row order."""
    guarded = _Guarded(fn)
    if workers <= 1 or len(points) <= 1:
        return [guarded(x) for x in points]
    chunk = max(1, len(points) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(guarded, list(points), chunksize=chunk))


def node_payloads(grid: SparseGrid, fn: Callable, workers: int = 1) -> np.ndarray:
    """All node payloads stacked in canonical node order; aborts on any failure."""
    results = evaluate_points(fn, grid.nodes, workers)
    for q, (ok, val) in enumerate(results):
        if not ok:
            raise CampaignError(f"solve failed at node {q} (xi = {grid.nodes[q].tolist()}): {val}")
    return np.stack([val for _, val in results])


@dataclass
class CampaignResult:
    level: int
    grid: SparseGrid
    expansion: ChaosExpansion
    layout: FieldLayout | None = None
    template: ScenarioTemplate | None = None
    statistics: dict[str, np.ndarray] = field(default_factory=dict)
    sensitivity: dict | None = None
    mse: dict | None = None
    convergence: list[dict] | None = None
    manifest: dict = field(default_factory=dict)

    def field_expansion(self, name: str, time_index: int = -1) -> ChaosExpansion:
        if self.layout is None:
            raise ValueError("payload has no field layout")
        return self.expansion.component(self.layout.slice(name, time_index))

    def vertex_expansion(self, name: str, time_index: int = -1) -> ChaosExpansion:
        return self.expansion.component(self.layout.vertex_slice(name, time_index))


def field_statistics(result: CampaignResult) -> dict[str, np.ndarray]:
    """Mean and variance of every DOF plus the three vertex covariance fields."""
    e = result.expansion
    stats = {"mean": np.asarray(expansion_mean(e)), "variance": np.asarray(expansion_variance(e))}
    if result.layout is None:
        return stats
    for name in FIELDS:
        sl = result.layout.slice(name)
        stats[f"mean_{name}"] = stats["mean"][sl]
        stats[f"var_{name}"] = stats["variance"][sl]
    for a, b in COVARIANCE_PAIRS:
        stats[f"cov_{a}_{b}"] = np.asarray(expansion_covariance(result.vertex_expansion(a),
                                                                result.vertex_expansion(b)))
    return stats


def sensitivity_report(expansion: ChaosExpansion) -> dict[str, np.ndarray]:
    """First/total partial variances per canonical variable, per payload entry.

    ``first`` and ``total`` have shape (N, ...); ``sum_first`` and
    ``sum_total`` bracket ``variance`` from below and above.
    """
    N = expansion.dimension
    first = np.array([sobol_partial_variance(expansion, i, "first") for i in range(1, N + 1)])
    total = np.array([sobol_partial_variance(expansion, i, "total") for i in range(1, N + 1)])
    var = np.asarray(expansion_variance(expansion))
    return {"first": first, "total": total, "variance": var,
            "sum_first": first.sum(axis=0), "sum_total": total.sum(axis=0)}


def run_campaign(config: CampaignConfig, evaluator: Callable | None = None,
                 model: UncertaintyModel | None = None, write: bool = True) -> CampaignResult:
    """Grid, node solves, PSP projection and statistics; artifacts when ``write``."""
    model = model or config.uncertainty_model()
    template = layout = None
    if evaluator is None:
        template = config.template()
        evaluator = FieldEvaluator(template, model, config.all_times)
        layout = evaluator.layout()
    grid = smolyak_grid(model.dimension, config.level)
    log.info("level %d grid: %d nodes, %d modes", config.level, grid.n_nodes, len(grid.indices))
    Y = node_payloads(grid, evaluator, config.workers)
    expansion = psp_project(grid, Y)
    result = CampaignResult(config.level, grid, expansion, layout, template)
    result.statistics = field_statistics(result)
    if layout is not None:
        result.sensitivity = sensitivity_report(result.field_expansion(config.sensitivity_output))
    else:
        result.sensitivity = sensitivity_report(expansion)
    result.manifest = {
        "level": config.level, "dimension": model.dimension, "n_nodes": grid.n_nodes,
        "n_modes": len(grid.indices), "model": model.to_dict(),
        "scenario": template.name if template else "custom evaluator",
        "payload_size": int(Y.shape[1]) if Y.ndim == 2 else 1,
        "node_payload_digest": hashlib.sha256(np.ascontiguousarray(Y).tobytes()).hexdigest(),
    }
    if write:
        export_artifacts(result, config.output_dir, config.deformation_scale)
    return result


def l2_norms(mse: np.ndarray, layout: FieldLayout | None, template: ScenarioTemplate | None) -> dict:
    """L2(D) norms of MSE fields via the P2/P1 mass matrices; plain value for stubs."""
    if layout is None or template is None:
        v = np.atleast_1d(mse)
        return {"payload": float(np.sqrt(np.mean(v ** 2))) if v.size > 1 else float(v[0])}
    from .fem.assembly import assemble
    sys_ = assemble(template.mesh, 1.0, 1.0, 1.0, 0.0, 1.0)
    mu_, mp = sys_.mass_u, sys_.mass_p
    u = sum(mse[layout.slice(c)] @ (mu_ @ mse[layout.slice(c)]) for c in ("u1", "u2"))
    p = mse[layout.slice("p")] @ (mp @ mse[layout.slice("p")])
    return {"u": float(np.sqrt(u)), "p": float(np.sqrt(p))}


def validation_set(fn: Callable, dimension: int, count: int, seed: int, workers: int = 1):
    """LHS points and exact payloads; failed points are excluded and reported."""
    pts = lhs_samples(dimension, count, seed)
    res = evaluate_points(fn, pts, workers)
    keep = [i for i, (ok, _) in enumerate(res) if ok]
    excluded = [{"index": i, "xi": pts[i].tolist(), "error": res[i][1]}
                for i, (ok, _) in enumerate(res) if not ok]
    if not keep:
        raise CampaignError("every validation solve failed")
    Y = np.stack([res[i][1] for i in keep])
    return pts[keep], Y, excluded


def mse_field(expansion: ChaosExpansion, points: np.ndarray, exact: np.ndarray,
              layout: FieldLayout | None = None, template: ScenarioTemplate | None = None) -> dict:
    """Mean squared surrogate error per payload entry and its L2 norms."""
    approx = expansion(points)
    exact = exact.reshape(approx.shape)
    mse = np.mean((exact - approx) ** 2, axis=0)
    return {"mse": mse, "norms": l2_norms(mse, layout, template), "n_points": len(points)}


def validate(result: CampaignResult, config: CampaignConfig, evaluator: Callable | None = None,
             model: UncertaintyModel | None = None) -> dict:
    model = model or config.uncertainty_model()
    if evaluator is None:
        evaluator = FieldEvaluator(result.template, model, config.all_times)
    pts, Y, excluded = validation_set(evaluator, model.dimension, config.validation_samples,
                                      config.seed, config.workers)
    out = mse_field(result.expansion, pts, Y, result.layout, result.template)
    out["excluded"] = excluded
    result.mse = out
    result.manifest["validation"] = {"samples": config.validation_samples, "seed": config.seed,
                                     "excluded": len(excluded)}
    return out


def convergence_sweep(levels: Sequence[int], fn: Callable, dimension: int, n_star: int, seed: int,
                      workers: int = 1, layout: FieldLayout | None = None,
                      template: ScenarioTemplate | None = None) -> list[dict]:
    """MSE norms per level against one fixed LHS validation set.

    Grids are nested, so node payloads are cached by node key and each level
    only solves its new nodes.
    """
    pts, Y, excluded = validation_set(fn, dimension, n_star, seed, workers)
    cache: dict = {}
    rows = []
    for l in sorted(levels):
        grid = smolyak_grid(dimension, l)
        todo = [q for q, k in enumerate(grid.node_keys) if k not in cache]
        if todo:
            res = evaluate_points(fn, grid.nodes[todo], workers)
            for q, (ok, val) in zip(todo, res):
                if not ok:
                    raise CampaignError(f"solve failed at node {q} (xi = {grid.nodes[q].tolist()}): {val}")
                cache[grid.node_keys[q]] = val
        Yq = np.stack([cache[k] for k in grid.node_keys])
        e = psp_project(grid, Yq)
        m = mse_field(e, pts, Y, layout, template)
        rows.append({"level": l, "n_nodes": grid.n_nodes, **{f"mse_{k}": v for k, v in m["norms"].items()}})
    if excluded:
        log.warning("%d validation points excluded", len(excluded))
    return rows


# artifacts ---------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def export_artifacts(result: CampaignResult, directory, deformation_scale: float = 1.0) -> dict:
    """Write mode tables, field files, tables and a manifest; returns the manifest."""
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CampaignError(f"cannot create output directory {out}: {exc}") from exc
    files = []

    def path(name):
        files.append(name)
        return out / name

    try:
        if result.layout is None:
            write_modes_csv(result.expansion, path("modes_payload.csv"))
        else:
            for name in FIELDS:
                write_modes_csv(result.field_expansion(name), path(f"modes_{name}.csv"))
            _write_field_files(result, out, path, deformation_scale)
        if result.convergence:
            _write_convergence(result.convergence, path("convergence.csv"))
        manifest = dict(result.manifest)
        manifest["files"] = {name: _sha256(out / name) for name in files}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise CampaignError(f"writing artifacts to {out} failed: {exc}") from exc
    result.manifest = manifest
    return manifest


def _write_field_files(result: CampaignResult, out: Path, path, scale: float) -> None:
    tpl, lay, st = result.template, result.layout, result.statistics
    mesh = tpl.mesh
    nv = lay.n_vertices
    vert = lambda name: st[f"mean_{name}"][:nv] if name != "p" else st["mean_p"]
    disp = np.column_stack([vert("u1"), vert("u2")])
    data = {}
    for name in FIELDS:
        data[f"mean_{name}"] = st[f"mean_{name}"][:nv]
        data[f"var_{name}"] = st[f"var_{name}"][:nv]
    for a, b in COVARIANCE_PAIRS:
        data[f"cov_{a}_{b}"] = st[f"cov_{a}_{b}"]
    write_vtk(path("statistics.vtk"), mesh, data, displacement=disp, scale=scale,
              title=f"{tpl.name} level {result.level} statistics")
    write_field_csv(path("mean.csv"), mesh, data["mean_u1"], data["mean_u2"], data["mean_p"])
    write_field_csv(path("variance.csv"), mesh, data["var_u1"], data["var_u2"], data["var_p"])
    if result.sensitivity is not None:
        s = result.sensitivity
        sel = slice(0, nv)
        sens = {f"first_{i + 1}": s["first"][i][sel] for i in range(len(s["first"]))}
        sens.update({f"total_{i + 1}": s["total"][i][sel] for i in range(len(s["total"]))})
        sens.update({"sum_first": s["sum_first"][sel], "variance": s["variance"][sel],
                     "sum_total": s["sum_total"][sel]})
        write_vtk(path("sensitivity.vtk"), mesh, sens, displacement=disp, scale=scale,
                  title=f"{tpl.name} partial variances")
    if result.mse is not None:
        m = result.mse["mse"]
        write_vtk(path("mse.vtk"), mesh, {f"mse_{n}": m[lay.vertex_slice(n)] for n in FIELDS},
                  title=f"{tpl.name} level {result.level} mean squared error")


def _write_convergence(rows: list[dict], path: Path) -> None:
    keys = list(rows[0])
    lines = [",".join(keys)] + [",".join(repr(r[k]) for k in keys) for r in rows]
    path.write_text("\n".join(lines) + "\n")


def load_expansions(directory) -> dict[str, ChaosExpansion]:
    out = Path(directory)
    return {name: read_modes_csv(out / f"modes_{name}.csv", scalar=False) for name in FIELDS
            if (out / f"modes_{name}.csv").exists()}


def default_workers() -> int:
    return max(1, min(8, (os.cpu_count() or 1)))
