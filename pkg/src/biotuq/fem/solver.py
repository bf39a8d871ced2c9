"""Monolithic backward-Euler solver for the 2D linear Biot system.

Each step solves the symmetric indefinite system::

    [ A   B^T          ] [u]   [ F + T                 ]
    [ B   -(C + dt D)  ] [p] = [ -dt G - (C p_n - B u_n) ]

where ``C p - B u`` is the discrete fluid content. Dirichlet DOFs are
eliminated and set exactly; the reduced matrix is factorized once per run.
The initial state is the undrained response ``[A B^T; B -C]`` to the initial
fluid content and the loads at t = 0.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..coefficients import PoroelasticSample
from .assembly import (AssembledSystem, assemble, body_force_load, point_source_load,
                       scalar_load, traction_load)
from .mesh import TriMesh

Value = float | Sequence[float] | Callable


class SingularSystemError(RuntimeError):
    pass


@dataclass(frozen=True)
class DisplacementBC:
    """Prescribed displacement on tagged edges for the listed components."""
    tags: tuple[str, ...]
    components: tuple[int, ...] = (0, 1)
    value: Value = 0.0      # constant, (v1, v2), or callable (x, y, t) -> (v1, v2)


@dataclass(frozen=True)
class PressureBC:
    tags: tuple[str, ...]
    value: Value = 0.0      # constant or callable (x, y, t) -> p


@dataclass(frozen=True)
class Traction:
    tags: tuple[str, ...]
    value: Value = (0.0, 0.0)


@dataclass(eq=False)
class BiotScenario:
    mesh: TriMesh
    sample: PoroelasticSample
    t_final: float
    n_steps: int
    displacement_bcs: tuple[DisplacementBC, ...] = ()
    pressure_bcs: tuple[PressureBC, ...] = ()
    tractions: tuple[Traction, ...] = ()
    body_force: Callable | None = None          # (x, y, t) -> (fx, fy)
    fluid_source: Callable | None = None        # (x, y, t) -> g
    point_sources: tuple[tuple[tuple[float, float], float], ...] = ()
    initial_fluid_content: Callable | None = None   # (x, y) -> phi0
    zero_mean_pressure: bool = False
    fix_rigid_motions: bool = False
    name: str = "scenario"

    @property
    def dt(self) -> float:
        return self.t_final / self.n_steps

    def check(self) -> None:
        if self.n_steps < 1 or not self.t_final > 0:
            raise ValueError("need t_final > 0 and at least one step")
        tags = set(self.mesh.tags())
        for bc in (*self.displacement_bcs, *self.pressure_bcs, *self.tractions):
            missing = set(bc.tags) - tags
            if missing:
                raise ValueError(f"{self.name}: unknown boundary tag(s) {sorted(missing)}")

    def digest(self) -> str:
        """Short content hash identifying mesh, coefficients and data table."""
        h = hashlib.sha256()
        h.update(self.mesh.vertices.tobytes())
        h.update(self.mesh.triangles.tobytes())
        h.update("|".join(self.mesh.boundary_tags.tolist()).encode())
        s = self.sample
        h.update(json.dumps([self.name, s.mu, s.lam, s.alpha, s.kappa, s.c0,
                             self.t_final, self.n_steps, self.zero_mean_pressure,
                             self.fix_rigid_motions,
                             [repr(b) for b in (*self.displacement_bcs, *self.pressure_bcs,
                                                *self.tractions)],
                             [repr(p) for p in self.point_sources]]).encode())
        return h.hexdigest()[:16]


@dataclass
class FieldSolution:
    u: np.ndarray     # (2 * n_p2_nodes,) blocked by component
    p: np.ndarray     # (n_vertices,)
    t: float

    def u_component(self, c: int) -> np.ndarray:
        n = len(self.u) // 2
        return self.u[c * n:(c + 1) * n]

    def vertex_values(self, n_vertices: int) -> np.ndarray:
        """(n_vertices, 3) array of u1, u2, p at the mesh vertices."""
        return np.column_stack([self.u_component(0)[:n_vertices],
                                self.u_component(1)[:n_vertices], self.p])

    def payload(self) -> np.ndarray:
        return np.concatenate([self.u, self.p])


def _eval_value(value, x, y, t, ncomp):
    if callable(value):
        out = value(x, y, t)
    else:
        out = value
    if ncomp == 1:
        return np.broadcast_to(np.asarray(out, float), x.shape)
    return [np.broadcast_to(np.asarray(v, float), x.shape) for v in
            (out if np.ndim(out) or callable(value) else (out, out))]


@dataclass(eq=False)
class BiotSolver:
    """Owns the assembled operators, the factorization and the data evaluation."""
    scenario: BiotScenario
    system: AssembledSystem = field(init=False)

    def __post_init__(self):
        sc = self.scenario
        sc.check()
        s = sc.sample
        self.system = assemble(sc.mesh, s.mu, s.lam, s.alpha, s.c0, s.kappa)
        self._fixed, self._fixed_kind = self._constrained_dofs()
        self._constraints = self._multiplier_rows()
        self._lu_step = None
        self._lu_init = None
        self._groups = None

    # constraints ------------------------------------------------------------
    def _constrained_dofs(self):
        dm = self.system.dofmap
        kinds: dict[int, tuple] = {}
        for k, bc in enumerate(self.scenario.displacement_bcs):
            nodes = dm.p2_nodes_on(bc.tags)
            for c in bc.components:
                for n, d in zip(nodes, dm.u_dofs(c, nodes)):
                    kinds[int(d)] = ("u", k, c, int(n))
        for k, bc in enumerate(self.scenario.pressure_bcs):
            for v in self.scenario.mesh.vertices_with_tag(bc.tags):
                kinds[dm.n_u + int(v)] = ("p", k, 0, int(v))
        fixed = np.array(sorted(kinds), dtype=np.intp)
        return fixed, [kinds[i] for i in fixed]

    def dirichlet_values(self, t: float) -> np.ndarray:
        if self._groups is None:
            groups: dict[tuple, list] = {}
            for j, (kind, k, c, n) in enumerate(self._fixed_kind):
                groups.setdefault((kind, k, c), []).append((j, n))
            self._groups = [(key, np.array([j for j, _ in v]), np.array([n for _, n in v]))
                            for key, v in groups.items()]
        dm = self.system.dofmap
        vals = np.empty(len(self._fixed))
        for (kind, k, c), pos, nodes in self._groups:
            if kind == "u":
                x, y = dm.p2_nodes[nodes].T
                vals[pos] = _eval_value(self.scenario.displacement_bcs[k].value, x, y, t, 2)[c]
            else:
                x, y = self.scenario.mesh.vertices[nodes].T
                vals[pos] = _eval_value(self.scenario.pressure_bcs[k].value, x, y, t, 1)
        return vals

    def _multiplier_rows(self) -> list[np.ndarray]:
        """Extra constraint rows (zero-mean pressure, rigid motions)."""
        sys_ = self.system
        dm = sys_.dofmap
        n = sys_.n_u + sys_.n_p
        rows = []
        if self.scenario.fix_rigid_motions:
            ones_u = sys_.mass_u @ np.ones(dm.n_nodes)
            x_u = sys_.mass_u @ dm.p2_nodes[:, 0]
            y_u = sys_.mass_u @ dm.p2_nodes[:, 1]
            for r in ((ones_u, 0 * ones_u), (0 * ones_u, ones_u), (-y_u, x_u)):
                row = np.zeros(n)
                row[:sys_.n_u] = np.concatenate(r)
                rows.append(row)
        if self.scenario.zero_mean_pressure:
            row = np.zeros(n)
            row[sys_.n_u:] = sys_.mass_p @ np.ones(sys_.n_p)
            rows.append(row)
        return rows

    # matrices ---------------------------------------------------------------
    def _full_matrix(self, pressure_block) -> sp.csr_matrix:
        s = self.system
        K = sp.bmat([[s.A, s.B.T], [s.B, -pressure_block]], format="csr")
        if self._constraints:
            E = sp.csr_matrix(np.array(self._constraints))
            m = E.shape[0]
            K = sp.bmat([[K, E.T], [E, sp.csr_matrix((m, m))]], format="csr")
        return K

    def _factorize(self, K):
        free = np.setdiff1d(np.arange(K.shape[0]), self._fixed)
        Kff = K[free][:, free].tocsc()
        Kfc = K[free][:, self._fixed]
        try:
            lu = spla.splu(Kff)
        except RuntimeError as exc:
            raise SingularSystemError(self._singular_message(str(exc))) from exc
        piv = np.abs(lu.U.diagonal())
        if piv.size and piv.min() <= 1e-13 * piv.max():
            raise SingularSystemError(self._singular_message("vanishing pivot"))
        return lu, free, Kfc

    def _singular_message(self, why: str) -> str:
        sc = self.scenario
        return (f"singular Biot system for scenario {sc.name!r} (digest {sc.digest()}): {why}; "
                "check the boundary conditions (a pure-Neumann pressure problem with c0 = 0 "
                "needs the zero-mean constraint)")

    def _solve(self, factor, rhs, t):
        lu, free, Kfc = factor
        n = rhs.shape[0]
        x = np.zeros(n)
        xc = self.dirichlet_values(t)
        x[self._fixed] = xc
        x[free] = lu.solve(rhs[free] - Kfc @ xc)
        s = self.system
        return FieldSolution(x[:s.n_u].copy(), x[s.n_u:s.n_u + s.n_p].copy(), t)

    def _padded(self, top, bottom):
        return np.concatenate([top, bottom, np.zeros(len(self._constraints))])

    # data -------------------------------------------------------------------
    def mechanical_load(self, t: float) -> np.ndarray:
        sc, dm = self.scenario, self.system.dofmap
        out = np.zeros(self.system.n_u)
        if sc.body_force is not None:
            out += body_force_load(dm, sc.body_force, t)
        for tr in sc.tractions:
            out += traction_load(dm, tr.tags, tr.value, t)
        return out

    def fluid_load(self, t: float) -> np.ndarray:
        """Source vector ``int g q`` (point sources included) at time ``t``."""
        sc, dm = self.scenario, self.system.dofmap
        out = np.zeros(self.system.n_p)
        if sc.fluid_source is not None:
            out += scalar_load(dm, sc.fluid_source, t)
        for x0, mag in sc.point_sources:
            out += point_source_load(sc.mesh, x0, mag)
        return out

    def initial_content(self) -> np.ndarray:
        sc = self.scenario
        if sc.initial_fluid_content is None:
            return np.zeros(self.system.n_p)
        return scalar_load(self.system.dofmap, lambda x, y, t: sc.initial_fluid_content(x, y), 0.0)

    def fluid_content(self, state: FieldSolution) -> np.ndarray:
        return self.system.C @ state.p - self.system.B @ state.u

    # stepping ---------------------------------------------------------------
    def initial_state(self) -> FieldSolution:
        if self._lu_init is None:
            self._lu_init = self._factorize(self._full_matrix(self.system.C))
        rhs = self._padded(self.mechanical_load(0.0), -self.initial_content())
        return self._solve(self._lu_init, rhs, 0.0)

    def step(self, prev: FieldSolution, dt: float | None = None) -> FieldSolution:
        dt = self.scenario.dt if dt is None else dt
        if not dt > 0:
            raise ValueError("time step must be positive")
        if self._lu_step is None or self._lu_step[0] != dt:
            s = self.system
            self._lu_step = (dt, self._factorize(self._full_matrix(s.C + dt * s.D)))
        t = prev.t + dt
        rhs = self._padded(self.mechanical_load(t),
                           -dt * self.fluid_load(t) - self.fluid_content(prev))
        return self._solve(self._lu_step[1], rhs, t)

    def run(self) -> list[FieldSolution]:
        sc = self.scenario
        states = [self.initial_state()]
        for n in range(sc.n_steps):
            nxt = self.step(states[-1])
            nxt.t = (n + 1) * sc.dt   # avoid drift from repeated addition
            states.append(nxt)
        return states


def step(solver: BiotSolver, prev: FieldSolution, dt: float) -> FieldSolution:
    return solver.step(prev, dt)


def solve_transient(scenario: BiotScenario) -> list[FieldSolution]:
    """All states from the initial condition to ``t_final`` (n_steps + 1 entries)."""
    return BiotSolver(scenario).run()


def energy_diagnostic(solver: BiotSolver, states: Sequence[FieldSolution],
                      korn_constant: float = 1.0) -> dict:
    """Compare the energy integral with the a priori data bound.

    Left: ``sum dt [a(u,u) + c(p,p)]`` over the computed steps. Right:
    ``sum dt [C_K/(2 mu) |f|^2 + (K/alpha) |G|^2]`` with
    ``G(t) = int_0^t g + phi0`` measured in the discrete dual norm
    ``G^T M_p^{-1} G`` so point sources have a finite value. ``C_K`` is a
    configured surrogate, so the ratio is a monitoring number only.
    """
    sc, s = solver.scenario, solver.system
    sample = sc.sample
    Mp = spla.splu(s.mass_p.tocsc())
    Mu = spla.splu(s.mass_u.tocsc())
    nn = s.dofmap.n_nodes
    energy = data = 0.0
    G = solver.initial_content()
    t_prev = states[0].t
    for st in states[1:]:
        dt = st.t - t_prev
        energy += dt * (st.u @ (s.A @ st.u) + st.p @ (s.C @ st.p))
        G = G + dt * solver.fluid_load(st.t)
        f_norm2 = 0.0
        if sc.body_force is not None:
            fv = body_force_load(s.dofmap, sc.body_force, st.t)
            f_norm2 = sum(fv[c * nn:(c + 1) * nn] @ Mu.solve(fv[c * nn:(c + 1) * nn]) for c in (0, 1))
        data += dt * (korn_constant / (2 * sample.mu) * f_norm2
                      + sample.K / sample.alpha * (G @ Mp.solve(G)))
        t_prev = st.t
    return {"energy": float(energy), "data_bound": float(data),
            "ratio": float(energy / data) if data > 0 else float("nan"),
            "korn_constant": korn_constant}
