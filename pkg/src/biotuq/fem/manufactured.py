"""Manufactured solutions for verifying the Biot solver.

Given closed-form ``u(x, y, t)`` and ``p(x, y, t)`` the body force, fluid
source and initial fluid content are derived symbolically from the strong
form::

    f = -div(2 mu eps(u) + lambda div(u) I - alpha p I)
    g = d/dt (c0 p + alpha div u) - div(kappa grad p)

and the exact fields are imposed as Dirichlet data on the whole boundary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy

from ..coefficients import PoroelasticSample
from .elements import QUAD7_POINTS, QUAD7_WEIGHTS
from .mesh import TriMesh, unit_square_mesh
from .solver import BiotScenario, BiotSolver, DisplacementBC, FieldSolution, PressureBC

x, y, t = sympy.symbols("x y t", real=True)
ALL_SIDES = ("bottom", "right", "top", "left")


def _vectorize(expr, args):
    f = sympy.lambdify(args, expr, "numpy")

    def call(*a):
        return np.broadcast_to(np.asarray(f(*a), dtype=float), np.broadcast(*a).shape)
    return call


@dataclass
class ManufacturedSolution:
    u1: sympy.Expr
    u2: sympy.Expr
    p: sympy.Expr
    name: str = "manufactured"

    def callables(self, s: PoroelasticSample):
        mu, lam, alpha, c0, kappa = map(sympy.Float, (s.mu, s.lam, s.alpha, s.c0, s.kappa))
        u1, u2, p = self.u1, self.u2, self.p
        div = sympy.diff(u1, x) + sympy.diff(u2, y)
        exy = (sympy.diff(u1, y) + sympy.diff(u2, x)) / 2
        s11 = 2 * mu * sympy.diff(u1, x) + lam * div - alpha * p
        s22 = 2 * mu * sympy.diff(u2, y) + lam * div - alpha * p
        s12 = 2 * mu * exy
        f1 = -(sympy.diff(s11, x) + sympy.diff(s12, y))
        f2 = -(sympy.diff(s12, x) + sympy.diff(s22, y))
        content = c0 * p + alpha * div
        g = sympy.diff(content, t) - kappa * (sympy.diff(p, x, 2) + sympy.diff(p, y, 2))
        v = lambda e: _vectorize(sympy.simplify(e), (x, y, t))
        fu1, fu2, fp = v(u1), v(u2), v(p)
        ff1, ff2 = v(f1), v(f2)
        return {
            "u": lambda X, Y, T: (fu1(X, Y, T), fu2(X, Y, T)),
            "p": fp,
            "f": lambda X, Y, T: (ff1(X, Y, T), ff2(X, Y, T)),
            "g": v(g),
            "phi0": (lambda c: lambda X, Y: c(X, Y, 0.0))(v(content)),
        }

    def scenario(self, mesh: TriMesh, sample: PoroelasticSample, t_final: float,
                 n_steps: int) -> BiotScenario:
        fn = self.callables(sample)
        return BiotScenario(
            mesh=mesh, sample=sample, t_final=t_final, n_steps=n_steps,
            displacement_bcs=(DisplacementBC(ALL_SIDES, (0, 1), fn["u"]),),
            pressure_bcs=(PressureBC(ALL_SIDES, fn["p"]),),
            body_force=fn["f"], fluid_source=fn["g"],
            initial_fluid_content=fn["phi0"], name=self.name)


def l2_errors(solver: BiotSolver, state: FieldSolution, exact: dict) -> tuple[float, float]:
    """L2 errors of displacement (both components) and pressure at ``state.t``."""
    dm = solver.system.dofmap
    wts = QUAD7_WEIGHTS[None, :] * dm.mesh.areas()[:, None]
    xq = dm.quadrature_points()
    X, Y = xq[..., 0], xq[..., 1]
    ue = exact["u"](X, Y, state.t)
    eu = sum(np.sum(wts * (dm.eval_p2(state.u_component(c)) - ue[c]) ** 2) for c in (0, 1))
    ep = np.sum(wts * (dm.eval_p1(state.p) - exact["p"](X, Y, state.t)) ** 2)
    return float(np.sqrt(eu)), float(np.sqrt(ep))


def default_sample(kappa: float = 1e-4) -> PoroelasticSample:
    """Unit-size elastic moduli in the low-permeability regime.

    With ``kappa * dt`` of order one the P1 pressure gradient error feeds back
    into the displacement and its L2 rate drifts from 3 toward 2 under
    refinement; small ``kappa`` keeps the optimal displacement rate visible.
    """
    return PoroelasticSample(mu=1.0, lam=2.0, alpha=0.8, kappa=kappa, phi=0.2, K_f=10.0, c0=0.3)


def smooth_solution() -> ManufacturedSolution:
    pi = sympy.pi
    return ManufacturedSolution(
        u1=(1 + t) * sympy.sin(pi * x) * sympy.sin(pi * y),
        u2=(1 + t) * sympy.cos(pi * x) * sympy.sin(2 * pi * y) / 2,
        p=(1 + t) * sympy.cos(pi * x) * sympy.cos(pi * y),
        name="smooth")


def polynomial_solution() -> ManufacturedSolution:
    """Fields inside the discrete spaces and linear in time, so the scheme is exact."""
    return ManufacturedSolution(u1=t * y ** 2, u2=t * x ** 2, p=t * (x - y + sympy.Rational(1, 2)),
                                name="polynomial")


def manufactured_convergence(solution: ManufacturedSolution, sizes=(4, 8, 16, 32),
                             sample: PoroelasticSample | None = None, t_final: float = 0.1,
                             n_steps: int = 1, pattern: str = "crossed") -> dict:
    """L2 errors at the final time and observed orders under uniform refinement.

    Time stepping is exact for solutions linear in time, so the default
    smooth solution isolates the spatial error.
    """
    sample = sample or default_sample()
    h, eu, ep = [], [], []
    for n in sizes:
        mesh = unit_square_mesh(n, pattern)
        sc = solution.scenario(mesh, sample, t_final, n_steps)
        solver = BiotSolver(sc)
        states = solver.run()
        a, b = l2_errors(solver, states[-1], solution.callables(sample))
        h.append(1.0 / n)
        eu.append(a)
        ep.append(b)
    h, eu, ep = map(np.array, (h, eu, ep))
    order = lambda e: np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    return {"h": h, "error_u": eu, "error_p": ep, "order_u": order(eu), "order_p": order(ep)}


def time_convergence(steps=(2, 4, 8, 16), n: int = 4, t_final: float = 1.0,
                     sample: PoroelasticSample | None = None) -> dict:
    """Temporal order with a solution polynomial in space and exponential in time."""
    sample = sample or default_sample()
    sol = ManufacturedSolution(u1=sympy.exp(t) * y ** 2, u2=sympy.exp(t) * x ** 2,
                               p=sympy.exp(t) * (x - y + sympy.Rational(1, 2)), name="time")
    mesh = unit_square_mesh(n)
    exact = sol.callables(sample)
    dts, eu, ep = [], [], []
    for m in steps:
        solver = BiotSolver(sol.scenario(mesh, sample, t_final, m))
        a, b = l2_errors(solver, solver.run()[-1], exact)
        dts.append(t_final / m)
        eu.append(a)
        ep.append(b)
    dts, eu, ep = map(np.array, (dts, eu, ep))
    order = lambda e: np.log(e[:-1] / e[1:]) / np.log(dts[:-1] / dts[1:])
    return {"dt": dts, "error_u": eu, "error_p": ep, "order_u": order(eu), "order_p": order(ep)}
