"""Poroelastic coefficients as functions of the canonical variables.

The four primary coefficients (shear modulus, first Lame coefficient,
Biot-Willis coefficient, hydraulic mobility) are independent transforms of
one canonical variable each. Porosity and fluid bulk modulus are fixed, and
the constrained specific storage ``c0`` follows from the Gassmann relation
as the larger root of

    K c0^2 - (alpha + alpha phi + phi K / K_f - phi) c0 + alpha^2 phi / K_f = 0

All functions are unit-agnostic; a model carries a unit tag only for
bookkeeping.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

COEFFICIENTS = ("mu", "lambda", "alpha", "kappa")


class AdmissibilityError(ValueError):
    """A parameter set outside the physically admissible range."""


def zimmerman_bound(phi):
    """Lower bound ``3 phi / (2 + phi)`` on the Biot-Willis coefficient."""
    return 3.0 * phi / (2.0 + phi)


def derived_moduli(mu, lam, d: int = 2):
    """Bulk modulus ``2 mu / d + lam`` and Poisson ratio ``lam / (2 (mu + lam))``."""
    if d not in (2, 3):
        raise ValueError(f"spatial dimension must be 2 or 3, got {d}")
    return 2.0 * mu / d + lam, lam / (2.0 * (mu + lam))


def _c0_terms(K, K_f, phi, alpha):
    b = alpha + alpha * phi + phi * K / K_f - phi
    e = alpha**2 * phi / K_f
    return b, e, b * b - 4.0 * K * e


def c0_roots(K, K_f, phi, alpha):
    """Both roots ``(c0_minus, c0_plus)`` of the storage quadratic.

    The linear coefficient is positive whenever ``alpha >= phi``, so the
    larger root is formed without cancellation and the smaller one from the
    product of the roots.
    """
    K, K_f, phi, alpha = (np.asarray(v, dtype=float) for v in (K, K_f, phi, alpha))
    b, e, disc = _c0_terms(K, K_f, phi, alpha)
    scaled = disc / (b * b)
    if np.any(scaled < -1e-12):
        raise RuntimeError(
            f"negative discriminant (min scaled value {float(np.min(scaled)):.3e}) "
            "for admissible inputs"
        )
    disc = np.maximum(disc, 0.0)
    c_plus = (b + np.sqrt(disc)) / (2.0 * K)
    c_minus = e / (K * c_plus)
    return c_minus[()], c_plus[()]


def solve_c0(K, K_f, phi, alpha):
    """Constrained specific storage: the larger root of the Gassmann quadratic.

    Works elementwise on arrays. Raises :class:`AdmissibilityError` when the
    inputs break ``K, K_f > 0``, ``0 < phi < 1`` or the Zimmerman range of
    ``alpha``.
    """
    K, K_f, phi, alpha = (np.asarray(v, dtype=float) for v in (K, K_f, phi, alpha))
    if np.any(K <= 0) or np.any(K_f <= 0):
        raise AdmissibilityError("bulk moduli must be positive")
    if np.any(phi <= 0) or np.any(phi >= 1):
        raise AdmissibilityError("porosity must lie in (0, 1)")
    amin = zimmerman_bound(phi)
    if np.any(alpha < amin * (1 - 1e-12)) or np.any(alpha > 1 + 1e-12):
        raise AdmissibilityError("alpha outside [3 phi / (2 + phi), 1]")
    _, c0 = c0_roots(K, K_f, phi, alpha)
    c0 = np.asarray(c0)
    b, e, _ = _c0_terms(K, K_f, phi, alpha)
    resid = K * c0**2 - b * c0 + e
    scale = np.maximum.reduce([np.abs(K * c0**2), np.abs(b * c0), np.abs(e)])
    if np.any(np.abs(resid) > 1e-12 * scale):
        raise RuntimeError("storage quadratic residual above tolerance")
    if np.any(c0 < phi / K_f * (1 - 1e-12)):
        raise RuntimeError("c0 below phi / K_f")
    return c0[()]


def gassmann_matrix_modulus(K, c0, alpha):
    """Solid-matrix bulk modulus ``(K c0 - alpha^2) / (c0 (1 - alpha))``.

    Returns ``inf`` for incompressible grains (``alpha == 1``).
    """
    if c0 <= 0:
        raise AdmissibilityError("c0 must be positive")
    if alpha == 1.0:
        return math.inf
    num = K * c0 - alpha**2
    if num <= 0:
        raise AdmissibilityError(f"matrix modulus K_m = {num / (c0 * (1 - alpha))} is not positive")
    return num / (c0 * (1.0 - alpha))


@dataclass(frozen=True)
class PoroelasticSample:
    mu: float
    lam: float
    alpha: float
    kappa: float
    phi: float
    K_f: float
    c0: float
    d: int = 2

    @property
    def K(self) -> float:
        return derived_moduli(self.mu, self.lam, self.d)[0]

    @property
    def nu(self) -> float:
        return derived_moduli(self.mu, self.lam, self.d)[1]

    @property
    def K_m(self) -> float:
        return gassmann_matrix_modulus(self.K, self.c0, self.alpha)

    @property
    def K_d(self) -> float:
        return 0.0 if self.alpha == 1.0 else (1.0 - self.alpha) * self.K_m

    @property
    def M(self) -> float:
        """Biot tangent modulus ``K_m / (alpha - phi)``; diagnostic only."""
        return self.K_m / (self.alpha - self.phi)

    def invariants(self) -> dict[str, bool]:
        """Truth value of each admissibility invariant.

        ``c0_ge_alpha_over_K`` is reported but not enforced: with the larger
        root and ``K < K_f`` it does not hold.
        """
        K = self.K
        _, _, disc = _c0_terms(K, self.K_f, self.phi, self.alpha)
        b = _c0_terms(K, self.K_f, self.phi, self.alpha)[0]
        gres = abs(self.alpha**2 - self.c0 * (K - self.K_d))
        return {
            "positive_moduli": self.mu > 0 and self.lam > 0 and self.kappa > 0 and self.K_f > 0,
            "porosity_range": 0 < self.phi < 1,
            "alpha_range": zimmerman_bound(self.phi) * (1 - 1e-12) <= self.alpha <= 1,
            "discriminant": disc / (b * b) >= -1e-12,
            "c0_ge_phi_over_Kf": self.c0 >= self.phi / self.K_f * (1 - 1e-12),
            "c0_ge_alpha_over_K": self.c0 >= self.alpha / K * (1 - 1e-12),
            "gassmann_residual": gres <= 1e-10 * self.alpha**2,
        }


@dataclass(frozen=True)
class Transform:
    """Map from one canonical variable on [-1, 1] to a coefficient value.

    ``loguniform`` spreads ``log10`` of the value uniformly over
    ``[log10 lo, log10 hi]``; ``uniform`` spreads the value over ``[lo, hi]``.
    """

    kind: str
    lo: float
    hi: float

    def __post_init__(self):
        if self.kind not in ("loguniform", "uniform"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.hi < self.lo:
            raise ValueError("transform bounds out of order")
        if self.kind == "loguniform" and self.lo <= 0:
            raise ValueError("log-uniform bounds must be positive")

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        t = (xi + 1.0) / 2.0
        if self.kind == "uniform":
            out = (self.hi + self.lo) / 2.0 + xi * (self.hi - self.lo) / 2.0
        else:
            out = self.lo * 10.0 ** (t * math.log10(self.hi / self.lo))
        return out[()]

    def mean(self) -> float:
        a, b = self.lo, self.hi
        if self.kind == "uniform" or a == b:
            return (a + b) / 2.0
        return (b - a) / math.log(b / a)

    def variance(self) -> float:
        a, b = self.lo, self.hi
        if self.kind == "uniform" or a == b:
            return (b - a) ** 2 / 12.0
        return (b * b - a * a) / (2.0 * math.log(b / a)) - self.mean() ** 2

    def cv(self) -> float:
        return math.sqrt(self.variance()) / self.mean()


@dataclass(frozen=True)
class UncertaintyModel:
    """Transforms of the four primary coefficients plus fixed porosity and K_f.

    Canonical variable ``xi_i`` drives the i-th entry of :data:`COEFFICIENTS`.
    """

    transforms: Mapping[str, Transform]
    phi: float
    K_f: float
    d: int = 2
    units: str = "kPa-m-s"
    name: str = "custom"

    def __post_init__(self):
        if tuple(self.transforms) != COEFFICIENTS:
            raise ValueError(f"transforms must be given for {COEFFICIENTS} in that order")

    @property
    def dimension(self) -> int:
        return len(self.transforms)

    def coefficient(self, name: str, xi):
        i = COEFFICIENTS.index(name)
        return self.transforms[name](np.asarray(xi, dtype=float)[..., i])

    @classmethod
    def from_dict(cls, cfg: Mapping) -> "UncertaintyModel":
        """Build from a config mapping; ``alpha`` bounds may use ``"zimmerman"``."""
        phi = float(cfg["phi"])
        transforms = {}
        for name in COEFFICIENTS:
            entry = cfg["coefficients"][name]
            lo, hi = entry["bounds"]
            if lo == "zimmerman":
                lo = zimmerman_bound(phi)
            transforms[name] = Transform(entry["kind"], float(lo), float(hi))
        return cls(transforms, phi, float(cfg["K_f"]), int(cfg.get("dim", 2)),
                   cfg.get("units", "kPa-m-s"), cfg.get("name", "custom"))

    def to_dict(self) -> dict:
        return {
            "name": self.name, "units": self.units, "phi": self.phi, "K_f": self.K_f, "dim": self.d,
            "coefficients": {k: {"kind": t.kind, "bounds": [t.lo, t.hi]}
                             for k, t in self.transforms.items()},
        }


def validation_model() -> UncertaintyModel:
    """Unit-square validation model, kPa-m-s units."""
    phi = 0.2
    return UncertaintyModel(
        {
            "mu": Transform("loguniform", 1.0, 100.0),
            "lambda": Transform("loguniform", 2.0, 200.0),
            "alpha": Transform("uniform", zimmerman_bound(phi), 1.0),
            "kappa": Transform("loguniform", 0.01, 1.0),
        },
        phi=phi, K_f=2.2e6, d=2, units="kPa-m-s", name="validation",
    )


def realistic_model() -> UncertaintyModel:
    """Injection-extraction model, GPa-km-day units."""
    return UncertaintyModel(
        {
            "mu": Transform("loguniform", 3.75, 37.5),
            "lambda": Transform("loguniform", 2.5, 25.0),
            "alpha": Transform("loguniform", 0.1, 1.0),
            "kappa": Transform("loguniform", 0.05, 0.5),
        },
        phi=2.0 / 29.0, K_f=2.2, d=2, units="GPa-km-day", name="realistic",
    )


BUILTIN_MODELS = {"validation": validation_model, "realistic": realistic_model}


def sample_params(xi, model: UncertaintyModel) -> PoroelasticSample:
    """Coefficient set at one point of the canonical hypercube."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (model.dimension,):
        raise ValueError(f"expected a point of dimension {model.dimension}, got shape {xi.shape}")
    vals = {name: float(model.coefficient(name, xi)) for name in COEFFICIENTS}
    amin = zimmerman_bound(model.phi)
    if not amin * (1 - 1e-12) <= vals["alpha"] <= 1 + 1e-12:
        raise AdmissibilityError(
            f"alpha = {vals['alpha']} outside [{amin}, 1]; check the model's alpha transform"
        )
    K, _ = derived_moduli(vals["mu"], vals["lambda"], model.d)
    c0 = float(solve_c0(K, model.K_f, model.phi, vals["alpha"]))
    return PoroelasticSample(vals["mu"], vals["lambda"], vals["alpha"], vals["kappa"],
                             model.phi, model.K_f, c0, model.d)


def sample_c0(model: UncertaintyModel, xi: np.ndarray) -> np.ndarray:
    """Vectorized ``c0`` for an array of canonical points of shape (M, N)."""
    mu = model.coefficient("mu", xi)
    lam = model.coefficient("lambda", xi)
    alpha = model.coefficient("alpha", xi)
    K, _ = derived_moduli(mu, lam, model.d)
    return solve_c0(K, model.K_f, model.phi, alpha)


def write_c0_histogram(model: UncertaintyModel, path, n: int = 100_000, seed: int = 0,
                       bins: int = 100) -> np.ndarray:
    """Draw ``n`` uniform canonical points, write a c0 histogram CSV, return the draws."""
    rng = np.random.default_rng(seed)
    c0 = sample_c0(model, rng.uniform(-1.0, 1.0, (n, model.dimension)))
    counts, edges = np.histogram(c0, bins=bins)
    dens = counts / (n * np.diff(edges))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count", "density"])
        for lo, hi, c, de in zip(edges[:-1], edges[1:], counts, dens):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c), repr(float(de))])
    return c0
