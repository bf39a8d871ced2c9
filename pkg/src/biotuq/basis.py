"""Orthonormal Legendre chaos basis and moment extraction from chaos modes.

The canonical variables are iid uniform on [-1, 1], so the joint density is
2^-N on the hypercube and the 1D factors are the Legendre polynomials scaled
to unit norm under the density 1/2::

    psi_k(x) = sqrt(2k + 1) P_k(x),     <psi_k psi_l> = delta_kl

Multi-indices are plain tuples of nonnegative ints. Index sets are kept in
graded-lexicographic order (total degree first, ties broken by the tuple
order) so exported mode tables are reproducible.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Iterator, Sequence

import numpy as np

MultiIndex = tuple[int, ...]


def grlex_key(k: MultiIndex) -> tuple:
    return (sum(k), k)


def legendre_1d(k: int, x):
    """Normalized Legendre polynomial of degree ``k`` at ``x``.

    Evaluated with the three-term recurrence
    ``(n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}``; scalars give scalars.
    """
    if k < 0:
        raise ValueError(f"degree must be nonnegative, got {k}")
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if k == 0:
        out = p_prev
    else:
        p = x.copy()
        for n in range(1, k):
            p_prev, p = p, ((2 * n + 1) * x * p - n * p_prev) / (n + 1)
        out = np.sqrt(2 * k + 1) * p
    return out[()] if out.ndim == 0 else out


def legendre_table(max_degree: int, x) -> np.ndarray:
    """All normalized Legendre values up to ``max_degree``.

    Returns an array of shape ``(max_degree + 1, *x.shape)``.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = x
    for n in range(1, max_degree):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    scale = np.sqrt(2 * np.arange(max_degree + 1) + 1.0)
    return out * scale.reshape((-1,) + (1,) * x.ndim)


def eval_basis(k: Sequence[int], xi) -> float:
    """Multivariate basis function ``prod_i psi_{k_i}(xi_i)`` at one point."""
    xi = np.asarray(xi, dtype=float)
    if xi.ndim != 1 or xi.shape[0] != len(k):
        raise ValueError(
            f"point of shape {xi.shape} does not match multi-index of length {len(k)}"
        )
    val = 1.0
    for ki, x in zip(k, xi):
        val *= float(legendre_1d(int(ki), x))
    return val


def basis_matrix(indices: Sequence[MultiIndex], points) -> np.ndarray:
    """Evaluate every basis function of ``indices`` at every point.

    Parameters
    ----------
    indices : iterable of multi-indices, all of length N
    points : array of shape (M, N)

    Returns
    -------
    ndarray of shape (M, len(indices))
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    indices = list(indices)
    idx = np.asarray(indices, dtype=int).reshape(len(indices), -1)
    if idx.shape[1] != points.shape[1]:
        raise ValueError(
            f"points have dimension {points.shape[1]}, indices have {idx.shape[1]}"
        )
    max_deg = int(idx.max()) if idx.size else 0
    table = legendre_table(max_deg, points)  # (deg, M, N)
    out = np.ones((points.shape[0], idx.shape[0]))
    for d in range(idx.shape[1]):
        out *= table[idx[:, d], :, d].T
    return out


@dataclass(frozen=True)
class TruncationSet:
    """Ordered, downward-closed set of multi-indices."""

    dimension: int
    rule: str
    members: tuple[MultiIndex, ...]

    def __post_init__(self):
        for k in self.members:
            if len(k) != self.dimension:
                raise ValueError(f"multi-index {k} is not of dimension {self.dimension}")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.members)

    def __contains__(self, k) -> bool:
        return tuple(k) in set(self.members)

    def is_downward_closed(self) -> bool:
        return is_downward_closed(self.members)


def is_downward_closed(members: Iterable[MultiIndex]) -> bool:
    s = set(map(tuple, members))
    for k in s:
        for i, ki in enumerate(k):
            if ki > 0 and k[:i] + (ki - 1,) + k[i + 1:] not in s:
                return False
    return True


def canonical_order(members: Iterable[MultiIndex]) -> tuple[MultiIndex, ...]:
    return tuple(sorted({tuple(int(v) for v in k) for k in members}, key=grlex_key))


def total_degree_set(N: int, p: int) -> TruncationSet:
    """All multi-indices with ``|k|_1 <= p``; there are C(N+p, p) of them."""
    if N < 1 or p < 0:
        raise ValueError("need N >= 1 and p >= 0")
    members = [k for k in itertools.product(range(p + 1), repeat=N) if sum(k) <= p]
    out = TruncationSet(N, f"total-degree {p}", canonical_order(members))
    assert len(out) == comb(N + p, p)
    return out


def partial_degree_set(N: int, p: int) -> TruncationSet:
    """All multi-indices with ``|k|_inf <= p``."""
    if N < 1 or p < 0:
        raise ValueError("need N >= 1 and p >= 0")
    members = itertools.product(range(p + 1), repeat=N)
    return TruncationSet(N, f"partial-degree {p}", canonical_order(members))


@dataclass(frozen=True)
class ChaosExpansion:
    """Chaos modes over the normalized Legendre basis.

    ``coefficients`` has shape ``(P,)`` for scalar outputs or ``(P, n)`` for
    field outputs, with row ``j`` holding the mode of ``indices[j]``.
    """

    indices: tuple[MultiIndex, ...]
    coefficients: np.ndarray
    _pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        indices = tuple(tuple(int(v) for v in k) for k in self.indices)
        if not indices:
            raise ValueError("expansion needs at least one mode")
        dims = {len(k) for k in indices}
        if len(dims) != 1:
            raise ValueError("multi-indices of mixed dimension")
        coefs = np.asarray(self.coefficients, dtype=float)
        if coefs.shape[0] != len(indices) or coefs.ndim > 2:
            raise ValueError(
                f"coefficient array {coefs.shape} does not match {len(indices)} modes"
            )
        zero = (0,) * dims.pop()
        if zero not in indices:
            indices = (zero,) + indices
            coefs = np.concatenate([np.zeros((1,) + coefs.shape[1:]), coefs])
        coefs.setflags(write=False)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "_pos", {k: j for j, k in enumerate(indices)})
        if len(self._pos) != len(indices):
            raise ValueError("duplicate multi-index in expansion")

    @classmethod
    def from_dict(cls, modes: dict, dimension: int | None = None) -> "ChaosExpansion":
        items = sorted(((tuple(k), v) for k, v in modes.items()), key=lambda kv: grlex_key(kv[0]))
        if not items:
            if dimension is None:
                raise ValueError("empty mode map needs an explicit dimension")
            return cls(((0,) * dimension,), np.zeros(1))
        return cls(tuple(k for k, _ in items), np.array([v for _, v in items], dtype=float))

    @property
    def dimension(self) -> int:
        return len(self.indices[0])

    @property
    def is_field(self) -> bool:
        return self.coefficients.ndim == 2

    def __len__(self) -> int:
        return len(self.indices)

    def __getitem__(self, k):
        j = self._pos.get(tuple(k))
        if j is None:
            return np.zeros(self.coefficients.shape[1:])[()]
        return self.coefficients[j]

    def mode_array(self, k) -> np.ndarray:
        return np.asarray(self[k])

    def __call__(self, points) -> np.ndarray:
        """Evaluate the expansion at points of shape (M, N)."""
        return basis_matrix(self.indices, points) @ self.coefficients

    def component(self, sl) -> "ChaosExpansion":
        """Restrict a field expansion to a slice or index array of its entries."""
        return ChaosExpansion(self.indices, self.coefficients[:, sl])

    def same_basis(self, other: "ChaosExpansion") -> bool:
        return self.indices == other.indices


def expansion_mean(e: ChaosExpansion):
    return e[(0,) * e.dimension]


def expansion_variance(e: ChaosExpansion):
    nz = [j for j, k in enumerate(e.indices) if any(k)]
    return np.sum(e.coefficients[nz] ** 2, axis=0)[()]


def expansion_covariance(e1: ChaosExpansion, e2: ChaosExpansion):
    if not e1.same_basis(e2):
        raise ValueError("covariance requires expansions over the same index set")
    if e1.coefficients.shape != e2.coefficients.shape:
        raise ValueError("covariance requires payloads of the same shape")
    nz = [j for j, k in enumerate(e1.indices) if any(k)]
    return np.sum(e1.coefficients[nz] * e2.coefficients[nz], axis=0)[()]


def sobol_partial_variance(e: ChaosExpansion, i: int, kind: str = "first"):
    """First- or total-order partial variance attributed to variable ``i``.

    ``i`` is 1-based. First order keeps the modes that depend on xi_i alone;
    total order keeps every mode that depends on xi_i.
    """
    N = e.dimension
    if not 1 <= i <= N:
        raise ValueError(f"variable index {i} outside 1..{N}")
    d = i - 1
    if kind == "first":
        sel = [j for j, k in enumerate(e.indices)
               if k[d] > 0 and all(v == 0 for m, v in enumerate(k) if m != d)]
    elif kind == "total":
        sel = [j for j, k in enumerate(e.indices) if k[d] > 0]
    else:
        raise ValueError(f"kind must be 'first' or 'total', got {kind!r}")
    return np.sum(e.coefficients[sel] ** 2, axis=0)[()]


def write_modes_csv(e: ChaosExpansion, path) -> None:
    """One row per multi-index: the N degrees, then the coefficient(s).

    Floats are written with ``repr`` so a re-import is bitwise exact.
    """
    N = e.dimension
    coefs = e.coefficients.reshape(len(e), -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"k{i + 1}" for i in range(N)] + [f"c{j}" for j in range(coefs.shape[1])])
        for k, row in zip(e.indices, coefs):
            w.writerow(list(k) + [repr(float(v)) for v in row])


def read_modes_csv(path, scalar: bool | None = None) -> ChaosExpansion:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    N = sum(1 for h in header if h.startswith("k"))
    indices = tuple(tuple(int(v) for v in r[:N]) for r in body)
    coefs = np.array([[float(v) for v in r[N:]] for r in body])
    if scalar is None:
        scalar = coefs.shape[1] == 1
    if scalar:
        coefs = coefs[:, 0]
    return ChaosExpansion(indices, coefs)
