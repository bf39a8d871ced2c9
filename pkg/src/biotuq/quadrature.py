"""Nested Clenshaw-Curtis rules, Smolyak sparse grids and sparse PSP.

Levels count from 0. The 1D rule of level ``i`` has ``n(0) = 1`` node and
``n(i) = 2^i + 1`` nodes for ``i >= 1``; the isotropic grid of level ``l`` in
``N`` dimensions combines the tensor rules with ``|i|_1 <= l``.

Each node is identified by the dyadic rational ``r`` with ``x = cos(pi r)``.
Coordinates are evaluated once from the reduced fraction, so a node shared by
two levels is bitwise the same float and deduplication needs no tolerance.

Pseudo-spectral projection applies the Smolyak combination to the tensor
projections. Each tensor rule only projects onto the degrees it integrates
without internal aliasing, ``p(0) = 0`` and ``p(i) = 2^(i-1)``; the cap is
confirmed at construction by checking the discrete Gram matrix.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, pi, sin
from typing import Mapping, Sequence

import numpy as np

from .basis import ChaosExpansion, MultiIndex, TruncationSet, basis_matrix, grlex_key, legendre_table

GRAM_TOL = 1e-12


def node_coordinate(r: Fraction) -> float:
    """``cos(pi r)`` evaluated symmetrically so that x(1 - r) == -x(r) exactly."""
    half = Fraction(1, 2)
    if r == half:
        return 0.0
    if r > half:
        return -node_coordinate(1 - r)
    return sin(pi * float(half - r))


def intro_level(r: Fraction) -> int:
    """Lowest 1D level whose rule contains the node ``r``."""
    if r == Fraction(1, 2):
        return 0
    return r.denominator.bit_length() - 1 if r.denominator > 1 else 1


def n_points(level: int) -> int:
    return 1 if level == 0 else 2**level + 1


def degree_cap(level: int) -> int:
    return 0 if level == 0 else 2 ** (level - 1)


@dataclass(frozen=True)
class Rule1D:
    level: int
    keys: tuple[Fraction, ...]
    nodes: np.ndarray
    weights: np.ndarray
    max_degree: int

    @property
    def n(self) -> int:
        return len(self.keys)

    def projection_matrix(self) -> np.ndarray:
        """``V[k, q] = w_q psi_k(x_q)`` for ``k <= max_degree``."""
        return legendre_table(self.max_degree, self.nodes) * self.weights


def _cc_weights(level: int) -> np.ndarray:
    if level == 0:
        return np.array([1.0])
    n = 2**level
    j = np.arange(n // 2 + 1)
    k = np.arange(1, n // 2 + 1)
    b = np.where(k == n // 2, 1.0, 2.0)
    s = np.cos(2.0 * np.pi * np.outer(j, k) / n) @ (b / (4.0 * k**2 - 1.0))
    c = np.where((j == 0) | (j == n), 1.0, 2.0)
    half = c / n * (1.0 - s) / 2.0  # density 1/2 on [-1, 1]
    return np.concatenate([half, half[-2::-1]])


@lru_cache(maxsize=None)
def cc_rule(level: int) -> Rule1D:
    """Clenshaw-Curtis rule of the given level, weights summing to 1."""
    if level < 0:
        raise ValueError("level must be >= 0")
    if level == 0:
        keys = (Fraction(1, 2),)
    else:
        n = 2**level
        keys = tuple(Fraction(j, n) for j in range(n + 1))
    nodes = np.array([node_coordinate(r) for r in keys])
    weights = _cc_weights(level)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    p = _aliasing_free_degree(nodes, weights, n_points(level) - 1)
    if p != degree_cap(level):
        raise RuntimeError(
            f"level {level}: discrete Gram test admits degree {p}, expected {degree_cap(level)}"
        )
    return Rule1D(level, keys, nodes, weights, p)


def _aliasing_free_degree(nodes, weights, upper: int) -> int:
    """Largest p such that the discrete Gram matrix of psi_0..psi_p is the identity."""
    table = legendre_table(upper, nodes)
    gram = (table * weights) @ table.T
    p = 0
    while p < upper:
        sub = gram[: p + 2, : p + 2]
        if np.max(np.abs(sub - np.eye(p + 2))) > GRAM_TOL:
            break
        p += 1
    return p


@dataclass(frozen=True)
class TensorRule:
    """One constituent full-tensor rule of a sparse grid."""

    levels: tuple[int, ...]
    coefficient: int
    node_ids: np.ndarray  # shape (n_1, ..., n_N), into SparseGrid.nodes
    mode_ids: np.ndarray  # shape (p_1+1, ..., p_N+1), into SparseGrid.indices

    @property
    def rules(self) -> tuple[Rule1D, ...]:
        return tuple(cc_rule(i) for i in self.levels)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(r.max_degree for r in self.rules)

    def points(self) -> np.ndarray:
        return np.array(list(itertools.product(*(r.nodes for r in self.rules))))

    def weights(self) -> np.ndarray:
        """Full tensor weight table, flattened in the order of ``points``."""
        w = np.ones(1)
        for r in self.rules:
            w = np.outer(w, r.weights).ravel()
        return w


@dataclass(frozen=True)
class SparseGrid:
    dimension: int
    level: int
    nodes: np.ndarray
    node_keys: tuple[tuple[Fraction, ...], ...]
    tensor_rules: tuple[TensorRule, ...]
    indices: TruncationSet
    _key_pos: dict = field(repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_keys)

    def node_index(self, key) -> int:
        return self._key_pos[tuple(key)]

    def collapsed_weights(self) -> np.ndarray:
        """Global Smolyak quadrature weights (some are negative)."""
        w = np.zeros(self.n_nodes)
        for t in self.tensor_rules:
            np.add.at(w, t.node_ids.ravel(), t.coefficient * t.weights())
        return w

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["node"] + [f"xi{i + 1}" for i in range(self.dimension)])
            for q, x in enumerate(self.nodes):
                wr.writerow([q] + [repr(float(v)) for v in x])


def smolyak_coefficient(levels: Sequence[int], max_level: int) -> int:
    """Combination coefficient of the tensor rule ``levels`` in the level-l grid."""
    N = len(levels)
    s = sum(levels)
    total = 0
    for z in itertools.product((0, 1), repeat=N):
        if s + sum(z) <= max_level:
            total += (-1) ** sum(z)
    return total


def binomial_coefficient(levels: Sequence[int], max_level: int) -> int:
    """Closed form ``(-1)^(l-|i|) C(N-1, l-|i|)`` of the combination coefficient."""
    N = len(levels)
    gap = max_level - sum(levels)
    if gap < 0 or gap > N - 1:
        return 0
    return (-1) ** gap * comb(N - 1, gap)


@lru_cache(maxsize=32)
def smolyak_grid(N: int, l: int) -> SparseGrid:
    """Isotropic sparse grid of level ``l`` in ``N`` dimensions.

    Nodes are ordered by the sum of their 1D introduction levels, then by key,
    so the level-l node list is a prefix of the level-(l+1) list.
    """
    if N < 1 or l < 0:
        raise ValueError("need N >= 1 and l >= 0")
    level_sets = sorted(
        (i for i in itertools.product(range(l + 1), repeat=N) if sum(i) <= l),
        key=grlex_key,
    )
    active = [(i, smolyak_coefficient(i, l)) for i in level_sets]
    active = [(i, c) for i, c in active if c != 0]

    keys = set()
    modes = set()
    for i, _ in active:
        keys.update(itertools.product(*(cc_rule(v).keys for v in i)))
        modes.update(itertools.product(*(range(degree_cap(v) + 1) for v in i)))
    node_keys = tuple(sorted(keys, key=lambda k: (sum(intro_level(r) for r in k), k)))
    key_pos = {k: q for q, k in enumerate(node_keys)}
    nodes = np.array([[node_coordinate(r) for r in k] for k in node_keys]).reshape(-1, N)
    nodes.setflags(write=False)
    K = TruncationSet(N, f"psp level {l}", tuple(sorted(modes, key=grlex_key)))
    mode_pos = {k: j for j, k in enumerate(K.members)}

    rules = []
    for i, c in active:
        r1 = [cc_rule(v) for v in i]
        node_ids = np.array(
            [key_pos[k] for k in itertools.product(*(r.keys for r in r1))], dtype=np.intp
        ).reshape([r.n for r in r1])
        mode_ids = np.array(
            [mode_pos[k] for k in itertools.product(*(range(r.max_degree + 1) for r in r1))],
            dtype=np.intp,
        ).reshape([r.max_degree + 1 for r in r1])
        rules.append(TensorRule(tuple(i), c, node_ids, mode_ids))
    return SparseGrid(N, l, nodes, node_keys, tuple(rules), K, key_pos)


def grid_size(N: int, l: int) -> int:
    return smolyak_grid(N, l).n_nodes


def _as_payload(grid: SparseGrid, evals) -> np.ndarray:
    if isinstance(evals, Mapping):
        missing = [q for q in range(grid.n_nodes) if q not in evals]
        if missing:
            q = missing[0]
            raise KeyError(f"no model evaluation for node {q} (xi = {grid.nodes[q].tolist()})")
        evals = [np.asarray(evals[q], dtype=float) for q in range(grid.n_nodes)]
        shapes = {e.shape for e in evals}
        if len(shapes) != 1:
            raise ValueError(f"payloads of differing shapes: {sorted(shapes)}")
        return np.stack(evals)
    arr = np.asarray(evals, dtype=float)
    if arr.shape[0] != grid.n_nodes:
        raise ValueError(f"expected {grid.n_nodes} payloads, got {arr.shape[0]}")
    return arr


def tensor_projection(rule: TensorRule, values: np.ndarray) -> np.ndarray:
    """Full-tensor discrete projection onto the rule's admissible box.

    ``values`` has shape (n_1, ..., n_N, m); the result has shape
    (p_1+1, ..., p_N+1, m).
    """
    F = values
    for r in rule.rules:
        F = np.tensordot(F, r.projection_matrix(), axes=([0], [1]))
    return np.moveaxis(F, 0, -1)


def psp_project(grid: SparseGrid, evals) -> ChaosExpansion:
    """Sparse pseudo-spectral projection of node evaluations onto K(l).

    ``evals`` is an array with one payload per node (scalar or vector) or a
    mapping from node index to payload.
    """
    Y = _as_payload(grid, evals)
    scalar = Y.ndim == 1
    Y2 = Y.reshape(grid.n_nodes, -1)
    m = Y2.shape[1]
    out = np.zeros((len(grid.indices), m))
    for t in grid.tensor_rules:
        local = tensor_projection(t, Y2[t.node_ids])
        out[t.mode_ids.ravel()] += t.coefficient * local.reshape(-1, m)
    return ChaosExpansion(grid.indices.members, out[:, 0] if scalar else out)


def nisp_project(grid: SparseGrid, evals, indices: Sequence[MultiIndex] | None = None) -> ChaosExpansion:
    """Plain quadrature projection with the collapsed Smolyak weights.

    Kept for comparison: on a sparse grid this suffers internal aliasing on
    sets where PSP is exact.
    """
    Y = _as_payload(grid, evals)
    idx = tuple(indices) if indices is not None else grid.indices.members
    Phi = basis_matrix(idx, grid.nodes)
    w = grid.collapsed_weights()
    coefs = (Phi * w[:, None]).T @ Y.reshape(grid.n_nodes, -1)
    return ChaosExpansion(idx, coefs[:, 0] if Y.ndim == 1 else coefs)


def discrete_orthonormality(rule, k: Sequence[int], l: Sequence[int]) -> float:
    """``sum_q w_q phi_k(x_q) phi_l(x_q)`` over a 1D or full-tensor rule.

    ``rule`` is a :class:`Rule1D`, a :class:`TensorRule`, or a tuple of 1D
    levels.
    """
    if isinstance(rule, Rule1D):
        pts, w = rule.nodes[:, None], rule.weights
    else:
        levels = rule.levels if isinstance(rule, TensorRule) else tuple(rule)
        rules = [cc_rule(v) for v in levels]
        pts = np.array(list(itertools.product(*(r.nodes for r in rules))))
        w = np.ones(1)
        for r in rules:
            w = np.outer(w, r.weights).ravel()
    k, l = tuple(k), tuple(l)
    Phi = basis_matrix([k, l], pts)
    return float(np.sum(w * Phi[:, 0] * Phi[:, 1]))


def lhs_samples(N: int, count: int, seed: int) -> np.ndarray:
    """Latin hypercube design on [-1, 1]^N, shape (count, N).

    Each dimension gets one point per equal-width stratum, jittered uniformly
    inside the stratum; strata are paired across dimensions by independent
    random permutations.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.empty((count, N))
    for d in range(N):
        perm = rng.permutation(count)
        out[:, d] = (perm + rng.random(count)) / count
    return 2.0 * out - 1.0
