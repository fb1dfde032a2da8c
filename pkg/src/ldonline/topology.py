"""Interaction graphs and consensus weight matrices.

A weight matrix here is symmetric with zero row sums, positive off-diagonal
entries exactly on the graph edges, and all nonzero eigenvalues in (-1, 0).
Those conditions make ``I + W`` a contraction on the disagreement subspace,
which is what the consensus step of the learning algorithm relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYMMETRY_TOL = 1e-12
ROWSUM_TOL = 1e-12
EIG_TOL = 1e-10


class TopologyError(ValueError):
    """Graph is unusable (disconnected, self-loop, bad index)."""


class ScalingError(ValueError):
    """Weights too large: smallest eigenvalue left (-1, 0)."""

    def __init__(self, delta_n: float, suggested_scale: float):
        self.delta_n = delta_n
        self.suggested_scale = suggested_scale
        super().__init__(
            f"smallest eigenvalue {delta_n:.6g} <= -1; retry with scale <= {suggested_scale:.6g}"
        )


@dataclass(frozen=True)
class Graph:
    """Undirected graph on m nodes, 0-indexed, no self-loops."""

    m: int
    edges: frozenset

    def __post_init__(self):
        if self.m < 1:
            raise TopologyError("need at least one node")
        for (i, j) in self.edges:
            if i == j:
                raise TopologyError(f"self-loop at node {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise TopologyError(f"edge ({i},{j}) out of range for m={self.m}")
            if i > j:
                raise TopologyError("edges must be stored as (i, j) with i < j")
        if self.m >= 2 and not self.is_connected():
            raise TopologyError("graph must be connected")

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)

    def neighbors(self, i: int) -> list:
        out = []
        for (a, b) in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def is_connected(self) -> bool:
        if self.m <= 1:
            return True
        adj = {i: [] for i in range(self.m)}
        for (a, b) in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        seen = {0}
        stack = [0]
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.m


def _edges(pairs) -> frozenset:
    return frozenset((min(i, j), max(i, j)) for i, j in pairs)


def ring(m: int) -> Graph:
    if m == 1:
        return Graph(1, frozenset())
    if m == 2:
        return Graph(2, _edges([(0, 1)]))
    return Graph(m, _edges((i, (i + 1) % m) for i in range(m)))


def path(m: int) -> Graph:
    return Graph(m, _edges((i, i + 1) for i in range(m - 1)))


def complete(m: int) -> Graph:
    return Graph(m, _edges((i, j) for i in range(m) for j in range(i + 1, m)))


def erdos_renyi(m: int, p: float, seed: int, max_tries: int = 200) -> Graph:
    """G(m, p) resampled until connected."""
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pairs = [
            (i, j) for i in range(m) for j in range(i + 1, m) if rng.random() < p
        ]
        try:
            return Graph(m, _edges(pairs))
        except TopologyError:
            continue
    raise TopologyError(f"no connected G({m},{p}) sample in {max_tries} tries")


GENERATORS = {"ring": ring, "path": path, "complete": complete}


@dataclass(frozen=True)
class WeightMatrix:
    """Validated weight matrix with its cached spectrum.

    delta2 / deltaN are the second-largest / smallest eigenvalues; wbar is
    the smallest diagonal magnitude, the self-mixing floor used by the
    privacy accountant.
    """

    m: int
    entries: np.ndarray = field(repr=False)
    delta2: float
    deltaN: float
    wbar: float

    @property
    def off_diagonal(self) -> np.ndarray:
        off = self.entries.copy()
        np.fill_diagonal(off, 0.0)
        return off

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)


def _spectrum(W: np.ndarray):
    eigs = np.linalg.eigvalsh(W)  # ascending
    m = W.shape[0]
    if m == 1:
        return 0.0, 0.0
    return float(eigs[-2]), float(eigs[0])


def _from_entries(W: np.ndarray, scale_hint: float) -> WeightMatrix:
    m = W.shape[0]
    delta2, deltaN = _spectrum(W)
    if deltaN <= -1.0:
        raise ScalingError(deltaN, 0.9 * scale_hint / abs(deltaN))
    wbar = float(np.min(np.abs(np.diag(W)))) if m > 1 else 0.0
    return WeightMatrix(m=m, entries=W, delta2=delta2, deltaN=deltaN, wbar=wbar)


def build_weight_matrix(graph: Graph, scheme: str = "metropolis",
                        scale=1.0, uniform_weight: float = None) -> WeightMatrix:
    """Build a weight matrix for ``graph``.

    scheme "metropolis": w_ij = scale / (1 + max(deg_i, deg_j)).
    scheme "uniform": w_ij = uniform_weight * scale on every edge.
    scale may be "auto", which shrinks the base matrix so its smallest
    eigenvalue lands at -0.9 when it would otherwise leave (-1, 0).
    """
    if graph.m >= 2 and not graph.is_connected():
        raise TopologyError("graph must be connected")
    m = graph.m
    base = np.zeros((m, m))
    for (i, j) in graph.edges:
        if scheme == "metropolis":
            w = 1.0 / (1.0 + max(graph.degree(i), graph.degree(j)))
        elif scheme == "uniform":
            if uniform_weight is None or uniform_weight <= 0:
                raise ValueError("uniform scheme needs uniform_weight > 0")
            w = uniform_weight
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        base[i, j] = base[j, i] = w
    np.fill_diagonal(base, 0.0)
    diag = -base.sum(axis=1)
    base[np.diag_indices(m)] = diag

    if scale == "auto":
        _, deltaN = _spectrum(base)
        s = 1.0 if deltaN > -0.9 else 0.9 / abs(deltaN)
    else:
        s = float(scale)
        if not 0 < s <= 1:
            raise ValueError("scale must be in (0, 1]")
    return _from_entries(base * s, s)


def from_entries(W) -> WeightMatrix:
    """Wrap an explicit matrix, validating all invariants."""
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("weight matrix must be square")
    report = spectral_check_entries(W)
    if not report.ok:
        raise ValueError("invalid weight matrix: " + "; ".join(report.violations))
    return _from_entries(W, 1.0)


@dataclass(frozen=True)
class SpectralReport:
    ok: bool
    delta2: float
    deltaN: float
    contraction_norm: float
    violations: tuple


def spectral_check(W: WeightMatrix) -> SpectralReport:
    """Recompute the spectrum from entries and check every invariant."""
    return spectral_check_entries(W.entries)


def spectral_check_entries(W: np.ndarray) -> SpectralReport:
    W = np.asarray(W, dtype=float)
    m = W.shape[0]
    violations = []
    if not np.all(np.isfinite(W)):
        return SpectralReport(False, np.nan, np.nan, np.nan, ("non-finite entries",))
    if np.max(np.abs(W - W.T)) > SYMMETRY_TOL:
        violations.append("not symmetric")
    if np.max(np.abs(W.sum(axis=1))) > max(ROWSUM_TOL, 1e-10 * max(1.0, np.abs(W).max())):
        violations.append("row sums not zero")
    delta2, deltaN = _spectrum(W)
    eigs = np.linalg.eigvalsh(W)
    if abs(eigs[-1]) > EIG_TOL:
        violations.append("largest eigenvalue not 0")
    if m >= 2:
        if not deltaN > -1.0:
            violations.append(f"smallest eigenvalue {deltaN:.6g} <= -1")
        if not delta2 < 0.0:
            violations.append("second-largest eigenvalue not < 0")
    contraction = np.linalg.norm(
        np.eye(m) + W - np.ones((m, m)) / m, ord=2
    )
    if m >= 2 and not contraction < 1.0:
        violations.append(f"contraction norm {contraction:.6g} >= 1")
    return SpectralReport(
        ok=not violations,
        delta2=delta2,
        deltaN=deltaN,
        contraction_norm=float(contraction),
        violations=tuple(violations),
    )
