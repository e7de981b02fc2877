"""
Labeled regular graphs, cuts, conductance and boundary.

A walk on a ``d``-regular graph needs every vertex to carry ``d`` outgoing
edge labels such that, for each label ``a``, the map ``v -> sigma_a(v)`` is a
permutation. :class:`LabeledGraph` stores exactly that permutation table;
the (simple, undirected) adjacency relation is derived from it, with fixed
points ``sigma_a(v) == v`` read as padding self-loops.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .reports import BoundCheck

#: Largest vertex count for which cut families are enumerated exhaustively.
EXHAUSTIVE_CUT_LIMIT = 14

_RATIO_TIE_TOL = 1e-12


class InvalidGraphError(ValueError):
    """Raised when a graph or labeling violates the walk's structural contract."""


class GraphFormatError(InvalidGraphError):
    """Raised when a graph file cannot be parsed; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class LabeledGraph:
    """Regular graph given by one vertex permutation per edge label.

    Parameters
    ----------
    sigma : array_like of int, shape (d, n)
        ``sigma[a, v]`` is the endpoint of the edge labeled ``a`` leaving ``v``.
    name : str
        Free-form description used in reports.
    transitive : bool
        True when vertex translations are label-preserving automorphisms
        (cycles and Abelian Cayley graphs). Mixing sweeps use it to reduce the
        set of initial states to the coin states at vertex 0.
    """

    sigma: np.ndarray
    name: str = "graph"
    transitive: bool = False

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=np.int64, copy=True)
        if sigma.ndim != 2 or sigma.shape[0] < 1 or sigma.shape[1] < 1:
            raise InvalidGraphError(f"sigma must have shape (d, n), got {sigma.shape}")
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        self._validate()

    @property
    def d(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def n(self) -> int:
        return int(self.sigma.shape[1])

    @property
    def dim(self) -> int:
        """Dimension of the walk space, ``d * n``."""
        return self.d * self.n

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Boolean ``(n, n)`` adjacency of the underlying simple graph (no loops)."""
        adj = np.zeros((self.n, self.n), dtype=bool)
        src = np.tile(np.arange(self.n), self.d)
        dst = self.sigma.ravel()
        adj[src, dst] = True
        np.fill_diagonal(adj, False)
        adj.setflags(write=False)
        return adj

    @cached_property
    def degrees(self) -> np.ndarray:
        """True degrees, self-loops excluded."""
        return self.adjacency.sum(axis=1)

    @property
    def num_edges(self) -> int:
        return int(self.adjacency.sum() // 2)

    def neighbors(self, v: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[v])

    def is_connected(self) -> bool:
        return len(_reachable(self.adjacency, 0)) == self.n

    def _validate(self):
        n = self.n
        if self.sigma.min() < 0 or self.sigma.max() >= n:
            raise InvalidGraphError("sigma entries must lie in [0, n)")
        for a, row in enumerate(self.sigma):
            if len(np.unique(row)) != n:
                raise InvalidGraphError(f"label {a} is not a permutation of the vertices")
        adj = self.adjacency
        if not np.array_equal(adj, adj.T):
            raise InvalidGraphError("labeled edges do not form an undirected graph")

    def __eq__(self, other):
        if not isinstance(other, LabeledGraph):
            return NotImplemented
        return np.array_equal(self.sigma, other.sigma)

    def __hash__(self):
        return hash(self.sigma.tobytes())

    def __repr__(self):
        return f"LabeledGraph(name={self.name!r}, n={self.n}, d={self.d})"


def _reachable(adj: np.ndarray, root: int) -> set[int]:
    seen = {root}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in np.flatnonzero(adj[u]):
            v = int(v)
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def cycle(n: int) -> LabeledGraph:
    """The n-cycle with label 0 = right (``i -> i+1``) and label 1 = left."""
    if n < 3:
        raise InvalidGraphError(f"a cycle needs at least 3 vertices, got {n}")
    v = np.arange(n)
    return LabeledGraph(np.stack([(v + 1) % n, (v - 1) % n]), name=f"cycle({n})", transitive=True)


def _group_elements(orders: Sequence[int]) -> np.ndarray:
    return np.array(list(itertools.product(*(range(m) for m in orders))), dtype=np.int64).reshape(-1, len(orders))


def cayley_abelian(orders: Sequence[int], generators: Sequence) -> LabeledGraph:
    """Cayley graph of ``Z_{m1} x ... x Z_{mr}``.

    Vertices are group elements in lexicographic order (first coordinate most
    significant); label ``a`` maps ``v`` to ``v + g_a``. Generators may be
    given as ints when there is a single factor.
    """
    orders = [int(m) for m in orders]
    if not orders or min(orders) < 1:
        raise InvalidGraphError("orders must be positive integers")
    orders_arr = np.array(orders)
    gens = []
    for g in generators:
        g = np.atleast_1d(np.asarray(g, dtype=np.int64))
        if g.shape != (len(orders),):
            raise InvalidGraphError(f"generator {g.tolist()} does not match group rank {len(orders)}")
        g = g % orders_arr
        if not g.any():
            raise InvalidGraphError("generators must be nonzero")
        gens.append(g)
    if not gens:
        raise InvalidGraphError("at least one generator is required")
    gen_set = {tuple(g) for g in gens}
    for g in gens:
        if tuple((-g) % orders_arr) not in gen_set:
            raise InvalidGraphError(f"generator set is not closed under inversion (missing -{g.tolist()})")

    elements = _group_elements(orders)
    radix = np.cumprod([1] + orders[::-1][:-1])[::-1]
    sigma = np.stack([((elements + g) % orders_arr) @ radix for g in gens])
    name = f"cayley({'x'.join(map(str, orders))}; {';'.join(','.join(map(str, g)) for g in gens)})"
    return LabeledGraph(sigma, name=name, transitive=True)


def _perfect_matching(counts: np.ndarray) -> np.ndarray:
    """Perfect matching in a regular bipartite multigraph (Kuhn, lowest index first)."""
    n = counts.shape[0]
    match_right = np.full(n, -1)

    def augment(u, seen):
        for v in np.flatnonzero(counts[u]):
            if seen[v]:
                continue
            seen[v] = True
            if match_right[v] < 0 or augment(match_right[v], seen):
                match_right[v] = u
                return True
        return False

    for u in range(n):
        if not augment(u, np.zeros(n, dtype=bool)):
            raise RuntimeError("permutation decomposition failed: no perfect matching")
    match_left = np.empty(n, dtype=np.int64)
    match_left[match_right] = np.arange(n)
    return match_left


def pad_regular(adjacency, name: str = "padded") -> LabeledGraph:
    """Label an arbitrary connected graph, padding with self-loops up to max degree.

    Each vertex receives ``d - deg(v)`` loops, which makes the directed edge
    multiset ``d``-regular on both sides; it is then split into ``d``
    permutations by extracting perfect matchings one at a time.
    """
    adj = np.asarray(adjacency)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise InvalidGraphError("adjacency must be a square matrix")
    adj = adj != 0
    if not np.array_equal(adj, adj.T):
        raise InvalidGraphError("adjacency must be symmetric")
    if adj.diagonal().any():
        raise InvalidGraphError("input graph must not contain self-loops")
    n = adj.shape[0]
    if n < 2 or len(_reachable(adj, 0)) != n:
        raise InvalidGraphError("graph must be connected with at least 2 vertices")

    deg = adj.sum(axis=1)
    d = int(deg.max())
    counts = adj.astype(np.int64) + np.diag(d - deg)
    sigma = np.empty((d, n), dtype=np.int64)
    for a in range(d):
        sigma[a] = _perfect_matching(counts)
        counts[np.arange(n), sigma[a]] -= 1
    return LabeledGraph(sigma, name=name)


def complete(n: int) -> LabeledGraph:
    if n < 3:
        raise InvalidGraphError("complete graph needs n >= 3")
    return pad_regular(~np.eye(n, dtype=bool), name=f"complete({n})")


def bridged_cliques(m: int) -> LabeledGraph:
    """Two copies of K_m joined by one edge between vertices ``m-1`` and ``m``."""
    if m < 2:
        raise InvalidGraphError("clique size must be at least 2")
    adj = np.zeros((2 * m, 2 * m), dtype=bool)
    adj[:m, :m] = True
    adj[m:, m:] = True
    np.fill_diagonal(adj, False)
    adj[m - 1, m] = adj[m, m - 1] = True
    return pad_regular(adj, name=f"bridged_cliques({m})")


# ---------------------------------------------------------------------------
# Cuts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Cut:
    """A vertex subset ``X`` with its outer boundary and cut size."""

    X: tuple[int, ...]
    boundary: tuple[int, ...]
    cut_edges: int

    def complement(self, n: int) -> tuple[int, ...]:
        inside = set(self.X)
        return tuple(v for v in range(n) if v not in inside)

    def to_dict(self):
        return {"X": list(self.X), "boundary": list(self.boundary), "cut_edges": self.cut_edges}


def make_cut(g: LabeledGraph, X: Iterable[int]) -> Cut:
    X = tuple(sorted({int(v) for v in X}))
    if not X or X[0] < 0 or X[-1] >= g.n:
        raise InvalidGraphError(f"cut must be a nonempty subset of range({g.n})")
    mask = np.zeros(g.n, dtype=bool)
    mask[list(X)] = True
    touching = g.adjacency[mask].any(axis=0)
    boundary = tuple(int(v) for v in np.flatnonzero(touching & ~mask))
    cut_edges = int(g.adjacency[np.ix_(mask, ~mask)].sum())
    return Cut(X, boundary, cut_edges)


@dataclass(frozen=True, eq=False)
class CutFamily:
    """Subset family as a boolean ``(m, n)`` membership matrix.

    ``all_subsets`` marks families that contain every nonempty proper subset;
    conditions that quantify over all subsets at a single time then reduce
    exactly to singletons.
    """

    masks: np.ndarray
    name: str
    all_subsets: bool = False

    def __post_init__(self):
        masks = np.array(self.masks, dtype=bool, copy=True)
        if masks.ndim != 2:
            raise ValueError("masks must be 2-D")
        masks.setflags(write=False)
        object.__setattr__(self, "masks", masks)

    def __len__(self):
        return self.masks.shape[0]

    @property
    def n(self) -> int:
        return self.masks.shape[1]

    def subset(self, i: int) -> tuple[int, ...]:
        return tuple(int(v) for v in np.flatnonzero(self.masks[i]))

    def restrict(self, keep: np.ndarray, name: str | None = None) -> "CutFamily":
        return CutFamily(self.masks[keep], name or self.name, all_subsets=False)

    def __or__(self, other: "CutFamily") -> "CutFamily":
        masks = np.unique(np.vstack([self.masks, other.masks]), axis=0)
        return CutFamily(masks, f"{self.name}+{other.name}", self.all_subsets or other.all_subsets)


def exhaustive_cuts(n: int, include_full: bool = False) -> CutFamily:
    """All nonempty proper subsets (plus ``V`` itself when ``include_full``)."""
    if n > EXHAUSTIVE_CUT_LIMIT + 6:
        raise ValueError(f"refusing to enumerate 2^{n} subsets")
    top = (1 << n) if include_full else (1 << n) - 1
    codes = np.arange(1, top, dtype=np.int64)
    masks = ((codes[:, None] >> np.arange(n)) & 1).astype(bool)
    return CutFamily(masks, "exhaustive" + ("+V" if include_full else ""), all_subsets=True)


def singleton_cuts(n: int) -> CutFamily:
    return CutFamily(np.eye(n, dtype=bool), "singletons")


def arc_cuts(n: int) -> CutFamily:
    """Contiguous cyclic arcs ``{i, ..., i+m-1}`` for all starts and ``1 <= m < n``."""
    rows = []
    for m in range(1, n):
        for i in range(n):
            row = np.zeros(n, dtype=bool)
            row[(i + np.arange(m)) % n] = True
            rows.append(row)
    return CutFamily(np.unique(np.array(rows), axis=0), "arcs")


def subsets_family(n: int, subsets: Iterable[Iterable[int]], name: str = "user") -> CutFamily:
    rows = []
    for X in subsets:
        row = np.zeros(n, dtype=bool)
        row[list(X)] = True
        if not row.any():
            raise ValueError("subsets must be nonempty")
        rows.append(row)
    return CutFamily(np.array(rows, dtype=bool).reshape(-1, n), name)


def full_set(n: int) -> CutFamily:
    return CutFamily(np.ones((1, n), dtype=bool), "V")


def default_cut_family(g: LabeledGraph, extra: Iterable[Iterable[int]] = (), include_full: bool = False) -> CutFamily:
    """Exhaustive up to :data:`EXHAUSTIVE_CUT_LIMIT` vertices, else singletons + arcs + ``extra``."""
    extra = list(extra)
    if g.n <= EXHAUSTIVE_CUT_LIMIT:
        fam = exhaustive_cuts(g.n, include_full=include_full)
        return fam
    fam = singleton_cuts(g.n) | arc_cuts(g.n)
    if extra:
        fam = fam | subsets_family(g.n, extra)
    if include_full:
        fam = fam | full_set(g.n)
    fam = CutFamily(fam.masks, "singletons+arcs" + ("+user" if extra else "") + ("+V" if include_full else ""))
    return fam


def _cut_statistics(g: LabeledGraph, masks: np.ndarray):
    A = g.adjacency.astype(np.int64)
    M = masks.astype(np.int64)
    into = M @ A  # into[x, v] = number of X-neighbours of v
    cut_edges = (into * (1 - M)).sum(axis=1)
    boundary = ((into > 0) & ~masks).sum(axis=1)
    volume = M @ g.degrees
    return cut_edges, boundary, volume


def _lexicographic_argmin(family: CutFamily, ratios: np.ndarray, valid: np.ndarray) -> int:
    best = ratios[valid].min()
    tied = np.flatnonzero(valid & (ratios <= best + _RATIO_TIE_TOL))
    return min(tied, key=family.subset)


def _require_connected(g: LabeledGraph):
    if not g.is_connected():
        raise InvalidGraphError(f"{g.name} is disconnected")


def conductance(g: LabeledGraph, family: CutFamily | None = None) -> tuple[float, Cut]:
    """Conductance of the simple random walk.

    With ``pi_u = deg(u) / 2|E|`` and ``p_uv = 1/deg(u)`` the flow out of ``X``
    is ``|E(X:Xc)| / 2|E|`` and the capacity is ``vol(X) / 2|E|``; the minimum
    of their ratio is taken over cuts with capacity at most 1/2.
    """
    _require_connected(g)
    family = family if family is not None else default_cut_family(g)
    if len(family) == 0:
        raise ValueError("empty cut family")
    cut_edges, _, volume = _cut_statistics(g, family.masks)
    size = family.masks.sum(axis=1)
    valid = (size > 0) & (size < g.n) & (volume <= g.num_edges)
    if not valid.any():
        raise ValueError("no cut in the family has capacity <= 1/2")
    ratios = np.where(valid, cut_edges / np.maximum(volume, 1), np.inf)
    i = _lexicographic_argmin(family, ratios, valid)
    return float(ratios[i]), make_cut(g, family.subset(i))


def boundary_phi_prime(g: LabeledGraph, family: CutFamily | None = None) -> tuple[float, Cut]:
    """Minimum of ``|B_X| / |X|`` over cuts with ``0 < |X| <= n/2``."""
    _require_connected(g)
    family = family if family is not None else default_cut_family(g)
    if len(family) == 0:
        raise ValueError("empty cut family")
    _, boundary, _ = _cut_statistics(g, family.masks)
    size = family.masks.sum(axis=1)
    valid = (size > 0) & (2 * size <= g.n)
    if not valid.any():
        raise ValueError("no cut in the family has 0 < |X| <= n/2")
    ratios = np.where(valid, boundary / np.maximum(size, 1), np.inf)
    i = _lexicographic_argmin(family, ratios, valid)
    return float(ratios[i]), make_cut(g, family.subset(i))


def phi_prime_vs_phi_check(g: LabeledGraph, family: CutFamily | None = None):
    """Check ``Phi' <= d * Phi`` with ``d`` the maximum (true) degree."""
    family = family if family is not None else default_cut_family(g)
    phi, phi_cut = conductance(g, family)
    phi_p, phi_p_cut = boundary_phi_prime(g, family)
    d = int(g.degrees.max())
    upper = d * phi
    return BoundCheck(
        quantity="phi_prime",
        measured=phi_p,
        upper_bound=upper,
        holds=phi_p <= upper + 1e-12,
        details={
            "phi": phi,
            "max_degree": d,
            "slack": upper - phi_p,
            "phi_cut": list(phi_cut.X),
            "phi_prime_cut": list(phi_p_cut.X),
        },
    )


# ---------------------------------------------------------------------------
# Graph file format
# ---------------------------------------------------------------------------

def format_graph(g: LabeledGraph) -> str:
    lines = [f"{g.n} {g.d}"]
    lines += [" ".join(str(int(x)) for x in row) for row in g.sigma]
    lines.append(f"# {g.name}")
    return "\n".join(lines) + "\n"


def parse_graph(text: str, name: str = "file") -> LabeledGraph:
    """Parse ``n d`` then ``d`` permutation lines; ``#`` lines are comments."""
    content = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    content = [(i, ln) for i, ln in content if ln and not ln.startswith("#")]
    if not content:
        raise GraphFormatError("empty graph file", 1)
    lineno, header = content[0]
    parts = header.split()
    if len(parts) != 2:
        raise GraphFormatError(f"expected 'n d', got {header!r}", lineno)
    try:
        n, d = int(parts[0]), int(parts[1])
    except ValueError:
        raise GraphFormatError(f"expected integers 'n d', got {header!r}", lineno) from None
    if n < 1 or d < 1:
        raise GraphFormatError("n and d must be positive", lineno)
    rows = content[1:]
    if len(rows) < d:
        last = rows[-1][0] + 1 if rows else lineno + 1
        raise GraphFormatError(f"expected {d} permutation lines, found {len(rows)}", last)
    if len(rows) > d:
        raise GraphFormatError("unexpected content after permutation lines", rows[d][0])
    sigma = np.empty((d, n), dtype=np.int64)
    for a, (ln_no, ln) in enumerate(rows):
        try:
            vals = [int(x) for x in ln.split()]
        except ValueError:
            raise GraphFormatError(f"non-integer entry in {ln!r}", ln_no) from None
        if len(vals) != n:
            raise GraphFormatError(f"expected {n} entries, got {len(vals)}", ln_no)
        if sorted(vals) != list(range(n)):
            raise GraphFormatError(f"label {a} is not a permutation of 0..{n - 1}", ln_no)
        sigma[a] = vals
    try:
        return LabeledGraph(sigma, name=name)
    except InvalidGraphError as exc:
        raise GraphFormatError(str(exc), rows[0][0]) from None


def read_graph(path) -> LabeledGraph:
    path = Path(path)
    return parse_graph(path.read_text(), name=path.stem)


def write_graph(g: LabeledGraph, path) -> None:
    Path(path).write_text(format_graph(g))
