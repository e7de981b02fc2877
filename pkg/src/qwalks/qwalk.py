"""
Discrete-time quantum walk dynamics.

States are complex vectors of length ``d * n`` with the amplitude of
``|a, v>`` stored at index ``a * n + v``. Batches of states are arrays of
shape ``(m, d * n)``; every evolution routine accepts either form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .graph import LabeledGraph, make_cut
from .reports import BoundCheck

NORM_TOL = 1e-8
UNITARY_TOL = 1e-12
LOCALITY_TOL = 1e-14


class NonUnitaryError(ValueError):
    pass


def hadamard_coin() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def dft_coin(d: int) -> np.ndarray:
    """``C[j, k] = exp(2 pi i j k / d) / sqrt(d)``."""
    if d < 2:
        raise ValueError(f"dft_coin needs d >= 2, got {d}")
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


def unitarity_residual(U: np.ndarray) -> float:
    """``max |U^dagger U - I|``."""
    U = np.asarray(U)
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


def shift_operator(g: LabeledGraph) -> np.ndarray:
    """Permutation matrix sending ``|a, v>`` to ``|a, sigma_a(v)>``."""
    n, d = g.n, g.d
    src = np.arange(d * n)
    dst = (np.arange(d)[:, None] * n + g.sigma).ravel()
    S = np.zeros((d * n, d * n))
    S[dst, src] = 1.0
    return S


def basis_state(g: LabeledGraph, a: int, v: int) -> np.ndarray:
    if not (0 <= a < g.d and 0 <= v < g.n):
        raise ValueError(f"basis state |{a},{v}> out of range for d={g.d}, n={g.n}")
    s = np.zeros(g.dim, dtype=complex)
    s[a * g.n + v] = 1.0
    return s


def basis_states(g: LabeledGraph, indices: Sequence[int] | None = None) -> np.ndarray:
    """Rows of the identity, optionally restricted to the given flat indices."""
    eye = np.eye(g.dim, dtype=complex)
    return eye if indices is None else eye[list(indices)]


def random_states(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unit vectors (normalized complex Gaussians)."""
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class CoinedWalk:
    """``U = S (C x I)``: coin on every vertex block, then the labeled shift."""

    coin: np.ndarray
    graph: LabeledGraph

    def __post_init__(self):
        C = np.array(self.coin, dtype=complex)
        if C.shape != (self.graph.d, self.graph.d):
            raise ValueError(f"coin shape {C.shape} does not match degree {self.graph.d}")
        res = unitarity_residual(C)
        if res > UNITARY_TOL:
            raise NonUnitaryError(f"coin is not unitary (residual {res:.3g})")
        C.setflags(write=False)
        object.__setattr__(self, "coin", C)

    @property
    def dim(self) -> int:
        return self.graph.dim

    @cached_property
    def _inverse_sigma(self) -> np.ndarray:
        inv = np.empty_like(self.graph.sigma)
        rows = np.arange(self.graph.d)[:, None]
        inv[rows, self.graph.sigma] = np.arange(self.graph.n)[None, :]
        return inv

    def apply(self, states: np.ndarray) -> np.ndarray:
        d, n = self.graph.d, self.graph.n
        psi = states.reshape(states.shape[:-1] + (d, n))
        psi = np.einsum("ab,...bv->...av", self.coin, psi)
        # new[a, sigma_a(v)] = psi[a, v]  <=>  new[a, u] = psi[a, sigma_a^{-1}(u)]
        psi = np.take_along_axis(psi, np.broadcast_to(self._inverse_sigma, psi.shape), axis=-1)
        return psi.reshape(states.shape)

    def coin_layer(self) -> np.ndarray:
        """``C x I`` as a dense matrix."""
        return np.kron(self.coin, np.eye(self.graph.n))

    @cached_property
    def matrix(self) -> np.ndarray:
        U = shift_operator(self.graph) @ self.coin_layer()
        U.setflags(write=False)
        return U


@dataclass(frozen=True, eq=False)
class UnitaryWalk:
    """An explicit ``dn x dn`` walk matrix on ``graph``."""

    U: np.ndarray
    graph: LabeledGraph
    check_unitary: bool = True

    def __post_init__(self):
        U = np.array(self.U, dtype=complex)
        if U.shape != (self.graph.dim, self.graph.dim):
            raise ValueError(f"matrix shape {U.shape} does not match dn = {self.graph.dim}")
        if self.check_unitary:
            res = unitarity_residual(U)
            if res > UNITARY_TOL:
                raise NonUnitaryError(f"walk matrix is not unitary (residual {res:.3g})")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def dim(self) -> int:
        return self.graph.dim

    @property
    def matrix(self) -> np.ndarray:
        return self.U

    def apply(self, states: np.ndarray) -> np.ndarray:
        return states @ self.U.T


@dataclass(frozen=True, eq=False)
class RandomUnitaryWalk:
    """Each step applies constituent ``i`` with probability ``probs[i]``."""

    walks: tuple
    probs: np.ndarray
    graph: LabeledGraph = field(init=False)

    def __post_init__(self):
        walks = tuple(self.walks)
        probs = np.asarray(self.probs, dtype=float)
        if not walks or len(walks) != len(probs):
            raise ValueError("need one probability per constituent walk")
        if (probs < 0).any() or abs(probs.sum() - 1) > 1e-12:
            raise ValueError("mixture probabilities must be nonnegative and sum to 1")
        g = walks[0].graph
        if any(w.graph != g for w in walks):
            raise ValueError("all constituents must act on the same graph")
        object.__setattr__(self, "walks", walks)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "graph", g)

    @property
    def dim(self) -> int:
        return self.graph.dim

    def sample(self, rng: np.random.Generator):
        return self.walks[rng.choice(len(self.walks), p=self.probs)]

    def apply_channel(self, rho: np.ndarray) -> np.ndarray:
        """Expected evolution ``rho -> sum_i p_i U_i rho U_i^dagger``."""
        out = np.zeros_like(rho, dtype=complex)
        for p, w in zip(self.probs, self.walks):
            U = w.matrix
            out += p * (U @ rho @ U.conj().T)
        return out


def _check_dim(W, states):
    if states.shape[-1] != W.dim:
        raise ValueError(f"state dimension {states.shape[-1]} does not match walk dimension {W.dim}")


def step(W, s: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """One walk step. Mixtures need a seeded ``rng`` to pick the constituent."""
    s = np.asarray(s, dtype=complex)
    _check_dim(W, s)
    if isinstance(W, RandomUnitaryWalk):
        if rng is None:
            raise ValueError("a random-unitary walk needs an explicit rng")
        W = W.sample(rng)
    return W.apply(s)


def evolve(W, s: np.ndarray, t: int, rng: np.random.Generator | None = None) -> np.ndarray:
    for _ in range(t):
        s = step(W, s, rng)
    return s


def node_distribution(s: np.ndarray, n: int) -> np.ndarray:
    """``P(v) = sum_a |<a, v|s>|^2``; rows of a batch are handled independently."""
    s = np.asarray(s)
    p = (np.abs(s) ** 2).reshape(s.shape[:-1] + (-1, n)).sum(axis=-2)
    total = p.sum(axis=-1)
    if np.any(np.abs(total - 1) > NORM_TOL):
        raise ValueError(f"state norm drifted: squared norm {np.ravel(total)[np.argmax(np.abs(np.ravel(total) - 1))]!r}")
    return p


def iter_node_distributions(W, states: np.ndarray, T: int) -> Iterator[np.ndarray]:
    """Yield ``P_t`` for ``t = 0..T-1`` (batched over the rows of ``states``).

    For a random-unitary walk the yielded distributions are expectations over
    the random choices, obtained by evolving density matrices.
    """
    s = np.asarray(states, dtype=complex)
    _check_dim(W, s)
    n = W.graph.n
    if isinstance(W, RandomUnitaryWalk):
        rho = s[..., :, None] * s[..., None, :].conj()
        for t in range(T):
            diag = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
            yield node_distribution(np.sqrt(np.clip(diag, 0, None)), n)
            if t + 1 < T:
                rho = W.apply_channel(rho)
        return
    for t in range(T):
        yield node_distribution(s, n)
        if t + 1 < T:
            s = W.apply(s)


def average_distribution(W, alpha0: np.ndarray, T: int) -> np.ndarray:
    """``(1/T) sum_{t<T} P_t`` in a single pass."""
    if T < 1:
        raise ValueError("T must be positive")
    acc = None
    for p in iter_node_distributions(W, alpha0, T):
        acc = p.copy() if acc is None else acc + p
    return acc / T


def locality_check(W, g: LabeledGraph | None = None, tol: float = LOCALITY_TOL) -> bool:
    """True iff ``<a', v'|U|a, v>`` vanishes whenever ``v'`` is neither ``v`` nor adjacent."""
    g = W.graph if g is None else g
    U = np.asarray(W.matrix if hasattr(W, "matrix") else W)
    allowed = g.adjacency | np.eye(g.n, dtype=bool)
    # Row index a'*n+v', column a*n+v.
    mask = np.tile(allowed.T, (g.d, g.d))
    return bool(np.abs(U[~mask]).max(initial=0.0) <= tol)


def vertex_mask(g: LabeledGraph, X) -> np.ndarray:
    m = np.zeros(g.n, dtype=bool)
    m[list(X)] = True
    return np.tile(m, g.d)


def projection_inequality_check(W, g: LabeledGraph, X, alpha: np.ndarray, tol: float = 1e-10) -> BoundCheck:
    """``P_X(U alpha) <= P_X(alpha) + P_B(alpha)`` for a local walk."""
    cut = make_cut(g, X)
    mx, mb = vertex_mask(g, cut.X), vertex_mask(g, cut.boundary)
    alpha = np.atleast_2d(np.asarray(alpha, dtype=complex))
    _check_dim(W, alpha)
    w = np.abs(alpha) ** 2
    lhs = (np.abs(W.apply(alpha)) ** 2)[:, mx].sum(axis=1)
    rhs = w[:, mx].sum(axis=1) + w[:, mb].sum(axis=1)
    slack = rhs - lhs
    worst = int(np.argmin(slack))
    return BoundCheck(
        quantity="P_X(U alpha)",
        measured=float(lhs[worst]),
        upper_bound=float(rhs[worst]),
        holds=bool(np.all(slack >= -tol)),
        details={"X": list(cut.X), "B": list(cut.boundary), "states": len(alpha),
                 "min_slack": float(slack[worst])},
    )


def complete_mixture_check(W, g: LabeledGraph | None = None, t_max: int = 100, tol: float = 1e-10) -> BoundCheck:
    """Average of node distributions over all ``dn`` basis starts stays uniform."""
    g = W.graph if g is None else g
    if isinstance(W, RandomUnitaryWalk):
        raise TypeError("complete_mixture_check needs a unitary walk")
    worst, worst_t = 0.0, 0
    for t, P in enumerate(iter_node_distributions(W, basis_states(g), t_max + 1)):
        dev = float(np.abs(P.mean(axis=0) - 1.0 / g.n).max())
        if dev > worst:
            worst, worst_t = dev, t
    return BoundCheck(
        quantity="complete_mixture_deviation",
        measured=worst,
        upper_bound=tol,
        holds=worst <= tol,
        details={"t_max": t_max, "worst_t": worst_t},
    )
