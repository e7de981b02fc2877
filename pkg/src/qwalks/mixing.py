"""
Quantum mixing measures, amplification and lower-bound verification.

All four measures are computed in one sweep over ``t = 0..T_max``:

* ``M`` and ``S`` use the averaged distribution ``Pbar_t`` (mean of
  ``P_0..P_{t-1}``; ``Pbar_0`` is taken to be ``P_0``) and hold for all
  ``t >= T``; they are certified only up to the horizon.
* ``tau`` and ``xi`` use the instantaneous ``P_t`` and an existential time
  quantifier, so each (start, subset) pair contributes its first hitting time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    CutFamily,
    LabeledGraph,
    boundary_phi_prime,
    conductance,
    default_cut_family,
    make_cut,
)
from .qwalk import (
    CoinedWalk,
    RandomUnitaryWalk,
    basis_states,
    iter_node_distributions,
    random_states,
    shift_operator,
    vertex_mask,
)
from .reports import BoundCheck, TimeEstimate
from . import spectral

DEFAULT_EPS = 0.1
DEFAULT_SEED = 1234
_TOL = 1e-12


def default_horizon(n: int) -> int:
    return math.ceil(200 * n * math.log(n))


def _coined_family(W) -> bool:
    if isinstance(W, CoinedWalk):
        return True
    return isinstance(W, RandomUnitaryWalk) and all(isinstance(w, CoinedWalk) for w in W.walks)


def default_starts(W) -> np.ndarray:
    """Flat basis indices swept as initial states.

    Coined walks on vertex-transitive labeled graphs commute with the
    translations, so the coin states at vertex 0 represent every start.
    """
    g = W.graph
    if g.transitive and _coined_family(W):
        return np.arange(g.d) * g.n
    return np.arange(g.dim)


def limits_for(W, starts: np.ndarray) -> np.ndarray:
    """Limiting node distribution for each basis start."""
    states = basis_states(W.graph, starts)
    if isinstance(W, RandomUnitaryWalk):
        return np.atleast_2d(spectral.mixture_limiting_distribution(W, states))
    dec = spectral.decompose_walk(W)
    return spectral.limiting_distribution(dec, states)


@dataclass
class MixingReport:
    eps: float
    horizon: int
    M: TimeEstimate
    S: TimeEstimate
    tau: TimeEstimate
    xi: TimeEstimate
    subset_family: str
    family_size: int
    starts: list
    curve: np.ndarray = field(repr=False, default=None)

    def measures(self) -> dict:
        return {"M": self.M, "S": self.S, "tau": self.tau, "xi": self.xi}

    def ordering_check(self) -> BoundCheck:
        """``M, tau, xi <= S`` whenever all four are finite."""
        vals = {k: v.value for k, v in self.measures().items()}
        finite = all(v is not None for v in vals.values())
        holds = not finite or max(vals["M"], vals["tau"], vals["xi"]) <= vals["S"]
        return BoundCheck(
            quantity="max(M, tau, xi)",
            measured=max(vals["M"], vals["tau"], vals["xi"]) if finite else None,
            upper_bound=vals["S"] if finite else None,
            holds=holds,
            note="" if finite else "some measure exceeds the horizon; ordering not evaluated",
            details=vals,
        )

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "horizon": self.horizon,
            "measures": {k: v.to_dict() for k, v in self.measures().items()},
            "subset_family": self.subset_family,
            "family_size": self.family_size,
            "initial_family": self.starts,
            "ordering": self.ordering_check().to_dict(),
        }


def _start_label(g: LabeledGraph, idx: int) -> list:
    return [int(idx // g.n), int(idx % g.n)]


def measure_mixing(
    W,
    eps: float = DEFAULT_EPS,
    T_max: int | None = None,
    family: CutFamily | None = None,
    starts=None,
    limits: np.ndarray | None = None,
) -> MixingReport:
    """Sweep ``M``, ``S``, ``tau`` and ``xi`` for basis-state starts.

    ``family`` defaults to the exhaustive subsets (``V`` included) up to the
    exhaustive limit, else singletons, arcs and the extremal cuts.
    """
    g = W.graph
    n = g.n
    T_max = default_horizon(n) if T_max is None else int(T_max)
    starts = default_starts(W) if starts is None else np.asarray(starts)
    if family is None:
        family = default_mixing_family(g)
    pi = limits_for(W, starts) if limits is None else np.atleast_2d(limits)
    masks = family.masks.astype(float)
    piX = pi @ masks.T
    # Universal-in-X conditions at a fixed time bind on singletons.
    smasks = np.eye(n) if family.all_subsets else masks
    spiX = pi @ smasks.T

    acc = np.zeros_like(pi)
    curve = np.empty(T_max + 1)
    last_M = last_S = -1
    wit_M: dict = {}
    wit_S: dict = {}
    fill_t = np.full(piX.shape, -1, dtype=np.int64)
    disp_t = np.full(piX.shape, -1, dtype=np.int64)
    low = (1 - eps) * piX - _TOL
    high = (1 + eps) * piX + _TOL

    for t, P in enumerate(iter_node_distributions(W, basis_states(g, starts), T_max + 1)):
        avg = P if t == 0 else acc / t
        tv = np.abs(avg - pi).sum(axis=1)
        curve[t] = tv.max()
        if curve[t] > eps + _TOL:
            last_M = t
            wit_M = {"t": t, "start": _start_label(g, starts[int(tv.argmax())])}
        dev = np.abs(spiX - avg @ smasks.T) - eps * spiX
        if dev.max() > _TOL:
            last_S = t
            s, x = np.unravel_index(dev.argmax(), dev.shape)
            wit_S = {"t": t, "start": _start_label(g, starts[s]), "X": _subset(smasks, x)}
        open_f, open_d = fill_t < 0, disp_t < 0
        if open_f.any() or open_d.any():
            PX = P @ masks.T
            fill_t[open_f & (PX >= low)] = t
            disp_t[open_d & (PX <= high)] = t
        acc += P

    def first_hit(times):
        if (times < 0).any():
            s, x = np.unravel_index(np.argmax(times < 0), times.shape)
            return TimeEstimate(None, T_max, {"start": _start_label(g, starts[s]), "X": family.subset(x)})
        s, x = np.unravel_index(times.argmax(), times.shape)
        return TimeEstimate(int(times[s, x]), T_max,
                            {"t": int(times[s, x]), "start": _start_label(g, starts[s]), "X": family.subset(x)})

    def last(v, w):
        return TimeEstimate(None if v >= T_max else v + 1, T_max, w)

    return MixingReport(
        eps=eps,
        horizon=T_max,
        M=last(last_M, wit_M),
        S=last(last_S, wit_S),
        tau=first_hit(fill_t),
        xi=first_hit(disp_t),
        subset_family=family.name,
        family_size=len(family),
        starts=[_start_label(g, s) for s in starts],
        curve=curve,
    )


def _subset(masks, x):
    return [int(v) for v in np.flatnonzero(masks[x])]


def default_mixing_family(g: LabeledGraph, extra=()) -> CutFamily:
    """Exhaustive (with ``V``) for small graphs; else singletons, arcs, extremal cuts and ``extra``."""
    from .graph import EXHAUSTIVE_CUT_LIMIT, subsets_family

    if g.n <= EXHAUSTIVE_CUT_LIMIT:
        return default_cut_family(g, include_full=True)
    base = default_cut_family(g, include_full=True)
    _, phi_cut = conductance(g, base)
    _, phip_cut = boundary_phi_prime(g, base)
    extremal = [phi_cut.X, phip_cut.X, *extra]
    fam = base | subsets_family(g.n, extremal, "extremal")
    return CutFamily(fam.masks, base.name + "+extremal")


def estimate_mixing_time(W, eps=DEFAULT_EPS, T_max=None, starts=None) -> TimeEstimate:
    g = W.graph
    return measure_mixing(W, eps, T_max, _trivial_family(g), starts).M


def estimate_sampling_time(W, eps=DEFAULT_EPS, T_max=None, family=None, starts=None) -> TimeEstimate:
    return measure_mixing(W, eps, T_max, family, starts).S


def estimate_filling_time(W, eps=DEFAULT_EPS, T_max=None, family=None, starts=None) -> TimeEstimate:
    return measure_mixing(W, eps, T_max, family, starts).tau


def estimate_dispersion_time(W, eps=DEFAULT_EPS, T_max=None, family=None, starts=None) -> TimeEstimate:
    return measure_mixing(W, eps, T_max, family, starts).xi


def random_start_mixing_time(W, eps=DEFAULT_EPS, count: int = 100, seed: int = DEFAULT_SEED,
                             T_max: int | None = None) -> TimeEstimate:
    """Worst mixing time over seeded Haar-random initial states.

    Exploratory: each state is compared with its own limiting distribution
    and no bound is asserted on the result.
    """
    if isinstance(W, RandomUnitaryWalk):
        raise TypeError("random_start_mixing_time needs a unitary walk")
    g = W.graph
    T_max = default_horizon(g.n) if T_max is None else int(T_max)
    states = random_states(g.dim, count, np.random.default_rng(seed))
    pi = spectral.limiting_distribution(spectral.decompose_walk(W), states)
    acc = np.zeros_like(pi)
    last, witness = -1, {}
    for t, P in enumerate(iter_node_distributions(W, states, T_max + 1)):
        avg = P if t == 0 else acc / t
        tv = np.abs(avg - pi).sum(axis=1)
        if tv.max() > eps + _TOL:
            last, witness = t, {"t": t, "state": int(tv.argmax()), "seed": seed}
        acc += P
    return TimeEstimate(None if last >= T_max else last + 1, T_max, witness)


def _trivial_family(g: LabeledGraph) -> CutFamily:
    return CutFamily(np.ones((1, g.n), dtype=bool), "V")


# --- amplification --------------------------------------------------------------

@dataclass
class AmplificationResult:
    k: int
    stage_length: int
    P_amp: np.ndarray
    pi: np.ndarray
    eps0: float
    distances: np.ndarray
    final_distance: float
    seed: int | None = None
    monte_carlo: dict | None = None

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "stage_length": self.stage_length,
            "eps0": self.eps0,
            "distances": self.distances,
            "final_distance": self.final_distance,
            "seed": self.seed,
            "P_amp": self.P_amp,
            "monte_carlo": self.monte_carlo,
        }


class StartDependentLimitError(ValueError):
    pass


def stage_tables(W, M: int) -> np.ndarray:
    """``P_t(u | a, v)`` for ``t < M`` and every basis start, shape ``(M, dn, n)``."""
    return np.array(list(iter_node_distributions(W, basis_states(W.graph), M)))


def amplification_matrix(W, M: int, tables: np.ndarray | None = None) -> np.ndarray:
    """``P[v, u] = (1/d) sum_a Pbar_M(u | a, v)``: random coin, random time below ``M``."""
    g = W.graph
    tables = stage_tables(W, M) if tables is None else tables
    avg = tables.mean(axis=0)  # (dn, n), row a*n+v
    return avg.reshape(g.d, g.n, g.n).mean(axis=0)


def amplify(W, M: int, k: int, seed: int | None = DEFAULT_SEED, D0: np.ndarray | None = None,
            trials: int = 0) -> AmplificationResult:
    """Equal-stage amplification: ``k`` rounds of run-for-random-time-then-measure.

    The exact ``k``-stage distributions are ``D0 P_amp^k``. With ``trials > 0``
    the protocol is also simulated from ``D0`` (a single distribution) and the
    empirical frequencies are reported alongside.
    """
    g = W.graph
    if M < 1 or k < 0:
        raise ValueError("need M >= 1 and k >= 0")
    limits = limits_for(W, np.arange(g.dim))
    if not spectral.start_independent(limits):
        spread = float(np.abs(limits - limits[0]).max())
        raise StartDependentLimitError(
            f"limiting distribution depends on the initial state (spread {spread:.3g}); amplification needs a start-independent limit")
    pi = limits[0]
    tables = stage_tables(W, M)
    P = amplification_matrix(W, M, tables)
    eps0 = float(np.abs(P - pi).sum(axis=1).max())
    D = np.eye(g.n) if D0 is None else np.atleast_2d(np.asarray(D0, dtype=float))
    Dk = D @ np.linalg.matrix_power(P, k)
    distances = np.abs(Dk - pi).sum(axis=1)
    mc = None
    if trials:
        if D.shape[0] != 1:
            raise ValueError("Monte Carlo mode needs a single initial distribution D0")
        mc = _monte_carlo(tables, g, D[0], k, trials, np.random.default_rng(seed))
        mc["exact"] = Dk[0]
    return AmplificationResult(k, M, P, pi, eps0, distances, float(distances.max()), seed, mc)


def _monte_carlo(tables, g, D0, k, trials, rng) -> dict:
    M = tables.shape[0]
    cdf = np.cumsum(tables, axis=2)
    v = rng.choice(g.n, size=trials, p=D0 / D0.sum())
    for _ in range(k):
        a = rng.integers(g.d, size=trials)
        t = rng.integers(M, size=trials)
        row = cdf[t, a * g.n + v]
        u = rng.random(trials)[:, None] * row[:, -1:]
        v = np.minimum((u >= row).sum(axis=1), g.n - 1)
    freq = np.bincount(v, minlength=g.n) / trials
    return {"trials": trials, "frequencies": freq}


def contraction_check(result: AmplificationResult) -> BoundCheck:
    """``||v_i P_amp|| <= eps0 ||v_i||`` for ``v_i = e_i - pi``."""
    n = len(result.pi)
    V = np.eye(n) - result.pi
    lhs = np.abs(V @ result.P_amp).sum(axis=1)
    rhs = result.eps0 * np.abs(V).sum(axis=1)
    return BoundCheck("contraction", float((lhs / rhs).max()) if rhs.min() > 0 else float(lhs.max()),
                      upper_bound=1.0, holds=bool(np.all(lhs <= rhs + 1e-12)),
                      details={"eps0": result.eps0})


@dataclass
class AmplifiedBound:
    T: int
    stages: int
    stage_length: int
    relative_error: float
    pointwise_ok: bool
    stages_for_pointwise: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def amplified_sampling_bound(W, eps: float, M: int) -> AmplifiedBound:
    """``ceil(log n / log(1/eps)) * M`` and a simulation check of the primed sampling condition.

    The check measures the worst relative pointwise error ``|D(v) - pi(v)| / pi(v)``
    after that many stages and also reports the smallest stage count at which
    it drops to ``eps``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    g = W.graph
    stages = max(1, math.ceil(math.log(g.n) / math.log(1 / eps)))
    res = amplify(W, M, stages)
    P, pi = res.P_amp, res.pi

    def rel(k):
        Dk = np.linalg.matrix_power(P, k)
        return float((np.abs(Dk - pi) / pi).max())

    err = rel(stages)
    need = stages
    while rel(need) > eps and need < stages + 64:
        need += 1
    return AmplifiedBound(stages * M, stages, M, err, err <= eps, need)


# --- lower bounds -----------------------------------------------------------------------

def filling_lower_bound(cut, n: int, eps: float) -> float:
    Xc = n - len(cut.X)
    return (1 - eps) * len(cut.X) * Xc / (len(cut.boundary) * n) if cut.boundary else math.inf


def _basis_projection_means(U: np.ndarray, start_mask: np.ndarray, target_mask: np.ndarray, steps: int) -> np.ndarray:
    """Mean over basis starts in ``start_mask`` of ``||P_target U^t e||^2`` for ``t = 0..steps``."""
    S = np.eye(U.shape[0], dtype=complex)[start_mask]
    out = []
    for t in range(steps + 1):
        out.append(float((np.abs(S[:, target_mask]) ** 2).sum(axis=1).mean()))
        S = S @ U.T
    return np.array(out)


def _walk_matrix(W):
    return W.matrix


def lower_bound_filling_check(W, g: LabeledGraph, cut, eps: float, measured_tau: TimeEstimate | int | None,
                              steps: int | None = None, n_random: int = 1000, seed: int = DEFAULT_SEED) -> BoundCheck:
    """Boundary lower bound on the filling time for one cut.

    Verifies ``tau >= (1-eps)|X||Xc| / (|B| n)`` and, on the way, the
    boundary-projection average (exact mean over the ``Xc`` basis states) and
    the one-step leakage inequality on seeded random states.
    """
    cut = cut if hasattr(cut, "boundary") else make_cut(g, cut)
    tau = measured_tau.value if isinstance(measured_tau, TimeEstimate) else measured_tau
    horizon = measured_tau.horizon if isinstance(measured_tau, TimeEstimate) else None
    bound = filling_lower_bound(cut, g.n, eps)
    notes = []
    if tau is None:
        holds_tau = horizon is None or horizon >= bound
        notes.append("measured tau exceeds the horizon")
    else:
        holds_tau = tau >= bound - 1e-12
    if bound < 1:
        notes.append("bound below one step (non-binding)")

    U = _walk_matrix(W)
    xmask = vertex_mask(g, cut.X)
    bmask = vertex_mask(g, cut.boundary)
    steps = (tau if tau is not None else 50) if steps is None else steps
    means = _basis_projection_means(U, ~xmask, bmask, steps)
    lbc1 = len(cut.boundary) / (g.n - len(cut.X))
    lbc1_ok = bool(means.max() <= lbc1 + 1e-10)

    rng = np.random.default_rng(seed)
    alpha = random_states(g.dim, n_random, rng)
    w = np.abs(alpha) ** 2
    after = np.abs(alpha @ U.T) ** 2
    slack = (w[:, xmask].sum(1) + w[:, bmask].sum(1)) - after[:, xmask].sum(1)
    lbc2_ok = bool(slack.min() >= -1e-10)
    return BoundCheck(
        quantity="filling_time",
        measured=tau,
        lower_bound=bound,
        holds=holds_tau and lbc1_ok and lbc2_ok,
        note="; ".join(notes),
        details={
            "X": list(cut.X), "B": list(cut.boundary), "eps": eps,
            "boundary_projection_max_mean": float(means.max()), "boundary_projection_bound": lbc1,
            "boundary_projection_ok": lbc1_ok,
            "leakage_min_slack": float(slack.min()), "leakage_ok": lbc2_ok, "random_states": n_random,
        },
    )


def cut_edge_mask(g: LabeledGraph, X) -> np.ndarray:
    """Flat mask of ``|b, v>`` with ``v`` outside ``X`` and ``sigma_b(v)`` inside."""
    inside = np.zeros(g.n, dtype=bool)
    inside[list(X)] = True
    return (~inside[None, :] & inside[g.sigma]).ravel()


def coined_lower_bound_check(W: CoinedWalk, g: LabeledGraph, cut, eps: float, measured_tau,
                             steps: int = 50, n_random: int = 1000, seed: int = DEFAULT_SEED) -> BoundCheck:
    """Cut-edge lower bound for a coined walk.

    Works with the shift-then-coin operator ``U' = (C x I) S``; since
    ``U^t = C^-1 U'^t C`` the node distributions of ``U^t alpha`` and
    ``U'^t (C alpha)`` coincide, which is checked explicitly.
    """
    if not isinstance(W, CoinedWalk):
        raise TypeError("coined_lower_bound_check needs a CoinedWalk")
    cut = cut if hasattr(cut, "boundary") else make_cut(g, cut)
    tau = measured_tau.value if isinstance(measured_tau, TimeEstimate) else measured_tau
    horizon = measured_tau.horizon if isinstance(measured_tau, TimeEstimate) else None
    Cl = W.coin_layer()
    Up = Cl @ shift_operator(g)
    xmask = vertex_mask(g, cut.X)
    cmask = cut_edge_mask(g, cut.X)
    n_cut = int(cmask.sum())
    Xc = g.n - len(cut.X)

    # Conjugation identity on all basis starts.
    a = np.eye(g.dim, dtype=complex)
    b = a @ Cl.T
    conj_err = 0.0
    for _ in range(steps + 1):
        pa = (np.abs(a) ** 2).reshape(g.dim, g.d, g.n).sum(1)
        pb = (np.abs(b) ** 2).reshape(g.dim, g.d, g.n).sum(1)
        conj_err = max(conj_err, float(np.abs(pa - pb).max()))
        a = W.apply(a)
        b = b @ Up.T

    means = _basis_projection_means(Up, ~xmask, cmask, steps)
    lbc3 = n_cut / (Xc * g.d)
    lbc3_ok = bool(means.max() <= lbc3 + 1e-10)

    rng = np.random.default_rng(seed)
    s = random_states(g.dim, n_random, rng)
    worst = math.inf
    for _ in range(steps):
        w = np.abs(s) ** 2
        nxt = s @ Up.T
        lhs = (np.abs(nxt[:, xmask]) ** 2).sum(1)
        rhs = w[:, xmask].sum(1) + w[:, cmask].sum(1)
        worst = min(worst, float((rhs - lhs).min()))
        s = nxt
    lbc4_ok = worst >= -1e-10

    bound = (1 - eps) * len(cut.X) * Xc * g.d / (n_cut * g.n) if n_cut else math.inf
    if tau is None:
        holds_tau = horizon is None or horizon >= bound
    else:
        holds_tau = tau >= bound - 1e-12
    return BoundCheck(
        quantity="filling_time",
        measured=tau,
        lower_bound=bound,
        holds=holds_tau and lbc3_ok and lbc4_ok and conj_err <= 1e-12,
        details={
            "X": list(cut.X), "cut_edges": n_cut, "eps": eps,
            "edge_projection_max_mean": float(means.max()), "edge_projection_bound": lbc3,
            "edge_projection_ok": lbc3_ok, "edge_leakage_min_slack": worst, "edge_leakage_ok": lbc4_ok,
            "conjugation_error": conj_err, "random_states": n_random, "steps": steps,
        },
    )


def nonunitary_lower_bound_check(W, g: LabeledGraph, cut, eps: float, measured_S) -> BoundCheck:
    """``S >= (1 - 3 eps)|X| / (2 (1 + eps)|B|)``; vacuous for ``eps >= 1/3``."""
    cut = cut if hasattr(cut, "boundary") else make_cut(g, cut)
    S = measured_S.value if isinstance(measured_S, TimeEstimate) else measured_S
    horizon = measured_S.horizon if isinstance(measured_S, TimeEstimate) else None
    bound = (1 - 3 * eps) * len(cut.X) / (2 * (1 + eps) * len(cut.boundary))
    note = "vacuous: eps >= 1/3" if eps >= 1 / 3 else ""
    if S is None:
        holds = horizon is None or horizon >= bound
        note = "; ".join(filter(None, [note, "measured S exceeds the horizon"]))
    else:
        holds = S >= bound - 1e-12
    return BoundCheck("sampling_time", S, lower_bound=bound, holds=holds, note=note,
                      details={"X": list(cut.X), "B": list(cut.boundary), "eps": eps})
