"""
Simple random walk baseline.

Distances follow the convention used throughout the package: the total
variation between two distributions is ``sum_i |p_i - q_i|`` with no 1/2.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .graph import CutFamily, InvalidGraphError, LabeledGraph, conductance, default_cut_family
from .reports import BoundCheck, TimeEstimate

_TOL = 1e-12


class SpectralGap(NamedTuple):
    lambda2: float
    gap: float
    lambda_min: float


def transition_matrix(g: LabeledGraph) -> np.ndarray:
    """Row-stochastic ``P[u, v] = 1/deg(u)`` over true neighbours (padding loops dropped)."""
    deg = g.degrees
    if (deg == 0).any():
        raise InvalidGraphError(f"isolated vertex {int(np.flatnonzero(deg == 0)[0])}")
    if not g.is_connected():
        raise InvalidGraphError(f"{g.name} is disconnected")
    return g.adjacency / deg[:, None].astype(float)


def stationary(g: LabeledGraph) -> np.ndarray:
    if not g.is_connected():
        raise InvalidGraphError(f"{g.name} is disconnected")
    deg = g.degrees.astype(float)
    return deg / deg.sum()


def _stationary_from_P(P: np.ndarray) -> np.ndarray:
    # Simple-walk kernels: pi is proportional to the number of neighbours.
    support = (P > 0).sum(axis=1).astype(float)
    return support / support.sum()


def evolve(P: np.ndarray, D0: np.ndarray, t: int) -> np.ndarray:
    """Exact ``t``-step evolution of a row distribution, no renormalization."""
    P = np.asarray(P, dtype=float)
    D = np.array(D0, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or D.shape[-1] != P.shape[0]:
        raise ValueError(f"dimension mismatch: P {P.shape}, D0 {D.shape}")
    if t < 0:
        raise ValueError("t must be nonnegative")
    for _ in range(t):
        D = D @ P
    return D


def spectral_gap(P: np.ndarray, pi: np.ndarray | None = None) -> SpectralGap:
    """Second-largest and smallest eigenvalue of a reversible kernel.

    ``P`` is symmetrized as ``D^{1/2} P D^{-1/2}`` with ``D = diag(pi)`` so a
    Hermitian solver applies.
    """
    P = np.asarray(P, dtype=float)
    pi = _stationary_from_P(P) if pi is None else np.asarray(pi, dtype=float)
    s = np.sqrt(pi)
    A = s[:, None] * P / s[None, :]
    A = 0.5 * (A + A.T)
    try:
        eig = np.linalg.eigvalsh(A)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    eig = eig[::-1]
    lam2 = float(eig[1]) if len(eig) > 1 else float("nan")
    return SpectralGap(lam2, 1.0 - lam2, float(eig[-1]))


def default_horizon(n: int) -> int:
    return 50 * n * n


def _fold(last_violation: int, horizon: int, witness: dict) -> TimeEstimate:
    if last_violation >= horizon:
        return TimeEstimate(None, horizon, witness)
    return TimeEstimate(last_violation + 1, horizon, witness)


def classical_sweep(P, eps, T_max=None, family: CutFamily | None = None, pi=None):
    """Mixing, filling and dispersion times in one pass over ``t = 0..T_max``.

    Initial distributions are the point masses (total variation to ``pi`` is
    convex, so they are the extreme cases). All three quantities use the
    "for all ``t >= T``" quantifier, certified up to ``T_max``.

    Returns
    -------
    dict with keys ``mixing``, ``filling``, ``dispersion`` (``TimeEstimate``;
    the latter two only when ``family`` is given) and ``curve`` (max total
    variation over starts at each ``t``).
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    pi = _stationary_from_P(P) if pi is None else np.asarray(pi, dtype=float)
    T_max = default_horizon(n) if T_max is None else int(T_max)

    masks = None
    if family is not None:
        # All-subset families bind on singletons at any fixed time.
        masks = np.eye(n) if family.all_subsets else family.masks.astype(float)
        piX = masks @ pi

    D = np.eye(n)
    curve = np.empty(T_max + 1)
    last = {"mixing": -1, "filling": -1, "dispersion": -1}
    wit = {"mixing": {}, "filling": {}, "dispersion": {}}
    for t in range(T_max + 1):
        tv = np.abs(D - pi).sum(axis=1)
        curve[t] = tv.max()
        if curve[t] > eps + _TOL:
            last["mixing"] = t
            wit["mixing"] = {"t": t, "start": int(tv.argmax())}
        if masks is not None:
            DX = D @ masks.T
            low = DX < (1 - eps) * piX - _TOL
            if low.any():
                s, x = np.unravel_index(low.argmax(), low.shape)
                last["filling"] = t
                wit["filling"] = {"t": t, "start": int(s), "X": _subset(masks, x)}
            high = DX > (1 + eps) * piX + _TOL
            if high.any():
                s, x = np.unravel_index(high.argmax(), high.shape)
                last["dispersion"] = t
                wit["dispersion"] = {"t": t, "start": int(s), "X": _subset(masks, x)}
        if t < T_max:
            D = D @ P

    out = {"mixing": _fold(last["mixing"], T_max, wit["mixing"]), "curve": curve}
    if masks is not None:
        out["filling"] = _fold(last["filling"], T_max, wit["filling"])
        out["dispersion"] = _fold(last["dispersion"], T_max, wit["dispersion"])
    return out


def _subset(masks, x):
    return [int(v) for v in np.flatnonzero(masks[x])]


def classical_mixing_time(P, eps, T_max=None) -> TimeEstimate:
    return classical_sweep(P, eps, T_max)["mixing"]


def classical_filling_time(P, eps, T_max=None, family: CutFamily | None = None) -> TimeEstimate:
    family = family if family is not None else _family_for(P)
    return classical_sweep(P, eps, T_max, family)["filling"]


def classical_dispersion_time(P, eps, T_max=None, family: CutFamily | None = None) -> TimeEstimate:
    family = family if family is not None else _family_for(P)
    return classical_sweep(P, eps, T_max, family)["dispersion"]


def _family_for(P) -> CutFamily:
    from .graph import exhaustive_cuts, singleton_cuts, arc_cuts, EXHAUSTIVE_CUT_LIMIT

    n = np.asarray(P).shape[0]
    if n <= EXHAUSTIVE_CUT_LIMIT:
        return exhaustive_cuts(n, include_full=True)
    return singleton_cuts(n) | arc_cuts(n)


def check_spect_bounds(P, eps, T_max=None, measured: TimeEstimate | None = None) -> BoundCheck:
    """Compare measured ``M_eps`` with the spectral-gap sandwich.

    lower = ``lambda2 / ((1 - lambda2) log(2 eps))``,
    upper = ``(max_i log(1/pi_i) + log(1/eps)) / (1 - lambda2)``.

    The lower side is evaluated literally; for ``eps < 1/2`` it is negative
    (vacuous) and at ``eps = 1/2`` it is undefined and skipped.

    For a non-lazy walk the decay rate is ``lambda_* = max(lambda2, |lambda_min|)``,
    not ``lambda2``, so the literal upper side can fail (odd cycles, complete
    graphs). ``details`` therefore also carries the upper side evaluated with
    ``1 - lambda_*`` and whether the measurement respects it.
    """
    P = np.asarray(P, dtype=float)
    pi = _stationary_from_P(P)
    lam2, gap, lam_min = spectral_gap(P, pi)
    measured = classical_mixing_time(P, eps, T_max) if measured is None else measured
    notes = []
    log2e = math.log(2 * eps)
    if abs(log2e) < 1e-15 or gap <= 0:
        lower = None
        notes.append("lower bound undefined (log 2eps = 0 or zero gap)")
    else:
        lower = lam2 / (gap * log2e)
        if lower <= 0:
            notes.append("lower bound non-positive (vacuous)")
    numer = float(np.max(-np.log(pi))) + math.log(1 / eps)
    upper = numer / gap if gap > 0 else None
    slem = max(lam2, abs(lam_min))
    upper_slem = numer / (1 - slem) if slem < 1 - 1e-12 else None
    if measured.exceeded:
        notes.append(f"measured M exceeds horizon {measured.horizon}")
        m = None
        holds = upper is None or measured.horizon < upper
        slem_holds = upper_slem is None or measured.horizon < upper_slem
    else:
        m = measured.value
        holds = (lower is None or m >= lower - 1e-9) and (upper is None or m <= upper + 1e-9)
        slem_holds = (lower is None or m >= lower - 1e-9) and (upper_slem is None or m <= upper_slem + 1e-9)
        if upper is not None and m > upper + 1e-9 and abs(lam_min) > lam2:
            notes.append("upper side fails: |lambda_min| exceeds lambda2 so lambda2 does not govern convergence")
    return BoundCheck(
        quantity="classical_mixing_time",
        measured=m,
        lower_bound=lower,
        upper_bound=upper,
        holds=holds,
        note="; ".join(notes),
        details={"eps": eps, "lambda2": lam2, "lambda_min": lam_min, "gap": gap,
                 "upper_bound_slem": upper_slem, "slem_holds": slem_holds},
    )


def check_cond_bounds(g: LabeledGraph, family: CutFamily | None = None) -> BoundCheck:
    """``Phi^2 / 2 <= 1 - lambda2 <= 2 Phi`` for the simple walk on ``g``."""
    family = family if family is not None else default_cut_family(g)
    phi, cut = conductance(g, family)
    gap = spectral_gap(transition_matrix(g), stationary(g)).gap
    lower, upper = phi * phi / 2, 2 * phi
    return BoundCheck(
        quantity="spectral_gap",
        measured=gap,
        lower_bound=lower,
        upper_bound=upper,
        holds=lower - 1e-12 <= gap <= upper + 1e-12,
        details={"phi": phi, "phi_cut": list(cut.X), "graph": g.name},
    )
