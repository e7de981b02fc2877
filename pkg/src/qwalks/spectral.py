"""
Eigenstructure of walk operators and the Cesaro limiting distribution.

For a unitary ``U = sum_j lambda_j |phi_j><phi_j|`` the time average of the
node distribution converges to the sum over equal-eigenvalue classes ``c`` of
``sum_a |<a, v| P_c |alpha_0>|^2`` where ``P_c`` projects onto the class
eigenspace. That form is basis-independent inside each class, so degenerate
eigenvectors never need to be aligned.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .qwalk import NonUnitaryError, RandomUnitaryWalk, UNITARY_TOL, unitarity_residual
from .reports import BoundCheck

EIG_EQUAL_TOL = 1e-9
RESIDUAL_TOL = 1e-8
DENSE_CAP = 4096
CHANNEL_CAP = 64


class DenseCapError(ValueError):
    pass


class SpectralWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Unit-circle eigenvalues, orthonormal eigenvectors (columns) and classes.

    Eigenvalues are sorted by argument in ``[0, 2 pi)``. ``classes`` holds
    index arrays of eigenvalues equal within ``tol``. ``n`` and ``d`` are the
    vertex count and coin dimension when known.
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray
    classes: tuple
    tol: float = EIG_EQUAL_TOL
    n: int | None = None
    d: int | None = None
    min_gap: float = field(default=math.inf)

    @property
    def dim(self) -> int:
        return len(self.eigvals)

    @property
    def args(self) -> np.ndarray:
        return np.mod(np.angle(self.eigvals), 2 * np.pi)

    @property
    def distinct(self) -> bool:
        return len(self.classes) == self.dim

    @property
    def class_ids(self) -> np.ndarray:
        ids = np.empty(self.dim, dtype=int)
        for c, idx in enumerate(self.classes):
            ids[idx] = c
        return ids

    def amplitudes(self, alpha: np.ndarray) -> np.ndarray:
        """``a_j = <phi_j|alpha>`` (batched over leading axes)."""
        return np.asarray(alpha, dtype=complex) @ self.eigvecs.conj()

    def with_permuted_basis(self, perm) -> "SpectralDecomposition":
        """Same decomposition with eigenpairs reordered (classes remapped)."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        classes = tuple(np.sort(inv[idx]) for idx in self.classes)
        return SpectralDecomposition(self.eigvals[perm], self.eigvecs[:, perm], classes,
                                     self.tol, self.n, self.d, self.min_gap)

    def rotate_class(self, c: int, Q: np.ndarray) -> "SpectralDecomposition":
        """Replace the basis of class ``c`` by ``V Q`` for a unitary ``Q``."""
        idx = self.classes[c]
        vecs = self.eigvecs.copy()
        vecs[:, idx] = vecs[:, idx] @ Q
        return SpectralDecomposition(self.eigvals, vecs, self.classes, self.tol, self.n, self.d, self.min_gap)


def _group_classes(args: np.ndarray, vals: np.ndarray, tol: float):
    """Chain-group sorted eigenvalues whose neighbours lie within ``tol``; join across 2 pi."""
    m = len(vals)
    if m == 0:
        return (), math.inf
    gaps = np.abs(np.diff(vals))
    breaks = np.flatnonzero(gaps > tol)
    groups = np.split(np.arange(m), breaks + 1)
    if len(groups) > 1 and abs(vals[-1] - vals[0]) <= tol:
        groups[0] = np.concatenate([groups[-1], groups[0]])
        groups.pop()
    groups = [np.sort(g) for g in groups]
    if len(groups) == 1:
        return tuple(groups), math.inf
    # Smallest distance between members of different classes.
    reps = np.array([vals[g].mean() for g in groups])
    ids = np.empty(m, dtype=int)
    for c, g in enumerate(groups):
        ids[g] = c
    D = np.abs(vals[:, None] - vals[None, :])
    D[ids[:, None] == ids[None, :]] = np.inf
    min_gap = float(D.min())
    for c, g in enumerate(groups):
        if np.abs(vals[g] - reps[c]).max() > tol:
            warnings.warn(f"eigenvalue class {c} spreads wider than {tol:g}", SpectralWarning, stacklevel=3)
    return tuple(groups), min_gap


def decompose(U: np.ndarray, tol: float = EIG_EQUAL_TOL, n: int | None = None, d: int | None = None) -> SpectralDecomposition:
    """Eigendecomposition of a unitary via the complex Schur form.

    For a normal matrix the Schur factor is diagonal and the Schur vectors are
    an orthonormal eigenbasis, including inside degenerate clusters.
    """
    U = np.asarray(U, dtype=complex)
    dim = U.shape[0]
    if U.ndim != 2 or U.shape[1] != dim:
        raise ValueError(f"expected a square matrix, got shape {U.shape}")
    if dim > DENSE_CAP:
        raise DenseCapError(f"dense decomposition is capped at dn <= {DENSE_CAP}, got {dim}")
    res = unitarity_residual(U)
    if res > UNITARY_TOL:
        raise NonUnitaryError(f"matrix is not unitary (residual {res:.3g})")
    try:
        Tm, Z = scipy.linalg.schur(U, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise RuntimeError(f"eigensolver failed: {exc}") from exc
    vals = np.diag(Tm).copy()
    resid = np.linalg.norm(U @ Z - Z * vals[None, :], axis=0).max()
    if resid > RESIDUAL_TOL:
        raise RuntimeError(f"eigen-residual {resid:.3g} exceeds {RESIDUAL_TOL:g}")
    if np.abs(np.abs(vals) - 1).max() > 1e-10:
        raise RuntimeError("eigenvalues off the unit circle")
    args = np.mod(np.angle(vals), 2 * np.pi)
    order = np.argsort(args, kind="stable")
    vals, Z, args = vals[order], Z[:, order], args[order]
    classes, min_gap = _group_classes(args, vals, tol)
    if min_gap <= 10 * tol:
        warnings.warn(f"inter-class eigenvalue gap {min_gap:.3g} is within 10x of tol {tol:g}",
                      SpectralWarning, stacklevel=2)
    return SpectralDecomposition(vals, Z, classes, tol, n, d, min_gap)


def decompose_walk(W, tol: float = EIG_EQUAL_TOL) -> SpectralDecomposition:
    if W.dim > DENSE_CAP:
        raise DenseCapError(f"dense decomposition is capped at dn <= {DENSE_CAP}, got {W.dim}")
    return decompose(W.matrix, tol, n=W.graph.n, d=W.graph.d)


def limiting_distribution(dec: SpectralDecomposition, alpha0: np.ndarray, n: int | None = None) -> np.ndarray:
    """Cesaro limit of the node distribution from ``alpha0`` (batched over rows)."""
    n = dec.n if n is None else n
    if n is None:
        raise ValueError("vertex count unknown; pass n")
    alpha0 = np.asarray(alpha0, dtype=complex)
    A = dec.amplitudes(alpha0)
    V = dec.eigvecs
    single = [c[0] for c in dec.classes if len(c) == 1]
    # Singleton classes: |a_j|^2 |phi_j(a, v)|^2.
    w = (np.abs(A[..., single]) ** 2) @ (np.abs(V[:, single].T) ** 2)
    for c in dec.classes:
        if len(c) > 1:
            proj = A[..., c] @ V[:, c].T
            w = w + np.abs(proj) ** 2
    pi = w.reshape(w.shape[:-1] + (-1, n)).sum(axis=-2)
    if pi.min() < -1e-8:
        raise RuntimeError("negative limiting probability; eigenvalue classes are inconsistent")
    total = pi.sum(axis=-1)
    if np.abs(total - np.sum(np.abs(alpha0) ** 2, axis=-1)).max() > 1e-10:
        raise RuntimeError("limiting distribution does not sum to the state norm")
    return pi


def start_independent(limits: np.ndarray, tol: float = 1e-8) -> bool:
    limits = np.atleast_2d(limits)
    return bool(np.abs(limits - limits[0]).max() <= tol)


# --- mixtures of unitaries -------------------------------------------------

def channel_matrix(W: RandomUnitaryWalk) -> np.ndarray:
    """Superoperator on row-major ``vec(rho)``: ``sum_i p_i U_i (x) conj(U_i)``."""
    if W.dim > CHANNEL_CAP:
        raise DenseCapError(f"channel analysis is capped at dn <= {CHANNEL_CAP}, got {W.dim}")
    E = np.zeros((W.dim ** 2, W.dim ** 2), dtype=complex)
    for p, w in zip(W.probs, W.walks):
        U = w.matrix
        E += p * np.kron(U, U.conj())
    return E


def mixture_limiting_distribution(W: RandomUnitaryWalk, alpha0: np.ndarray) -> np.ndarray:
    """Cesaro limit of the expected node distribution under a unitary mixture.

    The channel is a contraction in the Hilbert-Schmidt norm, so its time
    average converges to the orthogonal projection onto its fixed space.
    """
    E = channel_matrix(W)
    K = scipy.linalg.null_space(E - np.eye(E.shape[0]), rcond=1e-10)
    alpha0 = np.atleast_2d(np.asarray(alpha0, dtype=complex))
    n, dim = W.graph.n, W.dim
    out = []
    for a in alpha0:
        rho = np.outer(a, a.conj()).ravel()
        lim = (K @ (K.conj().T @ rho)).reshape(dim, dim)
        out.append(np.real(np.diag(lim)).reshape(-1, n).sum(axis=0))
    out = np.array(out)
    return out[0] if np.ndim(alpha0) == 1 else out


# --- the n-cycle with the Hadamard coin --------------------------------------

@dataclass(frozen=True)
class CycleMode:
    """Both eigenpairs of the momentum-``k`` block on the odd cycle."""

    k: int
    theta1: float
    theta2: float
    vec1: np.ndarray
    vec2: np.ndarray

    @property
    def eigvals(self) -> tuple[complex, complex]:
        return complex(np.exp(1j * self.theta1)), complex(np.exp(1j * self.theta2))


def character(n: int, k: int) -> np.ndarray:
    """``chi_k(v) = omega^{-k v} / sqrt(n)``; with this sign the right shift acts as ``omega^k``."""
    v = np.arange(n)
    return np.exp(-2j * np.pi * k * v / n) / np.sqrt(n)


def cycle_analytic_spectrum(n: int) -> list[CycleMode]:
    """Closed-form spectrum of the Hadamard walk on the odd ``n``-cycle.

    On the character ``chi_k`` the walk acts as ``diag(w^k, w^-k) H`` whose
    eigenvalues ``e^{i theta}`` satisfy ``sin theta = sin(2 pi k / n) / sqrt 2``.
    """
    if n < 3 or n % 2 == 0:
        raise ValueError(f"analytic cycle spectrum needs odd n >= 3, got {n}")
    modes = []
    for k in range(n):
        w = np.exp(2j * np.pi * k / n)
        s = math.sin(2 * math.pi * k / n) / math.sqrt(2)
        t1 = math.asin(s)
        t2 = math.pi - t1
        chi = character(n, k)
        vecs = []
        for th in (t1, t2):
            lam = np.exp(1j * th)
            c = np.array([1.0, lam * math.sqrt(2) / w - 1.0])
            c /= np.linalg.norm(c)
            vecs.append(np.kron(c, chi))
        modes.append(CycleMode(k, t1, t2, vecs[0], vecs[1]))
    return modes


def analytic_eigenvalues(n: int) -> np.ndarray:
    return np.array([lam for m in cycle_analytic_spectrum(n) for lam in m.eigvals])


def multiset_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Max matched distance between two equal-size point sets on the circle."""
    from scipy.optimize import linear_sum_assignment

    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        return math.inf
    D = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(D)
    return float(D[r, c].max())


def eigenvector_momenta(dec: SpectralDecomposition, concentration: float = 1 - 1e-6) -> np.ndarray:
    """Momentum ``k`` of each eigenvector (its dominant character component)."""
    n, d = dec.n, dec.d
    if n is None or d is None:
        raise ValueError("decomposition lacks (n, d)")
    phi = dec.eigvecs.T.reshape(-1, d, n)
    # <chi_k|phi_a> = sqrt(n) * ifft(phi_a)[k]
    power = n * (np.abs(np.fft.ifft(phi, axis=2)) ** 2).sum(axis=1)
    k = power.argmax(axis=1)
    if power[np.arange(len(k)), k].min() < concentration:
        raise ValueError("eigenvectors are not concentrated on a single momentum; not a translation-invariant walk")
    return k


def good_momentum(k: np.ndarray, n: int, delta: float) -> np.ndarray:
    """Whether ``2 pi k / n`` lies in the good regimes ``R_delta`` or ``R'_delta``."""
    x = 2 * np.pi * np.asarray(k) / n
    eps = 1e-12
    in_r = (x <= (1 - delta) * np.pi / 2 + eps) | (x >= (1 + delta) * 3 * np.pi / 2 - eps)
    in_rp = (x >= (1 + delta) * np.pi / 2 - eps) & (x <= (1 - delta) * 3 * np.pi / 2 + eps)
    return in_r | in_rp


@dataclass
class SpacingReport:
    Delta: float
    delta: float
    Delta_delta: float
    good_indices: np.ndarray
    bad_indices: np.ndarray
    bad_mass: float | None = None
    momenta: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "Delta": self.Delta,
            "delta": self.delta,
            "Delta_delta": self.Delta_delta,
            "good_count": int(len(self.good_indices)),
            "bad_count": int(len(self.bad_indices)),
            "bad_indices": self.bad_indices,
            "bad_mass": self.bad_mass,
        }


def _min_cross_class_distance(dec: SpectralDecomposition, idx: np.ndarray) -> float:
    vals = dec.eigvals[idx]
    ids = dec.class_ids[idx]
    D = np.abs(vals[:, None] - vals[None, :])
    D[ids[:, None] == ids[None, :]] = np.inf
    return float(D.min()) if D.size else math.inf


def spacing_report(dec: SpectralDecomposition, delta: float = 0.0, alpha0: np.ndarray | None = None) -> SpacingReport:
    """Minimum spacings ``Delta`` (all eigenvalues) and ``Delta_delta`` (good ones).

    For ``delta > 0`` an eigenvalue is good when its momentum ``k`` has
    ``2 pi k / n`` in ``R_delta`` or ``R'_delta``; this requires a
    translation-invariant walk on a cycle.
    """
    if not 0 <= delta < 1:
        raise ValueError("delta must lie in [0, 1)")
    all_idx = np.arange(dec.dim)
    momenta = None
    if delta == 0:
        good = np.ones(dec.dim, dtype=bool)
    else:
        momenta = eigenvector_momenta(dec)
        good = good_momentum(momenta, dec.n, delta)
    good_idx, bad_idx = all_idx[good], all_idx[~good]
    if len(good_idx) < 2:
        raise ValueError("fewer than two good eigenvalues")
    bad_mass = None
    if alpha0 is not None:
        a = dec.amplitudes(alpha0)
        bad_mass = float(np.sum(np.abs(a[bad_idx]) ** 2))
    return SpacingReport(
        Delta=_min_cross_class_distance(dec, all_idx),
        delta=delta,
        Delta_delta=_min_cross_class_distance(dec, good_idx),
        good_indices=good_idx,
        bad_indices=bad_idx,
        bad_mass=bad_mass,
        momenta=momenta,
    )


def regime_spacing_slack(dec: SpectralDecomposition, report: SpacingReport) -> float:
    """Min of ``|l_i - l_j| - (2 sqrt2 / pi) |i - j| Delta_delta`` within each regime.

    Good eigenvalues are split by argument into the arc around 1 and the arc
    around -1 and ranked by argument inside each arc.
    """
    th = np.angle(dec.eigvals[report.good_indices])  # (-pi, pi]
    worst = math.inf
    # The arc around -1 straddles the branch cut of angle(); rank it in [0, 2 pi).
    for inside, key in ((np.abs(th) <= np.pi / 2, th), (np.abs(th) > np.pi / 2, np.mod(th, 2 * np.pi))):
        sub = report.good_indices[inside]
        if len(sub) < 2:
            continue
        order = np.argsort(key[inside])
        vals = dec.eigvals[sub][order]
        rank = np.arange(len(vals))
        D = np.abs(vals[:, None] - vals[None, :])
        need = (2 * math.sqrt(2) / math.pi) * np.abs(rank[:, None] - rank[None, :]) * report.Delta_delta
        off = ~np.eye(len(vals), dtype=bool)
        worst = min(worst, float((D - need)[off].min()))
    return worst


def good_projection(dec: SpectralDecomposition, report: SpacingReport, alpha0: np.ndarray) -> np.ndarray:
    """``alpha0`` projected on the good eigenvectors and renormalized."""
    a = dec.amplitudes(alpha0)
    a[report.bad_indices] = 0
    beta = dec.eigvecs @ a
    return beta / np.linalg.norm(beta)


# --- convergence bounds ----------------------------------------------------------

def convergence_bound_pairs(dec: SpectralDecomposition, alpha0: np.ndarray, T: int) -> float:
    """``2 sum_{i, j: l_i != l_j} |a_i|^2 / (T |l_i - l_j|)`` over ordered pairs."""
    if T < 1:
        raise ValueError("T must be positive")
    w = np.abs(dec.amplitudes(alpha0)) ** 2
    ids = dec.class_ids
    D = np.abs(dec.eigvals[:, None] - dec.eigvals[None, :])
    inv = np.where(ids[:, None] != ids[None, :], 1.0 / np.where(D > 0, D, 1.0), 0.0)
    return float(2 * (w @ inv.sum(axis=1)) / T)


def convergence_bound_uniform_spacing(n: int, d: int, Delta: float, T: int) -> float:
    """``pi (ln(n d / 2) + 1) / (T Delta)`` for walks with all eigenvalues distinct."""
    if not Delta > 0:
        raise ValueError("Delta must be positive; with repeated eigenvalues use convergence_bound_pairs")
    if T < 1:
        raise ValueError("T must be positive")
    return math.pi * (math.log(n * d / 2) + 1) / (T * Delta)


def cycle_mixing_bound(n: int, eps: float) -> int:
    """``ceil(4 n (ln n + 2) / (eps delta))`` with ``delta = (eps/16)^2 / 2``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    delta = (eps / 16) ** 2 / 2
    return math.ceil(4 * n * (math.log(n) + 2) / (eps * delta))


def state_distance_vs_distribution_distance(alpha0, beta0, W, T: int) -> BoundCheck:
    """``||Pbar_T^alpha - Pbar_T^beta|| <= 2 ||alpha0 - beta0||``."""
    from .qwalk import average_distribution

    alpha0 = np.asarray(alpha0, dtype=complex)
    beta0 = np.asarray(beta0, dtype=complex)
    pa = average_distribution(W, alpha0, T)
    pb = average_distribution(W, beta0, T)
    lhs = float(np.abs(pa - pb).sum())
    rhs = 2 * float(np.linalg.norm(alpha0 - beta0))
    return BoundCheck("averaged_distribution_distance", lhs, upper_bound=rhs, holds=lhs <= rhs + 1e-12,
                      details={"T": T})


def spectrum_rows(dec: SpectralDecomposition):
    """``(index, re, im, arg, class_id)`` rows for CSV export."""
    ids = dec.class_ids
    return [(j, float(z.real), float(z.imag), float(a), int(ids[j]))
            for j, (z, a) in enumerate(zip(dec.eigvals, dec.args))]
