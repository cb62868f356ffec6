"""Eigensolvers for model matrices.

Two routes are provided. :func:`dense_symmetric_eig` handles any real
symmetric matrix through LAPACK. :func:`arrowhead_eig` exploits the
arrowhead structure of (disordered) Tavis-Cummings matrices: it deflates
degenerate emitter groups into dark states and finds the bright roots of the
secular function by bisection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, InvalidInputError, PoleError
from .model import SYMMETRY_ATOL, DisorderRealization, ModelMatrix, Structure

DEFAULT_TOL = 1e-12
DEGENERACY_RTOL = 1e-12
_EPS = np.finfo(float).eps
_MAX_BISECTIONS = 400


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    """Ascending energies (Hartree)."""
    eigenvectors: np.ndarray
    """Orthonormal columns, rows aligned with ``labels``."""
    residual_bound: float
    """Largest ``||A v - e v||_2`` over all eigenpairs."""
    labels: tuple = ()

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "labels", tuple(self.labels))

    def __len__(self):
        return len(self.eigenvalues)

    def vector(self, i):
        return self.eigenvectors[:, i]


def _as_array(m):
    if isinstance(m, ModelMatrix):
        return m.entries, m.labels
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"matrix must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_ATOL * scale:
        raise InvalidInputError("matrix is not symmetric")
    return a, ()


def _ordered_gram_schmidt(cols, rank):
    """Orthonormalise candidate columns in order, skipping near-dependent ones.

    ``cols`` is (d, n); the result is (d, rank). A candidate is accepted when
    its residual norm exceeds ``0.5/sqrt(n)``; the residual norms squared sum
    to the remaining rank, so a candidate above that threshold always exists.
    """
    d, n = cols.shape
    basis = np.zeros((d, rank))
    k = 0
    threshold = 0.5 / np.sqrt(max(n, 1))
    for i in range(n):
        if k == rank:
            break
        w = cols[:, i].copy()
        for _ in range(2):
            w -= basis[:, :k] @ (basis[:, :k].T @ w)
        nrm = np.linalg.norm(w)
        if nrm > threshold:
            basis[:, k] = w / nrm
            k += 1
    if k != rank:
        raise ConvergenceError(f"could not build a basis of rank {rank} (got {k})")
    return basis


def _clusters(values, scale):
    """Index runs of sorted ``values`` equal within the degeneracy tolerance."""
    tol = DEGENERACY_RTOL * scale
    runs, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[start] > tol:
            runs.append((start, i))
            start = i
    return runs


def _residual_check(residual, frob, tol, what):
    limit = tol * frob if frob > 0 else tol
    if residual > limit:
        raise ConvergenceError(
            f"{what}: residual {residual:.3e} exceeds bound {limit:.3e}", residual=residual
        )


def dense_symmetric_eig(m, tol=DEFAULT_TOL):
    """Full eigendecomposition of a real symmetric matrix.

    Backed by LAPACK ``syevd``. Vectors spanning a degenerate cluster are
    replaced by a Gram-Schmidt basis built from the unit vectors in label
    order, so the returned set depends only on the eigenspace. Isolated
    vectors are signed so that their largest component is positive.

    Raises
    ------
    InvalidInputError
        If the input is not symmetric.
    ConvergenceError
        If LAPACK fails or the residual exceeds ``tol * ||m||_F``.
    """
    a, labels = _as_array(m)
    n = a.shape[0]
    if n == 0:
        return EigenDecomposition(np.zeros(0), np.zeros((0, 0)), 0.0, labels)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"LAPACK eigh failed: {exc}") from exc
    lead = v[np.argmax(np.abs(v), axis=0), np.arange(n)]
    v = v * np.where(lead < 0, -1.0, 1.0)
    scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    for lo, hi in _clusters(w, scale):
        if hi - lo > 1:
            q = v[:, lo:hi]
            v[:, lo:hi] = q @ _ordered_gram_schmidt(q.T, hi - lo)
    residual = float(np.max(np.linalg.norm(a @ v - v * w, axis=0)))
    _residual_check(residual, float(np.linalg.norm(a)), tol, "dense_symmetric_eig")
    return EigenDecomposition(w, v, residual, labels)


def secular_eval(e, diag, arrow):
    """Secular function ``sum_k g_k^2/(w_k - e) - (w_ph - e)``.

    ``diag`` is ``(w_ph, w_1, ..., w_N)`` and ``arrow`` the couplings. Its
    zeros are the eigenvalues of the arrowhead matrix; between consecutive
    poles it is strictly increasing.
    """
    diag = np.asarray(diag, dtype=float)
    g = np.asarray(arrow, dtype=float)
    poles = diag[1:]
    if np.any(poles == e):
        raise PoleError(f"secular function evaluated at pole {e!r}")
    return float(np.sum(g * g / (poles - e)) - (diag[0] - e))


def _bisect_roots(alpha_rel, delta, z2, lo, hi):
    """Vectorised bisection on ``f(t) = sum z2/(delta - t) - (alpha - t)``.

    Row ``r`` of ``delta`` holds pole offsets relative to the origin chosen
    for root ``r``; ``alpha_rel`` is the photon energy relative to it.
    """
    lo = lo.copy()
    hi = hi.copy()
    active = np.ones(len(lo), dtype=bool)
    for _ in range(_MAX_BISECTIONS):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        stalled = (mid == lo) | (mid == hi)
        f = np.sum(z2 / (delta - mid[:, None]), axis=1) - (alpha_rel - mid)
        up = active & ~stalled & (f > 0)
        dn = active & ~stalled & ~(f > 0)
        hi[up] = mid[up]
        lo[dn] = mid[dn]
        width = hi - lo
        active &= ~(stalled | (width <= 2 * _EPS * np.maximum(np.abs(lo), np.abs(hi))))
    return 0.5 * (lo + hi)


def _secular_solve(alpha, d, z):
    """Roots and orthogonal eigenvectors for distinct poles ``d`` and ``z > 0``.

    Returns ``(values, vectors)`` with vectors (m+1, m+1) in the basis
    (photon, poles...).
    """
    m = len(d)
    zsum = float(np.sum(z))
    lo_bound = min(alpha, d[0]) - zsum
    hi_bound = max(alpha, d[-1]) + zsum

    origin = np.empty(m + 1, dtype=int)
    lo = np.empty(m + 1)
    hi = np.empty(m + 1)
    origin[0], lo[0], hi[0] = 0, lo_bound - d[0], 0.0
    origin[m], lo[m], hi[m] = m - 1, 0.0, hi_bound - d[m - 1]
    for j in range(1, m):
        gap = d[j] - d[j - 1]
        mid = d[j - 1] + 0.5 * gap
        f_mid = np.sum(z * z / (d - mid)) - (alpha - mid)
        if f_mid > 0:
            origin[j], lo[j], hi[j] = j - 1, 0.0, 0.5 * gap
        else:
            origin[j], lo[j], hi[j] = j, -0.5 * gap, 0.0

    # delta[r, k] = d_k - d_origin(r), exact for equal indices.
    delta = d[None, :] - d[origin][:, None]
    tau = _bisect_roots(alpha - d[origin], delta, (z * z)[None, :], lo, hi)
    values = d[origin] + tau
    # diff[r, k] = lambda_r - d_k computed relative to the root's own pole.
    diff = tau[:, None] - delta

    # Recompute the arrow from the computed roots so eigenvectors are
    # orthogonal to working precision: z_i^2 = (d_i - l_0)(l_m - d_i) * prod ratios.
    # Each remaining pole d_k is paired with the root next to it on the far
    # side from d_i, so every ratio lies in (0, 1].
    i_idx, k_idx = np.indices((m, m))
    pair = np.where(k_idx < i_idx, k_idx + 1, k_idx)
    gaps = d[None, :] - d[:, None]
    np.fill_diagonal(gaps, 1.0)
    ratios = diff[pair, i_idx] / gaps
    np.fill_diagonal(ratios, 1.0)
    prod = -diff[0, :] * diff[m, :] * np.prod(ratios, axis=1)
    zhat = np.sqrt(np.maximum(prod, 0.0))

    vecs = np.empty((m + 1, m + 1))
    vecs[0, :] = 1.0
    vecs[1:, :] = (zhat[None, :] / diff).T
    vecs /= np.linalg.norm(vecs, axis=0)
    return values, vecs


def arrowhead_eig(diag, arrow, tol=DEFAULT_TOL):
    """Eigendecomposition of an arrowhead matrix.

    Parameters
    ----------
    diag : array_like
        ``(w_ph, w_1, ..., w_N)``; index 0 is the photon.
    arrow : array_like
        Couplings ``(g_1, ..., g_N)`` between the photon and each emitter.
    tol : float
        Residual tolerance relative to the Frobenius norm.

    Notes
    -----
    Emitters whose energies agree to ``DEGENERACY_RTOL`` form a group. A
    group of size m contributes m-1 dark states at the group energy
    (eigenvectors orthogonal to the group couplings, built by ordered
    Gram-Schmidt) and a single effective pole with coupling
    ``sqrt(sum g^2)``. Uncoupled emitters are exact eigenvectors. The
    remaining bright roots are bracketed between consecutive poles and
    bisected; eigenvector components are ``g_k / (E - w_k)`` with the
    photon component positive before normalisation.
    """
    diag = np.asarray(diag, dtype=float)
    g = np.asarray(arrow, dtype=float)
    if diag.ndim != 1 or g.ndim != 1 or len(diag) != len(g) + 1:
        raise InvalidInputError("diag must have exactly one more entry than arrow")
    n = len(g)
    alpha, w = float(diag[0]), diag[1:]
    scale = float(max(np.max(np.abs(diag)), np.max(np.abs(g), initial=0.0)))
    frob = float(np.sqrt(np.sum(diag**2) + 2 * np.sum(g**2)))
    g = np.where(np.abs(g) <= _EPS * scale, 0.0, g)

    values = []
    vectors = np.zeros((n + 1, n + 1))

    def emit(value, rows, col):
        vectors[rows, len(values)] = col
        values.append(value)

    order = np.argsort(w, kind="stable")
    pole_d, pole_z = [], []
    # Column 0 maps the photon, column i+1 spreads pole i over its group.
    embed = np.zeros((n + 1, 1))
    embed[0, 0] = 1.0
    embed_cols = [embed]
    for lo, hi in _clusters(w[order], max(scale, np.finfo(float).tiny)):
        members = np.sort(order[lo:hi])
        zg = g[members]
        norm = float(np.sqrt(np.sum(zg * zg)))
        if norm == 0.0:
            for k in members:
                emit(float(w[k]), [k + 1], 1.0)
            continue
        direction = zg / norm
        wm = w[members]
        exact = bool(np.all(wm == wm[0]))
        if len(members) > 1:
            proj = np.eye(len(members)) - np.outer(direction, direction)
            dark = _ordered_gram_schmidt(proj, len(members) - 1)
            for col in dark.T:
                value = wm[0] if exact else np.clip(np.sum(col * col * wm), wm.min(), wm.max())
                emit(float(value), members + 1, col)
        pole_d.append(float(wm[0]) if exact else float(np.sum(direction**2 * wm)))
        pole_z.append(norm)
        col = np.zeros((n + 1, 1))
        col[members + 1, 0] = direction
        embed_cols.append(col)

    if pole_d:
        roots, sub = _secular_solve(alpha, np.array(pole_d), np.array(pole_z))
        start = len(values)
        vectors[:, start : start + len(roots)] = np.hstack(embed_cols) @ sub
        values.extend(float(r) for r in roots)
    else:
        emit(alpha, [0], 1.0)

    values = np.array(values)
    idx = np.argsort(values, kind="stable")
    values, vectors = values[idx], vectors[:, idx]

    av = np.empty_like(vectors)
    av[0] = alpha * vectors[0] + g @ vectors[1:]
    av[1:] = g[:, None] * vectors[0][None, :] + w[:, None] * vectors[1:]
    residual = float(np.max(np.linalg.norm(av - vectors * values, axis=0)))
    _residual_check(residual, frob, tol, "arrowhead_eig")
    return EigenDecomposition(values, vectors, residual)


def diagonalize(m: ModelMatrix, tol=DEFAULT_TOL, method="auto"):
    """Diagonalise a model matrix, choosing the solver from its structure.

    ``method`` is ``"auto"``, ``"dense"`` or ``"arrowhead"``.
    """
    if method == "auto":
        method = "arrowhead" if m.structure is Structure.ARROWHEAD else "dense"
    if method == "dense":
        return dense_symmetric_eig(m, tol)
    if method != "arrowhead":
        raise InvalidInputError(f"unknown method {method!r}")
    if m.structure is not Structure.ARROWHEAD:
        raise InvalidInputError("arrowhead solver needs an arrowhead matrix")
    a = m.entries
    res = arrowhead_eig(np.diag(a), a[0, 1:], tol)
    return EigenDecomposition(res.eigenvalues, res.eigenvectors, res.residual_bound, m.labels)


class PolaritonPair(NamedTuple):
    lower: float
    upper: float


def perturbative_polariton_energies(realization: DisorderRealization, omega_ph):
    """First-order polariton energies for weakly broadened emitters.

    With ``w_k = omega_ph + eps_k`` the bright pair sits at
    ``omega_ph + <eps>/2 -+ sqrt(sum g^2)`` where ``<eps>`` is the
    ``g^2``-weighted mean detuning.
    """
    g2 = np.asarray(realization.couplings) ** 2
    total = float(np.sum(g2))
    if total == 0.0:
        raise InvalidInputError("all couplings vanish; polariton energies are undefined")
    eps = np.asarray(realization.omegas) - omega_ph
    shift = 0.5 * float(np.sum(eps * g2)) / total
    split = np.sqrt(total)
    return PolaritonPair(omega_ph + shift - split, omega_ph + shift + split)
