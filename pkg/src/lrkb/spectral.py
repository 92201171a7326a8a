"""Eigenstructure and ordered-Schur utilities.

Everything downstream (equilibrium construction, attraction certificates,
the rank condition) is phrased in terms of the eigenvalues of the drift
matrix sorted by non-increasing real part and of a Schur factorization whose
leading block carries the dominant eigenvalues.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.linalg import lapack

from lrkb.errors import ConvergenceError, GapError

TOL_SPEC = 1e-10
TOL_GAP = 1e-9


@dataclass(frozen=True)
class SpectralData:
    """Sorted eigensystem of a real square matrix.

    ``eigenvalues`` are sorted by non-increasing real part, ties by
    non-increasing imaginary part (conjugate pairs adjacent, positive
    imaginary part first). ``eigenvectors`` holds the matching unit-norm
    (generalized) eigenvectors as columns; ``jordan_like`` is
    ``inv(eigenvectors) @ A @ eigenvectors``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    jordan_like: np.ndarray

    @property
    def n(self):
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class SchurData:
    """Complex Schur form with the dominant ``split`` eigenvalues leading.

    ``unitary`` is the n x n unitary S with ``S^H A S`` upper triangular and
    blocked as ``[[block_11, block_12], [0, block_22]]`` at row/column
    ``split``.
    """

    unitary: np.ndarray
    block_11: np.ndarray
    block_12: np.ndarray
    block_22: np.ndarray
    split: int

    @property
    def n(self):
        return self.unitary.shape[0]

    def triangular(self):
        r, n = self.split, self.n
        t = np.zeros((n, n), dtype=complex)
        t[:r, :r] = self.block_11
        t[:r, r:] = self.block_12
        t[r:, r:] = self.block_22
        return t


@dataclass(frozen=True)
class AttractionEstimate:
    """Certified attraction-domain radius for the dominant subspace.

    ``beta`` is ``1 / (1 + 4*ell_max / (lambda_l1_r - lambda_l2_1)**2)``
    when ``gap_ok``; otherwise ``None`` (no certificate is fabricated).
    """

    beta: float | None
    ell_max: float
    lambda_l1_r: float
    lambda_l2_1: float
    gap_ok: bool


def eigs_sorted(a):
    """Eigendecomposition of ``a`` with the package's deterministic order."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    try:
        w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigensolver failed to converge: {exc}") from exc
    order = np.lexsort((-w.imag, -w.real))
    w = w[order]
    v = v[:, order]
    v = v / np.linalg.norm(v, axis=0)
    av = a @ v
    try:
        lam = np.linalg.solve(v, av)
    except np.linalg.LinAlgError:
        # Defective matrices: fall back to a least-squares Jordan-like block.
        lam = np.linalg.pinv(v) @ av
    return SpectralData(eigenvalues=w, eigenvectors=v, jordan_like=lam)


def spectral_gap_ok(spec, r, tol_gap=TOL_GAP):
    """True iff Re(lambda_r) - Re(lambda_{r+1}) exceeds ``tol_gap``."""
    n = spec.n
    if not 1 <= r <= n - 1:
        raise ValueError(f"rank r={r} outside 1..{n - 1}")
    re = spec.eigenvalues.real
    return bool(re[r - 1] - re[r] > tol_gap)


def _split_threshold(spec, r, tol_gap):
    re = spec.eigenvalues.real
    if not spectral_gap_ok(spec, r, tol_gap):
        raise GapError(
            f"no spectral gap at r={r}: Re(lambda_{r})={re[r - 1]:.6g} vs "
            f"Re(lambda_{r + 1})={re[r]:.6g}"
        )
    return 0.5 * (re[r - 1] + re[r])


def ordered_schur(a, r, tol_gap=TOL_GAP):
    """Complex Schur form with the top-``r`` (by real part) eigenvalues leading."""
    a = np.asarray(a, dtype=float)
    spec = eigs_sorted(a)
    thresh = _split_threshold(spec, r, tol_gap)
    t, s, sdim = la.schur(a, output="complex", sort=lambda z: z.real > thresh)
    if sdim != r:
        raise GapError(
            f"Schur reordering selected {sdim} eigenvalues instead of {r}; "
            f"the gap at r={r} is numerically unreliable"
        )
    return SchurData(
        unitary=s,
        block_11=t[:r, :r].copy(),
        block_12=t[:r, r:].copy(),
        block_22=t[r:, r:].copy(),
        split=r,
    )


def real_ordered_schur(a, r, tol_gap=TOL_GAP):
    """Real Schur form (T, Z) with the dominant ``r``-dimensional invariant
    subspace spanned by the leading columns of Z.

    Raises :class:`GapError` when the split would cut a conjugate pair.
    """
    a = np.asarray(a, dtype=float)
    spec = eigs_sorted(a)
    thresh = _split_threshold(spec, r, tol_gap)
    t, z, sdim = la.schur(a, output="real", sort=lambda re, im: re > thresh)
    if sdim != r:
        raise GapError(
            f"real Schur reordering selected {sdim} eigenvalues instead of "
            f"{r}; the requested split cuts a conjugate pair or a tight gap"
        )
    return t, z


def attraction_beta(schur):
    """Attraction-domain certificate computed from an ordered Schur form."""
    l11, l12, l22 = schur.block_11, schur.block_12, schur.block_22
    lam_l1_r = float(np.min(la.eigvalsh(l11 + l11.conj().T)))
    lam_l2_1 = float(np.max(la.eigvalsh(l22 + l22.conj().T)))
    smax = float(np.linalg.norm(l12, 2)) if l12.size else 0.0
    # Normal inputs give L12 at roundoff level; clamp so their certificate
    # is exactly 1.
    scale = max(np.linalg.norm(l11), np.linalg.norm(l22), 1.0)
    ell_max = 0.0 if smax <= TOL_SPEC * scale else smax * smax
    gap_ok = lam_l1_r > lam_l2_1
    if not gap_ok:
        beta = None
    elif ell_max == 0.0:
        beta = 1.0
    else:
        beta = 1.0 / (1.0 + 4.0 * ell_max / (lam_l1_r - lam_l2_1) ** 2)
    return AttractionEstimate(
        beta=beta,
        ell_max=ell_max,
        lambda_l1_r=lam_l1_r,
        lambda_l2_1=lam_l2_1,
        gap_ok=gap_ok,
    )


def count_unstable(spec, threshold=0.0):
    """Number of eigenvalues with Re >= threshold (marginal counts as unstable)."""
    return int(np.sum(spec.eigenvalues.real >= threshold))


def invariant_subspace(a, indices, spec=None, tol=1e-8):
    """Real orthonormal basis of the invariant subspace for a
    conjugation-closed eigenvalue selection.

    ``indices`` are 0-based positions into the sorted eigenvalue list.
    """
    a = np.asarray(a, dtype=float)
    if spec is None:
        spec = eigs_sorted(a)
    targets = spec.eigenvalues[list(indices)]
    if not np.allclose(np.sort_complex(targets), np.sort_complex(targets.conj())):
        raise GapError("eigenvalue selection is not conjugation-closed")
    t, z = la.schur(a, output="complex")
    diag = np.diag(t)
    used = np.zeros(len(diag), dtype=bool)
    select = np.zeros(len(diag), dtype=np.int32)
    for lam in targets:
        dist = np.abs(diag - lam)
        dist[used] = np.inf
        j = int(np.argmin(dist))
        used[j] = True
        select[j] = 1
    ts, qs, w, m, _, _, info = lapack.ztrsen(select, t, z, job="N")
    if info != 0 or m != len(indices):
        raise ConvergenceError(f"Schur reordering failed (info={info}, m={m})")
    r = len(indices)
    basis = qs[:, :r]
    stacked = np.hstack([basis.real, basis.imag])
    u, sv, _ = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(sv > tol * sv[0]))
    if rank != r:
        raise ConvergenceError(
            f"invariant subspace for selection {tuple(indices)} is not "
            f"real-representable at rank {r} (numerical rank {rank})"
        )
    return u[:, :r]
