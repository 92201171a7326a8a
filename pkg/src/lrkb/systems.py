"""LTI system model, structural (PBH) tests, and rank-r reduction."""

import json
from dataclasses import dataclass

import numpy as np

from lrkb import spectral
from lrkb.errors import FrameError, GapError, ShapeError, ValidationError

TOL_PD = 1e-12
TOL_RANK = 1e-8
TOL_ORTH = 1e-9


@dataclass(frozen=True)
class LtiSystem:
    """The quadruple (A, G, C, H) of dx = Ax dt + Gw dt, y = Cx + Hv."""

    a: np.ndarray
    g: np.ndarray
    c: np.ndarray
    h: np.ndarray

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def p(self):
        return self.c.shape[0]

    def observation_noise_cov(self):
        return self.h @ self.h.T


@dataclass(frozen=True)
class ReducedSystem:
    """Rank-r reduction (U^T A U, C U, U^T G) for a given frame U."""

    a_u: np.ndarray
    c_u: np.ndarray
    g_u: np.ndarray
    frame: np.ndarray

    @property
    def r(self):
        return self.a_u.shape[0]


def make_system(a, g, c, h):
    """Build and validate an :class:`LtiSystem` from array-likes."""
    sys = LtiSystem(
        a=np.atleast_2d(np.asarray(a, dtype=float)),
        g=np.atleast_2d(np.asarray(g, dtype=float)),
        c=np.atleast_2d(np.asarray(c, dtype=float)),
        h=np.atleast_2d(np.asarray(h, dtype=float)),
    )
    return validate(sys)


def validate(sys, tol_pd=TOL_PD):
    """Check shapes, finiteness, and positive definiteness of HH^T."""
    n = sys.a.shape[0]
    if sys.a.shape != (n, n):
        raise ShapeError(f"A must be square, got {sys.a.shape}")
    if sys.g.shape != (n, n):
        raise ShapeError(f"G must be {n}x{n}, got {sys.g.shape}")
    p = sys.c.shape[0]
    if sys.c.shape != (p, n):
        raise ShapeError(f"C must be p x {n}, got {sys.c.shape}")
    if sys.h.shape != (p, p):
        raise ShapeError(f"H must be {p}x{p}, got {sys.h.shape}")
    for name, mat in (("A", sys.a), ("G", sys.g), ("C", sys.c), ("H", sys.h)):
        if not np.all(np.isfinite(mat)):
            raise ValidationError(f"{name} has non-finite entries")
    hht = sys.h @ sys.h.T
    min_eig = float(np.min(np.linalg.eigvalsh(hht)))
    if min_eig <= tol_pd:
        raise ValidationError(
            f"HH^T is not positive definite: min eigenvalue {min_eig:.6g}"
        )
    return sys


def _pbh_rank_ok(blocks_for, a, tol_rank):
    spec = spectral.eigs_sorted(a)
    n = a.shape[0]
    eye = np.eye(n)
    for lam in spec.eigenvalues:
        m = blocks_for(a - lam * eye)
        sv = np.linalg.svd(m, compute_uv=False)
        if int(np.sum(sv > tol_rank * sv[0])) < n:
            return False
    return True


def pbh_observable(a, c, tol_rank=TOL_RANK):
    """PBH test: rank [C; A - lambda I] = n for every eigenvalue of A."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    return _pbh_rank_ok(lambda shift: np.vstack([c, shift]), a, tol_rank)


def pbh_controllable(a, g, tol_rank=TOL_RANK):
    """PBH test: rank [G, A - lambda I] = n for every eigenvalue of A."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    g = np.atleast_2d(np.asarray(g, dtype=float))
    return _pbh_rank_ok(lambda shift: np.hstack([g, shift]), a, tol_rank)


def reduce(sys, frame, tol_orth=TOL_ORTH):
    """Project the system onto an orthonormal frame U."""
    u = frame.matrix if hasattr(frame, "matrix") else np.asarray(frame, dtype=float)
    r = u.shape[1]
    err = np.linalg.norm(u.T @ u - np.eye(r))
    if err > tol_orth:
        raise FrameError(f"frame is not orthonormal: ||U^T U - I||_F = {err:.3g}")
    return ReducedSystem(a_u=u.T @ sys.a @ u, c_u=sys.c @ u, g_u=u.T @ sys.g, frame=u)


def minimal_rank(sys, threshold=0.0, tol_gap=spectral.TOL_GAP):
    """Smallest admissible rank for a bounded LRKB closed loop.

    Returns the number of unstable eigenvalues, bumped upward past any rank
    where the spectral gap is degenerate (a split there would cut a conjugate
    pair or a zero gap). Returns 0 for Hurwitz A; callers that need r >= 1
    bump it themselves.
    """
    spec = spectral.eigs_sorted(sys.a)
    r = spectral.count_unstable(spec, threshold)
    if r == 0:
        return 0
    n = sys.n
    while r <= n - 1:
        if spectral.spectral_gap_ok(spec, r, tol_gap):
            return r
        r += 1
    raise GapError(
        f"no admissible rank in {spectral.count_unstable(spec, threshold)}.."
        f"{n - 1} has a spectral gap"
    )


def load_system(source):
    """Read a system definition (JSON document) from a path, file object, or dict.

    Expected fields: ``A``, ``G``, ``C``, ``H`` as row-major nested arrays;
    optional ``seed``, ``rank``, ``horizon``, ``dt`` are returned untouched in
    the extras dict.
    """
    if isinstance(source, dict):
        doc = source
    elif hasattr(source, "read"):
        doc = json.load(source)
    else:
        with open(source) as fh:
            doc = json.load(fh)
    missing = [k for k in ("A", "G", "C", "H") if k not in doc]
    if missing:
        raise ValidationError(f"system definition lacks fields: {missing}")
    sys = make_system(doc["A"], doc["G"], doc["C"], doc["H"])
    extras = {k: doc[k] for k in ("seed", "rank", "horizon", "dt") if k in doc}
    return sys, extras
