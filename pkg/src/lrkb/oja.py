"""Oja flow on the Stiefel manifold: integration, equilibria, attraction domain.

The flow ``eps * dU/dt = (I - U U^T) A U`` drives an orthonormal frame toward
the dominant invariant subspace of A. Equilibria correspond to
conjugation-closed eigenvalue selections; only the dominant selection is
stable.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import subspace_angles

from lrkb import _backend, spectral
from lrkb.errors import ConfigError, ConvergenceError, FrameError, GapError

TOL_ORTH = 1e-9
TOL_CONV = 1e-9


def _mat(u):
    return u.matrix if isinstance(u, StiefelFrame) else np.asarray(u, dtype=float)


@dataclass(frozen=True)
class StiefelFrame:
    """An n x r matrix with orthonormal columns."""

    matrix: np.ndarray

    def __post_init__(self):
        u = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", u)
        err = orthonormality_error(u)
        if not np.isfinite(err) or err > TOL_ORTH:
            raise FrameError(f"not a Stiefel point: ||U^T U - I||_F = {err:.3g}")

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def r(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class OjaTrajectory:
    """Recorded Oja-flow trajectory.

    ``times`` are flow times (in the units of t, not t/eps); ``residuals``
    are ``||(I - U U^T) A U||_F`` at the recorded frames.
    """

    times: np.ndarray
    frames: np.ndarray
    residuals: np.ndarray
    converged: bool

    @property
    def final(self):
        return StiefelFrame(self.frames[-1])


@dataclass(frozen=True)
class EquilibriumFamily:
    """One equilibrium set of the flow, indexed by its eigenvalue selection.

    ``selection`` holds 0-based indices into the sorted eigenvalue list;
    ``linearization_rate`` is max Re(discarded) - min Re(retained), negative
    exactly for the stable (dominant) family. ``degenerate`` marks selections
    whose boundary gap to the complement is below tolerance.
    """

    selection: tuple
    representative: StiefelFrame
    is_stable: bool
    linearization_rate: float
    degenerate: bool = False


@dataclass(frozen=True)
class EquilibriumCatalog:
    families: list
    truncated: bool

    def __iter__(self):
        return iter(self.families)

    def __len__(self):
        return len(self.families)


def orthonormality_error(u):
    u = _mat(u)
    return float(np.linalg.norm(u.T @ u - np.eye(u.shape[1])))


def residual(a, u):
    """Flow-velocity magnitude ``||(I - U U^T) A U||_F``; zero on equilibria."""
    a = np.asarray(a, dtype=float)
    u = _mat(u)
    au = a @ u
    return float(np.linalg.norm(au - u @ (u.T @ au)))


def subspace_angle(u, v):
    """Largest principal angle between the column spans of u and v."""
    angles = subspace_angles(_mat(u), _mat(v))
    return float(angles[0]) if len(angles) else 0.0


def integrate(
    a,
    u0,
    epsilon=1.0,
    dt=None,
    t_max=None,
    tol_conv=TOL_CONV,
    record_every=None,
    tol_orth=TOL_ORTH,
):
    """Integrate the Oja flow with RK4 and QR retraction after each step.

    Defaults: ``dt = 0.05 * epsilon / ||A||_2`` and ``t_max = 200 / gap``
    where gap is the real-part gap at r = number of columns of ``u0``.
    """
    a = np.asarray(a, dtype=float)
    u0 = _mat(u0)
    n, r = u0.shape
    if not 0.0 < epsilon <= 1.0:
        raise ConfigError(f"epsilon must lie in (0, 1], got {epsilon}")
    err0 = orthonormality_error(u0)
    if err0 > tol_orth:
        raise FrameError(f"U0 not orthonormal: ||U^T U - I||_F = {err0:.3g}")
    norm_a = float(np.linalg.norm(a, 2))
    if dt is None:
        dt = 0.05 * epsilon / norm_a if norm_a > 0 else 0.05 * epsilon
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if dt * norm_a / epsilon > 0.1 + 1e-12:
        raise ConfigError(
            f"step-size guard violated: dt*||A||_2/eps = {dt * norm_a / epsilon:.3g} > 0.1"
        )
    if t_max is None:
        if r >= n:
            t_max = 10.0 * dt
        else:
            spec = spectral.eigs_sorted(a)
            re = spec.eigenvalues.real
            gap = re[r - 1] - re[r]
            if gap <= spectral.TOL_GAP:
                raise ConfigError(
                    "cannot choose a default horizon without a spectral gap; "
                    "pass t_max explicitly"
                )
            t_max = 200.0 / gap
    max_steps = max(1, int(np.ceil(t_max / dt)))
    if record_every is None:
        record_every = max(1, max_steps // 200)
    frames, residuals, steps, status, n_steps = _backend.oja_rk4(
        np.ascontiguousarray(a),
        np.ascontiguousarray(u0),
        dt / epsilon,
        max_steps,
        tol_conv,
        record_every,
    )
    if status == 2:
        raise ConvergenceError(
            "Oja flow diverged (non-finite values)", time=n_steps * dt
        )
    for k, frame in enumerate(frames):
        if orthonormality_error(frame) > tol_orth:
            raise ConvergenceError(
                "orthonormality drift exceeded tolerance", time=steps[k] * dt
            )
    return OjaTrajectory(
        times=steps.astype(float) * dt,
        frames=frames,
        residuals=residuals,
        converged=(status == 1),
    )


def stable_equilibrium(a, r, tol_gap=spectral.TOL_GAP):
    """Real orthonormal basis of the dominant r-dimensional invariant subspace."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    if r == n:
        return StiefelFrame(np.eye(n))
    _, z = spectral.real_ordered_schur(a, r, tol_gap)
    return StiefelFrame(z[:, :r].copy())


def _conjugation_atoms(spec, tol=1e-9):
    """Group sorted eigenvalue indices into reals and conjugate pairs."""
    w = spec.eigenvalues
    atoms = []
    i = 0
    scale = 1.0 + float(np.max(np.abs(w))) if w.size else 1.0
    while i < len(w):
        if abs(w[i].imag) <= tol * scale:
            atoms.append((i,))
            i += 1
        else:
            if i + 1 >= len(w) or abs(w[i + 1] - w[i].conjugate()) > 1e-6 * scale:
                raise GapError(
                    f"complex eigenvalue {w[i]:.6g} has no adjacent conjugate"
                )
            atoms.append((i, i + 1))
            i += 2
    return atoms


def classify_stability(selection, spec, tol_gap=spectral.TOL_GAP):
    """Stability verdict and linearization rate for an eigenvalue selection.

    Accepts a selection tuple or an :class:`EquilibriumFamily`. The rate is
    the largest real part among discarded eigenvalues minus the smallest
    among retained ones; the family is stable iff it is negative.
    """
    if isinstance(selection, EquilibriumFamily):
        selection = selection.selection
    re = spec.eigenvalues.real
    retained = set(selection)
    discarded = [i for i in range(spec.n) if i not in retained]
    if not discarded:
        return True, float("-inf"), False
    rate = float(max(re[i] for i in discarded) - min(re[i] for i in retained))
    degenerate = any(
        abs(re[i] - re[j]) <= tol_gap for i in selection for j in discarded
    )
    return (rate < 0.0 and not degenerate), rate, degenerate


def enumerate_equilibria(a, r, limit=64, tol_gap=spectral.TOL_GAP):
    """All equilibrium families for rank ``r``: one per conjugation-closed
    eigenvalue selection, in lexicographic selection order.

    Families whose boundary gap is degenerate are included with a flag.
    Output is truncated (flagged) at ``limit`` families.
    """
    a = np.asarray(a, dtype=float)
    spec = spectral.eigs_sorted(a)
    atoms = _conjugation_atoms(spec)
    selections = []
    for k in range(1, len(atoms) + 1):
        for combo in itertools.combinations(range(len(atoms)), k):
            idx = tuple(i for ai in combo for i in atoms[ai])
            if len(idx) == r:
                selections.append(idx)
    selections.sort()
    truncated = len(selections) > limit
    families = []
    for sel in selections[:limit]:
        rep = spectral.invariant_subspace(a, sel, spec)
        is_stable, rate, degenerate = classify_stability(sel, spec, tol_gap)
        families.append(
            EquilibriumFamily(
                selection=sel,
                representative=StiefelFrame(rep),
                is_stable=is_stable,
                linearization_rate=rate,
                degenerate=degenerate,
            )
        )
    return EquilibriumCatalog(families=families, truncated=truncated)


def in_attraction_domain(schur, est, u0):
    """Membership test for the certified attraction domain.

    Returns ``(inside, margin)`` where margin = beta - lambda_max(F2^H F2)
    and F2 is the discarded-subspace component of ``u0`` in the Schur basis.
    """
    if not est.gap_ok or est.beta is None:
        raise GapError("attraction certificate unavailable: gap_ok is false")
    u0 = _mat(u0)
    f2 = (schur.unitary.conj().T @ u0)[schur.split :, :]
    lam = float(np.linalg.norm(f2, 2)) ** 2 if f2.size else 0.0
    margin = est.beta - lam
    return lam < est.beta, margin


def random_stiefel(n, r, seed):
    """Uniform sample from St(r, n), deterministic given ``seed``.

    Orthonormalizes an n x r standard-normal matrix by QR with the
    positive-diagonal convention; the underlying stream is counter-based
    (Philox).
    """
    if not 1 <= r <= n:
        raise ConfigError(f"need 1 <= r <= n, got r={r}, n={n}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    m = rng.standard_normal((n, r))
    q, rr = np.linalg.qr(m)
    signs = np.sign(np.diag(rr))
    signs[signs == 0] = 1.0
    return StiefelFrame(q * signs)


def export_trajectory_csv(traj, a, r_stable_frame, fh):
    """Write ``t, residual, subspace_angle_to_stable, orth_error`` rows."""
    a = np.asarray(a, dtype=float)
    target = _mat(r_stable_frame)
    fh.write("t,residual,subspace_angle_to_stable,orth_error\n")
    for t, frame, res in zip(traj.times, traj.frames, traj.residuals):
        ang = subspace_angle(frame, target)
        err = orthonormality_error(frame)
        fh.write(f"{float(t)!r},{float(res)!r},{ang!r},{err!r}\n")
