"""Theorem-verification battery over seeded random ensembles.

Each suite checks one structural result at desk scale: eigenvalue retention,
PBH transfer to the reduced triple, uniqueness of the lifted steady state,
the closed-loop spectrum identity, local stability classification, the
attraction-domain certificate, the (2,1) global-convergence grid, and the
rank dichotomy. The CLI ``verify`` command drives these.
"""

from dataclasses import dataclass, field

import numpy as np

from lrkb import oja, riccati, spectral, systems
from lrkb.errors import GapError


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    witness: dict = field(default_factory=dict)


def _qr_pos(m):
    q, r = np.linalg.qr(m)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def random_orthogonal(rng, n):
    return _qr_pos(rng.standard_normal((n, n)))


def random_gapped_matrix(rng, n, r, min_gap=0.2, spread=2.0, nonnormal=0.0,
                         complex_pairs=False):
    """Random real matrix with a real-part gap >= min_gap at position r.

    Built as an orthogonal similarity of a block quasi-triangular matrix:
    the block diagonal fixes the spectrum, strictly-upper noise controls
    non-normality.
    """
    re = np.sort(rng.uniform(-spread, spread, size=n))[::-1]
    shortfall = min_gap - (re[r - 1] - re[r])
    if shortfall > 0:
        re[r:] -= shortfall + 0.05 * spread
    blocks = []
    i = 0
    while i < n:
        pairable = (i + 1 < n) and (i + 1 != r) and complex_pairs
        if pairable and rng.random() < 0.4:
            sigma = 0.5 * (re[i] + re[i + 1])
            omega = rng.uniform(0.2, 1.0)
            blocks.append(np.array([[sigma, omega], [-omega, sigma]]))
            i += 2
        else:
            blocks.append(np.array([[re[i]]]))
            i += 1
    t = np.zeros((n, n))
    pos = 0
    for b in blocks:
        k = b.shape[0]
        t[pos : pos + k, pos : pos + k] = b
        if nonnormal > 0 and pos + k < n:
            t[pos : pos + k, pos + k :] = nonnormal * rng.standard_normal(
                (k, n - pos - k)
            )
        pos += k
    q = random_orthogonal(rng, n)
    return q @ t @ q.T


def random_system(rng, n, r, p=None, min_gap=0.2, nonnormal=0.0,
                  complex_pairs=False, certifiable=False, max_tries=50):
    """Controllable + observable random system with a gap at r.

    With ``certifiable=True`` the drift is additionally rejected until the
    attraction certificate exists.
    """
    if p is None:
        p = max(1, n // 2)
    for _ in range(max_tries):
        if certifiable:
            a = random_certifiable_matrix(
                rng, n, r, min_gap=min_gap, nonnormal=nonnormal,
                complex_pairs=complex_pairs,
            )
        else:
            a = random_gapped_matrix(
                rng, n, r, min_gap=min_gap, nonnormal=nonnormal,
                complex_pairs=complex_pairs,
            )
        g = rng.standard_normal((n, n))
        c = rng.standard_normal((p, n))
        if systems.pbh_controllable(a, g) and systems.pbh_observable(a, c):
            return systems.make_system(a, g, c, np.eye(p))
    raise RuntimeError("failed to draw a controllable+observable system")


def random_certifiable_matrix(rng, n, r, min_gap=0.2, nonnormal=0.3,
                              complex_pairs=False, max_tries=50):
    """Gapped random matrix whose attraction certificate exists (gap_ok).

    The certificate needs the Bendixson-type condition on the Schur blocks,
    which is stronger than the real-part gap; strong non-normality can break
    it, so draws are rejected until it holds.
    """
    for _ in range(max_tries):
        a = random_gapped_matrix(
            rng, n, r, min_gap=min_gap, nonnormal=nonnormal,
            complex_pairs=complex_pairs,
        )
        est = spectral.attraction_beta(spectral.ordered_schur(a, r))
        if est.gap_ok:
            return a
    raise RuntimeError("failed to draw a matrix with a valid certificate")


def sample_in_domain(a, r, seed, frac=0.95, max_tries=200):
    """Initial frame certified inside the attraction domain (with margin).

    Rejection-samples uniform frames; when the certified radius is small,
    falls back to shrinking a perturbation of the stable equilibrium.
    """
    schur = spectral.ordered_schur(a, r)
    est = spectral.attraction_beta(schur)
    if not est.gap_ok:
        raise GapError("attraction certificate unavailable for this matrix")
    target = frac * est.beta
    for t in range(max_tries):
        u0 = oja.random_stiefel(a.shape[0], r, seed + 7919 * t)
        inside, margin = oja.in_attraction_domain(schur, est, u0)
        if inside and margin >= (1 - frac) * est.beta:
            return u0
    ustar = oja.stable_equilibrium(a, r).matrix
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    z = rng.standard_normal(ustar.shape)
    delta = 0.5
    while delta > 1e-12:
        u0 = oja.StiefelFrame(_qr_pos(ustar + delta * z))
        f2 = (schur.unitary.conj().T @ u0.matrix)[r:, :]
        lam = float(np.linalg.norm(f2, 2)) ** 2 if f2.size else 0.0
        if lam <= target:
            return u0
        delta *= 0.5
    return oja.StiefelFrame(ustar)


def multiset_distance(x, y):
    """Greedy nearest matching distance between two complex multisets."""
    x = np.sort_complex(np.asarray(x, dtype=complex))
    y = list(np.sort_complex(np.asarray(y, dtype=complex)))
    if len(x) != len(y):
        return np.inf
    worst = 0.0
    for v in x:
        j = int(np.argmin([abs(v - w) for w in y]))
        worst = max(worst, abs(v - y.pop(j)))
    return worst


def suite_prop3_retention(seed=0, tol_scale=1.0, n_systems=30):
    """Converged frames retain the top-r eigenvalues of A."""
    rng = np.random.default_rng(seed)
    tol = 1e-6 * tol_scale
    for i in range(n_systems):
        n = int(rng.integers(4, 13))
        r = int(rng.integers(1, max(2, n // 2 + 1)))
        sys = random_system(rng, n, r, nonnormal=0.3, complex_pairs=True,
                            certifiable=True)
        u0 = sample_in_domain(sys.a, r, seed=seed + i)
        traj = oja.integrate(sys.a, u0)
        if not traj.converged:
            return SuiteResult(
                "prop3", False, f"system {i}: flow did not converge",
                witness={"a": sys.a, "u0": u0.matrix},
            )
        u = traj.final.matrix
        got = np.linalg.eigvals(u.T @ sys.a @ u)
        want = spectral.eigs_sorted(sys.a).eigenvalues[:r]
        dist = multiset_distance(got, want)
        if not dist < tol:
            return SuiteResult(
                "prop3", False,
                f"system {i}: eigenvalue retention off by {dist:.3g}",
                witness={"a": sys.a, "u": u},
            )
    return SuiteResult("prop3", True, f"{n_systems}/{n_systems} retained top-r spectrum")


def suite_pbh_transfer(seed=0, tol_scale=1.0, n_systems=200):
    """Observability and controllability survive the rank-r reduction."""
    rng = np.random.default_rng(seed)
    tol_rank = systems.TOL_RANK * (tol_scale if tol_scale > 0 else 1e-30)
    for i in range(n_systems):
        n = int(rng.integers(3, 9))
        r = int(rng.integers(1, n))
        sys = random_system(rng, n, r, nonnormal=0.2, complex_pairs=True)
        frame = oja.stable_equilibrium(sys.a, r)
        red = systems.reduce(sys, frame)
        if not systems.pbh_observable(red.a_u, red.c_u, tol_rank=tol_rank):
            return SuiteResult(
                "pbh", False, f"system {i}: reduced pair lost observability",
                witness={"a": sys.a, "c": sys.c, "u": frame.matrix},
            )
        if not systems.pbh_controllable(red.a_u, red.g_u, tol_rank=tol_rank):
            return SuiteResult(
                "pbh", False, f"system {i}: reduced pair lost controllability",
                witness={"a": sys.a, "g": sys.g, "u": frame.matrix},
            )
    return SuiteResult("pbh", True, f"{n_systems}/{n_systems} reductions kept PBH rank")


def suite_prop7_uniqueness(seed=0, tol_scale=1.0, n_systems=10, n_rotations=10):
    """The lifted steady-state covariance is frame-rotation invariant."""
    rng = np.random.default_rng(seed)
    tol = 1e-8 * tol_scale
    for i in range(n_systems):
        n = int(rng.integers(3, 9))
        r = int(rng.integers(1, n))
        sys = random_system(rng, n, r, nonnormal=0.2)
        ustar = oja.stable_equilibrium(sys.a, r).matrix
        lifted = []
        for _ in range(n_rotations):
            w = random_orthogonal(rng, r)
            sol = riccati.reduced_steady_state(sys, ustar @ w)
            lifted.append(sol.lifted)
        worst = max(
            float(np.linalg.norm(x - y))
            for j, x in enumerate(lifted)
            for y in lifted[j + 1 :]
        )
        if not worst < tol:
            return SuiteResult(
                "prop7", False, f"system {i}: lifted spread {worst:.3g}",
                witness={"a": sys.a, "u": ustar},
            )
    return SuiteResult("prop7", True, f"{n_systems} systems rotation-invariant")


def suite_prop8_spectrum(seed=0, tol_scale=1.0, n_systems=100):
    """Closed-loop spectrum = reduced closed-loop eigs + discarded eigs of A."""
    rng = np.random.default_rng(seed)
    tol = 1e-6 * tol_scale
    for i in range(n_systems):
        n = int(rng.integers(3, 13))
        r = int(rng.integers(1, n))
        sys = random_system(rng, n, r, nonnormal=0.2, complex_pairs=True)
        frame = oja.stable_equilibrium(sys.a, r)
        sol = riccati.reduced_steady_state(sys, frame)
        spec = spectral.eigs_sorted(sys.a)
        expected = np.concatenate(
            [sol.reduced_closed_loop_eigs, spec.eigenvalues[r:]]
        )
        dist = multiset_distance(sol.closed_loop_eigs, expected)
        if not dist < tol:
            return SuiteResult(
                "prop8", False, f"system {i}: spectrum mismatch {dist:.3g}",
                witness={"a": sys.a, "u": frame.matrix, "lifted": sol.lifted},
            )
    return SuiteResult("prop8", True, f"{n_systems}/{n_systems} spectra matched")


def suite_thm1_classification(seed=0, tol_scale=1.0):
    """Exactly one stable family; perturbed unstable reps escape, stable returns."""
    a = np.diag([3.0, 1.0, -2.0])
    rng = np.random.default_rng(seed)
    res_tol = 1e-9 * tol_scale
    for r in (1, 2):
        catalog = oja.enumerate_equilibria(a, r)
        stable = [f for f in catalog if f.is_stable]
        if len(stable) != 1 or stable[0].selection != tuple(range(r)):
            return SuiteResult(
                "thm1", False, f"r={r}: stable families {len(stable)}",
                witness={"a": a},
            )
        for fam in catalog:
            u0 = oja.StiefelFrame(
                _qr_pos(
                    fam.representative.matrix
                    + 1e-6 * rng.standard_normal((3, r))
                )
            )
            traj = oja.integrate(a, u0, t_max=50.0, tol_conv=res_tol)
            if fam.is_stable:
                if not (traj.converged and traj.residuals[-1] < res_tol):
                    return SuiteResult(
                        "thm1", False,
                        f"r={r}: stable family did not re-converge",
                        witness={"a": a, "u0": u0.matrix},
                    )
            else:
                dists = [
                    np.linalg.norm(
                        f @ f.T
                        - fam.representative.matrix @ fam.representative.matrix.T
                    )
                    for f in traj.frames
                ]
                if not max(dists) > 1e-3:
                    return SuiteResult(
                        "thm1", False,
                        f"r={r}: unstable family {fam.selection} did not escape",
                        witness={"a": a, "u0": u0.matrix},
                    )
    return SuiteResult("thm1", True, "stable family unique; escape/return verified")


def suite_thm2_attraction(seed=0, tol_scale=1.0, n_systems=50):
    """Certified in-domain starts converge to the dominant subspace."""
    rng = np.random.default_rng(seed)
    angle_tol = 1e-5 * tol_scale
    for i in range(n_systems):
        n = int(rng.integers(4, 11))
        r = int(rng.integers(1, max(2, n // 2 + 1)))
        a = random_certifiable_matrix(rng, n, r, min_gap=0.3, nonnormal=0.4)
        u0 = sample_in_domain(a, r, seed=seed + 31 * i)
        traj = oja.integrate(a, u0)
        target = oja.stable_equilibrium(a, r)
        ang = oja.subspace_angle(traj.final, target)
        if not (traj.converged and ang < angle_tol):
            return SuiteResult(
                "thm2", False,
                f"system {i}: converged={traj.converged}, angle={ang:.3g}",
                witness={"a": a, "u0": u0.matrix},
            )
    return SuiteResult("thm2", True, f"{n_systems}/{n_systems} in-domain starts converged")


def suite_prop4_grid(seed=0, tol_scale=1.0, n_angles=360):
    """(n,r)=(2,1): every non-exceptional initial angle reaches +/- the
    dominant direction."""
    a = np.array([[2.0, 0.5], [0.0, -1.0]])
    angle_tol = 1e-5 * tol_scale
    dominant = oja.stable_equilibrium(a, 1).matrix
    spec = spectral.eigs_sorted(a)
    # The two exceptional starts span the subdominant eigenvector.
    bad = spec.eigenvectors[:, 1].real
    bad_angle = np.arctan2(bad[1], bad[0])
    for k in range(n_angles):
        theta = 2 * np.pi * k / n_angles
        d = (theta - bad_angle) % np.pi
        if min(d, np.pi - d) < 1e-3:
            continue
        u0 = np.array([[np.cos(theta)], [np.sin(theta)]])
        traj = oja.integrate(a, u0, t_max=200.0)
        ang = oja.subspace_angle(traj.final, dominant)
        if not (traj.converged and ang < angle_tol):
            return SuiteResult(
                "prop4", False, f"angle {theta:.4f}: final angle {ang:.3g}",
                witness={"a": a, "u0": u0},
            )
    return SuiteResult("prop4", True, f"{n_angles}-point grid converged")


def suite_rank_dichotomy(seed=0, tol_scale=1.0):
    """Verdict flips from unbounded to bounded exactly at the unstable count."""
    a = np.diag([2.0, 1.0, -1.0, -2.0])
    sys = systems.make_system(a, np.eye(4), np.eye(4), np.eye(4))
    r_prime = systems.minimal_rank(sys)
    if r_prime != 2:
        return SuiteResult("rank", False, f"r' = {r_prime}, expected 2",
                           witness={"a": a})
    for r in (1, 2, 3):
        report = riccati.rank_condition_report(sys, r)
        if report.bounded != (r >= r_prime):
            return SuiteResult(
                "rank", False,
                f"r={r}: bounded={report.bounded}, expected {r >= r_prime}",
                witness={"a": a},
            )
    del tol_scale, seed
    return SuiteResult("rank", True, "verdict flips at r = r' = 2")


SUITES = {
    "prop3": suite_prop3_retention,
    "pbh": suite_pbh_transfer,
    "prop7": suite_prop7_uniqueness,
    "prop8": suite_prop8_spectrum,
    "thm1": suite_thm1_classification,
    "thm2": suite_thm2_attraction,
    "prop4": suite_prop4_grid,
    "rank": suite_rank_dichotomy,
}


def run_suites(only=None, seed=0, tol_scale=1.0):
    names = [only] if only else list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {unknown}; available: {list(SUITES)}")
    return [SUITES[name](seed=seed, tol_scale=tol_scale) for name in names]
