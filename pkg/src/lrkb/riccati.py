"""Riccati differential equations, steady states, and the rank condition.

The algebraic Riccati equation is solved by integrating the Riccati ODE to
near-stationarity and polishing with Newton-Kleinman iterations (each step a
Lyapunov solve), which matches the convergence statement backing the filter's
steady state.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from lrkb import _backend, oja, spectral, systems
from lrkb.errors import ConvergenceError, FrameError, ValidationError

TOL_SYM = 1e-10
TOL_PSD = 1e-8
TOL_ARE = 1e-9


@dataclass(frozen=True)
class RiccatiState:
    """Symmetric PSD matrix at a time point (full n x n or reduced r x r)."""

    matrix: np.ndarray
    time: float


@dataclass(frozen=True)
class LiftedSolution:
    """Steady state of the reduced Riccati equation lifted back to n x n.

    ``closed_loop_eigs`` is the spectrum of A - P_lifted C^T (HH^T)^{-1} C;
    ``reduced_closed_loop_eigs`` holds the r eigenvalues contributed by the
    reduced closed loop.
    """

    frame: np.ndarray
    reduced: np.ndarray
    lifted: np.ndarray
    closed_loop_eigs: np.ndarray
    reduced_closed_loop_eigs: np.ndarray


@dataclass(frozen=True)
class RankConditionReport:
    rank: int
    unstable_count: int
    rank_sufficient: bool
    max_closed_loop_real: float
    bounded: bool
    closed_loop_eigs: np.ndarray


def check_riccati_state(p, tol_sym=TOL_SYM, tol_psd=TOL_PSD):
    p = np.asarray(p, dtype=float)
    sym_err = float(np.linalg.norm(p - p.T))
    if sym_err > tol_sym:
        raise ValidationError(f"matrix not symmetric: ||P - P^T||_F = {sym_err:.3g}")
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (p + p.T))))
    if min_eig < -tol_psd:
        raise ValidationError(f"matrix not PSD: min eigenvalue {min_eig:.3g}")
    return p


def _gain_terms(sys):
    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    s = sys.c.T @ hht_inv @ sys.c
    q = sys.g @ sys.g.T
    return q, s


def are_residual(a, q, s, p):
    ap = a @ p
    return float(np.linalg.norm(ap + ap.T + q - p @ s @ p))


def propagate_full(sys, p0, dt, t_max, record_every=1):
    """Trajectory of the full n x n Riccati ODE from ``p0``."""
    if isinstance(p0, RiccatiState):
        t0, p0 = p0.time, p0.matrix
    else:
        t0 = 0.0
    p0 = check_riccati_state(p0)
    q, s = _gain_terms(sys)
    max_steps = max(1, int(np.ceil(t_max / dt)))
    mats, _, steps, status, n_steps = _backend.riccati_rk4(
        sys.a, q, s, p0, dt, max_steps, 0.0, record_every
    )
    if status == 2:
        raise ConvergenceError(
            "Riccati propagation diverged", time=t0 + n_steps * dt
        )
    return [
        RiccatiState(matrix=m, time=t0 + k * dt) for m, k in zip(mats, steps)
    ]


def _ode_warm_start(a, q, s, max_rounds=400):
    """Crude ODE integration toward the stabilizing branch.

    Steps in short chunks with a step size tied to the current closed-loop
    scale, until A - P S is Hurwitz and the residual has settled enough for
    Newton-Kleinman to take over.
    """
    k = a.shape[0]
    p = np.eye(k)
    for _ in range(max_rounds):
        scale = np.linalg.norm(a, 2) + np.linalg.norm(p @ s, 2) + 1.0
        dt = 0.2 / scale
        mats, resids, _, status, _ = _backend.riccati_rk4(
            a, q, s, p, dt, 50, 1e-8, 50
        )
        if status == 2:
            raise ConvergenceError("Riccati ODE warm start diverged")
        p = 0.5 * (mats[-1] + mats[-1].T)
        cl = a - p @ s
        if float(np.max(np.linalg.eigvals(cl).real)) < 0:
            return p
    raise ConvergenceError(
        "Riccati ODE warm start failed to reach a stabilizing iterate",
        residual=float(resids[-1]),
    )


def solve_are(a, gk, ck, h, tol_are=TOL_ARE, max_newton=60):
    """Stabilizing SPD solution of A P + P A^T + G G^T - P C^T(HH^T)^{-1}C P = 0.

    Requires the (A, G, C) triple to pass the PBH controllability and
    observability tests.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    gk = np.atleast_2d(np.asarray(gk, dtype=float))
    ck = np.atleast_2d(np.asarray(ck, dtype=float))
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if not systems.pbh_controllable(a, gk):
        raise ValidationError("(A, G) fails the PBH controllability test")
    if not systems.pbh_observable(a, ck):
        raise ValidationError("(C, A) fails the PBH observability test")
    q = gk @ gk.T
    s = ck.T @ np.linalg.inv(h @ h.T) @ ck
    p = _ode_warm_start(a, q, s)
    res = are_residual(a, q, s, p)
    for _ in range(max_newton):
        if res <= tol_are * (1.0 + float(np.sum(p * p))):
            break
        cl = a - p @ s
        rhs = -(q + p @ s @ p)
        p_next = la.solve_lyapunov(cl, rhs)
        p_next = 0.5 * (p_next + p_next.T)
        res_next = are_residual(a, q, s, p_next)
        if not np.isfinite(res_next):
            raise ConvergenceError("Newton-Kleinman produced non-finite iterate")
        p, res = p_next, res_next
    else:
        raise ConvergenceError(
            "ARE solver did not reach tolerance", residual=res
        )
    min_eig = float(np.min(np.linalg.eigvalsh(p)))
    max_cl = float(np.max(np.linalg.eigvals(a - p @ s).real))
    if min_eig <= 0 or max_cl >= 0:
        raise ConvergenceError(
            f"ARE solution not stabilizing/PD (min eig {min_eig:.3g}, "
            f"max closed-loop Re {max_cl:.3g})",
            residual=res,
        )
    return p


def reduced_steady_state(sys, frame, tol_conv=oja.TOL_CONV):
    """Steady reduced Riccati solution on an equilibrium frame, lifted to n x n."""
    u = frame.matrix if hasattr(frame, "matrix") else np.asarray(frame, dtype=float)
    res = oja.residual(sys.a, u)
    if res > tol_conv:
        raise FrameError(
            f"frame is not an Oja equilibrium: residual {res:.3g} > {tol_conv:.3g}"
        )
    red = systems.reduce(sys, u)
    r_steady = solve_are(red.a_u, red.g_u, red.c_u, sys.h)
    lifted = u @ r_steady @ u.T
    lifted = 0.5 * (lifted + lifted.T)
    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    cl = sys.a - lifted @ sys.c.T @ hht_inv @ sys.c
    cl_red = red.a_u - r_steady @ red.c_u.T @ hht_inv @ red.c_u
    eigs = np.linalg.eigvals(cl)
    eigs = eigs[np.lexsort((-eigs.imag, -eigs.real))]
    sig = np.linalg.eigvals(cl_red)
    sig = sig[np.lexsort((-sig.imag, -sig.real))]
    return LiftedSolution(
        frame=u,
        reduced=r_steady,
        lifted=lifted,
        closed_loop_eigs=eigs,
        reduced_closed_loop_eigs=sig,
    )


def rank_condition_report(sys, r, threshold=0.0):
    """Boundedness verdict for the rank-r LRKB closed loop."""
    spec = spectral.eigs_sorted(sys.a)
    r_prime = spectral.count_unstable(spec, threshold)
    frame = oja.stable_equilibrium(sys.a, r)
    sol = reduced_steady_state(sys, frame)
    max_re = float(np.max(sol.closed_loop_eigs.real))
    return RankConditionReport(
        rank=r,
        unstable_count=r_prime,
        rank_sufficient=(r >= r_prime),
        max_closed_loop_real=max_re,
        bounded=(max_re < 0.0),
        closed_loop_eigs=sol.closed_loop_eigs,
    )


def export_closed_loop_csv(sol, spec, fh):
    """Write ``re, im, source`` rows: reduced closed-loop eigenvalues plus the
    retained trailing eigenvalues of A."""
    fh.write("re,im,source\n")
    for z in sol.reduced_closed_loop_eigs:
        fh.write(f"{float(z.real)!r},{float(z.imag)!r},reduced\n")
    r = sol.reduced.shape[0]
    for z in spec.eigenvalues[r:]:
        fh.write(f"{float(z.real)!r},{float(z.imag)!r},retained\n")
