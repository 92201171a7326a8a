"""Stochastic plant simulation, the two filters, and Monte Carlo validation.

Discretization is Euler-Maruyama for the state SDE on a fixed grid; the
covariance ODEs run on the same grid with RK4 and the estimate updates with
Euler. The discrete observation noise is scaled by 1/sqrt(dt) so that its
covariance is HH^T/dt, the correct white-noise density for the Riccati
equations to stay consistent under grid refinement.
"""

from dataclasses import dataclass

import numpy as np

from lrkb import _backend, oja, riccati, systems
from lrkb.errors import ConfigError, ConvergenceError

DEFAULT_BLOCK = 2000


@dataclass(frozen=True)
class SimulationPath:
    """One Euler-Maruyama sample path with observations on the same grid."""

    times: np.ndarray
    states: np.ndarray
    observations: np.ndarray
    seed: int

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class FilterRun:
    """Filter output on the observation grid.

    ``lifted_cov`` is P-hat for the full filter and U R U^T for the low-rank
    filter; ``error_cov_pred`` is the predicted error covariance (the
    covariance itself for the optimal filter, the solution of the error-
    covariance ODE for the low-rank filter).
    """

    times: np.ndarray
    estimates: np.ndarray
    lifted_cov: np.ndarray
    error_cov_pred: np.ndarray
    errors: np.ndarray


@dataclass(frozen=True)
class MonteCarloReport:
    times: np.ndarray
    empirical_cov: np.ndarray
    predicted_cov: np.ndarray
    trace_empirical: np.ndarray
    trace_predicted: np.ndarray
    trace_full_cov: np.ndarray
    max_rel_deviation: float | None
    n_paths: int
    seed: int


def _rng_for(seed_seq):
    return np.random.Generator(np.random.Philox(seed_seq))


def _grid(dt, t_max):
    if dt <= 0 or t_max <= 0:
        raise ConfigError(f"dt and t_max must be positive, got {dt}, {t_max}")
    n_steps = max(1, int(round(t_max / dt)))
    return n_steps, np.arange(n_steps + 1) * dt


def simulate_truth(sys, x0, dt_sim, t_max, seed):
    """Single Euler-Maruyama path of the plant with on-grid observations.

    Noise draw order (fixed for reproducibility): the process-noise block
    first, then the observation-noise block, both from a Philox stream keyed
    by ``seed``.
    """
    systems.validate(sys)
    n_steps, times = _grid(dt_sim, t_max)
    n, p = sys.n, sys.p
    rng = _rng_for(np.random.SeedSequence(seed))
    xi = rng.standard_normal((n_steps, n))
    eta = rng.standard_normal((n_steps + 1, p))
    states = np.empty((n_steps + 1, n))
    states[0] = np.asarray(x0, dtype=float).reshape(n)
    sq = np.sqrt(dt_sim)
    for k in range(n_steps):
        x = states[k]
        states[k + 1] = x + dt_sim * (sys.a @ x) + sq * (sys.g @ xi[k])
    # Unstable open loops blow up eventually; that is expected and shows up
    # in the data rather than raising here.
    observations = states @ sys.c.T + (eta @ sys.h.T) / sq
    return SimulationPath(times=times, states=states, observations=observations, seed=seed)


def _covariance_schedule(a, q, s, p0, dt, n_steps):
    mats, _, steps, status, n_done = _backend.riccati_rk4(
        a, q, s, p0, dt, n_steps, 0.0, 1
    )
    if status == 2:
        raise ConvergenceError("covariance ODE diverged", time=n_done * dt)
    assert len(steps) == n_steps + 1
    return mats


def _estimate_path(sys, observations, gains, xhat0, dt):
    n_steps = observations.shape[0] - 1
    est = np.empty((n_steps + 1, sys.n))
    est[0] = np.asarray(xhat0, dtype=float).reshape(sys.n)
    for k in range(n_steps):
        x = est[k]
        innov = observations[k] - sys.c @ x
        est[k + 1] = x + dt * (sys.a @ x + gains[k] @ innov)
    return est


def run_full_filter(sys, path, xhat0, p0):
    """Kalman-Bucy filter co-integrated with its Riccati equation."""
    if isinstance(p0, riccati.RiccatiState):
        p0 = p0.matrix
    p0 = riccati.check_riccati_state(p0)
    dt = path.dt
    n_steps = path.states.shape[0] - 1
    q, s = sys.g @ sys.g.T, sys.c.T @ np.linalg.inv(sys.observation_noise_cov()) @ sys.c
    cov = _covariance_schedule(sys.a, q, s, p0, dt, n_steps)
    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    gains = np.einsum("kij,jl->kil", cov, sys.c.T @ hht_inv)
    est = _estimate_path(sys, path.observations, gains, xhat0, dt)
    return FilterRun(
        times=path.times,
        estimates=est,
        lifted_cov=cov,
        error_cov_pred=cov,
        errors=est - path.states,
    )


def lrkb_cov_schedule(sys, frame, r0, dt, n_steps, require_equilibrium=True,
                      tol_conv=oja.TOL_CONV):
    """Reduced-Riccati covariance schedule lifted to n x n for a fixed frame."""
    u = frame.matrix if hasattr(frame, "matrix") else np.asarray(frame, dtype=float)
    if require_equilibrium:
        res = oja.residual(sys.a, u)
        if res > tol_conv:
            raise ConfigError(
                f"frame is not an equilibrium (residual {res:.3g}); pass "
                "require_equilibrium=False or co_integrate=True to opt in"
            )
    red = systems.reduce(sys, u)
    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    q_u = red.g_u @ red.g_u.T
    s_u = red.c_u.T @ hht_inv @ red.c_u
    r_sched = _covariance_schedule(red.a_u, q_u, s_u, r0, dt, n_steps)
    lifted = np.einsum("ij,kjl,ml->kim", u, r_sched, u)
    return lifted, r_sched


def run_lrkb_filter(sys, path, frame, xtilde0, r0=None, v0=None,
                    co_integrate=False, epsilon=1.0, require_equilibrium=True):
    """Low-rank filter: reduced Riccati equation, lifted gain, and the
    error-covariance ODE propagated alongside.

    With ``co_integrate=True`` the frame follows the Oja flow on the same
    grid (opt-in; by default the frame is a precomputed equilibrium).
    """
    u = frame.matrix if hasattr(frame, "matrix") else np.asarray(frame, dtype=float)
    r = u.shape[1]
    if r0 is None:
        r0 = np.eye(r)
    r0 = riccati.check_riccati_state(r0)
    dt = path.dt
    n_steps = path.states.shape[0] - 1
    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    if not co_integrate:
        lifted, _ = lrkb_cov_schedule(
            sys, u, r0, dt, n_steps, require_equilibrium=require_equilibrium
        )
    else:
        lifted = _co_integrated_schedule(sys, u, r0, dt, n_steps, epsilon, hht_inv)
    gains = np.einsum("kij,jl->kil", lifted, sys.c.T @ hht_inv)
    est = _estimate_path(sys, path.observations, gains, xtilde0, dt)
    if not np.all(np.isfinite(est)):
        raise ConvergenceError("low-rank filter estimate diverged")
    if v0 is None:
        e0 = np.asarray(xtilde0, dtype=float).reshape(sys.n) - path.states[0]
        v0 = np.outer(e0, e0)
    err_cov = propagate_error_cov(sys, lifted, v0, dt)
    return FilterRun(
        times=path.times,
        estimates=est,
        lifted_cov=lifted,
        error_cov_pred=err_cov,
        errors=est - path.states,
    )


def _co_integrated_schedule(sys, u0, r0, dt, n_steps, epsilon, hht_inv):
    u = np.array(u0, dtype=float)
    rmat = np.array(r0, dtype=float)
    lifted = np.empty((n_steps + 1, sys.n, sys.n))
    lifted[0] = u @ rmat @ u.T
    h_eff = dt / epsilon
    for k in range(n_steps):
        red = systems.reduce(sys, u)
        q_u = red.g_u @ red.g_u.T
        s_u = red.c_u.T @ hht_inv @ red.c_u
        mats, _, _, status, _ = _backend.riccati_rk4(
            red.a_u, q_u, s_u, rmat, dt, 1, 0.0, 1
        )
        if status == 2:
            raise ConvergenceError("reduced Riccati diverged", time=k * dt)
        rmat = mats[-1]
        frames, _, _, status, _ = _backend.oja_rk4(sys.a, u, h_eff, 1, 0.0, 1)
        if status == 2:
            raise ConvergenceError("Oja co-integration diverged", time=k * dt)
        u = frames[-1]
        lifted[k + 1] = u @ rmat @ u.T
    return lifted


def propagate_error_cov(sys, lifted_cov_schedule, v0, dt):
    """Integrate the error-covariance ODE along a covariance schedule.

    dV/dt = A_cl V + V A_cl^T + G G^T + P_t C^T (HH^T)^{-1} C P_t with
    A_cl = A - P_t C^T (HH^T)^{-1} C; the schedule value is frozen within
    each RK4 step and V is symmetrized after every step.
    """
    sched = np.asarray(lifted_cov_schedule, dtype=float)
    m = sched.shape[0]
    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    s = sys.c.T @ hht_inv @ sys.c
    q = sys.g @ sys.g.T
    out = np.empty((m, sys.n, sys.n))
    v = riccati.check_riccati_state(np.asarray(v0, dtype=float)).copy()
    out[0] = v
    for k in range(m - 1):
        p_t = sched[k]
        a_cl = sys.a - p_t @ s
        forcing = q + p_t @ s @ p_t

        def rhs(x):
            ax = a_cl @ x
            return ax + ax.T + forcing

        k1 = rhs(v)
        k2 = rhs(v + 0.5 * dt * k1)
        k3 = rhs(v + 0.5 * dt * k2)
        k4 = rhs(v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        v = 0.5 * (v + v.T)
        if not np.all(np.isfinite(v)):
            raise ConvergenceError("error-covariance ODE diverged", time=(k + 1) * dt)
        out[k + 1] = v
    return out


def _batch_noise(sys, seed_seqs, n_steps):
    """Stack per-path Philox draws; one independent child stream per path."""
    b = len(seed_seqs)
    xi = np.empty((b, n_steps, sys.n))
    eta = np.empty((b, n_steps + 1, sys.p))
    for i, ss in enumerate(seed_seqs):
        rng = _rng_for(ss)
        xi[i] = rng.standard_normal((n_steps, sys.n))
        eta[i] = rng.standard_normal((n_steps + 1, sys.p))
    return xi, eta


def monte_carlo(sys, frame, dt, t_max, n_paths, seed, x0=None, xhat0=None,
                r0=None, sample_every=None, block_size=DEFAULT_BLOCK,
                require_equilibrium=True):
    """Empirical error covariance of the low-rank filter across paths.

    Paths use independent spawned Philox streams; accumulation runs in fixed
    path order, so the result is reproducible and independent of any caller
    parallelism. Returns per-sampled-time empirical covariance against the
    predicted error covariance, plus trace trajectories for the low-rank and
    full filters.
    """
    systems.validate(sys)
    if n_paths < 1:
        raise ConfigError("n_paths must be >= 1")
    u = frame.matrix if hasattr(frame, "matrix") else np.asarray(frame, dtype=float)
    r = u.shape[1]
    n_steps, times = _grid(dt, t_max)
    n, p = sys.n, sys.p
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
    xhat0 = np.zeros(n) if xhat0 is None else np.asarray(xhat0, dtype=float).reshape(n)
    if r0 is None:
        r0 = np.eye(r)
    if sample_every is None:
        sample_every = max(1, n_steps // 100)
    sample_idx = np.arange(0, n_steps + 1, sample_every)
    if sample_idx[-1] != n_steps:
        sample_idx = np.append(sample_idx, n_steps)

    hht_inv = np.linalg.inv(sys.observation_noise_cov())
    lifted, _ = lrkb_cov_schedule(
        sys, u, r0, dt, n_steps, require_equilibrium=require_equilibrium
    )
    gains = np.einsum("kij,jl->kil", lifted, sys.c.T @ hht_inv)
    e0 = xhat0 - x0
    pred = propagate_error_cov(sys, lifted, np.outer(e0, e0), dt)

    q, s = sys.g @ sys.g.T, sys.c.T @ hht_inv @ sys.c
    full_cov = _covariance_schedule(sys.a, q, s, np.outer(e0, e0), dt, n_steps)

    children = np.random.SeedSequence(seed).spawn(n_paths)
    m = len(sample_idx)
    acc = np.zeros((m, n, n))
    sq = np.sqrt(dt)
    for start in range(0, n_paths, block_size):
        seqs = children[start : start + block_size]
        xi, eta = _batch_noise(sys, seqs, n_steps)
        b = len(seqs)
        x = np.tile(x0, (b, 1))
        xh = np.tile(xhat0, (b, 1))
        pos = 0
        for k in range(n_steps + 1):
            if k == sample_idx[pos]:
                e = xh - x
                acc[pos] += np.einsum("bi,bj->ij", e, e)
                pos += 1
                if pos == m:
                    break
            y = x @ sys.c.T + eta[:, k] @ sys.h.T / sq
            innov = y - xh @ sys.c.T
            xh = xh + dt * (xh @ sys.a.T + innov @ gains[k].T)
            x = x + dt * (x @ sys.a.T) + sq * (xi[:, k] @ sys.g.T)

    emp = acc / n_paths
    pred_s = pred[sample_idx]
    if n_paths > 1:
        diag = np.sqrt(np.maximum(np.einsum("kii->ki", pred_s), 0.0))
        scale = diag[:, :, None] * diag[:, None, :] + 1e-300
        rel = np.abs(emp - pred_s) / scale
        max_rel = float(np.max(rel[1:])) if m > 1 else float(np.max(rel))
    else:
        max_rel = None
    return MonteCarloReport(
        times=times[sample_idx],
        empirical_cov=emp,
        predicted_cov=pred_s,
        trace_empirical=np.einsum("kii->k", emp),
        trace_predicted=np.einsum("kii->k", pred_s),
        trace_full_cov=np.einsum("kii->k", full_cov[sample_idx]),
        max_rel_deviation=max_rel,
        n_paths=n_paths,
        seed=seed,
    )


def export_run_csv(full_run, lrkb_run, fh):
    """Per-run CSV: ``t, err_norm_full, err_norm_lrkb, trace_V_pred,
    trace_V_emp, trace_Phat``.

    ``trace_V_emp`` for a single run is the squared low-rank error norm (the
    trace of the outer-product error); ``trace_Phat`` is the trace of the
    full filter's covariance.
    """
    fh.write("t,err_norm_full,err_norm_lrkb,trace_V_pred,trace_V_emp,trace_Phat\n")
    for k, t in enumerate(lrkb_run.times):
        enf = float(np.linalg.norm(full_run.errors[k]))
        enl = float(np.linalg.norm(lrkb_run.errors[k]))
        tvp = float(np.trace(lrkb_run.error_cov_pred[k]))
        tve = enl * enl
        tph = float(np.trace(full_run.lifted_cov[k]))
        fh.write(f"{float(t)!r},{enf!r},{enl!r},{tvp!r},{tve!r},{tph!r}\n")


def export_monte_carlo_csv(report, fh):
    """Monte Carlo summary CSV: ``t, trace_V_pred, trace_V_emp, trace_Phat``."""
    fh.write("t,trace_V_pred,trace_V_emp,trace_Phat\n")
    for k, t in enumerate(report.times):
        fh.write(
            f"{float(t)!r},{float(report.trace_predicted[k])!r},"
            f"{float(report.trace_empirical[k])!r},{float(report.trace_full_cov[k])!r}\n"
        )
