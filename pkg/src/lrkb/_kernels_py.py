"""Pure-NumPy fallback for the hot integration kernels.

The compiled module ``lrkb._kernels`` implements the same two entry points
with identical semantics; ``lrkb._backend`` picks whichever is available.
Status codes returned by both backends:

* ``0`` -- ran to ``max_steps`` without meeting the stopping tolerance,
* ``1`` -- stopping tolerance met,
* ``2`` -- a non-finite value appeared (divergence).
"""

import numpy as np

BACKEND_NAME = "python"


def _qr_pos(u):
    """Thin QR with the positive-diagonal sign convention."""
    q, r = np.linalg.qr(u)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def oja_rk4(a, u0, h, max_steps, tol_conv, record_every):
    """Integrate dU/dt = (I - U U^T) A U with RK4 + QR retraction.

    ``h`` is the effective step (grid step divided by the speed parameter).
    Records the frame and residual at step 0, every ``record_every`` steps,
    and at the final step. Returns
    ``(frames, residuals, steps, status, n_steps)``.
    """
    n, r = u0.shape
    u = np.array(u0, dtype=float)
    cap = max_steps // record_every + 2
    frames = np.empty((cap, n, r))
    residuals = np.empty(cap)
    steps = np.empty(cap, dtype=np.int64)

    def rhs(x):
        ax = a @ x
        return ax - x @ (x.T @ ax)

    m = 0

    def record(k, res):
        nonlocal m
        frames[m] = u
        residuals[m] = res
        steps[m] = k
        m += 1

    res = np.linalg.norm(rhs(u))
    record(0, res)
    status = 1 if res < tol_conv else 0
    k = 0
    while status == 0 and k < max_steps:
        k1 = rhs(u)
        k2 = rhs(u + 0.5 * h * k1)
        k3 = rhs(u + 0.5 * h * k2)
        k4 = rhs(u + h * k3)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        u = _qr_pos(u)
        k += 1
        res = np.linalg.norm(rhs(u))
        if not np.isfinite(res):
            status = 2
        elif res < tol_conv:
            status = 1
        if status != 0 or k % record_every == 0 or k == max_steps:
            record(k, res)
    return frames[:m], residuals[:m], steps[:m], status, k


def riccati_rk4(a, q, s, p0, dt, max_steps, stop_tol, record_every):
    """Integrate dP/dt = A P + P A^T + Q - P S P with RK4.

    The state is symmetrized after every step. If ``stop_tol > 0`` the run
    stops once ``||rhs(P)||_F < stop_tol * (1 + ||P||_F^2)``. Returns
    ``(mats, residuals, steps, status, n_steps)`` with the same status codes
    as :func:`oja_rk4`.
    """
    k_dim = p0.shape[0]
    p = np.array(p0, dtype=float)
    cap = max_steps // record_every + 2
    mats = np.empty((cap, k_dim, k_dim))
    residuals = np.empty(cap)
    steps = np.empty(cap, dtype=np.int64)

    def rhs(x):
        ap = a @ x
        return ap + ap.T + q - x @ s @ x

    def stop(res, x):
        return stop_tol > 0 and res < stop_tol * (1.0 + np.sum(x * x))

    m = 0

    def record(k, res):
        nonlocal m
        mats[m] = p
        residuals[m] = res
        steps[m] = k
        m += 1

    res = np.linalg.norm(rhs(p))
    record(0, res)
    status = 1 if stop(res, p) else 0
    k = 0
    while status == 0 and k < max_steps:
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * dt * k1)
        k3 = rhs(p + 0.5 * dt * k2)
        k4 = rhs(p + dt * k3)
        p = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        p = 0.5 * (p + p.T)
        k += 1
        res = np.linalg.norm(rhs(p))
        if not np.isfinite(res):
            status = 2
        elif stop(res, p):
            status = 1
        if status != 0 or k % record_every == 0 or k == max_steps:
            record(k, res)
    return mats[:m], residuals[:m], steps[:m], status, k
