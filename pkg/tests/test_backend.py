import os
import subprocess
import sys

import numpy as np
import pytest

from lrkb import _backend, _kernels_py

compiled = pytest.importorskip("lrkb._kernels")


def test_active_backend_is_compiled():
    assert _backend.BACKEND_NAME == "compiled"


def test_force_python_env_override():
    env = dict(os.environ, LRKB_FORCE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import lrkb; print(lrkb.kernel_backend)"],
        capture_output=True, text=True, env=env,
    )
    assert out.returncode == 0
    assert out.stdout.strip() == "python"


def test_oja_kernels_agree(rng):
    a = rng.standard_normal((8, 8))
    a = a - 1.0 * np.eye(8)
    from lrkb import oja
    u0 = oja.random_stiefel(8, 2, seed=1).matrix
    h = 0.05 / np.linalg.norm(a, 2)
    args = (np.ascontiguousarray(a), np.ascontiguousarray(u0), h, 400, 0.0, 50)
    fc, rc_, sc, stc, nc = compiled.oja_rk4(*args)
    fp, rp, sp_, stp, np_ = _kernels_py.oja_rk4(*args)
    assert stc == stp and nc == np_
    assert np.array_equal(sc, sp_)
    # QR retraction implementations differ (MGS vs Householder) only at roundoff
    assert np.max(np.abs(fc - fp)) < 1e-9
    assert np.max(np.abs(rc_ - rp)) < 1e-9
    for frame in fc:
        assert np.linalg.norm(frame.T @ frame - np.eye(2)) < 1e-12


def test_riccati_kernels_agree(rng):
    n = 5
    a = rng.standard_normal((n, n))
    g = rng.standard_normal((n, n))
    c = rng.standard_normal((2, n))
    q = g @ g.T
    s = c.T @ c
    p0 = np.eye(n)
    args = (a, q, s, p0, 1e-3, 500, 0.0, 100)
    mc, rc_, sc, stc, _ = compiled.riccati_rk4(*args)
    mp, rp, sp_, stp, _ = _kernels_py.riccati_rk4(*args)
    assert stc == stp
    assert np.array_equal(sc, sp_)
    assert np.max(np.abs(np.asarray(mc) - np.asarray(mp))) < 1e-10
    assert np.max(np.abs(np.asarray(rc_) - np.asarray(rp))) < 1e-8


def test_riccati_kernel_convergence_flag():
    # scalar p' = 2p + 1 - p^2 with a stop tolerance: both backends converge
    a = np.array([[1.0]])
    q = np.array([[1.0]])
    s = np.array([[1.0]])
    for mod in (compiled, _kernels_py):
        mats, _, _, status, _ = mod.riccati_rk4(a, q, s, np.zeros((1, 1)),
                                                1e-2, 10000, 1e-12, 1000)
        assert status == 1
        assert abs(mats[-1][0, 0] - (1.0 + np.sqrt(2.0))) < 1e-5


def test_riccati_kernel_divergence_flag():
    # wildly unstable step: the iterate overflows and both backends flag it
    a = np.array([[10.0]])
    zero = np.zeros((1, 1))
    with np.errstate(over="ignore", invalid="ignore"):
        for mod in (compiled, _kernels_py):
            _, _, _, status, _ = mod.riccati_rk4(a, zero, zero, np.eye(1),
                                                 100.0, 1000, 0.0, 1)
            assert status == 2
