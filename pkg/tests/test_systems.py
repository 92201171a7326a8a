import io
import json

import numpy as np
import pytest
import scipy.linalg as la

from lrkb import oja, systems
from lrkb.errors import FrameError, ShapeError, ValidationError


def test_make_system_shapes_and_props():
    sys = systems.make_system(np.diag([1.0, -1.0]), np.eye(2), [[1.0, 0.0]], [[0.5]])
    assert sys.n == 2
    assert sys.p == 1
    assert np.allclose(sys.observation_noise_cov(), [[0.25]])


def test_validate_rejects_bad_shapes():
    with pytest.raises(ShapeError):
        systems.make_system(np.ones((2, 3)), np.eye(2), np.eye(2), np.eye(2))
    with pytest.raises(ShapeError):
        systems.make_system(np.eye(2), np.eye(3), np.eye(2), np.eye(2))
    with pytest.raises(ShapeError):
        systems.make_system(np.eye(2), np.eye(2), np.ones((1, 3)), np.eye(1))
    with pytest.raises(ShapeError):
        systems.make_system(np.eye(2), np.eye(2), np.ones((1, 2)), np.eye(2))


def test_validate_rejects_singular_observation_noise():
    with pytest.raises(ValidationError):
        systems.make_system(np.eye(2), np.eye(2), np.eye(2), np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        systems.make_system(
            np.array([[np.inf, 0.0], [0.0, 1.0]]), np.eye(2), np.eye(2), np.eye(2)
        )


def test_pbh_examples():
    # Scalar chain: observable through the last state only when coupled
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert systems.pbh_observable(a, np.array([[1.0, 0.0]]))
    assert not systems.pbh_observable(a, np.array([[0.0, 1.0]]))
    assert systems.pbh_controllable(a, np.array([[0.0, 0.0], [0.0, 1.0]]))
    assert not systems.pbh_controllable(a, np.zeros((2, 2)))
    # Decoupled unobserved mode
    assert not systems.pbh_observable(np.diag([1.0, 2.0]), np.array([[1.0, 0.0]]))


def test_reduce_requires_orthonormal_frame(rng):
    sys = systems.make_system(rng.standard_normal((4, 4)), np.eye(4), np.eye(4), np.eye(4))
    with pytest.raises(FrameError):
        systems.reduce(sys, np.ones((4, 2)))
    u = oja.random_stiefel(4, 2, seed=3).matrix
    red = systems.reduce(sys, u)
    assert red.r == 2
    assert np.allclose(red.a_u, u.T @ sys.a @ u)
    assert np.allclose(red.c_u, sys.c @ u)
    assert np.allclose(red.g_u, u.T @ sys.g)


def test_minimal_rank_examples():
    mk = lambda a: systems.make_system(a, np.eye(a.shape[0]), np.eye(a.shape[0]), np.eye(a.shape[0]))
    assert systems.minimal_rank(mk(np.diag([-1.0, -2.0]))) == 0
    assert systems.minimal_rank(mk(np.diag([3.0, 1.0, -2.0]))) == 2
    assert systems.minimal_rank(mk(np.diag([2.0, 1.0, -1.0, -2.0]))) == 2
    # Unstable conjugate pair is never split
    a = la.block_diag(np.array([[0.5, 1.0], [-1.0, 0.5]]), np.diag([-1.0, -2.0]))
    assert systems.minimal_rank(mk(a)) == 2
    # Degenerate gap at the unstable count bumps the rank upward
    a = np.diag([1.0, 0.0, -1e-12, -1.0])
    assert systems.minimal_rank(mk(a)) == 3


def test_load_system_roundtrip(tmp_path):
    doc = {
        "A": [[1.0, 0.5], [0.0, -1.0]],
        "G": [[1.0, 0.0], [0.0, 1.0]],
        "C": [[1.0, 0.0]],
        "H": [[1.0]],
        "seed": 7,
        "rank": 1,
    }
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(doc))
    for source in (doc, str(path), io.StringIO(json.dumps(doc))):
        sys, extras = systems.load_system(source)
        assert np.allclose(sys.a, doc["A"])
        assert extras == {"seed": 7, "rank": 1}


def test_load_system_missing_fields():
    with pytest.raises(ValidationError, match="lacks fields"):
        systems.load_system({"A": [[1.0]], "G": [[1.0]]})
