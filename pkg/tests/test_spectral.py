import numpy as np
import pytest
import scipy.linalg as la

from conftest import companion_roots
from lrkb import spectral
from lrkb.errors import GapError


def test_eigs_sorted_order_diag():
    spec = spectral.eigs_sorted(np.diag([3.0, 1.0, -2.0]))
    assert np.allclose(spec.eigenvalues, [3.0, 1.0, -2.0])
    # unit-norm eigenvectors matching the sorted order
    assert np.allclose(np.abs(spec.eigenvectors), np.eye(3))
    assert np.allclose(spec.jordan_like, np.diag([3.0, 1.0, -2.0]))


def test_eigs_sorted_conjugate_pair_order():
    a = np.array([[0.0, -1.0], [1.0, 0.0]])
    spec = spectral.eigs_sorted(a)
    # ties in real part break by non-increasing imaginary part: +i first
    assert np.allclose(spec.eigenvalues, [1j, -1j])


def test_eigs_sorted_against_charpoly_oracle(rng):
    for _ in range(10):
        a = rng.standard_normal((5, 5))
        from lrkb.verify import multiset_distance

        got = spectral.eigs_sorted(a).eigenvalues
        want = companion_roots(a)
        assert multiset_distance(got, want) < 1e-8 * (1 + np.linalg.norm(a))


def test_eigs_sorted_deterministic(rng):
    a = rng.standard_normal((6, 6))
    s1 = spectral.eigs_sorted(a)
    s2 = spectral.eigs_sorted(a)
    assert np.array_equal(s1.eigenvalues, s2.eigenvalues)
    assert np.array_equal(s1.eigenvectors, s2.eigenvectors)


def test_eigs_sorted_rejects_bad_input():
    with pytest.raises(ValueError):
        spectral.eigs_sorted(np.ones((2, 3)))
    with pytest.raises(ValueError):
        spectral.eigs_sorted(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_spectral_gap_ok():
    spec = spectral.eigs_sorted(np.diag([3.0, 1.0, -2.0]))
    assert spectral.spectral_gap_ok(spec, 1)
    assert spectral.spectral_gap_ok(spec, 2)
    spec2 = spectral.eigs_sorted(np.diag([1.0, 1.0, -2.0]))
    assert not spectral.spectral_gap_ok(spec2, 1)
    with pytest.raises(ValueError):
        spectral.spectral_gap_ok(spec, 3)


def test_ordered_schur_triangular_input_is_identity():
    a = np.array([[3.0, 1.0, 2.0], [0.0, 1.0, 0.5], [0.0, 0.0, -2.0]])
    schur = spectral.ordered_schur(a, 2)
    assert np.allclose(np.abs(schur.unitary), np.eye(3), atol=1e-12)
    assert np.allclose(np.diag(schur.block_11), [3.0, 1.0])
    assert np.allclose(np.diag(schur.block_22), [-2.0])


def test_ordered_schur_reconstruction(rng):
    for _ in range(5):
        a = rng.standard_normal((7, 7))
        spec = spectral.eigs_sorted(a)
        r = 3
        if not spectral.spectral_gap_ok(spec, r):
            continue
        schur = spectral.ordered_schur(a, r)
        s = schur.unitary
        recon = s @ schur.triangular() @ s.conj().T
        assert np.linalg.norm(recon - a) < 1e-10 * (1 + np.linalg.norm(a))
        assert np.linalg.norm(s.conj().T @ s - np.eye(7)) < 1e-12
        # leading block carries the dominant eigenvalues
        from lrkb.verify import multiset_distance

        dist = multiset_distance(np.diag(schur.block_11), spec.eigenvalues[:r])
        assert dist < 1e-8 * (1 + np.linalg.norm(a))


def test_ordered_schur_no_gap_raises():
    with pytest.raises(GapError):
        spectral.ordered_schur(np.array([[0.0, -1.0], [1.0, 0.0]]), 1)


def test_real_ordered_schur_pair_split_raises():
    a = la.block_diag(np.array([[1.0, 2.0], [-2.0, 1.0]]), np.array([[-1.0]]))
    spec = spectral.eigs_sorted(a)
    assert not spectral.spectral_gap_ok(spec, 1)
    with pytest.raises(GapError):
        spectral.real_ordered_schur(a, 1)
    t, z = spectral.real_ordered_schur(a, 2)
    assert np.allclose(z @ t @ z.T, a)


def test_attraction_beta_symmetric_is_exactly_one(rng):
    m = rng.standard_normal((5, 5))
    a = m + m.T
    spec = spectral.eigs_sorted(a)
    assert spectral.spectral_gap_ok(spec, 2)
    est = spectral.attraction_beta(spectral.ordered_schur(a, 2))
    assert est.beta == 1.0
    assert est.ell_max == 0.0
    assert est.gap_ok


def test_attraction_beta_shear_half():
    # L11 = 2, L12 = 2, L22 = 0: beta = 1/(1 + 4*4/(4-0)^2) = 1/2 exactly
    a = np.array([[2.0, 2.0], [0.0, 0.0]])
    est = spectral.attraction_beta(spectral.ordered_schur(a, 1))
    assert est.beta == 0.5
    assert est.ell_max == 4.0
    assert est.lambda_l1_r == 4.0
    assert est.lambda_l2_1 == 0.0


def test_attraction_beta_no_certificate():
    # Build the Schur data directly with a zero Bendixson gap.
    schur = spectral.SchurData(
        unitary=np.eye(2, dtype=complex),
        block_11=np.array([[0.0 + 0j]]),
        block_12=np.zeros((1, 1), dtype=complex),
        block_22=np.array([[1.0 + 0j]]),
        split=1,
    )
    est = spectral.attraction_beta(schur)
    assert est.beta is None
    assert not est.gap_ok


def test_bendixson_implies_real_part_gap(rng):
    # gap_ok is a strictly stronger condition than the eigenvalue gap
    from lrkb.verify import random_gapped_matrix

    for i in range(20):
        a = random_gapped_matrix(rng, 6, 2, min_gap=0.3, nonnormal=0.5)
        spec = spectral.eigs_sorted(a)
        est = spectral.attraction_beta(spectral.ordered_schur(a, 2))
        if est.gap_ok:
            re = spec.eigenvalues.real
            assert 0.5 * est.lambda_l1_r <= re[1] + 1e-9
            assert 0.5 * est.lambda_l2_1 >= re[2] - 1e-9
            assert 0.0 < est.beta <= 1.0


def test_count_unstable():
    spec = spectral.eigs_sorted(np.diag([2.0, 0.0, -1.0]))
    assert spectral.count_unstable(spec) == 2  # marginal counts as unstable
    assert spectral.count_unstable(spec, threshold=0.5) == 1
    assert spectral.count_unstable(spectral.eigs_sorted(np.diag([-1.0, -2.0]))) == 0


def test_invariant_subspace_diag():
    a = np.diag([3.0, 1.0, -2.0])
    u = spectral.invariant_subspace(a, (1,))
    assert np.allclose(np.abs(u), [[0.0], [1.0], [0.0]], atol=1e-12)
    assert np.linalg.norm(a @ u - u @ (u.T @ a @ u)) < 1e-12


def test_invariant_subspace_conjugate_pair():
    a = la.block_diag(np.array([[1.0, 2.0], [-2.0, 1.0]]), np.array([[-1.0]]))
    u = spectral.invariant_subspace(a, (0, 1))
    assert u.shape == (3, 2)
    assert np.linalg.norm(u.T @ u - np.eye(2)) < 1e-12
    # invariance: A u stays in span(u)
    au = a @ u
    assert np.linalg.norm(au - u @ (u.T @ au)) < 1e-10


def test_invariant_subspace_rejects_open_selection():
    a = la.block_diag(np.array([[1.0, 2.0], [-2.0, 1.0]]), np.array([[-1.0]]))
    with pytest.raises(GapError):
        spectral.invariant_subspace(a, (0,))  # half a conjugate pair


def test_invariant_subspace_random(rng):
    for _ in range(5):
        a = rng.standard_normal((6, 6))
        spec = spectral.eigs_sorted(a)
        # pick a conjugation-closed selection of size >= 2
        sel = []
        i = 0
        while len(sel) < 3 and i < 6:
            if abs(spec.eigenvalues[i].imag) < 1e-12:
                sel.append(i)
                i += 1
            else:
                sel.extend([i, i + 1])
                i += 2
        u = spectral.invariant_subspace(a, tuple(sel), spec)
        au = a @ u
        assert np.linalg.norm(au - u @ (u.T @ au)) < 1e-8 * (1 + np.linalg.norm(a))
        from lrkb.verify import multiset_distance

        got = np.linalg.eigvals(u.T @ a @ u)
        dist = multiset_distance(got, spec.eigenvalues[sel])
        assert dist < 1e-8 * (1 + np.linalg.norm(a))
