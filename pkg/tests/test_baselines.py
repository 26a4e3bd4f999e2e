import numpy as np
import pytest

from unmix import (
    SingularNormalEquations,
    rmse,
    solve_fcls,
    solve_ls,
    solve_sunsal_sparse,
    validate_problem,
)

from conftest import random_problem
from oracles import (
    fcls_kkt_residual,
    nnls_enumeration,
    simplex_ls_enumeration,
    sparse_prox_fixed_point_residual,
)


class TestSolveLS:
    def test_identity_endmembers(self, rng):
        Y = rng.uniform(size=(4, 6))
        h = validate_problem(Y, np.eye(4))
        np.testing.assert_array_equal(solve_ls(h).data, Y)

    def test_consistent_system_recovers_truth(self, rng):
        h, M, X, Y = random_problem(rng, L=30, R=4, T=7)
        np.testing.assert_allclose(solve_ls(h).data, X, atol=1e-10)

    def test_normal_equation_orthogonality(self, rng):
        h, M, X, Y = random_problem(rng, L=25, R=5, T=9, residual_scale=0.4)
        X_ls = solve_ls(h).data
        resid = np.abs(M.T @ (Y - M @ X_ls)).max()
        assert resid < 1e-10 * np.linalg.norm(M) * np.linalg.norm(Y)

    def test_pixel_separable_bitwise(self, rng):
        h, M, X, Y = random_problem(rng, L=18, R=3, T=8, residual_scale=0.3)
        X_full = solve_ls(h).data
        for t in range(h.T):
            ht = validate_problem(Y[:, [t]], M)
            np.testing.assert_array_equal(solve_ls(ht).data[:, 0], X_full[:, t])

    def test_singular_matrix_raises(self, rng):
        m = rng.uniform(size=(10, 1))
        M = np.hstack([m, m])
        with pytest.warns(UserWarning):
            h = validate_problem(rng.uniform(size=(10, 3)), M)
        with pytest.raises(SingularNormalEquations):
            solve_ls(h)


class TestSolveFCLS:
    def test_pure_pixel_hits_vertex(self, rng):
        h, M, X, Y = random_problem(rng, L=20, R=3, T=1)
        h_pure = validate_problem(M[:, [1]], M)
        x = solve_fcls(h_pure).data[:, 0]
        np.testing.assert_allclose(x, [0.0, 1.0, 0.0], atol=1e-6)

    def test_noise_free_interior_recovery(self, rng):
        h, M, X, Y = random_problem(rng, L=30, R=4, T=6)
        np.testing.assert_allclose(solve_fcls(h).data, X, atol=1e-6)

    def test_feasibility(self, rng):
        h, M, X, Y = random_problem(rng, L=15, R=4, T=10, residual_scale=0.3)
        out = solve_fcls(h).data
        assert out.min() >= -1e-9
        np.testing.assert_allclose(out.sum(axis=0), 1.0, atol=1e-9)

    def test_kkt_residual_per_pixel(self, rng):
        h, M, X, Y = random_problem(rng, L=12, R=4, T=8, residual_scale=0.5)
        out = solve_fcls(h).data
        for t in range(h.T):
            assert fcls_kkt_residual(M, Y[:, t], out[:, t]) < 1e-6

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(5):
            h, M, X, Y = random_problem(rng, L=10, R=4, T=5, residual_scale=0.6)
            out = solve_fcls(h).data
            for t in range(h.T):
                expected = simplex_ls_enumeration(M, Y[:, t])
                np.testing.assert_allclose(out[:, t], expected, atol=1e-6)

    def test_objective_beats_projected_ls_start(self, rng):
        h, M, X, Y = random_problem(rng, L=14, R=3, T=6, residual_scale=0.4)
        out = solve_fcls(h).data
        start = np.maximum(solve_ls(h).data, 0.0)
        start /= start.sum(axis=0)
        assert np.linalg.norm(Y - M @ out) <= np.linalg.norm(Y - M @ start) + 1e-12

    def test_beats_random_feasible_points(self, rng):
        h, M, X, Y = random_problem(rng, L=10, R=3, T=4, residual_scale=0.5)
        out = solve_fcls(h).data
        obj = ((Y - M @ out) ** 2).sum(axis=0)
        for _ in range(100):
            cand = rng.dirichlet(np.ones(h.R), size=h.T).T
            cand_obj = ((Y - M @ cand) ** 2).sum(axis=0)
            assert np.all(obj <= cand_obj + 1e-10)


def test_ls_beats_random_points(rng):
    h, M, X, Y = random_problem(rng, L=10, R=3, T=4, residual_scale=0.5)
    out = solve_ls(h).data
    obj = ((Y - M @ out) ** 2).sum(axis=0)
    for _ in range(100):
        cand = rng.standard_normal((h.R, h.T))
        assert np.all(obj <= ((Y - M @ cand) ** 2).sum(axis=0) + 1e-10)


class TestSolveSunsalSparse:
    def test_lambda_zero_matches_nnls_oracle(self, rng):
        for _ in range(5):
            h, M, X, Y = random_problem(rng, L=10, R=4, T=5, residual_scale=0.6)
            out = solve_sunsal_sparse(h, 0.0).data
            for t in range(h.T):
                expected = nnls_enumeration(M, Y[:, t])
                np.testing.assert_allclose(out[:, t], expected, atol=1e-6)

    def test_lambda_zero_matches_scipy_nnls(self, rng):
        from scipy.optimize import nnls as scipy_nnls

        h, M, X, Y = random_problem(rng, L=12, R=4, T=6, residual_scale=0.5)
        out = solve_sunsal_sparse(h, 0.0).data
        for t in range(h.T):
            expected, _ = scipy_nnls(M, Y[:, t])
            np.testing.assert_allclose(out[:, t], expected, atol=1e-6)

    def test_huge_lambda_gives_zero(self, rng):
        h, M, X, Y = random_problem(rng, L=10, R=3, T=4)
        out = solve_sunsal_sparse(h, 1e6).data
        np.testing.assert_array_equal(out, 0.0)

    def test_prox_fixed_point(self, rng):
        h, M, X, Y = random_problem(rng, L=12, R=4, T=5, residual_scale=0.4)
        lam = 1e-2
        out = solve_sunsal_sparse(h, lam).data
        for t in range(h.T):
            assert sparse_prox_fixed_point_residual(M, Y[:, t], out[:, t], lam) < 1e-6

    def test_single_endmember_support_recovery(self, rng):
        h, M, X, Y = random_problem(rng, L=40, R=4, T=1)
        y = M[:, 2] + 0.001 * rng.standard_normal(40)
        h1 = validate_problem(y[:, None], M)
        out = solve_sunsal_sparse(h1, 1e-2).data[:, 0]
        assert np.flatnonzero(out > 1e-4).tolist() == [2]

    def test_nonnegative_output(self, rng):
        h, M, X, Y = random_problem(rng, L=10, R=3, T=6, residual_scale=0.8)
        assert solve_sunsal_sparse(h, 1e-3).data.min() >= 0.0

    def test_beats_random_feasible_points(self, rng):
        h, M, X, Y = random_problem(rng, L=10, R=3, T=4, residual_scale=0.5)
        lam = 5e-3
        out = solve_sunsal_sparse(h, lam).data
        obj = ((Y - M @ out) ** 2).sum(axis=0) + lam * np.abs(out).sum(axis=0)
        for _ in range(100):
            cand = np.abs(rng.standard_normal((h.R, h.T)))
            cand_obj = ((Y - M @ cand) ** 2).sum(axis=0) + lam * np.abs(cand).sum(axis=0)
            assert np.all(obj <= cand_obj + 1e-10)


def test_cusal_large_sigma_consistency_small(rng):
    # quick version of the large-bandwidth consistency check
    from unmix import SolverConfig, cusal_fc, cusal_sp

    h, M, X, Y = random_problem(rng, L=20, R=3, T=12)
    sigma = 1e3 * max(1.0, np.abs(Y).max())
    X_fc, _ = cusal_fc(h, SolverConfig(sigma=sigma))
    assert rmse(solve_fcls(h), X_fc) < 1e-3
    X_sp, _ = cusal_sp(h, SolverConfig(sigma=sigma, lam=0.0))
    assert rmse(solve_sunsal_sparse(h, 0.0), X_sp) < 1e-3
