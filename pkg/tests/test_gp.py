import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from helmgp import gp
from helmgp.errors import DataError, NegativeVarianceError, SingularKernelError
from helmgp.fields import AnalyticField, SimGrid, eval_field
from helmgp.gp import (FieldPosterior, VelocityDataset, assemble_gram, condition,
                       log_marginal_likelihood, posterior_derived, posterior_velocity,
                       predict, z_values)
from helmgp.kernels import MatrixKernel, KernelTerm, PriorSpec, helmholtz_kernel, velocity_kernel
from helmgp.se import ScalarKernelParams, ZERO_INDEX

ONES = PriorSpec("helmholtz", 1.0, 1.0, 1.0, 1.0, 0.1)


def random_data(rng, M, extent=2.0):
    return VelocityDataset(rng.uniform(-extent, extent, (M, 2)), rng.normal(size=(M, 2)))


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


class TestDataset:
    def test_validation(self):
        with pytest.raises(DataError):
            VelocityDataset(np.zeros((2, 2)), np.zeros((3, 2)))
        with pytest.raises(DataError):
            VelocityDataset(np.zeros((0, 2)), np.zeros((0, 2)))
        with pytest.raises(DataError):
            VelocityDataset([[0.0, math.nan]], [[0.0, 0.0]])

    def test_blocked_stacking(self):
        d = VelocityDataset([[0, 0], [1, 1]], [[1, 2], [3, 4]])
        np.testing.assert_array_equal(d.stacked, [1, 3, 2, 4])

    def test_immutable(self):
        d = VelocityDataset([[0, 0]], [[1, 2]])
        with pytest.raises(ValueError):
            d.locations[0, 0] = 5.0


class TestAssembleGram:
    def test_single_point(self):
        g = assemble_gram(helmholtz_kernel(ONES), [[0.3, 0.3]], 0.1)
        np.testing.assert_allclose(g.matrix, [[2.1, 0.0], [0.0, 2.1]], atol=1e-15)
        assert g.jitter == 0.0

    def test_velocity_block_diagonal(self, rng):
        X = rng.uniform(-1, 1, (6, 2))
        g = assemble_gram(velocity_kernel(PriorSpec("velocity", 1, 1, 2, 3, 0.1)), X, 0.1)
        assert g.block_diagonal
        K = g.matrix
        assert not K[:6, 6:].any() and not K[6:, :6].any()

    def test_duplicate_with_noise(self):
        X = [[0.1, 0.2], [0.1, 0.2]]
        assert assemble_gram(helmholtz_kernel(ONES), X, 0.1).jitter == 0.0

    def test_clustered_without_noise_uses_jitter(self, rng):
        X = 0.1 + 1e-4 * rng.uniform(size=(25, 2))
        s = PriorSpec("helmholtz", 10.0, 1.0, 10.0, 1.0, 1.0)
        g = assemble_gram(s.kernel(), X, None)
        assert g.jitter > 0.0
        scale = np.trace(s.kernel().gram(X)) / 50
        ratio = g.jitter / (1e-10 * scale)
        np.testing.assert_allclose(ratio, 10 ** round(math.log10(ratio)), rtol=1e-9)

    @pytest.mark.parametrize("family", ["helmholtz", "velocity"])
    def test_factor_reconstructs(self, family, rng):
        spec = PriorSpec(family, 0.9, 1.3, 1.2, 0.8, 0.05)
        X = rng.uniform(-2, 2, (15, 2))
        g = assemble_gram(spec.kernel(), X, spec.sigma2_obs)
        L = g.factor
        target = spec.kernel().gram(X) + (spec.sigma2_obs + g.jitter) * np.eye(30)
        np.testing.assert_allclose(L @ L.T, target, rtol=1e-8, atol=1e-8 * np.abs(target).max())
        np.testing.assert_allclose(g.matrix, g.matrix.T)

    def test_singular_reports_last_jitter(self):
        # an indefinite "kernel" cannot be rescued by any jitter on the ladder
        k = MatrixKernel([[[KernelTerm(1.0, ScalarKernelParams(1.0, 1.0), ZERO_INDEX),
                            KernelTerm(-0.9, ScalarKernelParams(1.0, 0.1), ZERO_INDEX)]]])
        X = np.array([[0.0, 0.0], [0.5, 0.0]])
        with pytest.raises(SingularKernelError) as ei:
            assemble_gram(k, X, None)
        scale = np.trace(k.gram(X)) / 2
        np.testing.assert_allclose(ei.value.jitter, 1e-4 * scale, rtol=1e-9)

    def test_empty(self):
        with pytest.raises(DataError):
            assemble_gram(helmholtz_kernel(ONES), np.zeros((0, 2)))


class TestLML:
    def test_single_point_closed_form(self):
        d = VelocityDataset([[0.0, 0.0]], [[0.0, 0.0]])
        with mpmath.workdps(30):
            ref = float(-mpmath.log(2 * mpmath.pi) - mpmath.log(mpmath.mpf("2.1")))
        np.testing.assert_allclose(log_marginal_likelihood(ONES, d), ref, rtol=1e-14)
        np.testing.assert_allclose(ref, -2.579814, atol=1e-6)

    def test_variance_scaling(self, rng):
        X = rng.uniform(-1, 1, (7, 2))
        d = VelocityDataset(X, np.zeros((7, 2)))
        c = 3.5
        s = PriorSpec("helmholtz", 0.8, 1.2, 1.1, 0.6, 0.2)
        sc = PriorSpec("helmholtz", 0.8, 1.2 * c, 1.1, 0.6 * c, 0.2 * c)
        np.testing.assert_allclose(log_marginal_likelihood(sc, d) - log_marginal_likelihood(s, d),
                                   -7 * math.log(c), rtol=1e-10)

    def test_matches_dense_formula(self, rng):
        d = random_data(rng, 10)
        for fam in ("helmholtz", "velocity"):
            s = PriorSpec(fam, 0.9, 1.1, 1.3, 0.7, 0.1)
            K = s.kernel().gram(d.locations) + 0.1 * np.eye(20)
            y = d.stacked
            ref = -10 * math.log(2 * math.pi) - 0.5 * np.linalg.slogdet(K)[1] - 0.5 * y @ np.linalg.solve(K, y)
            np.testing.assert_allclose(log_marginal_likelihood(s, d), ref, rtol=1e-10)

    @given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * math.pi),
           st.sampled_from(["helmholtz", "velocity"]))
    def test_rotation_invariance(self, seed, theta, fam):
        rng = np.random.default_rng(seed)
        d = random_data(rng, 8)
        s = PriorSpec(fam, 1.1, 0.9, 1.1, 0.9, 0.1) if fam == "velocity" else \
            PriorSpec(fam, 0.8, 1.2, 1.4, 0.5, 0.1)
        np.testing.assert_allclose(log_marginal_likelihood(s, d.rotated(rotation(theta))),
                                   log_marginal_likelihood(s, d), rtol=0, atol=1e-8)


class TestPosteriorVelocity:
    def test_interpolates_without_noise(self, rng):
        d = random_data(rng, 12)
        s = PriorSpec("helmholtz", 1.0, 1.0, 1.0, 1.0, 1e-12)
        p = posterior_velocity(s, d, d.locations)
        np.testing.assert_allclose(p.mean_velocity, d.velocities, atol=1e-6)

    def test_single_point_shrinkage(self):
        d = VelocityDataset([[0.2, -0.1]], [[0.7, -1.3]])
        p = posterior_velocity(ONES, d, d.locations)
        np.testing.assert_allclose(p.mean_velocity[0], (2.0 / 2.1) * np.array([0.7, -1.3]), rtol=1e-14)

    def test_uninformative_limit(self, rng):
        d = random_data(rng, 5)
        s = PriorSpec("helmholtz", 1.0, 1.0, 1.0, 1.0, 1e12)
        p = posterior_velocity(s, d, rng.uniform(-1, 1, (4, 2)))
        np.testing.assert_allclose(p.mean_velocity, 0.0, atol=1e-10)
        np.testing.assert_allclose(p.var_u, 2.0, rtol=1e-10)
        np.testing.assert_allclose(p.var_v, 2.0, rtol=1e-10)

    def test_prior_when_no_data(self):
        p = posterior_velocity(ONES, None, [[0.0, 0.0], [1.0, 1.0]])
        np.testing.assert_array_equal(p.mean_u, 0.0)
        np.testing.assert_allclose(p.var_u, 2.0)

    @pytest.mark.parametrize("family", ["helmholtz", "velocity"])
    def test_matches_dense_algebra(self, family, rng):
        d = random_data(rng, 9)
        s = PriorSpec(family, 0.9, 1.2, 1.4, 0.6, 0.05)
        X_te = rng.uniform(-2, 2, (6, 2))
        k = s.kernel()
        K = k.gram(d.locations) + s.sigma2_obs * np.eye(18)
        Ks = k.gram(X_te, d.locations)
        mean = Ks @ np.linalg.solve(K, d.stacked)
        cov = k.gram(X_te) - Ks @ np.linalg.solve(K, Ks.T)
        p = posterior_velocity(s, d, X_te, full_cov=True)
        np.testing.assert_allclose(p.mean_u, mean[:6], rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(p.mean_v, mean[6:], rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(np.concatenate([p.var_u, p.var_v]), np.diag(cov), atol=1e-10)
        np.testing.assert_allclose(p.cov, cov, atol=1e-10)

    def test_empty_test_set(self):
        with pytest.raises(DataError):
            posterior_velocity(ONES, None, np.zeros((0, 2)))

    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from(["helmholtz", "velocity"]))
    def test_variance_monotone_in_data(self, seed, fam):
        rng = np.random.default_rng(seed)
        d = random_data(rng, 10)
        s = PriorSpec(fam, 0.9, 1.1, 1.3, 0.8, 0.05)
        X_te = rng.uniform(-2, 2, (8, 2))
        small = VelocityDataset(d.locations[:9], d.velocities[:9])
        a = predict(s, small, X_te)
        b = predict(s, d, X_te)
        for f in ("u", "v", "div", "vort"):
            assert (b.var(f) <= a.var(f) + 1e-10).all(), f


class TestRotationEquivariance:
    @given(st.integers(0, 2 ** 32 - 1), st.floats(0, 2 * math.pi))
    def test_means_rotate(self, seed, theta):
        rng = np.random.default_rng(seed)
        d = random_data(rng, 15)
        X_te = rng.uniform(-2, 2, (5, 2))
        R = rotation(theta)
        for s in (PriorSpec("helmholtz", 0.8, 1.2, 1.4, 0.5, 0.1),
                  PriorSpec("velocity", 1.1, 0.9, 1.1, 0.9, 0.1)):
            base = posterior_velocity(s, d, X_te).mean_velocity
            rot = posterior_velocity(s, d.rotated(R), X_te @ R.T).mean_velocity
            np.testing.assert_allclose(rot, base @ R.T, rtol=0, atol=1e-8)


class TestDerived:
    def test_divergence_free_prior(self, rng):
        s = PriorSpec("helmholtz", 1.0, 0.0, 1.2, 1.0, 0.1)
        d = random_data(rng, 10)
        p = posterior_derived(s, d, rng.uniform(-2, 2, (7, 2)), "div")
        assert np.abs(p.mean_div).max() <= 1e-10 and np.abs(p.var_div).max() <= 1e-10
        np.testing.assert_array_equal(z_values(p, "div"), 0.0)

    def test_curl_free_prior(self, rng):
        s = PriorSpec("helmholtz", 1.0, 1.0, 1.2, 0.0, 0.1)
        p = posterior_derived(s, random_data(rng, 10), rng.uniform(-2, 2, (7, 2)), "vort")
        assert np.abs(p.mean_vort).max() <= 1e-10 and np.abs(p.var_vort).max() <= 1e-10

    def test_prior_variance(self):
        p = posterior_derived(ONES, None, [[0.0, 0.0], [3.0, -1.0]], "div")
        np.testing.assert_allclose(p.var_div, 8.0, rtol=1e-14)

    def test_dense_data_recovers_divergence(self):
        f = AnalyticField.divergence(5.0)
        X = SimGrid.square(-2, 2, 20).points
        d = VelocityDataset(X, eval_field(f, X).velocity)
        X_te = SimGrid.square(-1, 1, 9).points
        s = PriorSpec("helmholtz", 1.0, 1.0, 1.0, 1.0, 1e-6)
        p = posterior_derived(s, d, X_te, "div")
        np.testing.assert_allclose(p.mean_div, eval_field(f, X_te).div, rtol=0.05)

    @pytest.mark.parametrize("family", ["helmholtz", "velocity"])
    def test_matches_fd_of_mean(self, family, rng):
        d = random_data(rng, 30)
        s = PriorSpec(family, 0.9, 1.2, 1.3, 0.7, 0.05)
        X_te = rng.uniform(-1.5, 1.5, (10, 2))
        c = condition(s, d)
        p = predict(c, None, X_te)
        h = 1e-4

        def mu(pts):
            return posterior_velocity(c, None, pts).mean_velocity

        e1, e2 = np.array([h, 0.0]), np.array([0.0, h])
        du = (mu(X_te + e1) - mu(X_te - e1)) / (2 * h)
        dv = (mu(X_te + e2) - mu(X_te - e2)) / (2 * h)
        np.testing.assert_allclose(p.mean_div, du[:, 0] + dv[:, 1], rtol=0, atol=1e-6)
        np.testing.assert_allclose(p.mean_vort, dv[:, 0] - du[:, 1], rtol=0, atol=1e-6)

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            posterior_derived(ONES, None, [[0, 0]], "pressure")
        with pytest.raises(ValueError):
            posterior_derived(ONES, None, [[0, 0]], "u")

    def test_aliases(self):
        p = posterior_derived(ONES, None, [[0, 0]], "divergence")
        assert p.var("div") is not None


class TestZValues:
    def _post(self, mean, var):
        p = FieldPosterior(np.zeros((len(mean), 2)))
        p.mean_div, p.var_div = np.asarray(mean, float), np.asarray(var, float)
        return p

    def test_definition(self):
        np.testing.assert_allclose(z_values(self._post([0.5, 0.0], [0.25, 3.0]), "div"), [1.0, 0.0])

    def test_degenerate(self):
        z = z_values(self._post([0.0, 1e-11, 0.3, -0.2], [0.0, 1e-15, 1e-16, 0.0]), "div")
        np.testing.assert_array_equal(z, [0.0, 0.0, np.inf, -np.inf])

    def test_missing(self):
        with pytest.raises(ValueError):
            z_values(FieldPosterior(np.zeros((1, 2))), "vort")


class TestClamp:
    def test_small_negative_clamped(self):
        np.testing.assert_array_equal(gp._clamp(np.array([-1e-12, 0.5]), np.array([1.0, 1.0])), [0.0, 0.5])

    def test_relative_tolerance(self):
        # tolerance scales with the prior variance
        out = gp._clamp(np.array([-5e-7]), np.array([1e3]))
        assert out[0] == 0.0

    def test_large_negative_raises(self):
        with pytest.raises(NegativeVarianceError):
            gp._clamp(np.array([-1e-3]), np.array([1.0]))


class TestPredict:
    def test_merges_all_fields(self, rng):
        d = random_data(rng, 6)
        p = predict(ONES, d, rng.uniform(-1, 1, (3, 2)))
        for f in ("u", "v", "div", "vort"):
            assert p.mean(f).shape == (3,) and p.var(f).shape == (3,)

    def test_conditioned_reuse(self, rng):
        d = random_data(rng, 6)
        X_te = rng.uniform(-1, 1, (3, 2))
        a = predict(ONES, d, X_te)
        b = predict(condition(ONES, d), None, X_te)
        np.testing.assert_array_equal(a.mean_div, b.mean_div)
