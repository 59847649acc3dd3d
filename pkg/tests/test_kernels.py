import math

import numpy as np
import pytest

from heatboxes.kernels import (
    KernelSpec,
    eval_kernel,
    eval_kernel_grid,
    eval_tricube,
    profile_level,
    scale_factor,
)


def invert_profile_by_bisection(tau, gamma, iters=200):
    """Oracle: solve (1 - x^3)^gamma = tau on (0, 1) by bisection, return 1/x."""
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = (lo + hi) / 2
        if (1.0 - mid**3) ** gamma > tau:
            lo = mid
        else:
            hi = mid
    return 1.0 / ((lo + hi) / 2)


class TestTricube:
    def test_peak(self):
        assert eval_tricube(0, 0, 7) == 1.0

    def test_support_boundary(self):
        assert eval_tricube(1, 0, 7) == 0.0
        assert eval_tricube(0, -1, 7) == 0.0
        assert eval_tricube(1.5, 0.2, 7) == 0.0

    def test_half_point_value(self):
        # (1 - 0.125)^7 = 0.875^7 = 0.392695...
        assert eval_tricube(0.5, 0, 7) == pytest.approx(0.875**7, abs=1e-12)
        assert 0.3926 < eval_tricube(0.5, 0, 7) < 0.3928

    def test_separability_exact(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            u, v = rng.uniform(-1.2, 1.2, size=2)
            assert eval_tricube(u, v, 7) == eval_tricube(u, 0, 7) * eval_tricube(0, v, 7)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            u, v = rng.uniform(-1, 1, size=2)
            val = eval_tricube(u, v, 7)
            assert val == eval_tricube(-u, v, 7) == eval_tricube(u, -v, 7)
            assert val == eval_tricube(v, u, 7)

    def test_strictly_decreasing_in_abs_u(self):
        us = np.linspace(0.01, 0.99, 50)
        vals = [eval_tricube(u, 0.3, 7) for u in us]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            u, v = rng.uniform(-2, 2, size=2)
            assert 0.0 <= eval_tricube(u, v, 7) <= 1.0


class TestKernelFamilies:
    def test_gaussian_peak(self):
        assert eval_kernel(0, 0, KernelSpec("gaussian")) == 1.0

    def test_gaussian_compact_support(self):
        spec = KernelSpec("gaussian")
        assert eval_kernel(1.01, 0, spec) == 0.0
        assert eval_kernel(0.99, 0.99, spec) > 0.0

    def test_effective_rect_shrunk_support(self):
        spec = KernelSpec("effective_rect", shrink=0.4)
        assert eval_kernel(0.7, 0, spec) == 0.0
        assert eval_kernel(0.59, 0.59, spec) == 1.0

    def test_binary_rect_inside(self):
        spec = KernelSpec("binary_rect")
        assert eval_kernel(0.99, 0.99, spec) == 1.0
        assert eval_kernel(1.2, 0, spec) == 0.0

    def test_all_peak_at_one(self):
        for family in ("tricube", "gaussian", "binary_rect", "effective_rect"):
            assert eval_kernel(0, 0, KernelSpec(family)) == 1.0

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            KernelSpec("boxcar")
        with pytest.raises(ValueError):
            KernelSpec(gamma=0.5)
        with pytest.raises(ValueError):
            KernelSpec(sigma_frac=0.0)
        with pytest.raises(ValueError):
            KernelSpec(shrink=1.0)

    def test_grid_matches_scalar(self):
        rng = np.random.default_rng(3)
        u = rng.uniform(-1.3, 1.3, size=(5, 7))
        v = rng.uniform(-1.3, 1.3, size=(5, 7))
        for family in ("tricube", "gaussian", "binary_rect", "effective_rect"):
            spec = KernelSpec(family)
            grid = eval_kernel_grid(u, v, spec)
            for idx in np.ndindex(u.shape):
                assert grid[idx] == pytest.approx(eval_kernel(u[idx], v[idx], spec), abs=1e-12)


class TestScaleFactor:
    def test_tau_near_zero_approaches_one(self):
        # convergence rate is tau^(1/gamma), so the limit needs tiny tau
        assert scale_factor(1e-30, 7) == pytest.approx(1.0, abs=1e-4)
        seq = [scale_factor(t, 7) for t in (1e-3, 1e-9, 1e-15, 1e-30)]
        assert all(s > 1.0 for s in seq)
        assert all(a > b for a, b in zip(seq, seq[1:]))

    def test_tau_domain(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                scale_factor(bad, 7)

    def test_against_bisection_oracle(self):
        for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
            oracle = invert_profile_by_bisection(tau, 7)
            assert scale_factor(tau, 7) == pytest.approx(oracle, abs=1e-9)

    def test_frozen_value_tau_03(self):
        # bisection oracle for (1 - x^3)^7 = 0.3 gives x = 0.540629..., s = 1/x
        assert scale_factor(0.3, 7) == pytest.approx(1.8496868974, abs=1e-9)

    def test_frozen_value_tau_09(self):
        assert scale_factor(0.9, 7) == pytest.approx(invert_profile_by_bisection(0.9, 7), abs=1e-9)


class TestProfileLevel:
    def test_endpoints(self):
        assert profile_level(0.0, 7) == 1.0
        assert profile_level(1.0, 7) == 0.0

    def test_domain(self):
        with pytest.raises(ValueError):
            profile_level(-0.1, 7)
        with pytest.raises(ValueError):
            profile_level(1.1, 7)

    def test_mutual_inverse_with_scale_factor(self):
        for tau in np.linspace(0.01, 0.99, 25):
            s = scale_factor(float(tau), 7)
            assert profile_level(1.0 / s, 7) == pytest.approx(tau, abs=1e-9)
        assert profile_level(1.0 / scale_factor(0.5, 7), 7) == pytest.approx(0.5, abs=1e-9)

    def test_inverse_for_other_gammas(self):
        for gamma in (1.0, 2.0, 4.0, 11.0):
            for tau in (0.05, 0.5, 0.95):
                s = scale_factor(tau, gamma)
                assert profile_level(1.0 / s, gamma) == pytest.approx(tau, abs=1e-9)
