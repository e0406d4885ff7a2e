import math

import numpy as np
import pytest

from memloop.bootstrap import BootstrapConfig, constant_target
from memloop.core import InputError, Kernel, make_rng
from memloop.entropy import (
    Binning,
    contextual_entropy_compare,
    conditional_entropy,
    entropy_report,
    estimator_tolerance,
    hist_entropy,
    mutual_information,
    reversibility_bound_check,
)
from memloop.envs import RingEnv, ring_rollout

UNIT = Binning(np.array([0.0]), np.array([1.0]), 4)


class TestHistEntropy:
    def test_uniform_over_four_bins(self):
        assert hist_entropy([0.1, 0.35, 0.6, 0.85], UNIT) == pytest.approx(2.0, abs=1e-12)

    def test_single_bin_is_zero(self):
        assert hist_entropy([0.1, 0.12, 0.13, 0.11], UNIT) == 0.0

    def test_six_two_split(self):
        samples = [0.1] * 6 + [0.9] * 2
        expected = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
        assert hist_entropy(samples, UNIT) == pytest.approx(expected, abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            hist_entropy([], UNIT)

    def test_bounds(self):
        rng = make_rng(0)
        b = Binning(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 5)
        for _ in range(20):
            h = hist_entropy(rng.uniform(-1, 1, size=(200, 2)), b)
            assert 0.0 <= h <= math.log2(b.total_bins)

    def test_overflow_clamped_and_counted(self):
        sym, overflow = UNIT.symbols([-5.0, 0.5, 9.0])
        assert overflow == 2
        assert sym[0] == 0 and sym[2] == 3


class TestConditionalEntropy:
    def test_identical_variables(self):
        rng = make_rng(1)
        x = rng.uniform(0, 1, 500)
        assert conditional_entropy(x, x, UNIT, UNIT) == pytest.approx(0.0, abs=1e-12)

    def test_independent_uniform_binary(self):
        rng = make_rng(2)
        x = rng.uniform(0, 1, 1000)
        y = rng.uniform(0, 1, 1000)
        b2 = Binning(np.array([0.0]), np.array([1.0]), 2)
        assert conditional_entropy(x, y, b2, b2) == pytest.approx(1.0, abs=0.05)

    def test_deterministic_function_of_condition(self):
        rng = make_rng(3)
        y = rng.uniform(0, 1, 800)
        x = np.floor(y * 4) / 4 + 0.1  # constant within each condition bin
        assert conditional_entropy(x, y, UNIT, UNIT) <= 0.05

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            conditional_entropy([0.1, 0.2], [0.3], UNIT, UNIT)

    def test_monotone_conditioning(self):
        rng = make_rng(4)
        n = 600
        y = rng.uniform(0, 1, n)
        extra = rng.uniform(0, 1, n)
        x = (y + 0.3 * extra + 0.1 * rng.uniform(0, 1, n)) % 1.0
        b_pair = Binning(np.array([0.0, 0.0]), np.array([1.0, 1.0]), 4)
        h_fine = conditional_entropy(x, np.column_stack([y, extra]), UNIT, b_pair)
        h_coarse = conditional_entropy(x, y, UNIT, UNIT)
        assert h_fine <= h_coarse + 1e-12


class TestMutualInformationIdentity:
    def test_identity_matches_direct_joint(self):
        rng = make_rng(5)
        x = rng.normal(size=500)
        y = x + 0.5 * rng.normal(size=500)
        bx = Binning.from_samples(x, 6)
        by = Binning.from_samples(y, 6)
        via_identity = mutual_information(x, y, bx, by)
        sx, _ = bx.symbols(x)
        sy, _ = by.symbols(y)
        joint = np.zeros((6, 6))
        for a, b in zip(sx, sy):
            joint[a, b] += 1
        p = joint / joint.sum()
        px, py = p.sum(axis=1), p.sum(axis=0)
        nz = p > 0
        direct = float(np.sum(p[nz] * np.log2(p[nz] / (px[:, None] * py[None, :])[nz])))
        assert via_identity == pytest.approx(direct, abs=1e-9)

    def test_report_invariants(self):
        rng = make_rng(6)
        phi = rng.normal(size=(400, 2))
        psi = phi + 0.2 * rng.normal(size=(400, 2))
        bp = Binning.from_samples(phi, 5)
        bq = Binning.from_samples(psi, 5)
        rep = entropy_report(phi, psi, bp, bq)
        assert rep.mutual_info == pytest.approx(rep.h_phi + rep.h_psi - rep.h_joint, abs=1e-9)
        assert -1e-9 <= rep.h_phi_given_psi <= rep.h_phi + 1e-9
        assert rep.sample_count == 400

    def test_tolerance_scales_with_samples(self):
        assert estimator_tolerance(1000) == pytest.approx(0.05)
        assert estimator_tolerance(4000) == pytest.approx(0.025)


def ring_setup(aliasing, seed, obs_noise=0.05):
    env = RingEnv(radius=1.0, n_anchor=64, obs_noise=obs_noise, aliasing=aliasing)
    _, store = ring_rollout(env, 129, env.default_step, make_rng(seed))
    kernel = Kernel("gaussian", 0.05, successor_weight=1.0)
    config = BootstrapConfig(pull=0.5, target_map=constant_target([0.0, 0.0]))
    binning = Binning(np.array([-1.3, -1.3]), np.array([1.3, 1.3]), 12)
    return env, store, kernel, config, binning


class TestContextualCompare:
    def test_unaliased_ring_no_gap(self):
        env, store, kernel, config, binning = ring_setup("none", 0)
        h_path, h_pt = contextual_entropy_compare(
            env, store, kernel, config, 6, binning, episodes=600, rng=make_rng(100)
        )
        assert abs(h_path - h_pt) <= 0.25
        assert h_path <= h_pt + 0.02

    def test_aliased_ring_path_wins(self):
        env, store, kernel, config, binning = ring_setup("antipodal", 1)
        h_path, h_pt = contextual_entropy_compare(
            env, store, kernel, config, 6, binning, episodes=800, rng=make_rng(101)
        )
        assert h_path < h_pt - 0.5

    def test_incoherent_contexts_reported_not_asserted(self):
        env, store, kernel, config, binning = ring_setup("antipodal", 2)
        h_path, h_pt = contextual_entropy_compare(
            env, store, kernel, config, 6, binning, episodes=300, rng=make_rng(102),
            coherent=False,
        )
        assert np.isfinite(h_path) and np.isfinite(h_pt)


class TestReversibilityBound:
    def test_deterministic_coupled_system_holds(self):
        rng = make_rng(7)
        theta = rng.uniform(0, 2 * np.pi, 800)
        phi = np.column_stack([np.cos(theta), np.sin(theta)])
        psi = phi.copy()
        forward = phi.copy()
        b = Binning(np.array([-1.1, -1.1]), np.array([1.1, 1.1]), 6)
        delta_h, info, eps, holds = reversibility_bound_check(forward, phi, psi, b)
        assert holds
        assert delta_h == pytest.approx(0.0, abs=1e-9)
        assert math.isnan(eps)

    def test_independent_content_fails_the_bound(self):
        rng = make_rng(8)
        n = 1200
        phi = np.tile([[0.05, 0.05]], (n, 1))          # concentrated content
        psi = rng.uniform(-1, 1, size=(n, 2))          # independent context
        forward = rng.uniform(-1, 1, size=(n, 2))      # stochastic forward states
        b = Binning(np.array([-1.1, -1.1]), np.array([1.1, 1.1]), 6)
        delta_h, info, _, holds = reversibility_bound_check(forward, phi, psi, b)
        assert not holds
        assert delta_h > info

    def test_residuals_reported(self):
        rng = make_rng(9)
        phi = rng.uniform(-1, 1, size=(100, 2))
        b = Binning(np.array([-1.1, -1.1]), np.array([1.1, 1.1]), 4)
        _, _, eps, _ = reversibility_bound_check(phi, phi, phi, b, recon_residuals=[0.5, 1.5])
        assert eps == 1.0
