import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajalign.errors import (
    InvalidConfig,
    LengthMismatch,
    TooFewSteps,
    TooShort,
    ZeroState,
    ZeroTrace,
)
from trajalign.ltc import (
    DraConfig,
    StateEnsemble,
    Trajectory,
    align_profiles,
    binned_entropy,
    build_trajectory,
    confidence_series,
    default_bins,
    delay_embed,
    divergence_slope,
    dra,
    dra_from_terms,
    dra_report,
    lyapunov_exponent,
    matrix_entropy,
    mutual_info,
    mutual_info_from_counts,
    normalized_dynamics,
    pca_trajectory,
    profile_trajectory,
    resample_linear,
    step_dynamics,
    transition_steps,
)

from conftest import logistic_map


class TestTrajectory:
    def test_needs_two_states(self):
        with pytest.raises(TooFewSteps):
            Trajectory([[1.0, 2.0]])

    def test_layer_axis(self, rng):
        x = rng.standard_normal((6, 4, 3))
        traj, ens = build_trajectory(x, "layer", reduce="sample")
        assert len(traj) == 4 and traj.dim == 3
        np.testing.assert_allclose(traj.states[2], x[:, 2, :].mean(axis=0))
        np.testing.assert_array_equal(ens[1], x[:, 1, :])

    def test_time_axis_windows(self, rng):
        x = rng.standard_normal((5, 2, 7))
        traj = build_trajectory(x, "time", window=3, stride=2)
        assert traj.step_labels == ["t0-3", "t2-5", "t4-7"]
        np.testing.assert_allclose(traj.states[1], x[:, :, 2:5].mean(axis=(0, 2)))

    def test_bad_axis(self):
        with pytest.raises(InvalidConfig):
            build_trajectory(np.zeros((2, 2, 2)), "depth")


class TestStepDynamics:
    def test_hand_case(self):
        H = [[1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]
        mags, angs = step_dynamics(H)
        np.testing.assert_allclose(mags, [1.0, 2.0, 2.0])
        np.testing.assert_allclose(angs, [0.0, math.pi / 4, math.pi / 4], atol=1e-15)
        Mag, Ang = normalized_dynamics(H)
        assert Mag == pytest.approx(5 / 6)
        assert Ang == pytest.approx(2 / 3)

    def test_quarter_turn(self):
        mags, angs = step_dynamics([[1.0, 0.0], [0.0, 1.0]])
        assert mags[0] == pytest.approx(math.sqrt(2)) and angs[0] == pytest.approx(math.pi / 2)

    def test_doubling_moves_magnitude_only(self):
        h = np.array([3.0, -4.0])
        mags, angs = step_dynamics([h, 2 * h])
        assert mags[0] == pytest.approx(5.0) and angs[0] == 0.0

    def test_constant_trajectory(self):
        assert normalized_dynamics(np.ones((4, 3))) == (0.0, 0.0)

    def test_equal_steps(self):
        Mag, _ = normalized_dynamics(np.arange(5.0)[:, None] * [1.0, 1.0] + 1.0)
        assert Mag == pytest.approx(1.0)

    def test_zero_state_angle_nan(self):
        _, angs = step_dynamics([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
        assert np.isnan(angs[0]) and angs[1] == pytest.approx(math.pi / 4)

    def test_antiparallel(self):
        _, angs = step_dynamics([[1.0, 1.0], [-2.0, -2.0]])
        assert angs[0] == pytest.approx(math.pi)

    def test_shared_scale(self):
        Mag, _ = normalized_dynamics([[1.0], [2.0], [4.0]], mag_scale=4.0)
        assert Mag == pytest.approx(0.375)

    @settings(max_examples=50)
    @given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
    def test_angles_scale_invariant(self, seed, c):
        H = np.random.default_rng(seed).standard_normal((6, 4))
        _, a = step_dynamics(H)
        _, b = step_dynamics(c * H)
        np.testing.assert_allclose(a, b, atol=1e-10)


class TestEntropy:
    def test_rank_one(self):
        Z = np.outer([1.0, 2.0, 3.0], [1.0, -1.0])
        assert matrix_entropy(Z) == 0.0

    def test_two_equal_shares_renyi2(self):
        assert matrix_entropy(np.eye(2), alpha=2.0) == pytest.approx(math.log(2), abs=1e-14)

    def test_shares_hand_case(self):
        # Gram eigenvalues 4 and 1 -> shares 0.8, 0.2
        Z = np.diag([2.0, 1.0])
        expected = -(0.8 * math.log(0.8) + 0.2 * math.log(0.2))
        assert matrix_entropy(Z) == pytest.approx(expected, rel=1e-13)
        assert matrix_entropy(Z, 2.0) == pytest.approx(-math.log(0.68), rel=1e-13)

    def test_zero_matrix(self):
        with pytest.raises(ZeroTrace):
            matrix_entropy(np.zeros((3, 2)))

    def test_bad_alpha(self):
        with pytest.raises(InvalidConfig):
            matrix_entropy(np.eye(2), alpha=0.0)

    def test_confidence(self):
        c = confidence_series([math.log(2), math.log(4)], epsilon=0.0)
        np.testing.assert_allclose(c, [1.0, 0.5])


class TestMutualInfo:
    def test_default_bins(self):
        assert [default_bins(n) for n in (8, 9, 27, 28, 1000, 1001)] == [2, 3, 3, 4, 10, 11]

    def test_counts_diagonal(self):
        assert mutual_info_from_counts([[2, 0], [0, 2]]) == pytest.approx(math.log(2))

    def test_counts_independent(self):
        assert mutual_info_from_counts([[1, 1], [1, 1]]) == pytest.approx(0.0, abs=1e-15)

    def test_identity_equals_entropy(self, rng):
        X = rng.standard_normal((200, 3))
        assert mutual_info(X, X) == binned_entropy(X)

    def test_symmetric(self, rng):
        X, Y = rng.standard_normal((100, 2)), rng.standard_normal((100, 4))
        assert mutual_info(X, Y) == mutual_info(Y, X)

    def test_matches_count_table(self, rng):
        x = rng.standard_normal(64)
        y = x + rng.standard_normal(64)
        bins = 4
        ix = np.clip(np.floor((x - x.min()) / np.ptp(x) * bins), 0, bins - 1).astype(int)
        iy = np.clip(np.floor((y - y.min()) / np.ptp(y) * bins), 0, bins - 1).astype(int)
        table = np.zeros((bins, bins))
        np.add.at(table, (ix, iy), 1)
        got = mutual_info(x[:, None], y[:, None], bins=bins)
        assert got == pytest.approx(mutual_info_from_counts(table), abs=1e-12)

    def test_constant_input_warns(self, rng):
        with pytest.warns(RuntimeWarning):
            assert mutual_info(np.ones((10, 2)), rng.standard_normal((10, 2))) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            mutual_info(np.ones((5, 1)), np.ones((6, 1)))


class TestLyapunov:
    def test_delay_embed(self):
        np.testing.assert_array_equal(delay_embed([1, 2, 3, 4], dim=2, lag=2), [[1, 3], [2, 4]])

    def test_logistic(self, backend):
        assert abs(lyapunov_exponent(logistic_map(3000)) - math.log(2)) <= 0.1

    def test_constant(self, backend):
        assert lyapunov_exponent(np.full(50, 2.5)) <= 0.0

    def test_quasi_periodic_near_zero(self, backend):
        # non-integer period: no exact repeats, so neighbour distances stay above round-off
        x = np.sin(2 * np.pi * np.arange(400) / 25.3)
        assert lyapunov_exponent(x) < 0.05

    def test_doubling_distances(self):
        curve = np.log(0.01 * 2.0 ** np.arange(8))
        assert divergence_slope(curve) == pytest.approx(math.log(2))

    def test_slope_of_line(self):
        assert divergence_slope([0.0, 1.0, 2.0, 3.0, 3.0, 3.0]) == pytest.approx(1.0)

    def test_too_short(self):
        with pytest.raises(TooShort):
            lyapunov_exponent([0.1, 0.2, 0.3])


class TestResamplingAndPCA:
    def test_resample(self):
        np.testing.assert_allclose(resample_linear([0.0, 1.0, 2.0], 5), [0, 0.5, 1, 1.5, 2])

    def test_resample_matrix(self):
        out = resample_linear([[0.0, 10.0], [2.0, 30.0]], 3)
        np.testing.assert_allclose(out, [[0, 10], [1, 20], [2, 30]])

    def test_pca_line(self):
        H = np.outer(np.arange(5.0), [3.0, 4.0])
        np.testing.assert_allclose(pca_trajectory(Trajectory(H)), 5.0 * (np.arange(5) - 2))

    def test_isotropic_variance(self, rng):
        X = rng.standard_normal((400, 2))
        proj = pca_trajectory(Trajectory(X))
        Xc = X - X.mean(0)
        top = np.linalg.eigvalsh(Xc.T @ Xc / len(X))[-1]
        assert np.var(proj) == pytest.approx(top, rel=1e-10)

    def test_pca_sign(self, rng):
        c = pca_trajectory(Trajectory(rng.standard_normal((10, 3))))
        assert c[-1] >= c[0]

    def test_transition_steps(self):
        assert transition_steps([0.0, 0.1, 1.5, 1.6]) == [2]


class TestProfiles:
    def test_profile_series_lengths(self, rng):
        x = rng.standard_normal((40, 6, 5))
        traj, ens = build_trajectory(x, "layer", reduce="sample")
        P = profile_trajectory(traj, ens)
        assert len(P.entropy_series) == 6 and len(P.step_angles) == 5
        assert P.mi_series[-1] == pytest.approx(binned_entropy(ens[5]))
        assert P.lyapunov is None and "lyapunov" in P.notes
        d = P.to_dict()
        assert set(d["series"]) == set(P.SERIES)

    def test_profile_without_ensemble(self, rng):
        P = profile_trajectory(Trajectory(rng.standard_normal((5, 2))))
        assert np.all(np.isnan(P.entropy_series))
        assert P.to_dict()["series"]["entropy"] == [None] * 5

    def test_alignment_self(self, rng):
        x = rng.standard_normal((30, 6, 4))
        P = profile_trajectory(*build_trajectory(x, "layer", reduce="sample"))
        A = align_profiles(P, P)
        assert A.alignments["magnitude"] == pytest.approx(1.0)
        assert A.deltas["skewness"] == 0.0
        assert A.shared_scale["eeg"] == A.shared_scale["llm"]

    def test_negated_series(self, rng):
        a = profile_trajectory(Trajectory(rng.standard_normal((6, 3))))
        b = profile_trajectory(Trajectory(rng.standard_normal((6, 3))))
        b.step_magnitudes = -a.step_magnitudes
        assert align_profiles(a, b).alignments["magnitude"] == pytest.approx(-1.0)

    def test_alignment_resamples_to_longer(self, rng):
        a = profile_trajectory(Trajectory(rng.standard_normal((4, 3))))
        b = profile_trajectory(Trajectory(rng.standard_normal((9, 3))))
        assert align_profiles(a, b).resampled_length["magnitude"] == 8


class TestDRA:
    def test_hand_computed_terms(self):
        cfg = DraConfig(beta=1.0, alpha_penalty=2.0)
        cos, coh, kl = [1.0, 0.5], [1.0, 0.8], [0.0, 0.25]
        w = np.array([math.exp(-1), math.exp(-2)])
        w /= w.sum()
        x = np.array([1.0, 0.5 * 0.8 * math.exp(-0.5)])
        value, raw, weights, terms = dra_from_terms(cos, coh, kl, cfg)
        np.testing.assert_allclose(weights, w, rtol=1e-14)
        assert value == pytest.approx(float(w @ x), rel=1e-14)
        l2 = dra_from_terms(cos, coh, kl, DraConfig(alpha_penalty=2.0, normalization="l2"))[0]
        assert l2 == pytest.approx(float(w @ x) / math.sqrt(np.sum((w * x) ** 2) + np.sum(w * w)))

    def test_scalar_hand_case(self):
        E, L = [1.0, 2.0, 3.0], [1.0, 2.1, 2.9]
        eps = 1e-8
        # steps 1..3; the first difference reuses the second
        dE, dL = [1.0, 1.0, 1.0], [1.1, 1.1, 0.8]
        x = []
        for t in range(3):
            cos = 1.0  # positive scalars point the same way
            coh = dE[t] * dL[t] / (abs(dE[t]) * abs(dL[t]) + eps)
            kl = 0.5 * (E[t] - L[t]) ** 2
            x.append(cos * coh * math.exp(-kl))
        w = [math.exp(-t) for t in (1, 2, 3)]
        expected = sum(wi * xi for wi, xi in zip(w, x)) / sum(w)
        assert dra(E, L, DraConfig(beta=1.0, alpha_penalty=1.0)) == pytest.approx(expected, rel=1e-12)

    def test_orthogonal_states(self):
        E = [[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
        L = [[0.0, 1.0], [0.0, 2.0], [0.0, 3.0]]
        assert dra(E, L) == 0.0

    def test_clamp(self):
        value, raw, _, _ = dra_from_terms([-1.0, -1.0], [1.0, 1.0], [0.0, 0.0])
        assert value == 0.0 and raw == pytest.approx(-1.0)
        assert dra_from_terms([-1.0], [1.0], [0.0], DraConfig(clamp_negative=False))[0] == -1.0

    def test_self_alignment_near_one(self, rng):
        E = np.cumsum(rng.standard_normal((8, 4)), axis=0) + 5.0
        assert dra(E, E) == pytest.approx(1.0, abs=1e-6)

    def test_ensemble_kl(self, rng):
        ens = StateEnsemble(rng.standard_normal((5, 30, 3)) + 2.0)
        traj = ens.mean_trajectory("layer")
        rep = dra_report(traj, traj, E_ensemble=ens, L_ensemble=ens)
        np.testing.assert_array_equal(rep.kls, np.zeros(5))

    def test_different_dims_use_common_space(self, rng):
        rep = dra_report(rng.standard_normal((6, 3)), rng.standard_normal((8, 5)))
        assert rep.space == "pca3" and rep.resampled_to == 8
        assert 0.0 <= rep.value <= 1.0

    def test_zero_state(self):
        with pytest.raises(ZeroState):
            dra([[0.0, 0.0], [1.0, 1.0]], [[1.0, 0.0], [1.0, 1.0]])

    def test_beta_changes_weights(self, rng):
        E, L = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
        a = dra_report(E, L, DraConfig(beta=1.0)).weights
        b = dra_report(E, L, DraConfig(beta=4.0)).weights
        assert not np.allclose(a, b)

    @pytest.mark.parametrize("kw", [{"beta": 0}, {"alpha_penalty": 6}, {"normalization": "max"},
                                    {"epsilon": 0.0}, {"common_dim": 0}])
    def test_invalid_config(self, kw):
        with pytest.raises(InvalidConfig):
            DraConfig(**kw).validate()
