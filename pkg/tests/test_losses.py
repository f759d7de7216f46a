"""Loss-term checks: exact values, gradients, masking, and degeneracies."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semikit.augment import AugmentConfig
from semikit.curriculum import CurriculumState
from semikit.errors import ConfigError, StateError
from semikit.losses import (
    ALGORITHM_NAMES,
    AlgorithmSpec,
    algorithm_spec,
    class_balance_dlogits,
    class_balance_loss,
    cross_entropy,
    one_hot,
    sharpen,
    supervised_loss,
    total_loss,
    unsupervised_loss,
)
from semikit.nets import MlpModel, backward, forward, init_mlp, softmax

IDENTITY_AUG = AugmentConfig(
    weak_noise_sigma=0.0,
    strong_noise_sigma=0.0,
    strong_dropout_prob=0.0,
    strong_scale_range=(1.0, 1.0),
)


def identity_model(c=2):
    """Single linear layer with identity weights: logits == input."""
    return MlpModel(
        layer_sizes=[c, c], weights=[np.eye(c)], biases=[np.zeros(c)]
    )


def logits_for_confidence(p1):
    """2-D input whose identity-model softmax is [1-p1, p1]."""
    return [0.0, np.log(p1 / (1.0 - p1))]


class TestAlgorithmSpec:
    def test_registry_covers_six_variants(self):
        assert set(ALGORITHM_NAMES) == {
            "pl", "flex_pl", "uda", "flex_uda", "fixmatch", "flexmatch"
        }

    @pytest.mark.parametrize(
        "name,family,flexible,tau,mu,kind",
        [
            ("pl", "pseudo_label", False, 0.95, 1, "hard"),
            ("flex_pl", "pseudo_label", True, 0.95, 1, "hard"),
            ("uda", "uda", False, 0.8, 7, "soft"),
            ("flex_uda", "uda", True, 0.8, 7, "soft"),
            ("fixmatch", "fixmatch", False, 0.95, 7, "hard"),
            ("flexmatch", "fixmatch", True, 0.95, 7, "hard"),
        ],
    )
    def test_defaults(self, name, family, flexible, tau, mu, kind):
        spec = algorithm_spec(name)
        assert spec.family == family
        assert spec.flexible is flexible
        assert spec.tau == tau
        assert spec.mu == mu
        assert spec.target_kind == kind
        assert spec.lam == 1.0

    def test_uda_temperature_default(self):
        assert algorithm_spec("uda").temperature == 0.5
        assert algorithm_spec("flex_uda").temperature == 0.5

    def test_hyphenated_and_uppercase_names(self):
        assert algorithm_spec("Flex-PL").name == "flex_pl"
        assert algorithm_spec("FlexMatch").name == "flexmatch"

    def test_overrides(self):
        spec = algorithm_spec("fixmatch", tau=0.8, mu=3, lam=0.5)
        assert (spec.tau, spec.mu, spec.lam) == (0.8, 3, 0.5)

    def test_unknown_name(self):
        with pytest.raises(ConfigError):
            algorithm_spec("mixmatch")

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            algorithm_spec("pl", momentum=0.9)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tau": 0.0},
            {"tau": 1.5},
            {"mu": 0},
            {"lam": -1.0},
        ],
    )
    def test_invariant_violations(self, kwargs):
        with pytest.raises(ConfigError):
            algorithm_spec("fixmatch", **kwargs)

    def test_soft_needs_positive_temperature(self):
        with pytest.raises(ConfigError):
            AlgorithmSpec(
                name="uda", family="uda", flexible=False, tau=0.8, mu=7,
                temperature=0.0, target_kind="soft",
            )


class TestCrossEntropy:
    def test_uniform_ten_class(self):
        p = np.full(10, 0.1)
        assert cross_entropy(3, p) == pytest.approx(np.log(10.0), abs=1e-9)

    def test_perfect_prediction_vanishes(self):
        eps = 1e-9
        assert cross_entropy(1, [eps, 1.0 - eps]) == pytest.approx(0.0, abs=2e-9)

    def test_soft_target_equal_to_p_gives_entropy(self):
        p = np.array([0.2, 0.3, 0.5])
        want = -np.sum(p * np.log(p))
        assert cross_entropy(p, p) == pytest.approx(want, rel=1e-12)
        assert cross_entropy(p, p) >= 0

    def test_batched_hard_targets(self):
        probs = np.array([[0.9, 0.1], [0.4, 0.6]])
        out = cross_entropy(np.array([0, 1]), probs)
        np.testing.assert_allclose(out, [-np.log(0.9), -np.log(0.6)])

    def test_batched_soft_targets(self):
        probs = np.array([[0.5, 0.5], [0.25, 0.75]])
        out = cross_entropy(probs, probs)
        want = [-np.sum(r * np.log(r)) for r in probs]
        np.testing.assert_allclose(out, want)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            cross_entropy(5, [0.5, 0.5])
        with pytest.raises(ValueError):
            cross_entropy(0, [0.5, 0.6])
        with pytest.raises(ValueError):
            cross_entropy([0.5, 0.5, 0.0], [0.5, 0.5])


class TestSharpen:
    def test_symmetric_unchanged(self):
        np.testing.assert_allclose(sharpen([0.5, 0.5], 0.25), [0.5, 0.5])

    def test_hand_example(self):
        out = sharpen([0.8, 0.2], 0.5)
        np.testing.assert_allclose(out, [0.64 / 0.68, 0.04 / 0.68], rtol=1e-12)
        assert out[0] == pytest.approx(0.94118, abs=1e-5)
        assert out[1] == pytest.approx(0.05882, abs=1e-5)

    def test_unit_temperature_is_identity(self):
        p = np.array([0.1, 0.2, 0.7])
        np.testing.assert_allclose(sharpen(p, 1.0), p, rtol=1e-12)

    def test_low_temperature_approaches_one_hot(self):
        out = sharpen([0.6, 0.4], 0.05)
        assert out[0] > 0.999

    @given(st.integers(0, 10_000), st.floats(0.1, 5.0))
    @settings(max_examples=50, deadline=None)
    def test_rows_stay_distributions(self, seed, temp):
        raw = np.random.default_rng(seed).uniform(0.05, 1.0, size=(4, 3))
        p = raw / raw.sum(axis=1, keepdims=True)
        out = sharpen(p, temp)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
        assert np.all(out > 0)

    def test_rejects_bad_temperature(self):
        with pytest.raises(ConfigError):
            sharpen([0.5, 0.5], 0.0)


def fd_model_grads(model, loss_fn, eps=1e-6):
    """Central finite differences of loss_fn() w.r.t. all model parameters."""
    num_w, num_b = [], []
    for params, out in ((model.weights, num_w), (model.biases, num_b)):
        for p in params:
            g = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                orig = p[idx]
                p[idx] = orig + eps
                hi = loss_fn()
                p[idx] = orig - eps
                lo = loss_fn()
                p[idx] = orig
                g[idx] = (hi - lo) / (2 * eps)
            out.append(g)
    return num_w, num_b


class TestSupervisedLoss:
    def test_matches_manual_cross_entropy(self):
        model = init_mlp([2, 8, 3], np.random.default_rng(0))
        rng = np.random.default_rng(1)
        x = rng.normal(size=(5, 2))
        y = np.array([0, 1, 2, 0, 1])
        res = supervised_loss(model, x, y, IDENTITY_AUG, np.random.default_rng(2))
        probs = softmax(forward(model, x))
        want = float(np.mean(cross_entropy(y, probs)))
        assert res.loss == pytest.approx(want, rel=1e-12)

    def test_dlogits_rows_sum_to_zero(self):
        model = init_mlp([2, 6, 3], np.random.default_rng(3))
        x = np.random.default_rng(4).normal(size=(4, 2))
        res = supervised_loss(
            model, x, [0, 1, 2, 1], IDENTITY_AUG, np.random.default_rng(5)
        )
        np.testing.assert_allclose(res.dlogits.sum(axis=1), 0.0, atol=1e-12)

    def test_gradient_matches_finite_differences(self):
        model = init_mlp([2, 5, 3], np.random.default_rng(6))
        x = np.random.default_rng(7).normal(size=(6, 2))
        y = np.array([0, 1, 2, 0, 1, 2])
        res = supervised_loss(model, x, y, IDENTITY_AUG, np.random.default_rng(8))
        dw, db = backward(model, res.cache, res.dlogits)
        num_w, num_b = fd_model_grads(
            model,
            lambda: supervised_loss(
                model, x, y, IDENTITY_AUG, np.random.default_rng(8)
            ).loss,
        )
        for got, want in zip(dw + db, num_w + num_b):
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-8)

    def test_uses_weak_augmentation(self):
        # with nonzero weak noise, two different rng streams give different losses
        model = init_mlp([2, 5, 2], np.random.default_rng(9))
        x = np.random.default_rng(10).normal(size=(8, 2))
        y = np.zeros(8, dtype=int)
        cfg = AugmentConfig(weak_noise_sigma=0.5)
        a = supervised_loss(model, x, y, cfg, np.random.default_rng(1)).loss
        b = supervised_loss(model, x, y, cfg, np.random.default_rng(2)).loss
        assert a != b


class TestUnsupervisedLoss:
    def run(self, spec, model, u_x, state=None, seed=0, aug=IDENTITY_AUG):
        u_x = np.asarray(u_x, dtype=np.float64)
        return unsupervised_loss(
            spec, model, u_x, np.arange(len(u_x)), state, aug,
            np.random.default_rng(seed),
        )

    def test_fully_masked_batch(self):
        # zero-weight model: uniform confidences 1/2 < 0.95, nothing passes
        model = MlpModel([2, 2], [np.zeros((2, 2))], [np.zeros(2)])
        res = self.run(algorithm_spec("fixmatch"), model, np.ones((6, 2)))
        assert res.loss == 0.0
        assert res.utilization == 0.0
        assert not res.mask.any()
        assert np.all(res.dlogits == 0.0)

    def test_fresh_flexible_state_admits_everything(self):
        model = identity_model()
        state = CurriculumState(10, 2, fixed_threshold=0.95)
        res = self.run(
            algorithm_spec("flexmatch"), model,
            np.random.default_rng(0).normal(size=(10, 2)), state,
        )
        assert res.utilization == 1.0
        assert res.mask.all()

    def test_single_passing_sample_value(self):
        # row 0 confident (p=0.98 > 0.95), row 1 not (p=0.55)
        model = identity_model()
        u_x = np.array([logits_for_confidence(0.98), logits_for_confidence(0.55)])
        res = self.run(algorithm_spec("fixmatch"), model, u_x)
        assert res.mask.tolist() == [True, False]
        assert res.utilization == 0.5
        p_pass = softmax(u_x[0])[1]
        assert res.loss == pytest.approx(-np.log(p_pass) / 2.0, rel=1e-12)
        np.testing.assert_array_equal(res.dlogits[1], 0.0)

    def test_utilization_is_pass_fraction(self):
        model = identity_model()
        rows = [logits_for_confidence(p) for p in (0.99, 0.97, 0.6, 0.5)]
        res = self.run(algorithm_spec("fixmatch"), model, np.array(rows))
        assert res.utilization == 0.5
        assert res.mask.sum() == 2

    def test_loss_non_negative(self):
        model = init_mlp([2, 6, 3], np.random.default_rng(11))
        for seed in range(5):
            u_x = np.random.default_rng(seed).normal(size=(12, 2)) * 3
            for name in ALGORITHM_NAMES:
                spec = algorithm_spec(name)
                state = (
                    CurriculumState(12, 3, fixed_threshold=spec.tau)
                    if spec.flexible else None
                )
                res = self.run(spec, model, u_x, state, seed=seed)
                assert res.loss >= 0.0

    def test_flexible_without_state_raises(self):
        with pytest.raises(StateError):
            self.run(algorithm_spec("flexmatch"), identity_model(), np.ones((2, 2)))

    def test_masked_samples_contribute_zero_gradient(self):
        model = init_mlp([2, 5, 2], np.random.default_rng(12))
        rng = np.random.default_rng(13)
        u_x = rng.normal(size=(10, 2)) * 4
        spec = algorithm_spec("fixmatch", tau=0.6)
        res = self.run(spec, model, u_x)
        assert 0 < res.mask.sum() < 10  # mixed batch
        full_w, full_b = backward(model, res.cache, res.dlogits)
        from semikit.nets import forward_cached
        kept = np.flatnonzero(res.mask)
        logits, cache = forward_cached(model, u_x[kept])
        targets = one_hot(res.predicted_classes[kept], 2)
        sub_dlogits = (softmax(logits) - targets) / len(u_x)
        sub_w, sub_b = backward(model, cache, sub_dlogits)
        for got, want in zip(full_w + full_b, sub_w + sub_b):
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_gradient_matches_fd_with_frozen_targets(self):
        model = init_mlp([2, 5, 3], np.random.default_rng(14))
        u_x = np.random.default_rng(15).normal(size=(6, 2)) * 3
        spec = algorithm_spec("uda", tau=0.1)  # low tau: everything passes
        base = self.run(spec, model, u_x)
        assert base.mask.all()
        dw, db = backward(model, base.cache, base.dlogits)
        targets = base.pseudo_labels.copy()  # frozen soft targets

        def frozen_loss():
            probs = softmax(forward(model, u_x))
            return float(
                -np.sum(targets * np.log(probs), axis=1).sum() / len(u_x)
            )

        num_w, num_b = fd_model_grads(model, frozen_loss)
        for got, want in zip(dw + db, num_w + num_b):
            np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-7)

    def test_composite_fd_differs_when_targets_shift(self):
        # same setup: finite differences through the *whole* computation move
        # the sharpened targets too, so they must NOT match the detached grads
        model = init_mlp([2, 5, 3], np.random.default_rng(14))
        u_x = np.random.default_rng(15).normal(size=(6, 2)) * 3
        spec = algorithm_spec("uda", tau=0.1)
        base = self.run(spec, model, u_x)
        dw, db = backward(model, base.cache, base.dlogits)

        def composite_loss():
            return self.run(spec, model, u_x).loss

        num_w, num_b = fd_model_grads(model, composite_loss)
        max_rel = max(
            float(np.max(np.abs(g - n) / (np.abs(n) + 1e-8)))
            for g, n in zip(dw + db, num_w + num_b)
        )
        assert max_rel > 1e-2

    def test_uda_masks_on_unsharpened_confidence(self):
        # q = [0.78, 0.22]: below tau=0.8 raw, far above it after sharpening
        model = identity_model()
        u_x = np.array([[np.log(0.78 / 0.22), 0.0]])
        res = self.run(algorithm_spec("uda"), model, u_x)
        assert sharpen(softmax(u_x[0]), 0.5)[0] > 0.9
        assert not res.mask[0]
        assert res.loss == 0.0

    def test_uda_targets_are_sharpened(self):
        model = identity_model()
        u_x = np.array([logits_for_confidence(0.9)])  # conf 0.9 > 0.8 passes
        res = self.run(algorithm_spec("uda"), model, u_x)
        assert res.mask[0]
        q = softmax(u_x[0])
        want_target = sharpen(q, 0.5)
        np.testing.assert_allclose(res.pseudo_labels[0], want_target, rtol=1e-12)
        assert res.loss == pytest.approx(
            float(-np.sum(want_target * np.log(q))), rel=1e-12
        )

    def test_pl_trains_on_weak_branch(self):
        # weak is deterministic here while strong is wildly stochastic, so the
        # pseudo-label family's loss must not depend on the rng seed
        cfg = AugmentConfig(
            weak_noise_sigma=0.0,
            strong_noise_sigma=5.0,
            strong_dropout_prob=0.5,
            strong_scale_range=(0.1, 2.0),
        )
        model = identity_model()
        u_x = np.array([logits_for_confidence(0.99)])
        pl = [
            self.run(algorithm_spec("pl"), model, u_x, seed=s, aug=cfg).loss
            for s in (1, 2)
        ]
        assert pl[0] == pl[1]
        fm = [
            self.run(algorithm_spec("fixmatch"), model, u_x, seed=s, aug=cfg).loss
            for s in (1, 2)
        ]
        assert fm[0] != fm[1]

    def test_flexible_records_into_cache(self):
        model = identity_model()
        state = CurriculumState(4, 2, fixed_threshold=0.9)
        u_x = np.array(
            [logits_for_confidence(0.99), logits_for_confidence(0.6)]
        )
        unsupervised_loss(
            algorithm_spec("flexmatch", tau=0.9), model, u_x, np.array([0, 1]),
            state, IDENTITY_AUG, np.random.default_rng(0),
        )
        assert state.cache[0] == 1  # confident row cached
        assert state.cache[1] == -1  # 0.6 <= 0.9 not cached
        assert state.counts.tolist() == [0, 1]

    def test_mask_uses_thresholds_from_before_this_batch(self):
        # Pre-seed the state so T(1) = 0.45. This batch raises class 1's
        # count; if the mask were computed after recording, the 0.55-confidence
        # row would fail against the raised threshold.
        state = CurriculumState(10, 2, fixed_threshold=0.9, mapping="linear")
        state.record_predictions(
            np.arange(6), np.full(6, 0.99), np.array([0, 0, 0, 0, 1, 1])
        )
        np.testing.assert_allclose(
            state.thresholds().per_class, [0.9, 0.45], rtol=1e-12
        )
        model = identity_model()
        u_x = np.array(
            [logits_for_confidence(0.95), logits_for_confidence(0.55)]
        )
        res = unsupervised_loss(
            algorithm_spec("flexmatch", tau=0.9), model, u_x,
            np.array([8, 9]), state, IDENTITY_AUG, np.random.default_rng(0),
        )
        assert res.mask.tolist() == [True, True]
        assert state.counts.tolist() == [4, 3]  # the 0.95 row was recorded
        assert state.thresholds().per_class[1] > 0.45

    def test_pinned_flexible_matches_fixed_bitwise(self):
        model = init_mlp([2, 6, 2], np.random.default_rng(20))
        u_x = np.random.default_rng(21).normal(size=(14, 2)) * 3
        cfg = AugmentConfig()
        fixed = unsupervised_loss(
            algorithm_spec("fixmatch"), model, u_x, np.arange(14), None,
            cfg, np.random.default_rng(7),
        )
        state = CurriculumState(
            14, 2, fixed_threshold=0.95, mapping="linear",
            pinned_beta=np.ones(2),
        )
        flex = unsupervised_loss(
            algorithm_spec("flexmatch"), model, u_x, np.arange(14), state,
            cfg, np.random.default_rng(7),
        )
        assert fixed.loss == flex.loss
        np.testing.assert_array_equal(fixed.mask, flex.mask)
        np.testing.assert_array_equal(fixed.dlogits, flex.dlogits)


class TestTotalLoss:
    def test_zero_lambda(self):
        assert total_loss(algorithm_spec("pl", lam=0.0), 0.7, 123.0) == 0.7

    def test_unit_lambda_sum(self):
        assert total_loss(algorithm_spec("fixmatch"), 0.5, 0.25) == 0.75

    def test_custom_lambda(self):
        assert total_loss(algorithm_spec("uda", lam=2.0), 0.5, 0.25) == 1.0


class TestClassBalance:
    def test_uniform_mean_is_zero(self):
        assert class_balance_loss([[0.5, 0.5], [0.5, 0.5]]) == pytest.approx(0.0)
        assert class_balance_loss([[0.8, 0.2], [0.2, 0.8]]) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_hand_example(self):
        got = class_balance_loss([[0.75, 0.25]])
        assert got == pytest.approx(0.5 * np.log(4.0 / 3.0), rel=1e-12)
        assert got == pytest.approx(0.14384, abs=1e-5)

    @given(st.integers(0, 10_000))
    @settings(max_examples=50, deadline=None)
    def test_non_negative(self, seed):
        raw = np.random.default_rng(seed).uniform(0.05, 1.0, size=(5, 4))
        p = raw / raw.sum(axis=1, keepdims=True)
        assert class_balance_loss(p) >= 0.0

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(22)
        z = rng.normal(size=(5, 3))
        got = class_balance_dlogits(softmax(z))
        eps = 1e-6
        num = np.zeros_like(z)
        for idx in np.ndindex(z.shape):
            orig = z[idx]
            z[idx] = orig + eps
            hi = class_balance_loss(softmax(z))
            z[idx] = orig - eps
            lo = class_balance_loss(softmax(z))
            z[idx] = orig
            num[idx] = (hi - lo) / (2 * eps)
        np.testing.assert_allclose(got, num, rtol=1e-5, atol=1e-9)

    def test_rejects_empty_batch(self):
        with pytest.raises(ValueError):
            class_balance_loss(np.zeros((0, 3)))
