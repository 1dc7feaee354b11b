"""Loss surfaces: independent oracles, gradients, risk reducers."""

import mpmath
import numpy as np
import pytest
from scipy.spatial.distance import cosine as scipy_cosine

from samediff import (
    FullyLabeledDataset,
    PairBatchContext,
    cross_entropy,
    empirical_risk_full,
    empirical_risk_pairs,
    head_loss_batch,
    hinge_unbounded,
    pair_exhaustive,
    pair_loss_contrastive,
    pair_loss_mse,
    pair_loss_ncs,
    pair_loss_sqdist,
    pair_risk_batch,
)

from conftest import numeric_grad, rel_err, tiny_model


def mp_cross_entropy(scores, y):
    """Extended-precision softmax cross-entropy."""
    with mpmath.workdps(60):
        exps = [mpmath.e ** mpmath.mpf(float(s)) for s in scores]
        return float(mpmath.log(mpmath.fsum(exps)) - mpmath.log(exps[y]))


def mp_contrastive(kernel, t):
    """Extended-precision contrastive objective."""
    with mpmath.workdps(60):
        exps = [mpmath.e ** mpmath.mpf(float(k)) for k in kernel]
        pos = [e for e, ti in zip(exps, t) if ti == 1]
        return float(mpmath.log(mpmath.fsum(exps)) - mpmath.log(mpmath.fsum(pos)))


def random_features(rng, n, p):
    """Feature rows with norms kept safely away from zero."""
    u = rng.normal(size=(n, p))
    u += np.sign(u) * 0.2
    return u


class TestScalarSurfaces:
    def test_hinge_values(self):
        assert hinge_unbounded(0.7, 1) == pytest.approx(-0.7)
        assert hinge_unbounded(0.7, -1) == pytest.approx(0.7)
        assert hinge_unbounded(-2.0, 1) == pytest.approx(2.0)

    def test_hinge_rejects_bad_target(self):
        with pytest.raises(ValueError, match="-1 or \\+1"):
            hinge_unbounded(0.0, 0)

    def test_cross_entropy_against_extended_precision(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            c = int(rng.integers(2, 6))
            s = rng.normal(size=c) * rng.uniform(0.5, 20)
            y = int(rng.integers(c))
            assert cross_entropy(s, y) == pytest.approx(mp_cross_entropy(s, y), rel=1e-12)

    def test_cross_entropy_stable_for_huge_scores(self):
        s = np.array([1000.0, 0.0, -1000.0])
        val = cross_entropy(s, 0)
        assert np.isfinite(val)
        assert val == pytest.approx(mp_cross_entropy(s, 0), rel=1e-12)

    def test_cross_entropy_label_domain(self):
        with pytest.raises(ValueError, match="outside score vector"):
            cross_entropy(np.zeros(3), 3)


class TestSqdist:
    def test_frozen_orthonormal_values(self):
        """Unit vectors at right angles: squared distance 2, signed by t."""
        u, v = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert pair_loss_sqdist(u, v, 1) == pytest.approx(2.0)
        assert pair_loss_sqdist(u, v, 0) == pytest.approx(-2.0)

    def test_same_point_is_zero(self):
        u = np.array([0.6, 0.8])
        assert pair_loss_sqdist(u, u, 1) == 0.0

    def test_perfect_embedding_risk(self):
        """Collapsed classes at antipodes: risk is -4 r^2 times the
        disagreeing-pair fraction (unit radius here)."""
        rng = np.random.default_rng(42)
        for _ in range(20):
            n = int(rng.integers(4, 40))
            t = rng.integers(0, 2, size=n)
            p = np.array([0.6, 0.8])
            ua = np.tile(p, (n, 1))
            ub = np.where(t[:, None] == 1, p, -p)
            risk, _, _ = pair_risk_batch("sqdist", ua, ub, t)
            assert risk == pytest.approx(-4.0 * np.mean(t == 0), abs=1e-12)


class TestNcs:
    def test_batch_mean_is_negated_cosine(self):
        """Per-pair shares average to -cos(K, K*); scipy provides the cosine."""
        rng = np.random.default_rng(42)
        for _ in range(20):
            n = int(rng.integers(3, 30))
            ua = random_features(rng, n, 3)
            ub = random_features(rng, n, 3)
            t = rng.integers(0, 2, size=n)
            ctx = PairBatchContext.from_features(ua, ub, t, radius=1.0)
            shares = [pair_loss_ncs(ctx, i) for i in range(n)]
            expected = scipy_cosine(ctx.kernel, ctx.target) - 1.0
            assert np.mean(shares) == pytest.approx(expected, rel=1e-10)

    def test_default_beta_is_kernel_minimum(self):
        ctx = PairBatchContext.from_features(
            np.eye(2), np.eye(2), np.array([1, 0]), radius=2.0
        )
        assert ctx.beta == -4.0
        np.testing.assert_allclose(ctx.target, [4.0, -4.0])

    def test_degenerate_kernel_batch_raises(self):
        ua = np.array([[1.0, 0.0]])
        ub = np.array([[0.0, 1.0]])  # orthogonal: kernel vector is all zeros
        ctx = PairBatchContext.from_features(ua, ub, np.array([1]))
        with pytest.raises(ValueError, match="degenerate kernel batch"):
            pair_loss_ncs(ctx, 0)


class TestContrastive:
    def test_against_extended_precision(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            n = int(rng.integers(2, 30))
            k = rng.normal(size=n) * rng.uniform(0.5, 30)
            t = rng.integers(0, 2, size=n)
            t[rng.integers(n)] = 1  # guarantee a positive
            ctx = PairBatchContext(kernel=k, target=np.where(t == 1, 1.0, -1.0),
                                   t=t, radius=1.0, beta=-1.0)
            assert pair_loss_contrastive(ctx) == pytest.approx(mp_contrastive(k, t), rel=1e-12)

    def test_needs_a_positive_pair(self):
        ctx = PairBatchContext(kernel=np.zeros(3), target=-np.ones(3),
                               t=np.zeros(3, dtype=int), radius=1.0, beta=-1.0)
        with pytest.raises(ValueError, match="at least one same-class pair"):
            pair_loss_contrastive(ctx)

    def test_all_positive_batch_is_zero(self):
        ctx = PairBatchContext(kernel=np.array([3.0, -1.0]), target=np.ones(2),
                               t=np.ones(2, dtype=int), radius=1.0, beta=-1.0)
        assert pair_loss_contrastive(ctx) == pytest.approx(0.0, abs=1e-15)


class TestMse:
    def test_per_pair_residual(self):
        ctx = PairBatchContext(kernel=np.array([0.5, -0.5]), target=np.array([1.0, -1.0]),
                               t=np.array([1, 0]), radius=1.0, beta=-1.0)
        assert pair_loss_mse(ctx, 0) == pytest.approx(0.25)
        assert pair_loss_mse(ctx, 1) == pytest.approx(0.25)

    def test_batch_risk_is_mean(self):
        rng = np.random.default_rng(42)
        ua = random_features(rng, 8, 3)
        ub = random_features(rng, 8, 3)
        t = rng.integers(0, 2, size=8)
        ctx = PairBatchContext.from_features(ua, ub, t)
        risk, _, _ = pair_risk_batch("mse", ua, ub, t)
        assert risk == pytest.approx(np.mean([pair_loss_mse(ctx, i) for i in range(8)]))


class TestPairRiskGradients:
    """Finite differences through the batched risk for every pair loss.

    The batch-level losses must include the flow through their shared
    normalizer and partition terms, which the element-wise check catches.
    """

    @pytest.mark.parametrize("name", ["sqdist", "ncs", "contrastive", "mse"])
    def test_feature_gradients(self, name):
        rng = np.random.default_rng(42)
        for _ in range(8):
            n = int(rng.integers(3, 10))
            p = int(rng.integers(2, 5))
            ua = random_features(rng, n, p)
            ub = random_features(rng, n, p)
            t = rng.integers(0, 2, size=n)
            t[rng.integers(n)] = 1
            _, dua, dub = pair_risk_batch(name, ua, ub, t, radius=1.0)

            def risk_only():
                return pair_risk_batch(name, ua, ub, t, radius=1.0)[0]

            assert rel_err(dua, numeric_grad(risk_only, ua)) < 1e-7
            assert rel_err(dub, numeric_grad(risk_only, ub)) < 1e-7

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty pair batch"):
            pair_risk_batch("sqdist", np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))

    def test_unknown_loss_rejected(self):
        with pytest.raises(ValueError, match="unknown pair loss"):
            pair_risk_batch("huber", np.ones((1, 2)), np.ones((1, 2)), np.ones(1))

    @pytest.mark.parametrize("name", ["sqdist", "ncs", "contrastive", "mse"])
    def test_one_sgd_step_descends(self, name):
        """A small step along the returned gradients lowers the risk."""
        rng = np.random.default_rng(42)
        for trial in range(5):
            n = 12
            ua = random_features(rng, n, 3)
            ub = random_features(rng, n, 3)
            t = rng.integers(0, 2, size=n)
            t[0] = 1
            risk0, dua, dub = pair_risk_batch(name, ua, ub, t)
            lr = 1e-3
            risk1, _, _ = pair_risk_batch(name, ua - lr * dua, ub - lr * dub, t)
            assert risk1 < risk0


class TestHeadLossBatch:
    def test_binary_hinge_maps_labels_to_signs(self):
        s = np.array([[0.5], [0.5]])
        loss, ds = head_loss_batch("hinge", s, np.array([1, 0]), 2)
        # class 1 -> target +1 (loss -0.5), class 0 -> target -1 (loss +0.5)
        assert loss == pytest.approx(0.0)
        np.testing.assert_allclose(ds, [[-0.5], [0.5]])

    def test_multiclass_hinge_frozen_case(self):
        """One-vs-rest sum: true class pulls +1, the rest push -1."""
        s = np.array([[1.0, 2.0, 3.0]])
        loss, ds = head_loss_batch("hinge", s, np.array([2]), 3)
        assert loss == pytest.approx(1.0 + 2.0 - 3.0)
        np.testing.assert_allclose(ds, [[1.0, 1.0, -1.0]])

    def test_hinge_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for cols in (1, 4):
            s = rng.normal(size=(6, cols))
            y = rng.integers(0, 2 if cols == 1 else cols, size=6)
            _, ds = head_loss_batch("hinge", s, y, 2 if cols == 1 else cols)
            num = numeric_grad(lambda: head_loss_batch("hinge", s, y, 2 if cols == 1 else cols)[0], s)
            assert rel_err(ds, num) < 1e-9

    def test_xent_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        s = rng.normal(size=(6, 4)) * 3
        y = rng.integers(0, 4, size=6)
        _, ds = head_loss_batch("xent", s, y, 4)
        num = numeric_grad(lambda: head_loss_batch("xent", s, y, 4)[0], s)
        assert rel_err(ds, num) < 1e-7

    def test_xent_against_scalar_surface(self):
        rng = np.random.default_rng(42)
        s = rng.normal(size=(5, 3))
        y = rng.integers(0, 3, size=5)
        loss, _ = head_loss_batch("xent", s, y, 3)
        assert loss == pytest.approx(np.mean([cross_entropy(s[i], int(y[i])) for i in range(5)]))

    def test_xent_needs_multiple_columns(self):
        with pytest.raises(ValueError, match="one score column per class"):
            head_loss_batch("xent", np.zeros((2, 1)), np.array([0, 1]), 2)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError, match="empty batch"):
            head_loss_batch("hinge", np.zeros((0, 1)), np.zeros(0, dtype=int), 2)


class TestEmpiricalRisks:
    def _dataset(self, n=24, seed=0):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, 3)) + np.sign(rng.normal(size=(n, 3)))
        y = rng.integers(0, 2, size=n)
        return FullyLabeledDataset.from_arrays(x, y, 2)

    def test_full_risk_matches_manual_mean(self):
        rng = np.random.default_rng(42)
        model = tiny_model(rng)
        ds = self._dataset()
        want = head_loss_batch("hinge", model.head.scores(model.features(ds.x)), ds.y, 2)[0]
        assert empirical_risk_full(model, ds, "hinge") == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("name", ["sqdist", "ncs", "contrastive", "mse"])
    def test_pair_risk_chunking_matches_single_batch(self, name):
        """The reducer accumulates kernels chunk by chunk but must agree with
        treating the entire pair set as one batch (9730 pairs here, past the
        8192-pair chunk size)."""
        rng = np.random.default_rng(42)
        model = tiny_model(rng, in_dim=2)
        n = 140  # 9730 pairs > one 8192 chunk
        x = rng.normal(size=(n, 2)) + np.sign(rng.normal(size=(n, 2)))
        y = rng.integers(0, 2, size=n)
        ds = FullyLabeledDataset.from_arrays(x, y, 2)
        pairs = pair_exhaustive(ds)
        assert len(pairs) > 8192
        xa, xb, t = pairs.gather()
        want, _, _ = pair_risk_batch(name, model.features(xa), model.features(xb), t,
                                     radius=model.radius)
        got = empirical_risk_pairs(model, pairs, name)
        assert got == pytest.approx(want, rel=1e-12)

    def test_empty_inputs_rejected(self):
        rng = np.random.default_rng(0)
        model = tiny_model(rng)
        empty = FullyLabeledDataset.from_arrays(np.zeros((0, 3)), [], 2)
        with pytest.raises(ValueError, match="empty dataset"):
            empirical_risk_full(model, empty)
