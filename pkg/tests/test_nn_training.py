"""Batch packing, the optimizer schedule, and training-loop behavior."""

import numpy as np
import pytest

from pnident.dataset import NormStats, Sample
from pnident.errors import ConfigurationError, DivergenceError, InsufficientDataError
from pnident.nn import (
    AdamState,
    evaluate_mse,
    init_model,
    loss_and_grads,
    pack_batch,
    train,
    train_step,
)
from pnident.nn.training import sharded_loss_and_grads


def make_stats():
    return NormStats(
        feature_min=np.zeros(6),
        feature_max=np.full(6, 2.0),
        label_min=np.array([2.5, 0.1]),
        label_max=np.array([5.5, 0.4]),
    )


def tiny_model(head_kind="regime", seed=3):
    return init_model(
        make_stats(), hidden=8, n_layers=2, head_kind=head_kind,
        max_steps=20, seed=seed,
    )


def make_samples(n, seed=0, min_len=3, max_len=12):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        l = int(rng.integers(min_len, max_len + 1))
        out.append(
            Sample(
                window=rng.random((l, 6)),
                label=rng.random(2),
                traj_id=f"traj{i}",
                end_tick=100 + l,
            )
        )
    return out


class TestPackBatch:
    def test_front_padding_layout(self):
        samples = make_samples(5, seed=1)
        x, mask, y = pack_batch(samples)
        t = max(s.length for s in samples)
        assert x.shape == (5, t, 6) and mask.shape == (5, t) and y.shape == (5, 2)
        for i, s in enumerate(samples):
            np.testing.assert_array_equal(x[i, t - s.length:], s.window)
            np.testing.assert_array_equal(x[i, : t - s.length], 0.0)
            assert mask[i].sum() == s.length
            assert mask[i, -1] == 1.0  # every window ends at the last slot
            np.testing.assert_array_equal(y[i], s.label)

    def test_empty_batch_rejected(self):
        with pytest.raises(InsufficientDataError):
            pack_batch([])

    def test_padding_matches_per_sample_forward(self):
        """A ragged batch must score exactly like one-at-a-time windows."""
        from pnident.nn import batch_forward, model_forward

        p = tiny_model()
        rng = np.random.default_rng(4)
        for _, arr in p.named_tensors():
            arr[...] = rng.uniform(-0.5, 0.5, size=arr.shape)
        samples = make_samples(6, seed=2)
        x, mask, _ = pack_batch(samples)
        phys, _, _, _ = batch_forward(x, mask, p)
        for i, s in enumerate(samples):
            single, _ = model_forward(s.window, p)
            np.testing.assert_allclose(phys[i], single, atol=1e-12)


class TestAdam:
    def test_rate_schedule(self):
        adam = AdamState(m={}, v={})
        expected = {0: 0.002, 99: 0.002, 100: 0.002 * 0.99,
                    199: 0.002 * 0.99, 200: 0.002 * 0.99**2,
                    1000: 0.002 * 0.99**10}
        for step, rate in expected.items():
            adam.step = step
            assert adam.current_rate() == pytest.approx(rate, rel=1e-12)

    def test_single_update_by_hand(self):
        p = tiny_model(head_kind="linear")
        adam = AdamState.for_params(p)
        grads = {
            name: np.full_like(arr, 0.3) for name, arr in p.named_tensors()
        }
        before = {name: arr.copy() for name, arr in p.named_tensors()}
        adam.update(p, grads)
        # first step: m/c1 = g, v/c2 = g^2, so delta = -rate * g/(|g|+eps)
        delta = -0.002 * 0.3 / (0.3 + 1e-8)
        for name, arr in p.named_tensors():
            np.testing.assert_allclose(arr - before[name], delta, rtol=1e-9)
        assert adam.step == 1

    def test_shape_mismatch_rejected(self):
        p = tiny_model(head_kind="linear")
        adam = AdamState.for_params(p)
        grads = {name: np.zeros_like(arr) for name, arr in p.named_tensors()}
        grads["head.w"] = np.zeros((3, 3))
        with pytest.raises(ConfigurationError):
            adam.update(p, grads)

    def test_schedule_validation(self):
        with pytest.raises(ConfigurationError):
            AdamState(m={}, v={}, base_rate=-1.0)
        with pytest.raises(ConfigurationError):
            AdamState(m={}, v={}, step=-1)


class TestTrainStep:
    def test_perfect_predictions_mean_zero_loss_and_no_movement(self):
        # linear head with zero weights and bias 0.5 predicts exactly the
        # label 0.5 for every window: loss and gradients are exactly zero
        p = tiny_model(head_kind="linear")
        p.head.w[...] = 0.0
        p.head.b[...] = 0.5
        samples = make_samples(4, seed=3)
        for s in samples:
            s.label[...] = 0.5
        x, mask, y = pack_batch(samples)
        loss, grads, _ = loss_and_grads(x, mask, y, p)
        assert loss == 0.0
        for g in grads.values():
            assert np.count_nonzero(g) == 0

        adam = AdamState.for_params(p)
        before = {name: arr.copy() for name, arr in p.named_tensors()}
        train_step(x, mask, y, p, adam)
        for name, arr in p.named_tensors():
            np.testing.assert_array_equal(arr, before[name])

    def test_single_sample_overfit_decreases_monotonically(self):
        """50 optimizer steps on one sample must steadily reduce its loss."""
        p = tiny_model()
        sample = make_samples(1, seed=9)[0]
        x, mask, y = pack_batch([sample])
        adam = AdamState.for_params(p)
        losses = [train_step(x, mask, y, p, adam) for _ in range(50)]
        diffs = np.diff(losses)
        assert np.all(diffs < 0)
        assert losses[-1] < 0.2 * losses[0]

    def test_divergence_reported_with_step(self):
        p = tiny_model(head_kind="linear")
        p.head.w[...] = np.nan
        samples = make_samples(2, seed=5)
        x, mask, y = pack_batch(samples)
        adam = AdamState.for_params(p)
        adam.step = 7
        with pytest.raises(DivergenceError) as err:
            train_step(x, mask, y, p, adam)
        assert "7" in str(err.value)


class TestSharding:
    def test_shard_count_does_not_change_results(self):
        p = tiny_model()
        rng = np.random.default_rng(6)
        for _, arr in p.named_tensors():
            arr[...] = rng.uniform(-0.5, 0.5, size=arr.shape)
        x, mask, y = pack_batch(make_samples(7, seed=7))
        base_loss, base_grads = sharded_loss_and_grads(x, mask, y, p, shards=1)
        for shards in (2, 3, 7, 50):
            loss, grads = sharded_loss_and_grads(x, mask, y, p, shards=shards)
            assert abs(loss - base_loss) <= 1e-10
            for name in base_grads:
                assert np.max(np.abs(grads[name] - base_grads[name])) <= 1e-10

    def test_weighting_handles_uneven_shards(self):
        # 5 samples over 2 shards split 2/3; equal-weight averaging of shard
        # means would be wrong, batch-size weighting is exact
        p = tiny_model()
        x, mask, y = pack_batch(make_samples(5, seed=8))
        loss1, _ = sharded_loss_and_grads(x, mask, y, p, shards=1)
        loss2, _ = sharded_loss_and_grads(x, mask, y, p, shards=2)
        assert abs(loss1 - loss2) <= 1e-12


class TestTrainLoop:
    def test_deterministic_given_seed(self):
        samples = make_samples(20, seed=10)
        h1 = train(tiny_model(), samples, iterations=15, batch_size=8, seed=2)
        h2 = train(tiny_model(), samples, iterations=15, batch_size=8, seed=2)
        np.testing.assert_array_equal(h1.losses, h2.losses)

    def test_loss_comes_down_on_a_small_problem(self):
        samples = make_samples(16, seed=11)
        params = tiny_model()
        hist = train(params, samples, iterations=300, batch_size=16, seed=0)
        assert hist.iterations == 300
        assert np.mean(hist.losses[-10:]) < 0.2 * np.mean(hist.losses[:10])

    def test_adam_state_carries_across_calls(self):
        samples = make_samples(8, seed=12)
        params = tiny_model()
        h1 = train(params, samples, iterations=5, batch_size=4, seed=0)
        assert h1.adam.step == 5
        h2 = train(params, samples, iterations=3, batch_size=4, seed=1,
                   adam=h1.adam)
        assert h2.adam.step == 8

    def test_no_samples_rejected(self):
        with pytest.raises(InsufficientDataError):
            train(tiny_model(), [], iterations=1)


class TestEvaluate:
    def test_matches_manual_mse(self):
        p = tiny_model()
        rng = np.random.default_rng(13)
        for _, arr in p.named_tensors():
            arr[...] = rng.uniform(-0.5, 0.5, size=arr.shape)
        samples = make_samples(9, seed=14)
        per_output, combined = evaluate_mse(p, samples, batch_size=4)

        from pnident.nn import model_forward

        errs = []
        for s in samples:
            phys, _ = model_forward(s.window, p)
            norm = p.stats.norm_labels(phys)
            errs.append((norm - s.label) ** 2)
        manual = np.mean(errs, axis=0)
        np.testing.assert_allclose(per_output, manual, atol=1e-12)
        assert combined == pytest.approx(manual.mean(), abs=1e-12)

    def test_batching_does_not_change_result(self):
        p = tiny_model()
        samples = make_samples(11, seed=15)
        a = evaluate_mse(p, samples, batch_size=3)[0]
        b = evaluate_mse(p, samples, batch_size=256)[0]
        np.testing.assert_allclose(a, b, atol=1e-12)
