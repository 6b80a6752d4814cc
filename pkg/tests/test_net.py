import numpy as np
import pytest

from hornmine.env import featurize, reset
from hornmine.memory import RuleMemory
from hornmine.net import (
    COUNT_SCALE,
    SCORE_SCALE,
    NumericError,
    PolicyValueNet,
    make_net_sample,
    numeric_gradient,
    scale_values,
)
from hornmine.relational import build_vocab


def small_state(score=0.7):
    vocab = build_vocab(["a", "b", "c", "d"], n_invented=2)
    mem = RuleMemory(vocab)
    mem.seed_rule((0, 1), 2, score=score)
    st = reset([(0, 1, 2), (3, 0, 1)])
    return featurize(st, mem), vocab


def small_net(seed=0, hidden=16):
    sp, vocab = small_state()
    return PolicyValueNet(total=vocab.total, k=sp.k, hidden=hidden, seed=seed), sp


class TestScaling:
    def test_channel_rules(self):
        k = 9
        idx = np.array([0, 1, 2, 3, 8])  # channels of cell (0,0)
        vals = np.array([32.0, 4.0, 2.0, 1.0, 5.0])
        out = scale_values(idx, vals, k)
        assert out == pytest.approx([1.0, 4 / 32, 2 / 32, 1.0, 0.5])

    def test_extra_channels_scaled_as_counts(self):
        k = 11
        idx = np.array([9, 10])
        vals = np.array([8.0, 2.0])
        out = scale_values(idx, vals, k)
        assert out == pytest.approx([8 / COUNT_SCALE, 2 / COUNT_SCALE])

    def test_channel_index_is_mod_k(self):
        k = 9
        idx = np.array([9 * 7 + 8])  # channel 8 of a later cell
        out = scale_values(idx, np.array([3.0]), k)
        assert out == pytest.approx([3.0 / SCORE_SCALE])

    def test_make_net_sample_scales(self):
        sp, _ = small_state(score=0.7)
        s = make_net_sample(sp, np.ones(len(sp.order)) / len(sp.order), 1.0)
        raw_idx, raw_vals = sp.flat_input()
        assert np.array_equal(s.idx, raw_idx)
        assert s.vals == pytest.approx(scale_values(raw_idx, raw_vals, sp.k))
        assert s.z == 1.0


class TestInitAndForward:
    def test_zero_heads_give_uniform_policy_and_zero_value(self):
        net, sp = small_net()
        rho, v = net.policy_value(sp)
        n = len(sp.order)
        assert rho == pytest.approx(np.full(n, 1.0 / n))
        assert v == 0.0

    def test_policy_normalized_after_training_too(self):
        net, sp = small_net()
        pi = np.zeros(len(sp.order))
        pi[0] = 1.0
        batch = [make_net_sample(sp, pi, 1.0)]
        for _ in range(10):
            net.train_step(batch, lr=0.05)
        rho, v = net.policy_value(sp)
        assert rho.sum() == pytest.approx(1.0)
        assert (rho > 0).all()
        assert -1.0 < v < 1.0

    def test_sample_loss_nonnegative(self):
        net, sp = small_net()
        pi = np.zeros(len(sp.order))
        pi[1] = 1.0
        s = make_net_sample(sp, pi, -1.0)
        assert net.sample_loss(s) >= 0.0
        net.train_step([s], lr=0.05)
        assert net.sample_loss(s) >= 0.0


class TestTraining:
    def test_loss_decreases(self):
        net, sp = small_net(seed=3)
        n = len(sp.order)
        pi_a = np.zeros(n)
        pi_a[0] = 1.0
        batch = [make_net_sample(sp, pi_a, 1.0)]
        first = net.train_step(batch, lr=0.05)
        for _ in range(80):
            last = net.train_step(batch, lr=0.05)
        assert last < first
        rho, v = net.policy_value(sp)
        assert rho[0] > 0.8
        assert v > 0.5

    def test_update_norm_bounded_by_clip(self):
        net, sp = small_net(seed=1)
        n = len(sp.order)
        pi = np.zeros(n)
        pi[0] = 1.0
        # a grossly mis-valued target makes the raw gradient large
        batch = [make_net_sample(sp, pi, 1.0) for _ in range(4)]
        lr = 1.0
        before = np.concatenate([p.ravel().copy() for _, p in net.param_items()] + [[net.bv]])
        net.train_step(batch, lr=lr)
        after = np.concatenate([p.ravel().copy() for _, p in net.param_items()] + [[net.bv]])
        assert np.linalg.norm(after - before) <= lr * net.clip_norm + 1e-9

    def test_empty_batch_rejected(self):
        net, _ = small_net()
        with pytest.raises(ValueError):
            net.train_step([], lr=0.1)

    def test_non_finite_loss_raises(self):
        net, sp = small_net()
        net.W1[:] = np.nan
        pi = np.ones(len(sp.order)) / len(sp.order)
        with pytest.raises(NumericError):
            net.train_step([make_net_sample(sp, pi, 0.0)], lr=0.1)


class TestGradients:
    def test_analytic_matches_numeric(self):
        net, sp = small_net(seed=5, hidden=8)
        rng = np.random.default_rng(5)
        # nonzero heads so every backward path carries signal
        net.Wp += rng.normal(0, 0.1, net.Wp.shape)
        net.bp += rng.normal(0, 0.1, net.bp.shape)
        net.wv += rng.normal(0, 0.1, net.wv.shape)
        net.bv = 0.05
        n = len(sp.order)
        pi = np.full(n, 1.0 / n)
        pi[0] += 0.2
        pi /= pi.sum()
        s = make_net_sample(sp, pi, 0.7)
        _, grads = net.loss_and_grads([s])

        coords = [
            ("W1", (int(s.idx[0]), 3)),
            ("W1", (int(s.idx[-1]), 0)),
            ("b1", (2,)),
            ("W2", (1, 4)),
            ("b2", (0,)),
            ("Wp", (2, int(s.action_ids[0]))),
            ("bp", (int(s.action_ids[1]),)),
            ("wv", (3,)),
            ("bv", ()),
        ]
        numeric = numeric_gradient(net, s, coords, h=1e-4)
        for name, index in coords:
            a = grads[name][index] if index else grads[name]
            n_val = numeric[(name, index)]
            rel = abs(a - n_val) / max(1e-6, abs(a) + abs(n_val))
            assert rel < 1e-4, f"{name}{index}: analytic {a} numeric {n_val}"


class TestPersistence:
    def test_save_load_bit_exact(self, tmp_path):
        net, sp = small_net(seed=7)
        pi = np.ones(len(sp.order)) / len(sp.order)
        for _ in range(5):
            net.train_step([make_net_sample(sp, pi, 0.5)], lr=0.05)
        path = str(tmp_path / "net.npz")
        net.save(path)
        back = PolicyValueNet.load(path)
        assert back.params_hash() == net.params_hash()
        rho_a, v_a = net.policy_value(sp)
        rho_b, v_b = back.policy_value(sp)
        assert np.array_equal(rho_a, rho_b)
        assert v_a == v_b

    def test_params_hash_tracks_changes(self):
        net, sp = small_net()
        h0 = net.params_hash()
        pi = np.ones(len(sp.order)) / len(sp.order)
        net.train_step([make_net_sample(sp, pi, 1.0)], lr=0.05)
        assert net.params_hash() != h0
