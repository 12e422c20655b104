import numpy as np
import pytest

from jointcem.nn import AdamState, Parameters, adam_step, attention, transformer_block
from jointcem.nn import checkpoint
from jointcem.nn.layers import add_transformer_block, sinusoidal_positions
from jointcem.nn.tensor import Tensor, no_grad

from _oracles import attention_straight_line, max_rel_error, numerical_grad


class TestAttention:
    def test_identical_keys_average_values(self):
        rng = np.random.default_rng(0)
        q = Tensor(rng.normal(size=(3, 4)))
        k = Tensor(np.tile(rng.normal(size=(1, 4)), (5, 1)))
        v = rng.normal(size=(5, 2))
        out = attention(q, k, Tensor(v))
        np.testing.assert_allclose(out.data, np.tile(v.mean(axis=0), (3, 1)), atol=1e-12)

    def test_mask_selects_single_position(self):
        rng = np.random.default_rng(1)
        q, k, v = (Tensor(rng.normal(size=s)) for s in [(2, 4), (5, 4), (5, 3)])
        mask = np.zeros((2, 5), dtype=bool)
        mask[:, 3] = True
        out = attention(q, k, v, mask)
        np.testing.assert_allclose(out.data, np.tile(v.data[3], (2, 1)), atol=1e-15)

    def test_matches_straight_line_oracle(self):
        rng = np.random.default_rng(2)
        q, k, v = rng.normal(size=(4, 8)), rng.normal(size=(6, 8)), rng.normal(size=(6, 8))
        out, w = attention(Tensor(q), Tensor(k), Tensor(v), return_weights=True)
        assert np.max(np.abs(out.data - attention_straight_line(q, k, v))) < 1e-10
        np.testing.assert_allclose(w.data.sum(axis=-1), 1.0, atol=1e-9)

    def test_rows_are_convex_combinations(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=(6, 1))
        out = attention(Tensor(rng.normal(size=(10, 3))), Tensor(rng.normal(size=(6, 3))), Tensor(v))
        assert (out.data >= v.min() - 1e-12).all() and (out.data <= v.max() + 1e-12).all()

    def test_dimension_mismatches(self):
        with pytest.raises(ValueError):
            attention(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 3))), Tensor(np.ones((5, 3))))
        with pytest.raises(ValueError):
            attention(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))), Tensor(np.ones((4, 3))))

    def test_fully_masked_row(self):
        with pytest.raises(ValueError):
            attention(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 3))), Tensor(np.ones((4, 3))),
                      np.zeros((2, 4), dtype=bool))


def _block_params(d=8, d_a=6, seed=0):
    p = Parameters(seed=seed)
    add_transformer_block(p, "blk", d, d_a, 16)
    return p


class TestTransformerBlock:
    @pytest.mark.parametrize("M,T", [(1, 1), (3, 7), (9, 2)])
    def test_output_shape(self, M, T):
        p = _block_params()
        rng = np.random.default_rng(M * 10 + T)
        out = transformer_block(p, "blk", Tensor(rng.normal(size=(M, 8))), Tensor(rng.normal(size=(T, 6))), 2)
        assert out.shape == (M, 8)

    def test_tied_inputs_give_identical_rows(self):
        p = _block_params()
        emb = np.tile(np.random.default_rng(0).normal(size=(1, 8)), (5, 1))
        out = transformer_block(p, "blk", Tensor(emb), Tensor(np.zeros((4, 6))), 2)
        np.testing.assert_allclose(out.data, np.tile(out.data[0], (5, 1)), atol=1e-12)

    def test_empty_sequences_rejected(self):
        p = _block_params()
        with pytest.raises(ValueError):
            transformer_block(p, "blk", Tensor(np.zeros((0, 8))), Tensor(np.zeros((3, 6))), 2)

    def test_gradient_through_block(self):
        p = _block_params(seed=5)
        rng = np.random.default_rng(5)
        x = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
        a = Tensor(rng.normal(size=(4, 6)), requires_grad=True)
        w = rng.normal(size=(3, 8))

        def loss():
            return (transformer_block(p, "blk", x, a, 2) * w).sum()

        loss().backward()
        grads = {name: t.grad.copy() for name, t in p.items()}
        grads["x"], grads["a"] = x.grad.copy(), a.grad.copy()

        def f():
            with no_grad():
                return loss().item()

        for name, t in list(p.items()) + [("x", x), ("a", a)]:
            assert max_rel_error(grads[name], numerical_grad(f, t.data)) < 1e-4, name


def test_sinusoidal_positions_shape_and_first_row():
    pe = sinusoidal_positions(5, 6)
    assert pe.shape == (5, 6)
    np.testing.assert_array_equal(pe[0], [0, 1, 0, 1, 0, 1])


class TestParameters:
    def test_equal_seeds_bit_identical(self):
        a, b = _block_params(seed=11), _block_params(seed=11)
        assert a.names() == b.names()
        for (_, x), (_, y) in zip(a.items(), b.items()):
            assert x.data.tobytes() == y.data.tobytes()

    def test_different_seeds_differ(self):
        a, b = _block_params(seed=1), _block_params(seed=2)
        assert any(not np.array_equal(x.data, y.data) for (_, x), (_, y) in zip(a.items(), b.items()))

    def test_sorted_iteration(self):
        names = _block_params().names()
        assert names == sorted(names)

    def test_glorot_bounds(self):
        p = Parameters(seed=0)
        w = p.weight("w", 10, 20)
        assert np.abs(w.data).max() <= np.sqrt(6 / 30)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    p = _block_params(seed=9)
    meta = {"config": {"d": 8}, "note": "x"}
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, p, meta)
    q, meta2 = checkpoint.load(path)
    assert meta2 == meta and q.seed == 9
    assert q.names() == p.names()
    for (_, x), (_, y) in zip(p.items(), q.items()):
        assert x.shape == y.shape and x.data.tobytes() == y.data.tobytes()
    assert checkpoint.to_bytes(q, meta2) == path.read_bytes()


def test_checkpoint_rejects_garbage():
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.from_bytes(b"nope" * 10)


class TestAdam:
    def _quadratic_params(self, x0):
        p = Parameters()
        p.set("x", np.array([x0]))
        return p

    def test_zero_gradient_leaves_params(self):
        p = self._quadratic_params(1.5)
        p["x"].grad = np.zeros(1)
        adam_step(p, AdamState(learning_rate=0.1))
        assert p["x"].data[0] == 1.5

    def test_zero_learning_rate_leaves_params(self):
        p = self._quadratic_params(1.5)
        p["x"].grad = np.array([3.0])
        adam_step(p, AdamState(learning_rate=0.0))
        assert p["x"].data[0] == 1.5

    def test_converges_on_quadratic(self):
        p = self._quadratic_params(0.0)
        state = AdamState(learning_rate=0.05)
        for _ in range(500):
            x = p["x"]
            ((x - 3.0) * (x - 3.0)).sum().backward()
            adam_step(p, state)
        assert abs(p["x"].data[0] - 3.0) < 1e-2
        assert state.step == 500

    def test_grads_cleared_and_missing_grad_rejected(self):
        p = self._quadratic_params(0.0)
        p["x"].grad = np.ones(1)
        adam_step(p, AdamState())
        assert p["x"].grad is None
        with pytest.raises(RuntimeError):
            adam_step(p, AdamState())

    def test_first_step_is_learning_rate_sized(self):
        # bias correction makes the first update lr * sign(g)
        p = self._quadratic_params(0.0)
        p["x"].grad = np.array([0.37])
        adam_step(p, AdamState(learning_rate=0.01))
        assert p["x"].data[0] == pytest.approx(-0.01, rel=1e-6)
