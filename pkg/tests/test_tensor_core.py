from __future__ import annotations

import math

import numpy as np
import pytest

from src.errors import ArtifactIntegrityError, ConfigError, GradientError, ShapeError
from src.nn.network import build
from src.nn.presets import tiny2
from src.tensor.codec import decode_tensor, encode_tensor, load_tensor, save_tensor
from src.tensor.core import Tensor, backward, current_tape, no_grad, precision, reset_tape
from src.tensor.gradcheck import gradcheck, relative_error
from src.tensor.ops import (
    RunningStats,
    batchnorm2d,
    conv2d,
    elementwise,
    global_avg_pool,
    index_select_batch,
    linear,
    matmul,
    mean,
    pool2d,
    relu,
    reshape,
    softmax_cross_entropy,
    tensor_sum,
)


@pytest.fixture(autouse=True)
def fresh_tape():
    reset_tape()
    yield
    reset_tape()


def _wsum(out: Tensor, seed: int = 7) -> Tensor:
    """Soma ponderada fixa: transforma a saída de uma primitiva em perda escalar."""
    weights = np.random.default_rng(seed).standard_normal(out.shape)
    return tensor_sum(out * Tensor(weights))


def _away_from_zero(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    return rng.uniform(0.1, 1.0, shape) * rng.choice([-1.0, 1.0], shape)


def _random_case(rng: np.random.Generator):
    """Primitiva sorteada com formas aleatórias: (função escalar, entradas, passo)."""

    def dims(count: int, low: int = 1, high: int = 4) -> tuple[int, ...]:
        return tuple(int(s) for s in rng.integers(low, high, size=count))

    kind = str(rng.choice([
        "binary", "relu", "exp_log", "matmul", "linear", "conv2d", "max_pool",
        "avg_pool", "batchnorm", "cross_entropy", "index_select",
    ]))
    if kind == "binary":
        op = str(rng.choice(["add", "sub", "mul", "div"]))
        shape = dims(int(rng.integers(1, 5)))
        return (lambda a, b: _wsum(elementwise(op, a, b))), [rng.standard_normal(shape), rng.uniform(0.5, 1.5, shape)], 1e-4
    if kind == "relu":
        return (lambda t: _wsum(relu(t))), [_away_from_zero(rng, dims(int(rng.integers(1, 5))))], 1e-3
    if kind == "exp_log":
        shape = dims(int(rng.integers(1, 4)))
        return (lambda t: _wsum(t.exp() + t.log())), [rng.uniform(0.5, 2.0, shape)], 1e-4
    if kind == "matmul":
        m, k, n = dims(3, 1, 6)
        return (lambda a, b: _wsum(a @ b)), [rng.standard_normal((m, k)), rng.standard_normal((k, n))], 1e-3
    if kind == "linear":
        batch, fan_in, fan_out = dims(3, 1, 6)
        inputs = [rng.standard_normal((batch, fan_in)), rng.standard_normal((fan_out, fan_in)), rng.standard_normal(fan_out)]
        return (lambda x, w, b: _wsum(linear(x, w, b))), inputs, 1e-3
    if kind == "conv2d":
        batch, c_in, c_out = dims(3)
        k = int(rng.integers(1, 4))
        stride = int(rng.integers(1, 3))
        padding = int(rng.integers(0, (k - 1) // 2 + 1))
        size = (int(rng.integers(1, 4)) - 1) * stride + k - 2 * padding
        inputs = [
            rng.standard_normal((batch, c_in, size, size)),
            rng.standard_normal((c_out, c_in, k, k)),
            rng.standard_normal(c_out),
        ]
        return (lambda x, w, b: _wsum(conv2d(x, w, b, stride=stride, padding=padding))), inputs, 1e-3
    if kind == "max_pool":
        batch, channels, rows, cols = dims(4, 1, 3)
        shape = (batch, channels, 2 * rows, 2 * cols)
        x = rng.permutation(int(np.prod(shape))).reshape(shape) * 0.05
        return (lambda t: _wsum(pool2d("max", t, 2))), [x], 1e-3
    if kind == "avg_pool":
        batch, channels, rows, cols = dims(4, 1, 3)
        x = rng.standard_normal((batch, channels, 2 * rows, 2 * cols))
        return (lambda t: _wsum(pool2d("avg", t, 2)) + _wsum(global_avg_pool(t))), [x], 1e-3
    if kind == "batchnorm":
        batch, channels = dims(2, 1, 4)
        height, width = dims(2, 2, 4)
        training = bool(rng.integers(0, 2))
        stats = RunningStats(rng.standard_normal(channels), rng.uniform(0.5, 2.0, channels))
        inputs = [
            rng.standard_normal((batch, channels, height, width)),
            rng.uniform(0.5, 1.5, channels),
            rng.standard_normal(channels),
        ]

        def fn(x, gamma, beta):
            return _wsum(batchnorm2d(x, gamma, beta, stats.copy(), training=training))

        return fn, inputs, 1e-4
    if kind == "cross_entropy":
        batch, classes = dims(2, 1, 6)
        target = rng.dirichlet(np.ones(classes), size=batch)
        return (lambda z: softmax_cross_entropy(z, target)), [rng.standard_normal((batch, classes))], 1e-4
    shape = (int(rng.integers(1, 6)), *dims(int(rng.integers(0, 3))))
    perm = rng.permutation(shape[0])
    return (lambda t: _wsum(index_select_batch(t, perm))), [rng.standard_normal(shape)], 1e-3


# --- forward ------------------------------------------------------------------------

class TestElementwise:
    def test_add(self):
        out = Tensor([1.0, 2.0]) + Tensor([3.0, 4.0])
        np.testing.assert_array_equal(out.data, [4.0, 6.0])

    def test_relu(self):
        np.testing.assert_array_equal(relu(Tensor([-1.0, 0.0, 2.0])).data, [0.0, 0.0, 2.0])

    def test_mul_by_zero(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        out = x * 0.0
        assert out.shape == (2, 3)
        assert not np.any(out.data)

    def test_scalar_broadcast(self):
        np.testing.assert_array_equal((2.0 * Tensor([1.0, 2.0])).data, [2.0, 4.0])
        np.testing.assert_array_equal((1.0 - Tensor([1.0, 2.0])).data, [0.0, -1.0])

    def test_mismatched_shapes(self):
        with pytest.raises(ShapeError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones((3, 2)))

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            elementwise("pow", Tensor([1.0]), Tensor([2.0]))


class TestMatmul:
    def test_identity(self):
        a = Tensor(np.random.default_rng(0).standard_normal((3, 4)))
        np.testing.assert_array_equal((a @ Tensor(np.eye(4))).data, a.data)

    def test_row_sums(self):
        out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
        np.testing.assert_array_equal(out.data, [[3.0], [7.0]])

    def test_inner_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


class TestConv2d:
    def test_identity_kernel(self):
        x = Tensor(np.random.default_rng(0).random((2, 1, 5, 5)))
        out = conv2d(x, Tensor(np.ones((1, 1, 1, 1))))
        np.testing.assert_array_equal(out.data, x.data)

    def test_constant_field(self):
        out = conv2d(Tensor(np.ones((1, 1, 5, 5))), Tensor(np.ones((1, 1, 3, 3))))
        assert out.shape == (1, 1, 3, 3)
        np.testing.assert_array_equal(out.data, np.full((1, 1, 3, 3), 9.0))

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 3, 6, 6))
        k = rng.standard_normal((4, 3, 3, 3))
        b = rng.standard_normal(4)
        out = conv2d(Tensor(x), Tensor(k), Tensor(b), stride=1, padding=1).data
        xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        expected = np.zeros((2, 4, 6, 6))
        for n in range(2):
            for o in range(4):
                for i in range(6):
                    for j in range(6):
                        expected[n, o, i, j] = np.sum(xp[n, :, i:i + 3, j:j + 3] * k[o]) + b[o]
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-12)

    def test_non_integral_output(self):
        with pytest.raises(ConfigError):
            conv2d(Tensor(np.ones((1, 1, 6, 6))), Tensor(np.ones((1, 1, 3, 3))), stride=2)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(Tensor(np.ones((1, 2, 4, 4))), Tensor(np.ones((1, 3, 3, 3))))


class TestPooling:
    def test_max(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        np.testing.assert_array_equal(pool2d("max", x, 2).data, [[[[5.0, 7.0], [13.0, 15.0]]]])

    def test_avg(self):
        x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
        np.testing.assert_array_equal(pool2d("avg", x, 2).data, [[[[2.5, 4.5], [10.5, 12.5]]]])

    def test_global(self):
        x = Tensor(np.arange(8.0).reshape(1, 2, 2, 2))
        np.testing.assert_array_equal(global_avg_pool(x).data, [[1.5, 5.5]])


class TestSoftmaxCrossEntropy:
    def test_uniform_target_uniform_logits(self):
        n = 5
        loss = softmax_cross_entropy(Tensor(np.zeros((3, n))), np.full((3, n), 1.0 / n))
        assert loss.item() == pytest.approx(math.log(n), rel=1e-6)

    def test_dominant_correct_class(self):
        logits = np.array([[1e4, 0.0, 0.0]])
        loss = softmax_cross_entropy(Tensor(logits, dtype=np.float64), np.array([[1.0, 0.0, 0.0]]))
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_linear_in_target(self):
        rng = np.random.default_rng(5)
        logits = Tensor(rng.standard_normal((4, 6)))
        y = np.eye(6)[rng.integers(6, size=4)]
        y_other = np.eye(6)[rng.integers(6, size=4)]
        lam = 0.37
        mixed = softmax_cross_entropy(logits, lam * y + (1 - lam) * y_other).item()
        separate = lam * softmax_cross_entropy(logits, y).item() + (1 - lam) * softmax_cross_entropy(logits, y_other).item()
        assert mixed == pytest.approx(separate, rel=1e-12)

    def test_unnormalized_target(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.full((2, 3), 0.5))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            softmax_cross_entropy(Tensor(np.zeros((2, 3))), np.full((2, 4), 0.25))


class TestIndexSelect:
    def test_identity_and_swap(self):
        x = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]]))
        np.testing.assert_array_equal(index_select_batch(x, np.array([0, 1])).data, x.data)
        np.testing.assert_array_equal(index_select_batch(x, np.array([1, 0])).data, [[3.0, 4.0], [1.0, 2.0]])

    def test_repeated_row_accumulates(self):
        x = Tensor(np.array([[1.0], [2.0]]), requires_grad=True)
        backward(tensor_sum(index_select_batch(x, np.array([1, 1]), allow_repeats=True)))
        np.testing.assert_array_equal(x.grad, [[0.0], [2.0]])

    def test_not_a_permutation(self):
        with pytest.raises(ValueError):
            index_select_batch(Tensor(np.ones((2, 1))), np.array([1, 1]))

    def test_inverse_permutation_round_trip(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            shape = (int(rng.integers(1, 9)), *(int(s) for s in rng.integers(1, 4, size=2)))
            perm = rng.permutation(shape[0])
            x = Tensor(rng.standard_normal(shape), requires_grad=True)
            weights = rng.standard_normal(shape)
            back = index_select_batch(index_select_batch(x, perm), np.argsort(perm))
            np.testing.assert_array_equal(back.data, x.data)
            backward(tensor_sum(back * Tensor(weights)))
            np.testing.assert_array_equal(x.grad, weights)
            reset_tape()


class TestBatchNorm:
    def test_training_updates_running_stats(self):
        x = np.random.default_rng(0).standard_normal((4, 2, 3, 3)) + 2.0
        running = RunningStats.fresh(2, np.dtype(np.float64))
        batchnorm2d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), running, training=True)
        n = 4 * 9
        expected_mean = 0.1 * x.mean(axis=(0, 2, 3))
        expected_var = 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * n / (n - 1)
        np.testing.assert_allclose(running.mean, expected_mean, rtol=1e-12)
        np.testing.assert_allclose(running.var, expected_var, rtol=1e-12)

    def test_eval_uses_running_stats(self):
        running = RunningStats(np.array([1.0, -1.0]), np.array([4.0, 1.0]))
        x = np.ones((1, 2, 1, 1))
        out = batchnorm2d(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), running, training=False, eps=0.0)
        np.testing.assert_allclose(out.data.ravel(), [0.0, 2.0])
        np.testing.assert_array_equal(running.mean, [1.0, -1.0])


# --- fita e backward -----------------------------------------------------------------

class TestTape:
    def test_sum_gradient_is_ones(self):
        x = Tensor(np.arange(4.0), requires_grad=True)
        backward(tensor_sum(x))
        np.testing.assert_array_equal(x.grad, np.ones(4))

    def test_square(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        backward(x * x)
        assert float(x.grad) == 6.0

    def test_fan_out_accumulates(self):
        x = Tensor(np.array([2.0, -1.0]), requires_grad=True)
        backward(tensor_sum(x * x + x))
        np.testing.assert_array_equal(x.grad, [5.0, -1.0])

    def test_non_scalar_loss(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with pytest.raises(GradientError):
            backward(x * 2.0)

    def test_detached_loss(self):
        with pytest.raises(GradientError):
            backward(tensor_sum(Tensor(np.ones(3))))

    def test_repeated_backward(self):
        x = Tensor(np.ones(3), requires_grad=True)
        loss = tensor_sum(x)
        backward(loss)
        with pytest.raises(GradientError):
            backward(loss)

    def test_no_grad_records_nothing(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            out = tensor_sum(x * 2.0)
        assert len(current_tape()) == 0
        assert not out.requires_grad

    def test_wrt_restricts_leaves(self):
        a = Tensor(np.ones(2), requires_grad=True)
        b = Tensor(np.ones(2), requires_grad=True)
        grads = backward(tensor_sum(a * b), wrt=[a])
        assert list(grads) == [a]
        assert b.grad is None

    def test_replay_gives_identical_gradients(self):
        net = build(tiny2(4), init_seed=3, dtype=np.float64)
        x = Tensor(np.random.default_rng(1).random((2, 3, 8, 8)))
        target = np.eye(4)[[0, 3]]

        def grads():
            reset_tape()
            net.zero_grad()
            backward(softmax_cross_entropy(net.forward(x), target))
            return {name: p.grad.copy() for name, p in net.named_parameters()}

        first, second = grads(), grads()
        for name in first:
            np.testing.assert_array_equal(first[name], second[name])

    def test_data_is_read_only(self):
        x = Tensor(np.zeros(3))
        with pytest.raises(ValueError):
            x.data[0] = 1.0

    def test_item_requires_single_element(self):
        with pytest.raises(ValueError):
            Tensor(np.ones(2)).item()

    def test_assign_keeps_shape(self):
        x = Tensor(np.zeros(3))
        with pytest.raises(GradientError):
            x.assign(np.zeros(4))


# --- verificação por diferenças finitas -----------------------------------------------

class TestGradcheck:
    """64 bits; passo 1e-3 nas primitivas lineares por partes, 1e-4 nas curvas."""

    @pytest.fixture(autouse=True)
    def double_precision(self):
        with precision(np.float64):
            yield

    @pytest.mark.parametrize("op", ["add", "sub", "mul", "div"])
    @pytest.mark.parametrize("seed", range(3))
    def test_binary(self, op, seed):
        rng = np.random.default_rng(seed)
        shape = tuple(int(s) for s in rng.integers(1, 4, size=int(rng.integers(1, 5))))
        a = rng.standard_normal(shape)
        b = rng.uniform(0.5, 1.5, shape)
        assert gradcheck(lambda x, y: _wsum(elementwise(op, x, y)), [a, b]) < 1e-6

    def test_relu(self):
        x = _away_from_zero(np.random.default_rng(1), (3, 4))
        assert gradcheck(lambda t: _wsum(relu(t)), [x]) < 1e-6

    def test_exp_log(self):
        rng = np.random.default_rng(2)
        assert gradcheck(lambda t: _wsum(t.exp()), [rng.uniform(-1, 1, (2, 3))], step=1e-4) < 1e-6
        assert gradcheck(lambda t: _wsum(t.log()), [rng.uniform(1, 2, (2, 3))], step=1e-4) < 1e-6

    def test_matmul(self):
        rng = np.random.default_rng(3)
        assert gradcheck(lambda a, b: _wsum(a @ b), [rng.standard_normal((3, 4)), rng.standard_normal((4, 2))]) < 1e-6

    def test_linear(self):
        rng = np.random.default_rng(4)
        inputs = [rng.standard_normal((3, 5)), rng.standard_normal((2, 5)), rng.standard_normal(2)]
        assert gradcheck(lambda x, w, b: _wsum(linear(x, w, b)), inputs) < 1e-6

    @pytest.mark.parametrize("stride,padding,size", [(1, 1, 4), (2, 0, 5), (1, 0, 4)])
    def test_conv2d(self, stride, padding, size):
        rng = np.random.default_rng(5)
        inputs = [rng.standard_normal((2, 2, size, size)), rng.standard_normal((3, 2, 3, 3)), rng.standard_normal(3)]
        fn = lambda x, k, b: _wsum(conv2d(x, k, b, stride=stride, padding=padding))  # noqa: E731
        assert gradcheck(fn, inputs) < 1e-6

    def test_max_pool(self):
        rng = np.random.default_rng(6)
        x = rng.permutation(2 * 2 * 4 * 4).reshape(2, 2, 4, 4) * 0.05
        assert gradcheck(lambda t: _wsum(pool2d("max", t, 2)), [x]) < 1e-6

    def test_avg_and_global_pool(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal((2, 3, 4, 4))
        assert gradcheck(lambda t: _wsum(pool2d("avg", t, 2)), [x]) < 1e-6
        assert gradcheck(lambda t: _wsum(global_avg_pool(t)), [x]) < 1e-6

    def test_reshape_mean(self):
        x = np.random.default_rng(8).standard_normal((2, 6))
        assert gradcheck(lambda t: _wsum(reshape(t, (3, 4))), [x]) < 1e-6
        assert gradcheck(lambda t: mean(t * t), [x]) < 1e-6

    @pytest.mark.parametrize("training", [True, False])
    def test_batchnorm(self, training):
        rng = np.random.default_rng(9)
        inputs = [rng.standard_normal((2, 3, 3, 3)), rng.uniform(0.5, 1.5, 3), rng.standard_normal(3)]
        stats = RunningStats(rng.standard_normal(3), rng.uniform(0.5, 2.0, 3))

        def fn(x, gamma, beta):
            return _wsum(batchnorm2d(x, gamma, beta, stats.copy(), training=training))

        assert gradcheck(fn, inputs, step=1e-4) < 1e-6

    def test_softmax_cross_entropy(self):
        rng = np.random.default_rng(10)
        logits = rng.standard_normal((3, 4))
        target = rng.dirichlet(np.ones(4), size=3)
        assert gradcheck(lambda z: softmax_cross_entropy(z, target), [logits], step=1e-4) < 1e-6

    def test_index_select(self):
        x = np.random.default_rng(11).standard_normal((4, 3))
        perm = np.array([2, 0, 3, 1])
        assert gradcheck(lambda t: _wsum(index_select_batch(t, perm)), [x]) < 1e-6

    @pytest.mark.parametrize("seed", range(3))
    def test_two_block_network_directional(self, seed):
        """Derivada direcional da perda de uma rede de 2 blocos em todos os parâmetros."""
        rng = np.random.default_rng(seed)
        net = build(tiny2(4), init_seed=seed, dtype=np.float64)
        x = Tensor(rng.random((4, 3, 8, 8)))
        target = np.eye(4)[[0, 1, 2, 3]]
        direction = {name: rng.standard_normal(p.shape) for name, p in net.named_parameters()}
        norm = math.sqrt(sum(float(np.sum(d * d)) for d in direction.values()))
        direction = {name: d / norm for name, d in direction.items()}

        reset_tape()
        net.zero_grad()
        backward(softmax_cross_entropy(net.forward(x), target))
        analytic = sum(float(np.sum(p.grad * direction[name])) for name, p in net.named_parameters())

        step = 1e-6

        def loss_at(scale: float) -> float:
            shifted = net.replica({name: scale * d for name, d in direction.items()})
            with no_grad():
                return softmax_cross_entropy(shifted.forward(x), target).item()

        numeric = (loss_at(step) - loss_at(-step)) / (2 * step)
        assert relative_error(np.array([analytic]), np.array([numeric])) < 1e-5

    @pytest.mark.parametrize("seed", range(100))
    def test_random_shapes(self, seed):
        fn, inputs, step = _random_case(np.random.default_rng(1000 + seed))
        assert gradcheck(fn, inputs, step=step) < 1e-6

    @pytest.mark.parametrize("seed", range(2))
    def test_two_block_network_per_tensor(self, seed):
        """Diferenças centrais elemento a elemento, passo 1e-6, em cada tensor de parâmetros."""
        rng = np.random.default_rng(seed)
        net = build(tiny2(4), init_seed=seed, dtype=np.float64)
        x = Tensor(rng.random((4, 3, 8, 8)))
        target = np.eye(4)[[0, 1, 2, 3]]
        names = [name for name, _ in net.named_parameters()]
        assert not any(name.endswith("conv.bias") for name in names)

        reset_tape()
        net.zero_grad()
        backward(softmax_cross_entropy(net.forward(x), target))
        analytic = {name: p.grad.copy() for name, p in net.named_parameters()}

        step = 1e-6
        for name, p in net.named_parameters():
            numeric = np.zeros(p.shape)
            for i in range(p.data.size):
                offset = np.zeros(p.shape)
                offset.reshape(-1)[i] = step
                with no_grad():
                    plus = softmax_cross_entropy(net.replica({name: offset}).forward(x), target).item()
                    minus = softmax_cross_entropy(net.replica({name: -offset}).forward(x), target).item()
                numeric.reshape(-1)[i] = (plus - minus) / (2 * step)
            assert relative_error(analytic[name], numeric) < 1e-5, name


# --- codec -------------------------------------------------------------------------------

class TestCodec:
    def test_roundtrip_file(self, tmp_path):
        array = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        save_tensor(tmp_path / "t.cumten", array)
        loaded = load_tensor(tmp_path / "t.cumten")
        assert loaded.dtype == np.float32
        np.testing.assert_array_equal(loaded, array)

    def test_offset_chaining(self):
        a, b = np.arange(3, dtype=np.int64), np.ones((2, 2))
        buffer = encode_tensor(a) + encode_tensor(Tensor(b))
        first, offset = decode_tensor(buffer)
        second, end = decode_tensor(buffer, offset)
        np.testing.assert_array_equal(first, a)
        np.testing.assert_array_equal(second, b)
        assert end == len(buffer)

    def test_bad_magic(self):
        with pytest.raises(ArtifactIntegrityError):
            decode_tensor(b"NOTATEN" + bytes(20))

    def test_truncated(self):
        buffer = encode_tensor(np.ones(10))
        with pytest.raises(ArtifactIntegrityError):
            decode_tensor(buffer[:-4])

    def test_unsupported_dtype(self):
        with pytest.raises(ValueError):
            encode_tensor(np.ones(2, dtype=np.complex64))
