import numpy as np
import pytest

from mtltext import tensor as T
from mtltext.errors import ContractError, NumericError

from oracles import fd_gradient, rel_error


def test_square_gradient_at_three():
    tape = T.GradientTape()
    x = tape.parameter("x", 3.0)
    loss = T.mul(x, x)
    grads = T.backward(tape, loss)
    assert grads["x"] == pytest.approx(6.0, abs=1e-12)


def test_matmul_sum_matches_finite_differences():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))

    tape = T.GradientTape()
    ta = tape.parameter("a", a)
    tb = tape.parameter("b", b)
    grads = T.backward(tape, T.tensor_sum(T.matmul(ta, tb)))

    def f(av, bv):
        return float((av @ bv).sum())

    for wrt, name in ((0, "a"), (1, "b")):
        fd = fd_gradient(f, (a, b), wrt)
        assert rel_error(grads[name], fd) <= 1e-4


def test_softmax_cross_entropy_closed_form_gradient():
    rng = np.random.default_rng(5)
    logits = rng.normal(size=(6,))
    gold = 2

    tape = T.GradientTape()
    z = tape.parameter("z", logits)
    probs = T.softmax(z, axis=-1)
    loss = T.neg(T.log(T.pick(T.reshape(probs, (1, 6)), [gold])))
    grads = T.backward(tape, loss)

    expect = np.exp(logits - logits.max())
    expect /= expect.sum()
    expect[gold] -= 1.0
    np.testing.assert_allclose(grads["z"], expect, atol=1e-10)


# One finite-difference sweep per primitive; the acceptance suite widens this
# to >= 20 random instances each.
def _fd_check(build, arrays, n_params):
    tape = T.GradientTape()
    params = [tape.parameter(f"p{i}", arrays[i]) for i in range(n_params)]
    loss = build(*params)
    grads = T.backward(tape, loss)

    def f(*vals):
        ps = [T.Tensor(v) for v in vals]
        return float(build(*ps).data.reshape(()))

    for i in range(n_params):
        fd = fd_gradient(f, arrays, i)
        assert rel_error(grads[f"p{i}"], fd) <= 1e-4, f"param {i}"


def test_primitive_gradients_against_finite_differences():
    rng = np.random.default_rng(42)
    x = rng.normal(size=(3, 5))
    y = rng.normal(size=(3, 5))
    row = rng.normal(size=(5,))

    _fd_check(lambda a, b: T.tensor_sum(T.add(a, b)), (x, y), 2)
    _fd_check(lambda a, b: T.tensor_sum(T.mul(T.sub(a, b), a)), (x, y), 2)
    _fd_check(lambda a, b: T.tensor_sum(T.mul(a, b)), (x, row), 2)  # broadcast
    _fd_check(lambda a: T.tensor_sum(T.neg(a)), (x,), 1)
    _fd_check(lambda a: T.mean(T.exp(a)), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.log(T.exp(a))), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.tanh(a)), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.gelu(a)), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.mul(T.softmax(a, axis=-1), a)), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.reshape(a, (5, 3))), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.mul(T.transpose(a, (1, 0)),
                                           T.transpose(a, (1, 0)))), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.gather(a, [2, 0, 2])), (x,), 1)
    _fd_check(lambda a: T.tensor_sum(T.pick(a, [4, 0, 3])), (x,), 1)
    _fd_check(lambda a, g, b: T.tensor_sum(T.layer_norm(a, g, b)),
              (x, rng.normal(size=(5,)), rng.normal(size=(5,))), 3)
    _fd_check(lambda a: T.mean(T.tensor_sum(a, axis=1)), (x,), 1)


def test_dropout_gradient_with_fixed_mask():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(4, 6))

    def build(a):
        return T.tensor_sum(T.dropout(a, 0.5, np.random.default_rng(123)))

    _fd_check(build, (x,), 1)


def test_backward_rejects_second_call():
    tape = T.GradientTape()
    x = tape.parameter("x", [1.0, 2.0])
    loss = T.tensor_sum(T.mul(x, x))
    T.backward(tape, loss)
    with pytest.raises(ContractError):
        T.backward(tape, loss)


def test_backward_rejects_non_scalar_loss():
    tape = T.GradientTape()
    x = tape.parameter("x", [1.0, 2.0])
    with pytest.raises(ContractError):
        T.backward(tape, T.mul(x, x))


def test_unused_parameter_gets_zero_gradient():
    tape = T.GradientTape()
    x = tape.parameter("x", [1.0, 2.0])
    unused = tape.parameter("unused", np.ones((2, 3)))
    grads = T.backward(tape, T.tensor_sum(x))
    assert grads["unused"].shape == (2, 3)
    assert not grads["unused"].any()


def test_gradient_of_sum_is_sum_of_gradients():
    rng = np.random.default_rng(3)
    for trial in range(5):
        a = rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4))

        def f_loss(ta, tb):
            return T.tensor_sum(T.mul(T.matmul(ta, tb), ta))

        def g_loss(ta, tb):
            return T.mean(T.gelu(T.add(ta, tb)))

        def run(build):
            tape = T.GradientTape()
            ta, tb = tape.parameter("a", a), tape.parameter("b", b)
            return T.backward(tape, build(ta, tb))

        gf = run(f_loss)
        gg = run(g_loss)
        gsum = run(lambda ta, tb: T.add(f_loss(ta, tb), g_loss(ta, tb)))
        for k in ("a", "b"):
            np.testing.assert_allclose(gsum[k], gf[k] + gg[k], atol=1e-10)


def test_softmax_basic_values():
    out = T.softmax(T.Tensor([0.0, 0.0]))
    np.testing.assert_allclose(out.data, [0.5, 0.5], atol=1e-15)

    a = T.softmax(T.Tensor([1.3, -0.4]))
    shifted = T.softmax(T.Tensor([1.3 + 1000.0, -0.4 + 1000.0]))
    np.testing.assert_allclose(a.data, shifted.data, atol=1e-12)

    big = T.softmax(T.Tensor([1000.0, 0.0]))
    np.testing.assert_allclose(big.data, [1.0, 0.0], atol=1e-12)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(8)
    x = rng.normal(scale=50.0, size=(7, 9))
    out = T.softmax(T.Tensor(x), axis=-1)
    np.testing.assert_allclose(out.data.sum(axis=-1), np.ones(7), atol=1e-12)
    assert (out.data >= 0).all()


def test_softmax_empty_rejected():
    with pytest.raises(ContractError):
        T.softmax(T.Tensor(np.zeros((0,))))


def test_layer_norm_examples():
    gamma = T.Tensor(np.ones(4))
    beta = T.Tensor(np.zeros(4))
    const = T.layer_norm(T.Tensor(np.full((2, 4), 3.7)), gamma, beta)
    np.testing.assert_allclose(const.data, 0.0, atol=1e-5)

    out = T.layer_norm(T.Tensor([[1.0, 3.0]]), T.Tensor(np.ones(2)), T.Tensor(np.zeros(2)))
    np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-6)

    rng = np.random.default_rng(4)
    x = rng.normal(size=(3, 4))
    betav = rng.normal(size=(4,))
    out = T.layer_norm(T.Tensor(x), T.Tensor(np.zeros(4)), T.Tensor(betav))
    np.testing.assert_allclose(out.data, np.broadcast_to(betav, (3, 4)), atol=1e-15)


def test_dropout_eval_and_scaling():
    rng = np.random.default_rng(0)
    x = T.Tensor(np.ones((200, 50)))
    out = T.dropout(x, 0.25, np.random.default_rng(99))
    kept = out.data != 0.0
    # inverted dropout: surviving entries are scaled by 1/(1-rate)
    np.testing.assert_allclose(out.data[kept], 1.0 / 0.75)
    assert abs(kept.mean() - 0.75) < 0.02
    # same seed, same mask
    again = T.dropout(x, 0.25, np.random.default_rng(99))
    np.testing.assert_array_equal(out.data, again.data)
    # rate 0 is the identity
    assert T.dropout(x, 0.0, rng) is x


def test_non_finite_output_names_primitive():
    with pytest.raises(NumericError, match="log"):
        T.log(T.Tensor([0.0]))
