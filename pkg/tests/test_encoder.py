import numpy as np
import pytest

from mtltext import tensor as T
from mtltext.encoder import EncoderConfig, batch_arrays, encode, init_params, param_shapes
from mtltext.errors import CheckpointError, ConfigError, ContractError
from mtltext.tokenizer import Vocab, encode_pair, encode_single


@pytest.fixture
def vocab():
    words = [f"w{i:02d}" for i in range(15)]
    return Vocab(["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"] + words)


def small_config(vocab, **overrides):
    base = dict(vocab_size=len(vocab), max_positions=24, hidden_size=16,
                num_layers=2, num_heads=2, ff_size=32, dropout=0.1)
    base.update(overrides)
    return EncoderConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        EncoderConfig(vocab_size=10, hidden_size=10, num_heads=3)


def test_output_shape(vocab):
    config = small_config(vocab, hidden_size=32, num_heads=2)
    params = init_params(config, seed=0)
    enc = encode_single(["w00", "w01", "w02"], vocab, max_len=16)
    out = encode(params, config, enc)
    assert out.shape == (16, 32)
    batch_out = encode(params, config, [enc, enc])
    assert batch_out.shape == (2, 16, 32)


def test_padding_invariance_at_real_positions(vocab):
    config = small_config(vocab)
    params = init_params(config, seed=1)
    tokens = ["w03", "w01", "w04", "w01", "w05"]
    short = encode_single(tokens, vocab, max_len=16)
    long = encode_single(tokens, vocab, max_len=24)
    h_short = encode(params, config, short).data
    h_long = encode(params, config, long).data
    real = short.real_length
    np.testing.assert_allclose(h_short[:real], h_long[:real], atol=1e-8)


def test_eval_determinism(vocab):
    config = small_config(vocab)
    params = init_params(config, seed=2)
    enc = encode_pair(["w00", "w01"], ["w02"], vocab, max_len=12)
    a = encode(params, config, enc).data
    b = encode(params, config, enc).data
    np.testing.assert_array_equal(a, b)


def test_init_params_deterministic_and_complete(vocab):
    config = small_config(vocab)
    p1 = init_params(config, seed=7)
    p2 = init_params(config, seed=7)
    assert p1.keys() == param_shapes(config).keys()
    for name in p1:
        np.testing.assert_array_equal(p1[name], p2[name])
    p3 = init_params(config, seed=8)
    assert any((p1[n] != p3[n]).any() for n in p1)
    # weights truncated at two standard deviations
    assert np.abs(p1["shared/emb/token"]).max() <= 0.04 + 1e-12


def test_init_params_from_checkpoint_round_trip(vocab):
    config = small_config(vocab)
    p1 = init_params(config, seed=3)
    p2 = init_params(config, checkpoint_tensors={k: v.copy() for k, v in p1.items()})
    for name in p1:
        np.testing.assert_array_equal(p1[name], p2[name])


def test_init_params_checkpoint_errors(vocab):
    config = small_config(vocab)
    tensors = init_params(config, seed=3)
    incomplete = {k: v for k, v in tensors.items() if k != "shared/emb/token"}
    with pytest.raises(CheckpointError, match="shared/emb/token"):
        init_params(config, checkpoint_tensors=incomplete)

    wrong = dict(tensors)
    wrong["shared/emb/seg"] = np.zeros((3, 16))
    with pytest.raises(CheckpointError, match="shared/emb/seg"):
        init_params(config, checkpoint_tensors=wrong)

    with pytest.raises(ConfigError):
        init_params(config)


def test_attention_rows_sum_to_one_over_real_keys(vocab):
    config = small_config(vocab)
    params = init_params(config, seed=4)
    enc = encode_single(["w00", "w07", "w01"], vocab, max_len=12)
    attn = []
    encode(params, config, [enc, enc], collect_attention=attn)
    assert len(attn) == config.num_layers
    _, _, mask = batch_arrays([enc, enc])
    for probs in attn:
        np.testing.assert_allclose(probs.sum(axis=-1), 1.0, atol=1e-10)
        # padded keys receive no attention
        key_mask = np.repeat(mask, config.num_heads, axis=0)[:, None, :]
        assert (probs * (1.0 - key_mask)).max() < 1e-12


def test_gradient_reaches_every_parameter(vocab):
    config = small_config(vocab, max_positions=8, dropout=0.0)
    params = init_params(config, seed=5)
    # full-length inputs (no padding) and one pair input so the segment-1
    # row and every position row participate
    single = encode_single([f"w{i:02d}" for i in range(6)], vocab, max_len=8)
    pair = encode_pair(["w00", "w01"], ["w02", "w03"], vocab, max_len=8)

    tape = T.GradientTape()
    tracked = tape.parameters(params)
    hidden = encode(tracked, config, [single, pair], mode="train")
    grads = T.backward(tape, T.tensor_sum(hidden))
    for name, g in grads.items():
        assert g.any(), f"gradient identically zero for {name}"


def test_batch_permutation_covariance(vocab):
    config = small_config(vocab)
    params = init_params(config, seed=6)
    a = encode_single(["w00", "w01"], vocab, max_len=10)
    b = encode_single(["w09", "w03", "w04"], vocab, max_len=10)
    out_ab = encode(params, config, [a, b]).data
    out_ba = encode(params, config, [b, a]).data
    np.testing.assert_array_equal(out_ab[0], out_ba[1])
    np.testing.assert_array_equal(out_ab[1], out_ba[0])


def test_overlength_input_rejected(vocab):
    config = small_config(vocab, max_positions=8)
    params = init_params(config, seed=0)
    enc = encode_single(["w00"] * 10, vocab, max_len=12)
    with pytest.raises(ContractError, match="max_positions"):
        encode(params, config, enc)


def test_train_mode_needs_rng_and_differs_from_eval(vocab):
    config = small_config(vocab)
    params = init_params(config, seed=0)
    enc = encode_single(["w00", "w01"], vocab, max_len=10)
    with pytest.raises(ContractError):
        encode(params, config, enc, mode="train")
    dropped = encode(params, config, enc, mode="train",
                     dropout_rng=np.random.default_rng(0)).data
    plain = encode(params, config, enc).data
    assert (dropped != plain).any()
