import numpy as np
import pytest

from grnformer.backbone import (
    MASK_VALUE,
    DecoderParams,
    MaskSpec,
    TokenSequence,
    apply_mask,
    decoder_forward,
    embed_tokens,
    encoder_forward,
    init_decoder_params,
    init_encoder_params,
    mask_count,
    masked_mse_loss,
    mse_loss,
    multi_head_attention,
    tokenize_cell,
)
from grnformer.config import BackboneConfig
from grnformer.core import ComputationTape, constant, mul, parameter, sum_all
from grnformer.errors import ContractError, ShapeError


@pytest.fixture
def rng():
    return np.random.default_rng(8)


class TestTokenize:
    def test_all_zero_cell(self):
        assert len(tokenize_cell(np.zeros(6), 16)) == 0

    def test_descending_with_index_ties(self):
        x = np.zeros(10)
        x[7], x[2], x[9] = 5.0, 5.0, 1.0
        tokens = tokenize_cell(x, 16, n_genes=10)
        assert list(tokens.gene_ids) == [2, 7, 9]
        assert list(tokens.values) == [5.0, 5.0, 1.0]

    def test_cap(self):
        tokens = tokenize_cell(np.arange(1.0, 11.0), 4)
        assert list(tokens.gene_ids) == [9, 8, 7, 6]

    def test_include_zeros_puts_them_last(self):
        tokens = tokenize_cell(np.array([0.0, 2.0, 0.0, 1.0]), 16, include_zeros=True)
        assert list(tokens.gene_ids) == [1, 3, 0, 2]

    def test_length_checked(self):
        with pytest.raises(ShapeError):
            tokenize_cell(np.ones(5), 16, n_genes=6)


class TestMask:
    def test_counts(self):
        assert mask_count(10, 0.3) == 3
        assert mask_count(3, 0.95) == 3
        assert mask_count(20, 0.15) == 3

    def test_masks_requested_share(self, rng):
        tokens = TokenSequence(np.arange(10), np.arange(1.0, 11.0))
        masked, spec = apply_mask(tokens, 0.3, rng)
        assert len(spec) == 3
        assert np.all(np.diff(spec.positions) > 0)
        assert np.all(masked.values[spec.positions] == MASK_VALUE)
        assert np.array_equal(spec.originals, tokens.values[spec.positions])
        untouched = np.setdiff1d(np.arange(10), spec.positions)
        assert np.array_equal(masked.values[untouched], tokens.values[untouched])

    def test_high_ratio_masks_everything(self, rng):
        tokens = TokenSequence(np.arange(3), np.ones(3))
        _, spec = apply_mask(tokens, 0.95, rng)
        assert list(spec.positions) == [0, 1, 2]

    def test_at_least_one_masked(self, rng):
        _, spec = apply_mask(TokenSequence(np.arange(2), np.ones(2)), 0.01, rng)
        assert len(spec) == 1

    def test_seeded(self):
        tokens = TokenSequence(np.arange(20), np.ones(20))
        a = apply_mask(tokens, 0.15, np.random.default_rng(4))[1].positions
        b = apply_mask(tokens, 0.15, np.random.default_rng(4))[1].positions
        assert np.array_equal(a, b)

    def test_empty(self, rng):
        with pytest.raises(ContractError):
            apply_mask(TokenSequence(np.array([], dtype=np.int64), np.array([])), 0.15, rng)


def small_encoder(rng, n_layers=1, width=16, heads=2, ff=32, n_genes=8):
    config = BackboneConfig(hidden_width=width, n_layers=n_layers, n_heads=heads, ff_width=ff, max_genes=32)
    return config, init_encoder_params(config, n_genes, rng, init_scale=0.3)


class TestEncoder:
    def test_zero_layers_returns_embeddings(self, rng):
        config, params = small_encoder(rng, n_layers=0)
        tokens = TokenSequence(np.array([3, 1, 5]), np.array([2.0, 1.0, 0.5]))
        out = encoder_forward(tokens, config, params)
        assert np.array_equal(out.values.data, embed_tokens(tokens, params).data)
        assert out.row_ids == (3, 1, 5)

    def test_permutation_equivariance(self, rng):
        config, params = small_encoder(rng, n_layers=2)
        tokens = TokenSequence(np.arange(8), rng.random(8))
        order = rng.permutation(8)
        base = encoder_forward(tokens, config, params).values.data
        permuted = encoder_forward(tokens.permute(order), config, params).values.data
        assert np.allclose(permuted, base[order], rtol=0, atol=1e-12)

    def test_token_bias_is_added_before_blocks(self, rng):
        config, params = small_encoder(rng, n_layers=0)
        tokens = TokenSequence(np.arange(4), np.ones(4))
        bias = constant(rng.normal(size=(4, 16)))
        out = encoder_forward(tokens, config, params, token_bias=bias).values.data
        assert np.allclose(out, embed_tokens(tokens, params).data + bias.data, rtol=0, atol=1e-15)

    def test_width_mismatch(self, rng):
        config, params = small_encoder(rng)
        with pytest.raises(ShapeError):
            encoder_forward(TokenSequence(np.arange(2), np.ones(2)), config.model_copy(update={"hidden_width": 8}), params)

    def test_gradients(self, rng, grad_check):
        config, params = small_encoder(rng, n_layers=1)
        tokens = TokenSequence(rng.permutation(8), rng.random(8) * 2)
        projection = constant(rng.normal(size=(8, 16)) * 0.1)

        def loss():
            return sum_all(mul(encoder_forward(tokens, config, params).values, projection))

        assert grad_check(loss, params.named()) < 1e-4

    def test_attention_rows_are_distributions(self, rng):
        config, params = small_encoder(rng)
        x = constant(rng.normal(size=(5, 16)))
        _, attention = multi_head_attention(x, x, params.blocks[0].attention, 2, return_attention=True)
        assert len(attention) == 2
        for head in attention:
            assert head.shape == (5, 5)
            assert np.all(head >= 0)
            assert np.allclose(head.sum(axis=1), 1.0, rtol=0, atol=1e-9)


class TestDecoder:
    def test_zero_weights(self, rng):
        params = DecoderParams(parameter(np.zeros((4, 1))), parameter(np.zeros((1, 1))))
        assert np.array_equal(decoder_forward(constant(rng.normal(size=(3, 4))), params).data, np.zeros(3))

    def test_identity_head(self, rng):
        h = rng.normal(size=(5, 1))
        params = DecoderParams(parameter(np.ones((1, 1))), parameter(np.zeros((1, 1))))
        assert np.array_equal(decoder_forward(constant(h), params).data, h[:, 0])

    def test_matches_affine_oracle(self, rng):
        params = init_decoder_params(6, rng, 0.5)
        h = rng.normal(size=(4, 6))
        expected = h @ params.weight.data[:, 0] + params.bias.data[0, 0]
        assert np.allclose(decoder_forward(constant(h), params).data, expected, rtol=0, atol=1e-12)

    def test_width_mismatch(self, rng):
        with pytest.raises(ShapeError):
            decoder_forward(constant(np.ones((2, 3))), init_decoder_params(4, rng))


class TestLoss:
    def test_exact_predictions(self):
        spec = MaskSpec(np.array([0, 2]), np.array([1.0, 3.0]))
        assert masked_mse_loss(constant([1.0, 9.0, 3.0]), spec).item() == 0.0

    def test_single_error(self):
        spec = MaskSpec(np.array([1]), np.array([2.0]))
        assert masked_mse_loss(constant([7.0, 4.0, 0.0]), spec).item() == 4.0

    def test_matches_direct_sum(self, rng):
        pred = rng.normal(size=20)
        positions = np.sort(rng.choice(20, size=6, replace=False))
        originals = rng.normal(size=6)
        expected = sum((pred[p] - o) ** 2 for p, o in zip(positions, originals)) / 6
        value = masked_mse_loss(constant(pred), MaskSpec(positions, originals)).item()
        assert value == pytest.approx(expected, abs=1e-12)

    def test_unmasked_positions_get_no_gradient(self, rng):
        pred = parameter(rng.normal(size=5))
        spec = MaskSpec(np.array([1, 3]), np.zeros(2))
        with ComputationTape() as tape:
            loss = masked_mse_loss(pred, spec)
        grad = tape.gradients(loss)[id(pred)][1]
        assert np.array_equal(grad[[0, 2, 4]], np.zeros(3))
        assert np.allclose(grad[[1, 3]], pred.data[[1, 3]])

    def test_nothing_masked(self):
        with pytest.raises(ContractError):
            masked_mse_loss(constant([1.0]), MaskSpec(np.array([], dtype=np.int64), np.array([])))

    def test_mse_loss(self):
        assert mse_loss(constant([1.0, 3.0]), np.array([1.0, 1.0])).item() == 2.0
        with pytest.raises(ShapeError):
            mse_loss(constant([1.0, 3.0]), np.array([1.0]))
