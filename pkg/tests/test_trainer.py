import numpy as np
import pytest

from grnformer.backbone.tokenize import MASK_VALUE, TokenSequence
from grnformer.config import BackboneConfig, FusionConfig
from grnformer.errors import ContractError, DataError
from grnformer.models import ExpressionMatrix
from grnformer.training import (
    GrnLookup,
    TrainState,
    batch_indices,
    forward_cell,
    init_model,
    node_values,
    pretrain,
    read_loss_log,
    structure_embeddings,
    structure_features,
    write_loss_log,
)


def param_arrays(state: TrainState):
    return {name: np.array(t.data) for name, t in state.params.named_parameters().items()}


class TestAblation:
    def test_zero_alpha_and_beta_match_the_structure_free_model(self, expression, lookup, tiny_config):
        ablated = tiny_config.model_copy(update={
            "alpha": 0.0, "steps": 20, "fusion": FusionConfig(n_heads=2, beta=0.0),
        })
        baseline = ablated.model_copy(update={"grn_mode": "none"})
        with_structure = pretrain(expression, lookup, ablated)
        without = pretrain(expression, lookup, baseline)
        np.testing.assert_allclose(with_structure.loss_history, without.loss_history, rtol=0, atol=1e-12)
        for name, value in param_arrays(without).items():
            np.testing.assert_allclose(param_arrays(with_structure)[name], value, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("mode", ["hybrid", "cell", "cell_type", "random", "none"])
    def test_every_grn_mode_trains(self, expression, lookup, tiny_config, mode):
        state = pretrain(expression, lookup, tiny_config.model_copy(update={"grn_mode": mode}))
        assert state.step == tiny_config.steps
        assert len(state.loss_history) == tiny_config.steps
        assert np.all(np.isfinite(state.loss_history))

    def test_fusion_before_last_block(self, expression, lookup, tiny_config):
        backbone = BackboneConfig(hidden_width=8, n_layers=2, n_heads=2, ff_width=16, mask_ratio=0.3,
                                  max_genes=16, fusion_point="before_last_block")
        state = pretrain(expression, lookup, tiny_config.model_copy(update={"backbone": backbone}))
        assert np.all(np.isfinite(state.loss_history))


class TestDeterminism:
    def test_repeated_runs_are_identical(self, expression, lookup, tiny_config):
        first = pretrain(expression, lookup, tiny_config)
        second = pretrain(expression, lookup, tiny_config)
        assert first.loss_history == second.loss_history
        for name, value in param_arrays(first).items():
            assert np.array_equal(param_arrays(second)[name], value)

    def test_worker_count_does_not_change_results(self, expression, lookup, tiny_config):
        serial = pretrain(expression, lookup, tiny_config)
        threaded = pretrain(expression, lookup, tiny_config.model_copy(update={"workers": 2}))
        np.testing.assert_allclose(threaded.loss_history, serial.loss_history, rtol=0, atol=1e-12)

    def test_zero_steps_leaves_initial_parameters(self, expression, lookup, tiny_config):
        state = pretrain(expression, lookup, tiny_config.model_copy(update={"steps": 0}))
        assert state.step == 0 and state.loss_history == []
        initial = init_model(tiny_config, expression.n_genes).named_parameters()
        for name, value in param_arrays(state).items():
            assert np.array_equal(initial[name].data, value)

    def test_different_seeds_differ(self, expression, lookup, tiny_config):
        a = pretrain(expression, lookup, tiny_config)
        b = pretrain(expression, lookup, tiny_config.model_copy(update={"seed": 1}))
        assert a.loss_history != b.loss_history


class TestBatches:
    @pytest.mark.parametrize("batch_size", [2, 4])
    def test_each_epoch_covers_every_cell(self, batch_size):
        n = 6
        steps = 3 if batch_size == 2 else 6
        drawn = np.concatenate([batch_indices(n, batch_size, s, seed=5) for s in range(steps)])
        for epoch in range(len(drawn) // n):
            assert sorted(drawn[epoch * n:(epoch + 1) * n]) == list(range(n))

    def test_batches_depend_only_on_seed_and_step(self):
        assert np.array_equal(batch_indices(10, 3, 7, seed=2), batch_indices(10, 3, 7, seed=2))
        assert not np.array_equal(batch_indices(10, 10, 0, seed=2), batch_indices(10, 10, 0, seed=3))


class TestStructureEmbeddings:
    def test_independent_of_mask_ratio(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        x = expression.values[0]
        a = structure_embeddings("c0", 0, x, lookup, params, tiny_config, step=3)
        other = tiny_config.model_copy(update={
            "backbone": tiny_config.backbone.model_copy(update={"mask_ratio": 0.7}),
        })
        b = structure_embeddings("c0", 0, x, lookup, params, other, step=3)
        assert np.array_equal(a.values.data, b.values.data)

    def test_no_perturbation_equals_zero_alpha(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        x = expression.values[1]
        unperturbed = structure_embeddings("c1", 1, x, lookup, params, tiny_config, step=0, perturb=False)
        zero_alpha = structure_embeddings(
            "c1", 1, x, lookup, params, tiny_config.model_copy(update={"alpha": 0.0}), step=0,
        )
        assert np.array_equal(unperturbed.values.data, zero_alpha.values.data)

    def test_none_mode_has_no_structure(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        config = tiny_config.model_copy(update={"grn_mode": "none"})
        assert structure_embeddings("c0", 0, expression.values[0], lookup, params, config, step=0) is None

    def test_node_values_carry_masked_tokens(self):
        tokens = TokenSequence(np.array([5, 2, 7]), np.array([1.5, MASK_VALUE, 0.25]))
        np.testing.assert_array_equal(node_values(tokens, 8), [0, 0, MASK_VALUE, 0, 0, 1.5, 0, 0.25])

    def test_features_follow_the_backbone_token_embedding(self, expression, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        values = expression.values[0]
        features = structure_features(params, values).data
        encoder = params.encoder
        expected = encoder.gene_embedding.data + values[:, None] * encoder.value_weight.data + encoder.value_bias.data
        np.testing.assert_allclose(features, expected, rtol=0, atol=1e-12)

    def test_masked_values_change_the_structure_view(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        x = expression.values[0]
        masked = x.copy()
        masked[3] = MASK_VALUE
        plain = structure_embeddings("c0", 0, x, lookup, params, tiny_config, step=0, perturb=False)
        hidden = structure_embeddings("c0", 0, x, lookup, params, tiny_config, step=0, perturb=False, values=masked)
        assert not np.array_equal(plain.values.data, hidden.values.data)

    def test_flag_reaches_only_graph_neighbors(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        params.ensure_perturbation_flag().assign(np.ones((1, tiny_config.backbone.hidden_width)))
        x = expression.values[0]
        flags = np.zeros(expression.n_genes)
        flags[0] = 1.0
        plain = structure_embeddings("c0", 0, x, lookup, params, tiny_config, step=0, perturb=False).values.data
        flagged = structure_embeddings(
            "c0", 0, x, lookup, params, tiny_config, step=0, perturb=False, flagged=flags,
        ).values.data
        # one layer: c0 and type A link TF0 to G2..G6 only
        np.testing.assert_array_equal(flagged[[1, 7]], plain[[1, 7]])
        assert not np.array_equal(flagged[[0, 2, 3, 4, 5, 6]], plain[[0, 2, 3, 4, 5, 6]])


class TestForwardCell:
    def test_cell_without_expression_is_skipped(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        assert forward_cell("c0", 0, np.zeros(expression.n_genes), lookup, params, tiny_config, 0) is None

    def test_masked_loss_and_attention(self, expression, lookup, tiny_config):
        params = init_model(tiny_config, expression.n_genes)
        out = forward_cell("c2", 2, expression.values[2], lookup, params, tiny_config, 0, return_attention=True)
        assert out.loss is not None and np.isfinite(out.loss.item())
        assert out.predictions.shape == (len(out.tokens),)
        assert len(out.attention) == tiny_config.fusion.n_heads


class TestLookup:
    def test_unknown_cell(self, lookup):
        with pytest.raises(DataError):
            lookup.resolve("nowhere")

    def test_alias_borrows_reference_grns(self, lookup):
        aliased = lookup.with_aliases({"q0": "c3"})
        assert aliased.resolve("q0") == lookup.resolve("c3")
        assert aliased.cell_type("q0") == "B"

    def test_randomized_keeps_owners_and_edge_counts(self, lookup):
        shuffled = lookup.randomized(seed=9)
        for cell, grn in lookup.cell_grns.items():
            assert len(shuffled.cell_grns[cell]) == len(grn)
            assert shuffled.cell_grns[cell].owner == cell
        for cell_type, grn in lookup.type_grns.items():
            assert len(shuffled.type_grns[cell_type]) == len(grn)
        assert all(e.source in (0, 1) for g in shuffled.type_grns.values() for e in g.edges)

    def test_cells_missing_from_the_lookup_fail_the_step(self, expression, type_grns, cell_types, tiny_config):
        partial = GrnLookup({}, type_grns, cell_types)
        with pytest.raises(DataError):
            pretrain(expression, partial, tiny_config)


def test_empty_dataset(lookup, tiny_config):
    empty = ExpressionMatrix(np.zeros((0, 8)), (), ("TF0", "TF1", "G2", "G3", "G4", "G5", "G6", "G7"))
    with pytest.raises(ContractError):
        pretrain(empty, lookup, tiny_config)


def test_loss_log_round_trip(tmp_path):
    history = [1.0 / 3.0, 0.1 + 0.2, 2.5e-17]
    path = tmp_path / "logs" / "loss.csv"
    write_loss_log(history, path)
    assert read_loss_log(path) == history
    assert path.read_text().splitlines()[0] == "step,loss"
