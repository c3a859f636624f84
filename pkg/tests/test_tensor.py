import numpy as np
import pytest

from grnformer.core import (
    ComputationTape,
    Tensor,
    active_tape,
    add,
    backward,
    concat_cols,
    constant,
    gather_rows,
    layer_norm_rows,
    matmul,
    mean_all,
    mul,
    parameter,
    relu,
    reshape,
    scale,
    slice_cols,
    softmax_rows,
    square,
    sub,
    sum_all,
    transpose,
)
from grnformer.errors import ContractError, NumericError, ShapeError


@pytest.fixture
def rng():
    return np.random.default_rng(3)


class TestTensor:
    def test_data_is_read_only(self):
        t = constant([[1.0, 2.0]])
        with pytest.raises(ValueError):
            t.data[0, 0] = 5.0

    def test_zero_dimension_rejected(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((0, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(NumericError):
            Tensor([1.0, np.nan])

    def test_item(self):
        assert constant(2.5).item() == 2.5
        with pytest.raises(ContractError):
            constant([1.0, 2.0]).item()

    def test_assign_checks_shape(self):
        p = parameter(np.zeros((2, 2)), name="w")
        p.assign(np.ones((2, 2)))
        assert np.array_equal(p.data, np.ones((2, 2)))
        with pytest.raises(ShapeError):
            p.assign(np.ones(3))

    def test_parameter_has_gradient_slot(self):
        p = parameter(np.ones(3))
        assert p.requires_gradient
        assert np.array_equal(p.grad, np.zeros(3))
        assert constant(np.ones(3)).grad is None


class TestTape:
    def test_nothing_recorded_outside_a_tape(self):
        p = parameter(np.ones((2, 2)))
        assert active_tape() is None
        matmul(p, p)
        with ComputationTape() as tape:
            assert active_tape() is tape
        assert len(tape) == 0

    def test_constants_are_not_recorded(self):
        with ComputationTape() as tape:
            add(constant([1.0]), constant([2.0]))
        assert len(tape) == 0

    def test_loss_must_be_scalar(self):
        p = parameter(np.ones(2))
        with ComputationTape() as tape:
            out = scale(p, 2.0)
        with pytest.raises(ContractError):
            tape.gradients(out)

    def test_loss_must_come_from_tape(self):
        p = parameter(np.ones(2))
        with ComputationTape() as tape:
            sum_all(p)
        with pytest.raises(ContractError):
            tape.gradients(sum_all(p))

    def test_backward_accumulates(self):
        p = parameter(np.array([1.0, 2.0]))
        for _ in range(2):
            with ComputationTape() as tape:
                loss = sum_all(square(p))
            backward(tape, loss)
        assert np.array_equal(p.grad, 2 * 2 * p.data)
        p.zero_grad()
        assert np.array_equal(p.grad, np.zeros(2))

    def test_shared_use_sums_gradients(self):
        p = parameter(np.array([3.0]))
        with ComputationTape() as tape:
            loss = sum_all(mul(p, p))
        grads = tape.gradients(loss)
        assert grads[id(p)][1][0] == pytest.approx(6.0)


class TestPrimitiveGradients:
    def test_matmul_add_relu(self, grad_check, rng):
        a = parameter(rng.normal(size=(3, 4)))
        b = parameter(rng.normal(size=(4, 2)))
        bias = parameter(rng.normal(size=(1, 2)))
        weights = constant(rng.normal(size=(3, 2)))

        def loss():
            return sum_all(mul(relu(add(matmul(a, b), bias)), weights))

        assert grad_check(loss, {"a": a, "b": b, "bias": bias}) < 1e-4

    def test_softmax_and_transpose(self, grad_check, rng):
        a = parameter(rng.normal(size=(4, 5)))
        weights = constant(rng.normal(size=(5, 4)))

        def loss():
            return sum_all(mul(transpose(softmax_rows(a)), weights))

        assert grad_check(loss, {"a": a}) < 1e-4

    def test_layer_norm(self, grad_check, rng):
        a = parameter(rng.normal(size=(3, 6)))
        gain = parameter(rng.normal(size=(1, 6)))
        bias = parameter(rng.normal(size=(1, 6)))
        weights = constant(rng.normal(size=(3, 6)))

        def loss():
            return sum_all(mul(layer_norm_rows(a, gain, bias), weights))

        assert grad_check(loss, {"a": a, "gain": gain, "bias": bias}) < 1e-4

    def test_concat_slice_gather_reshape(self, grad_check, rng):
        a = parameter(rng.normal(size=(3, 2)))
        b = parameter(rng.normal(size=(3, 3)))
        weights = constant(rng.normal(size=(4, 3)))

        def loss():
            joined = concat_cols([a, b])
            picked = gather_rows(slice_cols(joined, 1, 4), [0, 2, 2, 1])
            flat = reshape(picked, (3, 4))
            return mean_all(square(sub(flat, transpose(weights))))

        assert grad_check(loss, {"a": a, "b": b}) < 1e-4


class TestPrimitiveValues:
    def test_softmax_rows_are_stochastic_and_stable(self):
        out = softmax_rows(constant([[1000.0, 1000.0], [0.0, -1000.0]]))
        assert np.allclose(out.data.sum(axis=1), 1.0)
        assert out.data[0, 0] == 0.5

    def test_broadcast_add(self):
        out = add(constant(np.zeros((2, 3))), constant([[1.0, 2.0, 3.0]]))
        assert np.array_equal(out.data, [[1, 2, 3], [1, 2, 3]])

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            matmul(constant(np.ones((2, 3))), constant(np.ones((2, 3))))
        with pytest.raises(ShapeError):
            add(constant(np.ones((2, 3))), constant(np.ones((3, 2))))
        with pytest.raises(ShapeError):
            slice_cols(constant(np.ones((2, 3))), 2, 5)
        with pytest.raises(ShapeError):
            gather_rows(constant(np.ones((2, 3))), [2])
        with pytest.raises(ShapeError):
            reshape(constant(np.ones((2, 3))), (4, 2))

    def test_layer_norm_rows_normalizes(self):
        x = constant([[1.0, 2.0, 3.0, 4.0]])
        out = layer_norm_rows(x, constant(np.ones((1, 4))), constant(np.zeros((1, 4))))
        assert out.data.mean() == pytest.approx(0.0, abs=1e-12)
        assert out.data.var() == pytest.approx(1.0, rel=1e-4)
