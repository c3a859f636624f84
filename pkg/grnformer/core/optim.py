"""First-order optimizers over named parameter tensors."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional

import numpy as np

from grnformer.core.tensor import Tensor
from grnformer.errors import ContractError, ShapeError


@dataclass
class OptimizerState:
    """Learning rate, per-parameter moments and the update counter.

    Moments are created lazily as all-zero arrays the first time a
    parameter is updated.
    """
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    kind: str = "adam"
    momentum: float = 0.0
    step_count: int = 0
    first_moments: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moments: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer kind: {self.kind}")

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Flatten moments for checkpointing."""
        arrays = {f"m/{k}": v for k, v in self.first_moments.items()}
        arrays.update({f"v/{k}": v for k, v in self.second_moments.items()})
        return arrays

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        self.first_moments = {k[2:]: np.array(v) for k, v in arrays.items() if k.startswith("m/")}
        self.second_moments = {k[2:]: np.array(v) for k, v in arrays.items() if k.startswith("v/")}


def optimizer_step(
    state: OptimizerState,
    params: Mapping[str, Tensor],
    grads: Optional[Mapping[str, np.ndarray]] = None,
) -> None:
    """Apply one update to every parameter, then zero the gradients.

    Args:
        state: optimizer state, mutated in place
        params: parameter tensors keyed by name
        grads: gradients keyed by name; defaults to each parameter's ``grad``

    Raises:
        ContractError: a parameter has no gradient
    """
    resolved: Dict[str, np.ndarray] = {}
    for name, param in params.items():
        grad = grads.get(name) if grads is not None else param.grad
        if grad is None:
            raise ContractError(f"parameter '{name}' has no gradient")
        if grad.shape != param.shape:
            raise ShapeError(f"gradient for '{name}' has shape {grad.shape}", grad.shape, param.shape)
        resolved[name] = grad

    state.step_count += 1
    t = state.step_count
    for name, param in params.items():
        grad = resolved[name]
        if state.kind == "adam":
            m = state.first_moments.get(name)
            v = state.second_moments.get(name)
            if m is None:
                m = np.zeros_like(param.data)
                v = np.zeros_like(param.data)
            m = state.beta1 * m + (1.0 - state.beta1) * grad
            v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
            state.first_moments[name] = m
            state.second_moments[name] = v
            m_hat = m / (1.0 - state.beta1 ** t)
            v_hat = v / (1.0 - state.beta2 ** t)
            update = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        else:
            velocity = state.first_moments.get(name)
            if velocity is None:
                velocity = np.zeros_like(param.data)
            velocity = state.momentum * velocity + grad
            state.first_moments[name] = velocity
            update = state.learning_rate * velocity
        param.assign(param.data - update)
        param.zero_grad()


__all__ = ["OptimizerState", "optimizer_step"]
