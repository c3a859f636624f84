"""Dense float64 tensors with a reverse-mode computation tape.

Operations record themselves on the tape that is active in the current
thread (``with ComputationTape() as tape: ...``). Outside a tape nothing is
recorded, which is how evaluation code runs without building gradients.
"""

import threading
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from grnformer.errors import ContractError, NumericError, ShapeError

ArrayLike = Union[np.ndarray, Sequence, float, int]
BackwardRule = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]

_local = threading.local()


class Tensor:
    """Immutable float64 array with an optional gradient accumulator.

    Attributes:
        data: read-only row-major values
        requires_gradient: whether this tensor is a trainable leaf
        grad: same-shape accumulator, present only for trainable leaves
        name: optional label used in checkpoints and error messages
    """

    __slots__ = ("data", "requires_gradient", "grad", "name", "_tracked")

    def __init__(self, values: ArrayLike, requires_gradient: bool = False, name: Optional[str] = None):
        data = np.array(values, dtype=np.float64)
        _validate(data, name or "tensor")
        data.flags.writeable = False
        self.data = data
        self.requires_gradient = requires_gradient
        self.grad = np.zeros_like(data) if requires_gradient else None
        self.name = name
        self._tracked = requires_gradient

    @classmethod
    def _from_op(cls, data: np.ndarray, op: str) -> "Tensor":
        out = cls.__new__(cls)
        data = np.asarray(data, dtype=np.float64)
        _validate(data, op)
        data.flags.writeable = False
        out.data = data
        out.requires_gradient = False
        out.grad = None
        out.name = None
        out._tracked = False
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def values(self) -> np.ndarray:
        return self.data

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, got shape {self.shape}")
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def assign(self, values: np.ndarray) -> None:
        """Replace the stored values (optimizer updates, checkpoint loads)."""
        data = np.array(values, dtype=np.float64)
        if data.shape != self.data.shape:
            raise ShapeError(f"cannot assign {data.shape} into {self.data.shape}", data.shape, self.data.shape)
        _validate(data, self.name or "assign")
        data.flags.writeable = False
        self.data = data

    def zero_grad(self) -> None:
        if self.requires_gradient:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} requires_gradient={self.requires_gradient}>"

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, _as_tensor(other))

    def __radd__(self, other: "Tensor") -> "Tensor":
        return add(_as_tensor(other), self)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, _as_tensor(other))

    def __mul__(self, other: "Tensor") -> "Tensor":
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other: "Tensor") -> "Tensor":
        return self.__mul__(other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)


def _validate(data: np.ndarray, label: str) -> None:
    if data.ndim > 0 and 0 in data.shape:
        raise ShapeError(f"{label}: tensor dimensions must be positive, got {data.shape}", data.shape)
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{label}: produced non-finite values")


def _as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def constant(values: ArrayLike, name: Optional[str] = None) -> Tensor:
    """Wrap values as a tensor that never receives a gradient."""
    return Tensor(values, requires_gradient=False, name=name)


def parameter(values: ArrayLike, name: Optional[str] = None) -> Tensor:
    """Wrap values as a trainable leaf."""
    return Tensor(values, requires_gradient=True, name=name)


@dataclass
class TapeEntry:
    """One recorded primitive: its output, inputs and local backward rule."""
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardRule


class ComputationTape:
    """Ordered record of primitive operations, confined to one thread."""

    def __init__(self):
        self.entries: List[TapeEntry] = []
        self._outputs: set = set()

    def __enter__(self) -> "ComputationTape":
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _local.stack.pop()

    def __len__(self) -> int:
        return len(self.entries)

    def record(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardRule) -> None:
        self.entries.append(TapeEntry(op, output, inputs, backward))
        self._outputs.add(id(output))

    def gradients(self, loss: Tensor) -> Dict[int, Tuple[Tensor, np.ndarray]]:
        """Replay the tape backwards from a scalar loss.

        Returns a map from ``id(leaf)`` to ``(leaf, dloss/dleaf)`` for every
        trainable leaf reached. Leaf accumulators are not touched.
        """
        if loss.shape != ():
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if id(loss) not in self._outputs:
            raise ContractError("loss was not produced on this tape")

        pending: Dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
        leaves: Dict[int, Tuple[Tensor, np.ndarray]] = {}
        for entry in reversed(self.entries):
            upstream = pending.pop(id(entry.output), None)
            if upstream is None:
                continue
            for tensor, local in zip(entry.inputs, entry.backward(upstream)):
                if local is None or not tensor._tracked:
                    continue
                key = id(tensor)
                if tensor.requires_gradient:
                    if key in leaves:
                        leaves[key] = (tensor, leaves[key][1] + local)
                    else:
                        leaves[key] = (tensor, local)
                elif key in pending:
                    pending[key] = pending[key] + local
                else:
                    pending[key] = local
        return leaves


def active_tape() -> Optional[ComputationTape]:
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


def backward(tape: ComputationTape, loss: Tensor) -> None:
    """Accumulate dloss/dparam into every trainable leaf reached from ``loss``."""
    for tensor, grad in tape.gradients(loss).values():
        tensor.grad = tensor.grad + grad


def _emit(op: str, data: np.ndarray, inputs: Tuple[Tensor, ...], rule: BackwardRule) -> Tensor:
    out = Tensor._from_op(data, op)
    if any(t._tracked for t in inputs):
        tape = active_tape()
        if tape is not None:
            out._tracked = True
            tape.record(op, out, inputs, rule)
    return out


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> Tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast", a.shape, b.shape) from None


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree for {a.shape} @ {b.shape}", a.shape, b.shape)
    return _emit(
        "matmul",
        a.data @ b.data,
        (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g),
    )


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "add")
    return _emit(
        "add",
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "sub")
    return _emit(
        "sub",
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape(a, b, "mul")
    return _emit(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return _emit("scale", a.data * factor, (a,), lambda g: (g * factor,))


def square(a: Tensor) -> Tensor:
    return _emit("square", a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return _emit("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sum_all(a: Tensor) -> Tensor:
    return _emit("sum", np.sum(a.data), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    return _emit("mean", np.sum(a.data) / n, (a,), lambda g: (np.full(a.shape, g / n),))


def transpose(a: Tensor) -> Tensor:
    return _emit("transpose", a.data.T, (a,), lambda g: (g.T,))


def reshape(a: Tensor, shape: Tuple[int, ...]) -> Tensor:
    original = a.shape
    try:
        data = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot view {original} as {shape}", original, shape) from None
    return _emit("reshape", data, (a,), lambda g: (g.reshape(original),))


def softmax_rows(a: Tensor) -> Tensor:
    """Row-wise softmax stabilized by subtracting each row's maximum."""
    if a.data.ndim != 2:
        raise ShapeError(f"softmax_rows needs a matrix, got {a.shape}", a.shape)
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    return _emit(
        "softmax_rows",
        y,
        (a,),
        lambda g: (y * (g - np.sum(g * y, axis=1, keepdims=True)),),
    )


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1 or any(p.data.ndim != 2 for p in parts):
        raise ShapeError("concat_cols: row counts disagree", *[p.shape for p in parts])
    widths = [p.shape[1] for p in parts]
    bounds = np.cumsum([0] + widths)

    def rule(g: np.ndarray):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return _emit("concat_cols", np.concatenate([p.data for p in parts], axis=1), tuple(parts), rule)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= a.shape[1]:
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for {a.shape}", a.shape)

    def rule(g: np.ndarray):
        full = np.zeros(a.shape)
        full[:, start:stop] = g
        return (full,)

    return _emit("slice_cols", a.data[:, start:stop], (a,), rule)


def gather_rows(a: Tensor, index: Sequence[int]) -> Tensor:
    """Select rows by index; repeated indices accumulate on the way back."""
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1 or index.size == 0:
        raise ShapeError("gather_rows: index must be a non-empty vector", index.shape)
    if index.min() < 0 or index.max() >= a.shape[0]:
        raise ShapeError(f"gather_rows: index out of range for {a.shape}", a.shape)

    def rule(g: np.ndarray):
        full = np.zeros(a.shape)
        np.add.at(full, index, g)
        return (full,)

    return _emit("gather_rows", a.data[index], (a,), rule)


def layer_norm_rows(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row to zero mean / unit variance, then apply gain and bias."""
    if a.data.ndim != 2 or gain.shape != (1, a.shape[1]) or bias.shape != (1, a.shape[1]):
        raise ShapeError("layer_norm_rows: gain/bias must be (1, width)", a.shape, gain.shape, bias.shape)
    mu = a.data.mean(axis=1, keepdims=True)
    centered = a.data - mu
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=1, keepdims=True) + eps)
    normed = centered * inv_std

    def rule(g: np.ndarray):
        d_normed = g * gain.data
        d_a = inv_std * (
            d_normed
            - d_normed.mean(axis=1, keepdims=True)
            - normed * (d_normed * normed).mean(axis=1, keepdims=True)
        )
        return d_a, np.sum(g * normed, axis=0, keepdims=True), np.sum(g, axis=0, keepdims=True)

    return _emit("layer_norm_rows", normed * gain.data + bias.data, (a, gain, bias), rule)


__all__ = [
    "Tensor",
    "TapeEntry",
    "ComputationTape",
    "active_tape",
    "backward",
    "constant",
    "parameter",
    "matmul",
    "add",
    "sub",
    "mul",
    "scale",
    "square",
    "relu",
    "sum_all",
    "mean_all",
    "transpose",
    "reshape",
    "softmax_rows",
    "concat_cols",
    "slice_cols",
    "gather_rows",
    "layer_norm_rows",
]
