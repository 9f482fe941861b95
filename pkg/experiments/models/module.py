from collections import OrderedDict
from contextlib import contextmanager
from typing import Dict, Iterator, Sequence, Tuple

import numpy as np

from autodiff import functional as F
from autodiff.tensor import Tape, Tensor, active_tape


class Module:
    """
    Container of named float64 parameters, buffers and submodules.

    Parameters live as numpy arrays so optimizers can update them in place.
    Inside a forward pass `param(name)` returns the tape-watched tensor when
    the module is bound to the active tape, and a constant tensor otherwise.
    """

    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_buffers", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())
        object.__setattr__(self, "_bound", {})
        object.__setattr__(self, "_bound_tape", None)
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_parameter(self, name: str, value: np.ndarray) -> None:
        self._parameters[name] = np.asarray(value, dtype=np.float64)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = np.asarray(value, dtype=np.float64)

    def param(self, name: str) -> Tensor:
        if self._bound_tape is not None and self._bound_tape is active_tape():
            return self._bound[name]
        return Tensor(self._parameters[name])

    def buffer(self, name: str) -> np.ndarray:
        return self._buffers[name]

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for name, module in self._modules.items():
            yield from module.named_modules(f"{prefix}{name}.")

    def named_parameters(self) -> Iterator[Tuple[str, np.ndarray]]:
        for prefix, module in self.named_modules():
            for name, value in module._parameters.items():
                yield f"{prefix}{name}", value

    def named_buffers(self) -> Iterator[Tuple[str, np.ndarray]]:
        for prefix, module in self.named_modules():
            for name, value in module._buffers.items():
                yield f"{prefix}{name}", value

    def parameters(self) -> Dict[str, np.ndarray]:
        return OrderedDict(self.named_parameters())

    def num_parameters(self) -> int:
        return int(sum(p.size for _, p in self.named_parameters()))

    def bind(self, tape: Tape) -> Dict[str, Tensor]:
        """
        Watch every parameter on `tape`; returns qualified name -> leaf tensor.
        """
        leaves = OrderedDict()
        for prefix, module in self.named_modules():
            bound = {name: tape.watch(value) for name, value in module._parameters.items()}
            object.__setattr__(module, "_bound", bound)
            object.__setattr__(module, "_bound_tape", tape)
            leaves.update({f"{prefix}{name}": t for name, t in bound.items()})
        return leaves

    def unbind(self) -> None:
        for _, module in self.named_modules():
            object.__setattr__(module, "_bound", {})
            object.__setattr__(module, "_bound_tape", None)

    @contextmanager
    def bound(self, tape: Tape):
        try:
            yield self.bind(tape)
        finally:
            self.unbind()

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = OrderedDict(self.named_parameters())
        state.update(self.named_buffers())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for prefix, module in self.named_modules():
            for store in (module._parameters, module._buffers):
                for name, value in store.items():
                    key = f"{prefix}{name}"
                    if key not in state:
                        raise KeyError(f"Missing entry in state dict: {key}")
                    incoming = np.asarray(state[key], dtype=np.float64)
                    if incoming.shape != value.shape:
                        raise ValueError(f"Shape mismatch for {key}: {incoming.shape} vs {value.shape}")
                    value[...] = incoming

    def train(self, mode: bool = True) -> "Module":
        for _, module in self.named_modules():
            object.__setattr__(module, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def reset_parameters(self, rng: np.random.Generator) -> None:
        for _, module in self.named_modules():
            module._reset(rng)

    def _reset(self, rng: np.random.Generator) -> None:
        pass

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    """
    y = x W + b with W of shape (in_features, out_features).
    """

    def __init__(self, in_features: int, out_features: int):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.register_parameter("weight", np.zeros((in_features, out_features)))
        self.register_parameter("bias", np.zeros(out_features))

    def _reset(self, rng):
        bound = np.sqrt(3.0) / np.sqrt(self.in_features)
        self._parameters["weight"][...] = rng.uniform(-bound, bound, size=self._parameters["weight"].shape)
        self._parameters["bias"][...] = rng.uniform(-bound, bound, size=self._parameters["bias"].shape)

    def forward(self, x):
        if x.shape[-1] != self.in_features:
            raise ValueError(f"Linear expects {self.in_features} input features, got {x.shape[-1]}")
        return F.matmul(x, self.param("weight")) + self.param("bias")


class BatchNorm(Module):
    def __init__(self, features: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.register_parameter("gamma", np.ones(features))
        self.register_parameter("beta", np.zeros(features))
        self.register_buffer("running_mean", np.zeros(features))
        self.register_buffer("running_var", np.ones(features))

    def _reset(self, rng):
        self._parameters["gamma"][...] = 1.0
        self._parameters["beta"][...] = 0.0
        self._buffers["running_mean"][...] = 0.0
        self._buffers["running_var"][...] = 1.0

    def forward(self, x):
        return F.batch_norm(x, self.param("gamma"), self.param("beta"), self._buffers["running_mean"],
                            self._buffers["running_var"], self.training, self.momentum, self.eps)


class MLP(Module):
    """
    Shared per-row MLP; LeakyReLU(0.2) after every layer, optionally except the last.

    Args:
        dims: Layer widths [in, hidden..., out].
        activate_last: Apply the activation after the last layer.
        norm_last: Batch-normalize the last layer before its activation.
        norm_all: Batch-normalize every layer.
    """

    def __init__(self, dims: Sequence[int], activate_last: bool = False, norm_last: bool = False,
                 norm_all: bool = False):
        super().__init__()
        if len(dims) < 2:
            raise ValueError(f"MLP needs at least two widths, got {list(dims)}")
        self.dims = list(dims)
        self.activate_last = activate_last
        self.depth = len(dims) - 1
        self.norm_layers = set(range(self.depth)) if norm_all else ({self.depth - 1} if norm_last else set())
        for i in range(self.depth):
            setattr(self, f"layer{i}", Linear(dims[i], dims[i + 1]))
            if i in self.norm_layers:
                setattr(self, f"norm{i}", BatchNorm(dims[i + 1]))

    def forward(self, x):
        for i in range(self.depth):
            x = getattr(self, f"layer{i}")(x)
            if i in self.norm_layers:
                x = getattr(self, f"norm{i}")(x)
            if i < self.depth - 1 or self.activate_last:
                x = F.leaky_relu(x, 0.2)
        return x

    def layers(self):
        return [getattr(self, f"layer{i}") for i in range(self.depth)]
