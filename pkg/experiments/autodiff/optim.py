from typing import Dict, Mapping

import numpy as np


class Optimizer:
    """
    Updates a dict of named parameter arrays in place from named gradients.
    """

    def __init__(self, params: Mapping[str, np.ndarray], lr: float):
        if lr <= 0:
            raise ValueError(f"Learning rate must be positive, got {lr}")
        self.params = dict(params)
        self.lr = lr
        self.steps = 0

    def step(self, grads: Mapping[str, object]) -> None:
        self.steps += 1
        for name, grad in grads.items():
            if name not in self.params:
                raise KeyError(f"Gradient for unknown parameter: {name}")
            grad = np.asarray(getattr(grad, "data", grad), dtype=np.float64)
            self._update(name, self.params[name], grad)

    def _update(self, name: str, param: np.ndarray, grad: np.ndarray) -> None:
        raise NotImplementedError

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {"steps": np.array(self.steps)}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        self.steps = int(state["steps"])


class SGD(Optimizer):
    def __init__(self, params, lr: float = 0.001, momentum: float = 0.0, weight_decay: float = 0.0):
        super().__init__(params, lr)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {name: np.zeros_like(p) for name, p in self.params.items()}

    def _update(self, name, param, grad):
        if self.weight_decay:
            grad = grad + self.weight_decay * param
        if self.momentum:
            self.velocity[name] = self.momentum * self.velocity[name] + grad
            grad = self.velocity[name]
        param -= self.lr * grad

    def state_dict(self):
        state = super().state_dict()
        state.update({f"velocity/{k}": v for k, v in self.velocity.items()})
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        for name in self.velocity:
            self.velocity[name] = np.array(state[f"velocity/{name}"])


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-4, betas=(0.5, 0.999), eps: float = 1e-8):
        super().__init__(params, lr)
        self.betas = tuple(betas)
        self.eps = eps
        self.m = {name: np.zeros_like(p) for name, p in self.params.items()}
        self.v = {name: np.zeros_like(p) for name, p in self.params.items()}
        self.t = {name: 0 for name in self.params}

    def _update(self, name, param, grad):
        beta1, beta2 = self.betas
        self.t[name] += 1
        self.m[name] = beta1 * self.m[name] + (1.0 - beta1) * grad
        self.v[name] = beta2 * self.v[name] + (1.0 - beta2) * grad * grad
        m_hat = self.m[name] / (1.0 - beta1 ** self.t[name])
        v_hat = self.v[name] / (1.0 - beta2 ** self.t[name])
        param -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self):
        state = super().state_dict()
        for name in self.params:
            state[f"m/{name}"] = self.m[name]
            state[f"v/{name}"] = self.v[name]
            state[f"t/{name}"] = np.array(self.t[name])
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        for name in self.params:
            self.m[name] = np.array(state[f"m/{name}"])
            self.v[name] = np.array(state[f"v/{name}"])
            self.t[name] = int(state[f"t/{name}"])
