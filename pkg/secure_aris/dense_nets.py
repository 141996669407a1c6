"""
Dense Networks
Small fully connected networks with hand-written backpropagation, used as the actor and
critic of the deployment learner. Gradients are exact, so they can be checked against
central finite differences.
"""
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from rich.console import Console

from .config import *
from .errors import SecureArisError
from .persistence import load_checkpoint, save_checkpoint

console = Console()

ACTIVATIONS = ("tanh", "linear")


def _activate(kind: str, z: np.ndarray) -> np.ndarray:
    return np.tanh(z) if kind == "tanh" else z


def _activate_grad(kind: str, out: np.ndarray) -> np.ndarray:
    # derivative written in terms of the activation output
    return 1.0 - out ** 2 if kind == "tanh" else np.ones_like(out)


class DenseLayer:
    """Affine map x @ W + b followed by an element-wise activation"""

    def __init__(self, input_dim: int, output_dim: int, activation: str,
                 rng: np.random.Generator):
        if activation not in ACTIVATIONS:
            raise SecureArisError(f"unknown activation '{activation}'")
        limit = np.sqrt(6.0 / (input_dim + output_dim))
        self.W = rng.uniform(-limit, limit, (input_dim, output_dim))
        self.b = np.zeros(output_dim)
        self.activation = activation
        self._x: Optional[np.ndarray] = None
        self._out: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        self._out = _activate(self.activation, x @ self.W + self.b)
        return self._out

    def backward(self, grad_out: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (dW, db, dx) for the cached forward pass; grads are summed over rows"""
        if self._x is None:
            raise SecureArisError("backward called before forward")
        dz = grad_out * _activate_grad(self.activation, self._out)
        return self._x.T @ dz, dz.sum(axis=0), dz @ self.W.T


class DenseNet:
    """
    Multi-layer perceptron
    tanh hidden layers; the output layer is either linear (critic) or tanh scaled by
    output_scale (actor), so actor outputs can never leave [-output_scale, output_scale].
    """

    def __init__(self, sizes: Sequence[int], output_activation: str = "linear",
                 output_scale: float = 1.0, seed: int = 0):
        if len(sizes) < 2:
            raise SecureArisError("a network needs at least input and output sizes")
        rng = np.random.default_rng(seed)
        self.sizes = tuple(int(s) for s in sizes)
        self.output_scale = float(output_scale)
        self.layers: List[DenseLayer] = []
        for i, (d_in, d_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            last = i == len(self.sizes) - 2
            self.layers.append(DenseLayer(d_in, d_out, output_activation if last else "tanh", rng))
        if output_activation == "linear":
            # small final layer keeps initial Q estimates near zero
            self.layers[-1].W *= 0.1

    @property
    def output_activation(self) -> str:
        return self.layers[-1].activation

    def forward(self, x: np.ndarray) -> np.ndarray:
        out = np.atleast_2d(np.asarray(x, dtype=float))
        for layer in self.layers:
            out = layer.forward(out)
        return out * self.output_scale

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """Backpropagate dL/d(output) through the last forward pass

        Returns parameter gradients in the order of parameters() and dL/d(input).
        """
        grad = np.atleast_2d(grad_out) * self.output_scale
        grads: List[np.ndarray] = []
        for layer in reversed(self.layers):
            dW, db, grad = layer.backward(grad)
            grads[:0] = [dW, db]
        return grads, grad

    def parameters(self) -> List[np.ndarray]:
        params = []
        for layer in self.layers:
            params.extend([layer.W, layer.b])
        return params

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.reshape(-1) for p in self.parameters()])

    def set_flat(self, flat: np.ndarray):
        flat = np.asarray(flat, dtype=float)
        if flat.size != self.n_params:
            raise SecureArisError(f"expected {self.n_params} parameters, got {flat.size}")
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def copy(self) -> "DenseNet":
        twin = DenseNet(self.sizes, self.output_activation, self.output_scale)
        twin.set_flat(self.get_flat())
        return twin

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.get_flat())))

    def save(self, path: Union[str, Path]):
        header = np.array([self.output_scale, ACTIVATIONS.index(self.output_activation)]
                          + list(self.sizes), dtype=float)
        save_checkpoint(path, [header] + self.parameters())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DenseNet":
        arrays = load_checkpoint(path)
        header = arrays[0]
        sizes = [int(v) for v in header[2:]]
        net = cls(sizes, ACTIVATIONS[int(header[1])], float(header[0]))
        params = net.parameters()
        if len(arrays) - 1 != len(params):
            raise SecureArisError(f"{path} holds {len(arrays) - 1} arrays, expected {len(params)}")
        for p, a in zip(params, arrays[1:]):
            if p.shape != a.shape:
                raise SecureArisError(f"{path}: parameter shape {a.shape} != {p.shape}")
            p[...] = a
        return net


class AdamOptimizer:
    """Adam on the parameter list of one network; step() descends the given gradients"""

    def __init__(self, net: DenseNet, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.net = net
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in net.parameters()]
        self.v = [np.zeros_like(p) for p in net.parameters()]

    def step(self, grads: List[np.ndarray]):
        self.t += 1
        for p, g, m, v in zip(self.net.parameters(), grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g ** 2
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            p -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def finite_difference(f: Callable[[np.ndarray], float], x: np.ndarray,
                      step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector"""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for i in range(x.size):
        old = x[i]
        x[i] = old + step
        up = f(x)
        x[i] = old - step
        down = f(x)
        x[i] = old
        grad[i] = (up - down) / (2 * step)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a) + np.abs(b), floor)))
