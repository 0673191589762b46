"""Dense MLP forward/backward passes, Adam, density helpers, gradient checking.

Everything runs in 64-bit floats on plain numpy arrays.  Weight matrices have
shape (fan_out, fan_in), biases shape (fan_out,); batches are row-major
(batch, dim).  Hidden layers use ReLU; the output head is either linear or
tanh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

# Posterior log-std is clamped to this range so log q cannot diverge.
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0


class DimensionError(ValueError):
    """Shapes of inputs do not match the declared network architecture."""


class NumericError(FloatingPointError):
    """A non-finite value appeared where finite numbers are required."""


@dataclass
class MlpParams:
    """Weights and biases of a fully connected network.

    layer_sizes = [in, h1, ..., out]; weights[i] has shape
    (layer_sizes[i+1], layer_sizes[i]) and biases[i] shape (layer_sizes[i+1],).
    head is "linear" or "tanh" and applies to the last layer only.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    head: str = "linear"

    def param_list(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "MlpParams":
        return MlpParams(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.head,
        )


@dataclass
class MlpTape:
    """Intermediates cached by one forward pass, consumed by the backward pass."""

    inputs: list[np.ndarray]          # activation entering each layer
    pre_activations: list[np.ndarray]  # z_i = inputs[i] @ W_i^T + b_i
    output: np.ndarray
    batch: int


def mlp_init(layer_sizes: Sequence[int], rng: np.random.Generator,
             head: str = "linear") -> MlpParams:
    """Uniform(+-1/sqrt(fan_in)) initialization, seeded via rng."""
    if head not in ("linear", "tanh"):
        raise ValueError(f"unknown output head: {head}")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=(fan_out,)))
    return MlpParams(list(layer_sizes), weights, biases, head)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpTape]:
    """Forward pass over a (batch, in_dim) input; returns output and tape."""
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise DimensionError(
            f"input shape {x.shape} does not match input dim {params.layer_sizes[0]}")
    inputs, pre = [], []
    a = x
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(a)
        z = a @ w.T + b
        pre.append(z)
        if i < n - 1:
            a = np.maximum(z, 0.0)
        elif params.head == "tanh":
            a = np.tanh(z)
        else:
            a = z
    return a, MlpTape(inputs, pre, a, x.shape[0])


def mlp_backward(params: MlpParams, tape: MlpTape,
                 output_grad: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate output_grad; returns (param_grads, input_grad).

    param_grads interleaves [dW0, db0, dW1, db1, ...] matching param_list().
    """
    if output_grad.shape != tape.output.shape:
        raise DimensionError(
            f"output_grad shape {output_grad.shape} != output {tape.output.shape}")
    if len(tape.pre_activations) != len(params.weights):
        raise DimensionError("tape does not match params (layer count)")
    n = len(params.weights)
    if params.head == "tanh":
        dz = output_grad * (1.0 - tape.output ** 2)
    else:
        dz = output_grad
    grads: list[np.ndarray] = [None] * (2 * n)  # type: ignore[list-item]
    for i in range(n - 1, -1, -1):
        grads[2 * i] = dz.T @ tape.inputs[i]
        grads[2 * i + 1] = dz.sum(axis=0)
        da = dz @ params.weights[i]
        if i > 0:
            dz = da * (tape.pre_activations[i - 1] > 0.0)
    return grads, da


@dataclass
class AdamState:
    """First/second-moment buffers and step counter for one parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], lr: float = 3e-4,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(state: AdamState, params: Sequence[np.ndarray],
              grads: Sequence[np.ndarray], maximize: bool = False) -> None:
    """One in-place Adam update with bias correction.

    With maximize=True the parameters are moved along +grad (gradient ascent).
    """
    if len(params) != len(state.m) or len(grads) != len(params):
        raise DimensionError("params/grads do not match the Adam state")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient entries; update aborted")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1 ** state.t
    bc2 = 1.0 - b2 ** state.t
    sign = 1.0 if maximize else -1.0
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p += sign * state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


def gaussian_log_prob(z: np.ndarray, mean: np.ndarray,
                      log_std: np.ndarray) -> np.ndarray:
    """Factored-Gaussian log density, summed over the last axis.

    Accepts (dim,) vectors or (batch, dim) arrays; log_std is used as given
    (callers clamp it to [LOG_STD_MIN, LOG_STD_MAX] before the call).
    """
    z = np.asarray(z, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    if z.shape != mean.shape or z.shape != log_std.shape:
        raise DimensionError(
            f"shape mismatch: z {z.shape}, mean {mean.shape}, log_std {log_std.shape}")
    var = np.exp(2.0 * log_std)
    terms = -0.5 * LOG_2PI - log_std - (z - mean) ** 2 / (2.0 * var)
    return terms.sum(axis=-1)


def categorical_log_prob(logits: np.ndarray, index) -> np.ndarray:
    """log softmax(logits)[index], computed with max-subtraction stability.

    logits: (k,) with scalar index, or (batch, k) with (batch,) indices.
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        if not 0 <= int(index) < logits.shape[0]:
            raise IndexError(f"class index {index} out of range for {logits.shape[0]}")
        m = logits.max()
        return logits[int(index)] - (m + np.log(np.exp(logits - m).sum()))
    idx = np.asarray(index, dtype=np.int64)
    if np.any(idx < 0) or np.any(idx >= logits.shape[1]):
        raise IndexError("class index out of range")
    m = logits.max(axis=1, keepdims=True)
    logz = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    return logits[np.arange(logits.shape[0]), idx] - logz


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class GradCheckReport:
    max_rel_errors: list[float]
    tolerance: float
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        self.passed = all(e < self.tolerance for e in self.max_rel_errors)

    @property
    def worst(self) -> float:
        return max(self.max_rel_errors) if self.max_rel_errors else 0.0


def check_gradients(loss_fn: Callable[[Sequence[np.ndarray]], float],
                    params: Sequence[np.ndarray],
                    analytic_grads: Sequence[np.ndarray],
                    step: float = 1e-5,
                    tolerance: float = 1e-4) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    loss_fn must be deterministic in params.  Returns the max relative error
    per parameter block; never raises on failure (report-only).
    """
    params = [np.asarray(p, dtype=np.float64) for p in params]
    errors: list[float] = []
    for block, grad in zip(params, analytic_grads):
        worst = 0.0
        it = np.nditer(block, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = block[ix]
            block[ix] = orig + step
            up = loss_fn(params)
            block[ix] = orig - step
            down = loss_fn(params)
            block[ix] = orig
            fd = (up - down) / (2.0 * step)
            an = float(grad[ix])
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
            worst = max(worst, rel)
        errors.append(worst)
    return GradCheckReport(errors, tolerance)
