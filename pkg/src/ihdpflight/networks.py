"""Small tanh-hidden-layer approximators with explicit gradients and Adam.

All parameters of one network live in a single flat float64 vector
(layout: W1 row-major, b1, W2, b2) so the hot paths can run as compiled
kernels; W1/b1/W2/b2 are exposed as reshaped views.  Inputs are taken in
natural units, no normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

HIDDEN = 7

ACT_ABS = 0
ACT_SCALED_TANH = 1
ACT_IDENTITY = 2

_ACT_CODES = {"abs": ACT_ABS, "scaled_tanh": ACT_SCALED_TANH, "identity": ACT_IDENTITY}


@njit(cache=True)
def act_value(act, scale, z):
    if act == ACT_ABS:
        return abs(z)
    elif act == ACT_SCALED_TANH:
        return scale * math.tanh(z)
    return z


@njit(cache=True)
def act_deriv(act, scale, z):
    if act == ACT_ABS:
        if z > 0.0:
            return 1.0
        elif z < 0.0:
            return -1.0
        return 0.0
    elif act == ACT_SCALED_TANH:
        t = math.tanh(z)
        return scale * (1.0 - t * t)
    return 1.0


@njit(cache=True)
def mlp_forward(theta, n_in, act, scale, x):
    """Scalar output and output pre-activation: (y, z_out)."""
    b1_off = HIDDEN * n_in
    w2_off = b1_off + HIDDEN
    z2 = theta[w2_off + HIDDEN]
    for j in range(HIDDEN):
        s = theta[b1_off + j]
        base = j * n_in
        for i in range(n_in):
            s += theta[base + i] * x[i]
        z2 += theta[w2_off + j] * math.tanh(s)
    return act_value(act, scale, z2), z2


@njit(cache=True)
def mlp_forward_cached(theta, n_in, act, scale, x, z_hidden):
    """Like mlp_forward but also fills z_hidden with hidden pre-activations."""
    b1_off = HIDDEN * n_in
    w2_off = b1_off + HIDDEN
    z2 = theta[w2_off + HIDDEN]
    for j in range(HIDDEN):
        s = theta[b1_off + j]
        base = j * n_in
        for i in range(n_in):
            s += theta[base + i] * x[i]
        z_hidden[j] = s
        z2 += theta[w2_off + j] * math.tanh(s)
    return act_value(act, scale, z2), z2


@njit(cache=True)
def mlp_grad_params(theta, n_in, act, scale, x, upstream):
    """Gradient of upstream * y wrt theta, same flat layout as theta."""
    b1_off = HIDDEN * n_in
    w2_off = b1_off + HIDDEN
    b2_off = w2_off + HIDDEN
    grad = np.empty(theta.shape[0])
    th = np.empty(HIDDEN)
    z2 = theta[b2_off]
    for j in range(HIDDEN):
        s = theta[b1_off + j]
        base = j * n_in
        for i in range(n_in):
            s += theta[base + i] * x[i]
        th[j] = math.tanh(s)
        z2 += theta[w2_off + j] * th[j]
    dz2 = upstream * act_deriv(act, scale, z2)
    grad[b2_off] = dz2
    for j in range(HIDDEN):
        grad[w2_off + j] = dz2 * th[j]
        dh = dz2 * theta[w2_off + j] * (1.0 - th[j] * th[j])
        grad[b1_off + j] = dh
        base = j * n_in
        for i in range(n_in):
            grad[base + i] = dh * x[i]
    return grad


@njit(cache=True)
def mlp_grad_input(theta, n_in, act, scale, x):
    """Gradient of y wrt the input vector."""
    b1_off = HIDDEN * n_in
    w2_off = b1_off + HIDDEN
    gin = np.zeros(n_in)
    th = np.empty(HIDDEN)
    z2 = theta[w2_off + HIDDEN]
    for j in range(HIDDEN):
        s = theta[b1_off + j]
        base = j * n_in
        for i in range(n_in):
            s += theta[base + i] * x[i]
        th[j] = math.tanh(s)
        z2 += theta[w2_off + j] * th[j]
    dz2 = act_deriv(act, scale, z2)
    for j in range(HIDDEN):
        dh = dz2 * theta[w2_off + j] * (1.0 - th[j] * th[j])
        base = j * n_in
        for i in range(n_in):
            gin[i] += dh * theta[base + i]
    return gin


@njit(cache=True)
def adam_step(theta, grad, m, v, step, lr, beta1, beta2, eps):
    """In-place Adam update with bias correction; step is a length-1 int64 counter."""
    t = step[0] + 1
    step[0] = t
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for i in range(theta.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i]
        theta[i] -= lr * (m[i] / bc1) / (math.sqrt(v[i] / bc2) + eps)


@dataclass
class AdamConfig:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr < 0.0:
            raise ValueError("lr must be >= 0")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must be in [0, 1)")
        if self.eps <= 0.0:
            raise ValueError("eps must be positive")


class ForwardCache(NamedTuple):
    z_hidden: np.ndarray
    z_out: float


class Approximator:
    """n_in -> 7 tanh -> 1, with a selectable output activation.

    activation: "abs" (|z|, subgradient sign(z) with sign(0)=0),
    "scaled_tanh" (scale * tanh(z)), or "identity".
    """

    def __init__(self, n_in: int, activation: str = "identity", scale: float = 1.0,
                 theta: np.ndarray | None = None):
        if n_in < 1:
            raise ValueError("n_in must be >= 1")
        if activation not in _ACT_CODES:
            raise ValueError(f"unknown activation {activation!r}")
        if scale <= 0.0:
            raise ValueError("scale must be positive")
        self.n_in = int(n_in)
        self.activation = activation
        self.scale = float(scale)
        self._act = _ACT_CODES[activation]
        n = self.n_params
        if theta is None:
            self.theta = np.zeros(n)
        else:
            theta = np.asarray(theta, dtype=np.float64)
            if theta.shape != (n,):
                raise ValueError(f"theta must have shape ({n},)")
            self.theta = theta.copy()
        self.m = np.zeros(n)
        self.v = np.zeros(n)
        self.adam_t = np.zeros(1, dtype=np.int64)

    @classmethod
    def random(cls, n_in: int, activation: str, scale: float,
               rng: np.random.Generator, init_range: float = 0.1) -> "Approximator":
        """Uniform [-init_range, init_range] init; init_range=0 gives an all-zero net."""
        n = HIDDEN * n_in + 2 * HIDDEN + 1
        theta = rng.uniform(-init_range, init_range, size=n)
        return cls(n_in, activation, scale, theta=theta)

    @property
    def n_params(self) -> int:
        return HIDDEN * self.n_in + 2 * HIDDEN + 1

    # --- flat-vector views ---
    @property
    def W1(self) -> np.ndarray:
        return self.theta[: HIDDEN * self.n_in].reshape(HIDDEN, self.n_in)

    @property
    def b1(self) -> np.ndarray:
        off = HIDDEN * self.n_in
        return self.theta[off: off + HIDDEN]

    @property
    def W2(self) -> np.ndarray:
        off = HIDDEN * self.n_in + HIDDEN
        return self.theta[off: off + HIDDEN].reshape(1, HIDDEN)

    @property
    def b2(self) -> np.ndarray:
        return self.theta[-1:]

    def _coerce(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.shape != (self.n_in,):
            raise ValueError(f"expected input of shape ({self.n_in},), got {x.shape}")
        return x

    def forward(self, x) -> tuple[float, ForwardCache]:
        x = self._coerce(x)
        z_hidden = np.empty(HIDDEN)
        y, z_out = mlp_forward_cached(self.theta, self.n_in, self._act, self.scale, x, z_hidden)
        return y, ForwardCache(z_hidden, z_out)

    def __call__(self, x) -> float:
        x = self._coerce(x)
        y, _ = mlp_forward(self.theta, self.n_in, self._act, self.scale, x)
        return y

    def grad_params(self, x, upstream: float = 1.0) -> np.ndarray:
        x = self._coerce(x)
        return mlp_grad_params(self.theta, self.n_in, self._act, self.scale, x, float(upstream))

    def grad_input(self, x) -> np.ndarray:
        x = self._coerce(x)
        return mlp_grad_input(self.theta, self.n_in, self._act, self.scale, x)

    def adam_update(self, grad, cfg: AdamConfig) -> None:
        grad = np.ascontiguousarray(grad, dtype=np.float64)
        if grad.shape != self.theta.shape:
            raise ValueError("gradient shape mismatch")
        adam_step(self.theta, grad, self.m, self.v, self.adam_t,
                  cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    def copy(self) -> "Approximator":
        dup = Approximator(self.n_in, self.activation, self.scale, theta=self.theta)
        dup.m = self.m.copy()
        dup.v = self.v.copy()
        dup.adam_t = self.adam_t.copy()
        return dup


def soft_update(target: Approximator, source: Approximator, tau: float) -> Approximator:
    """target.theta <- tau * source.theta + (1 - tau) * target.theta (in place)."""
    if not (0.0 < tau <= 1.0):
        raise ValueError("tau must be in (0, 1]")
    if (target.n_in, target.activation, target.scale) != (source.n_in, source.activation, source.scale):
        raise ValueError("target and source topologies differ")
    target.theta *= 1.0 - tau
    target.theta += tau * source.theta
    return target
