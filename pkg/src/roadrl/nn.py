"""Dense networks with hand-written forward/backward passes, Adam, and soft updates.

Parameters are stored as float32 (what goes to disk, bit-exactly) while all
arithmetic runs in float64. Mutating weights through the provided methods
keeps the internal float64 working copies in sync; anyone poking the float32
arrays directly must call invalidate_cache().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import CacheError, NumericFault, ShapeError

try:
    # Every gemm in this package is tiny (batch 32); pthread fan-out in BLAS
    # costs more than it buys, by about 3x.
    from threadpoolctl import threadpool_limits

    threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover
    pass

LEAKY_SLOPE = 0.3
ACTIVATIONS = ("leaky_relu", "tanh", "linear")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "leaky_relu":
        return np.where(z >= 0.0, z, LEAKY_SLOPE * z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _act_grad(name: str, z: np.ndarray) -> np.ndarray:
    if name == "leaky_relu":
        return np.where(z >= 0.0, 1.0, LEAKY_SLOPE)
    if name == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


@dataclass
class ForwardCache:
    version: int
    single: bool
    inputs: list[np.ndarray]  # float64 layer inputs
    zs: list[np.ndarray]      # float64 pre-activations


class Mlp:
    """Fully-connected net; layer l maps sizes[l] -> sizes[l+1] through activations[l]."""

    def __init__(
        self,
        sizes,
        activations,
        rng: np.random.Generator | None = None,
        init_std: float = 0.05,
    ):
        sizes = [int(s) for s in sizes]
        activations = list(activations)
        if len(sizes) < 2:
            raise ShapeError("need at least input and output size")
        if len(activations) != len(sizes) - 1:
            raise ShapeError(f"{len(sizes) - 1} layers but {len(activations)} activations")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ShapeError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = activations
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for n_in, n_out in zip(sizes, sizes[1:]):
            if rng is None:
                w = np.zeros((n_in, n_out), dtype=np.float32)
            else:
                w = rng.normal(0.0, init_std, size=(n_in, n_out)).astype(np.float32)
            self.weights.append(w)
            self.biases.append(np.zeros(n_out, dtype=np.float32))
        self._version = 0
        self._w64: list[np.ndarray] = []
        self._b64: list[np.ndarray] = []
        self._sync64()

    # -- parameter plumbing ------------------------------------------------

    def params(self) -> list[np.ndarray]:
        """Flat list [W0, b0, W1, b1, ...] of the float32 storage arrays."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def params64(self) -> list[np.ndarray]:
        """Float64 working copies aligned with params(); read-only by convention."""
        out = []
        for w, b in zip(self._w64, self._b64):
            out.append(w)
            out.append(b)
        return out

    def _sync64(self):
        self._w64 = [w.astype(np.float64) for w in self.weights]
        self._b64 = [b.astype(np.float64) for b in self.biases]

    def invalidate_cache(self):
        """Refresh float64 working copies after in-place float32 mutation."""
        self._version += 1
        self._sync64()

    def _arith(self):
        return self._w64, self._b64

    def copy(self) -> Mlp:
        dup = Mlp(self.sizes, self.activations)
        for i in range(len(self.weights)):
            dup.weights[i] = self.weights[i].copy()
            dup.biases[i] = self.biases[i].copy()
        dup.invalidate_cache()
        return dup

    # -- forward / backward --------------------------------------------------

    def forward(self, x) -> tuple[np.ndarray, ForwardCache]:
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeError(f"input shape {x.shape} does not feed width {self.sizes[0]}")
        w64, b64 = self._arith()
        inputs, zs = [], []
        h = x
        for w, b, act in zip(w64, b64, self.activations):
            inputs.append(h)
            z = h @ w + b
            zs.append(z)
            h = _act(act, z)
        cache = ForwardCache(self._version, single, inputs, zs)
        return (h[0] if single else h), cache

    def backward(self, cache: ForwardCache, grad_out) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients ([dW0, db0, ...], d_input) for d(loss)/d(output) = grad_out."""
        if cache.version != self._version:
            raise CacheError("cache predates a parameter update")
        g = np.asarray(grad_out, dtype=np.float64)
        if cache.single:
            g = g[None, :]
        if g.shape != cache.zs[-1].shape:
            raise ShapeError(f"output grad shape {g.shape} != {cache.zs[-1].shape}")
        w64, _ = self._arith()
        grads: list[np.ndarray] = [None] * (2 * len(w64))
        delta = g
        for l in range(len(w64) - 1, -1, -1):
            dz = delta * _act_grad(self.activations[l], cache.zs[l])
            grads[2 * l] = cache.inputs[l].T @ dz
            grads[2 * l + 1] = dz.sum(axis=0)
            delta = dz @ w64[l].T
        return grads, (delta[0] if cache.single else delta)

    def backward_input(self, cache: ForwardCache, grad_out) -> np.ndarray:
        """Input gradient only; skips the weight/bias gradient gemms."""
        if cache.version != self._version:
            raise CacheError("cache predates a parameter update")
        g = np.asarray(grad_out, dtype=np.float64)
        if cache.single:
            g = g[None, :]
        w64, _ = self._arith()
        delta = g
        for l in range(len(w64) - 1, -1, -1):
            dz = delta * _act_grad(self.activations[l], cache.zs[l])
            delta = dz @ w64[l].T
        return delta[0] if cache.single else delta

    def apply_gradients(self, opt: AdamState, grads) -> None:
        adam_step(opt, self.params(), grads, shadow64=self.params64())
        self._version += 1  # float64 copies updated in the kernel


# -- optimizer ------------------------------------------------------------------

class AdamState:
    def __init__(self, params, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = [np.zeros(p.shape) for p in params]
        self.v = [np.zeros(p.shape) for p in params]


@njit(cache=True, fastmath=True)
def _adam_kernel(p, p64, g, m, v, lr, beta1, beta2, eps, c1, c2):
    """Fused single pass; math in float64, parameters stored back as float32.

    p64 mirrors the float32 values exactly so later passes skip the upcast.
    """
    for i in range(p.size):
        gi = g[i]
        mi = beta1 * m[i] + (1.0 - beta1) * gi
        vi = beta2 * v[i] + (1.0 - beta2) * gi * gi
        m[i] = mi
        v[i] = vi
        p32 = np.float32(p[i] - lr * (mi / c1) / (np.sqrt(vi / c2) + eps))
        p[i] = p32
        p64[i] = np.float64(p32)


@njit(cache=True)
def _mix_kernel(t, t64, l, rate):
    for i in range(t.size):
        t32 = np.float32(rate * np.float64(l[i]) + (1.0 - rate) * np.float64(t[i]))
        t[i] = t32
        t64[i] = np.float64(t32)


def adam_step(state: AdamState, params, grads, shadow64=None) -> None:
    """Bias-corrected Adam update, in place on the float32 parameter arrays."""
    if len(params) != len(state.m):
        raise ShapeError("parameter count does not match optimizer state")
    for p, g in zip(params, grads):
        if p.shape != np.shape(g):
            raise ShapeError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")
    flat = [np.ascontiguousarray(g, dtype=np.float64).reshape(-1) for g in grads]
    for g in flat:
        if not np.isfinite(g).all():
            raise NumericFault("non-finite gradient")
    if shadow64 is None:
        shadow64 = [p.astype(np.float64) for p in params]  # discarded
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, p64, g, m, v in zip(params, shadow64, flat, state.m, state.v):
        _adam_kernel(
            p.reshape(-1), p64.reshape(-1), g, m.reshape(-1), v.reshape(-1),
            state.lr, state.beta1, state.beta2, state.eps, c1, c2,
        )


def soft_update(target: Mlp, live: Mlp, rate: float = 0.01) -> None:
    """target <- rate * live + (1 - rate) * target, elementwise."""
    if target.sizes != live.sizes:
        raise ShapeError(f"target sizes {target.sizes} != live sizes {live.sizes}")
    for tp, t64, lp in zip(target.params(), target.params64(), live.params()):
        _mix_kernel(tp.reshape(-1), t64.reshape(-1), lp.reshape(-1), float(rate))
    target._version += 1  # float64 copies updated in the kernel


def gradient_check(net: Mlp, x, loss_grad, h: float = 1e-5):
    """Max relative error of backward() against central differences.

    Perturbs the float32 storage and measures the realized step, so the check
    is exact even where h is not representable. loss is sum(loss_grad * y).
    """
    g = np.asarray(loss_grad, dtype=np.float64)

    def loss() -> float:
        y, _ = net.forward(x)
        return float(np.sum(g * y))

    y, cache = net.forward(x)
    grads, _ = net.backward(cache, g)
    worst = 0.0
    for p, analytic in zip(net.params(), grads):
        flat = p.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = np.float32(float(orig) + h)
            hi = float(flat[i])
            net.invalidate_cache()
            f_hi = loss()
            flat[i] = np.float32(float(orig) - h)
            lo = float(flat[i])
            net.invalidate_cache()
            f_lo = loss()
            flat[i] = orig
            net.invalidate_cache()
            numeric = (f_hi - f_lo) / (hi - lo)
            a = float(analytic.reshape(-1)[i])
            scale = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / scale)
    return worst
