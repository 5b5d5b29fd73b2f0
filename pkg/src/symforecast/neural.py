"""Stacked LSTM with a dense head, trained one sample at a time.

Conventions
-----------
* Gate order inside the fused matrices is forget, input, output, update.
* Every gate has two bias vectors, one added to the input projection and one
  to the recurrent projection, so a layer with ``n`` cells and ``d`` inputs has
  ``4 * ((d + n) * n + 2 * n)`` parameters.
* All parameters of a stack live in one flat float64 vector ``theta``; the
  per-layer matrices are views into it. A gradient has the same layout, which
  keeps the optimiser a handful of vectorised operations.
* Forward and backward passes work layer by layer over a whole lag window,
  which lets the input projections and weight gradients be single matmuls.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

HEAD_KINDS = ("linear", "softmax")
XENT_CLAMP = 1e-12


def sigmoid(x):
    # exact identity, stable for large |x|
    return 0.5 + 0.5 * np.tanh(0.5 * x)


def softmax(z):
    e = np.exp(z - np.max(z))
    return e / e.sum()


@dataclass
class LayerParams:
    n: int
    d: int
    Wx: np.ndarray  # (4n, d)
    Wh: np.ndarray  # (4n, n)
    bx: np.ndarray  # (4n,)
    bh: np.ndarray  # (4n,)

    def _gate(self, arr, g):
        return arr[g * self.n : (g + 1) * self.n]

    W_fx = property(lambda s: s._gate(s.Wx, 0))
    W_ix = property(lambda s: s._gate(s.Wx, 1))
    W_ox = property(lambda s: s._gate(s.Wx, 2))
    W_x = property(lambda s: s._gate(s.Wx, 3))
    W_fh = property(lambda s: s._gate(s.Wh, 0))
    W_ih = property(lambda s: s._gate(s.Wh, 1))
    W_oh = property(lambda s: s._gate(s.Wh, 2))
    W_h = property(lambda s: s._gate(s.Wh, 3))
    b_f = property(lambda s: s._gate(s.bx, 0))
    b_i = property(lambda s: s._gate(s.bx, 1))
    b_o = property(lambda s: s._gate(s.bx, 2))
    b = property(lambda s: s._gate(s.bx, 3))
    r_f = property(lambda s: s._gate(s.bh, 0))
    r_i = property(lambda s: s._gate(s.bh, 1))
    r_o = property(lambda s: s._gate(s.bh, 2))
    r = property(lambda s: s._gate(s.bh, 3))


class LstmStackParams:
    """Weights of ``len(hidden)`` stacked LSTM layers plus a dense output head.

    ``head="linear"`` is an identity-activation dense layer (``output_dim``
    values); ``head="softmax"`` turns the dense output into probabilities.
    """

    def __init__(self, input_dim: int, hidden: Sequence[int], output_dim: int = 1,
                 head: str = "linear", theta: np.ndarray | None = None):
        if head not in HEAD_KINDS:
            raise ValueError(f"head must be one of {HEAD_KINDS}")
        if input_dim < 1 or output_dim < 1 or not hidden or min(hidden) < 1:
            raise ValueError("all dimensions must be positive")
        self.input_dim = int(input_dim)
        self.hidden = tuple(int(h) for h in hidden)
        self.output_dim = int(output_dim)
        self.head = head
        size = self.count(self.input_dim, self.hidden, self.output_dim)
        if theta is None:
            theta = np.zeros(size)
        elif theta.shape != (size,):
            raise ValueError(f"theta must have shape ({size},), got {theta.shape}")
        self.theta = theta
        self.layers: list[LayerParams] = []
        pos = 0

        def take(shape):
            nonlocal pos
            k = int(np.prod(shape))
            view = theta[pos : pos + k].reshape(shape)
            pos += k
            return view

        d = self.input_dim
        for n in self.hidden:
            self.layers.append(LayerParams(n, d, take((4 * n, d)), take((4 * n, n)),
                                           take((4 * n,)), take((4 * n,))))
            d = n
        self.head_W = take((self.output_dim, d))
        self.head_b = take((self.output_dim,))

    @staticmethod
    def count(input_dim: int, hidden: Sequence[int], output_dim: int) -> int:
        total, d = 0, input_dim
        for n in hidden:
            total += 4 * ((d + n) * n + 2 * n)
            d = n
        return total + output_dim * d + output_dim

    def config(self) -> dict:
        return {"input_dim": self.input_dim, "hidden": list(self.hidden),
                "output_dim": self.output_dim, "head": self.head}

    def like(self, theta: np.ndarray | None = None) -> "LstmStackParams":
        """Same architecture over ``theta`` (zeros by default), e.g. for gradients."""
        return LstmStackParams(self.input_dim, self.hidden, self.output_dim, self.head,
                               np.zeros_like(self.theta) if theta is None else theta)

    def copy(self) -> "LstmStackParams":
        return self.like(self.theta.copy())

    def zero_states(self):
        return [(np.zeros(n), np.zeros(n)) for n in self.hidden]

    def named_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for j, layer in enumerate(self.layers):
            for name in ("Wx", "Wh", "bx", "bh"):
                out[f"layer{j}.{name}"] = getattr(layer, name)
        out["head.W"] = self.head_W
        out["head.b"] = self.head_b
        return out

    def save(self, path) -> None:
        """Write an ``.npz`` holding every named array plus the architecture as JSON."""
        arrays = {k: np.asarray(v) for k, v in self.named_arrays().items()}
        np.savez(Path(path), __config__=np.array(json.dumps(self.config())), **arrays)

    @classmethod
    def load(cls, path) -> "LstmStackParams":
        with np.load(Path(path)) as data:
            cfg = json.loads(str(data["__config__"]))
            params = cls(cfg["input_dim"], cfg["hidden"], cfg["output_dim"], cfg["head"])
            for name, view in params.named_arrays().items():
                view[...] = data[name]
        return params


def parameter_count(params: LstmStackParams) -> int:
    return int(params.theta.size)


# ---------------------------------------------------------------------------
# initialisation


def _orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _xavier(shape, rng):
    fan_out, fan_in = shape
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(input_dim: int, hidden: Sequence[int], output_dim: int = 1,
                head: str = "linear", seed: int = 0) -> LstmStackParams:
    """Orthogonal recurrent blocks, Xavier-uniform input and head weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = LstmStackParams(input_dim, hidden, output_dim, head)
    for layer in params.layers:
        for g in range(4):
            rows = slice(g * layer.n, (g + 1) * layer.n)
            layer.Wx[rows] = _xavier((layer.n, layer.d), rng)
            layer.Wh[rows] = _orthogonal(layer.n, rng)
    params.head_W[...] = _xavier(params.head_W.shape, rng)
    return params


# ---------------------------------------------------------------------------
# forward


def cell_forward(layer: LayerParams, state, x):
    """One time step of one layer. Returns ``((h, c), gates)`` with gates ``(f, i, o, u)``."""
    h, c = state
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.d,) or h.shape != (layer.n,) or c.shape != (layer.n,):
        raise ValueError("dimension mismatch in cell_forward")
    n = layer.n
    z = layer.Wx @ x + layer.bx + layer.Wh @ h + layer.bh
    f = sigmoid(z[:n])
    i = sigmoid(z[n : 2 * n])
    o = sigmoid(z[2 * n : 3 * n])
    u = np.tanh(z[3 * n :])
    c_new = f * c + i * u
    h_new = o * np.tanh(c_new)
    return (h_new, c_new), (f, i, o, u)


def head_forward(params: LstmStackParams, h):
    logits = params.head_W @ h + params.head_b
    if params.head == "softmax":
        return softmax(logits)
    return logits


def stack_forward(params: LstmStackParams, states, x):
    """One time step through all layers. Returns ``(new_states, head_output)``."""
    if len(states) != len(params.layers):
        raise ValueError("one state per layer required")
    new_states = []
    inp = x
    for layer, state in zip(params.layers, states):
        state, _ = cell_forward(layer, state, inp)
        new_states.append(state)
        inp = state[0]
    return new_states, head_forward(params, inp)


@dataclass
class _LayerCache:
    X: np.ndarray       # (l, d) layer inputs (after dropout of the layer below)
    Hprev: np.ndarray   # (l, n)
    Cprev: np.ndarray   # (l, n)
    G: np.ndarray       # (l, 4n) activated gates f, i, o, u
    C: np.ndarray       # (l, n)
    TC: np.ndarray      # (l, n) tanh(C)


@dataclass
class WindowCache:
    layers: list
    masks: list          # per-layer dropout mask on the layer output, or None
    top: np.ndarray      # head input at the last step
    output: np.ndarray


def _layer_sequence(layer: LayerParams, X, h, c):
    steps, n = X.shape[0], layer.n
    Zx = X @ layer.Wx.T + (layer.bx + layer.bh)
    Hprev = np.empty((steps, n)); Cprev = np.empty((steps, n))
    G = np.empty((steps, 4 * n)); C = np.empty((steps, n)); TC = np.empty((steps, n))
    Wh = layer.Wh
    for t in range(steps):
        Hprev[t] = h
        Cprev[t] = c
        z = Zx[t] + Wh @ h
        g = G[t]
        g[: 3 * n] = sigmoid(z[: 3 * n])
        g[3 * n :] = np.tanh(z[3 * n :])
        c = g[:n] * c + g[n : 2 * n] * g[3 * n :]
        tc = np.tanh(c)
        h = g[2 * n : 3 * n] * tc
        C[t] = c
        TC[t] = tc
    H = G[:, 2 * n : 3 * n] * TC
    return H, (h, c), _LayerCache(X, Hprev, Cprev, G, C, TC)


def window_forward(params: LstmStackParams, init_states, inputs, dropout_rate: float = 0.0,
                   rng: np.random.Generator | None = None):
    """Run the stack over a lag window, keeping only the last head output.

    With ``dropout_rate > 0`` every layer's hidden output is multiplied by an
    inverted-dropout mask drawn once for the window; recurrent connections are
    left untouched.

    Returns ``(final_states, output, cache)``.
    """
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] == 0:
        raise ValueError("window must contain at least one step")
    if X.shape[1] != params.input_dim:
        raise ValueError(f"expected input dim {params.input_dim}, got {X.shape[1]}")
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must lie in [0, 1)")
    caches, masks, finals = [], [], []
    for layer, (h, c) in zip(params.layers, init_states):
        H, final, cache = _layer_sequence(layer, X, h, c)
        caches.append(cache)
        finals.append(final)
        if dropout_rate > 0.0:
            if rng is None:
                raise ValueError("dropout needs an rng")
            mask = (rng.random(layer.n) >= dropout_rate) / (1.0 - dropout_rate)
            H = H * mask
        else:
            mask = None
        masks.append(mask)
        X = H
    top = X[-1]
    output = head_forward(params, top)
    return finals, output, WindowCache(caches, masks, top, output)


# ---------------------------------------------------------------------------
# losses


def loss_mse(pred, target) -> float:
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.sum(diff * diff))


def mse_grad(pred, target) -> np.ndarray:
    return 2.0 * (np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64))


def loss_xent(probs, target: int) -> float:
    return float(-np.log(max(float(probs[target]), XENT_CLAMP)))


def xent_grad(probs, target: int) -> np.ndarray:
    """Gradient of :func:`loss_xent` with respect to the probabilities."""
    g = np.zeros_like(np.asarray(probs, dtype=np.float64))
    p = float(probs[target])
    if p > XENT_CLAMP:
        g[target] = -1.0 / p
    return g


# ---------------------------------------------------------------------------
# backward


def backward_window(params: LstmStackParams, cache: WindowCache, d_output,
                    grads: LstmStackParams | None = None) -> LstmStackParams:
    """Exact gradient of a last-step loss with respect to every parameter.

    ``d_output`` is the loss gradient with respect to the head output (the
    probabilities for a softmax head). Gradients are accumulated into
    ``grads`` when given, otherwise into a fresh zero gradient. Gradients with
    respect to the window's initial states are not propagated.
    """
    if grads is None:
        grads = params.like()
    g_out = np.asarray(d_output, dtype=np.float64).reshape(params.output_dim)
    if params.head == "softmax":
        p = cache.output
        g_logits = p * (g_out - p @ g_out)
    else:
        g_logits = g_out
    grads.head_W += np.outer(g_logits, cache.top)
    grads.head_b += g_logits

    steps = cache.layers[0].X.shape[0]
    dH = np.zeros((steps, params.hidden[-1]))
    dH[-1] = params.head_W.T @ g_logits
    for j in range(len(params.layers) - 1, -1, -1):
        layer, lc, glayer = params.layers[j], cache.layers[j], grads.layers[j]
        if cache.masks[j] is not None:
            dH = dH * cache.masks[j]
        n = layer.n
        dZ = np.empty((steps, 4 * n))
        dh_next = np.zeros(n)
        dc_next = np.zeros(n)
        WhT = layer.Wh.T
        for t in range(steps - 1, -1, -1):
            g = lc.G[t]
            f, i, o, u = g[:n], g[n : 2 * n], g[2 * n : 3 * n], g[3 * n :]
            tc = lc.TC[t]
            dh = dH[t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dZ[t]
            dz[:n] = dc * lc.Cprev[t] * f * (1.0 - f)
            dz[n : 2 * n] = dc * u * i * (1.0 - i)
            dz[2 * n : 3 * n] = dh * tc * o * (1.0 - o)
            dz[3 * n :] = dc * i * (1.0 - u * u)
            dh_next = WhT @ dz
            dc_next = dc * f
        glayer.Wx += dZ.T @ lc.X
        glayer.Wh += dZ.T @ lc.Hprev
        db = dZ.sum(axis=0)
        glayer.bx += db
        glayer.bh += db
        if j > 0:
            dH = dZ @ layer.Wx
    return grads


# ---------------------------------------------------------------------------
# optimiser


def adam_step(theta, grad, m, v, step: int, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8):
    """Bias-corrected Adam update; ``step`` counts from 1. Returns new ``(theta, m, v)``."""
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return theta - lr * m_hat / (np.sqrt(v_hat) + eps), m, v


class Adam:
    """In-place Adam on a flat parameter vector."""

    def __init__(self, size: int, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.step_count = 0
        self._buf = np.empty(size)

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        self.step_count += 1
        b1, b2 = self.beta1, self.beta2
        self.m *= b1
        self.m += (1.0 - b1) * grad
        self.v *= b2
        np.multiply(grad, grad, out=self._buf)
        self._buf *= 1.0 - b2
        self.v += self._buf
        lr_t = self.lr / (1.0 - b1**self.step_count)
        v_scale = 1.0 / (1.0 - b2**self.step_count)
        np.multiply(self.v, v_scale, out=self._buf)
        np.sqrt(self._buf, out=self._buf)
        self._buf += self.eps
        np.divide(self.m, self._buf, out=self._buf)
        self._buf *= lr_t
        theta -= self._buf

    def state(self):
        return self.m.copy(), self.v.copy(), self.step_count
