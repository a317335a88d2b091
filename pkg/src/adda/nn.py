"""From-scratch 1-D network primitives with hand-derived gradients.

Feature maps are numpy float64 arrays of shape (..., length, channels):
position-major, channel-minor, with any number of leading batch axes. The
single-sample form (length, channels) is the canonical one; batched calls go
through the same code paths. All internal arithmetic is double precision.

Layers are described by immutable `LayerSpec` values and parameterized by
`LayerParams`; `layer_forward` / `layer_backward` are pure functions apart
from the forward cache they exchange. Gradients are derived per layer kind,
not by a general autodiff graph.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class LayerKind(enum.Enum):
    CONV1D = "conv1d"
    MAXPOOL1D = "maxpool1d"
    RELU = "relu"
    DENSE = "dense"


@dataclass(frozen=True)
class LayerSpec:
    """Shape contract for one layer; only the fields for its kind are set."""

    kind: LayerKind
    kernel: int = 0
    stride: int = 0
    in_channels: int = 0
    out_channels: int = 0
    in_dim: int = 0
    out_dim: int = 0

    def out_length(self, in_length: int) -> int:
        """Output length for conv/pool on an input of `in_length` positions."""
        if self.kind not in (LayerKind.CONV1D, LayerKind.MAXPOOL1D):
            raise ValueError(f"{self.kind.value} has no windowed output length")
        if self.kernel > in_length:
            raise ValueError(
                f"kernel {self.kernel} exceeds input length {in_length}"
            )
        return (in_length - self.kernel) // self.stride + 1

    @property
    def has_params(self) -> bool:
        return self.kind in (LayerKind.CONV1D, LayerKind.DENSE)


def conv1d(kernel: int, stride: int, in_channels: int, out_channels: int) -> LayerSpec:
    """Valid (no padding) cross-correlation layer with per-channel bias."""
    _require_positive(kernel=kernel, stride=stride,
                      in_channels=in_channels, out_channels=out_channels)
    return LayerSpec(LayerKind.CONV1D, kernel=kernel, stride=stride,
                     in_channels=in_channels, out_channels=out_channels)


def maxpool1d(kernel: int, stride: int, channels: int) -> LayerSpec:
    """Channel-wise windowed maximum."""
    _require_positive(kernel=kernel, stride=stride, channels=channels)
    return LayerSpec(LayerKind.MAXPOOL1D, kernel=kernel, stride=stride,
                     in_channels=channels, out_channels=channels)


def relu() -> LayerSpec:
    return LayerSpec(LayerKind.RELU)


def dense(in_dim: int, out_dim: int) -> LayerSpec:
    """Affine layer on the row-major flattened input feature map."""
    _require_positive(in_dim=in_dim, out_dim=out_dim)
    return LayerSpec(LayerKind.DENSE, in_dim=in_dim, out_dim=out_dim)


def _require_positive(**named: int) -> None:
    for name, value in named.items():
        if not isinstance(value, (int, np.integer)) or value <= 0:
            raise ValueError(f"{name} must be a positive integer, got {value!r}")


@dataclass
class LayerParams:
    """Trainable arrays for one layer; both None for pool/relu."""

    weights: np.ndarray | None = None
    biases: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        return [a for a in (self.weights, self.biases) if a is not None]

    def copy(self) -> "LayerParams":
        return LayerParams(
            None if self.weights is None else self.weights.copy(),
            None if self.biases is None else self.biases.copy(),
        )


@dataclass
class GradientBundle:
    """Per-array gradients, shape-congruent with the owning LayerParams."""

    weights: np.ndarray | None = None
    biases: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        return [a for a in (self.weights, self.biases) if a is not None]


def param_shapes(spec: LayerSpec) -> tuple[tuple[int, ...], tuple[int, ...]] | None:
    """(weights shape, biases shape) for a parameterized spec, else None."""
    if spec.kind is LayerKind.CONV1D:
        return (spec.kernel, spec.in_channels, spec.out_channels), (spec.out_channels,)
    if spec.kind is LayerKind.DENSE:
        return (spec.in_dim, spec.out_dim), (spec.out_dim,)
    return None


def init_params(spec: LayerSpec, rng: np.random.Generator) -> LayerParams:
    """He-scaled normal weights (variance 2/fan_in), zero biases."""
    shapes = param_shapes(spec)
    if shapes is None:
        return LayerParams()
    w_shape, b_shape = shapes
    fan_in = spec.kernel * spec.in_channels if spec.kind is LayerKind.CONV1D else spec.in_dim
    weights = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=w_shape)
    return LayerParams(weights, np.zeros(b_shape))


def _check_params(spec: LayerSpec, params: LayerParams) -> None:
    shapes = param_shapes(spec)
    if shapes is None:
        if params.weights is not None or params.biases is not None:
            raise ValueError(f"{spec.kind.value} takes no parameters")
        return
    w_shape, b_shape = shapes
    if params.weights is None or params.weights.shape != w_shape:
        raise ValueError(
            f"{spec.kind.value} weights must have shape {w_shape}, "
            f"got {None if params.weights is None else params.weights.shape}"
        )
    if params.biases is None or params.biases.shape != b_shape:
        raise ValueError(
            f"{spec.kind.value} biases must have shape {b_shape}, "
            f"got {None if params.biases is None else params.biases.shape}"
        )


@dataclass
class ForwardCache:
    """Everything layer_backward needs from the matching forward call."""

    spec: LayerSpec
    in_shape: tuple[int, ...]
    out_shape: tuple[int, ...]
    x: np.ndarray | None = None        # conv/relu/dense: the forward input
    argmax: np.ndarray | None = None   # maxpool: absolute winning positions
    cols: np.ndarray | None = None     # conv: im2col matrix reused by backward


# --- forward / backward -----------------------------------------------------

def layer_forward(spec: LayerSpec, params: LayerParams,
                  x: np.ndarray) -> tuple[np.ndarray, ForwardCache]:
    """Run one layer on a feature map of shape (..., length, channels).

    Returns the output feature map and the cache consumed by layer_backward.
    Rejects inputs whose trailing shape does not match the spec.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ValueError(f"feature map must have shape (..., L, C), got {x.shape}")
    _check_params(spec, params)

    if spec.kind is LayerKind.CONV1D:
        y, cols = _conv_forward(spec, params, x)
        return y, ForwardCache(spec, x.shape, y.shape, x=x, cols=cols)
    elif spec.kind is LayerKind.MAXPOOL1D:
        y, argmax = _pool_forward(spec, x)
        return y, ForwardCache(spec, x.shape, y.shape, argmax=argmax)
    elif spec.kind is LayerKind.RELU:
        y = np.maximum(x, 0.0)
    elif spec.kind is LayerKind.DENSE:
        y = _dense_forward(spec, params, x)
    else:  # pragma: no cover
        raise ValueError(f"unknown layer kind {spec.kind!r}")
    return y, ForwardCache(spec, x.shape, y.shape, x=x)


def layer_backward(spec: LayerSpec, params: LayerParams, cache: ForwardCache,
                   upstream: np.ndarray,
                   need_input_grad: bool = True) -> tuple[np.ndarray, GradientBundle]:
    """Propagate an upstream gradient through one layer.

    `upstream` must match the forward output shape exactly; parameter
    gradients are summed over all leading batch axes. When the caller does
    not consume the input gradient (bottom of a stack), pass
    `need_input_grad=False` to skip its computation; an empty array is
    returned in its place.
    """
    if cache.spec != spec:
        raise ValueError("cache does not belong to this layer spec")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != cache.out_shape:
        raise ValueError(
            f"upstream shape {upstream.shape} does not match forward output "
            f"{cache.out_shape}"
        )

    if spec.kind is LayerKind.CONV1D:
        return _conv_backward(spec, params, cache, upstream, need_input_grad)
    if spec.kind is LayerKind.MAXPOOL1D:
        if not need_input_grad:
            return np.empty(0), GradientBundle()
        return _pool_backward(spec, cache, upstream), GradientBundle()
    if spec.kind is LayerKind.RELU:
        if not need_input_grad:
            return np.empty(0), GradientBundle()
        return upstream * (cache.x > 0.0), GradientBundle()
    if spec.kind is LayerKind.DENSE:
        return _dense_backward(spec, params, cache, upstream, need_input_grad)
    raise ValueError(f"unknown layer kind {spec.kind!r}")  # pragma: no cover


def _windows(x: np.ndarray, kernel: int, stride: int) -> np.ndarray:
    """Strided view of shape (..., out_length, channels, kernel)."""
    if x.shape[-2] < kernel:
        raise ValueError(f"kernel {kernel} exceeds input length {x.shape[-2]}")
    win = sliding_window_view(x, kernel, axis=-2)
    return win[..., ::stride, :, :]


def _conv_forward(spec: LayerSpec, params: LayerParams,
                  x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.shape[-1] != spec.in_channels:
        raise ValueError(
            f"conv1d expects {spec.in_channels} input channels, got {x.shape[-1]}"
        )
    win = _windows(x, spec.kernel, spec.stride)       # (..., Lo, C, k)
    lead = win.shape[:-3]
    lo = win.shape[-3]
    # im2col: rows ordered (tap, channel) to match the (k, C, O) weight layout
    cols = np.swapaxes(win, -1, -2).reshape(-1, spec.kernel * spec.in_channels)
    w2 = params.weights.reshape(spec.kernel * spec.in_channels, spec.out_channels)
    y = cols @ w2
    y += params.biases
    return y.reshape(*lead, lo, spec.out_channels), cols


def _conv_backward(spec: LayerSpec, params: LayerParams, cache: ForwardCache,
                   upstream: np.ndarray,
                   need_input_grad: bool) -> tuple[np.ndarray, GradientBundle]:
    k, s = spec.kernel, spec.stride
    kc = k * spec.in_channels
    lo = cache.out_shape[-2]
    cols = cache.cols
    g2 = np.ascontiguousarray(upstream).reshape(-1, spec.out_channels)

    d_weights = (cols.T @ g2).reshape(k, spec.in_channels, spec.out_channels)
    d_biases = g2.sum(axis=0)
    if not need_input_grad:
        return np.empty(0), GradientBundle(d_weights, d_biases)

    # route each output gradient back to the k taps of its window
    gcols = (g2 @ params.weights.reshape(kc, spec.out_channels).T)
    gcols = gcols.reshape(*cache.out_shape[:-1], k, spec.in_channels)
    dx = np.zeros(cache.in_shape, dtype=np.float64)
    span = (lo - 1) * s + 1
    for t in range(k):
        dx[..., t:t + span:s, :] += gcols[..., t, :]
    return dx, GradientBundle(d_weights, d_biases)


def _pool_forward(spec: LayerSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if x.shape[-1] != spec.in_channels:
        raise ValueError(
            f"maxpool1d expects {spec.in_channels} channels, got {x.shape[-1]}"
        )
    win = _windows(x, spec.kernel, spec.stride)       # (..., Lo, C, k)
    within = win.argmax(axis=-1)                      # index inside each window
    lo = win.shape[-3]
    starts = (np.arange(lo) * spec.stride)[:, None]   # (Lo, 1) broadcast over C
    argmax = within + starts
    y = np.take_along_axis(win, within[..., None], axis=-1)[..., 0]
    return y, argmax


def _pool_backward(spec: LayerSpec, cache: ForwardCache,
                   upstream: np.ndarray) -> np.ndarray:
    argmax = cache.argmax
    in_len = cache.in_shape[-2]
    channels = cache.in_shape[-1]
    flat_lead = int(np.prod(cache.in_shape[:-2], dtype=np.int64))
    dx = np.zeros((flat_lead, in_len, channels), dtype=np.float64)
    am = argmax.reshape(flat_lead, -1, channels)
    g = upstream.reshape(flat_lead, -1, channels)
    n_idx = np.arange(flat_lead)[:, None, None]
    c_idx = np.arange(channels)[None, None, :]
    if spec.stride >= spec.kernel:
        # non-overlapping windows: winning positions are unique per (n, c)
        dx[n_idx, am, c_idx] = g
    else:
        np.add.at(dx, (n_idx, am, c_idx), g)
    return dx.reshape(cache.in_shape)


def _dense_forward(spec: LayerSpec, params: LayerParams, x: np.ndarray) -> np.ndarray:
    if x.shape[-2] * x.shape[-1] != spec.in_dim:
        raise ValueError(
            f"dense expects a flattened input of {spec.in_dim} values, "
            f"got shape {x.shape[-2:]}"
        )
    lead = x.shape[:-2]
    xf = x.reshape(-1, spec.in_dim)
    y = xf @ params.weights + params.biases
    return y.reshape(*lead, spec.out_dim, 1)


def _dense_backward(spec: LayerSpec, params: LayerParams, cache: ForwardCache,
                    upstream: np.ndarray,
                    need_input_grad: bool) -> tuple[np.ndarray, GradientBundle]:
    xf = cache.x.reshape(-1, spec.in_dim)
    g2 = upstream.reshape(-1, spec.out_dim)
    d_weights = xf.T @ g2
    d_biases = g2.sum(axis=0)
    if not need_input_grad:
        return np.empty(0), GradientBundle(d_weights, d_biases)
    dx = (g2 @ params.weights.T).reshape(cache.in_shape)
    return dx, GradientBundle(d_weights, d_biases)


# --- losses ------------------------------------------------------------------

def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; preserves argmax, rows sum to one."""
    u = np.asarray(logits, dtype=np.float64)
    z = u - u.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(u: np.ndarray) -> np.ndarray:
    z = u - u.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax_xent_loss(logits: np.ndarray, label: int) -> tuple[float, np.ndarray]:
    """Cross-entropy of the softmax posterior against a 1-based class label.

    Returns (loss, gradient of the loss in the logits): the gradient is
    softmax(logits) minus the one-hot target.
    """
    u = np.asarray(logits, dtype=np.float64)
    k = u.shape[-1]
    if not 1 <= label <= k:
        raise ValueError(f"label {label} outside 1..{k}")
    logp = _log_softmax(u)
    loss = -float(logp[label - 1])
    grad = np.exp(logp)
    grad[label - 1] -= 1.0
    return loss, grad


def softmax_xent_batch(logits: np.ndarray,
                       labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over a batch; gradient already carries the 1/N."""
    u = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, k = u.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min() < 1 or labels.max() > k:
        raise ValueError("labels outside 1..K")
    logp = _log_softmax(u)
    rows = np.arange(n)
    loss = -float(logp[rows, labels - 1].mean())
    grad = np.exp(logp)
    grad[rows, labels - 1] -= 1.0
    grad /= n
    return loss, grad


def sigmoid(logit):
    """Numerically stable logistic function; scalar or array."""
    a = np.asarray(logit, dtype=np.float64)
    scalar = a.ndim == 0
    a = np.atleast_1d(a)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return float(out[0]) if scalar else out


def logistic_loss(logit: float, target: int) -> tuple[float, float]:
    """Binary cross-entropy on a raw logit, in log-sum-exp form.

    The probability of class 1 is sigmoid(logit); the returned gradient is
    sigmoid(logit) - target.
    """
    if target not in (0, 1):
        raise ValueError(f"target must be 0 or 1, got {target!r}")
    a = float(logit)
    loss = np.logaddexp(0.0, a) - target * a
    return float(loss), float(sigmoid(a) - target)


def logistic_loss_batch(logits: np.ndarray,
                        targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy over a batch of logits; gradient carries 1/N."""
    a = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if a.shape != t.shape:
        raise ValueError(f"logits {a.shape} and targets {t.shape} differ")
    loss = float((np.logaddexp(0.0, a) - t * a).mean())
    grad = (sigmoid(a) - t) / a.size
    return loss, grad


# --- optimizer ---------------------------------------------------------------

ParamsLike = Union[LayerParams, GradientBundle, Sequence[np.ndarray], np.ndarray]


def _as_arrays(obj: ParamsLike) -> list[np.ndarray]:
    if isinstance(obj, (LayerParams, GradientBundle)):
        return obj.arrays()
    if isinstance(obj, np.ndarray):
        return [obj]
    return list(obj)


@dataclass
class AdamState:
    """First/second moment accumulators for one group of parameter arrays."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: ParamsLike, lr: float = 1e-3,
                   beta1: float = 0.9, beta2: float = 0.999,
                   epsilon: float = 1e-8) -> "AdamState":
        arrays = _as_arrays(params)
        return cls(m=[np.zeros_like(a) for a in arrays],
                   v=[np.zeros_like(a) for a in arrays],
                   lr=lr, beta1=beta1, beta2=beta2, epsilon=epsilon)


def adam_step(params: ParamsLike, grads: ParamsLike, state: AdamState,
              direction: Literal["minimize", "maximize"] = "minimize") -> None:
    """One bias-corrected Adam update, mutating the parameter arrays in place.

    `direction="maximize"` ascends the gradient instead of descending; the
    step is otherwise the standard rule.
    """
    if direction not in ("minimize", "maximize"):
        raise ValueError(f"direction must be minimize or maximize, got {direction!r}")
    arrays = _as_arrays(params)
    garrays = _as_arrays(grads)
    if len(arrays) != len(garrays) or len(arrays) != len(state.m):
        raise ValueError("params, grads and state must hold the same array count")
    for p, g in zip(arrays, garrays):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match {p.shape}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    sign = -1.0 if direction == "minimize" else 1.0
    for p, g, m, v in zip(arrays, garrays, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p += sign * state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
