"""Model assembly: input layer -> stacked GRUs -> head, with training math.

The network consumes normalized feature windows and returns estimates in
physical units.  Losses are computed in normalized label space for both
heads so they optimize the identical objective; the grouped-softmax head's
physical outputs are normalized with the label stats before the loss.
"""

import math
from dataclasses import dataclass

import numpy as np

from ..dataset import NormStats
from ..errors import ConfigurationError, InsufficientDataError
from .layers import (
    DenseParams,
    GruLayerParams,
    LinearHead,
    RegimeBank,
    dense_tanh_backward,
    dense_tanh_forward,
    gru_layer_backward,
    gru_layer_forward,
    linear_head_backward,
    linear_head_forward,
    regime_head_backward,
    regime_head_forward,
)

DEFAULT_HIDDEN = 96
DEFAULT_LAYERS = 3
DEFAULT_REGIMES_PER_GROUP = 5


@dataclass
class ModelParams:
    """All trainable state plus the normalization contract."""

    input: DenseParams
    layers: tuple  # of GruLayerParams
    head: object  # RegimeBank or LinearHead
    stats: NormStats
    max_steps: int  # longest window the model is meant to consume

    def __post_init__(self):
        width = self.input.w.shape[0]
        for i, layer in enumerate(self.layers):
            if layer.input_width != width:
                raise ConfigurationError(f"layer {i} input width breaks the chain")
            width = layer.hidden_width
        head_width = (
            self.head.hidden_width
            if isinstance(self.head, RegimeBank)
            else self.head.w.shape[1]
        )
        if head_width != width:
            raise ConfigurationError("head width breaks the chain")
        if self.max_steps < 1:
            raise ConfigurationError("max_steps must be >= 1")

    @property
    def head_kind(self) -> str:
        return "regime" if isinstance(self.head, RegimeBank) else "linear"

    @property
    def n_features(self) -> int:
        return self.input.w.shape[1]

    @property
    def dtype(self):
        return self.input.w.dtype

    def named_tensors(self):
        """(name, array) pairs in a fixed traversal order."""
        items = [("input.w", self.input.w), ("input.b", self.input.b)]
        for i, layer in enumerate(self.layers):
            for name in layer.tensor_names():
                items.append((f"gru{i}.{name}", getattr(layer, name)))
        if isinstance(self.head, RegimeBank):
            for g in range(self.head.n_groups):
                items.append((f"head.g{g}.w", self.head.weights[g]))
                items.append((f"head.g{g}.b", self.head.biases[g]))
        else:
            items.append(("head.w", self.head.w))
            items.append(("head.b", self.head.b))
        return items

    def param_count(self) -> int:
        return sum(arr.size for _, arr in self.named_tensors())


def _glorot(rng, out_dim, in_dim, dtype):
    bound = math.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, (out_dim, in_dim)).astype(dtype)


def default_regimes(stats: NormStats, per_group: int = DEFAULT_REGIMES_PER_GROUP):
    """Evenly spaced candidate values spanning each label's training range."""
    return tuple(
        np.linspace(stats.label_min[i], stats.label_max[i], per_group)
        for i in range(len(stats.label_min))
    )


def init_model(
    stats: NormStats,
    hidden: int = DEFAULT_HIDDEN,
    n_layers: int = DEFAULT_LAYERS,
    head_kind: str = "regime",
    regimes=None,
    max_steps: int = 100,
    n_features: int = 6,
    seed: int = 0,
    dtype=np.float64,
) -> ModelParams:
    """Fresh model.

    Input and GRU weights draw from the usual fan-balanced uniform range.
    The grouped-softmax head starts at exactly zero so the untrained model
    outputs each group's regime mean; the linear head gets small random
    weights like any dense layer.
    """

    rng = np.random.default_rng(seed)
    dense = DenseParams(
        w=_glorot(rng, hidden, n_features, dtype),
        b=np.zeros(hidden, dtype=dtype),
    )
    layers = []
    for _ in range(n_layers):
        layers.append(
            GruLayerParams(
                w_hr=_glorot(rng, hidden, hidden, dtype),
                w_xr=_glorot(rng, hidden, hidden, dtype),
                w_hz=_glorot(rng, hidden, hidden, dtype),
                w_xz=_glorot(rng, hidden, hidden, dtype),
                w_hc=_glorot(rng, hidden, hidden, dtype),
                w_xc=_glorot(rng, hidden, hidden, dtype),
                b_r=np.zeros(hidden, dtype=dtype),
                b_z=np.zeros(hidden, dtype=dtype),
                b_c=np.zeros(hidden, dtype=dtype),
            )
        )

    if head_kind == "regime":
        if regimes is None:
            regimes = default_regimes(stats)
        regimes = tuple(np.asarray(lam, dtype=dtype) for lam in regimes)
        head = RegimeBank(
            regimes=regimes,
            weights=tuple(
                np.zeros((len(lam), hidden), dtype=dtype) for lam in regimes
            ),
            biases=tuple(np.zeros(len(lam), dtype=dtype) for lam in regimes),
        )
    elif head_kind == "linear":
        n_out = len(stats.label_min)
        head = LinearHead(
            w=_glorot(rng, n_out, hidden, dtype),
            b=np.zeros(n_out, dtype=dtype),
        )
    else:
        raise ConfigurationError(f"unknown head_kind {head_kind!r}")

    return ModelParams(
        input=dense, layers=tuple(layers), head=head, stats=stats,
        max_steps=max_steps,
    )


# ---------------------------------------------------------------------------
# forward / backward


def batch_forward(x, mask, params: ModelParams):
    """(B, T, F) padded windows -> (physical outputs, normalized, G, cache)."""
    u = dense_tanh_forward(x, params.input)
    caches = []
    seq = u
    for layer in params.layers:
        seq, cache = gru_layer_forward(seq, mask, layer)
        caches.append(cache)
    h_last = seq[:, -1]

    if isinstance(params.head, RegimeBank):
        phys, gs = regime_head_forward(h_last, params.head)
        norm = params.stats.norm_labels(phys)
    else:
        gs = None
        norm = linear_head_forward(h_last, params.head)
        phys = params.stats.denorm_labels(norm)
    return phys, norm, gs, (x, u, caches, h_last)


def model_forward(window, params: ModelParams):
    """One window (l, F) of normalized features -> (estimates (2,), G or None).

    Estimates come back in physical units for either head.
    """
    window = np.asarray(window, dtype=params.dtype)
    if window.ndim != 2 or window.shape[1] != params.n_features:
        raise ConfigurationError(
            f"window must be (l, {params.n_features})"
        )
    if window.shape[0] < 1:
        raise InsufficientDataError("empty window")
    if window.shape[0] > params.max_steps:
        raise ConfigurationError(
            f"window length {window.shape[0]} exceeds max_steps {params.max_steps}"
        )
    x = window[None]
    mask = np.ones((1, window.shape[0]), dtype=params.dtype)
    phys, _, gs, _ = batch_forward(x, mask, params)
    return phys[0], ([g[0] for g in gs] if gs is not None else None)


def loss_and_grads(x, mask, y_norm, params: ModelParams):
    """Mean squared error in normalized space, plus gradients for every tensor.

    Returns (loss, grads dict keyed like named_tensors, physical outputs).
    """
    b = x.shape[0]
    if b < 1:
        raise InsufficientDataError("empty batch")
    phys, norm, gs, (x_in, u, caches, h_last) = batch_forward(x, mask, params)

    err = norm - y_norm
    loss = float(np.mean(err * err))
    dnorm = 2.0 * err / err.size

    grads = {}
    if isinstance(params.head, RegimeBank):
        # loss differentiates the normalized output; outputs are physical
        span = (params.stats.label_max - params.stats.label_min).astype(x.dtype)
        dphys = dnorm / span
        dh_last, dws, dbs = regime_head_backward(
            h_last, phys, gs, dphys, params.head
        )
        for g in range(params.head.n_groups):
            grads[f"head.g{g}.w"] = dws[g]
            grads[f"head.g{g}.b"] = dbs[g]
    else:
        dh_last, dw, db = linear_head_backward(h_last, dnorm, params.head)
        grads["head.w"] = dw
        grads["head.b"] = db

    t = x.shape[1]
    dseq = np.zeros((b, t, dh_last.shape[1]), dtype=x.dtype)
    dseq[:, -1] = dh_last
    for i in range(len(params.layers) - 1, -1, -1):
        dseq, layer_grads = gru_layer_backward(dseq, caches[i], params.layers[i])
        for name, val in layer_grads.items():
            grads[f"gru{i}.{name}"] = val

    _, dw_in, db_in = dense_tanh_backward(x_in, u, dseq, params.input)
    grads["input.w"] = dw_in
    grads["input.b"] = db_in
    return loss, grads, phys


def grad_check(params: ModelParams, x, mask, y_norm, epsilon: float = 1e-6,
               max_entries_per_tensor: int = 0, seed: int = 0) -> float:
    """Worst relative disagreement between analytic and numeric gradients.

    Checks every entry by default; ``max_entries_per_tensor`` > 0 samples a
    random subset per tensor for larger configurations.  Requires double
    precision (finite differences drown in float32 roundoff).

    The denominator is floored at 1e-4 so near-zero gradient entries are
    compared in absolute terms; the central-difference noise floor sits
    around 1e-11 and would otherwise dominate the relative error.
    """
    if params.dtype != np.float64:
        raise ConfigurationError("gradient checking needs float64 parameters")

    _, grads, _ = loss_and_grads(x, mask, y_norm, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, tensor in params.named_tensors():
        flat = tensor.reshape(-1)
        gflat = grads[name].reshape(-1)
        idx = np.arange(flat.size)
        if 0 < max_entries_per_tensor < flat.size:
            idx = rng.choice(flat.size, max_entries_per_tensor, replace=False)
        for j in idx:
            orig = flat[j]
            flat[j] = orig + epsilon
            up, _, _ = _loss_only(x, mask, y_norm, params)
            flat[j] = orig - epsilon
            dn, _, _ = _loss_only(x, mask, y_norm, params)
            flat[j] = orig
            numeric = (up - dn) / (2.0 * epsilon)
            denom = max(abs(numeric), abs(gflat[j]), 1e-4)
            worst = max(worst, abs(numeric - gflat[j]) / denom)
    return worst


def _loss_only(x, mask, y_norm, params):
    _, norm, _, _ = batch_forward(x, mask, params)
    err = norm - y_norm
    return float(np.mean(err * err)), None, None
