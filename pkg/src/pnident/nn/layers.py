"""Network building blocks: dense layer, GRU layer, output heads.

All weights use the (out_dim, in_dim) orientation, so a forward pass reads
``x @ w.T + b``.  Forward functions accept (batch, dim) activations; the GRU
sequence runner additionally takes a (batch, steps) mask so ragged windows
can share one padded batch (masked steps leave the hidden state untouched).
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


def sigmoid(x):
    # split by sign to avoid overflow in exp for large |x|
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits, axis=-1):
    """Log-sum-exp stabilized softmax; rows sum to 1 even when saturated."""
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


# ---------------------------------------------------------------------------
# dense input layer


@dataclass
class DenseParams:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)

    def __post_init__(self):
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ConfigurationError("dense layer shapes do not conform")


def dense_tanh_forward(x, params: DenseParams):
    """tanh(x @ w.T + b); x is (..., in)."""
    return np.tanh(x @ params.w.T + params.b)


def dense_tanh_backward(x, out, grad_out, params: DenseParams):
    """Returns (dx, dw, db) given the cached output (tanh already applied)."""
    dpre = grad_out * (1.0 - out * out)
    flat_x = x.reshape(-1, x.shape[-1])
    flat_d = dpre.reshape(-1, dpre.shape[-1])
    dw = flat_d.T @ flat_x
    db = flat_d.sum(axis=0)
    dx = dpre @ params.w
    return dx, dw, db


# ---------------------------------------------------------------------------
# GRU layer


@dataclass
class GruLayerParams:
    """One GRU layer: reset gate r, update gate z, candidate c."""

    w_hr: np.ndarray  # (H, H)
    w_xr: np.ndarray  # (H, D)
    w_hz: np.ndarray
    w_xz: np.ndarray
    w_hc: np.ndarray
    w_xc: np.ndarray
    b_r: np.ndarray  # (H,)
    b_z: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        h = self.w_hr.shape[0]
        d = self.w_xr.shape[1]
        for name in ("w_hr", "w_hz", "w_hc"):
            if getattr(self, name).shape != (h, h):
                raise ConfigurationError(f"{name} must be ({h}, {h})")
        for name in ("w_xr", "w_xz", "w_xc"):
            if getattr(self, name).shape != (h, d):
                raise ConfigurationError(f"{name} must be ({h}, {d})")
        for name in ("b_r", "b_z", "b_c"):
            if getattr(self, name).shape != (h,):
                raise ConfigurationError(f"{name} must be ({h},)")
        for name in self.tensor_names():
            if not np.isfinite(getattr(self, name)).all():
                raise ConfigurationError(f"{name} contains non-finite entries")

    @property
    def hidden_width(self) -> int:
        return self.w_hr.shape[0]

    @property
    def input_width(self) -> int:
        return self.w_xr.shape[1]

    @staticmethod
    def tensor_names():
        return ("w_hr", "w_xr", "w_hz", "w_xz", "w_hc", "w_xc", "b_r", "b_z", "b_c")


def _gru_gates(x, h_prev, p: GruLayerParams):
    """One cell step; returns (h_t, r, z, c)."""
    r = sigmoid(h_prev @ p.w_hr.T + x @ p.w_xr.T + p.b_r)
    z = sigmoid(h_prev @ p.w_hz.T + x @ p.w_xz.T + p.b_z)
    c = np.tanh((r * h_prev) @ p.w_hc.T + x @ p.w_xc.T + p.b_c)
    # the update gate weights the new candidate; z = 0 keeps the old state
    h = (1.0 - z) * h_prev + z * c
    return h, r, z, c


def gru_cell_forward(x, h_prev, params: GruLayerParams):
    """Single GRU step for (..., D) input and (..., H) previous state."""
    x = np.atleast_2d(np.asarray(x))
    h_prev = np.atleast_2d(np.asarray(h_prev))
    if x.shape[-1] != params.input_width or h_prev.shape[-1] != params.hidden_width:
        raise ConfigurationError("gru input shapes do not conform")
    h, _, _, _ = _gru_gates(x, h_prev, params)
    return h[0] if h.shape[0] == 1 else h


def gru_layer_forward(x_seq, mask, p: GruLayerParams):
    """Unroll over (B, T, D) input with (B, T) mask; h starts at zero.

    Returns (h_seq (B, T, H), cache).  Masked steps carry the hidden state
    through unchanged, which makes front-padded ragged batches equivalent
    to per-sample unrolls.
    """
    b, t, _ = x_seq.shape
    h_width = p.hidden_width
    dtype = x_seq.dtype
    # input projections for every gate over all steps in one pass
    xr = x_seq @ p.w_xr.T + p.b_r
    xz = x_seq @ p.w_xz.T + p.b_z
    xc = x_seq @ p.w_xc.T + p.b_c

    h_all = np.empty((b, t, h_width), dtype=dtype)
    r_all = np.empty_like(h_all)
    z_all = np.empty_like(h_all)
    c_all = np.empty_like(h_all)
    hprev_all = np.empty_like(h_all)

    h = np.zeros((b, h_width), dtype=dtype)
    for k in range(t):
        m = mask[:, k][:, None]
        r = sigmoid(h @ p.w_hr.T + xr[:, k])
        z = sigmoid(h @ p.w_hz.T + xz[:, k])
        c = np.tanh((r * h) @ p.w_hc.T + xc[:, k])
        h_new = (1.0 - z) * h + z * c
        hprev_all[:, k] = h
        r_all[:, k] = r
        z_all[:, k] = z
        c_all[:, k] = c
        h = h + m * (h_new - h)
        h_all[:, k] = h

    cache = (x_seq, mask, hprev_all, r_all, z_all, c_all)
    return h_all, cache


def gru_layer_backward(grad_h_seq, cache, p: GruLayerParams):
    """Backprop through time for one layer.

    ``grad_h_seq`` is dL/dh for every step output (zeros except where a
    later layer or the head consumed the state).  Returns (dx_seq, grads)
    with grads keyed like the tensor fields.
    """
    x_seq, mask, hprev, r_all, z_all, c_all = cache
    b, t, _ = x_seq.shape
    h_width = p.hidden_width
    dh = np.zeros_like(grad_h_seq[:, 0])

    # the sequential loop only carries the dh recurrence; per-step gate
    # gradients are stashed and contracted against the weights afterwards
    # in a handful of large matmuls
    w_hrz = np.vstack([p.w_hr, p.w_hz])  # (2H, H)
    dr_pre_all = np.empty_like(r_all)
    dz_pre_all = np.empty_like(r_all)
    dc_pre_all = np.empty_like(r_all)

    for k in range(t - 1, -1, -1):
        dh = dh + grad_h_seq[:, k]
        m = mask[:, k][:, None]
        dh_new = dh * m  # masked steps pass the gradient straight through

        h_prev = hprev[:, k]
        r = r_all[:, k]
        z = z_all[:, k]
        c = c_all[:, k]

        dz = dh_new * (c - h_prev)
        dc = dh_new * z
        dz_pre = dz * z * (1.0 - z)
        dc_pre = dc * (1.0 - c * c)
        drh = dc_pre @ p.w_hc  # gradient into (r * h_prev)
        dr = drh * h_prev
        dr_pre = dr * r * (1.0 - r)

        dr_pre_all[:, k] = dr_pre
        dz_pre_all[:, k] = dz_pre
        dc_pre_all[:, k] = dc_pre

        drz = np.hstack([dr_pre, dz_pre])
        dh = dh * (1.0 - m * z) + drh * r + drz @ w_hrz

    flat_x = x_seq.reshape(b * t, -1)
    flat_h = hprev.reshape(b * t, h_width)
    flat_rh = (r_all * hprev).reshape(b * t, h_width)
    dr2 = dr_pre_all.reshape(b * t, h_width)
    dz2 = dz_pre_all.reshape(b * t, h_width)
    dc2 = dc_pre_all.reshape(b * t, h_width)

    grads = {
        "w_hc": dc2.T @ flat_rh,
        "w_xc": dc2.T @ flat_x,
        "b_c": dc2.sum(axis=0),
        "w_hr": dr2.T @ flat_h,
        "w_xr": dr2.T @ flat_x,
        "b_r": dr2.sum(axis=0),
        "w_hz": dz2.T @ flat_h,
        "w_xz": dz2.T @ flat_x,
        "b_z": dz2.sum(axis=0),
    }
    dpre = np.concatenate([dr_pre_all, dz_pre_all, dc_pre_all], axis=2)
    w_x_all = np.vstack([p.w_xr, p.w_xz, p.w_xc])  # (3H, F)
    dx_seq = (dpre.reshape(b * t, 3 * h_width) @ w_x_all).reshape(x_seq.shape)

    return dx_seq, grads


# ---------------------------------------------------------------------------
# output heads


@dataclass
class RegimeBank:
    """Grouped-softmax head: one regime bank and gating row-block per output.

    Each output mixes only its own group's regimes (no cross-group
    connections), so its estimate is a convex combination of that group's
    values and can never leave [min regime, max regime].
    """

    regimes: tuple  # per group: (p_i,) ascending physical values
    weights: tuple  # per group: (p_i, H) gating weights
    biases: tuple  # per group: (p_i,) gating biases

    def __post_init__(self):
        if not (len(self.regimes) == len(self.weights) == len(self.biases)):
            raise ConfigurationError("regime bank group counts disagree")
        for lam, w, b in zip(self.regimes, self.weights, self.biases):
            if len(lam) < 2:
                raise ConfigurationError("each group needs at least 2 regimes")
            if np.any(np.diff(lam) <= 0):
                raise ConfigurationError("regimes must be strictly increasing")
            if w.shape != (len(lam), self.hidden_width) or b.shape != (len(lam),):
                raise ConfigurationError("gating shapes do not conform")

    @property
    def n_groups(self) -> int:
        return len(self.regimes)

    @property
    def hidden_width(self) -> int:
        return self.weights[0].shape[1]

    def param_count(self) -> int:
        """Trainable gating parameters: sum of (H * p_i + p_i) over groups."""
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def full_connection_param_count(self) -> int:
        """Size of the rejected alternative: every group gated over all regimes."""
        total = sum(len(lam) for lam in self.regimes)
        return self.n_groups * (self.hidden_width * total + total)


def regime_head_forward(h_last, bank: RegimeBank):
    """Outputs and group weights for (B, H) final hidden states.

    Per group: G = softmax(h @ w.T + b), output = sum_j G_j * regime_j.
    Returns (outputs (B, n_groups) in physical units, list of G arrays).
    """
    h_last = np.atleast_2d(h_last)
    outs = []
    gs = []
    for lam, w, b in zip(bank.regimes, bank.weights, bank.biases):
        g = softmax(h_last @ w.T + b, axis=-1)
        outs.append(g @ lam)
        gs.append(g)
    return np.stack(outs, axis=-1), gs


def regime_head_backward(h_last, outputs, gs, grad_out, bank: RegimeBank):
    """Returns (dh_last, dweights list, dbiases list)."""
    dh = np.zeros_like(h_last)
    dws, dbs = [], []
    for i, (lam, w) in enumerate(zip(bank.regimes, bank.weights)):
        g = gs[i]
        # d output / d logit_j = G_j (regime_j - output)
        dlogits = grad_out[:, i][:, None] * g * (lam[None, :] - outputs[:, i][:, None])
        dws.append(dlogits.T @ h_last)
        dbs.append(dlogits.sum(axis=0))
        dh += dlogits @ w
    return dh, dws, dbs


@dataclass
class LinearHead:
    """Plain linear readout producing normalized outputs."""

    w: np.ndarray  # (n_out, H)
    b: np.ndarray  # (n_out,)

    def __post_init__(self):
        if self.w.ndim != 2 or self.b.shape != (self.w.shape[0],):
            raise ConfigurationError("linear head shapes do not conform")

    def param_count(self) -> int:
        return self.w.size + self.b.size


def linear_head_forward(h_last, head: LinearHead):
    return np.atleast_2d(h_last) @ head.w.T + head.b


def linear_head_backward(h_last, grad_out, head: LinearHead):
    dw = grad_out.T @ h_last
    db = grad_out.sum(axis=0)
    dh = grad_out @ head.w
    return dh, dw, db
