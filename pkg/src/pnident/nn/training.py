"""Batching and the training loop.

Windows have ragged lengths, so batches are front-padded: every window ends
at the last time slot and the mask zeroes the padding.  Front padding keeps
the final hidden state at a fixed position and, because masked steps leave
the hidden state untouched, gives results identical to per-sample unrolls.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DivergenceError, InsufficientDataError
from .adam import AdamState
from .network import ModelParams, batch_forward, loss_and_grads


def pack_batch(samples, dtype=np.float64):
    """Front-pad a list of Samples into (x (B,T,F), mask (B,T), y (B,2))."""
    if not samples:
        raise InsufficientDataError("empty batch")
    lengths = [s.length for s in samples]
    t = max(lengths)
    b = len(samples)
    f = samples[0].window.shape[1]
    x = np.zeros((b, t, f), dtype=dtype)
    mask = np.zeros((b, t), dtype=dtype)
    y = np.empty((b, len(samples[0].label)), dtype=dtype)
    for i, s in enumerate(samples):
        x[i, t - s.length:] = s.window
        mask[i, t - s.length:] = 1.0
        y[i] = s.label
    return x, mask, y


def sharded_loss_and_grads(x, mask, y, params: ModelParams, shards: int = 1):
    """Gradient of the batch loss, optionally accumulated over sub-batches.

    The shard results are combined with batch-size weights, so any shard
    count gives the same loss and gradients up to float addition order.
    """
    b = x.shape[0]
    shards = max(1, min(shards, b))
    if shards == 1:
        loss, grads, _ = loss_and_grads(x, mask, y, params)
        return loss, grads
    bounds = (np.arange(shards + 1) * b) // shards
    total_loss = 0.0
    total = None
    for k in range(shards):
        lo, hi = bounds[k], bounds[k + 1]
        weight = (hi - lo) / b
        loss, grads, _ = loss_and_grads(x[lo:hi], mask[lo:hi], y[lo:hi], params)
        total_loss += weight * loss
        if total is None:
            total = {name: weight * g for name, g in grads.items()}
        else:
            for name, g in grads.items():
                total[name] += weight * g
    return total_loss, total


def train_step(x, mask, y, params: ModelParams, adam: AdamState,
               shards: int = 1) -> float:
    """One gradient step; raises with diagnostics if the loss blows up."""
    loss, grads = sharded_loss_and_grads(x, mask, y, params, shards)
    if not np.isfinite(loss):
        raise DivergenceError(adam.step)
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise DivergenceError(adam.step)
    adam.update(params, grads)
    return loss


@dataclass
class TrainHistory:
    losses: np.ndarray  # per-iteration batch loss
    adam: AdamState

    @property
    def iterations(self) -> int:
        return len(self.losses)


def train(
    params: ModelParams,
    samples,
    iterations: int,
    batch_size: int = 64,
    seed: int = 0,
    adam: AdamState = None,
    shards: int = 1,
    log_every: int = 0,
) -> TrainHistory:
    """Minibatch training over a sample list; deterministic given seed."""
    if not samples:
        raise InsufficientDataError("no training samples")
    if adam is None:
        adam = AdamState.for_params(params)
    rng = np.random.default_rng(seed)
    n = len(samples)
    losses = np.empty(iterations)
    for i in range(iterations):
        take = min(batch_size, n)
        idx = rng.choice(n, size=take, replace=False)
        x, mask, y = pack_batch([samples[j] for j in idx], dtype=params.dtype)
        losses[i] = train_step(x, mask, y, params, adam, shards)
        if log_every and (i + 1) % log_every == 0:
            print(f"iter {i + 1:6d}  loss {losses[i]:.6e}  rate {adam.current_rate():.2e}")
    return TrainHistory(losses=losses, adam=adam)


def evaluate_mse(params: ModelParams, samples, batch_size: int = 256):
    """Normalized MSE per output over a sample list, plus the combined mean."""
    if not samples:
        raise InsufficientDataError("no samples to evaluate")
    sq = np.zeros(len(samples[0].label))
    count = 0
    for lo in range(0, len(samples), batch_size):
        chunk = samples[lo:lo + batch_size]
        x, mask, y = pack_batch(chunk, dtype=params.dtype)
        _, norm, _, _ = batch_forward(x, mask, params)
        sq += ((norm - y) ** 2).sum(axis=0)
        count += len(chunk)
    per_output = sq / count
    return per_output, float(per_output.mean())
