"""Adam optimizer with the stepped learning-rate decay used for training."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError


@dataclass
class AdamState:
    """Per-tensor moment accumulators plus the decay schedule.

    The rate at iteration i (0-based) is ``base_rate * decay**(i // decay_every)``.
    """

    m: dict
    v: dict
    step: int = 0
    base_rate: float = 0.002
    decay: float = 0.99
    decay_every: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.step < 0:
            raise ConfigurationError("step count must be >= 0")
        if self.base_rate <= 0 or not (0 < self.decay <= 1) or self.decay_every < 1:
            raise ConfigurationError("invalid learning-rate schedule")

    @classmethod
    def for_params(cls, params, **kwargs) -> "AdamState":
        m = {name: np.zeros_like(arr) for name, arr in params.named_tensors()}
        v = {name: np.zeros_like(arr) for name, arr in params.named_tensors()}
        return cls(m=m, v=v, **kwargs)

    def current_rate(self) -> float:
        return self.base_rate * self.decay ** (self.step // self.decay_every)

    def update(self, params, grads: dict):
        """One optimizer step, applied to the parameter tensors in place."""
        rate = self.current_rate()
        self.step += 1
        t = self.step
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name, tensor in params.named_tensors():
            g = grads[name]
            if g.shape != tensor.shape:
                raise ConfigurationError(f"gradient shape mismatch for {name}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            tensor -= rate * (m / c1) / (np.sqrt(v / c2) + self.eps)
