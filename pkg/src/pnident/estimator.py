"""Scikit-learn style facade over the recurrent identification model.

X is a sequence of feature windows (ragged lengths allowed), y the physical
parameter labels.  Normalization stats are fitted from the training data,
so predictions round-trip in physical units.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .dataset import NormStats, Sample
from .errors import ConfigurationError
from .nn import AdamState, init_model, pack_batch, train
from .nn.network import batch_forward
from .validation import check_labels, check_windows


class GuidanceParamRegressor(BaseEstimator, RegressorMixin):
    """GRU regressor with a grouped-softmax or linear output head.

    Parameters mirror the training defaults: 3 GRU layers of 96 units,
    grouped-softmax head with 5 regimes per output, Adam at 0.002 with
    x0.99 decay every 100 iterations.
    """

    def __init__(
        self,
        hidden: int = 96,
        n_layers: int = 3,
        head: str = "regime",
        regimes_per_group: int = 5,
        iterations: int = 2000,
        batch_size: int = 64,
        learning_rate: float = 0.002,
        decay: float = 0.99,
        decay_every: int = 100,
        max_steps: int = 100,
        shards: int = 1,
        seed: int = 0,
    ):
        self.hidden = hidden
        self.n_layers = n_layers
        self.head = head
        self.regimes_per_group = regimes_per_group
        self.iterations = iterations
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.decay = decay
        self.decay_every = decay_every
        self.max_steps = max_steps
        self.shards = shards
        self.seed = seed

    def fit(self, X, y):
        windows = check_windows(X)
        y = check_labels(y, len(windows))
        too_long = max(w.shape[0] for w in windows)
        if too_long > self.max_steps:
            raise ConfigurationError(
                f"window length {too_long} exceeds max_steps {self.max_steps}"
            )

        stats = NormStats.from_training_arrays(windows, y)
        samples = [
            Sample(
                window=stats.norm_features(w),
                label=stats.norm_labels(lab),
                traj_id=f"fit{i}",
                end_tick=w.shape[0] - 1,
            )
            for i, (w, lab) in enumerate(zip(windows, y))
        ]

        model = init_model(
            stats,
            hidden=self.hidden,
            n_layers=self.n_layers,
            head_kind=self.head,
            max_steps=self.max_steps,
            n_features=windows[0].shape[1],
            seed=self.seed,
        )
        adam = AdamState.for_params(
            model,
            base_rate=self.learning_rate,
            decay=self.decay,
            decay_every=self.decay_every,
        )
        history = train(
            model,
            samples,
            iterations=self.iterations,
            batch_size=self.batch_size,
            seed=self.seed,
            adam=adam,
            shards=self.shards,
        )

        self.model_ = model
        self.stats_ = stats
        self.history_ = history
        self.n_features_in_ = windows[0].shape[1]
        return self

    def predict(self, X):
        self._require_fitted()
        windows = check_windows(X, n_features=self.n_features_in_)
        out = np.empty((len(windows), len(self.stats_.label_min)))
        samples = [
            Sample(
                window=self.stats_.norm_features(w),
                label=np.zeros(len(self.stats_.label_min)),
                traj_id=f"predict{i}",
                end_tick=w.shape[0] - 1,
            )
            for i, w in enumerate(windows)
        ]
        for lo in range(0, len(samples), 256):
            chunk = samples[lo:lo + 256]
            x, mask, _ = pack_batch(chunk)
            phys, _, _, _ = batch_forward(x, mask, self.model_)
            out[lo:lo + len(chunk)] = phys
        return out

    def _require_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError(
                "this GuidanceParamRegressor instance is not fitted yet"
            )

    def __sklearn_is_fitted__(self):
        return hasattr(self, "model_")
