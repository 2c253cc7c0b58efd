"""Scikit-learn style wrapper around the policy network.

``X`` is a sequence of labeled decision states; targets travel inside the
samples because the action-slot count varies per state, so ``y`` is accepted
but ignored.  ``predict`` returns argmax action slots, ``predict_proba`` the
ragged per-state distributions.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .datagen import LabeledState
from .encoding import EncodedState
from .model import ModelConfig, forward
from .training import Hyper, mean_delta_q, train


class NotFittedError(RuntimeError):
    pass


class PointerPolicyEstimator(BaseEstimator):
    """Supervised pointer-network policy with fit/predict semantics."""

    def __init__(self, lr: float = 0.001, batch_size: int = 128,
                 epochs: int = 30, seed: int = 0, w_max: int = 10,
                 alpha: float = 0.1):
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.w_max = w_max
        self.alpha = alpha

    def fit(self, X, y=None, validation=None):
        """Train on labeled states; ``validation`` adds per-epoch ΔQ tracking."""
        records = list(X)
        if not records:
            raise ValueError("empty training set")
        self.store_, self.history_ = train(
            records, list(validation) if validation else None,
            hyper=Hyper(lr=self.lr, batch_size=self.batch_size,
                        epochs=self.epochs, seed=self.seed),
            config=ModelConfig(w_max=self.w_max, alpha=self.alpha),
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "store_"):
            raise NotFittedError("call fit() before predicting")

    @staticmethod
    def _encoded(x) -> EncodedState:
        return x.encoded if isinstance(x, LabeledState) else x

    def predict_proba(self, X) -> list[np.ndarray]:
        """Per-state action distribution over J+1 slots (ragged list)."""
        self._check_fitted()
        return [forward(self.store_, self._encoded(x)) for x in X]

    def predict(self, X) -> np.ndarray:
        """Argmax action slot per state; ties break toward the lowest slot."""
        return np.array([int(np.argmax(p)) for p in self.predict_proba(X)])

    def score(self, X, y=None) -> float:
        """Negative mean decision ΔQ (higher is better)."""
        self._check_fitted()
        return -mean_delta_q(self.store_, list(X))
