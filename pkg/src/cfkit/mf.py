"""Regularised matrix factorisation trained with plain SGD.

Loss over the training ratings::

    sum (r_ui - p_u . q_i)^2 + reg * (sum |p_u|^2 + sum |q_i|^2)

Each SGD step moves ``p_u`` and ``q_i`` by half the gradient of the
single-rating loss times the learning rate, so with ``e = r - p.q``::

    p <- p + lr * (e*q - reg*p)
    q <- q + lr * (e*p_old - reg*q)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import ElementPass, PassTarget, run_pass
from .errors import TrainingDivergedError
from .knn import PREDICTIONS


@dataclass
class FactorModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    learning_rate: float
    regularization: float
    epochs: int
    init_seed: int
    objective_history: list[float] = field(default_factory=list)

    @property
    def num_factors(self) -> int:
        return self.user_factors.shape[1]

    def user_vector(self, user_index: int) -> np.ndarray:
        return _read_only_row(self.user_factors, user_index, "user")

    def item_vector(self, item_index: int) -> np.ndarray:
        return _read_only_row(self.item_factors, item_index, "item")

    def predict(self, user_index: int, item_index: int) -> float:
        return float(self.user_vector(user_index) @ self.item_vector(item_index))

    def predict_clamped(self, user_index, item_index, min_rating, max_rating) -> float:
        return min(max(self.predict(user_index, item_index), min_rating), max_rating)


def _read_only_row(matrix, index, what):
    if not 0 <= index < matrix.shape[0]:
        raise IndexError(f"{what} index {index} out of range [0, {matrix.shape[0]})")
    row = matrix[index].view()
    row.flags.writeable = False
    return row


def get_user_factors(fm: FactorModel, user_index: int) -> np.ndarray:
    return fm.user_vector(user_index)


def get_item_factors(fm: FactorModel, item_index: int) -> np.ndarray:
    return fm.item_vector(item_index)


def _streams(seed):
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(shuffle_seq)


def init_factors(num_users, num_items, num_factors, seed):
    """Initial factors, uniform on (0, 0.1]; users drawn first, then items."""
    rng, _ = _streams(seed)
    users = 0.1 * (1.0 - rng.random((num_users, num_factors)))
    items = 0.1 * (1.0 - rng.random((num_items, num_factors)))
    return users, items


def rating_loss(p, q, r, regularization):
    e = r - p @ q
    return e * e + regularization * (p @ p + q @ q)


def rating_loss_gradients(p, q, r, regularization):
    """Gradients of ``rating_loss`` with respect to ``p`` and ``q``."""
    e = r - p @ q
    return -2.0 * e * q + 2.0 * regularization * p, -2.0 * e * p + 2.0 * regularization * q


def sgd_step(p, q, r, learning_rate, regularization):
    """One in-place update of ``p`` and ``q`` for a single rating; returns the error."""
    e = r - p @ q
    p_old = p.copy()
    p += learning_rate * (e * q - regularization * p)
    q += learning_rate * (e * p_old - regularization * q)
    return e


def objective(users, items, triples, regularization):
    u, i, r = triples
    err = r - np.einsum("ij,ij->i", users[u], items[i])
    return float(err @ err + regularization * (np.sum(users * users) + np.sum(items * items)))


def train_pmf(
    model,
    num_factors: int = 10,
    learning_rate: float = 0.01,
    regularization: float = 0.05,
    epochs: int = 50,
    init_seed: int = 0,
) -> FactorModel:
    """Fit user and item factors on the model's training ratings.

    Ratings are visited in one seeded permutation, drawn once and reused
    every epoch.  The objective is recorded at the end of each epoch in
    ``objective_history``.
    """
    if num_factors < 1:
        raise ValueError("num_factors must be >= 1")
    if learning_rate <= 0:
        raise ValueError("learning_rate must be > 0")
    if regularization < 0:
        raise ValueError("regularization must be >= 0")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")

    users, items = init_factors(model.num_users, model.num_items, num_factors, init_seed)
    _, shuffle_rng = _streams(init_seed)
    triples = model.training_triples()
    u_idx = np.array([t[0] for t in triples], dtype=np.int64)
    i_idx = np.array([t[1] for t in triples], dtype=np.int64)
    vals = np.array([t[2] for t in triples], dtype=float)

    order = shuffle_rng.permutation(len(triples))
    history = []
    for epoch in range(1, epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            for n in order:
                sgd_step(users[u_idx[n]], items[i_idx[n]], vals[n], learning_rate, regularization)
        if not (np.all(np.isfinite(users)) and np.all(np.isfinite(items))):
            raise TrainingDivergedError(epoch, learning_rate)
        history.append(objective(users, items, (u_idx, i_idx, vals), regularization))

    return FactorModel(users, items, learning_rate, regularization, epochs, init_seed, history)


class MFPredictionsPass(ElementPass):
    def __init__(self, fm: FactorModel):
        self.fm = fm

    def per_element(self, model, index):
        tu = model.test_users[index]
        lo, hi = model.min_rating, model.max_rating
        preds = np.array([self.fm.predict_clamped(tu.index, i, lo, hi) for i in tu.test_indices], dtype=float)
        tu.put(PREDICTIONS, preds)


def predictions_pass(model, fm: FactorModel, workers: int = 1) -> None:
    run_pass(model, PassTarget.TEST_USERS, MFPredictionsPass(fm), workers)
