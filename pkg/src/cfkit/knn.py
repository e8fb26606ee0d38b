"""Memory-based collaborative filtering: similarities, neighbors, aggregation.

Scalar metrics take two rating profiles (anything with sorted ``indices``
and matching ``values``) and return a float, or None when the similarity is
undefined.  Pass outputs live in the test entities' stores:

* ``SIMILARITIES``: float array over the whole axis, NaN where undefined
  (always NaN at the owner's own index).
* ``NEIGHBORS``: list of entity indices, best first, ties by lower index.
* ``PREDICTIONS``: float array aligned with the owner's ``test_indices``,
  NaN where no prediction could be made.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .engine import ElementPass, PassTarget, run_pass
from .errors import PipelineOrderError

SIMILARITIES = "SIMILARITIES"
NEIGHBORS = "NEIGHBORS"
PREDICTIONS = "PREDICTIONS"


def co_rated(a, b) -> tuple[list[float], list[float]]:
    """Values of ``a`` and ``b`` on their common indices, by linear merge."""
    ai, av, bi, bv = a.indices, a.values, b.indices, b.values
    na, nb = len(ai), len(bi)
    xs: list[float] = []
    ys: list[float] = []
    p = q = 0
    while p < na and q < nb:
        ia, ib = ai[p], bi[q]
        if ia == ib:
            xs.append(av[p])
            ys.append(bv[q])
            p += 1
            q += 1
        elif ia < ib:
            p += 1
        else:
            q += 1
    return xs, ys


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def pearson(a, b, min_rating=None, max_rating=None) -> float | None:
    """Pearson correlation over co-rated entries, centred on co-rated means.

    Deviations are scaled by the overlap size (``n*x - sum(x)``) instead of
    dividing the sum first; the factor cancels and the result is exactly
    invariant to adding a constant to every rating whenever the sums are exact.
    """
    xs, ys = co_rated(a, b)
    n = len(xs)
    if n < 2 or max(xs) == min(xs) or max(ys) == min(ys):
        return None
    # explicit loops: builtin sum() is compensated on newer Pythons
    sx = sy = 0.0
    for x in xs:
        sx += x
    for y in ys:
        sy += y
    num = sxx = syy = 0.0
    for x, y in zip(xs, ys):
        dx = n * x - sx
        dy = n * y - sy
        num += dx * dy
        sxx += dx * dx
        syy += dy * dy
    return _clamp(num / math.sqrt(sxx * syy), -1.0, 1.0)


def cosine(a, b, min_rating=None, max_rating=None) -> float | None:
    xs, ys = co_rated(a, b)
    if not xs:
        return None
    num = nx = ny = 0.0
    for x, y in zip(xs, ys):
        num += x * y
        nx += x * x
        ny += y * y
    if nx == 0 or ny == 0:
        return None
    return _clamp(num / (math.sqrt(nx) * math.sqrt(ny)), -1.0, 1.0)


def _msd_part(xs, ys, min_rating, max_rating):
    span = max_rating - min_rating
    if span == 0:
        return 1.0  # every rating in the dataset is equal
    total = 0.0
    for x, y in zip(xs, ys):
        d = (x - min_rating) / span - (y - min_rating) / span
        total += d * d
    return _clamp(1.0 - total / len(xs), 0.0, 1.0)


def msd(a, b, min_rating, max_rating) -> float | None:
    """1 minus the mean squared difference of range-normalised ratings."""
    xs, ys = co_rated(a, b)
    if not xs:
        return None
    return _msd_part(xs, ys, min_rating, max_rating)


def jmsd(a, b, min_rating, max_rating) -> float | None:
    """Jaccard overlap of the rated sets times the MSD similarity."""
    xs, ys = co_rated(a, b)
    if not xs:
        return None
    n = len(xs)
    jaccard = n / (len(a.indices) + len(b.indices) - n)
    return jaccard * _msd_part(xs, ys, min_rating, max_rating)


METRICS = {"COR": pearson, "COSINE": cosine, "MSD": msd, "JMSD": jmsd}


def resolve_metric(metric):
    if callable(metric):
        return metric
    try:
        return METRICS[metric.upper()]
    except KeyError:
        raise ValueError(f"unknown similarity metric {metric!r}; valid: {', '.join(METRICS)}") from None


class Orientation(enum.Enum):
    USER_TO_USER = "user"
    ITEM_TO_ITEM = "item"

    @property
    def target(self) -> PassTarget:
        return PassTarget.TEST_USERS if self is Orientation.USER_TO_USER else PassTarget.TEST_ITEMS

    def owners(self, model):
        return model.test_users if self is Orientation.USER_TO_USER else model.test_items

    def axis(self, model):
        return model.users if self is Orientation.USER_TO_USER else model.items


class Aggregation(enum.Enum):
    MEAN = "mean"
    WEIGHTED_MEAN = "wmean"
    DEVIATION_FROM_MEAN = "dfm"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = name.strip()
        for a in cls:
            if key.lower() == a.value or key.upper() == a.name:
                return a
        valid = ", ".join(a.value for a in cls)
        raise ValueError(f"unknown aggregation {name!r}; valid: {valid}")


def _require(owners, key, needed_by):
    for o in owners:
        if key not in o.store:
            raise PipelineOrderError(key, needed_by)


class SimilarityPass(ElementPass):
    """Similarity of every test entity against every entity on its axis."""

    def __init__(self, orientation: Orientation, metric):
        self.orientation = orientation
        self.metric = resolve_metric(metric)

    def per_element(self, model, index):
        owner = self.orientation.owners(model)[index]
        axis = self.orientation.axis(model)
        lo, hi = model.min_rating, model.max_rating
        sims = np.full(len(axis), np.nan)
        if owner.indices:
            for j, other in enumerate(axis):
                if j == owner.index or not other.indices:
                    continue
                s = self.metric(owner, other, lo, hi)
                if s is not None:
                    sims[j] = s
        owner.put(SIMILARITIES, sims)


def select_neighbors(sims: np.ndarray, k: int) -> list[int]:
    """Top-k defined entries of ``sims``: descending value, ascending index on ties."""
    candidates = np.flatnonzero(~np.isnan(sims))
    order = np.lexsort((candidates, -sims[candidates]))
    return [int(c) for c in candidates[order[:k]]]


class NeighborsPass(ElementPass):
    def __init__(self, orientation: Orientation, k: int):
        if k < 1:
            raise ValueError(f"k must be positive, got {k}")
        self.orientation = orientation
        self.k = k

    def setup(self, model):
        _require(self.orientation.owners(model), SIMILARITIES, "neighbor selection")

    def per_element(self, model, index):
        owner = self.orientation.owners(model)[index]
        owner.put(NEIGHBORS, select_neighbors(owner.get(SIMILARITIES), self.k))


def aggregate(approach: Aggregation, owner_average, neighbor_info, other_index, min_rating, max_rating):
    """Prediction for one target from ``(sim, neighbor_average, profile)`` triples.

    Neighbors that did not rate ``other_index`` are skipped; for the weighted
    approaches so are neighbors with similarity <= 0.  Returns NaN when no
    neighbor qualifies.
    """
    if approach is Aggregation.MEAN:
        total = 0.0
        count = 0
        for _, _, prof in neighbor_info:
            r = prof.rating_for(other_index)
            if r is not None:
                total += r
                count += 1
        return total / count if count else math.nan

    num = 0.0
    den = 0.0
    for sim, avg, prof in neighbor_info:
        if sim <= 0:
            continue
        r = prof.rating_for(other_index)
        if r is None:
            continue
        if approach is Aggregation.WEIGHTED_MEAN:
            num += sim * r
        else:
            num += sim * (r - avg)
        den += sim
    if den == 0:
        return math.nan
    if approach is Aggregation.WEIGHTED_MEAN:
        return num / den
    return _clamp(owner_average + num / den, min_rating, max_rating)


class AggregationPass(ElementPass):
    """Predict every held-out rating of each test entity from its neighbors.

    Item-to-item predictions are also copied onto the test users in teardown
    so quality measures always read them from the user side.
    """

    def __init__(self, orientation: Orientation, approach):
        self.orientation = orientation
        self.approach = Aggregation.parse(approach)

    def setup(self, model):
        _require(self.orientation.owners(model), NEIGHBORS, "aggregation")

    def per_element(self, model, index):
        owner = self.orientation.owners(model)[index]
        axis = self.orientation.axis(model)
        sims = owner.get(SIMILARITIES)
        info = [(float(sims[v]), axis[v].average, axis[v]) for v in owner.get(NEIGHBORS)]
        preds = np.array(
            [
                aggregate(self.approach, owner.average, info, other, model.min_rating, model.max_rating)
                for other in owner.test_indices
            ],
            dtype=float,
        )
        owner.put(PREDICTIONS, preds)

    def teardown(self, model):
        if self.orientation is Orientation.ITEM_TO_ITEM:
            scatter_item_predictions(model)


def scatter_item_predictions(model):
    """Rebuild each test user's PREDICTIONS from the test items' PREDICTIONS."""
    per_user = [np.full(len(tu.test_indices), np.nan) for tu in model.test_users]
    for ti in model.test_items:
        preds = ti.get(PREDICTIONS)
        for pos, u in enumerate(ti.test_indices):
            t = model.test_user_position[u]
            per_user[t][model.test_users[t].test_position(ti.index)] = preds[pos]
    for tu, preds in zip(model.test_users, per_user):
        tu.put(PREDICTIONS, preds)


def get_similarity(test_entity, other_index: int) -> float | None:
    """Stored similarity between a test entity and any entity on its axis."""
    sims = test_entity.get(SIMILARITIES)
    if sims is None:
        raise PipelineOrderError(SIMILARITIES, "get_similarity")
    if not 0 <= other_index < len(sims):
        raise IndexError(f"index {other_index} out of range [0, {len(sims)})")
    s = sims[other_index]
    return None if np.isnan(s) else float(s)


def similarity_pass(model, orientation=Orientation.USER_TO_USER, metric="COR", workers=1):
    run_pass(model, orientation.target, SimilarityPass(orientation, metric), workers)


def neighbors_pass(model, orientation=Orientation.USER_TO_USER, k=50, workers=1):
    run_pass(model, orientation.target, NeighborsPass(orientation, k), workers)


def aggregation_pass(model, orientation=Orientation.USER_TO_USER, approach="dfm", workers=1):
    run_pass(model, orientation.target, AggregationPass(orientation, approach), workers)
