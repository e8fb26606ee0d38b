"""Rating files, the train/test split and the in-memory ratings model.

Every rating is stored twice: once on its user and once on its item, both
sorted by the index of the other endpoint.  That duplication is what makes
``get_rating`` a binary search from either side and lets the similarity
metrics intersect two profiles with a linear merge.
"""

from __future__ import annotations

import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, NamedTuple

import numpy as np

from .errors import DatasetError, EmptyDatasetError, ParseError

log = logging.getLogger(__name__)


class RatingTriple(NamedTuple):
    user_code: str
    item_code: str
    value: float


class LoadedDataset(NamedTuple):
    triples: list[RatingTriple]
    duplicates: int


def load_dataset(path, separator: str = "::") -> LoadedDataset:
    """Read ``user<sep>item<sep>rating`` lines from a UTF-8 text file.

    Blank lines and lines starting with ``#`` are skipped.  A fourth field
    (the MovieLens timestamp) is ignored with a single warning.  When the same
    (user, item) pair appears more than once the last line wins; the number of
    overwritten lines is returned as ``duplicates``.
    """
    if not separator:
        raise ValueError("separator must be non-empty")
    path = Path(path)
    by_pair: dict[tuple[str, str], RatingTriple] = {}
    duplicates = 0
    warned_extra = False
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(separator)
            if len(fields) == 4:
                if not warned_extra:
                    log.warning("%s: ignoring 4th field (timestamp) from line %d on", path, lineno)
                    warned_extra = True
            elif len(fields) != 3:
                raise ParseError(path, lineno, f"expected 3 fields separated by {separator!r}, got {len(fields)}")
            user, item, rating = fields[0].strip(), fields[1].strip(), fields[2].strip()
            try:
                value = float(rating)
            except ValueError:
                raise ParseError(path, lineno, f"rating {rating!r} is not a number") from None
            if not math.isfinite(value):
                raise ParseError(path, lineno, f"rating {rating!r} is not finite")
            key = (user, item)
            if key in by_pair:
                duplicates += 1
                del by_pair[key]  # re-insert so the surviving line keeps its own file position
            by_pair[key] = RatingTriple(user, item, value)
    if duplicates:
        log.warning("%s: %d duplicate (user, item) lines, last occurrence kept", path, duplicates)
    return LoadedDataset(list(by_pair.values()), duplicates)


def _same_float(a: float, b: float) -> bool:
    return a == b or (math.isnan(a) and math.isnan(b))


@dataclass(eq=False)
class Profile:
    """Ratings of one entity, sorted by the index of the other endpoint.

    ``store`` holds intermediate pipeline outputs keyed by name
    (``"SIMILARITIES"``, ``"NEIGHBORS"``, ``"PREDICTIONS"``, ...).
    Statistics of an entity with no training ratings are NaN.
    """

    code: str
    index: int
    indices: tuple[int, ...]
    values: tuple[float, ...]
    average: float = field(init=False)
    std: float = field(init=False)
    store: dict[str, Any] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self.average, self.std = rating_stats(self.values)

    def __len__(self):
        return len(self.indices)

    def rating_for(self, other_index: int) -> float | None:
        pos = bisect_left(self.indices, other_index)
        if pos < len(self.indices) and self.indices[pos] == other_index:
            return self.values[pos]
        return None

    def put(self, key: str, payload) -> None:
        self.store[key] = payload

    def get(self, key: str):
        return self.store.get(key)

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        return (
            self.code == other.code
            and self.index == other.index
            and self.indices == other.indices
            and self.values == other.values
            and _same_float(self.average, other.average)
            and _same_float(self.std, other.std)
            and self._extra_state() == other._extra_state()
            and self.store.keys() == other.store.keys()
        )

    def _extra_state(self):
        return ()


class UserProfile(Profile):
    pass


class ItemProfile(Profile):
    pass


@dataclass(eq=False)
class _TestSide:
    test_index: int = -1
    test_indices: tuple[int, ...] = ()
    test_values: tuple[float, ...] = ()

    def _extra_state(self):
        return (self.test_index, self.test_indices, self.test_values)

    def test_position(self, other_index: int) -> int | None:
        pos = bisect_left(self.test_indices, other_index)
        if pos < len(self.test_indices) and self.test_indices[pos] == other_index:
            return pos
        return None


@dataclass(eq=False)
class TestUserProfile(_TestSide, UserProfile):
    """A test user: training ratings plus held-out ratings on test items.

    ``test_indices`` are global item indices (all of them test items).
    """

    __test__ = False


@dataclass(eq=False)
class TestItemProfile(_TestSide, ItemProfile):
    __test__ = False


def rating_stats(values) -> tuple[float, float]:
    """Mean and population standard deviation; NaN for an empty profile."""
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


@dataclass(eq=False)
class RatingsModel:
    users: list[UserProfile]
    items: list[ItemProfile]
    test_users: list[TestUserProfile]
    test_items: list[TestItemProfile]
    min_rating: float
    max_rating: float
    num_ratings: int
    num_test_ratings: int
    user_code_to_index: dict[str, int]
    item_code_to_index: dict[str, int]
    split_seed: int | None
    # global index -> position in test_users / test_items
    test_user_position: dict[int, int] = field(default_factory=dict)
    test_item_position: dict[int, int] = field(default_factory=dict)

    @property
    def num_users(self) -> int:
        return len(self.users)

    @property
    def num_items(self) -> int:
        return len(self.items)

    @property
    def density(self) -> float:
        cells = self.num_users * self.num_items
        return (self.num_ratings + self.num_test_ratings) / cells if cells else 0.0

    def get_rating(self, user_index: int, item_index: int) -> float | None:
        """Training rating of a user for an item, or None."""
        self._check(user_index, self.num_users, "user")
        self._check(item_index, self.num_items, "item")
        return self.users[user_index].rating_for(item_index)

    def get_rating_from_item(self, item_index: int, user_index: int) -> float | None:
        self._check(user_index, self.num_users, "user")
        self._check(item_index, self.num_items, "item")
        return self.items[item_index].rating_for(user_index)

    @staticmethod
    def _check(index, size, what):
        if not 0 <= index < size:
            raise IndexError(f"{what} index {index} out of range [0, {size})")

    def training_triples(self) -> list[tuple[int, int, float]]:
        return [(u.index, i, v) for u in self.users for i, v in zip(u.indices, u.values)]

    def test_triples(self) -> list[tuple[int, int, float]]:
        return [(u.index, i, v) for u in self.test_users for i, v in zip(u.test_indices, u.test_values)]

    def clear_stores(self) -> None:
        for group in (self.users, self.items, self.test_users, self.test_items):
            for p in group:
                p.store.clear()

    def __eq__(self, other):
        if not isinstance(other, RatingsModel):
            return NotImplemented
        return (
            self.users == other.users
            and self.items == other.items
            and self.test_users == other.test_users
            and self.test_items == other.test_items
            and self.min_rating == other.min_rating
            and self.max_rating == other.max_rating
            and self.num_ratings == other.num_ratings
            and self.num_test_ratings == other.num_test_ratings
            and self.user_code_to_index == other.user_code_to_index
            and self.item_code_to_index == other.item_code_to_index
            and self.split_seed == other.split_seed
        )


def _draw_test_set(rng: np.random.Generator, n: int, fraction: float) -> list[int]:
    size = math.floor(fraction * n)
    return sorted(int(x) for x in rng.choice(n, size=size, replace=False))


def build_model(
    triples: Iterable[RatingTriple],
    test_user_fraction: float = 0.2,
    test_item_fraction: float = 0.2,
    seed: int | None = 0,
    *,
    min_rating: float | None = None,
    max_rating: float | None = None,
    test_user_codes: Iterable[str] | None = None,
    test_item_codes: Iterable[str] | None = None,
) -> RatingsModel:
    """Index users and items, draw the test sets and build all profiles.

    A rating is held out iff its user is a test user *and* its item is a
    test item.  ``test_user_codes`` / ``test_item_codes`` replace the random
    draw for the corresponding axis when given.
    """
    for name, frac in (("test_user_fraction", test_user_fraction), ("test_item_fraction", test_item_fraction)):
        if not 0.0 <= frac <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {frac}")

    by_pair: dict[tuple[str, str], float] = {}
    for t in triples:
        by_pair[(t.user_code, t.item_code)] = float(t.value)
    if not by_pair:
        raise EmptyDatasetError("no ratings to build a model from")

    user_codes = sorted({u for u, _ in by_pair})
    item_codes = sorted({i for _, i in by_pair})
    user_index = {c: n for n, c in enumerate(user_codes)}
    item_index = {c: n for n, c in enumerate(item_codes)}

    rng = np.random.default_rng(seed)
    test_u = _draw_test_set(rng, len(user_codes), test_user_fraction)
    test_i = _draw_test_set(rng, len(item_codes), test_item_fraction)
    if test_user_codes is not None:
        test_u = sorted(user_index[c] for c in set(test_user_codes))
    if test_item_codes is not None:
        test_i = sorted(item_index[c] for c in set(test_item_codes))
    test_u_set, test_i_set = set(test_u), set(test_i)

    observed = list(by_pair.values())
    lo = min(observed) if min_rating is None else float(min_rating)
    hi = max(observed) if max_rating is None else float(max_rating)
    if lo > min(observed) or hi < max(observed):
        raise DatasetError(f"rating bounds [{lo}, {hi}] do not cover observed values [{min(observed)}, {max(observed)}]")

    user_train: list[list[tuple[int, float]]] = [[] for _ in user_codes]
    item_train: list[list[tuple[int, float]]] = [[] for _ in item_codes]
    user_test: dict[int, list[tuple[int, float]]] = {u: [] for u in test_u}
    item_test: dict[int, list[tuple[int, float]]] = {i: [] for i in test_i}
    num_test = 0
    for (uc, ic), v in by_pair.items():
        u, i = user_index[uc], item_index[ic]
        if u in test_u_set and i in test_i_set:
            user_test[u].append((i, v))
            item_test[i].append((u, v))
            num_test += 1
        else:
            user_train[u].append((i, v))
            item_train[i].append((u, v))

    def unzip(pairs):
        pairs.sort()
        return tuple(p[0] for p in pairs), tuple(p[1] for p in pairs)

    user_sorted = [unzip(p) for p in user_train]
    item_sorted = [unzip(p) for p in item_train]
    users = [UserProfile(c, n, *user_sorted[n]) for n, c in enumerate(user_codes)]
    items = [ItemProfile(c, n, *item_sorted[n]) for n, c in enumerate(item_codes)]

    test_users = []
    for pos, u in enumerate(test_u):
        ti, tv = unzip(user_test[u])
        test_users.append(TestUserProfile(user_codes[u], u, *user_sorted[u], test_index=pos, test_indices=ti, test_values=tv))
    test_items = []
    for pos, i in enumerate(test_i):
        tu, tv = unzip(item_test[i])
        test_items.append(TestItemProfile(item_codes[i], i, *item_sorted[i], test_index=pos, test_indices=tu, test_values=tv))

    return RatingsModel(
        users=users,
        items=items,
        test_users=test_users,
        test_items=test_items,
        min_rating=lo,
        max_rating=hi,
        num_ratings=len(by_pair) - num_test,
        num_test_ratings=num_test,
        user_code_to_index=user_index,
        item_code_to_index=item_index,
        split_seed=seed,
        test_user_position={u: p for p, u in enumerate(test_u)},
        test_item_position={i: p for p, i in enumerate(test_i)},
    )
