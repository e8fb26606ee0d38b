"""Seeded MovieLens-like rating data for tests and desk-scale experiments."""

from __future__ import annotations

import numpy as np

from .datamodel import RatingTriple


def generate_ratings(
    num_users: int = 500,
    num_items: int = 800,
    num_ratings: int = 50_000,
    seed: int = 0,
    latent_dim: int = 5,
    noise: float = 0.6,
    min_per_user: int = 20,
) -> list[RatingTriple]:
    """Integer 1-5 ratings from a low-rank taste model with popularity skew.

    Users get a log-normal activity level and pick items with Zipf-like
    popularity weights; the rating is a rounded, clipped noisy dot product.
    Codes are 1-based integers as strings.
    """
    rng = np.random.default_rng(seed)
    activity = rng.lognormal(0.0, 0.8, num_users)
    counts = np.maximum(min_per_user, np.round(activity / activity.sum() * num_ratings)).astype(int)
    counts = np.minimum(counts, num_items)
    popularity = 1.0 / np.arange(1, num_items + 1) ** 0.8
    popularity = popularity[rng.permutation(num_items)]
    popularity /= popularity.sum()

    user_taste = rng.normal(0, 1, (num_users, latent_dim)) / np.sqrt(latent_dim)
    item_taste = rng.normal(0, 1, (num_items, latent_dim))
    user_bias = rng.normal(0, 0.4, num_users)
    item_bias = rng.normal(0, 0.5, num_items)

    triples = []
    for u in range(num_users):
        items = np.sort(rng.choice(num_items, size=counts[u], replace=False, p=popularity))
        raw = 3.6 + user_bias[u] + item_bias[items] + item_taste[items] @ user_taste[u]
        raw = raw + rng.normal(0, noise, len(items))
        values = np.clip(np.round(raw), 1, 5)
        triples.extend(RatingTriple(str(u + 1), str(i + 1), float(v)) for i, v in zip(items, values))
    return triples


def write_ratings(triples, path, separator: str = "::") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(f"{t.user_code}{separator}{t.item_code}{separator}{t.value:g}\n")
