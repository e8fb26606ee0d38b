import hypothesis
import numpy as np
import pytest

from cfkit.datamodel import RatingTriple, build_model

hypothesis.settings.register_profile("fast", max_examples=20)
hypothesis.settings.register_profile("thorough", max_examples=500)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_triples(seed, n_users=12, n_items=15, density=0.5, half_steps=False):
    """Seeded toy ratings on a grid of at most 20 x 20, values in [1, 5]."""
    rng = np.random.default_rng(seed)
    out = []
    for u in range(n_users):
        for i in range(n_items):
            if rng.random() < density:
                v = rng.integers(2, 11) / 2 if half_steps else rng.integers(1, 6)
                out.append(RatingTriple(f"u{u:02d}", f"i{i:02d}", float(v)))
    return out


def random_model(seed, **kw):
    split = kw.pop("split", (0.4, 0.4))
    return build_model(random_triples(seed, **kw), *split, seed, min_rating=1.0, max_rating=5.0)


@pytest.fixture
def tiny_triples():
    # 3 users x 4 items; u2 did not rate i3
    return [
        RatingTriple("u1", "i1", 5.0),
        RatingTriple("u1", "i2", 3.0),
        RatingTriple("u1", "i3", 4.0),
        RatingTriple("u1", "i4", 1.0),
        RatingTriple("u2", "i1", 4.0),
        RatingTriple("u2", "i2", 2.0),
        RatingTriple("u2", "i4", 2.0),
        RatingTriple("u3", "i1", 1.0),
        RatingTriple("u3", "i3", 5.0),
        RatingTriple("u3", "i4", 4.0),
    ]
