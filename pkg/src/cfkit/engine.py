"""Three-phase parallel passes over one of the model's entity arrays.

A pass runs ``setup`` once, ``per_element`` once for every index of the
target array (possibly on several threads) and ``teardown`` once after all
elements are done.  ``per_element(model, i)`` may only write to the store of
element ``i``; anything that combines elements belongs in ``teardown``, where
it runs alone and in a fixed order.
"""

from __future__ import annotations

import enum
import os
import threading
from concurrent.futures import ThreadPoolExecutor

from .errors import PassError


class PassTarget(enum.Enum):
    USERS = "users"
    TEST_USERS = "test_users"
    ITEMS = "items"
    TEST_ITEMS = "test_items"

    def entities(self, model):
        return getattr(model, self.value)


class ElementPass:
    """Base class for passes; override ``per_element`` and optionally the rest."""

    def setup(self, model) -> None:
        pass

    def per_element(self, model, index: int) -> None:
        raise NotImplementedError

    def teardown(self, model) -> None:
        pass


def default_workers() -> int:
    return os.cpu_count() or 1


def chunk_size(n: int, workers: int) -> int:
    return max(1, n // (8 * workers))


def run_pass(model, target: PassTarget, element_pass: ElementPass, workers: int = 1) -> None:
    """Run ``element_pass`` over ``target``.

    ``workers=1`` visits indices in ascending order on the calling thread.
    With more workers, threads pull fixed-size chunks from a shared cursor.
    The first per-element failure stops further chunks from being handed out;
    the pass then raises ``PassError`` for the lowest failing index seen and
    ``teardown`` is skipped.  ``setup`` and ``teardown`` exceptions propagate
    unchanged.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    n = len(target.entities(model))
    element_pass.setup(model)

    if workers == 1 or n <= 1:
        for i in range(n):
            try:
                element_pass.per_element(model, i)
            except Exception as exc:
                raise PassError(i, exc) from exc
    else:
        _run_parallel(model, n, element_pass, workers)

    element_pass.teardown(model)


def _run_parallel(model, n, element_pass, workers):
    size = chunk_size(n, workers)
    lock = threading.Lock()
    cursor = 0
    failures: list[tuple[int, BaseException]] = []
    abort = threading.Event()

    def next_chunk():
        nonlocal cursor
        with lock:
            if abort.is_set() or cursor >= n:
                return None
            start = cursor
            cursor = min(n, cursor + size)
            return start, cursor

    def worker():
        while (chunk := next_chunk()) is not None:
            for i in range(*chunk):
                try:
                    element_pass.per_element(model, i)
                except Exception as exc:
                    with lock:
                        failures.append((i, exc))
                    abort.set()
                    return

    with ThreadPoolExecutor(max_workers=min(workers, n)) as pool:
        futures = [pool.submit(worker) for _ in range(min(workers, n))]
        for f in futures:
            f.result()

    if failures:
        index, exc = min(failures, key=lambda f: f[0])
        raise PassError(index, exc) from exc
