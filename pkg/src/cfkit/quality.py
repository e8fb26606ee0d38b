"""Prediction and recommendation quality measures, plus the results grid.

All measures read ``PREDICTIONS`` from the test users' stores, so KNN (either
orientation) and MF output are scored the same way.  Every measure is a
macro-average: a per-user value is computed in parallel and the per-user
values are folded in test-user order during teardown.
"""

from __future__ import annotations

import csv
import io
import math
import sys
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .engine import ElementPass, PassTarget, run_pass
from .errors import EmptyTestSetError, PipelineOrderError
from .knn import PREDICTIONS


class MeasureScore(NamedTuple):
    name: str
    value: float | None
    users_counted: int


def _predictions(tu):
    preds = tu.get(PREDICTIONS)
    if preds is None:
        raise PipelineOrderError(PREDICTIONS, "quality measure")
    return preds


def _mean_of(partials):
    """Fixed-order mean of the non-None entries; (None, 0) if there are none."""
    total = 0.0
    count = 0
    for p in partials:
        if p is not None:
            total += p
            count += 1
    return (total / count if count else None), count


class _MeasurePass(ElementPass):
    key = ""

    def setup(self, model):
        if not model.test_users:
            raise EmptyTestSetError("the model has no test users")
        for tu in model.test_users:
            _predictions(tu)

    def per_element(self, model, index):
        tu = model.test_users[index]
        tu.put(self.key, self.user_value(model, tu))

    def user_value(self, model, tu):
        raise NotImplementedError

    def teardown(self, model):
        self.result = self.fold([tu.get(self.key) for tu in model.test_users])


class MAEPass(_MeasurePass):
    key = "MAE"

    def __init__(self, normalize=False):
        self.normalize = normalize

    def user_value(self, model, tu):
        preds = _predictions(tu)
        total = 0.0
        count = 0
        for p, r in zip(preds, tu.test_values):
            if not math.isnan(p):
                total += abs(p - r)
                count += 1
        if not count:
            return None
        mae = total / count
        return mae / (model.max_rating - model.min_rating) if self.normalize else mae

    def fold(self, partials):
        value, n = _mean_of(partials)
        return MeasureScore("MAE", value, n)


class CoveragePass(_MeasurePass):
    key = "COVERAGE"

    def user_value(self, model, tu):
        if not tu.test_indices:
            return None
        preds = _predictions(tu)
        return int(np.count_nonzero(~np.isnan(preds))) / len(preds)

    def fold(self, partials):
        value, n = _mean_of(partials)
        return MeasureScore("COVERAGE", value, n)


def top_n(test_indices, preds, n):
    """Indices of the ``n`` highest defined predictions, ties by lower index."""
    ranked = sorted((-p, i) for i, p in zip(test_indices, preds) if not math.isnan(p))
    return [i for _, i in ranked[:n]]


class PrecisionRecallPass(_MeasurePass):
    key = "PRECISION_RECALL"

    def __init__(self, n, threshold):
        self.n = n
        self.threshold = threshold

    def setup(self, model):
        if self.n < 1:
            raise ValueError(f"recommendation list size must be >= 1, got {self.n}")
        if not model.min_rating <= self.threshold <= model.max_rating:
            raise ValueError(
                f"relevance threshold {self.threshold} outside rating range [{model.min_rating}, {model.max_rating}]"
            )
        super().setup(model)

    def user_value(self, model, tu):
        recommended = set(top_n(tu.test_indices, _predictions(tu), self.n))
        relevant = {i for i, r in zip(tu.test_indices, tu.test_values) if r >= self.threshold}
        hits = len(recommended & relevant)
        precision = hits / len(recommended) if recommended else None
        recall = hits / len(relevant) if relevant else None
        return precision, recall

    def fold(self, partials):
        p, np_ = _mean_of(x[0] for x in partials)
        r, nr = _mean_of(x[1] for x in partials)
        if p is None or r is None:
            f1 = None
        else:
            f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return (
            MeasureScore("PRECISION", p, np_),
            MeasureScore("RECALL", r, nr),
            MeasureScore("F1", f1, min(np_, nr)),
        )


def measure_mae(model, workers=1, normalize=False) -> MeasureScore:
    """Mean over test users of their mean absolute prediction error.

    Users without a single defined prediction are left out; the number of
    users that did contribute is ``users_counted``.
    """
    p = MAEPass(normalize)
    run_pass(model, PassTarget.TEST_USERS, p, workers)
    return p.result


def measure_coverage(model, workers=1) -> MeasureScore:
    p = CoveragePass()
    run_pass(model, PassTarget.TEST_USERS, p, workers)
    return p.result


def measure_precision_recall(model, n, threshold, workers=1):
    """(precision, recall, F1) at list size ``n`` and relevance ``threshold``.

    F1 is taken from the averaged precision and recall.
    """
    p = PrecisionRecallPass(n, threshold)
    run_pass(model, PassTarget.TEST_USERS, p, workers)
    return p.result


@dataclass
class ResultsGrid:
    """Scores of one measure indexed by (row key, column key)."""

    measure_name: str
    row_keys: list
    column_keys: list
    row_label: str = "k"
    cells: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.row_keys = list(self.row_keys)
        self.column_keys = list(self.column_keys)

    def _check(self, row, column):
        if row not in self.row_keys:
            raise KeyError(f"unknown row key {row!r}")
        if column not in self.column_keys:
            raise KeyError(f"unknown column key {column!r}")

    def put(self, row, column, score) -> None:
        self._check(row, column)
        if isinstance(score, MeasureScore):
            score = score.value
        self.cells[(row, column)] = None if score is None else float(score)

    def get(self, row, column) -> float | None:
        self._check(row, column)
        return self.cells.get((row, column))

    def format(self, precision: int = 6) -> str:
        header = [self.row_label] + [str(c) for c in self.column_keys]
        body = []
        for r in self.row_keys:
            line = [str(r)]
            for c in self.column_keys:
                v = self.cells.get((r, c))
                line.append("-" if v is None else f"{v:.{precision}f}")
            body.append(line)
        widths = [max(len(row[j]) for row in [header] + body) for j in range(len(header))]
        out = [self.measure_name]
        for row in [header] + body:
            out.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
        return "\n".join(out) + "\n"

    def print(self, file=None) -> None:
        (file or sys.stdout).write(self.format())

    def to_csv(self, path=None) -> str:
        """RFC 4180 CSV, full float precision, empty field for missing cells."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow([self.row_label] + [str(c) for c in self.column_keys])
        for r in self.row_keys:
            cells = [self.cells.get((r, c)) for c in self.column_keys]
            writer.writerow([r] + ["" if v is None else repr(v) for v in cells])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text
