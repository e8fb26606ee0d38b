"""``cfkit`` command line: dataset stats, KNN sweeps and PMF runs.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 runtime error.

Every flag can also come from ``--config FILE`` with one ``key = value`` per
line (keys are flag names without the dashes; lists comma-separated).  Flags
on the command line win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from .datamodel import build_model, load_dataset
from .engine import default_workers
from .errors import CFError, ConfigError, DatasetError, TrainingDivergedError
from .knn import METRICS, Aggregation, Orientation, aggregation_pass, neighbors_pass, similarity_pass
from .mf import predictions_pass, train_pmf
from .quality import ResultsGrid, measure_coverage, measure_mae, measure_precision_recall

log = logging.getLogger("cfkit")

MEASURES = ("MAE", "COVERAGE", "PRECISION", "RECALL", "F1")
LISTING_KS = (50, 100, 150, 200, 250, 300, 350, 400)


@dataclass
class ExperimentConfig:
    dataset: str | None = None
    separator: str = "::"
    test_users: float = 0.2
    test_items: float = 0.2
    seed: int = 0
    workers: int = 0
    csv: str | None = None
    min_rating: float | None = None
    max_rating: float | None = None
    # knn
    orientation: str = "user"
    metric: list[str] = field(default_factory=lambda: ["COR", "JMSD"])
    k: list[int] = field(default_factory=lambda: list(LISTING_KS))
    aggregation: str = "dfm"
    measure: list[str] = field(default_factory=lambda: ["MAE"])
    n: int | None = None
    theta: float | None = None
    normalize_mae: bool = False
    # mf
    factors: int = 10
    learning_rate: float = 0.01
    regularization: float = 0.05
    epochs: int = 50
    init_seed: int = 0

    def resolved_workers(self) -> int:
        return self.workers or default_workers()

    def validate(self, pipeline: str | None = None) -> "ExperimentConfig":
        if not self.dataset:
            raise ConfigError("--dataset is required")
        for name in ("test_users", "test_items"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"--{name.replace('_', '-')} must be in [0, 1]")
        if self.workers < 0:
            raise ConfigError("--workers must be >= 0 (0 = auto)")
        if pipeline == "knn":
            self.metric = [m.upper() for m in self.metric]
            bad = [m for m in self.metric if m not in METRICS]
            if bad or not self.metric:
                raise ConfigError(f"unknown metric {', '.join(bad) or '(none)'}; valid: {', '.join(METRICS)}")
            if not self.k:
                raise ConfigError("--k needs at least one value")
            if any(k < 1 for k in self.k) or any(a >= b for a, b in zip(self.k, self.k[1:])):
                raise ConfigError("--k values must be positive and strictly increasing")
            try:
                Aggregation.parse(self.aggregation)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if self.orientation not in ("user", "item"):
                raise ConfigError("--orientation must be 'user' or 'item'")
        self.measure = [m.upper() for m in self.measure]
        bad = [m for m in self.measure if m not in MEASURES]
        if bad or not self.measure:
            raise ConfigError(f"unknown measure {', '.join(bad) or '(none)'}; valid: {', '.join(MEASURES)}")
        if {"PRECISION", "RECALL", "F1"} & set(self.measure) and (self.n is None or self.theta is None):
            raise ConfigError("PRECISION/RECALL/F1 need both --n and --theta")
        if pipeline == "mf":
            if self.factors < 1 or self.epochs < 1 or self.learning_rate <= 0 or self.regularization < 0:
                raise ConfigError("invalid MF hyperparameters")
        return self


def _int_list(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _str_list(text):
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONVERT = {
    "separator": str, "dataset": str, "csv": str, "orientation": str, "aggregation": str,
    "test_users": float, "test_items": float, "min_rating": float, "max_rating": float,
    "theta": float, "learning_rate": float, "regularization": float,
    "seed": int, "workers": int, "n": int, "factors": int, "epochs": int, "init_seed": int,
    "k": _int_list, "metric": _str_list, "measure": _str_list, "normalize_mae": _bool,
}


def read_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("-", "_")
            if key not in _CONVERT:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _CONVERT[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return values


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


class _ListAppend(argparse.Action):
    """Repeatable flag that also accepts comma-separated values."""

    def __call__(self, parser, namespace, values, option_string=None):
        current = list(getattr(namespace, self.dest, None) or [])
        current.extend(_str_list(values))
        setattr(namespace, self.dest, current)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfkit", description="Collaborative filtering experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def shared(p):
        p.add_argument("--config", help="key = value file; command-line flags override it")
        p.add_argument("--dataset")
        p.add_argument("--separator")
        p.add_argument("--test-users", type=float)
        p.add_argument("--test-items", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, help="0 = number of processors")
        p.add_argument("--csv", help="CSV output path (one file per measure when several)")
        p.add_argument("--min-rating", type=float)
        p.add_argument("--max-rating", type=float)

    def measures(p):
        p.add_argument("--measure", action=_ListAppend, help=f"repeatable: {'|'.join(MEASURES)}")
        p.add_argument("--n", type=int, help="recommendation list size")
        p.add_argument("--theta", type=float, help="relevance threshold")
        p.add_argument("--normalize-mae", action="store_const", const=True)

    stats = sub.add_parser("stats", help="dataset summary", argument_default=argparse.SUPPRESS)
    shared(stats)

    knn = sub.add_parser("knn", help="KNN sweep over metrics x k", argument_default=argparse.SUPPRESS)
    shared(knn)
    knn.add_argument("--orientation", choices=("user", "item"))
    knn.add_argument("--metric", action=_ListAppend, help=f"repeatable: {'|'.join(METRICS)}")
    knn.add_argument("--k", type=_int_list, help="comma-separated neighbor counts")
    knn.add_argument("--aggregation", help="mean|wmean|dfm")
    measures(knn)

    mf = sub.add_parser("mf", help="PMF training and evaluation", argument_default=argparse.SUPPRESS)
    shared(mf)
    mf.add_argument("--factors", type=int)
    mf.add_argument("--learning-rate", type=float)
    mf.add_argument("--regularization", type=float)
    mf.add_argument("--epochs", type=int)
    mf.add_argument("--init-seed", type=int)
    measures(mf)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    known = {f.name for f in fields(ExperimentConfig)}
    values.update({k: v for k, v in vars(args).items() if k in known})
    return ExperimentConfig(**values)


def load_model(cfg: ExperimentConfig):
    triples, duplicates = load_dataset(cfg.dataset, cfg.separator)
    model = build_model(
        triples, cfg.test_users, cfg.test_items, cfg.seed, min_rating=cfg.min_rating, max_rating=cfg.max_rating
    )
    log.info("loaded %d ratings (%d duplicates dropped)", len(triples), duplicates)
    return model


def _score_measures(model, cfg, workers):
    scores = {}
    wanted = set(cfg.measure)
    if "MAE" in wanted:
        scores["MAE"] = measure_mae(model, workers, normalize=cfg.normalize_mae)
    if "COVERAGE" in wanted:
        scores["COVERAGE"] = measure_coverage(model, workers)
    if wanted & {"PRECISION", "RECALL", "F1"}:
        for s in measure_precision_recall(model, cfg.n, cfg.theta, workers):
            scores[s.name] = s
    return {m: scores[m] for m in cfg.measure}


def run_knn_experiment(cfg: ExperimentConfig, model=None) -> dict[str, ResultsGrid]:
    """One similarity pass per metric, then neighbors/aggregation/measures per k."""
    model = model or load_model(cfg)
    workers = cfg.resolved_workers()
    orientation = Orientation(cfg.orientation)
    grids = {m: ResultsGrid(m, cfg.k, cfg.metric) for m in cfg.measure}
    for metric in cfg.metric:
        t0 = time.perf_counter()
        similarity_pass(model, orientation, metric, workers)
        log.info("%s similarities in %.2fs", metric, time.perf_counter() - t0)
        for k in cfg.k:
            neighbors_pass(model, orientation, k, workers)
            aggregation_pass(model, orientation, cfg.aggregation, workers)
            for name, score in _score_measures(model, cfg, workers).items():
                grids[name].put(k, metric, score)
        log.info("%s sweep done in %.2fs", metric, time.perf_counter() - t0)
    return grids


def run_mf_experiment(cfg: ExperimentConfig, model=None) -> dict[str, ResultsGrid]:
    model = model or load_model(cfg)
    workers = cfg.resolved_workers()
    fm = train_pmf(model, cfg.factors, cfg.learning_rate, cfg.regularization, cfg.epochs, cfg.init_seed)
    predictions_pass(model, fm, workers)
    grids = {m: ResultsGrid(m, [cfg.epochs], ["PMF"], row_label="epochs") for m in cfg.measure}
    for name, score in _score_measures(model, cfg, workers).items():
        grids[name].put(cfg.epochs, "PMF", score)
    return grids


def stats_text(model) -> str:
    lines = [
        f"users: {model.num_users}",
        f"items: {model.num_items}",
        f"test users: {len(model.test_users)}",
        f"test items: {len(model.test_items)}",
        f"ratings: {model.num_ratings}",
        f"test ratings: {model.num_test_ratings}",
        f"rating range: [{model.min_rating:g}, {model.max_rating:g}]",
        f"density: {model.density:.6f}",
        f"split seed: {model.split_seed}",
    ]
    return "\n".join(lines) + "\n"


def csv_paths(base, measures) -> dict[str, Path]:
    base = Path(base)
    if len(measures) == 1:
        return {measures[0]: base}
    return {m: base.with_name(f"{base.stem}_{m}{base.suffix}") for m in measures}


def emit(grids: dict[str, ResultsGrid], cfg: ExperimentConfig, out=None) -> None:
    out = out or sys.stdout
    for grid in grids.values():
        grid.print(out)
        out.write("\n")
    if cfg.csv:
        for name, path in csv_paths(cfg.csv, list(grids)).items():
            grids[name].to_csv(path)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s"
        )
        cfg = config_from_args(args).validate(args.command)
        if args.command == "stats":
            sys.stdout.write(stats_text(load_model(cfg)))
        elif args.command == "knn":
            emit(run_knn_experiment(cfg), cfg)
        else:
            emit(run_mf_experiment(cfg), cfg)
        return 0
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DatasetError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except CFError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
