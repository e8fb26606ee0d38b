"""COR vs JMSD user-to-user KNN with deviation-from-mean, MAE over k = 50..400.

Runs on a ratings file if given, otherwise on freshly generated synthetic data.
Uses the library directly rather than the CLI, to show the pass-by-pass API.
"""

import argparse
import tempfile
import time
from pathlib import Path

from cfkit.datamodel import build_model, load_dataset
from cfkit.knn import Orientation, aggregation_pass, get_similarity, neighbors_pass, similarity_pass
from cfkit.quality import ResultsGrid, measure_mae
from cfkit.synthetic import generate_ratings, write_ratings

KS = [50, 100, 150, 200, 250, 300, 350, 400]
METRICS = ["COR", "JMSD"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset")
    ap.add_argument("--separator", default="::")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--csv")
    args = ap.parse_args()

    path = args.dataset
    if path is None:
        path = Path(tempfile.mkdtemp()) / "ratings.dat"
        write_ratings(generate_ratings(seed=2017), path)

    triples, _ = load_dataset(path, args.separator)
    model = build_model(triples, 0.20, 0.20, seed=0)
    mae = ResultsGrid("MAE", KS, METRICS)

    t0 = time.perf_counter()
    for sm in METRICS:
        similarity_pass(model, Orientation.USER_TO_USER, sm, args.workers)
        for k in KS:
            neighbors_pass(model, Orientation.USER_TO_USER, k, args.workers)
            aggregation_pass(model, Orientation.USER_TO_USER, "dfm", args.workers)
            mae.put(k, sm, measure_mae(model, args.workers))

    mae.print()
    if args.csv:
        mae.to_csv(args.csv)
    tu = model.test_users[0]
    other = (tu.index + 1) % model.num_users
    print(f"\nJMSD similarity of test user {tu.code} with user {model.users[other].code}: {get_similarity(tu, other)}")
    print(f"elapsed {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
