"""Write a seeded MovieLens-style ratings file (user::item::rating)."""

import argparse

from cfkit.synthetic import generate_ratings, write_ratings


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--users", type=int, default=500)
    ap.add_argument("--items", type=int, default=800)
    ap.add_argument("--ratings", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=2017)
    ap.add_argument("--separator", default="::")
    args = ap.parse_args()
    triples = generate_ratings(args.users, args.items, args.ratings, seed=args.seed)
    write_ratings(triples, args.out, args.separator)
    print(f"wrote {len(triples)} ratings to {args.out}")


if __name__ == "__main__":
    main()
