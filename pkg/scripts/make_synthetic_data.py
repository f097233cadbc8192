"""Regenerate the bundled synthetic corpus and case-count files.

    python3 scripts/make_synthetic_data.py
"""

import argparse
from pathlib import Path

from topic_trends.synthetic import case_counts, tweet_corpus, write_case_csv, write_jsonl

DATA = Path(__file__).resolve().parents[1] / "src" / "topic_trends" / "data"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=2020)
    ap.add_argument("--out-dir", default=str(DATA))
    args = ap.parse_args()
    out = Path(args.out_dir)
    write_jsonl(tweet_corpus(args.n, args.seed), out / "synthetic_corpus.jsonl")
    write_case_csv(case_counts(), out / "synthetic_cases.csv")


if __name__ == "__main__":
    main()
