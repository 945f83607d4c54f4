#!/usr/bin/env python3
"""Materialize the 20 Newsgroups data used by acceptance criteria 5 and 6.

Needs network access (scikit-learn downloads the corpus on first use).
Writes, under --out (default: <repo>/data/20news):

  4class/train/<class>/<i>.txt   four-group subset, headers/footers/quotes
  4class/test/<class>/<i>.txt    stripped, standard train/test split
  qa/docs.jsonl                  every train+test document (all 20 groups,
                                 stripped), one {"text": ...} per line

Both layouts feed the acceptance suite directly:
  LOWML_20NEWS_DIR=<out> ctest --test-dir build -R acceptance_5
"""

import argparse
import json
import pathlib
import sys

FOUR_CLASSES = [
    "alt.atheism",
    "comp.graphics",
    "sci.med",
    "soc.religion.christian",
]

REMOVE = ("headers", "footers", "quotes")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    default_out = pathlib.Path(__file__).resolve().parent.parent / "data" / "20news"
    parser.add_argument("--out", type=pathlib.Path, default=default_out)
    args = parser.parse_args()

    try:
        from sklearn.datasets import fetch_20newsgroups
    except ImportError:
        print("scikit-learn is required: pip install scikit-learn", file=sys.stderr)
        return 1

    try:
        subset_train = fetch_20newsgroups(
            subset="train", remove=REMOVE, categories=FOUR_CLASSES
        )
        subset_test = fetch_20newsgroups(
            subset="test", remove=REMOVE, categories=FOUR_CLASSES
        )
        full_train = fetch_20newsgroups(subset="train", remove=REMOVE)
        full_test = fetch_20newsgroups(subset="test", remove=REMOVE)
    except Exception as exc:  # noqa: BLE001 - report and fail loudly
        print(f"download failed (network required): {exc}", file=sys.stderr)
        return 1

    out = args.out
    for split_name, subset in (("train", subset_train), ("test", subset_test)):
        counts = {}
        for text, target in zip(subset.data, subset.target):
            cls = subset.target_names[target]
            if not text.strip():
                continue  # empty after stripping; useless for training
            i = counts.setdefault(cls, 0)
            counts[cls] = i + 1
            path = out / "4class" / split_name / cls / f"{i}.txt"
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        total = sum(counts.values())
        print(f"4class/{split_name}: {total} documents over {len(counts)} classes")

    qa_path = out / "qa" / "docs.jsonl"
    qa_path.parent.mkdir(parents=True, exist_ok=True)
    docs = full_train.data + full_test.data
    with qa_path.open("w", encoding="utf-8") as f:
        for text in docs:
            f.write(json.dumps({"text": text}) + "\n")
    print(f"qa/docs.jsonl: {len(docs)} documents")
    print(f"done: {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
