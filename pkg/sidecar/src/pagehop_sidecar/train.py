"""Train a reranker artifact from an exported pairs TSV."""
from __future__ import annotations

import argparse
import sys

from . import SidecarError
from .training import train_reranker


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="pagehop-sidecar-train",
        description="Fit the bag-of-words relevance reranker on question/context pairs.",
    )
    parser.add_argument("--pairs", required=True, help="TSV pairs file (pagehop-pairs/1)")
    parser.add_argument("--out", required=True, help="artifact output path (JSON)")
    parser.add_argument("--epochs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--dim", type=int, default=4096)
    parser.add_argument("--learning-rate", type=float, default=0.5)
    args = parser.parse_args(argv)
    try:
        path = train_reranker(args.pairs, args.out, epochs=args.epochs,
                              seed=args.seed, dim=args.dim,
                              learning_rate=args.learning_rate)
    except SidecarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"trained reranker -> {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
