"""Walk through the position-based click simulator on a toy ranking.

Shows the examination curve, perceived relevance for each grade, a few
sampled sessions, and a Monte Carlo check that empirical click rates land
on the closed-form expectation.
"""

import argparse

import numpy as np

from ultrlab.clicks import (
    PositionBiasCurve,
    SimulationConfig,
    expected_click_probability,
    rank_by_scores,
    sample_click_matrix,
    sample_session,
)
from ultrlab.data import LabeledDoc, QueryGroup


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eta", type=float, default=1.0,
                        help="position bias steepness exponent")
    parser.add_argument("--epsilon", type=float, default=0.1,
                        help="click noise on irrelevant documents")
    parser.add_argument("--sessions", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    config = SimulationConfig(eta=args.eta, epsilon=args.epsilon)
    labels = np.array([3, 0, 4, 1, 2])
    curve = PositionBiasCurve.inverse_rank(labels.size)
    rng = np.random.default_rng(args.seed)

    print("examination probability by rank (1/k curve, eta =", args.eta, ")")
    exam = curve.examination(args.eta)
    for k, e in enumerate(exam, start=1):
        print(f"  rank {k}: {e:.4f}")

    print("\ndisplayed order for scores [0.3, 0.9, 0.1, 0.5, 0.9]:")
    order = rank_by_scores([f"d{i}" for i in range(5)],
                           np.array([0.3, 0.9, 0.1, 0.5, 0.9]))
    print(" ", order)

    group = QueryGroup("q0", [LabeledDoc(f"d{i}", np.zeros(2), int(y))
                              for i, y in enumerate(labels)])
    print("\nthree sampled sessions over labels", labels.tolist())
    for _ in range(3):
        log = sample_session(group, range(labels.size), curve, config, rng)
        print("  displayed", log.ranked_doc_ids,
              "clicked", log.clicks.tolist())

    tiled = np.tile(labels, (args.sessions, 1))
    clicks = sample_click_matrix(tiled, curve, config, rng)
    print(f"\nclick rate over {args.sessions} sessions vs expectation:")
    print("  rank  label  empirical  expected")
    for k in range(labels.size):
        expected = expected_click_probability(int(labels[k]), k + 1,
                                              curve, config)
        print(f"  {k + 1:4d}  {labels[k]:5d}  {clicks[:, k].mean():9.4f}"
              f"  {expected:8.4f}")


if __name__ == "__main__":
    main()
