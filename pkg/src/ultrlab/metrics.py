"""Graded ranking quality metrics: nDCG@k and ERR@k.

Both take labels already arranged in display order (best-first ranking to be
scored), use exponential gain ``2**y - 1``, and truncate at the cutoff or the
list end, whichever comes first.
"""

from typing import Dict, Sequence

import numpy as np

DEFAULT_CUTOFFS = (1, 3, 5, 10)


def dcg_at_k(ranked_labels, k: int) -> float:
    """Discounted cumulative gain: sum of (2^y - 1) / log2(rank + 1) up to k."""
    y = np.asarray(ranked_labels, dtype=np.float64)[: int(k)]
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    if y.size == 0:
        return 0.0
    ranks = np.arange(1, y.size + 1, dtype=np.float64)
    return float(((np.power(2.0, y) - 1.0) / np.log2(ranks + 1.0)).sum())


def ndcg_at_k(ranked_labels, k: int) -> float:
    """DCG normalized by the ideal (label-sorted) DCG.

    An all-zero list has no ideal to fall short of, so it scores 1.0.
    """
    y = np.asarray(ranked_labels, dtype=np.float64)
    ideal = dcg_at_k(np.sort(y)[::-1], k)
    if ideal == 0.0:
        return 1.0
    return dcg_at_k(y, k) / ideal


def err_at_k(ranked_labels, k: int, y_max: int = 4) -> float:
    """Expected reciprocal rank under the cascade stop model.

    Rank i satisfies with probability R_i = (2^y_i - 1) / 2^y_max; the metric
    is sum over ranks of (1/i) R_i prod_{j<i} (1 - R_j).
    """
    if k < 1:
        raise ValueError("cutoff must be >= 1")
    y = np.asarray(ranked_labels, dtype=np.float64)[: int(k)]
    if np.any(y < 0) or np.any(y > y_max):
        raise ValueError(f"labels must lie in [0, {y_max}]")
    R = (np.power(2.0, y) - 1.0) / (2.0 ** y_max)
    err = 0.0
    not_stopped = 1.0
    for i, r in enumerate(R, start=1):
        err += not_stopped * r / i
        not_stopped *= 1.0 - r
    return float(err)


def ranking_metrics(
    ranked_labels, cutoffs: Sequence[int] = DEFAULT_CUTOFFS, y_max: int = 4
) -> Dict[str, float]:
    """nDCG and ERR at every cutoff, keyed 'ndcg@k' / 'err@k'."""
    out = {}
    for k in cutoffs:
        out[f"ndcg@{k}"] = ndcg_at_k(ranked_labels, k)
    for k in cutoffs:
        out[f"err@{k}"] = err_at_k(ranked_labels, k, y_max=y_max)
    return out


def _weight_vector(estimate) -> np.ndarray:
    w = getattr(estimate, "weights", estimate)
    return np.asarray(w, dtype=np.float64)


def normalized_propensity(estimate, ref_position: int = 10) -> np.ndarray:
    """Propensity weights rescaled so the reference rank maps to 1.

    Dividing by a deep rank's weight is how relative estimates from different
    runs become comparable; rank 1 of the rescaled vector is the headline
    'how steep does this model think the bias is' number.
    """
    w = _weight_vector(estimate)
    if not 1 <= ref_position <= w.size:
        raise ValueError(f"ref_position must lie in [1, {w.size}]")
    return w / w[ref_position - 1]


def propensity_error(estimate, truth_curve, eta: float) -> float:
    """Mean absolute relative error against the true curve, scale removed.

    Both the estimate and rho_k**eta are rescaled to their deepest shared
    rank before comparing, so a uniformly scaled estimate scores 0.
    """
    w = _weight_vector(estimate)
    true = np.asarray(truth_curve.values, dtype=np.float64)[: w.size] ** eta
    if true.size != w.size:
        raise ValueError("truth curve shorter than the estimate")
    w_n = w / w[-1]
    t_n = true / true[-1]
    return float(np.mean(np.abs(w_n - t_n) / t_n))
