"""Position-based click simulation.

A user examines rank ``k`` with probability ``rho_k ** eta`` and, having
examined, clicks with the graded perceived-relevance probability
``epsilon + (1 - epsilon) * (2**y - 1) / (2**y_max - 1)``. A click requires
both: ``c = e and r``. Examinations and relevance draws are latent; only
clicks are logged.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .data import QueryGroup


@dataclass
class SimulationConfig:
    """Knobs of the click model."""

    eta: float = 1.0
    epsilon: float = 0.1
    y_max: int = 4
    top_n: int = 10

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.y_max < 1:
            raise ValueError("y_max must be >= 1")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


@dataclass
class PositionBiasCurve:
    """Examination probabilities per displayed rank, index 0 holding rank 1."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("curve must be a non-empty 1-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("curve has non-finite values")
        if np.any(self.values <= 0.0) or np.any(self.values > 1.0):
            raise ValueError("curve values must lie in (0, 1]")

    def __len__(self) -> int:
        return self.values.size

    @classmethod
    def inverse_rank(cls, n_positions: int) -> "PositionBiasCurve":
        """The default curve rho_k = 1/k."""
        if n_positions < 1:
            raise ValueError("n_positions must be >= 1")
        return cls(values=1.0 / np.arange(1, n_positions + 1, dtype=np.float64))

    @classmethod
    def from_file(cls, path) -> "PositionBiasCurve":
        """Load one float per line (blank lines and # comments skipped)."""
        vals = []
        with open(path) as fh:
            for raw in fh:
                line = raw.partition("#")[0].strip()
                if line:
                    vals.append(float(line))
        return cls(values=np.array(vals, dtype=np.float64))

    def examination(self, eta: float) -> np.ndarray:
        """Examination probabilities rho_k ** eta for every rank."""
        return self.values ** eta


def perceived_relevance_probability(labels, config: SimulationConfig) -> np.ndarray:
    """P(r=1 | y) for graded labels, the epsilon-floored exponential gain map."""
    y = np.asarray(labels, dtype=np.float64)
    if np.any(y < 0) or np.any(y > config.y_max):
        raise ValueError(f"labels must lie in [0, {config.y_max}]")
    gain = (np.power(2.0, y) - 1.0) / (2.0 ** config.y_max - 1.0)
    return config.epsilon + (1.0 - config.epsilon) * gain


def examination_probability(curve: PositionBiasCurve, position: int, eta: float) -> float:
    """P(e=1 | k) for a 1-based displayed position."""
    if not 1 <= position <= len(curve):
        raise ValueError(f"position {position} outside curve of length {len(curve)}")
    return float(curve.values[position - 1] ** eta)


def rank_by_scores(doc_ids: Sequence[str], scores: np.ndarray) -> List[int]:
    """Indices sorted by descending score, ties broken by ascending doc_id."""
    scores = np.asarray(scores, dtype=np.float64)
    if len(doc_ids) != scores.size:
        raise ValueError("doc_ids and scores length mismatch")
    return sorted(range(scores.size), key=lambda i: (-scores[i], doc_ids[i]))


@dataclass
class ClickLog:
    """One logged session: the displayed ranking and its binary clicks."""

    query_id: str
    ranked_doc_ids: List[str]
    ranked_indices: np.ndarray
    clicks: np.ndarray

    def __post_init__(self):
        self.ranked_indices = np.asarray(self.ranked_indices, dtype=np.int64)
        self.clicks = np.asarray(self.clicks, dtype=np.int8)
        if not (len(self.ranked_doc_ids) == self.ranked_indices.size == self.clicks.size):
            raise ValueError("ranking and click arrays must share a length")
        if np.any((self.clicks != 0) & (self.clicks != 1)):
            raise ValueError("clicks must be 0/1")


def sample_session(
    group: QueryGroup,
    ranked_indices: Sequence[int],
    curve: PositionBiasCurve,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> ClickLog:
    """Sample one session for a query under a fixed displayed ranking.

    Only the first ``top_n`` ranks are shown; docs beyond are never examined.
    """
    shown = np.asarray(ranked_indices, dtype=np.int64)[: config.top_n]
    if shown.size > len(curve):
        raise ValueError(f"ranking of {shown.size} exceeds curve length {len(curve)}")
    labels = group.labels[shown]
    exam_p = curve.examination(config.eta)[: shown.size]
    rel_p = perceived_relevance_probability(labels, config)
    examined = rng.random(shown.size) < exam_p
    relevant = rng.random(shown.size) < rel_p
    clicks = (examined & relevant).astype(np.int8)
    return ClickLog(
        query_id=group.query_id,
        ranked_doc_ids=[group.docs[i].doc_id for i in shown],
        ranked_indices=shown,
        clicks=clicks,
    )


def sample_click_matrix(
    ranked_labels: np.ndarray,
    curve: PositionBiasCurve,
    config: SimulationConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized session sampling: one row of clicks per already-ranked label row."""
    ranked_labels = np.asarray(ranked_labels)
    if ranked_labels.ndim != 2:
        raise ValueError("ranked_labels must be (batch, positions)")
    n_pos = ranked_labels.shape[1]
    if n_pos > len(curve):
        raise ValueError(f"{n_pos} positions exceed curve length {len(curve)}")
    exam_p = curve.examination(config.eta)[:n_pos]
    rel_p = perceived_relevance_probability(ranked_labels, config)
    examined = rng.random(ranked_labels.shape) < exam_p
    relevant = rng.random(ranked_labels.shape) < rel_p
    return (examined & relevant).astype(np.int8)


def expected_click_probability(
    label: int, position: int, curve: PositionBiasCurve, config: SimulationConfig
) -> float:
    """Closed-form P(c=1) for a grade at a rank; the simulator's ground truth."""
    rho = examination_probability(curve, position, config.eta)
    rel = perceived_relevance_probability(np.array([label]), config)[0]
    return rho * float(rel)
