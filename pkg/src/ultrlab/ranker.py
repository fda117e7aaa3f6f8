"""The relevance scorer f(x) and its propensity-weighted listwise loss."""

from typing import Optional, Sequence

import numpy as np

from .autodiff import MLP, Parameter, Tensor, weighted_listwise_ce
from .clicks import SimulationConfig, perceived_relevance_probability
from .propensity import PropensityEstimate, clipped_inverse_weights

DEFAULT_HIDDEN = (64, 32, 16)


class RankerMLP:
    """Per-document scorer: feedforward net with ELU, dropout, scalar output."""

    def __init__(self, feature_dim: int, rng: np.random.Generator,
                 hidden: Sequence[int] = DEFAULT_HIDDEN, dropout: float = 0.1):
        if feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        self.feature_dim = feature_dim
        self.net = MLP(feature_dim, hidden, 1, rng, "ranker", dropout=dropout)

    def forward(self, features: np.ndarray, train: bool = False,
                rng: Optional[np.random.Generator] = None,
                dropout_masks: Optional[Sequence[np.ndarray]] = None) -> Tensor:
        """Score a stack of feature rows; returns a column of scores, one per row."""
        X = np.asarray(features, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise ValueError(f"features must be (n, {self.feature_dim})")
        if X.shape[0] == 0:
            raise ValueError("empty document list")
        return self.net(Tensor(X), train=train, rng=rng, dropout_masks=dropout_masks)

    def parameters(self) -> Sequence[Parameter]:
        return self.net.parameters()


def score_list(model: RankerMLP, features, mode: str = "eval",
               rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Plain-array scores for a document list; eval mode is deterministic."""
    if mode not in ("eval", "train"):
        raise ValueError("mode must be 'eval' or 'train'")
    X = np.stack([np.asarray(f, dtype=np.float64) for f in features])
    out = model.forward(X, train=(mode == "train"), rng=rng)
    return out.data.reshape(-1).copy()


def ipw_ranking_loss(scores: Tensor, clicks: np.ndarray,
                     propensity, tau: float = 0.05) -> Tensor:
    """Inverse-propensity-weighted listwise softmax cross-entropy on clicks.

    Each clicked position k contributes its negative log softmax score times
    w_k = weight_1 / max(weight_k, tau); unclicked positions only enter
    through the softmax normalizer. Rows are whole sessions; the loss is the
    mean over rows. Weights come from a PropensityEstimate or any positive
    position-weight vector normalized at position 1.
    """
    weights = propensity.weights if isinstance(propensity, PropensityEstimate) \
        else np.asarray(propensity, dtype=np.float64)
    c = np.asarray(clicks, dtype=np.float64)
    if c.shape != scores.data.shape:
        raise ValueError("clicks must match scores shape")
    n_pos = scores.data.shape[-1]
    if weights.size < n_pos:
        raise ValueError(f"propensity covers {weights.size} positions, need {n_pos}")
    inv = clipped_inverse_weights(weights[:n_pos], tau)
    return weighted_listwise_ce(scores, c * inv)


def full_information_loss(scores: Tensor, labels: np.ndarray,
                          config: SimulationConfig) -> Tensor:
    """Listwise loss weighted by true perceived-relevance probabilities.

    This is what the inverse-propensity-weighted click loss estimates: with
    oracle propensities and a curve whose top value is 1, the Monte Carlo
    average of the click loss over sessions converges to this quantity.
    """
    rel = perceived_relevance_probability(np.asarray(labels), config)
    if rel.shape != scores.data.shape:
        raise ValueError("labels must match scores shape")
    return weighted_listwise_ce(scores, rel)
