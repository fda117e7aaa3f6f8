"""Propensity models and their training steps.

Two estimators of per-position examination probability live here. The
position-only model keeps one logit per rank and is trained against clicks
with inverse-relevance weights (the dual of the ranker's inverse-propensity
loss). The logging-policy-aware model factors examination into a document
encoder (how strongly features drove the displayed position) plus a position
embedding, shares one scalar head between both views, and is trained in two
steps per iteration: fit the document pathway to policy targets, then freeze
it and fit only the position embeddings to base propensity targets. Averaging
the squashed head over documents at a forced position reads off an
examination probability with the document pathway held at its distribution,
which strips the policy-induced correlation out of the estimate.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .autodiff import (
    MLP,
    AdaGrad,
    Parameter,
    Tensor,
    freeze_parameters,
    unfreeze_parameters,
)
from .autodiff import weighted_listwise_ce

DEFAULT_TAU = 0.05


class FreezeContractError(RuntimeError):
    """The document pathway changed while only position embeddings may move."""


def clipped_inverse_weights(weights: np.ndarray, tau: float = DEFAULT_TAU) -> np.ndarray:
    """weight_1 / max(weight_k, tau): inverse weights with a variance floor."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise ValueError("empty weight vector")
    if np.all(w <= 0.0):
        raise ValueError("degenerate weights: nothing positive to invert")
    if np.any(w < 0.0):
        raise ValueError("weights must be nonnegative")
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    return w[0] / np.maximum(w, tau)


@dataclass
class PropensityEstimate:
    """Relative examination probabilities per rank, pinned to 1 at rank 1."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ValueError("weights must be a non-empty vector")
        if self.weights[0] != 1.0:
            raise ValueError("weights must be normalized to 1 at position 1")
        if np.any(self.weights <= 0.0) or np.any(self.weights > 1.0):
            raise ValueError("weights must lie in (0, 1]")

    def __len__(self) -> int:
        return self.weights.size

    @classmethod
    def from_raw(cls, raw) -> "PropensityEstimate":
        """Normalize positives by the first entry; anything above 1 saturates."""
        raw = np.asarray(raw, dtype=np.float64)
        if raw.size == 0 or np.any(raw <= 0.0):
            raise ValueError("raw weights must be positive")
        return cls(weights=np.minimum(raw / raw[0], 1.0))

    @classmethod
    def uniform(cls, n_positions: int) -> "PropensityEstimate":
        """All ranks weighted equally: inverse weighting degenerates to none."""
        return cls(weights=np.ones(n_positions))

    @classmethod
    def from_curve(cls, curve, eta: float) -> "PropensityEstimate":
        """The simulator's true relative propensities rho_k**eta / rho_1**eta."""
        return cls.from_raw(curve.examination(eta))

    def as_csv(self, ref_position: int = 10) -> str:
        """Rows `position,weight,normalized_weight_ref10`."""
        ref = min(ref_position, len(self)) - 1
        lines = ["position,weight,normalized_weight_ref10"]
        for i, w in enumerate(self.weights, start=1):
            lines.append(f"{i},{float(w)!r},{float(w / self.weights[ref])!r}")
        return "\n".join(lines) + "\n"


class PositionPropensityModel:
    """One trainable logit per rank; softmax turns them into relative weights."""

    def __init__(self, n_positions: int):
        if n_positions < 1:
            raise ValueError("n_positions must be >= 1")
        self.n_positions = n_positions
        self.logits = Parameter(np.zeros((1, n_positions)), "position_logits")

    def batch_scores(self, batch_rows: int, n_positions: Optional[int] = None) -> Tensor:
        """The logits repeated per session row, so listwise losses apply rowwise."""
        n = self.n_positions if n_positions is None else n_positions
        if not 1 <= n <= self.n_positions:
            raise ValueError(f"n_positions must lie in [1, {self.n_positions}]")
        row = self.logits if n == self.n_positions else self.logits.first_cols(n)
        return row.take_rows(np.zeros(batch_rows, dtype=np.int64))

    def parameters(self) -> List[Parameter]:
        return [self.logits]


def dla_propensity(model: PositionPropensityModel) -> PropensityEstimate:
    """Softmax over the position logits, renormalized to rank 1."""
    z = model.logits.data.reshape(-1)
    z = z - z.max()
    p = np.exp(z)
    return PropensityEstimate.from_raw(p / p.sum())


def irw_propensity_loss(position_scores: Tensor, clicks: np.ndarray,
                        relevance_weights: np.ndarray, tau: float = DEFAULT_TAU) -> Tensor:
    """Inverse-relevance-weighted listwise loss on the position logits.

    The exact mirror of the ranker's click loss with the roles swapped: each
    clicked rank contributes -log softmax(position logits) weighted by
    rel_1 / max(rel_k, tau), where the relevance weights are the ranker's
    raw softmax values over the displayed list.
    """
    c = np.asarray(clicks, dtype=np.float64)
    rel = np.asarray(relevance_weights, dtype=np.float64)
    if c.shape != position_scores.data.shape or rel.shape != c.shape:
        raise ValueError("scores, clicks and relevance weights must share a shape")
    if rel.ndim == 1:
        inv = clipped_inverse_weights(rel, tau)
    else:
        first = rel[:, :1]
        if np.any(first <= 0.0):
            raise ValueError("degenerate weights: nothing positive to invert")
        inv = first / np.maximum(rel, tau)
    return weighted_listwise_ce(position_scores, c * inv)


def relevance_weights_from_scores(scores: np.ndarray) -> np.ndarray:
    """Row-wise softmax of ranker scores, as raw probabilities.

    The values are kept on the probability scale (each row sums to 1) rather
    than rescaled to 1 at rank 1, so the variance floor tau inside the
    inverse-relevance loss bites at an absolute probability. With a list of
    n documents the floor sits at half of uniform (tau = 0.05, uniform 0.1
    for n = 10), which caps how much relevance decay the dual loss can
    divide out of the click signal.
    """
    z = np.asarray(scores, dtype=np.float64)
    squeeze = z.ndim == 1
    z = np.atleast_2d(z)
    z = z - z.max(axis=-1, keepdims=True)
    p = np.exp(z)
    p /= p.sum(axis=-1, keepdims=True)
    return p[0] if squeeze else p


class LPPModel:
    """Document encoder + position embedding table + shared scalar head.

    Parameters split into two partitions: ``g_pt`` (encoder and head, the
    document pathway) and ``g_pos`` (the embedding table). The two-step
    training contract only ever updates ``g_pos`` while ``g_pt`` is frozen.
    Position embeddings start at zero, so at initialization the joint forward
    coincides exactly with the document-only forward.
    """

    def __init__(self, feature_dim: int, n_positions: int, rng: np.random.Generator,
                 embed_dim: int = 16, encoder_hidden: Sequence[int] = (32,),
                 ffn_hidden: Sequence[int] = (16, 64), dropout: float = 0.1):
        if feature_dim < 1 or n_positions < 1:
            raise ValueError("feature_dim and n_positions must be >= 1")
        self.feature_dim = feature_dim
        self.n_positions = n_positions
        self.encoder_d = MLP(feature_dim, encoder_hidden, embed_dim, rng,
                             "lpp.encoder_d", dropout=dropout)
        self.position_table = Parameter(np.zeros((n_positions, embed_dim)),
                                        "lpp.encoder_p")
        self.ffn = MLP(embed_dim, ffn_hidden, 1, rng, "lpp.ffn", dropout=dropout)

    @property
    def g_pt(self) -> List[Parameter]:
        return [*self.encoder_d.parameters(), *self.ffn.parameters()]

    @property
    def g_pos(self) -> List[Parameter]:
        return [self.position_table]

    def parameters(self) -> List[Parameter]:
        return [*self.g_pt, *self.g_pos]

    def forward_confounder(self, features: np.ndarray, train: bool = False,
                           rng: Optional[np.random.Generator] = None) -> Tensor:
        """Document-only score column: head(encoder(x))."""
        X = np.asarray(features, dtype=np.float64)
        m = self.encoder_d(Tensor(X), train=train, rng=rng)
        return self.ffn(m, train=train, rng=rng)

    def forward_joint(self, features: np.ndarray, positions: np.ndarray,
                      train: bool = False,
                      rng: Optional[np.random.Generator] = None) -> Tensor:
        """Position-aware score column: head(encoder(x) + embedding[k])."""
        X = np.asarray(features, dtype=np.float64)
        pos = np.asarray(positions, dtype=np.int64)
        if pos.shape != (X.shape[0],):
            raise ValueError("positions must give one 0-based rank per feature row")
        if np.any(pos < 0) or np.any(pos >= self.n_positions):
            raise ValueError(f"positions must lie in [0, {self.n_positions})")
        m = self.encoder_d(Tensor(X), train=train, rng=rng)
        p = self.position_table.take_rows(pos)
        return self.ffn(m + p, train=train, rng=rng)


def lpp_confounder_forward(model: LPPModel, x: np.ndarray) -> float:
    """Eval-mode document-only score for a single feature vector."""
    out = model.forward_confounder(np.asarray(x, dtype=np.float64).reshape(1, -1))
    return float(out.data.reshape(-1)[0])


TARGET_VARIANTS = ("logging_scores", "mrr", "dcg")


def target_weights(variant: str, logging_scores: Optional[np.ndarray],
                   batch_rows: int, n_positions: int) -> np.ndarray:
    """Per-rank attention targets for confounding-effect learning.

    Every variant produces bounded per-rank target scores in (0, 1]: the
    session's own policy attention (softmax of the logging scores) by default,
    or the fixed profiles 1/k and 1/log2(k+1). The returned weights are the
    softmax of those scores, so the supervision the document pathway receives
    never gets steeper than one nat per list no matter how wide the raw policy
    scores happen to be. Raw scores straight from a trained ranker can span
    several nats, and a document pathway fit to that would swallow the whole
    position effect along with the confounding it is meant to absorb.
    """
    if variant == "logging_scores":
        if logging_scores is None:
            raise ValueError("logging_scores target variant needs the policy scores")
        z = np.asarray(logging_scores, dtype=np.float64)
        if z.shape != (batch_rows, n_positions):
            raise ValueError("logging_scores must be (batch_rows, n_positions)")
        z = z - z.max(axis=-1, keepdims=True)
        p = np.exp(z)
        scores = p / p.sum(axis=-1, keepdims=True)
    else:
        ranks = np.arange(1, n_positions + 1, dtype=np.float64)
        if variant == "mrr":
            profile = 1.0 / ranks
        elif variant == "dcg":
            profile = 1.0 / np.log2(ranks + 1.0)
        else:
            raise ValueError(f"target variant must be one of {TARGET_VARIANTS}")
        scores = np.tile(profile, (batch_rows, 1))
    e = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def confounding_effect_step(model: LPPModel, optimizer: AdaGrad,
                            features: np.ndarray, logging_scores: Optional[np.ndarray],
                            variant: str = "logging_scores",
                            rng: Optional[np.random.Generator] = None) -> float:
    """Fit the document pathway to per-session policy targets; one optimizer step.

    ``features`` is (batch, positions, feature_dim) in displayed order. The
    embedding table takes no part in this forward, so only the document
    pathway receives gradient.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError("features must be (batch, positions, feature_dim)")
    B, N, d = X.shape
    weights = target_weights(variant, logging_scores, B, N)
    logits = model.forward_confounder(X.reshape(B * N, d), train=True, rng=rng)
    loss = weighted_listwise_ce(logits.reshape(B, N), weights)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.data)


def position_targets_from_base(base: PositionPropensityModel) -> np.ndarray:
    """Log of the base model's softmax per rank: targets for the joint step."""
    z = base.logits.data.reshape(-1)
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def joint_propensity_step(model: LPPModel, optimizer: AdaGrad,
                          features: np.ndarray, position_targets: np.ndarray,
                          rng: Optional[np.random.Generator] = None,
                          enforce_freeze: bool = True) -> float:
    """Fit position embeddings to base-propensity targets with the pathway locked.

    Requires ``freeze_parameters(model.g_pt)`` beforehand and verifies after
    the step that the pathway is bit-for-bit unchanged. Passing
    ``enforce_freeze=False`` drops both checks, which lets the document
    pathway chase position targets too; kept only to measure how much the
    contract matters.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 3:
        raise ValueError("features must be (batch, positions, feature_dim)")
    B, N, d = X.shape
    if enforce_freeze and not all(p.frozen for p in model.g_pt):
        raise FreezeContractError(
            "document pathway must be frozen before the position-only step"
        )
    y = np.asarray(position_targets, dtype=np.float64)
    if y.ndim == 1:
        y = np.tile(y, (B, 1))
    if y.shape != (B, N):
        raise ValueError("position_targets must be (n_positions,) or (batch, n_positions)")
    y = y - y.max(axis=-1, keepdims=True)
    weights = np.exp(y)
    weights /= weights.sum(axis=-1, keepdims=True)

    snapshot = [p.data.copy() for p in model.g_pt] if enforce_freeze else None
    positions = np.tile(np.arange(N, dtype=np.int64), B)
    logits = model.forward_joint(X.reshape(B * N, d), positions, train=True, rng=rng)
    loss = weighted_listwise_ce(logits.reshape(B, N), weights)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    if enforce_freeze:
        for p, before in zip(model.g_pt, snapshot):
            if not np.array_equal(p.data, before):
                raise FreezeContractError(f"frozen parameter {p.name!r} changed")
    return float(loss.data)


def backdoor_adjust(model: LPPModel, features: np.ndarray, k: int) -> float:
    """Examination rate at a forced rank, averaged over the documents.

    Every document in the batch is scored as if displayed at rank ``k``.
    Holding the document distribution fixed while forcing the rank is what
    removes the policy's position-by-relevance correlation from the estimate.

    The scalar head is read as a log examination rate and the average is
    taken on that log scale, so the returned rate is exp(mean head value).
    Both training losses are softmax cross-entropies and therefore blind to
    a per-list shift of the head, which leaves its absolute level floating
    wherever initialization put it; rank-to-rank ratios of log-averaged
    rates cancel that arbitrary level exactly, where a squashed arithmetic
    mean would flatten them toward 1 whenever the level sits near zero.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("features must be a non-empty (docs, feature_dim) matrix")
    if not 1 <= k <= model.n_positions:
        raise ValueError(f"k must lie in [1, {model.n_positions}]")
    positions = np.full(X.shape[0], k - 1, dtype=np.int64)
    out = model.forward_joint(X, positions)
    return float(np.exp(out.data.mean()))


def backdoor_estimate(model: LPPModel, features: np.ndarray,
                      n_positions: Optional[int] = None) -> PropensityEstimate:
    """Backdoor-adjusted rates for every rank, normalized to rank 1.

    One pass: the documents are encoded once and every rank's embedding is
    added to the shared encoding block, which matches backdoor_adjust(k)
    rank for rank. Normalizing by rank 1 maps the unnormalized rates back
    to probability weights in (0, 1].
    """
    n = model.n_positions if n_positions is None else n_positions
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("features must be a non-empty (docs, feature_dim) matrix")
    if not 1 <= n <= model.n_positions:
        raise ValueError(f"n_positions must lie in [1, {model.n_positions}]")
    m = model.encoder_d(Tensor(X)).data
    docs = m.shape[0]
    tiled = np.repeat(m[None, :, :], n, axis=0).reshape(n * docs, -1)
    tiled += np.repeat(model.position_table.data[:n], docs, axis=0)
    out = model.ffn(Tensor(tiled))
    raw = np.exp(out.data.reshape(n, docs).mean(axis=1))
    return PropensityEstimate.from_raw(raw)


__all__ = [
    "DEFAULT_TAU", "FreezeContractError", "LPPModel", "PositionPropensityModel",
    "PropensityEstimate", "backdoor_adjust", "backdoor_estimate",
    "clipped_inverse_weights", "confounding_effect_step", "dla_propensity",
    "irw_propensity_loss", "joint_propensity_step", "lpp_confounder_forward",
    "position_targets_from_base", "relevance_weights_from_scores",
    "target_weights", "freeze_parameters", "unfreeze_parameters",
]
