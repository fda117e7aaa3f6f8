"""End-to-end click-log training: four algorithms under two logging paradigms.

Per step: sample a query batch, display the logging policy's ranking, draw
simulated clicks, and hand the batch to the learner. The offline paradigm
keeps one fixed (weak) policy for the whole run; the deterministic online
paradigm re-freezes the current ranker as the policy every refresh interval.
Query sampling and click randomness are derived from the master seed by
labels that never mention the learner, so every algorithm consumes the same
stream; results are pure functions of (config, data).

Learners: 'naive' trains the ranker with uniform weights, 'ipw_oracle' with
the simulator's true curve, 'dla' jointly trains the ranker and a
position-only propensity model via the dual inverse-weighted losses, and
'upe' runs the full loop: base propensity update, confounding-effect step,
frozen position-only step, backdoor-adjusted estimate, ranker update.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .autodiff import AdaGrad, freeze_parameters, unfreeze_parameters
from .clicks import PositionBiasCurve, SimulationConfig, sample_click_matrix
from .data import Dataset, generate_synthetic
from .metrics import DEFAULT_CUTOFFS, normalized_propensity, propensity_error, ranking_metrics
from .propensity import (
    LPPModel,
    PositionPropensityModel,
    PropensityEstimate,
    backdoor_estimate,
    confounding_effect_step,
    dla_propensity,
    irw_propensity_loss,
    joint_propensity_step,
    position_targets_from_base,
    relevance_weights_from_scores,
)
from .ranker import RankerMLP, ipw_ranking_loss
from .seeding import derive_seed, rng_for

ALGORITHMS = ("upe", "dla", "naive", "ipw_oracle")
PARADIGMS = ("OnD", "Off")

CURVE_COLUMNS = ("step", "algorithm", "seed",
                 "ndcg@1", "ndcg@3", "ndcg@5", "ndcg@10",
                 "err@1", "err@3", "err@5", "err@10",
                 "norm_prop@1", "prop_error")


class SamplingError(ValueError):
    """A query sample came out empty."""


@dataclass
class SplitData:
    """Train and test splits of one synthetic (or parsed) collection."""

    train: Dataset
    test: Dataset


def make_split_data(n_train: int = 500, n_test: int = 100, docs_per_query: int = 10,
                    feature_dim: int = 16, seed: int = 7) -> SplitData:
    """Generate both splits from one seed.

    The splits draw independent features but share one hidden teacher, so
    test metrics measure generalization of the same labeling the ranker
    trains against.
    """
    teacher = derive_seed(seed, "data", "teacher")
    return SplitData(
        train=generate_synthetic(n_train, docs_per_query, feature_dim,
                                 derive_seed(seed, "data", "train"), split="train",
                                 teacher_seed=teacher),
        test=generate_synthetic(n_test, docs_per_query, feature_dim,
                                derive_seed(seed, "data", "test"), split="test",
                                teacher_seed=teacher),
    )


class DatasetView:
    """A dataset flattened to arrays, docs pre-sorted by doc_id within groups.

    The pre-sort makes a stable descending argsort of scores break ties by
    doc_id, which keeps every displayed ranking a pure function of scores.
    """

    def __init__(self, dataset: Dataset):
        self.dataset = dataset
        lengths = {len(g.docs) for g in dataset.groups}
        if len(lengths) != 1:
            raise ValueError(
                "training views need equal-length candidate lists per query; "
                f"got lengths {sorted(lengths)}"
            )
        self.n_docs = lengths.pop()
        self.n_queries = dataset.n_queries
        feats = np.empty((self.n_queries, self.n_docs, dataset.feature_dim))
        labels = np.empty((self.n_queries, self.n_docs), dtype=np.int64)
        for qi, group in enumerate(dataset.groups):
            order = sorted(range(self.n_docs), key=lambda i: group.docs[i].doc_id)
            for slot, di in enumerate(order):
                feats[qi, slot] = group.docs[di].features
                labels[qi, slot] = group.docs[di].relevance
        self.features = feats
        self.labels = labels

    def flat_features(self) -> np.ndarray:
        return self.features.reshape(-1, self.features.shape[-1])


def rank_view_scores(scores: np.ndarray) -> np.ndarray:
    """Per-row descending order; stable, so view pre-sorting settles ties."""
    return np.argsort(-scores, axis=1, kind="stable")


@dataclass
class LoggingPolicy:
    """A frozen scorer snapshot: per-query scores and the displayed order."""

    view: DatasetView
    scores: np.ndarray
    order: np.ndarray = field(default=None)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.shape != (self.view.n_queries, self.view.n_docs):
            raise ValueError("scores must be (n_queries, n_docs) for the view")
        if self.order is None:
            self.order = rank_view_scores(self.scores)
        self.scores.setflags(write=False)
        self.order.setflags(write=False)

    @classmethod
    def from_ranker(cls, ranker: RankerMLP, view: DatasetView) -> "LoggingPolicy":
        out = ranker.forward(view.flat_features(), train=False)
        return cls(view=view, scores=out.data.reshape(view.n_queries, view.n_docs))

    @classmethod
    def from_linear(cls, weights: np.ndarray, view: DatasetView) -> "LoggingPolicy":
        w = np.asarray(weights, dtype=np.float64)
        return cls(view=view, scores=view.features @ w)

    def displayed(self, query_rows: np.ndarray, top_n: int):
        """Features, labels, and policy scores of the shown prefix, in order."""
        n = min(top_n, self.view.n_docs)
        order = self.order[query_rows, :n]
        feats = np.take_along_axis(
            self.view.features[query_rows], order[:, :, None], axis=1)
        labels = np.take_along_axis(self.view.labels[query_rows], order, axis=1)
        scores = np.take_along_axis(self.scores[query_rows], order, axis=1)
        return feats, labels, scores


def train_weak_policy(dataset: Dataset, fraction: float, seed: int) -> LoggingPolicy:
    """Fit a linear scorer by pairwise hinge on a fraction of labeled queries.

    Within each sampled query, every document pair with unequal grades yields
    one margin constraint on the score difference; full-batch subgradient
    descent on the hinge loss fits the weights. The result is frozen into a
    policy over the whole dataset.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must lie in (0, 1]")
    view = DatasetView(dataset)
    n_sampled = int(fraction * view.n_queries)
    if n_sampled == 0:
        raise SamplingError(
            f"fraction {fraction} of {view.n_queries} queries samples none"
        )
    rng = rng_for(seed, "weak-policy", "sample")
    rows = rng.choice(view.n_queries, size=n_sampled, replace=False)

    diffs = []
    for qi in rows:
        y = view.labels[qi]
        X = view.features[qi]
        for i in range(view.n_docs):
            for j in range(view.n_docs):
                if y[i] > y[j]:
                    diffs.append(X[i] - X[j])
    if not diffs:
        raise SamplingError("sampled queries contain no unequal label pairs")
    D = np.stack(diffs)
    w = np.zeros(dataset.feature_dim)
    lr = 0.1
    for _ in range(100):
        margins = D @ w
        violating = margins < 1.0
        if not violating.any():
            break
        w += lr * D[violating].sum(axis=0) / D.shape[0]
    return LoggingPolicy.from_linear(w, view)


@dataclass
class ExperimentConfig:
    """Everything one run depends on besides the data itself."""

    paradigm: str = "OnD"
    algorithm: str = "upe"
    total_steps: int = 2000
    batch_queries: int = 32
    refresh_interval: int = 250
    learning_rate: float = 0.02
    seed: int = 0
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    target_variant: str = "logging_scores"
    upe_freeze: bool = True
    eval_every: int = 100
    weak_fraction: float = 0.01
    ranker_hidden: tuple = (64, 32, 16)
    dropout: float = 0.1
    tau: float = 0.05
    lpp_embed_dim: int = 16
    lpp_encoder_hidden: tuple = (32,)
    lpp_ffn_hidden: tuple = (16, 64)
    probe_docs: int = 320

    def __post_init__(self):
        if self.paradigm not in PARADIGMS:
            raise ValueError(f"paradigm must be one of {PARADIGMS}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        for name in ("total_steps", "batch_queries", "refresh_interval",
                     "eval_every", "probe_docs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.total_steps % self.refresh_interval != 0:
            raise ValueError("refresh_interval must divide total_steps")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.weak_fraction <= 1.0:
            raise ValueError("weak_fraction must lie in (0, 1]")
        self.ranker_hidden = tuple(self.ranker_hidden)
        self.lpp_encoder_hidden = tuple(self.lpp_encoder_hidden)
        self.lpp_ffn_hidden = tuple(self.lpp_ffn_hidden)

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["simulation"] = dict(self.simulation.__dict__)
        for key in ("ranker_hidden", "lpp_encoder_hidden", "lpp_ffn_hidden"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        sim = raw.pop("simulation", {})
        return cls(simulation=SimulationConfig(**sim), **raw)


@dataclass
class StepBatch:
    """One training step's displayed lists: everything a learner may see."""

    features: np.ndarray        # (batch, positions, feature_dim), displayed order
    labels: np.ndarray          # (batch, positions) true grades (simulator only)
    clicks: np.ndarray          # (batch, positions) binary
    logging_scores: np.ndarray  # (batch, positions) policy scores, displayed order


@dataclass
class RunResult:
    """Curves, final test metrics, and the final propensity estimate of a run."""

    config: dict
    algorithm: str
    seed: int
    curve: List[dict]
    final_metrics: Dict[str, float]
    final_estimate: PropensityEstimate
    duration_s: float
    ranker: RankerMLP

    def curves_csv(self) -> str:
        lines = [",".join(CURVE_COLUMNS)]
        for row in self.curve:
            cells = []
            for col in CURVE_COLUMNS:
                v = row[col]
                cells.append(str(v) if isinstance(v, (int, str)) else repr(float(v)))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def evaluate_ranker(ranker: RankerMLP, view: DatasetView,
                    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
                    y_max: int = 4) -> Dict[str, float]:
    """Mean test metrics: rank every query by eval-mode score, true labels."""
    scores = ranker.forward(view.flat_features(), train=False)
    scores = scores.data.reshape(view.n_queries, view.n_docs)
    order = rank_view_scores(scores)
    ranked = np.take_along_axis(view.labels, order, axis=1)
    rows = [ranking_metrics(ranked[q], cutoffs, y_max) for q in range(view.n_queries)]
    return {key: float(np.mean([r[key] for r in rows])) for key in rows[0]}


def evaluate_policy(policy: LoggingPolicy, cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
                    y_max: int = 4) -> Dict[str, float]:
    """Metrics of a frozen policy's own displayed ordering on its dataset."""
    ranked = np.take_along_axis(policy.view.labels, policy.order, axis=1)
    rows = [ranking_metrics(ranked[q], cutoffs, y_max)
            for q in range(policy.view.n_queries)]
    return {key: float(np.mean([r[key] for r in rows])) for key in rows[0]}


class _RankerOnlyLearner:
    """Shared base: a ranker trained by the IPW click loss with some estimate."""

    def __init__(self, cfg: ExperimentConfig, feature_dim: int, n_positions: int):
        self.cfg = cfg
        self.n_positions = n_positions
        self.ranker = RankerMLP(feature_dim, rng_for(cfg.seed, cfg.algorithm, "init"),
                                hidden=cfg.ranker_hidden, dropout=cfg.dropout)
        self.opt_ranker = AdaGrad(self.ranker.parameters(), lr=cfg.learning_rate)
        self.drop_rng = rng_for(cfg.seed, cfg.algorithm, "ranker-dropout")

    def _scores(self, batch: StepBatch):
        B, N, d = batch.features.shape
        out = self.ranker.forward(batch.features.reshape(B * N, d),
                                  train=True, rng=self.drop_rng)
        return out.reshape(B, N)

    def _ranker_update(self, scores, batch: StepBatch, estimate: PropensityEstimate):
        loss = ipw_ranking_loss(scores, batch.clicks, estimate, tau=self.cfg.tau)
        self.opt_ranker.zero_grad()
        loss.backward()
        self.opt_ranker.step()
        return float(loss.data)

    def step(self, batch: StepBatch) -> float:
        return self._ranker_update(self._scores(batch), batch, self.estimate())

    def estimate(self) -> PropensityEstimate:
        raise NotImplementedError


class NaiveLearner(_RankerOnlyLearner):
    """No propensity correction at all: every position weighted 1."""

    def __init__(self, cfg, feature_dim, n_positions):
        super().__init__(cfg, feature_dim, n_positions)
        self._estimate = PropensityEstimate.uniform(n_positions)

    def estimate(self) -> PropensityEstimate:
        return self._estimate


class OracleIPWLearner(_RankerOnlyLearner):
    """Ranker trained with the simulator's true relative propensities."""

    def __init__(self, cfg, feature_dim, n_positions, curve: PositionBiasCurve):
        super().__init__(cfg, feature_dim, n_positions)
        self._estimate = PropensityEstimate(
            weights=PropensityEstimate.from_curve(curve, cfg.simulation.eta)
            .weights[:n_positions]
        )

    def estimate(self) -> PropensityEstimate:
        return self._estimate


class DLALearner(_RankerOnlyLearner):
    """Dual updates: IPW loss trains the ranker, IRW loss trains the logits.

    Both losses read the same forward; relevance weights for the dual loss
    are the detached raw softmax of the ranker's scores.
    """

    def __init__(self, cfg, feature_dim, n_positions):
        super().__init__(cfg, feature_dim, n_positions)
        self.position_model = PositionPropensityModel(n_positions)
        self.opt_prop = AdaGrad(self.position_model.parameters(), lr=cfg.learning_rate)

    def step(self, batch: StepBatch) -> float:
        scores = self._scores(batch)
        estimate = self.estimate()
        rel = relevance_weights_from_scores(scores.data)
        pos_scores = self.position_model.batch_scores(batch.clicks.shape[0],
                                                      batch.clicks.shape[1])
        irw = irw_propensity_loss(pos_scores, batch.clicks, rel, tau=self.cfg.tau)
        self.opt_prop.zero_grad()
        irw.backward()
        self.opt_prop.step()
        return self._ranker_update(scores, batch, estimate)

    def estimate(self) -> PropensityEstimate:
        return dla_propensity(self.position_model)


class UPELearner(_RankerOnlyLearner):
    """The full loop: base propensity, two-step policy-aware model, adjust, rank."""

    def __init__(self, cfg, feature_dim, n_positions, probe_features: np.ndarray):
        super().__init__(cfg, feature_dim, n_positions)
        self.base = PositionPropensityModel(n_positions)
        self.opt_base = AdaGrad(self.base.parameters(), lr=cfg.learning_rate)
        self.lpp = LPPModel(feature_dim, n_positions,
                            rng_for(cfg.seed, cfg.algorithm, "init-lpp"),
                            embed_dim=cfg.lpp_embed_dim,
                            encoder_hidden=cfg.lpp_encoder_hidden,
                            ffn_hidden=cfg.lpp_ffn_hidden,
                            dropout=0.0)
        self.opt_lpp = AdaGrad(self.lpp.parameters(), lr=cfg.learning_rate)
        self.lpp_rng = rng_for(cfg.seed, cfg.algorithm, "lpp-dropout")
        self.probe_features = probe_features
        self.last_estimate = PropensityEstimate.uniform(n_positions)

    def step(self, batch: StepBatch) -> float:
        return upe_iteration(self, batch)

    def estimate(self) -> PropensityEstimate:
        """Eval-time estimate over the fixed probe documents."""
        return backdoor_estimate(self.lpp, self.probe_features, self.n_positions)


def upe_iteration(state: UPELearner, batch: StepBatch) -> float:
    """One loop body, in order: base update, document-pathway fit, frozen
    position fit, backdoor-adjusted estimate over the batch, ranker update."""
    cfg = state.cfg
    B, N, d = batch.features.shape

    scores = state._scores(batch)

    rel = relevance_weights_from_scores(scores.data)
    pos_scores = state.base.batch_scores(B, N)
    base_loss = irw_propensity_loss(pos_scores, batch.clicks, rel, tau=cfg.tau)
    state.opt_base.zero_grad()
    base_loss.backward()
    state.opt_base.step()
    targets = position_targets_from_base(state.base)[:N]

    confounding_effect_step(state.lpp, state.opt_lpp, batch.features,
                            batch.logging_scores, variant=cfg.target_variant,
                            rng=state.lpp_rng)

    if cfg.upe_freeze:
        freeze_parameters(state.lpp.g_pt)
    try:
        joint_propensity_step(state.lpp, state.opt_lpp, batch.features, targets,
                              rng=state.lpp_rng, enforce_freeze=cfg.upe_freeze)
    finally:
        if cfg.upe_freeze:
            unfreeze_parameters(state.lpp.g_pt)

    state.last_estimate = backdoor_estimate(
        state.lpp, batch.features.reshape(B * N, d), N)
    return state._ranker_update(scores, batch, state.last_estimate)


def _build_learner(cfg: ExperimentConfig, feature_dim: int, n_positions: int,
                   curve: PositionBiasCurve, probe_features: np.ndarray):
    if cfg.algorithm == "naive":
        return NaiveLearner(cfg, feature_dim, n_positions)
    if cfg.algorithm == "ipw_oracle":
        return OracleIPWLearner(cfg, feature_dim, n_positions, curve)
    if cfg.algorithm == "dla":
        return DLALearner(cfg, feature_dim, n_positions)
    return UPELearner(cfg, feature_dim, n_positions, probe_features)


def _execute(cfg: ExperimentConfig, data: SplitData, policy: LoggingPolicy,
             curve: PositionBiasCurve, refresh: bool) -> RunResult:
    started = time.monotonic()
    train_view = policy.view
    test_view = DatasetView(data.test)
    n_positions = min(cfg.simulation.top_n, train_view.n_docs)
    if len(curve) < n_positions:
        raise ValueError("bias curve shorter than the displayed list")

    probe_rng = rng_for(cfg.seed, "probe")
    all_feats = train_view.flat_features()
    take = min(cfg.probe_docs, all_feats.shape[0])
    probe = all_feats[probe_rng.choice(all_feats.shape[0], size=take, replace=False)]

    learner = _build_learner(cfg, train_view.dataset.feature_dim, n_positions,
                             curve, probe)
    batch_rng = rng_for(cfg.seed, "batch")
    click_rng = rng_for(cfg.seed, "clicks")

    truth_ref = min(10, n_positions)
    curve_rows: List[dict] = []

    def record(step: int):
        est = learner.estimate()
        row = {"step": step, "algorithm": cfg.algorithm, "seed": cfg.seed}
        row.update(evaluate_ranker(learner.ranker, test_view,
                                   y_max=cfg.simulation.y_max))
        row["norm_prop@1"] = float(
            normalized_propensity(est, ref_position=truth_ref)[0])
        row["prop_error"] = propensity_error(est, curve, cfg.simulation.eta)
        curve_rows.append(row)

    record(0)
    replace_policy = policy
    for step in range(1, cfg.total_steps + 1):
        if refresh and step > 1 and (step - 1) % cfg.refresh_interval == 0:
            replace_policy = LoggingPolicy.from_ranker(learner.ranker, train_view)
        n_q = train_view.n_queries
        size = min(cfg.batch_queries, n_q)
        rows = batch_rng.choice(n_q, size=size, replace=False)
        feats, labels, log_scores = replace_policy.displayed(rows, n_positions)
        clicks = sample_click_matrix(labels, curve, cfg.simulation, click_rng)
        learner.step(StepBatch(features=feats, labels=labels, clicks=clicks,
                               logging_scores=log_scores))
        if step % cfg.eval_every == 0 or step == cfg.total_steps:
            record(step)

    final = dict(curve_rows[-1])
    for drop in ("step", "algorithm", "seed"):
        final.pop(drop)
    return RunResult(
        config=cfg.as_dict(),
        algorithm=cfg.algorithm,
        seed=cfg.seed,
        curve=curve_rows,
        final_metrics=final,
        final_estimate=learner.estimate(),
        duration_s=time.monotonic() - started,
        ranker=learner.ranker,
    )


def run_offline(cfg: ExperimentConfig, data: SplitData,
                policy: Optional[LoggingPolicy] = None,
                curve: Optional[PositionBiasCurve] = None) -> RunResult:
    """Fixed-policy training; by default the policy is the weak linear scorer."""
    if cfg.paradigm != "Off":
        raise ValueError("run_offline requires paradigm 'Off'")
    if policy is None:
        policy = train_weak_policy(data.train, cfg.weak_fraction,
                                   derive_seed(cfg.seed, "weak-policy"))
    if policy.view.dataset is not data.train:
        raise ValueError("policy was built on a different dataset")
    if curve is None:
        curve = PositionBiasCurve.inverse_rank(
            min(cfg.simulation.top_n, policy.view.n_docs))
    return _execute(cfg, data, policy, curve, refresh=False)


def run_online(cfg: ExperimentConfig, data: SplitData,
               initial_policy: Optional[LoggingPolicy] = None,
               curve: Optional[PositionBiasCurve] = None) -> RunResult:
    """Deterministic online training: the policy refreshes from the ranker.

    The step-0 policy is a snapshot of the freshly initialized ranker unless
    one is supplied; the simulator's bias curve never changes.
    """
    if cfg.paradigm != "OnD":
        raise ValueError("run_online requires paradigm 'OnD'")
    train_view = initial_policy.view if initial_policy is not None \
        else DatasetView(data.train)
    if train_view.dataset is not data.train:
        raise ValueError("policy was built on a different dataset")
    if curve is None:
        curve = PositionBiasCurve.inverse_rank(
            min(cfg.simulation.top_n, train_view.n_docs))
    if initial_policy is None:
        bootstrap = RankerMLP(train_view.dataset.feature_dim,
                              rng_for(cfg.seed, cfg.algorithm, "init"),
                              hidden=cfg.ranker_hidden, dropout=cfg.dropout)
        initial_policy = LoggingPolicy.from_ranker(bootstrap, train_view)
    return _execute(cfg, data, initial_policy, curve, refresh=True)


def run_experiment(cfg: ExperimentConfig, data: SplitData,
                   curve: Optional[PositionBiasCurve] = None) -> RunResult:
    """Dispatch on the paradigm; the offline weak policy is built per seed."""
    if cfg.paradigm == "OnD":
        return run_online(cfg, data, curve=curve)
    return run_offline(cfg, data, curve=curve)
