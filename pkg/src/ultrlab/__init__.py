"""Desk-scale unbiased learning-to-rank laboratory.

Simulated position-biased clicks, a from-scratch reverse-mode autodiff
engine, inverse-propensity-weighted listwise training, a logging-policy-aware
propensity model with backdoor-adjusted inference, and an exact discrete
causal oracle for quantifying propensity overestimation.
"""

__version__ = "0.1.0"

from .causal import (
    JointTable,
    OverestimationReport,
    ToyCausalModel,
    conditional,
    enumerate_joint,
    intervene,
    interventional,
    overestimation_report,
)
from .clicks import (
    ClickLog,
    PositionBiasCurve,
    SimulationConfig,
    examination_probability,
    perceived_relevance_probability,
    rank_by_scores,
    sample_click_matrix,
    sample_session,
)
from .data import (
    Dataset,
    LabeledDoc,
    ParseError,
    QueryGroup,
    generate_synthetic,
    parse_svmlight,
    serialize_svmlight,
)
from .metrics import (
    err_at_k,
    ndcg_at_k,
    normalized_propensity,
    propensity_error,
    ranking_metrics,
)
from .propensity import (
    FreezeContractError,
    LPPModel,
    PositionPropensityModel,
    PropensityEstimate,
    backdoor_adjust,
    backdoor_estimate,
    confounding_effect_step,
    dla_propensity,
    irw_propensity_loss,
    joint_propensity_step,
    position_targets_from_base,
)
from .ranker import RankerMLP, full_information_loss, ipw_ranking_loss, score_list
from .training import (
    ExperimentConfig,
    LoggingPolicy,
    RunResult,
    SplitData,
    make_split_data,
    run_experiment,
    run_offline,
    run_online,
    train_weak_policy,
    upe_iteration,
)
