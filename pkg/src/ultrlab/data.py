"""Query-grouped learning-to-rank datasets: SVMlight parsing, synthetic generation, serialization.

Documents carry dense float64 feature vectors and integer relevance grades in
``[0, y_max]`` (``y_max = 4``, the five-grade convention of the large LETOR
benchmarks). Sparse SVMlight feature ids are densified on parse.
"""

from dataclasses import dataclass, field
from typing import Iterable, List

import numpy as np

from .seeding import rng_for

Y_MAX = 4

_SPLITS = ("train", "valid", "test")


class ParseError(ValueError):
    """A malformed SVMlight line; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class LabelRangeError(ParseError):
    """A relevance label outside [0, y_max]."""


@dataclass
class LabeledDoc:
    """One query-document pair: opaque id, dense features, graded relevance."""

    doc_id: str
    features: np.ndarray
    relevance: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"doc {self.doc_id}: non-finite feature value")
        if not 0 <= self.relevance <= Y_MAX:
            raise ValueError(f"doc {self.doc_id}: relevance {self.relevance} outside [0, {Y_MAX}]")


@dataclass
class QueryGroup:
    """A query id with its ordered candidate documents."""

    query_id: str
    docs: List[LabeledDoc]

    def __post_init__(self):
        if not self.docs:
            raise ValueError(f"query {self.query_id}: empty document list")
        ids = [d.doc_id for d in self.docs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"query {self.query_id}: duplicate doc ids")

    @property
    def labels(self) -> np.ndarray:
        return np.array([d.relevance for d in self.docs], dtype=np.int64)

    @property
    def feature_matrix(self) -> np.ndarray:
        return np.stack([d.features for d in self.docs])


@dataclass
class Dataset:
    """A split's worth of query groups with a declared feature dimension."""

    groups: List[QueryGroup]
    feature_dim: int
    split: str = "train"

    def __post_init__(self):
        if self.split not in _SPLITS:
            raise ValueError(f"split must be one of {_SPLITS}, got {self.split!r}")
        for g in self.groups:
            for d in g.docs:
                if d.features.shape != (self.feature_dim,):
                    raise ValueError(
                        f"query {g.query_id} doc {d.doc_id}: feature length "
                        f"{d.features.shape[0]} != feature_dim {self.feature_dim}"
                    )

    @property
    def n_queries(self) -> int:
        return len(self.groups)


def parse_svmlight(text: str, split: str = "train") -> Dataset:
    """Parse SVMlight/LETOR lines ``<label> qid:<id> <fid>:<val> ... [# comment]``.

    Feature ids are 1-based; ids absent from a line are filled with 0.0.
    Documents are grouped by qid in first-appearance order, and feature_dim is
    the maximum feature id seen anywhere in the stream. A trailing comment, if
    present, becomes the document id; otherwise ids are assigned per group.
    """
    rows = []  # (qid, label, {fid: val}, comment)
    max_fid = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line, _, comment = raw.partition("#")
        comment = comment.strip()
        line = line.strip()
        if not line:
            if comment:
                raise ParseError(line_no, "comment-only line has no label")
            continue
        tokens = line.split()
        if len(tokens) < 2:
            raise ParseError(line_no, "expected '<label> qid:<id> ...'")
        try:
            label = int(tokens[0])
        except ValueError:
            raise ParseError(line_no, f"bad label {tokens[0]!r}") from None
        if not 0 <= label <= Y_MAX:
            raise LabelRangeError(line_no, f"label {label} outside [0, {Y_MAX}]")
        if not tokens[1].startswith("qid:"):
            raise ParseError(line_no, f"expected qid:<id>, got {tokens[1]!r}")
        qid = tokens[1][len("qid:"):]
        if not qid:
            raise ParseError(line_no, "empty qid")
        feats = {}
        for tok in tokens[2:]:
            fid_s, sep, val_s = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"bad feature token {tok!r}")
            try:
                fid = int(fid_s)
                val = float(val_s)
            except ValueError:
                raise ParseError(line_no, f"bad feature token {tok!r}") from None
            if fid < 1:
                raise ParseError(line_no, f"feature ids are 1-based, got {fid}")
            feats[fid] = val
            max_fid = max(max_fid, fid)
        rows.append((qid, label, feats, comment))

    grouped: dict = {}
    order: List[str] = []
    for qid, label, feats, comment in rows:
        if qid not in grouped:
            grouped[qid] = []
            order.append(qid)
        grouped[qid].append((label, feats, comment))

    groups = []
    for qid in order:
        docs = []
        for i, (label, feats, comment) in enumerate(grouped[qid]):
            vec = np.zeros(max_fid, dtype=np.float64)
            for fid, val in feats.items():
                vec[fid - 1] = val
            doc_id = comment if comment else f"q{qid}_d{i}"
            docs.append(LabeledDoc(doc_id=doc_id, features=vec, relevance=label))
        groups.append(QueryGroup(query_id=qid, docs=docs))
    return Dataset(groups=groups, feature_dim=max_fid, split=split)


def serialize_svmlight(dataset: Dataset) -> str:
    """Render a Dataset back to SVMlight text; reparsing recovers it value-for-value."""
    lines = []
    for group in dataset.groups:
        for doc in group.docs:
            feats = " ".join(
                f"{fid}:{float(val)!r}" for fid, val in enumerate(doc.features, start=1)
            )
            lines.append(f"{doc.relevance} qid:{group.query_id} {feats} # {doc.doc_id}")
    return "\n".join(lines) + ("\n" if lines else "")


def generate_synthetic(
    n_queries: int, docs_per_query: int, feature_dim: int, seed: int,
    split: str = "train", teacher_seed: int = None
) -> Dataset:
    """Generate a synthetic split with uniform [0,1] features and quantile-bucketed grades.

    A hidden teacher score ``t(x) = w.x + 0.5*x0*x1`` is bucketed into five
    grades by within-split quantiles, so every grade occurs whenever the
    split is large enough. ``w`` is drawn from ``teacher_seed`` (defaulting
    to ``seed``): give two splits the same teacher_seed and different seeds
    to make them samples of one task. Pure function of its arguments.
    """
    if n_queries <= 0 or docs_per_query <= 0:
        raise ValueError("n_queries and docs_per_query must be positive")
    if feature_dim < 4:
        raise ValueError("feature_dim must be >= 4")
    w_rng = rng_for(seed if teacher_seed is None else teacher_seed, "synthetic-teacher")
    w = w_rng.normal(0.0, 1.0, size=feature_dim)
    rng = rng_for(seed, "synthetic-features")
    X = rng.uniform(0.0, 1.0, size=(n_queries * docs_per_query, feature_dim))
    t = X @ w + 0.5 * X[:, 0] * X[:, 1]
    edges = np.quantile(t, [0.2, 0.4, 0.6, 0.8])
    grades = np.searchsorted(edges, t, side="right")

    groups = []
    idx = 0
    for q in range(n_queries):
        docs = []
        for d in range(docs_per_query):
            docs.append(
                LabeledDoc(doc_id=f"q{q}_d{d}", features=X[idx], relevance=int(grades[idx]))
            )
            idx += 1
        groups.append(QueryGroup(query_id=str(q), docs=docs))
    return Dataset(groups=groups, feature_dim=feature_dim, split=split)
