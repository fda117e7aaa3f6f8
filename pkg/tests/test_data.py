"""SVMlight parsing, serialization round-trips, synthetic generation."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrlab.data import (
    Dataset,
    LabeledDoc,
    LabelRangeError,
    ParseError,
    QueryGroup,
    generate_synthetic,
    parse_svmlight,
    serialize_svmlight,
)


def test_single_line_parse():
    ds = parse_svmlight("2 qid:7 1:0.5 3:1.0")
    assert ds.n_queries == 1
    group = ds.groups[0]
    assert group.query_id == "7"
    assert len(group.docs) == 1
    doc = group.docs[0]
    assert doc.relevance == 2
    assert np.array_equal(doc.features, np.array([0.5, 0.0, 1.0]))
    assert ds.feature_dim == 3


def test_empty_stream():
    ds = parse_svmlight("")
    assert ds.n_queries == 0
    assert ds.feature_dim == 0


def test_lines_group_by_qid():
    ds = parse_svmlight("0 qid:1 1:1.0\n4 qid:1 1:2.0")
    assert ds.n_queries == 1
    assert np.array_equal(ds.groups[0].labels, np.array([0, 4]))


def test_interleaved_qids_group_in_first_appearance_order():
    text = "1 qid:b 1:1.0\n2 qid:a 1:2.0\n3 qid:b 1:3.0"
    ds = parse_svmlight(text)
    assert [g.query_id for g in ds.groups] == ["b", "a"]
    assert np.array_equal(ds.groups[0].labels, np.array([1, 3]))


def test_comment_becomes_doc_id_and_default_ids_count_up():
    ds = parse_svmlight("1 qid:3 1:0.1 # doc-alpha\n2 qid:3 1:0.2")
    assert ds.groups[0].docs[0].doc_id == "doc-alpha"
    assert ds.groups[0].docs[1].doc_id == "q3_d1"


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError) as info:
        parse_svmlight("1 qid:1 1:0.5\nnot-a-label qid:1 1:0.5")
    assert info.value.line_no == 2
    with pytest.raises(ParseError):
        parse_svmlight("1 noqid 1:0.5")
    with pytest.raises(ParseError):
        parse_svmlight("1 qid:1 0:0.5")
    with pytest.raises(ParseError):
        parse_svmlight("1 qid:1 1=0.5")
    with pytest.raises(ParseError):
        parse_svmlight("# floating comment")


def test_label_out_of_range_is_its_own_error():
    with pytest.raises(LabelRangeError):
        parse_svmlight("5 qid:1 1:0.5")
    with pytest.raises(LabelRangeError):
        parse_svmlight("-1 qid:1 1:0.5")


def test_duplicate_doc_ids_rejected():
    with pytest.raises(ValueError):
        parse_svmlight("1 qid:1 1:0.5 # same\n2 qid:1 1:0.6 # same")


def test_dataset_validates_feature_dim_and_split():
    doc = LabeledDoc("d", np.zeros(3), 0)
    with pytest.raises(ValueError):
        Dataset(groups=[QueryGroup("q", [doc])], feature_dim=4)
    with pytest.raises(ValueError):
        Dataset(groups=[], feature_dim=0, split="dev")


def _dataset_strategy():
    feature = st.floats(-100, 100, allow_nan=False, width=64)
    doc = st.tuples(st.integers(0, 4), st.lists(feature, min_size=3, max_size=3))
    group = st.lists(doc, min_size=1, max_size=4)
    return st.lists(group, min_size=0, max_size=5)


@settings(max_examples=40, deadline=None)
@given(_dataset_strategy())
def test_serialize_parse_round_trip(raw_groups):
    groups = []
    for qi, docs in enumerate(raw_groups):
        labeled = [
            LabeledDoc(doc_id=f"q{qi}_d{di}", features=np.array(feats), relevance=lab)
            for di, (lab, feats) in enumerate(docs)
        ]
        groups.append(QueryGroup(query_id=str(qi), docs=labeled))
    ds = Dataset(groups=groups, feature_dim=3 if groups else 0)
    back = parse_svmlight(serialize_svmlight(ds))
    assert back.n_queries == ds.n_queries
    for g1, g2 in zip(ds.groups, back.groups):
        assert g1.query_id == g2.query_id
        for d1, d2 in zip(g1.docs, g2.docs):
            assert d1.doc_id == d2.doc_id
            assert d1.relevance == d2.relevance
            assert np.array_equal(d1.features, d2.features)


def test_round_trip_of_generated_data():
    ds = generate_synthetic(5, 4, 6, seed=3)
    back = parse_svmlight(serialize_svmlight(ds))
    assert back.feature_dim == ds.feature_dim
    for g1, g2 in zip(ds.groups, back.groups):
        for d1, d2 in zip(g1.docs, g2.docs):
            assert np.array_equal(d1.features, d2.features)
            assert d1.relevance == d2.relevance


def test_generate_minimal_dataset():
    ds = generate_synthetic(1, 1, 4, seed=42)
    assert ds.n_queries == 1
    assert len(ds.groups[0].docs) == 1
    assert 0 <= ds.groups[0].docs[0].relevance <= 4


def test_generate_is_deterministic():
    a = generate_synthetic(8, 5, 6, seed=9)
    b = generate_synthetic(8, 5, 6, seed=9)
    assert serialize_svmlight(a) == serialize_svmlight(b)


def test_generate_differs_across_seeds():
    a = generate_synthetic(8, 5, 6, seed=9)
    b = generate_synthetic(8, 5, 6, seed=10)
    assert serialize_svmlight(a) != serialize_svmlight(b)


def test_generated_grades_cover_all_five_levels():
    ds = generate_synthetic(500, 10, 16, seed=1)
    seen = {doc.relevance for g in ds.groups for doc in g.docs}
    assert seen == {0, 1, 2, 3, 4}


def test_generated_grades_stay_in_range():
    ds = generate_synthetic(50, 8, 5, seed=2)
    labels = np.concatenate([g.labels for g in ds.groups])
    assert labels.min() >= 0 and labels.max() <= 4


def test_shared_teacher_separates_features_from_labeling():
    base = generate_synthetic(20, 5, 6, seed=1, teacher_seed=77)
    same_teacher = generate_synthetic(20, 5, 6, seed=2, teacher_seed=77)
    own_teacher = generate_synthetic(20, 5, 6, seed=2)
    assert serialize_svmlight(base) != serialize_svmlight(same_teacher)
    labels_shared = [d.relevance for g in same_teacher.groups for d in g.docs]
    labels_own = [d.relevance for g in own_teacher.groups for d in g.docs]
    assert labels_shared != labels_own


def test_generate_validates_arguments():
    with pytest.raises(ValueError):
        generate_synthetic(0, 5, 6, seed=1)
    with pytest.raises(ValueError):
        generate_synthetic(5, 0, 6, seed=1)
    with pytest.raises(ValueError):
        generate_synthetic(5, 5, 3, seed=1)
