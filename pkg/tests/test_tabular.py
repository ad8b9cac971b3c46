import numpy as np
import pytest
from hypothesis import given, strategies as st

from rulexp.errors import MalformedCsv, MissingValue, SchemaMismatch, UnknownLabelColumn
from rulexp.fixtures import LOAN_CONDITIONS, LOAN_INSTANCE, loan_dataset, loan_theory
from rulexp.logic import neg, pos, sat
from rulexp.tabular import (BinarizedDataset, Condition, Kind, binarize, binarize_row, dataset_from_arrays,
                            instance_to_term, load_csv, split, term_to_bits, write_csv)


def test_load_csv_types_columns():
    d = load_csv("A,I,S,y\n33,52,PP,1\n")
    assert [a.kind for a in d.schema] == [Kind.NUMERICAL, Kind.NUMERICAL, Kind.CATEGORICAL]
    assert d.rows == ((33.0, 52.0, "PP"),)
    assert d.labels == (1,)


def test_load_csv_boolean_and_hints():
    d = load_csv("b,n,y\n0,1,0\n1,0,1\n", schema_hints={"n": Kind.NUMERICAL})
    assert [a.kind for a in d.schema] == [Kind.BOOLEAN, Kind.NUMERICAL]


def test_load_csv_header_only():
    assert len(load_csv("A,I,S,y\n")) == 0


def test_load_csv_errors():
    with pytest.raises(MissingValue, match="row 2"):
        load_csv("A,I,S,y\n33,52,,1\n")
    with pytest.raises(UnknownLabelColumn):
        load_csv("A,B\n1,2\n")
    with pytest.raises(MalformedCsv, match="row 2"):
        load_csv("A,y\n1,2,3\n")
    with pytest.raises(MalformedCsv):
        load_csv("A,y\n1,2\n")
    with pytest.raises(MalformedCsv):
        load_csv("")


def test_load_csv_custom_label_and_optional_label():
    d = load_csv("A,class\n1,0\n2,1\n", label="class")
    assert d.labels == (0, 1)
    d = load_csv("A,S\n1,u\n", require_label=False)
    assert d.labels == (0,) and d.names == ["A", "S"]


def test_csv_roundtrip():
    d = loan_dataset()
    assert load_csv(write_csv(d)) == d


def test_split_sizes_and_determinism():
    d = dataset_from_arrays({"a": list(range(10))}, [i % 2 for i in range(10)])
    tr, te = split(d, 0.7, 1)
    assert (len(tr), len(te)) == (7, 3)
    assert split(d, 0.7, 1) == (tr, te)
    big = dataset_from_arrays({"a": list(range(690))}, [i % 2 for i in range(690)])
    tr, te = split(big, 0.7, 0)
    assert (len(tr), len(te)) == (483, 207)
    assert sorted(tr.column(0) + te.column(0)) == [float(i) for i in range(690)]
    with pytest.raises(ValueError):
        split(d, 1.0, 0)


def test_binarize_running_example():
    d = load_csv("A,I,S,y\n33,52,PP,1\n48,60,PP,0\n")
    b = binarize(d, LOAN_CONDITIONS)
    assert tuple(b.bits[0]) == LOAN_INSTANCE
    assert tuple(b.bits[1]) == LOAN_INSTANCE
    assert b.labels.tolist() == [1, 0]
    assert tuple(binarize_row((33.0, 52.0, "PP"), LOAN_CONDITIONS)) == LOAN_INSTANCE


def test_binarize_no_conditions():
    b = binarize(loan_dataset(), [])
    assert b.bits.shape == (12, 0)


def test_binarize_schema_mismatch():
    d = load_csv("A,I,S,y\n33,52,PP,1\n")
    with pytest.raises(SchemaMismatch):
        binarize(d, [Condition(0, 2, ">", 3.0, Kind.NUMERICAL, "S")])
    with pytest.raises(SchemaMismatch):
        binarize(d, [Condition(0, 7, ">", 3.0, Kind.NUMERICAL)])


def test_binarized_rows_satisfy_structural_theory():
    b = binarize(loan_dataset(), LOAN_CONDITIONS)
    th = loan_theory().structural
    for bits in b.bits:
        assert th.satisfied_by(bits)
        assert sat(th, instance_to_term(bits))


def test_binarized_csv_roundtrip():
    b = binarize(loan_dataset(), LOAN_CONDITIONS)
    text = b.to_csv()
    assert text.splitlines()[0] == "A>25,A>60,I>30,I>50,S=U,S=TP,S=PP,y"
    back = BinarizedDataset.from_csv(text)
    assert np.array_equal(back.bits, b.bits)
    assert np.array_equal(back.labels, b.labels)
    assert [str(c) for c in back.conditions] == [str(c) for c in LOAN_CONDITIONS]


def test_instance_to_term():
    t = instance_to_term(LOAN_INSTANCE)
    assert t == {pos(0), neg(1), pos(2), pos(3), neg(4), neg(5), pos(6)}
    assert instance_to_term((0, 0)) == {neg(0), neg(1)}


@given(st.lists(st.integers(0, 1), max_size=20))
def test_term_bits_roundtrip(bits):
    assert term_to_bits(instance_to_term(bits), len(bits)).tolist() == bits
