"""File formats: round-trips, validation errors with line numbers, config."""

import os

import numpy as np
import pytest

from poenet import io
from poenet.model import ValidationError
from poenet.simulate import SimulationConfig, simulate_all


def test_expression_round_trip(tmp_path):
    Y = np.array([[1.5, -2.25, 0.0], [3.125, 4.0, -0.5]])
    path = tmp_path / "expr.tsv"
    io.write_expression(path, Y, ["gA", "gB"], ["s1", "s2", "s3"])
    Y2, genes, samples = io.read_expression(path)
    assert np.array_equal(Y, Y2)
    assert genes == ["gA", "gB"]
    assert samples == ["s1", "s2", "s3"]


def test_expression_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.tsv"
    path.write_text("gene_id\ts1\ts2\ng1\t1.0\tnot_a_number\n")
    with pytest.raises(ValidationError, match=":2"):
        io.read_expression(path)
    path.write_text("gene_id\ts1\ng1\t1.0\t2.0\n")
    with pytest.raises(ValidationError, match=":2"):
        io.read_expression(path)
    path.write_text("wrong\ts1\n")
    with pytest.raises(ValidationError, match=":1"):
        io.read_expression(path)
    path.write_text("gene_id\ts1\ng1\t1.0\ng1\t2.0\n")
    with pytest.raises(ValidationError, match="duplicate"):
        io.read_expression(path)


def test_design_round_trip_and_intercept_check(tmp_path):
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    path = tmp_path / "design.tsv"
    io.write_design(path, X)
    X2 = io.read_design(path, n_samples=3)
    assert np.array_equal(X, X2)
    io.write_design(path, np.array([[0.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(ValidationError, match="intercept"):
        io.read_design(path)
    io.write_design(path, X)
    with pytest.raises(ValidationError, match="rows"):
        io.read_design(path, n_samples=5)


def test_edge_list_round_trip_comments_and_errors(tmp_path):
    genes = ["gA", "gB", "gC"]
    path = tmp_path / "graph.edges"
    io.write_edge_list(path, [(0, 1), (2, 0)], genes)
    g = io.read_edge_list(path, genes)
    assert g.edges == [(0, 1), (2, 0)]

    path.write_text("# prior pathway\ngA\tgB\n\ngC\tgA\n")
    g = io.read_edge_list(path, genes)
    assert g.edges == [(0, 1), (2, 0)]

    path.write_text("gA\tgX\n")
    with pytest.raises(ValidationError, match=":1.*gX"):
        io.read_edge_list(path, genes)
    path.write_text("gA gB\n")
    with pytest.raises(ValidationError, match="src<TAB>dst"):
        io.read_edge_list(path, genes)
    path.write_text("gA\tgA\n")
    with pytest.raises(ValidationError, match="self-loop"):
        io.read_edge_list(path, genes)


def test_truth_round_trip(tmp_path):
    cfg = SimulationConfig(p=5, n=4, seed=3, false_edge_count=4)
    data, truth, g0 = simulate_all(cfg)
    path = tmp_path / "truth.json"
    io.write_truth(path, truth, data.gene_ids, data.sample_ids)
    rec = io.read_truth(path)
    assert rec["gene_ids"] == data.gene_ids
    assert np.array_equal(np.asarray(rec["e_true"]), truth.e_true)
    trues = [(r["src"], r["dst"]) for r in rec["edges"] if r["is_true"]]
    assert len(trues) == len(truth.E_star)
    falses = [r for r in rec["edges"] if not r["is_true"]]
    assert len(falses) == 4


def test_truth_read_rejects_malformed(tmp_path):
    path = tmp_path / "t.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError, match="JSON"):
        io.read_truth(path)
    path.write_text('{"gene_ids": []}')
    with pytest.raises(ValidationError, match="missing key"):
        io.read_truth(path)


def test_config_parsing():
    text = """
    # run settings
    n_iter = 500
    seed=4       # inline comment
    data = /tmp/x.tsv

    empty_ok =
    """
    cfg = io.parse_config_text(text)
    assert cfg == {"n_iter": "500", "seed": "4", "data": "/tmp/x.tsv",
                   "empty_ok": ""}
    with pytest.raises(ValidationError, match=":1"):
        io.parse_config_text("just a line")
    with pytest.raises(ValidationError, match="empty key"):
        io.parse_config_text("= value")


def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    path = tmp_path / "out.txt"
    io.atomic_write_text(path, "first\n")
    io.atomic_write_text(path, "second\n")
    assert path.read_text() == "second\n"
    leftovers = [f for f in os.listdir(tmp_path) if f.startswith(".tmp-")]
    assert leftovers == []


def test_float_format_round_trips():
    for x in (0.1, 1e-300, 123456.789, -0.0, 3.141592653589793):
        assert float(io.fmt(x)) == x
