"""File formats and configuration parsing.

Formats:
  expression  TSV, header ``gene_id<TAB>sample1...``, one gene per row
  design      TSV, one row per sample, covariate columns, explicit leading
              intercept column of ones
  edge list   UTF-8 text, one ``src<TAB>dst`` per line, names resolved
              against the expression file's gene-id column, ``#`` comments
  config      flat ``key = value`` lines with ``#`` comments

All writers go through an atomic temp-file/rename so a crashed run never
leaves a half-written file that parses.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .graphs import PriorGraph, ReciprocalGraph
from .model import ExpressionDataset, ValidationError


def atomic_write_text(path, text) -> None:
    """Write text to path via a same-directory temp file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def fmt(x) -> str:
    """Shortest round-trip decimal representation of a float."""
    return repr(float(x))


# ---------------------------------------------------------------------------
# expression / design / edge-list files
# ---------------------------------------------------------------------------

def write_expression(path, Y, gene_ids, sample_ids) -> None:
    lines = ["gene_id\t" + "\t".join(sample_ids)]
    for i, gid in enumerate(gene_ids):
        lines.append(gid + "\t" + "\t".join(fmt(v) for v in Y[i]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_expression(path):
    """Returns (Y, gene_ids, sample_ids)."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise ValidationError(f"cannot read expression file {path}: {err}") from err
    if not lines:
        raise ValidationError(f"{path}: empty expression file")
    header = lines[0].split("\t")
    if header[0] != "gene_id" or len(header) < 2:
        raise ValidationError(f"{path}:1: expected header 'gene_id<TAB>sample...'")
    sample_ids = header[1:]
    gene_ids = []
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != len(header):
            raise ValidationError(
                f"{path}:{ln}: row has {len(parts)} fields, expected {len(header)}"
            )
        gene_ids.append(parts[0])
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as err:
            raise ValidationError(f"{path}:{ln}: non-numeric value ({err})") from err
    if len(set(gene_ids)) != len(gene_ids):
        raise ValidationError(f"{path}: duplicate gene ids")
    return np.asarray(rows, dtype=float), gene_ids, sample_ids


def write_design(path, X) -> None:
    lines = ["\t".join(fmt(v) for v in row) for row in np.asarray(X, dtype=float)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_design(path, n_samples=None):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    except OSError as err:
        raise ValidationError(f"cannot read design file {path}: {err}") from err
    rows = []
    for ln, line in enumerate(lines, start=1):
        try:
            rows.append([float(v) for v in line.split("\t")])
        except ValueError as err:
            raise ValidationError(f"{path}:{ln}: non-numeric value ({err})") from err
        if len(rows[-1]) != len(rows[0]):
            raise ValidationError(f"{path}:{ln}: ragged design row")
    X = np.asarray(rows, dtype=float)
    if n_samples is not None and X.shape[0] != n_samples:
        raise ValidationError(
            f"{path}: design has {X.shape[0]} rows but expression has {n_samples} samples"
        )
    if not np.all(X[:, 0] == 1.0):
        raise ValidationError(
            f"{path}: first design column must be an explicit intercept of ones"
        )
    return X


def load_dataset(expression_path, design_path) -> ExpressionDataset:
    Y, gene_ids, sample_ids = read_expression(expression_path)
    X = read_design(design_path, n_samples=Y.shape[1])
    return ExpressionDataset(Y=Y, X=X, gene_ids=gene_ids, sample_ids=sample_ids)


def write_edge_list(path, edges, gene_ids) -> None:
    lines = [f"{gene_ids[src]}\t{gene_ids[dst]}" for src, dst in edges]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_edge_list(path, gene_ids) -> ReciprocalGraph:
    index = {g: i for i, g in enumerate(gene_ids)}
    graph = ReciprocalGraph(len(gene_ids))
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise ValidationError(f"cannot read edge list {path}: {err}") from err
    for ln, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split("\t")
        if len(parts) != 2:
            raise ValidationError(f"{path}:{ln}: expected 'src<TAB>dst'")
        src, dst = parts
        if src not in index:
            raise ValidationError(f"{path}:{ln}: unknown gene id {src!r}")
        if dst not in index:
            raise ValidationError(f"{path}:{ln}: unknown gene id {dst!r}")
        try:
            graph.add_edge(index[src], index[dst])
        except ValueError as err:
            raise ValidationError(f"{path}:{ln}: {err}") from err
    return graph


def load_prior_graph(path, gene_ids) -> PriorGraph:
    return PriorGraph(read_edge_list(path, gene_ids))


# ---------------------------------------------------------------------------
# simulation truth
# ---------------------------------------------------------------------------

def write_truth(path, truth, gene_ids, sample_ids) -> None:
    """Persist the generator's ground truth for the evaluator."""
    record = {
        "p": len(gene_ids),
        "n": len(sample_ids),
        "gene_ids": list(gene_ids),
        "sample_ids": list(sample_ids),
        "edges": [
            {
                "src": gene_ids[k],
                "dst": gene_ids[i],
                "is_true": True,
                "beta_true": float(truth.B_true[i, k]),
            }
            for (k, i) in truth.E_star
        ]
        + [
            {"src": gene_ids[k], "dst": gene_ids[i], "is_true": False,
             "beta_true": 0.0}
            for (k, i) in truth.E_tilde
        ],
        "e_true": np.asarray(truth.e_true, dtype=int).tolist(),
        "b_true": np.asarray(truth.b_true, dtype=float).tolist(),
    }
    atomic_write_text(path, json.dumps(record, sort_keys=True, indent=1) + "\n")


def read_truth(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            record = json.load(fh)
    except OSError as err:
        raise ValidationError(f"cannot read truth file {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ValidationError(f"{path}: invalid JSON ({err})") from err
    for key in ("gene_ids", "edges", "e_true"):
        if key not in record:
            raise ValidationError(f"{path}: missing key {key!r}")
    return record


# ---------------------------------------------------------------------------
# flat key = value configuration
# ---------------------------------------------------------------------------

def parse_config_text(text, source="<config>") -> dict:
    """Parse flat ``key = value`` lines; later keys override earlier ones."""
    out = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{ln}: expected 'key = value'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ValidationError(f"{source}:{ln}: empty key")
        out[key] = value.strip()
    return out


def read_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ValidationError(f"cannot read config file {path}: {err}") from err
    return parse_config_text(text, source=os.fspath(path))
