"""CVSS v3.1 base scoring, majority-vote vector prediction from ranked
matches, and a from-scratch GINI decision tree over one-hot encoded vectors.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .ingest import (
    AttackComplexity,
    AttackVector,
    CvssVector,
    ImpactLevel,
    PrivilegesRequired,
    Scope,
    UserInteraction,
    parse_cvss_vector,
)
from .entitymodel import SimilarityMatch

_AV_WEIGHT = {"N": 0.85, "A": 0.62, "L": 0.55, "P": 0.2}
_AC_WEIGHT = {"L": 0.77, "H": 0.44}
_PR_WEIGHT = {
    "U": {"N": 0.85, "L": 0.62, "H": 0.27},
    "C": {"N": 0.85, "L": 0.68, "H": 0.5},
}
_UI_WEIGHT = {"N": 0.85, "R": 0.62}
_CIA_WEIGHT = {"H": 0.56, "L": 0.22, "N": 0.0}


class SeverityRating(str, Enum):
    NONE = "None"
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"
    CRITICAL = "Critical"

    @property
    def rank(self) -> int:
        return ("None", "Low", "Medium", "High", "Critical").index(self.value)


@dataclass(frozen=True)
class ScoreTriple:
    exploitability: float
    impact: float
    base: float
    rating: SeverityRating


def roundup(value: float) -> float:
    """Round up to one decimal using the standard's integer arithmetic."""
    scaled = math.floor(value * 100000 + 0.5)
    if scaled % 10000 == 0:
        return scaled / 100000.0
    return (math.floor(scaled / 10000) + 1) / 10.0


def _round1(value: float) -> float:
    return math.floor(value * 10 + 0.5) / 10.0


def _exploitability_raw(v: CvssVector) -> float:
    return (
        8.22
        * _AV_WEIGHT[v.av.value]
        * _AC_WEIGHT[v.ac.value]
        * _PR_WEIGHT[v.scope.value][v.pr.value]
        * _UI_WEIGHT[v.ui.value]
    )


def _impact_raw(v: CvssVector) -> float:
    iss = 1.0 - (
        (1.0 - _CIA_WEIGHT[v.conf.value])
        * (1.0 - _CIA_WEIGHT[v.integ.value])
        * (1.0 - _CIA_WEIGHT[v.avail.value])
    )
    if v.scope is Scope.UNCHANGED:
        return 6.42 * iss
    return 7.52 * (iss - 0.029) - 3.25 * (iss - 0.02) ** 15


def exploitability_score(v: CvssVector) -> float:
    return _round1(_exploitability_raw(v))


def impact_score(v: CvssVector) -> float:
    return _round1(max(_impact_raw(v), 0.0))


def rating_for_base(base: float) -> SeverityRating:
    if base == 0.0:
        return SeverityRating.NONE
    if base < 4.0:
        return SeverityRating.LOW
    if base < 7.0:
        return SeverityRating.MEDIUM
    if base < 9.0:
        return SeverityRating.HIGH
    return SeverityRating.CRITICAL


def base_score(v: CvssVector) -> ScoreTriple:
    """Exploitability/impact sub-scores and the rounded-up base score."""
    impact = _impact_raw(v)
    exploitability = _exploitability_raw(v)
    if impact <= 0.0:
        base = 0.0
    elif v.scope is Scope.UNCHANGED:
        base = roundup(min(impact + exploitability, 10.0))
    else:
        base = roundup(min(1.08 * (impact + exploitability), 10.0))
    return ScoreTriple(
        exploitability=_round1(exploitability),
        impact=_round1(max(impact, 0.0)),
        base=base,
        rating=rating_for_base(base),
    )


def majority_vector(matches: Sequence[SimilarityMatch]) -> CvssVector:
    """Per-component modal value over matches that carry a CVSS 3.x vector.

    Component ties resolve to the value held by the highest-similarity voter.
    """
    voters = [m for m in matches if m.cvss_vector is not None]
    if not voters:
        raise ValueError("no CVSS evidence")
    voters.sort(key=lambda m: (-m.similarity, m.cve_id))
    chosen: dict[str, str] = {}
    for metric in ("AV", "AC", "PR", "UI", "S", "C", "I", "A"):
        counts = Counter(m.cvss_vector.components()[metric] for m in voters)
        top = max(counts.values())
        tied = {value for value, count in counts.items() if count == top}
        for voter in voters:
            value = voter.cvss_vector.components()[metric]
            if value in tied:
                chosen[metric] = value
                break
    return parse_cvss_vector(
        "CVSS:3.1/" + "/".join(f"{m}:{chosen[m]}" for m in ("AV", "AC", "PR", "UI", "S", "C", "I", "A"))
    )


# --- one-hot encoding ---------------------------------------------------------

_METRIC_VALUES = (
    ("AV", [e.value for e in AttackVector]),
    ("AC", [e.value for e in AttackComplexity]),
    ("PR", [e.value for e in PrivilegesRequired]),
    ("UI", [e.value for e in UserInteraction]),
    ("S", [e.value for e in Scope]),
    ("C", [e.value for e in ImpactLevel]),
    ("I", [e.value for e in ImpactLevel]),
    ("A", [e.value for e in ImpactLevel]),
)

ONE_HOT_COLUMNS: tuple[str, ...] = tuple(
    f"{metric}={value}" for metric, values in _METRIC_VALUES for value in values
)


@dataclass(frozen=True)
class OneHotMatrix:
    rows: tuple[tuple[int, ...], ...]
    column_names: tuple[str, ...] = ONE_HOT_COLUMNS


def one_hot(vectors: Iterable[CvssVector]) -> OneHotMatrix:
    """Fixed 22-column indicator layout covering every legal metric value."""
    rows = []
    for vector in vectors:
        components = vector.components()
        row = tuple(
            1 if components[name.split("=")[0]] == name.split("=")[1] else 0
            for name in ONE_HOT_COLUMNS
        )
        rows.append(row)
    return OneHotMatrix(rows=tuple(rows))


# --- decision tree --------------------------------------------------------------

@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 6
    max_leaf_nodes: int = 32
    min_samples_split: int = 2


@dataclass
class TreeNode:
    gini: float
    samples: int
    histogram: dict[str, int]
    prediction: str
    depth: int
    split_column: int | None = None
    left: int | None = None  # child with column bit 0
    right: int | None = None  # child with column bit 1


@dataclass
class DecisionTree:
    nodes: list[TreeNode]
    column_names: tuple[str, ...]
    config: TreeConfig

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def leaf_count(self) -> int:
        return sum(1 for node in self.nodes if node.split_column is None)

    def depth(self) -> int:
        return max(node.depth for node in self.nodes)


def _label_key(label: str):
    try:
        return (0, SeverityRating(label).rank, label)
    except ValueError:
        return (1, 0, label)


def gini_impurity(labels: Sequence[str]) -> float:
    n = len(labels)
    if n == 0:
        return 0.0
    counts = Counter(labels)
    return 1.0 - sum((count / n) ** 2 for count in counts.values())


def _modal_label(labels: Sequence[str]) -> str:
    counts = Counter(labels)
    top = max(counts.values())
    return min((label for label, count in counts.items() if count == top), key=_label_key)


def _best_split(rows, labels, indices, n_columns):
    """Best (column, weighted impurity decrease) for one node; ties to the
    lowest column index. Returns (None, 0.0) when no split helps."""
    n = len(indices)
    parent = gini_impurity([labels[i] for i in indices])
    best_column = None
    best_decrease = 0.0
    for column in range(n_columns):
        left = [i for i in indices if rows[i][column] == 0]
        if not left or len(left) == n:
            continue
        right = [i for i in indices if rows[i][column] == 1]
        weighted = (
            len(left) * gini_impurity([labels[i] for i in left])
            + len(right) * gini_impurity([labels[i] for i in right])
        ) / n
        decrease = (parent - weighted) * n
        if decrease > best_decrease + 1e-12:
            best_decrease = decrease
            best_column = column
    return best_column, best_decrease


def train_tree(
    features: OneHotMatrix, labels: Sequence[str], config: TreeConfig | None = None
) -> DecisionTree:
    """Greedy binary GINI tree, grown best-first so the leaf budget keeps the
    highest-gain splits. Deterministic: gain ties go to the lowest column
    index, frontier ties to the oldest node."""
    config = config or TreeConfig()
    rows = features.rows
    if len(rows) != len(labels):
        raise ValueError("labels are not aligned with feature rows")
    if len(rows) < 2:
        raise ValueError("need at least 2 samples")
    labels = [str(label) for label in labels]
    n_columns = len(features.column_names)

    def make_node(indices, depth):
        node_labels = [labels[i] for i in indices]
        return TreeNode(
            gini=gini_impurity(node_labels),
            samples=len(indices),
            histogram=dict(sorted(Counter(node_labels).items())),
            prediction=_modal_label(node_labels),
            depth=depth,
        )

    all_indices = list(range(len(rows)))
    nodes = [make_node(all_indices, 0)]
    node_indices = {0: all_indices}
    frontier: list[tuple[float, int, int]] = []  # (-decrease, node_id, column)

    def consider(node_id):
        node = nodes[node_id]
        indices = node_indices[node_id]
        if (
            node.depth >= config.max_depth
            or node.samples < config.min_samples_split
            or node.gini == 0.0
        ):
            return
        column, decrease = _best_split(rows, labels, indices, n_columns)
        if column is not None and decrease > 1e-12:
            frontier.append((-decrease, node_id, column))

    consider(0)
    leaves = 1
    while frontier and leaves < config.max_leaf_nodes:
        frontier.sort()
        _neg_decrease, node_id, column = frontier.pop(0)
        indices = node_indices.pop(node_id)
        node = nodes[node_id]
        left_idx = [i for i in indices if rows[i][column] == 0]
        right_idx = [i for i in indices if rows[i][column] == 1]
        left_id = len(nodes)
        nodes.append(make_node(left_idx, node.depth + 1))
        right_id = len(nodes)
        nodes.append(make_node(right_idx, node.depth + 1))
        node.split_column = column
        node.left = left_id
        node.right = right_id
        node_indices[left_id] = left_idx
        node_indices[right_id] = right_idx
        leaves += 1
        consider(left_id)
        consider(right_id)

    return DecisionTree(nodes=nodes, column_names=features.column_names, config=config)


def predict_row(tree: DecisionTree, row: Sequence[int]) -> str:
    node = tree.root
    while node.split_column is not None:
        child = node.right if row[node.split_column] == 1 else node.left
        node = tree.nodes[child]
    return node.prediction


def predict(tree: DecisionTree, vector: CvssVector) -> str:
    return predict_row(tree, one_hot([vector]).rows[0])


@dataclass
class ClassMetrics:
    precision: float | None
    recall: float | None
    support: int
    predicted: int


@dataclass
class EvaluationReport:
    accuracy: float
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    undefined_precision: list[str] = field(default_factory=list)
    undefined_recall: list[str] = field(default_factory=list)


def evaluate_predictions(y_true: Sequence[str], y_pred: Sequence[str]) -> EvaluationReport:
    """Confusion-matrix metrics; zero-denominator classes are flagged as
    undefined and excluded from the macro averages."""
    if len(y_true) != len(y_pred):
        raise ValueError("prediction/label length mismatch")
    if not y_true:
        raise ValueError("empty test set")
    classes = sorted(set(y_true) | set(y_pred), key=_label_key)
    per_class: dict[str, ClassMetrics] = {}
    undefined_precision = []
    undefined_recall = []
    precisions = []
    recalls = []
    for cls in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == cls and p == cls)
        support = sum(1 for t in y_true if t == cls)
        predicted = sum(1 for p in y_pred if p == cls)
        precision = tp / predicted if predicted else None
        recall = tp / support if support else None
        if precision is None:
            undefined_precision.append(cls)
        else:
            precisions.append(precision)
        if recall is None:
            undefined_recall.append(cls)
        else:
            recalls.append(recall)
        per_class[cls] = ClassMetrics(
            precision=precision, recall=recall, support=support, predicted=predicted
        )
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    return EvaluationReport(
        accuracy=accuracy,
        per_class=per_class,
        macro_precision=sum(precisions) / len(precisions) if precisions else 0.0,
        macro_recall=sum(recalls) / len(recalls) if recalls else 0.0,
        undefined_precision=undefined_precision,
        undefined_recall=undefined_recall,
    )


def evaluate(tree: DecisionTree, features: OneHotMatrix, labels: Sequence[str]) -> EvaluationReport:
    predictions = [predict_row(tree, row) for row in features.rows]
    return evaluate_predictions([str(label) for label in labels], predictions)


# --- tree import/export -----------------------------------------------------------

def tree_to_text(tree: DecisionTree) -> str:
    """Indented one-node-per-line rendering, usable as the visualization source."""
    lines = []

    def walk(node_id, indent, branch):
        node = tree.nodes[node_id]
        prefix = "  " * indent + (f"{branch}: " if branch is not None else "")
        counts = ", ".join(f"{label}={count}" for label, count in node.histogram.items())
        if node.split_column is None:
            lines.append(
                f"{prefix}leaf predict={node.prediction} gini={node.gini:.4f} "
                f"samples={node.samples} [{counts}]"
            )
        else:
            lines.append(
                f"{prefix}split {tree.column_names[node.split_column]} "
                f"gini={node.gini:.4f} samples={node.samples} [{counts}]"
            )
            walk(node.left, indent + 1, 0)
            walk(node.right, indent + 1, 1)

    walk(0, 0, None)
    return "\n".join(lines) + "\n"


def tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "format": "hwv2w-tree",
        "format_version": 1,
        "config": {
            "max_depth": tree.config.max_depth,
            "max_leaf_nodes": tree.config.max_leaf_nodes,
            "min_samples_split": tree.config.min_samples_split,
        },
        "column_names": list(tree.column_names),
        "nodes": [
            {
                "gini": node.gini,
                "samples": node.samples,
                "histogram": node.histogram,
                "prediction": node.prediction,
                "depth": node.depth,
                "split_column": node.split_column,
                "left": node.left,
                "right": node.right,
            }
            for node in tree.nodes
        ],
    }


def tree_from_dict(payload: Mapping) -> DecisionTree:
    if payload.get("format") != "hwv2w-tree":
        raise ValueError("not a decision tree file")
    if payload.get("format_version") != 1:
        raise ValueError(f"unsupported tree format version {payload.get('format_version')!r}")
    config = TreeConfig(**payload["config"])
    nodes = [
        TreeNode(
            gini=raw["gini"],
            samples=raw["samples"],
            histogram=dict(raw["histogram"]),
            prediction=raw["prediction"],
            depth=raw["depth"],
            split_column=raw.get("split_column"),
            left=raw.get("left"),
            right=raw.get("right"),
        )
        for raw in payload["nodes"]
    ]
    return DecisionTree(nodes=nodes, column_names=tuple(payload["column_names"]), config=config)


def save_tree(tree: DecisionTree, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(tree_to_dict(tree), handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_tree(path) -> DecisionTree:
    with open(path, "r", encoding="utf-8") as handle:
        return tree_from_dict(json.load(handle))
