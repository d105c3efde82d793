"""Brute-force greedy decision-tree reference, used only as a test oracle.

Same growth policy as the package implementation (binary splits on indicator
columns, GINI impurity, best-first expansion by absolute weighted impurity
decrease, ties to the lowest column index then the oldest node), but written
as naive dictionaries-and-lists code that recomputes everything from scratch.
"""

from __future__ import annotations


def _gini(labels):
    if not labels:
        return 0.0
    total = len(labels)
    acc = 0.0
    for label in set(labels):
        p = sum(1 for x in labels if x == label) / total
        acc += p * p
    return 1.0 - acc


def _modal(labels, label_order):
    best = None
    best_count = -1
    for label in sorted(set(labels), key=label_order):
        count = sum(1 for x in labels if x == label)
        if count > best_count:
            best = label
            best_count = count
    return best


def _scan_best_column(rows, labels, members, n_columns):
    parent = _gini([labels[i] for i in members])
    n = len(members)
    best = (None, 0.0)
    for column in range(n_columns):
        zeros = [i for i in members if rows[i][column] == 0]
        ones = [i for i in members if rows[i][column] == 1]
        if not zeros or not ones:
            continue
        child = (
            len(zeros) * _gini([labels[i] for i in zeros])
            + len(ones) * _gini([labels[i] for i in ones])
        ) / n
        decrease = (parent - child) * n
        if decrease > best[1] + 1e-12:
            best = (column, decrease)
    return best


def reference_train(rows, labels, max_depth, max_leaf_nodes, min_samples_split):
    """Grow the reference tree; returns the root node dict."""
    root = {"members": list(range(len(rows))), "depth": 0, "order": 0}
    leaves = [root]
    next_order = 1
    while len(leaves) < max_leaf_nodes:
        candidates = []
        for leaf in leaves:
            members = leaf["members"]
            if leaf["depth"] >= max_depth or len(members) < min_samples_split:
                continue
            if _gini([labels[i] for i in members]) == 0.0:
                continue
            column, decrease = _scan_best_column(rows, labels, members, len(rows[0]))
            if column is not None and decrease > 1e-12:
                candidates.append((-decrease, leaf["order"], leaf, column))
        if not candidates:
            break
        candidates.sort(key=lambda c: (c[0], c[1]))
        _, _, leaf, column = candidates[0]
        members = leaf["members"]
        zeros = [i for i in members if rows[i][column] == 0]
        ones = [i for i in members if rows[i][column] == 1]
        leaf["column"] = column
        leaf["children"] = (
            {"members": zeros, "depth": leaf["depth"] + 1, "order": next_order},
            {"members": ones, "depth": leaf["depth"] + 1, "order": next_order + 1},
        )
        next_order += 2
        leaves.remove(leaf)
        leaves.extend(leaf["children"])
    return root


def reference_predictions(rows, labels, test_rows, max_depth, max_leaf_nodes,
                          min_samples_split, label_order=lambda x: x):
    """Train by brute force and predict for each test row."""
    root = reference_train(rows, labels, max_depth, max_leaf_nodes, min_samples_split)
    predictions = []
    for row in test_rows:
        node = root
        while "children" in node:
            node = node["children"][1] if row[node["column"]] == 1 else node["children"][0]
        predictions.append(_modal([labels[i] for i in node["members"]], label_order))
    return predictions
