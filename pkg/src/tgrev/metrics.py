"""Ranking metrics and isomorphism-test confusion summaries."""
from __future__ import annotations

import numpy as np


def _check(y, s):
    y = np.asarray(y).astype(bool).ravel()
    s = np.asarray(s, dtype=np.float64).ravel()
    if y.shape != s.shape:
        raise ValueError("labels and scores differ in length")
    if y.size == 0:
        raise ValueError("empty evaluation set")
    return y, s


def average_precision(y, s) -> float:
    """Step-wise area under precision-recall; tied scores form one threshold."""
    y, s = _check(y, s)
    if not y.any():
        return float("nan")
    order = np.argsort(-s, kind="mergesort")
    ys, ss = y[order], s[order]
    last = np.r_[np.nonzero(np.diff(ss))[0], len(ss) - 1]
    tps = np.cumsum(ys)[last]
    precision = tps / (last + 1)
    recall = tps / tps[-1]
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def roc_auc(y, s) -> float:
    """P(score of positive > score of negative), ties count one half."""
    y, s = _check(y, s)
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(s, kind="mergesort")
    ss = s[order]
    ranks = np.empty(len(s))
    # average ranks over ties
    _, start, counts = np.unique(ss, return_index=True, return_counts=True)
    avg = start + (counts + 1) / 2.0
    ranks[order] = np.repeat(avg, counts)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision_bruteforce(y, s) -> float:
    y, s = _check(y, s)
    pos = np.nonzero(y)[0]
    if len(pos) == 0:
        return float("nan")
    vals = []
    for i in pos:
        above = s >= s[i]
        vals.append(y[above].sum() / above.sum())
    return float(np.mean(vals))


def roc_auc_bruteforce(y, s) -> float:
    y, s = _check(y, s)
    p, n = s[y], s[~y]
    if len(p) == 0 or len(n) == 0:
        return float("nan")
    tot = 0.0
    for a in p:
        for b in n:
            tot += 1.0 if a > b else 0.5 if a == b else 0.0
    return tot / (len(p) * len(n))


def confusion_report(labels: list[bool], verdicts: list[bool]) -> dict:
    """Non-isomorphic is the positive class. Percentages; undefined ratios are None."""
    y = np.asarray(labels, dtype=bool)
    p = np.asarray(verdicts, dtype=bool)
    tp = int((y & p).sum())
    fn = int((y & ~p).sum())
    tn = int((~y & ~p).sum())
    fp = int((~y & p).sum())

    def pct(a, b):
        return None if b == 0 else round(100.0 * a / b, 2)

    auc = None
    if y.any() and (~y).any():
        auc = round(100.0 * roc_auc(y, p.astype(float)), 2)
    return {"tp": tp, "fn": fn, "tn": tn, "fp": fp,
            "precision": pct(tp, tp + fp), "recall": pct(tp, tp + fn), "tnr": pct(tn, tn + fp),
            "accuracy": pct(tp + tn, len(y)), "auc": auc}
