"""Probability confusion matrices and greedy stable-pose reduction.

The confusion matrix here is an average over predicted pose *distributions*
(row = true pose, column = mean predicted mass), not over argmax decisions.
Reduction greedily merges the class pair whose merge maximizes the
prior-weighted log-likelihood of the true class, which collapses visually
ambiguous poses first.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import RecordError

SCORE_CLAMP = 1e-12


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic class confusion with merge bookkeeping.

    `pose_ids[k]` is the tuple of original pose ids folded into current class
    k (singletons before any reduction).
    """

    entries: np.ndarray  # (n, n)
    pose_ids: tuple[tuple[int, ...], ...]
    priors: np.ndarray  # (n,)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        p = np.asarray(self.priors, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("confusion matrix must be square")
        n = e.shape[0]
        if len(self.pose_ids) != n or len(p) != n:
            raise ValueError("pose_ids/priors length must match the matrix")
        if e.min() < -1e-12:
            raise ValueError("confusion entries must be non-negative")
        rowsum = e.sum(axis=1)
        if np.abs(rowsum - 1.0).max() > 1e-6:
            raise ValueError("confusion rows must sum to 1 within 1e-6")
        if abs(float(p.sum()) - 1.0) > 1e-9:
            raise ValueError("priors must sum to 1 within 1e-9")
        object.__setattr__(self, "entries", e)
        object.__setattr__(self, "priors", p)
        object.__setattr__(self, "pose_ids", tuple(tuple(g) for g in self.pose_ids))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def labels(self) -> list[str]:
        return ["+".join(str(i) for i in group) for group in self.pose_ids]

    def to_csv(self) -> str:
        out = io.StringIO()
        labels = self.labels()
        out.write("true\\pred," + ",".join(labels) + "\n")
        for label, row in zip(labels, self.entries):
            out.write(label + "," + ",".join(repr(float(v)) for v in row) + "\n")
        return out.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {
                "pose_ids": [list(g) for g in self.pose_ids],
                "priors": [float(v) for v in self.priors],
                "entries": [[float(v) for v in row] for row in self.entries],
            },
            sort_keys=True,
        )


@dataclass(frozen=True)
class MergeStep:
    first: int  # current-matrix indices at the time of the merge
    second: int
    merged_ids: tuple[int, ...]
    score_after: float


@dataclass(frozen=True)
class CollapsePartition:
    groups: tuple[tuple[int, ...], ...]
    order: tuple[MergeStep, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "groups": [list(g) for g in self.groups],
                "merges": [
                    {
                        "first": s.first,
                        "second": s.second,
                        "merged_ids": list(s.merged_ids),
                        "score_after": s.score_after,
                    }
                    for s in self.order
                ],
            },
            sort_keys=True,
        )


def confusion_matrix(records, priors) -> ConfusionMatrix:
    """Row i = mean predicted distribution over records with true pose i+1."""
    records = list(records)
    if not records:
        raise RecordError("no records")
    n = len(records[0].dist)
    priors = np.asarray(priors, dtype=float)
    if len(priors) != n:
        raise ValueError(f"priors length {len(priors)} != dist length {n}")
    rows = np.zeros((n, n))
    for pose in range(1, n + 1):
        dists = [r.dist for r in records if r.true_pose == pose]
        if not dists:
            raise RecordError(f"pose {pose} has no records")
        rows[pose - 1] = np.mean(dists, axis=0)
    return ConfusionMatrix(
        entries=rows,
        pose_ids=tuple((i,) for i in range(1, n + 1)),
        priors=priors,
    )


def score(C: ConfusionMatrix) -> float:
    """Prior-weighted log-likelihood of the true class; always <= 0."""
    diag = np.clip(np.diag(C.entries), SCORE_CLAMP, 1.0)
    return float(np.dot(C.priors, np.log(diag)))


def collapse_pair(C: ConfusionMatrix, i: int, j: int) -> ConfusionMatrix:
    """Merge current classes i and j: predicted mass adds across the merged
    columns, then the merged row is the prior-weighted mixture of the two
    true-class rows. The merged class lands at min(i, j)."""
    n = C.n
    if i == j:
        raise ValueError("cannot collapse a class with itself")
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"class index out of range: ({i}, {j}) for n={n}")
    a, b = (i, j) if i < j else (j, i)
    e = C.entries.copy()
    e[:, a] = e[:, a] + e[:, b]
    e = np.delete(e, b, axis=1)
    pa, pb = float(C.priors[a]), float(C.priors[b])
    w = pa + pb
    if w > 0:
        merged_row = (pa * e[a] + pb * e[b]) / w
    else:
        merged_row = (e[a] + e[b]) / 2.0
    e[a] = merged_row
    e = np.delete(e, b, axis=0)
    if e.shape == (1, 1):
        e[0, 0] = 1.0  # a single-class conditional distribution is exactly 1
    priors = np.delete(C.priors.copy(), b)
    priors[a] = w
    ids = list(C.pose_ids)
    merged_ids = tuple(sorted(ids[a] + ids[b]))
    ids[a] = merged_ids
    del ids[b]
    return ConfusionMatrix(entries=e, pose_ids=tuple(ids), priors=priors)


def reduce(C: ConfusionMatrix, target_n: int) -> tuple[ConfusionMatrix, CollapsePartition]:
    """Greedily collapse the class pair maximizing the score until n reaches
    target_n. Ties pick the lexicographically smallest (i, j)."""
    if not 1 <= target_n <= C.n:
        raise ValueError(f"target_n must be in 1..{C.n}")
    steps: list[MergeStep] = []
    while C.n > target_n:
        best_score = -np.inf
        best = None
        for i in range(C.n):
            for j in range(i + 1, C.n):
                candidate = collapse_pair(C, i, j)
                s = score(candidate)
                if s > best_score:
                    best_score, best = s, (i, j, candidate)
        i, j, C = best
        steps.append(
            MergeStep(first=i, second=j, merged_ids=C.pose_ids[i], score_after=best_score)
        )
    return C, CollapsePartition(groups=C.pose_ids, order=tuple(steps))
