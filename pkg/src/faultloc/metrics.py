"""Localization metrics: LAR, ARC, hop-neighbourhood table, uncertainty index."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError


def _top(predictions) -> np.ndarray:
    p = np.asarray(predictions)
    return p[:, 0] if p.ndim == 2 else p


def lar(predictions, labels) -> float:
    """Fraction of cases whose top-ranked class is the label.

    ``predictions`` holds either top classes (N,) or full rankings (N, C).
    """
    top = _top(predictions).astype(int)
    labels = np.asarray(labels, dtype=int)
    if top.size == 0:
        raise DomainError("no predictions")
    if top.shape != labels.shape:
        raise ContractError("predictions and labels differ in length")
    return float(np.mean(top == labels))


def lar_by_type(predictions, labels, fault_types) -> dict[str, float]:
    top = _top(predictions).astype(int)
    labels = np.asarray(labels, dtype=int)
    types = np.asarray(fault_types, dtype=object)
    return {str(t): lar(top[types == t], labels[types == t]) for t in sorted(set(types.tolist()))}


def arc(rankings, labels) -> float:
    """Mean 1-based position of the true label in each ranking."""
    R = np.asarray(rankings, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if R.ndim != 2 or R.shape[0] == 0:
        raise DomainError("rankings must be a nonempty (N, C) array")
    if labels.shape != (R.shape[0],):
        raise ContractError("rankings and labels differ in length")
    C = R.shape[1]
    if not np.array_equal(np.sort(R, axis=1), np.broadcast_to(np.arange(C), R.shape)):
        raise ContractError("every ranking must be a permutation of the classes")
    hit = R == labels[:, None]
    if not hit.any(axis=1).all():
        raise ContractError("a label does not appear in its ranking")
    return float(np.mean(hit.argmax(axis=1) + 1))


def line_hop_matrix(terminals) -> np.ndarray:
    """Hop distance between lines; two lines are adjacent iff they share a bus."""
    T = np.asarray(terminals, dtype=int)
    m = len(T)
    by_bus = {}
    for q, (i, j) in enumerate(T):
        by_bus.setdefault(int(i), []).append(q)
        by_bus.setdefault(int(j), []).append(q)
    adj = [set() for _ in range(m)]
    for lines in by_bus.values():
        for a in lines:
            adj[a].update(lines)
    D = np.full((m, m), -1, dtype=int)
    for s in range(m):
        D[s, s] = 0
        todo = deque([s])
        while todo:
            v = todo.popleft()
            for w in adj[v]:
                if D[s, w] < 0:
                    D[s, w] = D[s, v] + 1
                    todo.append(w)
    return D


@dataclass(frozen=True)
class HopTable:
    exact: float
    one_hop: float
    two_hop: float
    cases: int               # faulted test cases the fractions are taken over
    null_predicted: int      # faulted cases predicted as "no fault"
    null_cases: int = 0      # test cases whose label is the null class
    null_correct: int = 0


def hop_analysis(predictions, labels, terminals) -> HopTable:
    """Cumulative fractions of faulted cases located exactly / within 1 / 2 hops.

    Cases labelled with the null class (index m) are excluded from the
    fractions and summarized separately; a null prediction for a faulted
    case counts as a miss beyond 2 hops.
    """
    D = line_hop_matrix(terminals)
    m = D.shape[0]
    top = _top(predictions).astype(int)
    labels = np.asarray(labels, dtype=int)
    if top.shape != labels.shape:
        raise ContractError("predictions and labels differ in length")
    if np.any((labels < 0) | (labels > m)) or np.any((top < 0) | (top > m)):
        raise LookupError(f"line index outside [0, {m}]")
    faulted = labels < m
    if not faulted.any():
        raise DomainError("no faulted cases to analyse")
    t, y = top[faulted], labels[faulted]
    null_pred = t == m
    dist = np.where(null_pred, np.iinfo(int).max, D[y, np.minimum(t, m - 1)])
    nulls = ~faulted
    return HopTable(
        exact=float(np.mean(dist == 0)),
        one_hop=float(np.mean(dist <= 1)),
        two_hop=float(np.mean(dist <= 2)),
        cases=int(faulted.sum()),
        null_predicted=int(null_pred.sum()),
        null_cases=int(nulls.sum()),
        null_correct=int(np.sum(top[nulls] == m)),
    )


def uncertainty_index(test_U0, train_mean_U0) -> float:
    """zeta = 1/(n N') * sum_i ||U0_i - mean|| / ||mean||."""
    U = np.atleast_2d(np.asarray(test_U0, dtype=complex))
    mu = np.asarray(train_mean_U0, dtype=complex)
    n = mu.shape[0]
    if U.shape[1] != n or U.shape[0] == 0:
        raise ContractError("test voltages must be a nonempty (N', n) array")
    ref = np.linalg.norm(mu)
    if ref == 0:
        raise DomainError("training mean voltage has zero norm")
    return float(np.linalg.norm(U - mu, axis=1).sum() / (n * U.shape[0] * ref))


def delay_degradation(lar_clean: float, lar_delayed: float) -> float:
    return float(lar_clean - lar_delayed)


def window_sensitivity(lar_reference: float, lar_window: float) -> float:
    return float(abs(lar_reference - lar_window))
