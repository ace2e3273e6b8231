import numpy as np
import pytest

from faultloc.errors import ContractError, DomainError
from faultloc.metrics import (arc, delay_degradation, hop_analysis, lar, lar_by_type,
                              line_hop_matrix, uncertainty_index, window_sensitivity)


def oracle_lar(pred, labels):
    hits = 0
    for p, y in zip(pred, labels):
        hits += int(p == y)
    return hits / len(labels)


def oracle_arc(rankings, labels):
    total = 0
    for r, y in zip(rankings, labels):
        total += list(r).index(y) + 1
    return total / len(labels)


def oracle_line_distance(terminals):
    """Floyd-Warshall over the line graph (lines adjacent when they share a bus)."""
    m = len(terminals)
    inf = 10 ** 9
    D = [[0 if a == b else (1 if set(terminals[a]) & set(terminals[b]) else inf) for b in range(m)]
         for a in range(m)]
    for k in range(m):
        for a in range(m):
            for b in range(m):
                if D[a][k] + D[k][b] < D[a][b]:
                    D[a][b] = D[a][k] + D[k][b]
    return D


def random_connected_graph(rng, n):
    edges = set()
    for v in range(1, n):
        u = int(rng.integers(v))
        edges.add((u, v))
    for _ in range(int(rng.integers(0, n))):
        a, b = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((a, b))
    return sorted(edges)


@pytest.mark.parametrize("seed", range(50))
def test_lar_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    C, N = int(rng.integers(2, 30)), int(rng.integers(1, 60))
    labels = rng.integers(0, C, N)
    pred = np.where(rng.random(N) < 0.6, labels, rng.integers(0, C, N))
    assert lar(pred, labels) == oracle_lar(pred.tolist(), labels.tolist())
    rankings = np.array([rng.permutation(C) for _ in range(N)])
    assert lar(rankings, labels) == oracle_lar(rankings[:, 0].tolist(), labels.tolist())


@pytest.mark.parametrize("seed", range(50))
def test_arc_matches_oracle(seed):
    rng = np.random.default_rng(1000 + seed)
    C, N = int(rng.integers(2, 30)), int(rng.integers(1, 60))
    labels = rng.integers(0, C, N)
    rankings = np.array([rng.permutation(C) for _ in range(N)])
    assert arc(rankings, labels) == oracle_arc(rankings.tolist(), labels.tolist())


@pytest.mark.parametrize("seed", range(50))
def test_hop_analysis_matches_oracle(seed):
    rng = np.random.default_rng(2000 + seed)
    n = int(rng.integers(3, 12))
    terminals = random_connected_graph(rng, n)
    m = len(terminals)
    N = int(rng.integers(5, 40))
    labels = rng.integers(0, m + 1, N)
    labels[0] = 0                                         # at least one faulted case
    pred = rng.integers(0, m + 1, N)
    D = oracle_line_distance(terminals)
    table = hop_analysis(pred, labels, terminals)
    faulted = [(int(p), int(y)) for p, y in zip(pred, labels) if y < m]
    dist = [D[y][p] if p < m else 10 ** 9 for p, y in faulted]
    assert table.cases == len(faulted)
    assert table.exact == sum(d == 0 for d in dist) / len(dist)
    assert table.one_hop == sum(d <= 1 for d in dist) / len(dist)
    assert table.two_hop == sum(d <= 2 for d in dist) / len(dist)
    assert table.null_predicted == sum(p == m for p, _ in faulted)
    assert table.null_cases == int(np.sum(labels == m))
    assert table.null_correct == int(np.sum((labels == m) & (pred == m)))
    assert table.exact <= table.one_hop <= table.two_hop <= 1


def test_lar_seven_of_ten():
    labels = np.arange(10)
    pred = labels.copy()
    pred[[1, 4, 8]] = 0
    pred[1] = 2
    assert lar(pred, labels) == pytest.approx(0.7)


def test_arc_perfect_is_one():
    rankings = np.array([[2, 0, 1], [1, 2, 0]])
    assert arc(rankings, [2, 1]) == 1.0
    assert arc(rankings, [1, 0]) == 3.0
    assert arc(rankings, [0, 0]) == 2.5


def test_path_graph_hops():
    # bus path 0-1-2-3-4-5 -> lines L0..L4 form a path in the line graph
    terminals = [(k, k + 1) for k in range(5)]
    D = line_hop_matrix(terminals)
    assert D[0].tolist() == [0, 1, 2, 3, 4]
    labels = [0, 0, 0, 0, 0]
    pred = [0, 1, 2, 3, 5]                   # 5 = null class
    t = hop_analysis(pred, labels, terminals)
    assert (t.exact, t.one_hop, t.two_hop) == (0.2, 0.4, 0.6)
    assert t.null_predicted == 1


def test_metric_errors():
    with pytest.raises(DomainError):
        lar([], [])
    with pytest.raises(ContractError):
        lar([1, 2], [1])
    with pytest.raises(ContractError):
        arc(np.array([[0, 0, 1]]), [1])
    with pytest.raises(LookupError):
        hop_analysis([7], [0], [(0, 1), (1, 2)])
    with pytest.raises(DomainError):
        hop_analysis([2], [2], [(0, 1), (1, 2)])


def test_lar_by_type():
    out = lar_by_type([0, 1, 2, 3], [0, 0, 2, 2], ["TP", "LG", "TP", "LG"])
    assert out == {"LG": 0.0, "TP": 1.0}


def test_zeta_cases():
    mu = np.array([1.0 + 0j, 0.9 - 0.1j, 1.05j])
    assert uncertainty_index(np.tile(mu, (4, 1)), mu) == 0.0
    assert uncertainty_index(2 * mu[None, :], mu) == pytest.approx(1 / 3)
    with pytest.raises(DomainError):
        uncertainty_index(mu[None, :], np.zeros(3))
    with pytest.raises(ContractError):
        uncertainty_index(np.ones((2, 4)), mu)


def test_zeta_generated_68(case68):
    from faultloc.faultgen import GenerationConfig, generate_dataset
    ds = generate_dataset(case68, GenerationConfig(per_type=20, seed=2))
    z = uncertainty_index(ds.U0, ds.U0.mean(axis=0))
    assert 0 < z < 0.01


def test_delay_and_window_deltas():
    assert delay_degradation(0.9, 0.75) == pytest.approx(0.15)
    assert window_sensitivity(0.7, 0.8) == pytest.approx(0.1)
