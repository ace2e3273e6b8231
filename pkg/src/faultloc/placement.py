"""PMU placement: loss-driven greedy selection, random and 2-hop cover baselines.

Bus sets are 0-based positions in the case's bus order.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DomainError, GridValidationError, TrainingError
from .features import Standardizer, feature_matrix
from .grid import GridSpec, build_admittance
from .training import TrainConfig, train


@dataclass
class CandidateResult:
    bus: int
    loss: float | None
    degree_term: float
    score: float | None
    failed: str | None = None


@dataclass
class PlacementStep:
    step: int
    candidates: list[CandidateResult]
    chosen: int | None
    accepted: bool


@dataclass
class PlacementSet:
    buses: tuple[int, ...]
    K: int
    algorithm: str
    beta: float | None = None
    seed: int | None = None
    initial: tuple[int, ...] = ()
    log: list[PlacementStep] = field(default_factory=list)

    def __post_init__(self):
        self.buses = tuple(int(b) for b in self.buses)
        self.initial = tuple(int(b) for b in self.initial)
        if len(set(self.buses)) != len(self.buses):
            raise ValueError("placement contains duplicate buses")
        if not set(self.initial) <= set(self.buses):
            raise ValueError("initial set must be contained in the placement")

    @property
    def complete(self) -> bool:
        return len(self.buses) == self.K

    def to_dict(self) -> dict:
        d = asdict(self)
        d["buses"] = list(self.buses)
        d["initial"] = list(self.initial)
        d["complete"] = self.complete
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PlacementSet":
        log = [PlacementStep(s["step"], [CandidateResult(**c) for c in s["candidates"]],
                             s["chosen"], s["accepted"]) for s in d.get("log", [])]
        return cls(tuple(d["buses"]), int(d["K"]), d["algorithm"], d.get("beta"), d.get("seed"),
                   tuple(d.get("initial", ())), log)

    def save(self, path) -> Path:
        from .dataset import _atomic_write
        path = Path(path)
        _atomic_write(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path) -> "PlacementSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def default_initial_set(spec: GridSpec, size: int = 2) -> tuple[int, ...]:
    """The ``size`` highest-degree buses, ties broken by lower position."""
    order = sorted(range(spec.n), key=lambda k: (-spec.degrees[k], k))
    return tuple(sorted(order[:size]))


def budget_config(config: TrainConfig, fraction: float = 0.1, lr_scale: float = 3.0) -> TrainConfig:
    """Reduced per-candidate training budget used inside the greedy search."""
    return replace(config.scaled(fraction), learning_rate=config.learning_rate * lr_scale)


def candidate_fit(arch, Y0, train_data, val_data, S, config: TrainConfig,
                  standardize: bool = False, init=None):
    """Train on features restricted to ``S``; returns ``(loss, params)``.

    ``loss`` is the smallest training objective seen at the validation
    checkpoints. ``train_data`` / ``val_data`` are ``(U0, Uf, labels)``
    triples; ``init`` optionally warm-starts the parameters.
    """
    Xtr = feature_matrix(Y0, train_data[0], train_data[1], S)
    Xva = feature_matrix(Y0, val_data[0], val_data[1], S)
    if standardize:
        scaler = Standardizer().fit(Xtr)
        Xtr, Xva = scaler.transform(Xtr), scaler.transform(Xva)
    params, hist = train(arch, (Xtr, train_data[2]), (Xva, val_data[2]), config, init=init)
    return min(hist.train_loss), params


def candidate_loss(arch, Y0, train_data, val_data, S, config: TrainConfig,
                   standardize: bool = False, init=None) -> float:
    return candidate_fit(arch, Y0, train_data, val_data, S, config, standardize, init)[0]


def _triple(ds):
    return (ds.U0, ds.Uf, ds.labels) if hasattr(ds, "scenarios") else ds


def greedy_placement(train_ds, val_ds, spec: GridSpec, arch, K: int, beta: float = 0.5,
                     S0=None, budget: TrainConfig | None = None, seed: int = 0,
                     loss_fn=None, standardize: bool = False,
                     warm_start: bool = True) -> PlacementSet:
    """Grow ``S0`` one bus at a time by minimizing ``beta / d_i + l_i``.

    ``l_i`` is the training objective of a classifier trained (under
    ``budget``) on features restricted to ``S + {i}``. Every candidate run
    uses the same ``seed`` (same initialization and batch order), so
    candidates differ only in their bus sets. A step is accepted
    only if ``l_i*`` improves on the incumbent loss; otherwise the search
    stops with fewer than ``K`` buses.

    With ``warm_start`` every candidate of a step starts from the parameters
    trained for the bus set accepted in the previous step (the first step
    starts from the seeded initialization). A custom ``loss_fn(buses, cfg)``
    replaces the built-in training and disables warm starting.
    """
    if not 0 < K <= spec.n:
        raise DomainError(f"K must lie in [1, {spec.n}], got {K}")
    if not 0 <= beta < 1:
        raise DomainError(f"beta must lie in [0, 1), got {beta}")
    S = list(default_initial_set(spec) if S0 is None else sorted(set(int(b) for b in S0)))
    if len(S) > K:
        raise DomainError(f"|S0| = {len(S)} exceeds K = {K}")
    if any(not 0 <= b < spec.n for b in S):
        raise DomainError("initial buses out of range")
    initial = tuple(S)
    budget = replace(budget or budget_config(TrainConfig()), seed=seed)
    Y0 = build_admittance(spec)
    tr, va = _triple(train_ds), _triple(val_ds)
    incumbent_params = None
    if loss_fn is None:
        def fit(buses, cfg):
            return candidate_fit(arch, Y0, tr, va, buses, cfg, standardize,
                                 incumbent_params if warm_start else None)
    else:
        def fit(buses, cfg):
            return loss_fn(buses, cfg), None
    degrees = spec.degrees
    incumbent = math.inf
    log = []
    step = 0
    while len(S) < K:
        step += 1
        results = []
        fitted = {}
        for i in range(spec.n):
            if i in S:
                continue
            term = beta / degrees[i]
            try:
                li, fitted[i] = fit(sorted(S + [i]), budget)
                li = float(li)
                if not math.isfinite(li):
                    raise TrainingError("non-finite candidate loss")
            except TrainingError as exc:
                results.append(CandidateResult(i, None, term, None, str(exc)))
                continue
            results.append(CandidateResult(i, li, term, term + li))
        ok = [r for r in results if r.failed is None]
        if not ok:
            log.append(PlacementStep(step, results, None, False))
            break
        best = min(ok, key=lambda r: (r.score, r.bus))
        accepted = best.loss < incumbent
        log.append(PlacementStep(step, results, best.bus, accepted))
        if not accepted:
            break
        S.append(best.bus)
        incumbent = best.loss
        incumbent_params = fitted[best.bus]
    return PlacementSet(tuple(S), K, "greedy", beta, seed, initial, log)


def random_placement(n: int, K: int, seed: int = 0) -> PlacementSet:
    if not 0 < K <= n:
        raise DomainError(f"K must lie in [1, {n}], got {K}")
    rng = np.random.default_rng(seed)
    buses = rng.choice(n, size=K, replace=False)
    return PlacementSet(tuple(int(b) for b in buses), K, "random", None, seed)


def _adjacency(n, edges):
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    return adj


def bus_distances(n, edges, sources) -> np.ndarray:
    """Multi-source BFS hop distance from ``sources`` to every bus."""
    adj = _adjacency(n, edges)
    dist = np.full(n, -1)
    todo = deque()
    for s in sources:
        dist[s] = 0
        todo.append(s)
    while todo:
        v = todo.popleft()
        for w in adj[v]:
            if dist[w] < 0:
                dist[w] = dist[v] + 1
                todo.append(w)
    return dist


def satisfies_two_hop(n, edges, S) -> bool:
    """Every edge is within two hops of a selected bus.

    An edge's hop distance to ``s`` counts the edge itself, i.e. it is one
    more than the distance from ``s`` to the nearer endpoint.
    """
    if not S:
        return len(edges) == 0
    dist = bus_distances(n, edges, S)
    return all(0 <= min(dist[u], dist[v]) and 1 + min(dist[u], dist[v]) <= 2 for u, v in edges)


def two_hop_cover(n: int, edges) -> list[int]:
    """Greedy set cover: bus b covers edges with an endpoint in b's closed neighbourhood."""
    edges = [tuple(int(x) for x in e) for e in edges]
    adj = _adjacency(n, edges)
    if n > 1 and (bus_distances(n, edges, [0]) < 0).any():
        raise GridValidationError("graph is not connected")
    covers = []
    for b in range(n):
        near = adj[b] | {b}
        covers.append({k for k, (u, v) in enumerate(edges) if u in near or v in near})
    uncovered = set(range(len(edges)))
    chosen = []
    while uncovered:
        gain = [len(c & uncovered) for c in covers]
        b = int(np.argmax(gain))  # first maximum -> lowest bus
        chosen.append(b)
        uncovered -= covers[b]
    return chosen


def two_hop_vc(spec: GridSpec) -> PlacementSet:
    edges = [tuple(t) for t in spec.terminals]
    chosen = two_hop_cover(spec.n, edges)
    if not satisfies_two_hop(spec.n, edges, chosen):
        raise AssertionError("greedy cover violates the 2-hop property")
    return PlacementSet(tuple(chosen), len(chosen), "two_hop_vc")
