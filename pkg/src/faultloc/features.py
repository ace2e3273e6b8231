"""Feature vectors psi = Y0 dU (all buses) and psi_bar (measured buses only)."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, DomainError
from .grid import FaultAugmentedMatrix


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray = field(repr=False)
    observed: tuple[int, ...]
    label: int | None = None


def _part(z: np.ndarray, part: str) -> np.ndarray:
    if part == "imag":
        return z.imag.copy()
    if part == "real":
        return z.real.copy()
    raise ValueError(f"part must be 'imag' or 'real', got {part!r}")


def _observed(S, n: int) -> np.ndarray:
    S = np.asarray(sorted(set(int(k) for k in S)), dtype=int)
    if S.size == 0:
        raise DomainError("measured bus set is empty")
    if S[0] < 0 or S[-1] >= n:
        raise ContractError(f"measured buses must lie in [0, {n})")
    return S


def support_mask(Y0: np.ndarray, S) -> np.ndarray:
    """Buses that may carry nonzero partial features: S and its neighbours."""
    S = np.asarray(S, dtype=int)
    mask = (Y0[:, S] != 0).any(axis=1)
    mask[S] = True
    return mask


def _psi(Y0, dU, S):
    return Y0[:, S] @ dU[S]


def feature_partial(Y0, U0, Uf, S, label=None, part: str = "imag") -> FeatureVector:
    Y0 = np.asarray(Y0)
    U0 = np.asarray(U0, dtype=complex)
    Uf = np.asarray(Uf, dtype=complex)
    n = Y0.shape[0]
    if Y0.shape != (n, n) or U0.shape != (n,) or Uf.shape != (n,):
        raise ContractError("Y0 must be n x n and voltage vectors length n")
    S = _observed(S, n)
    psi = _psi(Y0, Uf - U0, S)
    outside = ~support_mask(Y0, S)
    if np.any(psi[outside] != 0):
        raise AssertionError("partial feature leaked outside S and its neighbourhood")
    return FeatureVector(_part(psi, part), tuple(int(k) for k in S), label)


def feature_full(Y0, U0, Uf, label=None, part: str = "imag") -> FeatureVector:
    n = np.asarray(Y0).shape[0]
    return feature_partial(Y0, U0, Uf, range(n), label, part)


def feature_matrix(Y0, U0, Uf, S=None, part: str = "imag") -> np.ndarray:
    """Batched features: one row per scenario, shape (N, n)."""
    Y0 = np.asarray(Y0)
    n = Y0.shape[0]
    U0 = np.asarray(U0, dtype=complex).reshape(-1, n)
    Uf = np.asarray(Uf, dtype=complex).reshape(-1, n)
    S = _observed(range(n) if S is None else S, n)
    psi = (Uf[:, S] - U0[:, S]) @ Y0[:, S].T
    return _part(psi, part)


def dataset_features(Y0, ds, S=None, part: str = "imag"):
    return feature_matrix(Y0, ds.U0, ds.Uf, S, part), ds.labels


def unbalanced_current(Y0, YF: FaultAugmentedMatrix, Uf, U_fp) -> np.ndarray:
    """Current injected by the fault at its terminals.

    dIu = (Y0 - Y') U' - y_f1 U_f; only rows i and j are nonzero.
    """
    Y0 = np.asarray(Y0)
    Uf = np.asarray(Uf, dtype=complex)
    n = YF.n
    if Y0.shape != (n, n) or Uf.shape != (n,):
        raise ContractError("Y0 and U' must match the augmented matrix dimension")
    Yp = YF.Yprime
    i, j = YF.i, YF.j
    rest = np.ones((n, n), dtype=bool)
    rest[np.ix_([i, j], [i, j])] = False
    if not np.array_equal(Y0[rest], Yp[rest]):
        raise ContractError("augmented matrix does not derive from this Y0")
    out = np.zeros(n, dtype=complex)
    yf1 = YF.yf1
    out[i] = (Y0[i, i] - Yp[i, i]) * Uf[i] + (Y0[i, j] - Yp[i, j]) * Uf[j] - yf1[i] * U_fp
    out[j] = (Y0[j, i] - Yp[j, i]) * Uf[i] + (Y0[j, j] - Yp[j, j]) * Uf[j] - yf1[j] * U_fp
    return out


class Standardizer:
    """Per-feature z-scoring fit on training rows (off unless asked for)."""

    def __init__(self):
        self.mean = None
        self.std = None

    def fit(self, X):
        X = np.asarray(X, dtype=float)
        self.mean = X.mean(axis=0)
        std = X.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)
        return self

    def transform(self, X):
        if self.mean is None:
            raise RuntimeError("Standardizer used before fit")
        return (np.asarray(X, dtype=float) - self.mean) / self.std


def export_features_csv(path, X, labels) -> Path:
    path = Path(path)
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels, dtype=int)
    cols = ["label"] + [f"f{k}" for k in range(1, X.shape[1] + 1)]
    rows = [",".join(cols)]
    for y, x in zip(labels, X):
        rows.append(",".join([str(int(y))] + [format(v, ".17g") for v in x]))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path
