"""Labeled fault scenarios and their CSV + JSON sidecar persistence."""
from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FAULT_TYPES = ("TP", "LG", "DLG", "LL")
NONE = "NONE"

HEAD = ("scenario_id", "system", "label", "fault_type", "z_f", "t", "seed")


@dataclass(frozen=True)
class FaultScenario:
    scenario_id: int
    label: int
    fault_type: str
    z_f: float
    t: float
    load_seed: int
    U0: np.ndarray = field(repr=False)
    Uf: np.ndarray = field(repr=False)
    U_fp: complex = complex("nan")

    @property
    def faulted(self) -> bool:
        return self.fault_type != NONE


@dataclass(frozen=True)
class Dataset:
    system: str
    n: int
    m: int
    scenarios: tuple[FaultScenario, ...] = ()
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scenarios", tuple(self.scenarios))
        for s in self.scenarios:
            if not 0 <= s.label <= self.m:
                raise ValueError(f"scenario {s.scenario_id}: label {s.label} outside [0, {self.m}]")
            if (s.label == self.m) != (s.fault_type == NONE):
                raise ValueError(f"scenario {s.scenario_id}: null label iff fault type NONE")
            if s.U0.shape != (self.n,) or s.Uf.shape != (self.n,):
                raise ValueError(f"scenario {s.scenario_id}: voltage vectors must have length {self.n}")

    def __len__(self):
        return len(self.scenarios)

    @property
    def U0(self) -> np.ndarray:
        return np.array([s.U0 for s in self.scenarios], dtype=complex).reshape(len(self), self.n)

    @property
    def Uf(self) -> np.ndarray:
        return np.array([s.Uf for s in self.scenarios], dtype=complex).reshape(len(self), self.n)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.label for s in self.scenarios], dtype=int)

    @property
    def fault_types(self) -> np.ndarray:
        return np.array([s.fault_type for s in self.scenarios], dtype=object)

    def subset(self, idx) -> "Dataset":
        return replace(self, scenarios=tuple(self.scenarios[int(k)] for k in idx))

    def with_voltages(self, U0, Uf, **config_updates) -> "Dataset":
        scen = tuple(replace(s, U0=np.asarray(a, dtype=complex), Uf=np.asarray(b, dtype=complex))
                     for s, a, b in zip(self.scenarios, U0, Uf))
        return replace(self, scenarios=scen, config={**self.config, **config_updates})


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def header(n: int) -> list[str]:
    cols = list(HEAD)
    cols += [f"u0_{part}_{k}" for k in range(1, n + 1) for part in ("re", "im")]
    cols += [f"uf_{part}_{k}" for k in range(1, n + 1) for part in ("re", "im")]
    cols += ["ufp_re", "ufp_im"]
    return cols


def save_dataset(ds: Dataset, path) -> Path:
    """Write ``path`` (CSV) and its ``.json`` sidecar; returns the CSV path."""
    path = Path(path)
    rows = [",".join(header(ds.n))]
    for s in ds.scenarios:
        cells = [str(s.scenario_id), ds.system, str(s.label), s.fault_type,
                 _fmt(s.z_f), _fmt(s.t), str(s.load_seed)]
        for vec in (s.U0, s.Uf):
            for u in vec:
                cells.append(_fmt(u.real))
                cells.append(_fmt(u.imag))
        cells += [_fmt(s.U_fp.real), _fmt(s.U_fp.imag)]
        rows.append(",".join(cells))
    _atomic_write(path, "\n".join(rows) + "\n")
    meta = {"system": ds.system, "n": ds.n, "m": ds.m, "count": len(ds), "config": ds.config}
    _atomic_write(sidecar_path(path), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    n = int(meta["n"])
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        cols = next(reader)
        if cols != header(n):
            raise ValueError(f"{path}: header does not match n={n}")
        scenarios = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(cols):
                raise ValueError(f"{path}:{lineno}: expected {len(cols)} fields, got {len(row)}")
            if row[1] != str(meta["system"]):
                raise ValueError(f"{path}:{lineno}: system {row[1]!r} differs from {meta['system']!r}")
            vals = np.array(row[7:], dtype=float)
            u0 = vals[0:2 * n:2] + 1j * vals[1:2 * n:2]
            uf = vals[2 * n:4 * n:2] + 1j * vals[2 * n + 1:4 * n:2]
            scenarios.append(FaultScenario(
                scenario_id=int(row[0]), label=int(row[2]), fault_type=row[3],
                z_f=float(row[4]), t=float(row[5]), load_seed=int(row[6]),
                U0=u0, Uf=uf, U_fp=complex(vals[4 * n], vals[4 * n + 1])))
    ds = Dataset(meta["system"], n, int(meta["m"]), tuple(scenarios), meta.get("config", {}))
    if len(ds) != meta.get("count", len(ds)):
        raise ValueError(f"{path}: expected {meta['count']} rows, found {len(ds)}")
    return ds
