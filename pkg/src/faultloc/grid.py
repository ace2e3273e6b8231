"""Test-case parsing, pre-fault admittance matrix and fault augmentation.

Case files are UTF-8 CSV with ``#``-prefixed section headers::

    #reference
    31
    #buses id,shunt_re,shunt_im,p_load,q_load
    1,0,0,0.97,0.44
    ...
    #lines id,from,to,r,x,b
    1,1,2,0.0035,0.0411,0.6987
    ...

All values are per unit. ``#reference`` is optional (defaults to the first
bus). Other lines starting with ``#`` and blank lines are ignored.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import CaseFormatError, DomainError, GridValidationError, SingularElementError

T_MIN = 0.05

BUS_COLUMNS = ("id", "shunt_re", "shunt_im", "p_load", "q_load")
LINE_COLUMNS = ("id", "from", "to", "r", "x", "b")


@dataclass(frozen=True)
class Bus:
    id: int
    shunt: complex = 0j
    load: complex = 0j  # p_load + j q_load; the injection is -load

    @property
    def injection(self) -> complex:
        return -self.load


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    z: complex
    b: float = 0.0


@dataclass(frozen=True)
class GridSpec:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    reference_bus: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.buses)

    @property
    def m(self) -> int:
        return len(self.lines)

    @cached_property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    @cached_property
    def _bus_pos(self) -> dict[int, int]:
        return {b: k for k, b in enumerate(self.bus_ids)}

    def bus_index(self, bus_id: int) -> int:
        try:
            return self._bus_pos[bus_id]
        except KeyError:
            raise LookupError(f"unknown bus id {bus_id}") from None

    @property
    def reference_index(self) -> int:
        return self.bus_index(self.reference_bus)

    @cached_property
    def terminals(self) -> np.ndarray:
        """(m, 2) array of 0-based terminal bus positions per line."""
        out = np.empty((self.m, 2), dtype=int)
        for q, ln in enumerate(self.lines):
            out[q] = self.bus_index(ln.from_bus), self.bus_index(ln.to_bus)
        return out

    @cached_property
    def neighbors(self) -> tuple[frozenset[int], ...]:
        adj = [set() for _ in range(self.n)]
        for i, j in self.terminals:
            adj[i].add(int(j))
            adj[j].add(int(i))
        return tuple(frozenset(a) for a in adj)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors])

    @property
    def loads(self) -> np.ndarray:
        return np.array([b.load for b in self.buses], dtype=complex)

    def with_loads(self, loads) -> "GridSpec":
        loads = np.asarray(loads, dtype=complex)
        if loads.shape != (self.n,):
            raise ValueError(f"expected {self.n} loads, got shape {loads.shape}")
        buses = tuple(replace(b, load=complex(v)) for b, v in zip(self.buses, loads))
        return replace(self, buses=buses)


def _validate(spec: GridSpec) -> None:
    if len(spec.buses) < 2:
        raise GridValidationError("a grid needs at least 2 buses")
    ids = [b.id for b in spec.buses]
    if len(set(ids)) != len(ids):
        raise GridValidationError("duplicate bus id")
    known = set(ids)
    if spec.reference_bus not in known:
        raise GridValidationError(f"reference bus {spec.reference_bus} does not exist")
    seen_pairs = {}
    line_ids = set()
    for ln in spec.lines:
        if ln.id in line_ids:
            raise GridValidationError(f"duplicate line id {ln.id}")
        line_ids.add(ln.id)
        if ln.from_bus not in known or ln.to_bus not in known:
            raise GridValidationError(f"line {ln.id} references a missing bus")
        if ln.from_bus == ln.to_bus:
            raise GridValidationError(f"line {ln.id} is a self-loop")
        pair = frozenset((ln.from_bus, ln.to_bus))
        if pair in seen_pairs:
            raise GridValidationError(
                f"duplicate line between buses {ln.from_bus} and {ln.to_bus} "
                f"(ids {seen_pairs[pair]} and {ln.id})")
        seen_pairs[pair] = ln.id
        if ln.z == 0:
            raise SingularElementError(f"line {ln.id} has zero series impedance")
    if not _connected(ids, [(ln.from_bus, ln.to_bus) for ln in spec.lines]):
        raise GridValidationError("line graph is not connected")


def _connected(nodes, edges) -> bool:
    adj = {v: [] for v in nodes}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    start = nodes[0]
    seen = {start}
    todo = deque([start])
    while todo:
        v = todo.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return len(seen) == len(nodes)


def parse_case(case_file) -> GridSpec:
    path = Path(case_file)
    text = path.read_text(encoding="utf-8")
    section = None
    buses, lines, reference = [], [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        row = raw.strip()
        if not row:
            continue
        if row.startswith("#"):
            head = row[1:].split(None, 1)
            key = head[0].lower() if head else ""
            if key in ("buses", "lines", "reference"):
                section = key
                if key != "reference" and len(head) > 1:
                    cols = tuple(c.strip() for c in head[1].split(","))
                    expected = BUS_COLUMNS if key == "buses" else LINE_COLUMNS
                    if cols != expected:
                        raise CaseFormatError(
                            f"#{key} header must be {','.join(expected)}", lineno)
            continue
        if section is None:
            raise CaseFormatError("data row before any section header", lineno)
        cells = [c.strip() for c in row.split(",")]
        try:
            if section == "reference":
                if reference is not None or len(cells) != 1:
                    raise CaseFormatError("#reference takes exactly one bus id", lineno)
                reference = int(cells[0])
            elif section == "buses":
                if len(cells) != 5:
                    raise CaseFormatError(f"bus row needs 5 fields, got {len(cells)}", lineno)
                bid = int(cells[0])
                sr, si, p, q = (float(c) for c in cells[1:])
                buses.append(Bus(bid, complex(sr, si), complex(p, q)))
            else:
                if len(cells) != 6:
                    raise CaseFormatError(f"line row needs 6 fields, got {len(cells)}", lineno)
                lid, f, t = (int(c) for c in cells[:3])
                r, x, b = (float(c) for c in cells[3:])
                lines.append(Line(lid, f, t, complex(r, x), b))
        except ValueError as exc:
            if isinstance(exc, CaseFormatError):
                raise
            raise CaseFormatError(f"bad number ({exc})", lineno) from None
    if not buses:
        raise CaseFormatError("no #buses section")
    if reference is None:
        reference = buses[0].id
    return GridSpec(tuple(buses), tuple(lines), reference, name=path.stem)


def bundled_case(system) -> GridSpec:
    """Load a bundled case by system tag (``"39"`` or ``"68"``)."""
    name = f"ieee{str(system).removeprefix('ieee')}.csv"
    ref = resources.files("faultloc").joinpath("cases").joinpath(name)
    if not ref.is_file():
        raise LookupError(f"no bundled case for system {system!r}")
    with resources.as_file(ref) as p:
        return parse_case(p)


def build_admittance(spec: GridSpec) -> np.ndarray:
    """Dense complex pre-fault bus admittance matrix (pi-model lines)."""
    n = spec.n
    Y = np.zeros((n, n), dtype=complex)
    for b in spec.buses:
        k = spec.bus_index(b.id)
        Y[k, k] += b.shunt
    for ln, (i, j) in zip(spec.lines, spec.terminals):
        if ln.z == 0:
            raise SingularElementError(f"line {ln.id} has zero series impedance")
        y = 1.0 / ln.z
        half = 0.5j * ln.b
        Y[i, i] += y + half
        Y[j, j] += y + half
        Y[i, j] -= y
        Y[j, i] -= y
    return Y


@dataclass(frozen=True)
class FaultAugmentedMatrix:
    matrix: np.ndarray = field(repr=False)
    line: int
    i: int
    j: int
    t: float
    y_fault: complex

    @property
    def n(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def Yprime(self) -> np.ndarray:
        return self.matrix[:-1, :-1]

    @property
    def yf1(self) -> np.ndarray:
        return self.matrix[:-1, -1]

    @property
    def yf2(self) -> complex:
        return self.matrix[-1, -1]


def augment_fault(Y0: np.ndarray, spec: GridSpec, line: int, t: float, y_fault: complex,
                  t_min: float = T_MIN) -> FaultAugmentedMatrix:
    """Insert fault point F at fraction ``t`` along line ``line`` (0-based index).

    F becomes node n+1; the i-j series branch is replaced by i-F (t z) and
    F-j ((1-t) z). Line charging stays at the terminals.
    """
    if not 0 <= line < spec.m:
        raise LookupError(f"unknown line index {line}")
    if not (t_min <= t <= 1.0 - t_min):
        raise DomainError(f"fault position t={t} outside [{t_min}, {1 - t_min}]")
    if not np.isfinite(y_fault):
        raise DomainError("fault admittance must be finite")
    n = spec.n
    i, j = (int(v) for v in spec.terminals[line])
    z = spec.lines[line].z
    y = 1.0 / z
    a = 1.0 / (t * z)
    b = 1.0 / ((1.0 - t) * z)
    YF = np.zeros((n + 1, n + 1), dtype=complex)
    YF[:n, :n] = Y0
    YF[i, i] += a - y
    YF[j, j] += b - y
    YF[i, j] += y
    YF[j, i] += y
    YF[i, n] = YF[n, i] = -a
    YF[j, n] = YF[n, j] = -b
    YF[n, n] = a + b + y_fault
    return FaultAugmentedMatrix(YF, line, i, j, float(t), complex(y_fault))


def kron_reduce(matrix: np.ndarray, keep: int) -> np.ndarray:
    """Eliminate every node from index ``keep`` on (Schur complement)."""
    A = matrix[:keep, :keep]
    B = matrix[:keep, keep:]
    C = matrix[keep:, :keep]
    D = matrix[keep:, keep:]
    return A - B @ np.linalg.solve(D, C)
