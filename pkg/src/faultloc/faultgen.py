"""Synthetic fault scenarios from a linear quasi-steady-state network model.

Loads are constant current injections ``I_k = conj(S_k)`` (phasor reference
1 at 0 degrees). The pre-fault solve pins the reference bus to 1+0j; the
during-fault solve holds every bus injection at its realized pre-fault
value, so the only change in the network is the fault node.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as sla

from .dataset import FAULT_TYPES, NONE, Dataset, FaultScenario
from .errors import ContractError, DomainError, SolverError
from .grid import T_MIN, FaultAugmentedMatrix, GridSpec, augment_fault, build_admittance

# positive-sequence multiplier on 1/Z_f, equal sequence impedances assumed
FAULT_ADMITTANCE_FACTOR = {"TP": 1.0, "LG": 1.0 / 3.0, "DLG": 2.0 / 3.0, "LL": 0.5}

RCOND_MIN = 1e-13
VOLTAGE_BAND = (0.5, 1.5)


def fault_admittance(fault_type: str, z_f: float) -> complex:
    return FAULT_ADMITTANCE_FACTOR[fault_type] / z_f


def _solve(A: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    anorm = np.abs(A).sum(axis=0).max()
    (gecon,) = sla.get_lapack_funcs(("gecon",), (lu,))
    rcond, _ = gecon(lu, anorm, norm="1")
    if not rcond > RCOND_MIN:
        cond = np.inf if rcond == 0 else 1.0 / rcond
        raise SolverError(f"{what}: singular system (condition estimate {cond:.3e})")
    return sla.lu_solve((lu, piv), rhs)


def sample_loads(spec: GridSpec, eps: float, seed) -> GridSpec:
    """Perturb every bus's p and q load by independent N(0, eps) noise.

    ``eps`` is a variance in p.u.^2, so the standard deviation is sqrt(eps).
    """
    if eps < 0:
        raise DomainError(f"load variance must be >= 0, got {eps}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(eps), size=(spec.n, 2))
    return spec.with_loads(spec.loads + noise[:, 0] + 1j * noise[:, 1])


def solve_prefault(spec: GridSpec, Y0: np.ndarray | None = None):
    """Return ``(U0, I0)`` with the reference bus pinned to 1+0j.

    ``I0 = Y0 @ U0`` is the realized injection; it equals ``conj(S)`` on every
    bus except the reference, which absorbs the balance.
    """
    if Y0 is None:
        Y0 = build_admittance(spec)
    r = spec.reference_index
    A = Y0.copy()
    rhs = np.conj(-spec.loads)
    A[r, :] = 0.0
    A[r, r] = 1.0
    rhs[r] = 1.0
    U0 = _solve(A, rhs, "pre-fault")
    U0[r] = 1.0  # exact, not just to rounding
    return U0, Y0 @ U0


def solve_duringfault(YF: FaultAugmentedMatrix, I0: np.ndarray, anchor=None):
    """Solve ``YF [U'; U_f] = [I0; 0]`` and return ``(U', U_f)``.

    A network with no path to ground (zero total shunt, zero fault
    admittance) only fixes voltages up to a common offset; ``anchor`` =
    ``(bus_index, voltage)`` pins one bus in that case.
    """
    I0 = np.asarray(I0, dtype=complex)
    n = YF.n
    if I0.shape != (n,):
        raise ContractError(f"injection vector must have length {n}")
    A = YF.matrix
    rhs = np.concatenate([I0, [0.0]])
    scale = np.abs(A).max()
    if abs(A.sum()) <= 1e-12 * scale:
        if anchor is None:
            raise SolverError("during-fault: floating network needs an anchor bus")
        k, v = anchor
        A = A.copy()
        A[k, :] = 0.0
        A[k, k] = 1.0
        rhs[k] = v
    x = _solve(A, rhs, "during-fault")
    return x[:n], complex(x[n])


@dataclass
class GenerationConfig:
    """Scenario counts, sampling ranges and seeds for ``generate_dataset``.

    Load draws whose pre-fault snapshot leaves ``VOLTAGE_BAND`` are redrawn
    from the next sub-seed; the accepted seed is recorded per scenario.

    With ``impedances`` set, every (type, line, impedance) triple is emitted
    once; otherwise ``per_type`` scenarios per fault type cycle through the
    lines with log-uniform ``z_f``.
    """
    fault_types: tuple[str, ...] = FAULT_TYPES
    per_type: int = 0
    impedances: tuple[float, ...] | None = None
    null_count: int = 0
    eps: float = 0.01
    z_range: tuple[float, float] = (1e-4, 0.1)
    t_min: float = T_MIN
    seed: int = 0
    perturb_fault_injections: bool = False
    system: str = ""

    def __post_init__(self):
        self.fault_types = tuple(self.fault_types)
        if self.impedances is not None:
            self.impedances = tuple(float(z) for z in self.impedances)
        self.z_range = tuple(float(z) for z in self.z_range)
        bad = set(self.fault_types) - set(FAULT_TYPES)
        if bad:
            raise DomainError(f"unknown fault types {sorted(bad)}")
        lo, hi = self.z_range
        if not 0 < lo <= hi:
            raise DomainError(f"bad impedance range {self.z_range}")
        for z in self.impedances or ():
            if not lo <= z <= hi:
                raise DomainError(f"impedance {z} outside {self.z_range}")
        if self.per_type < 0 or self.null_count < 0:
            raise DomainError("scenario counts must be >= 0")


@dataclass(frozen=True)
class _Plan:
    sid: int
    fault_type: str
    line: int = -1
    z_f: float | None = None


def _plan(cfg: GenerationConfig, m: int) -> list[_Plan]:
    plans = []
    for ft in cfg.fault_types:
        if cfg.impedances is not None:
            for q in range(m):
                for z in cfg.impedances:
                    plans.append(_Plan(len(plans), ft, q, z))
        else:
            for k in range(cfg.per_type):
                plans.append(_Plan(len(plans), ft, k % m))
    for _ in range(cfg.null_count):
        plans.append(_Plan(len(plans), NONE))
    return plans


MAX_REDRAWS = 100


def scenario_seed(master_seed: int, scenario_id: int, attempt: int = 0) -> int:
    key = [int(master_seed), int(scenario_id)] + ([int(attempt)] if attempt else [])
    return int(np.random.SeedSequence(key).generate_state(1, dtype=np.uint64)[0])


def _in_band(U) -> bool:
    mag = np.abs(U)
    return bool(np.all((mag > VOLTAGE_BAND[0]) & (mag < VOLTAGE_BAND[1])))


def _draw_prefault(spec, Y0, eps, seeds):
    """First load draw whose pre-fault snapshot lies inside the sanity band."""
    for seed in seeds:
        U0, I0 = solve_prefault(sample_loads(spec, eps, seed), Y0)
        if _in_band(U0):
            return seed, U0, I0
    raise SolverError(f"no load draw within the |U| band {VOLTAGE_BAND} after {MAX_REDRAWS} attempts")


def _make_scenario(spec: GridSpec, Y0, cfg: GenerationConfig, plan: _Plan) -> FaultScenario:
    m = spec.m
    seed, U0, I0 = _draw_prefault(
        spec, Y0, cfg.eps, (scenario_seed(cfg.seed, plan.sid, a) for a in range(MAX_REDRAWS)))
    if plan.fault_type == NONE:
        _, Uf, _ = _draw_prefault(spec, Y0, cfg.eps, ([seed, 2, a] for a in range(MAX_REDRAWS)))
        return FaultScenario(plan.sid, m, NONE, 0.0, 0.0, seed, U0, Uf)
    rng = np.random.default_rng([seed, 1])
    lo, hi = cfg.z_range
    z_f = plan.z_f if plan.z_f is not None else math.exp(rng.uniform(math.log(lo), math.log(hi)))
    t = float(rng.uniform(cfg.t_min, 1.0 - cfg.t_min))
    YF = augment_fault(Y0, spec, plan.line, t, fault_admittance(plan.fault_type, z_f), cfg.t_min)
    I_during = I0
    if cfg.perturb_fault_injections:
        d = np.random.default_rng([seed, 3]).normal(0.0, math.sqrt(cfg.eps), size=(spec.n, 2))
        dI = -np.conj(d[:, 0] + 1j * d[:, 1])
        dI[spec.reference_index] = 0.0
        I_during = I0 + dI
    r = spec.reference_index
    Uf, Ufp = solve_duringfault(YF, I_during, anchor=(r, U0[r]))
    return FaultScenario(plan.sid, plan.line, plan.fault_type, float(z_f), t, seed, U0, Uf, Ufp)


def generate_dataset(spec: GridSpec, config: GenerationConfig) -> Dataset:
    Y0 = build_admittance(spec)
    scenarios = []
    for plan in _plan(config, spec.m):
        try:
            s = _make_scenario(spec, Y0, config, plan)
        except SolverError as exc:
            raise SolverError(f"scenario {plan.sid} ({plan.fault_type}, line {plan.line}): {exc}") from exc
        scenarios.append(s)
    system = config.system or spec.name
    return Dataset(system, spec.n, spec.m, tuple(scenarios), {"generation": _snapshot(config)})


def _snapshot(cfg: GenerationConfig) -> dict:
    d = asdict(cfg)
    for k, v in d.items():
        if isinstance(v, tuple):
            d[k] = list(v)
    return d


def add_noise(ds: Dataset, snr_db, seed: int) -> Dataset:
    """Add circular complex Gaussian noise to U0 and U' at the given SNR.

    Noise power is set per scenario and per vector from its mean |U_k|^2.
    ``snr_db`` of ``None`` or ``inf`` means no noise.
    """
    if snr_db is None or snr_db == math.inf:
        return ds
    if not math.isfinite(snr_db):
        raise DomainError(f"snr_db must be finite, got {snr_db}")
    scale = 10.0 ** (-snr_db / 10.0)
    U0s, Ufs = [], []
    for s in ds.scenarios:
        rng = np.random.default_rng([int(seed), s.scenario_id])
        out = []
        for vec in (s.U0, s.Uf):
            sigma = math.sqrt(np.mean(np.abs(vec) ** 2) * scale / 2.0)
            out.append(vec + sigma * (rng.standard_normal(vec.shape) + 1j * rng.standard_normal(vec.shape)))
        U0s.append(out[0])
        Ufs.append(out[1])
    history = list(ds.config.get("corruptions", [])) + [{"noise": {"snr_db": snr_db, "seed": seed}}]
    return ds.with_voltages(U0s, Ufs, corruptions=history)


def apply_delay(ds: Dataset, mu_d: float, sigma_d: float, fraction: float, seed: int,
                window_ms: float = 200.0) -> Dataset:
    """Blend delayed meters' during-fault voltage back toward pre-fault.

    Per scenario, ceil(fraction * n) buses get a delay d ~ N(mu_d, sigma_d^2)
    truncated at 0 and report ``(1 - w) U0 + w U'`` with
    ``w = clip(1 - d / window_ms, 0, 1)``.
    """
    if mu_d < 0 or sigma_d < 0:
        raise DomainError("delay mean and deviation must be >= 0")
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"fraction must lie in [0, 1], got {fraction}")
    if window_ms <= 0:
        raise DomainError("fault window must be positive")
    count = math.ceil(round(fraction * ds.n, 9))
    Ufs = []
    for s in ds.scenarios:
        rng = np.random.default_rng([int(seed), s.scenario_id])
        buses = rng.choice(ds.n, size=count, replace=False)
        d = np.maximum(rng.normal(mu_d, sigma_d, size=count), 0.0)
        w = np.clip(1.0 - d / window_ms, 0.0, 1.0)
        uf = s.Uf.copy()
        uf[buses] = (1.0 - w) * s.U0[buses] + w * s.Uf[buses]
        Ufs.append(uf)
    entry = {"delay": {"mu_d": mu_d, "sigma_d": sigma_d, "fraction": fraction,
                       "seed": seed, "window_ms": window_ms}}
    history = list(ds.config.get("corruptions", [])) + [entry]
    return ds.with_voltages(ds.U0, Ufs, corruptions=history)
