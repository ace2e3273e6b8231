"""Experiment configuration and the end-to-end evaluation pipeline."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .cnn import ArchitectureSpec, MLPSpec, Model
from .dataset import _atomic_write, load_dataset
from .errors import ConfigError
from .faultgen import GenerationConfig, add_noise, apply_delay, generate_dataset, scenario_seed
from .features import Standardizer, feature_matrix
from .grid import build_admittance, bundled_case, parse_case
from .metrics import (arc, delay_degradation, hop_analysis, lar, lar_by_type,
                      uncertainty_index, window_sensitivity)
from .modelio import load_model, save_model
from .placement import (PlacementSet, budget_config, greedy_placement, random_placement,
                        two_hop_vc)
from .training import TrainConfig, train


def _build(cls, data, where):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


@dataclass
class PlacementConfig:
    algorithm: str = "full"        # full | greedy | random | two_hop_vc | file
    ratio: float | None = None     # observability ratio; K = ceil(ratio * n)
    K: int | None = None
    beta: float = 0.5
    budget_fraction: float = 0.1
    budget_lr_scale: float = 3.0
    budget: dict | None = None     # explicit TrainConfig fields for candidate runs
    warm_start: bool = True
    seed: int | None = None        # defaults to the experiment seed
    path: str | None = None        # placement JSON for algorithm == "file"

    def __post_init__(self):
        if self.algorithm not in ("full", "greedy", "random", "two_hop_vc", "file"):
            raise ConfigError(f"unknown placement algorithm {self.algorithm!r}")
        if self.ratio is not None and not 0 < self.ratio <= 1:
            raise ConfigError("observability ratio must lie in (0, 1]")
        if self.algorithm == "file" and not self.path:
            raise ConfigError("placement algorithm 'file' needs a path")
        if self.budget is not None:
            unknown = set(self.budget) - {f.name for f in fields(TrainConfig)}
            if unknown:
                raise ConfigError(f"placement.budget: unknown keys {sorted(unknown)}")

    def size(self, n: int) -> int:
        if self.K is not None:
            return int(self.K)
        if self.ratio is None:
            raise ConfigError("placement needs K or ratio")
        return max(1, math.ceil(round(self.ratio * n, 9)))


@dataclass
class NoiseConfig:
    snr_db: float | None = None


@dataclass
class DelayConfig:
    mu_d: float = 20.0
    sigma_d: float = 6.0
    fraction: float = 0.5
    window_ms: float = 200.0
    fault_windows_ms: list = field(default_factory=list)


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    system: str = "39"
    case_file: str | None = None
    seed: int = 0
    classifier: str = "cnn"
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    test_generation: GenerationConfig | None = None
    test_fraction: float = 0.2
    val_fraction: float = 0.2
    train_dataset: str | None = None
    test_dataset: str | None = None
    model: str | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    delay: DelayConfig | None = None
    standardize: bool = False
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        self.system = str(self.system)
        if self.classifier not in ("cnn", "nn"):
            raise ConfigError(f"classifier must be 'cnn' or 'nn', got {self.classifier!r}")
        for name in ("test_fraction", "val_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigError(f"{name} must lie in (0, 1)")

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        data = dict(data)
        nested = {"generation": GenerationConfig, "test_generation": GenerationConfig,
                  "train": TrainConfig, "placement": PlacementConfig, "noise": NoiseConfig,
                  "delay": DelayConfig}
        for key, typ in nested.items():
            if key in data and data[key] is not None:
                sub = dict(data[key])
                if typ is GenerationConfig:
                    for k in ("fault_types", "impedances", "z_range"):
                        if k in sub and sub[k] is not None:
                            sub[k] = tuple(sub[k])
                data[key] = _build(typ, sub, key)
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        data.pop("base_dir", None)
        try:
            return cls(**data, base_dir=str(base_dir))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data, base_dir=path.parent)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))

    def resolve(self, p: str | None) -> Path | None:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return _jsonable(d)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


@dataclass
class EvalReport:
    experiment_id: str
    config: dict
    status: str = "ok"
    failed_stage: str | None = None
    error: str | None = None
    error_kind: str | None = None   # "validation" or "runtime" when failed
    system: str = ""
    classifier: str = ""
    observed: list = field(default_factory=list)
    ratio: float | None = None
    lar: float | None = None
    lar_by_type: dict = field(default_factory=dict)
    arc: float | None = None
    hop: dict = field(default_factory=dict)
    zeta_train: float | None = None
    zeta_test: float | None = None
    nu_d: float | None = None
    nu_f: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), indent=2, sort_keys=True) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        _atomic_write(path, self.to_json())
        return path

    @classmethod
    def load(cls, path) -> "EvalReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(**data)


def load_grid(cfg: ExperimentConfig):
    if cfg.case_file:
        return parse_case(cfg.resolve(cfg.case_file))
    return bundled_case(cfg.system)


def _gen_config(cfg: ExperimentConfig, gen: GenerationConfig, seed: int) -> GenerationConfig:
    return replace(gen, seed=seed, system=cfg.system)


def build_datasets(cfg: ExperimentConfig, spec):
    """Return ``(train_pool, test)`` datasets, generated or loaded."""
    if cfg.train_dataset:
        pool = load_dataset(cfg.resolve(cfg.train_dataset))
    else:
        pool = generate_dataset(spec, _gen_config(cfg, cfg.generation, cfg.seed))
    if cfg.test_dataset:
        return pool, load_dataset(cfg.resolve(cfg.test_dataset))
    if cfg.test_generation is not None:
        return pool, generate_dataset(spec, _gen_config(cfg, cfg.test_generation, cfg.seed + 1))
    idx = np.random.default_rng([cfg.seed, 7]).permutation(len(pool))
    ntest = int(round(cfg.test_fraction * len(pool)))
    return pool.subset(np.sort(idx[ntest:])), pool.subset(np.sort(idx[:ntest]))


def split_validation(cfg: ExperimentConfig, ds):
    idx = np.random.default_rng([cfg.seed, 8]).permutation(len(ds))
    nval = max(1, int(round(cfg.val_fraction * len(ds))))
    return ds.subset(np.sort(idx[nval:])), ds.subset(np.sort(idx[:nval]))


def make_arch(cfg: ExperimentConfig, n: int, num_classes: int):
    if cfg.classifier == "nn":
        return MLPSpec(n, num_classes)
    try:
        return ArchitectureSpec.preset(n, num_classes)
    except LookupError:
        raise ConfigError(f"no CNN preset for {n} buses") from None


def choose_placement(cfg: ExperimentConfig, spec, arch, tr, va) -> PlacementSet:
    pc = cfg.placement
    seed = cfg.seed if pc.seed is None else pc.seed
    if pc.algorithm == "full":
        return PlacementSet(tuple(range(spec.n)), spec.n, "full")
    if pc.algorithm == "file":
        return PlacementSet.load(cfg.resolve(pc.path))
    if pc.algorithm == "two_hop_vc":
        return two_hop_vc(spec)
    K = pc.size(spec.n)
    if pc.algorithm == "random":
        return random_placement(spec.n, K, seed)
    budget = budget_config(cfg.train, pc.budget_fraction, pc.budget_lr_scale)
    if pc.budget:
        budget = replace(budget, **pc.budget)
    return greedy_placement(tr, va, spec, arch, K, pc.beta, budget=budget, seed=seed,
                            standardize=cfg.standardize, warm_start=pc.warm_start)


class _Stage:
    def __init__(self):
        self.name = "setup"

    def __call__(self, name):
        self.name = name


def _corrupt(cfg, ds, salt):
    if cfg.noise.snr_db is not None:
        ds = add_noise(ds, cfg.noise.snr_db, scenario_seed(cfg.seed, salt))
    return ds


def run_experiment(cfg: ExperimentConfig, model_out=None, placement_out=None,
                   history_out=None, evaluate: bool = True) -> EvalReport:
    """Run generate -> place -> train -> evaluate; failures are captured in the report.

    With ``evaluate=False`` the pipeline stops after training (the report
    then only carries the run counts).
    """
    report = EvalReport(cfg.name, cfg.snapshot(), system=cfg.system, classifier=cfg.classifier)
    stage = _Stage()
    try:
        stage("grid")
        spec = load_grid(cfg)
        Y0 = build_admittance(spec)
        stage("datasets")
        pool, test = build_datasets(cfg, spec)
        if pool.m != spec.m or test.m != spec.m:
            raise ConfigError("dataset line count does not match the grid")
        pool = _corrupt(cfg, pool, 101)
        test = _corrupt(cfg, test, 102)
        tr, va = split_validation(cfg, pool)
        arch = make_arch(cfg, spec.n, spec.m + 1)
        stage("placement")
        placement = choose_placement(cfg, spec, arch, tr, va)
        if placement_out:
            placement.save(placement_out)
        S = list(placement.buses)
        report.observed = sorted(S)
        report.ratio = len(S) / spec.n
        stage("train")
        Xtr = feature_matrix(Y0, tr.U0, tr.Uf, S)
        Xva = feature_matrix(Y0, va.U0, va.Uf, S)
        scaler = Standardizer().fit(Xtr) if cfg.standardize else None
        if scaler is not None:
            Xtr, Xva = scaler.transform(Xtr), scaler.transform(Xva)
        steps = 0
        if cfg.model:
            model = load_model(cfg.resolve(cfg.model))
            if model.spec.input_length != spec.n:
                raise ConfigError("model input length does not match the grid")
        else:
            params, hist = train(arch, (Xtr, tr.labels), (Xva, va.labels), cfg.train)
            model = Model(arch, params)
            steps = hist.steps[-1] if hist.steps else 0
            if history_out:
                hist.to_csv(history_out)
        if model_out:
            save_model(model, model_out)
        report.runtime = {"train_scenarios": len(tr), "val_scenarios": len(va),
                          "test_scenarios": len(test), "training_steps": int(steps),
                          "placement_steps": len(placement.log)}
        if not evaluate:
            return report
        stage("evaluate")

        def score(ds):
            X = feature_matrix(Y0, ds.U0, ds.Uf, S)
            R = model.rankings(scaler.transform(X) if scaler is not None else X)
            return R, lar(R, ds.labels)

        R, eta = score(test)
        report.lar = eta
        report.lar_by_type = lar_by_type(R, test.labels, test.fault_types)
        report.arc = arc(R, test.labels)
        if (test.labels < spec.m).any():
            report.hop = asdict(hop_analysis(R, test.labels, spec.terminals))
        mean_U0 = tr.U0.mean(axis=0)
        report.zeta_train = uncertainty_index(tr.U0, mean_U0)
        report.zeta_test = uncertainty_index(test.U0, mean_U0)
        if cfg.delay is not None:
            d = cfg.delay
            delayed = apply_delay(test, d.mu_d, d.sigma_d, d.fraction, scenario_seed(cfg.seed, 103), d.window_ms)
            _, eta_ref = score(delayed)
            report.nu_d = delay_degradation(eta, eta_ref)
            for w in d.fault_windows_ms:
                alt = apply_delay(test, d.mu_d, d.sigma_d, d.fraction, scenario_seed(cfg.seed, 103), float(w))
                report.nu_f[f"{float(w):g}"] = window_sensitivity(eta_ref, score(alt)[1])
    except Exception as exc:  # report, don't crash the sweep
        report.status = "failed"
        report.failed_stage = stage.name
        report.error = f"{type(exc).__name__}: {exc}"
        report.error_kind = error_kind(exc)
    return report


def error_kind(exc: BaseException) -> str:
    """Classify an exception as bad input ("validation") or a failed computation."""
    if isinstance(exc, (ValueError, LookupError, OSError, yaml.YAMLError)):
        return "validation"
    return "runtime"


def run_placement(cfg: ExperimentConfig) -> PlacementSet:
    spec = load_grid(cfg)
    pool, _ = build_datasets(cfg, spec)
    pool = _corrupt(cfg, pool, 101)
    tr, va = split_validation(cfg, pool)
    return choose_placement(cfg, spec, make_arch(cfg, spec.n, spec.m + 1), tr, va)
