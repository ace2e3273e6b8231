import math

import numpy as np
import pytest

from conftest import make_grid
from faultloc.dataset import Dataset, load_dataset, save_dataset
from faultloc.errors import DomainError, SolverError
from faultloc.faultgen import (FAULT_ADMITTANCE_FACTOR, GenerationConfig, add_noise, apply_delay,
                               fault_admittance, generate_dataset, sample_loads, solve_duringfault,
                               solve_prefault)
from faultloc.features import unbalanced_current
from faultloc.grid import augment_fault, build_admittance


@pytest.fixture(scope="module")
def small39(case39):
    cfg = GenerationConfig(per_type=12, null_count=4, seed=5, system="39")
    return generate_dataset(case39, cfg)


def test_sample_loads_zero_variance(case39):
    out = sample_loads(case39, 0.0, 3)
    assert np.array_equal(out.loads, case39.loads)


def test_sample_loads_deterministic(case39):
    a = sample_loads(case39, 0.01, 7).loads
    b = sample_loads(case39, 0.01, 7).loads
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_loads(case39, 0.01, 8).loads)


def test_sample_loads_std():
    spec = make_grid(2, [(1, 2)])
    draws = np.array([sample_loads(spec, 0.01, s).loads[1] for s in range(10_000)])
    assert abs(draws.real.std() / 0.1 - 1) < 0.05
    assert abs(draws.imag.std() / 0.1 - 1) < 0.05


def test_sample_loads_negative(case39):
    with pytest.raises(DomainError):
        sample_loads(case39, -1.0, 0)


def test_flat_profile():
    spec = make_grid(4, [(1, 2), (2, 3), (3, 4)])
    U0, I0 = solve_prefault(spec)
    assert np.allclose(U0, 1.0, atol=1e-14)
    assert np.allclose(I0, 0.0, atol=1e-12)


def test_two_bus_prefault_by_hand():
    z = complex(0.02, 0.1)
    spec = make_grid(2, [(1, 2)], z=z, loads=[0, 0.5 + 0.2j])
    U0, I0 = solve_prefault(spec)
    # bus 2 draws conj(S) = 0.5 - 0.2j; U2 = 1 - z * (0.5 - 0.2j)
    assert U0[0] == 1.0
    assert abs(U0[1] - (1 - z * (0.5 - 0.2j))) < 1e-12
    assert abs(I0[1] - (-(0.5 - 0.2j))) < 1e-12


def test_prefault_residual_68(case68, Y68):
    U0, I0 = solve_prefault(case68, Y68)
    assert np.linalg.norm(Y68 @ U0 - I0) / np.linalg.norm(I0) < 1e-10
    assert np.all((np.abs(U0) > 0.5) & (np.abs(U0) < 1.5))


def test_singular_prefault_reports_condition():
    spec = make_grid(2, [(1, 2)], z=complex(0, 1e-300))
    with pytest.raises(SolverError, match="condition"):
        solve_prefault(spec)


def test_duringfault_no_fault_is_neutral(case39, Y39):
    U0, I0 = solve_prefault(case39, Y39)
    YF = augment_fault(Y39, case39, 7, 0.3, 0.0)
    Uf, Ufp = solve_duringfault(YF, I0, anchor=(case39.reference_index, U0[case39.reference_index]))
    assert np.abs(Uf - U0).max() < 1e-10


def test_duringfault_block_residual(case68, Y68):
    U0, I0 = solve_prefault(case68, Y68)
    YF = augment_fault(Y68, case68, 20, 0.6, fault_admittance("LG", 0.001))
    Uf, Ufp = solve_duringfault(YF, I0)
    x = np.concatenate([Uf, [Ufp]])
    rhs = np.concatenate([I0, [0]])
    assert np.linalg.norm(YF.matrix @ x - rhs) / np.linalg.norm(rhs) < 1e-10


def test_bolted_fault_sags(case39, Y39):
    rng = np.random.default_rng(0)
    for k in range(50):
        spec = sample_loads(case39, 0.01, k)
        U0, I0 = solve_prefault(spec, Y39)
        line = int(rng.integers(case39.m))
        YF = augment_fault(Y39, case39, line, float(rng.uniform(0.05, 0.95)),
                           fault_admittance("TP", 1e-4))
        _, Ufp = solve_duringfault(YF, I0)
        assert abs(Ufp) < abs(U0[YF.i]) and abs(Ufp) < abs(U0[YF.j])


def test_fault_factors_ordering():
    k = FAULT_ADMITTANCE_FACTOR
    assert k["TP"] > k["DLG"] > k["LL"] > k["LG"]


def test_empty_config(case39, tmp_path):
    ds = generate_dataset(case39, GenerationConfig())
    assert len(ds) == 0
    path = save_dataset(ds, tmp_path / "empty.csv")
    assert path.read_text().count("\n") == 1
    assert len(load_dataset(path)) == 0


def test_counting_68(case68):
    cfg = GenerationConfig(impedances=(1e-4, 0.1), null_count=3, seed=1)
    ds = generate_dataset(case68, cfg)
    faulted = [s for s in ds.scenarios if s.faulted]
    assert len(faulted) == 4 * case68.m * 2 == 664
    assert len(ds) == 667
    assert ds.labels.min() >= 0 and ds.labels.max() == case68.m


def test_every_line_per_type(small39, case39):
    cfg = GenerationConfig(per_type=case39.m, seed=2, fault_types=("LG",))
    ds = generate_dataset(case39, cfg)
    assert set(ds.labels) == set(range(case39.m))


def test_scenario_invariants(small39):
    for s in small39.scenarios:
        assert (s.label == small39.m) == (s.fault_type == "NONE")
        assert np.all((np.abs(s.U0) > 0.5) & (np.abs(s.U0) < 1.5))
        if s.faulted:
            assert 1e-4 <= s.z_f <= 0.1
            assert 0.05 <= s.t <= 0.95


def test_label_matches_augmented_line(case39, Y39, small39):
    # re-solving with the recorded parameters reproduces the stored voltages
    for s in small39.scenarios[:10]:
        spec = sample_loads(case39, 0.01, s.load_seed)
        U0, I0 = solve_prefault(spec, Y39)
        YF = augment_fault(Y39, case39, s.label, s.t, fault_admittance(s.fault_type, s.z_f))
        Uf, _ = solve_duringfault(YF, I0)
        assert np.array_equal(U0, s.U0)
        assert np.abs(Uf - s.Uf).max() < 1e-12


def test_eq8_residual_every_scenario(case39, Y39, small39):
    for s in small39.scenarios:
        if not s.faulted:
            continue
        YF = augment_fault(Y39, case39, s.label, s.t, fault_admittance(s.fault_type, s.z_f))
        dIu = unbalanced_current(Y39, YF, s.Uf, s.U_fp)
        lhs = Y39 @ (s.Uf - s.U0)
        assert np.linalg.norm(lhs - dIu) / np.linalg.norm(lhs) < 1e-8


def test_perturbed_injections_give_nonzero_delta_i(case39, Y39):
    cfg = GenerationConfig(per_type=2, seed=4, perturb_fault_injections=True, fault_types=("TP",))
    ds = generate_dataset(case39, cfg)
    for s in ds.scenarios:
        YF = augment_fault(Y39, case39, s.label, s.t, fault_admittance(s.fault_type, s.z_f))
        dIu = unbalanced_current(Y39, YF, s.Uf, s.U_fp)
        dI = YF.Yprime @ s.Uf + YF.yf1 * s.U_fp - Y39 @ s.U0
        lhs = Y39 @ (s.Uf - s.U0)
        assert np.linalg.norm(dI) > 1e-3
        assert np.linalg.norm(lhs - (dIu + dI)) / np.linalg.norm(lhs) < 1e-8


def test_roundtrip_and_determinism(case39, tmp_path):
    cfg = GenerationConfig(per_type=5, null_count=2, seed=9, system="39")
    a = save_dataset(generate_dataset(case39, cfg), tmp_path / "a.csv")
    b = save_dataset(generate_dataset(case39, cfg), tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()
    back = load_dataset(a)
    save_dataset(back, tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_bytes() == a.read_bytes()


def test_header_layout(small39, tmp_path):
    path = save_dataset(small39, tmp_path / "d.csv")
    head = path.read_text().splitlines()[0].split(",")
    assert head[:7] == ["scenario_id", "system", "label", "fault_type", "z_f", "t", "seed"]
    assert head[7:11] == ["u0_re_1", "u0_im_1", "u0_re_2", "u0_im_2"]
    assert head[7 + 78:7 + 80] == ["uf_re_1", "uf_im_1"]


def test_load_rejects_mixed_system(small39, tmp_path):
    path = save_dataset(small39, tmp_path / "d.csv")
    lines = path.read_text().splitlines()
    lines[1] = lines[1].replace(",39,", ",68,", 1)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="system"):
        load_dataset(path)


def test_generation_config_validation():
    with pytest.raises(DomainError):
        GenerationConfig(fault_types=("XX",))
    with pytest.raises(DomainError):
        GenerationConfig(impedances=(1.0,))


def test_order_independent_seeding(case39):
    # scenario k only depends on (master seed, k)
    a = generate_dataset(case39, GenerationConfig(per_type=6, seed=3, fault_types=("LG",)))
    b = generate_dataset(case39, GenerationConfig(per_type=3, seed=3, fault_types=("LG",)))
    for x, y in zip(a.scenarios, b.scenarios):
        assert np.array_equal(x.Uf, y.Uf)


def test_noise_infinite_is_identity(small39):
    assert add_noise(small39, math.inf, 0) is small39
    assert add_noise(small39, None, 0) is small39


def test_noise_rejects_nan(small39):
    with pytest.raises(DomainError):
        add_noise(small39, float("nan"), 0)


@pytest.mark.parametrize("snr", [40, 60, 80, 100])
def test_noise_calibration(snr):
    n = 100
    scen = []
    from faultloc.dataset import FaultScenario
    base = np.exp(1j * np.linspace(0, 1, n))
    for k in range(100):
        scen.append(FaultScenario(k, 1, "NONE", 0.0, 0.0, k, base, base))
    ds = Dataset("toy", n, 1, scen)
    noisy = add_noise(ds, snr, 11)
    noise = (noisy.U0 - ds.U0).ravel()      # 10^4 samples
    measured = 10 * np.log10(np.mean(np.abs(ds.U0) ** 2) / np.mean(np.abs(noise) ** 2))
    assert abs(measured - snr) < 0.5


def test_noise_differs_per_scenario(small39):
    noisy = add_noise(small39, 60, 1)
    d0 = noisy.scenarios[0].U0 - small39.scenarios[0].U0
    d1 = noisy.scenarios[1].U0 - small39.scenarios[1].U0
    assert not np.allclose(d0, d1)


def test_delay_zero_is_identity(small39):
    out = apply_delay(small39, 0.0, 0.0, 0.5, 3)
    assert np.array_equal(out.Uf, small39.Uf)


def test_delay_beyond_window_reports_prefault(small39):
    out = apply_delay(small39, 500.0, 0.0, 1.0, 3)
    assert np.array_equal(out.Uf, small39.U0)


def test_delay_counts(small39):
    out = apply_delay(small39, 20.0, 6.0, 0.5, 3)
    faulted = small39.labels < small39.m   # null scenarios keep U' = U0 at the reference
    changed = (out.Uf != small39.Uf).sum(axis=1)[faulted]
    assert np.all(changed == math.ceil(39 / 2))
    assert out.config["corruptions"][-1]["delay"]["mu_d"] == 20.0


def test_delay_validation(small39):
    with pytest.raises(DomainError):
        apply_delay(small39, 20.0, 6.0, 1.5, 0)
    with pytest.raises(DomainError):
        apply_delay(small39, -1.0, 6.0, 0.5, 0)
