import json
import math
from dataclasses import replace

import numpy as np
import pytest

from cqed_phonons.devices import (
    COLUMNS,
    PRESETS,
    DeviceConfig,
    SweepSpec,
    counterfactual_curves,
    coupling_for_purcell,
    measured_indistinguishability,
    point_device,
    preset,
    run_sweep,
    without_mode_splitting,
    write_sweep,
)
from cqed_phonons.phonons import QDParams

DEV1 = preset("device1")


def test_presets_match_device_table():
    d1, d2 = preset("device1"), preset("device2")
    assert (d1.cavity.g, d1.cavity.kappa, d1.cavity.delta_EM) == (19.0, 90.0, 80.0)
    assert (d2.cavity.g, d2.cavity.kappa, d2.cavity.delta_EM) == (12.0, 110.0, -40.0)
    for d in (d1, d2):
        assert d.cavity.split_modes and d.cavity.delta == 0.0
        assert d.qd.gamma0 == 1.0
        assert (d.bath.D, d.bath.sigma, d.bath.c_s, d.bath.rho_m) == (14.0, 5.0, 5110.0, 5370.0)
    assert preset("bulk").cavity.g == 0.0


def test_unknown_preset():
    with pytest.raises(ValueError, match="device1"):
        preset("device3")


def test_device_round_trip():
    for d in PRESETS.values():
        assert DeviceConfig.from_dict(json.loads(json.dumps(d.to_dict()))) == d


def test_single_mode_counterpart():
    d = without_mode_splitting(DEV1)
    assert not d.cavity.split_modes and d.cavity.delta_EM == 0.0 and d.cavity.g == 19.0
    assert d.name == "device1-single-mode"


def test_coupling_for_purcell_inverts_nominal_purcell():
    qd = QDParams()
    for F, kappa in [(24.0, 90.0), (8.0, 20.0), (50.0, 200.0)]:
        cav = replace(DEV1.cavity, g=coupling_for_purcell(F, kappa, qd), kappa=kappa)
        assert cav.nominal_purcell(qd) == pytest.approx(F, rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(parameter="voltage", start=0, stop=1, num=3),
    dict(parameter="kappa", start=0, stop=1, num=3, constraint="fixed_g"),
    dict(parameter="kappa", start=0, stop=1, num=3, dephasing="half"),
    dict(parameter="kappa", start=0, stop=1, num=1),
    dict(parameter="kappa", start=0, stop=1, num=2.0),
    dict(parameter="kappa", start=1, stop=1, num=3),
    dict(parameter="kappa", start=2, stop=1, num=3),
    dict(parameter="kappa", start=1, stop=2, num=3, temperature=-1.0),
    dict(parameter="kappa", start=1, stop=2, num=3, n_points=20),
    dict(parameter="kappa", start=1, stop=2, num=3, lifetimes=3.0),
])
def test_sweep_spec_validation(kwargs):
    with pytest.raises(ValueError):
        SweepSpec(**kwargs)


def test_point_device_mapping():
    qd = DEV1.qd
    spec = SweepSpec("kappa", 20, 200, 3, constraint="fixed_nominal_purcell", temperature=7.0)
    cav, T = point_device(DEV1, spec, 50.0)
    assert T == 7.0 and cav.kappa == 50.0
    assert cav.nominal_purcell(qd) == pytest.approx(24.0, rel=1e-12)
    cav, _ = point_device(DEV1, SweepSpec("detuning", -10, 10, 3), 5.0)
    assert cav.delta == 5.0 and cav.g == 19.0
    cav, _ = point_device(DEV1, SweepSpec("purcell", 5, 30, 3), 10.0)
    assert cav.nominal_purcell(qd) == pytest.approx(10.0, rel=1e-12)
    _, T = point_device(DEV1, SweepSpec("temperature", 0, 20, 3), 12.5)
    assert T == 12.5


def test_sweep_is_deterministic_and_parallel_safe():
    spec = SweepSpec("temperature", 0.0, 20.0, 3)
    a = run_sweep(DEV1, spec)
    b = run_sweep(DEV1, spec)
    c = run_sweep(DEV1, spec, jobs=2)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    lines = a.to_csv().splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 4
    assert a.ok


def test_failed_points_become_status_rows():
    res = run_sweep(DEV1, SweepSpec("kappa", -10.0, 90.0, 2, temperature=9.0))
    bad, good = res.rows
    assert bad["status"].startswith("error: ValueError")
    assert all(math.isnan(bad[k]) for k in COLUMNS[1:-1])
    assert good["status"] == "ok" and not res.ok
    assert "nan" in res.to_csv().splitlines()[1]


def test_write_sweep_sidecar(tmp_path):
    res = run_sweep(DEV1, SweepSpec("temperature", 0.0, 10.0, 2))
    write_sweep(res, tmp_path / "sweep.csv")
    assert (tmp_path / "sweep.csv").read_text() == res.to_csv()
    meta = json.loads((tmp_path / "sweep.config.json").read_text())
    assert meta["device"]["name"] == "device1"
    assert meta["sweep"]["parameter"] == "temperature"
    assert "package_version" in meta


@pytest.fixture(scope="module")
def device1_temperatures():
    return counterfactual_curves(DEV1, SweepSpec("temperature", 0.0, 20.0, 11))


def test_counterfactual_coincides_at_zero_temperature(device1_temperatures):
    cf = device1_temperatures
    for col in ("I_full", "I_zpl", "F_eff", "beta"):
        assert cf.full.column(col)[0] == pytest.approx(cf.zero.column(col)[0], abs=1e-9)
    assert np.all(cf.ratio <= 1 + 1e-12)
    assert cf.to_csv().splitlines()[0] == "swept_value,I_full,I_full_zero_dephasing,ratio,status"


def test_sweep_row_bounds(device1_temperatures):
    for res in (device1_temperatures.full, device1_temperatures.zero):
        i_full, i_zpl = res.column("I_full"), res.column("I_zpl")
        assert np.all(i_full >= 0) and np.all(i_full <= i_zpl) and np.all(i_zpl <= 1 + 1e-6)
        assert np.all(res.column("eta_zpl_cav") >= res.column("eta_zpl"))


def test_indistinguishability_falls_with_temperature(device1_temperatures):
    assert np.all(np.diff(device1_temperatures.full.column("I_full")) < 0)
    assert np.all(np.diff(device1_temperatures.zero.column("I_full")) < 0)


def test_device_temperature_values():
    for name, (lo, hi) in {"device1": (0.92, 0.74), "device2": (0.89, 0.79)}.items():
        res = run_sweep(preset(name), SweepSpec("temperature", 9.0, 18.0, 2))
        assert res.column("I_full") == pytest.approx([lo, hi], abs=0.05)


def test_bulk_pair():
    cf = counterfactual_curves(preset("bulk"), SweepSpec("temperature", 0.0, 20.0, 2))
    assert cf.full.column("I_full")[0] == pytest.approx(0.87, abs=0.01)
    assert cf.zero.column("I_full")[1] == pytest.approx(0.41, abs=0.02)
    assert cf.full.column("I_full")[1] == pytest.approx(0.24, abs=0.07)


@pytest.fixture(scope="module")
def detuning_sweep():
    device = without_mode_splitting(DEV1)
    return run_sweep(device, SweepSpec("detuning", -60.0, 60.0, 13, temperature=20.0))


def test_indistinguishability_peaks_on_resonance(detuning_sweep):
    x = detuning_sweep.column("swept_value")
    i_full = detuning_sweep.column("I_full")
    assert x[np.argmax(i_full)] == 0.0


def test_zpl_indistinguishability_even_in_detuning(detuning_sweep):
    i_zpl = detuning_sweep.column("I_zpl")
    np.testing.assert_allclose(i_zpl, i_zpl[::-1], atol=1e-3)


def test_red_detuned_cavity_collects_more_sideband(detuning_sweep):
    # a cavity below the dot (delta > 0) sits on the stronger phonon-emission sideband
    i_full = detuning_sweep.column("I_full")
    x = detuning_sweep.column("swept_value")
    pos, neg = i_full[x > 0], i_full[x < 0][::-1]
    assert np.all(pos < neg)
    near = np.abs(x[x > 0]) <= 20
    np.testing.assert_allclose(pos[near], neg[near], atol=1e-3)


def test_measured_values_asset():
    rows = measured_indistinguishability()
    assert [(r["temperature_K"], r["value"]) for r in rows] == [("9", "0.993"), ("18", "0.973")]
    assert all(r["provenance"] == "quoted-in-text" for r in rows)
