import io
import json
from pathlib import Path

import numpy as np
import pytest

from coupledmimo import experiments as ex
from coupledmimo.channel import LinkModel
from coupledmimo.cli import bundled_configs
from coupledmimo.errors import ConfigError, NumericalFailure

FIXTURES = Path(__file__).parent / "fixtures"


def cfg_from(text):
    return ex.load_config("inline", text=text)


SMALL_NMSE = """
[experiment]
scenario = nmse-vs-power
trials = 20
seed = 3
[array]
source = synthetic
n_ports = 2
coupling = 0.8
points = 21
[link]
n_pilots = 8
[sweep]
values = -10 10 30
"""


# ------------------------------------------------------------ config loading


def test_load_minimal_config():
    cfg = cfg_from(SMALL_NMSE)
    assert cfg.scenario == "nmse-vs-power"
    assert cfg.array.n_ports == 2 and cfg.link.n_pilots == 8
    assert cfg.sweep.values == (-10.0, 10.0, 30.0)
    assert len(cfg.digest) == 16


def test_sweep_from_start_stop_num_and_log_scale():
    cfg = cfg_from("[experiment]\nscenario = nmse-vs-power\n[sweep]\nstart = 0\nstop = 10\nnum = 3\n")
    assert cfg.sweep.values == (0.0, 5.0, 10.0)
    cfg = cfg_from(
        "[experiment]\nscenario = nmse-vs-frequency\n[sweep]\nstart = 1e8\nstop = 1e10\nnum = 3\nscale = log\n"
    )
    np.testing.assert_allclose(cfg.sweep.values, [1e8, 1e9, 1e10])


@pytest.mark.parametrize(
    "text, field",
    [
        ("[experiment]\nscenario = nmse-vs-power\nbogus = 1\n[sweep]\nvalues = 1\n", "experiment.bogus"),
        ("[experiment]\nscenario = nmse-vs-power\n[array]\nwidth = 3\n[sweep]\nvalues = 1\n", "array.width"),
        ("[experiment]\nscenario = nmse-vs-power\n[extra]\n[sweep]\nvalues = 1\n", "extra"),
        ("[experiment]\nscenario = flying\n[sweep]\nvalues = 1\n", "experiment.scenario"),
        ("[experiment]\nscenario = nmse-vs-power\ntrials = many\n[sweep]\nvalues = 1\n", "experiment.trials"),
        ("[experiment]\nscenario = nmse-vs-power\ntrials = 0\n[sweep]\nvalues = 1\n", "experiment.trials"),
        ("[experiment]\ntrials = 3\n", "experiment.scenario"),
        ("[experiment]\nscenario = nmse-vs-power\n", "sweep"),
        ("[experiment]\nscenario = nmse-vs-power\n[sweep]\nvalues = 1\nnum = 3\n", "sweep.num"),
        ("[experiment]\nscenario = nmse-vs-power\n[sweep]\nstart = 1\nstop = 2\n", "sweep.num"),
        ("[experiment]\nscenario = nmse-vs-power\n[array]\nsource = magic\n[sweep]\nvalues = 1\n", "array.source"),
        ("[experiment]\nscenario = nmse-vs-taps\ncarrier = ofdm\n[sweep]\nvalues = 2.5\n", "sweep.values"),
        ("[experiment]\nscenario = nmse-vs-power\n[array]\nsource = touchstone\n[sweep]\nvalues = 1\n", "array.path"),
        ("[experiment]\nscenario = nmse-vs-power\n[chain]\nnoise_figure = 0.2\n[sweep]\nvalues = 1\n", "chain"),
    ],
)
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        cfg_from(text)
    assert info.value.field == field
    assert field in str(info.value)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        ex.load_config(tmp_path / "absent.ini")


@pytest.mark.parametrize("name", sorted(bundled_configs()))
def test_bundled_configs_load(name):
    cfg = cfg_from(bundled_configs()[name])
    assert cfg.scenario in ex.SCENARIOS


def test_touchstone_path_resolves_against_config_dir(tmp_path):
    (tmp_path / "arr.s2p").write_text((FIXTURES / "two_port.s2p").read_text())
    ini = tmp_path / "c.ini"
    ini.write_text(
        "[experiment]\nscenario = nmse-vs-frequency\ntrials = 2\n"
        "[array]\nsource = touchstone\npath = arr.s2p\n[sweep]\nvalues = 1.2e9 1.7e9\n"
    )
    cfg = ex.load_config(ini)
    res = ex.run_sweep(cfg)
    assert res.axis.tolist() == [1.2e9, 1.7e9]


# ------------------------------------------------------------ metrics


def test_nmse_examples(rng):
    x = rng.standard_normal(10) + 1j * rng.standard_normal(10)
    assert ex.nmse(x, x) == 0.0
    assert ex.nmse(np.zeros_like(x), x) == pytest.approx(1.0)
    assert ex.theoretical_nmse(np.eye(2), 4 * np.eye(2)) == pytest.approx(0.25)


def _scalar_model(q=1.0, rho=1.0, noise=1.0):
    one = np.ones((1, 1), dtype=complex)
    return LinkModel(1e9, one, q * one, one, one, noise * one, rho)


def test_empirical_snr_zero_channel():
    assert ex.empirical_snr(_scalar_model(q=0.0), 100, 0) == 0.0


def test_empirical_snr_scalar_oracle():
    model = _scalar_model(q=0.7, rho=3.0, noise=2.0)
    analytic = 3.0 * 0.49 * 1.0 / 2.0
    assert ex.empirical_snr(model, 10_000, 1) == pytest.approx(analytic, rel=0.02)


def test_empirical_snr_linear_in_rho():
    a = ex.empirical_snr(_scalar_model(rho=1.0), 1000, 5)
    b = ex.empirical_snr(_scalar_model(rho=2.0), 1000, 5)
    assert b / a == pytest.approx(2.0, rel=1e-12)


# ------------------------------------------------------------ results and emit


def _result(n=3):
    axis = np.linspace(0, 1, n)
    return ex.SweepResult("x", "u", axis, {"AB": axis / 3, "AA": axis * np.pi}, "dB", {"seed": 1})


def test_empty_result_refused():
    with pytest.raises(ConfigError):
        ex.SweepResult("x", "u", np.array([]), {"AB": np.array([])}, "dB", {})
    with pytest.raises(ConfigError):
        ex.SweepResult("x", "u", np.array([1.0]), {}, "dB", {})


def test_non_finite_result_refused():
    with pytest.raises(NumericalFailure):
        ex.SweepResult("x", "u", np.array([1.0]), {"AB": np.array([np.nan])}, "dB", {})


def test_emit_csv_layout():
    buf = io.StringIO()
    ex.emit(_result(4), buf, "csv")
    lines = buf.getvalue().splitlines()
    assert lines[0] == "axis,AB,AA,unit"
    assert len(lines) == 5
    assert lines[2].split(",")[2] == f"{np.pi / 3:.12g}"
    assert lines[1].endswith(",dB")


def test_emit_json_round_trip(tmp_path):
    res = _result(5)
    out = tmp_path / "r.json"
    ex.emit(res, out, "json")
    doc = json.loads(out.read_text())
    for name, series in res.series.items():
        assert doc["series"][name] == [float(f"{v:.12g}") for v in series]
    assert doc["axis"] == [float(f"{v:.12g}") for v in res.axis]
    assert doc["metadata"] == {"seed": 1}


def test_emit_unknown_format():
    with pytest.raises(ConfigError):
        ex.emit(_result(), io.StringIO(), "xml")


# ------------------------------------------------------------ sweeps


def test_sweep_determinism_and_thread_independence():
    cfg = cfg_from(SMALL_NMSE)
    outs = []
    for threads in (1, 1, 4):
        buf = io.StringIO()
        ex.emit(ex.run_sweep(cfg, threads=threads), buf, "csv")
        outs.append(buf.getvalue())
    assert outs[0] == outs[1] == outs[2]


def test_single_trial_rerun_identical():
    cfg = cfg_from(SMALL_NMSE.replace("trials = 20", "trials = 1"))
    a, b = ex.run_sweep(cfg), ex.run_sweep(cfg)
    for name in a.series:
        np.testing.assert_array_equal(a.series[name], b.series[name])


def test_matched_arrays_curves_coincide():
    cfg = cfg_from(SMALL_NMSE.replace("source = synthetic", "source = matched"))
    res = ex.run_sweep(cfg)
    np.testing.assert_allclose(res.series["AB_theory"], res.series["AA_theory"], atol=1e-9)
    np.testing.assert_allclose(res.series["AB_empirical"], res.series["AA_empirical"], atol=1e-9)


def test_coupled_aa_below_ab():
    res = ex.run_sweep(cfg_from(SMALL_NMSE))
    assert np.all(res.series["AA_theory"] <= res.series["AB_theory"] + 1e-12)


def test_theory_matches_empirical_coupled_two_by_two():
    text = SMALL_NMSE.replace("trials = 20", "trials = 10000").replace("values = -10 10 30", "values = 10")
    res = ex.run_sweep(cfg_from(text), threads=4)
    for m in ("AB", "AA"):
        theory = 10 ** (res.series[f"{m}_theory"][0] / 10)
        emp = 10 ** (res.series[f"{m}_empirical"][0] / 10)
        assert emp == pytest.approx(theory, rel=0.03)


def test_rate_sweep_perfect_dominates():
    text = """
[experiment]
scenario = rate-vs-power
trials = 30
[array]
n_ports = 2
coupling = 0.8
points = 21
[sweep]
values = 0 20
"""
    res = ex.run_sweep(cfg_from(text))
    assert res.unit == "bpcu"
    assert np.all(res.series["perfect"] >= res.series["AA"])
    assert np.all(res.series["perfect"] >= res.series["AB"])


def test_equivalence_scenario_agrees():
    text = """
[experiment]
scenario = equivalence
[array]
source = dipole
[sweep]
start = 0.8e9
stop = 1.2e9
num = 5
"""
    res = ex.run_sweep(cfg_from(text))
    assert np.all(res.series["relative_difference"] < 1e-6)


def test_single_carrier_scenarios_reject_ofdm():
    cfg = cfg_from("[experiment]\nscenario = nmse-vs-frequency\ncarrier = ofdm\n[sweep]\nvalues = 1e9\n")
    with pytest.raises(ConfigError):
        ex.run_sweep(cfg)


def test_progress_callback_per_point():
    seen = []
    ex.run_sweep(cfg_from(SMALL_NMSE), progress=lambda i, a, v: seen.append((i, a)))
    assert seen == [(0, -10.0), (1, 10.0), (2, 30.0)]
