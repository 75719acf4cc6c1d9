"""Acceptance criteria A1 to A11.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) before asserting, so a failing criterion still reports the measured
numbers.
"""

import time

import numpy as np
import pytest
from conftest import report_criterion
from scipy.stats import spearmanr

from coupledmimo import channel as ch
from coupledmimo import cli, rate
from coupledmimo import estimate_mc as mc
from coupledmimo import estimate_sc as sc
from coupledmimo import experiments as ex
from coupledmimo import matrixkit as mk
from coupledmimo import netparams as npm


def _coupled_s(n, coupling, seed=1, f=1e9, selectivity=0.5):
    grid = npm.FrequencyGrid.linspace(0.5e9, 2.5e9, 201)
    return npm.synth_coupled_array(n, coupling, selectivity, grid, seed).at(f)


# ---------------------------------------------------------------- A1


def test_a1_cross_description_equivalence():
    start = time.perf_counter()
    lam = npm.SPEED_OF_LIGHT / 1e9
    chain = ch.RfChain()
    worst = 0.0
    freqs = np.linspace(0.8e9, 1.2e9, 21)
    for f in freqs:
        z = npm.dipole_pair_impedance(f, lam / 2, lam / 2)
        pt = ch.dipole_los_demo(f, z, 100.0, 1.64, chain)
        a, b = np.abs(pt.H_eff_impedance), np.abs(pt.H_eff_scattering)
        worst = max(worst, float(np.max(np.abs(a - b) / a)))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 1.0
    report_criterion("A1", ok, f"max relative |H_eff| difference {worst:.2e} at {freqs.size} points ({elapsed:.2f} s)")
    assert ok


# ---------------------------------------------------------------- A2


def test_a2_z_s_round_trip():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        g = rng.standard_normal((4, 4))
        re = g @ g.T + 0.5 * np.eye(4)
        im = rng.standard_normal((4, 4)) * 50
        z = 20 * re + 1j * (im + im.T)
        back = npm.s_to_z(npm.z_to_s(z, 50.0), 50.0)
        worst = max(worst, float(np.max(np.abs(back - z)) / np.max(np.abs(z))))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 5.0
    report_criterion("A2", ok, f"max round-trip error {worst:.2e} over 1000 4-port networks ({elapsed:.2f} s)")
    assert ok


# ---------------------------------------------------------------- A3


A3_CONFIG = """
[experiment]
scenario = nmse-vs-power
trials = 1
seed = 7
[array]
source = synthetic
n_ports = 4
coupling = 0.9
selectivity = 0.5
[link]
f_c = 1e9
n_pilots = 20
[sweep]
start = -20
stop = 40
num = 20
"""


def test_a3_estimator_ordering():
    start = time.perf_counter()
    cfg = ex.load_config("a3", text=A3_CONFIG)
    net = cfg.array.network(cfg.chain.z_ref)
    ab, aa = [], []
    for p in cfg.sweep.values:
        theory = ex.single_carrier_problem(cfg, net, cfg.link.f_c, p).prepare().nmse_theory()
        ab.append(theory["AB"])
        aa.append(theory["AA"])
    ab_db, aa_db = 10 * np.log10(ab), 10 * np.log10(aa)
    mid = len(ab) // 2
    gap = float(ab_db[mid] - aa_db[mid])
    ordered = bool(np.all(np.array(aa) <= np.array(ab) + 1e-12))
    elapsed = time.perf_counter() - start
    ok = ordered and gap >= 10.0 and elapsed < 30.0
    report_criterion(
        "A3",
        ok,
        f"AA <= AB at all {len(ab)} points: {ordered}; gap at {cfg.sweep.values[mid]:.1f} dBm "
        f"{gap:.2f} dB (needs >= 10 dB); largest gap {np.max(ab_db - aa_db):.2f} dB ({elapsed:.2f} s)",
    )
    assert ordered, "AA must never be worse than AB"
    assert gap >= 10.0, f"mid-power gap {gap:.2f} dB below 10 dB"


# ---------------------------------------------------------------- A4


def _sc_monte_carlo(trials=10_000):
    s = _coupled_s(2, 0.8)
    chain = ch.RfChain()
    model = ch.build_link_model(s, s, chain, 3.0 * chain.bandwidth * chain.matched_psd, 1e9)
    prob = sc.ScProblem(model, sc.PilotBlock.bpsk(2, 8, 1.0, seed=4), chain)
    est = prob.prepare()
    rng = np.random.default_rng(41)
    err = np.zeros(3)
    for _ in range(trials):
        h = model.draw(rng).H_eff
        y = est.observe(h, rng)
        v = mk.vec(h)
        err += [np.sum(np.abs(est.estimate_ab(y) - v) ** 2), np.sum(np.abs(est.estimate_aa(y) - v) ** 2), np.sum(np.abs(v) ** 2)]
    theory = est.nmse_theory()
    return {"AB": (err[0] / err[2], theory["AB"]), "AA": (err[1] / err[2], theory["AA"])}


def _ofdm_monte_carlo(trials=10_000):
    cfg = mc.OfdmConfig.from_band(1e9, 0.5e9, 8, 2, 4, 2, 2)
    s = npm.synth_coupled_array(2, 0.8, 1.0, npm.FrequencyGrid(cfg.f_k), 3).matrices
    chain = ch.RfChain(bandwidth=cfg.bandwidth)
    rho = 3.0 * chain.bandwidth / cfg.K * chain.matched_psd
    prob = mc.OfdmProblem(cfg, s, s, chain, rho, mc.ofdm_pilots(cfg, 1.0, seed=2), 2)
    est = prob.prepare()
    rng = np.random.default_rng(42)
    err = np.zeros(3)
    for _ in range(trials):
        taps = mc.TapChannel.draw(2, 2, 2, rng)
        h = est.effective_freq(taps)
        y = est.observe(h, rng)
        v = np.concatenate([mk.vec(m) for m in h])
        err += [
            np.sum(np.abs(est.estimate_ab_freq(y) - v) ** 2),
            np.sum(np.abs(est.estimate_aa_freq(y) - v) ** 2),
            np.sum(np.abs(v) ** 2),
        ]
    theory = est.nmse_theory()
    return {"AB": (err[0] / err[2], theory["AB"]), "AA": (err[1] / err[2], theory["AA"])}


def test_a4_theory_matches_monte_carlo():
    start = time.perf_counter()
    results = {"single": _sc_monte_carlo(), "OFDM": _ofdm_monte_carlo()}
    elapsed = time.perf_counter() - start
    parts, ok = [], elapsed < 300
    for setting, res in results.items():
        for m, (emp, theory) in res.items():
            rel = abs(emp - theory) / theory
            ok &= rel <= 0.03
            parts.append(f"{setting} {m} {emp:.4g} vs {theory:.4g} ({100 * rel:.2f}%)")
    report_criterion("A4", ok, "; ".join(parts) + f" ({elapsed:.1f} s)")
    assert ok


# ---------------------------------------------------------------- A5


def test_a5_matched_case_collapse():
    chain = ch.RfChain()
    zeros = np.zeros((3, 3))
    model = ch.build_link_model(zeros, zeros, chain, 2.0 * chain.bandwidth * chain.matched_psd, 1e9)
    est = sc.ScProblem(model, sc.PilotBlock.bpsk(3, 6, 1.0, seed=1), chain).prepare()
    rng = np.random.default_rng(5)
    worst_sc = 0.0
    for _ in range(200):
        y = est.observe(model.draw(rng).H_eff, rng)
        ab, aa = est.estimate_ab(y), est.estimate_aa(y)
        worst_sc = max(worst_sc, float(np.linalg.norm(ab - aa) / np.linalg.norm(aa)))

    cfg = mc.OfdmConfig.from_band(1e9, 0.5e9, 8, 2, 2, 2, 2)
    s = np.zeros((8, 2, 2), dtype=complex)
    ochain = ch.RfChain(bandwidth=cfg.bandwidth)
    rho = 2.0 * ochain.bandwidth / cfg.K * ochain.matched_psd
    oest = mc.OfdmProblem(cfg, s, s, ochain, rho, mc.ofdm_pilots(cfg, 1.0, seed=1), 2).prepare()
    worst_mc = 0.0
    for _ in range(200):
        h = oest.effective_freq(mc.TapChannel.draw(2, 2, 2, rng))
        y = oest.observe(h, rng)
        ab, aa = oest.estimate_ab_freq(y), oest.estimate_aa_freq(y)
        worst_mc = max(worst_mc, float(np.linalg.norm(ab - aa) / np.linalg.norm(aa)))
    ok = worst_sc <= 1e-10 and worst_mc <= 1e-10
    report_criterion("A5", ok, f"max relative AB-AA difference: single {worst_sc:.1e}, OFDM {worst_mc:.1e} (200 draws each)")
    assert ok


# ---------------------------------------------------------------- A6


def test_a6_c1_identity_and_parseval():
    rng = np.random.default_rng(6)
    worst_c1 = worst_parseval = 0.0
    for K, L, n_t, n_r in [(8, 2, 2, 2), (16, 5, 3, 2), (12, 12, 2, 3), (5, 1, 1, 4)]:
        cfg = mc.OfdmConfig.from_band(1e9, 0.6e9, K, L, 1, n_t, n_r)
        grid = npm.FrequencyGrid(cfg.f_k)
        s_t = npm.synth_coupled_array(n_t, 0.7, 1.0, grid, 1).matrices
        s_r = npm.synth_coupled_array(n_r, 0.7, 1.0, grid, 2).matrices
        f_k, q_k = mc.per_subcarrier_fronts(s_t, s_r, 4.0)
        chain = ch.RfChain(bandwidth=cfg.bandwidth)
        chol = np.stack([mk.cholesky_lower(ch.discrete_noise(s, chain, K)) for s in s_r])
        pilots = mc.ofdm_pilots(cfg, 1.0, seed=0)
        st = mc.build_stacking(cfg, pilots, f_k, q_k, chol)
        for _ in range(10):
            taps = mc.TapChannel.draw(L, n_r, n_t, rng)
            eff = np.einsum("kij,kjl,klm->kim", q_k, mc.taps_to_freq(taps, K), f_k)
            v = np.concatenate([mk.vec(m) for m in eff])
            worst_c1 = max(worst_c1, float(np.linalg.norm(st.C1 @ taps.vec() - v) / np.linalg.norm(v)))
            freq = mc.taps_to_freq(taps, K)
            ratio = np.sum(np.abs(freq) ** 2) / (K * np.sum(np.abs(taps.taps) ** 2))
            worst_parseval = max(worst_parseval, abs(float(ratio) - 1.0))
    ok = worst_c1 <= 1e-10 and worst_parseval <= 1e-9
    report_criterion("A6", ok, f"C1 identity error {worst_c1:.1e}; Parseval relative error {worst_parseval:.1e}")
    assert ok


# ---------------------------------------------------------------- A7


def test_a7_tap_spreading():
    cfg = mc.OfdmConfig.from_band(1e9, 0.8e9, 32, 2, 1, 3, 3)
    grid = npm.FrequencyGrid(cfg.f_k)
    taps = mc.TapChannel.draw(2, 3, 3, 4)
    flat = np.broadcast_to(np.diag([0.8, 1.0, 1.2]).astype(complex), (32, 3, 3))
    flat_fraction = mc.tap_spreading_energy(flat, flat, taps)
    sweep = []
    for sel in (0.0, 0.25, 0.5):
        s = npm.synth_coupled_array(3, 0.5, sel, grid, 6).matrices
        f, q = mc.per_subcarrier_fronts(s, s, 4.0)
        sweep.append(mc.tap_spreading_energy(f, q, taps))
    ok = flat_fraction <= 1e-12 and sweep[0] <= 1e-12 and 0 < sweep[1] < sweep[2]
    report_criterion(
        "A7", ok, f"flat fronts {flat_fraction:.1e}; selectivity 0/0.25/0.5 -> " + " / ".join(f"{x:.4f}" for x in sweep)
    )
    assert ok


# ---------------------------------------------------------------- A8


def _grid_search(g, budget, levels=15, points=201):
    """Zooming grid search over the allocation simplex (2 or 3 streams)."""
    d = g.size - 1
    center = np.full(d, budget / g.size)
    width = budget
    best = None
    for _ in range(levels):
        axes = [np.linspace(c - width, c + width, points) for c in center]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        last = budget - mesh.sum(axis=1)
        p = np.column_stack([mesh, last])
        feasible = np.all(p >= 0, axis=1)
        vals = np.where(feasible, np.sum(np.log2(1 + g * np.clip(p, 0, None)), axis=1), -np.inf)
        best = p[np.argmax(vals)]
        center = best[:d]
        width /= 4
    return best


def test_a8_waterfilling_kkt():
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_budget = worst_slack = worst_grid = 0.0
    for i in range(100):
        n = 2 + i % 2
        g = rng.exponential(1.0, n) * 10 ** rng.uniform(-1, 1)
        budget = float(rng.uniform(0.2, 2.0))
        alloc = rate.waterfill(g, budget)
        p, mu = alloc.powers, alloc.water_level
        worst_budget = max(worst_budget, abs(p.sum() - budget))
        on = p > 0
        slack = np.concatenate([np.abs(p[on] + 1 / g[on] - mu), np.clip(mu - 1 / g[~on], 0, None)])
        worst_slack = max(worst_slack, float(slack.max()))
        worst_grid = max(worst_grid, float(np.max(np.abs(p - _grid_search(g, budget)))))
    elapsed = time.perf_counter() - start
    ok = worst_budget <= 1e-9 and worst_slack <= 1e-8 and worst_grid <= 1e-6 and elapsed < 5.0
    report_criterion(
        "A8",
        ok,
        f"budget error {worst_budget:.1e}; slackness {worst_slack:.1e}; grid-search gap {worst_grid:.1e} "
        f"on 100 vectors ({elapsed:.2f} s)",
    )
    assert ok


# ---------------------------------------------------------------- A9


A9_CONFIG = """
[experiment]
scenario = rate-vs-power
trials = 200
seed = 9
[array]
source = synthetic
n_ports = 4
coupling = 0.9
selectivity = 0.5
[link]
f_c = 1e9
pilot_power_dbm = 10
n_pilots = 20
[sweep]
values = 20 30
"""


def test_a9_rate_ordering():
    res = ex.run_sweep(ex.load_config("a9", text=A9_CONFIG), threads=4)
    perfect, aa, ab = res.series["perfect"], res.series["AA"], res.series["AB"]
    ok = bool(np.all(perfect > aa) and np.all(aa > ab))
    detail = "; ".join(
        f"{p:.0f} dBm perfect {a:.3f} > AA {b:.3f} > AB {c:.3f} bpcu" for p, a, b, c in zip(res.axis, perfect, aa, ab)
    )
    report_criterion("A9", ok, detail + " (200 trials)")
    assert ok


# ---------------------------------------------------------------- A10


def test_a10_power_profile_tracking():
    start = time.perf_counter()
    cfg = ex.load_config("fig12_power_profile", text=cli.bundled_configs()["fig12_power_profile"])
    res = ex.run_sweep(cfg, threads=8)
    snr = res.series["SNR"]
    rho = {m: float(spearmanr(res.series[m], snr).statistic) for m in ("perfect", "AA", "AB")}
    elapsed = time.perf_counter() - start
    ok = rho["perfect"] > 0.9 and rho["AA"] > 0.9 and rho["AB"] < min(rho["perfect"], rho["AA"])
    report_criterion(
        "A10",
        ok,
        "Spearman with SNR: " + ", ".join(f"{m} {v:.3f}" for m, v in rho.items()) + f" ({elapsed:.1f} s)",
    )
    assert ok


# ---------------------------------------------------------------- A11


@pytest.fixture(scope="module")
def quick_configs():
    out = {}
    for name, text in cli.bundled_configs().items():
        lines = []
        for line in text.splitlines():
            if line.replace(" ", "").startswith("trials="):
                line = "trials = 3"
            lines.append(line)
        out[name] = "\n".join(lines) + "\n"
    return out


def test_a11_determinism(tmp_path, quick_configs, capsys):
    identical = []
    for name, text in sorted(quick_configs.items()):
        path = tmp_path / f"{name}.ini"
        path.write_text(text)
        outputs = []
        for run in range(2):
            for fmt in ("csv", "json"):
                out = tmp_path / f"{name}.{run}.{fmt}"
                code = cli.main(["sweep", "--config", str(path), "--out", str(out), "--format", fmt, "--threads", "3"])
                assert code == 0, name
                outputs.append(out.read_bytes())
        identical.append(outputs[0] == outputs[2] and outputs[1] == outputs[3])
    capsys.readouterr()
    ok = all(identical)
    report_criterion("A11", ok, f"{sum(identical)}/{len(identical)} bundled sweeps byte-identical on rerun (CSV and JSON)")
    assert ok
