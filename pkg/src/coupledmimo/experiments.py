"""Seeded Monte-Carlo sweeps over power, frequency and tap count.

A sweep is described by an INI file (see ``load_config``). Every trial draws
from its own generator seeded with ``(seed, point, trial)``, and per-point
results are reduced in trial order, so the output does not depend on the
number of worker threads.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import matrixkit as mk
from .channel import (
    LinkModel,
    RfChain,
    build_link_model,
    dipole_los_demo,
    large_scale_rho,
)
from .errors import ConfigError, NumericalFailure
from .estimate_mc import OfdmConfig, OfdmProblem, TapChannel, ofdm_pilots
from .estimate_sc import PilotBlock, ScProblem
from .netparams import (
    SPEED_OF_LIGHT,
    FrequencyGrid,
    NetworkParams,
    convert,
    dipole_pair_impedance,
    dipole_pair_network,
    interpolate,
    parse_touchstone,
    synth_coupled_array,
)
from .rate import dbm_to_watts, ofdm_rate_lower_bound, sc_rate_lower_bound

SCENARIOS = (
    "nmse-vs-power",
    "nmse-vs-frequency",
    "nmse-vs-taps",
    "snr-vs-frequency",
    "rate-vs-power",
    "rate-vs-frequency",
    "power-vs-subcarrier",
    "equivalence",
)

PILOT_SEED_TAG = 7_919


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ArraySpec:
    source: str = "synthetic"
    n_ports: int = 4
    coupling: float = 0.6
    selectivity: float = 0.5
    synth_seed: int = 1
    f_min: float = 0.5e9
    f_max: float = 2.5e9
    points: int = 201
    path: str = ""
    spacing: float = 0.5 * SPEED_OF_LIGHT / 1e9
    length: float = 0.5 * SPEED_OF_LIGHT / 1e9
    radius: float = 0.0

    def network(self, z_ref: float, base_dir: Path | None = None) -> NetworkParams:
        """Scattering parameters of the array referred to ``z_ref``."""
        grid = FrequencyGrid.linspace(self.f_min, self.f_max, self.points)
        if self.source == "synthetic":
            net = synth_coupled_array(self.n_ports, self.coupling, self.selectivity, grid, self.synth_seed)
        elif self.source == "matched":
            zeros = np.zeros((len(grid), self.n_ports, self.n_ports), dtype=np.complex128)
            net = NetworkParams("S", z_ref, grid, zeros)
        elif self.source == "dipole":
            radius = self.radius if self.radius > 0 else None
            net = dipole_pair_network(grid, self.spacing, self.length, radius)
        elif self.source == "touchstone":
            path = Path(self.path)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            net = parse_touchstone(path.read_bytes())
        else:  # guarded by the loader
            raise ConfigError("array.source", f"unknown source {self.source!r}")
        if net.kind != "S" or net.z_ref != z_ref:
            net = convert(net, "S", z_ref)
        return net


@dataclass(frozen=True)
class Geometry:
    distance: float = 100.0
    d_ref: float = 1.0
    alpha: float = 2.0

    def rho(self, f: float) -> float:
        return large_scale_rho(f, self.distance, self.d_ref, self.alpha)


@dataclass(frozen=True)
class LinkSpec:
    f_c: float = 1e9
    pilot_power_dbm: float = 20.0
    transmit_power_dbm: float = 20.0
    n_pilots: int = 20
    pilots: str = "bpsk"
    los_gain: float = 1.0


@dataclass(frozen=True)
class OfdmSpec:
    f_min: float = 1e9
    f_max: float = 1.8e9
    K: int = 64
    L_assumed: int = 8
    L_true: int = 4
    L_t: int = 4

    @property
    def bandwidth(self) -> float:
        return self.f_max - self.f_min


@dataclass(frozen=True)
class SweepSpec:
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    trials: int = 100
    seed: int = 0
    carrier: str = "single"
    estimates: str = "both"
    array: ArraySpec = field(default_factory=ArraySpec)
    chain: RfChain = field(default_factory=RfChain)
    geometry: Geometry = field(default_factory=Geometry)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    link: LinkSpec = field(default_factory=LinkSpec)
    ofdm: OfdmSpec = field(default_factory=OfdmSpec)
    base_dir: Path | None = None
    digest: str = ""


_SECTIONS = {
    "array": ArraySpec,
    "chain": RfChain,
    "geometry": Geometry,
    "link": LinkSpec,
    "ofdm": OfdmSpec,
}
_EXPERIMENT_KEYS = {"scenario": str, "trials": int, "seed": int, "carrier": str, "estimates": str}
_SWEEP_KEYS = ("start", "stop", "num", "values", "scale")
_CHOICES = {
    "experiment.scenario": SCENARIOS,
    "experiment.carrier": ("single", "ofdm"),
    "experiment.estimates": ("theory", "empirical", "both"),
    "array.source": ("synthetic", "matched", "dipole", "touchstone"),
    "link.pilots": ("bpsk", "orthogonal"),
    "sweep.scale": ("linear", "log"),
}


def _convert(value: str, kind, path: str):
    try:
        if kind is int:
            return int(value)
        if kind is float:
            return float(value)
        return value.strip()
    except ValueError:
        raise ConfigError(path, f"expected {kind.__name__}, got {value!r}") from None


def _field_types(cls) -> dict[str, type]:
    defaults = cls()
    return {f.name: type(getattr(defaults, f.name)) for f in fields(cls)}


def _check_choice(path: str, value) -> None:
    if path in _CHOICES and value not in _CHOICES[path]:
        raise ConfigError(path, f"must be one of {', '.join(_CHOICES[path])}")


def _parse_sweep(section) -> SweepSpec:
    keys = dict(section)
    if "values" in keys:
        extra = set(keys) - {"values"}
        if extra:
            raise ConfigError(f"sweep.{min(extra)}", "cannot be combined with sweep.values")
        try:
            vals = tuple(float(v) for v in keys["values"].replace(",", " ").split())
        except ValueError:
            raise ConfigError("sweep.values", "expected a list of numbers") from None
    elif keys:
        for name in ("start", "stop", "num"):
            if name not in keys:
                raise ConfigError(f"sweep.{name}", "required when sweep.values is absent")
        start = _convert(keys["start"], float, "sweep.start")
        stop = _convert(keys["stop"], float, "sweep.stop")
        num = _convert(keys["num"], int, "sweep.num")
        scale = keys.get("scale", "linear").strip()
        _check_choice("sweep.scale", scale)
        if num < 1:
            raise ConfigError("sweep.num", "must be >= 1")
        if scale == "log":
            if not (start > 0 and stop > 0):
                raise ConfigError("sweep.start", "log sweeps need positive bounds")
            vals = tuple(np.geomspace(start, stop, num).tolist())
        else:
            vals = tuple(np.linspace(start, stop, num).tolist())
    else:
        vals = ()
    if any(not math.isfinite(v) for v in vals):
        raise ConfigError("sweep.values", "values must be finite")
    return SweepSpec(vals)


def load_config(source: str | Path, *, text: str | None = None) -> ExperimentConfig:
    """Read an experiment description.

    Parameters
    ----------
    source : str or pathlib.Path
        Path of the INI file (relative Touchstone paths resolve against its
        directory). When ``text`` is given, ``source`` is only a label.
    text : str, optional
        Configuration content to use instead of reading ``source``.

    Raises
    ------
    ConfigError
        Unknown sections or keys, malformed values or missing required
        fields; the error names the offending ``section.key``.
    """
    base_dir = None
    if text is None:
        path = Path(source)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        base_dir = path.parent
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None

    known = {"experiment", "sweep", *_SECTIONS}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(name, "unknown section")
    if not parser.has_section("experiment"):
        raise ConfigError("experiment", "section is required")

    exp = {}
    for key, value in parser["experiment"].items():
        path = f"experiment.{key}"
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError(path, "unknown key")
        exp[key] = _convert(value, _EXPERIMENT_KEYS[key], path)
        _check_choice(path, exp[key])
    if "scenario" not in exp:
        raise ConfigError("experiment.scenario", "required")
    if exp.get("trials", 1) < 1:
        raise ConfigError("experiment.trials", "must be >= 1")

    parts = {}
    for name, cls in _SECTIONS.items():
        kwargs = {}
        if parser.has_section(name):
            types = _field_types(cls)
            for key, value in parser[name].items():
                path = f"{name}.{key}"
                if key not in types:
                    raise ConfigError(path, "unknown key")
                kwargs[key] = _convert(value, types[key], path)
                _check_choice(path, kwargs[key])
        try:
            parts[name] = cls(**kwargs)
        except ValueError as exc:
            raise ConfigError(name, str(exc)) from None
    if parser.has_section("sweep"):
        for key in parser["sweep"]:
            if key not in _SWEEP_KEYS:
                raise ConfigError(f"sweep.{key}", "unknown key")
        sweep = _parse_sweep(parser["sweep"])
    else:
        sweep = SweepSpec()

    cfg = ExperimentConfig(
        sweep=sweep, base_dir=base_dir, digest=_digest(parser), **exp, **parts
    )
    _validate(cfg)
    return cfg


def _digest(parser: configparser.ConfigParser) -> str:
    canon = {s: dict(sorted(parser[s].items())) for s in sorted(parser.sections())}
    return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()[:16]


def _validate(cfg: ExperimentConfig) -> None:
    needs_axis = cfg.scenario not in ("power-vs-subcarrier",)
    if needs_axis and not cfg.sweep.values:
        raise ConfigError("sweep", f"scenario {cfg.scenario} needs a sweep axis")
    if cfg.link.n_pilots < 1:
        raise ConfigError("link.n_pilots", "must be >= 1")
    o = cfg.ofdm
    if o.K < 1 or not 1 <= o.L_true <= o.K or not 1 <= o.L_assumed <= o.K or o.L_t < 1:
        raise ConfigError("ofdm", "need 1 <= L_true, L_assumed <= K and L_t >= 1")
    if not o.f_max > o.f_min:
        raise ConfigError("ofdm.f_max", "must exceed ofdm.f_min")
    if cfg.scenario == "nmse-vs-taps":
        for v in cfg.sweep.values:
            if v != int(v) or not 1 <= v <= o.K:
                raise ConfigError("sweep.values", "tap counts must be integers in [1, K]")
    if cfg.array.source == "touchstone" and not cfg.array.path:
        raise ConfigError("array.path", "required for touchstone arrays")


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def nmse(estimates, truths) -> float:
    """``sum |x - x_hat|^2 / sum |x|^2`` over all supplied samples."""
    est = np.asarray(estimates)
    tru = np.asarray(truths)
    if est.shape != tru.shape:
        raise ValueError("estimates and truths differ in shape")
    return float(np.sum(np.abs(tru - est) ** 2) / np.sum(np.abs(tru) ** 2))


def theoretical_nmse(e, r) -> float:
    """``tr(E) / tr(R)``."""
    return float(np.real(np.trace(e)) / np.real(np.trace(r)))


def empirical_snr(model: LinkModel, trials: int, seed, power: float = 1.0) -> float:
    """Monte-Carlo ``E||sqrt(rho) H_eff x||^2 / E||n||^2`` with BPSK ``x``.

    ``x`` has per-vector power ``power``; channel, symbol and noise are drawn
    from one generator seeded by ``seed``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    chol = mk.cholesky_lower(model.R_n)
    n_r, n_t = model.n_r, model.n_t
    sig = noise = 0.0
    for _ in range(trials):
        hw = (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / math.sqrt(2)
        h_eff = model.Q @ model.Rr_half @ hw @ model.Rt_half @ model.F
        x = rng.choice((-1.0, 1.0), size=n_t) * math.sqrt(power / n_t)
        w = (rng.standard_normal(n_r) + 1j * rng.standard_normal(n_r)) / math.sqrt(2)
        sig += model.rho * float(np.sum(np.abs(h_eff @ x) ** 2))
        noise += float(np.sum(np.abs(chol @ w) ** 2))
    return sig / noise


# --------------------------------------------------------------------------
# results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepResult:
    axis_name: str
    axis_unit: str
    axis: np.ndarray
    series: dict[str, np.ndarray]
    unit: str
    metadata: dict

    def __post_init__(self):
        if not self.series or self.axis.size == 0:
            raise ConfigError("series", "a sweep result needs at least one non-empty series")
        for name, s in self.series.items():
            if s.shape != self.axis.shape:
                raise ValueError(f"series {name} length differs from the axis")
            if not np.all(np.isfinite(s)):
                raise NumericalFailure(f"series {name} contains non-finite values")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _round12(x: float) -> float:
    return float(_fmt(x))


def emit(result: SweepResult, path, fmt: str = "csv") -> None:
    """Write ``result`` as CSV or JSON with 12 significant digits.

    ``path`` may be a filesystem path or a text stream.
    """
    if not result.series or result.axis.size == 0:
        raise ConfigError("series", "refusing to emit an empty result")
    if fmt == "csv":
        buf = io.StringIO()
        names = list(result.series)
        buf.write(",".join(["axis", *names, "unit"]) + "\n")
        for i, a in enumerate(result.axis):
            row = [_fmt(a), *(_fmt(result.series[n][i]) for n in names), result.unit]
            buf.write(",".join(row) + "\n")
        text = buf.getvalue()
    elif fmt == "json":
        doc = {
            "axis_name": result.axis_name,
            "axis_unit": result.axis_unit,
            "axis": [_round12(a) for a in result.axis],
            "series": {n: [_round12(v) for v in s] for n, s in result.series.items()},
            "unit": result.unit,
            "metadata": result.metadata,
        }
        text = json.dumps(doc, indent=2) + "\n"
    else:
        raise ConfigError("format", f"unknown output format {fmt!r}")
    if hasattr(path, "write"):
        path.write(text)
    else:
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# sweep machinery
# --------------------------------------------------------------------------


ProgressFn = Callable[[int, float, dict], None]


def _trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, point, trial])


def _map_trials(fn, trials: int, executor: ThreadPoolExecutor | None) -> list:
    """Run ``fn(trial)`` for every trial; results come back in trial order."""
    if executor is None:
        return [fn(t) for t in range(trials)]
    return list(executor.map(fn, range(trials)))


def _sc_pilots(cfg: ExperimentConfig, n_t: int, power_w: float) -> PilotBlock:
    if cfg.link.pilots == "orthogonal":
        return PilotBlock.orthogonal(n_t, cfg.link.n_pilots, power_w)
    return PilotBlock.bpsk(n_t, cfg.link.n_pilots, power_w, seed=[cfg.seed, PILOT_SEED_TAG])


def single_carrier_problem(cfg: ExperimentConfig, net: NetworkParams, f_c: float, pilot_dbm: float) -> ScProblem:
    """Link model and pilots at carrier ``f_c``; the same array serves both ends."""
    s = interpolate(net, f_c)
    model = build_link_model(s, s, cfg.chain, cfg.geometry.rho(f_c), f_c)
    pilots = _sc_pilots(cfg, model.n_t, float(dbm_to_watts(pilot_dbm)))
    return ScProblem(model, pilots, cfg.chain)


def _sc_nmse_point(cfg, prob: ScProblem, point: int, executor) -> dict[str, float]:
    est = prob.prepare()
    out = {}
    if cfg.estimates in ("theory", "both"):
        th = est.nmse_theory()
        out["AB_theory"], out["AA_theory"] = th["AB"], th["AA"]
    if cfg.estimates in ("empirical", "both"):
        model = prob.model

        def trial(t):
            rng = _trial_rng(cfg.seed, point, t)
            hw = (rng.standard_normal((model.n_r, model.n_t)) + 1j * rng.standard_normal((model.n_r, model.n_t)))
            h_eff = model.Q @ model.Rr_half @ (hw / math.sqrt(2)) @ model.Rt_half @ model.F
            y = est.observe(h_eff, rng)
            v = mk.vec(h_eff)
            return (
                float(np.sum(np.abs(est.estimate_ab(y) - v) ** 2)),
                float(np.sum(np.abs(est.estimate_aa(y) - v) ** 2)),
                float(np.sum(np.abs(v) ** 2)),
            )

        sums = np.sum(np.array(_map_trials(trial, cfg.trials, executor)), axis=0)
        out["AB_empirical"], out["AA_empirical"] = sums[0] / sums[2], sums[1] / sums[2]
    return out


def _ofdm_setup(cfg: ExperimentConfig, net: NetworkParams, L_assumed: int, pilot_dbm: float):
    o = cfg.ofdm
    n = net.n_ports
    ocfg = OfdmConfig.from_band(o.f_min, o.bandwidth, o.K, L_assumed, o.L_t, n, n)
    chain = RfChain(
        beta=cfg.chain.beta,
        z_ref=cfg.chain.z_ref,
        r_in=cfg.chain.r_in,
        noise_figure=cfg.chain.noise_figure,
        temperature=cfg.chain.temperature,
        bandwidth=o.bandwidth,
    )
    s_k = np.stack([interpolate(net, f) for f in ocfg.f_k])
    rho_k = np.array([cfg.geometry.rho(f) for f in ocfg.f_k])
    rho = cfg.geometry.rho(o.f_min + 0.5 * o.bandwidth)
    pilots = ofdm_pilots(
        ocfg, float(dbm_to_watts(pilot_dbm)), rho_k=rho_k, rho=rho, seed=[cfg.seed, PILOT_SEED_TAG]
    )
    problem = OfdmProblem(ocfg, s_k, s_k, chain, rho, pilots, o.L_true)
    return problem, rho_k


def _ofdm_nmse_point(cfg, prob: OfdmProblem, point: int, executor) -> dict[str, float]:
    est = prob.prepare()
    out = {}
    if cfg.estimates in ("theory", "both"):
        th = est.nmse_theory()
        out["AB_theory"], out["AA_theory"] = th["AB"], th["AA"]
    if cfg.estimates in ("empirical", "both"):
        o = prob.cfg

        def trial(t):
            rng = _trial_rng(cfg.seed, point, t)
            taps = TapChannel.draw(prob.L_true, o.n_r, o.n_t, rng)
            h = est.effective_freq(taps)
            v = np.concatenate([mk.vec(m) for m in h])
            y = est.observe(h, rng)
            return (
                float(np.sum(np.abs(est.estimate_ab_freq(y) - v) ** 2)),
                float(np.sum(np.abs(est.estimate_aa_freq(y) - v) ** 2)),
                float(np.sum(np.abs(v) ** 2)),
            )

        sums = np.sum(np.array(_map_trials(trial, cfg.trials, executor)), axis=0)
        out["AB_empirical"], out["AA_empirical"] = sums[0] / sums[2], sums[1] / sums[2]
    return out


def _to_db(d: dict[str, float]) -> dict[str, float]:
    return {k: 10.0 * math.log10(v) if v > 0 else -math.inf for k, v in d.items()}


def _sc_rate_point(cfg, prob: ScProblem, p_t_dbm: float, point: int, executor) -> dict[str, float]:
    est = prob.prepare()
    model = prob.model
    p_t = float(dbm_to_watts(p_t_dbm))

    def trial(t):
        rng = _trial_rng(cfg.seed, point, t)
        hw = (rng.standard_normal((model.n_r, model.n_t)) + 1j * rng.standard_normal((model.n_r, model.n_t)))
        h_eff = model.Q @ model.Rr_half @ (hw / math.sqrt(2)) @ model.Rt_half @ model.F
        y = est.observe(h_eff, rng)
        shape = (model.n_r, model.n_t)
        rates = []
        for h_hat in (h_eff, mk.unvec(est.estimate_aa(y), *shape), mk.unvec(est.estimate_ab(y), *shape)):
            rates.append(sc_rate_lower_bound(h_eff, h_hat, model.R_n, model.rho, p_t).rate_bpcu)
        return rates

    mean = np.mean(np.array(_map_trials(trial, cfg.trials, executor)), axis=0)
    return {"perfect": mean[0], "AA": mean[1], "AB": mean[2]}


def _ofdm_trial_rates(est, rho_k, p_t: float, rng):
    """Per-trial OFDM rate reports for perfect, AA and AB channel knowledge."""
    prob = est.problem
    o = prob.cfg
    taps = TapChannel.draw(prob.L_true, o.n_r, o.n_t, rng)
    h = est.effective_freq(taps)
    y = est.observe(h, rng)
    shape = (o.K, o.n_t, o.n_r)

    def unstack(v):
        return np.asarray(v).reshape(shape).transpose(0, 2, 1)

    gain = np.sqrt(np.asarray(rho_k) / prob.rho)[:, None, None]
    reports = []
    for h_hat in (h, unstack(est.estimate_aa_freq(y)), unstack(est.estimate_ab_freq(y))):
        reports.append(ofdm_rate_lower_bound(gain * h, gain * h_hat, est.R_n_k, prob.rho, p_t))
    return reports


def _ofdm_rate_point(cfg, prob: OfdmProblem, rho_k, p_t_dbm: float, point: int, executor):
    est = prob.prepare()
    p_t = float(dbm_to_watts(p_t_dbm))

    def trial(t):
        return [r.rate_bpcu for r in _ofdm_trial_rates(est, rho_k, p_t, _trial_rng(cfg.seed, point, t))]

    mean = np.mean(np.array(_map_trials(trial, cfg.trials, executor)), axis=0)
    return {"perfect": mean[0], "AA": mean[1], "AB": mean[2]}


def subcarrier_snr(est, rho_k, p_t: float) -> np.ndarray:
    """Mean per-subcarrier SNR ``rho_k (P_T/N_t) E||H_eff[k]||^2 / tr R_n[k]``."""
    o = est.problem.cfg
    block = o.n_r * o.n_t
    power = np.real(np.diag(est.R_freq)).reshape(o.K, block).sum(axis=1)
    noise = np.real(np.trace(est.R_n_k, axis1=1, axis2=2))
    return np.asarray(rho_k) * (p_t / o.n_t) * power / noise


def _power_profile(cfg, net, executor) -> SweepResult:
    prob, rho_k = _ofdm_setup(cfg, net, cfg.ofdm.L_assumed, cfg.link.pilot_power_dbm)
    est = prob.prepare()
    p_t = float(dbm_to_watts(cfg.link.transmit_power_dbm))

    def trial(t):
        reports = _ofdm_trial_rates(est, rho_k, p_t, _trial_rng(cfg.seed, 0, t))
        return np.stack([r.per_subcarrier_power for r in reports])

    mean = np.mean(np.stack(_map_trials(trial, cfg.trials, executor)), axis=0)
    series = {
        "perfect": mean[0],
        "AA": mean[1],
        "AB": mean[2],
        "SNR": subcarrier_snr(est, rho_k, p_t),
    }
    return _result(cfg, "frequency", "Hz", prob.cfg.f_k, series, "linear")


def _result(cfg, axis_name, axis_unit, axis, series, unit) -> SweepResult:
    meta = {
        "scenario": cfg.scenario,
        "carrier": cfg.carrier,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "config_hash": cfg.digest,
    }
    return SweepResult(
        axis_name,
        axis_unit,
        np.asarray(axis, dtype=float),
        {k: np.asarray(v, dtype=float) for k, v in series.items()},
        unit,
        meta,
    )


def _collect(points: list[dict[str, float]]) -> dict[str, np.ndarray]:
    names = list(points[0])
    return {n: np.array([p[n] for p in points]) for n in names}


def run_sweep(cfg: ExperimentConfig, threads: int = 1, progress: ProgressFn | None = None) -> SweepResult:
    """Run the scenario named in ``cfg``.

    Parameters
    ----------
    cfg : ExperimentConfig
        Parsed configuration.
    threads : int
        Worker threads for Monte-Carlo trials. The output is identical for
        every value.
    progress : callable, optional
        Called as ``progress(point_index, axis_value, values)`` after each
        axis point.

    Raises
    ------
    ConfigError
        When the scenario and configuration do not fit together.
    """
    if threads < 1:
        raise ConfigError("threads", "must be >= 1")
    net = cfg.array.network(cfg.chain.z_ref, cfg.base_dir) if cfg.scenario != "equivalence" else None
    executor = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        return _dispatch(cfg, net, executor, progress or (lambda *_: None))
    finally:
        if executor is not None:
            executor.shutdown()


def _dispatch(cfg, net, executor, progress) -> SweepResult:
    sc = cfg.scenario
    axis = np.asarray(cfg.sweep.values, dtype=float)
    points: list[dict[str, float]] = []

    def record(i, a, values):
        points.append(values)
        progress(i, float(a), values)

    ofdm = cfg.carrier == "ofdm"
    if sc == "nmse-vs-power":
        for i, p in enumerate(axis):
            if ofdm:
                prob, _ = _ofdm_setup(cfg, net, cfg.ofdm.L_assumed, p)
                record(i, p, _to_db(_ofdm_nmse_point(cfg, prob, i, executor)))
            else:
                prob = single_carrier_problem(cfg, net, cfg.link.f_c, p)
                record(i, p, _to_db(_sc_nmse_point(cfg, prob, i, executor)))
        return _result(cfg, "pilot_power", "dBm", axis, _collect(points), "dB")
    if sc == "nmse-vs-frequency":
        _require_single(cfg)
        for i, f in enumerate(axis):
            prob = single_carrier_problem(cfg, net, f, cfg.link.pilot_power_dbm)
            record(i, f, _to_db(_sc_nmse_point(cfg, prob, i, executor)))
        return _result(cfg, "frequency", "Hz", axis, _collect(points), "dB")
    if sc == "nmse-vs-taps":
        for i, L in enumerate(axis):
            prob, _ = _ofdm_setup(cfg, net, int(L), cfg.link.pilot_power_dbm)
            record(i, L, _to_db(_ofdm_nmse_point(cfg, prob, i, executor)))
        return _result(cfg, "assumed_taps", "taps", axis, _collect(points), "dB")
    if sc == "snr-vs-frequency":
        _require_single(cfg)
        p_w = float(dbm_to_watts(cfg.link.pilot_power_dbm))
        for i, f in enumerate(axis):
            s = interpolate(net, f)
            model = build_link_model(s, s, cfg.chain, cfg.geometry.rho(f), f)
            _, r_heff, _ = model.covariances()
            theory = model.rho * p_w / model.n_t * np.real(np.trace(r_heff)) / np.real(np.trace(model.R_n))
            emp = empirical_snr(model, cfg.trials, [cfg.seed, i], p_w)
            record(i, f, _to_db({"empirical": emp, "theory": float(theory)}))
        return _result(cfg, "frequency", "Hz", axis, _collect(points), "dB")
    if sc == "rate-vs-power":
        for i, p in enumerate(axis):
            if ofdm:
                prob, rho_k = _ofdm_setup(cfg, net, cfg.ofdm.L_assumed, cfg.link.pilot_power_dbm)
                record(i, p, _ofdm_rate_point(cfg, prob, rho_k, p, i, executor))
            else:
                prob = single_carrier_problem(cfg, net, cfg.link.f_c, cfg.link.pilot_power_dbm)
                record(i, p, _sc_rate_point(cfg, prob, p, i, executor))
        return _result(cfg, "transmit_power", "dBm", axis, _collect(points), "bpcu")
    if sc == "rate-vs-frequency":
        _require_single(cfg)
        for i, f in enumerate(axis):
            prob = single_carrier_problem(cfg, net, f, cfg.link.pilot_power_dbm)
            record(i, f, _sc_rate_point(cfg, prob, cfg.link.transmit_power_dbm, i, executor))
        return _result(cfg, "frequency", "Hz", axis, _collect(points), "bpcu")
    if sc == "power-vs-subcarrier":
        result = _power_profile(cfg, net, executor)
        for i, f in enumerate(result.axis):
            progress(i, float(f), {k: float(v[i]) for k, v in result.series.items()})
        return result
    if sc == "equivalence":
        _equivalence(cfg, axis, record)
        return _result(cfg, "frequency", "Hz", axis, _collect(points), "linear")
    raise ConfigError("experiment.scenario", f"unknown scenario {sc!r}")  # pragma: no cover


def _require_single(cfg) -> None:
    if cfg.carrier != "single":
        raise ConfigError("experiment.carrier", f"{cfg.scenario} is a single-carrier scenario")


def _equivalence(cfg, axis, record) -> None:
    a = cfg.array
    radius = a.radius if a.radius > 0 else None
    for i, f in enumerate(axis):
        z = dipole_pair_impedance(f, a.spacing, a.length, radius)
        pt = dipole_los_demo(f, z, cfg.geometry.distance, cfg.link.los_gain, cfg.chain)
        imp = float(np.abs(pt.H_eff_impedance[0, 0]))
        sca = float(np.abs(pt.H_eff_scattering[0, 0]))
        gap = np.abs(np.abs(pt.H_eff_impedance) - np.abs(pt.H_eff_scattering))
        rel = float(np.max(gap) / np.max(np.abs(pt.H_eff_impedance)))
        record(i, f, {"impedance": imp, "scattering": sca, "relative_difference": rel})
