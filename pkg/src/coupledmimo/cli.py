"""Command-line interface.

Exit codes
----------
0  success
1  usage or configuration error
2  input file missing or not parseable
3  singular network conversion
4  non-passive network
5  numerical failure at run time
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import matrixkit as mk
from .errors import (
    AllZeroGains,
    ConfigError,
    ConvergenceFailure,
    NonMonotoneFrequency,
    NonPassiveArray,
    NonPassivePort,
    NotPositiveDefinite,
    NumericalFailure,
    SingularConversion,
    SingularTermination,
    TouchstoneSyntaxError,
    UnsupportedFormat,
)
from .experiments import (
    emit,
    empirical_snr,
    load_config,
    run_sweep,
    single_carrier_problem,
)
from .netparams import check_passivity, convert, parse_touchstone, write_touchstone
from .rate import dbm_to_watts, sc_rate_lower_bound

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_SINGULAR, EXIT_NONPASSIVE, EXIT_NUMERIC = range(6)

_PARSE_ERRORS = (TouchstoneSyntaxError, UnsupportedFormat, NonMonotoneFrequency)
_NUMERIC_ERRORS = (
    NumericalFailure,
    NotPositiveDefinite,
    ConvergenceFailure,
    AllZeroGains,
    SingularTermination,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# alternative spellings accepted for bundled configuration names
_CONFIG_ALIASES = {"fig7_nmse_vs_power": "fig7_nmse_power"}


def bundled_configs() -> dict[str, str]:
    """Names and texts of the configurations shipped with the package."""
    root = resources.files("coupledmimo") / "configs"
    return {p.name[:-4]: p.read_text() for p in root.iterdir() if p.name.endswith(".ini")}


def _load(config: str):
    path = Path(config)
    if path.is_file():
        return load_config(path)
    bundled = bundled_configs()
    name = config.removesuffix(".ini")
    name = _CONFIG_ALIASES.get(name, name)
    if name in bundled:
        return load_config(name, text=bundled[name])
    raise ConfigError("config", f"no such file or bundled configuration: {config}")


def _read_network(path_str: str):
    path = Path(path_str)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise _ParseFailure(f"cannot read {path}: {exc.strerror}") from None
    return parse_touchstone(data)


class _ParseFailure(Exception):
    pass


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _threads(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _write_text(out: str, text: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# --------------------------------------------------------------------------
# verbs
# --------------------------------------------------------------------------


def cmd_convert(args) -> int:
    net = _read_network(args.input)
    z_ref = args.zref if args.zref is not None else net.z_ref
    out = convert(net, args.to.upper(), z_ref)
    _write_text(args.out, write_touchstone(out))
    print(f"converted {net.kind} -> {out.kind} ({out.n_ports} ports, {len(out.grid)} points)", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    net = _read_network(args.input)
    if net.kind != "S":
        net = convert(net, "S", net.z_ref)
    report = check_passivity(net)
    print(report.format())
    return EXIT_OK if report.passive else EXIT_NONPASSIVE


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    n = max(len(cfg.sweep.values), 1)

    def progress(i, axis_value, _values):
        print(f"point {i + 1}/{n} done (axis={axis_value:.6g})", file=sys.stderr)

    result = run_sweep(cfg, threads=args.threads, progress=progress)
    if args.out == "-":
        emit(result, sys.stdout, args.format)
    else:
        emit(result, args.out, args.format)
    return EXIT_OK


def _single_point(cfg, pilot_dbm: float):
    if cfg.carrier != "single":
        raise ConfigError("experiment.carrier", "simulate and rate evaluate one single-carrier point")
    net = cfg.array.network(cfg.chain.z_ref, cfg.base_dir)
    return single_carrier_problem(cfg, net, cfg.link.f_c, pilot_dbm)


def _emit_record(record: dict, out: str, fmt: str) -> None:
    rounded = {k: float(f"{v:.12g}") if isinstance(v, float) else v for k, v in record.items()}
    if fmt == "json":
        text = json.dumps(rounded, indent=2) + "\n"
    else:
        rows = (f"{k},{v:.12g}" if isinstance(v, float) else f"{k},{v}" for k, v in rounded.items())
        text = "quantity,value\n" + "".join(r + "\n" for r in rows)
    _write_text(out, text)


def cmd_simulate(args) -> int:
    """Theoretical and Monte-Carlo NMSE plus SNR at the configured link point."""
    cfg = _load(args.config)
    prob = _single_point(cfg, cfg.link.pilot_power_dbm)
    est = prob.prepare()
    model = prob.model
    theory = est.nmse_theory()
    err = np.zeros(3)
    for t in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, 0, t])
        h_eff = model.draw(rng).H_eff
        y = est.observe(h_eff, rng)
        v = mk.vec(h_eff)
        err += [
            np.sum(np.abs(est.estimate_ab(y) - v) ** 2),
            np.sum(np.abs(est.estimate_aa(y) - v) ** 2),
            np.sum(np.abs(v) ** 2),
        ]
    snr = empirical_snr(model, cfg.trials, [cfg.seed, 1], float(dbm_to_watts(cfg.link.pilot_power_dbm)))
    record = {
        "f_c": float(cfg.link.f_c),
        "pilot_power_dbm": float(cfg.link.pilot_power_dbm),
        "trials": cfg.trials,
        "snr": float(snr),
        "nmse_AB_theory": theory["AB"],
        "nmse_AA_theory": theory["AA"],
        "nmse_AB_empirical": float(err[0] / err[2]),
        "nmse_AA_empirical": float(err[1] / err[2]),
    }
    _emit_record(record, args.out, args.format)
    print(f"simulated {cfg.trials} trials at {cfg.link.f_c:.6g} Hz", file=sys.stderr)
    return EXIT_OK


def cmd_rate(args) -> int:
    """Mean achievable rate for perfect, AA and AB channel knowledge."""
    cfg = _load(args.config)
    p_dbm = cfg.link.transmit_power_dbm if args.power_dbm is None else args.power_dbm
    prob = _single_point(cfg, cfg.link.pilot_power_dbm)
    est = prob.prepare()
    model = prob.model
    p_t = float(dbm_to_watts(p_dbm))
    shape = (model.n_r, model.n_t)
    total = np.zeros(3)
    for t in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, 0, t])
        h_eff = model.draw(rng).H_eff
        y = est.observe(h_eff, rng)
        for i, h_hat in enumerate(
            (h_eff, mk.unvec(est.estimate_aa(y), *shape), mk.unvec(est.estimate_ab(y), *shape))
        ):
            total[i] += sc_rate_lower_bound(h_eff, h_hat, model.R_n, model.rho, p_t).rate_bpcu
    mean = total / cfg.trials
    record = {
        "transmit_power_dbm": float(p_dbm),
        "trials": cfg.trials,
        "rate_perfect_bpcu": float(mean[0]),
        "rate_AA_bpcu": float(mean[1]),
        "rate_AB_bpcu": float(mean[2]),
    }
    _emit_record(record, args.out, args.format)
    print(f"rate evaluated over {cfg.trials} trials", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coupledmimo", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="convert a Touchstone file between S and Z")
    p.add_argument("--in", dest="input", required=True, help="input Touchstone file")
    p.add_argument("--to", required=True, choices=("s", "z", "S", "Z"))
    p.add_argument("--zref", type=_positive, help="target reference impedance in ohms")
    p.add_argument("--out", required=True, help="output path, '-' for stdout")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="report passivity of a Touchstone file")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="run a configured Monte-Carlo sweep")
    p.add_argument("--config", required=True, help="INI file or bundled configuration name")
    p.add_argument("--out", required=True, help="output path, '-' for stdout")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--threads", type=_threads, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="NMSE and SNR at the configured link point")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("rate", help="mean achievable rates at the configured link point")
    p.add_argument("--config", required=True)
    p.add_argument("--power-dbm", type=float, help="transmit power override in dBm")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_rate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _ParseFailure as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except _PARSE_ERRORS as exc:
        print(f"parse error: {getattr(args, 'input', '')}: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SingularConversion as exc:
        print(f"conversion error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (NonPassiveArray, NonPassivePort) as exc:
        print(f"non-passive network: {exc}", file=sys.stderr)
        return EXIT_NONPASSIVE
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure in {args.verb}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
