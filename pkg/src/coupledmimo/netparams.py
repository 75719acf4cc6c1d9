"""Frequency-dependent antenna network parameters.

Holds S/Z matrices on a frequency grid, reads and writes a Touchstone v1
subset, converts between the two descriptions and synthesises test arrays
(an analytic side-by-side dipole pair and a parametric coupled array).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.special

from . import matrixkit as mk
from .errors import (
    DimensionMismatch,
    NonMonotoneFrequency,
    NumericalFailure,
    OutOfBand,
    SingularConversion,
    TouchstoneSyntaxError,
    UnsupportedFormat,
    WrongKind,
)

SPEED_OF_LIGHT = 299_792_458.0
ETA0 = 376.730313668  # free-space wave impedance, ohms

PASSIVITY_TOL = 1e-9
SYMMETRY_TOL = 1e-9
CONVERSION_MAX_COND = 1e12

FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
_UNIT_NAMES = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}

Kind = Literal["S", "Z"]


@dataclass(frozen=True)
class FrequencyGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float)).copy()
        if pts.ndim != 1 or pts.size < 1:
            raise ValueError("frequency grid needs at least one point")
        if not np.all(np.isfinite(pts)) or np.any(pts <= 0):
            raise ValueError("frequencies must be finite and positive")
        if np.any(np.diff(pts) <= 0):
            raise NonMonotoneFrequency("frequency points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.size

    @classmethod
    def linspace(cls, start: float, stop: float, num: int) -> FrequencyGrid:
        return cls(np.linspace(start, stop, num))


@dataclass(frozen=True)
class NetworkParams:
    """Per-frequency ``n_ports x n_ports`` network matrices.

    ``matrices`` has shape ``(len(grid), n_ports, n_ports)``. Set ``passive``
    to assert (and have checked) that a scattering network is passive.
    """

    kind: Kind
    z_ref: float
    grid: FrequencyGrid
    matrices: np.ndarray
    passive: bool = False
    n_ports: int = field(init=False)

    def __post_init__(self):
        kind = str(self.kind).upper()
        if kind not in ("S", "Z"):
            raise UnsupportedFormat(f"unsupported parameter kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if not self.z_ref > 0:
            raise ValueError("z_ref must be positive")
        mats = np.array(self.matrices, dtype=np.complex128)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionMismatch(f"matrices must be (F, n, n), got {mats.shape}")
        if mats.shape[0] != len(self.grid):
            raise DimensionMismatch(
                f"{mats.shape[0]} matrices for {len(self.grid)} frequency points"
            )
        if not np.all(np.isfinite(mats)):
            raise ValueError("network matrices contain NaN or Inf")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "n_ports", mats.shape[1])
        if self.passive:
            if kind != "S":
                raise WrongKind("only scattering networks can be flagged passive")
            worst = max(np.linalg.norm(m, 2) for m in mats)
            if worst > 1 + PASSIVITY_TOL:
                raise ValueError(f"network flagged passive but max singular value is {worst}")

    @property
    def frequencies(self) -> np.ndarray:
        return self.grid.points

    def at(self, f: float) -> np.ndarray:
        return interpolate(self, f)

    def is_reciprocal(self, tol: float = SYMMETRY_TOL) -> bool:
        return all(
            np.linalg.norm(m - m.T) <= tol * max(1.0, np.linalg.norm(m)) for m in self.matrices
        )


@dataclass(frozen=True)
class PassivityReport:
    frequencies: np.ndarray
    max_singular_values: np.ndarray
    worst_frequency: float
    passive: bool

    @property
    def worst_singular_value(self) -> float:
        return float(np.max(self.max_singular_values))

    def format(self) -> str:
        lines = [f"{'frequency_hz':>16} {'max_sv':>14}"]
        for f, s in zip(self.frequencies, self.max_singular_values):
            lines.append(f"{f:16.9e} {s:14.10f}")
        verdict = "passive" if self.passive else "NOT passive"
        lines.append(
            f"{verdict}: worst max singular value {self.worst_singular_value:.10f} "
            f"at {self.worst_frequency:.9e} Hz"
        )
        return "\n".join(lines)


# --------------------------------------------------------------------------
# Touchstone v1 subset
# --------------------------------------------------------------------------


def _parse_option_line(tokens: list[str], lineno: int) -> tuple[float, Kind, str, float]:
    unit, kind, fmt, z_ref = "GHZ", "S", "MA", 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in FREQ_UNITS:
            unit = tok
        elif tok in ("S", "Z"):
            kind = tok
        elif tok in ("Y", "H", "G"):
            raise UnsupportedFormat(f"line {lineno}: parameter type {tok} is not supported")
        elif tok in ("RI", "MA", "DB"):
            fmt = tok
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneSyntaxError(lineno, "option 'R' needs a reference impedance")
            try:
                z_ref = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneSyntaxError(lineno, f"bad reference impedance {tokens[i + 1]!r}")
            if not z_ref > 0:
                raise TouchstoneSyntaxError(lineno, "reference impedance must be positive")
            i += 1
        else:
            raise TouchstoneSyntaxError(lineno, f"unknown option {tokens[i]!r}")
        i += 1
    return FREQ_UNITS[unit], kind, fmt, z_ref


def _to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return mag * np.exp(1j * np.deg2rad(b))


def parse_touchstone(data, n_ports: int | None = None) -> NetworkParams:
    """Parse Touchstone v1 text (``str`` or ``bytes``) into NetworkParams.

    The port count is inferred from the record layout unless given (e.g.
    from an ``.sNp`` extension). Z values are read as ohms, not normalised.
    """
    if isinstance(data, (bytes, bytearray)):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError:
            raise TouchstoneSyntaxError(1, "input is not valid UTF-8 text") from None
    option = None
    records: list[tuple[int, list[float]]] = []
    for lineno, raw in enumerate(io.StringIO(data), start=1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            raise UnsupportedFormat(f"line {lineno}: Touchstone v2 keyword {line.split()[0]}")
        if line.startswith("#"):
            if option is not None:
                raise TouchstoneSyntaxError(lineno, "duplicate option line")
            option = _parse_option_line(line[1:].split(), lineno)
            continue
        if option is None:
            raise TouchstoneSyntaxError(lineno, "data before option line")
        try:
            values = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise TouchstoneSyntaxError(lineno, f"non-numeric value ({exc})") from None
        if len(values) % 2 == 1:
            records.append((lineno, values))
        elif not records:
            raise TouchstoneSyntaxError(lineno, "continuation line without a frequency")
        else:
            records[-1][1].extend(values)
    if option is None:
        raise TouchstoneSyntaxError(1, "missing option line")
    if not records:
        raise TouchstoneSyntaxError(1, "no data records")
    scale, kind, fmt, z_ref = option

    freqs, mats = [], []
    for lineno, values in records:
        pairs = (len(values) - 1) // 2
        n = n_ports if n_ports is not None else math.isqrt(pairs)
        if n < 1 or n * n != pairs:
            raise TouchstoneSyntaxError(
                lineno, f"record holds {len(values)} numbers, expected 1 + 2*n^2"
            )
        if mats and n != mats[0].shape[0]:
            raise TouchstoneSyntaxError(lineno, "port count changes between records")
        arr = np.asarray(values[1:]).reshape(pairs, 2)
        m = _to_complex(arr[:, 0], arr[:, 1], fmt).reshape(n, n)
        if n == 2:
            m = m.T  # S11 S21 S12 S22
        freqs.append(values[0] * scale)
        mats.append(m)
    freqs = np.asarray(freqs)
    if np.any(np.diff(freqs) <= 0):
        bad = records[int(np.argmax(np.diff(freqs) <= 0)) + 1][0]
        raise NonMonotoneFrequency(f"line {bad}: frequencies must be strictly increasing")
    return NetworkParams(kind, z_ref, FrequencyGrid(freqs), np.stack(mats))


def write_touchstone(params: NetworkParams, fmt: str = "RI", unit: str = "Hz") -> str:
    fmt = fmt.upper()
    if fmt not in ("RI", "MA", "DB"):
        raise UnsupportedFormat(f"unknown data format {fmt}")
    ukey = unit.upper()
    if ukey not in FREQ_UNITS:
        raise UnsupportedFormat(f"unknown frequency unit {unit}")
    n = params.n_ports
    out = [
        f"! {n}-port {params.kind}-parameters written by coupledmimo",
        f"# {_UNIT_NAMES[ukey]} {params.kind} {fmt} R {params.z_ref:.17g}",
    ]
    for f, m in zip(params.frequencies, params.matrices):
        m = m.T if n == 2 else m
        if fmt == "RI":
            a, b = m.real, m.imag
        else:
            mag = np.abs(m)
            a = mag if fmt == "MA" else 20.0 * np.log10(mag)
            b = np.rad2deg(np.angle(m))
        cells = [f"{x:.17g} {y:.17g}" for x, y in zip(a.ravel(), b.ravel())]
        fstr = f"{f / FREQ_UNITS[ukey]:.17g}"
        if n <= 2:
            out.append(" ".join([fstr, *cells]))
            continue
        first = True
        for r in range(n):
            row = cells[r * n : (r + 1) * n]
            for c in range(0, n, 4):
                chunk = " ".join(row[c : c + 4])
                out.append(f"{fstr} {chunk}" if first else f"  {chunk}")
                first = False
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# conversions
# --------------------------------------------------------------------------


def _solve_right(num: np.ndarray, den: np.ndarray, what: str) -> np.ndarray:
    """Return ``num @ inv(den)``."""
    if np.linalg.cond(den) > CONVERSION_MAX_COND:
        raise SingularConversion(f"{what} is singular (condition > {CONVERSION_MAX_COND:g})")
    return np.linalg.solve(den.T, num.T).T


def z_to_s(z, z_ref: float) -> np.ndarray:
    """``S = (Z - z0 I)(Z + z0 I)^-1``."""
    if not z_ref > 0:
        raise ValueError("z_ref must be positive")
    z = mk.as_cmat(z, "Z")
    eye = np.eye(z.shape[0])
    return _solve_right(z - z_ref * eye, z + z_ref * eye, "Z + z_ref*I")


def s_to_z(s, z_ref: float) -> np.ndarray:
    """``Z = z0 (I + S)(I - S)^-1``."""
    if not z_ref > 0:
        raise ValueError("z_ref must be positive")
    s = mk.as_cmat(s, "S")
    eye = np.eye(s.shape[0])
    return z_ref * _solve_right(eye + s, eye - s, "I - S")


def convert(params: NetworkParams, kind: str, z_ref: float | None = None) -> NetworkParams:
    """Convert a whole network to ``kind`` ('S' or 'Z') at ``z_ref``."""
    kind = kind.upper()
    z_ref = params.z_ref if z_ref is None else z_ref
    if kind not in ("S", "Z"):
        raise UnsupportedFormat(f"cannot convert to {kind!r}")
    if params.kind == "S":
        zs = [s_to_z(m, params.z_ref) for m in params.matrices]
    else:
        zs = list(params.matrices)
    mats = zs if kind == "Z" else [z_to_s(m, z_ref) for m in zs]
    return NetworkParams(kind, z_ref, params.grid, np.stack(mats))


def interpolate(params: NetworkParams, f: float) -> np.ndarray:
    """Entrywise linear interpolation of the network matrix at ``f``."""
    pts = params.grid.points
    if not (pts[0] <= f <= pts[-1]):
        raise OutOfBand(f"{f:g} Hz outside [{pts[0]:g}, {pts[-1]:g}] Hz")
    i = int(np.searchsorted(pts, f))
    if i < pts.size and pts[i] == f:
        return params.matrices[i].copy()
    lo, hi = pts[i - 1], pts[i]
    w = (f - lo) / (hi - lo)
    return (1.0 - w) * params.matrices[i - 1] + w * params.matrices[i]


def check_passivity(params: NetworkParams) -> PassivityReport:
    if params.kind != "S":
        raise WrongKind("passivity check needs scattering parameters")
    sv = np.array([np.linalg.norm(m, 2) for m in params.matrices])
    worst = int(np.argmax(sv))
    return PassivityReport(
        frequencies=params.frequencies.copy(),
        max_singular_values=sv,
        worst_frequency=float(params.frequencies[worst]),
        passive=bool(np.all(sv <= 1 + PASSIVITY_TOL)),
    )


# --------------------------------------------------------------------------
# analytic dipole pair (induced-EMF method, sinusoidal current)
# --------------------------------------------------------------------------


def _e1_imag(x: np.ndarray) -> np.ndarray:
    """``E1(j x)`` for real ``x > 0`` via sine/cosine integrals."""
    si, ci = scipy.special.sici(x)
    return -ci + 1j * (si - np.pi / 2)


def _segment_integral(k: float, h: float, rho: float, c: float) -> complex:
    """``int_0^h sin k(h-z) exp(-jkR)/R dz`` with ``R = sqrt(rho^2 + (z-c)^2)``."""
    v = np.array([-c, h - c])  # z = 0 and z = h
    r = np.hypot(rho, v)
    # R + v and R - v, written to avoid cancellation
    w_plus = np.where(v >= 0, r + v, rho**2 / (r - v))
    w_minus = np.where(v <= 0, r - v, rho**2 / (r + v))
    e_plus = _e1_imag(k * w_plus)
    e_minus = _e1_imag(k * w_minus)
    term1 = -np.exp(1j * k * (h - c)) * (e_plus[1] - e_plus[0])
    term2 = np.exp(-1j * k * (h - c)) * (e_minus[1] - e_minus[0])
    return complex((term1 - term2) / 2j)


def _emf_impedance(k: float, h: float, rho: float) -> complex:
    """Impedance between parallel side-by-side dipoles of half-length ``h``.

    Referred to the feed-point currents; ``rho`` is the axis separation (use
    the wire radius for the self term).
    """
    j_int = 2.0 * (
        _segment_integral(k, h, rho, h)
        + _segment_integral(k, h, rho, -h)
        - 2.0 * math.cos(k * h) * _segment_integral(k, h, rho, 0.0)
    )
    z_max = 1j * ETA0 / (4 * math.pi) * j_int
    return z_max / math.sin(k * h) ** 2


def dipole_pair_impedance(
    f: float, spacing: float, length: float, radius: float | None = None
) -> np.ndarray:
    """2x2 impedance matrix of two parallel side-by-side thin dipoles.

    Parameters
    ----------
    f : float
        Frequency in Hz.
    spacing : float
        Distance between the dipole axes in metres.
    length : float
        Total dipole length in metres.
    radius : float, optional
        Wire radius; defaults to ``length / 200``.

    Returns
    -------
    numpy.ndarray
        Symmetric impedance matrix in ohms, referred to the feed currents.
    """
    if not (spacing > 0 and length > 0 and f > 0):
        raise ValueError("frequency, spacing and length must be positive")
    radius = length / 200.0 if radius is None else radius
    if not radius > 0:
        raise ValueError("radius must be positive")
    k = 2 * math.pi * f / SPEED_OF_LIGHT
    h = length / 2
    if abs(math.sin(k * h)) < 1e-6:
        raise NumericalFailure("feed point sits at a current null (length near n*lambda)")
    z11 = _emf_impedance(k, h, radius)
    z12 = _emf_impedance(k, h, spacing)
    if not (np.isfinite(z11) and np.isfinite(z12)):
        raise NumericalFailure("induced-EMF evaluation produced non-finite values")
    return np.array([[z11, z12], [z12, z11]], dtype=np.complex128)


def dipole_pair_network(
    grid: FrequencyGrid, spacing: float, length: float, radius: float | None = None
) -> NetworkParams:
    mats = [dipole_pair_impedance(f, spacing, length, radius) for f in grid.points]
    return NetworkParams("Z", 50.0, grid, np.stack(mats))


# --------------------------------------------------------------------------
# synthetic coupled array
# --------------------------------------------------------------------------

SYNTH_MAX_SV = 0.98


def _clip_singular_values(s: np.ndarray, limit: float) -> np.ndarray:
    # S h(S^H S) keeps a complex-symmetric S symmetric
    w, v = np.linalg.eigh(s.conj().T @ s)
    sv = np.sqrt(np.clip(w, 0.0, None))
    scale = np.where(sv > limit, limit / np.maximum(sv, 1e-300), 1.0)
    out = s @ ((v * scale) @ v.conj().T)
    return 0.5 * (out + out.T)


def synth_coupled_array(
    n_ports: int,
    coupling: float,
    selectivity: float,
    grid: FrequencyGrid,
    seed: int,
    f_ref: float = 1e9,
) -> NetworkParams:
    """Deterministic symmetric passive S-parameters of a coupled linear array.

    Entry ``(i, j)`` has magnitude ``coupling * exp(-|i-j|)`` modulated by a
    smooth frequency ripple whose depth is ``selectivity``; ripple periods are
    drawn around ``f_ref`` so the same seed gives the same S(f) on any grid.
    Singular values are clipped to 0.98.
    """
    if n_ports < 1:
        raise ValueError("n_ports must be >= 1")
    if not 0 <= coupling < 1:
        raise ValueError("coupling must lie in [0, 1)")
    if selectivity < 0:
        raise ValueError("selectivity must be >= 0")
    rng = np.random.default_rng(seed)

    def sym(a):
        return np.triu(a) + np.triu(a, 1).T

    n = n_ports
    phase = sym(rng.uniform(0, 2 * np.pi, (n, n)))
    period = sym(f_ref * rng.uniform(0.15, 0.4, (n, n)))
    theta_mag = sym(rng.uniform(0, 2 * np.pi, (n, n)))
    theta_ph = sym(rng.uniform(0, 2 * np.pi, (n, n)))
    dist = np.abs(np.subtract.outer(np.arange(n), np.arange(n)))
    base = coupling * np.exp(-dist)

    mats = []
    for f in grid.points:
        arg = 2 * np.pi * f / period
        mag = base * np.exp(0.5 * selectivity * np.sin(arg + theta_mag))
        ph = phase + selectivity * np.sin(arg + theta_ph)
        mats.append(_clip_singular_values(mag * np.exp(1j * ph), SYNTH_MAX_SV))
    return NetworkParams("S", 50.0, grid, np.stack(mats), passive=True)
