"""Physically consistent MIMO channel and noise from network parameters.

Both the impedance and the scattering descriptions are provided. Source and
load terminations in the scattering description are reference-matched
(``S_S = S_L = 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matrixkit as mk
from .errors import (
    DimensionMismatch,
    NonPassiveArray,
    NonPassivePort,
    SingularTermination,
)
from .netparams import SPEED_OF_LIGHT, z_to_s

BOLTZMANN = 1.38e-23


@dataclass(frozen=True)
class RfChain:
    """Receiver RF chain: LNA gain, reference/input impedances, noise."""

    beta: float = 4.0
    z_ref: float = 50.0
    r_in: float = 50.0
    noise_figure: float = 2.0
    temperature: float = 290.0
    bandwidth: float = 5e6

    def __post_init__(self):
        for name in ("beta", "z_ref", "r_in", "temperature", "bandwidth"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.noise_figure >= 1:
            raise ValueError("noise_figure must be >= 1")

    @property
    def intrinsic_psd(self) -> float:
        """Amplifier noise spectral density per receive branch."""
        return 4 * self.beta**2 * BOLTZMANN * self.temperature * (self.noise_figure - 1) * self.r_in

    @property
    def matched_psd(self) -> float:
        """Total noise spectral density per branch for a perfectly matched array."""
        b2kt = BOLTZMANN * self.temperature * self.beta**2
        return b2kt * (self.z_ref + 4 * (self.noise_figure - 1) * self.r_in)


@dataclass(frozen=True)
class LinkModel:
    """Single-carrier link at ``f_c``: ``H_eff = Q (Rr_half Hw Rt_half) F``."""

    f_c: float
    F: np.ndarray
    Q: np.ndarray
    Rt_half: np.ndarray
    Rr_half: np.ndarray
    R_n: np.ndarray
    rho: float

    @property
    def n_t(self) -> int:
        return self.F.shape[0]

    @property
    def n_r(self) -> int:
        return self.Q.shape[0]

    def covariances(self):
        """``(R_H, R_Heff, T)`` of the vectorised channels."""
        return vec_covariances(self.F, self.Q, self.Rt_half, self.Rr_half)

    def draw(self, seed) -> ChannelRealization:
        return draw_channel(self.Rt_half, self.Rr_half, self.F, self.Q, seed)


@dataclass(frozen=True)
class ChannelRealization:
    Hw: np.ndarray
    H: np.ndarray
    H_eff: np.ndarray


def _gram(s) -> np.ndarray:
    s = mk.as_cmat(s, "S")
    return s.conj().T @ s


def _diag_margin(s, name: str) -> np.ndarray:
    d = 1.0 - np.real(np.diag(_gram(s)))
    if np.any(d <= 0):
        raise NonPassivePort(f"{name}: port {int(np.argmin(d))} has diag(S^H S) >= 1")
    return d


def _passive_gram_complement(s, name: str) -> np.ndarray:
    g = np.eye(mk.as_cmat(s).shape[1]) - _gram(s)
    g = 0.5 * (g + g.conj().T)
    if mk.min_eigenvalue(g) <= 0:
        raise NonPassiveArray(f"{name}: I - S^H S is not positive definite")
    return g


def front_matrices(s_t, s_r, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """``F = sqrt(I - diag(S_T^H S_T))`` and ``Q = beta/4 sqrt(I - diag(S_R^H S_R))``."""
    f = np.diag(np.sqrt(_diag_margin(s_t, "S_T"))).astype(np.complex128)
    q = (beta / 4) * np.diag(np.sqrt(_diag_margin(s_r, "S_R"))).astype(np.complex128)
    return f, q


def spatial_correlation_halves(s_t, s_r) -> tuple[np.ndarray, np.ndarray]:
    """Transmit and receive correlation square roots from power conservation.

    ``Rr_half = (I - diag G_R)^-1/2 (I - G_R)^1/2`` and
    ``Rt_half = (I - G_T)^1/2 (I - diag G_T)^-1/2`` with ``G = S^H S``.
    """
    g_t = _passive_gram_complement(s_t, "S_T")
    g_r = _passive_gram_complement(s_r, "S_R")
    rt = mk.hermitian_sqrt(g_t) / np.sqrt(np.real(np.diag(g_t)))[None, :]
    rr = mk.hermitian_sqrt(g_r) / np.sqrt(np.real(np.diag(g_r)))[:, None]
    return rt, rr


def draw_channel(rt_half, rr_half, f, q, seed) -> ChannelRealization:
    """Draw ``Hw ~ CN(0, 1)`` i.i.d. and form ``H`` and ``H_eff``.

    ``seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = np.random.default_rng(seed)
    n_r, n_t = rr_half.shape[0], rt_half.shape[0]
    if q.shape[1] != n_r or f.shape[0] != n_t:
        raise DimensionMismatch("front matrices do not match the correlation factors")
    hw = (rng.standard_normal((n_r, n_t)) + 1j * rng.standard_normal((n_r, n_t))) / math.sqrt(2)
    h = rr_half @ hw @ rt_half
    return ChannelRealization(Hw=hw, H=h, H_eff=q @ h @ f)


def effective_channel_scattering(s_t, s_r, h_prop, beta: float) -> np.ndarray:
    """``(beta/4) S_RT`` with ``S_RT = sqrt(I - diag G_R) H sqrt(I - diag G_T)``."""
    h_prop = mk.as_cmat(h_prop, "H")
    _passive_gram_complement(s_t, "S_T")
    _passive_gram_complement(s_r, "S_R")
    f, q = front_matrices(s_t, s_r, beta)
    if h_prop.shape != (q.shape[0], f.shape[0]):
        raise DimensionMismatch(f"H is {h_prop.shape}, arrays need {(q.shape[0], f.shape[0])}")
    return q @ h_prop @ f


def _inv(m: np.ndarray, name: str) -> np.ndarray:
    if np.linalg.cond(m) > 1e12:
        raise SingularTermination(f"{name} is singular")
    return np.linalg.inv(m)


def effective_channel_impedance(z_s, z_t, z_r, z_l, z_rt, beta: float) -> np.ndarray:
    """``beta Z_L (Z_R + Z_L)^-1 Z_RT (Z_T + Z_S)^-1`` (unilateral)."""
    z_s, z_t, z_r, z_l, z_rt = (mk.as_cmat(m) for m in (z_s, z_t, z_r, z_l, z_rt))
    return beta * z_l @ _inv(z_r + z_l, "Z_R + Z_L") @ z_rt @ _inv(z_t + z_s, "Z_T + Z_S")


def mutual_impedance(z_t, z_r, h_oc) -> np.ndarray:
    """``Z_RT = diag(sqrt(Re Z_R)) H_OC diag(sqrt(Re Z_T))``."""
    rr = np.sqrt(np.real(np.diag(mk.as_cmat(z_r))))
    rt = np.sqrt(np.real(np.diag(mk.as_cmat(z_t))))
    return rr[:, None] * mk.as_cmat(h_oc) * rt[None, :]


def terminated_from_open_circuit(h_oc, z_t, z_r, z_ref: float) -> np.ndarray:
    """Propagation channel between terminated embedded patterns.

    Re-expresses the open-circuit embedded patterns (unit-power normalised)
    as the patterns obtained when each port is driven through ``z_ref`` with
    the others terminated, then normalises those to unit radiated power.
    Reciprocity makes the receive side use the transpose.
    """
    z_t, z_r = mk.as_cmat(z_t), mk.as_cmat(z_r)

    def combination(z):
        n = z.shape[0]
        currents = 2 * math.sqrt(z_ref) * np.linalg.inv(z + z_ref * np.eye(n))
        c = np.sqrt(np.real(np.diag(z)))[:, None] * currents
        # column norms under the open-circuit pattern overlap Re Z / sqrt(R_ii R_jj)
        r = np.real(z)
        overlap = r / np.sqrt(np.outer(np.diag(r), np.diag(r)))
        power = np.real(np.einsum("in,ij,jn->n", c.conj(), overlap, c))
        return c / np.sqrt(power)[None, :]

    return combination(z_r).T @ mk.as_cmat(h_oc) @ combination(z_t)


def friis_los_channel(f: float, d: float, gain: float, n_r: int = 2, n_t: int = 2) -> np.ndarray:
    """Rank-one LoS channel ``c/(4 pi f d) * gain * 1 1^T``."""
    if not (f > 0 and d > 0):
        raise ValueError("f and d must be positive")
    return np.full((n_r, n_t), SPEED_OF_LIGHT / (4 * math.pi * f * d) * gain, dtype=np.complex128)


def noise_covariance_scattering(s_r, chain: RfChain) -> np.ndarray:
    """Noise spectral covariance ``k T beta^2 Z0 (I - S_R^H S_R) + intrinsic``."""
    s_r = mk.as_cmat(s_r, "S_R")
    g = _passive_gram_complement(s_r, "S_R")
    kt = BOLTZMANN * chain.temperature
    return kt * chain.beta**2 * chain.z_ref * g + chain.intrinsic_psd * np.eye(s_r.shape[0])


def noise_covariance_impedance(z_r, z_l, chain: RfChain) -> np.ndarray:
    """Extrinsic (thermal, from ``Re Z_R``) plus intrinsic amplifier noise."""
    z_r, z_l = mk.as_cmat(z_r), mk.as_cmat(z_l)
    a = z_l @ _inv(z_r + z_l, "Z_R + Z_L")
    kt = BOLTZMANN * chain.temperature
    ext = 4 * kt * chain.beta**2 * a @ np.real(z_r) @ a.conj().T
    return ext + chain.intrinsic_psd * np.eye(z_r.shape[0])


def discrete_noise(s_r, chain: RfChain, n_subcarriers: int = 1) -> np.ndarray:
    """Sampled noise covariance ``(B/K) R_n(f)``; ``K = 1`` for single carrier."""
    return chain.bandwidth / n_subcarriers * noise_covariance_scattering(s_r, chain)


def vec_covariances(f, q, rt_half, rr_half):
    """Covariances of ``vec(H)`` and ``vec(H_eff)`` plus ``T = F^T kron Q``."""
    r_t = rt_half.T @ rt_half.conj()
    r_r = rr_half @ rr_half.conj().T
    r_h = np.kron(r_t, r_r)
    t = np.kron(f.T, q)
    r_heff = t @ r_h @ t.conj().T
    return r_h, 0.5 * (r_heff + r_heff.conj().T), t


def large_scale_rho(f: float, d: float, d_ref: float = 1.0, alpha: float = 2.0) -> float:
    """Extended Friis large-scale gain ``(c/(4 pi f d_ref))^2 (d_ref/d)^alpha``."""
    if not (f > 0 and d > 0 and d_ref > 0 and alpha > 0):
        raise ValueError("all arguments must be positive")
    return (SPEED_OF_LIGHT / (4 * math.pi * f * d_ref)) ** 2 * (d_ref / d) ** alpha


def build_link_model(s_t, s_r, chain: RfChain, rho: float, f_c: float) -> LinkModel:
    f, q = front_matrices(s_t, s_r, chain.beta)
    rt, rr = spatial_correlation_halves(s_t, s_r)
    r_n = discrete_noise(s_r, chain)
    return LinkModel(f_c=f_c, F=f, Q=q, Rt_half=rt, Rr_half=rr, R_n=r_n, rho=rho)


@dataclass(frozen=True)
class DipoleDemoPoint:
    f: float
    H_eff_impedance: np.ndarray
    H_eff_scattering: np.ndarray
    gain_open_circuit: float
    gain_terminated: complex
    R_n_impedance: np.ndarray
    R_n_scattering: np.ndarray


def dipole_los_demo(
    f: float,
    z_array: np.ndarray,
    distance: float,
    gain_oc: float,
    chain: RfChain,
) -> DipoleDemoPoint:
    """Evaluate the LoS two-dipole link in both descriptions at one frequency.

    The same array (impedance ``z_array``) is used at both ends, with
    reference-impedance source and load terminations.
    """
    z = mk.as_cmat(z_array)
    n = z.shape[0]
    z0 = chain.z_ref * np.eye(n)
    h_oc = friis_los_channel(f, distance, gain_oc, n, n)
    h_imp = effective_channel_impedance(z0, z, z, z0, mutual_impedance(z, z, h_oc), chain.beta)

    s = z_to_s(z, chain.z_ref)
    h_term = terminated_from_open_circuit(h_oc, z, z, chain.z_ref)
    h_sc = effective_channel_scattering(s, s, h_term, chain.beta)
    friis = SPEED_OF_LIGHT / (4 * math.pi * f * distance)
    return DipoleDemoPoint(
        f=f,
        H_eff_impedance=h_imp,
        H_eff_scattering=h_sc,
        gain_open_circuit=gain_oc,
        gain_terminated=complex(h_term[0, 0] / friis),
        R_n_impedance=noise_covariance_impedance(z, z0, chain),
        R_n_scattering=noise_covariance_scattering(s, chain),
    )
