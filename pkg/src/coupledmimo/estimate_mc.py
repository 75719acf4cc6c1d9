"""OFDM (multicarrier) channel model and LMMSE estimators.

Vectorisation conventions (column-major throughout):

* ``vec(Hbar)`` with ``Hbar = [H[0] ... H[L-1]]``: receive antenna fastest,
  then transmit antenna, then tap.
* ``vec(Hbar_f)`` with ``Hbar_f = [H[0] ... H[K-1]]`` in frequency: receive
  antenna fastest, then transmit antenna, then subcarrier.
* Stacked observations: receive antenna fastest, then subcarrier, then
  pilot time slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matrixkit as mk
from .channel import RfChain, discrete_noise
from .errors import DimensionMismatch, NonPassiveArray
from .estimate_sc import _scaled_identity_gain, mismatched_mse


@dataclass(frozen=True)
class OfdmConfig:
    K: int
    L: int
    L_t: int
    bandwidth: float
    f_k: np.ndarray
    n_t: int
    n_r: int

    def __post_init__(self):
        if not 1 <= self.L <= self.K:
            raise ValueError("need 1 <= L <= K")
        if self.L_t < 1:
            raise ValueError("L_t must be >= 1")
        f_k = np.asarray(self.f_k, dtype=float)
        if f_k.shape != (self.K,) or np.any(np.diff(f_k) <= 0):
            raise ValueError("f_k must hold K strictly increasing frequencies")
        object.__setattr__(self, "f_k", f_k)

    @classmethod
    def from_band(cls, f_min: float, bandwidth: float, K: int, L: int, L_t: int, n_t: int, n_r: int):
        """Subcarriers ``f_k = f_min + k B / K``."""
        return cls(K, L, L_t, bandwidth, f_min + np.arange(K) * bandwidth / K, n_t, n_r)

    def with_taps(self, L: int) -> OfdmConfig:
        return OfdmConfig(self.K, L, self.L_t, self.bandwidth, self.f_k, self.n_t, self.n_r)


@dataclass(frozen=True)
class TapChannel:
    """Time-domain taps, shape ``(L, N_r, N_t)``."""

    taps: np.ndarray

    @property
    def L(self) -> int:
        return self.taps.shape[0]

    @classmethod
    def draw(cls, L: int, n_r: int, n_t: int, seed) -> TapChannel:
        """Uniform power-delay profile: every tap i.i.d. CN(0, 1)."""
        rng = np.random.default_rng(seed)
        shape = (L, n_r, n_t)
        return cls((rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2))

    def vec(self) -> np.ndarray:
        """``vec([H[0] ... H[L-1]])``."""
        return mk.vec(np.concatenate(list(self.taps), axis=1))


def per_subcarrier_fronts(s_t_k, s_r_k, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """``F[k] = (I - S_T^H S_T)^-1`` and ``Q[k] = beta/4 (I - S_R^H S_R)^-1``.

    Inputs are stacks ``(K, n, n)``; returns stacks of the same layout.
    """

    def inv_complement(stack, name):
        out = []
        for k, s in enumerate(np.asarray(stack, dtype=np.complex128)):
            g = np.eye(s.shape[1]) - s.conj().T @ s
            if mk.min_eigenvalue(g) <= 0:
                raise NonPassiveArray(f"{name} at subcarrier {k}: I - S^H S not invertible-PD")
            out.append(np.linalg.inv(g))
        return np.stack(out)

    return inv_complement(s_t_k, "S_T"), (beta / 4) * inv_complement(s_r_k, "S_R")


def taps_to_freq(taps: TapChannel, K: int) -> np.ndarray:
    """``H[k] = sum_l H[l] exp(-j 2 pi l k / K)``; returns ``(K, N_r, N_t)``."""
    if taps.L > K:
        raise ValueError("more taps than subcarriers")
    return np.fft.fft(taps.taps, n=K, axis=0)


def partial_dft(L: int, K: int) -> np.ndarray:
    """``L x K`` matrix with entry ``(m, n) = exp(+j 2 pi m n / K)``."""
    return np.exp(2j * np.pi * np.outer(np.arange(L), np.arange(K)) / K)


def _permutation(perm: np.ndarray) -> np.ndarray:
    """Matrix ``P`` with ``(P v)[i] = v[perm[i]]``."""
    p = np.zeros((perm.size, perm.size))
    p[np.arange(perm.size), perm] = 1.0
    return p


def tap_grouping(n_r: int, n_t: int, L: int) -> np.ndarray:
    """``P_L``: reorder (r, t, tap) to (r, tap, t), taps adjacent per transmit antenna."""
    r, tap, t = np.meshgrid(np.arange(n_r), np.arange(L), np.arange(n_t), indexing="ij")
    # output index runs r fastest, then tap, then t
    src = r + n_r * t + n_r * n_t * tap
    return _permutation(src.transpose(2, 1, 0).ravel())


def freq_grouping(n_r: int, n_t: int, K: int) -> np.ndarray:
    """``P_K``: reorder (r, k, t) to (r, t, k), grouping each subcarrier's matrix."""
    r, t, k = np.meshgrid(np.arange(n_r), np.arange(n_t), np.arange(K), indexing="ij")
    src = r + n_r * k + n_r * K * t
    return _permutation(src.transpose(2, 1, 0).ravel())


@dataclass(frozen=True)
class McStacking:
    B_mat: np.ndarray
    B_prime: np.ndarray
    M: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    D: np.ndarray
    P_K: np.ndarray
    P_L: np.ndarray
    partial_dft: np.ndarray


def time_to_freq(cfg: OfdmConfig, L: int | None = None):
    """``(C2, P_K, P_L, partial_dft)`` for ``L`` taps (default ``cfg.L``)."""
    L = cfg.L if L is None else L
    dft = partial_dft(L, cfg.K)
    p_l = tap_grouping(cfg.n_r, cfg.n_t, L)
    p_k = freq_grouping(cfg.n_r, cfg.n_t, cfg.K)
    core = np.kron(np.eye(cfg.n_t), np.kron(dft.conj().T, np.eye(cfg.n_r)))
    return p_k @ core @ p_l, p_k, p_l, dft


def front_blockdiag(f_k, q_k) -> np.ndarray:
    """``D = blockdiag(F[k]^T kron Q[k])``."""
    return mk.block_diag([np.kron(f.T, q) for f, q in zip(f_k, q_k)])


def _u(k: int, K: int, L: int) -> np.ndarray:
    return np.exp(-2j * np.pi * k * np.arange(L) / K)


def build_stacking(
    cfg: OfdmConfig, pilots: np.ndarray, f_k, q_k, chol_k, L_true: int | None = None
) -> McStacking:
    """Assemble the sensing/stacking matrices.

    Parameters
    ----------
    cfg : OfdmConfig
        ``cfg.L`` is the tap count the antenna-blind model assumes.
    pilots : numpy.ndarray
        ``(K, L_t, N_t)`` pilot symbols ``x[k, t]``.
    f_k, q_k, chol_k : numpy.ndarray
        Per-subcarrier fronts and noise Cholesky factors, each ``(K, n, n)``.
    L_true : int, optional
        Tap count of the propagation channel (used by ``M`` and ``C1``);
        defaults to ``cfg.L``.
    """
    K, L, L_t = cfg.K, cfg.L, cfg.L_t
    L_true = L if L_true is None else L_true
    pilots = np.asarray(pilots, dtype=np.complex128)
    if pilots.shape != (K, L_t, cfg.n_t):
        raise DimensionMismatch(f"pilots must be {(K, L_t, cfg.n_t)}, got {pilots.shape}")
    for name, arr, n in (("F", f_k, cfg.n_t), ("Q", q_k, cfg.n_r), ("L", chol_k, cfg.n_r)):
        if np.shape(arr) != (K, n, n):
            raise DimensionMismatch(f"{name}[k] stack must be {(K, n, n)}")
    eye_r = np.eye(cfg.n_r)
    p_k_mats = [np.linalg.solve(chol_k[k], q_k[k]) for k in range(K)]
    rows_b, rows_bp, rows_m = [], [], []
    for t in range(L_t):
        for k in range(K):
            x = pilots[k, t]
            rows_b.append(np.kron(np.kron(_u(k, K, L), x), eye_r))
            sel = np.zeros(K)
            sel[k] = 1.0
            rows_bp.append(np.kron(np.kron(sel, x), eye_r))
            rows_m.append(np.kron(np.kron(_u(k, K, L_true), f_k[k] @ x), p_k_mats[k]))
    c2_true, p_k, p_l, dft = time_to_freq(cfg, L_true)
    d = front_blockdiag(f_k, q_k)
    c2, *_ = time_to_freq(cfg, L)
    return McStacking(
        B_mat=np.vstack(rows_b),
        B_prime=np.vstack(rows_bp),
        M=np.vstack(rows_m),
        C1=d @ c2_true,
        C2=c2,
        D=d,
        P_K=p_k,
        P_L=p_l,
        partial_dft=dft,
    )


def freq_covariance_and_constants(c1, cfg: OfdmConfig, chain: RfChain, L_true: int | None = None):
    """``R = C1 C1^H`` and the blind constants ``c3`` and ``c4``.

    ``c4`` is the per-coefficient time-domain power: the frequency-domain
    trace divided by ``K`` (Parseval for the unnormalised DFT) and by the
    number of time-domain coefficients ``N_r N_t L``.
    """
    L_true = cfg.L if L_true is None else L_true
    r = c1 @ c1.conj().T
    r = 0.5 * (r + r.conj().T)
    c3 = chain.bandwidth / cfg.K * chain.matched_psd
    c4 = float(np.real(np.trace(r))) / (cfg.K * cfg.n_r * cfg.n_t * L_true)
    return r, c3, c4


def ab_gain_ofdm(b_mat, rho: float, c3: float, c4: float) -> np.ndarray:
    """``W_AB^H`` of the truncated-tap blind model."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return _scaled_identity_gain(b_mat, rho, c3, c4)


def ab_estimate_ofdm(y_bar, b_mat, rho: float, c3: float, c4: float) -> np.ndarray:
    """Time-domain estimate of ``vec(Hbar_eff)`` (``L`` taps)."""
    return ab_gain_ofdm(b_mat, rho, c3, c4) @ np.asarray(y_bar)


def _mismatched_mse_blocks(g, a_true, rho: float, r_true, noise_blocks) -> np.ndarray:
    """Four-term mismatched MSE with block-diagonal noise given as a block stack."""
    ga = g @ a_true
    cross = math.sqrt(rho) * ga @ r_true
    m, n = g.shape
    nb, b, _ = noise_blocks.shape
    if nb * b != n:
        raise DimensionMismatch("noise blocks do not cover the observation vector")
    gn = np.einsum("mib,ibc->mic", g.reshape(m, nb, b), noise_blocks).reshape(m, n)
    e = r_true - cross.conj().T - cross + gn @ g.conj().T + rho * ga @ r_true @ ga.conj().T
    return 0.5 * (e + e.conj().T)


def ab_mse_ofdm(st: McStacking, rho: float, c3: float, c4: float, r_freq, r_noise) -> np.ndarray:
    """Frequency-domain error covariance of the blind estimate mapped by ``C2``.

    ``r_noise`` is either the dense block-diagonal noise covariance or the
    stack of its ``N_r x N_r`` diagonal blocks in observation order.
    """
    gain = st.C2 @ ab_gain_ofdm(st.B_mat, rho, c3, c4)
    r_noise = np.asarray(r_noise)
    if r_noise.ndim == 3:
        return _mismatched_mse_blocks(gain, st.B_prime, rho, r_freq, r_noise)
    return mismatched_mse(gain, st.B_prime, rho, r_freq, r_noise)


def aa_gain_ofdm(m, rho: float) -> np.ndarray:
    """``W_AA^H`` with whitened noise and ``R_Hbar = I``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return _scaled_identity_gain(m, rho, 1.0, 1.0)


def aa_estimate_ofdm(y_bar_prime, m, rho: float, c1=None):
    """Estimate ``vec(Hbar)``; with ``c1`` also return ``C1 vec(Hbar)``."""
    h = aa_gain_ofdm(m, rho) @ np.asarray(y_bar_prime)
    return h if c1 is None else (h, c1 @ h)


def aa_mse_ofdm(m, rho: float, c1) -> tuple[np.ndarray, np.ndarray]:
    """``E_AA = I - rho M^H (I + rho M M^H)^-1 M`` and ``C1 E_AA C1^H``."""
    m = np.asarray(m)
    n = m.shape[1]
    # (I + rho M^H M)^-1 equals the expression above (push-through identity)
    e = mk.hermitian_solve(np.eye(n) + rho * m.conj().T @ m, np.eye(n))
    e = 0.5 * (e + e.conj().T)
    e_eff = c1 @ e @ c1.conj().T
    return e, 0.5 * (e_eff + e_eff.conj().T)


def tap_spreading_energy(f_k, q_k, taps: TapChannel) -> float:
    """Fraction of effective-channel energy beyond the first ``L`` taps.

    ``Q[k] H[k] F[k]`` is taken back to the time domain by a length-``K``
    inverse DFT.
    """
    K = len(f_k)
    h_k = taps_to_freq(taps, K)
    eff = np.einsum("kij,kjl,klm->kim", q_k, h_k, f_k)
    time = np.fft.ifft(eff, axis=0)
    energy = np.sum(np.abs(time) ** 2, axis=(1, 2))
    total = float(np.sum(energy))
    if total == 0:
        return 0.0
    return float(np.sum(energy[taps.L :]) / total)


@dataclass(frozen=True)
class OfdmProblem:
    """One OFDM operating point: arrays sampled at ``f_k`` plus pilots."""

    cfg: OfdmConfig
    s_t_k: np.ndarray
    s_r_k: np.ndarray
    chain: RfChain
    rho: float
    pilots: np.ndarray
    L_true: int

    def prepare(self) -> OfdmEstimators:
        cfg = self.cfg
        f_k, q_k = per_subcarrier_fronts(self.s_t_k, self.s_r_k, self.chain.beta)
        r_n_k = np.stack([discrete_noise(s, self.chain, cfg.K) for s in self.s_r_k])
        chol_k = np.stack([mk.cholesky_lower(r) for r in r_n_k])
        st = build_stacking(cfg, self.pilots, f_k, q_k, chol_k, L_true=self.L_true)
        r_freq, c3, c4 = freq_covariance_and_constants(st.C1, cfg, self.chain, self.L_true)
        return OfdmEstimators(
            problem=self,
            stacking=st,
            F_k=f_k,
            Q_k=q_k,
            R_n_k=r_n_k,
            chol_k=chol_k,
            R_freq=r_freq,
            c3=c3,
            c4=c4,
            W_ab_h=ab_gain_ofdm(st.B_mat, self.rho, c3, c4),
            W_aa_h=aa_gain_ofdm(st.M, self.rho),
        )


@dataclass(frozen=True)
class OfdmEstimators:
    problem: OfdmProblem
    stacking: McStacking
    F_k: np.ndarray
    Q_k: np.ndarray
    R_n_k: np.ndarray
    chol_k: np.ndarray
    R_freq: np.ndarray
    c3: float
    c4: float
    W_ab_h: np.ndarray
    W_aa_h: np.ndarray

    def noise_blocks(self) -> np.ndarray:
        """Per-observation noise blocks, subcarrier fastest then time slot."""
        return np.concatenate([self.R_n_k] * self.problem.cfg.L_t)

    def noise_blockdiag(self) -> np.ndarray:
        return mk.block_diag(list(self.noise_blocks()))

    def effective_freq(self, taps: TapChannel) -> np.ndarray:
        """Per-subcarrier ``Q[k] H[k] F[k]``, shape ``(K, N_r, N_t)``."""
        h_k = taps_to_freq(taps, self.problem.cfg.K)
        return np.einsum("kij,kjl,klm->kim", self.Q_k, h_k, self.F_k)

    def observe(self, h_eff_k, rng) -> np.ndarray:
        """Stacked ``y[k, t] = sqrt(rho) H_eff[k] x[k, t] + n[k, t]``."""
        cfg = self.problem.cfg
        x = self.problem.pilots
        n_r = cfg.n_r
        w = rng.standard_normal((cfg.L_t, cfg.K, n_r)) + 1j * rng.standard_normal((cfg.L_t, cfg.K, n_r))
        noise = np.einsum("kij,tkj->tki", self.chol_k, w / math.sqrt(2))
        sig = np.einsum("kij,ktj->tki", h_eff_k, x) * math.sqrt(self.problem.rho)
        return (sig + noise).reshape(-1)

    def whiten(self, y_bar) -> np.ndarray:
        cfg = self.problem.cfg
        y = np.asarray(y_bar).reshape(cfg.L_t, cfg.K, cfg.n_r)
        out = np.stack([np.linalg.solve(self.chol_k[k], y[:, k, :].T).T for k in range(cfg.K)], axis=1)
        return out.reshape(-1)

    def estimate_ab_freq(self, y_bar) -> np.ndarray:
        return self.stacking.C2 @ (self.W_ab_h @ y_bar)

    def estimate_aa_freq(self, y_bar) -> np.ndarray:
        return self.stacking.C1 @ (self.W_aa_h @ self.whiten(y_bar))

    def mse_ab(self) -> np.ndarray:
        return _mismatched_mse_blocks(
            self.stacking.C2 @ self.W_ab_h, self.stacking.B_prime, self.problem.rho, self.R_freq,
            self.noise_blocks(),
        )

    def mse_aa(self) -> np.ndarray:
        return aa_mse_ofdm(self.stacking.M, self.problem.rho, self.stacking.C1)[1]

    def nmse_theory(self) -> dict[str, float]:
        power = float(np.real(np.trace(self.R_freq)))
        return {
            "AB": float(np.real(np.trace(self.mse_ab()))) / power,
            "AA": float(np.real(np.trace(self.mse_aa()))) / power,
        }


def ofdm_pilots(cfg: OfdmConfig, power: float, rho_k=None, rho: float | None = None, seed=None) -> np.ndarray:
    """i.i.d. BPSK pilots ``(K, L_t, N_t)`` with per-symbol power ``power``.

    When per-subcarrier large-scale gains ``rho_k`` are given, the pilots on
    subcarrier ``k`` are scaled by ``sqrt(rho_k / rho)`` so that one common
    ``rho`` can be used by the estimators.
    """
    rng = np.random.default_rng(seed)
    x = rng.choice((-1.0, 1.0), size=(cfg.K, cfg.L_t, cfg.n_t)) * math.sqrt(power / cfg.n_t)
    if rho_k is not None:
        x = x * np.sqrt(np.asarray(rho_k) / rho)[:, None, None]
    return x.astype(np.complex128)
