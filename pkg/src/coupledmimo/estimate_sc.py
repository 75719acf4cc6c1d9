"""Single-carrier LMMSE channel estimation.

The antenna-blind (AB) estimator assumes white noise ``c1 I`` and an
uncorrelated effective channel ``c2 I``. The antenna-aware (AA) estimator
whitens the coloured noise, estimates the propagation channel with its true
Kronecker covariance and maps the result through ``T = F^T kron Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import matrixkit as mk
from .channel import LinkModel, RfChain
from .errors import DimensionMismatch


@dataclass(frozen=True)
class PilotBlock:
    """Pilot matrix ``X`` (``N_t x N_p``)."""

    X: np.ndarray

    @property
    def n_p(self) -> int:
        return self.X.shape[1]

    @property
    def n_t(self) -> int:
        return self.X.shape[0]

    @classmethod
    def bpsk(cls, n_t: int, n_p: int, power: float = 1.0, seed=None) -> PilotBlock:
        """i.i.d. BPSK pilots scaled so each symbol vector has power ``power``."""
        rng = np.random.default_rng(seed)
        signs = rng.choice((-1.0, 1.0), size=(n_t, n_p))
        return cls(signs * math.sqrt(power / n_t) + 0j)

    @classmethod
    def orthogonal(cls, n_t: int, n_p: int, power: float = 1.0) -> PilotBlock:
        """DFT-based pilots with ``X X^H = (n_p power / n_t) I``; needs ``n_p >= n_t``."""
        if n_p < n_t:
            raise ValueError("orthogonal pilots need n_p >= n_t")
        idx = np.arange(n_t)[:, None] * np.arange(n_p)[None, :]
        return cls(np.exp(-2j * np.pi * idx / n_p) * math.sqrt(power / n_t))


@dataclass(frozen=True)
class ScEstimate:
    vec_H_eff_hat: np.ndarray
    method: Literal["AB", "AA"]
    vec_H_hat: np.ndarray | None = None

    def matrix(self, n_r: int, n_t: int) -> np.ndarray:
        return mk.unvec(self.vec_H_eff_hat, n_r, n_t)


def stack_observations(y, pilots: PilotBlock) -> tuple[np.ndarray, np.ndarray]:
    """``y~ = vec(Y)`` and ``A = X^T kron I_{N_r}``."""
    y = np.asarray(y, dtype=np.complex128)
    if y.ndim != 2 or y.shape[1] != pilots.n_p:
        raise DimensionMismatch(f"Y must be N_r x {pilots.n_p}, got {y.shape}")
    return mk.vec(y), np.kron(pilots.X.T, np.eye(y.shape[0]))


def mismatch_constants(r_heff, chain: RfChain) -> tuple[float, float]:
    """``c1`` (matched-array noise power) and ``c2`` (mean channel power)."""
    c1 = chain.bandwidth * chain.matched_psd
    c2 = float(np.real(np.trace(r_heff))) / r_heff.shape[0]
    return c1, c2


def lmmse_gain(a, rho: float, r_x, r_n) -> np.ndarray:
    """``W^H`` for ``y = sqrt(rho) A x + n``: ``sqrt(rho) R_x A^H (R_n + rho A R_x A^H)^-1``."""
    a = np.asarray(a)
    cov = r_n + rho * a @ r_x @ a.conj().T
    # W^H = (cov^-1 A R_x)^H sqrt(rho); cov and R_x Hermitian
    return math.sqrt(rho) * mk.hermitian_solve(cov, a @ r_x).conj().T


def _scaled_identity_gain(a, rho: float, noise: float, prior: float) -> np.ndarray:
    """LMMSE gain for white noise and white prior via the smaller normal system."""
    a = np.asarray(a)
    m, n = a.shape
    if m <= n:
        return lmmse_gain(a, rho, prior * np.eye(n), noise * np.eye(m))
    # sqrt(rho) (noise/prior I + rho A^H A)^-1 A^H
    return math.sqrt(rho) * mk.hermitian_solve(noise / prior * np.eye(n) + rho * a.conj().T @ a, a.conj().T)


def ab_gain(a, rho: float, c1: float, c2: float) -> np.ndarray:
    """``W_AB^H`` for assumed noise ``c1 I`` and channel covariance ``c2 I``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return _scaled_identity_gain(a, rho, c1, c2)


def ab_estimate(y_tilde, a, rho: float, c1: float, c2: float) -> ScEstimate:
    return ScEstimate(ab_gain(a, rho, c1, c2) @ np.asarray(y_tilde), "AB")


def mismatched_mse(
    gain, a_true, rho: float, r_true, r_n_true, out_map=None
) -> np.ndarray:
    """Error covariance of ``out_map @ gain @ y`` estimating ``x``.

    ``y = sqrt(rho) a_true x + n`` with ``x ~ (0, r_true)``, ``n ~ (0, r_n_true)``.
    Expands to the four-term mismatched MSE
    ``R - sqrt(rho) R A'^H G^H - sqrt(rho) G A' R + G (R_n + rho A' R A'^H) G^H``.
    """
    g = np.asarray(gain) if out_map is None else np.asarray(out_map) @ gain
    cross = math.sqrt(rho) * g @ a_true @ r_true
    e = (
        r_true
        - cross.conj().T
        - cross
        + g @ (r_n_true + rho * a_true @ r_true @ a_true.conj().T) @ g.conj().T
    )
    return 0.5 * (e + e.conj().T)


def ab_mse_matrix(a, rho: float, c1: float, c2: float, r_heff_true, r_n_true) -> np.ndarray:
    """AB error covariance; ``r_n_true`` is the per-snapshot noise covariance."""
    n_p = a.shape[0] // r_n_true.shape[0]
    r_noise = np.kron(np.eye(n_p), r_n_true)
    return mismatched_mse(ab_gain(a, rho, c1, c2), a, rho, r_heff_true, r_noise)


def aa_sensing(pilots: PilotBlock, model: LinkModel) -> tuple[np.ndarray, np.ndarray]:
    """Whitening factor ``L`` and ``A' = (F X)^T kron (L^-1 Q)``."""
    chol = mk.cholesky_lower(model.R_n)
    p = np.linalg.solve(chol, model.Q)
    return chol, np.kron((model.F @ pilots.X).T, p)


def aa_gain(a_prime, rho: float, r_h) -> np.ndarray:
    """``W_AA^H`` for whitened noise (identity) and channel covariance ``R_H``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    return lmmse_gain(a_prime, rho, r_h, np.eye(a_prime.shape[0]))


def aa_estimate(y, pilots: PilotBlock, model: LinkModel, rho: float | None = None) -> ScEstimate:
    """Antenna-aware estimate of ``vec(H_eff)`` (and of ``vec(H)``)."""
    rho = model.rho if rho is None else rho
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (model.n_r, pilots.n_p):
        raise DimensionMismatch(f"Y must be {(model.n_r, pilots.n_p)}, got {y.shape}")
    r_h, _, t = model.covariances()
    chol, a_prime = aa_sensing(pilots, model)
    y_white = np.linalg.solve(chol, y)
    h_hat = aa_gain(a_prime, rho, r_h) @ mk.vec(y_white)
    return ScEstimate(t @ h_hat, "AA", vec_H_hat=h_hat)


def aa_mse_matrices(a_prime, rho: float, r_h, t) -> tuple[np.ndarray, np.ndarray]:
    """``E_AA = R_H - rho R_H A'^H (I + rho A' R_H A'^H)^-1 A' R_H`` and ``T E_AA T^H``."""
    cov = np.eye(a_prime.shape[0]) + rho * a_prime @ r_h @ a_prime.conj().T
    ar = a_prime @ r_h
    e = r_h - rho * ar.conj().T @ mk.hermitian_solve(cov, ar)
    e = 0.5 * (e + e.conj().T)
    e_eff = t @ e @ t.conj().T
    return e, 0.5 * (e_eff + e_eff.conj().T)


@dataclass(frozen=True)
class ScProblem:
    """Everything both single-carrier estimators need at one operating point."""

    model: LinkModel
    pilots: PilotBlock
    chain: RfChain

    def __post_init__(self):
        if self.pilots.n_t != self.model.n_t:
            raise DimensionMismatch("pilot rows must equal N_t")

    @property
    def rho(self) -> float:
        return self.model.rho

    def prepare(self) -> ScEstimators:
        r_h, r_heff, t = self.model.covariances()
        c1, c2 = mismatch_constants(r_heff, self.chain)
        a = np.kron(self.pilots.X.T, np.eye(self.model.n_r))
        chol, a_prime = aa_sensing(self.pilots, self.model)
        return ScEstimators(
            problem=self,
            A=a,
            A_prime=a_prime,
            chol=chol,
            c1=c1,
            c2=c2,
            R_H=r_h,
            R_Heff=r_heff,
            T=t,
            W_ab_h=ab_gain(a, self.rho, c1, c2),
            W_aa_h=aa_gain(a_prime, self.rho, r_h),
        )


@dataclass(frozen=True)
class ScEstimators:
    """Precomputed AB/AA gains; applying them is a pure function of ``Y``."""

    problem: ScProblem
    A: np.ndarray
    A_prime: np.ndarray
    chol: np.ndarray
    c1: float
    c2: float
    R_H: np.ndarray
    R_Heff: np.ndarray
    T: np.ndarray
    W_ab_h: np.ndarray
    W_aa_h: np.ndarray

    def observe(self, h_eff, rng) -> np.ndarray:
        """Pilot observation ``Y = sqrt(rho) H_eff X + N`` with coloured noise."""
        x = self.problem.pilots.X
        n_r = h_eff.shape[0]
        w = (rng.standard_normal((n_r, x.shape[1])) + 1j * rng.standard_normal((n_r, x.shape[1])))
        noise = self.chol @ (w / math.sqrt(2))
        return math.sqrt(self.problem.rho) * h_eff @ x + noise

    def estimate_ab(self, y) -> np.ndarray:
        return self.W_ab_h @ mk.vec(y)

    def estimate_aa(self, y) -> np.ndarray:
        y_white = np.linalg.solve(self.chol, y)
        return self.T @ (self.W_aa_h @ mk.vec(y_white))

    def mse_ab(self) -> np.ndarray:
        n_p = self.problem.pilots.n_p
        r_noise = np.kron(np.eye(n_p), self.problem.model.R_n)
        return mismatched_mse(self.W_ab_h, self.A, self.problem.rho, self.R_Heff, r_noise)

    def mse_aa(self) -> np.ndarray:
        return aa_mse_matrices(self.A_prime, self.problem.rho, self.R_H, self.T)[1]

    def nmse_theory(self) -> dict[str, float]:
        power = float(np.real(np.trace(self.R_Heff)))
        return {
            "AB": float(np.real(np.trace(self.mse_ab()))) / power,
            "AA": float(np.real(np.trace(self.mse_aa()))) / power,
        }
