"""Achievable rates with SVD precoding built from channel estimates.

The transmitter and receiver both know the estimate (TDD reciprocity).
Streams are formed from the SVD of the whitened estimate, power is
water-filled over the estimated gains, and the residual inter-stream
leakage caused by estimation error is treated as extra Gaussian noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matrixkit as mk
from .errors import AllZeroGains, DimensionMismatch

BISECTION_TOL = 1e-12
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class PowerAllocation:
    powers: np.ndarray
    budget: float
    water_level: float


@dataclass(frozen=True)
class RateReport:
    rate_bpcu: float
    per_stream_sinr: np.ndarray
    per_subcarrier_power: np.ndarray = field(default_factory=lambda: np.zeros(0))


def waterfill(gains, budget: float) -> PowerAllocation:
    """Maximise ``sum log(1 + g_j P_j)`` subject to ``sum P_j = budget``.

    Returns ``P_j = max(0, mu - 1/g_j)``. Bisection on the water level
    ``mu`` over ``(0, budget + min 1/g_j]`` selects the active streams; their
    powers then follow in closed form, so the budget is met to rounding.

    Raises
    ------
    AllZeroGains
        If no gain is positive.
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or np.any(~np.isfinite(g)) or np.any(g < 0):
        raise ValueError("gains must be a finite non-negative vector")
    if not budget > 0:
        raise ValueError("budget must be positive")
    active = g > 0
    if not np.any(active):
        raise AllZeroGains("every channel gain is zero")
    inv = np.full_like(g, np.inf)
    with np.errstate(over="ignore"):  # gains below ~1e-308 act as dead streams
        inv[active] = 1.0 / g[active]
    if not np.any(np.isfinite(inv)):
        p = np.zeros_like(g)
        p[np.argmax(g)] = budget
        return PowerAllocation(p, float(budget), float("inf"))

    def used(mu: float) -> float:
        return float(np.sum(np.clip(mu - inv, 0.0, None)))

    lo, hi = 0.0, budget + float(np.min(inv[active]))
    # the upper end always over-fills: the strongest stream alone takes >= budget
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if used(mid) > budget:
            hi = mid
        else:
            lo = mid
        if hi - lo <= BISECTION_TOL * max(1.0, hi):
            break
    on = inv < 0.5 * (lo + hi)
    on[np.argmax(g)] = True
    p = np.zeros_like(g)
    while True:
        # P_i = (budget + sum_j (1/g_j - 1/g_i)) / m; the pairwise differences
        # keep precision when 1/g is far larger than the budget
        inv_on = inv[on]
        if inv_on.size == 1:
            p_on = np.array([float(budget)])
            break
        p_on = (budget + np.sum(inv_on[None, :] - inv_on[:, None], axis=1)) / inv_on.size
        if np.all(p_on > 0):
            break
        on[np.flatnonzero(on)[np.argmin(p_on)]] = False
    p[on] = p_on
    return PowerAllocation(p, float(budget), float(np.mean(p_on + inv_on)))


def _whitened_svd(h_hat, r_n):
    chol = mk.cholesky_lower(r_n)
    u, s, v = mk.svd(np.linalg.solve(chol, h_hat))
    return chol, u, s, v


def _stream_sinr(g_true, u, v, powers, snr_scale: float) -> np.ndarray:
    """SINR of each stream when precoding/combining with ``v``/``u``."""
    n_s = powers.size
    coupling = np.abs(u[:, :n_s].conj().T @ g_true @ v[:, :n_s]) ** 2
    signal = snr_scale * powers * np.diag(coupling)
    leak = snr_scale * (coupling @ powers) - signal
    return signal / (1.0 + leak)


def sc_rate_lower_bound(h_true, h_hat, r_n, rho: float, p_t: float) -> RateReport:
    """Rate in bits per channel use with SVD precoding from ``h_hat``.

    Parameters
    ----------
    h_true, h_hat : array_like
        True and estimated effective channels (``N_r x N_t``).
    r_n : array_like
        Noise covariance at the receiver.
    rho : float
        Large-scale gain.
    p_t : float
        Total transmit power in watts.
    """
    h_true = mk.as_cmat(h_true, "H_true")
    h_hat = mk.as_cmat(h_hat, "H_hat")
    if h_true.shape != h_hat.shape:
        raise DimensionMismatch("true and estimated channels differ in shape")
    n_r, n_t = h_true.shape
    n_s = min(n_r, n_t)
    chol, u, s, v = _whitened_svd(h_hat, r_n)
    scale = rho * p_t / n_t
    alloc = waterfill(scale * s[:n_s] ** 2, n_t)
    sinr = _stream_sinr(np.linalg.solve(chol, h_true), u, v, alloc.powers, scale)
    return RateReport(float(np.sum(np.log2(1.0 + sinr))), sinr, np.array([alloc.budget]))


def ofdm_rate_lower_bound(h_true_k, h_hat_k, r_n_k, rho: float, p_t: float) -> RateReport:
    """Rate with water-filling jointly over space and frequency.

    The budget is ``K N_t``; the rate is averaged over the ``K`` subcarriers.
    ``rho`` is the common large-scale gain; any frequency dependence is
    assumed to be absorbed in the channels.
    """
    h_true_k = np.asarray(h_true_k, dtype=np.complex128)
    h_hat_k = np.asarray(h_hat_k, dtype=np.complex128)
    if h_true_k.shape != h_hat_k.shape or h_true_k.ndim != 3:
        raise DimensionMismatch("channel stacks must both be (K, N_r, N_t)")
    K, n_r, n_t = h_true_k.shape
    if np.shape(r_n_k) != (K, n_r, n_r):
        raise DimensionMismatch("noise stack must be (K, N_r, N_r)")
    n_s = min(n_r, n_t)
    scale = rho * p_t / n_t
    parts = [_whitened_svd(h_hat_k[k], r_n_k[k]) for k in range(K)]
    gains = np.concatenate([scale * s[:n_s] ** 2 for _, _, s, _ in parts])
    alloc = waterfill(gains, K * n_t)
    powers = alloc.powers.reshape(K, n_s)
    sinr = np.stack(
        [
            _stream_sinr(np.linalg.solve(chol, h_true_k[k]), u, v, powers[k], scale)
            for k, (chol, u, _, v) in enumerate(parts)
        ]
    )
    rate = float(np.sum(np.log2(1.0 + sinr))) / K
    return RateReport(rate, sinr, powers.sum(axis=1))


def capacity(h, r_n, rho: float, p_t: float) -> float:
    """Perfect-CSI rate (the estimate equals the truth)."""
    return sc_rate_lower_bound(h, h, r_n, rho, p_t).rate_bpcu


def dbm_to_watts(dbm) -> float | np.ndarray:
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w) -> float | np.ndarray:
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


__all__ = [
    "PowerAllocation",
    "RateReport",
    "capacity",
    "dbm_to_watts",
    "ofdm_rate_lower_bound",
    "sc_rate_lower_bound",
    "waterfill",
    "watts_to_dbm",
]
