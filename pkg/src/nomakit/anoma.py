"""Asynchronous NOMA: pulse correlations, virtual-MIMO models, rates, detection.

The receiver matched-filters and samples once per symbol in each of ``K``
branches, branch ``k`` synchronised with user ``k``. Stacking the branches
gives the linear model ``y = A s + n`` with ``A = R H`` and ``cov(n) = σ²R``,
where ``R`` is built from Toeplitz blocks of the raised-cosine
autocorrelation of the root-raised-cosine pulse.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

RIDGE_EPS = 1e-10


@dataclass(frozen=True)
class PulseShape:
    rolloff: float = 0.5
    symbol_period: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.rolloff <= 1.0:
            raise ValueError("rolloff must lie in [0, 1]")
        if not self.symbol_period > 0:
            raise ValueError("symbol_period must be positive")


@dataclass(frozen=True)
class DelayProfile:
    """Per-user delays as fractions of the symbol period."""

    taus: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))
        if any(not 0.0 <= t < 1.0 for t in self.taus):
            raise ValueError("every delay must lie in [0, 1)")


class RateConvention(Enum):
    COMPLEX_PER_SYMBOL = "complex_per_symbol"
    REAL_BANDWIDTH_NORMALIZED = "real_bandwidth_normalized"


def rc_autocorrelation(pulse: PulseShape, t) -> np.ndarray | float:
    """Raised-cosine pulse ``g = p * p`` for a unit-energy root-raised-cosine ``p``."""
    T, beta = pulse.symbol_period, pulse.rolloff
    x = np.asarray(t, dtype=float) / T
    den = 1.0 - (2.0 * beta * x) ** 2
    singular = np.isclose(den, 0.0, atol=1e-12)
    safe = np.where(singular, 1.0, den)
    out = np.sinc(x) * np.cos(math.pi * beta * x) / safe
    if beta > 0:
        out = np.where(singular, math.pi / 4 * np.sinc(1.0 / (2.0 * beta)), out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CorrelationBlock:
    entries: np.ndarray = field(repr=False)
    tau: float


def build_correlation_block(pulse: PulseShape, tau: float, N: int) -> CorrelationBlock:
    """``N x N`` Toeplitz block with entry ``(n, m) = g(τT + (m - n)T)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    T = pulse.symbol_period
    lag = np.arange(N)[None, :] - np.arange(N)[:, None]
    entries = np.asarray(rc_autocorrelation(pulse, tau * T + lag * T))
    entries.setflags(write=False)
    return CorrelationBlock(entries, float(tau))


@dataclass(frozen=True)
class StackedModel:
    """Stacked sufficient statistics ``y = observation @ s + n``.

    ``s`` stacks unit-power symbols user by user (``s[k*N:(k+1)*N]`` is user
    ``k``), so powers and channel gains live inside ``observation``. The noise
    covariance is ``σ² * correlation``. ``branch_of_user[k]`` is the sampling
    branch synchronised with user ``k``.
    """

    observation: np.ndarray = field(repr=False)
    correlation: np.ndarray = field(repr=False)
    frame_length: int
    users: int
    branch_of_user: tuple[int, ...]
    gains: tuple[complex, ...]
    powers: tuple[float, ...]
    pulse: PulseShape

    @property
    def branches(self) -> int:
        return self.observation.shape[0] // self.frame_length

    def noise_covariance(self, sigma2: float = 1.0) -> np.ndarray:
        return sigma2 * self.correlation

    def user_columns(self, k: int) -> np.ndarray:
        N = self.frame_length
        return self.observation[:, k * N:(k + 1) * N]

    def branch_rows(self, b: int) -> slice:
        N = self.frame_length
        return slice(b * N, (b + 1) * N)

    def apply(self, symbols: np.ndarray) -> np.ndarray:
        """Noiseless output for symbols shaped ``(K, N)``."""
        return self.observation @ np.asarray(symbols).reshape(-1)


def _branches(taus) -> tuple[list[float], tuple[int, ...]]:
    # users with identical delays produce literally identical samples
    delays: list[float] = []
    owner = []
    for t in taus:
        for b, d in enumerate(delays):
            if math.isclose(t, d, abs_tol=1e-15):
                owner.append(b)
                break
        else:
            owner.append(len(delays))
            delays.append(t)
    return delays, tuple(owner)


def build_virtual_mimo(gains, powers, delays: DelayProfile, pulse: PulseShape, N: int) -> StackedModel:
    """Assemble the uplink asynchronous model for ``K`` users over ``N`` symbols.

    Branch ``b`` (delay ``d_b``) sees user ``l`` through ``h_l √P_l R(τ_l - d_b)``.
    Users sharing a delay share a branch, so the fully synchronous case has a
    single branch and white noise.
    """
    gains = tuple(complex(g) for g in gains)
    powers = tuple(float(p) for p in powers)
    K = len(gains)
    if K < 1 or len(powers) != K or len(delays.taus) != K:
        raise ValueError("gains, powers and delays must have the same length K >= 1")
    if any(p <= 0 for p in powers):
        raise ValueError("powers must be positive")
    branch_delays, owner = _branches(delays.taus)
    B = len(branch_delays)
    obs = np.zeros((B * N, K * N), dtype=complex)
    corr = np.zeros((B * N, B * N))
    for b, db in enumerate(branch_delays):
        for l in range(K):
            blk = build_correlation_block(pulse, delays.taus[l] - db, N).entries
            obs[b * N:(b + 1) * N, l * N:(l + 1) * N] = gains[l] * math.sqrt(powers[l]) * blk
        for c, dc in enumerate(branch_delays):
            corr[b * N:(b + 1) * N, c * N:(c + 1) * N] = build_correlation_block(pulse, dc - db, N).entries
    if np.all(obs.imag == 0):
        obs = obs.real
    obs.setflags(write=False)
    corr.setflags(write=False)
    return StackedModel(obs, corr, N, K, owner, gains, powers, pulse)


def build_beamformed_model(channel_matrix, beams, delays: DelayProfile, pulse: PulseShape, N: int) -> StackedModel:
    """Downlink model with transmit beams; branch ``k`` lives at receiver ``k``.

    ``channel_matrix`` is ``K x M`` with row ``k`` equal to ``h_k^H``; ``beams``
    is ``M x K`` with column ``l`` the beam ``w_l`` (power included). Receiver
    ``k`` sees user ``l`` through ``(h_k^H w_l) R(τ_l - τ_k)``. Receivers have
    independent noise, so the correlation is block diagonal.
    """
    Hh = np.atleast_2d(np.asarray(channel_matrix, dtype=complex))
    W = np.atleast_2d(np.asarray(beams, dtype=complex))
    K = Hh.shape[0]
    if W.shape != (Hh.shape[1], K) or len(delays.taus) != K:
        raise ValueError("expected channel K x M, beams M x K and K delays")
    eff = Hh @ W  # eff[k, l] = h_k^H w_l
    obs = np.zeros((K * N, K * N), dtype=complex)
    for k in range(K):
        for l in range(K):
            blk = build_correlation_block(pulse, delays.taus[l] - delays.taus[k], N).entries
            obs[k * N:(k + 1) * N, l * N:(l + 1) * N] = eff[k, l] * blk
    corr = np.eye(K * N)
    obs.setflags(write=False)
    corr.setflags(write=False)
    return StackedModel(obs, corr, N, K, tuple(range(K)),
                        tuple(complex(v) for v in np.diag(eff)), (1.0,) * K, pulse)


def _logdet2(A: np.ndarray) -> float:
    sign, val = np.linalg.slogdet(A)
    return float(val) / math.log(2.0)


def _regularized(K: np.ndarray) -> np.ndarray:
    w = np.linalg.eigvalsh(K)
    if w.min() > 1e3 * np.finfo(float).eps * max(w.max(), 1.0):
        return K
    warnings.warn("noise covariance is singular; adding a small ridge", RuntimeWarning, stacklevel=3)
    return K + RIDGE_EPS * np.trace(K).real / K.shape[0] * np.eye(K.shape[0])


def _normalizer(model: StackedModel, conv: RateConvention) -> float:
    N = model.frame_length
    if conv is RateConvention.COMPLEX_PER_SYMBOL:
        return 1.0 / N
    return 1.0 / (2.0 * N * (1.0 + model.pulse.rolloff))


def gaussian_rates(model: StackedModel, order, sigma2: float,
                   conv: RateConvention = RateConvention.COMPLEX_PER_SYMBOL,
                   receiver: str = "sic") -> list[float]:
    """Gaussian-input rates under successive decoding in ``order`` (0-based users).

    ``receiver`` picks how the stage decoding user ``k`` sees the users that
    are still undecoded:

    * ``"sic"`` - symbol-by-symbol decoding on branch ``k`` only, residual
      interference energy treated as white Gaussian noise;
    * ``"branch"`` - block decoding on branch ``k`` only, with the coloured
      interference covariance;
    * ``"joint"`` - block decoding on all branches (log-det chain rule; the
      sum rate then does not depend on ``order``).

    All three coincide when delays are equal. Returned rates are indexed by
    user, not by decoding stage.
    """
    K = model.users
    order = [int(k) for k in order]
    if sorted(order) != list(range(K)):
        raise ValueError(f"order must be a permutation of 0..{K - 1}")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    conv = RateConvention(conv)
    scale = _normalizer(model, conv)
    rates = [0.0] * K

    if receiver == "joint":
        # whiten first: logdet(Kn + Σ G G^H) - logdet(Kn) = logdet(I + Σ B B^H)
        # with B = Kn^{-1/2} G, which stays well conditioned when Kn is not
        w, U = np.linalg.eigh(_regularized(model.noise_covariance(sigma2)))
        Wh = (U / np.sqrt(w)).conj().T
        grams = []
        for k in range(K):
            B = Wh @ model.user_columns(k)
            grams.append(B @ B.conj().T)
        eye = np.eye(Wh.shape[0])
        below, base = eye, 0.0
        for k in reversed(order):
            above = below + grams[k]
            top = _logdet2(above)
            rates[k] = scale * (top - base)
            below, base = above, top
        return [max(r, 0.0) for r in rates]

    if receiver not in ("sic", "branch"):
        raise ValueError(f"unknown receiver {receiver!r}")
    N = model.frame_length
    for stage, k in enumerate(order):
        rows = model.branch_rows(model.branch_of_user[k])
        later = order[stage + 1:]
        own = model.user_columns(k)[rows]
        if receiver == "sic":
            signal = np.sum(np.abs(own) ** 2, axis=1)
            interference = sum((np.sum(np.abs(model.user_columns(l)[rows]) ** 2, axis=1)
                                for l in later), np.zeros(N))
            noise = sigma2 * np.real(np.diag(model.correlation[rows, rows]))
            rates[k] = scale * float(np.sum(np.log2(1.0 + signal / (interference + noise))))
        else:
            Kn = sigma2 * model.correlation[rows, rows]
            for l in later:
                G = model.user_columns(l)[rows]
                Kn = Kn + G @ G.conj().T
            rates[k] = scale * (_logdet2(Kn + own @ own.conj().T) - _logdet2(Kn))
    return [max(r, 0.0) for r in rates]


def _whitener(model: StackedModel, rtol: float = 1e-10) -> np.ndarray:
    w, U = np.linalg.eigh(model.correlation)
    keep = w > rtol * w.max()
    return (U[:, keep] / np.sqrt(w[keep])).conj().T


def linear_detect(model: StackedModel, y, method: str = "MMSE", sigma2: float = 1.0) -> np.ndarray:
    """Soft symbol estimates shaped ``(K, N)`` from a ZF or MMSE filter.

    Both filters act on noise-whitened samples; the null space of a singular
    correlation matrix carries neither signal nor noise and is dropped.
    """
    y = np.asarray(y).reshape(-1)
    if y.shape[0] != model.observation.shape[0]:
        raise ValueError("y length does not match the model")
    Wh = _whitener(model)
    A = Wh @ model.observation
    z = Wh @ y
    method = method.upper()
    if method == "ZF":
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise np.linalg.LinAlgError("zero forcing is underdetermined: model is rank deficient")
        est, *_ = np.linalg.lstsq(A, z, rcond=None)
    elif method == "MMSE":
        if not sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        gram = A.conj().T @ A + sigma2 * np.eye(A.shape[1])
        est = np.linalg.solve(gram, A.conj().T @ z)
    else:
        raise ValueError(f"unknown method {method!r}")
    return est.reshape(model.users, model.frame_length)


def tnoma_precoder(R_full) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-directions of a symmetric correlation matrix, strongest first."""
    R = np.asarray(R_full)
    if not np.allclose(R, R.conj().T, atol=1e-12):
        raise ValueError("R_full must be symmetric")
    w, U = np.linalg.eigh(R)
    idx = np.argsort(w)[::-1]
    return U[:, idx], w[idx]
