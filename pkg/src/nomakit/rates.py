"""Closed-form achievable rates for NOMA, the Gaussian MAC and RSMA (bits/use)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class RatePoint:
    per_user: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "per_user", tuple(float(r) for r in self.per_user))
        if any(r < 0 for r in self.per_user):
            raise ValueError("rates must be nonnegative")

    @property
    def sum(self) -> float:
        return math.fsum(self.per_user)


def _log2p(x: float) -> float:
    return math.log2(1.0 + x)


def noma_downlink_rates(powers, gains2, sigma2: float) -> RatePoint:
    """Downlink SIC rates with user 1 the strongest.

    User ``k`` removes users ``k+1..K`` and treats users ``1..k-1`` as noise.
    """
    P = [float(p) for p in powers]
    g = [float(x) for x in gains2]
    if len(P) != len(g) or not P:
        raise ValueError("powers and gains2 must be non-empty and of equal length")
    if any(a < b for a, b in zip(g, g[1:])):
        raise ValueError("gains2 must be sorted non-increasing (user 1 strongest)")
    if any(x <= 0 for x in g) or any(p < 0 for p in P) or not sigma2 > 0:
        raise ValueError("gains and sigma2 must be positive, powers nonnegative")
    rates = []
    for k in range(len(P)):
        interference = g[k] * math.fsum(P[:k])
        rates.append(_log2p(P[k] * g[k] / (interference + sigma2)))
    return RatePoint(tuple(rates))


def mac_region_vertices(P1, P2, g1sq, g2sq, sigma2) -> tuple[RatePoint, RatePoint]:
    """Corner points of the two-user Gaussian MAC pentagon.

    Vertex A decodes user 2 first (user 1 then sees no interference); vertex
    B decodes user 1 first.
    """
    s1, s2 = P1 * g1sq / sigma2, P2 * g2sq / sigma2
    a = RatePoint((_log2p(s1), _log2p(s2 / (s1 + 1.0))))
    b = RatePoint((_log2p(s1 / (s2 + 1.0)), _log2p(s2)))
    return a, b


@dataclass(frozen=True)
class RsmaDownConfig:
    """Single-layer downlink RSMA with ``K`` users and ``M`` transmit antennas.

    ``channels[k]`` is ``h_k`` (user ``k`` receives ``h_k^H x``); precoders
    carry the stream powers.
    """

    channels: np.ndarray
    common_precoder: np.ndarray
    private_precoders: np.ndarray
    sigma2: float
    common_shares: tuple[float, ...] = field(default=())

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.channels, dtype=complex))
        pc = np.asarray(self.common_precoder, dtype=complex).reshape(-1)
        Pp = np.atleast_2d(np.asarray(self.private_precoders, dtype=complex))
        K, M = H.shape
        if pc.shape != (M,) or Pp.shape != (K, M):
            raise ValueError("expected channels K x M, common precoder M, private precoders K x M")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        shares = tuple(self.common_shares) or (1.0 / K,) * K
        if len(shares) != K or any(s < 0 for s in shares) or abs(math.fsum(shares) - 1.0) > 1e-12:
            raise ValueError("common_shares must be K nonnegative values summing to 1")
        object.__setattr__(self, "channels", H)
        object.__setattr__(self, "common_precoder", pc)
        object.__setattr__(self, "private_precoders", Pp)
        object.__setattr__(self, "common_shares", tuple(float(s) for s in shares))


def rsma_downlink_rates(cfg: RsmaDownConfig) -> tuple[float, list[float], list[float]]:
    """Return ``(R_c, private rates, per-user totals)``."""
    # gain[k, l] = |h_k^H p_l|^2
    gain = np.abs(cfg.channels.conj() @ cfg.private_precoders.T) ** 2
    common = np.abs(cfg.channels.conj() @ cfg.common_precoder) ** 2
    all_private = gain.sum(axis=1)
    r_common = np.log2(1.0 + common / (all_private + cfg.sigma2))
    own = np.diag(gain)
    private = np.log2(1.0 + own / (all_private - own + cfg.sigma2))
    R_c = float(r_common.min())
    totals = [float(p) + s * R_c for p, s in zip(private, cfg.common_shares)]
    return R_c, [float(p) for p in private], totals


def tin_rates(channels, precoders, sigma2: float) -> list[float]:
    """Treat-interference-as-noise rates, ``log2(1 + |h_k^H p_k|^2 / (Σ_{l≠k}|h_k^H p_l|^2 + σ²))``."""
    H = np.atleast_2d(np.asarray(channels, dtype=complex))
    Pp = np.atleast_2d(np.asarray(precoders, dtype=complex))
    out = []
    for k in range(H.shape[0]):
        hk = H[k]
        terms = [abs(np.vdot(hk, Pp[l])) ** 2 for l in range(H.shape[0])]
        interf = math.fsum(t for l, t in enumerate(terms) if l != k)
        out.append(_log2p(terms[k] / (interf + sigma2)))
    return out


@dataclass(frozen=True)
class RsmaUpConfig:
    """Uplink rate splitting: users ``0..K-2`` send two streams, user ``K-1`` one.

    Streams are named ``(k, i)``: ``i`` in ``(0, 1)`` for split users and
    ``i == 0`` for the last user. ``split_powers[k]`` is ``(P_k1, P_k2)`` for a
    split user and ``(P_K,)`` for the last. ``filters`` maps stream to receive
    vector; missing entries default to the matched filter ``h/||h||``.
    ``order`` lists every stream once, first decoded first.
    """

    channels: np.ndarray
    split_powers: tuple[tuple[float, ...], ...]
    order: tuple[tuple[int, int], ...]
    sigma2: float
    filters: dict = field(default_factory=dict)

    def __post_init__(self):
        H = np.asarray(self.channels, dtype=complex)
        if H.ndim == 1:
            H = H[:, None]
        object.__setattr__(self, "channels", H)
        K = H.shape[0]
        powers = tuple(tuple(float(p) for p in ps) for ps in self.split_powers)
        if len(powers) != K:
            raise ValueError("one power entry per user is required")
        if any(len(ps) != 2 for ps in powers[:-1]) or len(powers[-1]) != 1:
            raise ValueError("split users need two powers and the last user one")
        if any(p < 0 for ps in powers for p in ps):
            raise ValueError("powers must be nonnegative")
        object.__setattr__(self, "split_powers", powers)
        order = tuple((int(k), int(i)) for k, i in self.order)
        if sorted(order) != sorted(self.streams):
            raise ValueError("order must list every stream exactly once")
        object.__setattr__(self, "order", order)
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def users(self) -> int:
        return self.channels.shape[0]

    @property
    def streams(self) -> list[tuple[int, int]]:
        K = self.users
        return [(k, i) for k in range(K - 1) for i in (0, 1)] + [(K - 1, 0)]

    def power(self, stream) -> float:
        k, i = stream
        return self.split_powers[k][i]

    def filter(self, stream) -> np.ndarray:
        if stream in self.filters:
            return np.asarray(self.filters[stream], dtype=complex).reshape(-1)
        h = self.channels[stream[0]]
        return h / np.linalg.norm(h)


def rsma_uplink_stream_rates(cfg: RsmaUpConfig) -> dict:
    """Rate of every stream under successive decoding in ``cfg.order``.

    Stream ``(k, i)`` is filtered by ``w``; streams decoded later act as noise:
    ``log2(1 + P_ki |w^H h_k|^2 / (Σ_later P |w^H h_k'|^2 + σ²||w||²))``.
    """
    out = {}
    for pos, s in enumerate(cfg.order):
        w = cfg.filter(s)
        sig = cfg.power(s) * abs(np.vdot(w, cfg.channels[s[0]])) ** 2
        interf = math.fsum(cfg.power(t) * abs(np.vdot(w, cfg.channels[t[0]])) ** 2
                           for t in cfg.order[pos + 1:])
        noise = cfg.sigma2 * float(np.vdot(w, w).real)
        out[s] = _log2p(sig / (interf + noise))
    return out


def rsma_uplink_rates(cfg: RsmaUpConfig) -> RatePoint:
    streams = rsma_uplink_stream_rates(cfg)
    per_user = [0.0] * cfg.users
    for (k, _), r in streams.items():
        per_user[k] += r
    return RatePoint(tuple(per_user))


def rsma_uplink_split_sweep(P1, P2, g1sq, g2sq, sigma2, grid_size: int = 11) -> list[RatePoint]:
    """Trace the MAC dominant face by splitting user 1's power.

    Split ``q`` goes to stream ``(0, 0)``, decoded first, then user 2, then
    stream ``(0, 1)`` with ``P1 - q``. ``q = 0`` gives vertex A and ``q = P1``
    vertex B of :func:`mac_region_vertices`.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    channels = np.array([[math.sqrt(g1sq)], [math.sqrt(g2sq)]], dtype=complex)
    order = ((0, 0), (1, 0), (0, 1))
    points = []
    for q in np.linspace(0.0, P1, grid_size):
        q = float(q)
        cfg = RsmaUpConfig(channels, ((q, max(P1 - q, 0.0)), (P2,)), order, sigma2)
        points.append(rsma_uplink_rates(cfg))
    return points


def mcs_spectral_efficiency(M: int, r) -> float:
    """Bits per symbol ``r * log2(M)`` of an M-ary modulation at code rate ``r``."""
    if M < 2 or M & (M - 1):
        raise ValueError("M must be a power of two")
    r = Fraction(r) if isinstance(r, (int, str, Fraction)) else r
    if not 0 < r <= 1:
        raise ValueError("code rate must lie in (0, 1]")
    return float(r) * (M.bit_length() - 1)
