"""Trellis-coded modulation and joint two-user detection on product trellises.

A trellis is stored as two ``(S, E)`` tables: ``next_state[s, e]`` and
``symbol_index[s, e]``, where ``e`` is the input word written MSB first. Every
state has the same ``E = 2**b`` outgoing edges.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .constellation import Constellation, make_standard
from .link import complex_noise


class Edge(NamedTuple):
    input: str
    next_state: int
    symbol_index: object


def _frozen(a, dtype=np.int64) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trellis:
    next_state: np.ndarray = field(repr=False)
    symbol_index: np.ndarray = field(repr=False)
    constellation: Constellation
    name: str = ""

    def __post_init__(self):
        ns = _frozen(self.next_state)
        sym = _frozen(self.symbol_index)
        object.__setattr__(self, "next_state", ns)
        object.__setattr__(self, "symbol_index", sym)
        S, E = ns.shape
        if E < 1 or E & (E - 1):
            raise ValueError("edges per state must be a power of two")
        if sym.shape != (S, E):
            raise ValueError("symbol table must match the transition table")
        if ns.min() < 0 or ns.max() >= S:
            raise ValueError("next_state out of range")
        if sym.min() < 0 or sym.max() >= self.constellation.order:
            raise ValueError("symbol index out of range")

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def edges_per_state(self) -> int:
        return self.next_state.shape[1]

    @property
    def bits_per_step(self) -> int:
        return self.edges_per_state.bit_length() - 1

    def edges(self, state: int) -> list[Edge]:
        b = self.bits_per_step
        return [Edge(format(e, f"0{b}b") if b else "", int(self.next_state[state, e]),
                     int(self.symbol_index[state, e]))
                for e in range(self.edges_per_state)]

    def branch_points(self) -> np.ndarray:
        """Unit-energy symbol emitted on every edge, shape ``(S, E)``."""
        return self.constellation.points[self.symbol_index]


@dataclass(frozen=True)
class ProductTrellis:
    """Tensor product ``t1 ⊗ t2``.

    State ``i * r2 + j`` is the pair ``(i, j)``; edge ``e1 * E2 + e2`` takes
    ``e1`` in ``t1`` and ``e2`` in ``t2``. ``symbol_index[..., 0]`` and
    ``[..., 1]`` index the two component constellations.
    """

    next_state: np.ndarray = field(repr=False)
    symbol_index: np.ndarray = field(repr=False)
    components: tuple[Trellis, Trellis]

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def edges_per_state(self) -> int:
        return self.next_state.shape[1]

    def split_state(self, s: int) -> tuple[int, int]:
        return divmod(s, self.components[1].num_states)

    def split_edge(self, e: int) -> tuple[int, int]:
        return divmod(e, self.components[1].edges_per_state)

    def edges(self, state: int) -> list[Edge]:
        t1, t2 = self.components
        b1, b2 = t1.bits_per_step, t2.bits_per_step
        out = []
        for e in range(self.edges_per_state):
            e1, e2 = self.split_edge(e)
            label = (format(e1, f"0{b1}b") if b1 else "") + (format(e2, f"0{b2}b") if b2 else "")
            out.append(Edge(label, int(self.next_state[state, e]),
                            (int(self.symbol_index[state, e, 0]), int(self.symbol_index[state, e, 1]))))
        return out


def build_ungerboeck_4state_8psk() -> Trellis:
    """Ungerboeck's 4-state 8-PSK code (parity checks ``h0 = 5``, ``h1 = 2`` octal).

    Each step takes two bits ``(u, c)``: ``c`` drives the systematic feedback
    encoder producing ``(z1, z0) = (c, parity)`` which picks one of four
    subsets of natural-mapped 8-PSK; ``u`` picks one of the two antipodal
    points of that subset (a parallel-transition pair). State ``(a, v)`` is
    stored as ``2a + v``; it emits ``z0 = v`` and moves to ``(v, a ^ c)``.
    """
    psk8 = make_standard("PSK", 8, labeling="natural")
    nxt = np.zeros((4, 4), dtype=int)
    sym = np.zeros((4, 4), dtype=int)
    for s in range(4):
        a, v = divmod(s, 2)
        for e in range(4):
            u, c = divmod(e, 2)
            sym[s, e] = 4 * u + 2 * c + v
            nxt[s, e] = 2 * v + (a ^ c)
    return Trellis(nxt, sym, psk8, "ungerboeck-4state-8psk")


def uncoded_trellis(c: Constellation) -> Trellis:
    """One-state trellis with a parallel edge per symbol (plain modulation)."""
    M = c.order
    return Trellis(np.zeros((1, M), dtype=int), np.arange(M)[None, :], c, f"uncoded-{c.name}")


def _check_state(trellis, state: int) -> None:
    if not 0 <= state < trellis.num_states:
        raise ValueError(f"invalid state {state}")


def bits_to_inputs(bits, width: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    if width == 0:
        return np.zeros(bits.shape[:-1] + (0,), dtype=np.int64)
    if bits.shape[-1] % width:
        raise ValueError(f"bit count must be a multiple of {width}")
    words = bits.reshape(bits.shape[:-1] + (-1, width))
    weights = 1 << np.arange(width - 1, -1, -1)
    return words @ weights


def inputs_to_bits(inputs, width: int) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1)
    bits = (inputs[..., None] >> shifts) & 1
    return bits.reshape(inputs.shape[:-1] + (-1,))


def encode_inputs(trellis, inputs, initial_state=0):
    """Walk the trellis; ``inputs`` is ``(..., L)`` edge indices.

    Returns ``(symbols, final_state)`` where ``symbols`` has shape
    ``inputs.shape`` (pairs get a trailing axis of 2 for product trellises).
    """
    inputs = np.asarray(inputs, dtype=np.int64)
    state = np.broadcast_to(np.asarray(initial_state, dtype=np.int64), inputs.shape[:-1]).copy()
    steps = []
    for n in range(inputs.shape[-1]):
        e = inputs[..., n]
        steps.append(trellis.symbol_index[state, e])
        state = trellis.next_state[state, e]
    if not steps:
        empty = np.empty(inputs.shape + trellis.symbol_index.shape[2:], dtype=np.int64)
        return empty, state
    return np.stack(steps, axis=inputs.ndim - 1), state


def tcm_encode(trellis: Trellis, bits, initial_state: int = 0) -> tuple[np.ndarray, int]:
    """Encode a flat bit sequence; returns symbol indices and the final state."""
    _check_state(trellis, initial_state)
    inputs = bits_to_inputs(np.asarray(bits, dtype=np.int64).reshape(-1), trellis.bits_per_step)
    syms, state = encode_inputs(trellis, inputs, initial_state)
    return syms, int(state)


def termination_table(trellis) -> np.ndarray:
    """``(S, T)`` inputs that drive each state to state 0 in exactly ``T`` steps.

    ``T`` is the smallest length that works for every state; the lowest input
    index is preferred at each step.
    """
    S, E = trellis.next_state.shape
    reach = [np.zeros(S, dtype=bool)]
    reach[0][0] = True
    for t in range(1, S + 1):
        prev = reach[-1]
        reach.append(prev[trellis.next_state].any(axis=1))
        if reach[-1].all():
            break
    else:
        raise ValueError("trellis cannot be terminated in state 0")
    T = len(reach) - 1
    table = np.zeros((S, T), dtype=np.int64)
    for s in range(S):
        cur = s
        for t in range(T, 0, -1):
            e = int(np.argmax(reach[t - 1][trellis.next_state[cur]]))
            table[s, T - t] = e
            cur = trellis.next_state[cur, e]
    return table


def terminate(trellis, inputs) -> np.ndarray:
    """Append tail inputs so that every frame in ``inputs`` ends in state 0."""
    inputs = np.asarray(inputs, dtype=np.int64)
    _, final = encode_inputs(trellis, inputs, 0)
    tail = termination_table(trellis)[final]
    return np.concatenate([inputs, tail], axis=-1)


def _predecessors(next_state: np.ndarray) -> np.ndarray:
    S, E = next_state.shape
    flat = next_state.reshape(-1)
    lists = [np.flatnonzero(flat == s) for s in range(S)]
    D = max(len(l) for l in lists)
    pred = np.full((S, max(D, 1)), -1, dtype=np.int64)
    for s, l in enumerate(lists):
        pred[s, :len(l)] = l
    return pred


def viterbi(next_state: np.ndarray, outputs: np.ndarray, y, terminated: bool = True,
            initial_state: int = 0, return_metric: bool = False):
    """Minimum-distance path search on a trellis, batched over frames.

    ``outputs[s, e]`` is the noiseless received value on each edge and ``y``
    has shape ``(F, L)`` or ``(L,)``. Returns the decoded edge indices with the
    shape of ``y`` (and the path metrics when ``return_metric`` is set).
    """
    y = np.asarray(y, dtype=complex)
    single = y.ndim == 1
    if single:
        y = y[None, :]
    F, L = y.shape
    S, E = next_state.shape
    pred = _predecessors(next_state)
    valid = pred >= 0
    pred_safe = np.where(valid, pred, 0)
    out_flat = outputs.reshape(-1)

    metric = np.full((F, S), np.inf)
    metric[:, initial_state] = 0.0
    survivors = np.empty((L, F, S), dtype=np.int64)
    rows = np.arange(F)[:, None]
    for n in range(L):
        branch = np.abs(y[:, n, None] - out_flat[None, :]) ** 2           # (F, S*E)
        cand = np.repeat(metric, E, axis=1) + branch                        # (F, S*E)
        incoming = np.where(valid[None], cand[:, pred_safe], np.inf)        # (F, S, D)
        choice = np.argmin(incoming, axis=2)
        survivors[n] = pred_safe[np.arange(S)[None, :], choice]
        metric = np.take_along_axis(incoming, choice[..., None], axis=2)[..., 0]

    end = np.zeros(F, dtype=np.int64) if terminated else np.argmin(metric, axis=1)
    final_metric = metric[np.arange(F), end]
    decoded = np.empty((F, L), dtype=np.int64)
    state = end
    for n in range(L - 1, -1, -1):
        flat = survivors[n][np.arange(F), state]
        state, decoded[:, n] = np.divmod(flat, E)
    if single:
        decoded, final_metric = decoded[0], final_metric[0]
    return (decoded, final_metric) if return_metric else decoded


def viterbi_decode(trellis: Trellis, y, h: complex = 1.0, amplitude: float = 1.0,
                   terminated: bool = True) -> np.ndarray:
    """Single-user decode of ``y = h * amplitude * symbol + noise`` to edge indices."""
    outputs = h * amplitude * trellis.branch_points()
    return viterbi(trellis.next_state, outputs, y, terminated)


def free_distance(trellis: Trellis, depth: int = 32, start_states=(0,)) -> float:
    """Minimum squared Euclidean distance between two diverging code paths.

    Covers parallel transitions (paths that remerge after one step) and longer
    error events that diverge at a state in ``start_states`` and remerge
    anywhere, with at most ``depth`` steps per event. A pair-state search is
    used with the running best as a pruning bound.
    """
    pts = trellis.branch_points()
    ns = trellis.next_state
    S, E = ns.shape
    best = math.inf
    # pair states (a, b), a != b, with accumulated distance and depth
    heap: list[tuple[float, int, int, int]] = []
    for s in start_states:
        for e1 in range(E):
            for e2 in range(E):
                if e1 == e2:
                    continue
                d = abs(pts[s, e1] - pts[s, e2]) ** 2
                a, b = int(ns[s, e1]), int(ns[s, e2])
                if a == b:
                    best = min(best, d)
                else:
                    heapq.heappush(heap, (d, 1, a, b))
    seen: dict[tuple[int, int, int], float] = {}
    while heap:
        d, n, a, b = heapq.heappop(heap)
        if d >= best:
            break
        if n >= depth or seen.get((a, b, n), math.inf) <= d:
            continue
        seen[(a, b, n)] = d
        step = np.abs(pts[a][:, None] - pts[b][None, :]) ** 2
        for e1 in range(E):
            for e2 in range(E):
                nd = d + step[e1, e2]
                if nd >= best:
                    continue
                na, nb = int(ns[a, e1]), int(ns[b, e2])
                if na == nb:
                    best = nd
                else:
                    heapq.heappush(heap, (nd, n + 1, na, nb))
    return float(best)


def tensor_product(t1: Trellis, t2: Trellis) -> ProductTrellis:
    r2, E2 = t2.num_states, t2.edges_per_state
    S = t1.num_states * r2
    E = t1.edges_per_state * E2
    nxt = np.empty((S, E), dtype=np.int64)
    sym = np.empty((S, E, 2), dtype=np.int64)
    for i in range(t1.num_states):
        for j in range(r2):
            s = i * r2 + j
            nxt[s] = (t1.next_state[i][:, None] * r2 + t2.next_state[j][None, :]).ravel()
            sym[s, :, 0] = np.repeat(t1.symbol_index[i], E2)
            sym[s, :, 1] = np.tile(t2.symbol_index[j], t1.edges_per_state)
    return ProductTrellis(_frozen(nxt), _frozen(sym), (t1, t2))


@dataclass(frozen=True)
class TcNomaConfig:
    """Two TCM streams sent as ``√P1 a1 + √P2 e^{jθ} a2``.

    ``gains2[k]`` is ``|h_k|^2`` at receiver ``k``; channels are taken real
    and positive, ``h_k = sqrt(gains2[k])``.
    """

    P1: float = 0.3
    P2: float = 1.0
    rotation: float = math.pi / 8
    gains2: tuple[float, ...] = (2.0, 1.0)
    sigma2: float = 1.0

    def __post_init__(self):
        if self.P1 < 0 or self.P2 < 0:
            raise ValueError("powers must be nonnegative")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def channels(self) -> tuple[float, ...]:
        return tuple(math.sqrt(g) for g in self.gains2)

    @property
    def amp1(self) -> complex:
        return complex(math.sqrt(self.P1))

    @property
    def amp2(self) -> complex:
        return math.sqrt(self.P2) * complex(math.cos(self.rotation), math.sin(self.rotation))


def superposed_symbols(cfg: TcNomaConfig, c1: Constellation, c2: Constellation, idx1, idx2) -> np.ndarray:
    return cfg.amp1 * c1.points[np.asarray(idx1)] + cfg.amp2 * c2.points[np.asarray(idx2)]


def tcnoma_transmit(cfg: TcNomaConfig, trellis1: Trellis, trellis2: Trellis, bits1, bits2,
                    rng: np.random.Generator | None, terminated: bool = True):
    """Encode both users, superimpose and pass through each receiver's channel.

    ``bits1``/``bits2`` may be ``(L_bits,)`` or batched ``(F, L_bits)``.
    Returns ``(received, (idx1, idx2))`` where ``received[k]`` holds receiver
    ``k``'s samples. With ``rng=None`` the output is noiseless.
    """
    in1 = bits_to_inputs(bits1, trellis1.bits_per_step)
    in2 = bits_to_inputs(bits2, trellis2.bits_per_step)
    if in1.shape != in2.shape:
        raise ValueError("the two users must produce equally long symbol streams")
    if terminated:
        in1, in2 = terminate(trellis1, in1), terminate(trellis2, in2)
        if in1.shape != in2.shape:
            raise ValueError("tail lengths of the two trellises differ")
    idx1, _ = encode_inputs(trellis1, in1)
    idx2, _ = encode_inputs(trellis2, in2)
    x = superposed_symbols(cfg, trellis1.constellation, trellis2.constellation, idx1, idx2)
    received = []
    for h in cfg.channels:
        y = h * x
        if rng is not None:
            y = y + complex_noise(x.shape, cfg.sigma2, rng)
        received.append(y)
    return received, (idx1, idx2)


def _strip(inputs: np.ndarray, n_steps: int, width: int) -> np.ndarray:
    return inputs_to_bits(inputs[..., :n_steps], width)


def joint_viterbi(product: ProductTrellis, y, h: complex, cfg: TcNomaConfig,
                  n_steps: int | None = None, return_metric: bool = False):
    """Joint ML detection of both users on the product trellis.

    ``n_steps`` is the number of data steps; later steps are tail and are
    dropped from the returned bits (default: ``y`` holds data only, but the
    path still has to end in state 0).
    """
    t1, t2 = product.components
    outputs = h * superposed_symbols(cfg, t1.constellation, t2.constellation,
                                     product.symbol_index[..., 0], product.symbol_index[..., 1])
    res = viterbi(product.next_state, outputs, y, terminated=True, return_metric=return_metric)
    edges, metric = res if return_metric else (res, None)
    e1, e2 = np.divmod(edges, t2.edges_per_state)
    L = np.asarray(y).shape[-1] if n_steps is None else n_steps
    bits = (_strip(e1, L, t1.bits_per_step), _strip(e2, L, t2.bits_per_step))
    return (bits, metric) if return_metric else bits


def sic_tcm_decode(trellis1: Trellis, trellis2: Trellis, y, h: complex, cfg: TcNomaConfig,
                   n_steps: int | None = None):
    """Decode the stronger-power stream first, cancel it, then decode the other.

    On equal powers user 2 is decoded first.
    """
    y = np.asarray(y, dtype=complex)
    L = y.shape[-1] if n_steps is None else n_steps
    first_is_2 = cfg.P2 >= cfg.P1
    (ta, amp_a), (tb, amp_b) = ((trellis2, cfg.amp2), (trellis1, cfg.amp1))
    if not first_is_2:
        (ta, amp_a), (tb, amp_b) = (tb, amp_b), (ta, amp_a)
    ea = viterbi(ta.next_state, h * amp_a * ta.branch_points(), y)
    sa, _ = encode_inputs(ta, ea)
    residual = y - h * amp_a * ta.constellation.points[sa]
    eb = viterbi(tb.next_state, h * amp_b * tb.branch_points(), residual)
    bits_a = _strip(ea, L, ta.bits_per_step)
    bits_b = _strip(eb, L, tb.bits_per_step)
    return (bits_b, bits_a) if first_is_2 else (bits_a, bits_b)
