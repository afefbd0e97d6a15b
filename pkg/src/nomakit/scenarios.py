"""Ready-made BER scenarios for :func:`nomakit.sim.run_ber`.

SNR conventions: single-user QPSK uses Eb/N0; every other scenario uses the
transmit SNR ``1/σ²`` for unit reference power, so a receiver with gain
``|h|²`` sees ``|h|²·P/σ²`` for a stream of power ``P``.
"""

from __future__ import annotations

import math

import numpy as np

from . import cdnoma, link, tcm
from .constellation import PowerSplit, make_standard, superimpose


def sigma2_from_snr(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def _bit_errors(labels_true: np.ndarray, labels_hat: np.ndarray, bit_table: np.ndarray) -> int:
    return int(np.sum(bit_table[labels_true] != bit_table[labels_hat]))


def qpsk_awgn(n_symbols: int = 4096):
    """Gray QPSK on AWGN; the grid value is Eb/N0 in dB."""
    c = make_standard("PSK", 4)
    table = c.label_bits()

    def scenario(ebn0_db, rng):
        sigma2 = 1.0 / (2.0 * 10.0 ** (ebn0_db / 10.0))  # Es = 2 Eb = 1
        idx = rng.integers(0, 4, n_symbols)
        y = link.transmit(c.points[idx], 1.0, sigma2, rng)
        hat = link.nearest(y, c.points)
        return [_bit_errors(idx, hat, table)], [2 * n_symbols]

    return scenario


def noma_qpsk(method: str = "ml", alpha: float = 0.2, total_power: float = 1.0,
              gains=(1.0, 1.0), n_symbols: int = 4096):
    """Two-user QPSK superposition; receiver ``k`` keeps user ``k``'s bits.

    User 1 is the fine (power ``alpha``) user and user 2 the coarse one.
    """
    c = make_standard("PSK", 4)
    split = PowerSplit(alpha, total_power)
    sc = superimpose(c, c, split)
    table = c.label_bits()
    if method not in ("ml", "sic"):
        raise ValueError(f"unknown method {method!r}")

    def scenario(snr_db, rng):
        sigma2 = sigma2_from_snr(snr_db)
        i1 = rng.integers(0, 4, n_symbols)
        i2 = rng.integers(0, 4, n_symbols)
        x = sc.values[i1 * 4 + i2]
        errs = []
        for user, h in enumerate(gains):
            y = link.transmit(x, h, sigma2, rng)
            if method == "ml":
                j = link.ml_detect_indices(y, h, sc)
                hat1, hat2 = j // 4, j % 4
            else:
                hat1, hat2 = link.sic_detect_indices(y, h, c, c, split)
            errs.append(_bit_errors(i1, hat1, table) if user == 0 else _bit_errors(i2, hat2, table))
        return errs, [2 * n_symbols, 2 * n_symbols]

    return scenario


def tcm_single(frames: int = 200, steps: int = 100):
    """Single-user 4-state 8-PSK TCM; grid value is Es/N0 in dB."""
    t = tcm.build_ungerboeck_4state_8psk()
    w = t.bits_per_step

    def scenario(snr_db, rng):
        sigma2 = sigma2_from_snr(snr_db)
        bits = rng.integers(0, 2, (frames, steps * w))
        inputs = tcm.terminate(t, tcm.bits_to_inputs(bits, w))
        idx, _ = tcm.encode_inputs(t, inputs)
        y = link.transmit(t.constellation.points[idx], 1.0, sigma2, rng)
        dec = tcm.viterbi_decode(t, y)
        hat = tcm.inputs_to_bits(dec[:, :steps], w)
        return [int(np.sum(hat != bits))], [bits.size]

    return scenario


TCNOMA_SCHEMES = ("uncoded", "tcma", "tcnoma-joint", "tcnoma-sic")


def tcnoma(scheme: str = "tcnoma-joint", P1: float = 0.3, P2: float = 1.0,
           gains2=(2.0, 1.0), rotation: float = math.pi / 8,
           frames: int = 200, steps: int = 100, receivers=(0, 1)):
    """Two-user downlink with TCM streams (or uncoded QPSK for ``"uncoded"``).

    Receiver ``k`` in ``receivers`` detects and keeps user ``k``'s bits;
    users whose receiver is not listed report zero bits. ``"tcma"`` sends
    ``a1 + e^{jθ} a2`` with unit powers, the others use ``P1``/``P2``.
    """
    if scheme not in TCNOMA_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "uncoded":
        t = tcm.uncoded_trellis(make_standard("PSK", 4))
    else:
        t = tcm.build_ungerboeck_4state_8psk()
    if scheme == "tcma":
        P1 = P2 = 1.0
    product = tcm.tensor_product(t, t)
    w = t.bits_per_step

    def scenario(snr_db, rng):
        cfg = tcm.TcNomaConfig(P1, P2, rotation, tuple(gains2), sigma2_from_snr(snr_db))
        b1 = rng.integers(0, 2, (frames, steps * w))
        b2 = rng.integers(0, 2, (frames, steps * w))
        rx, _ = tcm.tcnoma_transmit(cfg, t, t, b1, b2, rng)
        errs, nbits = [0, 0], [0, 0]
        for k in receivers:
            h = cfg.channels[k]
            if scheme == "tcnoma-sic":
                d1, d2 = tcm.sic_tcm_decode(t, t, rx[k], h, cfg, n_steps=steps)
            else:
                d1, d2 = tcm.joint_viterbi(product, rx[k], h, cfg, n_steps=steps)
            truth, est = (b1, d1) if k == 0 else (b2, d2)
            errs[k] = int(np.sum(truth != est))
            nbits[k] = truth.size
        return errs, nbits

    return scenario


def lds_mmse(power: float = 1.0, n_uses: int = 1024, signature=None):
    """QPSK users spread with a sparse signature, MMSE detection, hard slicing.

    Grid value is ``P/σ²`` in dB for per-user power ``P`` and unit gains.
    """
    m = cdnoma.SignatureMatrix(cdnoma.SPARSE_6X9 if signature is None else signature)
    c = make_standard("PSK", 4)
    table = c.label_bits()
    K = m.users
    gains = np.ones(K)
    P = power

    def scenario(snr_db, rng):
        sigma2 = P * sigma2_from_snr(snr_db)
        idx = rng.integers(0, 4, (n_uses, K))
        x = math.sqrt(P) * c.points[idx]
        y = cdnoma.lds_spread(x, m, gains)
        y = y + link.complex_noise(y.shape, sigma2, rng)
        est = cdnoma.mmse_mud(y, m, gains, P, sigma2)
        hat = link.nearest(est, math.sqrt(P) * c.points)
        errs = [_bit_errors(idx[:, k], hat[:, k], table) for k in range(K)]
        return errs, [2 * n_uses] * K

    return scenario
