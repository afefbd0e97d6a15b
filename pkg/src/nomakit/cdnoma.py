"""Code-domain NOMA: sparse signatures, LDS spreading and MMSE multi-user detection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

# 9 users on 6 resource elements, two REs per user, three users per RE
SPARSE_6X9 = np.array([
    [0, 1, 0, 0, 1, 0, 1, 0, 0],
    [1, 0, 0, 0, 0, 1, 0, 1, 0],
    [0, 1, 0, 1, 0, 0, 0, 0, 1],
    [0, 0, 1, 0, 1, 0, 1, 0, 0],
    [1, 0, 0, 1, 0, 0, 0, 0, 1],
    [0, 0, 1, 0, 0, 1, 0, 1, 0],
])

# SPARSE_6X9 repeats three columns (users 5/7, 6/8 and 4/9 share both REs).
# This variant keeps users 1-6 and moves 7, 8, 9 to the unused RE pairs
# {1,2}, {3,6}, {4,5}, so every pair of users overlaps in at most one RE.
REGULAR_6X9 = np.array([
    [0, 1, 0, 0, 1, 0, 1, 0, 0],
    [1, 0, 0, 0, 0, 1, 1, 0, 0],
    [0, 1, 0, 1, 0, 0, 0, 1, 0],
    [0, 0, 1, 0, 1, 0, 0, 0, 1],
    [1, 0, 0, 1, 0, 0, 0, 0, 1],
    [0, 0, 1, 0, 0, 1, 0, 1, 0],
])


@dataclass(frozen=True)
class SignatureMatrix:
    """Rows are resource elements, columns are users."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.entries))
        if m.dtype.kind not in "biufc":
            raise ValueError("signature entries must be numeric")
        if np.any(np.all(m == 0, axis=0)):
            raise ValueError("every user needs at least one nonzero entry")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n_re(self) -> int:
        return self.entries.shape[0]

    @property
    def users(self) -> int:
        return self.entries.shape[1]

    @property
    def support(self) -> np.ndarray:
        return self.entries != 0

    def normalized(self) -> np.ndarray:
        """Complex spreading matrix with unit-energy columns."""
        m = self.entries.astype(complex)
        return m / np.linalg.norm(m, axis=0)


@dataclass(frozen=True)
class SignatureReport:
    col_weights: tuple[int, ...]
    row_weights: tuple[int, ...]
    max_pair_overlap: int
    overload: float

    @property
    def dense(self) -> bool:
        """True when two users share more than one resource."""
        return self.max_pair_overlap > 1


def validate_signature(m: SignatureMatrix) -> SignatureReport:
    s = m.support.astype(int)
    overlap = max((int(s[:, i] @ s[:, j]) for i, j in combinations(range(m.users), 2)), default=0)
    return SignatureReport(
        tuple(int(x) for x in s.sum(axis=0)),
        tuple(int(x) for x in s.sum(axis=1)),
        overlap,
        m.users / m.n_re,
    )


def effective_matrix(m: SignatureMatrix, gains) -> np.ndarray:
    g = np.asarray(gains, dtype=complex).reshape(-1)
    if g.shape[0] != m.users:
        raise ValueError(f"expected {m.users} gains, got {g.shape[0]}")
    return m.normalized() * g[None, :]


def lds_spread(symbols, m: SignatureMatrix, gains) -> np.ndarray:
    """Superimpose ``h_k x_k c_k`` over users; ``symbols`` may be ``(..., K)``."""
    x = np.asarray(symbols, dtype=complex)
    if x.shape[-1] != m.users:
        raise ValueError(f"expected {m.users} symbols per use, got {x.shape[-1]}")
    return x @ effective_matrix(m, gains).T


def mmse_mud(y, m: SignatureMatrix, gains, powers, sigma2: float) -> np.ndarray:
    """Linear MMSE estimate ``P A^H (A P A^H + σ² I)^{-1} y`` per user.

    ``y`` may be ``(..., N_re)``; the result has shape ``(..., K)``.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    A = effective_matrix(m, gains)
    P = np.diag(np.broadcast_to(np.asarray(powers, dtype=float), (m.users,)))
    cov = A @ P @ A.conj().T + sigma2 * np.eye(m.n_re)
    filt = P @ A.conj().T @ np.linalg.inv(cov)
    return np.asarray(y, dtype=complex) @ filt.T


def load_signature_csv(path) -> SignatureMatrix:
    """Read a signature matrix; entries are 0/1 or complex like ``0.5-1i``."""
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    vals = [[complex(c.strip().replace("i", "j")) for c in r] for r in rows]
    arr = np.array(vals, dtype=complex)
    if np.all(arr.imag == 0):
        arr = arr.real
        if np.all(arr == np.round(arr)):
            arr = arr.astype(int)
    return SignatureMatrix(arr)


def save_signature_csv(m: SignatureMatrix, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in m.entries:
            w.writerow([_fmt(v) for v in row])


def _fmt(v) -> str:
    v = complex(v)
    if v.imag == 0:
        re = v.real
        return str(int(re)) if re == int(re) else repr(re)
    return f"{v.real!r}{v.imag:+}i"
