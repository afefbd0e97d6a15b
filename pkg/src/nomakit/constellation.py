"""Finite-alphabet constellations and their two-user superpositions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

DEFAULT_OVERLAP_TOL = 1e-9

_SUPPORTED = {
    "BPSK": (2,),
    "PSK": (4, 8, 16),
    "QAM": (4, 8, 16, 64, 256, 1024),
}


class UnsupportedOrderError(ValueError):
    """Raised when a (kind, order) pair has no standard construction."""


def gray(n: int) -> int:
    return n ^ (n >> 1)


def _bits(value: int, width: int) -> str:
    return format(value, f"0{width}b")


@dataclass(frozen=True)
class Constellation:
    """Labeled unit-energy point set.

    ``symbols[i]`` carries the bit label ``labels[i]``; the order of the two
    tuples is the symbol index used everywhere else in the package.
    """

    symbols: tuple[complex, ...]
    labels: tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        m = len(self.symbols)
        if m < 2 or m & (m - 1):
            raise ValueError(f"constellation size must be a power of two >= 2, got {m}")
        if len(self.labels) != m:
            raise ValueError("one label per symbol is required")
        b = m.bit_length() - 1
        if len(set(self.labels)) != m or any(len(lab) != b for lab in self.labels):
            raise ValueError(f"labels must be {m} distinct {b}-bit strings")
        energy = float(np.mean(np.abs(self.points) ** 2))
        if abs(energy - 1.0) > 1e-12:
            raise ValueError(f"average energy must be 1, got {energy!r}")

    @property
    def points(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=complex)

    @property
    def order(self) -> int:
        return len(self.symbols)

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def label_bits(self) -> np.ndarray:
        """Labels as an (M, b) 0/1 integer array."""
        return np.array([[int(c) for c in lab] for lab in self.labels], dtype=np.int8)

    @classmethod
    def from_points(cls, points, labels, name: str = "") -> "Constellation":
        """Build from raw points, rescaling them to unit average energy."""
        pts = np.asarray(points, dtype=complex)
        pts = pts / math.sqrt(float(np.mean(np.abs(pts) ** 2)))
        return cls(tuple(complex(p) for p in pts), tuple(labels), name)


def _pam_levels(n: int) -> np.ndarray:
    return 2.0 * np.arange(n) - (n - 1)


def make_standard(kind: str, order: int, labeling: str = "gray") -> Constellation:
    """Return a standard BPSK, PSK or QAM constellation with unit energy.

    PSK with ``order == 4`` is the familiar ``(±1±j)/√2`` set; higher PSK orders
    start at angle zero. QAM orders are square, except 8 which is the
    rectangular 4x2 grid. ``labeling`` is ``"gray"`` or ``"natural"`` (the
    latter labels symbol ``i`` with the binary expansion of ``i``).
    """
    kind = kind.upper()
    if kind not in _SUPPORTED or order not in _SUPPORTED[kind]:
        raise UnsupportedOrderError(f"unsupported constellation {kind}-{order}")
    if labeling not in ("gray", "natural"):
        raise ValueError(f"unknown labeling {labeling!r}")
    b = order.bit_length() - 1
    name = f"{kind}{order}"

    if kind == "BPSK":
        return Constellation((1 + 0j, -1 + 0j), ("0", "1"), name)

    if kind == "PSK":
        offset = math.pi / 4 if order == 4 else 0.0
        idx = np.arange(order)
        pts = np.exp(1j * (offset + 2 * math.pi * idx / order))
        if labeling == "gray":
            labels = [_bits(gray(i), b) for i in idx]
        else:
            labels = [_bits(i, b) for i in idx]
        return Constellation(tuple(complex(p) for p in pts), tuple(labels), name)

    # QAM: in-phase axis carries the high-order bits
    if order == 8:
        n_i, n_q = 4, 2
    else:
        n_i = n_q = math.isqrt(order)
    b_i, b_q = n_i.bit_length() - 1, n_q.bit_length() - 1
    lev_i, lev_q = _pam_levels(n_i), _pam_levels(n_q)
    pts, labels = [], []
    for i in range(n_i):
        for q in range(n_q):
            pts.append(lev_i[i] + 1j * lev_q[q])
            if labeling == "gray":
                labels.append(_bits(gray(i), b_i) + _bits(gray(q), b_q))
            else:
                labels.append(_bits(i * n_q + q, b))
    return Constellation.from_points(pts, labels, name)


def rotate(c: Constellation, theta: float) -> Constellation:
    pts = c.points * np.exp(1j * theta)
    return Constellation(tuple(complex(p) for p in pts), c.labels, c.name)


@dataclass(frozen=True)
class PowerSplit:
    """Share ``alpha`` of ``total_power`` goes to user 1, the rest to user 2."""

    alpha: float
    total_power: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not self.total_power > 0:
            raise ValueError(f"total_power must be positive, got {self.total_power}")

    @property
    def p1(self) -> float:
        return self.alpha * self.total_power

    @property
    def p2(self) -> float:
        return (1.0 - self.alpha) * self.total_power


@dataclass(frozen=True)
class SuperPoint:
    value: complex
    label1: str
    label2: str


@dataclass(frozen=True)
class SuperConstellation:
    """All ``M1*M2`` weighted sums of two parent constellations.

    Point ``i1 * M2 + i2`` is ``√(αP)·c1[i1] + √((1-α)P)·c2[i2]``.
    """

    values: np.ndarray = field(repr=False)
    split: PowerSplit
    parents: tuple[Constellation, Constellation]

    @property
    def points(self) -> list[SuperPoint]:
        c1, c2 = self.parents
        m2 = c2.order
        return [
            SuperPoint(complex(v), c1.labels[i // m2], c2.labels[i % m2])
            for i, v in enumerate(self.values)
        ]

    @property
    def index1(self) -> np.ndarray:
        return np.arange(len(self.values)) // self.parents[1].order

    @property
    def index2(self) -> np.ndarray:
        return np.arange(len(self.values)) % self.parents[1].order

    def __len__(self) -> int:
        return len(self.values)


def superimpose(c1: Constellation, c2: Constellation, split: PowerSplit) -> SuperConstellation:
    a1 = math.sqrt(split.p1)
    a2 = math.sqrt(split.p2)
    values = (a1 * c1.points[:, None] + a2 * c2.points[None, :]).ravel()
    values.setflags(write=False)
    return SuperConstellation(values, split, (c1, c2))


def distinct_count(sc: SuperConstellation, tol: float = DEFAULT_OVERLAP_TOL) -> int:
    """Number of point clusters when points closer than ``tol`` are merged.

    Merging is transitive: a chain of near neighbours forms one cluster.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    xy = np.column_stack([sc.values.real, sc.values.imag])
    pairs = cKDTree(xy).query_pairs(r=tol, output_type="ndarray")
    n = len(xy)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    count, _ = connected_components(graph, directed=False)
    return int(count)


def min_distance(sc: SuperConstellation) -> float:
    """Smallest distance between two points that carry different information.

    Labels of a user with zero power carry no information, so pairs differing
    only in that user's label are skipped.
    """
    if len(sc) < 2:
        raise ValueError("need at least two points")
    i1, i2 = sc.index1, sc.index2
    differs = np.zeros((len(sc), len(sc)), dtype=bool)
    if sc.split.p1 > 0:
        differs |= i1[:, None] != i1[None, :]
    if sc.split.p2 > 0:
        differs |= i2[:, None] != i2[None, :]
    d = np.abs(sc.values[:, None] - sc.values[None, :])
    return float(d[differs].min())


def write_constellation_csv(c: Constellation, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im", "label"])
        for p, lab in zip(c.points, c.labels):
            w.writerow([repr(float(p.real)), repr(float(p.imag)), lab])


def write_super_csv(sc: SuperConstellation, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im", "label1", "label2"])
        for pt in sc.points:
            w.writerow([repr(pt.value.real), repr(pt.value.imag), pt.label1, pt.label2])


def read_super_csv(path) -> list[SuperPoint]:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        SuperPoint(complex(float(r["re"]), float(r["im"])), r["label1"], r["label2"])
        for r in rows
    ]
