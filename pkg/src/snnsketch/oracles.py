"""Classical reference implementations sharing the networks' hash matrices.

Items are 1-based in every public function; hashes see the 0-based code
v = x - 1.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .hashnet import hash_int
from .network import HashMatrix
from .stream import StreamUpdate

ALPHA = 0.39701


# ground truth -------------------------------------------------------------------


def brute_rank(stream, x: int) -> int:
    """Number of stream elements <= x."""
    return sum(1 for y in stream if y <= x)


def brute_distinct(stream) -> int:
    return len(set(stream))


def rank_bounds(stream, y: int) -> tuple[int, int]:
    """(#elements < y, #elements <= y)."""
    lt = sum(1 for v in stream if v < y)
    return lt, lt + sum(1 for v in stream if v == y)


def rank_interval(stream, y: int) -> tuple[int, int]:
    """Ranks taken by y: lt+1 .. le for a stream element, le for any other value."""
    lt, le = rank_bounds(stream, y)
    return (lt + 1, le) if le > lt else (le, le)


def median_ok(stream, y, eps: float) -> bool:
    """y has rank m/2 +- eps*m.  Membership is a separate question, see is_member."""
    if y is None or not stream:
        return False
    m = len(stream)
    lo, hi = rank_interval(stream, y)
    return lo <= m / 2 + eps * m and hi >= m / 2 - eps * m


def is_member(stream, y) -> bool:
    return y is not None and y in set(stream)


def leading_zeros(bits) -> int:
    """Leading zeros of a bit string written most significant bit first."""
    s = "".join(str(int(b)) for b in bits) if not isinstance(bits, str) else bits
    if not s or set(s) - {"0", "1"}:
        raise ValueError("expected a non-empty 0/1 string")
    k = s.find("1")
    return len(s) if k < 0 else k


# count-min -----------------------------------------------------------------------


class CountMinOracle:
    """Count-Min over 0-based keys, one hash matrix per table."""

    def __init__(self, hashes, b: int):
        self.hashes = list(hashes)
        if not self.hashes or any(H.d != self.hashes[0].d or H.c != self.hashes[0].c for H in self.hashes):
            raise ValueError("tables need hash matrices of equal shape")
        if 1 << self.hashes[0].d != b:
            raise ValueError(f"hash range {1 << self.hashes[0].d} does not match {b} bins")
        self.b = b
        self.tables = np.zeros((len(self.hashes), b), dtype=np.int64)
        self._bins: dict[int, list[int]] = {}

    def bins(self, key: int) -> list[int]:
        got = self._bins.get(key)
        if got is None:
            got = self._bins[key] = [hash_int(H, key) for H in self.hashes]
        return got

    def inc_key(self, key: int) -> None:
        for i, j in enumerate(self.bins(key)):
            self.tables[i, j] += 1

    def inc_keys(self, keys) -> None:
        """Batch form of inc_key."""
        keys = np.asarray(keys, dtype=np.int64)
        for i, H in enumerate(self.hashes):
            np.add.at(self.tables[i], hash_int(H, keys), 1)

    def count_key(self, key: int) -> int:
        return int(min(self.tables[i, j] for i, j in enumerate(self.bins(key))))

    def inc(self, x: int) -> None:
        self.inc_key(x - 1)

    def count(self, x: int) -> int:
        return self.count_key(x - 1)


# loglog --------------------------------------------------------------------------


def rho(suffix: int, w: int) -> int:
    """1-based position of the leading one in a w-bit suffix; w + 1 if it is zero."""
    return w - int(suffix).bit_length() + 1


class LogLogOracle:
    """K independent LogLog copies; each hash has an extra constant-one column."""

    def __init__(self, hashes, k_bits: int, w: int, alpha: float = ALPHA):
        self.hashes = list(hashes)
        self.k_bits, self.w, self.alpha = k_bits, w, alpha
        for H in self.hashes:
            if H.d != k_bits + w:
                raise ValueError(f"hash has {H.d} output bits, expected {k_bits + w}")
        self.B = 1 << k_bits
        self.buckets = np.zeros((len(self.hashes), self.B), dtype=np.int64)

    def split(self, H: HashMatrix, x: int) -> tuple[int, int]:
        c = H.c - 1
        h = hash_int(H, (x - 1) | (1 << c))
        return h & (self.B - 1), h >> self.k_bits

    def insert(self, x: int) -> None:
        for i, H in enumerate(self.hashes):
            j, s = self.split(H, x)
            self.buckets[i, j] = max(self.buckets[i, j], rho(s, self.w))

    def positions(self, items) -> tuple[np.ndarray, np.ndarray]:
        """Bucket index and rho of every item in every copy, each of shape (len(items), K)."""
        v = np.asarray(items, dtype=np.int64) - 1
        J = np.empty((v.shape[0], len(self.hashes)), dtype=np.int64)
        R = np.empty_like(J)
        for i, H in enumerate(self.hashes):
            h = hash_int(H, v | (1 << (H.c - 1)))
            J[:, i] = h & (self.B - 1)
            s = h >> self.k_bits
            bl = sum(((s >> k) > 0).astype(np.int64) for k in range(self.w))
            R[:, i] = self.w + 1 - bl
        return J, R

    def apply(self, j_row, r_row) -> None:
        """Insert one item given its row of positions()."""
        k = np.arange(len(self.hashes))
        self.buckets[k, j_row] = np.maximum(self.buckets[k, j_row], r_row)

    def insert_many(self, items) -> None:
        J, R = self.positions(items)
        for t in range(J.shape[0]):
            self.apply(J[t], R[t])

    def sums(self) -> list[int]:
        return [int(v) for v in self.buckets.sum(axis=1)]

    def estimate_from_sum(self, S: int) -> float:
        return self.alpha * self.B * 2.0 ** (S / self.B)

    def median_sum(self) -> int:
        return int(sorted(self.sums())[(len(self.hashes) + 1) // 2 - 1])

    def estimate(self) -> float:
        return self.estimate_from_sum(self.median_sum())


# dyadic median -------------------------------------------------------------------


def dyadic_key(v: int, i: int) -> int:
    """Level-i key of 0-based value v: its low i-1 bits cleared."""
    return v & ~((1 << (i - 1)) - 1)


@dataclass
class PhaseEntry:
    phase: int
    chi: int  # 0-based candidate
    fired: str  # "g", "s" or "e"
    est: int  # prefix estimate sum_{j>=i} F_j
    f: int = 0
    f_elem: int = 0

    def to_line(self) -> str:
        return f"PHASE {self.phase} chi={self.chi} fired={self.fired} est={self.est}"


@dataclass
class MedianResult:
    item: int | None  # 1-based output, None on an empty stream
    trace: list = field(default_factory=list)
    forced: bool = False


def median_thresholds(o: int, eps: float) -> tuple[float, float]:
    half = o // 2
    return half - eps / 2 * o, half + eps / 2 * o


class DyadicMedianOracle:
    """Dyadic Count-Min tables plus per-phase element tables and the search rule.

    levels[i-1] counts level-i keys; elems[i-1] counts single elements with
    hashes independent of every other table and is only read in phase i.
    """

    def __init__(self, level_hashes, elem_hashes, b: int, eps: float):
        self.L = len(level_hashes)
        if len(elem_hashes) != self.L:
            raise ValueError("need one element table group per level")
        self.levels = [CountMinOracle(hs, b) for hs in level_hashes]
        self.elems = [CountMinOracle(hs, b) for hs in elem_hashes]
        self.eps = eps
        self.stream: list[int] = []

    def insert(self, x: int) -> None:
        v = x - 1
        self.stream.append(x)
        for i in range(1, self.L + 1):
            self.levels[i - 1].inc_key(dyadic_key(v, i))
            self.elems[i - 1].inc_key(v)

    def insert_many(self, items) -> None:
        vs = np.asarray(items, dtype=np.int64) - 1
        self.stream.extend(int(x) for x in items)
        for i in range(1, self.L + 1):
            self.levels[i - 1].inc_keys(vs & ~((1 << (i - 1)) - 1))
            self.elems[i - 1].inc_keys(vs)

    def prefix_estimate(self, chi: int) -> int:
        """Dyadic estimate of #{items <= chi + 1} (chi is 0-based)."""
        return sum(self.levels[i - 1].count_key(k) for i, k in dyadic_blocks(0, chi, self.L))

    def query(self) -> MedianResult:
        o = len(self.stream)
        if o == 0:
            return MedianResult(None)
        t_lo, t_hi = median_thresholds(o, self.eps)
        L = self.L
        chi = (1 << (L - 1)) - 1
        prefix = 0
        trace = []
        for i in range(L, 0, -1):
            f = self.levels[i - 1].count_key(dyadic_key(chi, i))
            fe = self.elems[i - 1].count_key(chi)
            S = prefix + f
            if S - fe > t_hi:
                fired = "g"
            elif S < t_lo or fe == 0:
                fired = "s"
            else:
                fired = "e"
            trace.append(PhaseEntry(i, chi, fired, S, f, fe))
            if fired == "e":
                return MedianResult(chi + 1, trace)
            if i == 1:
                return MedianResult(chi + 1, trace, forced=True)
            if fired == "g":
                chi -= 1 << (i - 2)
            else:
                prefix = S
                chi += 1 << (i - 2)
        raise AssertionError("unreachable")


def dyadic_blocks(lo: int, hi: int, L: int) -> list[tuple[int, int]]:
    """Split the 0-based range [lo, hi] into aligned blocks (level, key)."""
    out = []
    v = lo
    while v <= hi:
        i = 1
        while i < L and v % (1 << i) == 0 and v + (1 << i) - 1 <= hi:
            i += 1
        out.append((i, dyadic_key(v, i)))
        v += 1 << (i - 1)
    return out


def dyadic_range_oracle(stream, a: int, b: int, med: DyadicMedianOracle | None = None):
    """Exact count of stream items in [a, b] and, if tables are given, the sketched count."""
    if not (1 <= a <= b):
        raise ValueError(f"bad range [{a}, {b}]")
    exact = sum(1 for y in stream if a <= y <= b)
    if med is None:
        return exact, None
    n = 1 << med.L
    if b > n:
        raise ValueError(f"range end {b} exceeds universe {n}")
    est = sum(med.levels[i - 1].count_key(k) for i, k in dyadic_blocks(a - 1, b - 1, med.L))
    return exact, est


# linear sketch ------------------------------------------------------------------


class LinSketchOracle:
    def __init__(self, A):
        self.A = np.asarray(A, dtype=np.int64)
        if self.A.ndim != 2 or 0 in self.A.shape:
            raise ValueError("sketch matrix must be non-empty 2-d")
        self.z = np.zeros(self.A.shape[1], dtype=np.int64)

    def update(self, x: int, sign: int = 1) -> None:
        self.z[x - 1] += 1 if sign >= 0 else -1

    def reading(self) -> list[int]:
        return [int(v) for v in self.A @ self.z]


# generic feed / query -----------------------------------------------------------


@dataclass
class OracleState:
    algo: object
    freq: Counter = field(default_factory=Counter)
    stream: list = field(default_factory=list)


def oracle_feed(state: OracleState, update: StreamUpdate) -> OracleState:
    algo = state.algo
    if update.kind == "ins":
        state.freq[update.item] += 1
        state.stream.append(update.item)
        if isinstance(algo, CountMinOracle):
            algo.inc(update.item)
        elif isinstance(algo, (LogLogOracle, DyadicMedianOracle)):
            algo.insert(update.item)
        elif isinstance(algo, LinSketchOracle):
            algo.update(update.item, +1)
    elif update.kind == "del":
        if not isinstance(algo, LinSketchOracle):
            raise ValueError("deletions are only supported by the linear sketch")
        state.freq[update.item] -= 1
        algo.update(update.item, -1)
    else:
        raise ValueError(f"{update.kind} is a query, use oracle_query")
    return state


def oracle_query(state: OracleState, query: StreamUpdate):
    algo = state.algo
    if query.kind == "count":
        if not isinstance(algo, CountMinOracle):
            raise ValueError("count needs a Count-Min oracle")
        return algo.count(query.item)
    if query.kind == "distinct":
        if not isinstance(algo, LogLogOracle):
            raise ValueError("distinct needs a LogLog oracle")
        return algo.estimate()
    if query.kind == "median":
        if not isinstance(algo, DyadicMedianOracle):
            raise ValueError("median needs a dyadic median oracle")
        return algo.query()
    raise ValueError(f"{query.kind} is not a query")


