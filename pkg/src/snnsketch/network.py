"""Threshold-gate network model, validation and the text export format.

A network is a directed weighted graph of deterministic threshold neurons.
Neuron u fires in round t iff sum_v w(v,u) * fired_{t-1}(v) - bias(u) >= 0.
Weights and biases are exact: Python ints or fractions.Fraction.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

EXCITATORY = "E"
INHIBITORY = "I"

# Sentinels for "large" weights.  They are resolved when the network is sealed:
# W = 4 * (sum of |w| over the target's other in-edges + |bias| + 1).
LARGE = "+L"
NEG_LARGE = "-L"


def as_rational(x) -> int | Fraction:
    if isinstance(x, bool):
        raise TypeError("bool is not a weight")
    if isinstance(x, int):
        return x
    if isinstance(x, Fraction):
        return x.numerator if x.denominator == 1 else x
    if isinstance(x, Rational):
        return as_rational(Fraction(x))
    if isinstance(x, float):
        if not np.isfinite(x):
            raise ValueError(f"non-finite value {x}")
        return as_rational(Fraction(x))
    if isinstance(x, str):
        return as_rational(Fraction(x))
    raise TypeError(f"cannot use {x!r} as an exact rational")


def fmt_rational(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


@dataclass
class HashMatrix:
    """Binary d x c matrix over GF(2); row j maps a c-bit input to output bit j."""

    rows: np.ndarray  # uint8, shape (d, c)
    seed: object = None

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.uint8)
        if self.rows.ndim != 2 or 0 in self.rows.shape:
            raise ValueError("hash matrix must be a non-empty 2-d array")
        if np.any(self.rows > 1):
            raise ValueError("hash matrix entries must be 0 or 1")

    @property
    def d(self) -> int:
        return int(self.rows.shape[0])

    @property
    def c(self) -> int:
        return int(self.rows.shape[1])

    def to_line(self) -> str:
        width = max(1, (self.c + 3) // 4)
        hexes = []
        for row in self.rows:
            v = sum(int(b) << j for j, b in enumerate(row))
            hexes.append(format(v, f"0{width}x"))
        return f"H {self.d} {self.c} " + " ".join(hexes)

    @classmethod
    def from_line(cls, line: str) -> "HashMatrix":
        parts = line.split()
        if parts[0] != "H" or len(parts) < 3:
            raise ValueError(f"bad hash line: {line!r}")
        d, c = int(parts[1]), int(parts[2])
        if len(parts) != 3 + d:
            raise ValueError(f"hash line expects {d} rows: {line!r}")
        rows = np.zeros((d, c), dtype=np.uint8)
        for j, h in enumerate(parts[3:]):
            v = int(h, 16)
            if v >> c:
                raise ValueError(f"hash row wider than {c} bits: {h}")
            for k in range(c):
                rows[j, k] = (v >> k) & 1
        return cls(rows)

    def __eq__(self, other):
        return isinstance(other, HashMatrix) and np.array_equal(self.rows, other.rows)


class Network:
    """Mutable container built by the gadget and sketch builders."""

    def __init__(self, builder: str = "custom", **params):
        self.builder = builder
        self.params: dict = dict(params)
        self.bias: list = []
        self.pol: list[str] = []
        self.labels: list[str] = []
        self.src: list[int] = []
        self.dst: list[int] = []
        self.w: list = []
        self.inputs: list[int] = []
        self.outputs: list[int] = []
        self.hashes: list[HashMatrix] = []
        # per hash matrix: list of (edge id, row, col) whose weight is H[row, col]
        self.hash_sites: list[list[tuple[int, int, int]]] = []
        self._in_abs: list = []  # sum of |w| over ordinary in-edges
        self._large: list[tuple[int, str]] = []
        self._large_dsts: set[int] = set()
        self._sealed = True
        self._compiled = None

    # construction -----------------------------------------------------
    def add_neuron(self, bias=0, inhibitory: bool = False, label: str = "") -> int:
        self.bias.append(as_rational(bias))
        self.pol.append(INHIBITORY if inhibitory else EXCITATORY)
        self.labels.append(label)
        self._in_abs.append(0)
        self._compiled = None
        return len(self.bias) - 1

    def add_synapse(self, src: int, dst: int, weight) -> int:
        eid = len(self.w)
        self.src.append(src)
        self.dst.append(dst)
        if weight == LARGE or weight == NEG_LARGE:
            self.w.append(0)
            self._large.append((eid, weight))
            self._large_dsts.add(dst)
            self._sealed = False
        else:
            weight = as_rational(weight)
            self.w.append(weight)
            if 0 <= dst < len(self._in_abs):
                self._in_abs[dst] += abs(weight)
        self._compiled = None
        return eid

    def set_inputs(self, ids) -> None:
        self.inputs = list(ids)

    def set_outputs(self, ids) -> None:
        self.outputs = list(ids)

    def add_hash(self, H: HashMatrix, sites) -> int:
        self.hashes.append(H)
        self.hash_sites.append(list(sites))
        return len(self.hashes) - 1

    def rebind_hash(self, k: int, H: HashMatrix) -> None:
        """Replace hash matrix k, rewriting the weights it controls."""
        old = self.hashes[k]
        if old.rows.shape != H.rows.shape:
            raise ValueError("hash matrix shape mismatch")
        eids, ws = [], []
        shift: dict[int, int] = {}  # net change of |w| per destination
        rows = H.rows.tolist()
        for eid, r, c in self.hash_sites[k]:
            nw = rows[r][c]
            d = self.dst[eid]
            shift[d] = shift.get(d, 0) + nw - abs(self.w[eid])
            self.w[eid] = nw
            eids.append(eid)
            ws.append(nw)
        for d, v in shift.items():
            if v:
                self._in_abs[d] += v
        touched = shift.keys()
        self.hashes[k] = H
        if touched & self._large_dsts:
            # large weights into these neurons depend on the hash weights
            self._sealed = False
            self._compiled = None
        elif self._compiled is not None:
            self._compiled.update_edges(eids, ws)

    # large weights ----------------------------------------------------
    def seal(self) -> "Network":
        """Resolve LARGE / NEG_LARGE weights against the current in-edges."""
        if self._sealed:
            return self
        pos_sum: dict[int, int | Fraction] = {}
        entries = []
        for eid, kind in self._large:
            d = self.dst[eid]
            base = self._in_abs[d] + abs(self.bias[d]) + 1
            entries.append((eid, kind, d, base))
        for eid, kind, d, base in entries:
            if kind == LARGE:
                wv = 4 * base
                self.w[eid] = wv
                pos_sum[d] = pos_sum.get(d, 0) + wv
        for eid, kind, d, base in entries:
            if kind == NEG_LARGE:
                self.w[eid] = -4 * (base + pos_sum.get(d, 0))
        self._sealed = True
        if self._compiled is not None:
            self._compiled.refresh_weights(self)
        return self

    def large_edges(self) -> list[int]:
        return [eid for eid, _ in self._large]

    # queries ----------------------------------------------------------
    @property
    def n_neurons(self) -> int:
        return len(self.bias)

    @property
    def n_synapses(self) -> int:
        return len(self.w)

    def aux_count(self) -> int:
        return self.n_neurons - len(self.inputs) - len(self.outputs)

    def in_edges(self, u: int) -> list[tuple[int, object]]:
        self.seal()
        return [(s, w) for s, d, w in zip(self.src, self.dst, self.w) if d == u]

    def find(self, label: str) -> int:
        return self.labels.index(label)

    def compiled(self):
        from .sim import Compiled

        self.seal()
        if self._compiled is None:
            self._compiled = Compiled(self)
        return self._compiled

    # export -----------------------------------------------------------
    def to_text(self) -> str:
        self.seal()
        n = self.params.get("n", 0)
        m = self.params.get("m", 0)
        lines = [f"snn v1 {self.builder} n={n} m={m}"]
        for k in sorted(self.params):
            if k not in ("n", "m"):
                lines.append(f"# {k}={self.params[k]}")
        for H in self.hashes:
            lines.append(H.to_line())
        for u in range(self.n_neurons):
            line = f"N {u} bias={fmt_rational(self.bias[u])} pol={self.pol[u]}"
            if self.labels[u]:
                line += " " + self.labels[u]
            lines.append(line)
        for s, d, w in zip(self.src, self.dst, self.w):
            lines.append(f"S {s} {d} {fmt_rational(w)}")
        lines.append("IN " + " ".join(map(str, self.inputs)))
        lines.append("OUT " + " ".join(map(str, self.outputs)))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Network":
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty network file")
        head = lines[0].split()
        if len(head) < 3 or head[0] != "snn" or head[1] != "v1":
            raise ValueError(f"bad header: {lines[0]!r}")
        params: dict = {}
        for tok in head[3:]:
            k, _, v = tok.partition("=")
            params[k] = int(v)
        net = cls(head[2], **params)
        ids: dict[int, int] = {}
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            tag = line.split(maxsplit=1)[0]
            if tag == "#":
                k, _, v = line[1:].strip().partition("=")
                net.params[k] = v
            elif tag == "H":
                net.hashes.append(HashMatrix.from_line(line))
                net.hash_sites.append([])
            elif tag == "N":
                parts = line.split(maxsplit=4)
                if len(parts) < 4 or not parts[2].startswith("bias=") or not parts[3].startswith("pol="):
                    raise ValueError(f"line {lineno}: bad neuron line")
                pol = parts[3][4:]
                if pol not in (EXCITATORY, INHIBITORY):
                    raise ValueError(f"line {lineno}: bad polarity {pol!r}")
                ids[int(parts[1])] = net.add_neuron(
                    Fraction(parts[2][5:]), pol == INHIBITORY, parts[4] if len(parts) > 4 else ""
                )
            elif tag == "S":
                _, s, d, w = line.split()
                net.add_synapse(ids.get(int(s), int(s)), ids.get(int(d), int(d)), Fraction(w))
            elif tag == "IN":
                net.inputs = [ids[int(t)] for t in line.split()[1:]]
            elif tag == "OUT":
                net.outputs = [ids[int(t)] for t in line.split()[1:]]
            else:
                raise ValueError(f"line {lineno}: unknown record {tag!r}")
        return net


def validate(net: Network) -> list[str]:
    """Return a list of invariant violations; empty means well formed."""
    net.seal()
    errs: list[str] = []
    n = net.n_neurons
    for eid, (s, d, w) in enumerate(zip(net.src, net.dst, net.w)):
        if not (0 <= s < n) or not (0 <= d < n):
            errs.append(f"synapse {eid}: endpoint missing ({s}->{d})")
            continue
        if net.pol[s] == EXCITATORY and w < 0:
            errs.append(f"synapse {eid}: excitatory {s} has negative weight {w}")
        if net.pol[s] == INHIBITORY and w > 0:
            errs.append(f"synapse {eid}: inhibitory {s} has positive weight {w}")
    ins, outs = set(net.inputs), set(net.outputs)
    if len(ins) != len(net.inputs):
        errs.append("input layer has duplicates")
    if len(outs) != len(net.outputs):
        errs.append("output layer has duplicates")
    if ins & outs:
        errs.append(f"input and output layers overlap: {sorted(ins & outs)[:5]}")
    for u in list(ins) + list(outs):
        if not (0 <= u < n):
            errs.append(f"layer refers to missing neuron {u}")
    for H, sites in zip(net.hashes, net.hash_sites):
        for eid, r, c in sites:
            if eid < len(net.w) and net.w[eid] != H.rows[r, c]:
                errs.append(f"synapse {eid}: weight disagrees with hash matrix")
                break
    return errs
