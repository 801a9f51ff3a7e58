"""Approximate median over a dyadic family of Count-Min tables.

Insert path: one-hot input -> binary code -> key neurons k_j = OR(code_j, z_j)
-> L level sketches C_i (keyed by the bits j >= i-1, i.e. the value with its
low i-1 bits cleared) and L element sketches C'_i (keyed by the full value),
plus a stream-length counter o.  The rising edge of INS, delayed until the
hash selectors are stable, is the go pulse of every table and of o.

Query path (a held high): the candidate register z starts at 2^(L-1) - 1.  A
timing chain gives phase i a comparison slot in which

    g_i  fires if  S - f'_i > floor(o/2) + (eps/2) o
    s_i  fires if  S < floor(o/2) - (eps/2) o, or f'_i = 0 and g_i does not
    e_i  fires otherwise

with S = f_i + sum of the latched f_j of earlier phases where s fired.  g
clears bit i-2 of z, s clears bit i-2 and sets bit i-1.  e (or the end of
phase 1) copies z to the output layer.  Keys are 0-based inside the network;
the driver reports 1-based items.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import log2

import numpy as np

from .countmin import CountMinParams, attach_cm_tables, decoder_latency, read_counters, sample_cm_hashes
from .gadgets import NEG_LARGE, bit_width, build_counter, build_delay_chain, copy_neuron, edge_detector, gate, onehot_encoder
from .hashnet import make_rng, pot_width
from .machine import Machine
from .network import LARGE, Network
from .oracles import DyadicMedianOracle, MedianResult, PhaseEntry
from .sim import decode_binary

C_MD_AUX = 80  # auxiliary budget constant
C_MD_INS = 12  # insert latency budget constant
C_MD_LAT = 14  # query latency budget constant
EPS_DENOM = 1024  # eps is rounded to a rational with this denominator bound


def _is_pow2(v: int) -> bool:
    return v >= 2 and v & (v - 1) == 0


@dataclass
class MedianParams:
    n: int
    m: int
    eps: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if not (_is_pow2(self.n) and _is_pow2(self.m)):
            raise ValueError("n and m must be powers of two >= 2")
        if not (0 < self.eps < 1 and 0 < self.delta < 1):
            raise ValueError("eps and delta must lie in (0, 1)")

    @property
    def L(self) -> int:
        return self.n.bit_length() - 1

    @property
    def eps_sub(self) -> float:
        return self.eps / (2 * self.L)

    @property
    def delta_sub(self) -> float:
        return self.delta / (2 * self.L)

    @property
    def cm(self) -> CountMinParams:
        return CountMinParams(self.n, self.m, self.eps_sub, self.delta_sub)

    @property
    def eps_q(self) -> Fraction:
        return Fraction(self.eps).limit_denominator(EPS_DENOM)


def sample_median_hashes(rng, p: MedianParams):
    """(level hashes, element hashes): L groups each, tables x (log b x L)."""
    cm = p.cm
    levels = [sample_cm_hashes(rng, cm.tables, cm.log_b, p.L) for _ in range(p.L)]
    elems = [sample_cm_hashes(rng, cm.tables, cm.log_b, p.L) for _ in range(p.L)]
    return levels, elems


class MedianNet:
    """Median network and driver."""

    def __init__(self, p: MedianParams):
        self.p = p
        L, cm = p.L, p.cm
        levels_h, elems_h = sample_median_hashes(make_rng(p.seed), p)
        net = Network("median", n=p.n, m=p.m, eps=p.eps, delta=p.delta, seed=p.seed,
                      tables=cm.tables, bins=cm.bins)
        xs = [net.add_neuron(0, False, f"in{k + 1}") for k in range(p.n)]
        a = net.add_neuron(0, False, "a")
        net.set_inputs(xs + [a])
        ins = gate(net, "OR", xs, "INS")
        code = onehot_encoder(net, xs, L, "x'")  # round 2

        # candidate register; bits 0..L-2 are set by the query's rising edge
        z = []
        for j in range(L):
            u = net.add_neuron(2, False, f"z{j}")
            net.add_synapse(u, u, 1)
            net.add_synapse(a, u, 1)
            z.append(u)
        init = edge_detector(net, a, "query")
        for j in range(L - 1):
            net.add_synapse(init, z[j], LARGE)
        qon = copy_neuron(net, a, True, "Q")

        # key register: holds the code of the last insert until the next insert
        # or query starts, so consecutive inserts only flip the differing bits
        start = edge_detector(net, ins, "start")
        clr = net.add_neuron(1, True, "start~")
        net.add_synapse(ins, clr, 1)
        net.add_synapse(net.find("start.prev"), clr, NEG_LARGE)
        net.add_synapse(init, clr, 1)
        hold = []
        for j in range(L):
            u = net.add_neuron(1, False, f"hold{j}")
            net.add_synapse(code[j], u, 2)
            net.add_synapse(u, u, 1)
            net.add_synapse(clr, u, -1)
            hold.append(u)
        key = [gate(net, "OR", [hold[j], z[j]], f"k{j}") for j in range(L)]

        # insert: code in round 2, clr in round 3, hold in round 4, key in round
        # 5, hashes stable by round 6 + 2w where the strobe samples them
        w = pot_width(L)
        pulse = build_delay_chain(net, start, 2 + 2 * w, "go").outputs[0]  # round 5 + 2w
        strobe = net.add_neuron(2, False, "strobe")
        net.add_synapse(strobe, strobe, 1)
        net.add_synapse(a, strobe, 1)
        net.add_synapse(pulse, strobe, LARGE)
        W = bit_width(p.m)
        o = build_counter(net, pulse, p.m, "o").outputs

        level_t, elem_t = [], []
        for i in range(1, L + 1):
            kb = [key[j] if j >= i - 1 else None for j in range(L)]
            level_t.append(attach_cm_tables(net, kb, None, levels_h[i - 1], p.m, f"C{i}", strobe=strobe, block=qon))
        for i in range(1, L + 1):
            elem_t.append(attach_cm_tables(net, key, None, elems_h[i - 1], p.m, f"C'{i}", strobe=strobe, block=qon))
        F = [t["count"] for t in level_t]
        Fe = [t["count"] for t in elem_t]
        count_ready = level_t[0]["count_ready"]

        # inhibitory copies for the negative comparator terms
        FI = [[copy_neuron(net, u, True, f"f~{i + 1}[{k}]") for k, u in enumerate(F[i])] for i in range(L)]
        FeI = [[copy_neuron(net, u, True, f"f'~{i + 1}[{k}]") for k, u in enumerate(Fe[i])] for i in range(L)]
        oI = [copy_neuron(net, u, True, f"o~{k}") for k, u in enumerate(o)]

        # timing chain.  Phase i reads keys from round key_i (5 for phase L, three
        # rounds after the previous decision otherwise), opens the strobe once the
        # hashes are stable and compares in round taps[i] with the counts settled.
        self.slot = count_ready + 7
        self.taps = {i: 8 + count_ready + (L - i) * self.slot for i in range(L, 0, -1)}
        chain = build_delay_chain(net, init, self.taps[1] + 1 - 2, "T").extra["chain"]
        tap = lambda r: chain[r - 3]  # chain[k] fires in round 3 + k
        for i in range(L, 0, -1):
            key_i = 5 if i == L else self.taps[i + 1] + 4
            net.add_synapse(tap(key_i + 2 * w), strobe, LARGE)
            close = copy_neuron(net, tap(self.taps[i] + 1), True, f"strobe.close{i}")
            net.add_synapse(close, strobe, NEG_LARGE)

        done = net.add_neuron(2, False, "done")
        doneI = net.add_neuron(2, True, "done~")
        fin0 = net.add_neuron(1, False, "fin0")
        nz = gate(net, "OR", o, "o.nz")
        fin = gate(net, "AND", [fin0, nz], "fin")
        for u in (done, doneI):
            net.add_synapse(fin, u, 2)
            net.add_synapse(done, u, 1)
            net.add_synapse(a, u, 1)

        eps2 = self.p.eps_q / 2
        unit = Fraction(1, eps2.denominator)
        # T_hi and T_lo per counter bit: floor(o/2) -/+ (eps/2) o
        c_hi = [Fraction(2 ** (k - 1) if k else 0) + eps2 * 2**k for k in range(W)]
        c_lo = [Fraction(2 ** (k - 1) if k else 0) - eps2 * 2**k for k in range(W)]
        G = (L + 1) * 2**W + 1
        P = {}  # phase -> latched f bits
        PI = {}
        self.g, self.s, self.e = {}, {}, {}
        for i in range(L, 0, -1):
            lab = f"ph{i}"
            T = tap(self.taps[i])
            pre = {}
            for kind in ("g", "lo", "zero"):
                bias = G if kind == "zero" else G + unit
                pre[kind] = [net.add_neuron(bias, inh, f"{lab}.{kind}{'~' if inh else ''}") for inh in (False, True)]
            for u in pre["g"]:
                net.add_synapse(T, u, G)
                for j in range(i + 1, L + 1):
                    for k, v in enumerate(P[j]):
                        net.add_synapse(v, u, 2**k)
                for k in range(W):
                    net.add_synapse(F[i - 1][k], u, 2**k)
                    net.add_synapse(FeI[i - 1][k], u, -(2**k))
                    net.add_synapse(oI[k], u, -c_hi[k])
                net.add_synapse(doneI, u, NEG_LARGE)
            for u in pre["lo"]:
                net.add_synapse(T, u, G)
                for j in range(i + 1, L + 1):
                    for k, v in enumerate(PI[j]):
                        net.add_synapse(v, u, -(2**k))
                for k in range(W):
                    net.add_synapse(FI[i - 1][k], u, -(2**k))
                    if c_lo[k] > 0:
                        net.add_synapse(o[k], u, c_lo[k])
                    elif c_lo[k] < 0:
                        net.add_synapse(oI[k], u, c_lo[k])
                net.add_synapse(doneI, u, NEG_LARGE)
            for u in pre["zero"]:
                net.add_synapse(T, u, G)
                for k in range(W):
                    net.add_synapse(FeI[i - 1][k], u, -1)
                net.add_synapse(doneI, u, NEG_LARGE)
            gE, gI = (copy_neuron(net, pre["g"][0], inh, f"g{i}{'~' if inh else ''}") for inh in (False, True))
            sE, sI = (net.add_neuron(1, inh, f"s{i}{'~' if inh else ''}") for inh in (False, True))
            for u in (sE, sI):
                net.add_synapse(pre["lo"][0], u, 1)
                net.add_synapse(pre["zero"][0], u, 1)
                net.add_synapse(pre["g"][1], u, -1)
            e = net.add_neuron(1, False, f"e{i}")
            net.add_synapse(tap(self.taps[i] + 1), e, 1)
            for kind in ("g", "lo", "zero"):
                net.add_synapse(pre[kind][1], e, -1)
            net.add_synapse(doneI, e, NEG_LARGE)
            net.add_synapse(e, fin0, 1)
            if i >= 2:
                net.add_synapse(sE, z[i - 1], LARGE)
                net.add_synapse(sI, z[i - 2], NEG_LARGE)
                net.add_synapse(gI, z[i - 2], NEG_LARGE)
                bits = []
                for k, f in enumerate(F[i - 1]):
                    u = net.add_neuron(6, False, f"P{i}[{k}]")
                    self._latch(net, u, sE, f, a)
                    bits.append(u)
                P[i] = bits
                PI[i] = [copy_neuron(net, u, True, f"P~{i}[{k}]") for k, u in enumerate(bits)]
            self.g[i], self.s[i], self.e[i] = gE, sE, e
        # phase 1 always ends the search
        last = net.add_neuron(1, False, "T.end")
        net.add_synapse(tap(self.taps[1] + 1), last, 1)
        net.add_synapse(doneI, last, NEG_LARGE)
        net.add_synapse(last, fin0, 1)

        ys = []
        for j in range(L):
            y = net.add_neuron(6, False, f"y{j}")
            self._latch(net, y, fin, z[j], a)
            ys.append(y)
        net.set_outputs(ys)

        self.net = net
        self.z, self.ys, self.o, self.F, self.Fe, self.P = z, ys, o, F, Fe, P
        self.level_t, self.elem_t = level_t, elem_t
        self.level_cnt = [np.asarray(t["counters"], dtype=np.int64) for t in level_t]
        self.elem_cnt = [np.asarray(t["counters"], dtype=np.int64) for t in elem_t]
        self.insert_window = 6 + 2 * w + decoder_latency(cm.log_b) + 2 * W + 4
        # e of phase 1 in round taps[1] + 2, fin two rounds later, y one more
        self.query_window = self.taps[1] + 7
        self.machine = Machine(net, self.insert_window)
        self.stream_len = 0
        self._onehot = np.zeros(p.n + 1, dtype=np.uint8)
        self._query_bits = np.zeros(p.n + 1, dtype=np.uint8)
        self._query_bits[-1] = 1
        self._watch = self._watch_list()

    @staticmethod
    def _latch(net: Network, u: int, setter: int, data: int, a: int) -> None:
        """u (bias 6) fires on setter AND data, then holds while a is high."""
        net.add_synapse(setter, u, 2)
        net.add_synapse(data, u, 2)
        net.add_synapse(u, u, 3)
        net.add_synapse(a, u, 3)

    def _watch_list(self) -> np.ndarray:
        ids = list(self.z) + list(self.ys)
        for i in range(self.p.L, 0, -1):
            ids += [self.g[i], self.s[i], self.e[i]] + list(self.F[i - 1])
        for i in sorted(self.P):
            ids += self.P[i]
        return np.asarray(ids, dtype=np.int64)

    # operations ---------------------------------------------------------------
    def insert(self, x: int) -> None:
        if not (1 <= x <= self.p.n):
            raise ValueError(f"item {x} outside [1, {self.p.n}]")
        if self.stream_len >= self.p.m:
            raise OverflowError(f"stream length would exceed m={self.p.m}")
        bits = self._onehot
        bits[x - 1] = 1
        try:
            self.machine.op(bits)
        finally:
            bits[x - 1] = 0
        self.stream_len += 1

    def query(self) -> MedianResult:
        """Run one median query; item is None on an empty stream."""
        rec = self.machine.op(self._query_bits, window=self.query_window, watch=self._watch)
        L = self.p.L
        col = {u: c for c, u in enumerate(self._watch.tolist())}
        read = lambda row, ids: decode_binary(row[[col[u] for u in ids]])
        trace = []
        ended = False
        for i in range(L, 0, -1):
            row = rec[self.taps[i] + 1]  # round taps[i] + 2
            fired = [k for k, u in (("g", self.g[i]), ("s", self.s[i]), ("e", self.e[i])) if row[col[u]]]
            if len(fired) != 1:
                raise RuntimeError(f"phase {i}: comparators {fired or 'none'} fired")
            f = read(row, self.F[i - 1])
            est = f + sum(read(row, self.P[j]) for j in self.P if j > i)
            trace.append(PhaseEntry(i, read(row, self.z), fired[0], est, f))
            if fired[0] == "e":
                ended = True
                break
        if self.machine.value(self.o) == 0:
            return MedianResult(None, trace)
        y = decode_binary(rec[-1][[col[u] for u in self.ys]])
        return MedianResult(y + 1, trace, forced=not ended)

    def stream_count(self) -> int:
        return self.machine.value(self.o)

    def level_tables(self, i: int) -> np.ndarray:
        return read_counters(self.machine.sim.fired, self.level_cnt[i - 1])

    def elem_tables(self, i: int) -> np.ndarray:
        return read_counters(self.machine.sim.fired, self.elem_cnt[i - 1])

    # randomness ---------------------------------------------------------------
    def hashes(self):
        L, t = self.p.L, self.p.cm.tables
        hs = self.net.hashes
        levels = [hs[(i * t):(i + 1) * t] for i in range(L)]
        elems = [hs[(L + i) * t:(L + i + 1) * t] for i in range(L)]
        return levels, elems

    def reseed(self, seed: int) -> None:
        levels, elems = sample_median_hashes(make_rng(seed), self.p)
        for k, H in enumerate([H for g in levels + elems for H in g]):
            self.net.rebind_hash(k, H)
        self.p.seed = seed
        self.net.params["seed"] = seed
        self.machine.restart()
        self.stream_len = 0

    def oracle(self) -> DyadicMedianOracle:
        levels, elems = self.hashes()
        return DyadicMedianOracle(levels, elems, self.p.cm.bins, float(self.p.eps_q))


def build_median_net(p: MedianParams) -> MedianNet:
    return MedianNet(p)


def md_aux_budget(p: MedianParams) -> float:
    lg = lambda v: max(1.0, log2(v))
    return C_MD_AUX * (1 / p.eps) * p.L**2 * lg(p.m) * lg(2 * p.L / p.delta)


def md_insert_latency_budget(p: MedianParams) -> float:
    return C_MD_INS * (log2(p.m) + log2(max(2, p.L)))


def md_latency_budget(p: MedianParams) -> float:
    """Query latency budget."""
    return C_MD_LAT * p.L * (log2(p.m) + log2(max(2, p.L)))
