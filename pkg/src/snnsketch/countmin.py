"""Neural Count-Min sketch with inc / count operations and a heavy-hitter test.

Input layer: a, x_0 .. x_{log n - 1}.  a = 1 means inc, a = 0 means count;
x holds the 0-based code of the item.  The hash outputs are decoded into
one-hot bin selectors c_{i,j}.  A rising edge of a, delayed until the
selectors are stable, gives one go pulse; e_{i,j} = AND(c_{i,j}, go) feeds
the bin counter.  The count path s^k_{i,j} = AND(c_{i,j}, counter bit k),
g_{i,k} = OR_j s^k_{i,j}, then a min network over the tables.

With a linear hash the all-zero key always lands in bin 0, so the decoder
needs no enable signal: when x is idle it selects bin 0 of every table,
which is exactly where item 1 lives.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, e, log, log2

import numpy as np

from .gadgets import (
    NEG_LARGE,
    bit_width,
    build_counter,
    build_delay_chain,
    build_extremum,
    copy_neuron,
    edge_detector,
    gate,
)
from .hashnet import attach_hash, make_rng, pot_width, sample_hash
from .machine import Machine
from .network import Network
from .oracles import CountMinOracle
from .sim import decode_binary

C_T = 1  # tables = ceil(C_T ln 1/delta)
C_B = e  # bins = next power of two >= C_B / eps
C_CM = 16  # auxiliary budget constant
C_CM2 = 10  # latency budget constant


def next_pow2(v: int) -> int:
    return 1 << max(0, ceil(log2(v))) if v > 1 else 1


@dataclass
class CountMinParams:
    n: int
    m: int
    eps: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.m < 1:
            raise ValueError("need n >= 2 and m >= 1")
        if not (0 < self.eps < 1 and 0 < self.delta < 1):
            raise ValueError("eps and delta must lie in (0, 1)")

    @property
    def tables(self) -> int:
        return max(1, ceil(C_T * log(1 / self.delta)))

    @property
    def bins(self) -> int:
        return max(2, next_pow2(ceil(C_B / self.eps)))

    @property
    def log_b(self) -> int:
        return self.bins.bit_length() - 1

    @property
    def key_bits(self) -> int:
        return bit_width(self.n - 1)


def sample_cm_hashes(rng, tables: int, log_b: int, key_bits: int):
    return [sample_hash(rng, log_b, key_bits) for _ in range(tables)]


# shared sub-network ---------------------------------------------------------------


def decoder_latency(log_b: int) -> int:
    return 2 if log_b <= 1 else 3


def attach_cm_tables(net: Network, key_bits, go, hashes, cap: int, label: str = "cm",
                     with_count: bool = True, strobe=None, block=None) -> dict:
    """Count-Min tables over the key neurons.

    Returns a dict with the bin selectors, counter state neurons per bin,
    the per-table count vectors and the min output.  `go` (or None) is the
    neuron whose single-round pulse increments the selected bins.  With a
    `strobe` neuron the selectors only fire in the round after it does, which
    keeps hash settling glitches away from the bins; an inhibitory `block`
    neuron stops the bin counters.
    """
    key_bits = list(key_bits)
    log_b = hashes[0].d
    b = 1 << log_b
    w = pot_width(hashes[0].c)
    ha = (log_b + 1) // 2
    sel_all, cnt_all, gvecs = [], [], []
    for i, H in enumerate(hashes):
        lab = f"{label}.T{i}"
        hh = attach_hash(net, key_bits, H, f"{lab}.h")
        hbits = hh.outputs
        hneg = [copy_neuron(net, h, True, f"{lab}.hn{k}") for k, h in enumerate(hbits)]

        def half(lo: int, hi: int, tag: str) -> list[int]:
            outs = []
            for u in range(1 << (hi - lo)):
                ones = [k for k in range(lo, hi) if (u >> (k - lo)) & 1]
                d = net.add_neuron(len(ones) + (strobe is not None), False, f"{lab}.{tag}{u}")
                if strobe is not None:
                    net.add_synapse(strobe, d, 1)
                for k in range(lo, hi):
                    if (u >> (k - lo)) & 1:
                        net.add_synapse(hbits[k], d, 1)
                    else:
                        net.add_synapse(hneg[k], d, NEG_LARGE)
                outs.append(d)
            return outs

        pa = half(0, ha, "pa")
        if log_b > ha:
            pb = half(ha, log_b, "pb")
            sel = [gate(net, "AND", [pa[j & ((1 << ha) - 1)], pb[j >> ha]], f"{lab}.c{j}") for j in range(b)]
        else:
            sel = pa
        counters = []
        for j in range(b):
            src = sel[j]
            if go is not None:
                src = gate(net, "AND", [sel[j], go], f"{lab}.e{j}")
            if block is not None:
                if src == sel[j]:
                    src = copy_neuron(net, sel[j], False, f"{lab}.e{j}")
                net.add_synapse(block, src, NEG_LARGE)
            cnt = build_counter(net, src, cap, f"{lab}.n{j}")
            counters.append(cnt.outputs)
        if with_count:
            width = len(counters[0])
            g = []
            for k in range(width):
                s_k = [gate(net, "AND", [sel[j], counters[j][k]], f"{lab}.s{j},{k}") for j in range(b)]
                g.append(gate(net, "OR", s_k, f"{lab}.g{k}"))
            gvecs.append(g)
        sel_all.append(sel)
        cnt_all.append(counters)
    out = None
    if with_count:
        out = build_extremum(net, gvecs, "min", f"{label}.min").outputs
    return {
        "selectors": sel_all,
        "counters": cnt_all,
        "gvecs": gvecs,
        "count": out,
        "hash_width": w,
        "sel_ready": 2 * w + decoder_latency(log_b),
        "count_ready": 2 * w + decoder_latency(log_b) + 2 + 4,
    }


def counter_array(tables: dict) -> np.ndarray:
    """(tables, bins, bits) neuron ids of the counter states."""
    return np.asarray(tables["counters"], dtype=np.int64)


def read_counters(fired: np.ndarray, ids: np.ndarray) -> np.ndarray:
    weights = np.int64(1) << np.arange(ids.shape[-1], dtype=np.int64)
    return (fired[ids].astype(np.int64) * weights).sum(axis=-1)


# standalone network ------------------------------------------------------------


class CountMinNet:
    """Built network plus its driver.  Items are 1-based."""

    def __init__(self, p: CountMinParams, heavy_k: int | None = None):
        self.p = p
        self.heavy_k = heavy_k
        rng = make_rng(p.seed)
        hashes = sample_cm_hashes(rng, p.tables, p.log_b, p.key_bits)
        net = Network("countmin", n=p.n, m=p.m, eps=p.eps, delta=p.delta, seed=p.seed,
                      tables=p.tables, bins=p.bins)
        a = net.add_neuron(0, False, "a")
        xs = [net.add_neuron(0, False, f"x{k}") for k in range(p.key_bits)]
        net.set_inputs([a] + xs)
        w = pot_width(p.key_bits)
        edge = edge_detector(net, a, "start")
        delay = 2 * w + decoder_latency(p.log_b) - 1
        go = build_delay_chain(net, edge, delay, "go").outputs[0]
        t = attach_cm_tables(net, xs, go, hashes, p.m)
        outs = list(t["count"])
        self.go_round = 2 + delay  # round of the go pulse, op starts in round 1
        self.total = None
        self.hh = None
        if heavy_k is not None:
            if heavy_k < 1:
                raise ValueError("heavy-hitter k must be >= 1")
            total = build_counter(net, go, p.m, "total")
            self.total = total.outputs
            tneg = [copy_neuron(net, s, True, f"total.n{k}") for k, s in enumerate(total.outputs)]
            thr = net.add_neuron(0, False, "hh.thr")
            for k, y in enumerate(outs):
                net.add_synapse(y, thr, heavy_k * 2**k)
            for k, s in enumerate(tneg):
                net.add_synapse(s, thr, -(2**k))
            nz = gate(net, "OR", outs, "hh.nz")
            self.hh = gate(net, "AND", [thr, nz], "hh")
        net.set_outputs(outs + ([self.hh] if self.hh is not None else []))
        self.net = net
        self.tables_info = t
        self.count_out = outs
        self.a, self.xs = a, xs
        self.cnt_ids = counter_array(t)
        bits = bit_width(p.m)
        inc_done = self.go_round + 1 + 2 * bits + 2
        count_done = t["count_ready"] + 2 + (3 if heavy_k is not None else 0)
        self.window = max(inc_done, count_done) + 1
        self.machine = Machine(net, self.window)
        self.stream_len = 0

    # operations -------------------------------------------------------------
    def _bits(self, a: int, x: int) -> list[int]:
        if not (1 <= x <= self.p.n):
            raise ValueError(f"item {x} outside [1, {self.p.n}]")
        v = x - 1
        return [a] + [(v >> k) & 1 for k in range(self.p.key_bits)]

    def inc(self, x: int) -> None:
        if self.stream_len >= self.p.m:
            raise OverflowError(f"stream length would exceed m={self.p.m}")
        self.machine.op(self._bits(1, x))
        self.stream_len += 1

    def count(self, x: int) -> int:
        rec = self.machine.op(self._bits(0, x), watch=self.count_out)
        return decode_binary(rec[-1])

    def heavy_hitter(self, x: int) -> bool:
        if self.hh is None:
            raise RuntimeError("network was built without the heavy-hitter stage")
        rec = self.machine.op(self._bits(0, x), watch=[self.hh])
        return bool(rec[-1, 0])

    def tables(self) -> np.ndarray:
        return read_counters(self.machine.sim.fired, self.cnt_ids)

    def total_count(self) -> int:
        return self.machine.value(self.total) if self.total is not None else self.stream_len

    # randomness -------------------------------------------------------------
    def reseed(self, seed: int) -> None:
        """Swap in the hash matrices of `seed` and clear all state."""
        rng = make_rng(seed)
        for k, H in enumerate(sample_cm_hashes(rng, self.p.tables, self.p.log_b, self.p.key_bits)):
            self.net.rebind_hash(k, H)
        self.p.seed = seed
        self.net.params["seed"] = seed
        self.machine.restart()
        self.stream_len = 0

    def oracle(self) -> CountMinOracle:
        return CountMinOracle(self.net.hashes, self.p.bins)


def build_countmin_net(p: CountMinParams, heavy_k: int | None = None) -> CountMinNet:
    return CountMinNet(p, heavy_k)


def build_heavy_hitter_net(n: int, m: int, eps: float, delta: float, k: int, seed: int = 0) -> CountMinNet:
    """Count-Min with eps' = eps / (2k), a stream-length counter and a threshold neuron."""
    return CountMinNet(CountMinParams(n, m, eps / (2 * k), delta, seed), heavy_k=k)


def cm_aux_budget(p: CountMinParams) -> float:
    lg = lambda v: max(1.0, log2(v))
    return C_CM * (1 / p.eps) * lg(p.m) * lg(1 / p.delta) * lg(lg(p.n))


def cm_latency_budget(p: CountMinParams) -> float:
    return C_CM2 * (log2(max(2, p.m)) + log2(max(2, log2(p.n))))
