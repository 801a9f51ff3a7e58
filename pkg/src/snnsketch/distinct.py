"""LogLog distinct-elements network.

Pipeline per copy: one-hot input -> binary code (plus a constant-one bit
INS) -> hash -> bucket selector a_u and the leading-one position of the
suffix encoded in z -> gated comparison c_u = [dec(z) > dec(b_u)] when the
timing pulse sigma fires -> clear b_u via r_u, then write z through c^1, c^2
-> sum neuron p over all buckets -> POT.  A median-of-K stage combines the
copies' sums.

Bucket values are rho = (leading zeros of the suffix) + 1, so an empty
bucket (0) differs from a suffix that starts with a one (1).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, log2

import numpy as np

from .gadgets import (
    NEG_LARGE,
    bit_width,
    build_delay_chain,
    build_extremum,
    build_pot_encoder,
    copy_neuron,
    edge_detector,
    gate,
    onehot_encoder,
)
from .hashnet import attach_hash, make_rng, pot_width, sample_hash
from .machine import Machine
from .network import Network
from .oracles import ALPHA, LogLogOracle

C_AMP = 12
C_KB = 2  # extra bucket bits: B = 2^(ceil(2 log 1/eps) + C_KB)
C_DN = 32  # auxiliary budget constant
C_DN2 = 16  # insert latency constant


@dataclass
class LogLogParams:
    n: int
    eps: float
    delta: float
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2")
        if not (0 < self.eps < 1 and 0 < self.delta < 1):
            raise ValueError("eps and delta must lie in (0, 1)")

    @property
    def key_bits(self) -> int:
        return bit_width(self.n - 1)

    @property
    def k_bits(self) -> int:
        return ceil(2 * log2(1 / self.eps) - 1e-9) + C_KB

    @property
    def B(self) -> int:
        return 1 << self.k_bits

    @property
    def suffix(self) -> int:
        return 3 * self.key_bits

    @property
    def rho_bits(self) -> int:
        return bit_width(self.suffix + 1)

    @property
    def copies(self) -> int:
        K = max(1, ceil(C_AMP * log(1 / self.delta)))
        return K if K % 2 else K + 1


def sample_loglog_hashes(rng, p: LogLogParams):
    return [sample_hash(rng, p.k_bits + p.suffix, p.key_bits + 1) for _ in range(p.copies)]


class DistinctNet:
    """LogLog network and driver.  Items are 1-based."""

    def __init__(self, p: LogLogParams):
        self.p = p
        hashes = sample_loglog_hashes(make_rng(p.seed), p)
        net = Network("loglog", n=p.n, m=0, eps=p.eps, delta=p.delta, seed=p.seed,
                      buckets=p.B, copies=p.copies)
        xs = [net.add_neuron(0, False, f"in{k + 1}") for k in range(p.n)]
        net.set_inputs(xs)
        ins = gate(net, "OR", xs, "INS")
        code = onehot_encoder(net, xs, p.key_bits, "x'")
        wp = pot_width(p.key_bits + 1)
        # hash outputs valid from round 2 + 2wp (input in round 1); z and a one
        # and two rounds later; sigma fires once they are stable
        edge = edge_detector(net, ins, "start")
        delay = 2 * wp + 2
        sigma = build_delay_chain(net, edge, delay, "sigma").outputs[0]
        self.sigma_round = 3 + delay
        w, rb, B = p.suffix, p.rho_bits, p.B
        wg = 1 << rb
        buckets, sums = [], []
        for q, H in enumerate(hashes):
            lab = f"q{q}"
            h = attach_hash(net, code + [ins], H, f"{lab}.h").outputs
            hb, hs = h[: p.k_bits], h[p.k_bits:]
            # leading one of the suffix (bit w-1 is the most significant)
            hsi = [copy_neuron(net, s, True, f"{lab}.hs'{j}") for j, s in enumerate(hs)]
            lead = []
            for j in range(w):
                u = net.add_neuron(1, False, f"{lab}.lead{j}")
                net.add_synapse(hs[j], u, 1)
                for jj in range(j + 1, w):
                    net.add_synapse(hsi[jj], u, NEG_LARGE)
                lead.append(u)
            az = net.add_neuron(0, False, f"{lab}.allzero")
            for s in hsi:
                net.add_synapse(s, az, -1)
            z = []
            for t in range(rb):
                srcs = [lead[j] for j in range(w) if ((w - j) >> t) & 1]
                if ((w + 1) >> t) & 1:
                    srcs.append(az)
                zt = net.add_neuron(1, False, f"{lab}.z{t}")
                for s in srcs:
                    net.add_synapse(s, zt, 1)
                z.append(zt)
            hbi = [copy_neuron(net, s, True, f"{lab}.hb'{k}") for k, s in enumerate(hb)]
            sel = []
            for u in range(B):
                a = net.add_neuron(bin(u).count("1"), False, f"{lab}.a{u}")
                for k in range(p.k_bits):
                    if (u >> k) & 1:
                        net.add_synapse(hb[k], a, 1)
                    else:
                        net.add_synapse(hbi[k], a, NEG_LARGE)
                sel.append(a)
            bq = []
            for u in range(B):
                bits = [net.add_neuron(1, False, f"{lab}.b{u}[{t}]") for t in range(rb)]
                bneg = [copy_neuron(net, s, True, f"{lab}.b'{u}[{t}]") for t, s in enumerate(bits)]
                c = net.add_neuron(2 * wg + 1, False, f"{lab}.c{u}")
                net.add_synapse(sigma, c, wg)
                net.add_synapse(sel[u], c, wg)
                for t in range(rb):
                    net.add_synapse(z[t], c, 2**t)
                    net.add_synapse(bneg[t], c, -(2**t))
                r = copy_neuron(net, c, True, f"{lab}.r{u}")
                c1 = copy_neuron(net, c, False, f"{lab}.c1_{u}")
                c2 = copy_neuron(net, c1, False, f"{lab}.c2_{u}")
                for t in range(rb):
                    bt = bits[t]
                    net.add_synapse(bt, bt, 1)
                    net.add_synapse(c2, bt, "1/2")
                    net.add_synapse(z[t], bt, "1/2")
                    net.add_synapse(r, bt, NEG_LARGE)
                bq.append(bits)
            buckets.append(bq)
            ell_p = bit_width(B * (w + 1))
            pot = build_pot_encoder(net, [(bq[u][t], 2**t) for u in range(B) for t in range(rb)], 0, ell_p,
                                    f"{lab}.p")
            sums.append(pot.outputs)
        self.pot_latency = 2 * bit_width(B * (w + 1))
        if len(sums) > 1:
            med = build_extremum(net, sums, "median", "amp")
            self.median_latency = med.latency
            outs = med.outputs
        else:
            self.median_latency = 0
            outs = sums[0]
        net.set_outputs(outs)
        self.net = net
        self.sum_ids = sums
        self.bucket_ids = np.asarray(buckets, dtype=np.int64)
        self.outputs = outs
        # bucket bits are final 4 rounds after sigma
        self.window = self.sigma_round + 5
        self.settle = self.pot_latency + self.median_latency + 4
        self.machine = Machine(net, self.window)
        self._onehot = np.zeros(p.n, dtype=np.uint8)

    def insert(self, x: int) -> None:
        if not (1 <= x <= self.p.n):
            raise ValueError(f"item {x} outside [1, {self.p.n}]")
        bits = self._onehot
        bits[x - 1] = 1
        try:
            self.machine.op(bits)
        finally:
            bits[x - 1] = 0

    def buckets(self) -> np.ndarray:
        f = self.machine.sim.fired
        w = np.int64(1) << np.arange(self.p.rho_bits, dtype=np.int64)
        return (f[self.bucket_ids].astype(np.int64) * w).sum(axis=-1)

    def _settle(self) -> None:
        self.machine.sim.hold(self.machine.zeros, self.settle)

    def copy_sums(self) -> list[int]:
        self._settle()
        return [self.machine.value(ids) for ids in self.sum_ids]

    def read_estimate(self) -> tuple[int, float]:
        """(S, E): median per-copy bucket sum from the output layer and its LogLog decode."""
        self._settle()
        S = self.machine.value(self.outputs)
        return S, estimate_from_sum(S, self.p.B)

    def reseed(self, seed: int) -> None:
        for k, H in enumerate(sample_loglog_hashes(make_rng(seed), self.p)):
            self.net.rebind_hash(k, H)
        self.p.seed = seed
        self.net.params["seed"] = seed
        self.machine.restart()

    def oracle(self) -> LogLogOracle:
        return LogLogOracle(self.net.hashes, self.p.k_bits, self.p.suffix)


def estimate_from_sum(S: int, B: int, alpha: float = ALPHA) -> float:
    return alpha * B * 2.0 ** (S / B)


def build_distinct_net(p: LogLogParams) -> DistinctNet:
    return DistinctNet(p)


def dn_aux_budget(p: LogLogParams) -> float:
    lg = lambda v: max(1.0, log2(v))
    return C_DN * (1 / p.eps**2) * lg(p.n) * lg(lg(p.n)) * p.copies


def dn_latency_budget(p: LogLogParams) -> float:
    return C_DN2 * log2(max(2, log2(p.n)))
