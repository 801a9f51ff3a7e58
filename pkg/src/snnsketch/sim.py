"""Round-synchronous simulation of threshold-gate networks.

The fast path keeps, for every neuron, the weighted sum of its in-neighbours
that fired in the current round, and only re-evaluates neurons whose sum
changed.  All arithmetic is on integers: each neuron's in-weights and bias are
multiplied by the lcm of their denominators, which leaves every firing
decision unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm

import numpy as np
from numba import njit

from .network import Network


@dataclass
class FiringState:
    round: int
    fired: np.ndarray  # uint8 per neuron id

    def __eq__(self, other):
        return (
            isinstance(other, FiringState)
            and self.round == other.round
            and np.array_equal(self.fired, other.fired)
        )


@dataclass
class InputSchedule:
    """Sequence of (input-layer bits, hold duration in rounds)."""

    steps: list

    def __post_init__(self):
        if not self.steps:
            raise ValueError("schedule must be non-empty")
        for bits, hold in self.steps:
            if hold < 1:
                raise ValueError("hold duration must be >= 1")


def decode_binary(bits) -> int:
    """Little-endian decode: bits[0] is the least significant."""
    return sum(1 << j for j, b in enumerate(bits) if b)


def idle_state(net: Network) -> FiringState:
    return FiringState(0, np.zeros(net.n_neurons, dtype=np.uint8))


# exact reference semantics ---------------------------------------------------


def potential(net: Network, state: FiringState, u: int) -> Fraction:
    if not (0 <= u < net.n_neurons):
        raise KeyError(f"unknown neuron {u}")
    net.seal()
    total = Fraction(0)
    for s, d, w in zip(net.src, net.dst, net.w):
        if d == u and state.fired[s]:
            total += w
    return total - net.bias[u]


def step(net: Network, state: FiringState, input_bits) -> FiringState:
    """One round using exact rationals; slow, used as the reference."""
    input_bits = list(input_bits)
    if len(input_bits) != len(net.inputs):
        raise ValueError(f"expected {len(net.inputs)} input bits, got {len(input_bits)}")
    net.seal()
    acc = [Fraction(0)] * net.n_neurons
    for s, d, w in zip(net.src, net.dst, net.w):
        if state.fired[s]:
            acc[d] += w
    nxt = np.array([1 if acc[u] - net.bias[u] >= 0 else 0 for u in range(net.n_neurons)], dtype=np.uint8)
    for u, b in zip(net.inputs, input_bits):
        nxt[u] = 1 if b else 0
    return FiringState(state.round + 1, nxt)


def run(net: Network, schedule: InputSchedule) -> list[FiringState]:
    """Trace of every round, starting from the all-idle round 0."""
    sim = Simulator(net)
    trace = [sim.state()]
    for bits, hold in schedule.steps:
        rec = sim.hold(bits, hold, watch=range(net.n_neurons))
        for k in range(hold):
            trace.append(FiringState(trace[-1].round + 1, rec[k].copy()))
    return trace


# compiled fast path ----------------------------------------------------------


class Compiled:
    """CSR arrays with per-neuron integer scaling."""

    def __init__(self, net: Network):
        n = net.n_neurons
        src = np.asarray(net.src, dtype=np.int64)
        dst = np.asarray(net.dst, dtype=np.int64)
        if len(src) and (src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n):
            raise ValueError("synapse endpoint out of range")
        frac = [eid for eid, w in enumerate(net.w) if type(w) is not int]
        scale = [1] * n
        for u, b in enumerate(net.bias):
            if isinstance(b, Fraction):
                scale[u] = lcm(scale[u], b.denominator)
        for eid in frac:
            w = net.w[eid]
            if isinstance(w, Fraction):
                d = net.dst[eid]
                scale[d] = lcm(scale[d], w.denominator)
        self.scale = scale
        self.scale_arr = np.asarray(scale, dtype=np.int64)
        self.n = n
        order = np.argsort(src, kind="stable")
        self.order = order
        self.pos = np.empty(len(order), dtype=np.int64)
        self.pos[order] = np.arange(len(order))
        self.ptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.ptr, src + 1, 1)
        self.ptr = np.cumsum(self.ptr)
        self.dst = dst[order].astype(np.int32)
        self.bias = np.array([int(net.bias[u] * scale[u]) for u in range(n)], dtype=np.int64)
        self.is_input = np.zeros(n, dtype=np.uint8)
        self.is_input[net.inputs] = 1
        self.inputs = np.asarray(net.inputs, dtype=np.int64)
        self.w = np.empty(len(order), dtype=np.int64)
        self.refresh_weights(net)

    @property
    def acc_dtype(self):
        return self.w.dtype

    def refresh_weights(self, net: Network) -> None:
        dsts = np.asarray(net.dst, dtype=np.int64)
        ws = np.fromiter((w if type(w) is int else 0 for w in net.w), dtype=np.int64, count=len(net.w))
        ws = ws * np.asarray(self.scale, dtype=np.int64)[dsts] if len(ws) else ws
        for eid in [i for i, w in enumerate(net.w) if type(w) is not int]:
            v = Fraction(net.w[eid]) * self.scale[net.dst[eid]]
            if v.denominator != 1:
                raise ValueError("weight scale is stale; recompile the network")
            ws[eid] = v.numerator
        if len(ws) and np.abs(ws).max() >= 2**40:
            raise OverflowError("weights too large for 64-bit simulation")
        # 32-bit potentials when every |potential| provably fits
        reach = np.abs(self.bias).astype(np.int64)
        np.add.at(reach, dsts, np.abs(ws))
        dtype = np.int32 if reach.max(initial=0) < 2**30 else np.int64
        self.w = ws[self.order].astype(dtype)

    def update_edges(self, eids, weights) -> None:
        if len(eids) == 0:
            return
        p = self.pos[np.asarray(eids, dtype=np.int64)]
        v = np.asarray(weights, dtype=np.int64) * self.scale_arr[self.dst[p]]
        if self.w.dtype == np.int32 and np.abs(v).max() >= 2**20:
            self.w = self.w.astype(np.int64)
        self.w[p] = v


@njit(cache=True)
def _advance(ptr, dst, w, inputs, bits, fired, margin, dlist, dmark, nd, chg, rounds, watch, rec):
    # margin[u] = potential - bias, scaled; dmark is 1 for queued neurons and
    # permanently 2 for input neurons, which are never evaluated
    n_in = inputs.shape[0]
    done = 0
    nwatch = watch.shape[0]
    while done < rounds:
        nc = 0
        if done == 0:
            # inputs are constant within one call
            for k in range(n_in):
                u = inputs[k]
                if fired[u] != bits[k]:
                    chg[nc] = u
                    nc += 1
        for t in range(nd):
            u = dlist[t]
            if dmark[u] == 2:
                continue
            dmark[u] = 0
            f = 1 if margin[u] >= 0 else 0
            if f != fired[u]:
                chg[nc] = u
                nc += 1
        nd = 0
        for t in range(nc):
            v = chg[t]
            if fired[v]:
                fired[v] = 0
                for e in range(ptr[v], ptr[v + 1]):
                    if w[e] == 0:
                        continue
                    d = dst[e]
                    margin[d] -= w[e]
                    if dmark[d] == 0:
                        dmark[d] = 1
                        dlist[nd] = d
                        nd += 1
            else:
                fired[v] = 1
                for e in range(ptr[v], ptr[v + 1]):
                    if w[e] == 0:
                        continue
                    d = dst[e]
                    margin[d] += w[e]
                    if dmark[d] == 0:
                        dmark[d] = 1
                        dlist[nd] = d
                        nd += 1
        if nwatch > 0:
            for j in range(nwatch):
                rec[done, j] = fired[watch[j]]
        done += 1
        if nc == 0:
            # fixed point: nothing is dirty and the inputs are constant
            if nwatch > 0:
                for r in range(done, rounds):
                    for j in range(nwatch):
                        rec[r, j] = fired[watch[j]]
            return nd, done
    return nd, done


_NO_WATCH = np.zeros(0, dtype=np.int64)


class Simulator:
    """Stateful simulator; starts in the all-idle round 0."""

    def __init__(self, net: Network):
        self.net = net
        self.c = net.compiled()
        self.reset()

    def reset(self) -> None:
        n = self.c.n
        self.round = 0
        self.fired = np.zeros(n, dtype=np.uint8)
        self.margin = (-self.c.bias).astype(self.c.acc_dtype)
        self.dlist = np.arange(n, dtype=np.int32)
        self.dmark = self._marks()
        self.nd = n
        self.chg = np.zeros(n, dtype=np.int32)
        self.busy_rounds = 0

    def state(self) -> FiringState:
        return FiringState(self.round, self.fired.copy())

    def hold(self, bits, rounds: int, watch=None) -> np.ndarray:
        """Present input bits for `rounds` rounds; returns watched states per round."""
        if not (isinstance(bits, np.ndarray) and bits.dtype == np.uint8):
            bits = np.asarray([1 if b else 0 for b in bits], dtype=np.uint8)
        if bits.shape[0] != self.c.inputs.shape[0]:
            raise ValueError(f"expected {self.c.inputs.shape[0]} input bits, got {bits.shape[0]}")
        if rounds < 0:
            raise ValueError("rounds must be >= 0")
        if watch is None:
            watch = _NO_WATCH
            rec = np.empty((rounds, 0), dtype=np.uint8)
        else:
            watch = np.asarray(list(watch), dtype=np.int64)
            rec = np.zeros((rounds, watch.shape[0]), dtype=np.uint8)
        c = self.c
        nd, done = _advance(
            c.ptr, c.dst, c.w, c.inputs, bits, self.fired, self.margin,
            self.dlist, self.dmark, self.nd, self.chg, rounds, watch, rec,
        )
        self.nd = nd
        self.round += rounds
        self.busy_rounds += done
        return rec

    def _marks(self) -> np.ndarray:
        marks = np.ones(self.c.n, dtype=np.uint8)
        marks[self.c.inputs] = 2
        return marks

    def step(self, bits) -> FiringState:
        self.hold(bits, 1)
        return self.state()

    def invalidate(self) -> None:
        """Call after weights change so every neuron is re-evaluated next round."""
        c = self.net.compiled()
        self.c = c
        # recompute the accumulated input from the current firing state
        acc = np.zeros(c.n, dtype=c.acc_dtype)
        src_of = np.repeat(np.arange(c.n), np.diff(c.ptr))
        live = self.fired[src_of] == 1
        np.add.at(acc, c.dst[live], c.w[live])
        self.margin = acc - c.bias.astype(c.acc_dtype)
        self.dlist = np.arange(c.n, dtype=np.int32)
        self.dmark = self._marks()
        self.nd = c.n

    def value(self, ids) -> int:
        return decode_binary(self.fired[list(ids)])

    def bits(self, ids) -> list[int]:
        return [int(b) for b in self.fired[list(ids)]]
