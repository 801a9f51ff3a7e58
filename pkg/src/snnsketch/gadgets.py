"""Reusable sub-network builders.

Every builder appends neurons to an existing Network and returns a
GadgetHandle naming the neurons it created.  Latencies are counted in rounds
from the first round in which the gadget's inputs are stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log2

from .network import NEG_LARGE, Network

# latency / size constants
C_POT = 3
C_CNT = 2
C_CNT2 = 3
C_EXT = 4


@dataclass
class GadgetHandle:
    name: str
    inputs: list[int]
    outputs: list[int]
    internals: list[int]
    latency: int
    extra: dict = field(default_factory=dict)

    @property
    def aux(self) -> int:
        return len(self.internals)


def _created(net: Network, start: int, outputs) -> list[int]:
    outs = set(outputs)
    return [u for u in range(start, net.n_neurons) if u not in outs]


def bit_width(v: int) -> int:
    """Number of bits needed to write every integer in [0, v]."""
    return max(1, int(v).bit_length())


def clog2(v: int) -> int:
    return max(0, ceil(log2(v))) if v > 1 else 0


# gates and chains -------------------------------------------------------------


def build_gate(net: Network, kind: str, sources, label: str = "", inhibitory: bool = False) -> GadgetHandle:
    """AND (bias = |sources|), OR (bias 1) or NOT-gated copy.

    For "NOT" the first source is copied and every further source (which must
    be inhibitory) vetoes it with a large negative weight.
    """
    sources = list(sources)
    if not sources:
        raise ValueError("gate needs at least one source")
    kind = kind.upper()
    start = net.n_neurons
    if kind == "AND":
        g = net.add_neuron(len(sources), inhibitory, label or "and")
        for s in sources:
            net.add_synapse(s, g, 1)
    elif kind == "OR":
        g = net.add_neuron(1, inhibitory, label or "or")
        for s in sources:
            net.add_synapse(s, g, 1)
    elif kind in ("NOT", "NOT-GATED-COPY"):
        g = net.add_neuron(1, inhibitory, label or "notcopy")
        net.add_synapse(sources[0], g, 1)
        for s in sources[1:]:
            net.add_synapse(s, g, NEG_LARGE)
    else:
        raise ValueError(f"unknown gate kind {kind!r}")
    return GadgetHandle(kind, sources, [g], _created(net, start, [g]), 1)


def gate(net: Network, kind: str, sources, label: str = "", inhibitory: bool = False) -> int:
    return build_gate(net, kind, sources, label, inhibitory).outputs[0]


def copy_neuron(net: Network, src: int, inhibitory: bool = False, label: str = "") -> int:
    """Neuron that fires one round after src."""
    u = net.add_neuron(1, inhibitory, label or "copy")
    net.add_synapse(src, u, 1)
    return u


def copy_vector(net: Network, srcs, inhibitory: bool = False, label: str = "") -> list[int]:
    return [copy_neuron(net, s, inhibitory, f"{label}[{j}]" if label else "") for j, s in enumerate(srcs)]


def build_delay_chain(net: Network, src: int, length: int, label: str = "chain",
                      inhibitory_last: bool = False) -> GadgetHandle:
    if length < 1:
        raise ValueError("delay chain length must be >= 1")
    start = net.n_neurons
    chain = []
    prev = src
    for k in range(1, length + 1):
        inh = inhibitory_last and k == length
        u = net.add_neuron(1, inh, f"{label}{k}")
        net.add_synapse(prev, u, 1)
        chain.append(u)
        prev = u
    return GadgetHandle("delay", [src], [chain[-1]], _created(net, start, [chain[-1]]), length,
                        {"chain": chain})


def edge_detector(net: Network, src: int, label: str = "edge") -> int:
    """Fires once, one round after src starts firing (rising edge)."""
    prev = copy_neuron(net, src, True, f"{label}.prev")
    e = net.add_neuron(1, False, label)
    net.add_synapse(src, e, 1)
    net.add_synapse(prev, e, NEG_LARGE)
    return e


def onehot_encoder(net: Network, onehot, width: int, label: str = "enc") -> list[int]:
    """Binary encoder: input k (0-based position) drives the bits of k."""
    bits = [net.add_neuron(1, False, f"{label}[{j}]") for j in range(width)]
    for k, x in enumerate(onehot):
        for j in range(width):
            if (k >> j) & 1:
                net.add_synapse(x, bits[j], 1)
    return bits


# potential encoding -------------------------------------------------------------


def build_pot_encoder(net: Network, in_edges, bias, ell: int, label: str = "pot",
                      keep=None) -> GadgetHandle:
    """Binary read-out of a target neuron's potential.

    in_edges: list of (source, weight) of the target neuron; bias: its bias.
    Builds ell copies x_i of the target, always-on inhibitors r_i with
    w(r_i, x_i) = -(2^i - 1/2), cascade inhibitors v_i (w(v_i, x_j) = -2^i for
    j < i) and outputs y_i.  With a constant potential p in [0, 2^ell) the
    outputs encode floor(p) after 2*ell rounds; a negative potential leaves
    them idle.  `keep` restricts which output bits are materialised.
    """
    if ell < 1:
        raise ValueError("POT width must be >= 1")
    in_edges = list(in_edges)
    keep = list(range(ell)) if keep is None else sorted(keep)
    start = net.n_neurons
    xs, copy_edges = [], []
    for i in range(ell):
        x = net.add_neuron(bias, False, f"{label}.x{i}")
        copy_edges.append([net.add_synapse(s, x, w) for s, w in in_edges])
        xs.append(x)
    for i in range(ell):
        r = net.add_neuron(-1, True, f"{label}.r{i}")
        net.add_synapse(r, xs[i], -(Fraction(2) ** i - Fraction(1, 2)))
    for i in range(1, ell):
        v = net.add_neuron(1, True, f"{label}.v{i}")
        net.add_synapse(xs[i], v, 1)
        for j in range(i):
            net.add_synapse(v, xs[j], -(2**i))
    ys = {}
    for i in keep:
        y = net.add_neuron(1, False, f"{label}.y{i}")
        net.add_synapse(xs[i], y, 1)
        ys[i] = y
    outs = [ys[i] for i in keep]
    return GadgetHandle("pot", [s for s, _ in in_edges], outs, _created(net, start, outs), 2 * ell,
                        {"copies": xs, "copy_edges": copy_edges, "bits": ys})


# counters and timers -------------------------------------------------------------


def build_counter(net: Network, src: int, t: int, label: str = "cnt", reset=None) -> GadgetHandle:
    """Ripple-carry binary counter of spikes of `src`.

    Per bit k: state s_k (self-loop), carry c_k = AND(p_k, s_k) and an
    inhibitory toggle t_k = AND(p_k, s_k) that clears s_k, where p_0 = src and
    p_k = c_{k-1}.  Input spikes must be single-round and at least two rounds
    apart.  Counts beyond 2^bits - 1 wrap around.  `reset` is an optional list
    of inhibitory neurons that clear the counter.
    """
    if t < 1:
        raise ValueError("counter capacity must be >= 1")
    bits = bit_width(t)
    start = net.n_neurons
    reset = list(reset or [])
    states = [net.add_neuron(1, False, f"{label}.s{k}") for k in range(bits)]
    carries, toggles = [], []
    p = src
    for k in range(bits):
        s = states[k]
        net.add_synapse(s, s, 1)
        net.add_synapse(p, s, 1)
        c = net.add_neuron(2, False, f"{label}.c{k}")
        tg = net.add_neuron(2, True, f"{label}.t{k}")
        for g in (c, tg):
            net.add_synapse(p, g, 1)
            net.add_synapse(s, g, 1)
        net.add_synapse(tg, s, NEG_LARGE)
        for r in reset:
            for g in (s, c, tg):
                net.add_synapse(r, g, NEG_LARGE)
        carries.append(c)
        toggles.append(tg)
        p = c
    return GadgetHandle("counter", [src], states, _created(net, start, states), bits + 2,
                        {"carries": carries, "toggles": toggles, "bits": bits})


def counter_latency_bound(t: int) -> int:
    return C_CNT * bit_width(t) + 2


def _timer_small(net: Network, x: int, t: int, label: str) -> GadgetHandle:
    start = net.n_neurons
    taps = [x]
    prev = x
    for k in range(1, t):
        prev = copy_neuron(net, prev, False, f"{label}.d{k}")
        taps.append(prev)
    y = gate(net, "OR", taps, f"{label}.y")
    return GadgetHandle("timer", [x], [y], _created(net, start, [y]), 1, {"K": None, "d": None})


def _timer_counting(net: Network, x: int, K: int, d: int, label: str) -> GadgetHandle:
    start = net.n_neurons
    xi = copy_neuron(net, x, True, f"{label}.xi")
    xd = copy_neuron(net, x, False, f"{label}.xd")
    L = net.add_neuron(1, False, f"{label}.L")
    net.add_synapse(L, L, 1)
    net.add_synapse(x, L, 4)
    net.add_synapse(xd, L, 4)
    P = net.add_neuron(1, False, f"{label}.P")
    Pi = net.add_neuron(1, True, f"{label}.Pi")
    for u in (P, Pi):
        net.add_synapse(L, u, 1)
        net.add_synapse(Pi, u, -4)
    cnt = build_counter(net, P, K, f"{label}.cnt", reset=[xi])
    ones = [cnt.outputs[j] for j in range(len(cnt.outputs)) if (K >> j) & 1]
    Z = net.add_neuron(len(ones), True, f"{label}.Z")
    for s in ones:
        net.add_synapse(s, Z, 1)
    net.add_synapse(xi, Z, NEG_LARGE)
    stop = Z
    if d:
        # delayed stop: an excitatory twin of Z, then d relays ending in the inhibitor
        prev = net.add_neuron(len(ones), False, f"{label}.Zc")
        for s in ones:
            net.add_synapse(s, prev, 1)
        net.add_synapse(xi, prev, NEG_LARGE)
        for k in range(d):
            last = k == d - 1
            u = net.add_neuron(1, last, f"{label}.z{k + 1}")
            net.add_synapse(prev, u, 1)
            net.add_synapse(xi, u, NEG_LARGE)
            prev = u
        stop = prev
    net.add_synapse(stop, L, -2)
    for u in (P, Pi):
        net.add_synapse(xi, u, NEG_LARGE)
        net.add_synapse(Z, u, NEG_LARGE)
    for u in cnt.outputs + cnt.extra["carries"] + cnt.extra["toggles"]:
        net.add_synapse(Z, u, NEG_LARGE)
    y = gate(net, "OR", [x, L], f"{label}.y")
    return GadgetHandle("timer", [x], [y], _created(net, start, [y]), 1, {"K": K, "d": d})


def _timer_off_round(K: int, d: int) -> int:
    from .sim import Simulator

    net = Network("timer-probe")
    x = net.add_neuron(0, False, "x")
    net.set_inputs([x])
    h = _timer_counting(net, x, K, d, "tm")
    sim = Simulator(net)
    sim.hold([1], 1)
    rec = sim.hold([0], 8 * K + 4 * d + 64, watch=h.outputs)
    on = [k for k in range(rec.shape[0]) if rec[k, 0]]
    # round of input is 1; rec[k] is round k + 2; y fires through round 1 + t
    return on[-1] + 2 - 1 if on else 0


_TIMER_CACHE: dict[int, tuple[int, int]] = {}


def build_timer(net: Network, x: int, t: int, label: str = "timer") -> GadgetHandle:
    """Output fires in rounds r+1 .. r+t after an input spike in round r.

    Re-triggering restarts the window.  Small t uses a tapped delay line;
    larger t uses a latch, a two-round clock and a binary counter whose stop
    value is calibrated at build time, giving O(log t) neurons.
    """
    if t < 1:
        raise ValueError("timer length must be >= 1")
    if t <= 8:
        return _timer_small(net, x, t, label)
    if t not in _TIMER_CACHE:
        found = None
        for K in range(max(1, t // 2 - bit_width(t) - 6), t // 2 + 3):
            base = _timer_off_round(K, 0)
            if base <= t <= base + bit_width(t) + 4:
                found = (K, t - base)
                break
        if found is None:
            raise RuntimeError(f"timer calibration failed for t={t}")
        # the relay shifts the stop by exactly d rounds; confirm by simulation
        if _timer_off_round(*found) != t:
            raise RuntimeError(f"timer calibration inconsistent for t={t}")
        _TIMER_CACHE[t] = found
    K, d = _TIMER_CACHE[t]
    return _timer_counting(net, x, K, d, label)


# extremum ------------------------------------------------------------------------


def build_extremum(net: Network, vectors, mode: str = "max", label: str = "ext") -> GadgetHandle:
    """Maass-style comparison network for max, min or median-of-k.

    Comparison neuron c_{i,j} fires iff vector i precedes... see mode:
    for max it fires iff x_i >= x_j (strictly greater for j < i), so exactly one
    selector wins and ties go to the lowest index; min mirrors this; median
    ranks the pairs (x_i, i) and selects rank ceil(k/2) - 1.
    """
    vectors = [list(v) for v in vectors]
    k = len(vectors)
    if k < 1:
        raise ValueError("extremum needs at least one vector")
    w = len(vectors[0])
    if w < 1 or any(len(v) != w for v in vectors):
        raise ValueError("vectors must share a positive width")
    mode = mode.lower()
    if mode not in ("max", "min", "median"):
        raise ValueError(f"unknown mode {mode!r}")
    start = net.n_neurons
    inh = [[copy_neuron(net, b, True, f"{label}.n{i}[{j}]") for j, b in enumerate(v)] for i, v in enumerate(vectors)]
    cmp = {}
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            if mode == "max":
                pos, neg, strict = i, j, j < i
            elif mode == "min":
                pos, neg, strict = j, i, j < i
            else:
                # c_{i,j}: (x_j, j) orders before (x_i, i)
                pos, neg, strict = i, j, j > i
            c = net.add_neuron(1 if strict else 0, False, f"{label}.c{i},{j}")
            for b in range(w):
                net.add_synapse(vectors[pos][b], c, 2**b)
                net.add_synapse(inh[neg][b], c, -(2**b))
            cmp[i, j] = c
    sel, us = [], []
    if mode in ("max", "min"):
        for i in range(k):
            row = [cmp[i, j] for j in range(k) if j != i]
            g = net.add_neuron(len(row), False, f"{label}.g{i}")
            for c in row:
                net.add_synapse(c, g, 1)
            sel.append(g)
            u_row = []
            for b in range(w):
                u = net.add_neuron(len(row) + 1, False, f"{label}.u{i}[{b}]")
                for c in row:
                    net.add_synapse(c, u, 1)
                net.add_synapse(vectors[i][b], u, 1)
                u_row.append(u)
            us.append(u_row)
        latency = C_EXT
    else:
        r = (k + 1) // 2
        for i in range(k):
            row = [cmp[i, j] for j in range(k) if j != i]
            lo = net.add_neuron(r - 1, False, f"{label}.lo{i}")
            hi = net.add_neuron(r, True, f"{label}.hi{i}")
            for c in row:
                net.add_synapse(c, lo, 1)
                net.add_synapse(c, hi, 1)
            g = net.add_neuron(1, False, f"{label}.g{i}")
            net.add_synapse(lo, g, 1)
            net.add_synapse(hi, g, NEG_LARGE)
            sel.append(g)
            u_row = []
            for b in range(w):
                u = net.add_neuron(2, False, f"{label}.u{i}[{b}]")
                net.add_synapse(lo, u, 1)
                net.add_synapse(vectors[i][b], u, 1)
                net.add_synapse(hi, u, NEG_LARGE)
                u_row.append(u)
            us.append(u_row)
        latency = C_EXT + 1
    ys = [gate(net, "OR", [us[i][b] for i in range(k)], f"{label}.y[{b}]") for b in range(w)]
    return GadgetHandle(mode, [b for v in vectors for b in v], ys, _created(net, start, ys), latency,
                        {"selectors": sel})
