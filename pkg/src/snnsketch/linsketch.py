"""Turnstile linear sketch A z as a threshold network.

Per row i: POT(a+_i), POT(a-_i) read (A+ x)_i and (A- x)_i; POT(a_p,i) and
POT(a_n,i) turn them into max(Ax, 0) and max(-Ax, 0); sign-gated copies of
those and of the current output feed q_i (new signed value) and q'_i (its
negation), both read out by POT.  A single pulse travelling down the reset
chain C samples Q_i / Q'_i into delay chains of length 3 whose last stage
overwrites y_i and s_i in one round.  After the pulse a latch silences the
pipeline until the input is withdrawn.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm

import numpy as np

from .gadgets import NEG_LARGE, bit_width, build_pot_encoder, copy_neuron, edge_detector, gate
from .machine import Machine
from .network import LARGE, Network
from .oracles import LinSketchOracle

C_LS = 64  # auxiliaries per row and output bit
C_LS2 = 8  # reset chain length per output bit
WRITE_DELAY = 3


class LinSketchNet:
    def __init__(self, A, ell: int = 8):
        A = np.asarray(A)
        if A.ndim != 2 or 0 in A.shape:
            raise ValueError("sketch matrix must be a non-empty r x n array")
        if not np.all(np.equal(np.mod(A, 1), 0)):
            raise ValueError("sketch matrix must be integral")
        if ell < 1:
            raise ValueError("ell must be >= 1")
        self.A = A.astype(np.int64)
        r, n = self.A.shape
        self.r, self.n, self.ell = r, n, ell
        la = bit_width(int(np.abs(self.A).max()))
        self.la = la
        net = Network("linsketch", n=n, m=0, r=r, ell=ell)
        xs = [net.add_neuron(0, False, f"x{j + 1}") for j in range(n)]
        s = net.add_neuron(0, False, "s")
        net.set_inputs(xs + [s])
        start = net.n_neurons
        pipeline: list[int] = []

        def pot(edges, width, label):
            h = build_pot_encoder(net, edges, 0, width, label)
            pipeline.extend(h.extra["copies"])
            return h.outputs

        # outputs first so the rows can refer to them
        ys = [[net.add_neuron(1, False, f"y{i}[{j}]") for j in range(ell)] for i in range(r)]
        ss = [net.add_neuron(1, False, f"s{i}") for i in range(r)]
        # reset chain driven by one pulse per update
        r0 = gate(net, "OR", xs, "r0")
        pulse = edge_detector(net, r0, "r0.edge")
        tau = C_LS2 * ell
        chain = [pulse]
        for k in range(1, tau + 1):
            chain.append(copy_neuron(net, chain[-1], False, f"C{k}"))
        c_tau = chain[-1]
        kill = [c_tau]
        for k in range(WRITE_DELAY):
            kill.append(copy_neuron(net, kill[-1], k == WRITE_DELAY - 1, f"K{k + 1}"))
        clear = kill[-1]
        latch = net.add_neuron(2, False, "silence")
        net.add_synapse(c_tau, latch, 2)
        net.add_synapse(latch, latch, 1)
        net.add_synapse(r0, latch, 1)
        silence = copy_neuron(net, latch, True, "silence'")

        self.dp, self.dn = [], []
        for i in range(r):
            lab = f"row{i}"
            ap = [(xs[j], int(self.A[i, j])) for j in range(n) if self.A[i, j] > 0]
            an = [(xs[j], int(-self.A[i, j])) for j in range(n) if self.A[i, j] < 0]
            zp = pot(ap, la, f"{lab}.z+")
            zn = pot(an, la, f"{lab}.z-")
            zpi = [copy_neuron(net, u, True, f"{lab}.z'+{j}") for j, u in enumerate(zp)]
            zni = [copy_neuron(net, u, True, f"{lab}.z'-{j}") for j, u in enumerate(zn)]
            pipeline += zpi + zni
            P = pot([(u, 2**j) for j, u in enumerate(zp)] + [(u, -(2**j)) for j, u in enumerate(zni)], la, f"{lab}.ap")
            N = pot([(u, 2**j) for j, u in enumerate(zn)] + [(u, -(2**j)) for j, u in enumerate(zpi)], la, f"{lab}.an")
            # sign-gated copies, excitatory and inhibitory
            PE = [copy_neuron(net, u, False, f"{lab}.dp{j}") for j, u in enumerate(P)]
            PI = [copy_neuron(net, u, True, f"{lab}.dp~{j}") for j, u in enumerate(P)]
            PsE = [gate(net, "AND", [u, s], f"{lab}.dp's~{j}") for j, u in enumerate(P)]
            PsI = [gate(net, "AND", [u, s], f"{lab}.dp'{j}", True) for j, u in enumerate(P)]
            NE = [copy_neuron(net, u, False, f"{lab}.dn'~{j}") for j, u in enumerate(N)]
            NI = [copy_neuron(net, u, True, f"{lab}.dn'{j}") for j, u in enumerate(N)]
            NsE = [gate(net, "AND", [u, s], f"{lab}.dn{j}") for j, u in enumerate(N)]
            NsI = [gate(net, "AND", [u, s], f"{lab}.dn~{j}", True) for j, u in enumerate(N)]
            self.dp.append(PE + PI + PsE + PsI)
            self.dn.append(NE + NI + NsE + NsI)
            # output copies only exist while an update is present (r0 fires)
            yE = [gate(net, "AND", [u, r0], f"{lab}.yE{j}") for j, u in enumerate(ys[i])]
            yI = [gate(net, "AND", [u, r0], f"{lab}.yI{j}", True) for j, u in enumerate(ys[i])]
            ysE = [gate(net, "AND", [u, ss[i], r0], f"{lab}.y'E{j}") for j, u in enumerate(ys[i])]
            ysI = [gate(net, "AND", [u, ss[i], r0], f"{lab}.y'{j}", True) for j, u in enumerate(ys[i])]
            pipeline += PE + PI + PsE + PsI + NE + NI + NsE + NsI + yE + yI + ysE + ysI
            q = []
            for j in range(ell):
                q += [(yE[j], 2**j), (ysI[j], -(2 ** (j + 1)))]
            for j in range(la):
                q += [(PE[j], 2**j), (PsI[j], -(2 ** (j + 1))), (NI[j], -(2**j)), (NsE[j], 2 ** (j + 1))]
            qn = []
            for j in range(ell):
                qn += [(yI[j], -(2**j)), (ysE[j], 2 ** (j + 1))]
            for j in range(la):
                qn += [(PI[j], -(2**j)), (PsE[j], 2 ** (j + 1)), (NE[j], 2**j), (NsI[j], -(2 ** (j + 1)))]
            Q = pot(q, ell, f"{lab}.Q")
            Qn = pot(qn, ell, f"{lab}.Q'")
            neg = net.add_neuron(1, False, f"{lab}.neg")
            for u, wgt in qn:
                net.add_synapse(u, neg, wgt)
            pipeline.append(neg)
            # sample into delay chains and overwrite the outputs
            for j in range(ell):
                d = gate(net, "AND", [c_tau, Q[j]], f"{lab}.w{j}.1")
                d2 = gate(net, "AND", [c_tau, Qn[j]], f"{lab}.w'{j}.1")
                both = gate(net, "OR", [d, d2], f"{lab}.w{j}.2")
                last = copy_neuron(net, both, False, f"{lab}.w{j}.3")
                self._write(net, ys[i][j], last, clear)
            d = gate(net, "AND", [c_tau, neg], f"{lab}.ws.1")
            d = copy_neuron(net, d, False, f"{lab}.ws.2")
            d = copy_neuron(net, d, False, f"{lab}.ws.3")
            self._write(net, ss[i], d, clear)
            pipeline += Q + Qn

        for u in pipeline:
            net.add_synapse(silence, u, NEG_LARGE)
        net.set_outputs([u for row in ys for u in row] + ss)
        self.net = net
        self.ys, self.ss = ys, ss
        self.tau = tau
        self.chain = chain
        self.pipeline = pipeline
        self.always_on = [u for u in range(start, net.n_neurons) if net.bias[u] < 0]
        # outputs are written in round tau + 3 + WRITE_DELAY + 1 (input in round 1)
        self.write_round = tau + WRITE_DELAY + 4
        self.window = self.write_round + 2
        self.machine = Machine(net, self.window)

    @staticmethod
    def _write(net: Network, out: int, src: int, clear: int) -> None:
        net.add_synapse(out, out, 1)
        net.add_synapse(src, out, LARGE)
        net.add_synapse(clear, out, -2)

    def update(self, x: int, sign: int = 1, watch=None):
        if not (1 <= x <= self.n):
            raise ValueError(f"item {x} outside [1, {self.n}]")
        bits = np.zeros(self.n + 1, dtype=np.uint8)
        bits[x - 1] = 1
        bits[-1] = 1 if sign < 0 else 0
        return self.machine.op(bits, watch=watch)

    def update_traced(self, x: int, sign: int = 1) -> list[int]:
        """Apply an update and return, per row, how many rounds changed that row's output."""
        outs = np.asarray(self.net.outputs, dtype=np.int64)
        prev = self.machine.sim.fired[outs].copy()
        rec = self.update(x, sign, watch=outs)
        rows = np.vstack([prev[None, :], rec])
        r, ell = self.r, self.ell
        changes = []
        for i in range(r):
            cols = list(range(i * ell, (i + 1) * ell)) + [r * ell + i]
            sub = rows[:, cols]
            changes.append(int(np.any(sub[1:] != sub[:-1], axis=1).sum()))
        return changes

    def read_raw(self) -> list[tuple[int, int]]:
        return [(self.machine.value(self.ys[i]), int(self.machine.sim.fired[self.ss[i]])) for i in range(self.r)]

    def read_sketch(self) -> list[int]:
        """Signed row values; a zero magnitude always reads as +0."""
        return [-mag if sgn and mag else mag for mag, sgn in self.read_raw()]

    def oracle(self) -> LinSketchOracle:
        return LinSketchOracle(self.A)


def build_linsketch_net(A, ell: int = 8) -> LinSketchNet:
    return LinSketchNet(A, ell)


def read_sketch(ls: LinSketchNet) -> list[int]:
    return ls.read_sketch()


def ls_aux_budget(r: int, ell: int) -> int:
    """ell is the output bit width, so this is linear in r times log of the value bound."""
    return C_LS * r * ell


def ls_latency_budget(ell: int) -> int:
    return (C_LS2 + 1) * ell + 16


def load_matrix(path) -> tuple[np.ndarray, int]:
    """Matrix file: first line 'r n', then r rows of n rationals ('3', '-1/2', '0.25').

    Returns the integer matrix scaled by the lcm of the denominators, and that scale.
    """
    with open(path) as fh:
        rows = [ln.split("#", 1)[0].split() for ln in fh.read().splitlines()]
    rows = [row for row in rows if row]
    if not rows or len(rows[0]) != 2:
        raise ValueError("matrix file must start with 'r n'")
    r, n = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != r or any(len(row) != n for row in body):
        raise ValueError(f"expected {r} rows of {n} entries")
    vals = [[Fraction(v) for v in row] for row in body]
    scale = lcm(*(v.denominator for row in vals for v in row))
    return np.array([[int(v * scale) for v in row] for row in vals], dtype=np.int64), scale
