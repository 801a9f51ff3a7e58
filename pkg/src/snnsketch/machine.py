"""Driving a built network through a sequence of operations.

Each operation presents its input bits for a fixed window of rounds and then
one all-idle gap round, so that every operation starts with a rising edge.
"""

from __future__ import annotations

import numpy as np

from .network import Network
from .sim import Simulator


class Machine:
    def __init__(self, net: Network, window: int, gap: int = 1):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.net = net
        self.window = window
        self.gap = gap
        self.sim = Simulator(net)
        self.zeros = np.zeros(len(net.inputs), dtype=np.uint8)
        self.latencies: list[int] = []

    def reset(self) -> None:
        self.sim.reset()
        self.latencies = []

    def rebind(self) -> None:
        """Pick up weight changes made through Network.rebind_hash, keeping the state."""
        self.sim.invalidate()

    def restart(self) -> None:
        """Pick up weight changes and return to the all-idle start."""
        self.sim.c = self.net.compiled()
        self.reset()

    def op(self, bits, window: int | None = None, watch=None) -> np.ndarray:
        """Run one operation; returns the watched neurons per round of the window."""
        w = self.window if window is None else window
        before = self.sim.busy_rounds
        rec = self.sim.hold(bits, w, watch)
        self.latencies.append(self.sim.busy_rounds - before)
        if self.gap:
            self.sim.hold(self.zeros, self.gap)
        return rec

    def value(self, ids) -> int:
        return self.sim.value(ids)
