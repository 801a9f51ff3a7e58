import itertools
import random

import pytest

from snnsketch.gadgets import (
    C_CNT2,
    C_EXT,
    C_POT,
    bit_width,
    build_counter,
    build_delay_chain,
    build_extremum,
    build_gate,
    build_pot_encoder,
    build_timer,
    counter_latency_bound,
    edge_detector,
    onehot_encoder,
)
from snnsketch.network import Network, validate
from snnsketch.sim import Simulator


def with_inputs(k):
    net = Network()
    xs = [net.add_neuron(0, False, f"x{j}") for j in range(k)]
    net.set_inputs(xs)
    return net, xs


@pytest.mark.parametrize("kind,bits,want", [
    ("AND", [1, 1], 1), ("AND", [1, 0], 0), ("OR", [0, 1, 0], 1), ("OR", [0, 0, 0], 0),
])
def test_gate_truth_table(kind, bits, want):
    net, xs = with_inputs(len(bits))
    g = build_gate(net, kind, xs).outputs[0]
    sim = Simulator(net)
    sim.hold(bits, 1)
    assert sim.fired[g] == 0  # one round of latency
    sim.hold(bits, 1)
    assert sim.fired[g] == want


def test_not_gated_copy():
    net, (x,) = with_inputs(1)
    inh = net.add_neuron(1, True)
    net.add_synapse(x, inh, 1)
    g = build_gate(net, "NOT", [x, inh]).outputs[0]
    sim = Simulator(net)
    rec = sim.hold([1], 3, watch=[g])
    # the copy fires in round 2 and is vetoed once the inhibitor has fired
    assert rec[:, 0].tolist() == [0, 1, 0]
    assert validate(net) == []


def test_delay_chain():
    for length in (1, 5):
        net, (x,) = with_inputs(1)
        h = build_delay_chain(net, x, length)
        sim = Simulator(net)
        rec = [sim.hold([1], 1, watch=h.outputs)[0, 0]]
        rec += sim.hold([0], length + 3, watch=h.outputs)[:, 0].tolist()
        assert [r for r, v in enumerate(rec) if v] == [length]
    net, (x,) = with_inputs(1)
    h = build_delay_chain(net, x, 4)
    sim = Simulator(net)
    assert not sim.hold([0], 20, watch=h.outputs).any()
    with pytest.raises(ValueError):
        build_delay_chain(net, x, 0)


def test_edge_detector_fires_once():
    net, (x,) = with_inputs(1)
    e = edge_detector(net, x)
    sim = Simulator(net)
    rec = sim.hold([1], 6, watch=[e])[:, 0].tolist()
    assert rec == [0, 1, 0, 0, 0, 0]


def test_onehot_encoder():
    net, xs = with_inputs(6)
    bits = onehot_encoder(net, xs, 3)
    sim = Simulator(net)
    for k in range(6):
        sim.reset()
        sim.hold([int(j == k) for j in range(6)], 2)
        assert sim.value(bits) == k


def pot_net(ell):
    net, xs = with_inputs(ell)
    h = build_pot_encoder(net, [(x, 2**j) for j, x in enumerate(xs)], 0, ell)
    return net, h


def test_pot_examples():
    net, h = pot_net(3)
    sim = Simulator(net)
    sim.hold([0, 0, 0], h.latency + 1)
    assert sim.bits(h.outputs) == [0, 0, 0]
    sim.reset()
    sim.hold([1, 0, 1], h.latency + 1)
    assert sim.bits(h.outputs)[::-1] == [1, 0, 1]


def test_pot_exhaustive_small_and_stable():
    for ell in range(1, 7):
        net, h = pot_net(ell)
        assert h.latency <= C_POT * ell
        assert len(h.internals) <= 4 * ell
        sim = Simulator(net)
        for p in range(2**ell):
            sim.reset()
            bits = [(p >> j) & 1 for j in range(ell)]
            sim.hold(bits, h.latency + 1)
            assert sim.value(h.outputs) == p
            # stays put while the inputs do
            rec = sim.hold(bits, 5, watch=h.outputs)
            assert (rec == rec[0]).all()


def test_pot_fractional_weights_floor():
    net, (x, y) = with_inputs(2)
    h = build_pot_encoder(net, [(x, "5/2"), (y, "3/4")], "1/4", 3)
    sim = Simulator(net)
    sim.hold([1, 1], h.latency + 1)
    assert sim.value(h.outputs) == 3  # floor(5/2 + 3/4 - 1/4)


def test_pot_negative_potential_idle():
    net, (x,) = with_inputs(1)
    h = build_pot_encoder(net, [(x, 1)], 3, 3)
    sim = Simulator(net)
    assert not sim.hold([1], h.latency + 2, watch=h.outputs).any()


@pytest.mark.parametrize("t", [1, 2, 5, 13, 100, 1000])
def test_counter_counts_spikes(t):
    rng = random.Random(t)
    net, (x,) = with_inputs(1)
    h = build_counter(net, x, t)
    assert len(h.internals) <= C_CNT2 * bit_width(t)
    sim = Simulator(net)
    sim.hold([0], 3)
    assert sim.value(h.outputs) == 0
    spikes = min(t, 40)
    settled = []
    for k in range(spikes):
        sim.hold([1], 1)
        sim.hold([0], rng.randint(1, 3))
        if k % 7 == 6:
            # carries ripple in flight; the settled value is monotone
            sim.hold([0], counter_latency_bound(t))
            settled.append(sim.value(h.outputs))
            assert settled[-1] == k + 1
    assert settled == sorted(settled)
    sim.hold([0], counter_latency_bound(t))
    assert sim.value(h.outputs) == spikes


def test_counter_five_spaced_spikes():
    net, (x,) = with_inputs(1)
    h = build_counter(net, x, 7)
    sim = Simulator(net)
    for _ in range(5):
        sim.hold([1], 1)
        sim.hold([0], counter_latency_bound(7))
    assert sim.value(h.outputs) == 5


@pytest.mark.parametrize("t", [1, 3, 8, 9, 20, 77, 300])
def test_timer_window(t):
    net, (x,) = with_inputs(1)
    h = build_timer(net, x, t)
    if t > 8:
        assert len(h.internals) <= 4 * C_CNT2 * bit_width(t) + 16
    sim = Simulator(net)
    sim.hold([1], 1)  # round 1
    rec = sim.hold([0], t + 4, watch=h.outputs)[:, 0]  # rounds 2 ..
    on = [k + 2 for k, v in enumerate(rec) if v]
    assert on == list(range(2, t + 2))


def test_timer_retrigger_restarts():
    t = 30
    net, (x,) = with_inputs(1)
    h = build_timer(net, x, t)
    sim = Simulator(net)
    sim.hold([1], 1)
    sim.hold([0], 9)
    sim.hold([1], 1)  # round 11
    rec = sim.hold([0], t + 5, watch=h.outputs)[:, 0]
    on = [k + 12 for k, v in enumerate(rec) if v]
    assert on[-1] == 11 + t


@pytest.mark.parametrize("mode,want", [("max", 7), ("min", 2), ("median", 3)])
def test_extremum_examples(mode, want):
    net, xs = with_inputs(9)
    vecs = [xs[0:3], xs[3:6], xs[6:9]]
    h = build_extremum(net, vecs, mode)
    sim = Simulator(net)
    vals = [3, 7, 2]
    sim.hold([(v >> j) & 1 for v in vals for j in range(3)], h.latency + 1)
    assert sim.value(h.outputs) == want


def test_extremum_single_vector_is_copy():
    net, xs = with_inputs(3)
    h = build_extremum(net, [xs], "max")
    sim = Simulator(net)
    sim.hold([1, 1, 0], h.latency + 1)
    assert sim.value(h.outputs) == 3


def test_extremum_exhaustive_width4():
    for mode in ("max", "min", "median"):
        net, xs = with_inputs(12)
        h = build_extremum(net, [xs[0:4], xs[4:8], xs[8:12]], mode)
        assert len(h.internals) <= C_EXT * (3**2 + 3 * 4)
        sim = Simulator(net)
        for vals in itertools.product(range(16), repeat=3):
            sim.reset()
            sim.hold([(v >> j) & 1 for v in vals for j in range(4)], h.latency + 1)
            want = {"max": max(vals), "min": min(vals), "median": sorted(vals)[1]}[mode]
            assert sim.value(h.outputs) == want, (mode, vals)


def test_extremum_even_median_takes_upper_middle_rank():
    net, xs = with_inputs(8)
    h = build_extremum(net, [xs[0:2], xs[2:4], xs[4:6], xs[6:8]], "median")
    sim = Simulator(net)
    vals = [3, 0, 2, 1]
    sim.hold([(v >> j) & 1 for v in vals for j in range(2)], h.latency + 1)
    assert sim.value(h.outputs) == 1  # ceil(4/2)-th smallest
