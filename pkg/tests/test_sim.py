import random
from fractions import Fraction

import numpy as np
import pytest

from snnsketch.gadgets import gate
from snnsketch.network import Network
from snnsketch.sim import FiringState, InputSchedule, Simulator, decode_binary, idle_state, potential, run, step


def fan_in(bias, weights, fired):
    net = Network()
    srcs = [net.add_neuron(0) for _ in weights]
    u = net.add_neuron(bias)
    for s, w in zip(srcs, weights):
        net.add_synapse(s, u, w)
    st = idle_state(net)
    for s, f in zip(srcs, fired):
        st.fired[s] = f
    return net, st, u


def test_potential_examples():
    net, st, u = fan_in(1, [], [])
    assert potential(net, st, u) == -1
    net, st, u = fan_in(1, [3], [1])
    assert potential(net, st, u) == 2
    net, st, u = fan_in(Fraction(1, 2), [2, -1], [1, 1])
    assert potential(net, st, u) == Fraction(1, 2)


def test_fires_at_zero_potential():
    net, st, u = fan_in(1, [1], [1])
    net.set_inputs([])
    assert step(net, st, []).fired[u] == 1
    net, st, u = fan_in(1, [1], [0])
    assert step(net, st, []).fired[u] == 0
    sim = Simulator(net)
    sim.fired[0] = 0
    assert sim.step([]).fired[u] == 0


def test_empty_network_stays_idle():
    net = Network()
    trace = run(net, InputSchedule([([], 5)]))
    assert len(trace) == 6
    assert all(s.fired.size == 0 for s in trace)


def test_or_gate_fires_one_round_later():
    net = Network()
    a, b = net.add_neuron(0), net.add_neuron(0)
    net.set_inputs([a, b])
    g = gate(net, "OR", [a, b])
    trace = run(net, InputSchedule([([1, 0], 1), ([0, 0], 2)]))
    assert [int(s.fired[g]) for s in trace] == [0, 0, 1, 0]
    assert [s.round for s in trace] == [0, 1, 2, 3]


def test_decode_binary():
    assert decode_binary([0, 0, 0]) == 0
    assert decode_binary([1, 0, 0]) == 1
    assert decode_binary([1, 0, 1]) == 5


def test_schedule_validation():
    with pytest.raises(ValueError):
        InputSchedule([])
    with pytest.raises(ValueError):
        InputSchedule([([1], 0)])
    net = Network()
    net.set_inputs([net.add_neuron(0)])
    with pytest.raises(ValueError):
        Simulator(net).hold([1, 0], 1)


def random_net(rng, n=None):
    net = Network()
    n = n or rng.randint(1, 14)
    for _ in range(n):
        net.add_neuron(Fraction(rng.randint(-4, 8), rng.choice([1, 2, 3])), rng.random() < 0.3)
    net.set_inputs(rng.sample(range(n), rng.randint(0, min(3, n))))
    for _ in range(rng.randint(0, 3 * n)):
        s, d = rng.randrange(n), rng.randrange(n)
        w = Fraction(rng.randint(0, 6), rng.choice([1, 2, 4]))
        net.add_synapse(s, d, -w if net.pol[s] == "I" else w)
    return net


def test_fast_simulator_matches_exact_semantics():
    rng = random.Random(7)
    for _ in range(150):
        net = random_net(rng)
        sim = Simulator(net)
        st = idle_state(net)
        for _ in range(12):
            bits = [rng.randint(0, 1) for _ in net.inputs]
            st = step(net, st, bits)
            assert sim.step(bits) == st


def test_determinism():
    rng = random.Random(11)
    net = random_net(rng, 12)
    sched = InputSchedule([([rng.randint(0, 1) for _ in net.inputs], rng.randint(1, 4)) for _ in range(6)])
    a, b = run(net, sched), run(net, sched)
    assert a == b


def test_locality():
    """Flipping a neuron outside u's in-neighbourhood never changes u's next state."""
    rng = random.Random(5)
    for _ in range(100):
        net = random_net(rng)
        st = FiringState(0, np.array([rng.randint(0, 1) for _ in range(net.n_neurons)], dtype=np.uint8))
        bits = [rng.randint(0, 1) for _ in net.inputs]
        base = step(net, st, bits)
        u = rng.randrange(net.n_neurons)
        if u in net.inputs:
            continue
        nbrs = {s for s, _ in net.in_edges(u)}
        others = [v for v in range(net.n_neurons) if v not in nbrs]
        if not others:
            continue
        v = rng.choice(others)
        st.fired[v] ^= 1
        assert step(net, st, bits).fired[u] == base.fired[u]


def test_large_potentials_use_wide_accumulator():
    net = Network()
    x = net.add_neuron(0)
    net.set_inputs([x])
    big = 2**33
    u = net.add_neuron(big)
    net.add_synapse(x, u, big)
    v = net.add_neuron(big + 1)
    net.add_synapse(x, v, big)
    sim = Simulator(net)
    sim.hold([1], 2)
    assert sim.fired[u] == 1 and sim.fired[v] == 0
    w = net.add_neuron(0)
    net.add_synapse(x, w, 2**41)
    with pytest.raises(OverflowError):
        Simulator(net)


def test_reset_and_busy_rounds():
    net = Network()
    x = net.add_neuron(0)
    net.set_inputs([x])
    y = gate(net, "OR", [x])
    sim = Simulator(net)
    sim.hold([1], 3)
    assert sim.fired[y] == 1 and sim.round == 3
    sim.hold([0], 10)
    busy = sim.busy_rounds
    # once quiet, a call only spends the one round that detects the fixed point
    sim.hold([0], 10)
    assert sim.busy_rounds == busy + 1 and not sim.fired.any()
    sim.reset()
    assert sim.round == 0 and not sim.fired.any()
