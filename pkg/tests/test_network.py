from fractions import Fraction

import numpy as np
import pytest

from snnsketch.gadgets import gate
from snnsketch.network import LARGE, NEG_LARGE, HashMatrix, Network, validate


def and_gate():
    net = Network("and")
    a = net.add_neuron(0, False, "a")
    b = net.add_neuron(0, False, "b")
    net.set_inputs([a, b])
    g = gate(net, "AND", [a, b], "g")
    net.set_outputs([g])
    return net


def test_validate_accepts_and_gate():
    assert validate(and_gate()) == []


def test_validate_flags_positive_inhibitory_edge():
    net = Network()
    u = net.add_neuron(0, True)
    v = net.add_neuron(1)
    net.add_synapse(u, v, 1)
    errs = validate(net)
    assert len(errs) == 1 and "inhibitory" in errs[0]


def test_validate_flags_missing_endpoint():
    net = Network()
    u = net.add_neuron(0)
    net.add_synapse(u, 7, 1)
    assert len(validate(net)) == 1


def test_validate_flags_layer_overlap():
    net = Network()
    u = net.add_neuron(0)
    net.set_inputs([u])
    net.set_outputs([u])
    assert any("overlap" in e for e in validate(net))


def test_large_weight_dominates_other_inputs():
    net = Network()
    srcs = [net.add_neuron(0) for _ in range(3)]
    inh = net.add_neuron(0, True)
    t = net.add_neuron(Fraction(5, 2))
    for s in srcs:
        net.add_synapse(s, t, 2)
    net.add_synapse(inh, t, NEG_LARGE)
    exc = net.add_neuron(0)
    net.add_synapse(exc, t, LARGE)
    net.seal()
    ws = dict((s, w) for s, w in net.in_edges(t))
    other = 6 + Fraction(5, 2) + 1
    assert ws[exc] == 4 * other
    # the inhibitory weight beats every excitatory input together
    assert -ws[inh] > 6 + ws[exc] + Fraction(5, 2)


def test_rationals_are_exact():
    net = Network()
    u = net.add_neuron("1/3")
    v = net.add_neuron(0.5)
    net.add_synapse(u, v, Fraction(-2, 7))
    assert net.bias[u] == Fraction(1, 3) and net.bias[v] == Fraction(1, 2)
    with pytest.raises(TypeError):
        net.add_neuron(True)
    with pytest.raises(ValueError):
        net.add_neuron(float("nan"))


def test_export_round_trip():
    net = and_gate()
    net.add_hash(HashMatrix(np.array([[1, 0, 1], [0, 1, 1]])), [])
    u = net.add_neuron("-3/4", True, "odd label")
    net.add_synapse(u, net.outputs[0], NEG_LARGE)
    text = net.to_text()
    assert text.startswith("snn v1 and n=0 m=0\n")
    assert "N 3 bias=-3/4 pol=I odd label" in text
    back = Network.from_text(text)
    assert back.to_text() == text
    assert back.hashes == net.hashes
    assert back.inputs == net.inputs and back.outputs == net.outputs


def test_import_rejects_bad_records():
    with pytest.raises(ValueError, match="header"):
        Network.from_text("nope\n")
    with pytest.raises(ValueError, match="line 2"):
        Network.from_text("snn v1 x n=1 m=0\nQ 1 2\n")
    with pytest.raises(ValueError, match="polarity"):
        Network.from_text("snn v1 x n=1 m=0\nN 0 bias=1/1 pol=X\n")


def test_hash_matrix_line_round_trip():
    rng = np.random.default_rng(3)
    for d, c in [(1, 1), (4, 10), (7, 3)]:
        H = HashMatrix(rng.integers(0, 2, size=(d, c)))
        assert HashMatrix.from_line(H.to_line()) == H
    with pytest.raises(ValueError):
        HashMatrix(np.array([[0, 2]]))


def test_aux_count():
    net = and_gate()
    assert net.aux_count() == 0
    net.add_neuron(1)
    assert net.aux_count() == 1
