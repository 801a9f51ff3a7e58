import numpy as np
import pytest

from snnsketch.linsketch import build_linsketch_net, load_matrix, ls_aux_budget, ls_latency_budget, read_sketch
from snnsketch.network import validate


def test_identity_insert():
    ls = build_linsketch_net([[1]], 8)
    assert read_sketch(ls) == [0]
    ls.update(1, +1)
    assert ls.read_raw() == [(1, 0)]


def test_mixed_stream_example():
    ls = build_linsketch_net([[1, -1], [2, 0]], 8)
    for x, s in [(1, 1), (2, 1), (1, -1)]:
        ls.update(x, s)
    assert read_sketch(ls) == [-1, 0]
    assert ls.read_raw()[0] == (1, 1)
    assert ls.read_sketch()[1] == 0


def test_sign_flip():
    ls = build_linsketch_net([[-1]], 8)
    ls.update(1, +1)
    assert ls.read_raw() == [(1, 1)] and ls.read_sketch() == [-1]


def test_cancellation_and_repeats():
    ls = build_linsketch_net([[2, 1]], 8)
    ls.update(2, +1)
    ls.update(2, -1)
    assert ls.read_sketch() == [0]
    for _ in range(3):
        ls.update(1, +1)
    assert ls.read_sketch() == [6]
    for k in range(100):
        ls.update(2, 1 if k % 2 == 0 else -1)
    assert ls.read_sketch() == [6]


def test_random_exactness_and_exactly_once():
    rng = np.random.default_rng(3)
    for _ in range(6):
        r, n = int(rng.integers(1, 5)), int(rng.integers(1, 17))
        A = rng.integers(-3, 4, size=(r, n))
        ls = build_linsketch_net(A, 8)
        assert validate(ls.net) == []
        assert ls.net.aux_count() <= ls_aux_budget(r, 8)
        o = ls.oracle()
        for _ in range(60):
            x, s = int(rng.integers(1, n + 1)), int(rng.choice([-1, 1]))
            o.update(x, s)
            if max(map(abs, o.reading())) >= 256:
                o.update(x, -s)
                continue
            changes = ls.update_traced(x, s)
            assert max(changes) <= 1
            assert ls.read_sketch() == o.reading()
        assert max(ls.machine.latencies) <= ls_latency_budget(8)


def test_quiescence_after_update():
    ls = build_linsketch_net([[1, -2, 3], [0, 1, -1]], 6)
    outs = set(ls.net.outputs) | set(ls.net.inputs) | set(ls.always_on)
    aux = [u for u in range(ls.net.n_neurons) if u not in outs]
    c_tau = ls.chain[-1]
    for x, s in [(1, 1), (3, -1), (2, 1), (2, 1)]:
        rec = ls.update(x, s, watch=[c_tau] + ls.pipeline)
        t = int(np.flatnonzero(rec[:, 0])[0])
        # the pipeline is silenced once the pulse has passed the write stage
        assert not rec[t + 3:, 1:].any()
        ls.machine.sim.hold(ls.machine.zeros, 3)
        assert not ls.machine.sim.fired[aux].any()


def test_sign_exclusivity():
    A = np.array([[1, -1, 2], [-3, 0, 1]])
    ls = build_linsketch_net(A, 6)
    rng = np.random.default_rng(1)
    for _ in range(30):
        watch = [ls.chain[-1]] + [u for i in range(2) for u in ls.dp[i] + ls.dn[i]]
        rec = ls.update(int(rng.integers(1, 4)), int(rng.choice([-1, 1])), watch=watch)
        # judged in the sampling round, once the POT stages have settled
        row = rec[int(np.flatnonzero(rec[:, 0])[0]), 1:]
        col = 0
        for i in range(2):
            kp, kn = len(ls.dp[i]), len(ls.dn[i])
            assert not (row[col:col + kp].any() and row[col + kp:col + kp + kn].any())
            col += kp + kn


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        build_linsketch_net([[0.5]], 4)
    with pytest.raises(ValueError):
        build_linsketch_net([[1]], 0)
    ls = build_linsketch_net([[1, 1]], 4)
    with pytest.raises(ValueError):
        ls.update(3, 1)


def test_load_matrix_scales_rationals(tmp_path):
    p = tmp_path / "A.txt"
    p.write_text("# sketch\n2 3\n1 -1/2 0\n0.25 2 1\n")
    A, scale = load_matrix(p)
    assert scale == 4
    assert A.tolist() == [[4, -2, 0], [1, 8, 4]]
    p.write_text("2 2\n1 1\n")
    with pytest.raises(ValueError):
        load_matrix(p)
