"""Pairwise-independent hashing over GF(2) as a threshold sub-network.

Output bit j is the parity of <row_j, x>.  The network computes it by giving
a virtual neuron r_j the 0/1 weights of row j and reading the least
significant bit of its potential with a POT encoder.
"""

from __future__ import annotations

import numpy as np

from .gadgets import GadgetHandle, bit_width, build_pot_encoder
from .network import HashMatrix, Network

C_HN = 3  # auxiliaries per (output bit, POT bit)


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def sample_hash(rng: np.random.Generator, d: int, c: int, seed=None) -> HashMatrix:
    return HashMatrix(rng.integers(0, 2, size=(d, c), dtype=np.uint8), seed=seed)


def is_pow2(v: int) -> bool:
    return v >= 1 and v & (v - 1) == 0


def log2_exact(v: int) -> int:
    if not is_pow2(v):
        raise ValueError(f"{v} is not a power of two")
    return v.bit_length() - 1


def hash_oracle(H: HashMatrix, x) -> list[int]:
    """Output bits of H applied to the bit vector x (x[0] least significant)."""
    x = np.asarray(list(x), dtype=np.int64)
    if x.shape[0] != H.c:
        raise ValueError(f"input has {x.shape[0]} bits, matrix expects {H.c}")
    return [int(v) for v in (H.rows.astype(np.int64) @ x) % 2]


def hash_int(H: HashMatrix, v):
    """Integer form: v (int or int array) -> bin index, bit j = output j."""
    arr = np.asarray(v, dtype=np.int64)
    bits = (arr[..., None] >> np.arange(H.c)) & 1
    out = (bits @ H.rows.T.astype(np.int64)) % 2
    res = out @ (np.int64(1) << np.arange(H.d, dtype=np.int64))
    return int(res) if np.ndim(v) == 0 else res


def pot_width(c: int) -> int:
    """POT width for a potential in [0, c]."""
    return bit_width(c)


def attach_hash(net: Network, xs, H: HashMatrix, label: str = "h") -> GadgetHandle:
    """Embed H over the existing neurons xs; returns the d output neurons.

    An entry of xs may be None: that key bit is treated as constant zero and
    its column of H gets no synapses.
    """
    xs = list(xs)
    if len(xs) != H.c:
        raise ValueError(f"{len(xs)} input neurons for a matrix with {H.c} columns")
    cols = [k for k, x in enumerate(xs) if x is not None]
    ell = pot_width(len(cols))
    start = net.n_neurons
    outs, sites = [], []
    for j in range(H.d):
        pot = build_pot_encoder(net, [(xs[k], int(H.rows[j, k])) for k in cols], 0, ell,
                                f"{label}.b{j}", keep=[0])
        outs.append(pot.outputs[0])
        for edges in pot.extra["copy_edges"]:
            sites.extend((eid, j, k) for k, eid in zip(cols, edges))
    hid = net.add_hash(H, sites)
    out_set = set(outs)
    internals = [u for u in range(start, net.n_neurons) if u not in out_set]
    return GadgetHandle("hash", [x for x in xs if x is not None], outs, internals, 2 * ell, {"hash_index": hid})


def build_hash_net(a: int, b: int, rng, seed=None) -> tuple[GadgetHandle, HashMatrix, Network]:
    """Standalone hash network from [a] (log a input bits) to [b] (log b output bits).

    `rng` is a numpy Generator or an integer seed.
    """
    c, d = log2_exact(a), log2_exact(b)
    if c < 1 or d < 1:
        raise ValueError("a and b must be powers of two >= 2")
    if not isinstance(rng, np.random.Generator):
        seed = rng if seed is None else seed
        rng = make_rng(rng)
    H = sample_hash(rng, d, c, seed)
    net = Network("hashnet", n=a, m=0, b=b, seed=seed)
    xs = [net.add_neuron(0, False, f"x{k}") for k in range(c)]
    net.set_inputs(xs)
    h = attach_hash(net, xs, H)
    net.set_outputs(h.outputs)
    return h, H, net


def hash_aux_budget(a: int, b: int) -> int:
    c, d = log2_exact(a), log2_exact(b)
    return C_HN * d * pot_width(c)
