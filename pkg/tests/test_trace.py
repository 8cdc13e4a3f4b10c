import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pglcr.errors import TraceVersionError
from pglcr.trace import MAGIC, ChainTrace, read_trace, write_trace


def random_trace(rng, t=5, n=7, m=3, p=2, g=3, probs=True, beta=True, theta=False, model="lcr", mode="both"):
    levels = rng.integers(2, 5, size=m)
    kmax = int(levels.max())
    return ChainTrace(
        model=model, mode=mode, n_classes=g, levels=levels,
        iterations=np.arange(1, t + 1) * 10,
        labels=rng.integers(0, g, size=(t, n)),
        item_inclusion=rng.random((t, m)) < 0.5,
        predictor_inclusion=rng.random((t, p)) < 0.5,
        log_posterior=rng.normal(size=t),
        class_probs=rng.dirichlet(np.ones(g), size=(t, n)) if probs else None,
        beta=rng.normal(size=(t, p + 1, g)) if beta else None,
        theta=rng.random((t, g, m, kmax)) if theta else None,
    )


def assert_same(a, b):
    assert (a.model, a.mode, a.n_classes) == (b.model, b.mode, b.n_classes)
    for name in ("levels", "iterations", "labels", "item_inclusion", "predictor_inclusion", "log_posterior",
                 "class_probs", "beta", "theta"):
        x, y = getattr(a, name), getattr(b, name)
        if x is None:
            assert y is None
        else:
            assert np.array_equal(x, y), name


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 6), st.integers(1, 20), st.integers(1, 11), st.integers(0, 9),
       st.integers(1, 5), st.booleans(), st.booleans(), st.booleans())
def test_round_trip(tmp_path_factory, seed, t, n, m, p, g, probs, beta, theta):
    rng = np.random.default_rng(seed)
    tr = random_trace(rng, t, n, m, p, g, probs, beta, theta)
    path = tmp_path_factory.mktemp("tr") / "trace.bin"
    write_trace(tr, path)
    assert_same(tr, read_trace(path))


def test_lca_round_trip(tmp_path):
    tr = random_trace(np.random.default_rng(0), p=0, beta=False, model="lca", mode="item_sel")
    write_trace(tr, tmp_path / "t.bin")
    assert_same(tr, read_trace(tmp_path / "t.bin"))


def test_documented_layout(tmp_path):
    tr = random_trace(np.random.default_rng(1), t=2, n=4, m=9, p=2, g=2, probs=False, beta=True)
    write_trace(tr, tmp_path / "t.bin")
    raw = (tmp_path / "t.bin").read_bytes()
    head = struct.Struct("<8sHBBIIIIIII")
    magic, version, model, mode, flags, n, m, p, g, t, kmax = head.unpack_from(raw)
    assert (magic, version, model, mode, flags) == (MAGIC, 1, 1, 3, 4)
    assert (n, m, p, g, t) == (4, 9, 2, 2, 2)
    off = head.size + 2 * m
    length, iteration = struct.unpack_from("<II", raw, off)
    assert iteration == tr.iterations[0]
    labels = np.frombuffer(raw, "<u2", count=4, offset=off + 8)
    assert np.array_equal(labels, tr.labels[0] + 1)
    beta = np.frombuffer(raw, "<f8", count=6, offset=off + 16)
    assert np.array_equal(beta, tr.beta[0].ravel())
    nu_bytes = raw[off + 16 + 48: off + 16 + 48 + 2]
    bits = [(nu_bytes[j // 8] >> (j % 8)) & 1 for j in range(9)]
    assert bits == tr.item_inclusion[0].astype(int).tolist()
    assert length == 4 + 8 + 48 + 2 + 1 + 8
    assert len(raw) == off + t * (4 + length)


def test_version_and_magic_errors(tmp_path):
    tr = random_trace(np.random.default_rng(2))
    path = tmp_path / "t.bin"
    write_trace(tr, path)
    raw = bytearray(path.read_bytes())
    raw[8:10] = struct.pack("<H", 2)
    path.write_bytes(bytes(raw))
    with pytest.raises(TraceVersionError):
        read_trace(path)
    path.write_bytes(b"not a trace at all, really")
    with pytest.raises(TraceVersionError):
        read_trace(path)


def test_select_subsets_every_field():
    tr = random_trace(np.random.default_rng(3), t=6, theta=True)
    sub = tr.select(slice(2, 4))
    assert len(sub) == 2
    assert np.array_equal(sub.labels, tr.labels[2:4]) and np.array_equal(sub.theta, tr.theta[2:4])
