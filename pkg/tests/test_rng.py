import numpy as np
import pytest

from graphkf import rng as rngmod
from graphkf.rng import stream_rng


def test_same_seed_same_stream_reproduces():
    a = stream_rng(3, 1).normal(size=8)
    b = stream_rng(3, 1).normal(size=8)
    assert np.array_equal(a, b)


def test_streams_are_independent():
    a = stream_rng(3, 1).normal(size=8)
    b = stream_rng(3, 2).normal(size=8)
    assert not np.allclose(a, b)


def test_seeds_differ():
    a = stream_rng(3, 1).normal(size=8)
    b = stream_rng(4, 1).normal(size=8)
    assert not np.allclose(a, b)


def test_negative_seed_or_stream_rejected():
    with pytest.raises(ValueError):
        stream_rng(-1, 0)
    with pytest.raises(ValueError):
        stream_rng(0, -2)


def test_stream_ids_are_distinct():
    names = [n for n in dir(rngmod) if n.startswith("STREAM_")]
    values = [getattr(rngmod, n) for n in names]
    assert len(values) == len(set(values))
    assert len(values) >= 7
