"""Operator-cache behavior: hits, LRU byte bound, disk persistence."""

import numpy as np

from otecasimir.cache import OperatorCache
from otecasimir.fmm import SMatrix


def _smat(seed, n=4, semi=False):
    rng = np.random.default_rng(seed)

    def block():
        return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))

    if semi:
        return SMatrix(block(), None, None, None)
    return SMatrix(block(), block(), block(), block())


def _same(a, b):
    for x, y in zip(a.blocks(), b.blocks()):
        if (x is None) != (y is None):
            return False
        if x is not None and not np.array_equal(x, y):
            return False
    return True


def test_compute_runs_once_per_key():
    cache = OperatorCache()
    calls = []

    def compute():
        calls.append(1)
        return _smat(0)

    first = cache.get_or_compute(("k", 1), compute)
    second = cache.get_or_compute(("k", 1), compute)
    assert first is second
    assert len(calls) == 1
    cache.get_or_compute(("k", 2), lambda: _smat(1))
    assert len(cache) == 2


def test_lru_eviction_respects_byte_bound():
    n = 8
    per_entry = 4 * n * n * 16  # four complex128 blocks
    cache = OperatorCache(max_bytes=2 * per_entry)
    cache.get_or_compute("a", lambda: _smat(0, n))
    cache.get_or_compute("b", lambda: _smat(1, n))
    assert len(cache) == 2
    cache.get_or_compute("a", lambda: _smat(0, n))  # refresh "a"
    cache.get_or_compute("c", lambda: _smat(2, n))  # should evict "b"
    assert len(cache) == 2
    calls = []
    cache.get_or_compute("a", lambda: calls.append(1) or _smat(0, n))
    assert not calls  # "a" survived
    cache.get_or_compute("b", lambda: calls.append(1) or _smat(1, n))
    assert calls  # "b" was evicted and recomputed


def test_disk_layer_round_trip(tmp_path):
    key = ("body", 1.0, 2.5, ("mat", "tok"))
    original = _smat(3)
    writer = OperatorCache(directory=tmp_path)
    writer.get_or_compute(key, lambda: original)
    assert list(tmp_path.glob("smatrix_v*.npz"))

    fresh = OperatorCache(directory=tmp_path)
    loaded = fresh.get_or_compute(key, lambda: (_ for _ in ()).throw(AssertionError("should hit disk")))
    assert _same(loaded, original)


def test_disk_layer_preserves_semi_infinite_masking(tmp_path):
    key = ("half-space",)
    writer = OperatorCache(directory=tmp_path)
    writer.get_or_compute(key, lambda: _smat(4, semi=True))
    fresh = OperatorCache(directory=tmp_path)
    loaded = fresh.get_or_compute(key, lambda: _smat(5, semi=True))
    assert loaded.semi_infinite
    assert _same(loaded, _smat(4, semi=True))


def test_distinct_keys_do_not_collide(tmp_path):
    cache = OperatorCache(directory=tmp_path)
    a = cache.get_or_compute(("k", 1), lambda: _smat(10))
    b = cache.get_or_compute(("k", 2), lambda: _smat(11))
    assert not _same(a, b)
    fresh = OperatorCache(directory=tmp_path)
    assert _same(fresh.get_or_compute(("k", 1), lambda: _smat(99)), a)
    assert _same(fresh.get_or_compute(("k", 2), lambda: _smat(98)), b)
