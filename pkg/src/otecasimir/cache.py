"""Cache for scattering operators.

One body's raw (unmirrored, untranslated) S-matrix blocks at one mode point
-- or one stacked batch of mode points -- are expensive to build and
independent of the gap distance, so distance sweeps and transition searches
can reuse them.  The in-memory store is a byte-bounded LRU; an optional
directory adds a persistent layer (one .npz per entry, keyed by a hash of
the exact inputs).  Cached and freshly computed results are bit-identical
because the compute path is deterministic, so caching never changes output
values.
"""

from __future__ import annotations

import hashlib
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np

from .fmm import SMatrix

CACHE_FORMAT = 1

__all__ = ["OperatorCache", "CACHE_FORMAT"]


def _smat_bytes(smat):
    return sum(b.nbytes for b in smat.blocks() if b is not None)


class OperatorCache:
    """Thread-safe LRU store of SMatrix blocks keyed by exact input tuples.

    ``max_bytes`` bounds the in-memory footprint; the least recently used
    entries are dropped first (they remain on disk when a directory is set).
    """

    def __init__(self, directory=None, max_bytes=1_500_000_000):
        self._mem = OrderedDict()
        self._bytes = 0
        self._max_bytes = int(max_bytes)
        self._lock = threading.Lock()
        self._dir = None
        if directory is not None:
            self._dir = Path(directory)
            self._dir.mkdir(parents=True, exist_ok=True)

    def __len__(self):
        return len(self._mem)

    def _insert(self, key, smat):
        with self._lock:
            if key not in self._mem:
                self._mem[key] = smat
                self._bytes += _smat_bytes(smat)
                while self._bytes > self._max_bytes and len(self._mem) > 1:
                    _, old = self._mem.popitem(last=False)
                    self._bytes -= _smat_bytes(old)

    @staticmethod
    def _filename(key):
        digest = hashlib.sha256(repr(key).encode()).hexdigest()[:32]
        return f"smatrix_v{CACHE_FORMAT}_{digest}.npz"

    def get_or_compute(self, key, compute):
        """Return the SMatrix for ``key``, computing it at most when missing."""
        with self._lock:
            hit = self._mem.get(key)
            if hit is not None:
                self._mem.move_to_end(key)
        if hit is not None:
            return hit
        if self._dir is not None:
            smat = self._load_disk(key)
            if smat is not None:
                self._insert(key, smat)
                return smat
        smat = compute()
        self._insert(key, smat)
        if self._dir is not None:
            self._store_disk(key, smat)
        return smat

    def _load_disk(self, key):
        path = self._dir / self._filename(key)
        if not path.exists():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                if str(data["key_repr"]) != repr(key):
                    return None  # hash collision; recompute
                blocks = []
                for name in ("r_minus", "t_minus", "t_plus", "r_plus"):
                    blocks.append(data[name] if name in data.files else None)
                return SMatrix(*blocks)
        except (OSError, ValueError, KeyError):
            return None  # unreadable entry; fall through to recompute

    def _store_disk(self, key, smat):
        path = self._dir / self._filename(key)
        arrays = {"key_repr": np.array(repr(key))}
        for name, block in zip(("r_minus", "t_minus", "t_plus", "r_plus"), smat.blocks()):
            if block is not None:
                arrays[name] = block
        tmp = path.with_suffix(".tmp")
        try:
            with open(tmp, "wb") as fh:
                np.savez(fh, **arrays)
            tmp.replace(path)
        except OSError:
            tmp.unlink(missing_ok=True)
