"""The compiled reduction core and the pure-Python fallback must agree exactly."""

import numpy as np
import pytest

from memloop import _reduce_py
from memloop._backend import backend_name
from memloop.core import make_rng
from memloop.topology import PointCloud, build_rips

try:
    from memloop import _fastreduce
except ImportError:  # pragma: no cover - extension not built
    _fastreduce = None

needs_ext = pytest.mark.skipif(_fastreduce is None, reason="compiled core not built")


def random_columns(rng, n_cols, n_faces, max_width=4):
    cols = []
    for _ in range(n_cols):
        k = int(rng.integers(0, max_width + 1))
        faces = rng.choice(n_faces, size=min(k, n_faces), replace=False)
        cols.append(np.sort(faces).astype(np.int64))
    return cols


def assert_same(a, b):
    lows_a, chains_a, cycles_a = a
    lows_b, chains_b, cycles_b = b
    assert np.array_equal(lows_a, lows_b)
    assert set(chains_a) == set(chains_b)
    for k in chains_a:
        assert np.array_equal(chains_a[k], chains_b[k])
    assert set(cycles_a) == set(cycles_b)
    for k in cycles_a:
        assert np.array_equal(cycles_a[k], cycles_b[k])


class TestBackendEquivalence:
    def test_backend_name_is_known(self):
        assert backend_name() in ("compiled", "python")

    @needs_ext
    def test_random_boundary_matrices(self):
        rng = make_rng(0)
        for _ in range(50):
            n_faces = int(rng.integers(1, 40))
            n_cols = int(rng.integers(1, 60))
            cols = random_columns(rng, n_cols, n_faces)
            a = _fastreduce.reduce_columns(cols, n_faces, need_chains=True, need_basis=True)
            b = _reduce_py.reduce_columns(cols, n_faces, need_chains=True, need_basis=True)
            assert_same(a, b)

    @needs_ext
    def test_real_rips_complexes(self):
        rng = make_rng(1)
        for n in (8, 16, 24):
            th = 2 * np.pi * np.arange(n) / n
            pts = np.column_stack([np.cos(th), np.sin(th)]) + rng.normal(0, 0.05, size=(n, 2))
            comp = build_rips(PointCloud(pts), 2.5)
            edge_cols = [comp.edges[j] for j in range(len(comp.edges))]
            assert_same(
                _fastreduce.reduce_columns(edge_cols, n, need_basis=True),
                _reduce_py.reduce_columns(edge_cols, n, need_basis=True),
            )
            eidx = {}
            for j, (u, v) in enumerate(map(tuple, comp.edges)):
                eidx[(u, v)] = j
            tri_cols = [
                np.sort([eidx[(t[0], t[1])], eidx[(t[0], t[2])], eidx[(t[1], t[2])]])
                for t in map(tuple, comp.triangles)
            ]
            assert_same(
                _fastreduce.reduce_columns(tri_cols, len(comp.edges), need_chains=True),
                _reduce_py.reduce_columns(tri_cols, len(comp.edges), need_chains=True),
            )

    @needs_ext
    def test_empty_and_degenerate_columns(self):
        cols = [np.empty(0, dtype=np.int64), np.array([0, 1]), np.array([0, 1])]
        assert_same(
            _fastreduce.reduce_columns(cols, 2, need_chains=True, need_basis=True),
            _reduce_py.reduce_columns(cols, 2, need_chains=True, need_basis=True),
        )
