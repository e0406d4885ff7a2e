import math

import numpy as np
import pytest

from memloop.core import (
    InputError,
    Kernel,
    RngState,
    TransitionEntry,
    TransitionMemory,
    kernel_weight,
    make_rng,
    memory_insert,
    pair_distance,
)


def entry(psi, phi, nxt, t=0, reward=None):
    return TransitionEntry(context=np.asarray(psi, float), content=np.asarray(phi, float),
                           successor=np.asarray(nxt, float), reward=reward, time=t)


class TestKernelWeight:
    def test_gaussian_identity(self):
        assert kernel_weight(Kernel("gaussian", 1.0), 0.0) == 1.0

    def test_gaussian_unit_distance(self):
        assert kernel_weight(Kernel("gaussian", 1.0), 1.0) == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_inverse_distance_zero(self):
        assert kernel_weight(Kernel("inverse-distance", 1.0), 0.0) == 1.0

    def test_rejects_bad_distance(self):
        with pytest.raises(InputError):
            kernel_weight(Kernel("gaussian", 1.0), float("nan"))
        with pytest.raises(InputError):
            kernel_weight(Kernel("gaussian", 1.0), -0.1)

    def test_monotone_non_increasing_all_kinds(self):
        dists = np.linspace(0.0, 5.0, 200)
        for kind in ("gaussian", "inverse-distance", "hard-nearest"):
            w = np.array([kernel_weight(Kernel(kind, 0.7), d) for d in dists])
            assert np.all(np.diff(w) <= 1e-15), kind


class TestPairDistance:
    def test_identity(self):
        a = (np.array([1.0, 2.0]), np.array([3.0]))
        assert pair_distance(a, a, beta=2.0) == 0.0

    def test_pure_context(self):
        a = (np.array([0.0, 0.0]), np.array([1.0]))
        b = (np.array([3.0, 4.0]), np.array([1.0]))
        assert pair_distance(a, b, beta=0.0) == pytest.approx(5.0, abs=1e-12)

    def test_successor_weighting(self):
        a = (np.array([1.0]), np.array([0.0]))
        b = (np.array([1.0]), np.array([1.0]))
        assert pair_distance(a, b, beta=4.0) == pytest.approx(2.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            pair_distance((np.zeros(2), np.zeros(1)), (np.zeros(3), np.zeros(1)), beta=1.0)

    def test_triangle_inequality_sampled(self):
        rng = make_rng(7)
        beta = 0.37
        for _ in range(1000):
            pts = [(rng.normal(size=3), rng.normal(size=2)) for _ in range(3)]
            dab = pair_distance(pts[0], pts[1], beta)
            dbc = pair_distance(pts[1], pts[2], beta)
            dac = pair_distance(pts[0], pts[2], beta)
            assert dac <= dab + dbc + 1e-12


class TestMemory:
    def test_insert_grows(self):
        store = TransitionMemory(2, 1)
        memory_insert(store, entry([0, 0], [1], [2]))
        assert len(store) == 1

    def test_order_preserved(self):
        store = TransitionMemory(1, 1)
        memory_insert(store, entry([0], [1], [2], t=0))
        memory_insert(store, entry([1], [3], [4], t=1))
        assert len(store) == 2
        assert store[0].content[0] == 1 and store[1].content[0] == 3

    def test_dimension_mismatch_rejected(self):
        store = TransitionMemory(2, 1)
        with pytest.raises(InputError):
            memory_insert(store, entry([0, 0, 0], [1], [2]))
        with pytest.raises(InputError):
            memory_insert(store, entry([0, 0], [1, 1], [2, 2]))

    def test_entries_immutable(self):
        store = TransitionMemory(1, 1)
        memory_insert(store, entry([0], [1], [2]))
        with pytest.raises(ValueError):
            store[0].context[0] = 5.0

    def test_non_finite_rejected(self):
        with pytest.raises(InputError):
            entry([np.inf], [1], [2])
        with pytest.raises(InputError):
            entry([0], [1], [2], reward=float("nan"))


class TestDeterminism:
    def test_rng_state_reproduces(self):
        a = RngState(123).generator().normal(size=10)
        b = RngState(123).generator().normal(size=10)
        assert np.array_equal(a, b)

    def test_kernel_weight_repeatable(self):
        k = Kernel("gaussian", 0.5)
        assert kernel_weight(k, 0.3) == kernel_weight(k, 0.3)
