import math

import numpy as np
import pytest

from memloop.core import InputError, Trajectory, make_rng
from memloop.topology import (
    Barcode,
    PointCloud,
    bottleneck_distance,
    build_rips,
    extract_cycle,
    is_nontrivial,
    persistence_z2,
)

from naive_persistence import naive_barcode

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])


def circle_points(n, radius=1.0, noise=0.0, rng=None):
    th = 2 * np.pi * np.arange(n) / n
    pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    if noise:
        pts = pts + rng.uniform(-noise, noise, size=pts.shape)
    return pts


def sorted_intervals(bc: Barcode, dim):
    return sorted(bc.intervals[dim])


class TestBuildRips:
    def test_single_point(self):
        c = build_rips(PointCloud(np.zeros((1, 2))), 1.0)
        assert c.n_vertices == 1 and len(c.edges) == 0 and len(c.triangles) == 0

    def test_square_counts(self):
        c = build_rips(PointCloud(SQUARE), 2.0)
        assert len(c.edges) == 6 and len(c.triangles) == 4
        assert np.sum(np.isclose(c.edge_filtrations, 1.0)) == 4
        assert np.sum(np.isclose(c.edge_filtrations, math.sqrt(2))) == 2
        assert np.allclose(c.triangle_filtrations, math.sqrt(2))

    def test_below_min_distance_gives_vertices_only(self):
        c = build_rips(PointCloud(SQUARE), 0.5)
        assert len(c.edges) == 0 and len(c.triangles) == 0

    def test_faces_enter_no_later_than_cofaces(self):
        rng = make_rng(3)
        c = build_rips(PointCloud(rng.normal(size=(9, 2))), 3.0)
        simps = c.simplices()
        filt = {v: f for v, f in simps}
        for verts, f in simps:
            if len(verts) > 1:
                from itertools import combinations

                for face in combinations(verts, len(verts) - 1):
                    assert filt[face] <= f + 1e-15

    def test_rejects_bad_inputs(self):
        with pytest.raises(InputError):
            build_rips(PointCloud(SQUARE), 0.0)
        with pytest.raises(InputError):
            PointCloud(np.zeros((0, 2)))


class TestPersistenceGolden:
    def test_square_h1(self):
        bc = persistence_z2(build_rips(PointCloud(SQUARE), 2.0))
        assert len(bc.intervals[1]) == 1
        birth, death = bc.intervals[1][0]
        assert birth == pytest.approx(1.0, abs=1e-12)
        assert death == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_square_h0(self):
        bc = persistence_z2(build_rips(PointCloud(SQUARE), 2.0))
        h0 = sorted_intervals(bc, 0)
        assert len(h0) == 4
        assert h0[:3] == [(0.0, 1.0)] * 3
        assert h0[3] == (0.0, math.inf)

    def test_square_representative_is_the_four_cycle(self):
        bc = persistence_z2(build_rips(PointCloud(SQUARE), 2.0))
        cyc = extract_cycle(bc, 0)
        assert len(cyc) == 4
        assert sorted(map(tuple, cyc.vertices.tolist())) == sorted(map(tuple, SQUARE.tolist()))

    def test_collinear_points_have_no_h1(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        bc = persistence_z2(build_rips(PointCloud(pts), 3.0))
        assert bc.intervals[1] == []
        assert naive_barcode(pts, 3.0)[1] == []

    def test_circle_single_bar(self):
        bc = persistence_z2(build_rips(PointCloud(circle_points(64)), 2.5))
        assert len(bc.intervals[1]) == 1
        birth, death = bc.intervals[1][0]
        assert death - birth >= 1.5
        # independent oracle on a thinned circle (naive path is dense)
        pts = circle_points(16)
        assert sorted_intervals(persistence_z2(build_rips(PointCloud(pts), 2.5)), 1) == [
            tuple(b) for b in naive_barcode(pts, 2.5)[1]
        ]

    def test_circle_representative_orders_vertices(self):
        bc = persistence_z2(build_rips(PointCloud(circle_points(64)), 2.5))
        cyc = extract_cycle(bc, 0)
        birth = bc.intervals[1][0][0]
        lens = cyc.edge_lengths()
        assert np.all(lens <= birth * (1 + 1e-9) + 1e-12)
        assert len(cyc) == 64

    def test_extract_cycle_rank_out_of_range(self):
        bc = persistence_z2(build_rips(PointCloud(SQUARE), 0.5))
        with pytest.raises(InputError):
            extract_cycle(bc, 0)


class TestOracleEquivalence:
    def test_matches_naive_on_random_clouds(self):
        rng = make_rng(42)
        for trial in range(200):
            n = int(rng.integers(3, 13))
            dim = int(rng.integers(1, 4))
            pts = rng.uniform(-1, 1, size=(n, dim))
            maxf = float(rng.uniform(0.5, 2.5))
            bc = persistence_z2(build_rips(PointCloud(pts), maxf))
            expected = naive_barcode(pts, maxf)
            for d in (0, 1):
                assert sorted_intervals(bc, d) == expected[d], f"trial {trial} dim {d}"

    def test_representatives_are_z2_cycles_at_birth_scale(self):
        rng = make_rng(11)
        for _ in range(25):
            pts = rng.uniform(-1, 1, size=(10, 2))
            bc = persistence_z2(build_rips(PointCloud(pts), 2.0))
            for (birth, _), loop in zip(bc.intervals[1], bc.representatives):
                # closed chain: every vertex has even degree along the walk
                edges = list(zip(loop, np.roll(loop, -1)))
                deg = {}
                for u, v in edges:
                    deg[u] = deg.get(u, 0) + 1
                    deg[v] = deg.get(v, 0) + 1
                assert all(c % 2 == 0 for c in deg.values())
                for u, v in edges:
                    d = np.linalg.norm(bc.points[u] - bc.points[v])
                    assert d <= birth * (1 + 1e-9) + 1e-12


class TestEulerConsistency:
    def test_rank_balance_at_every_filtration(self):
        rng = make_rng(5)
        for _ in range(10):
            pts = rng.uniform(-1, 1, size=(9, 2))
            comp = build_rips(PointCloud(pts), 2.0)
            bc = persistence_z2(comp)
            values = sorted({0.0, *comp.edge_filtrations, *comp.triangle_filtrations})
            for t in values:
                n_v = comp.n_vertices
                n_e = int(np.sum(comp.edge_filtrations <= t))
                n_t = int(np.sum(comp.triangle_filtrations <= t))
                euler = n_v - n_e + n_t
                b0 = sum(1 for b, d in bc.intervals[0] if b <= t < d)
                b1 = sum(1 for b, d in bc.intervals[1] if b <= t < d)
                b2 = int(np.sum(bc.triangle_cycle_births <= t))
                assert euler == b0 - b1 + b2, f"imbalance at filtration {t}"


class TestIsNontrivial:
    def _traj(self, pts):
        return Trajectory(
            times=np.arange(len(pts)), contexts=np.zeros((len(pts), 1)), contents=pts
        )

    def test_circle_loop_detected(self):
        flag, pers = is_nontrivial(self._traj(circle_points(32)), noise_floor=1.0)
        assert flag and pers > 1.5

    def test_line_is_trivial(self):
        pts = np.column_stack([np.linspace(0, 2 * np.pi, 32), np.zeros(32)])
        flag, pers = is_nontrivial(self._traj(pts), noise_floor=0.1)
        assert not flag and pers == 0.0

    def test_quarter_arc_is_trivial(self):
        th = np.linspace(0, np.pi / 2, 16)
        pts = np.column_stack([np.cos(th), np.sin(th)])
        flag, _ = is_nontrivial(self._traj(pts), noise_floor=0.25)
        assert not flag

    def test_degenerate_point_cloud(self):
        flag, pers = is_nontrivial(self._traj(np.zeros((6, 2))), noise_floor=0.1)
        assert not flag and pers == 0.0

    def test_noise_floor_detection_limit(self):
        rng = make_rng(9)
        base = circle_points(48)
        detected = []
        for amp in (0.02, 0.9):
            pts = base + rng.uniform(-amp, amp, size=base.shape)
            flag, _ = is_nontrivial(self._traj(pts), noise_floor=1.0)
            detected.append(flag)
        assert detected == [True, False]

    def test_needs_four_points(self):
        with pytest.raises(InputError):
            is_nontrivial(self._traj(np.zeros((3, 2))))


class TestConsolidatedCycleUncertainty:
    def test_consolidated_representative_has_lowest_joint_entropy(self):
        # among cycles in the same class at the same birth scale, the
        # consolidated representative carries the lowest joint context-content
        # entropy sampled uniformly along the loop; detoured variants (same
        # class, contractible excursions of short edges) measure higher
        from memloop.entropy import Binning
        from memloop.topology import CycleRepresentative, extract_cycle

        bc = persistence_z2(build_rips(PointCloud(circle_points(64)), 2.5))
        consolidated = extract_cycle(bc, 0)

        def with_detour(cycle, at, depth):
            # radial out-and-back spur in steps no longer than the birth edges
            v = cycle.vertices
            anchor = v[at]
            direction = anchor / np.linalg.norm(anchor)
            steps = max(3, int(np.ceil(depth / (0.8 * cycle.birth))))
            out = [anchor + direction * depth * k / steps for k in range(1, steps + 1)]
            back = out[-2::-1]
            verts = np.vstack([v[: at + 1], out, back, v[at:]])
            return CycleRepresentative(verts, cycle.persistence, cycle.birth)

        def content_uncertainty(cycle, samples=4000):
            # H(content | context) along the loop; with the context marginal
            # held fixed this orders the joint H(context, content) the same
            # way, and it is what consolidation (detour removal) reduces
            from memloop.entropy import conditional_entropy

            arcs = np.linspace(0, cycle.total_length(), samples, endpoint=False)
            pts = np.stack([cycle.point_at_arc(s) for s in arcs])
            theta = np.arctan2(pts[:, 1], pts[:, 0])
            contexts = np.column_stack([np.cos(theta), np.sin(theta)])
            b = Binning(np.full(2, -1.6), np.full(2, 1.6), 8)
            return conditional_entropy(pts, contexts, b, b)

        h_consolidated = content_uncertainty(consolidated)
        for at, depth in ((5, 0.3), (20, 0.5)):
            detoured = with_detour(consolidated, at, depth)
            assert h_consolidated < content_uncertainty(detoured)


class TestBottleneck:
    def test_identical_is_zero(self):
        bc = persistence_z2(build_rips(PointCloud(circle_points(16)), 2.5))
        assert bottleneck_distance(bc, bc, 1) == 0.0

    def test_single_bar_pair(self):
        assert bottleneck_distance([(0.0, 1.0)], [(0.0, 1.2)], 1) == pytest.approx(0.2, abs=1e-12)

    def test_diagonal_option_wins(self):
        # matching tiny bar to the diagonal (cost 0.05) beats pairing (cost 0.9)
        d = bottleneck_distance([(0.0, 1.0), (2.0, 2.1)], [(0.0, 1.0)], 1)
        assert d == pytest.approx(0.05, abs=1e-12)

    def test_symmetry(self):
        rng = make_rng(21)
        a = [(float(b), float(b + p)) for b, p in rng.uniform(0.1, 1.0, size=(5, 2))]
        b = [(float(x), float(x + p)) for x, p in rng.uniform(0.1, 1.0, size=(3, 2))]
        assert bottleneck_distance(a, b, 1) == pytest.approx(bottleneck_distance(b, a, 1), abs=1e-12)

    def test_mismatched_essentials_is_infinite(self):
        assert bottleneck_distance([(0.0, math.inf)], [], 0) == math.inf

    def test_stability_under_perturbation(self):
        rng = make_rng(33)
        base = circle_points(32)
        bc0 = persistence_z2(build_rips(PointCloud(base), 2.5))
        delta = 0.05
        for _ in range(5):
            pts = base + rng.uniform(-delta, delta, size=base.shape)
            bc1 = persistence_z2(build_rips(PointCloud(pts), 2.5))
            d = bottleneck_distance(bc0, bc1, 1)
            assert d <= 2 * delta * math.sqrt(2) + 1e-12
