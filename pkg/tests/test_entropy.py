import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.optimize import minimize

from conftest import P_VALUES, random_shape, random_state, shape_strategy, shapes_up_to
from qmem.entropy import (
    CapacityRegion,
    DiagonalState,
    capacity_point,
    classical_entropy,
    make_state,
    quantum_entropy,
    realize_point,
    region_boundary,
    region_contains,
    region_subset,
    thermal_state,
    total_entropy,
)
from qmem.largedev import Status, bulk_check
from qmem.shapes import log_p_norm, make_shape

LOG2 = math.log(2)


def objective(rho, p):
    H, S = classical_entropy(rho), quantum_entropy(rho)
    return S if math.isinf(p) else H / p + S


class TestState:
    def test_thermal_trit(self):
        rho = make_state(make_shape([2, 1]), [["1/3", "1/3"], ["1/3"]])
        assert rho.exact == ((Fraction(1, 3),) * 2, (Fraction(1, 3),))
        assert rho.block_weights == pytest.approx([2 / 3, 1 / 3])

    def test_pure(self):
        rho = make_state(make_shape([2]), [[1, 0]])
        assert classical_entropy(rho) == 0 and quantum_entropy(rho) == 0

    @pytest.mark.parametrize(
        "eig",
        [[[0.5], [0.5]], [[0.5, 0.6], [-0.1]], [[0.5, 0.2], [0.2]], [[0.5, float("nan")], [0.5]]],
    )
    def test_invalid(self, eig):
        with pytest.raises(ValueError):
            make_state(make_shape([2, 1]), eig)

    def test_block_count_mismatch(self):
        with pytest.raises(ValueError):
            make_state(make_shape([2, 1]), [[0.5, 0.5]])

    def test_small_drift_renormalized(self):
        rho = make_state(make_shape([2, 1]), [[0.333, 0.333], [0.334 + 1e-12]])
        assert sum(sum(b) for b in rho.exact) == 1

    def test_blocks_sorted(self):
        rho = DiagonalState([(1, [0.25]), (2, [0.5, 0.25])])
        assert rho.sizes == (2, 1)
        assert rho.spectra[0].tolist() == [0.5, 0.25]

    def test_json_round_trip(self):
        rho = random_state(make_shape([3, 2, 1]), np.random.default_rng(1))
        back = DiagonalState.from_dict(rho.to_dict())
        assert back.sizes == rho.sizes
        for x, y in zip(back.spectra, rho.spectra):
            np.testing.assert_allclose(x, y, rtol=1e-15)

    def test_normalized_spectrum(self):
        rho = make_state(make_shape([2, 1]), [[0.6, 0.2], [0.2]])
        np.testing.assert_allclose(rho.normalized_spectrum(0), [0.75, 0.25])
        empty = make_state(make_shape([2, 1]), [[0, 0], [1]])
        with pytest.raises(ValueError):
            empty.normalized_spectrum(0)


class TestEntropies:
    def test_thermal_trit_values(self):
        rho = make_state(make_shape([2, 1]), [["1/3", "1/3"], ["1/3"]])
        assert classical_entropy(rho) == pytest.approx(0.636514168, abs=1e-9)
        assert quantum_entropy(rho) == pytest.approx(2 / 3 * LOG2, abs=1e-15)

    def test_single_block_has_no_classical_entropy(self):
        rho = make_state(make_shape([4]), [[0.1, 0.2, 0.3, 0.4]])
        assert classical_entropy(rho) == 0.0

    def test_uniform_classical(self):
        rho = make_state(make_shape([1, 1, 1, 1]), [[0.25]] * 4)
        assert classical_entropy(rho) == pytest.approx(math.log(4), abs=1e-15)
        assert quantum_entropy(rho) == 0.0

    def test_uniform_qubit(self):
        rho = make_state(make_shape([2]), [[0.5, 0.5]])
        assert quantum_entropy(rho) == pytest.approx(LOG2, abs=1e-15)

    def test_zero_weight_block(self):
        rho = make_state(make_shape([2, 1]), [[0, 0], [1]])
        assert classical_entropy(rho) == 0.0 and quantum_entropy(rho) == 0.0

    def test_total_identity_and_ranges(self):
        rng = np.random.default_rng(7)
        for i in range(300):
            s = random_shape(rng, 5, 5)
            rho = random_state(s, rng, sparsity=0.3 if i % 3 == 0 else 0.0)
            H, S = classical_entropy(rho), quantum_entropy(rho)
            assert H + S == pytest.approx(total_entropy(rho), abs=1e-12)
            assert -1e-15 <= H <= math.log(s.count) + 1e-12
            assert -1e-15 <= S <= math.log(s.max_part) + 1e-12

    def test_inequality_random_states(self):
        # H/p + S never exceeds the log p-norm, for any state
        rng = np.random.default_rng(11)
        worst = -math.inf
        for i in range(1000):
            s = random_shape(rng, 5, 5)
            rho = random_state(s, rng, sparsity=0.2 if i % 4 == 0 else 0.0)
            for p in P_VALUES:
                worst = max(worst, objective(rho, p) - log_p_norm(s, p))
        assert worst <= 1e-10


class TestThermal:
    def test_p1_vertex(self):
        rho, ens = thermal_state(make_shape([2, 1, 1]), 1)
        np.testing.assert_allclose(rho.block_weights, [0.5, 0.25, 0.25], atol=1e-15)
        assert classical_entropy(rho) == pytest.approx(1.5 * LOG2, abs=1e-12)
        assert quantum_entropy(rho) == pytest.approx(0.5 * LOG2, abs=1e-12)
        assert ens.beta == 0 and math.isinf(ens.temperature)

    def test_infinity(self):
        rho, ens = thermal_state(make_shape([2, 1, 1]), math.inf)
        np.testing.assert_array_equal(rho.block_weights, [1, 0, 0])
        assert (classical_entropy(rho), quantum_entropy(rho)) == (0.0, pytest.approx(LOG2))
        assert ens.temperature == 0 and ens.free_energy == -LOG2

    def test_tied_maximal_blocks_at_infinity(self):
        rho, _ = thermal_state(make_shape([3, 3, 1]), math.inf)
        np.testing.assert_allclose(rho.block_weights, [0.5, 0.5, 0])

    @pytest.mark.parametrize("p", P_VALUES)
    def test_classical_symmetry(self, p):
        rho, _ = thermal_state(make_shape([1, 1]), p)
        np.testing.assert_allclose(rho.block_weights, [0.5, 0.5])
        assert capacity_point(make_shape([1, 1]), p) == pytest.approx((LOG2, 0), abs=1e-15)

    def test_bad_p(self):
        with pytest.raises(ValueError):
            thermal_state(make_shape([2]), 0.9)

    def test_ensemble(self):
        s = make_shape([3, 2, 2, 1])
        for p in [1.0, 1.5, 2.0, 7.0]:
            _, ens = thermal_state(s, p)
            assert ens.log_partition == pytest.approx(p * log_p_norm(s, p), abs=1e-12)
            assert ens.energies == tuple(-math.log(k) for k in s.blocks())
            if p > 1:
                assert ens.temperature == pytest.approx(1 / (p - 1))
                assert ens.free_energy == pytest.approx(-ens.log_partition / (p - 1))

    def test_equality_on_random_shapes(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            s = random_shape(rng, 6, 6)
            for p in P_VALUES:
                rho, _ = thermal_state(s, p)
                assert objective(rho, p) == pytest.approx(log_p_norm(s, p), abs=1e-10)
                H, S = capacity_point(s, p)
                assert H == pytest.approx(classical_entropy(rho), abs=1e-10)
                assert S == pytest.approx(quantum_entropy(rho), abs=1e-10)

    def test_optimal_among_perturbations(self):
        rng = np.random.default_rng(5)
        s = make_shape([4, 3, 2, 2, 1])
        for p in P_VALUES:
            rho, _ = thermal_state(s, p)
            best = objective(rho, p)
            for _ in range(1000 // len(P_VALUES) + 1):
                scale = 10 ** rng.uniform(-6, -1)
                blocks = [
                    (k, np.clip(spec + scale * rng.standard_normal(k), 0, None))
                    for k, spec in zip(rho.sizes, rho.spectra)
                ]
                total = sum(float(w.sum()) for _, w in blocks)
                other = DiagonalState([(k, w / total) for k, w in blocks])
                assert objective(other, p) <= best + 1e-10

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_numeric_maximization(self, p):
        # optimize block weights directly (uniform spectra are optimal inside a block)
        s = make_shape([3, 2, 1, 1])
        sizes = np.array(list(s.blocks()), dtype=float)

        def neg(x):
            r = np.exp(x - x.max())
            r /= r.sum()
            return -(-np.sum(r * np.log(r)) / p + np.sum(r * np.log(sizes)))

        res = minimize(neg, np.zeros(len(sizes)), method="BFGS", options={"gtol": 1e-12})
        r = np.exp(res.x - res.x.max())
        np.testing.assert_allclose(r / r.sum(), thermal_state(s, p)[0].block_weights, atol=1e-5)
        assert -res.fun == pytest.approx(log_p_norm(s, p), abs=1e-10)


class TestCapacityPoint:
    def test_reference_points(self):
        s = make_shape([2, 1, 1])
        assert capacity_point(s, 1) == pytest.approx((1.0397, 0.3466), abs=1e-4)
        H, S = capacity_point(s, 3)
        assert H + 3 * S == pytest.approx(math.log(10), abs=1e-12)
        assert capacity_point(s, math.inf) == (0.0, LOG2)

    @pytest.mark.parametrize("p", P_VALUES)
    def test_single_block(self, p):
        assert capacity_point(make_shape([5]), p) == pytest.approx((0, math.log(5)), abs=1e-15)

    @given(shape_strategy(6, 6))
    @settings(max_examples=100, deadline=None)
    def test_on_supporting_line(self, s):
        for p in P_VALUES[:-1] + [40.0]:
            H, S = capacity_point(s, p)
            assert H / p + S == pytest.approx(log_p_norm(s, p), abs=1e-10)
            assert region_contains(s, H, S).status is not Status.VIOLATED


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


class TestBoundary:
    def test_reference_polygon(self):
        pts = region_boundary(make_shape([2, 1, 1]), 256)
        assert pts[0] == (0.0, LOG2)
        assert pts[-1] == (math.log(4), 0.0)
        for vertex in [(0.0, 0.693), (1.040, 0.347), (1.386, 0.0)]:
            assert min(math.dist(vertex, q) for q in pts) < 5e-3

    def test_convex(self):
        for shape in [[2, 1, 1], [3, 3, 2, 1], [5, 1, 1, 1, 1], [4, 4, 4, 2]]:
            pts = region_boundary(make_shape(shape), 128)
            # the polyline runs clockwise around the region: every turn is rightward
            for o, a, b in zip(pts, pts[1:], pts[2:]):
                assert _cross(o, a, b) <= 1e-12, shape
            for H, S in pts:
                assert region_contains(make_shape(shape), H, S).status is not Status.VIOLATED

    def test_top_segment(self):
        pts = region_boundary(make_shape([3, 3, 1]), 32)
        assert pts[:2] == [(0.0, math.log(3)), (LOG2, math.log(3))]

    def test_classical(self):
        assert region_boundary(make_shape([1, 1, 1])) == [(0.0, 0.0), (math.log(3), 0.0)]

    def test_single_block(self):
        assert region_boundary(make_shape([2])) == [(0.0, LOG2), (LOG2, 0.0)]

    def test_samples(self):
        with pytest.raises(ValueError):
            region_boundary(make_shape([2, 1]), 1)


class TestContains:
    def test_examples(self):
        v = region_contains(make_shape([2, 1]), 0, LOG2)
        assert v.ok and abs(v.margin) < 1e-12 and v.witness_p == math.inf
        assert region_contains(make_shape([1, 1, 1]), 0, LOG2).status is Status.VIOLATED
        assert region_contains(make_shape([2, 1, 1]), 1.6, 0).status is Status.VIOLATED

    def test_origin_and_negative(self):
        assert region_contains(make_shape([1]), 0, 0).ok
        assert region_contains(make_shape([3, 1]), -0.1, 0.2).status is Status.VIOLATED

    def test_region_invariants(self):
        rng = np.random.default_rng(2)
        for _ in range(40):
            s = random_shape(rng, 5, 5)
            region = CapacityRegion(s)
            assert (0.0, 0.0) in region
            assert region.support(1) == pytest.approx(math.log(s.total))
            for _ in range(20):
                H, S = rng.uniform(0, 2.5, size=2)
                if (H, S) in region:
                    assert S <= math.log(s.max_part) + 1e-9
                    assert H + S <= math.log(s.total) + 1e-9

    def test_convex_combination(self):
        rng = np.random.default_rng(4)
        s = make_shape([4, 2, 1, 1])
        inside = [pt for pt in rng.uniform(0, 2, size=(200, 2)) if tuple(pt) in CapacityRegion(s)]
        for _ in range(100):
            i, j = rng.integers(len(inside), size=2)
            lam = rng.uniform()
            mid = lam * inside[i] + (1 - lam) * inside[j]
            assert region_contains(s, *mid).margin >= -1e-12


class TestSubset:
    def test_examples(self):
        v = region_subset(make_shape([2, 2, 2]), make_shape([3, 3]))
        assert v.status is Status.MARGINAL
        v = region_subset(make_shape([2, 1]), make_shape([1, 1, 1, 1]))
        assert v.status is Status.VIOLATED
        assert v.witness_point == pytest.approx((0, LOG2))
        s = make_shape([3, 2, 1])
        assert region_subset(s, s).ok

    def test_matches_bulk_check(self):
        shapes = shapes_up_to(6)
        for a in shapes:
            for b in shapes:
                v = region_subset(a, b, samples=16)
                assert v.status is bulk_check(a, b).status, (a, b)
                if v.status is Status.VIOLATED:
                    assert not region_contains(b, *v.witness_point).ok


class TestRealize:
    def check(self, s, H, S):
        rho, t = realize_point(s, H, S)
        assert rho.shape == s
        assert t >= 0
        assert classical_entropy(rho) + t == pytest.approx(H, abs=1e-8)
        assert quantum_entropy(rho) - t == pytest.approx(S, abs=1e-8)
        return rho, t

    def test_p1_vertex(self):
        s = make_shape([2, 1, 1])
        rho, t = self.check(s, *capacity_point(s, 1))
        assert t == pytest.approx(0, abs=1e-12)
        np.testing.assert_allclose(rho.block_weights, [0.5, 0.25, 0.25], atol=1e-12)

    def test_entropy_trade(self):
        rho, t = self.check(make_shape([2]), LOG2, 0)
        assert t == pytest.approx(LOG2)
        np.testing.assert_allclose(rho.spectra[0], [0.5, 0.5])

    def test_interior(self):
        self.check(make_shape([2, 1, 1]), 0.5, 0.3)

    def test_transfer_beyond_one_nat(self):
        # t is not capped at 1: a single large block trades all of its entropy
        _, t = self.check(make_shape([20]), math.log(20), 0)
        assert t > 1

    def test_outside(self):
        with pytest.raises(ValueError):
            realize_point(make_shape([2, 1, 1]), 1.6, 0)

    def test_random_points(self):
        rng = np.random.default_rng(9)
        done = 0
        while done < 500:
            s = random_shape(rng, 5, 5)
            H = rng.uniform(0, math.log(s.total))
            S = rng.uniform(0, math.log(s.max_part) + 1e-300)
            if region_contains(s, H, S).status is not Status.HOLDS:
                continue
            self.check(s, H, S)
            done += 1
