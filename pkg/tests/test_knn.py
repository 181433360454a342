import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_counts, gaussian_cmi_bits, gaussian_mi_bits
from tedecomp.errors import InputError
from tedecomp.knn import (
    SampleBlock,
    brute_radius_counts,
    cmi_knn,
    knn_radius_counts,
    mi_knn,
    prepare,
)


def gaussian_pair(rho, n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    y = rho * x + np.sqrt(1 - rho**2) * rng.standard_normal(n)
    return x, y


def assert_counts_equal(a, b):
    eps_a, counts_a = a
    eps_b, counts_b = b
    np.testing.assert_array_equal(eps_a, eps_b)
    assert counts_a.keys() == counts_b.keys()
    for key in counts_a:
        np.testing.assert_array_equal(counts_a[key], counts_b[key])


class TestRadiusCounts:
    def test_collinear_points(self):
        block = SampleBlock.from_groups([0.0, 1.0, 2.0], [0.0, 0.0, 0.0])
        eps, _ = knn_radius_counts(block, 1)
        np.testing.assert_array_equal(eps, [1.0, 1.0, 1.0])

    def test_k_is_n_minus_one(self, rng):
        pts = rng.standard_normal((30, 2))
        block = SampleBlock(pts, 1, 1)
        eps, _ = knn_radius_counts(block, 29)
        far = np.abs(pts[:, None] - pts[None]).max(axis=2).max(axis=1)
        np.testing.assert_array_equal(eps, far)

    @pytest.mark.parametrize("dims", [(1, 1, 0), (2, 1, 0), (1, 1, 1), (2, 1, 3)])
    def test_methods_agree_with_loop_oracle(self, rng, dims):
        pts = rng.standard_normal((60, sum(dims)))
        block = SampleBlock(pts, *dims)
        expected = brute_counts(pts.tolist(), dims, 2)
        for method in ("sweep", "kdtree"):
            assert_counts_equal(knn_radius_counts(block, 2, method=method), expected)
        assert_counts_equal(brute_radius_counts(block, 2), expected)

    def test_ties_on_a_grid(self):
        # integer grid: many exactly equal distances, counts must stay strict
        g = np.array([(a, b, c) for a in range(4) for b in range(4) for c in range(3)], float)
        block = SampleBlock(g, 1, 1, 1)
        for k in (1, 3, 7):
            expected = brute_radius_counts(block, k)
            for method in ("sweep", "kdtree"):
                assert_counts_equal(knn_radius_counts(block, k, method=method), expected)

    def test_bad_k(self):
        block = SampleBlock.from_groups([0.0, 1.0], [1.0, 2.0])
        with pytest.raises(InputError):
            knn_radius_counts(block, 2)
        with pytest.raises(InputError):
            knn_radius_counts(block, 0)
        with pytest.raises(InputError):
            cmi_knn(block, 5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(12, 400), st.sampled_from([(1, 1, 0), (1, 2, 2), (2, 1, 1)]),
       st.integers(1, 10))
def test_accelerated_equals_all_pairs(seed, n, dims, k):
    rng = np.random.default_rng(seed)
    block = prepare(SampleBlock(rng.standard_normal((n, sum(dims))), *dims), seed=seed)
    expected = brute_radius_counts(block, k)
    assert_counts_equal(knn_radius_counts(block, k), expected)
    assert_counts_equal(knn_radius_counts(block, k, method="kdtree"), expected)


class TestBlock:
    def test_validation(self):
        with pytest.raises(InputError):
            SampleBlock(np.zeros((5, 3)), 1, 1, 0)
        with pytest.raises(InputError):
            SampleBlock(np.array([[0.0, np.inf]]), 1, 1)
        with pytest.raises(InputError):
            SampleBlock.from_groups(np.zeros(4), np.zeros(5))

    def test_swapped(self, rng):
        block = SampleBlock(rng.standard_normal((10, 4)), 2, 1, 1)
        sw = block.swapped()
        assert sw.dims == (1, 2, 1)
        np.testing.assert_array_equal(sw.subspace("y"), block.subspace("x"))


class TestCmi:
    def test_symmetry(self, rng):
        pts = rng.standard_normal((800, 4))
        pts[:, 1] += pts[:, 0]
        for dims in ((1, 1, 2), (2, 2, 0)):
            block = SampleBlock(pts, *dims)
            assert cmi_knn(block, seed=3).value == cmi_knn(block.swapped(), seed=3).value

    def test_deterministic_for_seed(self, rng):
        block = SampleBlock(rng.standard_normal((500, 3)), 1, 1, 1)
        assert cmi_knn(block, seed=7) == cmi_knn(block, seed=7)

    def test_duplicates_are_jittered(self):
        x = np.repeat(np.arange(50.0), 4)
        est = mi_knn(x, x % 7, k=3)
        assert np.isfinite(est.value)

    def test_metadata(self, rng):
        block = SampleBlock(rng.standard_normal((300, 4)), 2, 1, 1)
        est = cmi_knn(block, k=5, seed=1, normalize=True)
        assert (est.k, est.n, est.dims, est.normalized) == (5, 300, (2, 1, 1), True)
        rec = est.as_record()
        assert rec["variant"] == "ksg1-frenzel-pompe" and rec["jitter_scale"] == 1e-10

    def test_normalize_makes_scale_irrelevant(self, rng):
        pts = rng.standard_normal((600, 3))
        pts[:, 1] += pts[:, 0]
        scaled = pts * np.array([1.0, 1000.0, 0.01])
        a = cmi_knn(SampleBlock(pts, 1, 1, 1), normalize=True).value
        b = cmi_knn(SampleBlock(scaled, 1, 1, 1), normalize=True).value
        assert a == pytest.approx(b, abs=1e-6)

    def test_independent_gaussians(self):
        x, y = gaussian_pair(0.0, 4000, 1)
        assert abs(mi_knn(x, y).value) <= 0.05

    def test_correlated_gaussian(self):
        x, y = gaussian_pair(0.9, 8000, 2)
        assert mi_knn(x, y).value == pytest.approx(gaussian_mi_bits(0.9), abs=0.05)

    def test_conditional_independence(self):
        rng = np.random.default_rng(4)
        n = 8000
        z = rng.standard_normal(n)
        x = z + rng.standard_normal(n)
        y = z + rng.standard_normal(n)
        cov = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 1.0]])
        assert gaussian_cmi_bits(cov, [0], [1], [2]) == pytest.approx(0.0, abs=1e-12)
        est = cmi_knn(SampleBlock.from_groups(x, y, z))
        assert abs(est.value) <= 0.07

    def test_conditional_dependence_matches_analytic(self):
        rng = np.random.default_rng(5)
        n = 8000
        z = rng.standard_normal(n)
        x = z + rng.standard_normal(n)
        y = z + 0.8 * x + rng.standard_normal(n)
        data = np.column_stack([x, y, z])
        truth = gaussian_cmi_bits(np.cov(data.T), [0], [1], [2])
        est = cmi_knn(SampleBlock(data, 1, 1, 1))
        assert est.value == pytest.approx(truth, abs=0.07)


def test_error_shrinks_as_n_doubles():
    truth = gaussian_mi_bits(0.9)
    errors = []
    for n in (1000, 2000, 4000, 8000):
        values = [mi_knn(*gaussian_pair(0.9, n, 100 + s)).value for s in range(20)]
        errors.append(np.mean(np.abs(np.array(values) - truth)))
    assert all(b <= a for a, b in zip(errors, errors[1:])), errors
