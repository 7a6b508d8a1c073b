import math

import numpy as np
import pytest

from nsbesov import BesovIndex, SpectrumProfile, besov, besov_norm, dyadic_decompose, lp_norm, make_grid, random_field, transform, weak_lp_norm
from nsbesov.errors import ExponentOutOfRange
from nsbesov.norms import (
    ConstantStats,
    block_lp_norms,
    critical_s,
    embedding_exponent,
    k_functional,
    make_dyadic_partition,
    modulus,
    phi,
    smooth_step,
    verify_embedding,
    verify_product,
)
from nsbesov.spectral import random_scalar_field

from oracles import besov_oracle, block_weight, weak_lp_oracle


class TestPartition:
    def test_smooth_step_limits(self):
        assert smooth_step([0.0, 1.0, 2.0, 3.0]).tolist() == [1.0, 1.0, 0.0, 0.0]
        r = np.linspace(1.0, 2.0, 101)
        assert np.all(np.diff(smooth_step(r)) <= 0)
        assert smooth_step(1.5) == pytest.approx(0.5)

    def test_phi_support(self):
        xi = np.linspace(0.0, 3.0, 301)
        v = phi(xi)
        assert np.all(v[(xi < 0.5) | (xi > 2.0)] == 0)
        assert np.all(v >= 0)

    def test_j_range_on_default_box(self):
        part = make_dyadic_partition(make_grid(3, 32))
        assert (part.j_min, part.j_max) == (-1, 5)

    def test_blocks_sum_to_one(self, grid16):
        part = make_dyadic_partition(grid16)
        total = sum(part.weights)
        np.testing.assert_allclose(total[grid16.nonzero], 1.0, atol=1e-15)
        assert total[0, 0, 0] == 0

    def test_weights_match_oracle(self, grid16):
        part = make_dyadic_partition(grid16)
        for j in part.js:
            ref = block_weight(grid16.kmag, j)
            ref[0, 0, 0] = 0
            np.testing.assert_allclose(part.weight(j), ref, atol=1e-15)

    def test_reconstruct(self, grid16):
        f = random_field(grid16, SpectrumProfile(0.0, 7.0, 2))
        dec = dyadic_decompose(f)
        np.testing.assert_allclose(dec.reconstruct().coeffs, f.coeffs, atol=1e-15)


class TestLebesgue:
    def test_l2_of_cosine(self):
        g = make_grid(3, 16)
        x, y, z = g.coordinates()
        f = transform(np.cos(x + 2 * y), g)
        assert lp_norm(f, 2) == pytest.approx(math.sqrt(g.volume / 2))
        assert lp_norm(f, math.inf) == pytest.approx(1.0)

    def test_vector_modulus_is_euclidean(self, grid8):
        x, y, z = grid8.coordinates()
        v = transform(np.stack([np.cos(x), np.sin(x), np.zeros_like(x)]), grid8)
        np.testing.assert_allclose(modulus(v), 1.0)

    def test_weak_bounded_by_strong(self, grid16):
        f = random_field(grid16, SpectrumProfile(0.0, 5.0, 3))
        for p in (1.5, 2.0, 3.0, 6.0):
            assert weak_lp_norm(f, p) <= lp_norm(f, p) * (1 + 1e-12)

    def test_weak_matches_level_sets(self, grid16):
        f = random_scalar_field(grid16, SpectrumProfile(-0.5, 6.0, 8))
        a = np.abs(f.physical())
        assert weak_lp_norm(f, 3.0) == weak_lp_oracle(a, 3.0, grid16.cell_volume)

    def test_weak_with_ties(self, grid8):
        x, _, _ = grid8.coordinates()
        f = transform(np.sign(np.cos(x)) + 0.0 * x, grid8)
        a = np.abs(f.physical())
        assert weak_lp_norm(f, 2.0) == pytest.approx(weak_lp_oracle(a, 2.0, grid8.cell_volume), rel=1e-15)

    def test_exponent_checks(self, grid8):
        f = random_field(grid8, SpectrumProfile(0.0, 2.0, 1))
        with pytest.raises(ExponentOutOfRange):
            lp_norm(f, 0.5)
        with pytest.raises(ExponentOutOfRange):
            weak_lp_norm(f, math.inf)


class TestBesov:
    @pytest.mark.parametrize("s,p,q", [(0.5, 2, math.inf), (-0.5, 2, math.inf), (0.25, 3, 1), (1.0, 1.5, 2), (0.0, math.inf, math.inf)])
    def test_matches_oracle(self, grid16, s, p, q):
        f = random_field(grid16, SpectrumProfile(-1.0, 7.0, 11))
        ref = besov_oracle(f.coeffs, 3, grid16.L, s, p, q)
        assert besov(f, s, p, q) == pytest.approx(ref, rel=1e-12)

    def test_parseval_path_equals_quadrature(self, grid16):
        f = random_field(grid16, SpectrumProfile(0.0, 7.0, 4))
        js, fast = block_lp_norms(f, 2)
        dec = dyadic_decompose(f)
        slow = [lp_norm(b, 2) for b in dec.blocks]
        np.testing.assert_allclose(fast, slow, rtol=1e-12)

    def test_single_shell_value(self):
        # cos(4x): |k| = 4 sits where phi(k/4) = 1 and every other block is 0
        g = make_grid(3, 16)
        x, _, _ = g.coordinates()
        f = transform(np.cos(4 * x), g)
        rep = besov_norm(f, BesovIndex(0.5, 2, math.inf))
        assert rep.value == pytest.approx(2.0 * math.sqrt(g.volume / 2))
        assert sum(1 for _, w in rep.per_block if w > 1e-12 * rep.value) == 1

    def test_scaling_under_dilation(self):
        # f(2x) on a box of half the size: blocks shift by one, norm scales by 2**(s - n/p)
        big, small = make_grid(3, 32, 4 * np.pi), make_grid(3, 32, 2 * np.pi)
        prof = SpectrumProfile(0.0, 4.0, 5)
        f = random_field(big, prof)
        g = type(f)(small, f.coeffs, True)
        for s, p in [(0.5, 2.0), (-0.25, 3.0)]:
            ratio = besov(g, s, p) / besov(f, s, p)
            assert ratio == pytest.approx(2.0 ** (s - 3 / p), rel=1e-12)

    def test_warns_outside_banach_range(self, grid8):
        f = random_field(grid8, SpectrumProfile(0.0, 2.0, 1))
        assert besov_norm(f, BesovIndex(2.0, 2, math.inf)).warnings
        assert not besov_norm(f, BesovIndex(0.5, 2, math.inf)).warnings

    def test_index_validation(self):
        with pytest.raises(ExponentOutOfRange):
            BesovIndex(0.0, 0.5, 1)
        assert BesovIndex.critical(3, 2).s == pytest.approx(0.5)
        assert critical_s(3, 1.5) == pytest.approx(1.0)

    def test_monotone_in_q(self, grid16):
        f = random_field(grid16, SpectrumProfile(0.0, 7.0, 6))
        vals = [besov(f, 0.25, 2, q) for q in (1, 2, 4, math.inf)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))


class TestKFunctional:
    def test_between_trivial_splits(self, grid16):
        f = random_scalar_field(grid16, SpectrumProfile(0.0, 6.0, 2))
        lam = np.geomspace(1e-3, 1e3, 7)
        K = k_functional(f, lam, 2.0, 4.0)
        assert np.all(K <= lp_norm(f, 2.0) + 1e-12)
        assert np.all(K <= lam * lp_norm(f, 4.0) + 1e-12)
        assert np.all(np.diff(K) >= -1e-12)

    def test_scalar_lambda(self, grid8):
        f = random_scalar_field(grid8, SpectrumProfile(0.0, 3.0, 2))
        assert isinstance(k_functional(f, 1.0, 2.0, 3.0), float)

    def test_explicit_thresholds(self, grid16):
        f = random_scalar_field(grid16, SpectrumProfile(0.0, 6.0, 2))
        # the empty split keeps everything in the L^p0 term
        assert k_functional(f, 1.0, 2.0, 4.0, thresholds=[-5]) == pytest.approx(lp_norm(f, 2.0))

    def test_checks(self, grid8):
        f = random_scalar_field(grid8, SpectrumProfile(0.0, 3.0, 2))
        with pytest.raises(ExponentOutOfRange):
            k_functional(f, 1.0, 3.0, 2.0)
        with pytest.raises(ValueError):
            k_functional(f, -1.0, 2.0, 3.0)


class TestEnsembles:
    def test_constant_stats(self):
        st = ConstantStats.from_ratios([3.0, 1.0, 2.0])
        assert (st.max, st.median, st.min) == (3.0, 2.0, 1.0)
        assert math.isnan(ConstantStats.from_ratios([]).max)

    def test_embedding_exponent(self):
        assert embedding_exponent(3, 2, 0.5) == pytest.approx(3.0)

    def test_embedding_is_reproducible(self, grid16):
        idx = BesovIndex(0.5, 2, math.inf)
        a = verify_embedding(5, idx, 3, grid16)
        b = verify_embedding(5, idx, 3, grid16)
        assert a.ratios.tolist() == b.ratios.tolist()
        assert np.all(np.isfinite(a.ratios)) and a.skipped == 0

    def test_negative_s_inverts_ratio(self, grid16):
        st = verify_embedding(3, BesovIndex(-0.5, 2, math.inf), 1, grid16)
        assert np.all(st.ratios > 0)

    def test_embedding_range(self, grid16):
        with pytest.raises(ExponentOutOfRange):
            verify_embedding(2, BesovIndex(2.0, 2, math.inf), 1, grid16)
        with pytest.raises(ExponentOutOfRange):
            verify_embedding(2, BesovIndex(0.0, 2, math.inf), 1, grid16)

    def test_product_bounded(self, grid16):
        st = verify_product(5, 2.0, 0.5, 4, grid16)
        assert np.all(np.isfinite(st.ratios)) and st.max < 10

    def test_product_range(self, grid16):
        with pytest.raises(ExponentOutOfRange):
            verify_product(2, 3.5, 0.5, 1, grid16)
