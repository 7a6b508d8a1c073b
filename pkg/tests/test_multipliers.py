import math

import numpy as np
import pytest

from nsbesov import SectorPoint, SpectrumProfile, VectorField, besov, frac_laplacian, heat_semigroup, leray_project, make_grid, random_field, resolvent_laplacian, transform
from nsbesov.errors import ConditionBViolation, NegativeTime, PreconditionError, SectorViolation, SymbolSingular
from nsbesov.multipliers import (
    MultiplierSymbol,
    apply_multiplier,
    composition,
    laplacian,
    power_symbol,
    resolvent_lp_gain,
    resolvent_values,
)


@pytest.fixture
def field(grid16):
    return random_field(grid16, SpectrumProfile(0.0, 6.0, 21), solenoidal=False)


class TestLeray:
    def test_idempotent_and_solenoidal(self, field):
        P = leray_project(field)
        np.testing.assert_allclose(leray_project(P).coeffs, P.coeffs, atol=1e-13)
        assert P.divergence_defect() < 1e-13

    def test_kills_gradients(self, grid16):
        x, y, z = grid16.coordinates()
        phi = np.sin(x) * np.cos(2 * y) + np.cos(z)
        grad = np.stack([np.cos(x) * np.cos(2 * y), -2 * np.sin(x) * np.sin(2 * y), -np.sin(z)])
        assert np.max(np.abs(leray_project(transform(grad, grid16)).coeffs)) < 1e-15

    def test_symbol_sign(self, grid8):
        # v = e_1 e^{i x}: k parallel to v, so P v = 0
        c = np.zeros((3,) + grid8.shape, dtype=complex)
        c[0, 1, 0, 0] = 1.0
        assert np.max(np.abs(leray_project(VectorField(grid8, c, False)).coeffs)) == 0.0
        # v = e_2 e^{i x}: transverse, unchanged
        c = np.zeros((3,) + grid8.shape, dtype=complex)
        c[1, 1, 0, 0] = 1.0
        assert leray_project(VectorField(grid8, c, False)).coeffs[1, 1, 0, 0] == 1.0


class TestPowers:
    def test_laplacian_of_mode(self, grid16):
        x, y, z = grid16.coordinates()
        f = transform(np.sin(2 * x + y), grid16)
        np.testing.assert_allclose(laplacian(f).physical(), -5 * np.sin(2 * x + y), atol=1e-12)
        np.testing.assert_allclose(frac_laplacian(f, 2.0).physical(), 5 * np.sin(2 * x + y), atol=1e-12)

    def test_group_law(self, field):
        g = frac_laplacian(frac_laplacian(field, 0.7), -1.9)
        np.testing.assert_allclose(g.coeffs, frac_laplacian(field, -1.2).coeffs, rtol=1e-12, atol=1e-15)

    def test_shifts_besov_index(self, field):
        for a in (-1.0, 0.5, 1.5):
            lhs = besov(frac_laplacian(field, a), 0.25 - a)
            rhs = besov(field, 0.25)
            assert 0.2 < lhs / rhs < 5

    def test_dyadic_path_agrees(self, field):
        sym = power_symbol(0.75)
        a = apply_multiplier(sym, field, "pointwise")
        b = apply_multiplier(sym, field, "dyadic")
        np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=1e-13, atol=1e-15)
        assert a.is_real

    def test_odd_symbol_keeps_real_fields_real(self, grid16):
        # derivative symbol i k_1 satisfies m(-k) = conj(m(k))
        sym = MultiplierSymbol(lambda xi: 1j * xi[0], 1.0, "d1")
        f = random_field(grid16, SpectrumProfile(0.0, 4.0, 2))
        assert apply_multiplier(sym, f).is_real

    def test_singular_symbol(self, field):
        sym = MultiplierSymbol(lambda xi: 1.0 / (xi[0] * 0.0), name="bad")
        with pytest.raises(SymbolSingular):
            apply_multiplier(sym, field)

    def test_unknown_path(self, field):
        with pytest.raises(PreconditionError):
            apply_multiplier(power_symbol(1.0), field, "fft")


class TestResolvent:
    def test_sector_membership(self):
        SectorPoint(-1.0)
        SectorPoint.polar(2.0, math.pi / 6)
        with pytest.raises(SectorViolation):
            SectorPoint(1.0)
        with pytest.raises(SectorViolation):
            SectorPoint(0.0)
        with pytest.raises(SectorViolation):
            SectorPoint(-1.0, omega=2.0)

    def test_inverts_lambda_plus_laplacian(self, field):
        pt = SectorPoint.polar(3.0, 2.0)
        g = resolvent_laplacian(field, pt)
        back = g * pt.lam + laplacian(g)
        np.testing.assert_allclose(back.coeffs, field.coeffs, atol=1e-13)

    def test_negative_real_lambda_stays_real(self, field):
        assert resolvent_laplacian(field, SectorPoint(-2.0)).is_real
        assert not resolvent_laplacian(field, SectorPoint(-2.0 + 1j)).is_real

    def test_fractional_powers_compose(self, grid16):
        lam = -2.0 + 3.0j
        a = resolvent_values(grid16, lam, 1.0)
        np.testing.assert_allclose((a * a)[grid16.nonzero], resolvent_values(grid16, lam, 2.0)[grid16.nonzero], rtol=1e-13)

    @pytest.mark.parametrize("theta", [2 * math.pi / 3, math.pi])
    def test_besov_bound(self, field, theta):
        ratios = []
        for r in (1.0, 10.0, 100.0, 1000.0):
            ratios.append(r * besov(resolvent_laplacian(field, SectorPoint.polar(r, theta)), 0.25) / besov(field, 0.25))
        assert max(ratios) < 1 / math.sin(math.pi / 6) + 1e-12

    def test_gain(self, field):
        _, rep = resolvent_lp_gain(field, SectorPoint.polar(100.0, math.pi), b=2.0, p=1.5, p0=2.0)
        assert rep.exponent == pytest.approx(-(2 - 3 * (1 / 1.5 - 1 / 2)) / 2)
        assert math.isfinite(rep.ratio) and rep.ratio > 0

    def test_gain_conditions(self, field):
        with pytest.raises(ConditionBViolation):
            resolvent_lp_gain(field, SectorPoint(-1.0), b=1.0, p=2.0, p0=3.0)
        with pytest.raises(PreconditionError):
            resolvent_lp_gain(field, SectorPoint(-1.0), b=2.0, p=2.0, p0=2.0)

    @pytest.mark.parametrize("a,b", [(0.0, 2.0), (1.0, 2.0), (0.5, 1.5)])
    def test_composition_orders_agree(self, field, a, b):
        pt = SectorPoint.polar(5.0, 2.5)
        ref = composition(field, pt, a, b, "symbol").coeffs
        for order in ("power_first", "resolvent_first"):
            np.testing.assert_allclose(composition(field, pt, a, b, order).coeffs, ref, rtol=1e-12, atol=1e-15)

    def test_composition_needs_a_le_b(self, field):
        with pytest.raises(PreconditionError):
            composition(field, SectorPoint(-1.0), 3.0, 2.0)


class TestHeat:
    def test_mode_decay(self, grid16):
        x, y, z = grid16.coordinates()
        f = transform(np.cos(x + y + z), grid16)
        np.testing.assert_allclose(heat_semigroup(f, 0.3).physical(), np.exp(-0.9) * np.cos(x + y + z), atol=1e-14)

    def test_semigroup_property(self, field):
        a = heat_semigroup(heat_semigroup(field, 0.1), 0.2)
        np.testing.assert_allclose(a.coeffs, heat_semigroup(field, 0.3).coeffs, rtol=1e-12, atol=1e-16)

    def test_negative_time(self, field):
        with pytest.raises(NegativeTime):
            heat_semigroup(field, -1.0)
