import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from normlab import (
    DegenerateInputError,
    DomainError,
    FiniteVector,
    InvalidInputError,
    SpaceSpec,
    block_pair,
    certify,
    clarkson_check,
    constructed_space,
    find_midpoints,
    james_objective,
    luxemburg_norm,
    luxemburg_norms,
    midpoint_witness,
    obstruction_certificate_p_gt_2,
    obstruction_certificate_p_lt_2,
    strict_convexity_gap,
)

ORLICZ = SpaceSpec.orlicz(1.5, 1.75)
MOD3 = constructed_space(3.0)

# s solving s^1.5 + s^1.75 = 1 and s^3 + s^2.25 = 1, from scipy brentq
S_ORLICZ = 0.6521830259439717
S_MOD3 = 0.766479414395844
DEFECT_ORLICZ = 0.2065553530769785  # 4 s^r (1 - 2^(1 - r/p))
DEFECT_MOD3 = 0.12536326489546204  # 2 sum_i (2^(1-p_i) - 2^(p_i(1/p-1))) s^p_i, i = 1, 2


def unit_rows(space, rng, count, dim=6):
    X = rng.normal(size=(count, dim))
    X[rng.uniform(size=X.shape) < 0.3] = 0.0
    X[:, 0] += 0.1
    return X / luxemburg_norms(space, X)[:, None]


pair_vectors = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=10)


class TestClarkson:
    def test_disjoint_tight(self):
        rep = clarkson_check(1.5, FiniteVector.basis(1), FiniteVector.basis(2))
        assert rep.slack_upper_2 == pytest.approx(0.0, abs=1e-12)
        assert rep.r == 1.5

    def test_equal_vectors(self, rng):
        x = rng.normal(size=5)
        for p in (1.2, 2.0, 4.0):
            assert clarkson_check(p, x, x).min_slack >= -1e-12

    @settings(max_examples=200, deadline=None)
    @given(x=pair_vectors, y=pair_vectors, p=st.sampled_from([1.2, 1.5, 1.8, 2.0, 3.0, 5.0]))
    def test_fuzz(self, x, y, p):
        n = max(len(x), len(y))
        rep = clarkson_check(p, np.pad(x, (0, n - len(x))), np.pad(y, (0, n - len(y))))
        scale = max(1.0, max(map(abs, x + y)) ** max(p, p / (p - 1)))
        assert rep.min_slack >= -1e-12 * scale

    @pytest.mark.parametrize("p", [1.0, 0.5, math.inf])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            clarkson_check(p, [1.0], [0.0, 1.0])


class TestObstructionLt2:
    def test_closed_form(self):
        x, y = FiniteVector.basis(1, S_ORLICZ), FiniteVector.basis(2, S_ORLICZ)
        cert = obstruction_certificate_p_lt_2(ORLICZ, x, y)
        assert cert.B == pytest.approx(4 * S_ORLICZ**1.75, rel=1e-12)
        assert cert.defect == pytest.approx(DEFECT_ORLICZ, rel=1e-12)
        assert cert.unit_ok and cert.verdict == "inconsistent"
        assert cert.unit_sum == pytest.approx(2.0, abs=1e-12)
        assert max(abs(cert.residuals[2]), abs(cert.residuals[3])) >= cert.residual_floor > 0

    def test_antipodal(self):
        x = FiniteVector.basis(1, S_ORLICZ)
        cert = obstruction_certificate_p_lt_2(ORLICZ, x, -x)
        assert cert.u == 0.0
        assert cert.residuals[2] == pytest.approx(-(2 ** (1 / 1.5)))

    def test_random_unit_pairs(self, rng):
        X, Y = unit_rows(ORLICZ, rng, 300), unit_rows(ORLICZ, rng, 300)
        for x, y in zip(X, Y):
            cert = obstruction_certificate_p_lt_2(ORLICZ, x, y)
            assert cert.unit_ok
            assert cert.defect > 0
            assert cert.chain_slack >= -1e-10
            assert cert.B >= 2 * np.sum(np.abs(x) ** 1.75) - 1e-9
            gap = max(abs(cert.residuals[2]), abs(cert.residuals[3]))
            assert gap >= cert.residual_floor > 0

    def test_errors(self):
        with pytest.raises(DegenerateInputError):
            obstruction_certificate_p_lt_2(ORLICZ, [0.0], [0.0])
        with pytest.raises(DomainError):
            obstruction_certificate_p_lt_2(SpaceSpec.lp(1.5), [1.0], [0.0, 1.0])
        with pytest.raises(DomainError):
            certify("p_eq_2", ORLICZ, [1.0], [0.0, 1.0])


class TestObstructionGt2:
    def test_closed_form(self):
        cert = obstruction_certificate_p_gt_2(MOD3, FiniteVector.basis(1, S_MOD3), FiniteVector.basis(2, S_MOD3))
        assert cert.defect == pytest.approx(DEFECT_MOD3, rel=1e-12)
        assert [i for i, _ in cert.terms] == [1, 2]
        assert cert.verdict == "inconsistent"

    def test_coefficients_positive(self):
        for p in (2.5, 3.0, 4.0, 6.0):
            cert = certify("p_gt_2", constructed_space(p), [0.3, 0.1, -0.2], [0.0, 0.4])
            assert cert.min_coefficient > 0

    def test_random_unit_pairs(self, rng):
        X, Y = unit_rows(MOD3, rng, 300), unit_rows(MOD3, rng, 300)
        for x, y in zip(X, Y):
            cert = obstruction_certificate_p_gt_2(MOD3, x, y)
            assert cert.unit_ok and cert.defect > 0
            assert cert.chain_slack >= -1e-10
            assert strict_convexity_gap(MOD3, x, y) > 0
            assert max(abs(cert.residuals[2]), abs(cert.residuals[3])) >= cert.residual_floor

    def test_zero_partner(self):
        cert = certify("p_gt_2", MOD3, FiniteVector.basis(1, S_MOD3), FiniteVector.zero())
        assert cert.residuals[1] == -1.0
        assert not cert.unit_ok

    def test_errors(self):
        with pytest.raises(DegenerateInputError):
            obstruction_certificate_p_gt_2(MOD3, [0.0], [])
        with pytest.raises(DomainError):
            obstruction_certificate_p_gt_2(ORLICZ, [1.0], [0.0, 1.0])

    def test_to_json(self):
        out = certify("p_gt_2", MOD3, [0.5], [0.0, 0.5]).to_json()
        assert out["verdict"] == "inconsistent" and out["terms"][0][0] == 1


class TestStrictConvexity:
    def test_antipodal_and_degenerate(self):
        u = FiniteVector.basis(1, S_MOD3)
        assert strict_convexity_gap(MOD3, u, -u) == pytest.approx(2.0)
        with pytest.raises(DegenerateInputError):
            strict_convexity_gap(MOD3, u, u)
        with pytest.raises(DomainError):
            strict_convexity_gap(MOD3, u * 2, -u)

    def test_basis_pair(self):
        u = FiniteVector.basis(1, S_MOD3)
        v = np.array([0.0, 1.0])
        v = v / luxemburg_norm(MOD3, v)
        assert 0 < strict_convexity_gap(MOD3, u, v) < 1


class TestMidpoints:
    @pytest.mark.parametrize("p, sep", [(1.0, 2.0), (math.inf, 1.0)])
    def test_witness(self, p, sep):
        w = midpoint_witness(p)
        assert w.max_gap <= 1e-12
        assert w.separation == pytest.approx(sep)
        assert w.b != w.c

    def test_witness_domain(self):
        with pytest.raises(DomainError):
            midpoint_witness(2.0)

    def test_orlicz_midpoint_unique(self):
        a, d = FiniteVector.zero(), FiniteVector.from_dense([1.0, 1.0])
        res = find_midpoints(ORLICZ, a, d, starts=8, seed=3)
        assert len(res.midpoints) >= 2
        assert res.separation < 1e-6
        mid = res.midpoints[0].to_dense(2)
        np.testing.assert_allclose(mid, [0.5, 0.5], atol=1e-6)

    def test_degenerate(self):
        with pytest.raises(DegenerateInputError):
            find_midpoints(ORLICZ, [1.0], [1.0], starts=2)


class TestJames:
    def test_lp_basis(self):
        for p in (1.2, 1.5, 2.0):
            val = james_objective(SpaceSpec.lp(p), FiniteVector.basis(1), FiniteVector.basis(2))
            assert val == pytest.approx(2 ** (1 / p), rel=1e-11)

    def test_same_vector(self):
        assert james_objective(ORLICZ, [1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_blocks(self):
        vals = [james_objective(ORLICZ, *block_pair(n)) for n in (1, 2, 4)]
        np.testing.assert_allclose(vals, [1.5360211099, 1.5387453656, 1.5414689465], rtol=1e-9)
        assert vals[0] < vals[1] < vals[2] < 2 ** (1 / 1.5)

    def test_errors(self):
        with pytest.raises(DomainError):
            james_objective(ORLICZ, [0.0], [1.0])
        with pytest.raises(InvalidInputError):
            block_pair(0)
