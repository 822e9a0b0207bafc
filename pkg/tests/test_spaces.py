import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.utils.estimator_checks import check_estimator

from conftest import modular_terms, scalar_norm
from normlab import (
    ConvergenceError,
    DomainError,
    ExponentRule,
    FamilyKind,
    FiniteVector,
    InvalidInputError,
    LuxemburgNorm,
    ModularFamily,
    SpaceSpec,
    conjugate_index,
    distance,
    lp_norm,
    luxemburg_norm,
    luxemburg_norms,
    modular_sum,
    parse_space,
)

ORLICZ = SpaceSpec.orlicz(1.5, 1.75)

# frozen from the scalar root-bracketing oracle in conftest
ORACLE = [
    ("orlicz:1.5,1.75", [1.0], 1.5333119081911049),
    ("orlicz:1.5,1.75", [0.3, -0.7, 2.0], 3.4901223749608685),
    ("modular:3", [0.3, -0.7, 2.0], 2.64317042714744),
]


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = st.lists(finite, min_size=1, max_size=12)


class TestFamilies:
    def test_exponent_rule(self):
        rule = ExponentRule(3.0, 3)
        assert rule(1) == pytest.approx(2.25)
        assert rule(2) == pytest.approx(2.4)
        assert rule.gap(1) == pytest.approx(0.75)
        assert ExponentRule.default_offset(3.0) == 3
        assert ExponentRule.default_offset(4.0) == 2
        assert ExponentRule.default_offset(2.5) == 5

    def test_exponents_stay_above_two(self):
        for p in (2.1, 2.5, 3.0, 4.0, 7.0):
            rule = ExponentRule(p, ExponentRule.default_offset(p))
            assert rule(1) >= 2.0 - 1e-12
            assert np.all(np.diff(rule(np.arange(1, 50))) > 0)

    @pytest.mark.parametrize(
        "build",
        [
            lambda: ModularFamily.pure_power(0.5),
            lambda: ModularFamily.orlicz(1.8, 1.5),
            lambda: ModularFamily.orlicz(1.5, 2.5),
            lambda: ModularFamily.modular(2.0),
            lambda: ModularFamily.modular(math.inf),
        ],
    )
    def test_bad_parameters(self, build):
        with pytest.raises(DomainError):
            build()

    def test_eval(self):
        fam = ModularFamily.orlicz(1.5, 1.75)
        assert fam.eval(1, 0.5) == pytest.approx(0.5**1.5 + 0.5**1.75)
        assert ModularFamily.pure_power(2).eval(3, 3.0) == pytest.approx(9.0)


class TestParsing:
    def test_shorthand(self):
        assert parse_space("lp:2").kind is FamilyKind.PURE_POWER
        assert parse_space("lp:inf").family.is_sup
        s = parse_space("orlicz:1.5,1.75")
        assert (s.p, s.family.r) == (1.5, 1.75)
        m = parse_space("modular:3")
        assert m.family.exponents(1) == pytest.approx(2.25)
        assert parse_space("modular:3,5").family.exponents.i0 == 5

    def test_json_round_trip(self):
        for text in ("lp:1.5", "orlicz:1.2,1.9", "modular:4", "lp:inf"):
            s = parse_space(text)
            again = parse_space(json.dumps(s.to_json()))
            assert again.to_json() == s.to_json()

    def test_json_inf(self):
        assert parse_space('{"kind": "lp", "p": "inf"}').family.is_sup

    @pytest.mark.parametrize("text", ["lp", "foo:2", "orlicz:1.5", '{"kind": "lp"', '{"kind": "zz", "p": 2}', "lp:x"])
    def test_malformed(self, text):
        with pytest.raises(InvalidInputError):
            parse_space(text)

    def test_invalid_exponent(self):
        with pytest.raises(DomainError):
            parse_space('{"kind":"lp","p":0.5}')


class TestFiniteVector:
    def test_canonical(self):
        v = FiniteVector.from_dense([0.0, 2.0, 0.0, -1.0])
        assert v.indices == (2, 4) and v.values == (2.0, -1.0)
        assert v == FiniteVector.from_mapping({4: -1.0, 2: 2.0})
        assert v.dim == 4 and v[1] == 0.0 and v[2] == 2.0

    def test_arithmetic(self):
        a = FiniteVector.basis(1) + FiniteVector.basis(3, 2.0)
        b = a - FiniteVector.basis(1)
        assert b == FiniteVector.basis(3, 2.0)
        assert (a - a).is_zero()
        assert (2 * a).to_dense().tolist() == [2.0, 0.0, 4.0]
        assert (-a / 2).to_dense(4).tolist() == [-0.5, 0.0, -1.0, 0.0]

    def test_rejects(self):
        with pytest.raises(InvalidInputError):
            FiniteVector((0,), (1.0,))
        with pytest.raises(InvalidInputError):
            FiniteVector((2, 1), (1.0, 1.0))
        with pytest.raises(InvalidInputError):
            FiniteVector((1,), (math.nan,))
        with pytest.raises(InvalidInputError):
            FiniteVector.from_dense([1.0, 2.0]).to_dense(1)


class TestNorm:
    def test_examples(self):
        assert luxemburg_norm(SpaceSpec.lp(2), [3, 4]) == pytest.approx(5.0, rel=1e-12)
        assert luxemburg_norm(SpaceSpec.lp(math.inf), [3, -7, 4]) == 7.0
        assert luxemburg_norm(ORLICZ, FiniteVector.zero()) == 0.0

    @pytest.mark.parametrize("space, x, expected", ORACLE)
    def test_frozen_oracle(self, space, x, expected):
        assert luxemburg_norm(parse_space(space), x) == pytest.approx(expected, rel=1e-11)

    def test_oracle_random(self, rng):
        for _ in range(20):
            x = rng.normal(size=rng.integers(1, 8))
            assert luxemburg_norm(ORLICZ, x) == pytest.approx(scalar_norm(lambda i: (1.5, 1.75), x), rel=1e-11)
            m = SpaceSpec.modular(3.0)
            assert luxemburg_norm(m, x) == pytest.approx(scalar_norm(modular_terms(3.0), x), rel=1e-11)

    def test_fixed_point(self, rng):
        for space in (ORLICZ, SpaceSpec.modular(4.0), SpaceSpec.lp(1.3)):
            x = rng.normal(size=6)
            assert modular_sum(space, x, luxemburg_norm(space, x)) == pytest.approx(1.0, abs=1e-10)

    def test_newton_matches_bisection(self, rng):
        X = rng.normal(size=(200, 5))
        for space in (ORLICZ, SpaceSpec.modular(3.0), SpaceSpec.lp(1.5)):
            a = luxemburg_norms(space, X)
            b = luxemburg_norms(space, X, method="newton")
            np.testing.assert_allclose(a, b, rtol=1e-11)

    def test_tiny_and_huge(self):
        for s in (1e-200, 1e200):
            x = np.array([s, -2 * s])
            assert luxemburg_norm(SpaceSpec.lp(3), x) == pytest.approx(lp_norm(3, x), rel=1e-11)
            assert luxemburg_norm(ORLICZ, x) > 0

    def test_rows_independent(self, rng):
        X = rng.normal(size=(30, 4))
        full = luxemburg_norms(ORLICZ, X)
        single = np.array([luxemburg_norms(ORLICZ, X[k : k + 1])[0] for k in range(len(X))])
        np.testing.assert_array_equal(full, single)

    def test_distance_and_conjugate(self):
        assert distance(SpaceSpec.lp(1), [1, 0], [0, 1]) == pytest.approx(2.0)
        assert conjugate_index(1.5) == pytest.approx(3.0)
        assert conjugate_index(2) == pytest.approx(2.0)
        with pytest.raises(DomainError):
            conjugate_index(1.0)

    def test_bad_method_and_values(self):
        with pytest.raises(InvalidInputError):
            luxemburg_norms(ORLICZ, np.ones((2, 2)), method="secant")
        with pytest.raises(InvalidInputError):
            luxemburg_norms(ORLICZ, np.array([[1.0, np.nan]]))

    def test_convergence_error_carries_state(self):
        err = ConvergenceError("stalled", {"lo": 1.0, "hi": 2.0})
        assert err.state == {"lo": 1.0, "hi": 2.0}
        assert isinstance(err, ArithmeticError)


class TestNormProperties:
    @settings(max_examples=150, deadline=None)
    @given(x=vectors, lam=st.floats(-50, 50, allow_nan=False))
    def test_homogeneity(self, x, lam):
        for space in (ORLICZ, SpaceSpec.modular(3.0)):
            nx = luxemburg_norm(space, x)
            assert luxemburg_norm(space, [lam * v for v in x]) == pytest.approx(abs(lam) * nx, rel=1e-9, abs=1e-300)

    @settings(max_examples=150, deadline=None)
    @given(x=vectors, y=vectors)
    def test_triangle(self, x, y):
        n = max(len(x), len(y))
        X = np.pad(x, (0, n - len(x)))
        Y = np.pad(y, (0, n - len(y)))
        for space in (ORLICZ, SpaceSpec.modular(3.0), SpaceSpec.lp(1.2)):
            lhs = luxemburg_norm(space, X + Y)
            rhs = luxemburg_norm(space, X) + luxemburg_norm(space, Y)
            assert lhs <= rhs * (1 + 1e-9) + 1e-300

    @settings(max_examples=100, deadline=None)
    @given(x=vectors, p=st.sampled_from([1.0, 1.2, 1.5, 2.0, 3.0, 5.0, math.inf]))
    def test_lp_oracle(self, x, p):
        assert luxemburg_norm(SpaceSpec.lp(p), x) == pytest.approx(lp_norm(p, x), rel=1e-10, abs=1e-300)


class TestLuxemburgNormEstimator:
    def test_sklearn_checks(self):
        check_estimator(LuxemburgNorm())

    def test_transform(self):
        X = np.array([[3.0, 4.0], [0.0, 0.0]])
        est = LuxemburgNorm("lp:2")
        np.testing.assert_allclose(est.fit_transform(X), [[5.0], [0.0]])
        Z = LuxemburgNorm("orlicz:1.5,1.75", output="normalize").fit_transform(np.array([[1.0, 2.0], [0.0, 0.0]]))
        assert luxemburg_norm(ORLICZ, Z[0]) == pytest.approx(1.0, rel=1e-11)
        np.testing.assert_array_equal(Z[1], 0.0)

    def test_params_and_clone(self):
        est = LuxemburgNorm("modular:3", output="normalize")
        assert est.get_params()["space"] == "modular:3"
        c = clone(est).set_params(output="norm")
        assert c.output == "norm" and est.output == "normalize"
        make_pipeline(c).fit(np.ones((3, 2)))

    def test_feature_mismatch(self):
        est = LuxemburgNorm().fit(np.ones((2, 3)))
        with pytest.raises(ValueError):
            est.transform(np.ones((2, 2)))

    def test_bad_output(self):
        with pytest.raises(InvalidInputError):
            LuxemburgNorm(output="bogus").fit(np.ones((2, 2)))
