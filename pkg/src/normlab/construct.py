"""Parameters of the p > 2 modular space and the identity-isomorphism criterion.

For ``M_i(t) = t**p + t**p_i`` and ``N_i(t) = t**p`` the identity map between
the two modular spaces is an isomorphism when, for some ``K``, thresholds
``t_i`` and start index ``i0``:

(a) ``N_i(t)/K <= M_i(t) <= K N_i(t)`` for ``i >= i0`` and ``t >= t_i``;
(b) ``sum_i N_i(t_i) < inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, UnsupportedFamilyError
from .spaces import ExponentRule, FamilyKind, ModularFamily, SpaceSpec

__all__ = [
    "GeometricThresholds",
    "IsoCriterionParams",
    "CriterionReport",
    "construct_exponents",
    "constructed_space",
    "default_params",
    "check_iso_criterion",
]


@dataclass(frozen=True)
class GeometricThresholds:
    """``t_i = 2 ** (-(i + offset) / p)``, so ``t_i**p`` is a geometric sequence."""

    p: float
    offset: int

    def __call__(self, i):
        i = np.asarray(i, dtype=float)
        out = 2.0 ** (-(i + self.offset) / self.p)
        return float(out) if out.ndim == 0 else out

    def log(self, i):
        i = np.asarray(i, dtype=float)
        return -(i + self.offset) * math.log(2.0) / self.p

    def power_sum(self, n: int) -> float:
        """``sum_{i <= n} t_i**p``."""
        return 2.0 ** (-self.offset) * (1.0 - 2.0 ** (-n))

    def tail_bound(self, n: int) -> float:
        """Exact value of ``sum_{i > n} t_i**p``."""
        return 2.0 ** (-(n + self.offset))


def construct_exponents(p: float):
    """Exponent rule, schedule offset and thresholds for ``p > 2``.

    Returns ``(rule, i0, thresholds)`` with ``rule(i) = p (1 - 1/(i + i0))``,
    ``i0 = ceil(p / (p - 2))`` and ``thresholds(i) = 2**(-(i + i0)/p)``.  Since
    ``p - p_i = p/(i + i0)`` we get ``t_i**(p_i - p) = 2`` exactly, so the upper
    bound in (a) is tight at ``t = t_i`` for ``K = 3``.
    """
    p = float(p)
    if not p > 2 or math.isinf(p):
        raise DomainError(f"construct_exponents needs 2 < p < inf, got {p}")
    i0 = ExponentRule.default_offset(p)
    return ExponentRule(p, i0), i0, GeometricThresholds(p, i0)


def constructed_space(p: float) -> SpaceSpec:
    rule, i0, _ = construct_exponents(p)
    return SpaceSpec(ModularFamily(FamilyKind.MODULAR_PPI, p, exponents=rule))


@dataclass(frozen=True)
class IsoCriterionParams:
    K: float
    thresholds: GeometricThresholds
    base_family: ModularFamily
    test_family: ModularFamily
    i0: int = 1

    def __post_init__(self):
        if not self.K > 0:
            raise DomainError(f"K must be positive, got {self.K}")
        if self.i0 < 1:
            raise DomainError(f"start index must be >= 1, got {self.i0}")


def default_params(p: float, K: float = 3.0) -> IsoCriterionParams:
    rule, i0, thresholds = construct_exponents(p)
    return IsoCriterionParams(
        K=K,
        thresholds=thresholds,
        base_family=ModularFamily.pure_power(p),
        test_family=ModularFamily(FamilyKind.MODULAR_PPI, p, exponents=rule),
    )


@dataclass
class CriterionReport:
    verdict: str
    a_min_slack: float
    a_lower_min_slack: float
    a_grid_min_slack: float
    a_failing_indices: list = field(default_factory=list)
    b_partial_sum: float = 0.0
    b_tail_bound: float = 0.0
    index_budget: int = 0

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> dict:
        return {
            "a_min_slack": self.a_min_slack,
            "a_lower_min_slack": self.a_lower_min_slack,
            "a_grid_min_slack": self.a_grid_min_slack,
            "a_failing_count": len(self.a_failing_indices),
            "b_partial_sum": self.b_partial_sum,
            "b_tail_bound": self.b_tail_bound,
            "index_budget": self.index_budget,
            "verdict": self.verdict,
        }


def _exponent_gap(params: IsoCriterionParams, idx: np.ndarray):
    """``p - q_i`` where ``M_i(t) = t**p + t**q_i`` (None when M_i = N_i)."""
    base, test = params.base_family, params.test_family
    if base.kind is not FamilyKind.PURE_POWER or base.is_sup:
        raise UnsupportedFamilyError("base family must be a finite pure power t**p")
    if test.kind is FamilyKind.PURE_POWER:
        if test.p != base.p:
            raise UnsupportedFamilyError("pure-power test family must share the base exponent")
        return None
    if test.kind is FamilyKind.MODULAR_PPI and test.p == base.p:
        return test.exponents.gap(idx)
    raise UnsupportedFamilyError(
        f"criterion supports t**p vs t**p + t**p_i only, got {test.kind.value}"
    )


def check_iso_criterion(
    params: IsoCriterionParams,
    index_budget: int,
    grid_points: int = 64,
    grid_decades: float = 6.0,
    atol: float = 1e-12,
) -> CriterionReport:
    """Check conditions (a) and (b) on indices ``i0 .. index_budget``.

    Condition (a) reduces, for ``M_i = N_i + t**q_i`` with ``q_i < p``, to
    ``t**(q_i - p) <= K - 1`` on ``t >= t_i``; the left side decreases in
    ``t`` so ``t = t_i`` is the worst case.  The lower bound holds iff
    ``K >= 1`` (or ``K**-1 <= 1 + t**(q_i - p)``).  Slacks are reported as
    ``K - M_i(t)/N_i(t)`` (upper) and ``M_i(t)/N_i(t) - 1/K`` (lower).  A
    log-spaced grid on ``[t_i, t_i * 10**grid_decades]`` re-evaluates the
    ratio directly as a cross-check.
    """
    if int(index_budget) != index_budget or index_budget < 1:
        raise DomainError(f"index_budget must be a positive integer, got {index_budget}")
    p = params.base_family.p
    K = float(params.K)
    idx = np.arange(params.i0, int(index_budget) + 1, dtype=float)
    gap = _exponent_gap(params, idx)
    thresholds = params.thresholds
    if not (hasattr(thresholds, "tail_bound") and hasattr(thresholds, "log")):
        raise UnsupportedFamilyError("thresholds must provide logs and an exact tail bound")
    log_t = thresholds.log(idx)
    if idx.size == 0:
        upper = lower = grid_min = math.inf
        failing: list = []
    else:
        if gap is None:
            ratio_at_t = np.ones_like(idx)
        else:
            ratio_at_t = 1.0 + np.exp(-gap * log_t)
        upper_slack = K - ratio_at_t
        # ratio decreases from ratio_at_t towards 1 as t grows
        lower_slack = np.minimum(ratio_at_t, 1.0) - 1.0 / K
        upper = float(upper_slack.min())
        lower = float(lower_slack.min())
        failing = idx[(upper_slack < -atol) | (lower_slack < -atol)].astype(int).tolist()

        log_tt = log_t[:, None] + np.linspace(0.0, grid_decades, grid_points)[None, :] * math.log(10.0)
        tt = np.exp(log_tt)
        N = tt**p
        M = N if gap is None else N + tt ** (p - gap[:, None])
        grid_ratio = M / N
        grid_min = float(np.minimum(K - grid_ratio, grid_ratio - 1.0 / K).min())

    partial = float(np.sum(thresholds(np.arange(1, int(index_budget) + 1)) ** p))
    tail = float(thresholds.tail_bound(int(index_budget)))
    ok = not failing and grid_min >= -atol and math.isfinite(partial + tail)
    return CriterionReport(
        verdict="pass" if ok else "fail",
        a_min_slack=upper,
        a_lower_min_slack=lower,
        a_grid_min_slack=grid_min,
        a_failing_indices=failing,
        b_partial_sum=partial,
        b_tail_bound=tail,
        index_budget=int(index_budget),
    )
