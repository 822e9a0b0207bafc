"""Inequality verdicts with signed slacks.

The obstruction certificates evaluate, for a concrete pair ``(x, y)``, the
chain of identities and inequalities that makes the isometry equations for
``U`` (``1 < p < 2``, Orlicz space ``t**p + t**r``) or ``V`` (``p > 2``,
modular space ``t**p + t**p_i``) unsatisfiable, and report the positive gap
("defect") that the chain leaves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DomainError, InvalidInputError
from .optimize import start_rng, nelder_mead_batch
from .spaces import (
    FamilyKind,
    FiniteVector,
    SpaceSpec,
    as_vector,
    conjugate_index,
    distance,
    lp_norm,
    luxemburg_norm,
    luxemburg_norms,
    parse_space,
)

__all__ = [
    "UNIT_TOL",
    "CHAIN_TOL",
    "ClarksonReport",
    "ObstructionCertificate",
    "MidpointWitness",
    "MidpointSearch",
    "clarkson_check",
    "obstruction_certificate_p_lt_2",
    "obstruction_certificate_p_gt_2",
    "certify",
    "strict_convexity_gap",
    "midpoint_witness",
    "find_midpoints",
    "james_objective",
    "block_pair",
]

UNIT_TOL = 1e-6
CHAIN_TOL = 1e-10


@dataclass(frozen=True)
class ClarksonReport:
    """Signed slacks of the four Clarkson bounds (nonnegative = satisfied).

    With ``r = min(p, p')`` and ``s = r'``:

    (1) ``2(|x|^s + |y|^s) <= |x+y|^s + |x-y|^s <= 2^(s-1) (|x|^s + |y|^s)``
    (2) ``2^(r-1) (|x|^r + |y|^r) <= |x+y|^r + |x-y|^r <= 2 (|x|^r + |y|^r)``
    """

    p: float
    r: float
    slack_lower_1: float
    slack_upper_1: float
    slack_lower_2: float
    slack_upper_2: float

    @property
    def min_slack(self) -> float:
        return min(self.slack_lower_1, self.slack_upper_1, self.slack_lower_2, self.slack_upper_2)

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "r": self.r,
            "slack_lower_1": self.slack_lower_1,
            "slack_upper_1": self.slack_upper_1,
            "slack_lower_2": self.slack_lower_2,
            "slack_upper_2": self.slack_upper_2,
        }


def clarkson_check(p: float, x, y) -> ClarksonReport:
    p = float(p)
    if not (1 < p < math.inf):
        raise DomainError(f"Clarkson inequalities need 1 < p < inf, got {p}")
    x, y = as_vector(x), as_vector(y)
    r = min(p, conjugate_index(p))
    s = conjugate_index(r)
    nx, ny = lp_norm(p, x), lp_norm(p, y)
    ns, nd = lp_norm(p, x + y), lp_norm(p, x - y)
    mid1 = ns**s + nd**s
    base1 = nx**s + ny**s
    mid2 = ns**r + nd**r
    base2 = nx**r + ny**r
    return ClarksonReport(
        p=p,
        r=r,
        slack_lower_1=mid1 - 2.0 * base1,
        slack_upper_1=2.0 ** (s - 1.0) * base1 - mid1,
        slack_lower_2=mid2 - 2.0 ** (r - 1.0) * base2,
        slack_upper_2=2.0 * base2 - mid2,
    )


@dataclass
class ObstructionCertificate:
    """Evaluated obstruction chain for one pair.

    ``residuals`` are ``|x| - 1``, ``|y| - 1``, ``|x+y| - t``, ``|x-y| - t``
    with ``t = 2^(1/p)`` (``p < 2``) or ``t = 2^(1-1/p)`` (``p > 2``).
    ``chain_slack`` is the slack of the Clarkson step against the exact
    right-hand side ``unit_sum`` (equal to 2 on unit inputs).
    ``residual_floor`` is a lower bound on ``max(|r3|, |r4|)`` derived from
    this instance alone.
    """

    branch: str
    residuals: tuple
    A: float
    defect: float
    chain_slack: float
    unit_sum: float
    residual_floor: float
    u: float
    v: float
    B: float | None = None
    terms: list | None = None
    min_coefficient: float | None = None
    unit_ok: bool = True

    @property
    def verdict(self) -> str:
        return "inconsistent" if self.defect > 0 and self.chain_slack >= -CHAIN_TOL else "unverified"

    def to_json(self) -> dict:
        out = {
            "branch": self.branch,
            "residuals": list(self.residuals),
            "A": self.A,
        }
        if self.B is not None:
            out["B"] = self.B
        if self.terms is not None:
            out["terms"] = [[i, t] for i, t in self.terms]
        out.update(
            defect=self.defect,
            chain_slack=self.chain_slack,
            unit_sum=self.unit_sum,
            residual_floor=self.residual_floor,
            u=self.u,
            v=self.v,
            unit_ok=self.unit_ok,
            verdict=self.verdict,
        )
        return out


def _power_sum(vec: FiniteVector, e) -> float:
    a = np.abs(np.asarray(vec.values, dtype=float))
    return float(np.sum(a**e)) if a.size else 0.0


def _residual_floor(g_at_target: float, norm: float, target: float, top_exponent: float) -> float:
    """Lower bound on ``|norm - target|`` from ``g(target)``, ``g(norm) = 1``.

    ``g(rho) = sum_k c_k rho^(-e_k)`` is decreasing with ``|g'(rho)| <= E g(rho) / rho``
    for ``E`` the largest exponent, and ``|g'|`` decreases in ``rho``.  Integrating
    between ``norm`` and ``target`` gives the two one-sided bounds below.
    """
    if norm == 0.0:
        return target
    if g_at_target < 1.0:
        return norm * (1.0 - g_at_target) / top_exponent
    if g_at_target > 1.0:
        return target * (g_at_target - 1.0) / (top_exponent * g_at_target)
    return 0.0


def _split_pair(x, y):
    x, y = as_vector(x), as_vector(y)
    if x.is_zero() and y.is_zero():
        raise DegenerateInputError("x = y = 0 carries no obstruction")
    return x, y


def obstruction_certificate_p_lt_2(space, x, y) -> ObstructionCertificate:
    space = parse_space(space)
    if space.kind is not FamilyKind.ORLICZ_PR:
        raise DomainError(f"p < 2 certificate needs an orlicz space, got {space.label}")
    x, y = _split_pair(x, y)
    p, r = space.family.p, space.family.r
    target = 2.0 ** (1.0 / p)
    s, d = x + y, x - y
    nx, ny, u, v = (luxemburg_norm(space, w) for w in (x, y, s, d))
    Ps, Pd = _power_sum(s, p), _power_sum(d, p)
    Rs, Rd = _power_sum(s, r), _power_sum(d, r)
    A = Ps + Pd
    B = Rs + Rd
    unit_sum = _power_sum(x, p) + _power_sum(x, r) + _power_sum(y, p) + _power_sum(y, r)
    chain_slack = 2.0 * unit_sum - (A + B)
    defect = (1.0 - 2.0 ** (1.0 - r / p)) * B
    floors = [
        _residual_floor(P * target**-p + R * target**-r, w, target, r)
        for P, R, w in ((Ps, Rs, u), (Pd, Rd, v))
    ]
    residuals = (nx - 1.0, ny - 1.0, u - target, v - target)
    return ObstructionCertificate(
        branch="p_lt_2",
        residuals=residuals,
        A=A,
        B=B,
        defect=defect,
        chain_slack=chain_slack,
        unit_sum=unit_sum,
        residual_floor=max(floors),
        u=u,
        v=v,
        unit_ok=max(abs(residuals[0]), abs(residuals[1])) <= UNIT_TOL,
    )


def obstruction_certificate_p_gt_2(space, x, y) -> ObstructionCertificate:
    space = parse_space(space)
    if space.kind is not FamilyKind.MODULAR_PPI:
        raise DomainError(f"p > 2 certificate needs a modular space, got {space.label}")
    x, y = _split_pair(x, y)
    p = space.family.p
    rule = space.family.exponents
    target = 2.0 ** (1.0 - 1.0 / p)
    s, d = x + y, x - y
    nx, ny, u, v = (luxemburg_norm(space, w) for w in (x, y, s, d))

    support = sorted(set(x.indices) | set(y.indices))
    idx = np.asarray(support, dtype=float)
    q = rule(idx)
    sv = np.abs([s[i] for i in support])
    dv = np.abs([d[i] for i in support])
    xv = np.abs([x[i] for i in support])
    yv = np.abs([y[i] for i in support])
    Ts, Td = sv**q, dv**q
    T = Ts + Td
    Ps, Pd = float(np.sum(sv**p)), float(np.sum(dv**p))
    A = 2.0 ** (1.0 - p) * (Ps + Pd)
    # 2^(1-q_i) > 2^(q_i(1/p - 1)) because 1 - q_i/p > 0
    coeff_above = 2.0 ** (1.0 - q)
    coeff_equal = 2.0 ** (q * (1.0 / p - 1.0))
    coeff = coeff_above - coeff_equal
    above = A + float(np.sum(coeff_above * T))
    unit_sum = float(np.sum(xv**p + xv**q + yv**p + yv**q))
    chain_slack = unit_sum - above
    defect = float(np.sum(coeff * T))
    floors = [
        _residual_floor(P * target**-p + float(np.sum(Tw * target**-q)), w, target, p)
        for P, Tw, w in ((Ps, Ts, u), (Pd, Td, v))
    ]
    residuals = (nx - 1.0, ny - 1.0, u - target, v - target)
    return ObstructionCertificate(
        branch="p_gt_2",
        residuals=residuals,
        A=A,
        terms=[(int(i), float(t)) for i, t in zip(support, T)],
        defect=defect,
        chain_slack=chain_slack,
        unit_sum=unit_sum,
        residual_floor=max(floors),
        u=u,
        v=v,
        min_coefficient=float(coeff.min()),
        unit_ok=max(abs(residuals[0]), abs(residuals[1])) <= UNIT_TOL,
    )


def certify(branch: str, space, x, y) -> ObstructionCertificate:
    if branch == "p_lt_2":
        return obstruction_certificate_p_lt_2(space, x, y)
    if branch == "p_gt_2":
        return obstruction_certificate_p_gt_2(space, x, y)
    raise DomainError(f"unknown branch {branch!r}")


def strict_convexity_gap(space, u, v) -> float:
    """``2 - |u + v|`` for distinct unit vectors ``u``, ``v``."""
    space = parse_space(space)
    u, v = as_vector(u), as_vector(v)
    if u == v:
        raise DegenerateInputError("u and v coincide")
    for name, w in (("u", u), ("v", v)):
        nw = luxemburg_norm(space, w)
        if abs(nw - 1.0) > UNIT_TOL:
            raise DomainError(f"{name} is not a unit vector (norm {nw!r})")
    return 2.0 - luxemburg_norm(space, u + v)


@dataclass(frozen=True)
class MidpointWitness:
    p: float
    a: FiniteVector
    b: FiniteVector
    c: FiniteVector
    d: FiniteVector
    gaps: dict
    separation: float

    @property
    def max_gap(self) -> float:
        return max(abs(g) for g in self.gaps.values())


def midpoint_witness(p) -> MidpointWitness:
    """Two distinct metric midpoints ``b``, ``c`` of ``a``, ``d`` in ``l_1`` or ``l_inf``."""
    p = float(p)
    e1, e2 = FiniteVector.basis(1), FiniteVector.basis(2)
    if p == 1.0:
        a, d, b, c = FiniteVector.zero(), e1 + e2, e1, e2
    elif p == math.inf:
        a, d, b, c = -e1, e1, FiniteVector.zero(), e2
    else:
        raise DomainError(f"midpoint witnesses exist for p in {{1, inf}}, got {p}")

    def dist(s, t):
        return lp_norm(p, s - t)

    half = dist(a, d) / 2.0
    gaps = {
        "ab": dist(a, b) - half,
        "bd": dist(b, d) - half,
        "ac": dist(a, c) - half,
        "cd": dist(c, d) - half,
        "ad_via_b": dist(a, d) - dist(a, b) - dist(b, d),
        "ad_via_c": dist(a, d) - dist(a, c) - dist(c, d),
    }
    return MidpointWitness(p, a, b, c, d, gaps, dist(b, c))


@dataclass
class MidpointSearch:
    midpoints: list
    residuals: np.ndarray
    separation: float
    starts: int
    seed: int


def find_midpoints(
    space,
    a,
    d,
    ambient_dim: int | None = None,
    starts: int = 20,
    seed: int = 0,
    accept: float = 1e-6,
    max_iters: int = 5000,
) -> MidpointSearch:
    """Randomized search for metric midpoints of ``a`` and ``d``.

    Minimizes ``|a - b|^2 + |b - d|^2``, whose minimum ``|a - d|^2 / 2`` is
    attained exactly at the midpoints.  Points whose two half-distance
    residuals are below ``accept`` are kept; ``separation`` is the largest
    distance between kept points.
    """
    space = parse_space(space)
    a, d = as_vector(a), as_vector(d)
    dim = ambient_dim or max(a.dim, d.dim, 1)
    A, Dv = a.to_dense(dim), d.to_dense(dim)
    half = luxemburg_norm(space, a - d) / 2.0
    if half == 0:
        raise DegenerateInputError("a and d coincide")

    def dists(X):
        rows = np.concatenate([A - X, X - Dv])
        out = luxemburg_norms(space, rows, method="newton")
        return out[: len(X)], out[len(X) :]

    def fun(X):
        da, dd = dists(X)
        return da**2 + dd**2

    scale = max(1.0, float(np.abs(np.concatenate([A, Dv])).max()))
    x0 = np.stack([start_rng(seed, k).uniform(-2 * scale, 2 * scale, dim) for k in range(starts)])
    res = nelder_mead_batch(fun, x0, step=0.1 * scale, max_iters=max_iters, xatol=1e-12, fatol=1e-16)
    X = res.x
    for _ in range(2):
        res = nelder_mead_batch(fun, X, step=1e-3 * scale, max_iters=max_iters, xatol=1e-13, fatol=1e-18)
        X = res.x
    da, dd = dists(X)
    resid = np.maximum(np.abs(da - half), np.abs(dd - half))
    kept = X[resid <= accept]
    sep = 0.0
    for i in range(len(kept)):
        if i + 1 < len(kept):
            diffs = kept[i + 1 :] - kept[i]
            sep = max(sep, float(luxemburg_norms(space, diffs).max()))
    return MidpointSearch(
        midpoints=[FiniteVector.from_dense(k) for k in kept],
        residuals=resid,
        separation=sep,
        starts=starts,
        seed=seed,
    )


def james_objective(space, x, y) -> float:
    """``min(|x/|x| + y/|y||, |x/|x| - y/|y||)``."""
    space = parse_space(space)
    x, y = as_vector(x), as_vector(y)
    if x.is_zero() or y.is_zero():
        raise DomainError("james_objective needs nonzero x and y")
    xn = x / luxemburg_norm(space, x)
    yn = y / luxemburg_norm(space, y)
    return min(luxemburg_norm(space, xn + yn), luxemburg_norm(space, xn - yn))


def block_pair(n: int, start: int = 1):
    """Indicator vectors of the disjoint blocks ``[start, start+n)`` and ``[start+n, start+2n)``."""
    if n < 1:
        raise InvalidInputError("block size must be positive")
    x = FiniteVector(tuple(range(start, start + n)), (1.0,) * n)
    y = FiniteVector(tuple(range(start + n, start + 2 * n)), (1.0,) * n)
    return x, y
