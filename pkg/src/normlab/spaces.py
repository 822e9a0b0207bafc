"""Orlicz and modular sequence spaces with Luxemburg norms.

Every supported space is a modular sequence space whose coordinate functions
are finite sums of powers, ``M_i(t) = t**p + t**q_i``.  Classical ``l_p`` is the
single-term case.  Norms are computed as the root of the decreasing map
``rho -> sum_i M_i(|x_i| / rho)`` at level 1, by geometric bracketing followed
by bisection.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import ConvergenceError, DomainError, InvalidInputError

__all__ = [
    "FamilyKind",
    "ExponentRule",
    "ModularFamily",
    "SpaceSpec",
    "FiniteVector",
    "modular_sum",
    "luxemburg_norm",
    "luxemburg_norms",
    "lp_norm",
    "conjugate_index",
    "distance",
    "parse_space",
    "LuxemburgNorm",
]

DEFAULT_RTOL = 1e-12
_MAX_BRACKET_STEPS = 2100
_MAX_BISECT_STEPS = 400


class FamilyKind(str, Enum):
    PURE_POWER = "PurePower"
    ORLICZ_PR = "OrliczPR"
    MODULAR_PPI = "ModularPPi"


@dataclass(frozen=True)
class ExponentRule:
    """Closed-form exponent schedule ``p_i = p * (1 - 1/(i + i0))``.

    Indices are 1-based.  The schedule increases strictly to ``p`` and stays
    above 2 for every ``i >= 1`` as long as ``p * (1 - 1/(1 + i0)) > 2``.
    """

    p: float
    i0: int

    @staticmethod
    def default_offset(p: float) -> int:
        if not 2 < p < math.inf:
            raise DomainError(f"exponent schedule needs 2 < p < inf, got {p}")
        return math.ceil(p / (p - 2))

    def __call__(self, i):
        i = np.asarray(i, dtype=float)
        out = self.p * (1.0 - 1.0 / (i + self.i0))
        return float(out) if out.ndim == 0 else out

    def gap(self, i):
        """``p - p_i = p / (i + i0)``, without the cancellation of ``p - self(i)``."""
        i = np.asarray(i, dtype=float)
        out = self.p / (i + self.i0)
        return float(out) if out.ndim == 0 else out

    def first(self) -> float:
        return self(1)


@dataclass(frozen=True)
class ModularFamily:
    """Per-coordinate convex functions ``M_i``.

    ``PurePower``: ``t**p``.  ``OrliczPR``: ``t**p + t**r`` with ``1 < p < r < 2``.
    ``ModularPPi``: ``t**p + t**p_i`` with ``2 < p_i < p`` given by an
    :class:`ExponentRule`.
    """

    kind: FamilyKind
    p: float
    r: float | None = None
    exponents: ExponentRule | None = None

    def __post_init__(self):
        kind = FamilyKind(self.kind)
        object.__setattr__(self, "kind", kind)
        p = float(self.p)
        object.__setattr__(self, "p", p)
        if math.isnan(p):
            raise DomainError("exponent p is NaN")
        if kind is FamilyKind.PURE_POWER:
            if not p >= 1:
                raise DomainError(f"PurePower needs p >= 1, got {p}")
        elif kind is FamilyKind.ORLICZ_PR:
            if self.r is None:
                raise DomainError("OrliczPR needs a second exponent r")
            r = float(self.r)
            object.__setattr__(self, "r", r)
            if not (1 < p < r < 2):
                raise DomainError(f"OrliczPR needs 1 < p < r < 2, got p={p}, r={r}")
        else:
            rule = self.exponents
            if rule is None:
                rule = ExponentRule(p, ExponentRule.default_offset(p))
                object.__setattr__(self, "exponents", rule)
            if not p > 2:
                raise DomainError(f"ModularPPi needs p > 2, got {p}")
            if rule.p != p:
                raise DomainError("exponent rule was built for a different p")
            if int(rule.i0) != rule.i0 or rule.i0 < 0:
                raise DomainError(f"offset i0 must be a nonnegative integer, got {rule.i0}")
            # the schedule increases in i, so p_1 > 2 covers every index
            if not rule.first() > 2:
                raise DomainError(
                    f"offset i0={rule.i0} gives p_1={rule.first():.6g} <= 2 for p={p}"
                )

    @classmethod
    def pure_power(cls, p: float) -> "ModularFamily":
        return cls(FamilyKind.PURE_POWER, p)

    @classmethod
    def orlicz(cls, p: float, r: float) -> "ModularFamily":
        return cls(FamilyKind.ORLICZ_PR, p, r=r)

    @classmethod
    def modular(cls, p: float, i0: int | None = None) -> "ModularFamily":
        if i0 is None:
            i0 = ExponentRule.default_offset(p)
        return cls(FamilyKind.MODULAR_PPI, p, exponents=ExponentRule(float(p), int(i0)))

    @property
    def is_sup(self) -> bool:
        return self.kind is FamilyKind.PURE_POWER and math.isinf(self.p)

    @property
    def max_exponent(self) -> float:
        """Largest exponent among the power terms (bounds ``-rho * d/drho`` of the modular)."""
        if self.kind is FamilyKind.ORLICZ_PR:
            return self.r
        return self.p

    def power_terms(self, indices) -> list:
        """Exponents of the power terms of ``M_i`` for each 1-based index.

        Returns a list of scalars or arrays broadcastable against ``indices``.
        """
        if self.kind is FamilyKind.PURE_POWER:
            return [self.p]
        if self.kind is FamilyKind.ORLICZ_PR:
            return [self.p, self.r]
        return [self.p, self.exponents(np.asarray(indices, dtype=float))]

    def eval(self, i, t):
        """``M_i(t)`` for nonnegative ``t`` (scalars or broadcastable arrays)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0):
            raise DomainError("M_i is evaluated at nonnegative arguments only")
        if self.is_sup:
            out = np.where(t <= 1.0, 0.0, np.inf)
        else:
            out = sum(t**e for e in self.power_terms(i))
        return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SpaceSpec:
    family: ModularFamily
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", _default_label(self.family))

    @classmethod
    def lp(cls, p: float, label: str = "") -> "SpaceSpec":
        return cls(ModularFamily.pure_power(p), label)

    @classmethod
    def orlicz(cls, p: float, r: float, label: str = "") -> "SpaceSpec":
        return cls(ModularFamily.orlicz(p, r), label)

    @classmethod
    def modular(cls, p: float, i0: int | None = None, label: str = "") -> "SpaceSpec":
        return cls(ModularFamily.modular(p, i0), label)

    @property
    def kind(self) -> FamilyKind:
        return self.family.kind

    @property
    def p(self) -> float:
        return self.family.p

    def norm(self, x) -> float:
        return luxemburg_norm(self, x)

    def to_json(self) -> dict:
        fam = self.family
        if fam.kind is FamilyKind.PURE_POWER:
            return {"kind": "lp", "p": "inf" if fam.is_sup else fam.p}
        if fam.kind is FamilyKind.ORLICZ_PR:
            return {"kind": "orlicz", "p": fam.p, "r": fam.r}
        return {"kind": "modular", "p": fam.p, "i0": fam.exponents.i0}

    @classmethod
    def from_json(cls, obj: Mapping) -> "SpaceSpec":
        if not isinstance(obj, Mapping):
            raise InvalidInputError(f"space spec must be a JSON object, got {type(obj).__name__}")
        kind = obj.get("kind")
        try:
            p = _as_exponent(obj["p"])
            if kind == "lp":
                return cls.lp(p)
            if kind == "orlicz":
                return cls.orlicz(p, _as_exponent(obj["r"]))
            if kind == "modular":
                i0 = obj.get("i0")
                if i0 is not None and (isinstance(i0, bool) or int(i0) != i0):
                    raise InvalidInputError(f"i0 must be an integer, got {i0!r}")
                return cls.modular(p, None if i0 is None else int(i0))
        except KeyError as exc:
            raise InvalidInputError(f"space spec is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise InvalidInputError(f"bad space spec {dict(obj)!r}: {exc}") from None
        raise InvalidInputError(f"unknown space kind {kind!r}")

    def __str__(self) -> str:
        return self.label


def _as_exponent(value) -> float:
    if isinstance(value, str) and value.strip().lower() in {"inf", "infinity"}:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InvalidInputError(f"exponent must be a number, got {value!r}")
    return float(value)


def _default_label(family: ModularFamily) -> str:
    if family.kind is FamilyKind.PURE_POWER:
        return "lp:inf" if family.is_sup else f"lp:{family.p:g}"
    if family.kind is FamilyKind.ORLICZ_PR:
        return f"orlicz:{family.p:g},{family.r:g}"
    return f"modular:{family.p:g}"


def parse_space(text) -> SpaceSpec:
    """Build a :class:`SpaceSpec` from JSON text, a mapping, or shorthand.

    Shorthand grammar: ``lp:p``, ``orlicz:p,r``, ``modular:p`` or
    ``modular:p,i0``.
    """
    if isinstance(text, SpaceSpec):
        return text
    if isinstance(text, Mapping):
        return SpaceSpec.from_json(text)
    if not isinstance(text, str):
        raise InvalidInputError(f"cannot interpret {text!r} as a space")
    s = text.strip()
    if s.startswith("{"):
        try:
            obj = json.loads(s)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"space spec is not valid JSON: {exc}") from None
        return SpaceSpec.from_json(obj)
    kind, sep, rest = s.partition(":")
    if not sep:
        raise InvalidInputError(f"cannot parse space shorthand {text!r}")
    parts = [t.strip() for t in rest.split(",")]
    try:
        if kind == "lp" and len(parts) == 1:
            return SpaceSpec.lp(_as_exponent(parts[0]) if parts[0].lower() == "inf" else float(parts[0]))
        if kind == "orlicz" and len(parts) == 2:
            return SpaceSpec.orlicz(float(parts[0]), float(parts[1]))
        if kind == "modular" and len(parts) in (1, 2):
            i0 = int(parts[1]) if len(parts) == 2 else None
            return SpaceSpec.modular(float(parts[0]), i0)
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise InvalidInputError(f"cannot parse space shorthand {text!r}: {exc}") from None
    raise InvalidInputError(f"cannot parse space shorthand {text!r}")


@dataclass(frozen=True)
class FiniteVector:
    """Finitely supported real sequence with 1-based coordinates.

    Stored canonically: strictly increasing indices, no exact zeros.
    """

    indices: tuple = ()
    values: tuple = ()
    _lookup: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        val = tuple(float(v) for v in self.values)
        if len(idx) != len(val):
            raise InvalidInputError("indices and values differ in length")
        if any(i < 1 for i in idx):
            raise InvalidInputError("coordinate indices are 1-based")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InvalidInputError("coordinate indices must be strictly increasing")
        if not all(math.isfinite(v) for v in val):
            raise InvalidInputError("vector entries must be finite")
        keep = [(i, v) for i, v in zip(idx, val) if v != 0.0]
        object.__setattr__(self, "indices", tuple(i for i, _ in keep))
        object.__setattr__(self, "values", tuple(v for _, v in keep))
        object.__setattr__(self, "_lookup", dict(keep))

    @classmethod
    def from_dense(cls, values: Iterable[float]) -> "FiniteVector":
        vals = [float(v) for v in np.ravel(np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float))]
        return cls(tuple(range(1, len(vals) + 1)), tuple(vals))

    @classmethod
    def from_mapping(cls, entries: Mapping[int, float]) -> "FiniteVector":
        keys = sorted(entries)
        return cls(tuple(keys), tuple(entries[k] for k in keys))

    @classmethod
    def basis(cls, i: int, scale: float = 1.0) -> "FiniteVector":
        return cls((i,), (scale,))

    @classmethod
    def zero(cls) -> "FiniteVector":
        return cls()

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[tuple]:
        return iter(zip(self.indices, self.values))

    def __getitem__(self, i: int) -> float:
        return self._lookup.get(i, 0.0)

    def is_zero(self) -> bool:
        return not self.indices

    @property
    def dim(self) -> int:
        """Largest touched coordinate (0 for the zero vector)."""
        return self.indices[-1] if self.indices else 0

    def to_dense(self, dim: int | None = None) -> np.ndarray:
        n = self.dim if dim is None else dim
        if n < self.dim:
            raise InvalidInputError(f"vector touches coordinate {self.dim} > {n}")
        out = np.zeros(n)
        if self.indices:
            out[np.asarray(self.indices) - 1] = self.values
        return out

    def _combine(self, other: "FiniteVector", sign: float) -> "FiniteVector":
        if not isinstance(other, FiniteVector):
            return NotImplemented
        acc = dict(self._lookup)
        for i, v in other:
            acc[i] = acc.get(i, 0.0) + sign * v
        return FiniteVector.from_mapping(acc)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __neg__(self):
        return FiniteVector(self.indices, tuple(-v for v in self.values))

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, np.floating, np.integer)):
            return NotImplemented
        return FiniteVector(self.indices, tuple(float(scalar) * v for v in self.values))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))


def as_vector(x) -> FiniteVector:
    """Coerce a dense sequence or array to :class:`FiniteVector`."""
    if isinstance(x, FiniteVector):
        return x
    if isinstance(x, Mapping):
        return FiniteVector.from_mapping(x)
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError):
        raise InvalidInputError(f"cannot interpret {x!r} as a vector") from None
    if arr.ndim > 1:
        raise InvalidInputError(f"expected a 1-d vector, got shape {arr.shape}")
    return FiniteVector.from_dense(np.atleast_1d(arr))


def conjugate_index(q: float) -> float:
    """The exponent ``q'`` with ``1/q + 1/q' = 1``."""
    q = float(q)
    if not (math.isfinite(q) and q > 1):
        raise DomainError(f"conjugate index needs 1 < q < inf, got {q}")
    return q / (q - 1.0)


def lp_norm(p: float, x) -> float:
    p = float(p)
    if math.isnan(p) or p < 1:
        raise DomainError(f"l_p norm needs p >= 1, got {p}")
    a = np.abs(np.asarray(as_vector(x).values, dtype=float))
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    # scale by the max entry to keep a**p in range
    m = a.max()
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def modular_sum(space: SpaceSpec, x, rho: float) -> float:
    """``sum_i M_i(|x_i| / rho)`` over the support of ``x``."""
    rho = float(rho)
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    x = as_vector(x)
    if x.is_zero():
        return 0.0
    t = np.abs(np.asarray(x.values)) / rho
    return float(np.sum(space.family.eval(np.asarray(x.indices), t)))


def _modular_profile(family: ModularFamily, A: np.ndarray, indices: np.ndarray):
    """Return ``phi(rho, rows, slope=False)`` evaluating the modular of rows of ``A``.

    With ``slope=True`` it also returns ``rho * dphi/drho``.  Uniform exponents
    collapse to precomputed power sums so each evaluation is O(rows);
    per-coordinate exponents cost O(rows * dim).
    """
    uniform, per_coord = [], []
    for e in family.power_terms(indices):
        if np.ndim(e) == 0:
            uniform.append((float(e), np.sum(A**e, axis=1)))
        else:
            per_coord.append(np.broadcast_to(np.asarray(e, dtype=float), A.shape[1:]))

    def phi(rho, rows, slope=False):
        out = np.zeros(rho.shape)
        d = np.zeros(rho.shape) if slope else None
        for e, s in uniform:
            term = s[rows] * rho ** (-e)
            out += term
            if slope:
                d -= e * term
        for e in per_coord:
            w = (A[rows] / rho[:, None]) ** e
            out += np.sum(w, axis=1)
            if slope:
                d -= np.sum(e * w, axis=1)
        return (out, d) if slope else out

    return phi


def luxemburg_norms(
    space: SpaceSpec, X, indices=None, rtol: float = DEFAULT_RTOL, method: str = "bisect"
) -> np.ndarray:
    """Luxemburg norms of the rows of a dense 2-d array.

    Column ``j`` holds coordinate ``indices[j]`` (default ``j + 1``).  Each row
    is solved independently, so results do not depend on batch composition.

    ``method="bisect"`` bisects the bracket down to ``rtol``.  ``method="newton"``
    takes Newton steps on ``log(phi)`` against ``log(rho)`` and falls back to
    bisection whenever a step would leave the bracket; it needs a handful of
    evaluations instead of about forty and is used in optimizer inner loops.
    """
    if method not in ("bisect", "newton"):
        raise InvalidInputError(f"unknown root-finding method {method!r}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise InvalidInputError(f"expected a 2-d array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("entries must be finite")
    if indices is None:
        indices = np.arange(1, X.shape[1] + 1)
    indices = np.asarray(indices)
    family = space.family
    A = np.abs(X)
    out = np.zeros(X.shape[0])
    if family.is_sup:
        return A.max(axis=1, initial=0.0)
    nz = np.flatnonzero(A.max(axis=1, initial=0.0) > 0)
    if nz.size == 0:
        return out
    A = A[nz]
    m = A.max(axis=1)
    # rescale so the largest entry is 1; the norm is homogeneous
    A = A / m[:, None]
    phi = _modular_profile(family, A, indices)
    rows = np.arange(A.shape[0])
    p = family.p
    rho0 = np.sum(A**p, axis=1) ** (1.0 / p)
    lo, hi = _bracket(phi, rho0, rows)
    solve = _bisect if method == "bisect" else _newton
    out[nz] = m * solve(phi, lo, hi, rows, rtol)
    return out


def _bracket(phi, rho0, rows):
    lo = rho0.copy()
    hi = rho0.copy()
    above = phi(rho0, rows) > 1.0
    # rows with phi(rho0) > 1 keep lo = rho0 and grow hi; the rest shrink lo
    grow = above.copy()
    shrink = ~above
    steps = 0
    with np.errstate(over="ignore", divide="ignore"):
        while grow.any() or shrink.any():
            steps += 1
            if steps > _MAX_BRACKET_STEPS:
                raise ConvergenceError(
                    "bracketing failed",
                    {"lo": lo.tolist(), "hi": hi.tolist(), "steps": steps},
                )
            if grow.any():
                g = np.flatnonzero(grow)
                hi[g] *= 2.0
                done = phi(hi[g], rows[g]) <= 1.0
                lo[g[~done]] = hi[g[~done]]
                grow[g[done]] = False
            if shrink.any():
                s = np.flatnonzero(shrink)
                lo[s] *= 0.5
                done = phi(lo[s], rows[s]) > 1.0
                hi[s[~done]] = lo[s[~done]]
                shrink[s[done]] = False
    return lo, hi


def _bisect(phi, lo, hi, rows, rtol):
    active = np.ones(lo.shape, dtype=bool)
    steps = 0
    with np.errstate(over="ignore", divide="ignore"):
        while True:
            active &= (hi - lo) > rtol * lo
            if not active.any():
                break
            steps += 1
            if steps > _MAX_BISECT_STEPS:
                raise ConvergenceError(
                    "bisection did not reach tolerance",
                    {"lo": lo[active].tolist(), "hi": hi[active].tolist(), "steps": steps},
                )
            a = np.flatnonzero(active)
            mid = 0.5 * (lo[a] + hi[a])
            stuck = (mid <= lo[a]) | (mid >= hi[a])
            above = phi(mid, rows[a]) > 1.0
            lo[a] = np.where(above, mid, lo[a])
            hi[a] = np.where(above, hi[a], mid)
            active[a[stuck]] = False
    return 0.5 * (lo + hi)


def _newton(phi, lo, hi, rows, rtol):
    x = 0.5 * (lo + hi)
    active = np.ones(lo.shape, dtype=bool)
    steps = 0
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        while active.any():
            steps += 1
            if steps > _MAX_BISECT_STEPS:
                raise ConvergenceError(
                    "Newton iteration did not reach tolerance",
                    {"lo": lo[active].tolist(), "hi": hi[active].tolist(), "steps": steps},
                )
            a = np.flatnonzero(active)
            xa = x[a]
            f, slope = phi(xa, rows[a], slope=True)
            above = f > 1.0
            lo[a] = np.where(above, xa, lo[a])
            hi[a] = np.where(above, hi[a], xa)
            # Newton on log(phi) as a function of log(rho)
            step = np.log(f) * f / slope
            cand = xa * np.exp(-step)
            # rounding can push an exact step a hair outside the bracket
            ok = np.isfinite(cand) & (cand >= lo[a] * (1 - rtol)) & (cand <= hi[a] * (1 + rtol))
            cand = np.clip(cand, lo[a], hi[a])
            nxt = np.where(ok, cand, 0.5 * (lo[a] + hi[a]))
            x[a] = nxt
            small = (ok & (np.abs(step) <= rtol)) | ((hi[a] - lo[a]) <= rtol * lo[a]) | (f == 1.0)
            x[a[f == 1.0]] = xa[f == 1.0]
            active[a[small]] = False
    return x


def luxemburg_norm(space: SpaceSpec, x, rtol: float = DEFAULT_RTOL) -> float:
    """``inf{rho > 0 : sum_i M_i(|x_i|/rho) <= 1}``; 0 for the zero vector."""
    x = as_vector(x)
    if x.is_zero():
        return 0.0
    row = np.asarray(x.values, dtype=float)[None, :]
    return float(luxemburg_norms(space, row, indices=np.asarray(x.indices), rtol=rtol)[0])


def distance(space: SpaceSpec, x, y) -> float:
    return luxemburg_norm(space, as_vector(x) - as_vector(y))


class LuxemburgNorm(TransformerMixin, BaseEstimator):
    """Row-wise Luxemburg norm as a scikit-learn transformer.

    Parameters
    ----------
    space : SpaceSpec or str
        Target space; strings go through :func:`parse_space`.
    output : {"norm", "normalize"}
        ``"norm"`` returns an ``(n_samples, 1)`` column of norms,
        ``"normalize"`` rescales every nonzero row onto the unit sphere.
    rtol : float
        Relative bisection tolerance.
    """

    def __init__(self, space="lp:2", output="norm", rtol=DEFAULT_RTOL):
        self.space = space
        self.output = output
        self.rtol = rtol

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float)
        if self.output not in ("norm", "normalize"):
            raise InvalidInputError(f"unknown output mode {self.output!r}")
        self.space_ = parse_space(self.space)
        return self

    def transform(self, X):
        check_is_fitted(self, "space_")
        X = validate_data(self, X, dtype=float, reset=False)
        norms = luxemburg_norms(self.space_, X, rtol=self.rtol)
        if self.output == "norm":
            return norms[:, None]
        scale = np.where(norms > 0, norms, 1.0)
        return X / scale[:, None]
