"""Product-limit estimation for left-truncated right-censored (LTRC) samples.

An LTRC observation is a triple ``(y, t, delta)``: the recorded loss ``y``
(possibly capped by a policy limit), the truncation value ``t`` under which
the loss entered the data at all, and the censoring indicator ``delta``
(1 if the loss was observed exactly, 0 if it was capped).  The product-limit
estimator recovers the loss distribution from such triples by multiplying
one-step survival factors over risk sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "LtrcObservation",
    "LtrcSample",
    "StepDistribution",
    "QuantileFunction",
    "risk_set_fraction",
    "uncensored_subdist",
    "fit_pl",
    "pl_quantile",
    "EXACT_PRODUCT_LIMIT",
]

# Above this sample size the survival product is accumulated in log space
# (max relative error ~n*eps < 1e-12 at the sizes that path serves); at or
# below it the product is carried as an exact rational.
EXACT_PRODUCT_LIMIT = 10_000


@dataclass(frozen=True)
class LtrcObservation:
    """One (y, t, delta) triple."""

    y: float
    t: float
    delta: int

    def __post_init__(self) -> None:
        if self.delta not in (0, 1):
            raise ValueError(f"delta must be 0 or 1, got {self.delta!r}")
        if not self.t <= self.y:
            raise ValueError(f"truncation value {self.t} exceeds observed value {self.y}")


class LtrcSample:
    """An LTRC sample held as aligned, write-locked numpy arrays."""

    __slots__ = ("y", "t", "delta")

    def __init__(self, y: Sequence[float], t: Sequence[float], delta: Sequence[int]):
        y_arr = np.array(y, dtype=float)
        t_arr = np.array(t, dtype=float)
        d_arr = np.array(delta, dtype=np.int8)
        if y_arr.ndim != 1 or y_arr.size == 0:
            raise ValueError("sample must contain at least one observation")
        if y_arr.shape != t_arr.shape or y_arr.shape != d_arr.shape:
            raise ValueError("y, t and delta must have equal length")
        if not np.all(np.isfinite(y_arr)):
            raise ValueError("observed values must be finite")
        if not np.all((d_arr == 0) | (d_arr == 1)):
            raise ValueError("delta entries must be 0 or 1")
        if not np.all(t_arr <= y_arr):
            bad = int(np.argmax(t_arr > y_arr))
            raise ValueError(f"observation {bad}: truncation value exceeds observed value")
        for arr in (y_arr, t_arr, d_arr):
            arr.flags.writeable = False
        object.__setattr__(self, "y", y_arr)
        object.__setattr__(self, "t", t_arr)
        object.__setattr__(self, "delta", d_arr)

    @classmethod
    def from_observations(cls, observations: Iterable[LtrcObservation]) -> "LtrcSample":
        obs = list(observations)
        return cls([o.y for o in obs], [o.t for o in obs], [o.delta for o in obs])

    @classmethod
    def from_complete_data(cls, values: Sequence[float]) -> "LtrcSample":
        """Wrap fully observed data: no truncation, no censoring."""
        values = np.asarray(values, dtype=float)
        return cls(values, np.full(values.shape, -np.inf), np.ones(values.shape, dtype=np.int8))

    def __len__(self) -> int:
        return self.y.size

    def __iter__(self):
        for yi, ti, di in zip(self.y, self.t, self.delta):
            yield LtrcObservation(float(yi), float(ti), int(di))

    def sorted_order(self) -> np.ndarray:
        """Indices sorting by y, uncensored before censored at equal y."""
        return np.lexsort((-self.delta, self.y))


def risk_set_fraction(sample: LtrcSample, z: float) -> float:
    """Fraction of observations with t <= z <= y (the empirical risk set)."""
    count = int(np.count_nonzero((sample.t <= z) & (z <= sample.y)))
    return count / len(sample)


def uncensored_subdist(sample: LtrcSample, y: float) -> float:
    """Empirical sub-distribution of uncensored values: mean of 1{Y<=y, delta=1}."""
    count = int(np.count_nonzero((sample.y <= y) & (sample.delta == 1)))
    return count / len(sample)


@dataclass(frozen=True)
class StepDistribution:
    """A right-continuous nondecreasing step CDF.

    ``values[j]`` is the CDF value at and immediately after ``knots[j]``;
    before the first knot the CDF equals ``left_value``.  When the fit was
    carried in exact rational arithmetic, ``exact_values`` holds the same
    values as ``Fraction`` instances.
    """

    knots: np.ndarray
    values: np.ndarray
    left_value: float = 0.0
    exact_values: tuple[Fraction, ...] | None = None
    zero_factor_count: int = 0
    n: int = 0

    def __post_init__(self) -> None:
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)
        if knots.size == 0:
            raise ValueError("a step distribution needs at least one knot")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(np.diff(values) < 0) or values[0] < self.left_value:
            raise ValueError("CDF values must be nondecreasing")
        if values[-1] != 1.0 or np.any(values > 1.0) or self.left_value < 0.0:
            raise ValueError("CDF values must lie in [0, 1] and reach 1 at the last knot")

    def cdf(self, x):
        """Evaluate the CDF at scalar or array ``x``."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.knots, x, side="right")
        padded = np.concatenate(([self.left_value], self.values))
        out = padded[idx]
        return float(out) if out.ndim == 0 else out

    def cdf_exact(self, x: float) -> Fraction:
        """Exact CDF value at ``x``; requires an exactly fitted distribution."""
        if self.exact_values is None:
            raise ValueError("distribution was not fitted in exact arithmetic")
        idx = int(np.searchsorted(self.knots, x, side="right"))
        if idx == 0:
            return Fraction(0)
        return self.exact_values[idx - 1]

    def jumps(self) -> np.ndarray:
        """Probability mass at each knot."""
        return np.diff(np.concatenate(([self.left_value], self.values)))

    def write_csv(self, path) -> None:
        """Dump knot/value pairs (debugging aid)."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("knot,value\n")
            for k, v in zip(self.knots, self.values):
                fh.write(f"{k:.17g},{v:.17g}\n")


@dataclass(frozen=True)
class QuantileFunction:
    """Generalized inverse of a :class:`StepDistribution`.

    The function is constant on each probability segment
    ``(segment_lo[j], segment_hi[j]]`` with value ``values[j]``; it is defined
    on (0, 1] and ``segment_hi[-1] == 1``.
    """

    segment_lo: np.ndarray
    segment_hi: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        lo = np.asarray(self.segment_lo, dtype=float)
        hi = np.asarray(self.segment_hi, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "segment_lo", lo)
        object.__setattr__(self, "segment_hi", hi)
        object.__setattr__(self, "values", vals)
        if not (lo.size == hi.size == vals.size > 0):
            raise ValueError("segment arrays must be nonempty and aligned")
        if lo[0] != 0.0 or hi[-1] != 1.0:
            raise ValueError("segments must cover (0, 1]")
        if np.any(lo >= hi) or np.any(hi[:-1] != lo[1:]):
            raise ValueError("segments must be increasing and contiguous")
        if np.any(np.diff(vals) < 0):
            raise ValueError("quantile values must be nondecreasing")

    def __call__(self, p):
        p_arr = np.asarray(p, dtype=float)
        if np.any(p_arr <= 0.0) or np.any(p_arr > 1.0):
            raise ValueError("quantile levels must lie in (0, 1]")
        idx = np.searchsorted(self.segment_hi, p_arr, side="left")
        out = self.values[idx]
        return float(out) if out.ndim == 0 else out


def fit_pl(sample: LtrcSample, exact: bool | None = None) -> StepDistribution:
    """Fit the product-limit CDF of an LTRC sample.

    The estimate multiplies, over uncensored observations with value <= x,
    the factors (R-1)/R where R counts observations whose (t, y) interval
    covers that value; the CDF is forced to 1 at and beyond the largest y.
    Ties in y are swept uncensored-first, and tied uncensored points each
    contribute their own factor at the shared risk-set count.

    With ``exact`` left as None the survival product is carried as an exact
    rational for samples up to ``EXACT_PRODUCT_LIMIT`` observations and in
    log space above.  A factor can be exactly zero before the largest y
    (risk set of size one at an uncensored point); the fit then absorbs all
    remaining mass at that knot and reports the event in
    ``zero_factor_count``.
    """
    n = len(sample)
    if exact is None:
        exact = n <= EXACT_PRODUCT_LIMIT

    order = sample.sorted_order()
    ys = sample.y[order]
    ds = sample.delta[order]
    ts = np.sort(sample.t)
    # risk-set size at each sorted y: #{t_j <= y_i} - #{y_j < y_i}; >= 1 always
    risk = np.searchsorted(ts, ys, side="right") - np.searchsorted(ys, ys, side="left")

    y_max = ys[-1]
    knots: list[float] = []
    vals_float: list[float] = []
    vals_exact: list[Fraction] = []
    zero_factors = 0

    surv_frac = Fraction(1)
    log_surv = 0.0
    surv_hit_zero = False

    i = 0
    while i < n:
        j = i
        while j < n and ys[j] == ys[i]:
            if ds[j] == 1:
                r = int(risk[j])
                if r == 1 and ys[j] < y_max:
                    zero_factors += 1
                if exact:
                    surv_frac *= Fraction(r - 1, r)
                elif r == 1:
                    surv_hit_zero = True
                else:
                    log_surv += np.log1p(-1.0 / r)
            j += 1
        at_max = ys[i] == y_max
        if exact:
            if at_max:
                surv_frac = Fraction(0)
            cdf_exact = 1 - surv_frac
            cdf_val = float(cdf_exact)
        else:
            if at_max:
                surv_hit_zero = True
            cdf_val = 1.0 if surv_hit_zero else float(-np.expm1(log_surv))
            cdf_exact = Fraction(0)
        knots.append(float(ys[i]))
        vals_float.append(cdf_val)
        vals_exact.append(cdf_exact)
        i = j

    # keep only knots that add mass; the last group (y_max) always has value 1
    keep = [0]
    for idx in range(1, len(knots)):
        if vals_float[idx] > vals_float[keep[-1]]:
            keep.append(idx)

    return StepDistribution(
        knots=np.array([knots[idx] for idx in keep]),
        values=np.array([vals_float[idx] for idx in keep]),
        left_value=0.0,
        exact_values=tuple(vals_exact[idx] for idx in keep) if exact else None,
        zero_factor_count=zero_factors,
        n=n,
    )


def pl_quantile(dist: StepDistribution) -> QuantileFunction:
    """Generalized inverse q(p) = inf{x : F(x) >= p} of a step CDF."""
    mass = dist.jumps()
    keep = mass > 0
    hi = dist.values[keep]
    x = dist.knots[keep]
    lo = np.concatenate(([0.0], hi[:-1]))
    return QuantileFunction(segment_lo=lo, segment_hi=hi, values=x)
