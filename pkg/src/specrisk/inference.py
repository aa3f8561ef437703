"""Asymptotic and bootstrap inference for the product-limit SRM estimator.

The asymptotic variance is evaluated by plugging the fitted product-limit
quantities into the limiting covariance functional of the estimator: the
covariance kernel of the underlying empirical process at levels (u, v) is
the risk-weighted uncensored-mass integral up to the lower of the two
levels, and the density in the denominators is replaced by an Epanechnikov
smoothing of the fitted distribution.  With step-function ingredients every
piece integrates in closed form, so the double integral reduces to an exact
double sum over quantile segments.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import BootstrapError, EstimationError, NumericalError, SingularDensityError
from .estimators import EstimateReport, ProdEstimator, SrmEstimator
from .ltrc import LtrcSample, fit_pl, pl_quantile
from .rng import derive_rng

__all__ = [
    "VariancePlugin",
    "estimate_sigma2",
    "EdgeworthDiagnostics",
    "edgeworth_diagnostics",
    "edgeworth_cdf",
    "BootstrapPlan",
    "bootstrap_ci",
    "bootstrap_ci_many",
    "asymptotic_ci",
]


@dataclass(frozen=True)
class VariancePlugin:
    """Settings for the plug-in variance evaluation.

    ``density_bandwidth`` of None selects n^(-1/5) * IQR / 1.349.  The
    probability square is clipped to [clip, 1-clip] because the integrand
    carries 1/density factors that blow up at the edges.  The
    ``covariance_form`` "pathwise-min" evaluates the covariance kernel at
    the lower of the two levels (the form that reduces to the classical
    L-statistic variance without truncation or censoring);
    "literal-product" keeps the product-of-integrals-minus-uv bracket for
    comparison.
    """

    density_bandwidth: float | None = None
    clip: float = 1e-3
    density_floor: float = 1e-12
    covariance_form: str = "pathwise-min"

    def __post_init__(self) -> None:
        if self.density_bandwidth is not None and self.density_bandwidth <= 0:
            raise ValueError("density bandwidth must be strictly positive")
        if not 0.0 < self.clip < 0.5:
            raise ValueError("clip must lie in (0, 0.5)")
        if self.covariance_form not in ("pathwise-min", "literal-product"):
            raise ValueError(f"unknown covariance form {self.covariance_form!r}")


def _risk_counts(sample: LtrcSample, at: np.ndarray) -> np.ndarray:
    """n * C_n evaluated at the given points."""
    ts = np.sort(sample.t)
    ys = np.sort(sample.y)
    return np.searchsorted(ts, at, side="right") - np.searchsorted(ys, at, side="left")


def _pl_ingredients(sample: LtrcSample):
    """Sorted uncensored values with their risk-set counts, plus the PL fit."""
    dist = fit_pl(sample)
    order = sample.sorted_order()
    ys = sample.y[order]
    ds = sample.delta[order]
    risk = _risk_counts(sample, ys)
    unc = ds == 1
    return dist, ys[unc], risk[unc]


def estimate_sigma2(
    sample: LtrcSample,
    spectrum,
    plugin: VariancePlugin | None = None,
) -> float:
    """Plug-in estimate of the asymptotic variance of the PL-based SRM estimate.

    Returns the variance of the sqrt(n)-normalized estimator.  Degenerate
    single-atom fits return 0.  Raises
    :class:`~specrisk.errors.SingularDensityError` when the smoothed density
    falls below the floor inside the clipped integration range.
    """
    plugin = plugin or VariancePlugin()
    n = len(sample)
    dist, y_unc, risk_unc = _pl_ingredients(sample)
    q = pl_quantile(dist)
    if q.values.size < 2:
        return 0.0
    if np.any(risk_unc == 0):
        raise EstimationError("vanishing risk set at an uncensored point")

    # cumulative risk-weighted uncensored mass G(w) = (1/n) sum C_n^{-2},
    # evaluated at the quantile segment values
    g_steps = (n / risk_unc.astype(float)) ** 2 / n
    g_cum = np.cumsum(g_steps)
    seg_g = np.concatenate(([0.0], g_cum))[
        np.searchsorted(y_unc, q.values, side="right")
    ]

    h = plugin.density_bandwidth
    if h is None:
        iqr = float(q(0.75) - q(0.25))
        if iqr == 0.0:
            iqr = float(q.values[-1] - q.values[0])
        if iqr == 0.0:
            return 0.0
        h = n ** (-0.2) * iqr / 1.349
    f_hat = _epanechnikov_density(dist, q.values, h)

    lo = np.maximum(q.segment_lo, plugin.clip)
    hi = np.minimum(q.segment_hi, 1.0 - plugin.clip)
    live = hi > lo
    if not np.any(live):
        return 0.0
    lo, hi = lo[live], hi[live]
    f_live, g_live = f_hat[live], seg_g[live]
    if np.any(f_live < plugin.density_floor):
        raise SingularDensityError(
            f"density estimate below {plugin.density_floor:g} inside the "
            f"clipped range (bandwidth {h:g})"
        )

    decay = spectrum.decay_integral(lo, hi)
    a = decay / f_live
    if plugin.covariance_form == "pathwise-min":
        suffix = np.concatenate((np.cumsum(a[::-1])[::-1][1:], [0.0]))
        sigma2 = float(np.sum(g_live * a * (a + 2.0 * suffix)))
    else:
        decay_sq = spectrum.decay_sq_integral(lo, hi)
        b = (decay - decay_sq) / f_live
        sigma2 = float(np.sum(g_live * a)) ** 2 - float(np.sum(b)) ** 2
    if sigma2 < 0.0:
        warnings.warn(
            f"variance plug-in produced {sigma2:.4g} < 0; clamping to 0",
            RuntimeWarning,
            stacklevel=2,
        )
        sigma2 = 0.0
    return sigma2


def _epanechnikov_density(dist, at: np.ndarray, h: float, chunk: int = 256) -> np.ndarray:
    """Kernel smoothing of a step distribution's jumps, evaluated at ``at``."""
    jumps = dist.jumps()
    knots = dist.knots
    out = np.empty(at.size)
    for start in range(0, at.size, chunk):
        block = at[start : start + chunk, None]
        v = (block - knots[None, :]) / h
        kern = np.where(np.abs(v) <= 1.0, 0.75 * (1.0 - v * v), 0.0)
        out[start : start + chunk] = kern @ jumps / h
    return out


@dataclass(frozen=True)
class EdgeworthDiagnostics:
    """Plug-in ingredients of the second-order normal refinement at one level.

    ``sigma01_sq`` integrates the risk-weighted uncensored mass up to the
    fitted quantile of ``level``; ``kappa3`` is the skewness coefficient
    built from the same mass with a cubed risk weight; ``sigma0_sq`` is the
    full-range analogue and ``sigma1_sq`` the (1-level)^2-scaled variant.
    Both are recorded for diagnostic completeness and have no consumer here.
    """

    sigma01_sq: float
    kappa3: float
    sigma0_sq: float
    sigma1_sq: float
    n: int
    level: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.sigma01_sq < 0:
            raise ValueError("sigma01_sq must be nonnegative")


def edgeworth_diagnostics(sample: LtrcSample, level: float) -> EdgeworthDiagnostics:
    """Evaluate the expansion ingredients on a sample at one probability level."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    n = len(sample)
    dist, y_unc, risk_unc = _pl_ingredients(sample)
    bound = pl_quantile(dist)(level)
    if bound >= float(np.max(sample.y)):
        raise ValueError(
            f"fitted quantile at level {level} reaches the largest observation; "
            "the expansion ingredients are not defined there"
        )
    if np.any(risk_unc == 0):
        raise EstimationError("vanishing risk set at an uncensored point")
    c_inv = n / risk_unc.astype(float)  # 1 / C_n at uncensored points
    in_range = y_unc <= bound
    sigma01_sq = float(np.sum(c_inv[in_range] ** 2)) / n
    i3 = float(np.sum(c_inv[in_range] ** 3)) / n
    sigma0_sq = float(np.sum(c_inv**2)) / n
    if sigma01_sq == 0.0:
        kappa3 = 0.0
    else:
        sigma01 = math.sqrt(sigma01_sq)
        kappa3 = (-7.5 * sigma01_sq**2 + i3) / sigma01**3
    return EdgeworthDiagnostics(
        sigma01_sq=sigma01_sq,
        kappa3=kappa3,
        sigma0_sq=sigma0_sq,
        sigma1_sq=(1.0 - level) ** 2 * sigma01_sq,
        n=n,
        level=level,
    )


def edgeworth_cdf(diag: EdgeworthDiagnostics, y):
    """Second-order refined normal CDF approximation at ``y``.

    Phi(y) minus n^{-1/2} phi(y) [kappa3/6 (y^2 - 1) + sigma01/2]; the
    correction vanishes in the tails and the whole expression converges to
    the standard normal CDF at rate n^{-1/2}.
    """
    y_arr = np.asarray(y, dtype=float)
    base = stats.norm.cdf(y_arr)
    dens = stats.norm.pdf(y_arr)
    sigma01 = math.sqrt(diag.sigma01_sq)
    finite = np.isfinite(y_arr)
    bracket = np.zeros_like(y_arr)
    np.multiply(y_arr, y_arr, out=bracket, where=finite)
    bracket = np.where(finite, diag.kappa3 / 6.0 * (bracket - 1.0) + sigma01 / 2.0, 0.0)
    out = base - diag.n ** (-0.5) * dens * bracket
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BootstrapPlan:
    """Resampling plan: replicate count, stream seed and interval level."""

    replicates: int = 1000
    seed: int = 0
    ci_level: float = 0.90

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not 0.0 < self.ci_level < 1.0:
            raise ValueError("ci_level must lie in (0, 1)")


MIN_REPLICATES_FOR_CI = 50
MAX_FAILURE_FRACTION = 0.10


def bootstrap_ci(
    sample: LtrcSample,
    estimator: SrmEstimator,
    spectrum,
    plan: BootstrapPlan,
) -> EstimateReport:
    """Percentile bootstrap interval for one estimator on one sample.

    Observations are resampled as whole (y, t, delta) triples.  Replicates
    whose estimator evaluation fails are dropped and counted; more than 10%
    drops refuses the interval.  Replicate streams derive from
    ``(plan.seed, replicate index)``, so results are independent of
    evaluation order; intervals are order statistics of the replicate
    estimates.
    """
    return bootstrap_ci_many(sample, estimator, (spectrum,), plan)[0]


def bootstrap_ci_many(
    sample: LtrcSample,
    estimator: SrmEstimator,
    spectra,
    plan: BootstrapPlan,
) -> list[EstimateReport]:
    """Percentile bootstrap for several spectra, sharing resample fits.

    The resampled indices and the per-replicate fit are computed once per
    replicate and integrated against every spectrum, so the reports are
    identical to running :func:`bootstrap_ci` per spectrum with the same
    plan, at a fraction of the cost when the spectrum grid is wide.
    """
    spectra = tuple(spectra)
    n = len(sample)
    can_share = hasattr(estimator, "prepare") and hasattr(estimator, "evaluate")

    def evaluate_all(s: LtrcSample) -> list[float | None]:
        if can_share:
            ctx = estimator.prepare(s)  # failure here fails every spectrum
            values = []
            for spec in spectra:
                try:
                    values.append(estimator.evaluate(ctx, spec))
                except (EstimationError, NumericalError):
                    values.append(None)
            return values
        values = []
        for spec in spectra:
            try:
                values.append(estimator(s, spec))
            except (EstimationError, NumericalError):
                values.append(None)
        return values

    # point estimates on the original sample: failures propagate
    if can_share:
        ctx0 = estimator.prepare(sample)
        points = [estimator.evaluate(ctx0, spec) for spec in spectra]
    else:
        points = [estimator(sample, spec) for spec in spectra]
    estimates: list[list[float]] = [[] for _ in spectra]
    failures = [0] * len(spectra)
    for b in range(plan.replicates):
        rng = derive_rng(plan.seed, b)
        idx = rng.integers(0, n, n)
        resampled = LtrcSample(sample.y[idx], sample.t[idx], sample.delta[idx])
        try:
            values = evaluate_all(resampled)
        except (EstimationError, NumericalError):
            values = [None] * len(spectra)
        for i, value in enumerate(values):
            if value is None:
                failures[i] += 1
            else:
                estimates[i].append(value)

    reports = []
    for i, spectrum in enumerate(spectra):
        if failures[i] > MAX_FAILURE_FRACTION * plan.replicates:
            raise BootstrapError(
                f"{failures[i]}/{plan.replicates} bootstrap replicates failed "
                f"for {estimator.name!r}; interval refused"
            )
        reps = np.sort(np.asarray(estimates[i]))
        used = reps.size
        std_error = float(np.std(reps, ddof=1)) if used >= 2 else None
        ci_low = ci_high = None
        if used >= MIN_REPLICATES_FOR_CI:
            alpha = 1.0 - plan.ci_level
            ci_low = _order_statistic(reps, alpha / 2.0)
            ci_high = _order_statistic(reps, 1.0 - alpha / 2.0)
        reports.append(
            EstimateReport(
                estimator=estimator.name,
                k=getattr(spectrum, "k", None),
                point=points[i],
                std_error=std_error,
                ci_low=ci_low,
                ci_high=ci_high,
                ci_level=plan.ci_level if ci_low is not None else None,
                n_effective=n,
                replicates_used=used,
                replicate_failures=failures[i],
            )
        )
    return reports


def _order_statistic(sorted_values: np.ndarray, q: float) -> float:
    """Generalized-inverse sample quantile (an order statistic)."""
    m = sorted_values.size
    idx = min(m - 1, max(0, math.ceil(q * m) - 1))
    return float(sorted_values[idx])


def asymptotic_ci(
    sample: LtrcSample,
    spectrum,
    plugin: VariancePlugin | None = None,
    level: float = 0.90,
) -> EstimateReport:
    """Normal-limit interval: point +- z_{(1+level)/2} * sigma_hat / sqrt(n)."""
    if not 0.0 <= level < 1.0:
        raise ValueError("level must lie in [0, 1)")
    n = len(sample)
    point = ProdEstimator()(sample, spectrum)
    sigma2 = estimate_sigma2(sample, spectrum, plugin)
    half = float(stats.norm.ppf(0.5 * (1.0 + level))) * math.sqrt(sigma2 / n)
    return EstimateReport(
        estimator="prod",
        k=getattr(spectrum, "k", None),
        point=point,
        std_error=math.sqrt(sigma2 / n),
        ci_low=float(point - half),
        ci_high=float(point + half),
        ci_level=level,
        n_effective=n,
    )
