"""Parametric severity laws, window transforms and synthetic LTRC generators.

Ground-up losses follow either a shifted exponential or a Pareto I law.
Recorded data passes through a deductible/limit window: fixed thresholds
reproduce the classic conditional construction min(X, u) | X > d, while the
random-truncation mode draws a truncation variable per loss and keeps the
pairs with t <= y, which is what makes the full ground-up law recoverable by
the product-limit estimator.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, signal, stats

from .errors import CalibrationError, GenerationError, NumericalError
from .ltrc import LtrcSample
from .rng import derive_rng

__all__ = [
    "ModelFamily",
    "SeverityModel",
    "TruncationLaw",
    "WindowScheme",
    "DependentModelConfig",
    "QuadratureConfig",
    "ground_up_quantile",
    "window_quantile",
    "sample_ltrc_iid",
    "sample_ltrc_dependent",
    "sample_dependent_marginal",
    "dependent_censoring_fraction",
    "calibrate_truncation_location",
    "theoretical_srm",
]


class ModelFamily(str, enum.Enum):
    SHIFTED_EXPONENTIAL = "shifted-exponential"
    PARETO_I = "pareto-i"


@dataclass(frozen=True)
class SeverityModel:
    """Ground-up severity law.

    For the shifted exponential, ``x0`` is the location and ``theta`` the
    scale; for Pareto I, ``x0`` is the scale and ``alpha`` the shape.  The
    support starts at ``x0`` in both cases.
    """

    family: ModelFamily
    x0: float
    theta: float | None = None
    alpha: float | None = None

    def __post_init__(self) -> None:
        if self.x0 <= 0:
            raise ValueError("x0 must be strictly positive")
        if self.family is ModelFamily.SHIFTED_EXPONENTIAL:
            if self.theta is None or self.theta <= 0:
                raise ValueError("shifted exponential requires theta > 0")
        elif self.family is ModelFamily.PARETO_I:
            if self.alpha is None or self.alpha <= 0:
                raise ValueError("Pareto I requires alpha > 0")
        else:  # pragma: no cover - enum is closed
            raise ValueError(f"unknown family {self.family!r}")

    @classmethod
    def shifted_exponential(cls, x0: float, theta: float) -> "SeverityModel":
        return cls(ModelFamily.SHIFTED_EXPONENTIAL, x0=x0, theta=theta)

    @classmethod
    def pareto_i(cls, x0: float, alpha: float) -> "SeverityModel":
        return cls(ModelFamily.PARETO_I, x0=x0, alpha=alpha)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        x_safe = np.maximum(x, self.x0)  # below-support values are masked to 0
        if self.family is ModelFamily.SHIFTED_EXPONENTIAL:
            out = -np.expm1(-(x_safe - self.x0) / self.theta)
        else:
            out = 1.0 - (self.x0 / x_safe) ** self.alpha
        out = np.where(x <= self.x0, 0.0, out)
        return float(out) if out.ndim == 0 else out

    def quantile(self, p):
        return ground_up_quantile(self, p)

    def mean(self) -> float:
        if self.family is ModelFamily.SHIFTED_EXPONENTIAL:
            return self.x0 + self.theta
        if self.alpha <= 1.0:
            return math.inf
        return self.x0 * self.alpha / (self.alpha - 1.0)


def ground_up_quantile(model: SeverityModel, p):
    """Quantile of the ground-up law; defined for p in [0, 1)."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("quantile level must lie in [0, 1)")
    if model.family is ModelFamily.SHIFTED_EXPONENTIAL:
        out = model.x0 - model.theta * np.log1p(-p_arr)
    else:
        out = model.x0 * (1.0 - p_arr) ** (-1.0 / model.alpha)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TruncationLaw:
    """Distribution of the random truncation variable."""

    kind: str  # "uniform" | "normal" | "point"
    a: float = 0.0
    b: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    value: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("uniform", "normal", "point"):
            raise ValueError(f"unknown truncation law {self.kind!r}")
        if self.kind == "uniform" and not self.a < self.b:
            raise ValueError("uniform truncation law needs a < b")
        if self.kind == "normal" and self.sigma <= 0:
            raise ValueError("normal truncation law needs sigma > 0")

    @classmethod
    def uniform(cls, a: float, b: float) -> "TruncationLaw":
        return cls(kind="uniform", a=a, b=b)

    @classmethod
    def normal(cls, mu: float, sigma: float = 1.0) -> "TruncationLaw":
        return cls(kind="normal", mu=mu, sigma=sigma)

    @classmethod
    def point(cls, value: float) -> "TruncationLaw":
        return cls(kind="point", value=value)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(self.a, self.b, size)
        if self.kind == "normal":
            return self.mu + self.sigma * rng.standard_normal(size)
        return np.full(size, self.value)

    def describe(self) -> str:
        if self.kind == "uniform":
            return f"uniform({self.a:g},{self.b:g})"
        if self.kind == "normal":
            return f"normal({self.mu:g},{self.sigma:g})"
        return f"point({self.value:g})"


@dataclass(frozen=True)
class WindowScheme:
    """Deductible/limit window applied to ground-up losses.

    In ``fixed`` mode every observation carries t = deductible and is
    censored at the limit.  In ``random`` mode the truncation value is drawn
    from ``truncation_law`` per loss, censoring still happens at the limit,
    and only pairs with t <= y are retained.
    """

    deductible: float
    limit: float
    mode: str = "fixed"  # "fixed" | "random"
    truncation_law: TruncationLaw | None = None

    def __post_init__(self) -> None:
        if not self.deductible < self.limit:
            raise ValueError("deductible must be below the policy limit")
        if self.mode not in ("fixed", "random"):
            raise ValueError(f"unknown window mode {self.mode!r}")
        if self.mode == "random" and self.truncation_law is None:
            raise ValueError("random-truncation mode requires a truncation law")

    @classmethod
    def fixed(cls, deductible: float, limit: float) -> "WindowScheme":
        return cls(deductible=deductible, limit=limit, mode="fixed")

    @classmethod
    def random_truncation(
        cls, law: TruncationLaw, limit: float, deductible: float = 0.0
    ) -> "WindowScheme":
        return cls(deductible=deductible, limit=limit, mode="random", truncation_law=law)


def window_quantile(model: SeverityModel, scheme: WindowScheme, p):
    """Quantile of the fixed-window law min(X, u) | X > d; defined on [0, 1]."""
    d, u = scheme.deductible, scheme.limit
    if not d > model.x0:
        raise ValueError("deductible must exceed the support left endpoint")
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr < 0.0) or np.any(p_arr > 1.0):
        raise ValueError("quantile level must lie in [0, 1]")
    if model.family is ModelFamily.SHIFTED_EXPONENTIAL:
        branch = -math.expm1(-(u - d) / model.theta) if math.isfinite(u) else 1.0
        body = d - model.theta * np.log1p(-np.minimum(p_arr, branch))
    else:
        branch = 1.0 - (d / u) ** model.alpha if math.isfinite(u) else 1.0
        body = d * (1.0 - np.minimum(p_arr, branch)) ** (-1.0 / model.alpha)
    out = np.where(p_arr < branch, body, u)
    return float(out) if out.ndim == 0 else out


def window_branch_point(model: SeverityModel, scheme: WindowScheme) -> float:
    """Probability level at which the window quantile hits the limit."""
    d, u = scheme.deductible, scheme.limit
    if not math.isfinite(u):
        return 1.0
    if model.family is ModelFamily.SHIFTED_EXPONENTIAL:
        return -math.expm1(-(u - d) / model.theta)
    return 1.0 - (d / u) ** model.alpha


def sample_ltrc_iid(
    model: SeverityModel,
    scheme: WindowScheme,
    n: int,
    seed: int,
    acceptance_floor: float = 1e-6,
) -> LtrcSample:
    """Draw exactly ``n`` LTRC observations from the windowed severity law.

    Fixed mode rejects ground-up draws at or below the deductible and caps
    at the limit; random mode draws a truncation value per loss and keeps
    pairs with t <= y.  Deterministic given ``seed``.  Aborts when the
    acceptance probability falls below ``acceptance_floor``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = derive_rng(seed)
    u_cap = scheme.limit

    if scheme.mode == "fixed":
        accept_prob = 1.0 - float(model.cdf(scheme.deductible))
        if accept_prob < acceptance_floor:
            raise GenerationError(
                f"acceptance probability {accept_prob:.3g} below floor {acceptance_floor:.3g} "
                f"(deductible {scheme.deductible:g} too deep in the tail)"
            )

    ys: list[np.ndarray] = []
    ts: list[np.ndarray] = []
    got = 0
    drawn = 0
    while got < n:
        batch = max(256, 2 * (n - got))
        x = ground_up_quantile(model, rng.random(batch))
        if scheme.mode == "fixed":
            keep = x > scheme.deductible
            t_batch = np.full(int(keep.sum()), float(scheme.deductible))
            y_batch = np.minimum(x[keep], u_cap)
        else:
            t = scheme.truncation_law.sample(rng, batch)
            y = np.minimum(x, u_cap)
            keep = t <= y
            t_batch = t[keep]
            y_batch = y[keep]
        drawn += batch
        got += y_batch.size
        ys.append(y_batch)
        ts.append(t_batch)
        if drawn >= 10_000 and got == 0:
            raise GenerationError(
                f"no acceptances in {drawn} draws; empirical acceptance below "
                f"{1.0 / drawn:.3g}"
            )
        if drawn > max(10_000.0, n / acceptance_floor):
            raise GenerationError(
                f"acceptance rate {got / drawn:.3g} too low to produce {n} observations"
            )
    y_all = np.concatenate(ys)[:n]
    t_all = np.concatenate(ts)[:n]
    delta = (y_all < u_cap).astype(np.int8)
    return LtrcSample(y_all, t_all, delta)


@dataclass(frozen=True)
class DependentModelConfig:
    """Configuration of the dependent (serially correlated) generator.

    The covariate chain is an AR(1) with coefficient ``rho`` and innovation
    scale 0.5; losses and censoring values are noisy sinusoids of the
    covariate with amplitudes ``phi1``..``phi3``; truncation values are
    Normal(mu, 1).  ``phi2`` controls the unconditional censoring fraction
    P(X > S) = 1 - Phi(0.5 phi2 / sqrt(phi1^2 + phi3^2)).
    """

    rho: float
    phi1: float = 0.3
    phi2: float = 1.087
    phi3: float = 0.3
    mu: float = 0.0
    target_truncation_rate: float | None = None
    target_censoring_pc: float | None = None
    pc_tolerance: float = 0.005

    def __post_init__(self) -> None:
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be below 1")
        if min(self.phi1, self.phi2, self.phi3) <= 0:
            raise ValueError("phi1, phi2, phi3 must be strictly positive")
        for name in ("target_truncation_rate", "target_censoring_pc"):
            rate = getattr(self, name)
            if rate is not None and not 0.0 < rate < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.target_censoring_pc is not None:
            pc = dependent_censoring_fraction(self.phi1, self.phi2, self.phi3)
            if abs(pc - self.target_censoring_pc) > self.pc_tolerance:
                raise ValueError(
                    f"phi parameters give censoring fraction {pc:.4f}, not the target "
                    f"{self.target_censoring_pc:.4f} (tolerance {self.pc_tolerance})"
                )

    def with_mu(self, mu: float) -> "DependentModelConfig":
        return DependentModelConfig(
            rho=self.rho,
            phi1=self.phi1,
            phi2=self.phi2,
            phi3=self.phi3,
            mu=mu,
            target_truncation_rate=self.target_truncation_rate,
            target_censoring_pc=self.target_censoring_pc,
            pc_tolerance=self.pc_tolerance,
        )


def dependent_censoring_fraction(phi1: float, phi2: float, phi3: float) -> float:
    """Unconditional censoring probability P(X > S) of the dependent model."""
    return float(stats.norm.sf(0.5 * phi2 / math.hypot(phi1, phi3)))


def _dependent_batch(cfg: DependentModelConfig, rng: np.random.Generator, m: int, x1_prev):
    """One batch of the dependent chain; returns (x1, X, S, last x1 state)."""
    e = rng.standard_normal(m)
    if x1_prev is None:
        x1 = signal.lfilter([0.5], [1.0, -cfg.rho], e)
    else:
        x1, _ = signal.lfilter([0.5], [1.0, -cfg.rho], e, zi=np.array([cfg.rho * x1_prev]))
    sin_part = np.sin(np.pi * x1)
    cos_part = 1.0 + 0.3 * np.cos(np.pi * x1)
    x = sin_part + cfg.phi1 * cos_part * rng.standard_normal(m)
    s = sin_part + 0.5 * cfg.phi2 * cos_part + cfg.phi3 * cos_part * rng.standard_normal(m)
    return x1, x, s, float(x1[-1])


def sample_ltrc_dependent(
    cfg: DependentModelConfig,
    n: int,
    seed: int,
    acceptance_floor: float = 1e-6,
) -> LtrcSample:
    """Draw exactly ``n`` retained observations from the dependent model.

    The covariate chain runs continuously across rejected observations, so
    the retained subsequence inherits its mixing behaviour.  Retention keeps
    triples with t <= y.  Deterministic given ``seed``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = derive_rng(seed)
    ys: list[np.ndarray] = []
    ts: list[np.ndarray] = []
    ds: list[np.ndarray] = []
    got = 0
    drawn = 0
    x1_prev = None
    while got < n:
        m = max(256, 4 * (n - got))
        _, x, s, x1_prev = _dependent_batch(cfg, rng, m, x1_prev)
        y = np.minimum(x, s)
        delta = (x <= s).astype(np.int8)
        t = cfg.mu + rng.standard_normal(m)
        keep = t <= y
        ys.append(y[keep])
        ts.append(t[keep])
        ds.append(delta[keep])
        got += int(keep.sum())
        drawn += m
        if drawn >= 10_000 and got == 0:
            raise GenerationError(f"no acceptances in {drawn} draws of the dependent model")
        if drawn > max(10_000.0, n / acceptance_floor):
            raise GenerationError(
                f"acceptance rate {got / drawn:.3g} too low to produce {n} observations"
            )
    return LtrcSample(
        np.concatenate(ys)[:n], np.concatenate(ts)[:n], np.concatenate(ds)[:n]
    )


def sample_dependent_marginal(cfg: DependentModelConfig, n_draws: int, seed: int) -> np.ndarray:
    """Draws from the stationary marginal law of the loss variable X.

    Used as the Monte Carlo oracle for theoretical risk-measure values of
    the dependent design.
    """
    rng = derive_rng(seed)
    sd = 0.5 / math.sqrt(1.0 - cfg.rho**2)
    x1 = sd * rng.standard_normal(n_draws)
    cos_part = 1.0 + 0.3 * np.cos(np.pi * x1)
    return np.sin(np.pi * x1) + cfg.phi1 * cos_part * rng.standard_normal(n_draws)


def calibrate_truncation_location(
    cfg: DependentModelConfig,
    target_alpha: float,
    tolerance: float = 0.005,
    seed: int = 1_000_003,
    n_eval: int = 200_000,
    bracket: tuple[float, float] = (-20.0, 20.0),
    max_iter: int = 200,
) -> float:
    """Find mu so that the retention probability P(T <= Y) hits ``target_alpha``.

    Uses common random numbers: one fixed evaluation set of (Y, T0) pairs is
    drawn once, making the simulated rate a monotone nonincreasing step
    function of mu that bisection can cut reliably.
    """
    if not 0.0 < target_alpha < 1.0:
        raise ValueError("target_alpha must lie in (0, 1)")
    rng = derive_rng(seed, "calibration")
    _, x, s, _ = _dependent_batch(cfg, rng, n_eval, None)
    y = np.minimum(x, s)
    t0 = rng.standard_normal(n_eval)

    def rate(mu: float) -> float:
        return float(np.mean(t0 + mu <= y))

    lo, hi = bracket
    if not (rate(lo) >= target_alpha >= rate(hi)):
        raise CalibrationError(
            f"bracket {bracket} does not straddle retention rate {target_alpha}"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r = rate(mid)
        if abs(r - target_alpha) <= tolerance:
            return mid
        if r > target_alpha:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    raise CalibrationError(
        f"bisection failed to reach rate {target_alpha} +- {tolerance}; "
        f"final interval [{lo}, {hi}]"
    )


@dataclass(frozen=True)
class QuadratureConfig:
    """Adaptive-quadrature settings for theoretical risk-measure values."""

    abs_tol: float = 1e-6
    rel_tol: float = 1e-9
    upper_clip: float = 1e-12
    limit: int = 400


def theoretical_srm(
    quantile_fn,
    spectrum,
    quad: QuadratureConfig | None = None,
    breakpoints: tuple[float, ...] = (),
) -> float:
    """Integrate a quantile function against a spectrum by adaptive quadrature.

    Unbounded quantiles are clipped at level 1 - ``upper_clip``; for the laws
    used here the clipped mass is far below the requested tolerance.  Known
    kinks of the quantile function can be passed as ``breakpoints``.
    """
    cfg = quad or QuadratureConfig()
    hi = 1.0 - cfg.upper_clip
    top = float(quantile_fn(hi))
    if not np.isfinite(top):
        raise NumericalError(
            f"quantile function is not finite at the clipped level {hi!r}"
        )
    pts = {float(p) for p in breakpoints if 0.0 < p < hi}
    tail_start = getattr(spectrum, "p", None)
    if tail_start is not None and 0.0 < tail_start < hi:
        pts.add(float(tail_start))
    k = getattr(spectrum, "k", 0.0)
    if k and k > 4.0:
        # hint the boundary layer of a sharply concentrated spectrum
        pts.update(1.0 - c / k for c in (1.0, 5.0, 20.0) if 0.0 < 1.0 - c / k < hi)

    def integrand(u: float) -> float:
        return float(spectrum.phi(u)) * float(quantile_fn(u))

    # roundoff near a clipped singular endpoint can stop the extrapolation
    # before the requested tolerance; the reported error bound is checked
    # instead of trusting the warning-free path
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, abserr = integrate.quad(
            integrand,
            0.0,
            hi,
            points=sorted(pts) or None,
            limit=cfg.limit,
            epsabs=cfg.abs_tol,
            epsrel=cfg.rel_tol,
        )
    if not np.isfinite(value):
        raise NumericalError(f"quadrature returned {value!r} (abserr {abserr!r})")
    if abserr > max(100.0 * cfg.abs_tol, 1e-6 * abs(value)):
        raise NumericalError(
            f"quadrature error bound {abserr:.3g} too large for value {value:.6g}"
        )
    return float(value)
