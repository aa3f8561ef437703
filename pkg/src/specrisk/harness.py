"""Reproducible Monte Carlo experiments over the SRM estimators.

Three designs are built in: two i.i.d. severity designs (shifted exponential
and Pareto I behind a deductible/limit window) and one serially dependent
design.  Every cell of an experiment reports mean, SD, RMSE (with a
delta-method MC standard error) against a documented theoretical target:
the ground-up spectral risk measure for the severity designs (the window-law
value is emitted alongside as a diagnostic) and a large-sample Monte Carlo
oracle of the loss marginal for the dependent design.

Replicates derive their random streams from (master_seed, design, n,
replicate index), so cell results are bit-identical regardless of worker
count or scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__ as _pkg_version
from .errors import EstimationError, NumericalError, SpecriskError
from .estimators import (
    EmpEstimator,
    KernelEstimator,
    MlEstimator,
    PmEstimator,
    ProdEstimator,
    SrmEstimator,
    srm_from_sorted,
)
from .inference import BootstrapPlan, bootstrap_ci
from .ltrc import LtrcSample
from .rng import derive_seed
from .severity import (
    DependentModelConfig,
    SeverityModel,
    TruncationLaw,
    WindowScheme,
    calibrate_truncation_location,
    ground_up_quantile,
    sample_dependent_marginal,
    sample_ltrc_dependent,
    sample_ltrc_iid,
    theoretical_srm,
    window_branch_point,
    window_quantile,
)
from .spectra import ExponentialSpectrum

__all__ = [
    "ExperimentPlan",
    "MCCell",
    "MCResult",
    "CoverageCell",
    "CoverageResult",
    "run_iid_experiment",
    "run_dependent_experiment",
    "run_coverage_experiment",
    "emit_rmse_ratio_log",
    "default_dependent_config",
    "IID_DESIGNS",
]

# Severity-design constants: Exp(1000, 1000) and PaI(1000, 2) behind the
# deductible 4000 / limit 14000 window.
EXP_MODEL = SeverityModel.shifted_exponential(1000.0, 1000.0)
PARETO_MODEL = SeverityModel.pareto_i(1000.0, 2.0)
DEDUCTIBLE = 4000.0
LIMIT = 14000.0
# Default truncation law of the random-truncation mode.  Uniform on
# (0, 2.5 x0): wide enough that ignoring truncation visibly biases the
# empirical estimator, narrow enough that the product-limit fit stays
# identified down to the support left endpoint at small n.
RANDOM_TRUNCATION_LAW = TruncationLaw.uniform(0.0, 2500.0)

IID_DESIGNS = {"iid-exp": EXP_MODEL, "iid-pareto": PARETO_MODEL}
ALL_DESIGNS = ("iid-exp", "iid-pareto", "dependent")

CALIBRATION_SEED = 727_001  # fixed: mu must not drift with the experiment seed


@dataclass(frozen=True)
class ExperimentPlan:
    """Grid, replicate count, estimator set and seeding of one experiment."""

    design: str
    n_grid: tuple[int, ...] = (30, 100, 500)
    k_grid: tuple[float, ...] = (1.0, 5.0, 10.0, 20.0, 100.0, 200.0)
    replicates: int = 1000
    estimators: tuple[str, ...] | None = None
    master_seed: int = 20_250_101
    mode: str = "random-truncation"  # iid designs: or "fixed-thresholds"
    workers: int = 1
    oracle_draws: int = 1_000_000

    def __post_init__(self) -> None:
        if self.design not in ALL_DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; valid: {', '.join(ALL_DESIGNS)}")
        if self.replicates < 2:
            raise ValueError("replicates must be at least 2")
        if not self.n_grid or not self.k_grid:
            raise ValueError("n and k grids must be nonempty")
        if any(n < 1 for n in self.n_grid):
            raise ValueError("sample sizes must be positive")
        if any(k < 0 for k in self.k_grid):
            raise ValueError("risk-aversion coefficients must be nonnegative")
        if self.mode not in ("random-truncation", "fixed-thresholds"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    def resolved_estimators(self) -> tuple[str, ...]:
        if self.estimators is not None:
            return self.estimators
        if self.design == "dependent" or self.mode == "random-truncation":
            return ("prod", "emp", "kernel")
        return ("prod", "emp", "kernel", "ml", "pm")


@dataclass(frozen=True)
class MCCell:
    """Aggregate results of one (design, estimator, n, k) cell."""

    design: str
    estimator: str
    n: int
    k: float
    mean: float
    sd: float
    rmse: float
    rmse_se: float
    theoretical: float
    theoretical_window: float | None
    failures: int
    replicates: int


@dataclass(frozen=True)
class MCResult:
    cells: tuple[MCCell, ...]
    metadata: dict

    def cell(self, estimator: str, n: int, k: float) -> MCCell:
        for c in self.cells:
            if c.estimator == estimator and c.n == n and c.k == k:
                return c
        raise KeyError(f"no cell for ({estimator!r}, n={n}, k={k})")


def _build_estimators(design: str, mode: str, names: tuple[str, ...]) -> list[SrmEstimator]:
    scheme = WindowScheme.fixed(DEDUCTIBLE, LIMIT)
    model = IID_DESIGNS.get(design)
    out: list[SrmEstimator] = []
    for name in names:
        if name == "prod":
            out.append(ProdEstimator())
        elif name == "emp":
            out.append(EmpEstimator())
        elif name == "kernel":
            out.append(KernelEstimator())
        elif name in ("ml", "pm"):
            if model is None:
                raise ValueError(f"estimator {name!r} is undefined for the dependent design")
            if mode != "fixed-thresholds":
                raise ValueError(f"estimator {name!r} requires fixed-thresholds mode")
            if name == "ml":
                out.append(MlEstimator(scheme=scheme, family=model.family, x0=model.x0))
            else:
                out.append(PmEstimator(scheme=scheme, family=model.family, x0=model.x0))
        else:
            raise ValueError(f"unknown estimator {name!r}")
    return out


def _generate_sample(design: str, mode: str, cfg: DependentModelConfig | None, n: int, seed: int) -> LtrcSample:
    if design == "dependent":
        return sample_ltrc_dependent(cfg, n, seed)
    model = IID_DESIGNS[design]
    if mode == "fixed-thresholds":
        scheme = WindowScheme.fixed(DEDUCTIBLE, LIMIT)
    else:
        scheme = WindowScheme.random_truncation(RANDOM_TRUNCATION_LAW, LIMIT)
    return sample_ltrc_iid(model, scheme, n, seed)


def _replicate_range(args) -> np.ndarray:
    """Worker: evaluate all estimators at all k for a range of replicates.

    Returns an array of shape (len(range), n_estimators, n_k); failed
    evaluations are NaN.
    """
    (design, mode, cfg, n, k_grid, estimator_names, master_seed, r_start, r_stop) = args
    estimators = _build_estimators(design, mode, tuple(estimator_names))
    spectra = [ExponentialSpectrum(k) for k in k_grid]
    out = np.full((r_stop - r_start, len(estimators), len(k_grid)), np.nan)
    for row, r in enumerate(range(r_start, r_stop)):
        seed = derive_seed(master_seed, design, "replicate", n, r)
        sample = _generate_sample(design, mode, cfg, n, seed)
        for e_idx, est in enumerate(estimators):
            try:
                ctx = est.prepare(sample)
            except (EstimationError, NumericalError):
                continue
            for k_idx, spec in enumerate(spectra):
                try:
                    out[row, e_idx, k_idx] = est.evaluate(ctx, spec)
                except (EstimationError, NumericalError):
                    pass
    return out


def _run_cells(plan: ExperimentPlan, cfg: DependentModelConfig | None) -> dict[int, np.ndarray]:
    """Replicate evaluations per n: arrays (replicates, estimators, k)."""
    names = plan.resolved_estimators()
    results: dict[int, np.ndarray] = {}
    for n in plan.n_grid:
        chunks = _chunk_ranges(plan.replicates, plan.workers)
        payloads = [
            (plan.design, plan.mode, cfg, n, plan.k_grid, names, plan.master_seed, a, b)
            for a, b in chunks
        ]
        if plan.workers == 1:
            parts = [_replicate_range(p) for p in payloads]
        else:
            with ProcessPoolExecutor(max_workers=plan.workers) as pool:
                parts = list(pool.map(_replicate_range, payloads))
        results[n] = np.concatenate(parts, axis=0)
    return results


def _chunk_ranges(total: int, workers: int) -> list[tuple[int, int]]:
    n_chunks = max(1, min(total, workers * 4))
    step = math.ceil(total / n_chunks)
    return [(a, min(total, a + step)) for a in range(0, total, step)]


def _aggregate(
    plan: ExperimentPlan,
    values: dict[int, np.ndarray],
    theoretical: dict[float, float],
    theoretical_window: dict[float, float] | None,
) -> tuple[MCCell, ...]:
    names = plan.resolved_estimators()
    cells = []
    for n in plan.n_grid:
        arr = values[n]
        for e_idx, name in enumerate(names):
            for k_idx, k in enumerate(plan.k_grid):
                col = arr[:, e_idx, k_idx]
                ok = col[~np.isnan(col)]
                failures = int(col.size - ok.size)
                target = theoretical[k]
                if ok.size == 0:
                    mean = sd = rmse = rmse_se = math.nan
                else:
                    errors_sq = (ok - target) ** 2
                    mean = float(np.mean(ok))
                    sd = float(np.std(ok))
                    rmse = float(math.sqrt(np.mean(errors_sq)))
                    if ok.size >= 2 and rmse > 0:
                        rmse_se = float(
                            np.std(errors_sq, ddof=1) / math.sqrt(ok.size) / (2.0 * rmse)
                        )
                    else:
                        rmse_se = 0.0
                cells.append(
                    MCCell(
                        design=plan.design,
                        estimator=name,
                        n=n,
                        k=k,
                        mean=mean,
                        sd=sd,
                        rmse=rmse,
                        rmse_se=rmse_se,
                        theoretical=target,
                        theoretical_window=(
                            theoretical_window[k] if theoretical_window is not None else None
                        ),
                        failures=failures,
                        replicates=plan.replicates,
                    )
                )
    return tuple(cells)


def _base_metadata(plan: ExperimentPlan) -> dict:
    # worker count is deliberately absent: it cannot affect any result
    return {
        "design": plan.design,
        "mode": plan.mode if plan.design != "dependent" else "dependent",
        "n_grid": list(plan.n_grid),
        "k_grid": list(plan.k_grid),
        "replicates": plan.replicates,
        "estimators": list(plan.resolved_estimators()),
        "master_seed": plan.master_seed,
        "package_version": _pkg_version,
    }


def run_iid_experiment(plan: ExperimentPlan) -> MCResult:
    """Run an i.i.d. severity design over the plan's grids."""
    if plan.design not in IID_DESIGNS:
        raise ValueError("run_iid_experiment requires an iid design")
    model = IID_DESIGNS[plan.design]
    fixed_scheme = WindowScheme.fixed(DEDUCTIBLE, LIMIT)
    theoretical = {
        k: theoretical_srm(lambda p: ground_up_quantile(model, p), ExponentialSpectrum(k))
        for k in plan.k_grid
    }
    branch = window_branch_point(model, fixed_scheme)
    theoretical_window = {
        k: theoretical_srm(
            lambda p: window_quantile(model, fixed_scheme, p),
            ExponentialSpectrum(k),
            breakpoints=(branch,),
        )
        for k in plan.k_grid
    }
    values = _run_cells(plan, None)
    cells = _aggregate(plan, values, theoretical, theoretical_window)
    meta = _base_metadata(plan)
    meta.update(
        {
            "model": f"{model.family.value}(x0={model.x0:g}, "
            f"{'theta=' + format(model.theta, 'g') if model.theta else 'alpha=' + format(model.alpha, 'g')})",
            "deductible": DEDUCTIBLE,
            "limit": LIMIT,
            "truncation_law": (
                RANDOM_TRUNCATION_LAW.describe() if plan.mode == "random-truncation" else "point"
            ),
            "rmse_target": "ground-up SRM (window SRM emitted as diagnostic)",
        }
    )
    return MCResult(cells=cells, metadata=meta)


def default_dependent_config(
    rho: float = 0.1,
    phi2: float = 1.087,
    target_truncation_rate: float = 0.30,
    target_censoring_pc: float = 0.10,
    calibration_tolerance: float = 0.005,
) -> DependentModelConfig:
    """The dependent design at its standard calibration, with mu solved for."""
    cfg = DependentModelConfig(
        rho=rho,
        phi2=phi2,
        target_truncation_rate=target_truncation_rate,
        target_censoring_pc=target_censoring_pc,
    )
    mu = calibrate_truncation_location(
        cfg, target_truncation_rate, tolerance=calibration_tolerance, seed=CALIBRATION_SEED
    )
    return cfg.with_mu(mu)


def run_dependent_experiment(plan: ExperimentPlan, cfg: DependentModelConfig | None = None) -> MCResult:
    """Run the dependent design; calibrates mu if no config is supplied."""
    if plan.design != "dependent":
        raise ValueError("run_dependent_experiment requires the dependent design")
    if cfg is None:
        cfg = default_dependent_config()
    oracle = np.sort(
        sample_dependent_marginal(
            cfg, plan.oracle_draws, derive_seed(plan.master_seed, "dependent-oracle")
        )
    )
    theoretical = {k: srm_from_sorted(oracle, ExponentialSpectrum(k)) for k in plan.k_grid}
    values = _run_cells(plan, cfg)
    cells = _aggregate(plan, values, theoretical, None)
    meta = _base_metadata(plan)
    meta.update(
        {
            "rho": cfg.rho,
            "phi1": cfg.phi1,
            "phi2": cfg.phi2,
            "phi3": cfg.phi3,
            "mu": cfg.mu,
            "target_truncation_rate": cfg.target_truncation_rate,
            "target_censoring_pc": cfg.target_censoring_pc,
            "oracle_draws": plan.oracle_draws,
            "rmse_target": "MC oracle of the loss marginal",
        }
    )
    return MCResult(cells=cells, metadata=meta)


def run_experiment(plan: ExperimentPlan, cfg: DependentModelConfig | None = None) -> MCResult:
    """Dispatch on the plan's design."""
    if plan.design == "dependent":
        return run_dependent_experiment(plan, cfg)
    return run_iid_experiment(plan)


# ---------------------------------------------------------------------------
# coverage study


@dataclass(frozen=True)
class CoverageCell:
    design: str
    n: int
    k: float
    coverage: float
    binomial_se: float
    hits: int
    intervals: int
    bootstrap_replicates: int
    refused: int
    theoretical: float


@dataclass(frozen=True)
class CoverageResult:
    cells: tuple[CoverageCell, ...]
    metadata: dict


def _coverage_range(args) -> list[tuple[int, int]]:
    """Worker: (hit, refused) flags for a range of interval replicates."""
    (design, mode, cfg, n, k, level, boot_b, master_seed, target, r_start, r_stop) = args
    estimator = ProdEstimator()
    spectrum = ExponentialSpectrum(k)
    out = []
    for r in range(r_start, r_stop):
        seed = derive_seed(master_seed, design, "coverage-sample", n, _k_key(k), r)
        sample = _generate_sample(design, mode, cfg, n, seed)
        plan = BootstrapPlan(
            replicates=boot_b,
            seed=derive_seed(master_seed, design, "coverage-boot", n, _k_key(k), r),
            ci_level=level,
        )
        try:
            report = bootstrap_ci(sample, estimator, spectrum, plan)
        except SpecriskError:
            out.append((0, 1))
            continue
        if report.ci_low is None:
            out.append((0, 1))
        else:
            out.append((int(report.ci_low <= target <= report.ci_high), 0))
    return out


def _k_key(k: float) -> int:
    return int(round(k * 1_000_000))


def run_coverage_experiment(
    plan: ExperimentPlan,
    bootstrap_replicates: int = 200,
    intervals: int = 500,
    level: float = 0.90,
    cfg: DependentModelConfig | None = None,
) -> CoverageResult:
    """Fraction of percentile bootstrap intervals covering the theoretical SRM.

    Every (n, k) cell builds ``intervals`` independent samples, a percentile
    interval from ``bootstrap_replicates`` resamples for each, and counts
    hits on the design's theoretical value.  Refused intervals (degenerate
    resampling) count as misses and are reported separately.
    """
    if plan.design == "dependent" and cfg is None:
        cfg = default_dependent_config()
    if plan.design in IID_DESIGNS:
        model = IID_DESIGNS[plan.design]
        theoretical = {
            k: theoretical_srm(lambda p: ground_up_quantile(model, p), ExponentialSpectrum(k))
            for k in plan.k_grid
        }
    else:
        oracle = np.sort(
            sample_dependent_marginal(
                cfg, plan.oracle_draws, derive_seed(plan.master_seed, "dependent-oracle")
            )
        )
        theoretical = {k: srm_from_sorted(oracle, ExponentialSpectrum(k)) for k in plan.k_grid}

    cells = []
    for n in plan.n_grid:
        for k in plan.k_grid:
            payloads = [
                (
                    plan.design,
                    plan.mode,
                    cfg,
                    n,
                    k,
                    level,
                    bootstrap_replicates,
                    plan.master_seed,
                    theoretical[k],
                    a,
                    b,
                )
                for a, b in _chunk_ranges(intervals, plan.workers)
            ]
            if plan.workers == 1:
                parts = [_coverage_range(p) for p in payloads]
            else:
                with ProcessPoolExecutor(max_workers=plan.workers) as pool:
                    parts = list(pool.map(_coverage_range, payloads))
            flags = [f for part in parts for f in part]
            hits = sum(h for h, _ in flags)
            refused = sum(m for _, m in flags)
            coverage = hits / intervals
            cells.append(
                CoverageCell(
                    design=plan.design,
                    n=n,
                    k=k,
                    coverage=coverage,
                    binomial_se=math.sqrt(max(coverage * (1.0 - coverage), 1e-12) / intervals),
                    hits=hits,
                    intervals=intervals,
                    bootstrap_replicates=bootstrap_replicates,
                    refused=refused,
                    theoretical=theoretical[k],
                )
            )
    meta = _base_metadata(plan)
    meta.update({"intervals": intervals, "bootstrap_replicates": bootstrap_replicates, "ci_level": level})
    if plan.design == "dependent":
        meta["mu"] = cfg.mu
    return CoverageResult(cells=tuple(cells), metadata=meta)


# ---------------------------------------------------------------------------
# figure data


@dataclass(frozen=True)
class RatioRow:
    design: str
    estimator: str
    n: int
    k: float
    log_rmse_ratio: float


@dataclass(frozen=True)
class FigureData:
    rows: tuple[RatioRow, ...]
    skipped: tuple[str, ...]


def emit_rmse_ratio_log(result: MCResult, baseline: str = "prod") -> FigureData:
    """log(RMSE_estimator / RMSE_baseline) per cell; baseline rows are 0."""
    estimators = {c.estimator for c in result.cells}
    if baseline not in estimators:
        raise ValueError(f"baseline {baseline!r} not present in the results")
    base = {(c.n, c.k): c.rmse for c in result.cells if c.estimator == baseline}
    rows = []
    skipped = []
    for c in result.cells:
        b = base[(c.n, c.k)]
        if not (b > 0) or math.isnan(c.rmse):
            skipped.append(f"{c.estimator}/n={c.n}/k={c.k:g}: undefined ratio")
            continue
        rows.append(
            RatioRow(
                design=c.design,
                estimator=c.estimator,
                n=c.n,
                k=c.k,
                log_rmse_ratio=0.0 if c.estimator == baseline else math.log(c.rmse / b),
            )
        )
    return FigureData(rows=tuple(rows), skipped=tuple(skipped))
