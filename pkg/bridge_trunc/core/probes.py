"""
Moment probes of the weight matrix and the environment, and conjecture probes
"""
import logging
import time
from enum import Enum
from functools import partial
from typing import List, Optional, Sequence

import numpy as np

from ..config import settings
from ..models import ExperimentConfig, Mode, ProbeReport, ProbeRow, Statistic
from .ensembles import HAAR_KINDS, EnsembleKind, EnsembleSpec, sample_column, sample_weights
from .environment import counting, product_count_variance, sample_environment
from .errors import ConfigError
from .exact_moments import beta_moment
from .limits import KernelKind, kernel_eval
from .processes import Grid, v_process
from .random_streams import ENVIRONMENT, GAUSSIAN, MATRIX, RngState
from .stats import (
    CONJECTURE_BANNER,
    empirical_moments,
    run_experiment,
    run_replicates,
    variance_decomposition,
)

logger = logging.getLogger(__name__)

SIXTH_MOMENT_MIN_REPLICATES = 10_000
TIGHTNESS_POINTS = [(0.05, 0.05), (0.1, 0.1), (0.1, 0.3), (0.2, 0.2), (0.3, 0.1), (0.3, 0.3), (0.5, 0.5)]
TIGHTNESS_GRID_M = 20


class ProbeKind(str, Enum):
    FOURTH_MOMENT = "fourth-moment"
    SIXTH_MOMENT = "sixth-moment"
    LINDEBERG_SUM = "lindeberg-sum"
    QUADRATIC_FORM = "quadratic-form"
    CONDITIONAL_VARIANCE = "conditional-variance"
    TIGHTNESS_SIXTH = "tightness-sixth"
    VARIANCE_DECOMPOSITION = "variance-decomposition"
    CONJECTURE_1 = "conjecture-1"
    CONJECTURE_2 = "conjecture-2"


MATRIX_PROBES = frozenset({
    ProbeKind.FOURTH_MOMENT,
    ProbeKind.SIXTH_MOMENT,
    ProbeKind.LINDEBERG_SUM,
    ProbeKind.QUADRATIC_FORM,
    ProbeKind.TIGHTNESS_SIXTH,
    ProbeKind.VARIANCE_DECOMPOSITION,
})


def _column_power_sum(spec: EnsembleSpec, root: RngState, power: int, scale: float,
                      fast_path: bool, index: int) -> np.ndarray:
    column = sample_column(spec, root.replicate(index, MATRIX), fast_path)
    return np.array([scale * np.sum(column ** power)])


def _quadratic_form(spec: EnsembleSpec, root: RngState, index: int) -> np.ndarray:
    """X^T V V^T X with V = W - 1/n and X standard Gaussian"""
    weights = sample_weights(spec, root.replicate(index, MATRIX))
    gaussian = root.replicate(index, GAUSSIAN).generator().standard_normal(spec.n)
    projected = (weights.w - 1.0 / spec.n).T @ gaussian
    return np.array([projected @ projected])


def _count_product(n: int, root: RngState, s: float, t: float, index: int) -> np.ndarray:
    env = sample_environment(n, root.replicate(index, ENVIRONMENT))
    return np.array([counting(env.rows, s) * counting(env.cols, t) / n])


def _v_sixth_powers(spec: EnsembleSpec, root: RngState, grid: Grid,
                    rows: np.ndarray, cols: np.ndarray, index: int) -> np.ndarray:
    weights = sample_weights(spec, root.replicate(index, MATRIX))
    env = sample_environment(spec.n, root.replicate(index, ENVIRONMENT))
    return v_process(weights, env, grid).values[rows, cols] ** 6


def _z(estimate: float, target: float, se: float) -> Optional[float]:
    return (estimate - target) / se if se > 0 else None


def _mean_row(label: str, n: int, samples: np.ndarray, target: float, limit: float,
              s: Optional[float] = None, t: Optional[float] = None) -> ProbeRow:
    values = samples[:, 0]
    estimate = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(values.size))
    return ProbeRow(label=label, n=n, s=s, t=t, estimate=estimate, se=se,
                    target=target, limit=limit, z=_z(estimate, target, se))


def _within(rows: Sequence[ProbeRow], threshold: float) -> bool:
    return all(row.z is not None and abs(row.z) <= threshold for row in rows)


def moment_probe(kind: ProbeKind, n: int, seed: int, ensemble: EnsembleKind = EnsembleKind.UNITARY,
                 replicates: Optional[int] = None, s: float = 0.5, t: float = 0.5,
                 threads: Optional[int] = None, z_threshold: Optional[float] = None,
                 fast_path: bool = True) -> ProbeReport:
    """Monte-Carlo estimate +- SE of one moment functional against its exact finite-n value"""
    start = time.perf_counter()
    kind, ensemble = ProbeKind(kind), EnsembleKind(ensemble)
    replicates = settings.default_replicates if replicates is None else replicates
    z_threshold = settings.z_threshold if z_threshold is None else z_threshold
    if replicates < 2:
        raise ConfigError(f"probes need at least 2 replicates, got {replicates}")
    if kind in MATRIX_PROBES and ensemble not in HAAR_KINDS:
        raise ConfigError(f"{kind.value} needs a Haar ensemble, got {ensemble.value}")
    if kind in (ProbeKind.CONJECTURE_1, ProbeKind.CONJECTURE_2):
        raise ConfigError(f"{kind.value} is a conjecture probe; use conjecture_probe")

    if kind is ProbeKind.VARIANCE_DECOMPOSITION:
        config = ExperimentConfig(ensemble=ensemble, statistic=Statistic.RAND_TRUNC_ANNEALED, n=n,
                                  replicates=replicates, master_seed=seed, test_points=[(s, t)])
        return variance_decomposition(config, threads=threads)

    spec = EnsembleSpec(ensemble, n)
    root = RngState(seed)
    b = spec.beta_prime
    warnings: List[str] = []
    logger.info(f"Probe {kind.value} on {ensemble.value} n={n} N={replicates} seed={seed}")

    if kind is ProbeKind.FOURTH_MOMENT:
        task = partial(_column_power_sum, spec, root, 2, float(n), fast_path)
        rows = [_mean_row("n*sum w^2", n, run_replicates(task, replicates, threads),
                          n * n * beta_moment(b, n, 2), 1.0 + 1.0 / b)]
    elif kind is ProbeKind.SIXTH_MOMENT:
        if replicates < SIXTH_MOMENT_MIN_REPLICATES:
            message = (f"sixth moments with N={replicates} < {SIXTH_MOMENT_MIN_REPLICATES} "
                       "replicates have unreliable standard errors")
            logger.warning(message)
            warnings.append(message)
        task = partial(_column_power_sum, spec, root, 3, float(n) ** 2, fast_path)
        rows = [_mean_row("n^2*sum w^3", n, run_replicates(task, replicates, threads),
                          n ** 3 * beta_moment(b, n, 3), (1.0 + 1.0 / b) * (1.0 + 2.0 / b))]
    elif kind is ProbeKind.LINDEBERG_SUM:
        task = partial(_column_power_sum, spec, root, 3, float(n) ** 1.5, fast_path)
        rows = [_mean_row("sum (sqrt(n) w)^3", n, run_replicates(task, replicates, threads),
                          n ** 2.5 * beta_moment(b, n, 3), 0.0)]
    elif kind is ProbeKind.QUADRATIC_FORM:
        task = partial(_quadratic_form, spec, root)
        rows = [_mean_row("X^T V V^T X", n, run_replicates(task, replicates, threads),
                          n * n * (beta_moment(b, n, 2) - 1.0 / n ** 2), 1.0 / b)]
    elif kind is ProbeKind.CONDITIONAL_VARIANCE:
        samples = run_replicates(partial(_count_product, n, root, s, t), replicates, threads)
        moments = empirical_moments(samples)
        estimate, se = float(moments.covariance[0, 0]), float(moments.covariance_se[0, 0])
        target = product_count_variance(n, s, t)
        rows = [ProbeRow(label="Var(S_s S'_t / n)", n=n, s=s, t=t, estimate=estimate, se=se,
                         target=target, limit=n * kernel_eval(KernelKind.CAL_WINF, (s, t), (s, t)),
                         z=_z(estimate, target, se))]
    else:
        return _tightness_probe(spec, root, replicates, threads, start)

    runtime = time.perf_counter() - start
    verdict = _within(rows, z_threshold)
    logger.info(f"Probe {kind.value} finished in {runtime:.2f}s: verdict = {verdict}")
    return ProbeReport(probe=kind.value, ensemble=ensemble, replicates=replicates, seed=seed,
                       rows=rows, verdict=verdict, warnings=warnings, runtime_seconds=runtime)


def _tightness_probe(spec: EnsembleSpec, root: RngState, replicates: int,
                     threads: Optional[int], start: float) -> ProbeReport:
    """
    E V^6 / max(s, t)^3 across a sweep towards the origin; each ratio, less
    four standard errors, must stay below the Gaussian bound 15 / beta'^3
    """
    grid = Grid(TIGHTNESS_GRID_M)
    rows_idx = np.array([grid.index_of(s) for s, _ in TIGHTNESS_POINTS])
    cols_idx = np.array([grid.index_of(t) for _, t in TIGHTNESS_POINTS])
    task = partial(_v_sixth_powers, spec, root, grid, rows_idx, cols_idx)
    samples = run_replicates(task, replicates, threads)

    bound = 15.0 / spec.beta_prime ** 3
    rows = []
    verdict = True
    for index, (s, t) in enumerate(TIGHTNESS_POINTS):
        scale = max(s, t) ** 3
        ratio = float(samples[:, index].mean() / scale)
        se = float(samples[:, index].std(ddof=1) / np.sqrt(replicates) / scale)
        verdict = verdict and ratio - 4.0 * se <= bound
        rows.append(ProbeRow(label="E V^6 / max(s,t)^3", n=spec.n, s=s, t=t,
                             estimate=ratio, se=se, target=bound))

    runtime = time.perf_counter() - start
    logger.info(f"Probe tightness-sixth finished in {runtime:.2f}s: verdict = {verdict}")
    return ProbeReport(probe=ProbeKind.TIGHTNESS_SIXTH.value, ensemble=spec.kind,
                       replicates=replicates, seed=root.seed, rows=rows, verdict=verdict,
                       runtime_seconds=runtime)


def conjecture_probe(which: int, ns: Sequence[int], seed: int,
                     ensemble: EnsembleKind = EnsembleKind.UNITARY,
                     replicates: Optional[int] = None, grid_m: Optional[int] = None,
                     threads: Optional[int] = None) -> ProbeReport:
    """
    Fix one matrix per n, resample the environment, and report z-scores of the
    central variance against the limit kernel along the n sweep
    """
    start = time.perf_counter()
    ensemble = EnsembleKind(ensemble)
    if which not in (1, 2):
        raise ConfigError(f"conjecture probe must be 1 or 2, got {which}")
    if not ns:
        raise ConfigError("conjecture probe needs at least one n")
    statistic = Statistic.CONJECTURE_PROBE_1 if which == 1 else Statistic.CONJECTURE_PROBE_2
    replicates = settings.default_replicates if replicates is None else replicates
    grid_m = settings.default_grid_m if grid_m is None else grid_m

    rows = []
    verdicts = []
    for n in ns:
        config = ExperimentConfig(ensemble=ensemble, statistic=statistic, n=n, grid_m=grid_m,
                                  replicates=replicates, mode=Mode.QUENCHED_U, master_seed=seed)
        report = run_experiment(config, threads)
        centre = report.gaussianity.point
        diagonal = next(c for c in report.comparisons if c.p == centre and c.q == centre)
        against_limit = [_z(c.empirical, c.limit, c.se) for c in report.comparisons]
        rows.append(ProbeRow(
            label=f"n={n}", n=n, s=centre[0], t=None if which == 1 else centre[1],
            estimate=diagonal.empirical, se=diagonal.se, target=diagonal.target,
            limit=diagonal.limit, z=_z(diagonal.empirical, diagonal.limit, diagonal.se),
            max_abs_z=max((abs(z) for z in against_limit if z is not None), default=None),
            fourth_moment=report.gaussianity.fourth_moment,
        ))
        verdicts.append(report.verdict)

    notes = []
    verdict = None
    if all(v is not None for v in verdicts):
        verdict = all(verdicts)
        notes.append("fixed-matrix limit is known for this ensemble; verdict uses the exact target")
    else:
        notes.append(CONJECTURE_BANNER)
    runtime = time.perf_counter() - start
    logger.info(f"Conjecture {which} probe on {ensemble.value} finished in {runtime:.2f}s")
    return ProbeReport(probe=f"conjecture-{which}", ensemble=ensemble, replicates=replicates,
                       seed=seed, rows=rows, verdict=verdict, notes=notes, runtime_seconds=runtime)


def run_probe(kind, ns: Sequence[int], seed: int, ensemble: EnsembleKind = EnsembleKind.UNITARY,
              replicates: Optional[int] = None, s: float = 0.5, t: float = 0.5,
              grid_m: Optional[int] = None, threads: Optional[int] = None) -> ProbeReport:
    """Dispatch a probe by name over an n sweep, merging moment-probe rows into one report"""
    try:
        kind = ProbeKind(kind)
    except ValueError:
        names = ", ".join(k.value for k in ProbeKind)
        raise ConfigError(f"unknown probe '{kind}'; choose from {names}") from None
    if not ns:
        raise ConfigError("probe needs at least one n")
    if kind in (ProbeKind.CONJECTURE_1, ProbeKind.CONJECTURE_2):
        which = 1 if kind is ProbeKind.CONJECTURE_1 else 2
        return conjecture_probe(which, ns, seed, ensemble, replicates, grid_m, threads)

    reports = [moment_probe(kind, n, seed, ensemble, replicates, s, t, threads) for n in ns]
    if len(reports) == 1:
        return reports[0]
    verdicts = [r.verdict for r in reports]
    return reports[0].model_copy(update={
        "rows": [row for r in reports for row in r.rows],
        "verdict": None if None in verdicts else all(verdicts),
        "warnings": list(dict.fromkeys(w for r in reports for w in r.warnings)),
        "notes": list(dict.fromkeys(note for r in reports for note in r.notes)),
        "runtime_seconds": sum(r.runtime_seconds for r in reports),
    })
