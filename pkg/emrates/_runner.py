"""
Run an experiment: split it into blocks of paths, farm the blocks out to a
worker pool, and reduce the block results in block order.

Each block regenerates its own lattice from (seed, first path index), so the
results don't depend on which worker ran which block, or on how many there
were.
"""
import multiprocessing
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
import structlog
from cachetools import LRUCache, cached

from emrates._config import (
    DensitySettings,
    ExperimentConfig,
    ExperimentKind,
    QuadratureSettings,
)
from emrates._paths import BudgetExceeded, SeedLineage, generate_lattice
from emrates._report import ResultRecord, write_outputs
from emrates._scheme import MINIMUM_REFERENCE_GAP
from emrates._seminorm import (
    DivergentSeminorm,
    estimate_sobolev_seminorm,
    interpolation_embedding,
)
from emrates.metrics import (
    BROWNIAN,
    ErrorTable,
    IndicatorBump,
    Statistic,
    density_block_sums,
    density_rows,
    error_block_sums,
    fit_rate,
    quadrature_block_sums,
)

_LOG = structlog.get_logger()


def _version() -> str:
    from emrates import __version__

    return __version__


@dataclass(frozen=True)
class _Prepared:
    """Everything a block needs, built once per process."""

    spec: Any
    function: Any = None
    process: Any = BROWNIAN
    weight: Any = None
    bump: Optional[IndicatorBump] = None


@cached(cache=LRUCache(maxsize=8), key=lambda config: config.fingerprint)
def _prepare(config: ExperimentConfig) -> _Prepared:
    spec = config.build_spec()
    if config.kind is ExperimentKind.QUADRATURE_SWEEP:
        settings = config.quadrature or QuadratureSettings()
        return _Prepared(
            spec=spec,
            function=config.build_function(),
            process=spec if settings.process == "em" else BROWNIAN,
            weight=settings.weight.drift() if settings.weight else None,
        )
    if config.kind is ExperimentKind.DENSITY_DIAGNOSTIC:
        settings = config.density or DensitySettings()
        return _Prepared(
            spec=spec,
            bump=IndicatorBump(settings.center, settings.half_width, spec.dimension),
        )
    return _Prepared(spec=spec)


def _block_lattice(config: ExperimentConfig, block: int, level: int, dimension: int):
    size = config.effective_block_size
    return generate_lattice(
        dimension,
        level,
        SeedLineage(config.seed, block * size),
        paths=size,
        memory_budget=config.memory_budget,
    )


def run_block(item: Tuple[ExperimentConfig, int]) -> Tuple[int, np.ndarray]:
    """Sums over one block of paths, for whichever kind of experiment."""
    config, block = item
    prepared = _prepare(config)
    spec = prepared.spec
    log = _LOG.bind(experiment=config.name, block=block)

    if config.kind is ExperimentKind.DENSITY_DIAGNOSTIC:
        settings = config.density or DensitySettings()
        lattice = _block_lattice(config, block, settings.level, spec.dimension)
        sums = density_block_sums(
            spec,
            prepared.bump,
            settings.times,
            lattice,
            settings.n or 2**settings.level,
        )
    elif config.kind is ExperimentKind.QUADRATURE_SWEEP:
        settings = config.quadrature or QuadratureSettings()
        lattice = _block_lattice(
            config, block, config.reference_level, spec.dimension
        )
        sums = quadrature_block_sums(
            prepared.function,
            lattice,
            config.levels,
            config.p,
            weight=prepared.weight,
            process=prepared.process,
            x0=spec.x0,
            statistic=Statistic(settings.statistic),
            interval=settings.interval,
        )
    else:
        lattice = _block_lattice(
            config, block, config.reference_level, spec.dimension
        )
        sums = error_block_sums(
            spec, lattice, config.levels, config.p, MINIMUM_REFERENCE_GAP
        )

    log.debug("run.block.done")
    return block, sums


def _check_budget(config: ExperimentConfig, started: float):
    elapsed = time.monotonic() - started
    if elapsed > config.budget_minutes * 60:
        raise BudgetExceeded(
            f"{config.name} ran past its budget of {config.budget_minutes} minutes",
            requested=elapsed,
            budget=config.budget_minutes * 60,
        )


def _block_results(
    config: ExperimentConfig, block_count: int, workers: int, started: float
) -> Iterable[Tuple[int, np.ndarray]]:
    items = ((config, block) for block in range(block_count))
    # If one worker, avoid any subprocesses/forking.
    # This makes test tracing far easier.
    if workers == 1:
        for item in items:
            yield run_block(item)
            _check_budget(config, started)
    else:
        with multiprocessing.Pool(workers) as pool:
            for result in pool.imap_unordered(run_block, items, chunksize=1):
                yield result
                _check_budget(config, started)
            pool.close()
            pool.join()


def _reduce_blocks(
    config: ExperimentConfig, workers: int, started: float
) -> np.ndarray:
    block_count = config.paths // config.effective_block_size
    by_block: Dict[int, np.ndarray] = {}
    for block, sums in _block_results(config, block_count, workers, started):
        by_block[block] = sums
    # Index-ordered, whatever order the blocks finished in.
    return np.stack([by_block[block] for block in range(block_count)])


def _sobolev_rows(config: ExperimentConfig) -> Tuple[List[Dict], float]:
    f = config.build_function()
    settings = config.sobolev
    options = dict(
        truncation_radius=settings.truncation_radius,
        mesh=settings.mesh,
        component=settings.component,
    )
    estimate = estimate_sobolev_seminorm(f, settings.alpha, settings.m, **options)
    rows = [
        dict(
            theta=None,
            alpha=settings.alpha,
            m=settings.m,
            value=estimate.value,
            quadrature_error_bound=estimate.quadrature_error_bound,
            divergent=estimate.divergent,
            bound=f.seminorm_bound,
            holds=None,
        )
    ]
    for theta in settings.thetas:
        try:
            check = interpolation_embedding(
                f,
                settings.alpha,
                settings.m,
                theta,
                tolerance=settings.tolerance,
                outer=estimate,
                **options,
            )
        except DivergentSeminorm as e:
            _LOG.warning("run.sobolev.divergent", theta=theta, alpha=e.alpha, m=e.m)
            rows.append(
                dict(
                    theta=theta,
                    alpha=settings.alpha * theta,
                    m=settings.m / theta,
                    divergent=True,
                    holds=None,
                )
            )
            continue
        rows.append(
            dict(
                theta=theta,
                alpha=check.inner.alpha,
                m=check.inner.m,
                value=check.inner.value,
                quadrature_error_bound=check.inner.quadrature_error_bound,
                divergent=check.inner.divergent,
                bound=check.bound,
                holds=check.holds,
            )
        )
    return rows, estimate.value


def run(
    config: ExperimentConfig,
    workers: int = 1,
    output_dir: Optional[Path] = None,
) -> ResultRecord:
    """
    Validate and execute an experiment.

    Writes the result files when an output directory is given (here or in
    the config).
    """
    config.validate()
    theorem = config.theorem_ref
    log = _LOG.bind(experiment=config.name, fingerprint=config.fingerprint)
    log.info("run.start", kind=config.kind.value, workers=workers)
    started = time.monotonic()

    record = ResultRecord(
        name=config.name,
        kind=config.kind,
        fingerprint=config.fingerprint,
        version=_version(),
        config=config.to_doc(),
        theorem=theorem.as_doc(),
        acceptance=config.acceptance,
        workers=workers,
        path_count=config.paths,
    )

    if config.kind.is_sweep:
        sums = _reduce_blocks(config, workers, started)
        table = ErrorTable.from_block_sums(
            config.levels,
            config.p,
            sums,
            config.effective_block_size,
            config.batch_paths // config.effective_block_size,
        )
        record.levels = table.levels
        record.errors = tuple(float(e) for e in table.errors)
        record.batch_stderr = tuple(float(e) for e in table.batch_stderr)
        record.rate = fit_rate(table)
        record.headline = record.rate.order
    elif config.kind is ExperimentKind.DENSITY_DIAGNOSTIC:
        settings = config.density or DensitySettings()
        sums = _reduce_blocks(config, workers, started).sum(axis=0)
        rows = density_rows(
            sums, config.paths, _prepare(config).bump, settings.times, config.p
        )
        record.rows = [asdict(row) for row in rows]
        record.headline = max(row.ratio for row in rows)
    else:
        record.rows, record.headline = _sobolev_rows(config)

    if config.acceptance is not None and record.headline is not None:
        record.passed = config.acceptance.verdict(record.headline)
    record.wall_clock = time.monotonic() - started
    log.info(
        "run.done",
        headline=record.headline,
        passed=record.passed,
        seconds=round(record.wall_clock, 3),
    )

    output_dir = output_dir or config.output_dir
    if output_dir is not None:
        write_outputs(record, Path(output_dir))
    return record
