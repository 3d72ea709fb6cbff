"""
Sweeps: many experiments, each in its own world.

Rows come back in input order whether the sweep runs sequentially or on a
process pool, so the CSV of a sweep is reproducible.
"""

import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from src.config import get_settings
from src.harness.report import ResultRow
from src.harness.runner import run_experiment
from src.harness.schemas import ExperimentConfig, PlanPreset, PlanPresetName, dump_experiment, load_experiment, parse_experiment
from src.recovery.manager import RecoveryStrategy
from src.simcore.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_PROCESS_COUNTS = (4, 8, 16, 32)


def load_configs(directory: str | Path) -> list[ExperimentConfig]:
    """Every *.json experiment document in `directory`, in file-name order."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise ConfigError(f"no experiment documents in {directory}")
    return [load_experiment(p) for p in paths]


def expand_sweep(
    base: ExperimentConfig,
    processes: Iterable[int] = DEFAULT_PROCESS_COUNTS,
    failure_counts: Iterable[int] = (0, 1, 2, 3, 4),
    strategies: Iterable[RecoveryStrategy] = (RecoveryStrategy.SHRINK, RecoveryStrategy.SUBSTITUTE),
) -> list[ExperimentConfig]:
    """
    Cross product of process counts, failure counts and strategies on top of
    `base`. Each point uses the worst-case placement for its strategy and
    gets as many spares as failures under substitute.
    """
    first_iteration = base.preset.first_iteration if base.preset else 1
    spacing = base.preset.spacing if base.preset else 1
    out = []
    for p in processes:
        for k in failure_counts:
            if k >= p:
                continue
            for strategy in strategies:
                strategy = RecoveryStrategy(strategy)
                name = (
                    PlanPresetName.WORST_CASE_SUBSTITUTE
                    if strategy == RecoveryStrategy.SUBSTITUTE
                    else PlanPresetName.WORST_CASE_SHRINK
                )
                spares = max(base.world.spares, k) if strategy == RecoveryStrategy.SUBSTITUTE else 0
                doc = base.model_dump(mode="json")
                doc.update(
                    name=f"{base.name or 'sweep'}-p{p}-k{k}-{strategy.value}",
                    strategy=strategy.value,
                    faults=None,
                    fault_plan_path=None,
                    preset=PlanPreset(
                        name=name, k=k, first_iteration=first_iteration, spacing=spacing
                    ).model_dump(mode="json"),
                )
                doc["world"].update(processes=p, spares=spares)
                out.append(parse_experiment(doc))
    return out


def _run_document(document: str) -> ResultRow:
    return run_experiment(parse_experiment(document))


def run_sweep(configs: Sequence[ExperimentConfig], max_workers: Optional[int] = None) -> list[ResultRow]:
    """Run every experiment; rows are returned in the order of `configs`."""
    workers = max_workers or get_settings().SWEEP_MAX_WORKERS
    documents = [dump_experiment(c) for c in configs]
    logger.info("Sweep of %s experiments on %s workers", len(documents), workers)
    if workers <= 1 or len(documents) <= 1:
        return [_run_document(d) for d in documents]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(_run_document, documents))
