"""
Named verification presets: one experiment per limit theorem, sized so the
exact finite-n target and the Monte-Carlo error are both well resolved.
Presets are keyed by the result they verify; descriptive aliases resolve to
the same runs.
"""
import logging
from typing import Any, Dict, Optional, Union

from pydantic import ValidationError

from ..models import ExperimentConfig, ExperimentReport, Mode, Statistic, SubordinationReport
from .ensembles import EnsembleKind
from .errors import ConfigError
from .stats import run_experiment, subordination_test

logger = logging.getLogger(__name__)

SUBORDINATION = "prop-4.1-subordination"

PRESETS: Dict[str, Dict[str, Any]] = {
    "lemma-3.1": dict(statistic=Statistic.ONE_PARAM_DETERMINISTIC, ensemble=EnsembleKind.UNITARY,
                      n=500, replicates=5000),
    "thm-3.2-quenched": dict(statistic=Statistic.ONE_PARAM_QUENCHED, ensemble=EnsembleKind.UNITARY,
                             n=500, replicates=5000, mode=Mode.QUENCHED_OMEGA),
    "thm-3.2-annealed": dict(statistic=Statistic.ONE_PARAM_ANNEALED, ensemble=EnsembleKind.UNITARY,
                             n=500, replicates=5000),
    "thm-3.3-dft": dict(statistic=Statistic.DFT_ANNEALED, ensemble=EnsembleKind.DFT,
                        n=400, replicates=4000),
    "thm-3.4-det": dict(statistic=Statistic.DET_TRUNC_CENTERED, ensemble=EnsembleKind.UNITARY,
                        n=300, replicates=3000),
    "thm-3.5-quenched": dict(statistic=Statistic.V_QUENCHED, ensemble=EnsembleKind.UNITARY,
                             n=300, replicates=3000, mode=Mode.QUENCHED_OMEGA),
    "thm-3.5-annealed": dict(statistic=Statistic.RAND_TRUNC_ANNEALED, ensemble=EnsembleKind.UNITARY,
                             n=300, replicates=3000),
    "thm-3.6-permutation": dict(statistic=Statistic.DET_TRUNC_CENTERED, ensemble=EnsembleKind.PERMUTATION,
                                n=1000, replicates=5000),
    "thm-3.7-quenched": dict(statistic=Statistic.PERMUTATION_QUENCHED, ensemble=EnsembleKind.PERMUTATION,
                             n=1000, replicates=5000, mode=Mode.QUENCHED_OMEGA),
    "thm-3.7-annealed": dict(statistic=Statistic.PERMUTATION_ANNEALED, ensemble=EnsembleKind.PERMUTATION,
                             n=1000, replicates=5000),
    "sec-5.3-copula": dict(statistic=Statistic.EMPIRICAL_COPULA, ensemble=EnsembleKind.PERMUTATION,
                           n=500, replicates=5000, mode=Mode.QUENCHED_U),
    SUBORDINATION: dict(statistic=Statistic.SUBORDINATED_W, ensemble=EnsembleKind.UNITARY,
                        n=100, replicates=5000, mode=Mode.QUENCHED_OMEGA),
}

PRESET_ALIASES: Dict[str, str] = {
    "bridge-deterministic": "lemma-3.1",
    "bridge-quenched": "thm-3.2-quenched",
    "bridge-annealed": "thm-3.2-annealed",
    "dft-annealed": "thm-3.3-dft",
    "haar-deterministic": "thm-3.4-det",
    "haar-quenched": "thm-3.5-quenched",
    "haar-annealed": "thm-3.5-annealed",
    "permutation-deterministic": "thm-3.6-permutation",
    "permutation-quenched": "thm-3.7-quenched",
    "permutation-annealed": "thm-3.7-annealed",
    "empirical-copula": "sec-5.3-copula",
    "subordination": SUBORDINATION,
}


class UnknownPresetError(ConfigError):
    pass


def resolve_preset(name: str) -> str:
    """Canonical preset name for a name or alias"""
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESETS:
        raise UnknownPresetError(f"unknown preset '{name}'; choose from {', '.join(PRESETS)}")
    return name


def preset_config(name: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """The preset's ExperimentConfig with `overrides` applied; a seed must be supplied"""
    name = resolve_preset(name)
    fields = {**PRESETS[name], **(overrides or {})}
    if fields.get("master_seed") is None:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config file)")
    try:
        return ExperimentConfig(**fields)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration for preset '{name}': {e}") from e


def run_preset(name: str, overrides: Optional[Dict[str, Any]] = None,
               threads: Optional[int] = None) -> Union[ExperimentReport, SubordinationReport]:
    config = preset_config(name, overrides)
    name = resolve_preset(name)
    logger.info(f"Running preset {name}")
    if name == SUBORDINATION:
        return subordination_test(config, threads)
    return run_experiment(config, threads)
