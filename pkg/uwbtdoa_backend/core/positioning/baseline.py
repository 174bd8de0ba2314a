"""Posición TDoA sin corrección para muestras completas (la referencia que el modelo corrige)."""
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from tqdm import tqdm

from core.channel.simulador import Environment, Sample
from core.exceptions import InsufficientAnchorsError, InsufficientDataError
from core.positioning.tdoa import PairPolicy, PositionEstimate, solve_from_timestamps

logger = logging.getLogger(__name__)


@dataclass
class BaselineResult:
    estimates: dict = field(default_factory=dict)  # sample_id -> PositionEstimate
    unsolvable: list = field(default_factory=list)  # sample_id sin geometría suficiente

    @property
    def n_solved(self) -> int:
        return len(self.estimates)

    @property
    def n_on_boundary(self) -> int:
        return sum(1 for est in self.estimates.values() if est.on_boundary)


def search_bounds(env: Environment) -> tuple:
    """El tag está dentro del entorno: el solver busca en [0, extent]."""
    return np.zeros(3), env.extent


def baseline_estimate(sample: Sample, env: Environment, pair_policy: str = PairPolicy.REFERENCE_ANCHOR,
                      fixed_z: Optional[float] = None) -> PositionEstimate:
    timestamps = sample.timestamps()
    if len(timestamps) < 3:
        raise InsufficientAnchorsError(
            f"La muestra {sample.sample_id} tiene {len(timestamps)} anclas; se requieren al menos 3.")
    return solve_from_timestamps(timestamps, env.anchors, pair_policy=pair_policy, fixed_z=fixed_z,
                                 bounds=search_bounds(env))


def run_baseline(samples, env: Environment, pair_policy: str = PairPolicy.REFERENCE_ANCHOR,
                 fixed_z: Optional[float] = None, progress: bool = False) -> BaselineResult:
    resultado = BaselineResult()
    for sample in tqdm(samples, desc='baseline', disable=not progress):
        try:
            resultado.estimates[sample.sample_id] = baseline_estimate(sample, env, pair_policy, fixed_z)
        except (InsufficientAnchorsError, InsufficientDataError):
            resultado.unsolvable.append(sample.sample_id)
    if resultado.unsolvable:
        logger.info("%d muestras sin solución TDoA (pocas anclas o pares) quedan fuera de las métricas",
                    len(resultado.unsolvable))
    if resultado.n_on_boundary:
        logger.info("%d estimaciones quedaron sobre el borde del entorno", resultado.n_on_boundary)
    return resultado
