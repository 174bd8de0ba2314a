import math
from dataclasses import dataclass, field

import numpy as np

from core.exceptions import InvalidArgumentError

CEP_QUANTILES = (50, 75, 90, 95, 99)


@dataclass
class MetricsReport:
    mae: float
    cep: dict = field(default_factory=dict)  # percentil -> metros
    n_samples: int = 0

    def to_dict(self) -> dict:
        data = {'mae': self.mae, 'n_samples': self.n_samples}
        for q in sorted(self.cep):
            data[f'cep{q}'] = self.cep[q]
        return data


def euclidean_errors(estimates, truths) -> np.ndarray:
    est = np.asarray(estimates, dtype=np.float64)
    ref = np.asarray(truths, dtype=np.float64)
    if est.ndim != 2 or ref.ndim != 2 or est.shape[1] != 3 or ref.shape[1] != 3:
        raise InvalidArgumentError("Se esperan listas de vectores 3D.")
    if len(est) != len(ref):
        raise InvalidArgumentError(f"Largo distinto: {len(est)} estimaciones vs {len(ref)} referencias.")
    if len(est) == 0:
        raise InvalidArgumentError("No hay muestras para evaluar.")
    return np.linalg.norm(est - ref, axis=1)


def mae(estimates, truths) -> float:
    """Error absoluto medio de la distancia euclidiana al ground truth."""
    return float(np.mean(euclidean_errors(estimates, truths)))


def _order_statistic(errores_ordenados: np.ndarray, q: float) -> float:
    if not 0 < q <= 100:
        raise InvalidArgumentError(f"El percentil debe estar en (0, 100], se recibió {q}.")
    n = len(errores_ordenados)
    # redondeo previo para que 95 * 1000 / 100 no termine en 950.0000001
    k = max(1, math.ceil(round(q * n / 100.0, 9)))
    return float(errores_ordenados[k - 1])


def cep(estimates, truths, q: float) -> float:
    """Radio mínimo que contiene al menos q% de los errores (estadístico de orden, sin interpolar)."""
    errores = np.sort(euclidean_errors(estimates, truths))
    return _order_statistic(errores, q)


def metrics_report(estimates, truths, quantiles=CEP_QUANTILES) -> MetricsReport:
    errores = euclidean_errors(estimates, truths)
    ordenados = np.sort(errores)
    return MetricsReport(
        mae=float(np.mean(errores)),
        cep={int(q): _order_statistic(ordenados, q) for q in quantiles},
        n_samples=int(len(errores)),
    )


def improvement_percent(baseline_mae: float, corrected_mae: float) -> float:
    if baseline_mae <= 0:
        raise InvalidArgumentError("El MAE base debe ser positivo.")
    return 100.0 * (baseline_mae - corrected_mae) / baseline_mae
