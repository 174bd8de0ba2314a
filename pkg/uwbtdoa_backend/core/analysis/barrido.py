"""
Barrido de hiperparámetros: enumeración de la grilla, entrenamiento/evaluación por
configuración (reanudable vía ORM) y tablas resumen.
"""
import logging
import time
from dataclasses import replace
from itertools import product
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd
from django.db import transaction
from tqdm import tqdm

from core.analysis.complejidad import SweepResult, op_count, pareto_front
from core.channel.cir import Ordering
from core.channel.simulador import Environment, Sample
from core.exceptions import INCOMPATIBLE_ENCODING_MSG, IncompatibleEncodingError, UwbTdoaError
from core.model.encodings import SPATIAL_KINDS, EncodingKind
from core.model.entrenamiento import TrainConfig, evaluate, train
from core.model.patching import PatchConfig, PatchStrategy
from core.model.transformer import ModelConfig, encode_dataset
from core.models import barrido, resultadoBarrido
from core.positioning.metricas import CEP_QUANTILES

logger = logging.getLogger(__name__)

DEFAULT_GRID = [
    {
        'patching': PatchStrategy.MULTI_CIR,
        'orderings': [Ordering.FIXED, Ordering.TIME_BASED],
        'encodings': [EncodingKind.LEARNED],
        'l_patches': [1, 3, 5, 6, 10, 15, 30, 50, 75],
        'd_models': [8, 16, 32, 64, 128, 256],
    },
    {
        'patching': PatchStrategy.PER_CIR,
        'orderings': [Ordering.FIXED, Ordering.TIME_BASED],
        'encodings': [EncodingKind.LEARNED, EncodingKind.SPATIAL, EncodingKind.SPATIAL_TIME],
        'l_patches': [6, 15, 30, 50, 75, 150],
        'd_models': [32, 64, 128, 256],
    },
]

RESULT_COLUMNS = ['clave', 'patching', 'ordering', 'encoding', 'l_patch', 'd_model', 'total_ops', 'mae',
                  *[f'cep{q}' for q in CEP_QUANTILES], 'n_eval', 'estado', 'error', 'duracion_s']


def config_key(entry: dict) -> str:
    return f"{entry['patching']}-{entry['ordering']}-{entry['encoding']}-L{entry['l_patch']}-d{entry['d_model']}"


def enumerate_grid(grid: Sequence[dict]) -> List[dict]:
    """Combinaciones (patching, ordering, encoding, l_patch, d_model) de cada bloque, en orden."""
    entradas = []
    for bloque in grid:
        patching = bloque['patching']
        if patching == PatchStrategy.MULTI_CIR and any(e in SPATIAL_KINDS for e in bloque['encodings']):
            raise IncompatibleEncodingError(INCOMPATIBLE_ENCODING_MSG)
        for ordering, encoding, l_patch, d_model in product(
                bloque['orderings'], bloque['encodings'], bloque['l_patches'], bloque['d_models']):
            entrada = {'patching': patching, 'ordering': ordering, 'encoding': encoding,
                       'l_patch': int(l_patch), 'd_model': int(d_model)}
            entrada['clave'] = config_key(entrada)
            entradas.append(entrada)
    return entradas


def model_config_for(entry: dict, base: ModelConfig) -> ModelConfig:
    return replace(
        base,
        patch=PatchConfig(entry['patching'], entry['l_patch']),
        encoding=replace(base.encoding, kind=entry['encoding'], d_model=entry['d_model']),
        ordering=entry['ordering'],
        d_model=entry['d_model'],
    )


def run_config(entry: dict, base: ModelConfig, train_cfg: TrainConfig, env: Environment,
               train_samples: Sequence[Sample], eval_samples: Sequence[Sample],
               baseline_train: dict, baseline_eval: dict, n_av: Optional[float] = None) -> SweepResult:
    cfg = model_config_for(entry, base)
    train_set, _ = encode_dataset(train_samples, env, cfg, baseline_train)
    eval_set, _ = encode_dataset(eval_samples, env, cfg, baseline_eval)
    model = train(train_set, cfg, train_cfg, env)
    report, _ = evaluate(model, eval_set)
    ops = op_count(cfg, env.n_total, n_av).total_ops
    return SweepResult(config=cfg, total_ops=ops, mae=report.mae, cep=report.cep, key=entry['clave'],
                       n_eval=report.n_samples)


def _ops_or_none(entry: dict, base: ModelConfig, env: Environment, n_av: Optional[float]) -> Optional[int]:
    # el conteo es analítico: vale aunque el entrenamiento haya fallado
    try:
        return op_count(model_config_for(entry, base), env.n_total, n_av).total_ops
    except UwbTdoaError:
        return None


def run_sweep(name: str, grid: Sequence[dict], base: ModelConfig, train_cfg: TrainConfig, env: Environment,
              train_samples: Sequence[Sample], eval_samples: Sequence[Sample], baseline_train: dict,
              baseline_eval: dict, n_av: Optional[float] = None, config: Optional[dict] = None,
              progress: bool = False) -> barrido:
    """Entrena y evalúa cada combinación; las ya completadas ('ok') se saltan y los fallos se registran."""
    registro, _ = barrido.objects.get_or_create(name=name, defaults={'config': config or {}})
    registro.estado = 'en_curso'
    registro.save(update_fields=['estado', 'fecha_actualizacion'])
    hechas = registro.claves_completadas()
    entradas = enumerate_grid(grid)
    pendientes = [e for e in entradas if e['clave'] not in hechas]
    logger.info("Barrido %s: %d configuraciones, %d pendientes", name, len(entradas), len(pendientes))

    for entrada in tqdm(pendientes, desc=f'barrido {name}', disable=not progress):
        inicio = time.monotonic()
        campos = {k: entrada[k] for k in ('patching', 'ordering', 'encoding', 'l_patch', 'd_model')}
        try:
            resultado = run_config(entrada, base, train_cfg, env, train_samples, eval_samples,
                                   baseline_train, baseline_eval, n_av)
        except Exception as exc:
            logger.exception("Configuración %s falló: %s", entrada['clave'], exc)
            valores = {**campos, 'estado': 'fallido', 'error': f'{type(exc).__name__}: {exc}', 'mae': None,
                       'total_ops': _ops_or_none(entrada, base, env, n_av),
                       **{f'cep{q}': None for q in CEP_QUANTILES}}
        else:
            valores = {**campos, 'estado': 'ok', 'error': None, 'total_ops': resultado.total_ops,
                       'mae': resultado.mae, 'n_eval': resultado.n_eval,
                       **{f'cep{q}': resultado.cep.get(q) for q in CEP_QUANTILES}}
        valores['duracion_s'] = time.monotonic() - inicio
        with transaction.atomic():
            resultadoBarrido.objects.update_or_create(barrido=registro, clave=entrada['clave'], defaults=valores)

    fallidas = registro.resultados.filter(estado='fallido').count()
    registro.estado = 'completado' if fallidas == 0 else 'fallido'
    registro.save(update_fields=['estado', 'fecha_actualizacion'])
    return registro


def results_frame(registro: barrido) -> pd.DataFrame:
    filas = list(registro.resultados.values(*RESULT_COLUMNS))
    return pd.DataFrame(filas, columns=RESULT_COLUMNS)


def pareto_frame(resultados: pd.DataFrame) -> pd.DataFrame:
    ok = resultados[(resultados['estado'] == 'ok') & resultados['mae'].notna()]
    frente = pareto_front(ok.to_dict('records'))
    return pd.DataFrame(frente, columns=resultados.columns)


def parameter_summary(resultados: pd.DataFrame, parameter: str) -> pd.DataFrame:
    """Mediana, cuartiles y extremos del MAE agrupando por un parámetro (datos de un boxplot)."""
    ok = resultados[(resultados['estado'] == 'ok') & resultados['mae'].notna()]
    agrupado = ok.groupby(parameter)['mae']
    resumen = pd.DataFrame({
        'n': agrupado.count(),
        'min': agrupado.min(),
        'q1': agrupado.quantile(0.25),
        'median': agrupado.median(),
        'q3': agrupado.quantile(0.75),
        'max': agrupado.max(),
    })
    return resumen.reset_index()


def write_tables(registro: barrido, output_dir) -> dict:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    resultados = results_frame(registro)
    rutas = {
        'results': output_dir / f'{registro.name}_results.csv',
        'pareto': output_dir / f'{registro.name}_pareto.csv',
    }
    resultados.to_csv(rutas['results'], index=False)
    pareto_frame(resultados).to_csv(rutas['pareto'], index=False)
    for parametro in ('patching', 'ordering', 'encoding', 'l_patch', 'd_model'):
        ruta = output_dir / f'{registro.name}_summary_{parametro}.csv'
        parameter_summary(resultados, parametro).to_csv(ruta, index=False)
        rutas[f'summary_{parametro}'] = ruta
    return rutas
