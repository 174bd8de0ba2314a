"""
Modelo cerrado de operaciones (multiplicaciones-acumulaciones) por arquitectura y
extracción del frente de Pareto (operaciones, MAE).

Las cotas O(·) se instancian con constante 1; el CLS cuenta como token.
"""
from dataclasses import dataclass, field, replace
from typing import Iterable, List, Optional, Sequence

import pandas as pd

from core.channel.cir import WINDOW_LENGTH, Ordering
from core.exceptions import InvalidArgumentError, InvalidConfigError
from core.model.encodings import EncodingConfig, EncodingKind
from core.model.patching import PatchConfig, PatchStrategy
from core.model.transformer import ModelConfig

CNN_OPS_PER_PAIR = 173_704


class Architecture:
    MULTI_CIR = 'multi_cir'
    PER_CIR_FIXED = 'per_cir_fixed'
    PER_CIR_TIME = 'per_cir_time'
    values = (MULTI_CIR, PER_CIR_FIXED, PER_CIR_TIME)


def architecture_of(cfg: ModelConfig) -> str:
    if cfg.patch.strategy == PatchStrategy.MULTI_CIR:
        return Architecture.MULTI_CIR
    if cfg.ordering == Ordering.FIXED:
        return Architecture.PER_CIR_FIXED
    return Architecture.PER_CIR_TIME


@dataclass(frozen=True)
class OperationCount:
    embedding_ops: int
    attention_ops: int
    feedforward_ops: int
    head_ops: int
    n_layers: int
    n_tokens: int

    @property
    def total_ops(self) -> int:
        return self.embedding_ops + self.n_layers * (self.attention_ops + self.feedforward_ops) + self.head_ops

    def to_dict(self) -> dict:
        return {
            'embedding_ops': self.embedding_ops,
            'attention_ops': self.attention_ops,
            'feedforward_ops': self.feedforward_ops,
            'head_ops': self.head_ops,
            'n_layers': self.n_layers,
            'n_tokens': self.n_tokens,
            'total_ops': self.total_ops,
        }


@dataclass
class SweepResult:
    config: ModelConfig
    total_ops: int
    mae: float
    cep: dict = field(default_factory=dict)
    key: str = ''
    n_eval: int = 0

    def __post_init__(self):
        if self.mae < 0:
            raise InvalidArgumentError("El MAE no puede ser negativo.")
        valores = [self.cep[q] for q in sorted(self.cep)]
        if any(b < a for a, b in zip(valores, valores[1:])):
            raise InvalidArgumentError("Los CEP deben ser no decrecientes en el percentil.")


def head_ops(d_model: int, head_widths: Sequence[int]) -> int:
    anchos = (d_model + 3,) + tuple(head_widths)
    return sum(a * b for a, b in zip(anchos[:-1], anchos[1:]))


def op_count(cfg: ModelConfig, n_total: int, n_av: Optional[float] = None) -> OperationCount:
    """
    multi-CIR: n = K + 1, embedding N_total·150·d.
    per-CIR fijo: n = N_total·K + 1; per-CIR temporal: n = N_av·K + 1, embedding N·150·d.
    Atención n²·d y feed-forward n·d·d_ff por capa.
    """
    if not isinstance(cfg, ModelConfig):
        raise InvalidConfigError("Se esperaba un ModelConfig.")
    if n_total < 1:
        raise InvalidArgumentError("n_total debe ser positivo.")
    n_av = n_total if n_av is None else n_av
    if not 0 < n_av <= n_total:
        raise InvalidArgumentError(f"n_av={n_av} debe estar en (0, n_total={n_total}].")

    d, K = cfg.d_model, cfg.patch.k
    arquitectura = architecture_of(cfg)
    if arquitectura == Architecture.MULTI_CIR:
        n_filas, n_tokens = n_total, K + 1
    elif arquitectura == Architecture.PER_CIR_FIXED:
        n_filas, n_tokens = n_total, n_total * K + 1
    else:
        n_filas, n_tokens = n_av, n_av * K + 1
    return OperationCount(
        embedding_ops=int(round(n_filas * WINDOW_LENGTH * d)),
        attention_ops=int(round(n_tokens ** 2 * d)),
        feedforward_ops=int(round(n_tokens * d * cfg.d_ff)),
        head_ops=head_ops(d, cfg.head_widths),
        n_layers=cfg.n_layers,
        n_tokens=int(round(n_tokens)),
    )


def cnn_baseline_ops(n_available_pairs: int) -> int:
    if n_available_pairs < 0:
        raise InvalidArgumentError("La cantidad de pares no puede ser negativa.")
    return CNN_OPS_PER_PAIR * int(n_available_pairs)


def _ops_mae(item):
    if isinstance(item, dict):
        return item['total_ops'], item['mae']
    return item.total_ops, item.mae


def pareto_front(results: Iterable) -> List:
    """Resultados no dominados en (total_ops, mae), ordenados por operaciones ascendentes."""
    ordenados = sorted(results, key=_ops_mae)
    frente, mejor_mae, i = [], float('inf'), 0
    while i < len(ordenados):
        ops = _ops_mae(ordenados[i])[0]
        grupo = []
        while i < len(ordenados) and _ops_mae(ordenados[i])[0] == ops:
            grupo.append(ordenados[i])
            i += 1
        minimo = _ops_mae(grupo[0])[1]
        if minimo < mejor_mae:
            frente.extend(r for r in grupo if _ops_mae(r)[1] == minimo)
            mejor_mae = minimo
    return frente


def complexity_curve(base: ModelConfig, l_patches: Sequence[int], n_total: int, n_av: float,
                     n_pairs: Optional[int] = None) -> pd.DataFrame:
    """Operaciones totales por arquitectura en función de L_patch, con la constante de la CNN."""
    filas = []
    for l_patch in l_patches:
        fila = {'l_patch': int(l_patch)}
        for arquitectura, estrategia, orden in (
                (Architecture.MULTI_CIR, PatchStrategy.MULTI_CIR, Ordering.FIXED),
                (Architecture.PER_CIR_FIXED, PatchStrategy.PER_CIR, Ordering.FIXED),
                (Architecture.PER_CIR_TIME, PatchStrategy.PER_CIR, Ordering.TIME_BASED)):
            cfg = replace(base, patch=PatchConfig(estrategia, int(l_patch)), ordering=orden,
                          encoding=EncodingConfig(kind=EncodingKind.LEARNED, d_model=base.d_model))
            fila[arquitectura] = op_count(cfg, n_total, n_av).total_ops
        fila['cnn'] = cnn_baseline_ops(n_total if n_pairs is None else n_pairs)
        filas.append(fila)
    return pd.DataFrame(filas, columns=['l_patch', *Architecture.values, 'cnn'])
