import copy
import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch.optim.lr_scheduler import LambdaLR
from tqdm import tqdm

from core.channel.simulador import Environment
from core.exceptions import InvalidArgumentError, InvalidConfigError, NumericError
from core.model.transformer import (Batch, EncodedSample, ModelConfig, TdoaTransformer, build_model, collate,
                                    predict)
from core.positioning.metricas import MetricsReport, metrics_report

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    lr_peak: float = 1e-3
    warmup_fraction: float = 0.05
    max_epochs: int = 350
    early_stop_patience: int = 25
    betas: tuple = (0.9, 0.999)
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'betas', tuple(float(b) for b in self.betas))
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size debe ser >= 1.")
        if not 0.0 < self.warmup_fraction < 1.0:
            raise InvalidConfigError("warmup_fraction debe estar en (0, 1).")
        if self.lr_peak <= 0 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise InvalidConfigError("lr_peak, max_epochs y early_stop_patience deben ser positivos.")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise InvalidConfigError("validation_fraction debe estar en [0, 1).")

    def to_dict(self) -> dict:
        data = asdict(self)
        data['betas'] = list(self.betas)
        return data


def learning_rate(step: int, total_steps: int, peak: float, warmup_fraction: float) -> float:
    """Subida lineal 0 -> peak en el primer warmup_fraction de los pasos, luego bajada lineal a 0."""
    warmup = max(1, int(round(warmup_fraction * total_steps)))
    if step < warmup:
        return peak * step / warmup
    if total_steps <= warmup:
        return peak
    return peak * max(0.0, (total_steps - step) / (total_steps - warmup))


def mse_loss(model: TdoaTransformer, batch: Batch) -> torch.Tensor:
    return F.mse_loss(model(batch), batch.target)


def compute_gradients(model: TdoaTransformer, batch: Batch) -> dict:
    """Gradientes del MSE del batch respecto de cada parámetro (nombre -> tensor)."""
    if len(batch) == 0:
        raise InvalidArgumentError("El batch está vacío.")
    model.zero_grad(set_to_none=True)
    loss = mse_loss(model, batch)
    if not torch.isfinite(loss):
        raise NumericError(f"Pérdida no finita: {loss.item()}")
    loss.backward()
    return {
        nombre: (p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p))
        for nombre, p in model.named_parameters()
    }


def split_dataset(dataset: Sequence[EncodedSample], validation_fraction: float, seed: int):
    n = len(dataset)
    orden = np.random.default_rng(seed).permutation(n)
    n_val = int(round(validation_fraction * n)) if n > 1 else 0
    n_val = min(n_val, n - 1)
    val = [dataset[i] for i in sorted(orden[:n_val])]
    train = [dataset[i] for i in sorted(orden[n_val:])]
    return train, val


def _batches(dataset, batch_size: int, generator: Optional[torch.Generator] = None):
    if generator is None:
        orden = range(len(dataset))
    else:
        orden = torch.randperm(len(dataset), generator=generator).tolist()
    orden = list(orden)
    for inicio in range(0, len(orden), batch_size):
        yield collate([dataset[i] for i in orden[inicio:inicio + batch_size]])


def _dataset_loss(model: TdoaTransformer, dataset, batch_size: int) -> float:
    model.eval()
    total, n = 0.0, 0
    with torch.no_grad():
        for batch in _batches(dataset, batch_size):
            total += mse_loss(model, batch).item() * len(batch)
            n += len(batch)
    return total / n


def train(dataset: Sequence[EncodedSample], model_cfg: ModelConfig, train_cfg: TrainConfig, env: Environment,
          progress: bool = False) -> TdoaTransformer:
    """
    Adam + MSE con warmup lineal y decaimiento lineal del LR; early stopping sobre la
    pérdida de validación. Devuelve el modelo con la mejor validación y su historial.
    """
    if not dataset:
        raise InvalidArgumentError("El dataset de entrenamiento está vacío.")
    torch.manual_seed(train_cfg.seed)
    model = build_model(model_cfg, env)
    train_set, val_set = split_dataset(dataset, train_cfg.validation_fraction, train_cfg.seed)
    pasos_por_epoca = math.ceil(len(train_set) / train_cfg.batch_size)
    total_pasos = train_cfg.max_epochs * pasos_por_epoca

    optimizer = torch.optim.Adam(model.parameters(), lr=train_cfg.lr_peak, betas=train_cfg.betas)
    scheduler = LambdaLR(optimizer, lambda paso: learning_rate(
        paso, total_pasos, train_cfg.lr_peak, train_cfg.warmup_fraction) / train_cfg.lr_peak)
    generator = torch.Generator().manual_seed(train_cfg.seed)

    mejor_loss, mejor_estado, mejor_epoca = math.inf, copy.deepcopy(model.state_dict()), -1
    history = []
    epocas = tqdm(range(train_cfg.max_epochs), desc='entrenamiento', disable=not progress)
    for epoca in epocas:
        model.train()
        total, n = 0.0, 0
        for batch in _batches(train_set, train_cfg.batch_size, generator):
            optimizer.zero_grad(set_to_none=True)
            loss = mse_loss(model, batch)
            if not torch.isfinite(loss):
                raise NumericError(f"Pérdida no finita en la época {epoca}.")
            loss.backward()
            optimizer.step()
            scheduler.step()
            total += loss.item() * len(batch)
            n += len(batch)
        train_loss = total / n
        val_loss = _dataset_loss(model, val_set, train_cfg.batch_size) if val_set else train_loss
        lr = optimizer.param_groups[0]['lr']
        history.append({'epoch': epoca, 'train_loss': train_loss, 'val_loss': val_loss, 'lr': lr})
        epocas.set_postfix(train=f"{train_loss:.4f}", val=f"{val_loss:.4f}")
        logger.info("época %d train=%.5f val=%.5f lr=%.2e", epoca, train_loss, val_loss, lr)

        if val_loss < mejor_loss:
            mejor_loss, mejor_estado, mejor_epoca = val_loss, copy.deepcopy(model.state_dict()), epoca
        elif epoca - mejor_epoca >= train_cfg.early_stop_patience:
            logger.info("Early stopping en la época %d (mejor época %d)", epoca, mejor_epoca)
            break

    model.load_state_dict(mejor_estado)
    model.eval()
    model.training_history = history
    return model


def evaluate(model: TdoaTransformer, dataset: Sequence[EncodedSample], batch_size: int = 256):
    """(MetricsReport, predicciones (n, 3)) sobre muestras ya codificadas."""
    if not dataset:
        raise InvalidArgumentError("No hay muestras para evaluar.")
    predicciones = predict(model, dataset, batch_size)
    report: MetricsReport = metrics_report(predicciones, np.stack([s.target for s in dataset]))
    return report, predicciones
