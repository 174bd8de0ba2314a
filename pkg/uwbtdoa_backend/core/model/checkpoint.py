"""Checkpoints en formato safetensors: tensores con nombre + metadatos JSON (config, historial, entorno)."""
import json
import logging
from pathlib import Path

import numpy as np
import torch
from django.conf import settings
from safetensors import safe_open
from safetensors.torch import save_file

from core.exceptions import InvalidConfigError
from core.model.transformer import ModelConfig, TdoaTransformer

logger = logging.getLogger(__name__)


def _schema_version() -> str:
    return str(settings.UWB_TDOA['CHECKPOINT_SCHEMA_VERSION'])


def save_checkpoint(model: TdoaTransformer, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensores = {nombre: t.detach().contiguous().cpu() for nombre, t in model.state_dict().items()}
    metadata = {
        'schema_version': _schema_version(),
        'model_config': json.dumps(model.config.to_dict()),
        'n_total': str(model.n_total),
        'extent': json.dumps(model.extent.tolist()),
        'history': json.dumps(model.training_history),
    }
    save_file(tensores, str(path), metadata=metadata)
    logger.info("Checkpoint guardado en %s", path)
    return path


def load_checkpoint(path) -> TdoaTransformer:
    path = Path(path)
    with safe_open(str(path), framework='pt') as f:
        metadata = f.metadata() or {}
        tensores = {nombre: f.get_tensor(nombre) for nombre in f.keys()}
    version = metadata.get('schema_version')
    if version != _schema_version():
        raise InvalidConfigError(
            f"Checkpoint {path} con versión de esquema {version!r}, se esperaba {_schema_version()!r}.")
    cfg = ModelConfig.from_dict(json.loads(metadata['model_config']))
    model = TdoaTransformer(cfg, np.asarray(json.loads(metadata['extent'])), int(metadata['n_total']))
    model.load_state_dict({k: v.to(torch.float64) if v.is_floating_point() else v for k, v in tensores.items()})
    model.training_history = json.loads(metadata.get('history', '[]'))
    model.eval()
    return model
