"""Carga del archivo de experimento (YAML), overrides `seccion.campo=valor` y armado de objetos de dominio."""
import copy
import logging
from pathlib import Path
from typing import Iterable, Optional

import yaml
from django.conf import settings
from rest_framework import serializers

from core.channel.simulador import Environment, SimulationParams, default_environment, drop_probability_for_target
from core.data.dataset_io import environment_from_dict, read_environment
from core.exceptions import InvalidConfigError
from core.model.encodings import EncodingConfig
from core.model.entrenamiento import TrainConfig
from core.model.patching import PatchConfig
from core.model.transformer import ModelConfig
from core.serializer import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

SECTIONS = ('environment', 'simulation', 'model', 'train', 'sweep')


def parse_override(texto: str):
    """'model.d_model=32' -> (['model', 'd_model'], 32); el valor se interpreta como YAML."""
    if '=' not in texto:
        raise InvalidConfigError(f"Override inválido {texto!r}: se espera seccion.campo=valor.")
    ruta, valor = texto.split('=', 1)
    claves = [k for k in ruta.strip().split('.') if k]
    if not claves:
        raise InvalidConfigError(f"Override inválido {texto!r}: falta el nombre del campo.")
    return claves, yaml.safe_load(valor)


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    data = copy.deepcopy(data)
    for texto in overrides or ():
        claves, valor = parse_override(texto)
        destino = data
        for clave in claves[:-1]:
            destino = destino.setdefault(clave, {})
            if not isinstance(destino, dict):
                raise InvalidConfigError(f"Override {texto!r}: {clave} no es una sección.")
        destino[claves[-1]] = valor
    return data


def read_config_file(path) -> dict:
    if path is None:
        return {}
    with Path(path).open(encoding='utf-8') as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{path}: el archivo de configuración debe ser un mapa YAML.")
    return data


def load_config(path=None, overrides: Iterable[str] = (), seed: Optional[int] = None,
                output_dir: Optional[str] = None) -> dict:
    """Lee, aplica overrides y valida; devuelve la configuración validada (dict)."""
    path = path or settings.UWB_TDOA.get('DEFAULT_CONFIG')
    if path and not Path(path).exists():
        if path != settings.UWB_TDOA.get('DEFAULT_CONFIG'):
            raise InvalidConfigError(f"No existe el archivo de configuración {path}.")
        path = None
    data = apply_overrides(read_config_file(path), overrides)
    for seccion in SECTIONS:
        if data.get(seccion) is None:
            data[seccion] = {}
    data.setdefault('seed', settings.UWB_TDOA['DEFAULT_SEED'])
    data.setdefault('output_dir', settings.UWB_TDOA['OUTPUT_DIR'])
    if seed is not None:
        data['seed'] = seed
    if output_dir is not None:
        data['output_dir'] = output_dir

    serializer = ExperimentConfigSerializer(data=data)
    if not serializer.is_valid():
        raise serializers.ValidationError(serializer.errors)
    logger.debug("Configuración validada: %s", serializer.validated_data)
    return _plain(serializer.validated_data)


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def model_config_from(model: dict) -> ModelConfig:
    return ModelConfig(
        patch=PatchConfig(model['patching'], model['l_patch']),
        encoding=EncodingConfig(kind=model['encoding'], d_model=model['d_model'], omega_min=model['omega_min'],
                                omega_max=model['omega_max'], dt_max=model['dt_max'], clamp=model['clamp']),
        ordering=model['ordering'],
        d_model=model['d_model'],
        n_layers=model['n_layers'],
        n_heads=model['n_heads'],
        d_ff=model['d_ff'],
        dropout_p=model['dropout_p'],
        head_widths=tuple(model['head_widths']),
        residual_output=model['residual_output'],
        zero_init_head=model['zero_init_head'],
    )


def train_config_from(train: dict, seed: int, max_epochs: Optional[int] = None) -> TrainConfig:
    return TrainConfig(
        batch_size=train['batch_size'],
        lr_peak=train['lr_peak'],
        warmup_fraction=train['warmup_fraction'],
        max_epochs=max_epochs or train['max_epochs'],
        early_stop_patience=train['early_stop_patience'],
        betas=tuple(train['betas']),
        validation_fraction=train['validation_fraction'],
        seed=seed,
    )


def simulation_params_from(simulation: dict) -> SimulationParams:
    return SimulationParams(
        snr_db=simulation['snr_db'],
        cir_length=simulation['cir_length'],
        nlos_direct_max=simulation['nlos_direct_max'],
        nlos_excess_m=tuple(simulation['nlos_excess_m']),
        n_multipath=tuple(simulation['n_multipath']),
    )


def drop_probability_from(simulation: dict, env: Environment) -> float:
    if simulation.get('target_available') is not None:
        return drop_probability_for_target(env.n_total, simulation['target_available'])
    return simulation['drop_probability']


def environment_from(environment: dict) -> Environment:
    if environment.get('path'):
        return read_environment(environment['path'])
    if environment.get('anchors'):
        return environment_from_dict(environment)
    return default_environment()


def output_path(config: dict, nombre: str) -> Path:
    """Rutas relativas se resuelven dentro de output_dir."""
    ruta = Path(nombre)
    if ruta.is_absolute():
        return ruta
    return Path(config['output_dir']) / ruta
