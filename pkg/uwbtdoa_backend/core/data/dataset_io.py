"""
Lectura y escritura de datasets (JSON-lines, una muestra por línea) y del archivo de entorno (YAML).

Esquema de cada línea:
    {"sample_id", "true_position": [x, y, z], "tx_time_s",
     "measurements": [{"anchor_id", "rx_time_s", "first_path_index", "cir_real": [...],
                       "cir_imag": [...], "los"?: bool}]}
"""
import json
import logging
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import yaml

from core.channel.simulador import Box, Environment, RawCir, Sample, los_status
from core.exceptions import InvalidArgumentError
from core.positioning.tdoa import Anchor

logger = logging.getLogger(__name__)


def sample_to_dict(sample: Sample) -> dict:
    medidas = []
    for cir in sample.raw_cirs:
        medida = {
            'anchor_id': int(cir.anchor_id),
            'rx_time_s': float(cir.rx_time),
            'first_path_index': int(cir.first_path_index),
            'cir_real': np.real(cir.iq).tolist(),
            'cir_imag': np.imag(cir.iq).tolist(),
        }
        if cir.los is not None:
            medida['los'] = bool(cir.los)
        medidas.append(medida)
    return {
        'sample_id': int(sample.sample_id),
        'true_position': [float(v) for v in sample.true_position],
        'tx_time_s': float(sample.tx_time),
        'measurements': medidas,
    }


def sample_from_dict(data: dict) -> Sample:
    try:
        cirs = [
            RawCir(iq=np.asarray(m['cir_real'], dtype=np.float64) + 1j * np.asarray(m['cir_imag'], dtype=np.float64),
                   first_path_index=m['first_path_index'], rx_time=float(m['rx_time_s']),
                   anchor_id=int(m['anchor_id']), los=m.get('los'))
            for m in data['measurements']
        ]
        return Sample(true_position=data['true_position'], raw_cirs=cirs,
                      sample_id=int(data['sample_id']), tx_time=float(data.get('tx_time_s', 0.0)))
    except KeyError as exc:
        raise InvalidArgumentError(f"Falta el campo {exc.args[0]!r} en la muestra.") from exc


def write_dataset(samples: Iterable[Sample], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with path.open('w', encoding='utf-8') as f:
        for sample in samples:
            f.write(json.dumps(sample_to_dict(sample), separators=(',', ':')))
            f.write('\n')
            n += 1
    logger.info("Dataset con %d muestras escrito en %s", n, path)
    return path


def _read_jsonl(path: Path) -> List[Sample]:
    samples = []
    with path.open(encoding='utf-8') as f:
        for numero, linea in enumerate(f, start=1):
            if not linea.strip():
                continue
            try:
                samples.append(sample_from_dict(json.loads(linea)))
            except json.JSONDecodeError as exc:
                raise InvalidArgumentError(f"{path}:{numero}: JSON inválido ({exc.msg}).") from exc
    return samples


# formato -> lector; el formato del dataset real se registra aquí cuando se publique
ADAPTERS: Dict[str, Callable[[Path], List[Sample]]] = {
    'jsonl': _read_jsonl,
}


def register_adapter(fmt: str, reader: Callable[[Path], List[Sample]]):
    ADAPTERS[fmt] = reader


def read_dataset(path, fmt: str = 'jsonl') -> List[Sample]:
    if fmt not in ADAPTERS:
        raise InvalidArgumentError(f"Formato de dataset desconocido: {fmt} (disponibles: {sorted(ADAPTERS)}).")
    return ADAPTERS[fmt](Path(path))


def environment_to_dict(env: Environment) -> dict:
    return {
        'extent': [float(v) for v in env.extent],
        'anchors': [a.to_dict() for a in env.anchors],
        'obstacles': [b.to_dict() for b in env.obstacles],
    }


def environment_from_dict(data) -> Environment:
    """Acepta el entorno completo o solo la lista de anclas {id, x, y, z}."""
    if isinstance(data, list):
        data = {'anchors': data}
    if not data or not data.get('anchors'):
        raise InvalidArgumentError("El entorno debe definir al menos un ancla.")
    anclas = [Anchor(id=a['id'], position=(a['x'], a['y'], a['z'])) for a in data['anchors']]
    obstaculos = [Box(min=o['min'], max=o['max']) for o in data.get('obstacles') or []]
    extent = data.get('extent')
    if extent is None:
        extent = np.max([a.position for a in anclas], axis=0)
    return Environment(anchors=anclas, obstacles=obstaculos, extent=extent)


def write_environment(env: Environment, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as f:
        yaml.safe_dump(environment_to_dict(env), f, sort_keys=False)
    return path


def read_environment(path) -> Environment:
    with Path(path).open(encoding='utf-8') as f:
        return environment_from_dict(yaml.safe_load(f))


def region_filter(samples: Sequence[Sample], x_range: Optional[Sequence[float]]) -> List[Sample]:
    """Excluye las muestras cuya x real cae en [x_min, x_max]."""
    if not x_range:
        return list(samples)
    x_min, x_max = sorted(float(v) for v in x_range)
    return [s for s in samples if not x_min <= s.true_position[0] <= x_max]


def _los_links(sample: Sample, env: Environment) -> List[bool]:
    return [
        bool(c.los) if c.los is not None
        else los_status(sample.true_position, env.anchor(c.anchor_id), env.obstacles)
        for c in sample.raw_cirs
    ]


def dataset_summary(samples: Sequence[Sample], env: Environment) -> dict:
    """Estadísticas de disponibilidad de enlaces: anclas recibidas y enlaces LOS por posición."""
    if not samples:
        raise InvalidArgumentError("El dataset está vacío.")
    disponibles = np.array([len(s.raw_cirs) for s in samples])
    los_por_muestra = [_los_links(s, env) for s in samples]
    n_los = np.array([sum(links) for links in los_por_muestra])
    total_links = int(disponibles.sum())
    return {
        'n_positions': len(samples),
        'n_anchors': env.n_total,
        'mean_available': float(disponibles.mean()),
        'los_fraction': float(n_los.sum() / total_links) if total_links else 0.0,
        'fraction_no_los': float(np.mean(n_los == 0)),
        'fraction_lt2_los': float(np.mean(n_los < 2)),
        'fraction_lt3_los': float(np.mean(n_los < 3)),
    }
