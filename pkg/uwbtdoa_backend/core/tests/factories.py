"""Entornos y muestras chicas compartidas por los tests."""
import numpy as np

from core.channel.cir import Ordering
from core.channel.simulador import (Box, Environment, RawCir, Sample, SimulationParams, default_environment,
                                    generate_dataset)
from core.model.encodings import EncodingConfig, EncodingKind
from core.model.patching import PatchConfig, PatchStrategy
from core.model.transformer import ModelConfig
from core.positioning.tdoa import SPEED_OF_LIGHT, Anchor


def box_environment(obstacles=()):
    """20 x 20 x 5 m con 8 anclas cerca de las esquinas."""
    esquinas = [(x, y, z) for x in (1.0, 19.0) for y in (1.0, 19.0) for z in (0.5, 4.5)]
    anclas = [Anchor(id=n + 1, position=p) for n, p in enumerate(esquinas)]
    return Environment(anchors=anclas, obstacles=[Box(min=o[0], max=o[1]) for o in obstacles],
                       extent=(20.0, 20.0, 5.0))


def raw_cir(anchor_id, rx_time, first_path_index=64, length=256, peak=1.0, los=None):
    iq = np.zeros(length, dtype=np.complex128)
    iq[first_path_index] = peak
    iq[min(first_path_index + 5, length - 1)] = 0.5 * peak
    return RawCir(iq=iq, first_path_index=first_path_index, rx_time=rx_time, anchor_id=anchor_id, los=los)


def exact_sample(env, position, anchor_ids=None, sample_id=0):
    """Muestra con marcas de tiempo sin ruido (distancia / c) para las anclas pedidas."""
    position = np.asarray(position, dtype=np.float64)
    ids = anchor_ids if anchor_ids is not None else [a.id for a in env.anchors]
    cirs = [raw_cir(a, float(np.linalg.norm(position - env.anchor(a).position)) / SPEED_OF_LIGHT) for a in ids]
    return Sample(true_position=position, raw_cirs=cirs, sample_id=sample_id)


def simulated_samples(n=12, drop_probability=0.4, seed=7, env=None):
    env = env or default_environment()
    rng = np.random.default_rng(seed)
    puntos = []
    while len(puntos) < n:
        p = np.array([rng.uniform(0.5, 29.5), rng.uniform(0.5, 9.5), 1.0])
        if not env.in_obstacle(p):
            puntos.append(p)
    samples = generate_dataset(env, puntos, drop_probability, seed, params=SimulationParams())
    return env, samples


def model_config(strategy=PatchStrategy.PER_CIR, l_patch=75, ordering=Ordering.TIME_BASED,
                 encoding=EncodingKind.SPATIAL, d_model=16, **kwargs):
    """Modelo chico para tests; los campos no dados usan valores livianos."""
    kwargs.setdefault('n_heads', 2)
    kwargs.setdefault('n_layers', 2)
    kwargs.setdefault('d_ff', 32)
    kwargs.setdefault('head_widths', (32, 16, 3))
    return ModelConfig(patch=PatchConfig(strategy, l_patch), encoding=EncodingConfig(kind=encoding, d_model=d_model),
                       ordering=ordering, d_model=d_model, **kwargs)


WALL = ((9.5, 0.0, 0.0), (10.5, 20.0, 5.0))  # pared central de box_environment, de lado a lado


def wall_side_points(n=30, seed=4):
    """Puntos a z = 1 a ambos lados de WALL, lejos de la pared."""
    rng = np.random.default_rng(seed)
    x = np.where(rng.random(n) < 0.5, rng.uniform(3.0, 8.0, n), rng.uniform(12.0, 17.0, n))
    return np.column_stack([x, rng.uniform(3.0, 17.0, n), np.ones(n)])
