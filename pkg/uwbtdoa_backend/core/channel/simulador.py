"""
Simulador sintético de entorno UWB: anclas, racks como obstáculos, trayectorias del tag
y CIR crudas por ancla con el sesgo positivo que introduce el NLOS.

No intenta reproducir la física del DW1000, solo generar datos etiquetados con
estructura que el corrector pueda aprender.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from core.exceptions import InvalidArgumentError, MissingAnchorError, OutOfBoundsError
from core.positioning.tdoa import SPEED_OF_LIGHT, Anchor, as_vector3

logger = logging.getLogger(__name__)

SAMPLE_PERIOD_S = 1e-9  # cada muestra de la CIR representa ~1 ns
MIN_CIR_LENGTH = 150


@dataclass(frozen=True)
class Box:
    """Obstáculo alineado a los ejes (metros)."""
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = as_vector3(self.min, 'min')
        hi = as_vector3(self.max, 'max')
        if np.any(hi < lo):
            raise InvalidArgumentError("El obstáculo tiene max < min.")
        object.__setattr__(self, 'min', lo)
        object.__setattr__(self, 'max', hi)

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.min) and np.all(p <= self.max))

    def to_dict(self) -> dict:
        return {'min': self.min.tolist(), 'max': self.max.tolist()}


@dataclass
class Environment:
    anchors: List[Anchor]
    obstacles: List[Box] = field(default_factory=list)
    extent: np.ndarray = field(default_factory=lambda: np.array([30.0, 10.0, 3.0]))

    def __post_init__(self):
        self.extent = as_vector3(self.extent, 'extent')
        if np.any(self.extent <= 0):
            raise InvalidArgumentError("La extensión del entorno debe ser estrictamente positiva.")
        ids = [a.id for a in self.anchors]
        if len(ids) != len(set(ids)):
            raise InvalidArgumentError("Los ids de las anclas deben ser únicos.")
        for a in self.anchors:
            if not self.within(a.position):
                raise OutOfBoundsError(f"El ancla {a.id} está fuera del entorno.")
        # orden fijo: fila predeterminada por id ascendente
        self.anchors = sorted(self.anchors, key=lambda a: a.id)

    @property
    def n_total(self) -> int:
        return len(self.anchors)

    def within(self, point) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= 0.0) and np.all(p <= self.extent))

    def anchor(self, anchor_id: int) -> Anchor:
        for a in self.anchors:
            if a.id == anchor_id:
                return a
        raise MissingAnchorError(f"El ancla {anchor_id} no pertenece al entorno.")

    def row_index(self) -> dict:
        return {a.id: n for n, a in enumerate(self.anchors)}

    def in_obstacle(self, point) -> bool:
        return any(box.contains(point) for box in self.obstacles)


@dataclass
class RawCir:
    iq: np.ndarray
    first_path_index: int
    rx_time: float
    anchor_id: int
    los: Optional[bool] = None

    def __post_init__(self):
        self.iq = np.asarray(self.iq, dtype=np.complex128)
        self.first_path_index = int(self.first_path_index)
        if len(self.iq) < MIN_CIR_LENGTH:
            raise InvalidArgumentError(f"La CIR debe tener al menos {MIN_CIR_LENGTH} muestras.")
        if not 0 <= self.first_path_index < len(self.iq):
            raise InvalidArgumentError("first_path_index fuera del buffer de la CIR.")


@dataclass
class Sample:
    true_position: np.ndarray
    raw_cirs: List[RawCir]
    sample_id: int = 0
    tx_time: float = 0.0

    def __post_init__(self):
        self.true_position = as_vector3(self.true_position, 'true_position')

    @property
    def detected_anchor_ids(self) -> List[int]:
        return [c.anchor_id for c in self.raw_cirs]

    def timestamps(self) -> dict:
        return {c.anchor_id: c.rx_time for c in self.raw_cirs}


@dataclass
class SimulationParams:
    """Parámetros del simulador. Valores provisorios hasta contar con estadísticas reales."""
    snr_db: Optional[float] = 20.0  # None desactiva el ruido
    cir_length: int = 256
    first_path_offset: int = 64
    offset_jitter: int = 16
    pulse_width: float = 4.0  # muestras
    nlos_direct_max: float = 0.3
    nlos_excess_m: tuple = (0.5, 15.0)
    n_multipath: tuple = (3, 8)
    multipath_excess_m: tuple = (1.0, 30.0)
    multipath_decay_m: float = 8.0


@dataclass
class Channel:
    delays: np.ndarray  # segundos desde la transmisión
    gains: np.ndarray  # complejas
    detected_delay: float  # retardo del primer camino detectado
    los: bool = True


def los_status(tag, anchor: Anchor, obstacles: Sequence[Box]) -> bool:
    """True si el segmento abierto tag -> ancla no cruza ningún obstáculo."""
    p0 = as_vector3(tag, 'tag')
    p1 = anchor.position
    d = p1 - p0
    for box in obstacles:
        t_in, t_out = 0.0, 1.0
        cruza = True
        for ax in range(3):
            if abs(d[ax]) < 1e-15:
                if p0[ax] < box.min[ax] or p0[ax] > box.max[ax]:
                    cruza = False
                    break
                continue
            t1 = (box.min[ax] - p0[ax]) / d[ax]
            t2 = (box.max[ax] - p0[ax]) / d[ax]
            t_in = max(t_in, min(t1, t2))
            t_out = min(t_out, max(t1, t2))
            if t_in > t_out:
                cruza = False
                break
        # segmento abierto: tocar solo los extremos no bloquea
        if cruza and t_out > 0.0 and t_in < 1.0:
            return False
    return True


def pulse(t: np.ndarray, width: float) -> np.ndarray:
    """Pulso tipo coseno alzado de ~width muestras, pico 1 en t = 0."""
    half = width / 2.0
    out = 0.5 * (1.0 + np.cos(np.pi * t / half))
    return np.where(np.abs(t) < half, out, 0.0)


def draw_channel(tag, anchor: Anchor, env: Environment, rng: np.random.Generator,
                 params: SimulationParams) -> Channel:
    distancia = float(np.linalg.norm(as_vector3(tag) - anchor.position))
    tau0 = distancia / SPEED_OF_LIGHT
    los = los_status(tag, anchor, env.obstacles)

    fase = lambda n: np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))  # noqa: E731
    if los:
        delays = [tau0]
        gains = [1.0 * fase(1)[0]]
        detectado = tau0
    else:
        # directo atenuado y una reflexión dominante que se detecta como primer camino
        exceso = rng.uniform(*params.nlos_excess_m) / SPEED_OF_LIGHT
        directo = rng.uniform(0.0, params.nlos_direct_max)
        delays = [tau0, tau0 + exceso]
        gains = [directo * fase(1)[0], 1.0 * fase(1)[0]]
        detectado = tau0 + exceso

    n_mp = int(rng.integers(params.n_multipath[0], params.n_multipath[1] + 1))
    extra_m = np.sort(rng.uniform(*params.multipath_excess_m, n_mp))
    amp = 0.8 * np.exp(-extra_m / params.multipath_decay_m) * rng.uniform(0.3, 1.0, n_mp)
    delays.extend(detectado + extra_m / SPEED_OF_LIGHT)
    gains.extend(amp * fase(n_mp))
    return Channel(delays=np.asarray(delays), gains=np.asarray(gains, dtype=np.complex128),
                   detected_delay=detectado, los=los)


def render_cir(channel: Channel, anchor_id: int, tx_time: float, rng: np.random.Generator,
               params: SimulationParams, first_path_index: Optional[int] = None) -> RawCir:
    """Convoluciona el tren de taps con el pulso y agrega ruido blanco complejo."""
    if first_path_index is None:
        first_path_index = params.first_path_offset + int(rng.integers(0, params.offset_jitter + 1))
    # el buffer queda alineado para que el primer camino detectado caiga en first_path_index
    t_inicio = channel.detected_delay - first_path_index * SAMPLE_PERIOD_S
    k = np.arange(params.cir_length, dtype=np.float64)
    iq = np.zeros(params.cir_length, dtype=np.complex128)
    for delay, gain in zip(channel.delays, channel.gains):
        posicion = (delay - t_inicio) / SAMPLE_PERIOD_S
        iq += gain * pulse(k - posicion, params.pulse_width)
    if params.snr_db is not None:
        sigma = np.sqrt(10.0 ** (-params.snr_db / 10.0) / 2.0)
        iq += sigma * (rng.standard_normal(params.cir_length) + 1j * rng.standard_normal(params.cir_length))
    return RawCir(iq=iq, first_path_index=first_path_index, rx_time=tx_time + channel.detected_delay,
                  anchor_id=anchor_id, los=channel.los)


def synth_cir(tag, anchor: Anchor, env: Environment, rng_seed, tx_time: float = 0.0,
              params: Optional[SimulationParams] = None, channel: Optional[Channel] = None) -> RawCir:
    if not env.within(tag):
        raise OutOfBoundsError(f"El tag {np.asarray(tag).tolist()} está fuera del entorno.")
    params = params or SimulationParams()
    rng = np.random.default_rng(rng_seed)
    if channel is None:
        channel = draw_channel(tag, anchor, env, rng, params)
    return render_cir(channel, anchor.id, tx_time, rng, params)


def generate_dataset(env: Environment, trajectory, drop_probability: float, rng_seed,
                     params: Optional[SimulationParams] = None, tx_period_s: float = 1e-3,
                     progress: bool = False) -> List[Sample]:
    """Una muestra por punto de la trayectoria; cada ancla se descarta con drop_probability."""
    puntos = [as_vector3(p, 'punto de trayectoria') for p in trajectory]
    if not puntos:
        raise InvalidArgumentError("La trayectoria está vacía.")
    if not 0.0 <= drop_probability < 1.0:
        raise InvalidArgumentError("drop_probability debe estar en [0, 1).")
    params = params or SimulationParams()
    semillas = np.random.SeedSequence(rng_seed).spawn(len(puntos))

    samples = []
    for n, (punto, semilla) in enumerate(tqdm(list(zip(puntos, semillas)), desc="simulando",
                                             disable=not progress)):
        if not env.within(punto):
            raise OutOfBoundsError(f"El punto {n} de la trayectoria está fuera del entorno.")
        rng = np.random.default_rng(semilla)
        recibe = rng.random(env.n_total) >= drop_probability
        while not recibe.any():
            recibe = rng.random(env.n_total) >= drop_probability
        tx_time = n * tx_period_s
        cirs = []
        for anchor, ok in zip(env.anchors, recibe):
            if not ok:
                continue
            sub = int(rng.integers(0, 2 ** 63 - 1))
            cirs.append(synth_cir(punto, anchor, env, sub, tx_time=tx_time, params=params))
        samples.append(Sample(true_position=punto, raw_cirs=cirs, sample_id=n, tx_time=tx_time))
    logger.info("Dataset simulado: %d muestras, %.2f anclas disponibles en promedio",
                len(samples), np.mean([len(s.raw_cirs) for s in samples]))
    return samples


def drop_probability_for_target(n_anchors: int, target_available: float) -> float:
    if not 0 < target_available <= n_anchors:
        raise InvalidArgumentError("El objetivo de anclas disponibles debe estar en (0, n_anchors].")
    return 1.0 - float(target_available) / float(n_anchors)


def default_environment() -> Environment:
    """Laboratorio de 30 m x 10 m x 3 m con 15 anclas y 3 racks metálicos."""
    posiciones = [
        (1.0, 1.0, 2.6), (8.0, 0.5, 2.2), (15.0, 1.0, 2.8), (22.0, 0.5, 2.4), (29.0, 1.0, 2.7),
        (29.0, 9.0, 2.3), (22.0, 9.5, 2.8), (15.0, 9.0, 2.5), (8.0, 9.5, 2.9), (1.0, 9.0, 2.2),
        (1.0, 5.0, 1.8), (5.5, 5.0, 2.0), (13.25, 5.0, 2.7), (20.25, 5.0, 2.1), (27.0, 5.0, 2.6),
    ]
    anclas = [Anchor(id=n + 1, position=p) for n, p in enumerate(posiciones)]
    racks = [Box(min=(x, 2.0, 0.0), max=(x + 1.5, 8.0, 3.0)) for x in (9.0, 16.0, 23.0)]
    return Environment(anchors=anclas, obstacles=racks, extent=(30.0, 10.0, 3.0))


def training_lines(env: Environment, row_spacing: float = 1.5, column_spacing: float = 5.0,
                   margin: float = 0.5, height: float = 1.0) -> list:
    """Segmentos rectos (inicio, fin) de las pasadas sistemáticas de entrenamiento."""
    X, Y, _ = env.extent
    lineas = [((margin, y, height), (X - margin, y, height)) for y in np.arange(margin, Y - margin + 1e-9, row_spacing)]
    lineas += [((x, margin, height), (x, Y - margin, height)) for x in np.arange(margin, X - margin + 1e-9, column_spacing)]
    return [(np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)) for a, b in lineas]


def training_trajectory(env: Environment, spacing: float = 0.08, height: float = 1.0, **line_kwargs) -> np.ndarray:
    puntos = []
    for a, b in training_lines(env, height=height, **line_kwargs):
        largo = float(np.linalg.norm(b - a))
        for t in np.linspace(0.0, 1.0, max(2, int(largo / spacing) + 1)):
            p = a + t * (b - a)
            if not env.in_obstacle(p):
                puntos.append(p)
    return np.asarray(puntos)


def _distance_to_segment(p, a, b) -> float:
    ab = b - a
    t = np.clip(np.dot(p - a, ab) / max(np.dot(ab, ab), 1e-12), 0.0, 1.0)
    return float(np.linalg.norm(p - (a + t * ab)))


def evaluation_trajectory(env: Environment, n_points: int = 1000, seed=0, height: float = 1.0,
                          step: float = 0.1, line_clearance: float = 0.1, margin: float = 0.5,
                          **line_kwargs) -> np.ndarray:
    """Camino aleatorio suave que pasa entre las líneas de entrenamiento."""
    rng = np.random.default_rng(seed)
    lineas = training_lines(env, height=height, margin=margin, **line_kwargs)
    lo = np.array([margin, margin])
    hi = env.extent[:2] - margin
    pos = rng.uniform(lo, hi)
    while env.in_obstacle((pos[0], pos[1], height)):
        pos = rng.uniform(lo, hi)
    rumbo = rng.uniform(0.0, 2.0 * np.pi)
    puntos = []
    intentos = 0
    while len(puntos) < n_points:
        intentos += 1
        if intentos > 200 * n_points:
            raise InvalidArgumentError("No se pudo generar la trayectoria de evaluación con estos parámetros.")
        rumbo += rng.normal(0.0, 0.3)
        nuevo = pos + step * np.array([np.cos(rumbo), np.sin(rumbo)])
        p3 = np.array([nuevo[0], nuevo[1], height])
        if np.any(nuevo < lo) or np.any(nuevo > hi) or env.in_obstacle(p3):
            rumbo += np.pi / 2 + rng.uniform(0.0, np.pi)
            continue
        pos = nuevo
        if min(_distance_to_segment(p3, a, b) for a, b in lineas) <= line_clearance:
            continue
        puntos.append(p3)
    return np.asarray(puntos)
