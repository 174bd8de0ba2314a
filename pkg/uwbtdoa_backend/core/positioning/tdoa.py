import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from core.exceptions import (InsufficientAnchorsError, InsufficientDataError, InvalidArgumentError,
                             MissingAnchorError)

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0  # m/s

# Parámetros del Levenberg-Marquardt
LAMBDA_INICIAL = 1e-3
LAMBDA_FACTOR = 10.0
STEP_TOLERANCE = 1e-10  # metros
MAX_ITERATIONS = 100


class PairPolicy:
    ALL_PAIRS = 'all_pairs'
    REFERENCE_ANCHOR = 'reference_anchor'
    values = (ALL_PAIRS, REFERENCE_ANCHOR)
    choices = [(v, v) for v in values]


def as_vector3(value, name: str = 'vector') -> np.ndarray:
    """Convierte a un vector float64 de 3 componentes finitas."""
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise InvalidArgumentError(f"{name} debe tener 3 componentes, tiene {arr.size}.")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contiene valores no finitos.")
    return arr


@dataclass(frozen=True)
class Anchor:
    id: int
    position: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'id', int(self.id))
        object.__setattr__(self, 'position', as_vector3(self.position, f"posición del ancla {self.id}"))

    def to_dict(self) -> dict:
        x, y, z = (float(v) for v in self.position)
        return {'id': self.id, 'x': x, 'y': y, 'z': z}


@dataclass(frozen=True)
class DdoaSet:
    pairs: tuple  # ((i, j, ddoa_m), ...)
    anchor_ids: tuple

    def __post_init__(self):
        vistos = set()
        limpios = []
        for i, j, ddoa in self.pairs:
            i, j, ddoa = int(i), int(j), float(ddoa)
            if i == j:
                raise InvalidArgumentError(f"Par inválido ({i}, {j}): las anclas deben ser distintas.")
            if (i, j) in vistos:
                raise InvalidArgumentError(f"El par ({i}, {j}) aparece más de una vez.")
            if not math.isfinite(ddoa):
                raise InvalidArgumentError(f"DDoA no finita para el par ({i}, {j}).")
            vistos.add((i, j))
            limpios.append((i, j, ddoa))
        object.__setattr__(self, 'pairs', tuple(limpios))
        object.__setattr__(self, 'anchor_ids', tuple(int(a) for a in self.anchor_ids))

    @property
    def participating_ids(self) -> set:
        return {i for i, _, _ in self.pairs} | {j for _, j, _ in self.pairs}

    def __len__(self):
        return len(self.pairs)


@dataclass
class PositionEstimate:
    position: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list, repr=False)
    on_boundary: bool = False  # terminó sobre las cotas de búsqueda


AnchorsLike = Union[Sequence[Anchor], Mapping[int, Anchor]]


def _anchor_lookup(anchors: AnchorsLike) -> dict:
    if isinstance(anchors, Mapping):
        return {int(k): v for k, v in anchors.items()}
    return {a.id: a for a in anchors}


def euclidean_distance(p, a) -> float:
    p = as_vector3(p, 'p')
    a = as_vector3(a, 'a')
    return float(np.linalg.norm(p - a))


def true_ddoa(p, a_i: Anchor, a_j: Anchor) -> float:
    if a_i.id == a_j.id:
        raise InvalidArgumentError("true_ddoa requiere dos anclas distintas.")
    return euclidean_distance(p, a_i.position) - euclidean_distance(p, a_j.position)


def _earliest_anchor(timestamps: Mapping[int, float]) -> int:
    # desempate por id ascendente
    return min(timestamps, key=lambda k: (timestamps[k], k))


def measured_ddoa_set(timestamps: Mapping[int, float],
                      pair_policy: str = PairPolicy.REFERENCE_ANCHOR) -> DdoaSet:
    """DDoA medidas a partir de las marcas de tiempo de recepción (segundos)."""
    if len(timestamps) < 2:
        raise InsufficientDataError("Se necesitan al menos 2 marcas de tiempo para formar una DDoA.")
    ts = {int(k): float(v) for k, v in timestamps.items()}
    ids = sorted(ts)
    if pair_policy == PairPolicy.ALL_PAIRS:
        pairs = [(i, j, SPEED_OF_LIGHT * (ts[i] - ts[j]))
                 for n, i in enumerate(ids) for j in ids[n + 1:]]
    elif pair_policy == PairPolicy.REFERENCE_ANCHOR:
        ref = _earliest_anchor(ts)
        pairs = [(i, ref, SPEED_OF_LIGHT * (ts[i] - ts[ref])) for i in ids if i != ref]
    else:
        raise InvalidArgumentError(f"Política de pares desconocida: {pair_policy}")
    return DdoaSet(pairs=tuple(pairs), anchor_ids=tuple(ids))


def true_ddoa_set(p, anchors: Sequence[Anchor], pair_policy: str = PairPolicy.REFERENCE_ANCHOR) -> DdoaSet:
    """DDoA sin ruido generadas desde una posición conocida (para simulación y pruebas)."""
    p = as_vector3(p, 'p')
    timestamps = {a.id: euclidean_distance(p, a.position) / SPEED_OF_LIGHT for a in anchors}
    if pair_policy == PairPolicy.ALL_PAIRS:
        lookup = _anchor_lookup(anchors)
        ids = sorted(lookup)
        pairs = [(i, j, true_ddoa(p, lookup[i], lookup[j])) for n, i in enumerate(ids) for j in ids[n + 1:]]
        return DdoaSet(pairs=tuple(pairs), anchor_ids=tuple(ids))
    lookup = _anchor_lookup(anchors)
    ref = _earliest_anchor(timestamps)
    pairs = [(a_id, ref, true_ddoa(p, lookup[a_id], lookup[ref])) for a_id in sorted(lookup) if a_id != ref]
    return DdoaSet(pairs=tuple(pairs), anchor_ids=tuple(sorted(lookup)))


def _pair_geometry(ddoas: DdoaSet, anchors: AnchorsLike):
    lookup = _anchor_lookup(anchors)
    faltantes = sorted(ddoas.participating_ids - set(lookup))
    if faltantes:
        raise MissingAnchorError(f"Anclas sin posición conocida: {faltantes}")
    pos_i = np.array([lookup[i].position for i, _, _ in ddoas.pairs]).reshape(-1, 3)
    pos_j = np.array([lookup[j].position for _, j, _ in ddoas.pairs]).reshape(-1, 3)
    medidas = np.array([d for _, _, d in ddoas.pairs], dtype=np.float64)
    return pos_i, pos_j, medidas


def _residuals(p, pos_i, pos_j, medidas):
    return np.linalg.norm(p - pos_i, axis=1) - np.linalg.norm(p - pos_j, axis=1) - medidas


def _jacobian(p, pos_i, pos_j):
    di = p - pos_i
    dj = p - pos_j
    ni = np.maximum(np.linalg.norm(di, axis=1, keepdims=True), 1e-12)
    nj = np.maximum(np.linalg.norm(dj, axis=1, keepdims=True), 1e-12)
    return di / ni - dj / nj


def residuals(p, ddoas: DdoaSet, anchors: AnchorsLike) -> np.ndarray:
    """[d_i'(p) - d_j'(p)] - DDoA_ij para cada par, en metros."""
    p = as_vector3(p, 'p')
    pos_i, pos_j, medidas = _pair_geometry(ddoas, anchors)
    return _residuals(p, pos_i, pos_j, medidas)


def _as_bounds(bounds):
    if bounds is None:
        return None
    lo = as_vector3(bounds[0], 'cota inferior')
    hi = as_vector3(bounds[1], 'cota superior')
    if np.any(hi < lo):
        raise InvalidArgumentError("Las cotas de búsqueda tienen max < min.")
    return lo, hi


def solve_tdoa(ddoas: DdoaSet, anchors: AnchorsLike, init=None, fixed_z: Optional[float] = None,
               max_iterations: int = MAX_ITERATIONS, step_tolerance: float = STEP_TOLERANCE,
               bounds=None) -> PositionEstimate:
    """
    Posición por mínimos cuadrados no lineales sobre los residuos de las hiperboloides
    (Levenberg-Marquardt con jacobiano analítico).

    Con fixed_z la coordenada z queda fija (modo 2D para anclas casi coplanares).
    bounds=(min, max) proyecta cada iterado dentro de la caja; sin cotas, con pocas anclas
    y sesgo NLOS el iterado puede escaparse por las asíntotas de las hiperboloides.
    """
    participantes = ddoas.participating_ids
    if len(participantes) < 3:
        raise InsufficientAnchorsError(
            f"Se requieren al menos 3 anclas distintas, hay {len(participantes)}.")
    if fixed_z is None and len(ddoas) < 3:
        raise InsufficientAnchorsError(
            f"En 3D se requieren al menos 3 pares DDoA, hay {len(ddoas)}.")
    pos_i, pos_j, medidas = _pair_geometry(ddoas, anchors)
    lookup = _anchor_lookup(anchors)
    cotas = _as_bounds(bounds)
    libres = slice(0, 2) if fixed_z is not None else slice(0, 3)

    def proyectar(q):
        if cotas is not None:
            q[libres] = np.clip(q[libres], cotas[0][libres], cotas[1][libres])
        return q

    if init is None:
        p = np.mean([lookup[a].position for a in sorted(participantes)], axis=0)
    else:
        p = as_vector3(init, 'init').copy()
    if fixed_z is not None:
        p[2] = float(fixed_z)
    p = proyectar(p)

    r = _residuals(p, pos_i, pos_j, medidas)
    costo = float(r @ r)
    lam = LAMBDA_INICIAL
    converged = costo == 0.0
    iterations = 0
    history = [costo]

    while not converged and iterations < max_iterations:
        iterations += 1
        J = _jacobian(p, pos_i, pos_j)[:, libres]
        A = J.T @ J
        g = J.T @ r
        aceptado = False
        while True:
            delta = np.linalg.solve(A + lam * np.eye(A.shape[0]), -g)
            if np.linalg.norm(delta) < step_tolerance:
                # sin paso útil: punto estacionario
                converged = True
                break
            candidato = p.copy()
            candidato[libres] += delta
            candidato = proyectar(candidato)
            r_nuevo = _residuals(candidato, pos_i, pos_j, medidas)
            costo_nuevo = float(r_nuevo @ r_nuevo)
            if np.isfinite(costo_nuevo) and costo_nuevo < costo:
                paso = float(np.linalg.norm(candidato - p))
                p, r, costo = candidato, r_nuevo, costo_nuevo
                lam /= LAMBDA_FACTOR
                aceptado = True
                break
            lam *= LAMBDA_FACTOR
        history.append(costo)
        if aceptado and (paso < step_tolerance or costo == 0.0):
            converged = True
        logger.debug("LM iter %d costo=%.3e lambda=%.1e", iterations, costo, lam)

    if not converged:
        logger.warning("solve_tdoa no convergió en %d iteraciones (residuo %.3e m)",
                       max_iterations, math.sqrt(costo))
    en_cota = bool(cotas is not None and (np.any(np.isclose(p[libres], cotas[0][libres]))
                                          or np.any(np.isclose(p[libres], cotas[1][libres]))))
    return PositionEstimate(position=p, residual_norm=math.sqrt(costo), iterations=iterations,
                            converged=converged, history=history, on_boundary=en_cota)


def solve_from_timestamps(timestamps: Mapping[int, float], anchors: AnchorsLike,
                          pair_policy: str = PairPolicy.REFERENCE_ANCHOR,
                          fixed_z: Optional[float] = None, init=None, bounds=None) -> PositionEstimate:
    ddoas = measured_ddoa_set(timestamps, pair_policy)
    return solve_tdoa(ddoas, anchors, init=init, fixed_z=fixed_z, bounds=bounds)
