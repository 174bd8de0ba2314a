from dataclasses import dataclass

import numpy as np

from core.channel.simulador import Environment, RawCir, Sample
from core.exceptions import InsufficientDataError, InvalidArgumentError

WINDOW_LENGTH = 150
SAMPLES_BEFORE_FIRST_PATH = 50


class Ordering:
    FIXED = 'fixed'
    TIME_BASED = 'time_based'
    values = (FIXED, TIME_BASED)
    choices = [(v, v) for v in values]


@dataclass
class ProcessedCir:
    amplitude: np.ndarray  # 150 valores en [0, 1]
    anchor_id: int
    anchor_position: np.ndarray
    rx_time: float


@dataclass
class InputTensor:
    """Matriz M (N x 150) con metadatos por fila."""
    amplitudes: np.ndarray  # (N, 150)
    present: np.ndarray  # (N,) bool
    anchor_ids: np.ndarray  # (N,) int
    anchor_positions: np.ndarray  # (N, 3)
    rx_times: np.ndarray  # (N,) segundos, 0 en filas ausentes
    ordering: str
    n_total: int

    @property
    def n_rows(self) -> int:
        return int(self.amplitudes.shape[0])

    @property
    def padded(self) -> bool:
        return self.n_rows == self.n_total

    @property
    def rows(self) -> list:
        return [
            {'amplitude': self.amplitudes[n], 'present': bool(self.present[n]),
             'anchor_id': int(self.anchor_ids[n]), 'anchor_position': self.anchor_positions[n],
             'rx_time': float(self.rx_times[n]) if self.present[n] else None}
            for n in range(self.n_rows)
        ]

    def time_offsets(self) -> np.ndarray:
        """Diferencia de cada fila presente con la recepción más temprana (0 en filas ausentes)."""
        if not self.present.any():
            return np.zeros(self.n_rows)
        t0 = self.rx_times[self.present].min()
        return np.where(self.present, self.rx_times - t0, 0.0)

    def permuted(self, order) -> 'InputTensor':
        order = np.asarray(order)
        return InputTensor(amplitudes=self.amplitudes[order], present=self.present[order],
                           anchor_ids=self.anchor_ids[order], anchor_positions=self.anchor_positions[order],
                           rx_times=self.rx_times[order], ordering=self.ordering, n_total=self.n_total)


def iq_to_amplitude(raw: RawCir) -> np.ndarray:
    return np.abs(np.asarray(raw.iq if isinstance(raw, RawCir) else raw, dtype=np.complex128))


def trim_window(amplitude, first_path_index: int) -> np.ndarray:
    """50 muestras antes y 100 después del primer camino; fuera de rango se rellena con ceros."""
    amplitude = np.asarray(amplitude, dtype=np.float64)
    out = np.zeros(WINDOW_LENGTH, dtype=np.float64)
    inicio = int(first_path_index) - SAMPLES_BEFORE_FIRST_PATH
    lo = max(inicio, 0)
    hi = min(inicio + WINDOW_LENGTH, len(amplitude))
    if hi > lo:
        out[lo - inicio:hi - inicio] = amplitude[lo:hi]
    return out


def normalize_minmax(window) -> np.ndarray:
    window = np.asarray(window, dtype=np.float64)
    lo, hi = window.min(), window.max()
    if hi == lo:
        # ventana constante: sin información
        return np.zeros_like(window)
    return (window - lo) / (hi - lo)


def process_cir(raw: RawCir, env: Environment) -> ProcessedCir:
    amplitude = normalize_minmax(trim_window(iq_to_amplitude(raw), raw.first_path_index))
    return ProcessedCir(amplitude=amplitude, anchor_id=raw.anchor_id,
                        anchor_position=env.anchor(raw.anchor_id).position, rx_time=raw.rx_time)


def build_input_tensor(sample: Sample, env: Environment, ordering: str = Ordering.FIXED,
                       pad_to_total: bool = False) -> InputTensor:
    """
    Ordena las CIR procesadas en la matriz M.

    fixed: una fila por ancla del entorno (por id), ausentes en cero.
    time_based: filas presentes ordenadas por rx_time (desempate por id); con pad_to_total
    se agregan las ausentes en cero al final (multi-CIR con orden temporal).
    """
    if not sample.raw_cirs:
        raise InsufficientDataError("La muestra no tiene CIR recibidas.")
    procesadas = {c.anchor_id: process_cir(c, env) for c in sample.raw_cirs}

    if ordering == Ordering.FIXED:
        orden = [a.id for a in env.anchors]
    elif ordering == Ordering.TIME_BASED:
        orden = sorted(procesadas, key=lambda a: (procesadas[a].rx_time, a))
        if pad_to_total:
            orden += [a.id for a in env.anchors if a.id not in procesadas]
    else:
        raise InvalidArgumentError(f"Orden desconocido: {ordering}")

    n = len(orden)
    amplitudes = np.zeros((n, WINDOW_LENGTH))
    present = np.zeros(n, dtype=bool)
    posiciones = np.zeros((n, 3))
    rx = np.zeros(n)
    for fila, anchor_id in enumerate(orden):
        posiciones[fila] = env.anchor(anchor_id).position
        if anchor_id in procesadas:
            amplitudes[fila] = procesadas[anchor_id].amplitude
            present[fila] = True
            rx[fila] = procesadas[anchor_id].rx_time
    return InputTensor(amplitudes=amplitudes, present=present, anchor_ids=np.asarray(orden, dtype=np.int64),
                       anchor_positions=posiciones, rx_times=rx, ordering=str(ordering), n_total=env.n_total)
