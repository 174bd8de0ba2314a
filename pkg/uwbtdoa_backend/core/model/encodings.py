"""
Codificaciones posicionales: aprendida, espacial 3D sinusoidal (bandas log-espaciadas),
diferencia de tiempo y relativa dentro de la CIR.
"""
from dataclasses import dataclass

import torch
from torch import nn

from core.exceptions import (IncompatibleEncodingError, InvalidConfigError, InvalidIndexError,
                             OutOfBoundsError, INCOMPATIBLE_ENCODING_MSG)
from core.model.patching import TokenSequence

DEFAULT_OMEGA_MIN = 1.0
DEFAULT_OMEGA_MAX = 1000.0
DEFAULT_DT_MAX_S = 200e-9  # ~60 m de exceso de camino


class EncodingKind:
    LEARNED = 'learned'
    SPATIAL = 'spatial'
    SPATIAL_TIME = 'spatial_time'
    values = (LEARNED, SPATIAL, SPATIAL_TIME)
    choices = [(v, v) for v in values]


SPATIAL_KINDS = (EncodingKind.SPATIAL, EncodingKind.SPATIAL_TIME)


@dataclass(frozen=True)
class EncodingConfig:
    kind: str = EncodingKind.SPATIAL
    d_model: int = 64
    omega_min: float = DEFAULT_OMEGA_MIN
    omega_max: float = DEFAULT_OMEGA_MAX
    max_seq_len: int = 512
    dt_max: float = DEFAULT_DT_MAX_S
    clamp: bool = False  # True: recorta posiciones fuera del entorno en vez de fallar

    def __post_init__(self):
        if self.kind not in EncodingKind.values:
            raise InvalidConfigError(f"Codificación desconocida: {self.kind}")
        if not 0 < self.omega_min < self.omega_max:
            raise InvalidConfigError("Se requiere 0 < omega_min < omega_max.")
        if self.kind in SPATIAL_KINDS and self.f_bands < 1:
            raise InvalidConfigError(f"d_model={self.d_model} es muy chico para la codificación espacial (6F <= d_model).")
        if self.dt_max <= 0:
            raise InvalidConfigError("dt_max debe ser positivo.")

    @property
    def f_bands(self) -> int:
        # mayor F con 6F <= d_model
        return self.d_model // 6


def frequency_bands(f_bands: int, omega_min: float, omega_max: float) -> torch.Tensor:
    """w_f = w_min (w_max / w_min)^(f / (F - 1)); con F = 1 solo w_min."""
    if omega_min <= 0 or omega_min >= omega_max:
        raise InvalidConfigError("Se requiere 0 < omega_min < omega_max.")
    if f_bands < 1:
        raise InvalidConfigError("Se requiere al menos una banda de frecuencia.")
    if f_bands == 1:
        return torch.tensor([float(omega_min)], dtype=torch.float64)
    f = torch.arange(f_bands, dtype=torch.float64)
    return omega_min * (omega_max / omega_min) ** (f / (f_bands - 1))


def _sin_cos_bands(coord: torch.Tensor, bands: torch.Tensor) -> torch.Tensor:
    """(...,) -> (..., 2F) intercalando [sin(c w_f), cos(c w_f)] por banda."""
    fase = coord.unsqueeze(-1) * bands
    return torch.stack([torch.sin(fase), torch.cos(fase)], dim=-1).flatten(-2)


def _pad_to(x: torch.Tensor, d_model: int) -> torch.Tensor:
    faltan = d_model - x.shape[-1]
    if faltan < 0:
        raise InvalidConfigError(f"La codificación ({x.shape[-1]}) excede d_model={d_model}.")
    return torch.nn.functional.pad(x, (0, faltan))


def spatial_pe(anchor_position, extent, cfg: EncodingConfig) -> torch.Tensor:
    """Posición del ancla (..., 3) -> (..., d_model): 6F valores sinusoidales + ceros a la derecha."""
    pos = torch.as_tensor(anchor_position, dtype=torch.float64)
    ext = torch.as_tensor(extent, dtype=torch.float64, device=pos.device)
    if torch.any(ext <= 0):
        raise InvalidConfigError("La extensión del entorno debe ser positiva.")
    normalizada = pos / ext
    if cfg.clamp:
        normalizada = normalizada.clamp(0.0, 1.0)
    elif torch.any(normalizada < 0) or torch.any(normalizada > 1):
        raise OutOfBoundsError("Posición de ancla fuera de la extensión del entorno.")
    bands = frequency_bands(cfg.f_bands, cfg.omega_min, cfg.omega_max).to(pos.device)
    partes = [_sin_cos_bands(normalizada[..., eje], bands) for eje in range(3)]
    return _pad_to(torch.cat(partes, dim=-1), cfg.d_model)


def time_diff_pe(delta_t, cfg: EncodingConfig) -> torch.Tensor:
    """Diferencia con la recepción más temprana (s) -> (..., d_model), misma construcción en 1 coordenada."""
    dt = torch.as_tensor(delta_t, dtype=torch.float64)
    normalizada = dt.clamp(0.0, cfg.dt_max) / cfg.dt_max
    bands = frequency_bands(cfg.f_bands, cfg.omega_min, cfg.omega_max).to(dt.device)
    return _pad_to(_sin_cos_bands(normalizada, bands), cfg.d_model)


def learned_pe(seq_index: int, table) -> torch.Tensor:
    weight = table.weight if isinstance(table, nn.Embedding) else table
    if not 0 <= int(seq_index) < weight.shape[0]:
        raise InvalidIndexError(f"Índice {seq_index} fuera de la tabla aprendida ({weight.shape[0]} filas).")
    return weight[int(seq_index)]


class PositionalEncoder(nn.Module):
    """
    learned: suma la fila de la tabla según la posición en la secuencia (CLS = fila 0).
    spatial: suma spatial_pe del ancla de origen más una fila aprendida j dentro de la CIR;
    el CLS usa su propia fila aprendida. spatial_time suma además time_diff_pe.
    """

    def __init__(self, cfg: EncodingConfig, extent, n_within: int, max_tokens: int = None):
        super().__init__()
        self.cfg = cfg
        self.register_buffer('extent', torch.as_tensor(extent, dtype=torch.float64).clone())
        if cfg.kind == EncodingKind.LEARNED:
            self.table = nn.Parameter(torch.randn(max_tokens or cfg.max_seq_len, cfg.d_model) * 0.02)
        else:
            self.cls_row = nn.Parameter(torch.randn(cfg.d_model) * 0.02)
            self.within = nn.Parameter(torch.randn(n_within, cfg.d_model) * 0.02)

    def forward(self, ts: TokenSequence) -> TokenSequence:
        return apply_encodings(ts, self)


def apply_encodings(tokens: TokenSequence, encoder: PositionalEncoder) -> TokenSequence:
    cfg = encoder.cfg
    x = tokens.tokens
    n = tokens.n_tokens
    if cfg.kind == EncodingKind.LEARNED:
        if n > encoder.table.shape[0]:
            raise InvalidIndexError(f"Secuencia de {n} tokens supera la tabla aprendida ({encoder.table.shape[0]} filas).")
        return tokens.with_tokens(x + encoder.table[:n].to(x.dtype))

    if not tokens.has_anchor_meta:
        raise IncompatibleEncodingError(INCOMPATIBLE_ENCODING_MSG)
    # las filas ausentes (orden fijo) también reciben su codificación espacial
    enc = spatial_pe(tokens.positions, encoder.extent, cfg)
    within = encoder.within[tokens.within_index.clamp(min=0)]
    enc = enc + within.unsqueeze(0)
    if cfg.kind == EncodingKind.SPATIAL_TIME:
        tiempo = time_diff_pe(tokens.time_offsets, cfg)
        if tokens.present is not None:
            tiempo = tiempo * tokens.present.unsqueeze(-1).to(tiempo.dtype)
        enc = enc + tiempo
    es_cls = (tokens.within_index < 0).view(1, n, 1)
    enc = torch.where(es_cls, encoder.cls_row.view(1, 1, -1).to(enc.dtype), enc)
    return tokens.with_tokens(x + enc.to(x.dtype))
