"""
Transformer solo-encoder con lectura por CLS y cabeza MLP que corrige la posición TDoA.

Todo el modelo trabaja en float64.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from core.channel.cir import InputTensor, Ordering, build_input_tensor
from core.channel.simulador import Environment, Sample
from core.exceptions import (INCOMPATIBLE_ENCODING_MSG, IncompatibleEncodingError, InsufficientAnchorsError,
                             InsufficientDataError, InvalidArgumentError, InvalidConfigError, NumericError,
                             ShapeError)
from core.model.encodings import SPATIAL_KINDS, EncodingConfig, PositionalEncoder
from core.model.patching import PatchConfig, PatchEmbedding, PatchStrategy, TokenSequence
from core.positioning.baseline import baseline_estimate
from core.positioning.tdoa import PairPolicy

logger = logging.getLogger(__name__)

DTYPE = torch.float64
HEAD_WIDTHS = (256, 128, 64, 3)


@dataclass(frozen=True)
class ModelConfig:
    patch: PatchConfig = field(default_factory=PatchConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    ordering: str = Ordering.TIME_BASED
    d_model: int = 64
    n_layers: int = 4
    n_heads: int = 8
    d_ff: int = 256
    dropout_p: float = 0.15
    head_widths: tuple = HEAD_WIDTHS
    residual_output: bool = True
    zero_init_head: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'head_widths', tuple(int(w) for w in self.head_widths))
        if self.ordering not in Ordering.values:
            raise InvalidConfigError(f"Orden desconocido: {self.ordering}")
        if self.d_model < 1 or self.n_heads < 1 or self.d_model % self.n_heads != 0:
            raise InvalidConfigError(f"d_model={self.d_model} debe ser divisible por n_heads={self.n_heads}.")
        if self.n_layers < 1 or self.d_ff < 1:
            raise InvalidConfigError("n_layers y d_ff deben ser positivos.")
        if not 0.0 <= self.dropout_p < 1.0:
            raise InvalidConfigError("dropout_p debe estar en [0, 1).")
        if not self.head_widths or self.head_widths[-1] != 3:
            raise InvalidConfigError("La última capa de la cabeza debe tener 3 salidas.")
        if self.encoding.d_model != self.d_model:
            raise InvalidConfigError(
                f"La codificación usa d_model={self.encoding.d_model}, el modelo d_model={self.d_model}.")
        if self.encoding.kind in SPATIAL_KINDS and self.patch.strategy == PatchStrategy.MULTI_CIR:
            raise IncompatibleEncodingError(INCOMPATIBLE_ENCODING_MSG)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def pad_to_total(self) -> bool:
        # multi-CIR necesita siempre las N_total filas, también con orden temporal
        return self.patch.strategy == PatchStrategy.MULTI_CIR

    def to_dict(self) -> dict:
        data = asdict(self)
        data['head_widths'] = list(self.head_widths)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'ModelConfig':
        data = dict(data)
        d_model = int(data.get('d_model', 64))
        patch = data.pop('patch', None) or {}
        encoding = data.pop('encoding', None) or {}
        if isinstance(encoding, str):
            encoding = {'kind': encoding}
        encoding = {**encoding, 'd_model': d_model}
        return cls(patch=PatchConfig(**patch), encoding=EncodingConfig(**encoding), **data)


@dataclass
class EncodedSample:
    """Entrada del modelo ya procesada para una muestra: matriz M, metadatos y p_TDoA."""
    sample_id: int
    amplitudes: np.ndarray  # (N, 150)
    present: np.ndarray  # (N,)
    positions: np.ndarray  # (N, 3)
    time_offsets: np.ndarray  # (N,)
    p_tdoa: np.ndarray  # (3,)
    target: np.ndarray  # (3,) ground truth

    @classmethod
    def from_input_tensor(cls, m: InputTensor, p_tdoa, target, sample_id: int = 0) -> 'EncodedSample':
        return cls(sample_id=int(sample_id), amplitudes=m.amplitudes, present=m.present,
                   positions=m.anchor_positions, time_offsets=m.time_offsets(),
                   p_tdoa=np.asarray(p_tdoa, dtype=np.float64), target=np.asarray(target, dtype=np.float64))


@dataclass
class Batch:
    sample_ids: List[int]
    amplitudes: torch.Tensor  # (B, N_max, 150)
    row_mask: torch.Tensor  # (B, N_max) False = fila de relleno del batch
    present: torch.Tensor  # (B, N_max)
    positions: torch.Tensor  # (B, N_max, 3)
    time_offsets: torch.Tensor  # (B, N_max)
    p_tdoa: torch.Tensor  # (B, 3)
    target: torch.Tensor  # (B, 3)

    def __len__(self):
        return len(self.sample_ids)


def collate(samples: Sequence[EncodedSample]) -> Batch:
    """Junta muestras con distinta cantidad de filas rellenando hasta el máximo del batch."""
    if not samples:
        raise InvalidArgumentError("El batch está vacío.")
    B = len(samples)
    n_max = max(s.amplitudes.shape[0] for s in samples)
    ancho = samples[0].amplitudes.shape[1]
    amplitudes = np.zeros((B, n_max, ancho))
    row_mask = np.zeros((B, n_max), dtype=bool)
    present = np.zeros((B, n_max), dtype=bool)
    positions = np.zeros((B, n_max, 3))
    offsets = np.zeros((B, n_max))
    for b, s in enumerate(samples):
        n = s.amplitudes.shape[0]
        amplitudes[b, :n] = s.amplitudes
        row_mask[b, :n] = True
        present[b, :n] = s.present
        positions[b, :n] = s.positions
        offsets[b, :n] = s.time_offsets
    return Batch(
        sample_ids=[s.sample_id for s in samples],
        amplitudes=torch.as_tensor(amplitudes, dtype=DTYPE),
        row_mask=torch.as_tensor(row_mask),
        present=torch.as_tensor(present),
        positions=torch.as_tensor(positions, dtype=DTYPE),
        time_offsets=torch.as_tensor(offsets, dtype=DTYPE),
        p_tdoa=torch.as_tensor(np.stack([s.p_tdoa for s in samples]), dtype=DTYPE),
        target=torch.as_tensor(np.stack([s.target for s in samples]), dtype=DTYPE),
    )


def max_token_count(cfg: ModelConfig, n_total: int) -> int:
    """Cota de tokens por muestra, CLS incluido."""
    if cfg.patch.strategy == PatchStrategy.MULTI_CIR:
        return cfg.patch.k + 1
    return n_total * cfg.patch.k + 1


def attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
              key_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """softmax(Q Kᵀ / √h) V sobre las dos últimas dimensiones; key_mask (..., n_k) excluye claves."""
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"Q y K con anchos distintos: {q.shape[-1]} vs {k.shape[-1]}.")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"K y V con distinta cantidad de filas: {k.shape[-2]} vs {v.shape[-2]}.")
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if key_mask is not None:
        scores = scores.masked_fill(~key_mask.unsqueeze(-2), float('-inf'))
    return torch.softmax(scores, dim=-1) @ v


def _fan_in_init(linear: nn.Linear):
    nn.init.normal_(linear.weight, std=1.0 / math.sqrt(linear.in_features))
    nn.init.zeros_(linear.bias)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        B, n, d = x.shape
        return x.view(B, n, self.n_heads, d // self.n_heads).transpose(1, 2)

    def forward(self, x: torch.Tensor, key_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        B, n, d = x.shape
        mask = key_mask.unsqueeze(1) if key_mask is not None else None  # mismo para todas las cabezas
        ctx = attention(self._split(self.q(x)), self._split(self.k(x)), self._split(self.v(x)), mask)
        return self.out(ctx.transpose(1, 2).reshape(B, n, d))


class EncoderBlock(nn.Module):
    """Post-norm: x = LN(x + Attn(x)); x = LN(x + FF(x))."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int, dropout_p: float):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff1 = nn.Linear(d_model, d_ff)
        self.ff2 = nn.Linear(d_ff, d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.dropout_p = dropout_p

    def forward(self, x: torch.Tensor, key_mask: Optional[torch.Tensor] = None,
                train_mode: bool = False) -> torch.Tensor:
        a = F.dropout(self.attn(x, key_mask), self.dropout_p, training=train_mode)
        x = self.norm1(x + a)
        h = F.dropout(F.relu(self.ff1(x)), self.dropout_p, training=train_mode)
        h = F.dropout(self.ff2(h), self.dropout_p, training=train_mode)
        return self.norm2(x + h)


class TdoaTransformer(nn.Module):
    """
    Modelo completo: parcheo + embedding, codificación posicional, n_layers bloques encoder
    y cabeza de regresión sobre [CLS, p_TDoA normalizada].

    Guarda la extensión del entorno (normaliza p_TDoA y las posiciones de las anclas)
    y N_total (tamaño del parche multi-CIR).
    """

    def __init__(self, cfg: ModelConfig, extent, n_total: int):
        super().__init__()
        self.config = cfg
        self.n_total = int(n_total)
        self.training_history: list = []
        self.register_buffer('extent', torch.as_tensor(np.asarray(extent, dtype=np.float64)).clone())
        self.embedding = PatchEmbedding(cfg.patch, self.n_total, cfg.d_model)
        self.positional = PositionalEncoder(cfg.encoding, np.asarray(extent, dtype=np.float64), cfg.patch.k,
                                            max_tokens=max_token_count(cfg, self.n_total))
        self.layers = nn.ModuleList(
            EncoderBlock(cfg.d_model, cfg.n_heads, cfg.d_ff, cfg.dropout_p) for _ in range(cfg.n_layers))
        anchos = (cfg.d_model + 3,) + cfg.head_widths
        self.head = nn.ModuleList(nn.Linear(a, b) for a, b in zip(anchos[:-1], anchos[1:]))
        self._init_weights()
        self.to(DTYPE)

    def _init_weights(self):
        for modulo in self.modules():
            if isinstance(modulo, nn.Linear):
                _fan_in_init(modulo)
        if self.config.zero_init_head:
            nn.init.zeros_(self.head[-1].weight)
            nn.init.zeros_(self.head[-1].bias)

    def tokens(self, batch: Batch) -> TokenSequence:
        ts = self.embedding(batch.amplitudes, batch.row_mask, batch.positions, batch.time_offsets, batch.present)
        return self.positional(ts)

    def forward(self, batch: Batch) -> torch.Tensor:
        ts = encoder_forward(self.tokens(batch), self, self.training)
        return regression_head(ts.tokens[:, 0], batch.p_tdoa, self)


def encoder_forward(tokens: TokenSequence, model: TdoaTransformer, train_mode: bool = False) -> TokenSequence:
    if tokens.tokens.shape[-1] != model.config.d_model:
        raise ShapeError(f"Tokens de ancho {tokens.tokens.shape[-1]}, el modelo espera {model.config.d_model}.")
    x = tokens.tokens
    for n, layer in enumerate(model.layers):
        x = layer(x, tokens.key_mask, train_mode)
        if not torch.isfinite(x).all():
            raise NumericError(f"Activaciones no finitas en la capa {n} del encoder.")
    return tokens.with_tokens(x)


def regression_head(cls_out: torch.Tensor, p_tdoa: torch.Tensor, model: TdoaTransformer) -> torch.Tensor:
    """MLP (d_model+3)→256→128→64→3; con residual_output devuelve p_TDoA + Δp."""
    p_tdoa = p_tdoa.to(cls_out.dtype)
    h = torch.cat([cls_out, p_tdoa / model.extent.to(cls_out.dtype)], dim=-1)
    for capa in model.head[:-1]:
        h = F.relu(capa(h))
    salida = model.head[-1](h)
    if model.config.residual_output:
        return p_tdoa + salida
    return salida


def build_model(cfg: ModelConfig, env: Environment, seed: Optional[int] = None) -> TdoaTransformer:
    if seed is not None:
        torch.manual_seed(int(seed))
    model = TdoaTransformer(cfg, env.extent, env.n_total)
    logger.debug("Modelo %s/%s/%s d_model=%d con %d parámetros", cfg.patch.strategy, cfg.ordering,
                 cfg.encoding.kind, cfg.d_model, sum(p.numel() for p in model.parameters()))
    return model


def encode_sample(sample: Sample, env: Environment, cfg: ModelConfig, p_tdoa=None,
                  pair_policy: str = PairPolicy.REFERENCE_ANCHOR, fixed_z: Optional[float] = None) -> EncodedSample:
    m = build_input_tensor(sample, env, cfg.ordering, pad_to_total=cfg.pad_to_total)
    if p_tdoa is None:
        p_tdoa = baseline_estimate(sample, env, pair_policy, fixed_z).position
    return EncodedSample.from_input_tensor(m, p_tdoa, sample.true_position, sample.sample_id)


def encode_dataset(samples, env: Environment, cfg: ModelConfig, baseline: Optional[dict] = None,
                   pair_policy: str = PairPolicy.REFERENCE_ANCHOR, fixed_z: Optional[float] = None):
    """
    Procesa el dataset completo. Devuelve (codificadas, ids_omitidos): las muestras sin
    solución TDoA (menos de 3 anclas) se omiten.

    baseline: sample_id -> PositionEstimate ya calculado, para no resolver dos veces.
    """
    codificadas, omitidas = [], []
    for sample in samples:
        p_tdoa = None
        if baseline is not None:
            if sample.sample_id not in baseline:
                omitidas.append(sample.sample_id)
                continue
            p_tdoa = baseline[sample.sample_id].position
        try:
            codificadas.append(encode_sample(sample, env, cfg, p_tdoa, pair_policy, fixed_z))
        except (InsufficientAnchorsError, InsufficientDataError):
            omitidas.append(sample.sample_id)
    return codificadas, omitidas


def predict(model: TdoaTransformer, encoded: Sequence[EncodedSample], batch_size: int = 256) -> np.ndarray:
    """Posiciones corregidas (n, 3) en modo evaluación."""
    if not encoded:
        return np.zeros((0, 3))
    estaba_entrenando = model.training
    model.eval()
    salidas = []
    with torch.no_grad():
        for inicio in range(0, len(encoded), batch_size):
            salidas.append(model(collate(encoded[inicio:inicio + batch_size])).cpu().numpy())
    model.train(estaba_entrenando)
    return np.concatenate(salidas, axis=0)


def forward(sample: Sample, env: Environment, model: TdoaTransformer, p_tdoa=None,
            pair_policy: str = PairPolicy.REFERENCE_ANCHOR, fixed_z: Optional[float] = None) -> np.ndarray:
    """p_corr para una sola muestra."""
    encoded = encode_sample(sample, env, model.config, p_tdoa, pair_policy, fixed_z)
    return predict(model, [encoded])[0]

