"""Parcheo de la matriz M y embedding lineal de los parches a tokens de d_model."""
from dataclasses import dataclass, replace
from typing import Optional

import torch
from torch import nn

from core.channel.cir import WINDOW_LENGTH, InputTensor
from core.exceptions import IncompatibleOrderingError, InvalidConfigError, ShapeError


class PatchStrategy:
    MULTI_CIR = 'multi_cir'
    PER_CIR = 'per_cir'
    values = (MULTI_CIR, PER_CIR)
    choices = [(v, v) for v in values]


@dataclass(frozen=True)
class PatchConfig:
    strategy: str = PatchStrategy.PER_CIR
    l_patch: int = 150

    def __post_init__(self):
        patch_count(self.l_patch)
        if self.strategy not in PatchStrategy.values:
            raise InvalidConfigError(f"Estrategia de parcheo desconocida: {self.strategy}")

    @property
    def k(self) -> int:
        return patch_count(self.l_patch)

    def patch_size(self, n_total: int) -> int:
        if self.strategy == PatchStrategy.MULTI_CIR:
            return n_total * self.l_patch
        return self.l_patch


@dataclass
class TokenSequence:
    """
    Tokens (B, n, d_model) con el CLS en la posición 0 y metadatos por token.

    positions/time_offsets solo tienen sentido con per-CIR (has_anchor_meta); en multi-CIR
    quedan en cero. key_mask marca los tokens válidos (False = relleno del batch).
    """
    tokens: torch.Tensor
    positions: torch.Tensor  # (B, n, 3)
    time_offsets: torch.Tensor  # (B, n)
    within_index: torch.Tensor  # (n,) j dentro de la CIR, -1 para el CLS
    row_index: torch.Tensor  # (n,) i fila de M, -1 para el CLS
    key_mask: torch.Tensor  # (B, n) bool
    has_anchor_meta: bool = False
    present: Optional[torch.Tensor] = None  # (B, n) bool, fila recibida por el ancla

    @property
    def n_tokens(self) -> int:
        return int(self.tokens.shape[1])

    def with_tokens(self, tokens: torch.Tensor) -> 'TokenSequence':
        return replace(self, tokens=tokens)


def patch_count(l_patch: int) -> int:
    if int(l_patch) <= 0 or WINDOW_LENGTH % int(l_patch) != 0:
        raise InvalidConfigError(f"L_patch={l_patch} no divide {WINDOW_LENGTH}.")
    return WINDOW_LENGTH // int(l_patch)


def patch_index(k: int, n_patches_per_cir: int) -> tuple:
    """(i, j) del parche k en per-CIR: i = k // K, j = k mod K."""
    return k // n_patches_per_cir, k % n_patches_per_cir


def split_multi_cir(rows: torch.Tensor, l_patch: int) -> torch.Tensor:
    """(..., N, 150) -> (..., K, N*L): el parche k son las columnas [k*L, (k+1)*L) de todas las filas."""
    K = patch_count(l_patch)
    n = rows.shape[-2]
    lead = rows.shape[:-2]
    parches = rows.reshape(*lead, n, K, l_patch).transpose(-3, -2)
    return parches.reshape(*lead, K, n * l_patch)


def split_per_cir(rows: torch.Tensor, l_patch: int) -> torch.Tensor:
    """(..., N, 150) -> (..., N*K, L) en orden fila-mayor."""
    K = patch_count(l_patch)
    n = rows.shape[-2]
    return rows.reshape(*rows.shape[:-2], n * K, l_patch)


def _as_tensor(m: InputTensor) -> torch.Tensor:
    return torch.as_tensor(m.amplitudes, dtype=torch.float64)


def patch_multi_cir(m: InputTensor, l_patch: int) -> torch.Tensor:
    patch_count(l_patch)
    if not m.padded:
        raise IncompatibleOrderingError(
            "Multi-CIR requiere las N_total filas (con ceros); no es compatible con eliminar las anclas no disponibles.")
    return split_multi_cir(_as_tensor(m), l_patch)


def patch_per_cir(m: InputTensor, l_patch: int) -> torch.Tensor:
    return split_per_cir(_as_tensor(m), l_patch)


def embed_patches(patches: torch.Tensor, weights: nn.Linear, cls_vector: torch.Tensor,
                  meta: Optional[dict] = None) -> TokenSequence:
    """token_k = W·patch_k + b, con el CLS antepuesto. Acepta (n, P) o (B, n, P)."""
    sin_batch = patches.dim() == 2
    if sin_batch:
        patches = patches.unsqueeze(0)
    if patches.shape[-1] != weights.in_features:
        raise ShapeError(f"Parches de tamaño {patches.shape[-1]}, el embedding espera {weights.in_features}.")
    B, n, _ = patches.shape
    tokens = weights(patches.to(weights.weight.dtype))
    cls = cls_vector.reshape(1, 1, -1).expand(B, 1, -1)
    tokens = torch.cat([cls, tokens], dim=1)

    meta = meta or {}
    dtype, device = tokens.dtype, tokens.device
    positions = meta.get('positions', torch.zeros(B, n, 3, dtype=dtype, device=device))
    time_offsets = meta.get('time_offsets', torch.zeros(B, n, dtype=dtype, device=device))
    key_mask = meta.get('key_mask', torch.ones(B, n, dtype=torch.bool, device=device))
    within = meta.get('within_index', torch.arange(n, device=device))
    rows = meta.get('row_index', torch.full((n,), -1, dtype=torch.long, device=device))
    menos_uno = torch.full((1,), -1, dtype=torch.long, device=device)
    return TokenSequence(
        tokens=tokens,
        positions=torch.cat([torch.zeros(B, 1, 3, dtype=dtype, device=device), positions.to(dtype)], dim=1),
        time_offsets=torch.cat([torch.zeros(B, 1, dtype=dtype, device=device), time_offsets.to(dtype)], dim=1),
        within_index=torch.cat([menos_uno, within.to(torch.long)]),
        row_index=torch.cat([menos_uno, rows.to(torch.long)]),
        key_mask=torch.cat([torch.ones(B, 1, dtype=torch.bool, device=device), key_mask], dim=1),
        has_anchor_meta=bool(meta.get('has_anchor_meta', False)),
        present=(torch.cat([torch.ones(B, 1, dtype=torch.bool, device=device), meta['present']], dim=1)
                 if 'present' in meta else None),
    )


class PatchEmbedding(nn.Module):
    """Una sola matriz de embedding por configuración (el tamaño de parche es fijo en una corrida)."""

    def __init__(self, cfg: PatchConfig, n_total: int, d_model: int):
        super().__init__()
        self.cfg = cfg
        self.n_total = n_total
        self.linear = nn.Linear(cfg.patch_size(n_total), d_model)
        self.cls = nn.Parameter(torch.randn(d_model) * 0.02)

    def forward(self, amplitudes: torch.Tensor, row_mask: torch.Tensor, positions: torch.Tensor,
                time_offsets: torch.Tensor, present: torch.Tensor) -> TokenSequence:
        """amplitudes (B, N, 150), row_mask y present (B, N), positions (B, N, 3), time_offsets (B, N)."""
        L, K = self.cfg.l_patch, self.cfg.k
        device = amplitudes.device
        if self.cfg.strategy == PatchStrategy.MULTI_CIR:
            if amplitudes.shape[1] != self.n_total:
                raise IncompatibleOrderingError(
                    f"Multi-CIR espera {self.n_total} filas (con ceros), se recibieron {amplitudes.shape[1]}.")
            parches = split_multi_cir(amplitudes, L)
            meta = {'within_index': torch.arange(K, device=device)}
        else:
            N = amplitudes.shape[1]
            parches = split_per_cir(amplitudes, L)
            meta = {
                'positions': positions.repeat_interleave(K, dim=1),
                'time_offsets': time_offsets.repeat_interleave(K, dim=1),
                'key_mask': row_mask.repeat_interleave(K, dim=1),
                'present': present.repeat_interleave(K, dim=1),
                'within_index': torch.arange(K, device=device).repeat(N),
                'row_index': torch.arange(N, device=device).repeat_interleave(K),
                'has_anchor_meta': True,
            }
        return embed_patches(parches, self.linear, self.cls, meta)
