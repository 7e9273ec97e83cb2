"""Text-aware multi-scale enhancement over the fused feature pyramid.

The four stage maps are average-pooled to the coarsest grid, concatenated
along channels, run through a stack of pre-norm text-attention blocks, then
split back per stage, upsampled, and blended with the original stages by a
learned scale-aware gate.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import CrossAttention
from .encoders import FeaturePyramid, LinguisticFeatures
from .errors import ShapeError
from .fiam import map_from_tokens, tokens_from_map


def pool_and_concat(pyramid: FeaturePyramid) -> torch.Tensor:
    """Average-pool every stage to stage-4's grid and concatenate channels."""
    target = pyramid.stages[3].shape[-2:]
    pooled = []
    for i, stage in enumerate(pyramid.stages):
        h, w = stage.shape[-2:]
        if h % target[0] or w % target[1]:
            raise ShapeError(
                f"stage {i + 1} grid ({h}, {w}) is not a multiple of {tuple(target)}"
            )
        ratio = (h // target[0], w // target[1])
        pooled.append(
            stage if ratio == (1, 1)
            else F.avg_pool2d(stage, kernel_size=ratio, stride=ratio)
        )
    return torch.cat(pooled, dim=1)


class TmemBlock(nn.Module):
    """Pre-norm text-attention block with a two-layer GELU MLP.

    z' = Attention(LN(z), text) + z;  z_out = MLP(LN(z')) + z'.
    """

    def __init__(self, model_dim: int, text_dim: int, attn_dim: int,
                 num_heads: int = 1, mlp_ratio: int = 2):
        super().__init__()
        self.norm1 = nn.LayerNorm(model_dim)
        self.attn = CrossAttention(model_dim, text_dim, attn_dim=attn_dim,
                                   out_dim=model_dim, num_heads=num_heads)
        self.norm2 = nn.LayerNorm(model_dim)
        self.mlp = nn.Sequential(
            nn.Linear(model_dim, mlp_ratio * model_dim),
            nn.GELU(),
            nn.Linear(mlp_ratio * model_dim, model_dim),
        )

    def forward(self, z: torch.Tensor, f_c: LinguisticFeatures) -> torch.Tensor:
        z = self.attn(self.norm1(z), f_c.embeddings, f_c.mask) + z
        return self.mlp(self.norm2(z)) + z


class ScaleGate(nn.Module):
    """Per-stage per-channel sigmoid blend of enhanced and original features."""

    def __init__(self, channels: int):
        super().__init__()
        self.proj = nn.Conv2d(2 * channels, channels, 1)

    def forward(self, enhanced: torch.Tensor, original: torch.Tensor) -> torch.Tensor:
        g = torch.sigmoid(self.proj(torch.cat([enhanced, original], dim=1)))
        return g * enhanced + (1.0 - g) * original


class Tmem(nn.Module):
    """L_N text-attention blocks over the pooled multi-scale grid."""

    def __init__(self, channels: tuple[int, ...], text_dim: int, attn_dim: int = 64,
                 num_blocks: int = 2, num_heads: int = 1, mlp_ratio: int = 2,
                 pos_embed_grid: tuple[int, int] | None = (3, 3),
                 upsample_mode: str = "nearest"):
        super().__init__()
        if num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        self.channels = tuple(channels)
        self.model_dim = sum(channels)
        self.upsample_mode = upsample_mode
        self.blocks = nn.ModuleList(
            TmemBlock(self.model_dim, text_dim, attn_dim, num_heads, mlp_ratio)
            for _ in range(num_blocks)
        )
        if pos_embed_grid is not None:
            gh, gw = pos_embed_grid
            self.pos_embed = nn.Parameter(torch.zeros(1, self.model_dim, gh, gw))
            nn.init.normal_(self.pos_embed, std=0.02)
        else:
            self.pos_embed = None
        self.gates = nn.ModuleList(ScaleGate(c) for c in channels)

    def _positional(self, grid: tuple[int, int]) -> torch.Tensor:
        pe = self.pos_embed
        if pe.shape[-2:] != grid:
            pe = F.interpolate(pe, size=grid, mode="bilinear", align_corners=False)
        return pe

    def enhance_grid(self, z_cat: torch.Tensor, f_c: LinguisticFeatures,
                     collect: list | None = None) -> torch.Tensor:
        """Run the block stack on the concatenated grid (B, sum(C), H4, W4)."""
        h, w = z_cat.shape[-2:]
        if self.pos_embed is not None:
            z_cat = z_cat + self._positional((h, w))
        z = tokens_from_map(z_cat)
        if collect is not None:
            collect.append(z)
        for block in self.blocks:
            z = block(z, f_c)
            if collect is not None:
                collect.append(z)
        return map_from_tokens(z, h, w)

    def split_and_upsample(self, z_map: torch.Tensor,
                           pyramid: FeaturePyramid) -> FeaturePyramid:
        """Split channels per stage, upsample, and gate against the originals."""
        if z_map.shape[1] != self.model_dim:
            raise ShapeError(
                f"enhanced grid has {z_map.shape[1]} channels, expected "
                f"{self.model_dim}"
            )
        if pyramid.channels != self.channels:
            raise ShapeError(
                f"pyramid channels {pyramid.channels} do not match {self.channels}"
            )
        chunks = torch.split(z_map, list(self.channels), dim=1)
        out = []
        for chunk, stage, gate in zip(chunks, pyramid.stages, self.gates):
            if chunk.shape[-2:] != stage.shape[-2:]:
                chunk = F.interpolate(chunk, size=stage.shape[-2:],
                                      mode=self.upsample_mode)
            out.append(gate(chunk, stage))
        return FeaturePyramid(out)

    def forward(self, pyramid: FeaturePyramid,
                f_c: LinguisticFeatures) -> FeaturePyramid:
        z = self.enhance_grid(pool_and_concat(pyramid), f_c)
        return self.split_and_upsample(z, pyramid)


class ChannelMixStub(nn.Module):
    """Text-free multi-scale baseline: a 1x1 conv mixer on the pooled grid.

    Stands in for heavier cross-intersection designs in ablations; shares
    the pool/split/gate plumbing with Tmem.
    """

    def __init__(self, channels: tuple[int, ...], upsample_mode: str = "nearest"):
        super().__init__()
        self.channels = tuple(channels)
        dim = sum(channels)
        self.mix = nn.Sequential(
            nn.Conv2d(dim, dim, 1), nn.ReLU(inplace=True), nn.Conv2d(dim, dim, 1)
        )
        self.upsample_mode = upsample_mode
        self.gates = nn.ModuleList(ScaleGate(c) for c in channels)

    def forward(self, pyramid: FeaturePyramid,
                f_c: LinguisticFeatures | None = None) -> FeaturePyramid:
        z = pool_and_concat(pyramid)
        z = z + self.mix(z)
        chunks = torch.split(z, list(self.channels), dim=1)
        out = []
        for chunk, stage, gate in zip(chunks, pyramid.stages, self.gates):
            if chunk.shape[-2:] != stage.shape[-2:]:
                chunk = F.interpolate(chunk, size=stage.shape[-2:],
                                      mode=self.upsample_mode)
            out.append(gate(chunk, stage))
        return FeaturePyramid(out)
