"""Fine-grained image-text alignment for one pyramid stage.

One module fuses a visual stage map with the three linguistic features:
an object branch (cross-attention onto the ground-object tokens, then a
tanh gate), a spatial-position branch (cross-attention onto the spatial
tokens, reduced to a per-pixel sigmoid prior), context alignment
(pixel-word attention onto the full expression, tanh-gated), and a
squeeze-style channel modulation, all closed by a residual connection so
that zeroed branches leave the visual features untouched.

Visual maps are flattened row-major (H, then W) into attention tokens and
reshaped back, so intermediates are directly comparable across
implementations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import CrossAttention
from .encoders import LinguisticFeatures


def tokens_from_map(x: torch.Tensor) -> torch.Tensor:
    """(B, C, H, W) -> (B, H*W, C), row-major."""
    return x.flatten(2).transpose(1, 2)


def map_from_tokens(x: torch.Tensor, h: int, w: int) -> torch.Tensor:
    """(B, H*W, C) -> (B, C, H, W)."""
    return x.transpose(1, 2).reshape(x.shape[0], x.shape[2], h, w)


class TanhGate(nn.Module):
    """linear -> ReLU -> linear -> tanh, multiplied onto the input feature."""

    def __init__(self, dim: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or dim
        self.fc1 = nn.Linear(dim, hidden)
        self.fc2 = nn.Linear(hidden, dim)

    def gate(self, x: torch.Tensor) -> torch.Tensor:
        return torch.tanh(self.fc2(F.relu(self.fc1(x))))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.gate(x) * x


class SpatialPrior(nn.Module):
    """Per-pixel prior from channel-wise avg/max pooling and a 1x1 conv."""

    def __init__(self):
        super().__init__()
        self.conv = nn.Conv2d(2, 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (B, C, H, W) -> prior (B, 1, H, W) in (0, 1)."""
        pooled = torch.cat(
            [x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1
        )
        return torch.sigmoid(self.conv(pooled))


class ChannelModulation(nn.Module):
    """Squeeze (spatial mean) -> bottleneck -> sigmoid channel weights."""

    def __init__(self, channels: int, reduction: int = 4):
        super().__init__()
        hidden = max(channels // reduction, 1)
        self.fc1 = nn.Linear(channels, hidden)
        self.fc2 = nn.Linear(hidden, channels)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """x: (B, C, H, W) -> weights (B, C), each in (0, 1)."""
        squeezed = x.mean(dim=(2, 3))
        return torch.sigmoid(self.fc2(F.relu(self.fc1(squeezed))))


@dataclass
class FiamOutput:
    fused: torch.Tensor
    intermediates: dict[str, torch.Tensor] = field(default_factory=dict)


class Fiam(nn.Module):
    """Per-stage fusion of visual features with context/object/spatial text.

    Disabling `object_branch` (which implies no spatial branch) and
    `channel_modulation` reduces the module to the vanilla context-only
    alignment used as the ablation baseline.
    """

    def __init__(self, channels: int, text_dim: int, reduction: int = 4,
                 num_heads: int = 1, object_branch: bool = True,
                 spatial_branch: bool = True, channel_modulation: bool = True):
        super().__init__()
        if spatial_branch and not object_branch:
            raise ValueError("spatial branch requires the object branch")
        self.channels = channels
        self.object_branch = object_branch
        self.spatial_branch = spatial_branch
        self.channel_modulation = channel_modulation

        self.context_attn = CrossAttention(channels, text_dim, num_heads=num_heads)
        self.context_gate = TanhGate(channels)
        if object_branch:
            self.object_attn = CrossAttention(channels, text_dim, num_heads=num_heads)
            self.object_gate = TanhGate(channels)
        if spatial_branch:
            self.spatial_attn = CrossAttention(channels, text_dim, num_heads=num_heads)
            self.spatial_prior = SpatialPrior()
        if channel_modulation:
            self.channel_mod = ChannelModulation(channels, reduction)

    def opab(self, f_i: torch.Tensor, f_g: LinguisticFeatures,
             f_s: LinguisticFeatures,
             intermediates: dict | None = None) -> torch.Tensor:
        """Object-position alignment: gated object attention times spatial prior."""
        b, c, h, w = f_i.shape
        queries = tokens_from_map(f_i)
        f_ig = self.object_attn(queries, f_g.embeddings, f_g.mask)
        f_gob = map_from_tokens(self.object_gate(f_ig), h, w)
        if self.spatial_branch:
            f_is = map_from_tokens(
                self.spatial_attn(queries, f_s.embeddings, f_s.mask), h, w
            )
            f_spb = self.spatial_prior(f_is)
            f_opab = f_gob * f_spb
        else:
            f_is = f_spb = None
            f_opab = f_gob
        if intermediates is not None:
            intermediates.update(
                f_ig=map_from_tokens(f_ig, h, w), f_gob=f_gob, f_opab=f_opab
            )
            if f_is is not None:
                intermediates.update(f_is=f_is, f_spb=f_spb)
        return f_opab

    def context_align(self, f_i: torch.Tensor, f_c: LinguisticFeatures,
                      intermediates: dict | None = None) -> torch.Tensor:
        """Pixel-word attention onto the full expression, tanh-gated."""
        b, c, h, w = f_i.shape
        f_ic = self.context_attn(tokens_from_map(f_i), f_c.embeddings, f_c.mask)
        f_ic_hat = map_from_tokens(self.context_gate(f_ic), h, w)
        if intermediates is not None:
            intermediates.update(f_ic=map_from_tokens(f_ic, h, w), f_ic_hat=f_ic_hat)
        return f_ic_hat

    def forward(self, f_i: torch.Tensor, f_c: LinguisticFeatures,
                f_g: LinguisticFeatures, f_s: LinguisticFeatures,
                return_intermediates: bool = False) -> FiamOutput:
        inter: dict | None = {} if return_intermediates else None
        f_io = self.context_align(f_i, f_c, inter)
        if self.object_branch:
            f_io = f_io + self.opab(f_i, f_g, f_s, inter)
        if self.channel_modulation:
            c = self.channel_mod(f_io)
            fused = c[:, :, None, None] * f_io + f_i
        else:
            c = None
            fused = f_io + f_i
        if inter is not None:
            inter["f_io"] = f_io
            if c is not None:
                inter["c"] = c
        return FiamOutput(fused=fused, intermediates=inter or {})
