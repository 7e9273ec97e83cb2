"""End-to-end segmentation model: encoders, per-stage fusion, multi-scale
enhancement, and the decoder, wired per the forward-pass pipeline with all
ablation toggles."""

from __future__ import annotations

import torch
import torch.nn as nn

from .config import RunConfig
from .encoders import FeaturePyramid, LinguisticFeatures, TextEncoder, VisualEncoder
from .fiam import Fiam
from .head import Decoder
from .tmem import ChannelMixStub, Tmem


class FianetModel(nn.Module):
    """Referring-segmentation network with fiam/tmem ablation switches.

    forward() takes a (B, 3, H, W) image batch and the three tokenized text
    fragments and returns (B, H, W) logits.
    """

    def __init__(self, config: RunConfig, vocab_size: int):
        super().__init__()
        self.config = config
        self.visual = VisualEncoder(config.channels)
        self.text = TextEncoder(vocab_size, config.text_dim,
                                max_len=config.max_text_len,
                                num_heads=config.num_heads)
        # With fiam off, each stage falls back to context-only alignment
        # (the vanilla baseline); branch toggles only apply when fiam is on.
        object_branch = config.fiam and config.object_branch
        spatial_branch = config.fiam and config.spatial_branch
        channel_mod = config.fiam and config.channel_modulation
        self.fiams = nn.ModuleList(
            Fiam(c, config.text_dim, reduction=config.reduction,
                 num_heads=config.num_heads, object_branch=object_branch,
                 spatial_branch=spatial_branch, channel_modulation=channel_mod)
            for c in config.channels
        )
        grid = config.image_size // 32
        if config.tmem == "on":
            self.tmem = Tmem(config.channels, config.text_dim,
                             attn_dim=config.tmem_width,
                             num_blocks=config.tmem_blocks,
                             num_heads=config.num_heads,
                             pos_embed_grid=(grid, grid) if config.tmem_pos_embed
                             else None)
        elif config.tmem == "cim-stub":
            self.tmem = ChannelMixStub(config.channels)
        else:
            self.tmem = None
        self.decoder = Decoder(config.channels, width=config.decoder_width)

    def encode_fragments(
        self, context, ground, spatial
    ) -> tuple[LinguisticFeatures, LinguisticFeatures, LinguisticFeatures]:
        """Encode the three per-batch token-id lists with shared weights."""
        return (
            self.text.encode_text(context, pad_to=_longest(context)),
            self.text.encode_text(ground, pad_to=_longest(ground)),
            self.text.encode_text(spatial, pad_to=_longest(spatial)),
        )

    def fuse_stages(self, image: torch.Tensor, f_c: LinguisticFeatures,
                    f_g: LinguisticFeatures,
                    f_s: LinguisticFeatures) -> FeaturePyramid:
        self.visual.check_input(image)
        stages = []
        x = image
        for block, fiam in zip(self.visual.blocks, self.fiams):
            x = block(x)
            x = fiam(x, f_c, f_g, f_s).fused
            stages.append(x)
        return FeaturePyramid(stages)

    def forward(self, image: torch.Tensor, context, ground, spatial) -> torch.Tensor:
        f_c, f_g, f_s = self.encode_fragments(context, ground, spatial)
        pyramid = self.fuse_stages(image, f_c, f_g, f_s)
        if self.tmem is not None:
            pyramid = self.tmem(pyramid, f_c)
        return self.decoder(pyramid)


def _longest(sequences) -> int:
    return max(len(s) for s in sequences)
