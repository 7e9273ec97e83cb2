"""Toy visual and text encoders behind the backbone interfaces.

The visual encoder is a strided convolution stem plus three downsampling
blocks, producing the four-stage feature pyramid at strides 4/8/16/32. The
text encoder is an embedding table with a learned positional embedding and
a single self-attention block. Both are small enough to train on a laptop
while keeping the tensor contracts of the full-scale backbones.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import EmptyText, ShapeError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
NOPOS_TOKEN = "<nopos>"
_SPECIALS = (PAD_TOKEN, UNK_TOKEN, NOPOS_TOKEN)


class Vocabulary:
    """Fixed whitespace-token vocabulary with an OOV bucket.

    Ids 0..2 are reserved for padding, OOV, and the learned "no position"
    token substituted for empty spatial fragments.
    """

    def __init__(self, tokens):
        self.tokens = list(_SPECIALS) + [t for t in tokens if t not in _SPECIALS]
        self._ids = {t: i for i, t in enumerate(self.tokens)}
        self.pad_id = self._ids[PAD_TOKEN]
        self.unk_id = self._ids[UNK_TOKEN]
        self.nopos_id = self._ids[NOPOS_TOKEN]

    def __len__(self):
        return len(self.tokens)

    @classmethod
    def from_texts(cls, texts) -> "Vocabulary":
        seen = set()
        for text in texts:
            seen.update(text.lower().split())
        return cls(sorted(seen))

    @classmethod
    def from_file(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln for ln in lines if ln and ln not in _SPECIALS])

    def to_file(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.tokens) + "\n", encoding="utf-8")

    def tokenize(self, fragment: str) -> list[int]:
        """Whitespace tokenization; blank input maps to a single OOV token."""
        words = fragment.lower().split()
        if not words:
            return [self.unk_id]
        return [self._ids.get(w, self.unk_id) for w in words]


@dataclass
class LinguisticFeatures:
    """Contextualized token embeddings with a padding mask.

    embeddings: (B, N, D); mask: (B, N) bool, True for real tokens.
    """

    embeddings: torch.Tensor
    mask: torch.Tensor

    def __post_init__(self):
        if self.embeddings.ndim != 3 or self.mask.shape != self.embeddings.shape[:2]:
            raise ShapeError(
                f"embeddings {tuple(self.embeddings.shape)} / mask "
                f"{tuple(self.mask.shape)} do not form a (B, N, D)/(B, N) pair"
            )


@dataclass
class FeaturePyramid:
    """Four visual feature maps at strides 4/8/16/32, each (B, C_i, H_i, W_i)."""

    stages: list[torch.Tensor]

    def __post_init__(self):
        if len(self.stages) != 4:
            raise ShapeError(f"expected 4 stages, got {len(self.stages)}")
        for i in range(1, 4):
            prev, cur = self.stages[i - 1], self.stages[i]
            if (prev.shape[-2] != 2 * cur.shape[-2]
                    or prev.shape[-1] != 2 * cur.shape[-1]):
                raise ShapeError(
                    f"stage {i + 1} spatial dims {tuple(cur.shape[-2:])} do not "
                    f"halve stage {i} dims {tuple(prev.shape[-2:])}"
                )

    @property
    def channels(self) -> tuple[int, ...]:
        return tuple(s.shape[1] for s in self.stages)


def _group_norm(channels: int) -> nn.GroupNorm:
    return nn.GroupNorm(8 if channels % 8 == 0 else 1, channels)


def _conv_block(in_ch: int, out_ch: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1),
        _group_norm(out_ch),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        _group_norm(out_ch),
        nn.ReLU(inplace=True),
    )


class VisualEncoder(nn.Module):
    """Four-block convolutional encoder producing the stride-4..32 pyramid."""

    def __init__(self, channels=(32, 64, 128, 256)):
        super().__init__()
        if len(channels) != 4:
            raise ValueError("channel schedule must have 4 entries")
        self.channels = tuple(channels)
        stem = nn.Sequential(
            nn.Conv2d(3, channels[0], 7, stride=4, padding=3),
            _group_norm(channels[0]),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels[0], channels[0], 3, padding=1),
            _group_norm(channels[0]),
            nn.ReLU(inplace=True),
        )
        self.blocks = nn.ModuleList(
            [stem] + [_conv_block(channels[i - 1], channels[i], 2) for i in (1, 2, 3)]
        )

    def check_input(self, image: torch.Tensor) -> None:
        h, w = image.shape[-2:]
        if h % 32 or w % 32:
            raise ShapeError(f"input spatial dims ({h}, {w}) must be divisible by 32")

    def encode_image(self, image: torch.Tensor) -> FeaturePyramid:
        """Run all blocks without per-stage fusion; image is (B, 3, H, W)."""
        self.check_input(image)
        stages = []
        x = image
        for block in self.blocks:
            x = block(x)
            stages.append(x)
        return FeaturePyramid(stages)

    forward = encode_image


class TextEncoder(nn.Module):
    """Embedding table plus one self-attention block over token sequences."""

    def __init__(self, vocab_size: int, dim: int = 64, max_len: int = 16,
                 num_heads: int = 1):
        super().__init__()
        self.dim = dim
        self.max_len = max_len
        self.embed = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.pos = nn.Parameter(torch.zeros(max_len, dim))
        nn.init.normal_(self.pos, std=0.02)
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, 2 * dim), nn.GELU(), nn.Linear(2 * dim, dim)
        )

    def encode_text(self, sequences, pad_to: int | None = None) -> LinguisticFeatures:
        """Encode a batch of token-id sequences, padded to a common length.

        `sequences` is a list of id lists (a single list is treated as a
        batch of one). Padding positions are False in the returned mask and
        never influence the embeddings of real tokens.
        """
        if sequences and isinstance(sequences[0], int):
            sequences = [sequences]
        if not sequences or any(len(s) == 0 for s in sequences):
            raise EmptyText("text encoder received an empty token sequence")
        longest = max(len(s) for s in sequences)
        if longest > self.max_len:
            raise EmptyText(
                f"sequence length {longest} exceeds max_len {self.max_len}"
            )
        n = pad_to if pad_to is not None else self.max_len
        if n < longest or n > self.max_len:
            raise EmptyText(f"pad_to={n} out of range [{longest}, {self.max_len}]")

        device = self.pos.device
        ids = torch.zeros(len(sequences), n, dtype=torch.long, device=device)
        mask = torch.zeros(len(sequences), n, dtype=torch.bool, device=device)
        for b, seq in enumerate(sequences):
            ids[b, : len(seq)] = torch.as_tensor(seq, device=device)
            mask[b, : len(seq)] = True

        x = self.embed(ids) + self.pos[:n].to(self.embed.weight.dtype)
        h = self.norm1(x)
        attn_out, _ = self.attn(h, h, h, key_padding_mask=~mask, need_weights=False)
        x = x + attn_out
        x = x + self.mlp(self.norm2(x))
        # Zero the padding rows so downstream consumers cannot read them.
        x = x * mask.unsqueeze(-1)
        return LinguisticFeatures(embeddings=x, mask=mask)

    forward = encode_text
