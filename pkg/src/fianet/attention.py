"""Masked scaled-dot-product cross-attention shared by the fusion modules.

Visual (or grid) tokens act as queries; text tokens supply keys and values.
Padding tokens receive exactly zero attention weight. The equations are
single-head; `num_heads > 1` is available as a configuration knob.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .errors import AllMasked


class CrossAttention(nn.Module):
    """Softmax attention from query tokens onto masked context tokens.

    Query/key logits are scaled by 1/sqrt(attn_dim / num_heads). Values are
    projected to `attn_dim`; when `out_dim` is given an output projection
    maps the attended values back to that width (zero-initializable for
    residual-identity tests), otherwise the attended values are returned
    directly.
    """

    def __init__(self, query_dim: int, context_dim: int, attn_dim: int | None = None,
                 out_dim: int | None = None, num_heads: int = 1):
        super().__init__()
        attn_dim = attn_dim or query_dim
        if attn_dim % num_heads:
            raise ValueError(f"attn_dim {attn_dim} not divisible by {num_heads} heads")
        self.attn_dim = attn_dim
        self.num_heads = num_heads
        self.scale = (attn_dim // num_heads) ** -0.5
        self.w_q = nn.Linear(query_dim, attn_dim, bias=False)
        self.w_k = nn.Linear(context_dim, attn_dim, bias=False)
        self.w_v = nn.Linear(context_dim, attn_dim, bias=False)
        self.w_out = nn.Linear(attn_dim, out_dim) if out_dim is not None else None

    def forward(self, query: torch.Tensor, context: torch.Tensor,
                mask: torch.Tensor) -> torch.Tensor:
        """query: (B, L, query_dim); context: (B, N, context_dim); mask: (B, N)."""
        if not bool(mask.any(dim=1).all()):
            raise AllMasked("cross-attention received a fully padded text sequence")
        b, l, _ = query.shape
        n = context.shape[1]
        h, d = self.num_heads, self.attn_dim // self.num_heads

        q = self.w_q(query).view(b, l, h, d).transpose(1, 2)
        k = self.w_k(context).view(b, n, h, d).transpose(1, 2)
        v = self.w_v(context).view(b, n, h, d).transpose(1, 2)

        logits = torch.matmul(q, k.transpose(-2, -1)) * self.scale
        logits = logits.masked_fill(~mask[:, None, None, :], float("-inf"))
        weights = logits.softmax(dim=-1)
        out = torch.matmul(weights, v).transpose(1, 2).reshape(b, l, self.attn_dim)
        if self.w_out is not None:
            out = self.w_out(out)
        return out

    def attention_weights(self, query: torch.Tensor, context: torch.Tensor,
                          mask: torch.Tensor) -> torch.Tensor:
        """Row-stochastic weights (B, H, L, N); padded columns are exactly 0."""
        if not bool(mask.any(dim=1).all()):
            raise AllMasked("cross-attention received a fully padded text sequence")
        b, l, _ = query.shape
        n = context.shape[1]
        h, d = self.num_heads, self.attn_dim // self.num_heads
        q = self.w_q(query).view(b, l, h, d).transpose(1, 2)
        k = self.w_k(context).view(b, n, h, d).transpose(1, 2)
        logits = torch.matmul(q, k.transpose(-2, -1)) * self.scale
        logits = logits.masked_fill(~mask[:, None, None, :], float("-inf"))
        return logits.softmax(dim=-1)
