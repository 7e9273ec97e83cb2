"""Segmentation decoder and the combined cross-entropy / dice loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .encoders import FeaturePyramid
from .errors import ShapeMismatch

DICE_SMOOTH = 1.0  # prevents 0/0 on empty masks


@dataclass
class LossReport:
    total: float
    ce: float
    dice: float
    dice_weight: float


class Decoder(nn.Module):
    """Progressive top-down decoder: lateral 1x1 projections, upsample-add,
    then a 1-channel logit map restored to input resolution."""

    def __init__(self, channels: tuple[int, ...], width: int = 64):
        super().__init__()
        self.laterals = nn.ModuleList(nn.Conv2d(c, width, 1) for c in channels)
        self.smooth = nn.Conv2d(width, width, 3, padding=1)
        self.logit = nn.Conv2d(width, 1, 1)

    def forward(self, pyramid: FeaturePyramid) -> torch.Tensor:
        """Returns logits (B, H, W) at 4x the stride-4 stage resolution."""
        x = self.laterals[3](pyramid.stages[3])
        for i in (2, 1, 0):
            x = F.interpolate(x, size=pyramid.stages[i].shape[-2:],
                              mode="bilinear", align_corners=False)
            x = x + self.laterals[i](pyramid.stages[i])
        x = F.relu(self.smooth(x)) + x
        logits = self.logit(x)
        h, w = pyramid.stages[0].shape[-2:]
        logits = F.interpolate(logits, size=(4 * h, 4 * w), mode="bilinear",
                               align_corners=False)
        return logits.squeeze(1)


def segmentation_loss(logits: torch.Tensor, gt: torch.Tensor,
                      dice_weight: float = 0.1) -> tuple[torch.Tensor, LossReport]:
    """Pixelwise BCE plus weighted dice on sigmoid probabilities.

    `logits` and `gt` are (H, W) or (B, H, W); gt is a hard {0,1} mask.
    Returns the differentiable total and a detached LossReport.
    """
    if logits.shape != gt.shape:
        raise ShapeMismatch(
            f"logits {tuple(logits.shape)} vs ground truth {tuple(gt.shape)}"
        )
    if logits.ndim == 2:
        logits, gt = logits.unsqueeze(0), gt.unsqueeze(0)
    gt = gt.to(logits.dtype)
    ce = F.binary_cross_entropy_with_logits(logits, gt)
    p = torch.sigmoid(logits)
    inter = (p * gt).sum(dim=(1, 2))
    denom = p.sum(dim=(1, 2)) + gt.sum(dim=(1, 2))
    dice = (1.0 - (2.0 * inter + DICE_SMOOTH) / (denom + DICE_SMOOTH)).mean()
    total = ce + dice_weight * dice
    report = LossReport(total=total.detach().item(), ce=ce.detach().item(),
                        dice=dice.detach().item(), dice_weight=dice_weight)
    return total, report


def logits_to_mask(logits: torch.Tensor, threshold: float = 0.5) -> np.ndarray:
    """Hard {0,1} uint8 mask from a logit map."""
    probs = torch.sigmoid(logits.detach())
    return (probs >= threshold).cpu().numpy().astype(np.uint8)
