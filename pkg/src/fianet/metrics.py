"""IoU-based evaluation: oIoU, mIoU, Pr@X, per-category breakdown."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyEvaluation, ShapeMismatch

PR_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass
class MetricsReport:
    oIoU: float
    mIoU: float
    pr_at: dict[float, float]
    per_category: dict[str, float] = field(default_factory=dict)
    n_samples: int = 0

    def to_dict(self) -> dict:
        return {
            "pr_at": {f"{t:.1f}": self.pr_at[t] for t in PR_THRESHOLDS},
            "oIoU": self.oIoU,
            "mIoU": self.mIoU,
            "per_category": dict(sorted(self.per_category.items())),
            "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        return cls(
            oIoU=data["oIoU"],
            mIoU=data["mIoU"],
            pr_at={float(k): v for k, v in data["pr_at"].items()},
            per_category=dict(data.get("per_category", {})),
            n_samples=data["n_samples"],
        )


def iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """|pred & gt| / |pred | gt|; 1.0 when both masks are empty."""
    if pred.shape != gt.shape:
        raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
    p = np.asarray(pred).astype(bool)
    g = np.asarray(gt).astype(bool)
    union = int(np.logical_or(p, g).sum())
    if union == 0:
        return 1.0
    return int(np.logical_and(p, g).sum()) / union


def aggregate(samples, strict_thresholds: bool = True) -> MetricsReport:
    """Aggregate (pred, gt, category) triples into a MetricsReport.

    oIoU pools intersections/unions over the whole set (large objects weigh
    more); mIoU averages per-sample IoUs; Pr@X counts samples whose IoU
    exceeds X (strictly, unless `strict_thresholds` is False).
    """
    samples = list(samples)
    if not samples:
        raise EmptyEvaluation("no samples to aggregate")
    total_inter = total_union = 0
    ious = []
    by_category: dict[str, list[float]] = {}
    for pred, gt, category in samples:
        if pred.shape != gt.shape:
            raise ShapeMismatch(f"pred {pred.shape} vs gt {gt.shape}")
        p = np.asarray(pred).astype(bool)
        g = np.asarray(gt).astype(bool)
        inter = int(np.logical_and(p, g).sum())
        union = int(np.logical_or(p, g).sum())
        total_inter += inter
        total_union += union
        value = 1.0 if union == 0 else inter / union
        ious.append(value)
        by_category.setdefault(str(category), []).append(value)
    ious_arr = np.asarray(ious)
    compare = np.greater if strict_thresholds else np.greater_equal
    return MetricsReport(
        oIoU=100.0 * (1.0 if total_union == 0 else total_inter / total_union),
        mIoU=100.0 * float(ious_arr.mean()),
        pr_at={t: 100.0 * float(compare(ious_arr, t).mean()) for t in PR_THRESHOLDS},
        per_category={k: 100.0 * float(np.mean(v)) for k, v in by_category.items()},
        n_samples=len(samples),
    )


def report_table(report: MetricsReport, json_path: str | Path | None = None) -> str:
    """Fixed-width text table; optionally also writes report.json."""
    headers = [f"Pr@{t:.1f}" for t in PR_THRESHOLDS] + ["oIoU", "mIoU"]
    values = [report.pr_at[t] for t in PR_THRESHOLDS] + [report.oIoU, report.mIoU]
    lines = [
        "  ".join(f"{h:>7s}" for h in headers),
        "  ".join(f"{v:7.2f}" for v in values),
    ]
    if report.per_category:
        lines.append("")
        lines.append(f"{'category':<24s}{'mIoU':>8s}")
        for name, value in sorted(report.per_category.items()):
            lines.append(f"{name:<24s}{value:8.2f}")
    text = "\n".join(lines) + "\n"
    if json_path is not None:
        Path(json_path).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
    return text
