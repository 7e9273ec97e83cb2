"""Fine-grained image-text alignment for referring image segmentation,
at desk scale: expression decomposition, per-stage cross-modal fusion,
text-aware multi-scale enhancement, metrics, and a synthetic-data harness.
"""

from .config import RunConfig
from .encoders import (FeaturePyramid, LinguisticFeatures, TextEncoder,
                       VisualEncoder, Vocabulary)
from .estimator import ReferringSegmenter
from .lexicon import CategoryLexicon, SpatialLexicon
from .metrics import MetricsReport, aggregate, iou
from .model import FianetModel
from .parsing import DecomposedExpression, decompose, decompose_corpus

__all__ = [
    "CategoryLexicon", "SpatialLexicon", "DecomposedExpression",
    "decompose", "decompose_corpus", "Vocabulary", "TextEncoder",
    "VisualEncoder", "FeaturePyramid", "LinguisticFeatures", "FianetModel",
    "RunConfig", "MetricsReport", "iou", "aggregate", "ReferringSegmenter",
]

__version__ = "0.1.0"
