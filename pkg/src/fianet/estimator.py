"""Scikit-learn style wrapper around the training harness.

ReferringSegmenter exposes fit/predict/score with get_params/set_params so
the model slots into standard hyperparameter tooling; the heavy lifting
stays in the harness module.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator

from .config import RunConfig
from .errors import ShapeError
from .harness import (TripletDataset, TripletRecord, evaluate_model,
                      fragment_tokens, load_checkpoint, train)
from .head import logits_to_mask
from .lexicon import default_spatial_lexicon, synthetic_category_lexicon
from .parsing import decompose


class ReferringSegmenter(BaseEstimator):
    """Fit a referring-segmentation model on a triplet dataset directory.

    Parameters mirror the run-config fields; anything not exposed here
    keeps its config default.
    """

    def __init__(self, epochs=30, lr=1e-3, batch_size=8, seed=0,
                 channels=(32, 64, 128, 256), text_dim=64, image_size=96,
                 fiam=True, tmem="on", dice_weight=0.1, weight_decay=0.1,
                 run_dir=None):
        self.epochs = epochs
        self.lr = lr
        self.batch_size = batch_size
        self.seed = seed
        self.channels = channels
        self.text_dim = text_dim
        self.image_size = image_size
        self.fiam = fiam
        self.tmem = tmem
        self.dice_weight = dice_weight
        self.weight_decay = weight_decay
        self.run_dir = run_dir

    def _config(self, train_dir, val_dir) -> RunConfig:
        return RunConfig(
            train_data=str(train_dir), val_data=str(val_dir or train_dir),
            epochs=self.epochs, lr=self.lr, batch_size=self.batch_size,
            seed=self.seed, channels=tuple(self.channels),
            text_dim=self.text_dim, image_size=self.image_size,
            fiam=self.fiam, tmem=self.tmem, dice_weight=self.dice_weight,
            weight_decay=self.weight_decay,
        )

    def fit(self, X, y=None):
        """X is a dataset directory containing refs.jsonl + images/ + masks/."""
        run_dir = Path(self.run_dir) if self.run_dir else Path(
            tempfile.mkdtemp(prefix="fianet-run-")
        )
        ckpt_dir = train(self._config(X, None), run_dir)
        self.model_, self.vocab_, _ = load_checkpoint(ckpt_dir / "best.pt")
        self.run_dir_ = run_dir
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted; call fit() first")

    @torch.no_grad()
    def predict(self, image: np.ndarray, expression: str) -> np.ndarray:
        """Binary (H, W) mask for one (3, H, W) image in [0, 1]."""
        self._check_fitted()
        image = np.asarray(image, dtype=np.float32)
        if image.ndim != 3 or image.shape[0] != 3:
            raise ShapeError(f"expected a (3, H, W) image, got {image.shape}")
        dec = decompose(expression, synthetic_category_lexicon(),
                        default_spatial_lexicon())
        rec = TripletRecord(image="", mask="", expression=dec.context,
                            ground_object=dec.ground_object,
                            spatial_position=dec.spatial_position,
                            category="unknown")
        c, g, s = fragment_tokens(self.vocab_, rec)
        logits = self.model_(torch.from_numpy(image).unsqueeze(0), [c], [g], [s])
        return logits_to_mask(logits[0])

    def score(self, X, y=None) -> float:
        """Mean IoU in [0, 1] over a dataset directory."""
        self._check_fitted()
        report = evaluate_model(self.model_, self.vocab_, TripletDataset(X),
                                self.batch_size)
        return report.mIoU / 100.0
