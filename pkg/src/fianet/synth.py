"""Deterministic synthetic (image, mask, expression) triplets.

Scenes place 1-4 colored shapes on a 3x3 grid of cells; the referring
expression follows the template "the {color} {shape} [{spatial phrase}]",
with the spatial phrase included only when (color, shape) alone does not
identify the referent. The emitted directory layout and JSONL schema match
what the real-dataset loader consumes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import AmbiguousScene
from .lexicon import default_spatial_lexicon, synthetic_category_lexicon
from .parsing import DecomposedExpression, decompose

SHAPES = ("circle", "square", "triangle")
COLORS = {
    "red": (220, 50, 50),
    "green": (60, 180, 80),
    "blue": (60, 100, 220),
    "yellow": (230, 215, 60),
    "cyan": (70, 200, 210),
    "magenta": (210, 70, 190),
    "orange": (240, 150, 50),
    "purple": (140, 70, 200),
}
SIZES = ("small", "large")
CELL_PHRASES = {
    (0, 0): "in the top left", (0, 1): "in the top", (0, 2): "in the top right",
    (1, 0): "on the left", (1, 1): "in the center", (1, 2): "on the right",
    (2, 0): "in the bottom left", (2, 1): "in the bottom", (2, 2): "in the bottom right",
}
BACKGROUND = 0.08


@dataclass(frozen=True)
class ObjectSpec:
    shape: str
    color: str
    size: str
    cell: tuple[int, int]


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    objects: tuple[ObjectSpec, ...]
    referent: int
    canvas: int = 96

    def validate(self) -> None:
        if not 1 <= len(self.objects) <= 4:
            raise AmbiguousScene("scenes hold 1-4 objects")
        if self.canvas % 32:
            raise AmbiguousScene("canvas size must be divisible by 32")
        if not 0 <= self.referent < len(self.objects):
            raise AmbiguousScene("referent index out of range")
        cells = [o.cell for o in self.objects]
        if len(set(cells)) != len(cells):
            raise AmbiguousScene("objects must occupy distinct cells")
        full = [(o.color, o.shape, o.cell) for o in self.objects]
        if len(set(full)) != len(full):
            raise AmbiguousScene("two objects share an identical full description")
        ref = self.objects[self.referent]
        pair_count = sum(
            1 for o in self.objects if (o.color, o.shape) == (ref.color, ref.shape)
        )
        if pair_count > 1:
            # Spatial phrase must disambiguate.
            phrase_count = sum(
                1 for o in self.objects
                if (o.color, o.shape, o.cell) == (ref.color, ref.shape, ref.cell)
            )
            if phrase_count > 1:
                raise AmbiguousScene("referent description is not unique")


@dataclass
class Triplet:
    image: np.ndarray  # (3, H, W) float32 in [0, 1]
    mask: np.ndarray  # (H, W) uint8 in {0, 1}
    expression: str
    decomposed: DecomposedExpression
    category: str


def _shape_mask(shape: str, canvas: int, cell: tuple[int, int],
                size: str) -> np.ndarray:
    cell_px = canvas // 3
    cy = cell[0] * cell_px + cell_px / 2.0
    cx = cell[1] * cell_px + cell_px / 2.0
    r = cell_px * (0.28 if size == "small" else 0.42)
    yy, xx = np.mgrid[0:canvas, 0:canvas].astype(np.float64)
    yy += 0.5
    xx += 0.5
    if shape == "circle":
        return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    if shape == "square":
        return (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
    if shape == "triangle":
        # Upward triangle: width grows linearly from apex to base.
        inside_y = (yy >= cy - r) & (yy <= cy + r)
        half_width = (yy - (cy - r)) / 2.0
        return inside_y & (np.abs(xx - cx) <= half_width)
    raise ValueError(f"unknown shape {shape!r}")


def build_expression(spec: SceneSpec) -> str:
    ref = spec.objects[spec.referent]
    unique_pair = 1 == sum(
        1 for o in spec.objects if (o.color, o.shape) == (ref.color, ref.shape)
    )
    base = f"the {ref.color} {ref.shape}"
    return base if unique_pair else f"{base} {CELL_PHRASES[ref.cell]}"


def generate(spec: SceneSpec) -> Triplet:
    """Rasterize one scene; deterministic for a given spec."""
    spec.validate()
    image = np.full((3, spec.canvas, spec.canvas), BACKGROUND, dtype=np.float32)
    masks = []
    for obj in spec.objects:
        m = _shape_mask(obj.shape, spec.canvas, obj.cell, obj.size)
        rgb = COLORS[obj.color]
        for ch in range(3):
            image[ch][m] = rgb[ch] / 255.0
        masks.append(m)
    referent_mask = masks[spec.referent].astype(np.uint8)
    expression = build_expression(spec)
    decomposed = decompose(
        expression, synthetic_category_lexicon(), default_spatial_lexicon()
    )
    return Triplet(
        image=image,
        mask=referent_mask,
        expression=expression,
        decomposed=decomposed,
        category=spec.objects[spec.referent].shape,
    )


def sample_scene(rng: np.random.Generator, seed: int, canvas: int = 96,
                 max_objects: int = 3) -> SceneSpec:
    """Draw a valid random scene, resampling on ambiguity."""
    cells = list(CELL_PHRASES)
    for _ in range(64):
        n = int(rng.integers(1, max_objects + 1))
        picked = [cells[i] for i in rng.choice(len(cells), size=n, replace=False)]
        objects = tuple(
            ObjectSpec(
                shape=SHAPES[rng.integers(len(SHAPES))],
                color=list(COLORS)[rng.integers(len(COLORS))],
                size=SIZES[rng.integers(len(SIZES))],
                cell=cell,
            )
            for cell in picked
        )
        spec = SceneSpec(seed=seed, objects=objects, referent=0, canvas=canvas)
        try:
            spec.validate()
        except AmbiguousScene:
            continue
        return spec
    raise AmbiguousScene("could not sample a valid scene")


def generate_split(n: int, seed: int, out_dir: str | Path, canvas: int = 96) -> int:
    """Write n triplets to out_dir/{images,masks}/ plus refs.jsonl."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    rows = []
    for i in range(n):
        sample_seed = seed * 1_000_003 + i
        rng = np.random.default_rng(sample_seed)
        triplet = generate(sample_scene(rng, sample_seed, canvas))
        img_rel = f"images/{i:05d}.png"
        mask_rel = f"masks/{i:05d}.png"
        img8 = (triplet.image.transpose(1, 2, 0) * 255.0).round().astype(np.uint8)
        Image.fromarray(img8).save(out_dir / img_rel)
        Image.fromarray(triplet.mask * 255).save(out_dir / mask_rel)
        rows.append({
            "image": img_rel,
            "mask": mask_rel,
            "expression": triplet.expression,
            "ground_object": triplet.decomposed.ground_object,
            "spatial_position": triplet.decomposed.spatial_position,
            "category": triplet.category,
        })
    lines = "\n".join(json.dumps(r, ensure_ascii=False) for r in rows)
    (out_dir / "refs.jsonl").write_text(lines + "\n", encoding="utf-8")
    return n
