"""Training, evaluation, and ablation orchestration plus checkpoint I/O.

Run directory layout: config.snapshot, vocab.txt, ckpt/, report.json,
masks/, debug/.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import RunConfig
from .encoders import Vocabulary
from .errors import EmptyEvaluation, FianetError
from .head import logits_to_mask, segmentation_loss
from .metrics import MetricsReport, aggregate, report_table
from .model import FianetModel

log = logging.getLogger(__name__)


@dataclass
class TripletRecord:
    image: str
    mask: str
    expression: str
    ground_object: str
    spatial_position: str
    category: str


class TripletDataset:
    """Loads the JSONL triplet layout shared by synthetic and real data.

    Expects refs.jsonl rows already annotated with ground_object and
    spatial_position (run the `parse` command first for raw corpora).
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        refs = self.root / "refs.jsonl"
        if not refs.exists():
            raise FileNotFoundError(f"no refs.jsonl under {self.root}")
        self.records: list[TripletRecord] = []
        for line in refs.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            row = json.loads(line)
            if "ground_object" not in row or "spatial_position" not in row:
                raise FianetError(
                    f"{refs}: records lack decomposed fragments; run `fianet "
                    "parse` on the corpus first"
                )
            self.records.append(TripletRecord(
                image=row["image"], mask=row["mask"],
                expression=row["expression"],
                ground_object=row["ground_object"],
                spatial_position=row["spatial_position"],
                category=row.get("category", "unknown"),
            ))

    def __len__(self):
        return len(self.records)

    def load(self, index: int) -> tuple[torch.Tensor, torch.Tensor, TripletRecord]:
        rec = self.records[index]
        img = np.asarray(Image.open(self.root / rec.image).convert("RGB"),
                         dtype=np.float32) / 255.0
        mask = np.asarray(Image.open(self.root / rec.mask).convert("L"))
        image = torch.from_numpy(img.transpose(2, 0, 1))
        gt = torch.from_numpy((mask > 127).astype(np.float32))
        return image, gt, rec

    def texts(self):
        for rec in self.records:
            yield rec.expression
            yield rec.ground_object
            yield rec.spatial_position


def fragment_tokens(vocab: Vocabulary, rec: TripletRecord):
    """Token-id lists for (context, ground object, spatial position).

    An empty spatial fragment maps to the learned no-position token so the
    spatial branch stays well-defined.
    """
    context = vocab.tokenize(rec.expression)
    ground = vocab.tokenize(rec.ground_object)
    if rec.spatial_position.strip():
        spatial = vocab.tokenize(rec.spatial_position)
    else:
        spatial = [vocab.nopos_id]
    return context, ground, spatial


def _batch(dataset: TripletDataset, vocab: Vocabulary, indices):
    images, gts, contexts, grounds, spatials, cats = [], [], [], [], [], []
    for i in indices:
        image, gt, rec = dataset.load(int(i))
        c, g, s = fragment_tokens(vocab, rec)
        images.append(image)
        gts.append(gt)
        contexts.append(c)
        grounds.append(g)
        spatials.append(s)
        cats.append(rec.category)
    return (torch.stack(images), torch.stack(gts), contexts, grounds,
            spatials, cats)


def save_checkpoint(path: str | Path, model: FianetModel, vocab: Vocabulary,
                    optimizer=None, epoch: int = 0, history=None) -> None:
    payload = {
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "epoch": epoch,
        "config": model.config.to_dict(),
        "vocab": vocab.tokens,
        "history": history or [],
    }
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[FianetModel, Vocabulary, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = RunConfig.from_dict(payload["config"])
    vocab = Vocabulary(payload["vocab"][3:])  # specials are re-prepended
    model = FianetModel(config, len(vocab))
    model.load_state_dict(payload["model"])
    model.eval()
    return model, vocab, payload


def _lr_factor(schedule: str, step: int, total: int) -> float:
    if schedule == "poly":
        return (1.0 - step / max(total, 1)) ** 0.9
    return 1.0


def train(config: RunConfig, out_dir: str | Path) -> Path:
    """Train per config, checkpointing the best-mIoU epoch; returns ckpt dir."""
    out_dir = Path(out_dir)
    (out_dir / "ckpt").mkdir(parents=True, exist_ok=True)
    (out_dir / "debug").mkdir(parents=True, exist_ok=True)
    config.to_file(out_dir / "config.snapshot")

    torch.manual_seed(config.seed)
    train_ds = TripletDataset(config.train_data)
    val_ds = TripletDataset(config.val_data) if config.val_data else None
    vocab = Vocabulary.from_texts(train_ds.texts())
    vocab.to_file(out_dir / "vocab.txt")

    model = FianetModel(config, len(vocab))
    optimizer = torch.optim.AdamW(model.parameters(), lr=config.lr,
                                  weight_decay=config.weight_decay)

    n = len(train_ds)
    steps_per_epoch = max(1, (n + config.batch_size - 1) // config.batch_size)
    total_steps = steps_per_epoch * config.epochs
    history = []
    best_miou = -1.0
    step = 0
    for epoch in range(config.epochs):
        model.train()
        order = torch.randperm(
            n, generator=torch.Generator().manual_seed(config.seed + epoch)
        ).tolist()
        epoch_losses = []
        for start in range(0, n, config.batch_size):
            images, gts, ctx, grd, spa, _ = _batch(
                train_ds, vocab, order[start:start + config.batch_size]
            )
            factor = _lr_factor(config.lr_schedule, step, total_steps)
            for group in optimizer.param_groups:
                group["lr"] = config.lr * factor
            optimizer.zero_grad()
            logits = model(images, ctx, grd, spa)
            loss, report = segmentation_loss(logits, gts, config.dice_weight)
            if not torch.isfinite(loss):
                torch.save({"images": images, "gts": gts, "step": step,
                            "report": report.__dict__},
                           out_dir / "debug" / "nonfinite_batch.pt")
                raise FianetError(
                    f"non-finite loss at step {step}; batch dumped to debug/"
                )
            loss.backward()
            optimizer.step()
            epoch_losses.append(report)
            step += 1
        entry = {
            "epoch": epoch,
            "loss": float(np.mean([r.total for r in epoch_losses])),
            "ce": float(np.mean([r.ce for r in epoch_losses])),
            "dice": float(np.mean([r.dice for r in epoch_losses])),
        }
        if val_ds is not None:
            val_report = evaluate_model(model, vocab, val_ds, config.batch_size)
            entry["val_mIoU"] = val_report.mIoU
            entry["val_oIoU"] = val_report.oIoU
            if val_report.mIoU > best_miou:
                best_miou = val_report.mIoU
                save_checkpoint(out_dir / "ckpt" / "best.pt", model, vocab,
                                optimizer, epoch, history + [entry])
        history.append(entry)
        log.info("epoch %d: %s", epoch, entry)
    save_checkpoint(out_dir / "ckpt" / "last.pt", model, vocab, optimizer,
                    config.epochs - 1, history)
    (out_dir / "history.json").write_text(
        json.dumps(history, indent=2) + "\n", encoding="utf-8"
    )
    return out_dir / "ckpt"


@torch.no_grad()
def evaluate_model(model: FianetModel, vocab: Vocabulary, dataset: TripletDataset,
                   batch_size: int = 8, masks_dir: str | Path | None = None
                   ) -> MetricsReport:
    if len(dataset) == 0:
        raise EmptyEvaluation("evaluation dataset is empty")
    was_training = model.training
    model.eval()
    samples = []
    for start in range(0, len(dataset), batch_size):
        indices = range(start, min(start + batch_size, len(dataset)))
        images, gts, ctx, grd, spa, cats = _batch(dataset, vocab, indices)
        logits = model(images, ctx, grd, spa)
        for b, index in enumerate(indices):
            pred = logits_to_mask(logits[b])
            gt = gts[b].numpy().astype(np.uint8)
            samples.append((pred, gt, cats[b]))
            if masks_dir is not None:
                Path(masks_dir).mkdir(parents=True, exist_ok=True)
                Image.fromarray(pred * 255).save(
                    Path(masks_dir) / f"{index:05d}.png"
                )
    if was_training:
        model.train()
    return aggregate(samples)


def evaluate(ckpt_path: str | Path, data_dir: str | Path, out_dir: str | Path,
             save_masks: bool = False) -> MetricsReport:
    """Load a checkpoint, evaluate a dataset, and write report.json/.txt."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, vocab, payload = load_checkpoint(ckpt_path)
    dataset = TripletDataset(data_dir)
    batch_size = RunConfig.from_dict(payload["config"]).batch_size
    report = evaluate_model(
        model, vocab, dataset, batch_size,
        masks_dir=out_dir / "masks" if save_masks else None,
    )
    text = report_table(report, json_path=out_dir / "report.json")
    (out_dir / "report.txt").write_text(text, encoding="utf-8")
    return report


ABLATION_AXES = {
    "fiam,tmem": [
        ("baseline", {"fiam": False, "tmem": "off"}),
        ("+FIAM", {"fiam": True, "tmem": "off"}),
        ("+TMEM", {"fiam": False, "tmem": "on"}),
        ("+FIAM+TMEM", {"fiam": True, "tmem": "on"}),
    ],
    "fiam_design": [
        ("none", {"channel_modulation": False, "object_branch": False,
                  "spatial_branch": False}),
        ("+C.M.", {"channel_modulation": True, "object_branch": False,
                   "spatial_branch": False}),
        ("+C.M.+G.O.B.", {"channel_modulation": True, "object_branch": True,
                          "spatial_branch": False}),
        ("+C.M.+G.O.B.+S.P.B.", {"channel_modulation": True,
                                 "object_branch": True, "spatial_branch": True}),
    ],
}


def ablate(config: RunConfig, axes: str, out_dir: str | Path) -> str:
    """Train every toggle combination of one axis with a shared seed and
    emit a comparison table (text + ablation.json)."""
    if axes not in ABLATION_AXES:
        raise FianetError(f"unknown ablation axes {axes!r}; "
                          f"choose from {sorted(ABLATION_AXES)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, overrides in ABLATION_AXES[axes]:
        row_cfg = RunConfig.from_dict({**config.to_dict(), **overrides})
        run_dir = out_dir / name.replace("+", "plus_").replace(".", "").lower()
        train(row_cfg, run_dir)
        report = evaluate(run_dir / "ckpt" / "best.pt", row_cfg.val_data, run_dir)
        rows.append((name, report))

    header = f"{'setting':<24s}" + "".join(
        f"{c:>8s}" for c in ("P@0.5", "P@0.7", "P@0.9", "oIoU", "mIoU")
    )
    lines = [header]
    payload = []
    for name, rep in rows:
        values = (rep.pr_at[0.5], rep.pr_at[0.7], rep.pr_at[0.9],
                  rep.oIoU, rep.mIoU)
        lines.append(f"{name:<24s}" + "".join(f"{v:8.2f}" for v in values))
        payload.append({"setting": name, **rep.to_dict()})
    table = "\n".join(lines) + "\n"
    (out_dir / "ablation.txt").write_text(table, encoding="utf-8")
    (out_dir / "ablation.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    return table


@torch.no_grad()
def infer(ckpt_path: str | Path, image_path: str | Path, expression: str,
          out_dir: str | Path, cat_lex=None, spa_lex=None) -> np.ndarray:
    """Segment one image/expression pair; writes mask.png and overlay.png."""
    from .lexicon import default_spatial_lexicon, synthetic_category_lexicon
    from .parsing import decompose

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model, vocab, _ = load_checkpoint(ckpt_path)
    cat_lex = cat_lex or synthetic_category_lexicon()
    spa_lex = spa_lex or default_spatial_lexicon()
    dec = decompose(expression, cat_lex, spa_lex)

    img = np.asarray(Image.open(image_path).convert("RGB"),
                     dtype=np.float32) / 255.0
    image = torch.from_numpy(img.transpose(2, 0, 1)).unsqueeze(0)
    rec = TripletRecord(image="", mask="", expression=dec.context,
                        ground_object=dec.ground_object,
                        spatial_position=dec.spatial_position,
                        category="unknown")
    c, g, s = fragment_tokens(vocab, rec)
    logits = model(image, [c], [g], [s])
    mask = logits_to_mask(logits[0])
    Image.fromarray(mask * 255).save(out_dir / "mask.png")
    overlay = (img * 255).astype(np.uint8).copy()
    overlay[mask.astype(bool)] = (
        0.5 * overlay[mask.astype(bool)] + 0.5 * np.array([255, 0, 0])
    ).astype(np.uint8)
    Image.fromarray(overlay).save(out_dir / "overlay.png")
    return mask
