"""Annotated dataset lifecycle: masks, splits, flip augmentation, ablations.

Masks use a simple run-length encoding: row-major, alternating run lengths
starting with a zero-run (so the very first entry may be 0 when the mask
begins with a foreground pixel). Run lengths always sum to H*W.

Directory layout:
    root/manifest.json             dataset manifest
    root/meta.json                 sensor intrinsics
    root/frames/*.ldt              frame representations (+ .json sidecars)
    root/annotations/<id>.json     per-frame instances with RLE arrays
    root/splits.json               train/val/test assignment
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (DimensionMismatch, InvariantViolation, TooFewFrames,
                     UnknownChannel)
from .representation import (FrameRepresentation, canonical_channel,
                             read_representation, write_representation)

PERSON_CLASSES = ("person",)
ACTION_CLASSES = ("sitting", "walking", "waving")
TASK_CLASSES = {"person": PERSON_CLASSES, "action": ACTION_CLASSES}

TRAIN_FRACTION = 0.70
VAL_FRACTION = 0.15


# --- run-length encoding ---

def rle_encode(mask: np.ndarray) -> list[int]:
    """Encode a binary H x W mask row-major; first run counts zeros."""
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], edges, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def rle_decode(runs, height: int, width: int) -> np.ndarray:
    """Inverse of rle_encode; validates that runs cover exactly H*W pixels."""
    total = sum(runs)
    if total != height * width:
        raise InvariantViolation(
            "mask", f"run lengths sum to {total}, expected {height * width}")
    if any(r < 0 for r in runs):
        raise InvariantViolation("mask", "negative run length")
    flat = np.zeros(height * width, dtype=bool)
    pos = 0
    value = False
    for r in runs:
        if value:
            flat[pos:pos + r] = True
        pos += r
        value = not value
    return flat.reshape(height, width)


# --- annotations ---

@dataclass
class Instance:
    rle: list[int]
    label: str

    def mask(self, height, width) -> np.ndarray:
        return rle_decode(self.rle, height, width)


@dataclass
class AnnotationSet:
    frame_id: int
    height: int
    width: int
    instances: list[Instance] = field(default_factory=list)

    def validate(self, task: str | None = None):
        for inst in self.instances:
            if sum(inst.rle) != self.height * self.width:
                raise InvariantViolation(
                    "mask", f"instance mask does not cover "
                            f"{self.height}x{self.width}")
            if task is not None and inst.label not in TASK_CLASSES[task]:
                raise InvariantViolation(
                    "class", f"label {inst.label!r} not in task "
                             f"{task!r} vocabulary")

    def to_dict(self):
        return {
            "frame_id": self.frame_id,
            "height": self.height,
            "width": self.width,
            "instances": [{"rle": inst.rle, "class": inst.label}
                          for inst in self.instances],
        }

    @classmethod
    def from_dict(cls, doc) -> "AnnotationSet":
        return cls(
            frame_id=int(doc["frame_id"]),
            height=int(doc["height"]),
            width=int(doc["width"]),
            instances=[Instance(rle=[int(r) for r in item["rle"]],
                                label=str(item["class"]))
                       for item in doc["instances"]],
        )


def save_annotations(ann: AnnotationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ann.to_dict(), fh)


def load_annotations(path) -> AnnotationSet:
    with open(path, "r", encoding="utf-8") as fh:
        return AnnotationSet.from_dict(json.load(fh))


# --- splits ---

def split_counts(n: int) -> tuple[int, int, int]:
    train = int(TRAIN_FRACTION * n)
    val = int(VAL_FRACTION * n)
    return train, val, n - train - val


def split(frames, seed: int) -> dict[str, list]:
    """Deterministic 70/15/15 split; PCG64-seeded shuffle, stable everywhere."""
    frames = list(frames)
    if len(frames) < 3:
        raise TooFewFrames(f"need at least 3 frames, got {len(frames)}")
    order = np.random.default_rng(seed).permutation(len(frames))
    shuffled = [frames[k] for k in order]
    n_train, n_val, _ = split_counts(len(frames))
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train:n_train + n_val],
        "test": shuffled[n_train + n_val:],
    }


# --- horizontal flip augmentation ---

def hflip_representation(rep: FrameRepresentation) -> FrameRepresentation:
    """Reverse columns of every channel; negate posy.

    A horizontal scan flip mirrors the world about the sensor's x-z plane,
    so the y coordinate changes sign while x and z only change column.
    """
    flipped = rep.channels[:, :, ::-1].copy()
    names = rep.channel_names
    if "posy" in names:
        flipped[names.index("posy")] = -flipped[names.index("posy")]
    manifest = dict(rep.manifest)
    manifest["hflip"] = not manifest.get("hflip", False)
    return FrameRepresentation(channels=flipped, manifest=manifest,
                               frame_id=rep.frame_id)


def hflip_annotations(ann: AnnotationSet) -> AnnotationSet:
    flipped = []
    for inst in ann.instances:
        mask = inst.mask(ann.height, ann.width)[:, ::-1]
        flipped.append(Instance(rle=rle_encode(mask), label=inst.label))
    return AnnotationSet(frame_id=ann.frame_id, height=ann.height,
                         width=ann.width, instances=flipped)


def hflip(rep: FrameRepresentation, ann: AnnotationSet):
    if rep.channels.shape[1:] != (ann.height, ann.width):
        raise DimensionMismatch(
            f"representation {rep.channels.shape[1:]} vs annotations "
            f"{(ann.height, ann.width)}")
    return hflip_representation(rep), hflip_annotations(ann)


# --- manifest and directory layout ---

@dataclass
class DatasetManifest:
    root: str
    task: str = "person"
    frames: list[int] = field(default_factory=list)
    channels: list[str] = field(default_factory=lambda: ["nir", "reflectivity",
                                                         "signal", "revrange"])
    excluded: list[str] = field(default_factory=list)
    augmentation: dict = field(default_factory=dict)
    seed: int = 0
    splits: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASK_CLASSES:
            raise InvariantViolation("task", f"unknown task {self.task!r}")
        self.channels = [canonical_channel(c) for c in self.channels]
        self.excluded = [canonical_channel(c) for c in self.excluded]

    def validate_splits(self):
        assigned = [f for part in ("train", "val", "test")
                    for f in self.splits.get(part, [])]
        if sorted(assigned) != sorted(self.frames):
            raise InvariantViolation(
                "splits", "split sets must be disjoint and cover all frames")

    def frame_path(self, frame_id) -> Path:
        return Path(self.root) / "frames" / f"frame_{frame_id}.ldt"

    def annotation_path(self, frame_id) -> Path:
        return Path(self.root) / "annotations" / f"{frame_id}.json"

    def to_dict(self):
        return {
            "task": self.task,
            "frames": self.frames,
            "channels": self.channels,
            "excluded": self.excluded,
            "augmentation": self.augmentation,
            "seed": self.seed,
        }

    def save(self):
        root = Path(self.root)
        root.mkdir(parents=True, exist_ok=True)
        with open(root / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
        if self.splits:
            with open(root / "splits.json", "w", encoding="utf-8") as fh:
                json.dump(self.splits, fh, indent=2)

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        with open(root / "manifest.json", "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        manifest = cls(root=str(root), **doc)
        splits_path = root / "splits.json"
        if splits_path.exists():
            with open(splits_path, "r", encoding="utf-8") as fh:
                manifest.splits = json.load(fh)
        return manifest


def assign_splits(manifest: DatasetManifest, seed: int) -> DatasetManifest:
    manifest.seed = seed
    manifest.splits = split(manifest.frames, seed)
    manifest.validate_splits()
    manifest.save()
    return manifest


# --- channel ablation export ---

def drop_channel(rep: FrameRepresentation, excluded: str
                 ) -> FrameRepresentation:
    """Remove one channel, preserving the relative order of the survivors."""
    excluded = canonical_channel(excluded)
    names = list(rep.channel_names)
    if excluded not in names:
        raise UnknownChannel(f"channel {excluded!r} not in representation "
                             f"{names}")
    keep = [k for k, name in enumerate(names) if name != excluded]
    manifest = dict(rep.manifest)
    manifest["channels"] = [names[k] for k in keep]
    manifest["excluded"] = list(manifest.get("excluded", [])) + [excluded]
    return FrameRepresentation(channels=rep.channels[keep].copy(),
                               manifest=manifest, frame_id=rep.frame_id)


def ablation_export(manifest: DatasetManifest, excluded: str,
                    out_root) -> DatasetManifest:
    """Write C-1 channel tensors for every frame into a new dataset root."""
    excluded = canonical_channel(excluded)
    if excluded not in manifest.channels:
        raise UnknownChannel(f"channel {excluded!r} not in dataset "
                             f"configuration {manifest.channels}")
    out_root = Path(out_root)
    (out_root / "frames").mkdir(parents=True, exist_ok=True)
    (out_root / "annotations").mkdir(parents=True, exist_ok=True)
    for frame_id in manifest.frames:
        rep = read_representation(manifest.frame_path(frame_id))
        write_representation(drop_channel(rep, excluded),
                             out_root / "frames" / f"frame_{frame_id}.ldt")
        src_ann = manifest.annotation_path(frame_id)
        if src_ann.exists():
            (out_root / "annotations" / f"{frame_id}.json").write_bytes(
                src_ann.read_bytes())
    meta_src = Path(manifest.root) / "meta.json"
    if meta_src.exists():
        (out_root / "meta.json").write_bytes(meta_src.read_bytes())
    out = DatasetManifest(
        root=str(out_root),
        task=manifest.task,
        frames=list(manifest.frames),
        channels=[c for c in manifest.channels if c != excluded],
        excluded=manifest.excluded + [excluded],
        augmentation=dict(manifest.augmentation),
        seed=manifest.seed,
        splits={k: list(v) for k, v in manifest.splits.items()},
    )
    out.save()
    return out
