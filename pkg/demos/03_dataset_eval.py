"""Assemble a small labeled dataset, split it, flip-augment it, run a
channel ablation export, and score deliberately imperfect predictions.

Run: python3 demos/03_dataset_eval.py
"""

import tempfile
from pathlib import Path

import numpy as np

from domescan import dataset as ds
from domescan import evaluation as ev
from domescan import uniform_dome
from domescan.projection import project
from domescan.representation import RepresentationConfig, \
    build_representation, write_representation
from domescan.synth import Background, Cylinder, Scene, render

intr = uniform_dome(64, 512)
rng = np.random.default_rng(3)
root = Path(tempfile.mkdtemp()) / "dataset"
(root / "frames").mkdir(parents=True)
(root / "annotations").mkdir()

frames = []
gt = {}
for fid in range(6):
    x, y = rng.uniform(1.5, 4.0), rng.uniform(-2.0, 2.0)
    scene = Scene(primitives=[Cylinder((x, y), (0.0, 1.8), 0.25,
                                       label="person")],
                  background=Background(ground_z=0.0, wall_radius=7.0))
    scan, ann, _ = render(scene, intr, frame_id=fid)
    rep = build_representation(scan, project(scan, intr, "standard"),
                               RepresentationConfig.seven_channel())
    write_representation(rep, root / "frames" / f"frame_{fid}.ldt")
    ds.save_annotations(ann, root / "annotations" / f"{fid}.json")
    frames.append(fid)
    gt[fid] = ann

manifest = ds.DatasetManifest(root=str(root), task="person", frames=frames,
                              channels=list(rep.channel_names))
manifest.save()
ds.assign_splits(manifest, seed=42)
print("splits:", {k: v for k, v in manifest.splits.items()})

# Ablation: drop NIR everywhere and re-export.
ablated = ds.ablation_export(manifest, "nir", root.parent / "no_nir")
print("ablated channels:", ablated.channels)

# Predictions: ground truth on even frames, nothing on odd frames.
preds = {}
for fid, ann in gt.items():
    pset = ev.PredictionSet(frame_id=fid, height=ann.height, width=ann.width)
    if fid % 2 == 0:
        for inst in ann.instances:
            pset.instances.append(ev.Prediction(rle=inst.rle,
                                                label=inst.label, score=0.9))
    preds[fid] = pset

report = ev.evaluate(gt, preds)
print(report.format_table())
