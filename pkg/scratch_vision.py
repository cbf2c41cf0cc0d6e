"""Scratch: how strong is the learned within-category visual edge?"""
import sys

import numpy as np

import novocap.autodiff as ad
from novocap.config import RunConfig
from novocap.pipeline import build_model, load_world
from novocap.training import Sources, TrainConfig, pretrain_vision

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 150
lr = float(sys.argv[2]) if len(sys.argv) > 2 else 3e-3

loaded = load_world("/tmp/bench_world/manifest.json")
cfg = RunConfig(hidden_size=8, visual_hidden=48, seed=1)
model = build_model(loaded, cfg)
sources = Sources.from_datasets(loaded.vocab, loaded.train_paired,
                                loaded.image_only, loaded.text_only)
tcfg = TrainConfig(steps=0, learning_rate=lr, batch_size=8, seed=1)
log = pretrain_vision(model, sources.image_only, steps, tcfg)
print(f"steps={steps} lr={lr} loss {log[0]:.3f} -> {log[-1]:.3f}")

import novocap.datasynth as ds
cat_of = {}
for cat, members in ds.CATEGORY_BANK.items():
    for m in members:
        cat_of[m] = cat
siblings_of = {o: [m for m in ds.CATEGORY_BANK[cat_of[o]] if m != o and m in loaded.vocab]
               for o in loaded.manifest["objects"]}

margins, top1_all, top1_cat, n = [], 0, 0, 0
with ad.no_grad():
    for ex in loaded.test_images:
        held = [o for o in ex.labels if o in set(loaded.heldout)]
        for obj in held:
            acts = model.vision.activations(ex.features).data
            oid = loaded.vocab.id(obj)
            sib = [loaded.vocab.id(s) for s in siblings_of[obj]]
            margins.append(acts[oid] - max(acts[s] for s in sib))
            object_ids = [loaded.vocab.id(o) for o in loaded.manifest["objects"]]
            top1_all += oid == max(object_ids, key=lambda i: acts[i])
            top1_cat += acts[oid] > max(acts[s] for s in sib)
            n += 1
print(f"n={n} mean margin {np.mean(margins):.3f}  top1(all) {top1_all/n:.2f}  "
      f"top1(category) {top1_cat/n:.2f}")
