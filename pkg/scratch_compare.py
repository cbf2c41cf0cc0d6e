"""Scratch: compare two ablation rows' decodes and slot anatomies."""
import sys

import numpy as np

import novocap.autodiff as ad
import novocap.datasynth as ds
from novocap.ablation import DEFAULT_ROWS, row_config
from novocap.config import RunConfig
from novocap.decoding import greedy_decode
from novocap.evaluation import build_report
from novocap.pipeline import load_world, train_model

loaded = load_world("/tmp/bench_world/manifest.json")
rows = {r.name: r for r in DEFAULT_ROWS}

base = RunConfig(steps=int(sys.argv[3]) if len(sys.argv) > 3 else 350,
                 batch_size=8, learning_rate=3e-3, hidden_size=48,
                 visual_hidden=48, lm_pretrain_steps=300,
                 vision_pretrain_steps=int(sys.argv[4]) if len(sys.argv) > 4 else 300,
                 max_len=10)
heldout = set(loaded.heldout)
truth = loaded.test_truth()
cat_of = {m: c for c, ms in ds.CATEGORY_BANK.items() for m in ms}

for name in sys.argv[1:3]:
    cfg = row_config(base, rows[name], seed=1)
    model = train_model(loaded, cfg).model
    caps = {ex.image_id: model.vocab.decode(greedy_decode(model, ex.features, 10).tokens)
            for ex in loaded.test_images}
    report = build_report(caps, truth, heldout)
    print(f"\n=== {name}: avgF1 {report.average_f1:.3f}")
    for s in report.per_object:
        print(f"  {s.object:<8} p {s.precision:.2f} r {s.recall:.2f} f1 {s.f1:.2f}")
    # slot anatomy averaged over held-out test images
    gaps_lm, gaps_im = [], []
    with ad.no_grad():
        for ex in loaded.test_images[:60]:
            held = [o for o in ex.labels if o in heldout]
            if not held:
                continue
            obj = held[0]
            sibs = [m for m in ds.CATEGORY_BANK[cat_of[obj]] if m != obj]
            f_im = model.vision.activations(ex.features)
            state = model.lm.init_state()
            state, f_cm = model.fused_step(state, 0, f_im)
            state, f_cm = model.fused_step(state, model.vocab.id("a"), f_im)
            f_lm = f_cm.data - f_im.data
            oid = model.vocab.id(obj)
            sid = [model.vocab.id(s) for s in sibs]
            gaps_lm.append(f_lm[oid] - np.mean([f_lm[i] for i in sid]))
            gaps_im.append(f_im.data[oid] - max(f_im.data[i] for i in sid))
    print(f"  slot: f_lm(obj)-mean(sib) {np.mean(gaps_lm):+.2f}   "
          f"f_im(obj)-max(sib) {np.mean(gaps_im):+.2f}")
    sample = [f"{ex.image_id}:{' '.join(caps[ex.image_id])}" for ex in loaded.test_images[:4]]
    print("  " + "\n  ".join(sample))
