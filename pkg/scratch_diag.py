"""Scratch: inspect decoded captions and fused-logit anatomy for one row."""
import sys

import numpy as np

import novocap.autodiff as ad
from novocap.ablation import DEFAULT_ROWS, row_config
from novocap.config import RunConfig
from novocap.decoding import _masked_log_probs, greedy_decode
from novocap.pipeline import load_world, train_model

loaded = load_world("/tmp/bench_world/manifest.json")
row = {r.name: r for r in DEFAULT_ROWS}[sys.argv[1] if len(sys.argv) > 1 else "full"]

base = RunConfig(steps=250, batch_size=8, learning_rate=3e-3, hidden_size=48,
                 visual_hidden=48, lm_pretrain_steps=300, vision_pretrain_steps=700,
                 max_len=10)
cfg = row_config(base, row, seed=1)
result = train_model(loaded, cfg)
model = result.model

heldout = set(loaded.heldout)
truth = loaded.test_truth()
print("held out:", sorted(heldout))
hits = 0
for ex in loaded.test_images[:18]:
    dec = greedy_decode(model, ex.features, 10)
    toks = model.vocab.decode(dec.tokens)
    mark = "*" if set(toks) & truth[ex.image_id] & heldout else " "
    hits += bool(set(toks) & truth[ex.image_id] & heldout)
    print(f"{mark} {ex.image_id} truth={sorted(truth[ex.image_id])}: {' '.join(toks)}")

# fused-logit anatomy at the object slot for one held-out image
ex = next(e for e in loaded.test_images if e.labels & heldout)
obj = next(iter(ex.labels & heldout))
cat = None
import novocap.datasynth as ds
for c, members in ds.CATEGORY_BANK.items():
    if obj in members:
        cat = c
        siblings = [m for m in members if m != obj and m in loaded.vocab]
print("\nimage", ex.image_id, "object", obj, "category", cat)
with ad.no_grad():
    f_im = model.vision.activations(ex.features)
    state = model.lm.init_state()
    # walk "a" -> slot
    a_id = model.vocab.id("a")
    state, f_cm = model.fused_step(state, 0, f_im)       # BOS -> first
    state, f_cm = model.fused_step(state, a_id, f_im)    # "a" -> slot
    lm_part = f_cm.data - f_im.data
    for tok in [obj] + siblings:
        i = loaded.vocab.id(tok)
        print(f"  {tok:<10} f_im {f_im.data[i]:7.2f}  f_lm {lm_part[i]:7.2f} "
              f"fused {f_cm.data[i]:7.2f}")
    ranked = np.argsort(-f_cm.data)[:6]
    print("  top fused:", [(model.vocab.token(int(i)), round(float(f_cm.data[int(i)]), 2))
                           for i in ranked])
