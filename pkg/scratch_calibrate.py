"""Scratch: calibrate the benchmark config for the ablation ordering."""
import argparse
import time

import novocap.datasynth as ds
from novocap.ablation import DEFAULT_ROWS, run_row
from novocap.config import RunConfig
from novocap.datasynth import WorldSpec, generate_world, make_heldout_split, write_world
from novocap.pipeline import load_world

ap = argparse.ArgumentParser()
ap.add_argument("--steps", type=int, default=300)
ap.add_argument("--vision", type=int, default=700)
ap.add_argument("--lm", type=int, default=300)
ap.add_argument("--lr", type=float, default=3e-3)
ap.add_argument("--hidden", type=int, default=48)
ap.add_argument("--vh", type=int, default=48)
ap.add_argument("--tb", type=int, default=0)
ap.add_argument("--seeds", default="1")
ap.add_argument("--signal", type=float, default=None)
ap.add_argument("--sigma", type=float, default=None)
ap.add_argument("--mult", type=int, default=None)
ap.add_argument("--rows", default="full,aux-no-pretrain,lm-embed-no-aux,vision-only")
ap.add_argument("--scale", type=float, default=None)
args = ap.parse_args()

if args.signal is not None:
    ds.OBJECT_SIGNAL = args.signal
if args.mult is not None:
    ds.TEXT_COMMON_MULTIPLIER = args.mult
if args.scale is not None:
    import novocap.vocab, functools
    _orig = novocap.vocab.EmbeddingTable.random.__func__
    novocap.vocab.EmbeddingTable.random = classmethod(functools.partial(_orig, scale=args.scale))

OUT = "/tmp/bench_world"
spec = WorldSpec(noise_sigma=args.sigma) if args.sigma is not None else WorldSpec()
world = generate_world(spec)
heldout = world.default_heldout(4)
split = make_heldout_split(world, heldout)
write_world(world, split, OUT)
loaded = load_world(OUT + "/manifest.json")

base = RunConfig(steps=args.steps, batch_size=8, learning_rate=args.lr,
                 hidden_size=args.hidden, visual_hidden=args.vh,
                 lm_pretrain_steps=args.lm, vision_pretrain_steps=args.vision,
                 max_len=10, text_batch_size=args.tb)

rows = {r.name: r for r in DEFAULT_ROWS}
order = [r for r in args.rows.split(",") if r]
t_start = time.time()
print(f"signal={ds.OBJECT_SIGNAL} sigma={spec.noise_sigma} mult={ds.TEXT_COMMON_MULTIPLIER} "
      f"steps={args.steps} vision={args.vision} lm={args.lm}")
for seed in [int(s) for s in args.seeds.split(",")]:
    scores = {}
    for name in order:
        result = run_row(loaded, base, rows[name], seed)
        scores[name] = result.avg_f1
    print(f"  seed {seed}: " + " ".join(f"{n}={scores[n]:.3f}" for n in order))
print(f"  total {time.time()-t_start:.0f}s")
