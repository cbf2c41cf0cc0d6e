"""Command-line interface.

Commands: generate | train | caption | eval | ablate. Exit codes: 0 on
success, 1 on domain errors (bad files, invalid worlds, incompatible
checkpoints), 2 on usage errors. Report-producing commands write a PNG
figure next to every delimited output file.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import dataio
from .ablation import (DEFAULT_ROWS, format_grid_table, grid_csv_rows,
                       grid_summary, run_grid)
from .checkpoint import load_checkpoint, restore_model, save_checkpoint
from .config import load_config, parse_config_text
from .datasynth import WorldSpec, generate_world, make_heldout_split, write_world
from .errors import DataFileError, NovocapError
from .pipeline import (caption_images, evaluate_captions, load_world,
                       parse_decode_method, train_model)


class UsageError(Exception):
    pass


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help="override the run seed")
    sub.add_argument("--config", default=None, help="key=value configuration file")
    sub.add_argument("--out", required=True, help="output directory or file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="novocap",
                                     description="desk-scale novel-object captioner")
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("generate", help="emit a synthetic three-source dataset")
    _add_common(g)
    g.add_argument("--objects", type=int, default=30)
    g.add_argument("--contexts", type=int, default=4)
    g.add_argument("--templates", type=int, default=6)
    g.add_argument("--paired", type=int, default=720)
    g.add_argument("--image-only", type=int, default=600)
    g.add_argument("--text-only", type=int, default=900)
    g.add_argument("--feature-dim", type=int, default=40)
    g.add_argument("--embed-dim", type=int, default=50)
    g.add_argument("--noise-sigma", type=float, default=0.1)
    g.add_argument("--two-object-fraction", type=float, default=0.1)
    g.add_argument("--heldout", default=None,
                   help="comma-separated object tokens; default picks 4, 'none' disables")
    g.set_defaults(func=cmd_generate)

    t = subs.add_parser("train", help="pretrain and jointly train a caption model")
    _add_common(t)
    t.add_argument("--manifest", required=True)
    t.add_argument("--resume", default=None, help="checkpoint prefix to continue from")
    t.set_defaults(func=cmd_train)

    c = subs.add_parser("caption", help="caption images from a checkpoint")
    _add_common(c)
    c.add_argument("--checkpoint", required=True, help="checkpoint prefix")
    c.add_argument("--images", required=True, help="labeled-image or paired file")
    c.add_argument("--method", default="greedy", help="greedy | beam:K | sample:N")
    c.add_argument("--max-len", type=int, default=None)
    c.set_defaults(func=cmd_caption)

    e = subs.add_parser("eval", help="score a caption file against the test split")
    _add_common(e)
    e.add_argument("--captions", required=True)
    e.add_argument("--manifest", required=True)
    e.add_argument("--checkpoint", default=None,
                   help="optional checkpoint prefix; adds held-out perplexity")
    e.add_argument("--objects", default="heldout", help="heldout | all | tok1,tok2,...")
    e.set_defaults(func=cmd_eval)

    a = subs.add_parser("ablate", help="run the standard configuration grid")
    _add_common(a)
    a.add_argument("--manifest", required=True)
    a.add_argument("--seeds", default="1,2,3")
    a.add_argument("--rows", default=None,
                   help="comma-separated row names; default runs all five")
    a.set_defaults(func=cmd_ablate)
    return parser


# -- commands -----------------------------------------------------------------

def cmd_generate(args) -> int:
    spec = WorldSpec(
        n_objects=args.objects, n_contexts=args.contexts, n_templates=args.templates,
        feature_dim=args.feature_dim, embed_dim=args.embed_dim,
        noise_sigma=args.noise_sigma, n_paired=args.paired,
        n_image_only=args.image_only, n_text_only=args.text_only,
        two_object_fraction=args.two_object_fraction,
        seed=args.seed if args.seed is not None else 0,
    )
    world = generate_world(spec)
    if args.heldout is None:
        heldout = world.default_heldout(4)
    elif args.heldout == "none":
        heldout = []
    else:
        heldout = [t for t in args.heldout.split(",") if t]
    split = make_heldout_split(world, heldout)
    manifest_path = write_world(world, split, args.out)
    print(f"wrote {manifest_path} (train {len(split.train_paired)}, "
          f"test {len(split.test_paired)}, held out: {', '.join(sorted(split.heldout)) or '-'})")
    return 0


def _write_csv(path, rows: list[dict]) -> None:
    if not rows:
        return
    fieldnames = list(rows[0].keys())
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def cmd_train(args) -> int:
    from . import figures

    world = load_world(args.manifest)
    resume = None
    if args.resume:
        resume = load_checkpoint(args.resume)
        if world.vocab.hash() != resume.vocab_hash:
            raise DataFileError("checkpoint vocabulary does not match this dataset")
        if args.seed is not None:
            raise UsageError("--seed cannot change on resume; it is part of the schedule")
        values = dict(resume.config)
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read(), source=args.config))
        cfg = load_config(**values)
    else:
        cfg = load_config(args.config, seed=args.seed)

    result = train_model(world, cfg, resume=resume)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    save_checkpoint(outdir / "checkpoint", result.model, cfg.to_dict(),
                    result.trainer.step_count, result.trainer.opt)
    start = result.trainer.step_count - len(result.joint_log)
    _write_csv(outdir / "train_log.csv",
               [{"step": start + i, "l_cm": b.l_cm, "l_im": b.l_im,
                 "l_lm": b.l_lm, "total": b.total}
                for i, b in enumerate(result.joint_log)])
    for name, log in (("lm_pretrain", result.lm_pretrain_log),
                      ("vision_pretrain", result.vision_pretrain_log)):
        if log:
            _write_csv(outdir / f"{name}.csv",
                       [{"epoch": i, "mean_loss": v} for i, v in enumerate(log)])
    figures.save_loss_curves(result.joint_log, outdir / "loss_curves.png",
                             result.lm_pretrain_log, result.vision_pretrain_log)
    print(f"trained to step {result.trainer.step_count}; "
          f"final total loss {result.joint_log[-1].total:.4f}")
    return 0


def _read_images_any(path):
    """Accept either a labeled-image file or a paired file: paired caption
    columns contain spaces, label columns never do."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise DataFileError(f"{path}: expected 3 tab-separated columns")
            if " " in parts[1]:
                paired = dataio.read_paired(path)
                return [dataio.ImageExample(ex.image_id, set(), ex.features) for ex in paired]
            return dataio.read_labeled_images(path)
    raise DataFileError(f"{path}: no image records found")


def cmd_caption(args) -> int:
    try:
        parse_decode_method(args.method)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ckpt = load_checkpoint(args.checkpoint)
    model = restore_model(ckpt)
    images = _read_images_any(args.images)
    max_len = args.max_len if args.max_len is not None \
        else int(ckpt.config.get("max_len", 12))
    rows = caption_images(model, images, args.method, max_len,
                          seed=args.seed if args.seed is not None else 0)
    dataio.write_captions(args.out, rows)
    print(f"wrote {len(rows)} captions to {args.out}")
    return 0


def cmd_eval(args) -> int:
    from . import figures

    world = load_world(args.manifest)
    rows = dataio.read_captions(args.captions)
    truth = world.test_truth()
    if args.objects == "heldout":
        objects = set(world.heldout)
    elif args.objects == "all":
        objects = {o for objs in truth.values() for o in objs}
    else:
        objects = {t for t in args.objects.split(",") if t}

    model = None
    references = None
    if args.checkpoint:
        ckpt = load_checkpoint(args.checkpoint)
        model = restore_model(ckpt)
        references = [ex.caption for ex in world.test_paired]
    report = evaluate_captions(rows, truth, objects, model=model,
                               reference_sentences=references)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    from .evaluation import emit_report, format_table
    emit_report(report, outdir / "report.json", outdir / "report.txt")
    _write_csv(outdir / "report.csv",
               [{"object": s.object, "precision": s.precision, "recall": s.recall,
                 "f1": s.f1, "n_images": s.n_images} for s in report.per_object])
    figures.save_f1_bars(report, outdir / "report.png", set(world.heldout))
    print(format_table(report), end="")
    return 0


def cmd_ablate(args) -> int:
    from . import figures

    world = load_world(args.manifest)
    base = load_config(args.config, seed=args.seed)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s]
    except ValueError:
        raise UsageError(f"bad --seeds value {args.seeds!r}") from None
    rows = DEFAULT_ROWS
    if args.rows:
        by_name = {r.name: r for r in DEFAULT_ROWS}
        missing = [n for n in args.rows.split(",") if n and n not in by_name]
        if missing:
            raise UsageError(f"unknown ablation rows {missing}; valid: {sorted(by_name)}")
        rows = tuple(by_name[n] for n in args.rows.split(",") if n)

    results = run_grid(world, base, rows, seeds,
                       progress=lambda msg: print(msg, file=sys.stderr))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(outdir / "ablation.csv", grid_csv_rows(results))
    table = format_grid_table(results)
    with open(outdir / "ablation.txt", "w", encoding="utf-8") as fh:
        fh.write(table)
    figures.save_ablation_bars(grid_summary(results), outdir / "ablation.png")
    print(table, end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NovocapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
