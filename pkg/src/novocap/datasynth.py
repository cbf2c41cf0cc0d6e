"""Synthetic three-source world: paired image-captions, labeled images,
and raw sentences, plus a held-out-object split.

Images are feature vectors. An object contributes a strong component on
its category's axis and a deliberately weak component on its own axis;
scenes add a small offset on a context axis, and white noise goes on top.
A classifier can therefore nail the category from features alone but stays
uncertain between category siblings, which is the regime where word-vector
neighbourhoods pay off: word vectors cluster by category, so a captioner
whose output projection is tied to them resolves the sibling ambiguity,
while one built on unstructured vectors cannot. Captions realize templates
naming the objects in the image.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import ImageExample, PairedExample
from .errors import SplitError, WorldSpecError
from .vocab import RESERVED, Vocabulary

CATEGORY_BANK: dict[str, list[str]] = {
    "animal": ["zebu", "okapi", "tapir", "lemur", "dingo"],
    "vehicle": ["tram", "barge", "glider", "scooter", "wagon"],
    "food": ["bagel", "mango", "taco", "waffle", "pretzel"],
    "furniture": ["stool", "bench", "crate", "shelf", "hammock"],
    "instrument": ["banjo", "cello", "flute", "drum", "fiddle"],
    "tool": ["wrench", "chisel", "mallet", "pliers", "trowel"],
}

CONTEXT_BANK = ["kitchen", "park", "harbor", "meadow", "workshop", "street"]

TEMPLATE_BANK = [
    "a {obj} in the {ctx}",
    "the {obj} sits near the {ctx}",
    "there is a {obj} at the {ctx}",
    "a {obj} and a {obj2} in the {ctx}",
    "the {obj} rests by the {ctx}",
    "people watch a {obj} at the {ctx}",
]

# feature-space geometry: the object's own axis carries far less signal
# than its category axis, so recognition within a category is noisy
OBJECT_SIGNAL = 0.4
CATEGORY_SIGNAL = 1.0
CONTEXT_OFFSET = 0.5
_EMBED_JITTER = 0.01

# text is Zipf-like: one object per category (bank position 1) is rare in
# raw sentences, everything else appears TEXT_COMMON_MULTIPLIER times as
# often; paired and labeled-image sources stay balanced
TEXT_RARE_BANK_INDEX = 1
TEXT_COMMON_MULTIPLIER = 6


@dataclass(frozen=True)
class WorldSpec:
    n_objects: int = 30
    n_contexts: int = 4
    n_templates: int = 6
    feature_dim: int = 40
    embed_dim: int = 50
    noise_sigma: float = 0.1
    n_paired: int = 720
    n_image_only: int = 600
    n_text_only: int = 900
    two_object_fraction: float = 0.1
    seed: int = 0

    def hash(self) -> str:
        digest = hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode())
        return digest.hexdigest()


@dataclass
class World:
    spec: WorldSpec
    vocab: Vocabulary
    objects: list[str]
    categories: dict[str, str]              # object -> category name
    contexts: list[str]
    templates: list[str]
    embeddings: dict[str, np.ndarray]       # content token -> vector
    paired: list[PairedExample]
    image_only: list[ImageExample]
    text_only: list[list[str]]
    objects_of: dict[str, set[str]]         # image id -> generating objects

    def signature(self, obj: str) -> np.ndarray:
        """Noise-free feature contribution of one object."""
        vec = np.zeros(self.spec.feature_dim)
        vec[self.objects.index(obj)] = OBJECT_SIGNAL
        cats = list(dict.fromkeys(self.categories.values()))
        vec[len(self.objects) + cats.index(self.categories[obj])] = CATEGORY_SIGNAL
        return vec

    def context_offset(self, ctx: str) -> np.ndarray:
        vec = np.zeros(self.spec.feature_dim)
        n_cats = len(set(self.categories.values()))
        vec[len(self.objects) + n_cats + self.contexts.index(ctx)] = CONTEXT_OFFSET
        return vec

    def default_heldout(self, count: int = 4) -> list[str]:
        """One object per category, round-robin, deterministic.

        Starts with each category's text-rare member: novel-object
        evaluation targets words whose next-word behaviour cannot come from
        raw-text frequency, only from their embedding neighbourhood.
        """
        by_cat: dict[str, list[str]] = {}
        for obj in self.objects:
            by_cat.setdefault(self.categories[obj], []).append(obj)
        picks: list[str] = []
        depth = TEXT_RARE_BANK_INDEX
        while len(picks) < count:
            for members in by_cat.values():
                if len(picks) >= count:
                    break
                if len(members) > depth:
                    picks.append(members[depth])
            depth = (depth + 1) % (max(len(m) for m in by_cat.values()) + 1)
            if depth == TEXT_RARE_BANK_INDEX:
                raise WorldSpecError(f"cannot pick {count} held-out objects from "
                                     f"{len(self.objects)} objects")
        return picks


@dataclass
class HeldoutSplit:
    heldout: frozenset[str]
    train_paired: list[PairedExample]
    test_paired: list[PairedExample]
    image_only: list[ImageExample]
    text_only: list[list[str]]


def _n_categories(n_objects: int) -> int:
    count, covered = 0, 0
    for members in CATEGORY_BANK.values():
        if covered >= n_objects:
            break
        covered += len(members)
        count += 1
    return count


def _validate(spec: WorldSpec) -> None:
    bank_objects = sum(len(v) for v in CATEGORY_BANK.values())
    axes_needed = spec.n_objects + _n_categories(spec.n_objects) + spec.n_contexts
    checks = [
        (spec.n_objects >= 12, "need at least 12 objects"),
        (spec.n_objects <= bank_objects, f"object bank holds only {bank_objects} names"),
        (spec.n_contexts >= 2, "need at least 2 contexts"),
        (spec.n_contexts <= len(CONTEXT_BANK), f"context bank holds only {len(CONTEXT_BANK)}"),
        (spec.n_templates >= 2, "need at least 2 templates"),
        (spec.n_templates <= len(TEMPLATE_BANK), f"template bank holds only {len(TEMPLATE_BANK)}"),
        (spec.feature_dim >= axes_needed,
         f"feature_dim must cover one axis per object, category, and context "
         f"({axes_needed} here)"),
        (spec.embed_dim >= 4, "embed_dim too small"),
        (spec.noise_sigma >= 0, "noise_sigma must be non-negative"),
        (0.0 <= spec.two_object_fraction <= 1.0, "two_object_fraction must be in [0, 1]"),
        (spec.n_paired >= 1 and spec.n_image_only >= 1 and spec.n_text_only >= 1,
         "all source counts must be positive"),
    ]
    for ok, msg in checks:
        if not ok:
            raise WorldSpecError(msg)


def _realize(template: str, obj: str, ctx: str, obj2: str | None = None) -> list[str]:
    return template.format(obj=obj, ctx=ctx, obj2=obj2).split()


def _filler_tokens(templates: list[str]) -> set[str]:
    toks = set()
    for tpl in templates:
        for t in tpl.split():
            if not t.startswith("{"):
                toks.add(t)
    return toks


def generate_world(spec: WorldSpec) -> World:
    """Deterministic function of the spec (seed included)."""
    _validate(spec)

    objects: list[str] = []
    categories: dict[str, str] = {}
    for cat, members in CATEGORY_BANK.items():
        for obj in members:
            if len(objects) < spec.n_objects:
                objects.append(obj)
                categories[obj] = cat
    contexts = CONTEXT_BANK[: spec.n_contexts]
    templates = TEMPLATE_BANK[: spec.n_templates]
    two_slot = [t for t in templates if "{obj2}" in t]
    one_slot = [t for t in templates if "{obj2}" not in t]

    fillers = _filler_tokens(templates)
    vocab = Vocabulary(sorted(set(objects) | set(contexts) | fillers))

    rng_embed, rng_paired, rng_image, rng_text = (
        np.random.default_rng(np.random.SeedSequence((spec.seed, k))) for k in range(4))

    # word vectors: per-category centroids with jitter, everything else random
    def unit(v: np.ndarray) -> np.ndarray:
        return v / np.linalg.norm(v)

    centroids = {cat: unit(rng_embed.standard_normal(spec.embed_dim))
                 for cat in dict.fromkeys(categories.values())}
    embeddings: dict[str, np.ndarray] = {}
    for obj in objects:
        embeddings[obj] = unit(centroids[categories[obj]]
                               + _EMBED_JITTER * rng_embed.standard_normal(spec.embed_dim))
    for tok in sorted((set(contexts) | fillers) - set(objects)):
        embeddings[tok] = unit(rng_embed.standard_normal(spec.embed_dim))

    cat_names = list(dict.fromkeys(categories.values()))
    obj_axis = {obj: i for i, obj in enumerate(objects)}
    cat_axis = {cat: spec.n_objects + j for j, cat in enumerate(cat_names)}
    ctx_axis = {ctx: spec.n_objects + len(cat_names) + j for j, ctx in enumerate(contexts)}

    def features(objs: list[str], ctx: str, rng: np.random.Generator) -> np.ndarray:
        vec = np.zeros(spec.feature_dim)
        for o in objs:
            vec[obj_axis[o]] += OBJECT_SIGNAL
            vec[cat_axis[categories[o]]] += CATEGORY_SIGNAL
        vec[ctx_axis[ctx]] += CONTEXT_OFFSET
        if spec.noise_sigma > 0:
            vec += spec.noise_sigma * rng.standard_normal(spec.feature_dim)
        return vec

    def sample_scene_for(primary: str, rng: np.random.Generator):
        objs = [primary]
        use_two = bool(two_slot) and rng.random() < spec.two_object_fraction
        if use_two:
            other = objects[int(rng.integers(len(objects) - 1))]
            if other == primary:
                other = objects[-1]
            objs.append(other)
        ctx = contexts[int(rng.integers(len(contexts)))]
        bank = two_slot if use_two else one_slot
        tpl = bank[int(rng.integers(len(bank)))]
        caption = _realize(tpl, objs[0], ctx, objs[1] if use_two else None)
        return objs, ctx, caption

    def sample_scene(k: int, order: np.ndarray, rng: np.random.Generator):
        return sample_scene_for(objects[int(order[k % len(objects)])], rng)

    paired: list[PairedExample] = []
    objects_of: dict[str, set[str]] = {}
    order_p = rng_paired.permutation(len(objects))
    for k in range(spec.n_paired):
        objs, ctx, caption = sample_scene(k, order_p, rng_paired)
        ex = PairedExample(f"p{k:05d}", caption, features(objs, ctx, rng_paired))
        paired.append(ex)
        objects_of[ex.image_id] = set(objs)

    image_only: list[ImageExample] = []
    order_i = rng_image.permutation(len(objects))
    for k in range(spec.n_image_only):
        objs, ctx, _caption = sample_scene(k, order_i, rng_image)
        ex = ImageExample(f"i{k:05d}", set(objs), features(objs, ctx, rng_image))
        image_only.append(ex)
        objects_of[ex.image_id] = set(objs)

    # text pool: every object present, common ones many times over
    rare = {members[TEXT_RARE_BANK_INDEX]
            for members in CATEGORY_BANK.values()
            if len(members) > TEXT_RARE_BANK_INDEX}
    pool: list[int] = []
    for idx, obj in enumerate(objects):
        pool.extend([idx] * (1 if obj in rare else TEXT_COMMON_MULTIPLIER))

    text_only: list[list[str]] = []
    order_t = rng_text.permutation(len(pool))
    for k in range(spec.n_text_only):
        primary = objects[pool[int(order_t[k % len(pool)])]]
        _objs, _ctx, caption = sample_scene_for(primary, rng_text)
        text_only.append(caption)

    return World(spec, vocab, objects, categories, contexts, templates,
                 embeddings, paired, image_only, text_only, objects_of)


MIN_TEST_IMAGES = 20


def make_heldout_split(world: World, heldout) -> HeldoutSplit:
    """Remove every paired example whose image or caption involves a held-out
    object; labeled images and raw text keep them (those stand for the
    external sources that do cover the novel objects)."""
    heldout = frozenset(heldout)
    unknown = heldout - set(world.objects)
    if unknown:
        raise ValueError(f"held-out tokens not among world objects: {sorted(unknown)}")

    train, test = [], []
    for ex in world.paired:
        involved = (world.objects_of[ex.image_id] & heldout
                    or heldout.intersection(ex.caption))
        (test if involved else train).append(ex)

    if heldout and not train:
        raise SplitError("every paired example involves a held-out object; nothing to train on")
    for obj in sorted(heldout):
        n = sum(1 for ex in test if obj in world.objects_of[ex.image_id])
        if n < MIN_TEST_IMAGES:
            raise SplitError(f"held-out object {obj!r} has only {n} test images "
                             f"(need {MIN_TEST_IMAGES}); generate a larger paired source")
        if not any(obj in ex.labels for ex in world.image_only):
            raise SplitError(f"held-out object {obj!r} missing from labeled images")
        if not any(obj in sent for sent in world.text_only):
            raise SplitError(f"held-out object {obj!r} missing from the text corpus")

    return HeldoutSplit(heldout, train, test, world.image_only, world.text_only)


def write_world(world: World, split: HeldoutSplit, outdir) -> Path:
    """Emit every dataset file plus the split manifest; returns its path."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    files = {
        "vocab": "vocab.txt",
        "embeddings": "embeddings.txt",
        "train_paired": "train_paired.tsv",
        "test_paired": "test_paired.tsv",
        "test_images": "test_images.tsv",
        "image_only": "image_only.tsv",
        "text_only": "text_only.txt",
    }
    dataio.write_vocab(outdir / files["vocab"], world.vocab)
    with open(outdir / files["embeddings"], "w", encoding="utf-8") as fh:
        for tok in world.vocab.tokens:
            if tok in RESERVED:
                continue
            vec = " ".join(repr(float(x)) for x in world.embeddings[tok])
            fh.write(f"{tok} {vec}\n")
    dataio.write_paired(outdir / files["train_paired"], split.train_paired)
    dataio.write_paired(outdir / files["test_paired"], split.test_paired)
    test_images = [ImageExample(ex.image_id, set(world.objects_of[ex.image_id]), ex.features)
                   for ex in split.test_paired]
    dataio.write_labeled_images(outdir / files["test_images"], test_images)
    dataio.write_labeled_images(outdir / files["image_only"], split.image_only)
    dataio.write_corpus(outdir / files["text_only"], split.text_only)

    manifest = {
        "version": 1,
        "seed": world.spec.seed,
        "spec": asdict(world.spec),
        "spec_hash": world.spec.hash(),
        "heldout": sorted(split.heldout),
        "objects": list(world.objects),
        "feature_dim": world.spec.feature_dim,
        "embed_dim": world.spec.embed_dim,
        "counts": {
            "train_paired": len(split.train_paired),
            "test_paired": len(split.test_paired),
            "image_only": len(split.image_only),
            "text_only": len(split.text_only),
        },
        "files": files,
    }
    manifest_path = outdir / "manifest.json"
    dataio.write_json(manifest_path, manifest)
    return manifest_path
