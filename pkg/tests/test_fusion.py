import math

import numpy as np
import pytest

import novocap.autodiff as ad
from novocap.fusion import CaptionModel
from novocap.training import (Adam, JointTrainer, Sources, TrainConfig,
                              joint_step)
from novocap.vocab import EmbeddingTable, Vocabulary


def small_model(n_tokens=5, dim=4, hidden=3, feature_dim=3, seed=0,
                zero=False, frozen=True):
    vocab = Vocabulary([f"t{i}" for i in range(n_tokens)])
    rng = np.random.default_rng(seed)
    table = EmbeddingTable(vocab, rng.normal(size=(len(vocab), dim)), frozen=frozen)
    model = CaptionModel.build(vocab, table, hidden, feature_dim, 4, seed)
    if zero:
        for _, p in model.lm.named_parameters() + model.vision.named_parameters():
            p.data[:] = 0.0
    return model


def test_fusion_identity_with_zero_image_term():
    model = small_model(seed=3)
    v = len(model.vocab)
    zero_im = ad.Tensor(np.zeros(v))
    state = model.lm.init_state()
    s1, lm_logits = model.lm.step(state, 3)
    lm_probs = ad.softmax(lm_logits)
    s2, fused = model.fused_distribution(state, 3, zero_im)
    assert np.array_equal(fused.data, lm_probs.data)
    assert np.array_equal(s1.hidden.data, s2.hidden.data)


def test_fusion_with_zero_lm_equals_image_softmax():
    model = small_model(zero=True)
    f_im = ad.Tensor(np.array([0.3, -1.0, 0.0, 2.0, -0.4, 0.9, 0.0, 0.0]))
    _, probs = model.fused_distribution(model.lm.init_state(), 3, f_im)
    assert np.allclose(probs.data, ad.softmax(f_im).data, atol=1e-15)


def test_fusion_hand_value():
    # softmax([1,0] + [0,1]) = softmax([1,1]) = [0.5, 0.5]
    probs = ad.softmax(ad.Tensor([1.0, 0.0]) + ad.Tensor([0.0, 1.0]))
    assert np.allclose(probs.data, [0.5, 0.5], atol=1e-15)


def test_caption_loss_uniform_when_all_zero():
    model = small_model(zero=True)
    sent = [3, 4, 5]
    feats = np.array([0.5, -0.3, 1.0])
    loss = float(model.caption_loss(feats, sent).data)
    assert loss == pytest.approx((len(sent) + 1) * math.log(len(model.vocab)), abs=1e-9)


def test_caption_loss_reduces_to_lm_loss_with_zero_vision():
    model = small_model(seed=5)
    for _, p in model.vision.named_parameters():
        p.data[:] = 0.0
    sent = [3, 6, 4]
    feats = np.array([1.0, 2.0, -0.5])
    assert float(model.caption_loss(feats, sent).data) == pytest.approx(
        float(model.lm.sentence_loss(sent).data), abs=1e-12)


def test_caption_loss_empty_rejected():
    model = small_model()
    with pytest.raises(ValueError):
        model.caption_loss(np.zeros(3), [])


def test_caption_loss_gradient_all_parameters():
    model = small_model(seed=7)
    sent = [3, 5]
    feats = np.random.default_rng(2).normal(size=3)
    params = model.lm.named_parameters() + model.vision.named_parameters()
    for name, p in params:
        err = ad.finite_diff_check(lambda _: model.caption_loss(feats, sent), p)
        assert err < 1e-4, f"{name}: {err}"


def test_caption_loss_gradient_through_unfrozen_embeddings():
    model = small_model(seed=7, frozen=False)
    feats = np.random.default_rng(2).normal(size=3)
    err = ad.finite_diff_check(lambda _: model.caption_loss(feats, [3, 5]),
                               model.table.matrix)
    assert err < 1e-4


def _one_example_batches(model, rng):
    feats = rng.normal(size=model.vision.feature_dim)
    paired = [(feats, [3, 4])]
    images = [(rng.normal(size=model.vision.feature_dim), {4, 5})]
    texts = [[5, 3, 6]]
    return paired, images, texts


def test_joint_step_breakdown_identity_and_unit_weights():
    rng = np.random.default_rng(0)
    model = small_model(seed=1)
    paired, images, texts = _one_example_batches(model, rng)
    cfg = TrainConfig(steps=1, alpha=1.0, beta=1.0, learning_rate=1e-3, seed=0)
    opt = Adam(model.trainable_parameters(), lr=cfg.learning_rate)
    b = joint_step(model, paired, images, texts, cfg, opt)
    assert b.total == pytest.approx(b.l_cm + b.l_im + b.l_lm, abs=1e-9)

    for alpha, beta in ((0.5, 2.0), (0.0, 1.0), (2.0, 0.0)):
        model = small_model(seed=1)
        cfg = TrainConfig(steps=1, alpha=alpha, beta=beta, seed=0)
        opt = Adam(model.trainable_parameters(), lr=cfg.learning_rate)
        b = joint_step(model, paired, images, texts, cfg, opt)
        assert b.total == pytest.approx(b.l_cm + alpha * b.l_im + beta * b.l_lm, abs=1e-9)
        assert b.l_im > 0 and b.l_lm > 0  # reported even when excluded from total


def test_joint_step_zero_weights_matches_pure_caption_update():
    rng = np.random.default_rng(4)
    feats = rng.normal(size=3)
    paired = [(feats, [3, 4])]
    images = [(rng.normal(size=3), {4})]
    texts = [[5, 6]]

    model_a = small_model(seed=2)
    cfg = TrainConfig(steps=1, alpha=0.0, beta=0.0, learning_rate=1e-3, seed=0)
    opt_a = Adam(model_a.trainable_parameters(), lr=cfg.learning_rate)
    joint_step(model_a, paired, images, texts, cfg, opt_a)

    model_b = small_model(seed=2)
    opt_b = Adam(model_b.trainable_parameters(), lr=cfg.learning_rate)
    loss = model_b.caption_loss(feats, [3, 4])
    loss.backward()
    opt_b.step(clip_norm=cfg.clip_norm)

    for (name, pa), (_, pb) in zip(model_a.named_parameters(), model_b.named_parameters()):
        assert np.array_equal(pa.data, pb.data), name


def test_joint_step_all_empty_rejected():
    model = small_model()
    cfg = TrainConfig(steps=1)
    opt = Adam(model.trainable_parameters(), lr=1e-3)
    with pytest.raises(ValueError):
        joint_step(model, [], [], [], cfg, opt)


def test_shared_parameters_updated_in_place():
    rng = np.random.default_rng(0)
    model = small_model(seed=1)
    paired, images, texts = _one_example_batches(model, rng)
    vision_arrays = [p.data for _, p in model.vision.named_parameters()]
    lm_arrays = [p.data for _, p in model.lm.named_parameters()]
    before = [a.copy() for a in vision_arrays]
    cfg = TrainConfig(steps=1, alpha=1.0, beta=1.0, learning_rate=1e-2, seed=0)
    opt = Adam(model.trainable_parameters(), lr=cfg.learning_rate)
    joint_step(model, paired, images, texts, cfg, opt)
    # same storage objects, mutated in place: the image path and the caption
    # path cannot drift apart
    for arr, (name, p) in zip(vision_arrays, model.vision.named_parameters()):
        assert arr is p.data, name
    for arr, (name, p) in zip(lm_arrays, model.lm.named_parameters()):
        assert arr is p.data, name
    assert any(not np.array_equal(a, b) for a, b in zip(before, vision_arrays))


def test_heldout_token_can_win_fused_argmax():
    # the image term spans the whole vocabulary, so a token absent from
    # paired training still receives probability once vision favours it
    model = small_model(seed=3)
    v = len(model.vocab)
    f_im = np.zeros(v)
    heldout = 6
    f_im[heldout] = 10.0
    _, probs = model.fused_distribution(model.lm.init_state(), 3, ad.Tensor(f_im))
    assert int(np.argmax(probs.data)) == heldout


def _tiny_sources(model, rng, n_paired=12, n_images=10, n_text=14):
    fd = model.vision.feature_dim
    v = len(model.vocab)
    paired = [(rng.normal(size=fd), [int(rng.integers(3, v)) for _ in range(3)])
              for _ in range(n_paired)]
    images = [(rng.normal(size=fd), {int(rng.integers(3, v))}) for _ in range(n_images)]
    texts = [[int(rng.integers(3, v)) for _ in range(3)] for _ in range(n_text)]
    return Sources(paired, images, texts)


def test_trainer_paired_only_runs():
    model = small_model(seed=2)
    rng = np.random.default_rng(1)
    sources = _tiny_sources(model, rng)
    sources.image_only = []
    sources.text_only = []
    cfg = TrainConfig(steps=5, batch_size=4, seed=0)
    log = JointTrainer(model, sources, cfg).run(5)
    assert len(log) == 5
    assert all(b.l_im == 0.0 and b.l_lm == 0.0 for b in log)
    assert all(b.total == b.l_cm for b in log)


def test_trainer_loss_trend_decreases():
    model = small_model(n_tokens=6, seed=2)
    sources = _tiny_sources(model, np.random.default_rng(1))
    cfg = TrainConfig(steps=500, batch_size=4, learning_rate=3e-3, seed=0)
    log = JointTrainer(model, sources, cfg).run(500)
    first = np.mean([b.total for b in log[:50]])
    last = np.mean([b.total for b in log[-50:]])
    assert last < first


def test_trainer_seeded_determinism_bitwise():
    def run():
        model = small_model(n_tokens=6, seed=2)
        sources = _tiny_sources(model, np.random.default_rng(1))
        cfg = TrainConfig(steps=40, batch_size=4, seed=9)
        return JointTrainer(model, sources, cfg).run(40)

    log_a, log_b = run(), run()
    assert [(b.l_cm, b.l_im, b.l_lm, b.total) for b in log_a] == \
           [(b.l_cm, b.l_im, b.l_lm, b.total) for b in log_b]


def test_trainer_requires_paired_source():
    model = small_model()
    with pytest.raises(ValueError):
        JointTrainer(model, Sources([], [], []), TrainConfig(steps=1))


def test_fixed_visual_mode_freezes_head():
    model = small_model(seed=2)
    sources = _tiny_sources(model, np.random.default_rng(1))
    before = [p.data.copy() for _, p in model.vision.named_parameters()]
    cfg = TrainConfig(steps=10, batch_size=4, alpha=0.0, beta=0.0, seed=0)
    JointTrainer(model, sources, cfg, visual_mode="fixed").run(10)
    for (name, p), old in zip(model.vision.named_parameters(), before):
        assert np.array_equal(p.data, old), name


def test_tied_rows_survive_unfrozen_joint_training():
    model = small_model(seed=2, frozen=False)
    sources = _tiny_sources(model, np.random.default_rng(1))
    cfg = TrainConfig(steps=10, batch_size=4, seed=0)
    trainer = JointTrainer(model, sources, cfg)
    matrix_before = model.table.matrix.data.copy()
    trainer.run(10)
    matrix = model.table.matrix
    assert not np.array_equal(matrix.data, matrix_before)  # embeddings trained
    for tok in range(len(model.vocab)):
        looked_up = model.table.embed(tok).data
        # the output projection row for tok is literally matrix row tok
        assert looked_up is not matrix.data[tok]  # embed copies...
        assert np.array_equal(looked_up, matrix.data[tok])  # ...but values agree
