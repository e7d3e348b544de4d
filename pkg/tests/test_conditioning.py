"""Embedding stand-ins, the intensity head and its distillation, and the
rich-to-sparse conditioning curriculum."""

import json
import math

import numpy as np
import pytest

from fdsm.conditioning import (
    ActionClass,
    CurriculumConfig,
    DistillConfig,
    class_condition,
    curriculum_prob,
    embed_rich,
    embed_text,
    init_head,
    kinematic_axis,
    load_classes,
    predict_intensity,
    sample_condition,
    train_head,
)


def make_class(cid=0, label="walk", s_gt=0, n_desc=3):
    descs = tuple(f"{label} described {i}" for i in range(n_desc))
    return ActionClass(id=cid, label=label, rich_descriptions=descs, s_gt=s_gt)


# -- embeddings -----------------------------------------------------------------

def test_embed_text_unit_norm_and_deterministic():
    a = embed_text("jump", 64, 123)
    b = embed_text("jump", 64, 123)
    np.testing.assert_array_equal(a, b)
    assert np.linalg.norm(a) == pytest.approx(1.0, rel=1e-12)
    assert not np.allclose(a, embed_text("jump", 64, 124))
    assert not np.allclose(a, embed_text("jumps", 64, 123))


def test_embed_text_rejects_bad_dim():
    with pytest.raises(ValueError, match="dim"):
        embed_text("x", 0, 1)


def test_embed_rich_encodes_intensity_along_shared_axis():
    dim, seed = 64, 7
    axis = kinematic_axis(dim, seed)
    lo = embed_rich("walk", "a walk", 0, dim, seed)
    hi = embed_rich("walk", "a walk", 1, dim, seed)
    # identical except for the intensity contribution, so the difference
    # correlates with the axis for the dynamic class
    assert float(hi @ axis) > float(lo @ axis)
    assert np.linalg.norm(hi) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError, match="s_gt"):
        embed_rich("walk", "a walk", 2, dim, seed)


def test_class_condition_sources():
    cls = make_class(s_gt=1)
    dim, seed = 32, 99
    sparse = class_condition(cls, "sparse", dim, seed)
    np.testing.assert_array_equal(sparse, embed_text(cls.label, dim, seed))
    rich = class_condition(cls, "rich-mean", dim, seed)
    stack = np.stack(
        [embed_rich(cls.label, d, cls.s_gt, dim, seed) for d in cls.rich_descriptions]
    )
    mean = stack.mean(axis=0)
    np.testing.assert_allclose(rich, mean / np.linalg.norm(mean), rtol=1e-12)
    np.testing.assert_array_equal(class_condition(cls, "neutral", dim, seed), np.zeros(dim))
    with pytest.raises(ValueError, match="source"):
        class_condition(cls, "oracle", dim, seed)


def test_class_condition_requires_descriptions_for_rich_mean():
    bare = ActionClass(id=1, label="sit", rich_descriptions=(), s_gt=0)
    with pytest.raises(ValueError, match="descriptions"):
        class_condition(bare, "rich-mean", 16, 0)


def test_action_class_validates_intensity_bit():
    with pytest.raises(ValueError, match="s_gt"):
        ActionClass(id=0, label="x", rich_descriptions=("d",), s_gt=2)


def test_load_classes_roundtrip(tmp_path):
    records = [
        {"id": 0, "label": "walk", "rich_descriptions": ["slow walk"], "s_gt": 0},
        {"id": 1, "label": "sprint", "rich_descriptions": ["fast run", "dash"], "s_gt": 1},
    ]
    path = tmp_path / "classes.json"
    path.write_text(json.dumps(records))
    classes = load_classes(path)
    assert [c.label for c in classes] == ["walk", "sprint"]
    assert classes[1].rich_descriptions == ("fast run", "dash")
    records.append({"id": 0, "label": "dup", "rich_descriptions": ["d"], "s_gt": 0})
    path.write_text(json.dumps(records))
    with pytest.raises(ValueError, match="unique"):
        load_classes(path)


# -- intensity head -------------------------------------------------------------

def test_head_predict_matches_manual_forward():
    rng = np.random.default_rng(11)
    head = init_head(8, 16, rng)
    x = rng.normal(size=8)
    hidden = np.maximum(x @ head.w1 + head.b1, 0.0)
    logit = float((hidden @ head.w2 + head.b2)[0])
    assert predict_intensity(head, x) == pytest.approx(1.0 / (1.0 + math.exp(-logit)))
    batch = rng.normal(size=(5, 8))
    out = head.predict(batch)
    assert out.shape == (5,)
    assert np.all((out > 0.0) & (out < 1.0))


def test_head_array_roundtrip():
    from fdsm.conditioning import KinematicHead

    rng = np.random.default_rng(12)
    head = init_head(8, 16, rng)
    clone = KinematicHead.from_arrays(head.as_arrays())
    x = rng.normal(size=(3, 8))
    np.testing.assert_array_equal(head.predict(x), clone.predict(x))


def test_train_head_separates_intensities_and_generalizes():
    # 8 classes with alternating intensity bits; hold 2 out entirely
    classes = [
        make_class(cid=i, label=f"act-{i}", s_gt=i % 2, n_desc=4) for i in range(10)
    ]
    seen, held_out = classes[:8], classes[8:]
    cfg = DistillConfig()
    head, info = train_head(seen, cfg, embed_seed=6, init_rng=np.random.default_rng(6))
    assert info["train_accuracy"] >= 0.95
    assert info["loss"] < 0.3
    # held-out classes score on the correct side of 0.5 via the shared axis
    for cls in held_out:
        emb = class_condition(cls, "rich-mean", 64, 6)
        score = predict_intensity(head, emb)
        assert (score > 0.5) == bool(cls.s_gt), (cls.id, score)


def test_train_head_rejects_empty_class_list():
    cfg = DistillConfig(text_dim=8, hidden=8, epochs=1)
    with pytest.raises(ValueError, match="empty"):
        train_head([], cfg, 0, np.random.default_rng(0))


# -- curriculum --------------------------------------------------------------------

def test_cosine_curriculum_endpoints_and_midpoint():
    cfg = CurriculumConfig(kind="cosine")
    assert curriculum_prob(0, 100, cfg) == pytest.approx(1.0)
    assert curriculum_prob(100, 100, cfg) == pytest.approx(0.0, abs=1e-15)
    assert curriculum_prob(50, 100, cfg) == pytest.approx(0.5)


def test_linear_and_step_and_fixed_curricula():
    lin = CurriculumConfig(kind="linear")
    assert curriculum_prob(25, 100, lin) == pytest.approx(0.75)
    step = CurriculumConfig(kind="step", step_interval=10)
    assert curriculum_prob(0, 100, step) == 1.0
    assert curriculum_prob(10, 100, step) == 0.5
    assert curriculum_prob(25, 100, step) == 0.25
    fixed = CurriculumConfig(kind="fixed", fixed_p=0.3)
    assert curriculum_prob(0, 100, fixed) == 0.3
    assert curriculum_prob(100, 100, fixed) == 0.3


def test_curriculum_monotone_non_increasing():
    horizon = 200
    for kind in ("cosine", "linear", "step"):
        cfg = CurriculumConfig(kind=kind)
        vals = [curriculum_prob(e, horizon, cfg) for e in range(horizon + 1)]
        assert all(a >= b for a, b in zip(vals, vals[1:])), kind


def test_curriculum_validation():
    with pytest.raises(ValueError, match="kind"):
        CurriculumConfig(kind="exponential")
    with pytest.raises(ValueError, match="fixed_p"):
        CurriculumConfig(kind="fixed", fixed_p=1.5)
    cfg = CurriculumConfig()
    with pytest.raises(ValueError, match="horizon"):
        curriculum_prob(0, 0, cfg)
    with pytest.raises(ValueError, match="outside"):
        curriculum_prob(101, 100, cfg)
    with pytest.raises(ValueError, match="interval"):
        curriculum_prob(1, 10, CurriculumConfig(kind="step", step_interval=0))


def test_sample_condition_empirical_rich_fraction():
    cls = make_class(n_desc=4)
    rng = np.random.default_rng(31)
    kinds = [sample_condition(cls, 0.5, rng, 16, 0)[1] for _ in range(10_000)]
    frac = kinds.count("rich") / len(kinds)
    assert abs(frac - 0.5) < 0.02


def test_sample_condition_extremes_and_vectors():
    cls = make_class(n_desc=2)
    rng = np.random.default_rng(32)
    emb, kind = sample_condition(cls, 0.0, rng, 16, 7)
    assert kind == "sparse"
    np.testing.assert_array_equal(emb, embed_text(cls.label, 16, 7))
    emb, kind = sample_condition(cls, 1.0, rng, 16, 7)
    assert kind == "rich"
    options = [
        embed_rich(cls.label, d, cls.s_gt, 16, 7) for d in cls.rich_descriptions
    ]
    assert any(np.allclose(emb, o) for o in options)
    with pytest.raises(ValueError, match="probability"):
        sample_condition(cls, 1.2, rng, 16, 7)
