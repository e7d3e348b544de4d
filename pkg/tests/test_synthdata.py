"""Synthetic benchmark generator: signatures, samples with known spectral
support, the seen/unseen split, robustness transforms, and JSONL export."""

import numpy as np
import pytest

from fdsm.conditioning import ActionClass
from fdsm.spectral import band_energy, dct_temporal
from fdsm.synthdata import (
    ClassSignature,
    Sample,
    assign_signatures,
    crop,
    downsample,
    export_dataset,
    generate_class_set,
    import_dataset,
    make_dataset,
    split_classes,
    synth_sample,
)

LENGTH, CUTOFF, JOINTS = 16, 4, 5


def make_classes(n=10, high_every_other=True):
    out = []
    for i in range(n):
        s = i % 2 if high_every_other else 0
        out.append(
            ActionClass(
                id=i,
                label=f"action-{i:03d}",
                rich_descriptions=(f"action-{i:03d} variant 0",),
                s_gt=s,
            )
        )
    return out


# -- signatures -----------------------------------------------------------------

def test_static_classes_have_empty_detail_band():
    classes = make_classes(6)
    sigs = assign_signatures(
        classes, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(0)
    )
    for cls in classes:
        sig = sigs[cls.id]
        assert sig.intensity == cls.s_gt
        if cls.s_gt == 0:
            assert sig.high_freqs.size == 0
            assert sig.high_amps.shape == (0, JOINTS)
        else:
            assert sig.high_freqs.size > 0
            assert np.all(sig.high_freqs >= CUTOFF)
            assert np.all(sig.high_freqs < LENGTH)
            assert sig.high_amps.shape == (sig.high_freqs.size, JOINTS)


def test_freq_only_mode_shares_one_low_template():
    classes = make_classes(8)
    sigs = assign_signatures(
        classes, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(1)
    )
    ref = sigs[0]
    for sig in sigs.values():
        np.testing.assert_array_equal(sig.low_freqs, ref.low_freqs)
        np.testing.assert_array_equal(sig.low_amps, ref.low_amps)
        assert np.all(sig.low_freqs < CUTOFF)


def test_mixed_mode_gives_distinct_low_templates():
    classes = make_classes(8)
    sigs = assign_signatures(
        classes, LENGTH, CUTOFF, JOINTS, "mixed", np.random.default_rng(2)
    )
    amps = [tuple(s.low_amps) for s in sigs.values()]
    assert len(set(amps)) > 1


def test_dynamic_signatures_are_disjoint_while_pool_lasts():
    classes = make_classes(8)  # 4 dynamic classes, 12 detail bins, 3 each
    sigs = assign_signatures(
        classes, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(3)
    )
    used = [k for s in sigs.values() for k in s.high_freqs.tolist()]
    assert len(used) == len(set(used))


def test_detail_amp_scales_high_band_draws():
    classes = make_classes(4)
    lo = assign_signatures(
        classes, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(4),
        detail_amp=1.0,
    )
    hi = assign_signatures(
        classes, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(4),
        detail_amp=2.0,
    )
    for cid in (1, 3):
        np.testing.assert_allclose(hi[cid].high_amps, 2.0 * lo[cid].high_amps, rtol=1e-15)


def test_assign_signatures_validation():
    classes = make_classes(2)
    with pytest.raises(ValueError, match="mode"):
        assign_signatures(classes, LENGTH, CUTOFF, JOINTS, "both", np.random.default_rng(0))
    with pytest.raises(ValueError, match="cutoff"):
        assign_signatures(classes, LENGTH, 16, JOINTS, "mixed", np.random.default_rng(0))


# -- split -------------------------------------------------------------------------

def test_split_alternates_intensities_on_unseen_side():
    classes = make_classes(10)
    for seed in range(6):
        seen, unseen = split_classes(classes, 0.8, np.random.default_rng(seed))
        assert len(unseen) == 2
        assert len(seen) == 8
        assert sorted(seen + unseen) == list(range(10))
        bits = sorted(classes[i].s_gt for i in unseen)
        assert bits == [0, 1]  # one static, one dynamic — separable by gate


def test_split_validates_fraction():
    with pytest.raises(ValueError, match="fraction"):
        split_classes(make_classes(4), 1.2, np.random.default_rng(0))


# -- samples ---------------------------------------------------------------------

def sig_for(cid, high=(), amps=None, intensity=0):
    high = np.asarray(high, dtype=np.int64)
    if amps is None:
        amps = np.ones((high.size, JOINTS))
    return ClassSignature(
        class_id=cid,
        low_freqs=np.arange(CUTOFF, dtype=np.int64),
        low_amps=np.array([1.0, -0.5, 0.75, 0.25]),
        high_freqs=high,
        high_amps=np.asarray(amps, dtype=np.float64),
        intensity=intensity,
    )


def test_static_sample_support_is_exactly_the_low_band():
    sig = sig_for(0)
    z0 = synth_sample(sig, 8, LENGTH, JOINTS, 0.0, np.random.default_rng(5))
    report = band_energy(z0, CUTOFF)
    assert report.high == pytest.approx(0.0, abs=1e-20)
    assert report.low > 0.0


def test_dynamic_sample_energy_lands_on_declared_bins():
    high = (6, 11)
    amps = np.full((2, JOINTS), 0.8)
    sig = sig_for(1, high=high, amps=amps, intensity=1)
    z0 = synth_sample(sig, 8, LENGTH, JOINTS, 0.0, np.random.default_rng(6))
    spec = dct_temporal(z0)
    hot = np.zeros(LENGTH, dtype=bool)
    hot[list(sig.low_freqs) + list(high)] = True
    assert np.all(np.abs(spec[:, ~hot, :]) < 1e-12)
    # per-channel sign flips keep each bin's energy fixed at amp^2 * L/2
    for k, amp_row in zip(high, amps):
        energy = np.sum(spec[:, k, :] ** 2, axis=1)  # per channel
        expected = np.sum(amp_row**2) * LENGTH / 2.0
        np.testing.assert_allclose(energy, expected, rtol=1e-12)


def test_sample_channel_polarity_varies_but_magnitude_is_shared():
    sig = sig_for(1, high=(9,), amps=np.full((1, JOINTS), 0.7), intensity=1)
    rng = np.random.default_rng(7)
    flips = 0
    for _ in range(20):
        z0 = synth_sample(sig, 8, LENGTH, JOINTS, 0.0, rng)
        coef = dct_temporal(z0)[:, 9, 0]  # one joint, all channels
        np.testing.assert_allclose(np.abs(coef), np.abs(coef[0]), rtol=1e-12)
        if len(np.unique(np.sign(coef))) > 1:
            flips += 1
    assert flips > 10  # signs genuinely vary across channels


def test_sample_determinism_and_jitter():
    sig = sig_for(1, high=(8,), intensity=1)
    a = synth_sample(sig, 4, LENGTH, JOINTS, 0.05, np.random.default_rng(42))
    b = synth_sample(sig, 4, LENGTH, JOINTS, 0.05, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)
    c = synth_sample(sig, 4, LENGTH, JOINTS, 0.05, np.random.default_rng(43))
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError, match="jitter"):
        synth_sample(sig, 4, LENGTH, JOINTS, -0.1, np.random.default_rng(0))


def test_make_dataset_split_membership_and_counts():
    classes = make_classes(10)
    rng = np.random.default_rng(8)
    sigs = assign_signatures(classes, LENGTH, CUTOFF, JOINTS, "freq-only", rng)
    seen, unseen = split_classes(classes, 0.8, rng)
    train, test = make_dataset(
        classes, sigs, seen, unseen, 8, LENGTH, JOINTS, 0.02, 12, 8, rng
    )
    assert len(train) == 8 * 12
    assert len(test) == 2 * 8
    assert {s.class_id for s in train} == set(seen)
    assert {s.class_id for s in test} == set(unseen)
    assert all(s.split == "seen" for s in train)
    assert all(s.split == "unseen" for s in test)


def test_generate_class_set_end_to_end():
    classes, sigs, seen, unseen = generate_class_set(
        10, 0.8, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(9)
    )
    assert len(classes) == 10
    assert len(sigs) == 10
    assert len(seen) == 8 and len(unseen) == 2
    assert all(len(c.rich_descriptions) == 5 for c in classes)
    with pytest.raises(ValueError, match="class"):
        generate_class_set(0, 0.8, LENGTH, CUTOFF, JOINTS, "freq-only", np.random.default_rng(0))


# -- robustness transforms ----------------------------------------------------------

def test_crop_window_and_determinism():
    z0 = np.arange(2 * 8 * 3, dtype=np.float64).reshape(2, 8, 3)
    out = crop(z0, 4, deterministic=True)
    np.testing.assert_array_equal(out, z0[:, :4, :])
    assert crop(z0, 8) is z0  # full-length crop is a no-op
    rng = np.random.default_rng(10)
    windows = {crop(z0, 4, rng)[0, 0, 0] for _ in range(16)}
    assert len(windows) > 1  # random starts actually vary
    with pytest.raises(ValueError, match="crop length"):
        crop(z0, 9)
    with pytest.raises(ValueError, match="rng"):
        crop(z0, 4)


def test_downsample_stride_and_errors():
    z0 = np.arange(2 * 8 * 3, dtype=np.float64).reshape(2, 8, 3)
    out = downsample(z0, 2)
    np.testing.assert_array_equal(out, z0[:, ::2, :])
    assert downsample(z0, 1) is z0
    with pytest.raises(ValueError, match="factor"):
        downsample(z0, 0)
    with pytest.raises(ValueError, match="divisible"):
        downsample(z0, 3)


# -- export / import -------------------------------------------------------------------

def test_dataset_jsonl_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    samples = [
        Sample(class_id=3, split="seen", z0=rng.normal(size=(2, 4, 3))),
        Sample(class_id=7, split="unseen", z0=rng.normal(size=(2, 4, 3))),
    ]
    path = tmp_path / "data.jsonl"
    export_dataset(samples, path)
    back = import_dataset(path)
    assert len(back) == 2
    for orig, rec in zip(samples, back):
        assert rec.class_id == orig.class_id
        assert rec.split == orig.split
        np.testing.assert_array_equal(rec.z0, orig.z0)
