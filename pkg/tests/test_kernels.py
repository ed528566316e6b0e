import numpy as np
import pytest

from conftest import two_half_planes
from oracles import canonical, naive_fh, naive_mean_shift
from segvol.kernels import (HypothesisParams, SegmentationVolume, default_schedule, fh_segment,
                            generate_volume, load_volume, ms_segment, param_schedule,
                            save_volume)
from segvol.labels import connected_components, is_partition


def random_planes(rng, h, w):
    return rng.uniform([0, -60, -60], [100, 60, 60], size=(h, w, 3))


# ---------------------------------------------------------------- FH

@pytest.mark.parametrize("kappa", [1.0, 50.0, 5000.0])
def test_fh_uniform_image_is_one_segment(kappa):
    planes = np.full((7, 9, 3), 42.0)
    assert fh_segment(planes, kappa).max() == 0


def test_fh_two_halves():
    labels = fh_segment(two_half_planes(), kappa=1.0)
    assert labels.max() == 1
    assert np.all(labels[:, :4] == labels[0, 0])
    assert np.all(labels[:, 4:] == labels[0, 7])


@pytest.mark.parametrize("connectivity", [4, 8])
@pytest.mark.parametrize("kappa", [10.0, 100.0, 1000.0])
def test_fh_matches_naive_replay(rng, kappa, connectivity):
    for _ in range(3):
        planes = random_planes(rng, 16, 16)
        ours = fh_segment(planes, kappa, connectivity=connectivity)
        assert np.array_equal(canonical(ours), naive_fh(planes, kappa, connectivity))


def test_fh_output_is_contiguous_partition(rng):
    labels = fh_segment(random_planes(rng, 12, 12), 30.0)
    assert is_partition(labels)


def test_fh_segment_count_non_increasing_on_two_regions(rng):
    planes = two_half_planes(16, 16) + rng.normal(scale=0.5, size=(16, 16, 3))
    counts = [fh_segment(planes, p.value).max() + 1 for p in default_schedule("fh")]
    assert all(b <= a for a, b in zip(counts, counts[1:]))


def test_fh_rejects_bad_kappa():
    with pytest.raises(ValueError):
        fh_segment(np.zeros((2, 2, 3)), 0.0)


# ---------------------------------------------------------------- mean shift

def test_ms_uniform_image():
    assert ms_segment(np.full((6, 6, 3), 10.0), 3.0, 4.0).max() == 0


def test_ms_two_halves():
    labels = ms_segment(two_half_planes(10, 10), 3.0, 5.0)
    assert labels.max() == 1
    assert len(np.unique(labels[:, :5])) == 1 and len(np.unique(labels[:, 5:])) == 1


def test_ms_matches_naive_oracle(rng):
    # smooth random field so modes are non-trivial
    base = rng.uniform(0, 60, size=(4, 4, 3))
    planes = np.kron(base, np.ones((3, 3, 1))) + rng.normal(scale=2.0, size=(12, 12, 3))
    ours = ms_segment(planes, 3.0, 12.0)
    assert np.array_equal(canonical(ours), naive_mean_shift(planes, 3.0, 12.0))


# ---------------------------------------------------------------- schedule

def test_schedule_geometric_midpoint():
    vals = [p.value for p in param_schedule("fh", 1.0, 100.0, 3)]
    np.testing.assert_allclose(vals, [1.0, 10.0, 100.0], rtol=1e-15)


def test_schedule_ratio_two():
    vals = np.array([p.value for p in param_schedule("fh", 5.0, 5.0 * 2 ** 9, 10)])
    np.testing.assert_allclose(vals[1:] / vals[:-1], 2.0, rtol=1e-12)


def test_schedule_endpoints():
    sched = param_schedule("fh", 100.0, 6000.0, 20)
    vals = [p.value for p in sched]
    assert len(vals) == 20 and vals[0] == 100.0 and vals[-1] == 6000.0
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert [p.index for p in sched] == list(range(20))


@pytest.mark.parametrize("args", [("fh", 1.0, 10.0, 2), ("fh", 5.0, 5.0, 4), ("fh", 6.0, 5.0, 4),
                                  ("xx", 1.0, 2.0, 3)])
def test_schedule_rejects(args):
    with pytest.raises(ValueError):
        param_schedule(*args)


def test_hypothesis_params_validation():
    with pytest.raises(ValueError):
        HypothesisParams("fh", 0.0, 0)


# ---------------------------------------------------------------- volume

def test_volume_uniform_image():
    vol = generate_volume(np.full((5, 5, 3), 7.0), param_schedule("fh", 1, 100, 3))
    assert len(vol) == 3 and vol.segment_counts == [1, 1, 1]


def test_volume_equals_individual_runs(rng):
    planes = random_planes(rng, 10, 12)
    sched = param_schedule("fh", 5, 500, 4)
    vol = generate_volume(planes, sched)
    for p, lm in zip(sched, vol):
        assert np.array_equal(lm, fh_segment(planes, p.value))


@pytest.mark.parametrize("kernel", ["fh", "ms"])
def test_volume_thread_count_does_not_matter(rng, kernel):
    planes = random_planes(rng, 14, 14)
    sched = default_schedule(kernel, k=5)
    a = generate_volume(planes, sched, n_jobs=1)
    b = generate_volume(planes, sched, n_jobs=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_volume_finest_has_more_segments_on_natural_image():
    from skimage import data
    from segvol.color import rgb_to_lab

    planes = rgb_to_lab(data.astronaut()[::4, ::4])
    vol = generate_volume(planes, default_schedule("fh"))
    counts = vol.segment_counts
    assert counts[0] > counts[-1]


def test_volume_rejects_unsorted_schedule():
    sched = param_schedule("fh", 1, 100, 3)[::-1]
    with pytest.raises(ValueError):
        generate_volume(np.zeros((3, 3, 3)), sched)


def test_volume_rejects_mismatched_maps():
    with pytest.raises(ValueError):
        SegmentationVolume([HypothesisParams("fh", 1, 0), HypothesisParams("fh", 2, 1)],
                           [np.zeros((2, 2), int), np.zeros((3, 2), int)])


def test_volume_cache_round_trip(tmp_path, rng):
    planes = random_planes(rng, 9, 11)
    vol = generate_volume(planes, param_schedule("fh", 5, 500, 3))
    save_volume(vol, tmp_path / "vol", image_hash="abc")
    back = load_volume(tmp_path / "vol", image_hash="abc")
    assert [p.value for p in back.params] == [p.value for p in vol.params]
    assert all(np.array_equal(x, y) for x, y in zip(back, vol))
    assert load_volume(tmp_path / "vol", image_hash="other") is None


def test_connected_components_splits_diagonal_pieces():
    labels = np.array([[0, 1], [1, 0]])
    cc = connected_components(labels)
    assert cc.max() == 3
