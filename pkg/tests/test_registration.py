import math

import numpy as np
import pytest

from boxswarm.errors import CountMismatch, RegistrationPairError
from boxswarm.geometry import SimilarityTransform, transform_box_points
from boxswarm.registration import (
    BoxSet,
    box_icp,
    matching_accuracy,
    relabel_from_predecessor,
    ring_register,
    rotation_error,
    success_model,
)
from boxswarm.sim.scene import SyntheticDetector, ViewRegime, make_scene, render_view, sample_pose


def _scene_set(seed, n=9):
    scene = make_scene(n, rng=seed)
    return scene, BoxSet(scene.corners(), scene.ids)


def test_boxset_validation():
    with pytest.raises(ValueError):
        BoxSet(np.zeros((2, 3, 2)), (0, 1))
    with pytest.raises(ValueError):
        BoxSet(np.zeros((2, 4, 2)), (0, 0))
    with pytest.raises(ValueError):
        BoxSet(np.zeros((2, 4, 2)), (0,))


def test_count_mismatch():
    _, s = _scene_set(0)
    other = BoxSet(s.corners[:5], s.ids[:5])
    with pytest.raises(CountMismatch):
        box_icp(s, other)
    with pytest.raises(CountMismatch):
        box_icp(BoxSet(s.corners[:1], (0,)), BoxSet(s.corners[:1], (0,)))


def test_identity_registration():
    _, s = _scene_set(1)
    r = box_icp(s, s)
    assert r.converged
    assert list(r.matching) == list(range(len(s)))
    assert r.final_cost == 0.0
    assert np.allclose(r.transform.matrix, np.eye(3), atol=1e-12)


def test_shuffled_exact_transform_recovered():
    scene, s = _scene_set(2)
    rng = np.random.default_rng(7)
    T = SimilarityTransform.about(scene.center(), 0.6, 1.1, (120.0, -80.0))
    perm = rng.permutation(len(s))
    moved = BoxSet(transform_box_points(T, s.corners)[perm], tuple(range(len(s))))
    r = box_icp(s, moved)
    assert np.allclose(r.transform.matrix, T.matrix, atol=1e-6)
    assert np.array_equal(perm[r.matching], np.arange(len(s)))
    assert rotation_error(r, 0.6) < 1e-9


def test_cost_trace_never_increases():
    scene, s = _scene_set(3)
    rng = np.random.default_rng(3)
    view = render_view(scene, sample_pose(scene, rng), SyntheticDetector(1.0, 3.0), rng)
    r = box_icp(s, view.observed, rotation_starts=1)
    assert all(b <= a for a, b in zip(r.trace, r.trace[1:]))
    assert 1 <= r.iterations <= 50


def test_matching_accuracy_on_posed_views():
    scene, s = _scene_set(4)
    rng = np.random.default_rng(4)
    for _ in range(10):
        view = render_view(scene, sample_pose(scene, rng, ViewRegime()), SyntheticDetector(1.0, 2.0), rng)
        r = box_icp(s, view.observed)
        truth = np.argsort(view.truth)
        assert matching_accuracy(r, truth) == 1.0


def test_relabel_carries_predecessor_ids():
    scene, s = _scene_set(5)
    rng = np.random.default_rng(5)
    pred = s.relabeled([10 + i for i in s.ids])
    view = render_view(scene, sample_pose(scene, rng), SyntheticDetector(), rng)
    relabeled, mapping, _ = relabel_from_predecessor(pred, view.observed)
    for local, scene_id in zip(view.observed.ids, view.truth):
        assert mapping[local] == 10 + scene_id
    assert sorted(relabeled.ids) == sorted(pred.ids)


def test_ring_consensus_and_identity_conservation():
    scene, _ = _scene_set(6)
    rng = np.random.default_rng(6)
    views = [render_view(scene, sample_pose(scene, rng), SyntheticDetector(), rng) for _ in range(4)]
    result = ring_register([v.observed for v in views])
    assert result.consensus_ok and result.failing_pair is None
    truth0 = dict(zip(views[0].observed.ids, views[0].truth))
    for view, labels in zip(views, result.labels):
        assert sorted(labels.values()) == sorted(views[0].observed.ids)
        for local, scene_id in zip(view.observed.ids, view.truth):
            assert truth0[labels[local]] == scene_id


def test_ring_wraps_pair_errors():
    _, s = _scene_set(7)
    bad = BoxSet(s.corners[:3], (0, 1, 2))
    with pytest.raises(CountMismatch):
        ring_register([s, bad])
    collapsed = BoxSet(np.zeros((3, 4, 2)), (0, 1, 2))
    with pytest.raises(RegistrationPairError) as info:
        ring_register([collapsed, BoxSet(s.corners[:3], (0, 1, 2))])
    assert info.value.pair == (0, 1)


def test_success_model_values():
    assert success_model(1, 0.9, 2) == 0.81
    assert success_model(1, 1, 7) == 1.0
    assert success_model(0.9, 1.0, 1) == pytest.approx(0.81)
    vals = [success_model(0.95, 0.9, n) for n in range(1, 11)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        success_model(1.2, 0.9, 1)
    with pytest.raises(ValueError):
        success_model(0.9, 0.9, 0)


def test_rotation_error_wraps():
    r = box_icp(*(2 * [_scene_set(8)[1]]))
    assert rotation_error(r, 2 * math.pi) == pytest.approx(0.0, abs=1e-12)
