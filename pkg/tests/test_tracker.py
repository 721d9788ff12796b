import numpy as np
import pytest

from lowrate_mot import kalman as kf
from lowrate_mot.core import BBox, Detection, normalize
from lowrate_mot.experiments import run_on
from lowrate_mot.synth import ScenarioSpec, TargetSpec, NoiseSpec, crossing_preset, generate
from lowrate_mot.tracker import (
    FULL_FREQUENCY, PipelineConfig, StableTracker, StreamOrderError, Tracklet, ema_update, remove_old_tracklets,
)
from lowrate_mot.visual_tracking import ImageFrame


def emb(*v):
    return normalize(np.array(v, dtype=float))


def det(t, box, conf=0.9, e=(1.0, 0.0)):
    return Detection(t, BBox(*box), conf, emb(*e))


def blank():
    return ImageFrame(np.full((120, 160, 3), 128, dtype=np.uint8))


def tracklet(last_update):
    box = BBox(0, 0, 10, 10)
    return Tracklet(1, kf.initiate(box, kf.KalmanModel()), emb(1, 0), last_update, box, 0.0, 0.9)


def test_empty_step():
    assert StableTracker().step([], 0.0) == []


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(delta_t=0)
    with pytest.raises(ValueError):
        PipelineConfig(ema_lambda=1.0)
    with pytest.raises(ValueError):
        PipelineConfig(gate="nope")


def test_ema_update_limits():
    e, f = emb(1, 0), emb(0, 1)
    np.testing.assert_allclose(ema_update(e, f, 1.0), e)
    np.testing.assert_allclose(ema_update(e, f, 0.0), f)
    out = ema_update(e, f, 0.9)
    assert np.linalg.norm(out) == pytest.approx(1.0)


@pytest.mark.parametrize("age, kept", [(0.5, True), (2.5, False), (2.0, True)])
def test_remove_old_tracklets(age, kept):
    out = remove_old_tracklets([tracklet(10.0 - age)], 10.0, PipelineConfig(t_live=2.0))
    assert bool(out) is kept


def test_create_new_tracklets():
    tr = StableTracker()
    born = tr.create_new_tracklets([(0, det(0, (0, 0, 10, 10), 0.9)), (1, det(0, (50, 0, 10, 10), 0.3)),
                                    (2, det(0, (90, 0, 10, 10), 0.8))], 0.0)
    assert [b.id for b in born] == [1, 2]
    assert born[0].state.center == (5, 5)


def test_stream_order_error():
    tr = StableTracker(PipelineConfig(mode=FULL_FREQUENCY))
    tr.step([], 1.0)
    with pytest.raises(StreamOrderError):
        tr.step([], 1.0)
    with pytest.raises(StreamOrderError):
        tr.step([det(5.0, (0, 0, 10, 10))], 2.0)


def test_full_frequency_call_counts():
    tr = StableTracker(PipelineConfig(mode=FULL_FREQUENCY, delta_t=1 / 30))
    tr.step([det(0.0, (10, 10, 20, 40))], 0.0)
    rows = tr.step([det(1 / 30, (11, 10, 20, 40))], 1 / 30)
    assert tr.kf_calls == {(1, "predict"): 1, (1, "update"): 1}
    assert tr.vt_calls == 0
    assert rows[0].bbox == BBox(11, 10, 20, 40)


def test_stationary_match_lands_on_detection():
    tr = StableTracker(PipelineConfig(mode=FULL_FREQUENCY, delta_t=1 / 30))
    tr.step([det(0.0, (10, 10, 20, 40))], 0.0)
    for k in range(1, 5):
        tr.step([det(k / 30, (10, 10, 20, 40))], k / 30)
    assert tr.tracklets[0].state.center == pytest.approx((20, 30), abs=1e-3)


def test_low_frequency_call_counts():
    px = np.full((120, 160, 3), 128, dtype=np.uint8)
    px[40:80, 60:80] = (200, 30, 30)
    f = ImageFrame(px)
    tr = StableTracker(PipelineConfig(delta_t=1.0))
    tr.step([det(0.0, (60, 40, 20, 40)), det(0.0, (120, 0, 20, 20), e=(0, 1))], 0.0, f, None)
    rows = tr.step([det(1.0, (60, 40, 20, 40))], 1.0, f, f)
    matched = [r for r in rows if r.matched]
    assert [r.track_id for r in matched] == [1]
    assert matched[0].bbox == BBox(60, 40, 20, 40)
    assert tr.kf_calls[(1, "predict")] == 2 and tr.kf_calls[(1, "update")] == 2
    assert tr.kf_calls[(2, "predict")] == 2 and tr.kf_calls[(2, "update")] == 0
    assert tr.last_outcome.matches[0].stage == 1


def test_low_frequency_needs_frames():
    tr = StableTracker(PipelineConfig())
    tr.step([det(0.0, (10, 10, 20, 20))], 0.0, blank(), None)
    with pytest.raises(ValueError):
        tr.step([det(1.0, (10, 10, 20, 20))], 1.0)


def test_ids_never_reused():
    cfg = PipelineConfig(mode=FULL_FREQUENCY, delta_t=1.0, t_live=0.5)
    tr = StableTracker(cfg)
    seen = []
    for k in range(6):
        rows = tr.step([det(float(k), (100 * (k % 2), 0, 10, 10), e=(1, k))], float(k))
        seen += [r.track_id for r in rows if r.matched]
    assert seen == sorted(set(seen))


def single_target():
    return ScenarioSpec(
        name="single", duration=6.0, seed=1, noise=NoiseSpec(embedding_noise=0.0),
        targets=[TargetSpec(kind="linear", size=(30, 60), color=(200, 40, 40), embedding_seed=3,
                            start=(100.0, 200.0), velocity=(40.0, 10.0))],
    )


@pytest.mark.parametrize("hz", [None, 10.0, 4.0, 2.0, 1.0])
def test_single_target_keeps_one_id(hz):
    out, report = run_on(generate(single_target()), hz)
    assert {r.track_id for r in out.results} == {1}
    assert report["IDSW"] == 0 and report["IDF1"] == 1.0


@pytest.mark.parametrize("hz", [None, 1.0])
def test_crossing_targets_keep_ids(hz):
    out, report = run_on(generate(crossing_preset()), hz)
    assert report["IDSW"] == 0
    assert report["IDF1"] == 1.0


def test_matched_outputs_are_detection_boxes():
    seq = generate(crossing_preset())
    out, _ = run_on(seq, 2.0)
    boxes = {(d.frame, d.bbox.to_xywh().tobytes()) for d in seq.detections}
    for r in out.results:
        if r.confidence > 0:
            assert (r.frame, r.bbox.to_xywh().tobytes()) in boxes
