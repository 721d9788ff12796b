import struct
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowrate_mot.core import BBox
from lowrate_mot.io_formats import (
    ParseError, ResultRecord, SequenceMeta, parse_ppm, read_detections, read_embeddings, read_image,
    read_results, read_seqinfo, stride_for, subsample, write_embeddings, write_image, write_results,
    write_seqinfo,
)


def emb_file(path, dim, values):
    path.write_bytes(b"EMB1" + struct.pack("<I", dim) + struct.pack(f"<{len(values)}f", *values))
    return path


def test_read_detection_line(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,10,20,30,40,0.9,-1,-1,-1\n")
    dets = read_detections(p)
    (d,) = dets[1]
    assert d.bbox == BBox(10, 20, 30, 40) and d.confidence == pytest.approx(0.9) and d.index == 0


def test_empty_detection_file(tmp_path):
    p = tmp_path / "det.txt"
    p.write_text("")
    assert read_detections(p) == {}


@pytest.mark.parametrize("line", ["1,-1,a,20,30,40,0.9", "1,-1,10,20,0,40,0.9", "1,-1,10,20", "0,-1,1,1,1,1,0.5"])
def test_malformed_lines_name_the_line(tmp_path, line):
    p = tmp_path / "det.txt"
    p.write_text("1,-1,10,20,30,40,0.9,-1,-1,-1\n" + line + "\n")
    with pytest.raises(ParseError, match=":2:"):
        read_detections(p)


def test_missing_file(tmp_path):
    with pytest.raises(ParseError):
        read_detections(tmp_path / "nope.txt")


def test_results_round_trip(tmp_path, rng):
    rows = [
        ResultRecord(int(f), int(i), BBox(*rng.uniform(0, 500, 2), *rng.uniform(1, 100, 2)), float(rng.uniform(0, 1)))
        for f, i in zip(rng.integers(1, 20, 50), rng.integers(1, 9, 50))
    ]
    p = tmp_path / "res.txt"
    write_results(p, rows)
    back = [r for frame in sorted(read_results(p)) for r in read_results(p)[frame]]
    order = sorted(rows, key=lambda r: (r.frame, r.track_id))
    assert [(r.frame, r.track_id) for r in back] == [(r.frame, r.track_id) for r in order]
    for a, b in zip(back, order):
        np.testing.assert_allclose(a.bbox.to_xywh(), b.bbox.to_xywh(), atol=0.005)
        assert a.confidence == pytest.approx(b.confidence, abs=0.005)


def test_write_results_sorted_and_empty(tmp_path):
    p = tmp_path / "res.txt"
    write_results(p, [])
    assert p.read_text() == ""
    rows = [ResultRecord(2, 1, BBox(0, 0, 1, 1), 1.0), ResultRecord(1, 5, BBox(0, 0, 1, 1), 1.0),
            ResultRecord(1, 2, BBox(0, 0, 1, 1), 1.0)]
    write_results(p, rows)
    lines = p.read_text().splitlines()
    assert [tuple(l.split(",")[:2]) for l in lines] == [("1", "2"), ("1", "5"), ("2", "1")]
    assert lines[0] == "1,2,0.00,0.00,1.00,1.00,1.00,-1,-1,-1"


def test_embeddings_unit(tmp_path):
    e = read_embeddings(emb_file(tmp_path / "e.bin", 2, [1.0, 0.0]))
    np.testing.assert_array_equal(e, [[1.0, 0.0]])


def test_embeddings_renormalize_with_warning(tmp_path):
    with pytest.warns(UserWarning):
        e = read_embeddings(emb_file(tmp_path / "e.bin", 2, [1.0, 0.0, 3.0, 4.0]))
    np.testing.assert_allclose(e[1], [0.6, 0.8], atol=1e-7)


def test_embeddings_truncated_names_record(tmp_path):
    p = emb_file(tmp_path / "e.bin", 2, [1.0, 0.0, 1.0])
    with pytest.raises(ParseError, match="record 1"):
        read_embeddings(p)


def test_embeddings_errors(tmp_path):
    p = tmp_path / "e.bin"
    p.write_bytes(b"EMB2" + struct.pack("<I", 2))
    with pytest.raises(ParseError, match="magic"):
        read_embeddings(p)
    with pytest.raises(ParseError, match="for 3 detections"):
        read_embeddings(emb_file(p, 2, [1.0, 0.0]), expected_count=3)
    with pytest.raises(ParseError, match="norm"):
        read_embeddings(emb_file(p, 2, [0.1, 0.0]))


def test_embeddings_round_trip(tmp_path, rng):
    e = rng.normal(size=(5, 16))
    e /= np.linalg.norm(e, axis=1, keepdims=True)
    p = tmp_path / "e.bin"
    write_embeddings(p, e)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        np.testing.assert_allclose(read_embeddings(p, 5), e, atol=1e-6)


def meta(fps=30.0, frames=91):
    return SequenceMeta("s", fps, 64, 48, frames)


def test_subsample_examples():
    s = subsample(meta(), 1.0)
    assert s.detection_frames == [1, 31, 61, 91] and s.intermediate_frames == [16, 46, 76]
    full = subsample(meta(), 30.0)
    assert full.detection_frames == list(range(1, 92)) and full.intermediate_frames == []
    assert stride_for(30, 4) == 8
    assert stride_for(25, 2) == 13  # 12.5 rounds half up
    with pytest.raises(ValueError):
        subsample(meta(), 40.0)
    assert s.intermediate_for(31) == 16 and s.intermediate_for(1) is None


@given(st.sampled_from([10.0, 14.0, 25.0, 30.0, 60.0]), st.integers(1, 400), st.floats(0.2, 10))
def test_subsample_invariants(fps, frames, hz):
    if hz > fps:
        return
    s = subsample(meta(fps, frames), hz)
    d = s.detection_frames
    assert d[0] == 1 and d[-1] <= frames
    assert all(b - a == s.stride for a, b in zip(d, d[1:]))
    expected = len(d) - 1 if s.stride > 1 else 0
    assert len(s.intermediate_frames) == expected
    for a, b, m in zip(d, d[1:], s.intermediate_frames):
        assert a <= m < b and m == (a + b) // 2


def test_ppm_examples():
    f = parse_ppm(b"P6\n2 1\n255\n" + bytes([255, 0, 0, 0, 255, 0]))
    assert f.width == 2 and f.height == 1
    assert tuple(f.pixels[0, 0]) == (255, 0, 0) and tuple(f.pixels[0, 1]) == (0, 255, 0)
    with pytest.raises(ParseError, match="maxval"):
        parse_ppm(b"P6\n2 1\n65535\n" + bytes(12))
    with pytest.raises(ParseError, match="payload"):
        parse_ppm(b"P6\n2 1\n255\n" + bytes(5))
    with pytest.raises(ParseError):
        parse_ppm(b"P3\n2 1\n255\n" + bytes(6))


def test_ppm_comment_and_round_trip(tmp_path, rng):
    f = parse_ppm(b"P6\n# note\n1 1\n255\n" + bytes([1, 2, 3]))
    assert tuple(f.pixels[0, 0]) == (1, 2, 3)
    from lowrate_mot.visual_tracking import ImageFrame
    img = ImageFrame(rng.integers(0, 256, (7, 5, 3), dtype=np.uint8))
    write_image(tmp_path / "a.ppm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.ppm").pixels, img.pixels)


def test_seqinfo_round_trip(tmp_path):
    m = SequenceMeta("abc", 30.0, 640, 480, 301)
    write_seqinfo(tmp_path, m)
    assert read_seqinfo(tmp_path) == m
    with pytest.raises(ParseError):
        read_seqinfo(tmp_path / "missing")
