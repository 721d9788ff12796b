import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowrate_mot.core import BBox
from lowrate_mot.io_formats import GtRecord, ResultRecord
from lowrate_mot.metrics import EmptyGroundTruthError, clear_metrics, evaluate, format_csv, format_text, hota, idf1
import oracles


def gt_rows(rows):
    return [GtRecord(f, i, BBox(*b)) for f, i, b in rows]


def res_rows(rows):
    return [ResultRecord(f, i, BBox(*b), 1.0) for f, i, b in rows]


def line(n_frames=10, tid=1, x=0.0):
    return [(f, tid, (x + 5 * f, 0.0, 20.0, 40.0)) for f in range(1, n_frames + 1)]


def test_perfect():
    rows = line(tid=1) + line(tid=2, x=200)
    r = evaluate(gt_rows(rows), res_rows(rows))
    assert r["MOTA"] == 1.0 and r["IDSW"] == 0 and r["IDF1"] == 1.0
    assert r["HOTA"] == pytest.approx(1.0) and r["DetA"] == pytest.approx(1.0) and r["AssA"] == pytest.approx(1.0)


def test_one_miss():
    rows = line()
    c = clear_metrics(gt_rows(rows), res_rows(rows[:4] + rows[5:]))
    assert c.mota == pytest.approx(0.9) and c.fn == 1


def test_swap_counts_two_switches():
    a = [(f, 1, (10.0 * f, 0.0, 20.0, 20.0)) for f in range(1, 5)]
    b = [(f, 2, (10.0 * f, 100.0, 20.0, 20.0)) for f in range(1, 5)]
    res = [(f, (i if f <= 2 else 3 - i), box) for f, i, box in a + b]
    c = clear_metrics(gt_rows(a + b), res_rows(res))
    assert c.idsw == 2
    assert c.mota == pytest.approx(1 - 2 / 8)


def test_split_track_idf1_half():
    rows = line()
    res = [(f, 1 if f <= 5 else 2, b) for f, _, b in rows]
    m = idf1(gt_rows(rows), res_rows(res))
    assert m.idf1 == 0.5 and (m.idtp, m.idfp, m.idfn) == (5, 5, 5)


def test_empty_results_and_empty_gt():
    rows = line()
    r = evaluate(gt_rows(rows), [])
    assert r["IDF1"] == 0.0 and r["HOTA"] == 0.0 and r["MOTA"] == 0.0
    with pytest.raises(EmptyGroundTruthError):
        evaluate([], res_rows(rows))


def test_new_id_every_frame():
    a = [(f, 1, (0.0, 0.0, 20.0, 20.0)) for f in range(1, 4)]
    b = [(f, 2, (50.0, 0.0, 20.0, 20.0)) for f in range(1, 4)]
    res = [(f, 10 * f + i, box) for f, i, box in a + b]
    h = hota(gt_rows(a + b), res_rows(res))
    assert h.deta == pytest.approx(1.0)
    assert h.assa == pytest.approx(1 / 3)
    ref = oracles.hota(a + b, res)
    assert (h.hota, h.deta, h.assa) == pytest.approx(ref, abs=1e-12)


def test_unknown_metric():
    with pytest.raises(ValueError):
        evaluate(gt_rows(line()), [], metrics=("mota", "bogus"))


def test_duplicate_ids_rejected():
    rows = line(2)
    with pytest.raises(ValueError):
        evaluate(gt_rows(rows + rows), [])


def test_reports():
    r = evaluate(gt_rows(line()), res_rows(line()), metrics=("idf1",))
    assert format_text(r).splitlines()[0].split() == ["IDF1", "1.000000"]
    assert format_csv(r) == "IDF1,IDTP,IDFP,IDFN\n1.000000,10,0,0\n"


def random_case(rng, max_ids=3, max_frames=5):
    """Small scene where boxes sit near a few anchors so IoU gates bind."""
    anchors = rng.uniform(0, 40, (3, 2))
    n_frames = int(rng.integers(1, max_frames + 1))

    def rows(n_ids, p_keep):
        out = []
        for tid in range(1, n_ids + 1):
            for f in range(1, n_frames + 1):
                if rng.random() < p_keep:
                    x, y = anchors[rng.integers(0, 3)] + rng.normal(0, 3, 2)
                    out.append((f, tid, (float(x), float(y), float(rng.uniform(15, 25)), float(rng.uniform(15, 25)))))
        return out

    gt = rows(int(rng.integers(1, max_ids + 1)), 0.85)
    if not gt:
        gt = [(1, 1, (0.0, 0.0, 20.0, 20.0))]
    res = rows(int(rng.integers(0, max_ids + 1)), 0.85)
    return gt, res


def test_against_brute_force(rng):
    for _ in range(300):
        gt, res = random_case(rng)
        c = clear_metrics(gt_rows(gt), res_rows(res))
        mota, fp, fn, sw = oracles.clear(gt, res)
        assert (c.fp, c.fn, c.idsw) == (fp, fn, sw)
        assert c.mota == pytest.approx(mota)
        assert idf1(gt_rows(gt), res_rows(res)).idf1 == pytest.approx(oracles.idf1(gt, res), abs=1e-12)
        h = hota(gt_rows(gt), res_rows(res))
        assert (h.hota, h.deta, h.assa) == pytest.approx(oracles.hota(gt, res), abs=1e-9)


@given(st.integers(0, 2**32 - 1), st.permutations([1, 2, 3]))
def test_relabeling_invariance(seed, perm):
    gt, res = random_case(np.random.default_rng(seed))
    relabeled = [(f, 100 + perm[i - 1], b) for f, i, b in res]
    a = evaluate(gt_rows(gt), res_rows(res))
    b = evaluate(gt_rows(gt), res_rows(relabeled))
    for k in a:
        assert a[k] == pytest.approx(b[k], abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_ranges(seed):
    gt, res = random_case(np.random.default_rng(seed))
    r = evaluate(gt_rows(gt), res_rows(res))
    for k in ("IDF1", "HOTA", "DetA", "AssA"):
        assert 0.0 <= r[k] <= 1.0 + 1e-12
    assert r["MOTA"] <= 1.0
    assert (r["MOTA"] == 1.0) == (r["FP"] == r["FN"] == r["IDSW"] == 0)
