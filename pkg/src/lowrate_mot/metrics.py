"""CLEAR MOT, IDF1 and HOTA scores over ground-truth / result pairs.

Inputs are either ``{frame: [records]}`` mappings (as returned by the
readers in :mod:`io_formats`) or flat record lists. Ground-truth records
need ``frame``, ``track_id`` and ``bbox``; so do result records.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .assignment import solve
from .core import iou_matrix

INF = np.inf
HOTA_ALPHAS = np.round(np.arange(1, 20) * 0.05, 10)


class EmptyGroundTruthError(ValueError):
    """Scores are undefined without ground-truth boxes."""


@dataclass(frozen=True)
class ClearMetrics:
    mota: float
    fp: int
    fn: int
    idsw: int
    matches: int
    gt_count: int


@dataclass(frozen=True)
class IdMetrics:
    idf1: float
    idtp: int
    idfp: int
    idfn: int


@dataclass(frozen=True)
class HotaMetrics:
    hota: float
    deta: float
    assa: float
    per_alpha: tuple[tuple[float, float, float], ...] = ()


def _by_frame(records) -> dict[int, list]:
    if isinstance(records, dict):
        return {int(k): list(v) for k, v in records.items()}
    out: dict[int, list] = defaultdict(list)
    for r in records:
        out[int(r.frame)].append(r)
    return dict(out)


def _frame_arrays(rows: list) -> tuple[list[int], np.ndarray]:
    ids = [int(r.track_id) for r in rows]
    boxes = np.array([r.bbox.to_xywh() for r in rows], dtype=float).reshape(-1, 4)
    return ids, boxes


def _prepare(gt, results):
    g, r = _by_frame(gt), _by_frame(results)
    if sum(len(v) for v in g.values()) == 0:
        raise EmptyGroundTruthError("ground truth has no boxes")
    frames = sorted(set(g) | set(r))
    out = []
    for f in frames:
        gi, gb = _frame_arrays(g.get(f, []))
        ri, rb = _frame_arrays(r.get(f, []))
        for name, ids in (("ground-truth", gi), ("result", ri)):
            if len(set(ids)) != len(ids):
                raise ValueError(f"frame {f}: duplicate {name} id")
        out.append((f, gi, ri, iou_matrix(gb, rb)))
    return out


def clear_metrics(gt, results, iou_threshold: float = 0.5) -> ClearMetrics:
    """MOTA with its FP, FN and identity-switch counts.

    Each frame is matched one-to-one under the IoU gate. The matching keeps
    as many pairs as possible, then as many continuations of each target's
    previous correspondence as possible, then the largest total IoU. A
    switch is counted when a target is matched to a different result id
    than at its last match.
    """
    last: dict[int, int] = {}
    fp = fn = idsw = tp = n_gt = 0
    for _, gi, ri, ov in _prepare(gt, results):
        n_gt += len(gi)
        pairs = []
        if gi and ri:
            cont = np.array([[last.get(g) == p for p in ri] for g in gi], dtype=float)
            weight = min(len(gi), len(ri)) + 1.0
            cost = np.where(ov >= iou_threshold, weight * (1.0 - cont) + (1.0 - ov), INF)
            pairs = solve(cost)
        for a, b in pairs:
            g, p = gi[a], ri[b]
            if g in last and last[g] != p:
                idsw += 1
            last[g] = p
        tp += len(pairs)
        fn += len(gi) - len(pairs)
        fp += len(ri) - len(pairs)
    mota = 1.0 - (fn + fp + idsw) / n_gt
    return ClearMetrics(mota, fp, fn, idsw, tp, n_gt)


def _id_overlap_counts(prepared, iou_threshold):
    gids = sorted({g for _, gi, _, _ in prepared for g in gi})
    pids = sorted({p for _, _, ri, _ in prepared for p in ri})
    gx = {g: k for k, g in enumerate(gids)}
    px = {p: k for k, p in enumerate(pids)}
    counts = np.zeros((len(gids), len(pids)))
    n_gt = n_pred = 0
    for _, gi, ri, ov in prepared:
        n_gt += len(gi)
        n_pred += len(ri)
        for a, b in zip(*np.nonzero(ov >= iou_threshold)):
            counts[gx[gi[a]], px[ri[b]]] += 1
    return counts, n_gt, n_pred


def idf1(gt, results, iou_threshold: float = 0.5) -> IdMetrics:
    """Identity F1 under the best global one-to-one id correspondence."""
    counts, n_gt, n_pred = _id_overlap_counts(_prepare(gt, results), iou_threshold)
    idtp = 0
    if counts.size:
        # every pair is admissible, so a full-size matching of least
        # negated overlap is a maximum-overlap matching
        idtp = int(sum(counts[a, b] for a, b in solve(-counts)))
    idfp, idfn = n_pred - idtp, n_gt - idtp
    denom = 2 * idtp + idfp + idfn
    return IdMetrics(2 * idtp / denom if denom else 0.0, idtp, idfp, idfn)


def _alignment(prepared):
    """Soft id-to-id alignment scores used to steer per-frame HOTA matching."""
    gids = sorted({g for _, gi, _, _ in prepared for g in gi})
    pids = sorted({p for _, _, ri, _ in prepared for p in ri})
    gx = {g: k for k, g in enumerate(gids)}
    px = {p: k for k, p in enumerate(pids)}
    pot = np.zeros((len(gids), len(pids)))
    gcount = np.zeros(len(gids))
    pcount = np.zeros(len(pids))
    for _, gi, ri, ov in prepared:
        gk = [gx[g] for g in gi]
        pk = [px[p] for p in ri]
        gcount[gk] += 1
        pcount[pk] += 1
        if gi and ri:
            denom = ov.sum(1, keepdims=True) + ov.sum(0, keepdims=True) - ov
            with np.errstate(divide="ignore", invalid="ignore"):
                pot[np.ix_(gk, pk)] += np.where(denom > 0, ov / denom, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = gcount[:, None] + pcount[None, :] - pot
        align = np.where(denom > 0, pot / denom, 0.0)
    return gx, px, gcount, pcount, align


def hota(gt, results) -> HotaMetrics:
    """HOTA, DetA and AssA averaged over IoU thresholds 0.05 ... 0.95.

    Per threshold and frame, pairs above the threshold are matched to
    maximize the number of true positives, then the sum of alignment-weighted
    IoU. Association accuracy averages, over true positives, the Jaccard
    index of the matched id pair across the whole sequence.
    """
    prepared = _prepare(gt, results)
    gx, px, gcount, pcount, align = _alignment(prepared)
    per_alpha = []
    for alpha in HOTA_ALPHAS:
        hits = np.zeros_like(align)
        tp = fn = fp = 0
        for _, gi, ri, ov in prepared:
            pairs = []
            if gi and ri:
                gk = [gx[g] for g in gi]
                pk = [px[p] for p in ri]
                score = align[np.ix_(gk, pk)] * ov
                pairs = solve(np.where(ov >= alpha - 1e-12, 1.0 - score, INF))
                for a, b in pairs:
                    hits[gk[a], pk[b]] += 1
            tp += len(pairs)
            fn += len(gi) - len(pairs)
            fp += len(ri) - len(pairs)
        deta = tp / (tp + fn + fp) if tp + fn + fp else 0.0
        if tp:
            a_score = hits / np.maximum(gcount[:, None] + pcount[None, :] - hits, 1.0)
            assa = float((hits * a_score).sum() / tp)
        else:
            assa = 0.0
        per_alpha.append((float(alpha), deta, assa))
    h = [np.sqrt(d * a) for _, d, a in per_alpha]
    return HotaMetrics(
        float(np.mean(h)),
        float(np.mean([d for _, d, _ in per_alpha])),
        float(np.mean([a for _, _, a in per_alpha])),
        tuple(per_alpha),
    )


METRIC_NAMES = ("mota", "idf1", "hota")


def evaluate(gt, results, metrics=METRIC_NAMES, iou_threshold: float = 0.5) -> dict[str, float]:
    """Flat name -> value report of the requested metric families."""
    unknown = [m for m in metrics if m not in METRIC_NAMES]
    if unknown:
        raise ValueError(f"unknown metric(s): {', '.join(unknown)}")
    out: dict[str, float] = {}
    if "mota" in metrics:
        c = clear_metrics(gt, results, iou_threshold)
        out.update(MOTA=c.mota, FP=c.fp, FN=c.fn, IDSW=c.idsw)
    if "idf1" in metrics:
        i = idf1(gt, results, iou_threshold)
        out.update(IDF1=i.idf1, IDTP=i.idtp, IDFP=i.idfp, IDFN=i.idfn)
    if "hota" in metrics:
        h = hota(gt, results)
        out.update(HOTA=h.hota, DetA=h.deta, AssA=h.assa)
    return out


def _fmt(v) -> str:
    return str(v) if isinstance(v, (int, np.integer)) else f"{v:.6f}"


def format_text(report: dict[str, float]) -> str:
    width = max((len(k) for k in report), default=0)
    return "".join(f"{k:<{width}}  {_fmt(v)}\n" for k, v in report.items())


def format_csv(report: dict[str, float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(report))
    w.writerow([_fmt(v) for v in report.values()])
    return buf.getvalue()
