"""Segmentation quality scores: region similarity J, contour accuracy F,
and their mean J&F, aggregated per object, per sequence, and per corpus.

Conventions for absent objects: a frame where an object is empty in both
prediction and ground truth scores 1 (correctly absent) for J and F, and is
excluded from that object's per-frame average; empty on exactly one side
scores 0. Contour matching uses a tolerance of ceil(0.008 * image diagonal)
pixels, boundaries are 4-connectivity transitions to background with the
frame edge counting as background, and matching is by Euclidean-disk
dilation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


def _as_binary(mask: np.ndarray) -> np.ndarray:
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    return m.astype(bool)


def _check_dims(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p, g = _as_binary(pred), _as_binary(gt)
    if p.shape != g.shape:
        raise ValueError(f"mask shapes differ: {p.shape} vs {g.shape}")
    return p, g


def jaccard(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of two binary masks.

    Both empty scores 1 (object correctly absent), exactly one empty scores 0.
    """
    p, g = _check_dims(pred, gt)
    union = np.count_nonzero(p | g)
    if union == 0:
        return 1.0
    return np.count_nonzero(p & g) / union


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Boundary of a binary mask: foreground pixels with a 4-neighbor in the
    background, the frame edge counting as background."""
    m = _as_binary(mask)
    if not m.any():
        return np.zeros_like(m)
    cross = ndimage.generate_binary_structure(2, 1)
    eroded = ndimage.binary_erosion(m, structure=cross, border_value=0)
    return m & ~eroded


def contour_tolerance(shape: tuple[int, int]) -> int:
    """DAVIS-convention matching radius: ceil(0.008 * image diagonal)."""
    return math.ceil(0.008 * math.hypot(shape[0], shape[1]))


def _disk(radius: int) -> np.ndarray:
    r = int(radius)
    span = np.arange(-r, r + 1)
    yy, xx = np.meshgrid(span, span, indexing="ij")
    return (yy**2 + xx**2) <= r**2


def contour_f(pred: np.ndarray, gt: np.ndarray, tolerance_px: int | None = None) -> float:
    """Boundary F-measure with Euclidean-disk dilation matching.

    precision = fraction of pred boundary within tolerance of gt boundary,
    recall symmetric, F = 2PR/(P+R) (0 when P+R = 0). Both masks empty
    scores 1, exactly one empty scores 0.
    """
    p, g = _check_dims(pred, gt)
    p_any, g_any = bool(p.any()), bool(g.any())
    if not p_any and not g_any:
        return 1.0
    if p_any != g_any:
        return 0.0
    tol = contour_tolerance(p.shape) if tolerance_px is None else int(tolerance_px)
    pb = boundary_pixels(p)
    gb = boundary_pixels(g)
    disk = _disk(tol)
    gb_zone = ndimage.binary_dilation(gb, structure=disk)
    pb_zone = ndimage.binary_dilation(pb, structure=disk)
    n_pb = np.count_nonzero(pb)
    n_gb = np.count_nonzero(gb)
    precision = np.count_nonzero(pb & gb_zone) / n_pb
    recall = np.count_nonzero(gb & pb_zone) / n_gb
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass
class FrameScore:
    frame: int
    object_id: int
    j: float
    f: float


@dataclass
class SequenceEval:
    """Scores for one sequence: per-frame rows plus per-object and sequence
    means. Frames where an object is absent on both sides carry no row."""

    rows: list[FrameScore] = field(default_factory=list)
    object_mean_j: dict[int, float] = field(default_factory=dict)
    object_mean_f: dict[int, float] = field(default_factory=dict)
    mean_j: float = 0.0
    mean_f: float = 0.0

    @property
    def mean_jf(self) -> float:
        return (self.mean_j + self.mean_f) / 2.0


def evaluate_sequence(pred_seq, gt_seq, object_ids=None) -> SequenceEval:
    """Per-object J and F over a pair of label-mask sequences.

    Objects default to the union of nonzero labels on both sides. Sequence
    means are plain averages over objects of per-object frame averages.
    """
    pred_seq = [np.asarray(f) for f in pred_seq]
    gt_seq = [np.asarray(f) for f in gt_seq]
    if len(pred_seq) != len(gt_seq):
        raise ValueError(f"sequence lengths differ: {len(pred_seq)} vs {len(gt_seq)}")
    if not gt_seq:
        raise ValueError("empty sequence")
    for i, (p, g) in enumerate(zip(pred_seq, gt_seq), start=1):
        if p.shape != g.shape:
            raise ValueError(f"frame {i}: mask shapes differ: {p.shape} vs {g.shape}")

    if object_ids is None:
        ids: set[int] = set()
        for frame in gt_seq + pred_seq:
            ids.update(int(v) for v in np.unique(frame) if v != 0)
        object_ids = sorted(ids)

    out = SequenceEval()
    per_object_j: dict[int, list[float]] = {}
    per_object_f: dict[int, list[float]] = {}
    for index, (p, g) in enumerate(zip(pred_seq, gt_seq), start=1):
        for object_id in object_ids:
            pm = p == object_id
            gm = g == object_id
            if not pm.any() and not gm.any():
                continue
            j = jaccard(pm, gm)
            f = contour_f(pm, gm)
            out.rows.append(FrameScore(frame=index, object_id=object_id, j=j, f=f))
            per_object_j.setdefault(object_id, []).append(j)
            per_object_f.setdefault(object_id, []).append(f)

    for object_id in object_ids:
        js = per_object_j.get(object_id)
        fs = per_object_f.get(object_id)
        # An id absent on both sides in every frame has no scored frames;
        # count it as perfectly absent.
        out.object_mean_j[object_id] = float(np.mean(js)) if js else 1.0
        out.object_mean_f[object_id] = float(np.mean(fs)) if fs else 1.0
    if object_ids:
        out.mean_j = float(np.mean([out.object_mean_j[k] for k in object_ids]))
        out.mean_f = float(np.mean([out.object_mean_f[k] for k in object_ids]))
    else:
        out.mean_j = 1.0
        out.mean_f = 1.0
    return out


@dataclass
class EvalReport:
    """Corpus-level report: per-sequence evals plus plain-average corpus
    means; mean J&F is exactly (mean J + mean F) / 2."""

    sequences: dict[str, SequenceEval] = field(default_factory=dict)
    mean_j: float = 0.0
    mean_f: float = 0.0

    @property
    def mean_jf(self) -> float:
        return (self.mean_j + self.mean_f) / 2.0


def evaluate_corpus(pairs: dict[str, tuple[list, list]]) -> EvalReport:
    """Evaluate named (pred_seq, gt_seq) pairs; corpus means average the
    sequence means in sorted-name order."""
    if not pairs:
        raise ValueError("no sequences to evaluate")
    report = EvalReport()
    for name in sorted(pairs):
        pred_seq, gt_seq = pairs[name]
        report.sequences[name] = evaluate_sequence(pred_seq, gt_seq)
    evals = [report.sequences[name] for name in sorted(report.sequences)]
    report.mean_j = float(np.mean([e.mean_j for e in evals]))
    report.mean_f = float(np.mean([e.mean_f for e in evals]))
    return report


def write_report_csv(report: EvalReport, path) -> None:
    """Per-frame score rows as `sequence,object,frame,J,F`."""
    with open(path, "w", newline="") as fh:
        fh.write("sequence,object,frame,J,F\n")
        for name in sorted(report.sequences):
            for row in report.sequences[name].rows:
                fh.write(f"{name},{row.object_id},{row.frame},{row.j:.6f},{row.f:.6f}\n")


def summary_lines(report: EvalReport) -> list[str]:
    return [
        f"sequences: {len(report.sequences)}",
        f"corpus mean J:   {report.mean_j:.4f}",
        f"corpus mean F:   {report.mean_f:.4f}",
        f"corpus mean J&F: {report.mean_jf:.4f}",
    ]
