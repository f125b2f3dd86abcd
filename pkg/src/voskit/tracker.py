"""Prediction filtering for mask sequences.

Each object's bounding box is tracked through the video; a box is predicted
for the coming frame from the motion between the two previous boxes, turned
into a binary attention gate, and multiplied into the object's predicted
soft mask. The box is then reinitialized from the filtered mask, so the
track follows what survives the gate.

Frames are dicts mapping object id -> soft mask (H x W floats in [0, 1]).
The first two frames of the sequence, and the first two frames an object is
seen with a usable box, pass through ungated (warm-up: two boxes are needed
before a motion exists). If gating empties an object's mask, the frame falls
back to the ungated mask for that object and the motion history is reset, so
the track re-acquires instead of dying.

``filter_stream`` is the real implementation and holds only per-object box
state; memory is O(frame size + objects), independent of sequence length.
``run_filter`` materializes the stream for convenience.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field

import numpy as np

from .boxes import BBox, apply_motion, attention_map, bbox_from_mask, box_delta, cv_predict

SOURCE_WARMUP = "warmup"
SOURCE_CV = "cv"
SOURCE_PT = "pt"
SOURCE_FALLBACK = "fallback"

TRACK_CSV_HEADER = ["frame", "object_id", "x", "y", "w", "h", "source"]


@dataclass(frozen=True)
class TrackRow:
    """One (frame, object) entry of the track log. box is None when the
    object had no pixels above threshold that frame."""

    frame: int
    object_id: int
    box: BBox | None
    source: str


@dataclass
class FilteredFrame:
    """Per-frame output: gated soft channels, the composed label mask, and
    the track rows produced for this frame. gates holds the effective
    attention map per object (all ones on warm-up/fallback frames) when
    FilterConfig.keep_gates is set."""

    frame: int
    channels: dict[int, np.ndarray]
    label: np.ndarray
    rows: list[TrackRow] = field(default_factory=list)
    gates: dict[int, np.ndarray] | None = None


@dataclass
class FilterConfig:
    margin_frac: float = 0.1
    threshold: float = 0.5
    min_box_size: float = 1.0
    keep_gates: bool = False


class _ObjectState:
    __slots__ = ("prev", "prev2")

    def __init__(self):
        self.prev: BBox | None = None
        self.prev2: BBox | None = None


def compose_label(channels: dict[int, np.ndarray], shape: tuple[int, int]) -> np.ndarray:
    """Argmax composition of soft channels into an integer label mask.

    Background scores 1 - max(channels) and wins ties; among tied objects the
    smallest id wins. Computed with a running max instead of a stacked argmax:
    the winner is the first channel attaining the max, and it beats background
    exactly when its score exceeds 0.5.
    """
    if not channels:
        return np.zeros(shape, dtype=np.uint8)
    ids = sorted(channels)
    best = channels[ids[0]]
    label = np.full(shape, ids[0], dtype=np.uint8)
    for oid in ids[1:]:
        ch = channels[oid]
        better = ch > best
        best = np.where(better, ch, best)
        label[better] = oid
    label[best <= 0.5] = 0
    return label


def filter_stream(
    frames: Iterable[dict[int, np.ndarray]],
    variant: str = "cv",
    model=None,
    config: FilterConfig | None = None,
) -> Iterator[FilteredFrame]:
    """Filter a sequence of per-object soft-mask frames, streaming.

    variant is "cv" (repeat the last motion) or "pt" (map the last motion
    through ``model.predict_motion``). Frame indices are 1-based.
    """
    if variant not in (SOURCE_CV, SOURCE_PT):
        raise ValueError(f"unknown variant {variant!r} (expected 'cv' or 'pt')")
    if variant == SOURCE_PT and model is None:
        raise ValueError("variant 'pt' requires a motion model")
    cfg = config or FilterConfig()

    states: dict[int, _ObjectState] = {}
    shape: tuple[int, int] | None = None
    for index, frame in enumerate(frames, start=1):
        out_channels: dict[int, np.ndarray] = {}
        gates: dict[int, np.ndarray] = {}
        rows: list[TrackRow] = []
        for object_id in sorted(frame):
            channel = np.asarray(frame[object_id])
            if shape is None:
                shape = channel.shape
            if channel.shape != shape:
                raise ValueError(
                    f"frame {index} object {object_id}: shape {channel.shape} "
                    f"drifted from sequence shape {shape}"
                )
            state = states.setdefault(object_id, _ObjectState())

            warm = index <= 2 or state.prev is None or state.prev2 is None
            gate = None
            if warm:
                filtered = channel
                box = bbox_from_mask(channel, threshold=cfg.threshold)
                source = SOURCE_WARMUP
                reset_prev2 = False
            else:
                motion = box_delta(state.prev, state.prev2)
                if variant == SOURCE_PT:
                    motion = model.predict_motion(motion)
                predicted = apply_motion(state.prev, motion, cfg.min_box_size)
                gate = attention_map(predicted, shape[0], shape[1], cfg.margin_frac)
                filtered = channel * gate
                box = bbox_from_mask(filtered, threshold=cfg.threshold)
                source = variant
                reset_prev2 = False
                if box is None:
                    # Lost inside the gate: pass the frame through ungated,
                    # re-acquire the box from it, and forget the old motion.
                    filtered = channel
                    box = bbox_from_mask(channel, threshold=cfg.threshold)
                    source = SOURCE_FALLBACK
                    reset_prev2 = True
                    gate = None

            if box is None:
                state.prev, state.prev2 = None, None
            elif reset_prev2:
                state.prev, state.prev2 = box, None
            else:
                state.prev, state.prev2 = box, state.prev

            out_channels[object_id] = filtered
            if cfg.keep_gates:
                gates[object_id] = (
                    gate if gate is not None else np.ones(shape, dtype=np.uint8)
                )
            rows.append(TrackRow(frame=index, object_id=object_id, box=box, source=source))

        if shape is None:
            raise ValueError(f"frame {index} carries no object channels")
        yield FilteredFrame(
            frame=index,
            channels=out_channels,
            label=compose_label(out_channels, shape),
            rows=rows,
            gates=gates if cfg.keep_gates else None,
        )


def run_filter(
    frames: Iterable[dict[int, np.ndarray]],
    variant: str = "cv",
    model=None,
    config: FilterConfig | None = None,
) -> tuple[list[FilteredFrame], list[TrackRow]]:
    """Materialized version of :func:`filter_stream`."""
    out = list(filter_stream(frames, variant=variant, model=model, config=config))
    rows = [row for f in out for row in f.rows]
    return out, rows


def write_track_csv(rows: Iterable[TrackRow], path) -> None:
    """Write the track log; absent boxes leave x, y, w, h empty."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_CSV_HEADER)
        for row in rows:
            if row.box is None:
                coords = ["", "", "", ""]
            else:
                coords = [repr(v) for v in row.box.as_tuple()]
            writer.writerow([row.frame, row.object_id, *coords, row.source])
