import numpy as np
import pytest

from voskit.boxes import (
    BBox,
    Motion,
    apply_motion,
    attention_map,
    bbox_from_mask,
    box_delta,
    cv_predict,
    filter_mask,
)


def test_bbox_validates_fields():
    with pytest.raises(ValueError):
        BBox(0, 0, -1, 5)
    with pytest.raises(ValueError):
        BBox(float("nan"), 0, 1, 1)
    assert BBox(1, 2, 3, 4).area == 12
    assert BBox(1, 2, 3, 4).as_tuple() == (1, 2, 3, 4)


def test_box_delta_and_apply_roundtrip():
    prev = BBox(10, 20, 30, 40)
    cur = BBox(14, 18, 32, 38)
    motion = box_delta(cur, prev)
    assert motion.as_tuple() == (4, -2, 2, -2)
    assert apply_motion(prev, motion) == cur


def test_apply_motion_clamps_size():
    box = BBox(5, 5, 3, 3)
    out = apply_motion(box, Motion(0, 0, -10, -10))
    assert out.w == 1.0 and out.h == 1.0  # never collapses to empty


def test_cv_predict_repeats_last_motion():
    b1 = BBox(0, 0, 10, 10)
    b2 = BBox(4, 2, 10, 10)
    assert cv_predict(b2, b1) == BBox(8, 4, 10, 10)


def test_cv_predict_stationary():
    b = BBox(7, 9, 5, 5)
    assert cv_predict(b, b) == b


def test_bbox_from_mask_binary_threshold():
    mask = np.zeros((8, 10))
    mask[2:5, 3:7] = 0.8
    box = bbox_from_mask(mask)
    assert box == BBox(x=3, y=2, w=4, h=3)
    # below threshold -> absent
    assert bbox_from_mask(mask * 0.5) is None


def test_bbox_from_mask_label_mode():
    label = np.zeros((6, 6), dtype=np.uint8)
    label[1:3, 1:4] = 2
    label[4:6, 0:2] = 7
    assert bbox_from_mask(label, object_id=2) == BBox(1, 1, 3, 2)
    assert bbox_from_mask(label, object_id=7) == BBox(0, 4, 2, 2)
    assert bbox_from_mask(label, object_id=3) is None


def test_bbox_from_mask_single_pixel():
    mask = np.zeros((5, 5))
    mask[3, 2] = 1.0
    assert bbox_from_mask(mask) == BBox(2, 3, 1, 1)


def test_attention_map_covers_box_with_margin():
    box = BBox(10, 5, 20, 10)
    am = attention_map(box, 40, 60, margin_frac=0.1)
    assert am.dtype == np.uint8
    assert set(np.unique(am)) <= {0, 1}
    # margin is 2 px in x (0.1*20) and 1 px in y (0.1*10)
    assert am[5:15, 10:30].all()  # the box itself
    assert am[4:16, 8:32].all()  # expanded region
    assert am[3, :].sum() == 0  # above the expanded region
    assert am[:, 7].sum() == 0  # left of the expanded region


def test_attention_map_zero_margin_exact():
    am = attention_map(BBox(2, 3, 4, 5), 12, 12, margin_frac=0.0)
    expected = np.zeros((12, 12), dtype=np.uint8)
    expected[3:8, 2:6] = 1
    assert np.array_equal(am, expected)


def test_attention_map_clips_to_frame():
    am = attention_map(BBox(-5, -5, 8, 8), 10, 10, margin_frac=0.0)
    assert am[:3, :3].all()
    assert am.sum() == 9


def test_attention_map_outside_frame_is_empty():
    am = attention_map(BBox(100, 100, 5, 5), 10, 10)
    assert am.sum() == 0


def test_attention_map_fractional_box_rounds_outward():
    am = attention_map(BBox(2.6, 2.6, 1.0, 1.0), 8, 8, margin_frac=0.0)
    # box spans [2.6, 3.6): pixels 2 and 3 in each axis
    assert am[2:4, 2:4].all()
    assert am.sum() == 4


def test_attention_map_rejects_negative_margin():
    with pytest.raises(ValueError):
        attention_map(BBox(0, 0, 2, 2), 5, 5, margin_frac=-0.1)


def test_filter_mask_products_and_shape_check():
    am = np.zeros((4, 4), dtype=np.uint8)
    am[:2] = 1
    mask = np.full((4, 4), 0.7)
    out = filter_mask(am, mask)
    assert np.allclose(out[:2], 0.7)
    assert np.allclose(out[2:], 0.0)
    with pytest.raises(ValueError):
        filter_mask(am, np.zeros((3, 4)))
