"""Tour of the hybrid segmentation loss.

Walks the three terms (cross-entropy, SSIM, soft IoU) through their
closed-form anchor cases, then trains the bundled toy per-pixel segmenter
by plain gradient descent on the combined objective to show that the
analytic gradients point downhill.

Run: python3 demos/loss_playground.py
"""

import numpy as np

from voskit.losses import (
    LossWeights,
    ce_loss,
    fit_toy_segmenter,
    iou_loss,
    ssim_loss,
    total_loss,
)


def banner(title: str) -> None:
    print()
    print(title)
    print("-" * len(title))


def main() -> None:
    banner("Anchor cases")
    square = np.zeros((16, 16))
    square[4:12, 4:12] = 1.0
    far = np.zeros((16, 16))
    far[0:3, 13:16] = 1.0
    half = np.zeros((16, 16))
    half[:, :8] = 1.0
    uniform = np.full((16, 16), 0.5)

    print(f"ssim(mask, itself)          = {ssim_loss(square, square).value:.2e}  (identical structure -> 0)")
    print(f"iou(disjoint masks)         = {iou_loss(square, far).value:.6f}  (no overlap -> 1)")
    print(f"ce(pred 0.5 vs any target)  = {ce_loss(uniform, square).value:.9f}  (= ln 2 = {np.log(2):.9f})")
    print(f"iou(pred 0.5 vs half-ones)  = {iou_loss(uniform, half).value:.9f}  (= 2/3)")

    banner("The combined loss is the weighted sum of its parts")
    rng = np.random.default_rng(3)
    pred = np.clip(rng.random((20, 20)), 0.05, 0.95)
    target = (rng.random((20, 20)) > 0.5).astype(np.float64)
    parts = {
        "ce": ce_loss(pred, target).value,
        "ssim": ssim_loss(pred, target).value,
        "iou": iou_loss(pred, target).value,
    }
    combined = total_loss(pred, target, weights=LossWeights(1.0, 1.0, 1.0)).value
    for name, value in parts.items():
        print(f"  {name:5s} {value:.6f}")
    print(f"  sum   {sum(parts.values()):.6f}   total_loss {combined:.6f}")

    banner("Gradient descent on a separable toy instance")
    size = 24
    cols = np.arange(size, dtype=np.float64)
    step = np.tile(np.where(cols >= size // 2, 1.0, -1.0), (size, 1))
    features = np.stack([step, np.ones((size, size))], axis=-1)
    target = (step > 0.0).astype(np.float64)

    params, history = fit_toy_segmenter(features, target, steps=500)
    for i in (0, 10, 50, 100, 250, 500):
        print(f"  step {i:3d}  L_total {history[i]:.6f}")
    print(f"  learned parameters (w1, w2, bias): {np.round(params, 3)}")
    print(f"  reduction: {history[0] / history[-1]:.0f}x")


if __name__ == "__main__":
    main()
