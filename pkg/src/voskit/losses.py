"""Hybrid segmentation losses with analytic gradients.

Three complementary terms over a predicted probability map p and a binary
target t, each reduced with a mean over pixels so unit weighting stays
scale-free across resolutions:

* cross-entropy        -mean(t*ln p + (1-t)*ln(1-p)), p clamped to [eps, 1-eps]
* structural (1-SSIM)  window statistics compare local structure, not pixels
* soft IoU             1 - sum(p*t) / (sum(p + t - p*t) + eps)

``total_loss`` combines them with nonnegative weights. Every loss returns
both its value and the exact derivative with respect to the prediction map,
so the terms can drive gradient descent without an autograd framework.
``fit_toy_segmenter`` is a minimal end-to-end consumer: a per-pixel logistic
model trained by plain gradient descent on the combined loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GaussianWindow,
    as_grid,
    check_same_shape,
    gaussian_window,
    windowed_mean,
    windowed_mean_adjoint,
)

CLAMP_EPS = 1e-7
IOU_EPS = 1e-7
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass(frozen=True)
class LossOut:
    """Loss value plus d(value)/d(prediction), same shape as the prediction."""

    value: float
    grad: np.ndarray


@dataclass(frozen=True)
class LossWeights:
    lambda_ce: float = 1.0
    lambda_ssim: float = 1.0
    lambda_iou: float = 1.0

    def __post_init__(self):
        for name, lam in (
            ("lambda_ce", self.lambda_ce),
            ("lambda_ssim", self.lambda_ssim),
            ("lambda_iou", self.lambda_iou),
        ):
            if not np.isfinite(lam) or lam < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {lam}")


def _check_pair(pred, target) -> tuple[np.ndarray, np.ndarray]:
    p = as_grid(pred)
    t = as_grid(target)
    check_same_shape(p, t)
    return p, t


def _check_binary(t: np.ndarray) -> None:
    if not np.all((t == 0.0) | (t == 1.0)):
        raise ValueError("target must be binary (every value 0 or 1)")


def ce_loss(pred: np.ndarray, target: np.ndarray) -> LossOut:
    """Mean binary cross-entropy.

    Predictions are clamped to [CLAMP_EPS, 1-CLAMP_EPS] before the logs; the
    gradient is zero where the clamp is active (the clamped function is
    locally constant there).
    """
    p, t = _check_pair(pred, target)
    _check_binary(t)
    n = p.size
    pc = np.clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
    value = -float(np.mean(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc)))
    grad = (-t / pc + (1.0 - t) / (1.0 - pc)) / n
    grad[(p < CLAMP_EPS) | (p > 1.0 - CLAMP_EPS)] = 0.0
    return LossOut(value=value, grad=grad)


def iou_loss(pred: np.ndarray, target: np.ndarray) -> LossOut:
    """Soft IoU loss, 1 - intersection/union over the whole map.

    The union is stabilized with IOU_EPS so two empty masks give a defined
    (maximal) loss instead of 0/0.
    """
    p, t = _check_pair(pred, target)
    inter = float(np.sum(p * t))
    union = float(np.sum(p + t - p * t)) + IOU_EPS
    value = 1.0 - inter / union
    # d inter/dp = t, d union/dp = 1 - t
    grad = -(t * union - inter * (1.0 - t)) / union**2
    return LossOut(value=value, grad=grad)


def ssim_loss(
    pred: np.ndarray,
    target: np.ndarray,
    window: GaussianWindow | None = None,
) -> LossOut:
    """Structural similarity loss, 1 - mean(SSIM map).

    Per pixel, with windowed means mu, variances s and covariance spt on the
    [0, 1] value range:

        SSIM = ((2*mu_p*mu_t + C1) * (2*s_pt + C2))
             / ((mu_p^2 + mu_t^2 + C1) * (s_p + s_t + C2))

    The gradient propagates through the three window statistics that depend
    on the prediction (mu_p, s_p, s_pt) via the exact window adjoint.
    """
    p, t = _check_pair(pred, target)
    if window is None:
        window = gaussian_window()
    n = p.size

    mu_p = windowed_mean(p, window)
    mu_t = windowed_mean(t, window)
    var_p = np.maximum(windowed_mean(p * p, window) - mu_p * mu_p, 0.0)
    var_t = np.maximum(windowed_mean(t * t, window) - mu_t * mu_t, 0.0)
    cov = windowed_mean(p * t, window) - mu_p * mu_t

    a1 = 2.0 * mu_p * mu_t + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b1 = mu_p * mu_p + mu_t * mu_t + SSIM_C1
    b2 = var_p + var_t + SSIM_C2
    ssim_map = (a1 * a2) / (b1 * b2)
    value = 1.0 - float(np.mean(ssim_map))

    # Partials of the per-pixel SSIM w.r.t. the prediction's statistics.
    d_mu = (2.0 * mu_t * a2) / (b1 * b2) - 2.0 * mu_p * ssim_map / b1
    d_var = -ssim_map / b2
    d_cov = 2.0 * a1 / (b1 * b2)

    # Chain through mu_p = W p, var_p = W(p^2) - mu_p^2, cov = W(p t) - mu_p mu_t.
    g = windowed_mean_adjoint(d_mu, window)
    g += 2.0 * p * windowed_mean_adjoint(d_var, window)
    g -= 2.0 * windowed_mean_adjoint(d_var * mu_p, window)
    g += t * windowed_mean_adjoint(d_cov, window)
    g -= windowed_mean_adjoint(d_cov * mu_t, window)
    return LossOut(value=value, grad=-g / n)


def total_loss(
    pred: np.ndarray,
    target: np.ndarray,
    weights: LossWeights = LossWeights(),
    window: GaussianWindow | None = None,
) -> LossOut:
    """Weighted sum of the three loss terms; terms with weight 0 are skipped
    so the projections onto a single term are bit-exact."""
    p, t = _check_pair(pred, target)
    value = 0.0
    grad = np.zeros_like(p)
    if weights.lambda_ce != 0.0:
        out = ce_loss(p, t)
        value += weights.lambda_ce * out.value
        grad += weights.lambda_ce * out.grad
    if weights.lambda_ssim != 0.0:
        out = ssim_loss(p, t, window)
        value += weights.lambda_ssim * out.value
        grad += weights.lambda_ssim * out.grad
    if weights.lambda_iou != 0.0:
        out = iou_loss(p, t)
        value += weights.lambda_iou * out.value
        grad += weights.lambda_iou * out.grad
    return LossOut(value=value, grad=grad)


def mean_total_loss(
    preds: list[np.ndarray],
    targets: list[np.ndarray],
    weights: LossWeights = LossWeights(),
    window: GaussianWindow | None = None,
) -> tuple[float, list[np.ndarray]]:
    """Average the combined loss over object channels.

    Keeps the loss scale independent of how many objects a frame carries;
    returns the mean value and the per-channel gradients (each already
    divided by the channel count).
    """
    if len(preds) != len(targets) or not preds:
        raise ValueError("need equal, nonzero numbers of prediction and target channels")
    k = len(preds)
    outs = [total_loss(p, t, weights, window) for p, t in zip(preds, targets)]
    return sum(o.value for o in outs) / k, [o.grad / k for o in outs]


def fit_toy_segmenter(
    features: np.ndarray,
    target: np.ndarray,
    weights: LossWeights = LossWeights(),
    steps: int = 500,
    lr: float = 0.5,
    window: GaussianWindow | None = None,
) -> tuple[np.ndarray, list[float]]:
    """Train a per-pixel logistic model sigmoid(f . w + b) by gradient descent
    on the combined loss.

    features has shape (H, W, d); the returned parameter vector is
    (w_1..w_d, b), initialized at zero. The loss history has steps + 1
    entries, the first being the loss at initialization.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim != 3 or f.shape[2] < 1:
        raise ValueError(f"features must have shape (H, W, d), got {f.shape}")
    if not np.all(np.isfinite(f)):
        raise ValueError("features must be finite")
    t = as_grid(target)
    if f.shape[:2] != t.shape:
        raise ValueError(f"feature grid {f.shape[:2]} does not match target {t.shape}")
    if steps < 0:
        raise ValueError("steps must be >= 0")

    d = f.shape[2]
    params = np.zeros(d + 1)
    history = []
    for _ in range(steps):
        z = f @ params[:d] + params[d]
        p = 1.0 / (1.0 + np.exp(-z))
        out = total_loss(p, t, weights, window)
        history.append(out.value)
        dz = out.grad * p * (1.0 - p)
        step = np.empty(d + 1)
        step[:d] = np.tensordot(dz, f, axes=((0, 1), (0, 1)))
        step[d] = dz.sum()
        params -= lr * step
    z = f @ params[:d] + params[d]
    p = 1.0 / (1.0 + np.exp(-z))
    history.append(total_loss(p, t, weights, window).value)
    return params, history
