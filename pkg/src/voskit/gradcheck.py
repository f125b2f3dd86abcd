"""Finite-difference validation of every analytic gradient in the package.

Each check builds a random smooth instance, computes the analytic gradient,
and compares against central differences component by component. The error
measure is relative where the gradient is meaningfully sized and absolute
below a floor, so near-zero components cannot blow up the ratio.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import losses
from .motion_mlp import gelu, gelu_grad, init_params, mlp_backward, mlp_forward
from .rng import Rng

FD_EPS = 1e-5
REL_FLOOR = 1e-6

TOLERANCES = {
    "ce_loss": 1e-4,
    "iou_loss": 1e-4,
    "ssim_loss": 1e-3,
    "total_loss": 1e-3,
    "gelu": 1e-4,
    "mlp_backward": 1e-4,
}


def central_diff(f, x: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
    """Central finite differences of a scalar function, one component at a
    time; x is perturbed in place and restored."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = f(x)
        flat[i] = orig - eps
        fm = f(x)
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def max_err(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_FLOOR) -> float:
    """Worst componentwise deviation: relative when either side exceeds the
    floor, absolute otherwise."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    if a.shape != n.shape:
        raise ValueError(f"gradient shapes differ: {a.shape} vs {n.shape}")
    diff = np.abs(a - n)
    denom = np.maximum(np.abs(a), np.abs(n))
    rel = np.where(denom > floor, diff / np.maximum(denom, floor), diff)
    return float(rel.max()) if rel.size else 0.0


def _random_instance(seed: int, size: int):
    """Smooth prediction in [0.05, 0.95] (clear of the CE clamp) and a
    binary target."""
    rng = Rng(seed)
    pred = rng.uniform_range(0.05, 0.95, size * size).reshape(size, size)
    target = (rng.uniform(size * size).reshape(size, size) > 0.5).astype(np.float64)
    return pred, target


def check_ce(seed: int, size: int) -> float:
    pred, target = _random_instance(seed, size)
    analytic = losses.ce_loss(pred, target).grad
    numeric = central_diff(lambda p: losses.ce_loss(p, target).value, pred)
    return max_err(analytic, numeric)


def check_iou(seed: int, size: int) -> float:
    pred, target = _random_instance(seed, size)
    analytic = losses.iou_loss(pred, target).grad
    numeric = central_diff(lambda p: losses.iou_loss(p, target).value, pred)
    return max_err(analytic, numeric)


def check_ssim(seed: int, size: int) -> float:
    pred, target = _random_instance(seed, size)
    analytic = losses.ssim_loss(pred, target).grad
    numeric = central_diff(lambda p: losses.ssim_loss(p, target).value, pred)
    return max_err(analytic, numeric)


def check_total(seed: int, size: int) -> float:
    pred, target = _random_instance(seed, size)
    weights = losses.LossWeights()
    analytic = losses.total_loss(pred, target, weights).grad
    numeric = central_diff(lambda p: losses.total_loss(p, target, weights).value, pred)
    return max_err(analytic, numeric)


def check_gelu(seed: int, size: int) -> float:
    rng = Rng(seed)
    x = rng.uniform_range(-3.0, 3.0, size)
    c = rng.uniform_range(-1.0, 1.0, size)
    analytic = gelu_grad(x) * c
    numeric = central_diff(lambda v: float(np.sum(gelu(v) * c)), x)
    return max_err(analytic, numeric)


def _randomized_params(seed: int):
    """He-style random weights in every layer (the zero output layer of a
    fresh model would make upstream gradients vanish identically)."""
    params = init_params(seed)
    rng = Rng(seed ^ 0x5EED)
    for i, layer in enumerate(params):
        r = rng.spawn(i)
        fan_in = layer["weight"].shape[0]
        bound = np.sqrt(6.0 / fan_in)
        layer["weight"] = r.uniform_range(-bound, bound, layer["weight"].size).reshape(
            layer["weight"].shape
        )
        layer["bias"] = r.uniform_range(-0.1, 0.1, layer["bias"].size)
    return params


HIDDEN_WEIGHT_STRIDE = 7


def check_mlp(seed: int, batch: int = 3) -> float:
    """FD check of the full backward pass. Biases and the first and last
    weight matrices are checked exhaustively; the large hidden weight
    matrices on a fixed stride (a backprop defect corrupts whole layers, so
    strided coverage still catches it while keeping runtime sane)."""
    params = _randomized_params(seed)
    rng = Rng(seed + 77)
    x = rng.uniform_range(-1.0, 1.0, batch * 4).reshape(batch, 4)
    c = rng.uniform_range(-1.0, 1.0, batch * 4).reshape(batch, 4)

    out, cache = mlp_forward(params, x)
    analytic = mlp_backward(params, cache, c)

    def scalar() -> float:
        value, _ = mlp_forward(params, x)
        return float(np.sum(value * c))

    last = len(params) - 1
    worst = 0.0
    for i, layer in enumerate(params):
        for key in ("weight", "bias"):
            arr = layer[key].reshape(-1)
            expected = analytic[i][key].reshape(-1)
            exhaustive = key == "bias" or i in (0, last)
            indices = (
                range(arr.size)
                if exhaustive
                else range(seed % HIDDEN_WEIGHT_STRIDE, arr.size, HIDDEN_WEIGHT_STRIDE)
            )
            for j in indices:
                orig = arr[j]
                arr[j] = orig + FD_EPS
                fp = scalar()
                arr[j] = orig - FD_EPS
                fm = scalar()
                arr[j] = orig
                numeric = (fp - fm) / (2.0 * FD_EPS)
                worst = max(worst, max_err(expected[j : j + 1], np.array([numeric])))
    return worst


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_err: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_err < self.tol


CHECKS = {
    "ce_loss": check_ce,
    "iou_loss": check_iou,
    "ssim_loss": check_ssim,
    "total_loss": check_total,
    "gelu": check_gelu,
    "mlp_backward": None,  # special-cased below (no grid size)
}


def run_all(base_seed: int = 0, n_seeds: int = 10, size: int = 16) -> list[CheckResult]:
    """All gradient checks over n_seeds seeds each; the reported error is the
    worst seed's worst component."""
    if n_seeds < 1:
        raise ValueError(f"need at least one seed, got {n_seeds}")
    results = []
    for name, fn in CHECKS.items():
        worst = 0.0
        for k in range(n_seeds):
            seed = base_seed + k
            err = check_mlp(seed) if name == "mlp_backward" else fn(seed, size)
            worst = max(worst, err)
        results.append(CheckResult(name=name, max_err=worst, tol=TOLERANCES[name]))
    return results
