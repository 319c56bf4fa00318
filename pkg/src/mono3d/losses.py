"""Training-loss formulas as pure numerical functions.

Every loss returns its value together with analytic gradients so the formulas
can be verified against central finite differences without any autograd
framework. Probabilities are expected to be clamped to [CLAMP_EPS,
1 - CLAMP_EPS] by the caller; clamp_probs implements that policy.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .shape_labels import MaskGrid

CLAMP_EPS = 1e-7


def clamp_probs(probs: np.ndarray, eps: float = CLAMP_EPS) -> np.ndarray:
    """Clamp probabilities away from 0 and 1 so the log terms stay finite."""
    return np.clip(np.asarray(probs, dtype=np.float64), eps, 1.0 - eps)


def _check_probs(probs: np.ndarray, name: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size and not ((probs > 0.0).all() and (probs < 1.0).all()):
        raise ValidationError(f"{name} must lie strictly inside (0, 1); apply clamp_probs")
    return probs


def seg_loss(probs: np.ndarray, labels, log_sigma: float):
    """Uncertainty-weighted masked binary cross-entropy over an s x s grid.

    labels is a MaskGrid or an (s, s) array over {1, 0, -1}; -1 cells carry no
    gradient. With sigma = exp(log_sigma):

        L = -(1 / (s^2 sigma^2)) * sum[1(y=1) log p + 1(y=0) log(1 - p)]
            + (log_sigma / s^2) * count(y != -1)

    Returns (value, d_probs, d_log_sigma).
    """
    if isinstance(labels, MaskGrid):
        labels = labels.labels
    labels = np.asarray(labels)
    probs = _check_probs(probs, "probs")
    if probs.shape != labels.shape or probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
        raise ValidationError(f"probs {probs.shape} and labels {labels.shape} must be equal square grids")
    s2 = float(probs.shape[0]) ** 2
    sigma2 = math.exp(2.0 * log_sigma)

    pos = labels == 1
    neg = labels == 0
    known = float(np.count_nonzero(pos) + np.count_nonzero(neg))

    log_terms = float(np.log(probs[pos]).sum() + np.log1p(-probs[neg]).sum())
    value = -log_terms / (s2 * sigma2) + (log_sigma / s2) * known

    d_probs = np.zeros_like(probs)
    d_probs[pos] = -1.0 / (s2 * sigma2 * probs[pos])
    d_probs[neg] = 1.0 / (s2 * sigma2 * (1.0 - probs[neg]))
    d_log_sigma = 2.0 * log_terms / (s2 * sigma2) + known / s2
    return value, d_probs, d_log_sigma


def laplacian_depth_loss(z: float, z_gt: float, log_sigma: float):
    """Laplacian aleatoric depth loss: (sqrt(2)/sigma) |z - z_gt| + log_sigma.

    Returns (value, d_z, d_log_sigma). Minimized over sigma at
    sigma = sqrt(2) |z - z_gt|.
    """
    sigma = math.exp(log_sigma)
    diff = z - z_gt
    value = math.sqrt(2.0) / sigma * abs(diff) + log_sigma
    sign = 0.0 if diff == 0 else math.copysign(1.0, diff)
    d_z = math.sqrt(2.0) / sigma * sign
    d_log_sigma = -math.sqrt(2.0) / sigma * abs(diff) + 1.0
    return value, d_z, d_log_sigma


def dim_loss(pred_deltas, gt_dims, class_means):
    """L1 loss on decoded dimensions: sum_k |mean_k e^{delta_k} - gt_k|.

    Returns (value, d_deltas).
    """
    pred_deltas = np.asarray(pred_deltas, dtype=np.float64)
    gt_dims = np.asarray(gt_dims, dtype=np.float64)
    class_means = np.asarray(class_means, dtype=np.float64)
    if not (pred_deltas.shape == gt_dims.shape == class_means.shape):
        raise ValidationError("dim_loss inputs must share one shape")
    if (class_means <= 0).any() or (gt_dims <= 0).any():
        raise ValidationError("dimensions and class means must be positive")
    decoded = class_means * np.exp(pred_deltas)
    resid = decoded - gt_dims
    value = float(np.abs(resid).sum())
    d_deltas = np.sign(resid) * decoded
    return value, d_deltas


def _check_box(box, name: str):
    l, t, r, b = (float(v) for v in box)
    if not (r > l and b > t):
        raise ValidationError(f"{name} is degenerate: {box}")
    return l, t, r, b


def _giou_with_grad(a, b):
    # Gradient is with respect to a's (left, top, right, bottom).
    al, at, ar, ab = _check_box(a, "box a")
    bl, bt, br, bb = _check_box(b, "box b")

    area_a = (ar - al) * (ab - at)
    area_b = (br - bl) * (bb - bt)
    d_area = np.array([-(ab - at), -(ar - al), (ab - at), (ar - al)])

    iw = min(ar, br) - max(al, bl)
    ih = min(ab, bb) - max(at, bt)
    d_inter = np.zeros(4)
    if iw > 0 and ih > 0:
        inter = iw * ih
        if al > bl:
            d_inter[0] = -ih
        if at > bt:
            d_inter[1] = -iw
        if ar < br:
            d_inter[2] = ih
        if ab < bb:
            d_inter[3] = iw
    else:
        inter = 0.0

    union = area_a + area_b - inter
    d_union = d_area - d_inter
    iou = inter / union
    d_iou = (d_inter * union - inter * d_union) / union ** 2

    cw = max(ar, br) - min(al, bl)
    ch = max(ab, bb) - min(at, bt)
    c_area = cw * ch
    d_c = np.zeros(4)
    if al < bl:
        d_c[0] = -ch
    if at < bt:
        d_c[1] = -cw
    if ar > br:
        d_c[2] = ch
    if ab > bb:
        d_c[3] = cw

    value = iou - (c_area - union) / c_area
    # d[(C - U)/C] = (dC * U - dU * C) / C^2 ... with the sign folded in below.
    d_value = d_iou + (d_union * c_area - union * d_c) / c_area ** 2
    return value, d_value


def giou(a, b) -> float:
    """Generalized IoU of two axis-aligned boxes (left, top, right, bottom).

    Lies in (-1, 1]; 1 for identical boxes, negative when the enclosing box is
    dominated by empty space.
    """
    value, _ = _giou_with_grad(a, b)
    return value


def giou_loss(pred, gt):
    """GIoU loss 1 - giou(pred, gt) with its gradient w.r.t. pred.

    Returns (value, d_pred) where d_pred covers (left, top, right, bottom).
    """
    value, d_value = _giou_with_grad(pred, gt)
    return 1.0 - value, -d_value


def focal_loss(probs: np.ndarray, targets: np.ndarray,
               alpha: float = 2.0, beta: float = 4.0):
    """Penalty-reduced focal loss on a Gaussian-splatted center heatmap.

    Cells with target exactly 1 are positives; all other cells are negatives
    weighted by (1 - target)^beta. The sum is normalized by the positive count
    (by 1 when there are no positives). Returns (value, d_probs).
    """
    probs = _check_probs(probs, "probs")
    targets = np.asarray(targets, dtype=np.float64)
    if probs.shape != targets.shape:
        raise ValidationError("probs and targets must share one shape")
    if targets.size and (targets.min() < 0 or targets.max() > 1):
        raise ValidationError("targets must lie in [0, 1]")

    pos = targets == 1.0
    neg = ~pos
    n_pos = int(np.count_nonzero(pos))
    norm = float(max(n_pos, 1))

    p = probs[pos]
    pos_sum = float(((1.0 - p) ** alpha * np.log(p)).sum())
    q = probs[neg]
    w = (1.0 - targets[neg]) ** beta
    neg_sum = float((w * q ** alpha * np.log1p(-q)).sum())
    value = -(pos_sum + neg_sum) / norm

    d_probs = np.zeros_like(probs)
    d_probs[pos] = -((1.0 - p) ** alpha / p
                     - alpha * (1.0 - p) ** (alpha - 1.0) * np.log(p)) / norm
    d_probs[neg] = -w * (alpha * q ** (alpha - 1.0) * np.log1p(-q)
                         - q ** alpha / (1.0 - q)) / norm
    return value, d_probs


def multibin_loss(bin_logits, sincos, gt_alpha: float, num_bins: int | None = None):
    """MultiBin orientation loss: softmax cross-entropy over bin membership
    plus L1 on the (sin, cos) residual inside the ground-truth bin.

    Returns (value, d_logits, d_sincos); d_sincos is (num_bins, 2) and is zero
    outside the ground-truth bin.
    """
    from .mono_decode import bin_center, bin_of  # local import avoids a cycle

    logits = np.asarray(bin_logits, dtype=np.float64)
    sc = np.asarray(sincos, dtype=np.float64)
    if num_bins is None:
        num_bins = len(logits)
    if logits.shape != (num_bins,) or sc.shape != (num_bins, 2):
        raise ValidationError(f"expected {num_bins} logits and (num_bins, 2) residuals")

    b = bin_of(gt_alpha, num_bins)
    shifted = logits - logits.max()
    log_norm = math.log(np.exp(shifted).sum())
    ce = log_norm - float(shifted[b])
    softmax = np.exp(shifted - log_norm)
    d_logits = softmax.copy()
    d_logits[b] -= 1.0

    from .geom3d import wrap_angle

    residual = wrap_angle(wrap_angle(gt_alpha) - bin_center(b, num_bins))
    target = np.array([math.sin(residual), math.cos(residual)])
    diff = sc[b] - target
    l1 = float(np.abs(diff).sum())
    d_sincos = np.zeros_like(sc)
    d_sincos[b] = np.sign(diff)
    return ce + l1, d_logits, d_sincos
