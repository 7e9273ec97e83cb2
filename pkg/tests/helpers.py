"""Independent reference implementations and a finite-difference checker.

Everything here is deliberately written as literal loops over scalars so it
shares no code path with the package modules it verifies.
"""

import math

import numpy as np
import torch


def loop_attention(query, context, mask, w_q, w_k, w_v, scale,
                   w_out=None, b_out=None):
    """Triple-loop softmax attention over one unbatched instance.

    query: (L, Dq); context: (N, Dc); mask: (N,) bools; w_*: numpy arrays
    laid out as (out_dim, in_dim) like torch Linear weights.
    """
    L = query.shape[0]
    N = context.shape[0]
    q = np.array([w_q @ query[i] for i in range(L)])
    k = np.array([w_k @ context[j] for j in range(N)])
    v = np.array([w_v @ context[j] for j in range(N)])
    out = np.zeros((L, v.shape[1]))
    for i in range(L):
        logits = np.full(N, -np.inf)
        for j in range(N):
            if mask[j]:
                s = 0.0
                for d in range(q.shape[1]):
                    s += q[i, d] * k[j, d]
                logits[j] = s * scale
        m = logits.max()
        exps = np.where(np.isneginf(logits), 0.0, np.exp(logits - m))
        weights = exps / exps.sum()
        for j in range(N):
            out[i] += weights[j] * v[j]
    if w_out is not None:
        out = out @ w_out.T + b_out
    return out


def loop_layernorm(x, weight, bias, eps=1e-5):
    """Per-row layer normalization, one row at a time."""
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        mu = x[i].mean()
        var = ((x[i] - mu) ** 2).mean()
        out[i] = (x[i] - mu) / math.sqrt(var + eps) * weight + bias
    return out


def loop_gelu(x):
    from scipy.stats import norm
    return np.vectorize(lambda v: v * norm.cdf(v))(x)


def loop_segmentation_loss(logits, gt, dice_weight=0.1, smooth=1.0):
    """Scalar-loop BCE + dice on one (H, W) instance."""
    h, w = logits.shape
    ce = 0.0
    inter = psum = gsum = 0.0
    for i in range(h):
        for j in range(w):
            z = logits[i, j]
            p = 1.0 / (1.0 + math.exp(-z))
            t = gt[i, j]
            ce += -(t * math.log(p) + (1 - t) * math.log(1 - p))
            inter += p * t
            psum += p
            gsum += t
    ce /= h * w
    dice = 1.0 - (2.0 * inter + smooth) / (psum + gsum + smooth)
    return ce + dice_weight * dice, ce, dice


def loop_iou(pred, gt):
    """Per-pixel double loop intersection-over-union."""
    inter = union = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p = bool(pred[i, j])
            g = bool(gt[i, j])
            if p and g:
                inter += 1
            if p or g:
                union += 1
    return 1.0 if union == 0 else inter / union


def zero_(module_or_param):
    """Zero-fill a Linear/Conv layer's weight and bias in place."""
    with torch.no_grad():
        module_or_param.weight.zero_()
        if module_or_param.bias is not None:
            module_or_param.bias.zero_()


def finite_diff_check(scalar_fn, params, step=1e-3, rel_tol=1e-3,
                      max_coords=None, seed=0):
    """Compare autograd gradients of scalar_fn() against central differences.

    `params` is a list of float64 tensors with requires_grad=True that
    scalar_fn reads. Relative error uses a floor of 1e-4 on the denominator
    so finite-difference noise on near-zero coordinates is not amplified.
    Returns the worst relative error observed.
    """
    value = scalar_fn()
    grads = torch.autograd.grad(value, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for param, grad in zip(params, grads):
        flat = param.detach().view(-1)
        n = flat.numel()
        coords = range(n)
        if max_coords is not None and n > max_coords:
            coords = rng.choice(n, size=max_coords, replace=False)
        for idx in coords:
            original = flat[idx].item()
            with torch.no_grad():
                flat[idx] = original + step
            up = scalar_fn().item()
            with torch.no_grad():
                flat[idx] = original - step
            down = scalar_fn().item()
            with torch.no_grad():
                flat[idx] = original
            numeric = (up - down) / (2 * step)
            analytic = grad.view(-1)[idx].item()
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-4)
            worst = max(worst, rel)
            assert rel <= rel_tol, (
                f"gradient mismatch at coord {idx}: analytic {analytic:.6g} "
                f"vs numeric {numeric:.6g} (rel {rel:.3g})"
            )
    return worst
