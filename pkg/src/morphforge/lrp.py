"""Layer-wise relevance propagation with per-layer rule assignment.

Rules: epsilon decomposition for fully connected layers, alpha-beta
(alpha=2, beta=-1) for convolution layers after the first pooling stage,
flat redistribution for the first convolution block. ReLU passes relevance
through unchanged; max pooling routes it to the winning input.

Denominators use the input contributions only (biases excluded), so the
propagation conserves relevance exactly up to the epsilon stabilizer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors
from .nn import Conv, Dense, Flatten, MaxPool, Network, ReLU, _im2col, softmax
from .regions import RegionId, region_mask


@dataclass(frozen=True)
class LrpRuleAssignment:
    """Stabilizers and the flat/alpha-beta boundary.

    first_block_end: index of the first MaxPool layer (exclusive upper bound
    of the flat-rule zone). None selects it automatically.
    """

    epsilon: float = 1e-9
    alpha: float = 2.0
    beta: float = -1.0
    first_block_end: int | None = None

    def __post_init__(self):
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ValueError("alpha + beta must equal 1 for conservation")


def _stab(z, eps):
    s = np.where(z >= 0.0, 1.0, -1.0)
    return z + eps * s


def _dense_epsilon(layer: Dense, x, rel, eps):
    z = x @ layer.w  # bias excluded from the denominator
    s = rel / _stab(z, eps)
    return x * (s @ layer.w.T)


def _ab_shares(zp, zn, rel, alpha, beta, eps):
    """Per-unit alpha/beta relevance shares.

    When one side has no contributions its share is folded into the other
    side (alpha + beta = 1), so every unit redistributes exactly its own
    relevance and conservation survives one-sided units.
    """
    ap = np.where(zn == 0.0, alpha + beta, alpha)
    bn = np.where(zn == 0.0, 0.0, beta)
    bn = np.where(zp == 0.0, alpha + beta, bn)
    ap = np.where(zp == 0.0, 0.0, ap)
    dead = (zp == 0.0) & (zn == 0.0)
    ap = np.where(dead, 0.0, ap)
    bn = np.where(dead, 0.0, bn)
    return ap * rel / _stab(zp, eps), bn * rel / _stab(zn, eps)


def _dense_alphabeta(layer: Dense, x, rel, alpha, beta, eps):
    wp = np.maximum(layer.w, 0.0)
    wn = np.minimum(layer.w, 0.0)
    xp = np.maximum(x, 0.0)
    xn = np.minimum(x, 0.0)
    zp = xp @ wp + xn @ wn
    zn = xp @ wn + xn @ wp
    sp, sn = _ab_shares(zp, zn, rel, alpha, beta, eps)
    return xp * (sp @ wp.T) + xn * (sn @ wn.T) \
        + xp * (sn @ wn.T) + xn * (sp @ wp.T)


def _conv_apply(layer: Conv, x, w):
    pad = layer.kernel // 2
    return _im2col(x, layer.kernel, layer.kernel, pad) @ w


def _conv_transpose(layer: Conv, s, w, xshape):
    """Adjoint of the padded stride-1 convolution with kernel matrix w."""
    n, oh, ow, _ = s.shape
    k = layer.kernel
    pad = k // 2
    g2 = s.reshape(-1, w.shape[1])
    gcols = (g2 @ w.T).reshape(n, oh, ow, k, k, xshape[3])
    h, wdt = xshape[1], xshape[2]
    gxp = np.zeros((n, h + 2 * pad, wdt + 2 * pad, xshape[3]))
    for i in range(k):
        for j in range(k):
            gxp[:, i:i + oh, j:j + ow, :] += gcols[:, :, :, i, j, :]
    return gxp[:, pad:pad + h, pad:pad + wdt, :]


def _conv_epsilon(layer: Conv, x, rel, eps):
    z = _conv_apply(layer, x, layer.w)
    s = rel / _stab(z, eps)
    return x * _conv_transpose(layer, s, layer.w, x.shape)


def _conv_alphabeta(layer: Conv, x, rel, alpha, beta, eps):
    wp = np.maximum(layer.w, 0.0)
    wn = np.minimum(layer.w, 0.0)
    xp = np.maximum(x, 0.0)
    xn = np.minimum(x, 0.0)
    zp = _conv_apply(layer, xp, wp) + _conv_apply(layer, xn, wn)
    zn = _conv_apply(layer, xp, wn) + _conv_apply(layer, xn, wp)
    sp, sn = _ab_shares(zp, zn, rel, alpha, beta, eps)
    return xp * _conv_transpose(layer, sp, wp, x.shape) \
        + xn * _conv_transpose(layer, sp, wn, x.shape) \
        + xp * _conv_transpose(layer, sn, wn, x.shape) \
        + xn * _conv_transpose(layer, sn, wp, x.shape)


def _conv_flat(layer: Conv, x, rel):
    """Uniform redistribution over the in-bounds receptive field inputs."""
    ones_w = np.ones_like(layer.w)
    counts = _conv_apply(layer, np.ones_like(x), ones_w)
    s = rel / counts
    return np.ones_like(x) * _conv_transpose(layer, s, ones_w, x.shape)


def _pool_backward(layer: MaxPool, x, rel):
    n, h, w, c = x.shape
    v = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
    v = v.reshape(n, h // 2, w // 2, c, 4)
    idx = v.argmax(axis=4)
    out = np.zeros_like(v)
    np.put_along_axis(out, idx[..., None], rel[..., None], axis=4)
    out = out.reshape(n, h // 2, w // 2, c, 2, 2)
    return out.transpose(0, 1, 4, 2, 5, 3).reshape(n, h, w, c)


def lrp_propagate(net: Network, img, class_index,
                  rules: LrpRuleAssignment = LrpRuleAssignment(),
                  gate=0.1) -> np.ndarray:
    """Relevance map at input resolution for one image.

    Relevance starts at the class logit and is propagated backward with the
    assigned rules. Raises BelowGate when the softmax output for the class
    falls below gate (set gate=None to disable).
    """
    x = np.asarray(img, dtype=np.float64)
    squeeze = x.ndim == 3
    if squeeze:
        x = x[None]
    if x.ndim != 4:
        raise errors.ShapeMismatch(f"expected (H,W,C) or (N,H,W,C), got {x.shape}")

    # forward pass recording every layer input
    inputs = []
    out = x
    for layer in net.layers:
        inputs.append(out)
        out = layer.forward(out)
    logits = out
    if gate is not None:
        prob = softmax(logits)[:, class_index]
        if (prob < gate).any():
            raise errors.BelowGate(
                f"softmax output {float(prob.min()):.4f} below gate {gate}")

    rel = np.zeros_like(logits)
    rel[:, class_index] = logits[:, class_index]

    first_block_end = rules.first_block_end
    if first_block_end is None:
        pools = [i for i, l in enumerate(net.layers) if isinstance(l, MaxPool)]
        first_block_end = pools[0] if pools else 0

    for i in reversed(range(len(net.layers))):
        layer = net.layers[i]
        x_in = inputs[i]
        if isinstance(layer, Dense):
            rel = _dense_epsilon(layer, x_in, rel, rules.epsilon)
        elif isinstance(layer, Conv):
            if i < first_block_end:
                rel = _conv_flat(layer, x_in, rel)
            else:
                rel = _conv_alphabeta(layer, x_in, rel, rules.alpha,
                                      rules.beta, rules.epsilon)
        elif isinstance(layer, MaxPool):
            rel = _pool_backward(layer, x_in, rel)
        elif isinstance(layer, Flatten):
            rel = rel.reshape(x_in.shape)
        elif isinstance(layer, ReLU):
            pass  # relevance passes through the activation unchanged
        else:
            raise errors.ShapeMismatch(f"no LRP rule for layer {type(layer).__name__}")
    maps = rel.sum(axis=3)  # collapse channels to a per-pixel map
    return maps[0] if squeeze else maps


def mean_adjust(maps):
    """Subtract the per-pixel mean over the list, then clamp negatives to 0."""
    if len(maps) == 0:
        raise errors.EmptyList("mean_adjust needs at least one map")
    arrs = [np.asarray(m, dtype=np.float64) for m in maps]
    shape = arrs[0].shape
    for a in arrs:
        if a.shape != shape:
            raise errors.ShapeMismatch(f"{a.shape} vs {shape}")
    mean = np.mean(arrs, axis=0)
    return [np.maximum(a - mean, 0.0) for a in arrs]


def region_relevance(relevance_map, lm) -> dict:
    """Fraction of (nonnegative) relevance falling in each hard region mask."""
    m = np.asarray(relevance_map, dtype=np.float64)
    h, w = m.shape
    totals = {}
    for region in RegionId:
        hard = region_mask(region, lm, (w, h)).mask >= 1.0
        totals[region] = float(m[hard].sum())
    denom = sum(totals.values())
    if denom <= 0.0:
        raise errors.ZeroRegionRelevance("no positive relevance in any region")
    return {r: v / denom for r, v in totals.items()}
