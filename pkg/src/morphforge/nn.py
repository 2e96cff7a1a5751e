"""Small from-scratch convolutional classifier with exact backpropagation.

All math is float64 numpy. Data layout is NHWC for images and (N, F) for
flattened features. Layers cache whatever their backward pass needs; a
backward call without a preceding forward raises NoForwardCache.

The default desk-scale architecture is three Conv(3x3, 8)-ReLU-MaxPool
blocks followed by FC(128)-ReLU and a head: Softmax over 2 classes for
binary training or four independent sigmoids for the multilabel regime.
"""

from __future__ import annotations

import io
import json
import struct

import numpy as np

from . import errors


def _im2col(x, kh, kw, pad):
    """(N, H, W, C) -> (N, OH, OW, kh*kw*C) patches, stride 1."""
    n, h, w, c = x.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    oh = h + 2 * pad - kh + 1
    ow = w + 2 * pad - kw + 1
    s = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, shape=(n, oh, ow, kh, kw, c),
        strides=(s[0], s[1], s[2], s[1], s[2], s[3]))
    return view.reshape(n, oh, ow, kh * kw * c)


class Layer:
    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def params(self):
        """List of (name, value array, gradient array) triples."""
        return []

    def spec(self):
        raise NotImplementedError


class Conv(Layer):
    """3x3-style convolution, stride 1, zero same-padding."""

    def __init__(self, kernel, cin, cout, rng=None):
        self.kernel = kernel
        self.cin = cin
        self.cout = cout
        scale = np.sqrt(2.0 / (kernel * kernel * cin))
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, scale, size=(kernel * kernel * cin, cout))
        self.b = np.zeros(cout)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._cols = None
        self._xshape = None

    def forward(self, x):
        if x.ndim != 4 or x.shape[3] != self.cin:
            raise errors.ShapeMismatch(f"conv expects (N,H,W,{self.cin}), got {x.shape}")
        pad = self.kernel // 2
        cols = _im2col(x, self.kernel, self.kernel, pad)
        self._cols = cols
        self._xshape = x.shape
        return cols @ self.w + self.b

    def backward(self, grad):
        if self._cols is None:
            raise errors.NoForwardCache("conv backward before forward")
        n, oh, ow, _ = grad.shape
        cols2 = self._cols.reshape(-1, self.w.shape[0])
        g2 = grad.reshape(-1, self.cout)
        self.dw[...] = cols2.T @ g2
        self.db[...] = g2.sum(axis=0)
        # scatter column gradients back to the input
        gcols = (g2 @ self.w.T).reshape(n, oh, ow, self.kernel, self.kernel, self.cin)
        pad = self.kernel // 2
        h, w = self._xshape[1], self._xshape[2]
        gxp = np.zeros((n, h + 2 * pad, w + 2 * pad, self.cin))
        for i in range(self.kernel):
            for j in range(self.kernel):
                gxp[:, i:i + oh, j:j + ow, :] += gcols[:, :, :, i, j, :]
        return gxp[:, pad:pad + h, pad:pad + w, :]

    def params(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]

    def spec(self):
        return {"type": "conv", "kernel": self.kernel, "cin": self.cin, "cout": self.cout}


class ReLU(Layer):
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, grad):
        if self._mask is None:
            raise errors.NoForwardCache("relu backward before forward")
        return np.where(self._mask, grad, 0.0)

    def spec(self):
        return {"type": "relu"}


class MaxPool(Layer):
    """Non-overlapping 2x2 max pooling; input H, W must be even."""

    def __init__(self):
        self._argmax = None
        self._xshape = None

    def forward(self, x):
        n, h, w, c = x.shape
        if h % 2 or w % 2:
            raise errors.ShapeMismatch(f"maxpool needs even H, W, got {x.shape}")
        v = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4)
        v = v.reshape(n, h // 2, w // 2, c, 4)
        idx = v.argmax(axis=4)
        self._argmax = idx
        self._xshape = x.shape
        return np.take_along_axis(v, idx[..., None], axis=4)[..., 0]

    def backward(self, grad):
        if self._argmax is None:
            raise errors.NoForwardCache("maxpool backward before forward")
        n, h, w, c = self._xshape
        out = np.zeros((n, h // 2, w // 2, c, 4))
        np.put_along_axis(out, self._argmax[..., None], grad[..., None], axis=4)
        # invert the forward transpose (0,1,3,5,2,4)
        out = out.reshape(n, h // 2, w // 2, c, 2, 2)
        return out.transpose(0, 1, 4, 2, 5, 3).reshape(n, h, w, c)

    def spec(self):
        return {"type": "maxpool"}


class Flatten(Layer):
    def __init__(self):
        self._xshape = None

    def forward(self, x):
        self._xshape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        if self._xshape is None:
            raise errors.NoForwardCache("flatten backward before forward")
        return grad.reshape(self._xshape)

    def spec(self):
        return {"type": "flatten"}


class Dense(Layer):
    def __init__(self, nin, nout, rng=None):
        self.nin = nin
        self.nout = nout
        scale = np.sqrt(2.0 / nin)
        rng = rng or np.random.default_rng(0)
        self.w = rng.normal(0.0, scale, size=(nin, nout))
        self.b = np.zeros(nout)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)
        self._x = None

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.nin:
            raise errors.ShapeMismatch(f"dense expects (N,{self.nin}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad):
        if self._x is None:
            raise errors.NoForwardCache("dense backward before forward")
        self.dw[...] = self._x.T @ grad
        self.db[...] = grad.sum(axis=0)
        return grad @ self.w.T

    def params(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]

    def spec(self):
        return {"type": "dense", "nin": self.nin, "nout": self.nout}


def softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class Network:
    """Layer stack ending in raw logits; the head kind names the loss.

    head: "softmax" (binary cross-entropy over 2 classes) or "sigmoid"
    (summed binary cross-entropy over independent outputs).
    """

    def __init__(self, layers, head="softmax"):
        if head not in ("softmax", "sigmoid"):
            raise ValueError(f"unknown head {head!r}")
        self.layers = list(layers)
        self.head = head

    def forward(self, x):
        """Raw logits for a batch."""
        out = np.asarray(x, dtype=np.float64)
        for layer in self.layers:
            out = layer.forward(out)
        return out

    def predict(self, x):
        """Head activation: softmax rows or per-output sigmoids."""
        logits = self.forward(x)
        return softmax(logits) if self.head == "softmax" else sigmoid(logits)

    def backward(self, grad):
        """Backpropagate an upstream logit gradient; returns input gradient."""
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def params(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, value, gradient in layer.params():
                out.append((f"{i}.{name}", value, gradient))
        return out

    def loss_and_grad(self, x, y):
        """Mean loss over the batch and the logit gradient."""
        logits = self.forward(x)
        n = logits.shape[0]
        y = np.asarray(y, dtype=np.float64)
        if self.head == "softmax":
            p = softmax(logits)
            eps = 1e-12
            loss = -np.mean(np.sum(y * np.log(p + eps), axis=1))
            grad = (p - y) / n
        else:
            p = sigmoid(logits)
            eps = 1e-12
            loss = -np.mean(np.sum(y * np.log(p + eps)
                                   + (1.0 - y) * np.log(1.0 - p + eps), axis=1))
            grad = (p - y) / n
        return loss, grad

    def input_gradient(self, x, y):
        """Gradient of the mean loss with respect to the input batch."""
        _, grad = self.loss_and_grad(x, y)
        return self.backward(grad)


def build_network(input_size=64, channels=1, conv_channels=(8, 8, 8),
                  fc_width=128, head="softmax", n_out=None, seed=0) -> Network:
    """Desk-scale default architecture."""
    rng = np.random.default_rng(seed)
    layers = []
    cin = channels
    size = input_size
    for cout in conv_channels:
        layers.append(Conv(3, cin, cout, rng=rng))
        layers.append(ReLU())
        layers.append(MaxPool())
        cin = cout
        size //= 2
    layers.append(Flatten())
    layers.append(Dense(size * size * cin, fc_width, rng=rng))
    layers.append(ReLU())
    if n_out is None:
        n_out = 2 if head == "softmax" else 4
    layers.append(Dense(fc_width, n_out, rng=rng))
    return Network(layers, head=head)


def train(net: Network, x, y, lr=0.01, momentum=0.9, epochs=10, batch=32,
          seed=0, param_lrs=None):
    """SGD with momentum; returns the per-epoch mean loss curve.

    param_lrs optionally maps parameter names (as in net.params()) to
    per-parameter learning-rate multipliers; unlisted parameters use 1.0.
    To freeze a parameter set its multiplier to 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise errors.EmptyDataset("no training samples")
    rng = np.random.default_rng(seed)
    params = net.params()
    velocity = {name: np.zeros_like(value) for name, value, _ in params}
    curve = []
    for _ in range(epochs):
        order = rng.permutation(len(x))
        losses = []
        for start in range(0, len(x), batch):
            idx = order[start:start + batch]
            loss, grad = net.loss_and_grad(x[idx], y[idx])
            net.backward(grad)
            for name, value, gradient in params:
                mult = 1.0 if param_lrs is None else param_lrs.get(name, 1.0)
                if mult == 0.0:
                    continue
                v = velocity[name]
                v *= momentum
                v -= lr * mult * gradient
                value += v
            losses.append(loss)
        curve.append(float(np.mean(losses)))
    return curve


def retrain_head(net: Network, x, y, lr_last=0.01, lr_second_last=None,
                 momentum=0.9, epochs=10, batch=32, seed=0):
    """Swap the multilabel head for a fresh binary softmax head and train it.

    Only the new head trains at lr_last and the second-last fully connected
    layer at lr_second_last (default lr_last / 10); every other parameter
    stays bit-exact.
    """
    dense_idx = [i for i, l in enumerate(net.layers) if isinstance(l, Dense)]
    if len(dense_idx) < 2:
        raise errors.TooFewFCLayers("need at least two fully connected layers")
    if lr_second_last is None:
        lr_second_last = lr_last / 10.0
    last = dense_idx[-1]
    second = dense_idx[-2]
    fresh = Dense(net.layers[last].nin, 2, rng=np.random.default_rng(seed))
    layers = list(net.layers)
    layers[last] = fresh
    binary = Network(layers, head="softmax")
    param_lrs = {name: 0.0 for name, _, _ in binary.params()}
    for pname in ("w", "b"):
        param_lrs[f"{last}.{pname}"] = 1.0
        param_lrs[f"{second}.{pname}"] = lr_second_last / lr_last
    curve = train(binary, x, y, lr=lr_last, momentum=momentum, epochs=epochs,
                  batch=batch, seed=seed, param_lrs=param_lrs)
    return binary, curve


def evaluate(net: Network, x, y, thresholds=None):
    """TPR/TNR/EER report; positives are genuine images.

    y is one-hot with column 1 = genuine. The score is the softmax
    probability of the genuine class; a sample is called genuine when its
    score >= threshold.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) == 0:
        raise errors.EmptyDataset("no evaluation samples")
    scores = net.predict(x)[:, 1]
    genuine = y[:, 1] > 0.5
    return evaluate_scores(scores, genuine, thresholds)


def evaluate_scores(scores, genuine, thresholds=None):
    """Threshold sweep over precomputed genuine-class scores."""
    scores = np.asarray(scores, dtype=np.float64)
    genuine = np.asarray(genuine, dtype=bool)
    if len(scores) == 0:
        raise errors.EmptyDataset("no scores")
    if thresholds is None:
        thresholds = np.unique(np.concatenate([[0.0], np.sort(scores), [1.0 + 1e-12]]))
    curve = []
    for t in thresholds:
        called_genuine = scores >= t
        tpr = called_genuine[genuine].mean() if genuine.any() else 1.0
        tnr = (~called_genuine[~genuine]).mean() if (~genuine).any() else 1.0
        curve.append((float(t), float(tpr), float(tnr)))

    # EER: where false positive rate (1-tnr) crosses false negative (1-tpr)
    eer = None
    prev = None
    for t, tpr, tnr in curve:
        fpr, fnr = 1.0 - tnr, 1.0 - tpr
        if prev is not None:
            pf, pn = prev[1], prev[2]
            if (pf - pn) == 0.0:
                eer = pf
                break
            if (pf - pn) * (fpr - fnr) <= 0.0:
                # linear interpolation between the sweep points
                d0 = pf - pn
                d1 = fpr - fnr
                w = d0 / (d0 - d1) if d0 != d1 else 0.0
                eer = pf + w * (fpr - pf)
                break
        prev = (t, fpr, fnr)
    if eer is None:
        _, fpr, fnr = prev if prev else (0, 0.5, 0.5)
        eer = 0.5 * (fpr + fnr)
    mid = evaluate_point(scores, genuine, 0.5)
    return {"tpr": mid[0], "tnr": mid[1], "eer": float(eer), "curve": curve}


def evaluate_point(scores, genuine, threshold):
    called = np.asarray(scores) >= threshold
    genuine = np.asarray(genuine, dtype=bool)
    tpr = float(called[genuine].mean()) if genuine.any() else 1.0
    tnr = float((~called[~genuine]).mean()) if (~genuine).any() else 1.0
    return tpr, tnr


MAGIC = b"MFNET001"


def save_network(net: Network, path):
    """Versioned binary container: JSON layer specs + little-endian float64."""
    spec = {"head": net.head, "layers": [l.spec() for l in net.layers]}
    blob = json.dumps(spec, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, value, _ in net.params():
            data = np.ascontiguousarray(value, dtype="<f8").tobytes()
            f.write(struct.pack("<Q", len(data)))
            f.write(data)


def load_network(path) -> Network:
    try:
        with open(path, "rb") as f:
            raw = f.read()
    except FileNotFoundError as exc:
        raise errors.MissingFile(str(path)) from exc
    buf = io.BytesIO(raw)
    if buf.read(8) != MAGIC:
        raise errors.CorruptData(f"{path}: not a morphforge network file")
    (blen,) = struct.unpack("<I", buf.read(4))
    spec = json.loads(buf.read(blen).decode("utf-8"))
    layers = []
    for lspec in spec["layers"]:
        t = lspec["type"]
        if t == "conv":
            layers.append(Conv(lspec["kernel"], lspec["cin"], lspec["cout"]))
        elif t == "relu":
            layers.append(ReLU())
        elif t == "maxpool":
            layers.append(MaxPool())
        elif t == "flatten":
            layers.append(Flatten())
        elif t == "dense":
            layers.append(Dense(lspec["nin"], lspec["nout"]))
        else:
            raise errors.CorruptData(f"{path}: unknown layer type {t!r}")
    net = Network(layers, head=spec["head"])
    for _, value, _ in net.params():
        (n,) = struct.unpack("<Q", buf.read(8))
        data = buf.read(n)
        if len(data) != n:
            raise errors.CorruptData(f"{path}: truncated parameter block")
        value[...] = np.frombuffer(data, dtype="<f8").reshape(value.shape)
    return net
