"""Brute-force reference implementations used to check the vectorised code."""

import numpy as np


def conv2d_loops(x, w, b, stride=1, padding=0):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    xp = np.zeros((n, cin, h + 2 * padding, wd + 2 * padding), dtype=x.dtype)
    xp[:, :, padding : padding + h, padding : padding + wd] = x
    ho = (h + 2 * padding - k) // stride + 1
    wo = (wd + 2 * padding - k) // stride + 1
    out = np.zeros((n, cout, ho, wo), dtype=x.dtype)
    for i in range(n):
        for o in range(cout):
            for y in range(ho):
                for z in range(wo):
                    acc = b[o]
                    for c in range(cin):
                        for di in range(k):
                            for dj in range(k):
                                acc += xp[i, c, y * stride + di, z * stride + dj] * w[o, c, di, dj]
                    out[i, o, y, z] = acc
    return out


def unfold_loops(f, s):
    c, h, w = f.shape
    r = s // 2
    out = np.zeros((c * s * s, h, w), dtype=f.dtype)
    for ch in range(c):
        for di in range(s):
            for dj in range(s):
                for y in range(h):
                    for x in range(w):
                        yy, xx = y + di - r, x + dj - r
                        if 0 <= yy < h and 0 <= xx < w:
                            out[ch * s * s + di * s + dj, y, x] = f[ch, yy, xx]
    return out


def linear_loops(x, w, b):
    out = np.zeros((x.shape[0], w.shape[0]))
    for i in range(x.shape[0]):
        for o in range(w.shape[0]):
            out[i, o] = b[o] + sum(x[i, j] * w[o, j] for j in range(x.shape[1]))
    return out


def l1_flat(a, b):
    total = 0.0
    for u, v in zip(np.ravel(a), np.ravel(b)):
        total += abs(float(u) - float(v))
    return total / np.size(a)


def cross_entropy_direct(logits, labels):
    total = 0.0
    for row, y in zip(logits, labels):
        total += -np.log(np.exp(row[y]) / np.sum(np.exp(row)))
    return total / len(labels)


def adam_scalar(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8):
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        theta = theta - lr * mh / (np.sqrt(vh) + eps)
    return theta


def mlp_apply(model, x):
    """Run the purifier MLP on a single input vector with plain numpy."""
    h = np.asarray(x, dtype=np.float64)
    for i in range(model.n_mlp):
        w = model.params[f"mlp.{i}.weight"].data
        b = model.params[f"mlp.{i}.bias"].data
        h = w @ h + b
        if i < model.n_mlp - 1:
            h = np.maximum(h, 0)
    return h
