"""Local implicit purifier: residual conv encoder + coordinate-conditioned MLP.

The encoder maps an image to a per-pixel feature map. To render an output
pixel, the MLP receives the s x s feature neighbourhood of the nearest input
pixel, the offset from that pixel's centre, and the output pixel's size, and
predicts an RGB value. Because queries are continuous coordinates, the
output grid does not have to match the input grid.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .nn import ParamModel, kaiming_uniform, zeros_param
from .tensor import Tensor, clamp, concat, conv2d, linear, no_grad, relu, reshape, take, transpose, unfold


# bound = 1/sqrt(fan_in); larger ReLU-gain init makes Adam at lr 1e-4 jitter the output
INIT_SLOPE = float(np.sqrt(5.0))


@dataclass
class DiscoConfig:
    blocks: int = 15
    channels: int = 64
    kernel: int = 3
    mlp_hidden: tuple[int, ...] = (256, 256, 256, 256)
    in_channels: int = 3
    residual: bool = False  # add the nearest input pixel to the MLP output

    def __post_init__(self):
        self.mlp_hidden = tuple(int(h) for h in self.mlp_hidden)
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ValueError("kernel size s must be odd")
        if self.blocks < 0 or self.channels < 1:
            raise ValueError("need blocks >= 0 and channels >= 1")

    @property
    def mlp_in(self) -> int:
        return self.kernel**2 * self.channels + 4

    @classmethod
    def from_dict(cls, d: dict) -> "DiscoConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class QueryPoint:
    coord: tuple[float, float]  # (y, x) in [-1, 1]
    cell: tuple[float, float]  # (2 / H_out, 2 / W_out)


class DiscoModel(ParamModel):
    architecture = "disco"

    def __init__(self, config: DiscoConfig | None = None, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.config = cfg = config or DiscoConfig()
        rng = np.random.default_rng(seed)
        c, cin = cfg.channels, cfg.in_channels
        self.params["head.weight"] = kaiming_uniform((c, cin, 3, 3), cin * 9, rng, dtype, INIT_SLOPE)
        self.params["head.bias"] = zeros_param((c,), dtype)
        for b in range(cfg.blocks):
            for j in (1, 2):
                self.params[f"blocks.{b}.conv{j}.weight"] = kaiming_uniform((c, c, 3, 3), c * 9, rng, dtype, INIT_SLOPE)
                self.params[f"blocks.{b}.conv{j}.bias"] = zeros_param((c,), dtype)
        widths = [cfg.mlp_in, *cfg.mlp_hidden, 3]
        for i, (din, dout) in enumerate(zip(widths[:-1], widths[1:])):
            self.params[f"mlp.{i}.weight"] = kaiming_uniform((dout, din), din, rng, dtype, INIT_SLOPE)
            self.params[f"mlp.{i}.bias"] = zeros_param((dout,), dtype)
        self.n_mlp = len(widths) - 1

    def __call__(self, x, out_h=None, out_w=None):
        return disco_forward(self, x, out_h, out_w)


def param_count(model: DiscoModel) -> int:
    return model.param_count()


def closed_form_param_count(cfg: DiscoConfig) -> int:
    c = cfg.channels
    head = cfg.in_channels * c * 9 + c
    block = 2 * (c * c * 9 + c)
    widths = [cfg.mlp_in, *cfg.mlp_hidden, 3]
    mlp = sum(a * b + b for a, b in zip(widths[:-1], widths[1:]))
    return head + cfg.blocks * block + mlp


# -- coordinates --------------------------------------------------------------
def normalize_coord(index, size: int):
    """Centre of pixel ``index`` on a ``size``-pixel axis spanning [-1, 1]."""
    idx = np.asarray(index)
    if np.any(idx < 0) or np.any(idx >= size):
        raise IndexError(f"pixel index out of range for size {size}")
    out = -1.0 + (2.0 * idx + 1.0) / size
    return float(out) if np.ndim(out) == 0 else out


def nearest_latent(coord, size: int):
    """Index of the input pixel whose cell contains ``coord`` (clamped at the edges)."""
    c = np.asarray(coord, dtype=np.float64)
    idx = np.clip(np.floor((c + 1.0) / 2.0 * size), 0, size - 1).astype(np.int64)
    return int(idx) if idx.ndim == 0 else idx


def grid_coords(out_h: int, out_w: int) -> np.ndarray:
    """(out_h * out_w, 2) pixel-centre coordinates, row-major."""
    ys = normalize_coord(np.arange(out_h), out_h)
    xs = normalize_coord(np.arange(out_w), out_w)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return np.stack([yy.ravel(), xx.ravel()], axis=1)


# -- network pieces -----------------------------------------------------------
def encode(model: DiscoModel, image) -> Tensor:
    """Feature map with the input's spatial size: (3,H,W)->(C,H,W) or batched."""
    x = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=model.dtype))
    if x.ndim not in (3, 4) or x.shape[-3] != model.config.in_channels:
        raise ValueError(f"encode expects {model.config.in_channels} input channels, got shape {x.shape}")
    p = model.params
    f = conv2d(x, p["head.weight"], p["head.bias"], padding=1)
    for b in range(model.config.blocks):
        h = relu(conv2d(f, p[f"blocks.{b}.conv1.weight"], p[f"blocks.{b}.conv1.bias"], padding=1))
        f = f + conv2d(h, p[f"blocks.{b}.conv2.weight"], p[f"blocks.{b}.conv2.bias"], padding=1)
    return f


def unfold_features(f: Tensor, s: int) -> Tensor:
    """(C,H,W) -> (s*s*C,H,W) neighbourhood stack; batched input also accepted."""
    if s % 2 == 0:
        raise ValueError("unfold kernel must be odd")
    if f.ndim == 3:
        return reshape(unfold(reshape(f, (1, *f.shape)), s), (f.shape[0] * s * s, *f.shape[1:]))
    return unfold(f, s)


def _mlp(model: DiscoModel, x: Tensor) -> Tensor:
    p = model.params
    for i in range(model.n_mlp):
        x = linear(x, p[f"mlp.{i}.weight"], p[f"mlp.{i}.bias"])
        if i < model.n_mlp - 1:
            x = relu(x)
    return x


def _query_unfolded(model: DiscoModel, uf: Tensor, coords: np.ndarray, cells: np.ndarray, image: Tensor | None = None) -> Tensor:
    """Raw RGB (N, Q, 3) from unfolded features (N, D, H, W).

    ``image`` (N, 3, H, W) is needed only for residual models.
    """
    n, d, h, w = uf.shape
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    cells = np.broadcast_to(np.asarray(cells, dtype=np.float64), coords.shape)
    if np.any(np.abs(coords) > 1.0):
        raise ValueError("query coordinates must lie in [-1, 1]")
    iy = nearest_latent(coords[:, 0], h)
    ix = nearest_latent(coords[:, 1], w)
    flat_idx = iy * w + ix
    feats = reshape(uf, (n, d, h * w))
    if not (len(flat_idx) == h * w and np.array_equal(flat_idx, np.arange(h * w))):
        feats = take(feats, flat_idx, axis=2)
    feats = transpose(feats, (0, 2, 1))
    half = np.array([h / 2.0, w / 2.0])
    rel = (coords - np.stack([normalize_coord(iy, h), normalize_coord(ix, w)], axis=1)) * half
    extra = np.concatenate([rel, cells * half], axis=1).astype(uf.dtype)
    extra = Tensor(np.broadcast_to(extra, (n, len(coords), 4)).copy())
    rgb = _mlp(model, concat([feats, extra], axis=-1))
    if model.config.residual:
        if image is None:
            raise ValueError("residual model needs the input image to answer queries")
        base = take(reshape(image, (n, image.shape[1], h * w)), flat_idx, axis=2)
        rgb = rgb + transpose(base, (0, 2, 1))
    return rgb


def query_rgb(model: DiscoModel, f: Tensor, queries, image=None) -> Tensor:
    """Raw (unclamped) RGB for each query against one feature map (C, H, W).

    ``queries`` is a list of :class:`QueryPoint` or a pair of arrays
    ``(coords, cells)`` with shape (Q, 2) each. Residual models also need the
    (3, H, W) image the features came from.
    """
    if isinstance(queries, tuple) and len(queries) == 2 and not isinstance(queries[0], QueryPoint):
        coords, cells = queries
    else:
        coords = np.array([q.coord for q in queries], dtype=np.float64)
        cells = np.array([q.cell for q in queries], dtype=np.float64)
    uf = unfold_features(reshape(f, (1, *f.shape)), model.config.kernel)
    if image is not None:
        image = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=model.dtype))
        image = reshape(image, (1, *image.shape))
    out = _query_unfolded(model, uf, coords, cells, image)
    return reshape(out, out.shape[1:])


def disco_forward(model: DiscoModel, image, out_h: int | None = None, out_w: int | None = None, clamp_output: bool = True) -> Tensor:
    """Purified image on an ``out_h`` x ``out_w`` grid (defaults to the input size).

    The feature map is computed once and every output pixel centre is
    queried with cell = (2/out_h, 2/out_w). ``clamp_output=False`` returns
    the raw MLP values, which training uses.
    """
    x = image if isinstance(image, Tensor) else Tensor(np.asarray(image, dtype=model.dtype))
    unbatched = x.ndim == 3
    if unbatched:
        x = reshape(x, (1, *x.shape))
    n, _, h, w = x.shape
    out_h = h if out_h is None else int(out_h)
    out_w = w if out_w is None else int(out_w)
    if out_h < 1 or out_w < 1:
        raise ValueError("output size must be positive")
    uf = unfold_features(encode(model, x), model.config.kernel)
    coords = grid_coords(out_h, out_w)
    rgb = _query_unfolded(model, uf, coords, np.array([2.0 / out_h, 2.0 / out_w]), x)
    out = transpose(reshape(rgb, (n, out_h, out_w, 3)), (0, 3, 1, 2))
    if clamp_output:
        out = clamp(out, 0.0, 1.0)
    return reshape(out, out.shape[1:]) if unbatched else out


def purify(model: DiscoModel, x, out_size=None) -> np.ndarray:
    """Gradient-free ``disco_forward`` on arrays."""
    oh, ow = (None, None) if out_size is None else out_size
    with no_grad():
        return disco_forward(model, x, oh, ow).data


def cascade(model: DiscoModel, x, k: int, out_size=None) -> np.ndarray:
    """Apply the purifier ``k`` times, feeding each output to the next stage."""
    if k < 1:
        raise ValueError("cascade depth must be >= 1")
    out = np.asarray(x, dtype=model.dtype)
    for _ in range(k):
        out = purify(model, out, out_size)
    return out
