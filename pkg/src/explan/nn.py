"""Minimal neural-network stack on numpy.

Sequential networks described by LayerSpec lists, with hand-written forward
and backward passes (dense, valid-padding conv2d via im2col, max pooling,
inverted dropout, relu/tanh/identity/softplus), Adam, the Gaussian
reparametrization trick, closed-form KL against a standard normal, and a
versioned binary weight format.  Training runs in float32; float64 flows
through unchanged so gradient checks can run at higher precision.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity", "softplus")
LAYER_KINDS = ("dense", "conv2d", "maxpool2d", "dropout", "activation")


class ShapeError(ValueError):
    """Input/parameter shape mismatch, reported with the layer index."""


class WeightsFormatError(ValueError):
    """Raised for corrupt or incompatible weight files."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int = 0
    out_dim: int = 0
    in_ch: int = 0
    out_ch: int = 0
    kernel: int = 0
    stride: int = 1
    window: int = 0
    rate: float = 0.0
    activation: str = "identity"

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind: {self.kind!r}")
        if self.kind == "dense" and (self.in_dim <= 0 or self.out_dim <= 0):
            raise ValueError("dense layer needs positive in_dim/out_dim")
        if self.kind == "conv2d" and (
            self.in_ch <= 0 or self.out_ch <= 0 or self.kernel <= 0 or self.stride <= 0
        ):
            raise ValueError("conv2d layer needs positive in_ch/out_ch/kernel/stride")
        if self.kind == "maxpool2d" and self.window <= 0:
            raise ValueError("maxpool2d layer needs a positive window")
        if self.kind == "dropout" and not (0.0 <= self.rate < 1.0):
            raise ValueError("dropout rate must be in [0, 1)")
        if self.kind == "activation" and self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation: {self.activation!r}")


def dense(in_dim: int, out_dim: int) -> LayerSpec:
    return LayerSpec("dense", in_dim=in_dim, out_dim=out_dim)


def conv2d(in_ch: int, out_ch: int, kernel: int, stride: int = 1) -> LayerSpec:
    return LayerSpec("conv2d", in_ch=in_ch, out_ch=out_ch, kernel=kernel, stride=stride)


def maxpool2d(window: int) -> LayerSpec:
    return LayerSpec("maxpool2d", window=window)


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("dropout", rate=rate)


def activation(name: str) -> LayerSpec:
    return LayerSpec("activation", activation=name)


def mlp(dims, hidden_activation="relu", dropout_rate=0.0):
    """Dense stack with activations (and optional dropout) between layers."""
    specs = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        specs.append(dense(a, b))
        if i < len(dims) - 2:
            specs.append(activation(hidden_activation))
            if dropout_rate > 0.0:
                specs.append(dropout(dropout_rate))
    return specs


def init_params(specs, rng: np.random.Generator, dtype=np.float32):
    """He-normal weights, zero biases; empty dicts for stateless layers."""
    params = []
    for spec in specs:
        if spec.kind == "dense":
            std = np.sqrt(2.0 / spec.in_dim)
            params.append(
                {
                    "W": (rng.standard_normal((spec.in_dim, spec.out_dim)) * std).astype(dtype),
                    "b": np.zeros(spec.out_dim, dtype=dtype),
                }
            )
        elif spec.kind == "conv2d":
            fan_in = spec.in_ch * spec.kernel * spec.kernel
            std = np.sqrt(2.0 / fan_in)
            params.append(
                {
                    "W": (
                        rng.standard_normal((spec.out_ch, spec.in_ch, spec.kernel, spec.kernel))
                        * std
                    ).astype(dtype),
                    "b": np.zeros(spec.out_ch, dtype=dtype),
                }
            )
        else:
            params.append({})
    return params


def _im2col(x, kernel, stride):
    b, c, h, w = x.shape
    oh = (h - kernel) // stride + 1
    ow = (w - kernel) // stride + 1
    s0, s1, s2, s3 = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x,
        shape=(b, c, oh, ow, kernel, kernel),
        strides=(s0, s1, s2 * stride, s3 * stride, s2, s3),
        writeable=False,
    )
    return windows.reshape(b, c, oh * ow, kernel * kernel), oh, ow


def _layer_forward(i, spec, p, x, train_mode, rng):
    if spec.kind == "dense":
        orig_shape = x.shape
        if x.ndim > 2:
            x = x.reshape(x.shape[0], -1)
        if x.ndim != 2 or x.shape[1] != spec.in_dim:
            raise ShapeError(
                f"layer {i} (dense): expected input dim {spec.in_dim}, got {x.shape}"
            )
        out = x @ p["W"] + p["b"]
        return out, {"x": x, "orig_shape": orig_shape}
    if spec.kind == "conv2d":
        if x.ndim != 4 or x.shape[1] != spec.in_ch:
            raise ShapeError(
                f"layer {i} (conv2d): expected (B, {spec.in_ch}, H, W), got {x.shape}"
            )
        if x.shape[2] < spec.kernel or x.shape[3] < spec.kernel:
            raise ShapeError(f"layer {i} (conv2d): input smaller than kernel")
        cols, oh, ow = _im2col(x, spec.kernel, spec.stride)
        b = x.shape[0]
        # (B, C, P, K2) -> (B, P, C*K2)
        flat = cols.transpose(0, 2, 1, 3).reshape(b, oh * ow, -1)
        wmat = p["W"].reshape(spec.out_ch, -1)
        out = flat @ wmat.T + p["b"]
        out = out.transpose(0, 2, 1).reshape(b, spec.out_ch, oh, ow)
        return out, {"flat": flat, "x_shape": x.shape, "oh": oh, "ow": ow}
    if spec.kind == "maxpool2d":
        if x.ndim != 4:
            raise ShapeError(f"layer {i} (maxpool2d): expected 4D input, got {x.shape}")
        wdw = spec.window
        b, c, h, w = x.shape
        hh, ww = h // wdw, w // wdw
        if hh == 0 or ww == 0:
            raise ShapeError(f"layer {i} (maxpool2d): input smaller than window")
        cropped = x[:, :, : hh * wdw, : ww * wdw]
        tiles = cropped.reshape(b, c, hh, wdw, ww, wdw).transpose(0, 1, 2, 4, 3, 5)
        tiles = tiles.reshape(b, c, hh, ww, wdw * wdw)
        idx = np.argmax(tiles, axis=-1)
        out = np.take_along_axis(tiles, idx[..., None], axis=-1)[..., 0]
        return out, {"idx": idx, "x_shape": x.shape}
    if spec.kind == "dropout":
        if train_mode and spec.rate > 0.0:
            if rng is None:
                raise ValueError("dropout in train mode needs an rng")
            mask = (rng.random(x.shape) >= spec.rate).astype(x.dtype)
            scale = x.dtype.type(1.0 / (1.0 - spec.rate))
            return x * mask * scale, {"mask": mask, "scale": scale}
        return x, {"mask": None}
    # activation
    if spec.activation == "relu":
        out = np.maximum(x, 0)
        return out, {"x": x}
    if spec.activation == "tanh":
        out = np.tanh(x)
        return out, {"out": out}
    if spec.activation == "softplus":
        out = np.logaddexp(x.dtype.type(0), x)
        return out, {"x": x}
    return x, {}


def forward(specs, params, x, train_mode: bool = False, rng=None):
    """Run the network; returns (output, caches) with one cache per layer.

    Eval mode is a pure function of (params, input); train mode draws
    dropout masks from rng and scales survivors by 1/(1-rate).
    """
    if len(specs) != len(params):
        raise ValueError("specs and params length mismatch")
    dtype = None
    for p in params:
        if p:
            dtype = p["W"].dtype
            break
    if dtype is None:
        dtype = x.dtype if np.issubdtype(np.asarray(x).dtype, np.floating) else np.float32
    x = np.asarray(x, dtype=dtype)
    caches = []
    for i, (spec, p) in enumerate(zip(specs, params)):
        x, cache = _layer_forward(i, spec, p, x, train_mode, rng)
        caches.append(cache)
    return x, caches


def backward(specs, params, caches, dout):
    """Analytic gradients through the whole stack.

    Returns (grads, dinput): grads mirrors params layer by layer; dropout
    masks cached in forward are reused.
    """
    if len(caches) != len(specs):
        raise ValueError("cache does not match network (run forward first)")
    grads = [dict() for _ in specs]
    for i in range(len(specs) - 1, -1, -1):
        spec, p, cache = specs[i], params[i], caches[i]
        if spec.kind == "dense":
            x = cache["x"]
            grads[i]["W"] = x.T @ dout
            grads[i]["b"] = dout.sum(axis=0)
            dout = dout @ p["W"].T
            if len(cache["orig_shape"]) > 2:
                dout = dout.reshape(cache["orig_shape"])
        elif spec.kind == "conv2d":
            flat = cache["flat"]
            b, _, oh, ow = dout.shape
            dflat = dout.reshape(b, spec.out_ch, oh * ow).transpose(0, 2, 1)
            wmat = p["W"].reshape(spec.out_ch, -1)
            grads[i]["W"] = np.einsum("bpo,bpk->ok", dflat, flat).reshape(p["W"].shape)
            grads[i]["b"] = dflat.sum(axis=(0, 1))
            dcols = dflat @ wmat  # (B, P, C*K2)
            dout = _col2im(dcols, cache["x_shape"], spec.kernel, spec.stride, oh, ow)
        elif spec.kind == "maxpool2d":
            idx = cache["idx"]
            bsz, c, h, w = cache["x_shape"]
            wdw = spec.window
            hh, ww = idx.shape[2], idx.shape[3]
            dtiles = np.zeros((bsz, c, hh, ww, wdw * wdw), dtype=dout.dtype)
            np.put_along_axis(dtiles, idx[..., None], dout[..., None], axis=-1)
            dcrop = dtiles.reshape(bsz, c, hh, ww, wdw, wdw).transpose(0, 1, 2, 4, 3, 5)
            dcrop = dcrop.reshape(bsz, c, hh * wdw, ww * wdw)
            dx = np.zeros(cache["x_shape"], dtype=dout.dtype)
            dx[:, :, : hh * wdw, : ww * wdw] = dcrop
            dout = dx
        elif spec.kind == "dropout":
            if cache["mask"] is not None:
                dout = dout * cache["mask"] * cache["scale"]
        else:  # activation
            if spec.activation == "relu":
                dout = dout * (cache["x"] > 0)
            elif spec.activation == "tanh":
                dout = dout * (1.0 - cache["out"] ** 2)
            elif spec.activation == "softplus":
                x = cache["x"]
                dout = dout / (1.0 + np.exp(-x))
    return grads, dout


def _col2im(dcols, x_shape, kernel, stride, oh, ow):
    b, c, h, w = x_shape
    dx = np.zeros(x_shape, dtype=dcols.dtype)
    dcols = dcols.reshape(b, oh, ow, c, kernel, kernel)
    for ki in range(kernel):
        for kj in range(kernel):
            dx[:, :, ki : ki + oh * stride : stride, kj : kj + ow * stride : stride] += (
                dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
            )
    return dx


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_adam(params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999) -> AdamState:
    state = AdamState(lr=lr, beta1=beta1, beta2=beta2)
    state.m = [{k: np.zeros_like(a) for k, a in p.items()} for p in params]
    state.v = [{k: np.zeros_like(a) for k, a in p.items()} for p in params]
    return state


def adam_step(params, grads, state: AdamState) -> AdamState:
    """In-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        for key, arr in p.items():
            gk = g[key]
            if gk.shape != arr.shape:
                raise ShapeError(f"gradient shape {gk.shape} != param shape {arr.shape}")
            mk = m[key]
            vk = v[key]
            mk *= b1
            mk += (1.0 - b1) * gk
            vk *= b2
            vk += (1.0 - b2) * gk * gk
            mhat = mk / bc1
            vhat = vk / bc2
            arr -= (state.lr * mhat / (np.sqrt(vhat) + state.eps)).astype(arr.dtype)
    return state


LOGVAR_CLAMP = 10.0


@dataclass
class GaussianHead:
    mu: np.ndarray
    logvar: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu)
        self.logvar = np.clip(np.asarray(self.logvar), -LOGVAR_CLAMP, LOGVAR_CLAMP)
        if self.mu.shape != self.logvar.shape:
            raise ShapeError("mu and logvar must have the same shape")


def reparam_sample(head: GaussianHead, rng: np.random.Generator):
    """z = mu + exp(logvar/2) * eps with eps ~ N(0, I).

    Returns (z, eps); keeping eps lets training backpropagate through mu
    (dz/dmu = 1) and logvar (dz/dlogvar = z_sigma * eps / 2).
    """
    eps = rng.standard_normal(head.mu.shape).astype(head.mu.dtype, copy=False)
    z = head.mu + np.exp(head.logvar / 2.0) * eps
    return z, eps


def kl_standard_normal(head: GaussianHead) -> float:
    """KL(N(mu, diag exp(logvar)) || N(0, I)), summed over dimensions."""
    mu = np.asarray(head.mu, dtype=np.float64)
    lv = np.asarray(head.logvar, dtype=np.float64)
    return float(0.5 * np.sum(mu * mu + np.exp(lv) - 1.0 - lv))


# ---------------------------------------------------------------------------
# weight files

_W_MAGIC = b"EXPN"
_W_VERSION = 1
_KIND_TAG = {k: i + 1 for i, k in enumerate(LAYER_KINDS)}
_TAG_KIND = {v: k for k, v in _KIND_TAG.items()}
_ACT_TAG = {a: i + 1 for i, a in enumerate(ACTIVATIONS)}
_TAG_ACT = {v: k for k, v in _ACT_TAG.items()}


def _pack_spec(spec: LayerSpec) -> bytes:
    return struct.pack(
        "<BiiiiiiidB",
        _KIND_TAG[spec.kind],
        spec.in_dim,
        spec.out_dim,
        spec.in_ch,
        spec.out_ch,
        spec.kernel,
        spec.stride,
        spec.window,
        spec.rate,
        _ACT_TAG[spec.activation],
    )


_SPEC_STRUCT = struct.Struct("<BiiiiiiidB")


def _unpack_spec(raw: bytes) -> LayerSpec:
    tag, in_dim, out_dim, in_ch, out_ch, kernel, stride, window, rate, act = (
        _SPEC_STRUCT.unpack(raw)
    )
    if tag not in _TAG_KIND:
        raise WeightsFormatError(f"unknown layer kind tag {tag}")
    if act not in _TAG_ACT:
        raise WeightsFormatError(f"unknown activation tag {act}")
    return LayerSpec(
        kind=_TAG_KIND[tag],
        in_dim=in_dim,
        out_dim=out_dim,
        in_ch=in_ch,
        out_ch=out_ch,
        kernel=kernel,
        stride=stride,
        window=window,
        rate=rate,
        activation=_TAG_ACT[act],
    )


def save_weights(path, model_kind: str, groups: dict, metadata: dict | None = None) -> None:
    """Write named network groups to a versioned binary file.

    groups maps a name to (specs, params).  A JSON metadata block rides
    along for model hyperparameters; a crc32 of the whole payload trails
    the file.
    """
    blob = bytearray()
    blob += struct.pack("<4sB", _W_MAGIC, _W_VERSION)
    kind_b = model_kind.encode()
    blob += struct.pack("<H", len(kind_b)) + kind_b
    meta_b = json.dumps(metadata or {}, sort_keys=True).encode()
    blob += struct.pack("<I", len(meta_b)) + meta_b
    blob += struct.pack("<H", len(groups))
    for name, (specs, params) in groups.items():
        name_b = name.encode()
        blob += struct.pack("<H", len(name_b)) + name_b
        blob += struct.pack("<H", len(specs))
        for spec, p in zip(specs, params):
            blob += _pack_spec(spec)
            keys = sorted(p.keys())
            blob += struct.pack("<B", len(keys))
            for key in keys:
                key_b = key.encode()
                arr = np.ascontiguousarray(p[key], dtype=np.float32)
                blob += struct.pack("<B", len(key_b)) + key_b
                blob += struct.pack("<B", arr.ndim)
                blob += struct.pack(f"<{arr.ndim}i", *arr.shape)
                blob += arr.tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise WeightsFormatError("truncated weight file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_weights(path):
    """Read a weight file; returns (model_kind, groups, metadata)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 9:
        raise WeightsFormatError("truncated weight file")
    stored = struct.unpack("<I", data[-4:])[0]
    actual = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored != actual:
        raise WeightsFormatError("weight file checksum mismatch")
    rd = _Reader(data[:-4])
    magic, version = rd.unpack("<4sB")
    if magic != _W_MAGIC:
        raise WeightsFormatError("not a weight file (bad magic)")
    if version != _W_VERSION:
        raise WeightsFormatError(
            f"unsupported weight file version: expected {_W_VERSION}, found {version}"
        )
    (kind_len,) = rd.unpack("<H")
    model_kind = rd.take(kind_len).decode()
    (meta_len,) = rd.unpack("<I")
    metadata = json.loads(rd.take(meta_len).decode())
    (n_groups,) = rd.unpack("<H")
    groups = {}
    for _ in range(n_groups):
        (name_len,) = rd.unpack("<H")
        name = rd.take(name_len).decode()
        (n_layers,) = rd.unpack("<H")
        specs = []
        params = []
        for _ in range(n_layers):
            spec = _unpack_spec(rd.take(_SPEC_STRUCT.size))
            specs.append(spec)
            (n_keys,) = rd.unpack("<B")
            p = {}
            for _ in range(n_keys):
                (key_len,) = rd.unpack("<B")
                key = rd.take(key_len).decode()
                (ndim,) = rd.unpack("<B")
                shape = rd.unpack(f"<{ndim}i")
                count = int(np.prod(shape)) if ndim else 1
                arr = np.frombuffer(rd.take(4 * count), dtype="<f4").reshape(shape)
                p[key] = arr.copy()
            params.append(p)
        groups[name] = (specs, params)
    return model_kind, groups, metadata
