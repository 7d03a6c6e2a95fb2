"""Learned viewpoint models: CVAE sampler, gain estimators, imitation net.

All models condition on a pooled one-hot encoding of the robot-centric
local map. The CVAE learns the distribution of high-utility poses and is
sampled by drawing latents from a standard normal; the gain networks
regress the ray-cast visible-unknown count for a (pose, map) pair; the
imitation net predicts the single best pose directly.

Poses are expressed in the local-map frame: meters from the window's
origin corner, yaw absolute (the window is world-aligned). Yaw is carried
as a (sin, cos) pair inside the networks and the losses use the shortest
arc between angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .grid import FREE, OCCUPIED, UNKNOWN

COND_DIM = 302
POOL_GRID = 10
POSE_REP_DIM = 4  # x, y, sin yaw, cos yaw
VAL_CHUNK = 512  # validation rows per forward pass; bounds activation memory

MODEL_KINDS = ("cvae", "cvae_joint", "gain_mlp", "gain_cnn", "imitation")


class DataError(ValueError):
    """Raised for unusable training data (empty splits, missing labels)."""


class NumericalError(FloatingPointError):
    """Raised when a training loss goes non-finite."""


def max_gain_cells(map_size: int) -> float:
    """Upper bound on visible unknown cells for a 90-degree sensor.

    Quarter-disk of the sensor range in cells; gain labels are divided by
    this so regression targets sit near unit scale.
    """
    r = map_size / 2.0
    return 0.25 * math.pi * r * r


def _wrap_np(a):
    w = np.remainder(a, 2.0 * np.pi)
    return np.where(w > np.pi, w - 2.0 * np.pi, w)


def pool_states(cells: np.ndarray) -> np.ndarray:
    """Max-pool grid states under the priority occupied > unknown > free."""
    n = cells.shape[0]
    if cells.ndim != 2 or cells.shape[1] != n or n % POOL_GRID != 0:
        raise nn.ShapeError(f"poolable local map must be square with side divisible by {POOL_GRID}, got {cells.shape}")
    w = n // POOL_GRID
    prio = np.zeros(cells.shape, dtype=np.uint8)
    prio[cells == UNKNOWN] = 1
    prio[cells == OCCUPIED] = 2
    tiles = prio.reshape(POOL_GRID, w, POOL_GRID, w).transpose(0, 2, 1, 3)
    pooled = tiles.reshape(POOL_GRID, POOL_GRID, w * w).max(axis=-1)
    lut = np.array([FREE, UNKNOWN, OCCUPIED], dtype=np.uint8)
    return lut[pooled]


def _encode(cells: np.ndarray, robot_yaw: float) -> np.ndarray:
    pooled = pool_states(cells)
    onehot = np.eye(3, dtype=np.float32)[pooled.reshape(-1)]
    return np.concatenate(
        [onehot.reshape(-1), np.array([math.sin(robot_yaw), math.cos(robot_yaw)], np.float32)]
    )


def encode_map(local_map) -> np.ndarray:
    """Pooled one-hot conditioning vector (length 302) for a local map."""
    return _encode(local_map.cells, local_map.robot_yaw)


def one_hot_map(cells: np.ndarray) -> np.ndarray:
    """(3, H, W) float32 channels for free/occupied/unknown."""
    out = np.zeros((3,) + cells.shape, dtype=np.float32)
    for ch, state in enumerate((FREE, OCCUPIED, UNKNOWN)):
        out[ch][cells == state] = 1.0
    return out


def _pose_rep(poses: np.ndarray, dtype=np.float32) -> np.ndarray:
    poses = np.asarray(poses, dtype=np.float64)
    rep = np.empty((len(poses), POSE_REP_DIM), dtype=dtype)
    rep[:, 0] = poses[:, 0]
    rep[:, 1] = poses[:, 1]
    rep[:, 2] = np.sin(poses[:, 2])
    rep[:, 3] = np.cos(poses[:, 2])
    return rep


@dataclass(frozen=True)
class PoseTarget:
    x: float
    y: float
    yaw: float
    gain: float | None = None


@dataclass
class SampleSet:
    """Training records: local maps with robot yaw, pose targets, gains."""

    maps: np.ndarray
    robot_yaws: np.ndarray
    poses: np.ndarray
    gains: np.ndarray | None = None
    resolution: float = 0.2

    def __post_init__(self):
        self.maps = np.asarray(self.maps, dtype=np.uint8)
        self.robot_yaws = np.asarray(self.robot_yaws, dtype=np.float64)
        self.poses = np.asarray(self.poses, dtype=np.float64)
        if self.gains is not None:
            self.gains = np.asarray(self.gains, dtype=np.float64)
        if self.maps.ndim != 3 or self.poses.ndim != 2 or self.poses.shape[1] != 3:
            raise nn.ShapeError("SampleSet needs maps (N, L, L) and poses (N, 3)")
        n = len(self.maps)
        if len(self.robot_yaws) != n or len(self.poses) != n:
            raise nn.ShapeError("SampleSet field lengths disagree")
        if self.gains is not None and len(self.gains) != n:
            raise nn.ShapeError("SampleSet field lengths disagree")

    def __len__(self):
        return len(self.maps)

    @property
    def map_size(self) -> int:
        return self.maps.shape[1]

    @property
    def extent_m(self) -> float:
        return self.map_size * self.resolution

    def conditionings(self) -> np.ndarray:
        return np.stack([_encode(m, y) for m, y in zip(self.maps, self.robot_yaws)])


@dataclass
class TrainConfig:
    epochs: int = 40
    batch_size: int = 128
    lr: float = 1e-3
    latent_dim: int = 3
    joint_gain: bool = False
    lambda_reg: float = 1.0
    hidden: int = 512
    depth: int = 4
    dropout: float | None = None
    seed: int = 0

    def resolved_dropout(self, default: float) -> float:
        return default if self.dropout is None else self.dropout


@dataclass
class CvaeParams:
    enc_specs: list
    enc_params: list
    dec_specs: list
    dec_params: list
    latent_dim: int = 3
    joint_gain: bool = False
    extent_m: float = 10.0
    gain_scale: float = 1.0

    @property
    def kind(self) -> str:
        return "cvae_joint" if self.joint_gain else "cvae"


@dataclass
class GainNetParams:
    encoder_kind: str
    enc_specs: list
    enc_params: list
    head_specs: list
    head_params: list
    extent_m: float = 10.0
    gain_scale: float = 1.0

    @property
    def kind(self) -> str:
        return "gain_cnn" if self.encoder_kind == "cnn" else "gain_mlp"


@dataclass
class ImitationParams:
    specs: list
    params: list
    extent_m: float = 10.0

    kind = "imitation"


def _head_dims(in_dim, out_dim, hidden, depth):
    return [in_dim] + [hidden] * depth + [out_dim]


def make_cvae(
    rng,
    latent_dim=3,
    joint_gain=False,
    hidden=512,
    depth=4,
    dropout=0.0,
    extent_m=10.0,
    gain_scale=1.0,
    dtype=np.float32,
) -> CvaeParams:
    x_dim = POSE_REP_DIM + (1 if joint_gain else 0)
    enc = nn.mlp(_head_dims(x_dim + COND_DIM, 2 * latent_dim, hidden, depth), dropout_rate=dropout)
    dec = nn.mlp(_head_dims(latent_dim + COND_DIM, x_dim, hidden, depth), dropout_rate=dropout)
    return CvaeParams(
        enc_specs=enc,
        enc_params=nn.init_params(enc, rng, dtype=dtype),
        dec_specs=dec,
        dec_params=nn.init_params(dec, rng, dtype=dtype),
        latent_dim=latent_dim,
        joint_gain=joint_gain,
        extent_m=extent_m,
        gain_scale=gain_scale,
    )


def _pose_loss_terms(out, poses, gains_norm):
    """Squared position + shortest-arc yaw (+ gain) error per item.

    Returns (per_item, dout) with dout scaled for the batch mean.
    """
    b = len(poses)
    dx = out[:, 0] - poses[:, 0]
    dy = out[:, 1] - poses[:, 1]
    s, c = out[:, 2], out[:, 3]
    denom = s * s + c * c
    yaw_hat = np.arctan2(s, c)
    dyaw = _wrap_np(yaw_hat - poses[:, 2])
    per_item = dx * dx + dy * dy + dyaw * dyaw
    dout = np.zeros_like(out)
    dout[:, 0] = 2.0 * dx / b
    dout[:, 1] = 2.0 * dy / b
    dout[:, 2] = 2.0 * dyaw / b * (c / denom)
    dout[:, 3] = 2.0 * dyaw / b * (-s / denom)
    if gains_norm is not None:
        dg = out[:, 4] - gains_norm
        per_item = per_item + dg * dg
        dout[:, 4] = 2.0 * dg / b
    return per_item, dout


def cvae_loss(
    params: CvaeParams,
    conds: np.ndarray,
    poses: np.ndarray,
    gains: np.ndarray | None = None,
    rng=None,
    eps=None,
    lambda_reg: float = 1.0,
    train_mode: bool = False,
):
    """Reconstruction + KL bound for one batch, with analytic gradients.

    Returns (loss, rec, kl, enc_grads, dec_grads). A single latent sample
    per item estimates the bound; pass eps explicitly for gradient checks.
    """
    if len(poses) == 0:
        raise DataError("empty batch")
    if params.joint_gain and gains is None:
        raise DataError("joint model needs gain labels")
    dtype = params.enc_params[0]["W"].dtype
    conds = np.asarray(conds, dtype=dtype)
    poses = np.asarray(poses, dtype=np.float64)
    b = len(poses)
    lat = params.latent_dim

    x = _pose_rep(poses, dtype=dtype)
    gains_norm = None
    if params.joint_gain:
        gains_norm = (np.asarray(gains, dtype=np.float64) / params.gain_scale).astype(dtype)
        x = np.concatenate([x, gains_norm[:, None]], axis=1)
    enc_in = np.concatenate([x, conds], axis=1)
    enc_out, enc_caches = nn.forward(
        params.enc_specs, params.enc_params, enc_in, train_mode=train_mode, rng=rng
    )
    mu = enc_out[:, :lat]
    lv_raw = enc_out[:, lat:]
    clamp_mask = (lv_raw > -nn.LOGVAR_CLAMP) & (lv_raw < nn.LOGVAR_CLAMP)
    lv = np.clip(lv_raw, -nn.LOGVAR_CLAMP, nn.LOGVAR_CLAMP)

    if eps is None:
        eps = rng.standard_normal((b, lat))
    eps = np.asarray(eps, dtype=dtype)
    sigma = np.exp(lv / 2.0)
    z = mu + sigma * eps

    dec_in = np.concatenate([z, conds], axis=1)
    dec_out, dec_caches = nn.forward(
        params.dec_specs, params.dec_params, dec_in, train_mode=train_mode, rng=rng
    )
    per_item, dout = _pose_loss_terms(
        dec_out, poses, gains_norm if params.joint_gain else None
    )
    kl_item = 0.5 * np.sum(mu * mu + np.exp(lv) - 1.0 - lv, axis=1)
    bad = ~np.isfinite(per_item + kl_item)
    if bad.any():
        raise NumericalError(f"non-finite loss at batch index {int(np.argmax(bad))}")
    rec = float(np.mean(per_item))
    kl = float(np.mean(kl_item))
    loss = rec + lambda_reg * kl

    dec_grads, ddec_in = nn.backward(params.dec_specs, params.dec_params, dec_caches, dout)
    dz = ddec_in[:, :lat]
    dmu = dz + lambda_reg * mu / b
    dlv = dz * eps * 0.5 * sigma + lambda_reg * 0.5 * (np.exp(lv) - 1.0) / b
    denc_out = np.concatenate([dmu, dlv * clamp_mask], axis=1).astype(dtype)
    enc_grads, _ = nn.backward(params.enc_specs, params.enc_params, enc_caches, denc_out)
    return loss, rec, kl, enc_grads, dec_grads


def _clone_params(params):
    return [{k: a.copy() for k, a in p.items()} for p in params]


def train_cvae(train: SampleSet, val: SampleSet, config: TrainConfig):
    """Adam training of the CVAE; returns (params, per-epoch history).

    The returned weights are the best-validation snapshot; validation uses
    a fixed latent draw so epochs are comparable.
    """
    if len(train) == 0 or len(val) == 0:
        raise DataError("empty split")
    if config.joint_gain and (train.gains is None or val.gains is None):
        raise DataError("joint model needs gain labels")
    rng = np.random.default_rng(config.seed)
    gain_scale = max_gain_cells(train.map_size)
    params = make_cvae(
        rng,
        latent_dim=config.latent_dim,
        joint_gain=config.joint_gain,
        hidden=config.hidden,
        depth=config.depth,
        dropout=config.resolved_dropout(0.0),
        extent_m=train.extent_m,
        gain_scale=gain_scale,
    )
    tr_conds = train.conditionings()
    va_conds = val.conditionings()
    val_eps = rng.standard_normal((len(val), config.latent_dim))
    all_params = params.enc_params + params.dec_params
    state = nn.init_adam(all_params, lr=config.lr)

    def val_loss():
        total = 0.0
        for lo in range(0, len(val), VAL_CHUNK):
            hi = min(lo + VAL_CHUNK, len(val))
            loss, _, _, _, _ = cvae_loss(
                params,
                va_conds[lo:hi],
                val.poses[lo:hi],
                val.gains[lo:hi] if val.gains is not None else None,
                eps=val_eps[lo:hi],
                lambda_reg=config.lambda_reg,
            )
            total += loss * (hi - lo)
        return total / len(val)

    history = []
    best = (math.inf, None, None)
    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            loss, _, _, eg, dg = cvae_loss(
                params,
                tr_conds[idx],
                train.poses[idx],
                train.gains[idx] if train.gains is not None else None,
                rng=rng,
                lambda_reg=config.lambda_reg,
                train_mode=True,
            )
            nn.adam_step(all_params, eg + dg, state)
            total += loss * len(idx)
        vl = val_loss()
        history.append({"epoch": epoch, "train_loss": total / len(train), "val_loss": vl})
        if vl < best[0]:
            best = (vl, _clone_params(params.enc_params), _clone_params(params.dec_params))
    if best[1] is not None:
        params.enc_params, params.dec_params = best[1], best[2]
    return params, history


def sample_poses(params: CvaeParams, cond: np.ndarray, n: int, rng) -> np.ndarray:
    """Draw n poses by decoding standard-normal latents.

    Rows are (x, y, yaw) in local-map meters, plus a denormalized gain
    column for joint models. Positions are clamped to the map extent.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    z = rng.standard_normal((n, params.latent_dim)).astype(np.float32)
    dec_in = np.concatenate([z, np.tile(np.asarray(cond, np.float32), (n, 1))], axis=1)
    out, _ = nn.forward(params.dec_specs, params.dec_params, dec_in)
    cols = 4 if params.joint_gain else 3
    res = np.empty((n, cols), dtype=np.float64)
    res[:, 0] = np.clip(out[:, 0], 0.0, params.extent_m)
    res[:, 1] = np.clip(out[:, 1], 0.0, params.extent_m)
    res[:, 2] = np.arctan2(out[:, 2], out[:, 3])
    if params.joint_gain:
        res[:, 3] = np.maximum(out[:, 4], 0.0) * params.gain_scale
    return res


def _cnn_encoder_specs(map_size: int, features: int = 128):
    side = map_size - 12  # three valid 5x5 convs
    pooled = side // 2
    return [
        nn.conv2d(3, 8, 5),
        nn.activation("relu"),
        nn.conv2d(8, 16, 5),
        nn.activation("relu"),
        nn.conv2d(16, 32, 5),
        nn.activation("relu"),
        nn.maxpool2d(2),
        nn.dense(32 * pooled * pooled, features),
        nn.activation("relu"),
    ]


def make_gain_net(
    rng,
    encoder_kind: str = "cnn",
    map_size: int = 50,
    hidden=512,
    depth=4,
    dropout=0.2,
    extent_m=10.0,
    features: int = 128,
) -> GainNetParams:
    if encoder_kind == "cnn":
        enc = _cnn_encoder_specs(map_size, features)
        head_in = POSE_REP_DIM + features
    elif encoder_kind == "pooling":
        enc = []
        head_in = POSE_REP_DIM + COND_DIM
    else:
        raise ValueError(f"unknown encoder kind: {encoder_kind!r}")
    head = nn.mlp(_head_dims(head_in, 1, hidden, depth), dropout_rate=dropout)
    head.append(nn.activation("softplus"))
    return GainNetParams(
        encoder_kind=encoder_kind,
        enc_specs=enc,
        enc_params=nn.init_params(enc, rng),
        head_specs=head,
        head_params=nn.init_params(head, rng),
        extent_m=extent_m,
        gain_scale=max_gain_cells(map_size),
    )


def _gain_forward(params: GainNetParams, maps, yaws, poses, train_mode=False, rng=None, feats=None):
    """Features + head forward; returns (out, head_caches, enc_caches).

    Pooling features may be precomputed and passed as `feats`, in which
    case maps and yaws are ignored.
    """
    rep = _pose_rep(poses)
    enc_caches = None
    if feats is None:
        if params.encoder_kind == "cnn":
            x = np.stack([one_hot_map(m) for m in maps])
            feats, enc_caches = nn.forward(params.enc_specs, params.enc_params, x, train_mode, rng)
        else:
            feats = np.stack([_encode(m, y) for m, y in zip(maps, yaws)])
    head_in = np.concatenate([rep, feats], axis=1)
    out, head_caches = nn.forward(params.head_specs, params.head_params, head_in, train_mode, rng)
    return out[:, 0], head_caches, enc_caches


def predict_gain(params: GainNetParams, pose: PoseTarget, local_map) -> float:
    return float(predict_gains(params, local_map, [(pose.x, pose.y, pose.yaw)])[0])


def predict_gains(params: GainNetParams, local_map, poses) -> np.ndarray:
    """Denormalized gain estimates (voxel counts) for poses on one map.

    The map is encoded once; eval mode, so repeated calls are identical.
    """
    poses = np.asarray(poses, dtype=np.float64)
    rep = _pose_rep(poses)
    if params.encoder_kind == "cnn":
        x = one_hot_map(local_map.cells)[None]
        feats, _ = nn.forward(params.enc_specs, params.enc_params, x)
        feats = np.tile(feats, (len(poses), 1))
    else:
        feats = np.tile(encode_map(local_map), (len(poses), 1))
    head_in = np.concatenate([rep, feats], axis=1)
    out, _ = nn.forward(params.head_specs, params.head_params, head_in)
    return np.asarray(out[:, 0], dtype=np.float64) * params.gain_scale


def train_gain(train: SampleSet, val: SampleSet, config: TrainConfig, encoder_kind: str = "cnn"):
    """Squared-error regression on normalized gains; best-val weights."""
    if len(train) == 0 or len(val) == 0:
        raise DataError("empty split")
    if train.gains is None or val.gains is None:
        raise DataError("gain training needs gain labels")
    rng = np.random.default_rng(config.seed)
    params = make_gain_net(
        rng,
        encoder_kind=encoder_kind,
        map_size=train.map_size,
        hidden=config.hidden,
        depth=config.depth,
        dropout=config.resolved_dropout(0.2),
        extent_m=train.extent_m,
    )
    tr_t = train.gains / params.gain_scale
    va_t = val.gains / params.gain_scale
    pooled = encoder_kind == "pooling"
    tr_feats = train.conditionings() if pooled else None
    va_feats = val.conditionings() if pooled else None
    all_params = params.enc_params + params.head_params
    state = nn.init_adam(all_params, lr=config.lr)

    def val_loss():
        total = 0.0
        for lo in range(0, len(val), VAL_CHUNK):
            hi = min(lo + VAL_CHUNK, len(val))
            out, _, _ = _gain_forward(
                params,
                None if pooled else val.maps[lo:hi],
                None if pooled else val.robot_yaws[lo:hi],
                val.poses[lo:hi],
                feats=va_feats[lo:hi] if pooled else None,
            )
            total += float(np.sum((out - va_t[lo:hi]) ** 2))
        return total / len(val)

    history = []
    best = (math.inf, None, None)
    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            out, head_caches, enc_caches = _gain_forward(
                params,
                None if pooled else train.maps[idx],
                None if pooled else train.robot_yaws[idx],
                train.poses[idx],
                train_mode=True,
                rng=rng,
                feats=tr_feats[idx] if pooled else None,
            )
            resid = out - tr_t[idx]
            if not np.isfinite(resid).all():
                raise NumericalError(
                    f"non-finite loss at batch index {int(np.argmax(~np.isfinite(resid)))}"
                )
            total += float(np.mean(resid**2)) * len(idx)
            dout = (2.0 * resid / len(idx)).astype(np.float32)[:, None]
            head_grads, dhead_in = nn.backward(
                params.head_specs, params.head_params, head_caches, dout
            )
            if params.encoder_kind == "cnn":
                dfeats = dhead_in[:, POSE_REP_DIM:]
                enc_grads, _ = nn.backward(
                    params.enc_specs, params.enc_params, enc_caches, dfeats
                )
            else:
                enc_grads = []
            nn.adam_step(all_params, enc_grads + head_grads, state)
        vl = val_loss()
        history.append({"epoch": epoch, "train_loss": total / len(train), "val_loss": vl})
        if vl < best[0]:
            best = (vl, _clone_params(params.enc_params), _clone_params(params.head_params))
    if best[1] is not None:
        params.enc_params, params.head_params = best[1], best[2]
    return params, history


def make_imitation(rng, hidden=512, depth=4, dropout=0.0, extent_m=10.0) -> ImitationParams:
    specs = nn.mlp(_head_dims(COND_DIM, POSE_REP_DIM, hidden, depth), dropout_rate=dropout)
    return ImitationParams(specs=specs, params=nn.init_params(specs, rng), extent_m=extent_m)


def imitate_predict(params: ImitationParams, cond: np.ndarray) -> PoseTarget:
    """Deterministic single-pose prediction, clamped like sample_poses."""
    out, _ = nn.forward(params.specs, params.params, np.asarray(cond, np.float32)[None])
    x = float(np.clip(out[0, 0], 0.0, params.extent_m))
    y = float(np.clip(out[0, 1], 0.0, params.extent_m))
    yaw = float(np.arctan2(out[0, 2], out[0, 3]))
    return PoseTarget(x=x, y=y, yaw=yaw)


def train_imitation(train: SampleSet, val: SampleSet, config: TrainConfig):
    """Behavior cloning on the teacher's best pose (square loss)."""
    if len(train) == 0 or len(val) == 0:
        raise DataError("empty split")
    rng = np.random.default_rng(config.seed)
    params = make_imitation(
        rng,
        hidden=config.hidden,
        depth=config.depth,
        dropout=config.resolved_dropout(0.0),
        extent_m=train.extent_m,
    )
    tr_conds = train.conditionings()
    va_conds = val.conditionings()
    state = nn.init_adam(params.params, lr=config.lr)

    def val_loss():
        total = 0.0
        for lo in range(0, len(val), VAL_CHUNK):
            hi = min(lo + VAL_CHUNK, len(val))
            out, _ = nn.forward(params.specs, params.params, va_conds[lo:hi])
            per_item, _ = _pose_loss_terms(out, val.poses[lo:hi], None)
            total += float(np.sum(per_item))
        return total / len(val)

    history = []
    best = (math.inf, None)
    for epoch in range(config.epochs):
        order = rng.permutation(len(train))
        total = 0.0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo : lo + config.batch_size]
            out, caches = nn.forward(
                params.specs, params.params, tr_conds[idx], train_mode=True, rng=rng
            )
            per_item, dout = _pose_loss_terms(out, train.poses[idx], None)
            if not np.isfinite(per_item).all():
                raise NumericalError(
                    f"non-finite loss at batch index {int(np.argmax(~np.isfinite(per_item)))}"
                )
            total += float(np.mean(per_item)) * len(idx)
            grads, _ = nn.backward(
                params.specs, params.params, caches, dout.astype(np.float32)
            )
            nn.adam_step(params.params, grads, state)
        vl = val_loss()
        history.append({"epoch": epoch, "train_loss": total / len(train), "val_loss": vl})
        if vl < best[0]:
            best = (vl, _clone_params(params.params))
    if best[1] is not None:
        params.params = best[1]
    return params, history


# ---------------------------------------------------------------------------
# planner facade and weight files

@dataclass
class ModelBundle:
    """What the planner needs: a pose sampler and/or a gain estimator."""

    sampler: CvaeParams | ImitationParams | None = None
    gain_net: GainNetParams | None = None

    def sample_poses(self, local_map, n: int, rng) -> np.ndarray:
        if not isinstance(self.sampler, CvaeParams):
            raise ValueError("bundle has no CVAE sampler")
        return sample_poses(self.sampler, encode_map(local_map), n, rng)

    def predict_pose(self, local_map):
        if not isinstance(self.sampler, ImitationParams):
            raise ValueError("bundle has no imitation sampler")
        p = imitate_predict(self.sampler, encode_map(local_map))
        return p.x, p.y, p.yaw

    def predict_gains(self, local_map, poses) -> np.ndarray:
        if self.gain_net is None:
            raise ValueError("bundle has no gain estimator")
        return predict_gains(self.gain_net, local_map, poses)


def save_model(path, params) -> None:
    """Persist any model-params object in the shared weight format."""
    if isinstance(params, CvaeParams):
        groups = {
            "encoder": (params.enc_specs, params.enc_params),
            "decoder": (params.dec_specs, params.dec_params),
        }
        meta = {
            "latent_dim": params.latent_dim,
            "joint_gain": params.joint_gain,
            "extent_m": params.extent_m,
            "gain_scale": params.gain_scale,
        }
    elif isinstance(params, GainNetParams):
        groups = {
            "encoder": (params.enc_specs, params.enc_params),
            "head": (params.head_specs, params.head_params),
        }
        meta = {
            "encoder_kind": params.encoder_kind,
            "extent_m": params.extent_m,
            "gain_scale": params.gain_scale,
        }
    elif isinstance(params, ImitationParams):
        groups = {"net": (params.specs, params.params)}
        meta = {"extent_m": params.extent_m}
    else:
        raise TypeError(f"cannot save {type(params).__name__}")
    nn.save_weights(path, params.kind, groups, metadata=meta)


def load_model(path, expected_kind: str | None = None):
    """Load a saved model; refuses files whose kind does not match."""
    kind, groups, meta = nn.load_weights(path)
    if kind not in MODEL_KINDS:
        raise nn.WeightsFormatError(f"unknown model kind {kind!r}")
    if expected_kind is not None and kind != expected_kind:
        raise nn.WeightsFormatError(f"expected a {expected_kind} model, found {kind}")
    if kind in ("cvae", "cvae_joint"):
        enc_specs, enc_params = groups["encoder"]
        dec_specs, dec_params = groups["decoder"]
        return CvaeParams(
            enc_specs=enc_specs,
            enc_params=enc_params,
            dec_specs=dec_specs,
            dec_params=dec_params,
            latent_dim=int(meta["latent_dim"]),
            joint_gain=bool(meta["joint_gain"]),
            extent_m=float(meta["extent_m"]),
            gain_scale=float(meta["gain_scale"]),
        )
    if kind in ("gain_mlp", "gain_cnn"):
        enc_specs, enc_params = groups["encoder"]
        head_specs, head_params = groups["head"]
        return GainNetParams(
            encoder_kind=str(meta["encoder_kind"]),
            enc_specs=enc_specs,
            enc_params=enc_params,
            head_specs=head_specs,
            head_params=head_params,
            extent_m=float(meta["extent_m"]),
            gain_scale=float(meta["gain_scale"]),
        )
    specs, ps = groups["net"]
    return ImitationParams(specs=specs, params=ps, extent_m=float(meta["extent_m"]))
