"""Small convolutional network over tile grids, trained one example at a time.

Everything is float64 numpy.  The architecture is fixed apart from the grid
size: three same-padded stride-1 convolutions (34 -> 8 -> 16 -> 32 channels,
kernels 4, 3, 3) followed by one fully connected layer mapping the flattened
conv output to a (width, height, 32) score volume.  A leaky rectifier follows
every layer, the dense one included.

Tensors are laid out (width, height, channels).  Flattening is C-order, so
grid position (x, y) maps to row x * height + y; the im2col column for kernel
offset (dx, dy) and input channel c is (dx * k + dy) * c_in + c, which lines
up with filters stored as (filters, k, k, c_in).

The Adam update is written with explicit scratch buffers so the sequence of
floating point operations is fixed; tests replay the same recurrence with
python scalars and expect bit-equal results.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import IoFailure, ShapeMismatch, VersionMismatch

N_INPUT_CHANNELS = 34
N_OUTPUT_CHANNELS = 32

# (filters, kernel) per conv layer; input channels follow from the chain
CONV_SPECS: tuple[tuple[int, int], ...] = ((8, 4), (16, 3), (32, 3))

MODEL_MAGIC = b"LTMODEL1"
MODEL_VERSION = 1


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class NetworkConfig:
    width: int
    height: int
    leaky_slope: float = 0.01
    adam: AdamConfig = field(default_factory=AdamConfig)
    seed: int = 0

    @property
    def dense_size(self) -> int:
        return self.width * self.height * N_OUTPUT_CHANNELS

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "leaky_slope": self.leaky_slope,
            "adam": {
                "lr": self.adam.lr,
                "beta1": self.adam.beta1,
                "beta2": self.adam.beta2,
                "eps": self.adam.eps,
            },
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "NetworkConfig":
        return NetworkConfig(
            width=int(d["width"]),
            height=int(d["height"]),
            leaky_slope=float(d["leaky_slope"]),
            adam=AdamConfig(
                lr=float(d["adam"]["lr"]),
                beta1=float(d["adam"]["beta1"]),
                beta2=float(d["adam"]["beta2"]),
                eps=float(d["adam"]["eps"]),
            ),
            seed=int(d["seed"]),
        )


def conv_layer_channels() -> list[tuple[int, int, int]]:
    """(filters, kernel, in_channels) per conv layer."""
    chans = []
    c_in = N_INPUT_CHANNELS
    for f, k in CONV_SPECS:
        chans.append((f, k, c_in))
        c_in = f
    return chans


def conv_weight_counts() -> list[int]:
    return [f * k * k * c for f, k, c in conv_layer_channels()]


@dataclass
class NetworkParams:
    config: NetworkConfig
    conv_w: list[np.ndarray]
    conv_b: list[np.ndarray]
    dense_w: np.ndarray
    dense_b: np.ndarray
    fingerprint: str | None = None

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        """All parameter arrays in canonical (update and file) order."""
        out = []
        for i in range(len(self.conv_w)):
            out.append((f"conv_w{i}", self.conv_w[i]))
            out.append((f"conv_b{i}", self.conv_b[i]))
        out.append(("dense_w", self.dense_w))
        out.append(("dense_b", self.dense_b))
        return out

    def conv_flat(self) -> np.ndarray:
        """Concatenated copy of all conv filter weights (biases excluded)."""
        return np.concatenate([w.ravel() for w in self.conv_w])

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            config=self.config,
            conv_w=[w.copy() for w in self.conv_w],
            conv_b=[b.copy() for b in self.conv_b],
            dense_w=self.dense_w.copy(),
            dense_b=self.dense_b.copy(),
            fingerprint=self.fingerprint,
        )


def init_params(config: NetworkConfig) -> NetworkParams:
    """He-uniform weights U(+-sqrt(6 / fan_in)), zero biases.

    Draw order is conv1, conv2, conv3, dense so a fixed seed pins every
    weight regardless of later code motion.
    """
    rng = np.random.default_rng(config.seed)
    conv_w, conv_b = [], []
    for f, k, c_in in conv_layer_channels():
        bound = np.sqrt(6.0 / (k * k * c_in))
        conv_w.append(rng.uniform(-bound, bound, size=(f, k, k, c_in)))
        conv_b.append(np.zeros(f))
    n = config.dense_size
    bound = np.sqrt(6.0 / n)
    dense_w = rng.uniform(-bound, bound, size=(n, n))
    dense_b = np.zeros(n)
    return NetworkParams(config, conv_w, conv_b, dense_w, dense_b)


def leaky_relu(z: np.ndarray, slope: float) -> np.ndarray:
    return np.where(z > 0.0, z, slope * z)


def _pad_same(a: np.ndarray, k: int) -> tuple[np.ndarray, int]:
    """Zero-pad (W, H, C) so a k-kernel stride-1 conv keeps the size.

    Asymmetric for even k: (k - 1) // 2 before, the rest after.
    """
    pb = (k - 1) // 2
    pa = k - 1 - pb
    w, h, c = a.shape
    padded = np.zeros((w + pb + pa, h + pb + pa, c))
    padded[pb : pb + w, pb : pb + h, :] = a
    return padded, pb


def _im2col(padded: np.ndarray, k: int, w: int, h: int) -> np.ndarray:
    c = padded.shape[2]
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    # (w, h, c, k, k) -> rows x*h+y, columns (dx*k+dy)*c + cc
    return win.transpose(0, 1, 3, 4, 2).reshape(w * h, k * k * c)


@dataclass
class Forward:
    """Forward pass with everything backward (and attribution) needs."""

    conv_pre: list[np.ndarray]  # (W, H, F) before the rectifier
    conv_post: list[np.ndarray]  # (W, H, F) after it
    cols: list[np.ndarray]  # im2col matrices per conv layer
    flat_in: np.ndarray  # dense input, length W*H*32
    dense_pre: np.ndarray
    out_flat: np.ndarray
    output: np.ndarray  # (W, H, 32)


def forward(params: NetworkParams, state: np.ndarray) -> Forward:
    cfg = params.config
    if state.shape != (cfg.width, cfg.height, N_INPUT_CHANNELS):
        raise ShapeMismatch(
            f"state shape {state.shape}, expected "
            f"{(cfg.width, cfg.height, N_INPUT_CHANNELS)}"
        )
    w, h = cfg.width, cfg.height
    a = np.asarray(state, dtype=np.float64)
    conv_pre, conv_post, cols = [], [], []
    for i, (f, k) in enumerate(CONV_SPECS):
        padded, _ = _pad_same(a, k)
        col = _im2col(padded, k, w, h)
        z = col @ params.conv_w[i].reshape(f, -1).T + params.conv_b[i]
        z = z.reshape(w, h, f)
        a = leaky_relu(z, cfg.leaky_slope)
        conv_pre.append(z)
        conv_post.append(a)
        cols.append(col)
    flat_in = a.reshape(-1)
    dense_pre = params.dense_w @ flat_in + params.dense_b
    out_flat = leaky_relu(dense_pre, cfg.leaky_slope)
    output = out_flat.reshape(w, h, N_OUTPUT_CHANNELS)
    return Forward(conv_pre, conv_post, cols, flat_in, dense_pre, out_flat, output)


def predict(params: NetworkParams, state: np.ndarray) -> np.ndarray:
    return forward(params, state).output


def mse_loss(output: np.ndarray, target: np.ndarray) -> float:
    if output.shape != target.shape:
        raise ShapeMismatch(f"output {output.shape} vs target {target.shape}")
    diff = output - target
    return float(np.mean(diff * diff))


@dataclass
class Grads:
    conv_w: list[np.ndarray]
    conv_b: list[np.ndarray]
    dense_w: np.ndarray
    dense_b: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        out = []
        for i in range(len(self.conv_w)):
            out.append(self.conv_w[i])
            out.append(self.conv_b[i])
        out.append(self.dense_w)
        out.append(self.dense_b)
        return out


def _leaky_grad(pre: np.ndarray, slope: float) -> np.ndarray:
    return np.where(pre > 0.0, 1.0, slope)


def loss_and_gradients(
    params: NetworkParams, state: np.ndarray, target: np.ndarray
) -> tuple[float, Grads, Forward]:
    cfg = params.config
    w, h = cfg.width, cfg.height
    if target.shape != (w, h, N_OUTPUT_CHANNELS):
        raise ShapeMismatch(
            f"target shape {target.shape}, expected {(w, h, N_OUTPUT_CHANNELS)}"
        )
    fwd = forward(params, state)
    n = fwd.out_flat.size
    t_flat = np.asarray(target, dtype=np.float64).reshape(-1)
    diff = fwd.out_flat - t_flat
    loss = float(np.mean(diff * diff))

    d_out = (2.0 / n) * diff
    d_dense_pre = d_out * _leaky_grad(fwd.dense_pre, cfg.leaky_slope)
    g_dense_w = np.outer(d_dense_pre, fwd.flat_in)
    g_dense_b = d_dense_pre.copy()
    d_act = (params.dense_w.T @ d_dense_pre).reshape(w, h, N_OUTPUT_CHANNELS)

    g_conv_w: list[np.ndarray] = [None] * len(CONV_SPECS)  # type: ignore[list-item]
    g_conv_b: list[np.ndarray] = [None] * len(CONV_SPECS)  # type: ignore[list-item]
    for i in range(len(CONV_SPECS) - 1, -1, -1):
        f, k = CONV_SPECS[i]
        c_in = params.conv_w[i].shape[3]
        dz = d_act * _leaky_grad(fwd.conv_pre[i], cfg.leaky_slope)
        dzm = dz.reshape(w * h, f)
        g_conv_w[i] = (dzm.T @ fwd.cols[i]).reshape(f, k, k, c_in)
        g_conv_b[i] = dzm.sum(axis=0)
        if i == 0:
            break
        d_cols = dzm @ params.conv_w[i].reshape(f, -1)
        d_win = d_cols.reshape(w, h, k, k, c_in)
        pb = (k - 1) // 2
        pa = k - 1 - pb
        d_padded = np.zeros((w + pb + pa, h + pb + pa, c_in))
        for dx in range(k):
            for dy in range(k):
                d_padded[dx : dx + w, dy : dy + h, :] += d_win[:, :, dx, dy, :]
        d_act = d_padded[pb : pb + w, pb : pb + h, :]

    return loss, Grads(g_conv_w, g_conv_b, g_dense_w, g_dense_b), fwd


# --- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int
    _s1: list[np.ndarray]
    _s2: list[np.ndarray]

    @staticmethod
    def for_params(params: NetworkParams) -> "AdamState":
        shapes = [a for _, a in params.arrays()]
        return AdamState(
            m=[np.zeros_like(a) for a in shapes],
            v=[np.zeros_like(a) for a in shapes],
            t=0,
            _s1=[np.zeros_like(a) for a in shapes],
            _s2=[np.zeros_like(a) for a in shapes],
        )


def adam_step(params: NetworkParams, grads: Grads, state: AdamState) -> None:
    """One in-place update.

    Op order per array is pinned:
        m  = b1*m + (1-b1)*g
        v  = b2*v + (1-b2)*(g*g)
        mh = m / (1 - b1^t)
        vh = v / (1 - b2^t)
        th = th - (lr*mh) / (sqrt(vh) + eps)
    """
    cfg = params.config.adam
    state.t += 1
    c1 = 1.0 - cfg.beta1**state.t
    c2 = 1.0 - cfg.beta2**state.t
    thetas = [a for _, a in params.arrays()]
    gs = grads.arrays()
    for th, g, m, v, s1, s2 in zip(thetas, gs, state.m, state.v, state._s1, state._s2):
        np.multiply(m, cfg.beta1, out=m)
        np.multiply(g, 1.0 - cfg.beta1, out=s1)
        np.add(m, s1, out=m)
        np.multiply(v, cfg.beta2, out=v)
        np.multiply(g, g, out=s1)
        np.multiply(s1, 1.0 - cfg.beta2, out=s1)
        np.add(v, s1, out=v)
        np.divide(m, c1, out=s1)
        np.multiply(s1, cfg.lr, out=s1)
        np.divide(v, c2, out=s2)
        np.sqrt(s2, out=s2)
        np.add(s2, cfg.eps, out=s2)
        np.divide(s1, s2, out=s1)
        np.subtract(th, s1, out=th)


# --- serialization -----------------------------------------------------------


def _write_container(
    path: str, magic: bytes, header: dict, arrays: list[tuple[str, np.ndarray]]
) -> None:
    header = dict(header)
    header["arrays"] = [
        {"name": name, "shape": list(a.shape), "dtype": a.dtype.str}
        for name, a in arrays
    ]
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(magic)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for _, a in arrays:
                fh.write(np.ascontiguousarray(a, dtype=a.dtype.newbyteorder("<")).tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_container(path: str, magic: bytes) -> tuple[dict, list[np.ndarray]]:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(data) < len(magic) + 8 or data[: len(magic)] != magic:
        raise VersionMismatch(f"{path}: not a {magic.decode('ascii')} file")
    off = len(magic)
    (hlen,) = struct.unpack_from("<Q", data, off)
    off += 8
    try:
        header = json.loads(data[off : off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise VersionMismatch(f"{path}: corrupt header") from exc
    off += hlen
    arrays = []
    for spec in header["arrays"]:
        dt = np.dtype(spec["dtype"])
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        a = np.frombuffer(data, dtype=dt, count=count, offset=off).reshape(spec["shape"])
        arrays.append(a.copy())
        off += count * dt.itemsize
    return header, arrays


def save_model(params: NetworkParams, path: str) -> None:
    header = {
        "format": "leveltrace-model",
        "version": MODEL_VERSION,
        "config": params.config.to_dict(),
        "fingerprint": params.fingerprint,
    }
    _write_container(path, MODEL_MAGIC, header, params.arrays())


def load_model(path: str) -> NetworkParams:
    header, arrays = _read_container(path, MODEL_MAGIC)
    if header.get("format") != "leveltrace-model" or header.get("version") != MODEL_VERSION:
        raise VersionMismatch(f"{path}: unsupported model file")
    config = NetworkConfig.from_dict(header["config"])
    names = [spec["name"] for spec in header["arrays"]]
    by_name = dict(zip(names, arrays))
    n_conv = len(CONV_SPECS)
    try:
        params = NetworkParams(
            config=config,
            conv_w=[by_name[f"conv_w{i}"] for i in range(n_conv)],
            conv_b=[by_name[f"conv_b{i}"] for i in range(n_conv)],
            dense_w=by_name["dense_w"],
            dense_b=by_name["dense_b"],
            fingerprint=header.get("fingerprint"),
        )
    except KeyError as exc:
        raise VersionMismatch(f"{path}: missing array {exc}") from exc
    return params
