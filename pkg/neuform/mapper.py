from __future__ import annotations

import csv
import json
import logging
import struct
import zlib
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from threadpoolctl import threadpool_limits

from .config import FrameConfig, MapperConfig, MelConfig, TrainConfig
from .errors import CheckpointError, ConfigError, TrainingDivergedError
from .models import MelSpectrogram, NormStats, SpeechParams
from .params import denormalize_mel, normalize, normalize_mel
from .utils import format_float

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"NFCKPT1"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<I")
_MANIFEST_KEYS = ("payload_bytes", "payload_crc32", "config", "frame", "mel", "tensors")


def weight_shapes(config: MapperConfig) -> dict[str, tuple[int, ...]]:
    """Name and shape of every tensor, in checkpoint order.

    Weights are laid out (out_channels, in_channels, kernel_width).

    Args:
        config: The architecture.

    Returns:
        dict[str, tuple[int, ...]]: The tensor table.
    """
    r, s, p = config.residual_channels, config.skip_channels, config.post_channels
    shapes: dict[str, tuple[int, ...]] = {
        "input.weight": (r, config.in_channels, 1),
        "input.bias": (r,),
    }
    for i in range(len(config.dilations)):
        shapes[f"blocks.{i}.dilated.weight"] = (2 * r, r, config.kernel_width)
        shapes[f"blocks.{i}.dilated.bias"] = (2 * r,)
        shapes[f"blocks.{i}.residual.weight"] = (r, r, 1)
        shapes[f"blocks.{i}.residual.bias"] = (r,)
        shapes[f"blocks.{i}.skip.weight"] = (s, r, 1)
        shapes[f"blocks.{i}.skip.bias"] = (s,)
    shapes["post.weight"] = (p, s, 1)
    shapes["post.bias"] = (p,)
    shapes["output.weight"] = (config.mel_channels, p, 1)
    shapes["output.bias"] = (config.mel_channels,)
    return shapes


@dataclass(eq=False)
class MapperModel:
    """Weights, architecture and normalization stats of the params-to-mel network.

    Attributes:
        config: The architecture.
        weights: Tensors keyed as in `weight_shapes`.
        stats: Input and mel normalization statistics.
        frame: Frame settings of the training features.
        mel: Mel settings of the training features.
    """

    config: MapperConfig
    weights: dict[str, np.ndarray]
    stats: NormStats | None = None
    frame: FrameConfig = field(default_factory=FrameConfig)
    mel: MelConfig = field(default_factory=MelConfig)

    def __post_init__(self):
        expected = weight_shapes(self.config)
        if list(self.weights) != list(expected):
            raise ConfigError(
                f"Expected tensors {list(expected)}; received {list(self.weights)}."
            )
        for name, shape in expected.items():
            tensor = np.asarray(self.weights[name])
            if tensor.dtype not in (np.float32, np.float64):
                tensor = tensor.astype(np.float32)
            if tensor.shape != shape:
                raise ConfigError(
                    f"Tensor {name} should have shape {shape}; received {tensor.shape}."
                )
            if not np.all(np.isfinite(tensor)):
                raise ValueError(f"Tensor {name} contains non-finite values.")
            self.weights[name] = tensor
        if self.config.mel_channels != self.mel.n_mels:
            raise ConfigError(
                f"Mapper predicts {self.config.mel_channels} mel channels; "
                f"mel config has {self.mel.n_mels}."
            )

    @property
    def n_parameters(self) -> int:
        return sum(int(w.size) for w in self.weights.values())

    @property
    def receptive_field(self) -> int:
        return self.config.receptive_field

    def copy(self) -> MapperModel:
        return MapperModel(
            self.config,
            {name: w.copy() for name, w in self.weights.items()},
            self.stats,
            self.frame,
            self.mel,
        )

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, MapperModel):
            return False
        return (
            self.config == other.config
            and self.frame == other.frame
            and self.mel == other.mel
            and self.stats == other.stats
            and list(self.weights) == list(other.weights)
            and all(
                w.dtype == other.weights[n].dtype
                and np.array_equal(w, other.weights[n])
                for n, w in self.weights.items()
            )
        )

    def __repr__(self) -> str:
        return (
            f"MapperModel({len(self.config.dilations)} blocks, "
            f"{self.n_parameters} parameters)"
        )


def init_model(
    config: MapperConfig | None = None,
    seed: int | None = None,
    dtype: Any = np.float32,
    **model_kwargs: Any,
) -> MapperModel:
    """Creates a model with Glorot-uniform weights and zero biases.

    Args:
        config: The architecture. Defaults to `MapperConfig()`.
        seed: Initialization seed. Defaults to `config.seed`.
        dtype: Floating-point type of the weights.
        model_kwargs: Extra `MapperModel` fields, such as `stats`.

    Returns:
        MapperModel: The initialized model.
    """
    config = config or MapperConfig()
    rng = np.random.default_rng(config.seed if seed is None else seed)
    weights: dict[str, np.ndarray] = {}
    for name, shape in weight_shapes(config).items():
        if name.endswith(".bias"):
            weights[name] = np.zeros(shape, dtype=dtype)
            continue
        out_channels, in_channels, width = shape
        limit = np.sqrt(6.0 / (in_channels * width + out_channels * width))
        weights[name] = rng.uniform(-limit, limit, shape).astype(dtype)
    return MapperModel(config, weights, **model_kwargs)


def _conv1x1(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    return np.matmul(weight[:, :, 0], x) + bias[None, :, None]


def _shifted(x: np.ndarray, width: int, dilation: int) -> list[np.ndarray]:
    pad = dilation * (width - 1) // 2
    padded = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    length = x.shape[-1]
    return [padded[:, :, k * dilation : k * dilation + length] for k in range(width)]


def _dilated_conv(
    x: np.ndarray, weight: np.ndarray, bias: np.ndarray, dilation: int
) -> np.ndarray:
    taps = _shifted(x, weight.shape[-1], dilation)
    out = bias[None, :, None] + np.matmul(weight[:, :, 0], taps[0])
    for k in range(1, len(taps)):
        out = out + np.matmul(weight[:, :, k], taps[k])
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class _Cache:
    x: np.ndarray
    block_inputs: list[np.ndarray] = field(default_factory=list)
    filters: list[np.ndarray] = field(default_factory=list)
    gates: list[np.ndarray] = field(default_factory=list)
    gated: list[np.ndarray] = field(default_factory=list)
    skips: np.ndarray | None = None
    post: np.ndarray | None = None
    hidden: np.ndarray | None = None


def forward_batch(model: MapperModel, x: np.ndarray) -> tuple[np.ndarray, _Cache]:
    """Runs the network on a batch laid out (batch, channels, frames).

    Args:
        model: The model.
        x: Normalized parameters of shape (B, in_channels, T).

    Returns:
        A tuple of the predicted normalized mel (B, mel_channels, T) and the
        activations needed by `backward`.
    """
    w = model.weights
    config = model.config
    dtype = w["input.weight"].dtype
    x = np.asarray(x, dtype=dtype)
    if x.ndim != 3 or x.shape[1] != config.in_channels or x.shape[2] < 1:
        raise ValueError(
            f"Expected input of shape (B, {config.in_channels}, T>=1); "
            f"received {x.shape}."
        )
    r = config.residual_channels
    cache = _Cache(x)
    h = _conv1x1(x, w["input.weight"], w["input.bias"])
    skips = np.zeros((x.shape[0], config.skip_channels, x.shape[2]), dtype=dtype)
    for i, dilation in enumerate(config.dilations):
        prefix = f"blocks.{i}"
        a = _dilated_conv(
            h, w[f"{prefix}.dilated.weight"], w[f"{prefix}.dilated.bias"], dilation
        )
        tf = np.tanh(a[:, :r])
        sg = _sigmoid(a[:, r:])
        z = tf * sg
        cache.block_inputs.append(h)
        cache.filters.append(tf)
        cache.gates.append(sg)
        cache.gated.append(z)
        skips = skips + _conv1x1(
            z, w[f"{prefix}.skip.weight"], w[f"{prefix}.skip.bias"]
        )
        h = h + _conv1x1(
            z, w[f"{prefix}.residual.weight"], w[f"{prefix}.residual.bias"]
        )
    cache.skips = skips
    post = _conv1x1(np.maximum(skips, 0), w["post.weight"], w["post.bias"])
    hidden = np.maximum(post, 0)
    cache.post = post
    cache.hidden = hidden
    return _conv1x1(hidden, w["output.weight"], w["output.bias"]), cache


def forward(model: MapperModel, z_params: np.ndarray) -> np.ndarray:
    """Maps normalized parameters (T, 9) to normalized log-mel (T, 80).

    The convolutions are non-causal with symmetric zero padding, so the
    output has as many frames as the input.

    Args:
        model: The model.
        z_params: Rows of z-scored parameters with the raw voicing flag.

    Returns:
        np.ndarray: The predicted normalized mel frames.
    """
    z_params = np.asarray(z_params)
    if z_params.ndim != 2:
        raise ValueError(f"Expected (T, channels) input; received {z_params.shape}.")
    y, _ = forward_batch(model, z_params.T[None])
    return y[0].T


def loss(predicted: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error accumulated in float64."""
    predicted = np.asarray(predicted)
    target = np.asarray(target)
    if predicted.shape != target.shape:
        raise ValueError(
            f"Expected equal shapes; received {predicted.shape} and {target.shape}."
        )
    difference = predicted.astype(np.float64) - target.astype(np.float64)
    return float(np.mean(np.square(difference)))


def loss_gradient(predicted: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Gradient of `loss` with respect to `predicted`."""
    difference = predicted.astype(np.float64) - target.astype(np.float64)
    return (2.0 * difference / difference.size).astype(predicted.dtype)


def _weight_grad(dy: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.tensordot(dy, x, axes=([0, 2], [0, 2]))[:, :, None]


def backward(
    model: MapperModel, cache: _Cache, d_output: np.ndarray
) -> dict[str, np.ndarray]:
    """Reverse-mode gradients of every tensor.

    Args:
        model: The model used by `forward_batch`.
        cache: Activations returned by `forward_batch`.
        d_output: Gradient with respect to the network output.

    Returns:
        dict[str, np.ndarray]: Gradients keyed like the weights.
    """
    w = model.weights
    config = model.config
    r = config.residual_channels
    assert cache.skips is not None and cache.post is not None
    assert cache.hidden is not None
    grads: dict[str, np.ndarray] = {}

    grads["output.weight"] = _weight_grad(d_output, cache.hidden)
    grads["output.bias"] = d_output.sum(axis=(0, 2))
    d_post = np.matmul(w["output.weight"][:, :, 0].T, d_output) * (cache.post > 0)
    grads["post.weight"] = _weight_grad(d_post, np.maximum(cache.skips, 0))
    grads["post.bias"] = d_post.sum(axis=(0, 2))
    d_skips = np.matmul(w["post.weight"][:, :, 0].T, d_post) * (cache.skips > 0)

    d_h = np.zeros_like(cache.block_inputs[0])
    for i in reversed(range(len(config.dilations))):
        prefix = f"blocks.{i}"
        dilation = config.dilations[i]
        z = cache.gated[i]
        tf, sg = cache.filters[i], cache.gates[i]

        grads[f"{prefix}.residual.weight"] = _weight_grad(d_h, z)
        grads[f"{prefix}.residual.bias"] = d_h.sum(axis=(0, 2))
        grads[f"{prefix}.skip.weight"] = _weight_grad(d_skips, z)
        grads[f"{prefix}.skip.bias"] = d_skips.sum(axis=(0, 2))
        d_z = np.matmul(w[f"{prefix}.residual.weight"][:, :, 0].T, d_h)
        d_z = d_z + np.matmul(w[f"{prefix}.skip.weight"][:, :, 0].T, d_skips)

        d_a = np.concatenate(
            [d_z * sg * (1 - tf * tf), d_z * tf * sg * (1 - sg)], axis=1
        )
        weight = w[f"{prefix}.dilated.weight"]
        taps = _shifted(cache.block_inputs[i], config.kernel_width, dilation)
        grads[f"{prefix}.dilated.weight"] = np.stack(
            [np.tensordot(d_a, tap, axes=([0, 2], [0, 2])) for tap in taps], axis=-1
        )
        grads[f"{prefix}.dilated.bias"] = d_a.sum(axis=(0, 2))

        length = d_a.shape[-1]
        pad = dilation * (config.kernel_width - 1) // 2
        d_padded = np.zeros(
            (d_a.shape[0], r, length + 2 * pad), dtype=d_a.dtype
        )
        for k in range(config.kernel_width):
            d_padded[:, :, k * dilation : k * dilation + length] += np.matmul(
                weight[:, :, k].T, d_a
            )
        d_h = d_h + d_padded[:, :, pad : pad + length]

    grads["input.weight"] = _weight_grad(d_h, cache.x)
    grads["input.bias"] = d_h.sum(axis=(0, 2))
    return {name: grads[name].astype(w[name].dtype) for name in w}


class Adam:
    """Adam optimizer with bias correction over a dict of tensors.

    Args:
        lr: Learning rate.
        beta1: Decay of the first-moment estimate.
        beta2: Decay of the second-moment estimate.
        eps: Denominator offset.
    """

    def __init__(
        self,
        lr: float = 1e-4,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    @classmethod
    def from_config(cls, config: TrainConfig) -> Adam:
        return cls(config.learning_rate, config.beta1, config.beta2, config.eps)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        """Updates `params` in place."""
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for name, param in params.items():
            grad = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(param)
                self.v[name] = np.zeros_like(param)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * (grad * grad)
            denominator = np.sqrt(v / correction2) + self.eps
            param -= (self.lr / correction1) * m / denominator


def train_step(
    model: MapperModel,
    optimizer: Adam,
    x: np.ndarray,
    y: np.ndarray,
    step: int = 0,
) -> float:
    """One Adam update on a batch; returns the batch loss before the update.

    Raises:
        TrainingDivergedError: If the loss is not finite.
    """
    predicted, cache = forward_batch(model, x)
    value = loss(predicted, y)
    if not np.isfinite(value):
        raise TrainingDivergedError(step, value)
    grads = backward(model, cache, loss_gradient(predicted, y))
    optimizer.step(model.weights, grads)
    return value


class Dataset:
    """Aligned normalized (parameters, mel) pairs, stored (channels, frames)."""

    def __init__(self, pairs: Sequence[tuple[np.ndarray, np.ndarray]]):
        self.pairs = [
            (np.asarray(x, dtype=np.float32), np.asarray(y, dtype=np.float32))
            for x, y in pairs
        ]
        for x, y in self.pairs:
            if x.shape[1] != y.shape[1]:
                raise ValueError(
                    f"Parameters have {x.shape[1]} frames; mel has {y.shape[1]}."
                )

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def n_frames(self) -> int:
        return sum(x.shape[1] for x, _ in self.pairs)

    def usable(self, seq_len: int) -> Dataset:
        """Utterances with at least `seq_len` frames."""
        kept = [(x, y) for x, y in self.pairs if x.shape[1] >= seq_len]
        skipped = len(self.pairs) - len(kept)
        if skipped:
            logger.warning(
                f"Skipped {skipped} of {len(self.pairs)} utterances shorter "
                f"than {seq_len} frames."
            )
        return Dataset(kept)

    def sample_batch(
        self, rng: np.random.Generator, batch_size: int, seq_len: int
    ) -> tuple[np.ndarray, np.ndarray]:
        """Uniformly random `seq_len` crops of uniformly random utterances."""
        xs, ys = [], []
        for index in rng.integers(len(self.pairs), size=batch_size):
            x, y = self.pairs[index]
            start = int(rng.integers(x.shape[1] - seq_len + 1))
            xs.append(x[:, start : start + seq_len])
            ys.append(y[:, start : start + seq_len])
        return np.stack(xs), np.stack(ys)


def prepare_dataset(
    params: Sequence[SpeechParams],
    mels: Sequence[MelSpectrogram],
    stats: NormStats,
) -> Dataset:
    """Normalizes analyzed utterances into training pairs.

    Args:
        params: Parameters of every utterance.
        mels: Reference mel-spectrograms of the same utterances.
        stats: Statistics computed from the training split, with mel stats.

    Returns:
        Dataset: The normalized pairs.
    """
    if len(params) != len(mels):
        raise ValueError(
            f"Expected one mel per utterance; received {len(params)} and {len(mels)}."
        )
    return Dataset(
        [
            (normalize(p, stats).T, normalize_mel(m, stats).T)
            for p, m in zip(params, mels)
        ]
    )


def evaluate_loss(model: MapperModel, dataset: Dataset) -> float:
    """MSE pooled over every frame of every utterance."""
    total = 0.0
    count = 0
    for x, y in dataset.pairs:
        predicted, _ = forward_batch(model, x[None])
        total += loss(predicted[0], y) * y.size
        count += y.size
    if count == 0:
        raise ValueError("Cannot evaluate the loss of an empty dataset.")
    return total / count


@dataclass
class TrainResult:
    """Outcome of `train`.

    Attributes:
        model: The trained model.
        losses: Training loss of every update.
        val_losses: Validation loss keyed by update count.
        checkpoints: Paths of the periodic checkpoints.
    """

    model: MapperModel
    losses: list[float]
    val_losses: dict[int, float] = field(default_factory=dict)
    checkpoints: list[Path] = field(default_factory=list)


def smooth(values: Sequence[float], window: int = 100) -> np.ndarray:
    """Trailing moving average; the first values average what is available."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) == 0:
        return values
    cumulative = np.cumsum(np.concatenate([[0.0], values]))
    index = np.arange(1, len(values) + 1)
    start = np.maximum(index - window, 0)
    return (cumulative[index] - cumulative[start]) / (index - start)


def train(
    dataset: Dataset,
    train_config: TrainConfig | None = None,
    model: MapperModel | None = None,
    val_dataset: Dataset | None = None,
    checkpoint_dir: str | Path | None = None,
) -> TrainResult:
    """Trains the mapper with Adam on random fixed-length crops.

    Args:
        dataset: Normalized training pairs.
        train_config: Optimizer and sampling settings.
        model: Initial model; must carry the training stats for checkpoints.
        val_dataset: Optional validation pairs.
        checkpoint_dir: Directory of periodic checkpoints; None disables them.

    Returns:
        TrainResult: The model, loss curve, validation losses and checkpoints.
    """
    train_config = train_config or TrainConfig()
    model = model or init_model()
    usable = dataset.usable(train_config.seq_len)
    if len(usable) == 0:
        raise ValueError(
            f"No training utterance has at least {train_config.seq_len} frames."
        )
    rng = np.random.default_rng(train_config.seed)
    optimizer = Adam.from_config(train_config)
    result = TrainResult(model, [])
    logger.info(
        f"Training {model!r} on {len(usable)} utterances "
        f"for {train_config.max_updates} updates."
    )
    with threadpool_limits(limits=train_config.threads):
        for step in range(1, train_config.max_updates + 1):
            x, y = usable.sample_batch(
                rng, train_config.batch_size, train_config.seq_len
            )
            result.losses.append(train_step(model, optimizer, x, y, step))

            if step % train_config.log_every == 0:
                recent = result.losses[-train_config.log_every :]
                logger.info(f"step {step}: loss {np.mean(recent):.4f}")
            validate = val_dataset is not None and train_config.val_every
            if validate and step % train_config.val_every == 0:
                result.val_losses[step] = evaluate_loss(model, val_dataset)
                value = result.val_losses[step]
                logger.info(f"step {step}: validation loss {value:.4f}")
            if (
                checkpoint_dir is not None
                and train_config.checkpoint_every
                and step % train_config.checkpoint_every == 0
            ):
                path = Path(checkpoint_dir) / f"checkpoint_{step:06d}.nfckpt"
                save_checkpoint(model, path)
                result.checkpoints.append(path)
    return result


def write_loss_curve(
    path: str | Path,
    losses: Sequence[float],
    val_losses: dict[int, float] | None = None,
):
    """Writes `step,loss,val_loss` rows; val_loss is empty where not measured."""
    val_losses = val_losses or {}
    with Path(path).open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss", "val_loss"])
        for step, value in enumerate(losses, start=1):
            val = val_losses.get(step)
            writer.writerow(
                [step, format_float(value), "" if val is None else format_float(val)]
            )


def read_loss_curve(path: str | Path) -> tuple[list[float], dict[int, float]]:
    """Inverse of `write_loss_curve`."""
    losses: list[float] = []
    val_losses: dict[int, float] = {}
    with Path(path).open(newline="") as f:
        for row in csv.DictReader(f):
            losses.append(float(row["loss"]))
            if row["val_loss"]:
                val_losses[int(row["step"])] = float(row["val_loss"])
    return losses, val_losses


def predict_mel(model: MapperModel, params: SpeechParams) -> MelSpectrogram:
    """Predicts the de-normalized log-mel of a parameter sequence.

    Args:
        model: A model carrying normalization stats with mel statistics.
        params: The (possibly manipulated) parameters.

    Returns:
        MelSpectrogram: The predicted mel on the parameters' grid.
    """
    if model.stats is None:
        raise ConfigError("The model carries no normalization stats.")
    if len(params) == 0:
        return MelSpectrogram(np.zeros((0, model.config.mel_channels)), params.grid)
    z_mel = forward(model, normalize(params, model.stats))
    return denormalize_mel(z_mel.astype(np.float64), model.stats, params.grid)


def _manifest(model: MapperModel, payload: bytes) -> dict[str, Any]:
    return {
        "format_version": CHECKPOINT_VERSION,
        "config": model.config.model_dump(mode="json"),
        "frame": model.frame.model_dump(mode="json"),
        "mel": model.mel.model_dump(mode="json"),
        "tensors": [
            {"name": name, "shape": list(tensor.shape)}
            for name, tensor in model.weights.items()
        ],
        "stats": model.stats.to_dict() if model.stats is not None else None,
        "payload_bytes": len(payload),
        "payload_crc32": zlib.crc32(payload),
    }


def save_checkpoint(model: MapperModel, path: str | Path) -> Path:
    """Writes an NFCKPT1 checkpoint.

    The file holds the magic bytes, a u32 little-endian manifest length, the
    JSON manifest and the float32 little-endian tensors in manifest order.

    Args:
        model: The model.
        path: Destination path; parent directories are created.

    Returns:
        Path: The written path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = b"".join(
        np.ascontiguousarray(tensor, dtype="<f4").tobytes()
        for tensor in model.weights.values()
    )
    manifest = json.dumps(_manifest(model, payload)).encode("utf-8")
    with path.open("wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_HEADER.pack(len(manifest)))
        f.write(manifest)
        f.write(payload)
    logger.debug(f"Saved checkpoint {path} ({len(payload)} payload bytes).")
    return path


def load_checkpoint(
    path: str | Path, expected: MapperConfig | None = None
) -> MapperModel:
    """Reads and validates an NFCKPT1 checkpoint.

    Args:
        path: Path of the checkpoint.
        expected: Architecture the checkpoint must declare, if given; the
            initialization seed is not compared.

    Returns:
        MapperModel: The model with float32 weights.

    Raises:
        FileNotFoundError: If the file does not exist.
        CheckpointError: On bad magic, version mismatch, truncation,
            checksum failure or mismatched tensor shapes.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"No such checkpoint: '{path}'.")
    data = path.read_bytes()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not an NFCKPT1 checkpoint (bad magic).")
    start = len(CHECKPOINT_MAGIC) + _HEADER.size
    if len(data) < start:
        raise CheckpointError(f"{path} is truncated inside the header.")
    (manifest_length,) = _HEADER.unpack_from(data, len(CHECKPOINT_MAGIC))
    if len(data) < start + manifest_length:
        raise CheckpointError(f"{path} is truncated inside the manifest.")
    try:
        manifest = json.loads(data[start : start + manifest_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path} has an unreadable manifest: {exc}")
    if not isinstance(manifest, dict):
        raise CheckpointError(f"{path} has a manifest that is not a JSON object.")

    version = manifest.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"Checkpoint format version {version} is not supported; "
            f"expected {CHECKPOINT_VERSION}."
        )
    absent = [key for key in _MANIFEST_KEYS if key not in manifest]
    if absent:
        raise CheckpointError(f"{path} manifest lacks {', '.join(absent)}.")
    payload = data[start + manifest_length :]
    if len(payload) != manifest["payload_bytes"]:
        raise CheckpointError(
            f"{path} is truncated: payload has {len(payload)} bytes; "
            f"manifest declares {manifest['payload_bytes']}."
        )
    if zlib.crc32(payload) != manifest["payload_crc32"]:
        raise CheckpointError(f"{path} failed its payload checksum.")

    try:
        config = MapperConfig.model_validate(manifest["config"])
        frame = FrameConfig.model_validate(manifest["frame"])
        mel = MelConfig.model_validate(manifest["mel"])
    except ValueError as exc:
        raise CheckpointError(f"{path} declares an invalid configuration: {exc}")
    if expected is not None and expected.model_copy(
        update={"seed": config.seed}
    ) != config:
        raise CheckpointError(
            f"{path} was trained with a different architecture than expected."
        )

    shapes = weight_shapes(config)
    try:
        names = [t["name"] for t in manifest["tensors"]]
        declared = {t["name"]: tuple(t["shape"]) for t in manifest["tensors"]}
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{path} has a malformed tensor table: {exc!r}")
    if declared != shapes or names != list(shapes):
        raise CheckpointError(
            f"{path} declares tensor shapes that do not match its configuration."
        )
    values = np.frombuffer(payload, dtype="<f4")
    total = sum(int(np.prod(shape)) for shape in shapes.values())
    if len(values) != total:
        raise CheckpointError(
            f"{path} payload holds {len(values)} values; shapes need {total}."
        )
    weights = {}
    offset = 0
    for name, shape in shapes.items():
        size = int(np.prod(shape))
        weights[name] = values[offset : offset + size].reshape(shape).astype(np.float32)
        offset += size

    stats = None
    if manifest.get("stats") is not None:
        stats = NormStats.from_dict(manifest["stats"])
    return MapperModel(config, weights, stats, frame, mel)
