"""Encoder-decoder segmentation network with a flat (DSS) or grouped (GSS) head.

Trunk: per level a conv / instance norm / ReLU block followed by 2x2 max
pooling, a bottleneck block, then per level nearest upsampling, a block, the
encoder skip concatenated along the channels and a fusing block. The head is
a 1x1 convolution with bias producing N (flat) or A (grouped) channels; it is
zero-initialized so untrained models predict uniform distributions.

Checkpoint file layout (little endian)::

    "GSSM"  u32 metadata length  metadata (UTF-8 JSON, sorted keys)
    u32 block count
    per block: u16 name length, name, u8 ndim, u32 dims..., f32 values
"""

from typing import Optional
import hashlib
import json
import logging
import os
import struct
import numpy as np
from .config import parse_stanzas, read_text, to_bool, to_int
from .errors import CacheError, ConfigError, FormatError, SchemaError, ShapeError
from .head import flat_softmax, grouped_softmax
from .layers import conv2d_backward, conv2d_forward, he_uniform, instance_norm_backward, instance_norm_forward, maxpool_backward, maxpool_forward, relu_backward, relu_forward, upsample_backward, upsample_forward
from .random_dist import derive_rng
from .schema import GroupSchema, parse_schema


__title__ = "groupseg"
__version__ = "1.0"
__author__ = "groupseg developers"
__copyright__ = """
Copyright 2026 groupseg developers

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
__license__ = "Apache 2.0"


logger = logging.getLogger(__name__)


CHECKPOINT_MAGIC: bytes = b"GSSM"
MODE_FLAT: str = "dss"
MODE_GROUPED: str = "gss"
MODES: tuple = (MODE_FLAT, MODE_GROUPED)
_DTYPES: dict = {"float32": np.float32, "float64": np.float64}


class ModelConfig:
    """Architecture of the network (immutable)."""
    __slots__ = ("__in_channels", "__width", "__levels", "__kernel", "__mode", "__pre_sigmoid", "__dtype")

    def __init__(self, in_channels: int = 1, width: int = 16, levels: int = 3, kernel: int = 3, mode: str = MODE_GROUPED, pre_sigmoid: bool = False, dtype: str = "float32") -> None:
        """Architecture of the network.

        Args:
            in_channels (int, optional): Input channels (1 = depth). Defaults to 1.
            width (int, optional): Channels of the first level; doubled per level. Defaults to 16.
            levels (int, optional): Number of resolution halvings. Defaults to 3.
            kernel (int, optional): Odd convolution kernel size. Defaults to 3.
            mode (str, optional): Head mode "dss" (flat, N channels) or "gss" (grouped, A channels). Defaults to "gss".
            pre_sigmoid (bool, optional): Sigmoid before the group-wise softmax. Defaults to False.
            dtype (str, optional): "float32" (fast path) or "float64" (verification path). Defaults to "float32".

        Raises:
            ConfigError: Invalid value
        """
        if in_channels < 1: raise ConfigError("in_channels must be at least 1, got " + str(in_channels))
        if width < 1: raise ConfigError("width must be at least 1, got " + str(width))
        if levels < 0: raise ConfigError("levels must not be negative, got " + str(levels))
        if kernel < 1 or kernel % 2 != 1: raise ConfigError("kernel must be odd and positive, got " + str(kernel))
        if mode not in MODES: raise ConfigError("mode must be one of " + ", ".join(MODES) + ", got '" + str(mode) + "'")
        if dtype not in _DTYPES: raise ConfigError("dtype must be one of " + ", ".join(_DTYPES) + ", got '" + str(dtype) + "'")
        self.__in_channels: int = int(in_channels)
        self.__width: int = int(width)
        self.__levels: int = int(levels)
        self.__kernel: int = int(kernel)
        self.__mode: str = mode
        self.__pre_sigmoid: bool = bool(pre_sigmoid)
        self.__dtype: str = dtype

    @property
    def in_channels(self) -> int:
        return self.__in_channels

    @property
    def width(self) -> int:
        return self.__width

    @property
    def levels(self) -> int:
        return self.__levels

    @property
    def kernel(self) -> int:
        return self.__kernel

    @property
    def mode(self) -> str:
        return self.__mode

    @property
    def pre_sigmoid(self) -> bool:
        return self.__pre_sigmoid

    @property
    def dtype(self) -> str:
        return self.__dtype

    @property
    def numpy_dtype(self):
        return _DTYPES[self.__dtype]

    def replace(self, **changes) -> "ModelConfig":
        """Copy with some fields exchanged (keyword names as in the constructor)."""
        values: dict = {"in_channels": self.__in_channels, "width": self.__width, "levels": self.__levels, "kernel": self.__kernel, "mode": self.__mode, "pre_sigmoid": self.__pre_sigmoid, "dtype": self.__dtype}
        values.update(changes)
        return ModelConfig(**values)

    def head_channels(self, schema: GroupSchema) -> int:
        """Output channels: N for the flat head, activation_count for the grouped head.

        Args:
            schema (GroupSchema): Schema

        Returns:
            int: Number of head channels
        """
        return schema.N if self.__mode == MODE_FLAT else schema.activation_count

    def to_config(self) -> str:
        return "in_channels {}\nwidth {}\nlevels {}\nkernel {}\nmode {}\npre_sigmoid {}\ndtype {}\n".format(self.__in_channels, self.__width, self.__levels, self.__kernel, self.__mode, "true" if self.__pre_sigmoid else "false", self.__dtype)

    @property
    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_config().encode("utf-8")).hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelConfig): return False
        return self.to_config() == other.to_config()

    def __hash__(self) -> int:
        return hash(self.to_config())

    def __repr__(self) -> str:
        return "ModelConfig(" + ", ".join(line.replace(" ", "=") for line in self.to_config().splitlines()) + ")"


def parse_model_config(text: str, path: Optional[str] = None) -> ModelConfig:
    """Parses a model configuration (``key value`` lines, all keys optional).

    Args:
        text (str): Configuration text
        path (Optional[str], optional): File name for error messages. Defaults to None.

    Raises:
        ConfigError: Unknown key or invalid value

    Returns:
        ModelConfig: Model configuration
    """
    parsed = parse_stanzas(text, ("in_channels", "width", "levels", "kernel", "mode", "pre_sigmoid", "dtype"), stanza_key="", path=path)
    values: dict = {}
    for key in ("in_channels", "width", "levels", "kernel"):
        if parsed.has(key): values[key] = to_int(parsed.args(key, 1)[0], path, parsed.line(key))
    for key in ("mode", "dtype"):
        if parsed.has(key): values[key] = parsed.args(key, 1)[0]
    if parsed.has("pre_sigmoid"): values["pre_sigmoid"] = to_bool(parsed.args("pre_sigmoid", 1)[0], path, parsed.line("pre_sigmoid"))
    try:
        return ModelConfig(**values)
    except ConfigError as e:
        raise ConfigError(str(e), path) from None


def load_model_config(path: str) -> ModelConfig:
    return parse_model_config(read_text(path), str(path))


class Model:
    """Network parameters plus the activation cache of the last forward pass."""
    __slots__ = ("__config", "__schema", "__params", "__cache")

    def __init__(self, config: ModelConfig, schema: GroupSchema, seed: int = 0) -> None:
        """Network with freshly initialized parameters.

        Args:
            config (ModelConfig): Architecture
            schema (GroupSchema): Schema defining the head channels
            seed (int, optional): Initialization seed. Defaults to 0.
        """
        self.__config: ModelConfig = config
        self.__schema: GroupSchema = schema
        self.__cache: Optional[dict] = None
        rng: np.random.Generator = derive_rng(seed, 0x1A17)
        dtype = config.numpy_dtype
        params: dict = {}
        for name, shape in self.parameter_shapes().items():
            if name == "head.w" or name == "head.b":
                params[name] = np.zeros(shape, dtype=dtype)
            else:
                params[name] = he_uniform(rng, shape, dtype)
        self.__params: dict = params

    @property
    def config(self) -> ModelConfig:
        return self.__config

    @property
    def schema(self) -> GroupSchema:
        return self.__schema

    @property
    def mode(self) -> str:
        return self.__config.mode

    @property
    def params(self) -> dict:
        """Parameter blocks in a fixed order (name -> array, modified in place by the optimizer).

        Returns:
            dict[str, np.ndarray]: Parameter blocks
        """
        return self.__params

    @property
    def head_channels(self) -> int:
        return self.__config.head_channels(self.__schema)

    def channels(self, level: int) -> int:
        return self.__config.width * 2**level

    def parameter_shapes(self) -> dict:
        """Shapes of all parameter blocks; a pure function of config and schema.

        Returns:
            dict[str, tuple]: Block name -> shape
        """
        config: ModelConfig = self.__config
        k: int = config.kernel
        shapes: dict = {}
        previous: int = config.in_channels
        for level in range(config.levels):
            shapes["enc" + str(level)] = (k, k, previous, self.channels(level))
            previous = self.channels(level)
        shapes["bottleneck"] = (k, k, previous, self.channels(config.levels))
        for level in reversed(range(config.levels)):
            shapes["up" + str(level)] = (k, k, self.channels(level + 1), self.channels(level))
            shapes["fuse" + str(level)] = (k, k, 2 * self.channels(level), self.channels(level))
        shapes["head.w"] = (1, 1, self.channels(0), self.head_channels)
        shapes["head.b"] = (self.head_channels,)
        return shapes

    @property
    def parameter_count(self) -> int:
        return int(sum(int(np.prod(shape)) for shape in self.parameter_shapes().values()))

    @property
    def fingerprint(self) -> str:
        """SHA-256 over model config and schema fingerprint.

        Returns:
            str: Hex digest
        """
        return hashlib.sha256((self.__config.to_config() + self.__schema.fingerprint).encode("utf-8")).hexdigest()

    def _prepare_input(self, depth: np.ndarray) -> np.ndarray:
        x: np.ndarray = np.asarray(depth, dtype=self.__config.numpy_dtype)
        if x.ndim == 2: x = x[None]
        if x.ndim == 3: x = x[..., None]
        if x.ndim != 4 or x.shape[-1] != self.__config.in_channels:
            raise ShapeError("input shape " + str(np.shape(depth)) + " does not fit " + str(self.__config.in_channels) + " input channel(s)")
        factor: int = 2**self.__config.levels
        if x.shape[1] % factor or x.shape[2] % factor:
            raise ShapeError("input size " + str(x.shape[1:3]) + " is not divisible by " + str(factor))
        return x

    def _block_forward(self, name: str, x: np.ndarray, caches: dict) -> np.ndarray:
        y, conv_cache = conv2d_forward(x, self.__params[name])
        y, norm_cache = instance_norm_forward(y)
        y, relu_cache = relu_forward(y)
        caches[name] = (conv_cache, norm_cache, relu_cache)
        return y

    def _block_backward(self, name: str, grad: np.ndarray, caches: dict, grads: dict) -> np.ndarray:
        conv_cache, norm_cache, relu_cache = caches[name]
        grad = instance_norm_backward(relu_backward(grad, relu_cache), norm_cache)
        dx, dw, _ = conv2d_backward(grad, conv_cache)
        grads[name] = dw
        return dx

    def forward(self, depth: np.ndarray) -> np.ndarray:
        """Computes the logits and caches the activations for backward.

        Args:
            depth (np.ndarray): (H, W), (B, H, W) or (B, H, W, C) input

        Raises:
            ShapeError: Input size not divisible by 2^levels or wrong channel count

        Returns:
            np.ndarray: (B, H, W, head channels) logits
        """
        x: np.ndarray = self._prepare_input(depth)
        levels: int = self.__config.levels
        caches: dict = {}
        skips: list = []
        pools: list = []
        h: np.ndarray = x
        for level in range(levels):
            h = self._block_forward("enc" + str(level), h, caches)
            skips.append(h)
            h, pool_cache = maxpool_forward(h)
            pools.append(pool_cache)
        h = self._block_forward("bottleneck", h, caches)
        for level in reversed(range(levels)):
            h = self._block_forward("up" + str(level), upsample_forward(h), caches)
            h = np.concatenate([h, skips[level]], axis=-1)
            h = self._block_forward("fuse" + str(level), h, caches)
        logits, head_cache = conv2d_forward(h, self.__params["head.w"], self.__params["head.b"])
        caches["head"] = head_cache
        caches["pools"] = pools
        caches["shape"] = logits.shape
        self.__cache = caches
        return logits

    def backward(self, grad_logits: np.ndarray) -> dict:
        """Parameter gradients for an upstream gradient of the logits of the last forward call.

        Args:
            grad_logits (np.ndarray): Gradient with the shape of the last logits

        Raises:
            CacheError: No forward pass was run or the gradient does not belong to it

        Returns:
            dict[str, np.ndarray]: Gradients in parameter order
        """
        caches: Optional[dict] = self.__cache
        if caches is None: raise CacheError("backward called without a preceding forward pass")
        grad: np.ndarray = np.asarray(grad_logits, dtype=self.__config.numpy_dtype)
        if grad.shape != caches["shape"]: raise CacheError("gradient shape " + str(grad.shape) + " does not match the cached forward pass " + str(caches["shape"]))
        levels: int = self.__config.levels
        grads: dict = {}
        g, grads["head.w"], grads["head.b"] = conv2d_backward(grad, caches["head"])
        skip_grads: list = [None] * levels
        for level in range(levels):
            g = self._block_backward("fuse" + str(level), g, caches, grads)
            split: int = self.channels(level)
            skip_grads[level] = g[..., split:]
            g = upsample_backward(self._block_backward("up" + str(level), g[..., :split], caches, grads))
        g = self._block_backward("bottleneck", g, caches, grads)
        for level in reversed(range(levels)):
            g = maxpool_backward(g, caches["pools"][level]) + skip_grads[level]
            g = self._block_backward("enc" + str(level), g, caches, grads)
        return {name: grads[name] for name in self.__params}

    def clear_cache(self) -> None:
        self.__cache = None

    def predict(self, depth: np.ndarray):
        """Forward pass followed by the head's softmax (cache is not kept).

        Args:
            depth (np.ndarray): Input as for forward

        Returns:
            Union[GroupedPrediction, np.ndarray]: Grouped prediction or flat posterior (B, H, W, N)
        """
        logits: np.ndarray = self.forward(depth).astype(np.float64)
        self.__cache = None
        if self.mode == MODE_FLAT: return flat_softmax(logits)
        return grouped_softmax(logits, self.__schema, self.__config.pre_sigmoid)


def forward(model: Model, depth: np.ndarray) -> np.ndarray:
    return model.forward(depth)


def backward(model: Model, grad_logits: np.ndarray) -> dict:
    return model.backward(grad_logits)


_U32 = struct.Struct("<I")


class Checkpoint:
    """Contents of a checkpoint file: the model, extra named blocks (optimizer state) and metadata."""
    __slots__ = ("__model", "__blocks", "__info")

    def __init__(self, model: Model, blocks: dict, info: dict) -> None:
        self.__model: Model = model
        self.__blocks: dict = blocks
        self.__info: dict = info

    @property
    def model(self) -> Model:
        return self.__model

    @property
    def blocks(self) -> dict:
        return self.__blocks

    @property
    def info(self) -> dict:
        return self.__info


def checkpoint_to_bytes(model: Model, blocks: Optional[dict] = None, info: Optional[dict] = None) -> bytes:
    """Serializes a model with optional extra blocks.

    Args:
        model (Model): Model
        blocks (Optional[dict], optional): Extra named arrays (e.g. optimizer moments). Defaults to None.
        info (Optional[dict], optional): Additional JSON metadata (epoch, step, ...). Defaults to None.

    Returns:
        bytes: File content
    """
    metadata: dict = dict(info) if info else {}
    metadata.update({"model_config": model.config.to_config(), "schema": model.schema.to_config(), "schema_fingerprint": model.schema.fingerprint, "fingerprint": model.fingerprint, "mode": model.mode})
    encoded: bytes = json.dumps(metadata, sort_keys=True).encode("utf-8")
    all_blocks: dict = dict(model.params)
    if blocks: all_blocks.update(blocks)
    parts: list = [CHECKPOINT_MAGIC, _U32.pack(len(encoded)), encoded, _U32.pack(len(all_blocks))]
    for name, array in all_blocks.items():
        raw: bytes = name.encode("utf-8")
        parts.append(struct.pack("<HB", len(raw), array.ndim) + raw)
        parts.append(struct.pack("<" + "I" * array.ndim, *array.shape))
        parts.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(parts)


def checkpoint_from_bytes(data: bytes, name: str = "<bytes>") -> Checkpoint:
    """Parses a checkpoint.

    Args:
        data (bytes): File content
        name (str, optional): Name for error messages. Defaults to "<bytes>".

    Raises:
        FormatError: Bad magic, truncated content or missing parameter blocks

    Returns:
        Checkpoint: Model, extra blocks and metadata
    """
    if data[:4] != CHECKPOINT_MAGIC: raise FormatError(name + ": bad magic " + repr(data[:4]) + ", expected " + repr(CHECKPOINT_MAGIC))
    try:
        offset: int = 4
        (length,) = _U32.unpack_from(data, offset)
        offset += 4
        metadata: dict = json.loads(data[offset:offset + length].decode("utf-8"))
        offset += length
        (count,) = _U32.unpack_from(data, offset)
        offset += 4
        arrays: dict = {}
        for _ in range(count):
            name_length, ndim = struct.unpack_from("<HB", data, offset)
            offset += 3
            block_name: str = data[offset:offset + name_length].decode("utf-8")
            offset += name_length
            shape: tuple = struct.unpack_from("<" + "I" * ndim, data, offset)
            offset += 4 * ndim
            size: int = int(np.prod(shape))
            if offset + 4 * size > len(data): raise FormatError(name + ": truncated block '" + block_name + "'")
            arrays[block_name] = np.frombuffer(data, dtype="<f4", count=size, offset=offset).reshape(shape).copy()
            offset += 4 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(name + ": corrupt checkpoint (" + str(e) + ")") from None
    if offset != len(data): raise FormatError(name + ": " + str(len(data) - offset) + " trailing bytes")

    config: ModelConfig = parse_model_config(metadata["model_config"], name)
    schema: GroupSchema = parse_schema(metadata["schema"], name)
    model: Model = Model(config, schema)
    for block_name, shape in model.parameter_shapes().items():
        if block_name not in arrays: raise FormatError(name + ": missing parameter block '" + block_name + "'")
        if arrays[block_name].shape != tuple(shape): raise FormatError(name + ": block '" + block_name + "' has shape " + str(arrays[block_name].shape) + ", expected " + str(tuple(shape)))
        model.params[block_name] = arrays.pop(block_name).astype(config.numpy_dtype)
    return Checkpoint(model, arrays, metadata)


def write_checkpoint(path: str, model: Model, blocks: Optional[dict] = None, info: Optional[dict] = None) -> None:
    """Writes a checkpoint atomically (temporary file, then rename).

    Args:
        path (str): Target path
        model (Model): Model
        blocks (Optional[dict], optional): Extra named arrays. Defaults to None.
        info (Optional[dict], optional): Additional metadata. Defaults to None.
    """
    tmp: str = str(path) + ".tmp"
    with open(tmp, "wb") as file:
        file.write(checkpoint_to_bytes(model, blocks, info))
    os.replace(tmp, path)
    logger.debug("Checkpoint written: %s", path)


def read_checkpoint(path: str, schema: Optional[GroupSchema] = None) -> Checkpoint:
    """Reads a checkpoint.

    Args:
        path (str): Checkpoint path
        schema (Optional[GroupSchema], optional): Expected schema. Defaults to None (no check).

    Raises:
        FormatError: Corrupt file
        SchemaError: Schema fingerprint differs from the expected schema

    Returns:
        Checkpoint: Checkpoint content
    """
    try:
        with open(path, "rb") as file:
            data: bytes = file.read()
    except OSError as e:
        raise FormatError("cannot read checkpoint " + str(path) + ": " + str(e.strerror)) from None
    checkpoint: Checkpoint = checkpoint_from_bytes(data, str(path))
    if schema is not None and checkpoint.model.schema.fingerprint != schema.fingerprint:
        raise SchemaError("checkpoint " + str(path) + " was trained on schema " + checkpoint.model.schema.fingerprint[:12] + ", dataset uses " + schema.fingerprint[:12])
    return checkpoint
