"""Optimizer, learning rate schedule, training loop and inference."""

from typing import Iterable, Optional
import json
import logging
import os
from time import perf_counter
import numpy as np
import pandas as pd
from .config import parse_stanzas, read_text, to_float, to_int
from .dataset import Sample, regions_from_sample
from .errors import ConfigError, DivergenceError, NonFiniteError, SchemaError, ShapeError
from .head import DEFAULT_LAMBDA, GroupedTargets, LossValue, loss_ce, loss_grouped, uniform_loss_ce, uniform_loss_grouped
from .metrics import EvalReport, evaluate_predictions
from .net import MODE_FLAT, Model, ModelConfig, read_checkpoint, write_checkpoint
from .random_dist import derive_rng
from .schema import GroupSchema
from .statistics import RecordDiscrete


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


CHECKPOINT_NAME: str = "checkpoint.gssm"
HISTORY_NAME: str = "history.jsonl"
_TRAIN_KEYS: tuple = ("learning_rate", "lr_decay", "decay_every", "epochs", "batch_size", "weight_decay", "beta1", "beta2", "adam_eps", "lambda", "seed")


class TrainConfig:
    """Optimizer and schedule settings (immutable).

    Full-scale runs use batch size 25 and 100 epochs. The defaults are desk scale.
    """
    __slots__ = ("__learning_rate", "__lr_decay", "__decay_every", "__epochs", "__batch_size", "__weight_decay", "__beta1", "__beta2", "__adam_eps", "__lam", "__seed")

    def __init__(self, learning_rate: float = 1e-3, lr_decay: float = 0.1, decay_every: int = 10, epochs: int = 30, batch_size: int = 8, weight_decay: float = 1e-5, beta1: float = 0.9, beta2: float = 0.999, adam_eps: float = 1e-8, lam: float = DEFAULT_LAMBDA, seed: int = 0) -> None:
        """Optimizer and schedule settings.

        Args:
            learning_rate (float, optional): Initial learning rate. Defaults to 1e-3.
            lr_decay (float, optional): Factor applied every decay_every epochs. Defaults to 0.1.
            decay_every (int, optional): Epochs per learning rate step. Defaults to 10.
            epochs (int, optional): Number of epochs. Defaults to 30.
            batch_size (int, optional): Samples per mini-batch. Defaults to 8.
            weight_decay (float, optional): Decoupled weight decay. Defaults to 1e-5.
            beta1 (float, optional): Adam first moment decay. Defaults to 0.9.
            beta2 (float, optional): Adam second moment decay. Defaults to 0.999.
            adam_eps (float, optional): Adam denominator offset. Defaults to 1e-8.
            lam (float, optional): Weight of occluded and void terms of the grouped loss. Defaults to 0.1.
            seed (int, optional): Seed of initialization and shuffling. Defaults to 0.

        Raises:
            ConfigError: Invalid value
        """
        if learning_rate <= 0: raise ConfigError("learning_rate must be positive, got " + str(learning_rate))
        if not 0 < lr_decay <= 1: raise ConfigError("lr_decay must be in (0, 1], got " + str(lr_decay))
        if decay_every < 1: raise ConfigError("decay_every must be at least 1, got " + str(decay_every))
        if epochs < 0: raise ConfigError("epochs must not be negative, got " + str(epochs))
        if batch_size < 1: raise ConfigError("batch_size must be at least 1, got " + str(batch_size))
        if weight_decay < 0: raise ConfigError("weight_decay must not be negative, got " + str(weight_decay))
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1): raise ConfigError("Adam betas must be in [0, 1), got " + str((beta1, beta2)))
        if adam_eps <= 0: raise ConfigError("adam_eps must be positive, got " + str(adam_eps))
        if lam < 0: raise ConfigError("lambda must not be negative, got " + str(lam))
        self.__learning_rate: float = float(learning_rate)
        self.__lr_decay: float = float(lr_decay)
        self.__decay_every: int = int(decay_every)
        self.__epochs: int = int(epochs)
        self.__batch_size: int = int(batch_size)
        self.__weight_decay: float = float(weight_decay)
        self.__beta1: float = float(beta1)
        self.__beta2: float = float(beta2)
        self.__adam_eps: float = float(adam_eps)
        self.__lam: float = float(lam)
        self.__seed: int = int(seed)

    @property
    def learning_rate(self) -> float:
        return self.__learning_rate

    @property
    def lr_decay(self) -> float:
        return self.__lr_decay

    @property
    def decay_every(self) -> int:
        return self.__decay_every

    @property
    def epochs(self) -> int:
        return self.__epochs

    @property
    def batch_size(self) -> int:
        return self.__batch_size

    @property
    def weight_decay(self) -> float:
        return self.__weight_decay

    @property
    def beta1(self) -> float:
        return self.__beta1

    @property
    def beta2(self) -> float:
        return self.__beta2

    @property
    def adam_eps(self) -> float:
        return self.__adam_eps

    @property
    def lam(self) -> float:
        return self.__lam

    @property
    def seed(self) -> int:
        return self.__seed

    def lr_at(self, epoch: int) -> float:
        """Staircase schedule: initial rate times lr_decay^(epoch // decay_every).

        Args:
            epoch (int): 0-based epoch

        Returns:
            float: Learning rate of the epoch
        """
        return self.__learning_rate * self.__lr_decay**(epoch // self.__decay_every)

    def replace(self, **changes) -> "TrainConfig":
        values: dict = {"learning_rate": self.__learning_rate, "lr_decay": self.__lr_decay, "decay_every": self.__decay_every, "epochs": self.__epochs, "batch_size": self.__batch_size, "weight_decay": self.__weight_decay, "beta1": self.__beta1, "beta2": self.__beta2, "adam_eps": self.__adam_eps, "lam": self.__lam, "seed": self.__seed}
        values.update(changes)
        return TrainConfig(**values)

    def to_config(self) -> str:
        values: tuple = (self.__learning_rate, self.__lr_decay, self.__decay_every, self.__epochs, self.__batch_size, self.__weight_decay, self.__beta1, self.__beta2, self.__adam_eps, self.__lam, self.__seed)
        return "".join(key + " " + repr(value) + "\n" for key, value in zip(_TRAIN_KEYS, values))

    def __eq__(self, other) -> bool:
        if not isinstance(other, TrainConfig): return False
        return self.to_config() == other.to_config()

    def __hash__(self) -> int:
        return hash(self.to_config())


def parse_train_config(text: str, path: Optional[str] = None) -> TrainConfig:
    """Parses a training configuration (``key value`` lines, all keys optional).

    Args:
        text (str): Configuration text
        path (Optional[str], optional): File name for error messages. Defaults to None.

    Raises:
        ConfigError: Unknown key or invalid value

    Returns:
        TrainConfig: Training configuration
    """
    parsed = parse_stanzas(text, _TRAIN_KEYS, stanza_key="", path=path)
    values: dict = {}
    for key in _TRAIN_KEYS:
        if not parsed.has(key): continue
        token: str = parsed.args(key, 1)[0]
        name: str = "lam" if key == "lambda" else key
        if key in ("decay_every", "epochs", "batch_size", "seed"):
            values[name] = to_int(token, path, parsed.line(key))
        else:
            values[name] = to_float(token, path, parsed.line(key))
    try:
        return TrainConfig(**values)
    except ConfigError as e:
        raise ConfigError(str(e), path) from None


def load_train_config(path: str) -> TrainConfig:
    return parse_train_config(read_text(path), str(path))


class AdamState:
    """First and second moment estimates per parameter block and the number of steps taken."""
    __slots__ = ("__m", "__v", "__step")

    def __init__(self, model: Model) -> None:
        self.__m: dict = {name: np.zeros_like(p) for name, p in model.params.items()}
        self.__v: dict = {name: np.zeros_like(p) for name, p in model.params.items()}
        self.__step: int = 0

    @property
    def m(self) -> dict:
        return self.__m

    @property
    def v(self) -> dict:
        return self.__v

    @property
    def step(self) -> int:
        return self.__step

    @step.setter
    def step(self, value: int) -> None:
        self.__step = int(value)

    def to_blocks(self) -> dict:
        """Moments as checkpoint blocks (``adam.m/<name>``, ``adam.v/<name>``)."""
        blocks: dict = {"adam.m/" + name: value for name, value in self.__m.items()}
        blocks.update({"adam.v/" + name: value for name, value in self.__v.items()})
        return blocks

    def load_blocks(self, blocks: dict, step: int) -> None:
        for name in self.__m:
            if "adam.m/" + name in blocks: self.__m[name] = blocks["adam.m/" + name].astype(self.__m[name].dtype)
            if "adam.v/" + name in blocks: self.__v[name] = blocks["adam.v/" + name].astype(self.__v[name].dtype)
        self.__step = int(step)


def adam_step(model: Model, grads: dict, config: TrainConfig, state: AdamState, lr: Optional[float] = None) -> Model:
    """One Adam update with decoupled weight decay (parameters modified in place).

    Args:
        model (Model): Model
        grads (dict[str, np.ndarray]): Gradients per parameter block
        config (TrainConfig): Optimizer settings
        state (AdamState): Moments, advanced by one step
        lr (Optional[float], optional): Learning rate; None uses the initial rate. Defaults to None.

    Raises:
        ShapeError: Gradient shape differs from the parameter block
        DivergenceError: Non-finite gradient

    Returns:
        Model: The updated model
    """
    if lr is None: lr = config.learning_rate
    for name, grad in grads.items():
        if grad.shape != model.params[name].shape: raise ShapeError("gradient of '" + name + "' has shape " + str(grad.shape) + ", parameter has " + str(model.params[name].shape))
        if not np.all(np.isfinite(grad)): raise DivergenceError("non-finite gradient in block '" + name + "' at step " + str(state.step + 1))
    state.step = state.step + 1
    t: int = state.step
    correction1: float = 1 - config.beta1**t
    correction2: float = 1 - config.beta2**t
    for name, grad in grads.items():
        param: np.ndarray = model.params[name]
        m: np.ndarray = state.m[name]
        v: np.ndarray = state.v[name]
        m *= config.beta1
        m += (1 - config.beta1) * grad
        v *= config.beta2
        v += (1 - config.beta2) * grad * grad
        param -= (lr * ((m / correction1) / (np.sqrt(v / correction2) + config.adam_eps) + config.weight_decay * param)).astype(param.dtype)
    return model


def _batch_targets(samples: list, schema: GroupSchema, mode: str, lam: float) -> list:
    """Per-sample loss targets: visible label maps (flat) or GroupedTargets (grouped)."""
    targets: list = []
    for sample in samples:
        regions = regions_from_sample(sample, schema)
        targets.append(regions.visible_labels() if mode == MODE_FLAT else GroupedTargets.from_regions(regions, schema, lam))
    return targets


def _loss(model: Model, logits: np.ndarray, targets: list) -> LossValue:
    if model.mode == MODE_FLAT: return loss_ce(logits, np.stack(targets), model.schema)
    return loss_grouped(logits, GroupedTargets.stack(targets), model.schema, pre_sigmoid=model.config.pre_sigmoid)


def uniform_loss(samples: list, schema: GroupSchema, mode: str, lam: float = DEFAULT_LAMBDA) -> float:
    """Loss of a uniform prediction averaged over the samples (equal-size images).

    Args:
        samples (list[Sample]): Samples
        schema (GroupSchema): Schema
        mode (str): "dss" or "gss"
        lam (float, optional): Weight of occluded and void terms. Defaults to 0.1.

    Returns:
        float: Expected loss of a freshly initialized model
    """
    if mode == MODE_FLAT: return uniform_loss_ce(schema)
    targets: list = _batch_targets(samples, schema, mode, lam)
    return uniform_loss_grouped(GroupedTargets.stack(targets), schema)


def infer(model: Model, sample: Sample, schema: Optional[GroupSchema] = None):
    """Prediction of one sample.

    Args:
        model (Model): Model
        sample (Sample): Sample
        schema (Optional[GroupSchema], optional): Expected schema. Defaults to None (model schema).

    Raises:
        SchemaError: Schema differs from the model's schema or sample does not fit it

    Returns:
        Union[GroupedPrediction, np.ndarray]: Grouped prediction or flat posterior (H, W, N)
    """
    if schema is not None and schema.fingerprint != model.schema.fingerprint: raise SchemaError("model schema differs from the requested schema")
    if sample.group_count != model.schema.group_count or sample.category_count != model.schema.N: raise SchemaError("sample does not match the model schema")
    return model.predict(sample.depth)[0]


def predict_samples(model: Model, samples: Iterable, batch_size: int = 8) -> list:
    """Predictions of several samples in batches.

    Args:
        model (Model): Model
        samples (Iterable[Sample]): Samples of equal size
        batch_size (int, optional): Samples per forward pass. Defaults to 8.

    Returns:
        list: Per-sample GroupedPrediction or flat posterior
    """
    samples = list(samples)
    result: list = []
    for start in range(0, len(samples), batch_size):
        batch: list = samples[start:start + batch_size]
        prediction = model.predict(np.stack([sample.depth for sample in batch]))
        result.extend(prediction[index] for index in range(len(batch)))
    return result


def evaluate_model(model: Model, samples: Iterable, batch_size: int = 8, pooling: str = "max", threads: Optional[int] = 1) -> EvalReport:
    """Runs the model on samples and evaluates the predictions.

    Args:
        model (Model): Model
        samples (Iterable[Sample]): Samples
        batch_size (int, optional): Samples per forward pass. Defaults to 8.
        pooling (str, optional): G_0 pooling for flat posteriors. Defaults to "max".
        threads (Optional[int], optional): Worker processes for counting. Defaults to 1.

    Returns:
        EvalReport: Report
    """
    samples = list(samples)
    regions: list = [regions_from_sample(sample, model.schema) for sample in samples]
    return evaluate_predictions(regions, predict_samples(model, samples, batch_size), model.schema, pooling, threads)


class TrainResult:
    """Trained model and per-epoch history records."""
    __slots__ = ("__model", "__history", "__state")

    def __init__(self, model: Model, history: list, state: AdamState) -> None:
        self.__model: Model = model
        self.__history: list = history
        self.__state: AdamState = state

    @property
    def model(self) -> Model:
        return self.__model

    @property
    def history(self) -> list:
        return self.__history

    @property
    def state(self) -> AdamState:
        return self.__state

    def history_table(self) -> pd.DataFrame:
        """History as a pandas DataFrame (one row per epoch, nested metrics flattened)."""
        return pd.json_normalize(self.__history).set_index("epoch")


def _read_history(path: str, epochs: int) -> list:
    if not os.path.isfile(path): return []
    with open(path, "r", encoding="utf-8") as file:
        records: list = [json.loads(line) for line in file if line.strip()]
    return [record for record in records if record["epoch"] < epochs]


def _write_history(path: str, history: list) -> None:
    tmp: str = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as file:
        for record in history: file.write(json.dumps(record, sort_keys=True) + "\n")
    os.replace(tmp, path)


def train(samples: list, schema: GroupSchema, model_config: ModelConfig, train_config: TrainConfig, out_dir: Optional[str] = None, validation: Optional[list] = None, resume: bool = False) -> TrainResult:
    """Trains a model with mini-batch Adam.

    After every epoch the training samples (and validation samples, if given)
    are evaluated; the record is appended to the history and a checkpoint with
    optimizer state is written to out_dir.

    Args:
        samples (list[Sample]): Training samples (equal size)
        schema (GroupSchema): Schema
        model_config (ModelConfig): Architecture and head mode
        train_config (TrainConfig): Optimizer settings
        out_dir (Optional[str], optional): Directory for checkpoint and history; None keeps everything in memory. Defaults to None.
        validation (Optional[list], optional): Validation samples. Defaults to None.
        resume (bool, optional): Continue from the checkpoint in out_dir. Defaults to False.

    Raises:
        ConfigError: Empty dataset or batch larger than the dataset
        DivergenceError: Non-finite loss or gradient

    Returns:
        TrainResult: Model, history and optimizer state
    """
    samples = list(samples)
    if not samples: raise ConfigError("training needs at least one sample")
    if train_config.batch_size > len(samples): raise ConfigError("batch_size " + str(train_config.batch_size) + " exceeds the dataset size " + str(len(samples)))

    model: Model = Model(model_config, schema, train_config.seed)
    state: AdamState = AdamState(model)
    history: list = []
    first_epoch: int = 0
    checkpoint_path: Optional[str] = None if out_dir is None else os.path.join(out_dir, CHECKPOINT_NAME)
    history_path: Optional[str] = None if out_dir is None else os.path.join(out_dir, HISTORY_NAME)
    if out_dir is not None: os.makedirs(out_dir, exist_ok=True)

    if resume and checkpoint_path is not None and os.path.isfile(checkpoint_path):
        checkpoint = read_checkpoint(checkpoint_path, schema)
        if checkpoint.model.config != model_config: raise ConfigError("checkpoint " + checkpoint_path + " was written with a different model configuration")
        model = checkpoint.model
        state = AdamState(model)
        state.load_blocks(checkpoint.blocks, checkpoint.info.get("step", 0))
        first_epoch = int(checkpoint.info.get("epoch", 0))
        history = _read_history(history_path, first_epoch)
        logger.info("Resuming at epoch %d (step %d) from %s", first_epoch, state.step, checkpoint_path)
    last_checkpoint: Optional[str] = checkpoint_path if first_epoch > 0 else None

    depth: np.ndarray = np.stack([sample.depth for sample in samples])
    targets: list = _batch_targets(samples, schema, model.mode, train_config.lam)
    if first_epoch == 0:
        logger.info("%s model with %d parameters; uniform-prediction loss %.4f", model.mode.upper(), model.parameter_count, uniform_loss(samples, schema, model.mode, train_config.lam))

    for epoch in range(first_epoch, train_config.epochs):
        start: float = perf_counter()
        lr: float = train_config.lr_at(epoch)
        order: np.ndarray = derive_rng(train_config.seed, 0x5EED, epoch).permutation(len(samples))
        losses: RecordDiscrete = RecordDiscrete()
        for first in range(0, len(order), train_config.batch_size):
            batch: np.ndarray = order[first:first + train_config.batch_size]
            logits: np.ndarray = model.forward(depth[batch])
            try:
                value: LossValue = _loss(model, logits, [targets[index] for index in batch])
            except NonFiniteError as e:
                raise DivergenceError("epoch " + str(epoch) + ": " + str(e), last_checkpoint) from None
            if not np.isfinite(value.loss):
                logger.error("Loss diverged in epoch %d", epoch)
                raise DivergenceError("non-finite loss in epoch " + str(epoch), last_checkpoint)
            grads: dict = model.backward(value.grad)
            try:
                adam_step(model, grads, train_config, state, lr)
            except DivergenceError as e:
                logger.error("Gradient diverged in epoch %d", epoch)
                raise DivergenceError(str(e), last_checkpoint) from None
            losses.record(value.loss)
        model.clear_cache()

        record: dict = {"epoch": epoch, "lr": lr, "loss": losses.mean, "loss_sd": losses.sd, "steps": state.step}
        record["train"] = evaluate_model(model, samples, train_config.batch_size).metrics
        if validation: record["validation"] = evaluate_model(model, validation, train_config.batch_size).metrics
        history.append(record)
        logger.info("Epoch %d: lr %.1e, loss %.4f, train PA vis %.4f (%.1f seconds)", epoch, lr, losses.mean, record["train"]["pa_vis"], perf_counter() - start)

        if out_dir is not None:
            write_checkpoint(checkpoint_path, model, state.to_blocks(), {"epoch": epoch + 1, "step": state.step, "train_config": train_config.to_config()})
            _write_history(history_path, history)
            last_checkpoint = checkpoint_path

    return TrainResult(model, history, state)
