"""Output heads and losses.

Flat head (DSS): N activations per pixel, softmax, cross-entropy on the visible
category.

Grouped head (GSS): activations are partitioned into the group block p (M+1
entries) followed by the within-group blocks q^0..q^M in schema order. Each
block gets its own softmax. The loss is the cross-entropy of the visible group
plus per-group cross-entropies: weight 1 where the category is visible,
weight lambda where it is present but occluded and weight lambda on the void
slot where no category of the group is present.

Activation arrays keep the channel axis last: (..., A).
"""

from typing import Optional, Union
import numpy as np
from .dataset import RegionSets
from .errors import NonFiniteError, SchemaError, ShapeError
from .schema import GroupSchema


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


PROBABILITY_FLOOR: float = 1e-12
DEFAULT_LAMBDA: float = 0.1


def _check_finite(logits: np.ndarray) -> None:
    if not np.all(np.isfinite(logits)): raise NonFiniteError("logits contain " + str(int(np.count_nonzero(~np.isfinite(logits)))) + " non-finite values")


def _softmax(x: np.ndarray) -> np.ndarray:
    e: np.ndarray = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1 + np.tanh(0.5 * x))


def flat_softmax(logits: np.ndarray) -> np.ndarray:
    """Per-pixel softmax over the last axis (with max-subtraction).

    Args:
        logits (np.ndarray): (..., N) activations

    Raises:
        NonFiniteError: Non-finite input

    Returns:
        np.ndarray: (..., N) probabilities
    """
    logits = np.asarray(logits)
    _check_finite(logits)
    return _softmax(logits)


class GroupedPrediction:
    """Per-pixel element of the product of simplices: group distribution p and within-group distributions q^i."""
    __slots__ = ("__schema", "__p", "__q")

    def __init__(self, schema: GroupSchema, p: np.ndarray, q: list) -> None:
        """Per-pixel grouped prediction.

        Args:
            schema (GroupSchema): Schema
            p (np.ndarray): (..., M+1) group visibility distribution
            q (list[np.ndarray]): M+1 arrays (..., dim_i) of within-group distributions (position 0 = void where present)
        """
        if p.shape[-1] != schema.group_count or len(q) != schema.group_count:
            raise ShapeError("prediction has " + str(p.shape[-1]) + " groups / " + str(len(q)) + " q blocks, schema has " + str(schema.group_count))
        for i, (block, dim) in enumerate(zip(q, schema.block_dims)):
            if block.shape != p.shape[:-1] + (dim,): raise ShapeError("q block " + str(i) + " has shape " + str(block.shape) + ", expected " + str(p.shape[:-1] + (dim,)))
        self.__schema: GroupSchema = schema
        self.__p: np.ndarray = p
        self.__q: tuple = tuple(q)

    @property
    def schema(self) -> GroupSchema:
        return self.__schema

    @property
    def p(self) -> np.ndarray:
        return self.__p

    @property
    def q(self) -> tuple:
        return self.__q

    @property
    def shape(self) -> tuple:
        """Spatial shape (without the block axis).

        Returns:
            tuple: Spatial shape
        """
        return self.__p.shape[:-1]

    def void_probability(self, group_id: int) -> np.ndarray:
        """q^i_0, or zeros for a group without void slot.

        Args:
            group_id (int): Group id

        Returns:
            np.ndarray: Void probabilities
        """
        if not self.__schema.has_void(group_id): return np.zeros(self.shape, dtype=self.__p.dtype)
        return self.__q[group_id][..., 0]

    def category_probabilities(self, group_id: int) -> np.ndarray:
        """q^i_1 .. q^i_{g_i} (void entry removed).

        Args:
            group_id (int): Group id

        Returns:
            np.ndarray: (..., g_i) probabilities
        """
        return self.__q[group_id][..., self.__schema.void_offset(group_id):]

    def as_array(self) -> np.ndarray:
        """All blocks concatenated in activation order.

        Returns:
            np.ndarray: (..., A) probabilities
        """
        return np.concatenate((self.__p,) + self.__q, axis=-1)

    def __getitem__(self, index) -> "GroupedPrediction":
        return GroupedPrediction(self.__schema, self.__p[index], [block[index] for block in self.__q])


def grouped_softmax(logits: np.ndarray, schema: GroupSchema, pre_sigmoid: bool = False) -> GroupedPrediction:
    """Group-wise softmax: p block first, then q^0..q^M, each normalized independently.

    Args:
        logits (np.ndarray): (..., A) activations with A = activation_count(schema)
        schema (GroupSchema): Schema
        pre_sigmoid (bool, optional): Apply a sigmoid before the softmax. Defaults to False.

    Raises:
        ShapeError: Channel count does not match the schema
        NonFiniteError: Non-finite input

    Returns:
        GroupedPrediction: Prediction
    """
    logits = np.asarray(logits)
    if logits.shape[-1] != schema.activation_count:
        raise ShapeError("grouped head needs " + str(schema.activation_count) + " activations, got " + str(logits.shape[-1]))
    _check_finite(logits)
    if pre_sigmoid: logits = _sigmoid(logits)
    blocks: list = [_softmax(logits[..., s]) for s in schema.block_slices()]
    return GroupedPrediction(schema, blocks[0], blocks[1:])


def plausibility_violation(pred: GroupedPrediction) -> np.ndarray:
    """Violation of p_i <= 1 - q^i_0 per pixel and group.

    Args:
        pred (GroupedPrediction): Prediction

    Returns:
        np.ndarray: (..., M+1) values max(0, p_i - (1 - q^i_0)); 0 for groups without void slot
    """
    schema: GroupSchema = pred.schema
    violation: np.ndarray = np.zeros(pred.p.shape, dtype=np.float64)
    for i in range(schema.group_count):
        if not schema.has_void(i): continue
        violation[..., i] = np.maximum(0.0, pred.p[..., i] - (1.0 - pred.void_probability(i)))
    return violation


def violation_summary(violation: np.ndarray) -> dict:
    """Summary statistics of plausibility violations.

    Args:
        violation (np.ndarray): Output of plausibility_violation

    Returns:
        dict: max, mean and fraction of entries greater than 0
    """
    if violation.size == 0: return {"max": 0.0, "mean": 0.0, "fraction": 0.0}
    flat: np.ndarray = np.ascontiguousarray(violation, dtype=np.float64).reshape(-1)
    return {"max": float(flat.max()), "mean": float(np.sum(flat) / flat.size), "fraction": float(np.count_nonzero(flat > 0) / flat.size)}


class LossValue:
    """Mean negative log-likelihood per pixel and its gradient with respect to the logits."""
    __slots__ = ("__loss", "__grad")

    def __init__(self, loss: float, grad: np.ndarray) -> None:
        self.__loss: float = float(loss)
        self.__grad: np.ndarray = grad

    @property
    def loss(self) -> float:
        return self.__loss

    @property
    def grad(self) -> np.ndarray:
        return self.__grad

    def __repr__(self) -> str:
        return "LossValue(loss={:.6f}, grad_shape={})".format(self.__loss, self.__grad.shape)


def _block_ce(logits: np.ndarray, target: np.ndarray, weight: Optional[np.ndarray], pixels: int, pre_sigmoid: bool) -> tuple:
    """Fused softmax cross-entropy of one block.

    Returns:
        tuple[np.ndarray, np.ndarray]: Weighted per-pixel losses (float64) and gradient of the summed loss / pixels
    """
    x: np.ndarray = _sigmoid(logits) if pre_sigmoid else logits
    prob: np.ndarray = _softmax(x)
    picked: np.ndarray = np.take_along_axis(prob, target[..., None], axis=-1)[..., 0]
    losses: np.ndarray = -np.log(np.maximum(picked.astype(np.float64), PROBABILITY_FLOOR))
    grad: np.ndarray = prob.copy()
    np.put_along_axis(grad, target[..., None], np.take_along_axis(grad, target[..., None], axis=-1) - 1, axis=-1)
    if weight is not None:
        losses = losses * weight
        grad *= weight[..., None].astype(grad.dtype)
    grad /= pixels
    if pre_sigmoid: grad *= x * (1 - x)
    return losses, grad


def _mean(losses: np.ndarray) -> float:
    flat: np.ndarray = np.ascontiguousarray(losses, dtype=np.float64).reshape(-1)
    return float(np.sum(flat) / flat.size)


def loss_ce(logits: np.ndarray, visible_gt: np.ndarray, schema: Optional[GroupSchema] = None) -> LossValue:
    """Cross-entropy of the flat head on the visible ground truth.

    Args:
        logits (np.ndarray): (..., N) activations
        visible_gt (np.ndarray): (...) visible category ids
        schema (Optional[GroupSchema], optional): Schema used to check N. Defaults to None.

    Raises:
        ShapeError: Shapes do not match
        SchemaError: Invalid category id

    Returns:
        LossValue: Mean loss per pixel and gradient
    """
    logits = np.asarray(logits)
    gt: np.ndarray = np.asarray(visible_gt).astype(np.int64)
    categories: int = logits.shape[-1]
    if schema is not None and categories != schema.N: raise ShapeError("flat head needs " + str(schema.N) + " activations, got " + str(categories))
    if gt.shape != logits.shape[:-1]: raise ShapeError("ground truth shape " + str(gt.shape) + " does not match logits " + str(logits.shape[:-1]))
    if gt.size and (gt.min() < 0 or gt.max() >= categories): raise SchemaError("visible ground truth holds category ids outside 0.." + str(categories - 1))
    _check_finite(logits)
    losses, grad = _block_ce(logits, gt, None, max(1, gt.size), False)
    return LossValue(_mean(losses), grad)


class GroupedTargets:
    """Per-pixel targets of the grouped loss: visible group, target position in each q block and its weight."""
    __slots__ = ("__visible_group", "__indices", "__weights")

    def __init__(self, visible_group: np.ndarray, indices: list, weights: list) -> None:
        """Per-pixel targets of the grouped loss.

        Args:
            visible_group (np.ndarray): (...) visible group i*(x)
            indices (list[np.ndarray]): Per group (...) target position in q^i
            weights (list[np.ndarray]): Per group (...) weight (1 visible, lambda occluded / void, 0 no term)
        """
        self.__visible_group: np.ndarray = visible_group
        self.__indices: tuple = tuple(indices)
        self.__weights: tuple = tuple(weights)

    @property
    def visible_group(self) -> np.ndarray:
        return self.__visible_group

    @property
    def indices(self) -> tuple:
        return self.__indices

    @property
    def weights(self) -> tuple:
        return self.__weights

    @property
    def shape(self) -> tuple:
        return self.__visible_group.shape

    @staticmethod
    def from_regions(regions: RegionSets, schema: GroupSchema, lam: float = DEFAULT_LAMBDA) -> "GroupedTargets":
        """Builds the targets from region sets.

        Args:
            regions (RegionSets): Ground truth region sets
            schema (GroupSchema): Schema
            lam (float, optional): Weight of occluded and void terms. Defaults to 0.1.

        Raises:
            SchemaError: Region sets do not match the schema

        Returns:
            GroupedTargets: Targets
        """
        if regions.category_count != schema.N or regions.group_count != schema.group_count:
            raise SchemaError("region sets with " + str(regions.category_count) + " categories / " + str(regions.group_count) + " groups do not match schema (" + str(schema.N) + " / " + str(schema.group_count) + ")")
        shape: tuple = tuple(regions.shape)
        visible_group: np.ndarray = schema.group_lookup[regions.visible_labels()]
        occ: np.ndarray = regions.occ
        indices: list = []
        weights: list = []
        for i in range(schema.group_count):
            index: np.ndarray = np.zeros(shape, dtype=np.int64)
            weight: np.ndarray = np.zeros(shape, dtype=np.float64)
            offset: int = schema.void_offset(i)
            if offset: weight[regions.void[i]] = lam
            for j, c in enumerate(schema.members(i), start=1):
                index[regions.pres[c]] = offset + j - 1
                weight[occ[c]] = lam
                weight[regions.vis[c]] = 1.0
            indices.append(index)
            weights.append(weight)
        return GroupedTargets(visible_group, indices, weights)

    @staticmethod
    def stack(targets: list) -> "GroupedTargets":
        """Stacks targets of several samples along a new leading axis.

        Args:
            targets (list[GroupedTargets]): Targets of equal shape

        Returns:
            GroupedTargets: Batched targets
        """
        groups: int = len(targets[0].indices)
        return GroupedTargets(np.stack([t.visible_group for t in targets]), [np.stack([t.indices[i] for t in targets]) for i in range(groups)], [np.stack([t.weights[i] for t in targets]) for i in range(groups)])


def loss_grouped(logits: np.ndarray, regions: Union[RegionSets, GroupedTargets], schema: GroupSchema, lam: float = DEFAULT_LAMBDA, pre_sigmoid: bool = False) -> LossValue:
    """Grouped loss: visible-group cross-entropy plus weighted within-group cross-entropies.

    Args:
        logits (np.ndarray): (..., A) activations
        regions (Union[RegionSets, GroupedTargets]): Ground truth (region sets of one image or prepared targets)
        schema (GroupSchema): Schema
        lam (float, optional): Weight of occluded and void terms (ignored for prepared targets). Defaults to 0.1.
        pre_sigmoid (bool, optional): Sigmoid before the group-wise softmax. Defaults to False.

    Raises:
        ShapeError: Channel count or spatial shape mismatch
        SchemaError: Region sets do not match the schema

    Returns:
        LossValue: Mean loss per pixel and gradient
    """
    logits = np.asarray(logits)
    if logits.shape[-1] != schema.activation_count:
        raise ShapeError("grouped head needs " + str(schema.activation_count) + " activations, got " + str(logits.shape[-1]))
    targets: GroupedTargets = regions if isinstance(regions, GroupedTargets) else GroupedTargets.from_regions(regions, schema, lam)
    if targets.shape != logits.shape[:-1]: raise ShapeError("targets shape " + str(targets.shape) + " does not match logits " + str(logits.shape[:-1]))
    _check_finite(logits)

    pixels: int = max(1, int(np.prod(targets.shape)))
    slices: list = schema.block_slices()
    grad: np.ndarray = np.empty_like(logits)
    total, grad[..., slices[0]] = _block_ce(logits[..., slices[0]], targets.visible_group, None, pixels, pre_sigmoid)
    for i in range(schema.group_count):
        losses, grad[..., slices[i + 1]] = _block_ce(logits[..., slices[i + 1]], targets.indices[i], targets.weights[i], pixels, pre_sigmoid)
        total = total + losses
    return LossValue(_mean(total), grad)


def uniform_loss_ce(schema: GroupSchema) -> float:
    """Flat loss of a uniform prediction: ln N.

    Args:
        schema (GroupSchema): Schema

    Returns:
        float: ln N
    """
    return float(np.log(schema.N))


def uniform_loss_grouped(targets: GroupedTargets, schema: GroupSchema) -> float:
    """Grouped loss of a uniform prediction: mean over pixels of ln(M+1) + sum_i w_i ln(dim_i).

    Args:
        targets (GroupedTargets): Targets
        schema (GroupSchema): Schema

    Returns:
        float: Loss of all-zero logits
    """
    per_pixel: np.ndarray = np.full(targets.shape, np.log(schema.group_count))
    for weight, dim in zip(targets.weights, schema.block_dims):
        per_pixel = per_pixel + weight * np.log(dim)
    return _mean(per_pixel)
