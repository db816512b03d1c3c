"""Synthetic ground truth factory: layered 2-D scenes of parametric shapes.

A scene consists of horizontal background bands (categories of G_0) behind
foreground objects. Objects are placed group by group; within a group their
footprints never overlap, objects of different groups may occlude each other.
The visible map is the nearest surface per pixel, each group map records the
full footprints of its objects regardless of occlusion.

Scene configuration format::

    canvas 64 64
    seed 7
    depth_noise 0.01
    background_depth 8 10
    bands 1 3
    paste mobile 0.3
    paste_background road sidewalk
    group boxes
        count 0 3
        size 0.1 0.3
        depth 1 7
        shapes rectangle ellipse triangle
"""

from typing import Iterable, Optional
import functools
import logging
import os
from time import perf_counter
import numpy as np
from scipy import ndimage
from .config import parse_stanzas, read_text, to_float, to_int
from .dataset import MANIFEST_NAME, Sample, regions_from_sample, write_json, write_sample
from .errors import ConfigError, GenerationError, PasteError, PlacementError, SchemaError
from .random_dist import derive_rng, gaussian_noise, integers, uniform
from .schema import BACKGROUND_GROUP, GroupSchema, save_schema
from .statistics import RecordOptions
from .tools import run_parallel


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


SHAPES: tuple = ("rectangle", "ellipse", "triangle")
PLACEMENT_RETRIES: int = 100
PASTE_DEPTH_FACTOR: float = 0.9
SCHEMA_FILE: str = "schema.cfg"
SAMPLE_SUFFIX: str = ".gss"
REASON_ACCEPTED: str = "accepted"
REASON_NO_FOREGROUND: str = "no foreground"
REASON_OBJECT_COVERAGE: str = "object coverage"
REASON_DONT_CARE: str = "dont care coverage"
REASON_PLACEMENT: str = "placement"

PASTE_APPLIED: str = "applied"
PASTE_FAILED: str = "failed"


def shape_mask(shape: str, height: int, width: int, center: tuple, half: tuple) -> np.ndarray:
    """Rasterizes a shape (pixel centers inside the outline).

    Args:
        shape (str): "rectangle", "ellipse" or "triangle" (apex up)
        height (int): Canvas height
        width (int): Canvas width
        center (tuple[float, float]): Center (row, column) in pixels
        half (tuple[float, float]): Half extents (rows, columns) in pixels

    Returns:
        np.ndarray: Boolean mask
    """
    y, x = np.ogrid[0:height, 0:width]
    dy: np.ndarray = (y + 0.5 - center[0]) / half[0]
    dx: np.ndarray = (x + 0.5 - center[1]) / half[1]
    if shape == "rectangle": return (np.abs(dy) <= 1) & (np.abs(dx) <= 1)
    if shape == "ellipse": return dy * dy + dx * dx <= 1
    if shape == "triangle": return (np.abs(dy) <= 1) & (np.abs(dx) <= (dy + 1) / 2)
    raise ConfigError("unknown shape '" + shape + "'")


class GroupRule:
    """Object placement rule of one foreground group."""
    __slots__ = ("__name", "__count", "__size", "__depth", "__shapes")

    def __init__(self, name: str, count: tuple = (0, 2), size: tuple = (0.1, 0.3), depth: tuple = (1.0, 5.0), shapes: tuple = SHAPES) -> None:
        """Object placement rule of one foreground group.

        Args:
            name (str): Group name
            count (tuple[int, int], optional): Object count range (both included). Defaults to (0, 2).
            size (tuple[float, float], optional): Object size range as canvas fractions. Defaults to (0.1, 0.3).
            depth (tuple[float, float], optional): Object depth range. Defaults to (1.0, 5.0).
            shapes (tuple[str], optional): Shape library; category j uses shapes[(j-1) % len]. Defaults to all shapes.

        Raises:
            ConfigError: Invalid range or shape
        """
        if count[0] < 0 or count[1] < count[0]: raise ConfigError("group " + name + ": invalid count range " + str(count))
        if not 0 < size[0] <= size[1] <= 1: raise ConfigError("group " + name + ": size fractions must satisfy 0 < lo <= hi <= 1, got " + str(size))
        if depth[0] <= 0 or depth[1] < depth[0]: raise ConfigError("group " + name + ": invalid depth range " + str(depth))
        if not shapes: raise ConfigError("group " + name + ": empty shape library")
        for shape in shapes:
            if shape not in SHAPES: raise ConfigError("group " + name + ": unknown shape '" + shape + "'")
        self.__name: str = name
        self.__count: tuple = (int(count[0]), int(count[1]))
        self.__size: tuple = (float(size[0]), float(size[1]))
        self.__depth: tuple = (float(depth[0]), float(depth[1]))
        self.__shapes: tuple = tuple(shapes)

    @property
    def name(self) -> str:
        return self.__name

    @property
    def count(self) -> tuple:
        return self.__count

    @property
    def size(self) -> tuple:
        return self.__size

    @property
    def depth(self) -> tuple:
        return self.__depth

    @property
    def shapes(self) -> tuple:
        return self.__shapes

    def shape_of(self, within_index: int) -> str:
        return self.__shapes[(within_index - 1) % len(self.__shapes)]

    def to_config(self) -> str:
        return "group {}\n    count {} {}\n    size {!r} {!r}\n    depth {!r} {!r}\n    shapes {}\n".format(self.__name, *self.__count, *self.__size, *self.__depth, " ".join(self.__shapes))


class SceneSpec:
    """Scene generation settings (immutable)."""
    __slots__ = ("__canvas", "__seed", "__depth_noise", "__background_depth", "__bands", "__rules", "__paste_group", "__paste_probability", "__paste_background")

    def __init__(self, canvas: tuple = (64, 64), rules: Iterable = (), seed: int = 0, depth_noise: float = 0.0, background_depth: tuple = (8.0, 10.0), bands: tuple = (1, 3), paste_group: Optional[str] = None, paste_probability: float = 0.0, paste_background: tuple = ()) -> None:
        """Scene generation settings.

        Args:
            canvas (tuple[int, int], optional): Canvas (H, W), both at least 8. Defaults to (64, 64).
            rules (Iterable[GroupRule], optional): Placement rules of foreground groups (missing groups get no objects). Defaults to ().
            seed (int, optional): 64-bit seed. Defaults to 0.
            depth_noise (float, optional): Standard deviation of the Gaussian depth noise. Defaults to 0.0.
            background_depth (tuple[float, float], optional): Depth range of the background bands. Defaults to (8.0, 10.0).
            bands (tuple[int, int], optional): Range of the number of background bands. Defaults to (1, 3).
            paste_group (Optional[str], optional): Group whose objects are duplicated during generation. Defaults to None.
            paste_probability (float, optional): Probability of a paste per scene. Defaults to 0.0.
            paste_background (tuple[str], optional): Background categories a pasted object may cover; empty means all. Defaults to ().

        Raises:
            ConfigError: Invalid value
        """
        rules = tuple(rules)
        if canvas[0] < 8 or canvas[1] < 8: raise ConfigError("canvas must be at least 8 x 8, got " + str(tuple(canvas)))
        if depth_noise < 0: raise ConfigError("depth_noise must not be negative, got " + str(depth_noise))
        if background_depth[0] <= 0 or background_depth[1] < background_depth[0]: raise ConfigError("invalid background_depth range " + str(tuple(background_depth)))
        if bands[0] < 1 or bands[1] < bands[0]: raise ConfigError("invalid bands range " + str(tuple(bands)))
        if not 0 <= paste_probability <= 1: raise ConfigError("paste probability must be in [0, 1], got " + str(paste_probability))
        names: set = set()
        for rule in rules:
            if rule.name in names: raise ConfigError("duplicate group rule '" + rule.name + "'")
            names.add(rule.name)
            if rule.depth[1] >= background_depth[0]: raise ConfigError("group " + rule.name + ": objects must lie in front of the background (depth < " + str(background_depth[0]) + ")")
        self.__canvas: tuple = (int(canvas[0]), int(canvas[1]))
        self.__rules: tuple = rules
        self.__seed: int = int(seed)
        self.__depth_noise: float = float(depth_noise)
        self.__background_depth: tuple = (float(background_depth[0]), float(background_depth[1]))
        self.__bands: tuple = (int(bands[0]), int(bands[1]))
        self.__paste_group: Optional[str] = paste_group
        self.__paste_probability: float = float(paste_probability)
        self.__paste_background: tuple = tuple(paste_background)

    @property
    def canvas(self) -> tuple:
        return self.__canvas

    @property
    def rules(self) -> tuple:
        return self.__rules

    @property
    def seed(self) -> int:
        return self.__seed

    @property
    def depth_noise(self) -> float:
        return self.__depth_noise

    @property
    def background_depth(self) -> tuple:
        return self.__background_depth

    @property
    def bands(self) -> tuple:
        return self.__bands

    @property
    def paste_group(self) -> Optional[str]:
        return self.__paste_group

    @property
    def paste_probability(self) -> float:
        return self.__paste_probability

    @property
    def paste_background(self) -> tuple:
        return self.__paste_background

    def rule(self, name: str) -> Optional[GroupRule]:
        for rule in self.__rules:
            if rule.name == name: return rule
        return None

    def check(self, schema: GroupSchema) -> None:
        """Verifies that the spec refers to existing groups and categories.

        Args:
            schema (GroupSchema): Schema

        Raises:
            ConfigError: Unknown group or category, rule for the background group
        """
        for rule in self.__rules:
            if rule.name not in schema.group_names: raise ConfigError("scene rule for unknown group '" + rule.name + "'")
            if schema.group_id(rule.name) == BACKGROUND_GROUP: raise ConfigError("the background group '" + rule.name + "' cannot have object rules")
        if self.__paste_group is not None:
            if self.__paste_group not in schema.group_names or schema.group_id(self.__paste_group) == BACKGROUND_GROUP:
                raise ConfigError("paste group '" + self.__paste_group + "' is not a foreground group")
        background: set = {schema.categories[c] for c in schema.members(BACKGROUND_GROUP)}
        for name in self.__paste_background:
            if name not in background: raise ConfigError("paste background '" + name + "' is not a background category")

    def replace(self, **changes) -> "SceneSpec":
        values: dict = {"canvas": self.__canvas, "rules": self.__rules, "seed": self.__seed, "depth_noise": self.__depth_noise, "background_depth": self.__background_depth, "bands": self.__bands, "paste_group": self.__paste_group, "paste_probability": self.__paste_probability, "paste_background": self.__paste_background}
        values.update(changes)
        return SceneSpec(**values)

    def to_config(self) -> str:
        lines: list = ["canvas {} {}".format(*self.__canvas), "seed " + str(self.__seed), "depth_noise " + repr(self.__depth_noise), "background_depth {!r} {!r}".format(*self.__background_depth), "bands {} {}".format(*self.__bands)]
        if self.__paste_group is not None: lines.append("paste {} {!r}".format(self.__paste_group, self.__paste_probability))
        if self.__paste_background: lines.append("paste_background " + " ".join(self.__paste_background))
        return "\n".join(lines) + "\n" + "".join(rule.to_config() for rule in self.__rules)


def _pair(parsed, key: str, convert) -> tuple:
    args: list = parsed.args(key, 2)
    return (convert(args[0], parsed.path, parsed.line(key)), convert(args[1], parsed.path, parsed.line(key)))


def parse_scene_spec(text: str, path: Optional[str] = None) -> SceneSpec:
    """Parses a scene configuration (see module documentation).

    Args:
        text (str): Configuration text
        path (Optional[str], optional): File name for error messages. Defaults to None.

    Raises:
        ConfigError: Syntax error, unknown key or invalid value (with line number)

    Returns:
        SceneSpec: Scene settings
    """
    parsed = parse_stanzas(text, ("canvas", "seed", "depth_noise", "background_depth", "bands", "paste", "paste_background"), path=path)
    values: dict = {}
    if parsed.has("canvas"): values["canvas"] = _pair(parsed, "canvas", to_int)
    if parsed.has("seed"): values["seed"] = to_int(parsed.args("seed", 1)[0], path, parsed.line("seed"))
    if parsed.has("depth_noise"): values["depth_noise"] = to_float(parsed.args("depth_noise", 1)[0], path, parsed.line("depth_noise"))
    if parsed.has("background_depth"): values["background_depth"] = _pair(parsed, "background_depth", to_float)
    if parsed.has("bands"): values["bands"] = _pair(parsed, "bands", to_int)
    if parsed.has("paste"):
        args: list = parsed.args("paste", 2)
        values["paste_group"] = args[0]
        values["paste_probability"] = to_float(args[1], path, parsed.line("paste"))
    if parsed.has("paste_background"): values["paste_background"] = tuple(parsed.args("paste_background"))

    rules: list = []
    for stanza in parsed.stanzas:
        fields: dict = {}
        for line, tokens in stanza.members:
            key: str = tokens[0]
            if key in fields: raise ConfigError("duplicate key '" + key + "' in group " + stanza.name, path, line)
            if key == "shapes":
                fields["shapes"] = tuple(tokens[1:])
                continue
            if key not in ("count", "size", "depth"): raise ConfigError("unknown group key '" + key + "'", path, line)
            if len(tokens) != 3: raise ConfigError("'" + key + "' expects 2 values, got " + str(len(tokens) - 1), path, line)
            convert = to_int if key == "count" else to_float
            fields[key] = (convert(tokens[1], path, line), convert(tokens[2], path, line))
        try:
            rules.append(GroupRule(stanza.name, **fields))
        except ConfigError as e:
            raise ConfigError(str(e), path, stanza.line) from None
    try:
        return SceneSpec(rules=rules, **values)
    except ConfigError as e:
        raise ConfigError(str(e), path) from None


def load_scene_spec(path: str) -> SceneSpec:
    return parse_scene_spec(read_text(path), str(path))


class RejectionThresholds:
    """Heuristics removing non-informative scenes."""
    __slots__ = ("__min_foreground", "__max_object_coverage", "__max_dont_care_coverage")

    def __init__(self, min_foreground: int = 1, max_object_coverage: float = 0.40, max_dont_care_coverage: float = 0.40) -> None:
        """Heuristics removing non-informative scenes.

        Args:
            min_foreground (int, optional): Minimum number of visible foreground categories. Defaults to 1.
            max_object_coverage (float, optional): Maximum visible share of the canvas of a single object. Defaults to 0.40.
            max_dont_care_coverage (float, optional): Maximum visible share of the dont_care category. Defaults to 0.40.

        Raises:
            ConfigError: Value out of range
        """
        if min_foreground < 0: raise ConfigError("min_foreground must not be negative, got " + str(min_foreground))
        if not 0 <= max_object_coverage <= 1: raise ConfigError("max_object_coverage must be in [0, 1], got " + str(max_object_coverage))
        if not 0 <= max_dont_care_coverage <= 1: raise ConfigError("max_dont_care_coverage must be in [0, 1], got " + str(max_dont_care_coverage))
        self.__min_foreground: int = int(min_foreground)
        self.__max_object_coverage: float = float(max_object_coverage)
        self.__max_dont_care_coverage: float = float(max_dont_care_coverage)

    @property
    def min_foreground(self) -> int:
        return self.__min_foreground

    @property
    def max_object_coverage(self) -> float:
        return self.__max_object_coverage

    @property
    def max_dont_care_coverage(self) -> float:
        return self.__max_dont_care_coverage

    def as_dict(self) -> dict:
        return {"min_foreground": self.__min_foreground, "max_object_coverage": self.__max_object_coverage, "max_dont_care_coverage": self.__max_dont_care_coverage}


def generate_scene(spec: SceneSpec, schema: GroupSchema, rng: np.random.Generator) -> Sample:
    """Generates one scene.

    Args:
        spec (SceneSpec): Scene settings
        schema (GroupSchema): Schema (background group plus at least one foreground group)
        rng (np.random.Generator): Generator (advanced in every case)

    Raises:
        SchemaError: Schema without foreground group
        PlacementError: Disjoint objects could not be fitted within the retry budget

    Returns:
        Sample: Generated sample
    """
    if schema.group_count < 2: raise SchemaError("scene generation needs a background group and at least one foreground group")
    height, width = spec.canvas

    # Background bands separated by horizontal cuts, categories in declaration order
    background: tuple = schema.members(BACKGROUND_GROUP)
    band_count: int = integers(rng, min(spec.bands[0], len(background)), min(spec.bands[1], len(background)))()
    chosen: np.ndarray = np.sort(rng.choice(len(background), size=band_count, replace=False))
    cuts: np.ndarray = np.sort(rng.choice(np.arange(1, height), size=band_count - 1, replace=False)) if band_count > 1 else np.zeros(0, dtype=np.int64)
    band_of_row: np.ndarray = np.searchsorted(cuts, np.arange(height), side="right")
    band_depth: np.ndarray = rng.uniform(spec.background_depth[0], spec.background_depth[1], size=band_count)

    group_maps: np.ndarray = np.zeros((schema.group_count, height, width), dtype=np.uint16)
    group_maps[BACKGROUND_GROUP] = (chosen[band_of_row] + 1)[:, None]
    visible: np.ndarray = np.repeat(np.array(background, dtype=np.int64)[chosen[band_of_row]][:, None], width, axis=1)
    zbuffer: np.ndarray = np.repeat(band_depth[band_of_row][:, None], width, axis=1)

    for group_id in range(1, schema.group_count):
        rule: Optional[GroupRule] = spec.rule(schema.group_names[group_id])
        if rule is None: continue
        members: tuple = schema.members(group_id)
        get_size = uniform(rng, rule.size[0], rule.size[1])
        get_depth = uniform(rng, rule.depth[0], rule.depth[1])
        for _ in range(integers(rng, rule.count[0], rule.count[1])()):
            j: int = int(rng.integers(len(members))) + 1
            shape: str = rule.shape_of(j)
            placed: bool = False
            for _ in range(PLACEMENT_RETRIES):
                half: tuple = (get_size() * height / 2, get_size() * width / 2)
                center: tuple = (rng.uniform(0, height), rng.uniform(0, width))
                mask: np.ndarray = shape_mask(shape, height, width, center, half)
                if mask.any() and not (mask & (group_maps[group_id] > 0)).any():
                    placed = True
                    break
            if not placed: raise PlacementError("group " + schema.group_names[group_id] + ": no disjoint position found after " + str(PLACEMENT_RETRIES) + " attempts")
            group_maps[group_id][mask] = j
            d: float = get_depth()
            front: np.ndarray = mask & (d < zbuffer)
            zbuffer[front] = d
            visible[front] = members[j - 1]

    depth: np.ndarray = zbuffer + gaussian_noise(rng, spec.depth_noise, zbuffer.shape)
    return Sample(depth, visible, group_maps, schema.N)


def _object_components(pres: np.ndarray) -> tuple:
    """Connected components (4-neighborhood) of a present mask."""
    return ndimage.label(pres)


def accept_scene(sample: Sample, thresholds: RejectionThresholds, schema: GroupSchema) -> tuple:
    """Applies the rejection heuristics in order: no foreground, object coverage, dont_care coverage.

    Args:
        sample (Sample): Sample
        thresholds (RejectionThresholds): Thresholds
        schema (GroupSchema): Schema

    Returns:
        tuple[bool, str]: Acceptance and reason
    """
    regions = regions_from_sample(sample, schema)
    pixels: int = sample.height * sample.width
    foreground: list = [c for i in range(1, schema.group_count) for c in schema.members(i)]
    visible_foreground: int = sum(1 for c in foreground if regions.vis[c].any())
    if visible_foreground < thresholds.min_foreground: return False, REASON_NO_FOREGROUND
    for c in foreground:
        if not regions.pres[c].any(): continue
        labels, count = _object_components(regions.pres[c])
        visible_per_object: np.ndarray = np.bincount(labels[regions.vis[c]], minlength=count + 1)[1:]
        if visible_per_object.size and visible_per_object.max() / pixels > thresholds.max_object_coverage: return False, REASON_OBJECT_COVERAGE
    dont_care: Optional[int] = schema.dont_care
    if dont_care is not None and np.count_nonzero(regions.vis[dont_care]) / pixels > thresholds.max_dont_care_coverage: return False, REASON_DONT_CARE
    return True, REASON_ACCEPTED


def augment_paste(sample: Sample, schema: GroupSchema, paste_group: int, rng: np.random.Generator, permitted: Optional[Iterable] = None, retries: int = PLACEMENT_RETRIES) -> Sample:
    """Duplicates a visible object of a foreground group onto permitted background.

    The clone keeps its footprint and category; it lies in front of the
    covered background (depth 0.9 times the nearest covered depth). Covered
    background categories become occluded, their group map is unchanged.

    Args:
        sample (Sample): Sample
        schema (GroupSchema): Schema
        paste_group (int): Foreground group id
        rng (np.random.Generator): Generator
        permitted (Optional[Iterable], optional): Background category ids the clone may cover; None means all of G_0. Defaults to None.
        retries (int, optional): Placement attempts. Defaults to 100.

    Raises:
        SchemaError: paste_group is not a foreground group
        PasteError: No clonable object or no permitted placement

    Returns:
        Sample: Augmented sample
    """
    if not 1 <= paste_group < schema.group_count: raise SchemaError("paste group " + str(paste_group) + " is not a foreground group")
    regions = regions_from_sample(sample, schema)
    objects: list = []
    for j, c in enumerate(schema.members(paste_group), start=1):
        labels, count = _object_components(regions.pres[c])
        for index in range(1, count + 1):
            component: np.ndarray = labels == index
            if (component & regions.vis[c]).any(): objects.append((j, c, component))
    if not objects: raise PasteError("group " + schema.group_names[paste_group] + " has no visible object to clone")
    j, c, component = objects[int(rng.integers(len(objects)))]

    rows, cols = np.nonzero(component)
    footprint: np.ndarray = component[rows.min():rows.max() + 1, cols.min():cols.max() + 1]
    box_h, box_w = footprint.shape
    height, width = sample.height, sample.width
    if permitted is None: permitted = schema.members(BACKGROUND_GROUP)
    allowed: np.ndarray = np.isin(sample.visible, np.array(list(permitted), dtype=np.int64)) & (sample.group_maps[paste_group] == 0)

    for _ in range(retries):
        top: int = int(rng.integers(0, height - box_h + 1))
        left: int = int(rng.integers(0, width - box_w + 1))
        target: np.ndarray = np.zeros((height, width), dtype=bool)
        target[top:top + box_h, left:left + box_w] = footprint
        if (target & ~allowed).any(): continue
        depth: np.ndarray = sample.depth.copy()
        visible: np.ndarray = sample.visible.copy()
        group_maps: np.ndarray = sample.group_maps.copy()
        depth[target] = PASTE_DEPTH_FACTOR * depth[target].min()
        visible[target] = c
        group_maps[paste_group][target] = j
        return sample.replace(depth, visible, group_maps)
    raise PasteError("no permitted placement for a clone of " + schema.categories[c] + " after " + str(retries) + " attempts")


def _candidate(spec: SceneSpec, schema: GroupSchema, thresholds: RejectionThresholds, seed: int, index: int) -> tuple:
    """Generates and judges candidate scene number index (worker function)."""
    rng: np.random.Generator = derive_rng(seed, index)
    try:
        sample: Sample = generate_scene(spec, schema, rng)
    except PlacementError:
        return index, None, REASON_PLACEMENT, None
    paste: Optional[str] = None
    if spec.paste_group is not None and rng.random() < spec.paste_probability:
        permitted: list = [schema.category_id(name) for name in spec.paste_background] or None
        try:
            sample = augment_paste(sample, schema, schema.group_id(spec.paste_group), rng, permitted)
            paste = PASTE_APPLIED
        except PasteError as e:
            logger.debug("Scene %d kept without paste: %s", index, e)
            paste = PASTE_FAILED
    accepted, reason = accept_scene(sample, thresholds, schema)
    return index, sample if accepted else None, reason, paste


def generate_dataset(spec: SceneSpec, schema: GroupSchema, thresholds: RejectionThresholds, n_train: int, n_test: int, seed: Optional[int] = None, out_dir: Optional[str] = None, threads: Optional[int] = 1, window: int = 200, min_rate: float = 0.01) -> dict:
    """Generates accepted scenes until both splits are filled and writes them.

    Candidate scene k uses the stream derived from (seed, k); candidates are
    accepted in index order, so the result does not depend on the number of
    worker processes.

    Args:
        spec (SceneSpec): Scene settings
        schema (GroupSchema): Schema
        thresholds (RejectionThresholds): Rejection heuristics
        n_train (int): Training samples
        n_test (int): Test samples
        seed (Optional[int], optional): Seed; None uses the spec's seed. Defaults to None.
        out_dir (Optional[str], optional): Output directory; None returns the samples in the manifest without writing. Defaults to None.
        threads (Optional[int], optional): Worker processes. Defaults to 1.
        window (int, optional): Trial window of the acceptance rate check. Defaults to 200.
        min_rate (float, optional): Minimum acceptance rate over the window. Defaults to 0.01.

    Raises:
        ConfigError: Invalid counts or spec not matching the schema
        GenerationError: Acceptance rate too low

    Returns:
        dict: Manifest (without out_dir additionally the "data" key holding (split, sample) pairs)
    """
    if n_train < 1 or n_test < 1: raise ConfigError("n_train and n_test must be at least 1, got " + str((n_train, n_test)))
    spec.check(schema)
    if seed is None: seed = spec.seed
    needed: int = n_train + n_test
    start: float = perf_counter()
    job = functools.partial(_candidate, spec, schema, thresholds, seed)
    reasons: RecordOptions = RecordOptions()
    pastes: RecordOptions = RecordOptions()
    recent: list = []
    accepted: list = []
    trials: int = 0
    chunk: int = max(32, 2 * needed) if threads == 1 else max(64, 4 * needed)

    while len(accepted) < needed:
        for index, sample, reason, paste in run_parallel(job, range(trials, trials + chunk), threads):
            trials += 1
            reasons.record(reason)
            if paste is not None: pastes.record(paste)
            recent.append(sample is not None)
            if len(recent) > window: recent.pop(0)
            if sample is None:
                logger.debug("Scene %d rejected: %s", index, reason)
            else:
                accepted.append((index, sample))
                if len(accepted) == needed: break
            if len(recent) == window and sum(recent) < min_rate * window:
                statistics: dict = {"trials": trials, "accepted": len(accepted), "reasons": reasons.as_dict()}
                raise GenerationError("acceptance rate below " + str(min_rate) + " over the last " + str(window) + " scenes (" + str(reasons) + ")", statistics)

    splits: list = ["train"] * n_train + ["test"] * n_test
    manifest: dict = {
        "format": "GSS1",
        "schema": SCHEMA_FILE,
        "schema_fingerprint": schema.fingerprint,
        "seed": int(seed),
        "scene_spec": spec.to_config(),
        "thresholds": thresholds.as_dict(),
        "statistics": {"trials": trials, "accepted": needed, "acceptance_rate": needed / trials, "reasons": reasons.as_dict(), "pastes": pastes.as_dict()},
        "samples": [],
    }
    for number, ((index, sample), split) in enumerate(zip(accepted, splits)):
        name: str = split + "/" + "{:06d}".format(number if split == "train" else number - n_train) + SAMPLE_SUFFIX
        manifest["samples"].append({"file": name, "split": split, "scene": index})
    if out_dir is not None:
        for split in ("train", "test"): os.makedirs(os.path.join(out_dir, split), exist_ok=True)
        save_schema(schema, os.path.join(out_dir, SCHEMA_FILE))
        for entry, (_, sample) in zip(manifest["samples"], accepted):
            write_sample(sample, os.path.join(out_dir, entry["file"]))
        write_json(os.path.join(out_dir, MANIFEST_NAME), manifest)
    else:
        manifest["data"] = [(split, sample) for split, (_, sample) in zip(splits, accepted)]
    logger.info("%d scenes accepted out of %d candidates (%.1f seconds); %s", needed, trials, perf_counter() - start, reasons)
    return manifest
