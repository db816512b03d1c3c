"""Samples, region sets, the GSS1 sample file format and dataset directories."""

from typing import Optional
import colorsys
import json
import os
import struct
import numpy as np
from PIL import Image
from .config import parse_stanzas, read_text, to_int
from .errors import ConfigError, FormatError, PaletteError, PlausibilityError, SchemaError, ShapeError
from .schema import GroupSchema, load_schema


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


SAMPLE_MAGIC: bytes = b"GSS1"
MANIFEST_NAME: str = "manifest.json"
VOID: int = -1  # void marker in category-id label maps
_HEADER = struct.Struct("<4sHHHH")
_U16_MAX: int = 0xFFFF


class Sample:
    """One training example: depth image, visible label map and M+1 per-group amodal label maps.

    Group maps hold within-group indices: 0 is void, j >= 1 means category
    C(i, j) is present (visible or occluded). Arrays are read-only and
    addressed row-major from the top-left pixel.
    """
    __slots__ = ("__depth", "__visible", "__group_maps", "__category_count")

    def __init__(self, depth: np.ndarray, visible: np.ndarray, group_maps: np.ndarray, category_count: int) -> None:
        """One training example.

        Args:
            depth (np.ndarray): H x W depth values
            visible (np.ndarray): H x W visible category ids
            group_maps (np.ndarray): (M+1) x H x W within-group indices
            category_count (int): Number of categories N of the schema

        Raises:
            ShapeError: Inconsistent dimensions
        """
        depth = np.array(depth, dtype=np.float32, order="C")
        visible = np.array(visible, dtype=np.uint16, order="C")
        group_maps = np.array(group_maps, dtype=np.uint16, order="C")
        if depth.ndim != 2: raise ShapeError("depth must be 2-dimensional, got shape " + str(depth.shape))
        if visible.shape != depth.shape: raise ShapeError("visible map shape " + str(visible.shape) + " differs from depth shape " + str(depth.shape))
        if group_maps.ndim != 3 or group_maps.shape[1:] != depth.shape or group_maps.shape[0] < 1:
            raise ShapeError("group maps shape " + str(group_maps.shape) + " does not match depth shape " + str(depth.shape))
        for array in (depth, visible, group_maps): array.setflags(write=False)
        self.__depth: np.ndarray = depth
        self.__visible: np.ndarray = visible
        self.__group_maps: np.ndarray = group_maps
        self.__category_count: int = int(category_count)

    @property
    def depth(self) -> np.ndarray:
        return self.__depth

    @property
    def visible(self) -> np.ndarray:
        return self.__visible

    @property
    def group_maps(self) -> np.ndarray:
        return self.__group_maps

    @property
    def category_count(self) -> int:
        return self.__category_count

    @property
    def height(self) -> int:
        return self.__depth.shape[0]

    @property
    def width(self) -> int:
        return self.__depth.shape[1]

    @property
    def group_count(self) -> int:
        return self.__group_maps.shape[0]

    def replace(self, depth: Optional[np.ndarray] = None, visible: Optional[np.ndarray] = None, group_maps: Optional[np.ndarray] = None) -> "Sample":
        """Returns a copy with some arrays exchanged.

        Returns:
            Sample: New sample
        """
        return Sample(self.__depth if depth is None else depth, self.__visible if visible is None else visible, self.__group_maps if group_maps is None else group_maps, self.__category_count)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample): return False
        return sample_to_bytes(self) == sample_to_bytes(other)

    def __repr__(self) -> str:
        return "Sample(H={}, W={}, groups={}, N={})".format(self.height, self.width, self.group_count, self.__category_count)


class RegionSets:
    """Pixel sets Omega_c^vis, Omega_c^pres (per category) and Omega_i^void (per group) as boolean masks."""
    __slots__ = ("__vis", "__pres", "__void")

    def __init__(self, vis: np.ndarray, pres: np.ndarray, void: np.ndarray) -> None:
        """Pixel sets as boolean masks.

        Args:
            vis (np.ndarray): N x H x W visible masks
            pres (np.ndarray): N x H x W present masks
            void (np.ndarray): (M+1) x H x W void masks
        """
        self.__vis: np.ndarray = np.asarray(vis, dtype=bool)
        self.__pres: np.ndarray = np.asarray(pres, dtype=bool)
        self.__void: np.ndarray = np.asarray(void, dtype=bool)
        if self.__vis.shape != self.__pres.shape or self.__vis.shape[1:] != self.__void.shape[1:]:
            raise ShapeError("region masks have inconsistent shapes " + str(self.__vis.shape) + ", " + str(self.__pres.shape) + ", " + str(self.__void.shape))

    @property
    def vis(self) -> np.ndarray:
        return self.__vis

    @property
    def pres(self) -> np.ndarray:
        return self.__pres

    @property
    def occ(self) -> np.ndarray:
        """Present but not visible: Omega_c^pres minus Omega_c^vis.

        Returns:
            np.ndarray: N x H x W occluded masks
        """
        return self.__pres & ~self.__vis

    @property
    def void(self) -> np.ndarray:
        return self.__void

    @property
    def shape(self) -> tuple:
        """Image shape (H, W).

        Returns:
            tuple[int, int]: Image shape
        """
        return self.__vis.shape[1:]

    @property
    def category_count(self) -> int:
        return self.__vis.shape[0]

    @property
    def group_count(self) -> int:
        return self.__void.shape[0]

    def visible_labels(self) -> np.ndarray:
        """Visible category id per pixel (the visible masks partition the image).

        Returns:
            np.ndarray: H x W category ids
        """
        return np.argmax(self.__vis, axis=0)


def regions_from_sample(sample: Sample, schema: GroupSchema) -> RegionSets:
    """Derives the region sets of a sample.

    Args:
        sample (Sample): Sample
        schema (GroupSchema): Schema the sample was generated with

    Raises:
        SchemaError: Sample dimensions or label values do not fit the schema
        PlausibilityError: The visible category is not present in its own group map, or a group without void slot holds 0

    Returns:
        RegionSets: Visible, present and void masks
    """
    if sample.group_count != schema.group_count or sample.category_count != schema.N:
        raise SchemaError("sample has " + str(sample.group_count) + " groups / " + str(sample.category_count) + " categories, schema has " + str(schema.group_count) + " / " + str(schema.N))
    visible: np.ndarray = sample.visible.astype(np.int64)
    if visible.size and visible.max() >= schema.N:
        row, col = np.argwhere(visible >= schema.N)[0]
        raise SchemaError("pixel (" + str(row) + ", " + str(col) + "): visible category id " + str(visible[row, col]) + " out of range")
    group_maps: np.ndarray = sample.group_maps.astype(np.int64)
    for i, size in enumerate(schema.group_sizes):
        if group_maps[i].size and group_maps[i].max() > size:
            row, col = np.argwhere(group_maps[i] > size)[0]
            raise SchemaError("pixel (" + str(row) + ", " + str(col) + "): group " + str(i) + " index " + str(group_maps[i][row, col]) + " exceeds group size " + str(size))
        if not schema.has_void(i) and (group_maps[i] == 0).any():
            row, col = np.argwhere(group_maps[i] == 0)[0]
            raise PlausibilityError(int(row), int(col), i, "group has no void slot but the group map holds 0")

    visible_group: np.ndarray = schema.group_lookup[visible]
    visible_within: np.ndarray = schema.within_lookup[visible]
    rows, cols = np.indices(visible.shape)
    mismatch: np.ndarray = group_maps[visible_group, rows, cols] != visible_within
    if mismatch.any():
        row, col = np.argwhere(mismatch)[0]
        found: int = int(group_maps[visible_group[row, col], row, col])
        message: str = "visible group is void" if found == 0 else "group map holds index " + str(found) + " instead of visible index " + str(visible_within[row, col])
        raise PlausibilityError(int(row), int(col), int(visible_group[row, col]), message)

    ids: np.ndarray = np.arange(schema.N)[:, None, None]
    vis: np.ndarray = visible[None] == ids
    pres: np.ndarray = group_maps[schema.group_lookup] == schema.within_lookup[:, None, None]
    void: np.ndarray = group_maps == 0
    return RegionSets(vis, pres, void)


def to_group_maps(regions: RegionSets, schema: GroupSchema) -> np.ndarray:
    """Re-materializes the group maps from present masks.

    Args:
        regions (RegionSets): Region sets
        schema (GroupSchema): Schema

    Returns:
        np.ndarray: (M+1) x H x W within-group indices
    """
    maps: np.ndarray = np.zeros((schema.group_count,) + tuple(regions.shape), dtype=np.uint16)
    for c in range(schema.N):
        i, j = schema.group_of(c)
        maps[i][regions.pres[c]] = j
    return maps


def sample_to_bytes(sample: Sample) -> bytes:
    """Serializes a sample in the GSS1 format.

    Args:
        sample (Sample): Sample

    Raises:
        FormatError: A dimension does not fit into 16 bits

    Returns:
        bytes: File content
    """
    dims: tuple = (sample.height, sample.width, sample.group_count, sample.category_count)
    names: tuple = ("height", "width", "group count", "category count")
    for name, value in zip(names, dims):
        if value > _U16_MAX: raise FormatError(name + " " + str(value) + " exceeds " + str(_U16_MAX))
    parts: list = [_HEADER.pack(SAMPLE_MAGIC, *dims)]
    parts.append(sample.depth.astype("<f4").tobytes())
    parts.append(sample.visible.astype("<u2").tobytes())
    parts.append(sample.group_maps.astype("<u2").tobytes())
    return b"".join(parts)


def sample_from_bytes(data: bytes, name: str = "<bytes>") -> Sample:
    """Parses a GSS1 sample.

    Args:
        data (bytes): File content
        name (str, optional): Name used in error messages. Defaults to "<bytes>".

    Raises:
        FormatError: Wrong magic, truncated or oversized content

    Returns:
        Sample: Sample
    """
    if len(data) < _HEADER.size: raise FormatError(name + ": truncated header (" + str(len(data)) + " bytes)")
    magic, height, width, groups, categories = _HEADER.unpack_from(data, 0)
    if magic != SAMPLE_MAGIC: raise FormatError(name + ": bad magic " + repr(magic) + ", expected " + repr(SAMPLE_MAGIC))
    pixels: int = height * width
    expected: int = _HEADER.size + pixels * 4 + pixels * 2 + groups * pixels * 2
    if len(data) < expected: raise FormatError(name + ": truncated file (" + str(len(data)) + " of " + str(expected) + " bytes)")
    if len(data) > expected: raise FormatError(name + ": " + str(len(data) - expected) + " trailing bytes")
    offset: int = _HEADER.size
    depth = np.frombuffer(data, dtype="<f4", count=pixels, offset=offset).reshape(height, width)
    offset += pixels * 4
    visible = np.frombuffer(data, dtype="<u2", count=pixels, offset=offset).reshape(height, width)
    offset += pixels * 2
    group_maps = np.frombuffer(data, dtype="<u2", count=groups * pixels, offset=offset).reshape(groups, height, width)
    return Sample(depth, visible, group_maps, categories)


def write_sample(sample: Sample, path: str) -> None:
    data: bytes = sample_to_bytes(sample)
    with open(path, "wb") as file:
        file.write(data)


def read_sample(path: str) -> Sample:
    with open(path, "rb") as file:
        data: bytes = file.read()
    return sample_from_bytes(data, str(path))


def write_json(path: str, data: dict) -> None:
    """Writes JSON with sorted keys and a trailing newline (byte-stable output).

    Args:
        path (str): File path
        data (dict): JSON-serializable data
    """
    tmp: str = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as file:
        file.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


class Dataset:
    """Dataset directory: ``manifest.json``, the schema configuration and the sample files."""
    __slots__ = ("__directory", "__manifest", "__schema")

    def __init__(self, directory: str) -> None:
        """Dataset directory.

        Args:
            directory (str): Directory containing ``manifest.json``

        Raises:
            FormatError: Missing or malformed manifest
        """
        self.__directory: str = str(directory)
        path: str = os.path.join(self.__directory, MANIFEST_NAME)
        try:
            with open(path, "r", encoding="utf-8") as file:
                manifest = json.load(file)
        except OSError:
            raise FormatError("no dataset manifest at " + path) from None
        except json.JSONDecodeError as e:
            raise FormatError(path + ": " + str(e)) from None
        for key in ("schema", "samples", "seed"):
            if key not in manifest: raise FormatError(path + ": missing key '" + key + "'")
        self.__manifest: dict = manifest
        self.__schema: GroupSchema = load_schema(os.path.join(self.__directory, manifest["schema"]))

    @property
    def directory(self) -> str:
        return self.__directory

    @property
    def manifest(self) -> dict:
        return self.__manifest

    @property
    def schema(self) -> GroupSchema:
        return self.__schema

    @property
    def seed(self) -> int:
        return int(self.__manifest["seed"])

    def files(self, split: str) -> list:
        """Sample file paths of a split in manifest order.

        Args:
            split (str): Split tag ("train" or "test")

        Returns:
            list[str]: File paths
        """
        return [os.path.join(self.__directory, entry["file"]) for entry in self.__manifest["samples"] if entry["split"] == split]

    def samples(self, split: str) -> list:
        return [read_sample(path) for path in self.files(split)]

    def __len__(self) -> int:
        return len(self.__manifest["samples"])


def group_labelmap(sample: Sample, schema: GroupSchema, group_id: int) -> np.ndarray:
    """Converts a group map into a category-id label map with VOID for absence.

    Args:
        sample (Sample): Sample
        schema (GroupSchema): Schema
        group_id (int): Group id

    Returns:
        np.ndarray: H x W category ids (VOID where the group is absent)
    """
    table: np.ndarray = np.array((VOID,) + schema.members(group_id), dtype=np.int64)
    return table[sample.group_maps[group_id].astype(np.int64)]


class Palette:
    """RGB colors per category id; void is always black."""
    __slots__ = ("__colors",)

    def __init__(self, colors: dict) -> None:
        """RGB colors per category id; void is always black.

        Args:
            colors (dict[int, tuple[int, int, int]]): Color per category id
        """
        self.__colors: dict = {int(k): tuple(int(c) for c in v) for k, v in colors.items()}

    @property
    def colors(self) -> dict:
        return self.__colors

    def lookup_table(self, labels: np.ndarray) -> tuple:
        """Builds a color lookup table for the labels of a map.

        Args:
            labels (np.ndarray): Label map (category ids, VOID for absence)

        Raises:
            PaletteError: Label without palette entry

        Returns:
            tuple[np.ndarray, np.ndarray]: Index map into the table and the (K, 3) table
        """
        values, inverse = np.unique(labels, return_inverse=True)
        table: np.ndarray = np.zeros((len(values), 3), dtype=np.uint8)
        for k, value in enumerate(values):
            if value == VOID: continue
            if int(value) not in self.__colors: raise PaletteError("label " + str(int(value)) + " has no palette entry")
            table[k] = self.__colors[int(value)]
        return inverse.reshape(labels.shape), table


def default_palette(schema: GroupSchema) -> Palette:
    """Distinct, non-black colors in category order (golden-ratio hue steps).

    Args:
        schema (GroupSchema): Schema

    Returns:
        Palette: Palette
    """
    colors: dict = {}
    for c in range(schema.N):
        hue: float = (c * 0.618033988749895) % 1.0
        value: float = 0.95 if c % 2 == 0 else 0.75
        r, g, b = colorsys.hsv_to_rgb(hue, 0.65, value)
        colors[c] = (int(round(r * 255)), int(round(g * 255)), int(round(b * 255)))
    return Palette(colors)


def parse_palette(text: str, schema: GroupSchema, path: Optional[str] = None) -> Palette:
    """Parses a palette configuration: one ``<category> <r> <g> <b>`` line per category.

    Args:
        text (str): Configuration text
        schema (GroupSchema): Schema naming the categories
        path (Optional[str], optional): File name for error messages. Defaults to None.

    Returns:
        Palette: Palette (categories without line are missing and raise on use)
    """
    parsed = parse_stanzas(text, schema.categories, path=path)
    colors: dict = {}
    for name, (line, args) in parsed.entries.items():
        if len(args) != 3: raise ConfigError("color needs three components", path, line)
        rgb: tuple = tuple(to_int(a, path, line) for a in args)
        if any(not 0 <= v <= 255 for v in rgb): raise ConfigError("color components must be in 0..255", path, line)
        colors[schema.category_id(name)] = rgb
    return Palette(colors)


def load_palette(path: str, schema: GroupSchema) -> Palette:
    return parse_palette(read_text(path), schema, str(path))


def export_labelmap_image(labelmap: np.ndarray, palette: Palette, path: str) -> None:
    """Writes a label map as binary PPM image; VOID pixels are black.

    Args:
        labelmap (np.ndarray): H x W category ids (VOID for absence)
        palette (Palette): Colors
        path (str): Output file
    """
    labels: np.ndarray = np.asarray(labelmap, dtype=np.int64)
    index, table = palette.lookup_table(labels)
    rgb: np.ndarray = np.ascontiguousarray(table[index])
    Image.fromarray(rgb, "RGB").save(path, format="PPM")


def export_depth_image(depth: np.ndarray, path: str) -> None:
    """Writes a depth map as binary PGM image (near = bright).

    Args:
        depth (np.ndarray): H x W depth values
        path (str): Output file
    """
    values: np.ndarray = np.asarray(depth, dtype=np.float64)
    low, high = float(values.min()), float(values.max())
    scaled: np.ndarray = np.zeros(values.shape) if high <= low else (high - values) / (high - low)
    gray: np.ndarray = np.ascontiguousarray(np.round(scaled * 255).astype(np.uint8))
    Image.fromarray(gray, "L").save(path, format="PPM")
