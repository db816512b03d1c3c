"""Category taxonomy: groups G_0..G_M, void convention and index arithmetic."""

from typing import Optional
import hashlib
import numpy as np
from .config import parse_stanzas, read_text, to_bool
from .errors import ConfigError, SchemaError, VoidCategoryError


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


BACKGROUND_GROUP: int = 0
DONT_CARE: str = "dont_care"


class CategoryRef:
    """Reference of a category by global id and by (group, within-group index)."""
    __slots__ = ("__category_id", "__group_id", "__within_index")

    def __init__(self, category_id: int, group_id: int, within_index: int) -> None:
        """Reference of a category by global id and by (group, within-group index).

        Args:
            category_id (int): Global category id (0..N-1)
            group_id (int): Group id (0..M)
            within_index (int): Within-group index (1..g_i)
        """
        self.__category_id: int = category_id
        self.__group_id: int = group_id
        self.__within_index: int = within_index

    @property
    def category_id(self) -> int:
        return self.__category_id

    @property
    def group_id(self) -> int:
        return self.__group_id

    @property
    def within_index(self) -> int:
        return self.__within_index

    def __eq__(self, other) -> bool:
        if not isinstance(other, CategoryRef): return False
        return (self.__category_id, self.__group_id, self.__within_index) == (other.category_id, other.group_id, other.within_index)

    def __hash__(self) -> int:
        return hash((self.__category_id, self.__group_id, self.__within_index))

    def __repr__(self) -> str:
        return "CategoryRef(category_id={}, group_id={}, within_index={})".format(self.__category_id, self.__group_id, self.__within_index)


class GroupSchema:
    """Partition of N categories into the groups G_0 (background) .. G_M.

    Within each group the categories carry the indices 1..g_i in declaration
    order. Index 0 is the void slot ("no category of this group is present").
    Every foreground group has a void slot; the background group only has one
    if ``void_in_background`` is set. Instances are immutable.
    """
    __slots__ = ("__group_names", "__members", "__void_in_background", "__categories", "__ids", "__group_lookup", "__within_lookup", "__fingerprint")

    def __init__(self, groups: list, void_in_background: bool = False) -> None:
        """Partition of N categories into the groups G_0 (background) .. G_M.

        Args:
            groups (list[tuple[str, list[str]]]): Group names with their category names, background group first
            void_in_background (bool, optional): Does G_0 carry a void slot? Defaults to False.

        Raises:
            SchemaError: No groups, empty group, duplicate group or category name
        """
        if not groups: raise SchemaError("schema needs at least one group")
        group_names: list = []
        members: list = []
        categories: list = []
        ids: dict = {}
        group_lookup: list = []
        within_lookup: list = []
        for group_id, (name, names) in enumerate(groups):
            if name in group_names: raise SchemaError("duplicate group name '" + str(name) + "'")
            names = tuple(str(n) for n in names)
            if not names: raise SchemaError("group '" + str(name) + "' is empty")
            group_ids: list = []
            for within, category in enumerate(names, start=1):
                if category in ids: raise SchemaError("duplicate category name '" + category + "'")
                ids[category] = len(categories)
                group_ids.append(len(categories))
                categories.append(category)
                group_lookup.append(group_id)
                within_lookup.append(within)
            group_names.append(str(name))
            members.append(tuple(group_ids))

        self.__group_names: tuple = tuple(group_names)
        self.__members: tuple = tuple(members)
        self.__void_in_background: bool = bool(void_in_background)
        self.__categories: tuple = tuple(categories)
        self.__ids: dict = ids
        self.__group_lookup: np.ndarray = np.array(group_lookup, dtype=np.int64)
        self.__within_lookup: np.ndarray = np.array(within_lookup, dtype=np.int64)
        self.__group_lookup.setflags(write=False)
        self.__within_lookup.setflags(write=False)
        self.__fingerprint: str = hashlib.sha256(self.to_config().encode("utf-8")).hexdigest()

    @property
    def N(self) -> int:
        """Number of categories N.

        Returns:
            int: Number of categories
        """
        return len(self.__categories)

    @property
    def M(self) -> int:
        """Number of foreground groups M (the groups are G_0..G_M).

        Returns:
            int: Number of foreground groups
        """
        return len(self.__group_names) - 1

    @property
    def group_count(self) -> int:
        """Number of groups M+1.

        Returns:
            int: Number of groups
        """
        return len(self.__group_names)

    @property
    def void_in_background(self) -> bool:
        return self.__void_in_background

    @property
    def group_names(self) -> tuple:
        return self.__group_names

    @property
    def categories(self) -> tuple:
        """Category names ordered by category id.

        Returns:
            tuple[str]: Category names ordered by category id
        """
        return self.__categories

    @property
    def group_sizes(self) -> tuple:
        """Sizes g_i of all groups.

        Returns:
            tuple[int]: Sizes g_i of all groups
        """
        return tuple(len(m) for m in self.__members)

    def members(self, group_id: int) -> tuple:
        """Category ids of a group, ordered by within-group index.

        Args:
            group_id (int): Group id

        Returns:
            tuple[int]: Category ids C(i, 1) .. C(i, g_i)
        """
        self._check_group(group_id)
        return self.__members[group_id]

    def has_void(self, group_id: int) -> bool:
        """Does the group carry a void slot?

        Args:
            group_id (int): Group id

        Returns:
            bool: True if the q block of the group has a void entry at position 0
        """
        self._check_group(group_id)
        return group_id != BACKGROUND_GROUP or self.__void_in_background

    def void_offset(self, group_id: int) -> int:
        """Position of within-group index j in the q block is j - 1 + void_offset.

        Args:
            group_id (int): Group id

        Returns:
            int: 1 if the group has a void slot, else 0
        """
        return 1 if self.has_void(group_id) else 0

    @property
    def block_dims(self) -> tuple:
        """Dimensions of the q^i blocks (g_i + 1 with void slot, g_i without).

        Returns:
            tuple[int]: Dimensions of the q^i blocks
        """
        return tuple(len(m) + self.void_offset(i) for i, m in enumerate(self.__members))

    @property
    def activation_count(self) -> int:
        """Number of output activations of the grouped head: (M+1) + sum of the q block dimensions.

        Returns:
            int: Number of output activations of the grouped head
        """
        return self.group_count + sum(self.block_dims)

    def block_slices(self) -> list:
        """Channel slices of the p block followed by the q^0..q^M blocks.

        Returns:
            list[slice]: M+2 slices into the activation axis
        """
        slices: list = [slice(0, self.group_count)]
        start: int = self.group_count
        for dim in self.block_dims:
            slices.append(slice(start, start + dim))
            start += dim
        return slices

    @property
    def group_lookup(self) -> np.ndarray:
        """Group id per category id (read-only array of length N).

        Returns:
            np.ndarray: Group id per category id
        """
        return self.__group_lookup

    @property
    def within_lookup(self) -> np.ndarray:
        """Within-group index per category id (read-only array of length N).

        Returns:
            np.ndarray: Within-group index per category id
        """
        return self.__within_lookup

    def category_id(self, name: str) -> int:
        """Category id of a category name.

        Args:
            name (str): Category name

        Raises:
            SchemaError: Unknown name

        Returns:
            int: Category id
        """
        if name not in self.__ids: raise SchemaError("unknown category '" + str(name) + "'")
        return self.__ids[name]

    def group_id(self, name: str) -> int:
        if name not in self.__group_names: raise SchemaError("unknown group '" + str(name) + "'")
        return self.__group_names.index(name)

    @property
    def dont_care(self) -> Optional[int]:
        """Category id of the optional ``dont_care`` category.

        Returns:
            Optional[int]: Category id or None if the schema has no such category
        """
        return self.__ids.get(DONT_CARE)

    def group_of(self, category_id: int) -> tuple:
        """Returns (i, j) with category_id = C(i, j).

        Args:
            category_id (int): Category id

        Raises:
            SchemaError: Category id out of range

        Returns:
            tuple[int, int]: Group id and within-group index (j >= 1)
        """
        if not 0 <= category_id < self.N: raise SchemaError("category id " + str(category_id) + " out of range 0.." + str(self.N - 1))
        return int(self.__group_lookup[category_id]), int(self.__within_lookup[category_id])

    def category_of(self, group_id: int, within_index: int) -> int:
        """Reverse mapping C(i, j).

        Args:
            group_id (int): Group id
            within_index (int): Within-group index (1..g_i)

        Raises:
            VoidCategoryError: within_index is 0 (void has no category)
            SchemaError: Indices out of range

        Returns:
            int: Category id
        """
        self._check_group(group_id)
        if within_index == 0: raise VoidCategoryError("within-group index 0 of group " + str(group_id) + " is void and has no category")
        members: tuple = self.__members[group_id]
        if not 1 <= within_index <= len(members): raise SchemaError("within-group index " + str(within_index) + " out of range 1.." + str(len(members)) + " for group " + str(group_id))
        return members[within_index - 1]

    def ref(self, category_id: int) -> CategoryRef:
        group_id, within_index = self.group_of(category_id)
        return CategoryRef(category_id, group_id, within_index)

    def _check_group(self, group_id: int) -> None:
        if not 0 <= group_id < len(self.__group_names): raise SchemaError("group id " + str(group_id) + " out of range 0.." + str(self.M))

    @property
    def fingerprint(self) -> str:
        """SHA-256 of the canonical configuration text.

        Returns:
            str: Hex digest
        """
        return self.__fingerprint

    def to_config(self) -> str:
        """Canonical configuration text (see parse_schema).

        Returns:
            str: Configuration text
        """
        lines: list = ["void_in_background " + ("true" if self.__void_in_background else "false")]
        for name, members in zip(self.__group_names, self.__members):
            lines.append("group " + name)
            for category_id in members: lines.append("    " + self.__categories[category_id])
        return "\n".join(lines) + "\n"

    def __eq__(self, other) -> bool:
        if not isinstance(other, GroupSchema): return False
        return self.__fingerprint == other.fingerprint

    def __hash__(self) -> int:
        return hash(self.__fingerprint)

    def __str__(self) -> str:
        return "GroupSchema(M={}, N={}, sizes={}, void_in_background={})".format(self.M, self.N, self.group_sizes, self.__void_in_background)


def build_schema(spec: list, void_in_background: bool = False) -> GroupSchema:
    """Builds a schema from group declarations. Category ids are assigned in declaration order.

    Args:
        spec (list[tuple[str, list[str]]]): (group name, category names) pairs, background group first
        void_in_background (bool, optional): Does G_0 carry a void slot? Defaults to False.

    Returns:
        GroupSchema: Validated schema
    """
    return GroupSchema(list(spec), void_in_background)


def group_of(schema: GroupSchema, category_id: int) -> tuple:
    return schema.group_of(category_id)


def category_of(schema: GroupSchema, group_id: int, within_index: int) -> int:
    return schema.category_of(group_id, within_index)


def activation_count(schema: GroupSchema) -> int:
    """Number of activations of the grouped head; 2(M+1)+N if every group has a void slot.

    Args:
        schema (GroupSchema): Schema

    Returns:
        int: Number of activations
    """
    return schema.activation_count


def parse_schema(text: str, path: Optional[str] = None) -> GroupSchema:
    """Parses a schema configuration.

    Format::

        void_in_background false
        group background
            wall
            floor
        group boxes
            crate

    Args:
        text (str): Configuration text
        path (Optional[str], optional): File name for error messages. Defaults to None.

    Raises:
        ConfigError: Syntax error, unknown key, invalid group content

    Returns:
        GroupSchema: Parsed schema
    """
    parsed = parse_stanzas(text, ("void_in_background",), path=path)
    void_in_background: bool = False
    if parsed.has("void_in_background"):
        void_in_background = to_bool(parsed.args("void_in_background", 1)[0], path, parsed.line("void_in_background"))
    spec: list = []
    for stanza in parsed.stanzas:
        names: list = []
        for line, tokens in stanza.members:
            if len(tokens) != 1: raise ConfigError("category line must hold exactly one name", path, line)
            names.append(tokens[0])
        spec.append((stanza.name, names))
    if not spec: raise ConfigError("no group declared", path)
    try:
        return build_schema(spec, void_in_background)
    except SchemaError as e:
        raise ConfigError(str(e), path) from None


def load_schema(path: str) -> GroupSchema:
    return parse_schema(read_text(path), str(path))


def save_schema(schema: GroupSchema, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as file:
        file.write(schema.to_config())
