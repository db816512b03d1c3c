"""Parser for the line-oriented stanza configuration format.

All configuration files of groupseg share one layout::

    # comment
    key value [value ...]
    group <name>
        member tokens
        member tokens

Top-level lines start in column 0. Lines indented by spaces or tabs belong to
the most recent ``group`` stanza. Unknown top-level keys are rejected.
"""

from typing import Iterable, Optional
from .errors import ConfigError


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


class Stanza:
    """A ``group <name>`` block with its indented member lines."""
    __slots__ = ("__name", "__line", "__members")

    def __init__(self, name: str, line: int) -> None:
        """A ``group <name>`` block with its indented member lines.

        Args:
            name (str): Name given after the stanza keyword
            line (int): Line number of the stanza header
        """
        self.__name: str = name
        self.__line: int = line
        self.__members: list = []

    def add(self, line: int, tokens: list) -> None:
        self.__members.append((line, tokens))

    @property
    def name(self) -> str:
        """Name given after the stanza keyword.

        Returns:
            str: Name given after the stanza keyword
        """
        return self.__name

    @property
    def line(self) -> int:
        """Line number of the stanza header.

        Returns:
            int: Line number of the stanza header
        """
        return self.__line

    @property
    def members(self) -> list:
        """Member lines as (line number, tokens) pairs.

        Returns:
            list[tuple[int, list[str]]]: Member lines
        """
        return self.__members


class ParsedConfig:
    """Result of parsing a stanza configuration text."""
    __slots__ = ("__path", "__entries", "__stanzas")

    def __init__(self, path: Optional[str] = None) -> None:
        self.__path: Optional[str] = path
        self.__entries: dict = {}
        self.__stanzas: list = []

    @property
    def path(self) -> Optional[str]:
        return self.__path

    @property
    def entries(self) -> dict:
        """Top-level entries: key -> (line number, arguments).

        Returns:
            dict[str, tuple[int, list[str]]]: Top-level entries
        """
        return self.__entries

    @property
    def stanzas(self) -> list:
        """Group stanzas in declaration order.

        Returns:
            list[Stanza]: Group stanzas in declaration order
        """
        return self.__stanzas

    def has(self, key: str) -> bool:
        return key in self.__entries

    def args(self, key: str, count: Optional[int] = None) -> list:
        """Returns the arguments of a top-level key.

        Args:
            key (str): Top-level key
            count (Optional[int], optional): Required number of arguments. Defaults to None (any).

        Returns:
            list[str]: Arguments of the key
        """
        line, args = self.__entries[key]
        if count is not None and len(args) != count:
            raise ConfigError("'" + key + "' expects " + str(count) + " value(s), got " + str(len(args)), self.__path, line)
        return args

    def line(self, key: str) -> int:
        return self.__entries[key][0]

    def error(self, message: str, line: Optional[int] = None) -> ConfigError:
        return ConfigError(message, self.__path, line)


def parse_stanzas(text: str, top_keys: Iterable[str], stanza_key: str = "group", path: Optional[str] = None) -> ParsedConfig:
    """Parses a stanza configuration text.

    Args:
        text (str): Configuration text
        top_keys (Iterable[str]): Allowed top-level keys (besides the stanza keyword)
        stanza_key (str, optional): Keyword opening a stanza. Defaults to "group".
        path (Optional[str], optional): File name used in error messages. Defaults to None.

    Raises:
        ConfigError: Unknown or duplicate key, member line outside of a stanza, stanza without name

    Returns:
        ParsedConfig: Parsed entries and stanzas
    """
    allowed: set = set(top_keys)
    result: ParsedConfig = ParsedConfig(path)
    current: Optional[Stanza] = None

    for number, raw in enumerate(text.splitlines(), start=1):
        content: str = raw.split("#", 1)[0].rstrip()
        if not content.strip(): continue
        tokens: list = content.split()
        if content[0] in " \t":
            if current is None: raise ConfigError("indented line outside of a '" + stanza_key + "' stanza", path, number)
            current.add(number, tokens)
            continue
        key: str = tokens[0]
        if key == stanza_key:
            if len(tokens) != 2: raise ConfigError("'" + stanza_key + "' expects exactly one name", path, number)
            current = Stanza(tokens[1], number)
            result.stanzas.append(current)
            continue
        if key not in allowed: raise ConfigError("unknown key '" + key + "'", path, number)
        if key in result.entries: raise ConfigError("duplicate key '" + key + "'", path, number)
        result.entries[key] = (number, tokens[1:])
        current = None

    return result


def to_bool(value: str, path: Optional[str] = None, line: Optional[int] = None) -> bool:
    """Converts a ``true`` / ``false`` token.

    Args:
        value (str): Token
        path (Optional[str], optional): File name for error messages. Defaults to None.
        line (Optional[int], optional): Line number for error messages. Defaults to None.

    Returns:
        bool: Parsed flag
    """
    lowered: str = value.lower()
    if lowered == "true": return True
    if lowered == "false": return False
    raise ConfigError("expected true or false, got '" + value + "'", path, line)


def to_int(value: str, path: Optional[str] = None, line: Optional[int] = None) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError("expected an integer, got '" + value + "'", path, line) from None


def to_float(value: str, path: Optional[str] = None, line: Optional[int] = None) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError("expected a number, got '" + value + "'", path, line) from None


def read_text(path: str) -> str:
    """Reads a configuration file.

    Args:
        path (str): File path

    Raises:
        ConfigError: The file does not exist or cannot be read

    Returns:
        str: File content
    """
    try:
        with open(path, "r", encoding="utf-8") as file:
            return file.read()
    except OSError as e:
        raise ConfigError("cannot read configuration file: " + str(e.strerror), str(path)) from None
