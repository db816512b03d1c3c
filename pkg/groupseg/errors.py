"""Exception classes raised by the groupseg package."""

from typing import Optional


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


class GroupsegError(Exception):
    """Base class of all errors raised by groupseg."""


class ConfigError(GroupsegError, ValueError):
    """Error in a text configuration file."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None) -> None:
        """Error in a text configuration file.

        Args:
            message (str): Description of the problem
            path (Optional[str], optional): Path of the configuration file. Defaults to None.
            line (Optional[int], optional): 1-based line number. Defaults to None.
        """
        location: str = ""
        if path is not None: location += str(path)
        if line is not None: location += ("" if not location else ":") + "line " + str(line)
        super().__init__(location + ": " + message if location else message)
        self.path: Optional[str] = path
        self.line: Optional[int] = line


class SchemaError(GroupsegError, ValueError):
    """Invalid group schema or invalid category / group index."""


class VoidCategoryError(SchemaError):
    """The within-group index 0 (void) was used where a category is required."""


class FormatError(GroupsegError, ValueError):
    """Malformed sample, manifest or checkpoint file."""


class ShapeError(GroupsegError, ValueError):
    """Array dimensions do not match."""


class PlausibilityError(GroupsegError, ValueError):
    """Ground truth where the visible category is absent from its own group map."""

    def __init__(self, row: int, col: int, group: int, message: str = "") -> None:
        super().__init__("pixel (" + str(row) + ", " + str(col) + "), group " + str(group) + ": " + (message or "visible category missing from its group map"))
        self.row: int = row
        self.col: int = col
        self.group: int = group


class PaletteError(GroupsegError, ValueError):
    """Label without palette entry."""


class PlacementError(GroupsegError, RuntimeError):
    """An object could not be placed in a scene."""


class PasteError(PlacementError):
    """Paste augmentation could not be applied."""


class GenerationError(GroupsegError, RuntimeError):
    """Dataset generation aborted."""

    def __init__(self, message: str, statistics: Optional[dict] = None) -> None:
        super().__init__(message)
        self.statistics: dict = statistics if statistics is not None else {}


class NonFiniteError(GroupsegError, ValueError):
    """NaN or infinite values where finite values are required."""


class CacheError(GroupsegError, RuntimeError):
    """Backward pass invoked without a matching forward pass."""


class DivergenceError(GroupsegError, RuntimeError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, checkpoint: Optional[str] = None) -> None:
        super().__init__(message + ("" if checkpoint is None else " (last checkpoint: " + str(checkpoint) + ")"))
        self.checkpoint: Optional[str] = checkpoint


class MetricError(GroupsegError, ValueError):
    """Metric undefined for the given inputs."""
