"""Running records of losses, metric values and rejection reasons."""

from typing import Any
from math import sqrt, fsum
import collections


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


class RecordDiscrete:
    """Running record of scalar values (per-batch losses, per-sample metric values)."""
    __slots__ = ("__values",)

    def __init__(self) -> None:
        self.__values: list = []

    def record(self, value: float) -> None:
        self.__values.append(float(value))

    @property
    def count(self) -> int:
        return len(self.__values)

    @property
    def mean(self) -> float:
        """Mean of the recorded values (0 while empty).

        Returns:
            float: Mean
        """
        # fsum does not depend on the recording order
        return fsum(self.__values) / len(self.__values) if self.__values else 0.0

    @property
    def sd(self) -> float:
        """Sample standard deviation (0 for fewer than 2 values).

        Returns:
            float: Standard deviation
        """
        count: int = len(self.__values)
        if count < 2: return 0.0
        mean: float = self.mean
        return sqrt(max(0.0, fsum((v - mean)**2 for v in self.__values) / (count - 1)))

    def __str__(self) -> str:
        return "count = {}, mean = {:.4f}, sd = {:.4f}".format(self.count, self.mean, self.sd)


class RecordOptions:
    """Frequencies of discrete outcomes, such as the reasons for rejecting a generated scene."""
    __slots__ = ("__options",)

    def __init__(self) -> None:
        self.__options: collections.Counter = collections.Counter()

    def record(self, option: Any) -> None:
        self.__options[option] += 1

    @property
    def count(self) -> int:
        return sum(self.__options.values())

    def as_dict(self) -> dict:
        """Frequencies keyed by the string form of the outcomes, sorted for stable JSON.

        Returns:
            dict: Outcome -> frequency
        """
        return {str(option): self.__options[option] for option in sorted(self.__options, key=str)}

    def __str__(self) -> str:
        total: int = self.count
        if total == 0: return "count = 0"
        return "count = {}, ".format(total) + ", ".join("{} = {:.1%}".format(option, frequency / total) for option, frequency in self.as_dict().items())
