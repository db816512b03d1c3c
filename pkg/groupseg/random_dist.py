"""Seeded pseudorandom streams and samplers used by scene generation.

All randomness comes from numpy's PCG64 bit generator seeded through a
SeedSequence built from integer keys. The algorithm is fixed and portable, so
identical keys give identical streams on every platform and in every process.
"""

from typing import Callable
import numpy as np


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


_MASK64: int = (1 << 64) - 1


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Creates an independent PCG64 stream from a 64-bit seed and integer keys.

    Args:
        seed (int): Base seed (reduced to 64 bits)
        keys (int): Additional keys, e.g. the scene index

    Returns:
        np.random.Generator: Generator
    """
    entropy: list = [int(seed) & _MASK64] + [int(k) & _MASK64 for k in keys]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def uniform(rng: np.random.Generator, low: float, high: float) -> Callable[[], float]:
    """Generates a lambda expression drawing from the uniform distribution on [low, high).

    Args:
        rng (np.random.Generator): Generator
        low (float): Minimum value of the support
        high (float): Maximum value of the support

    Returns:
        Callable[[], float]: Lambda expression for the random number generator
    """
    assert high >= low
    return lambda: float(rng.uniform(low, high)) if high > low else float(low)


def integers(rng: np.random.Generator, low: int, high: int) -> Callable[[], int]:
    """Generates a lambda expression drawing integers uniformly from low..high (both included).

    Args:
        rng (np.random.Generator): Generator
        low (int): Smallest value
        high (int): Largest value

    Returns:
        Callable[[], int]: Lambda expression for the random number generator
    """
    assert high >= low
    return lambda: int(rng.integers(low, high + 1))


def gaussian_noise(rng: np.random.Generator, std: float, shape: tuple) -> np.ndarray:
    """Draws zero-mean Gaussian noise (zeros if std is 0; the stream is not advanced then).

    Args:
        rng (np.random.Generator): Generator
        std (float): Standard deviation
        shape (tuple): Array shape

    Returns:
        np.ndarray: Noise array
    """
    if std <= 0: return np.zeros(shape)
    return rng.normal(0.0, std, size=shape)
