import numpy as np
import pytest
from groupseg.dataset import Sample
from groupseg.errors import PlacementError
from groupseg.presets import toy_scene_spec, toy_schema
from groupseg.random_dist import derive_rng
from groupseg.scenegen import generate_scene
from groupseg.schema import build_schema


@pytest.fixture
def toy():
    return toy_schema()


@pytest.fixture
def tiny_sample():
    """4 x 4 toy scene: wall row on top of floor, a cabinet partly hidden behind a ball.

    Category ids: floor 0, wall 1, cabinet 2, ball 5.
    """
    background = np.array([[2, 2, 2, 2], [1, 1, 1, 1], [1, 1, 1, 1], [1, 1, 1, 1]])
    furniture = np.zeros((4, 4), dtype=int)
    furniture[1:3, 1:3] = 1
    props = np.zeros((4, 4), dtype=int)
    props[2:4, 2:4] = 1
    visible = np.array([[1, 1, 1, 1], [0, 2, 2, 0], [0, 2, 5, 5], [0, 0, 5, 5]])
    depth = np.where(visible == 5, 2.0, np.where(visible == 2, 4.0, 9.0))
    return Sample(depth, visible, np.stack([background, furniture, props]), 8)


@pytest.fixture
def toy_scenes(toy):
    spec = toy_scene_spec(size=16)
    scenes = []
    k = 0
    while len(scenes) < 12:
        try:
            scenes.append(generate_scene(spec, toy, derive_rng(5, k)))
        except PlacementError:
            pass
        k += 1
    return scenes


def _random_schema(rng, void_in_background=False, max_groups=4, max_size=4):
    names = iter("c" + str(k) for k in range(1000))
    groups = [("g" + str(i), [next(names) for _ in range(int(rng.integers(1, max_size + 1)))]) for i in range(int(rng.integers(2, max_groups + 1)))]
    return build_schema(groups, void_in_background)


def _random_sample(schema, shape, rng):
    """Random plausible sample: random visible map, random group maps consistent with it."""
    visible = rng.integers(schema.N, size=shape)
    maps = np.zeros((schema.group_count,) + tuple(shape), dtype=np.int64)
    for i in range(schema.group_count):
        maps[i] = rng.integers(0 if schema.has_void(i) else 1, schema.group_sizes[i] + 1, size=shape)
    rows, cols = np.indices(shape)
    maps[schema.group_lookup[visible], rows, cols] = schema.within_lookup[visible]
    return Sample(rng.uniform(1, 9, size=shape), visible, maps, schema.N)


@pytest.fixture
def random_schema():
    return _random_schema


@pytest.fixture
def random_sample():
    return _random_sample
