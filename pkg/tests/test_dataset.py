import numpy as np
import pytest
from PIL import Image
from groupseg.dataset import SAMPLE_MAGIC, VOID, Palette, Sample, default_palette, export_depth_image, export_labelmap_image, group_labelmap, parse_palette, read_sample, regions_from_sample, sample_from_bytes, sample_to_bytes, to_group_maps, write_sample
from groupseg.errors import ConfigError, FormatError, PaletteError, PlausibilityError, SchemaError
from groupseg.presets import toy_schema


def test_regions_of_tiny_sample(tiny_sample, toy):
    regions = regions_from_sample(tiny_sample, toy)
    floor, wall, cabinet, ball = 0, 1, 2, 5
    assert regions.vis[ball].sum() == 4
    assert regions.occ[cabinet].sum() == 1
    assert regions.occ[cabinet][2, 2]
    assert regions.occ[floor].sum() == 7
    assert not regions.occ[wall].any()
    assert regions.void[1].sum() == 12
    assert not regions.void[0].any()
    np.testing.assert_array_equal(regions.visible_labels(), tiny_sample.visible)


def test_region_invariants(toy_scenes, toy):
    for sample in toy_scenes:
        regions = regions_from_sample(sample, toy)
        np.testing.assert_array_equal(regions.vis.sum(axis=0), 1)
        assert not (regions.vis & ~regions.pres).any()
        np.testing.assert_array_equal(regions.vis.sum(axis=(1, 2)) + regions.occ.sum(axis=(1, 2)), regions.pres.sum(axis=(1, 2)))
        for i in range(toy.group_count):
            np.testing.assert_array_equal(regions.void[i], ~regions.pres[list(toy.members(i))].any(axis=0))
        np.testing.assert_array_equal(to_group_maps(regions, toy), sample.group_maps)


def test_brute_force_recount(toy_scenes, toy):
    sample = toy_scenes[0]
    regions = regions_from_sample(sample, toy)
    for c in range(toy.N):
        i, j = toy.group_of(c)
        vis = occ = pres = 0
        for row in range(sample.height):
            for col in range(sample.width):
                present = sample.group_maps[i][row, col] == j
                visible = sample.visible[row, col] == c
                pres += present
                vis += visible
                occ += present and not visible
        assert (vis, occ, pres) == (regions.vis[c].sum(), regions.occ[c].sum(), regions.pres[c].sum())


def test_all_void_group(toy):
    sample = Sample(np.ones((3, 3)), np.zeros((3, 3)), np.stack([np.ones((3, 3)), np.zeros((3, 3)), np.zeros((3, 3))]), toy.N)
    regions = regions_from_sample(sample, toy)
    assert regions.void[1].all()
    assert regions.void[2].all()


def test_implausible_sample_names_pixel_and_group(tiny_sample, toy):
    maps = tiny_sample.group_maps.copy()
    maps[2, 3, 3] = 0
    with pytest.raises(PlausibilityError) as info:
        regions_from_sample(tiny_sample.replace(group_maps=maps), toy)
    assert (info.value.row, info.value.col, info.value.group) == (3, 3, 2)


def test_sample_schema_mismatch(tiny_sample, toy):
    with pytest.raises(SchemaError):
        regions_from_sample(tiny_sample.replace(group_maps=tiny_sample.group_maps[:2]), toy)
    maps = tiny_sample.group_maps.copy()
    maps[1, 0, 0] = 9
    with pytest.raises(SchemaError):
        regions_from_sample(tiny_sample.replace(group_maps=maps), toy)


def test_sample_round_trip(toy_scenes, tmp_path):
    for k, sample in enumerate(toy_scenes):
        path = tmp_path / "{}.gss".format(k)
        write_sample(sample, str(path))
        loaded = read_sample(str(path))
        assert loaded == sample
        assert path.read_bytes() == sample_to_bytes(loaded)
        np.testing.assert_array_equal(loaded.depth, sample.depth)


def test_one_pixel_sample():
    sample = Sample(np.array([[1.5]]), np.array([[0]]), np.array([[[1]]]), 1)
    data = sample_to_bytes(sample)
    assert data[:4] == SAMPLE_MAGIC
    assert len(data) == 12 + 4 + 2 + 2
    assert sample_from_bytes(data) == sample


def test_codec_errors(tiny_sample):
    data = sample_to_bytes(tiny_sample)
    with pytest.raises(FormatError, match="magic"):
        sample_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="truncated"):
        sample_from_bytes(data[:-1])
    with pytest.raises(FormatError, match="truncated"):
        sample_from_bytes(data[:5])
    with pytest.raises(FormatError, match="trailing"):
        sample_from_bytes(data + b"\0")
    wide = Sample(np.zeros((1, 65536)), np.zeros((1, 65536)), np.ones((1, 1, 65536)), 1)
    with pytest.raises(FormatError, match="width"):
        sample_to_bytes(wide)


def test_sample_is_read_only(tiny_sample):
    with pytest.raises(ValueError):
        tiny_sample.visible[0, 0] = 3


def test_labelmap_images(tiny_sample, toy, tmp_path):
    palette = default_palette(toy)
    path = tmp_path / "visible.ppm"
    export_labelmap_image(tiny_sample.visible, palette, str(path))
    pixels = np.asarray(Image.open(str(path)))
    assert pixels.shape == (4, 4, 3)
    assert len({tuple(p) for p in pixels.reshape(-1, 3)}) == len(np.unique(tiny_sample.visible))
    np.testing.assert_array_equal(pixels[2, 2], palette.colors[5])

    export_labelmap_image(np.full((3, 5), VOID), palette, str(path))
    assert not np.asarray(Image.open(str(path))).any()


def test_group_labelmap_renders_void_black(tiny_sample, toy, tmp_path):
    labels = group_labelmap(tiny_sample, toy, 1)
    assert labels[0, 0] == VOID
    assert labels[1, 1] == 2
    path = tmp_path / "group.ppm"
    export_labelmap_image(labels, default_palette(toy), str(path))
    pixels = np.asarray(Image.open(str(path)))
    assert not pixels[0, 0].any()
    assert pixels[1, 1].any()


def test_palette_gaps(tiny_sample, toy, tmp_path):
    palette = Palette({0: (10, 20, 30), 1: (40, 50, 60)})
    with pytest.raises(PaletteError):
        export_labelmap_image(tiny_sample.visible, palette, str(tmp_path / "x.ppm"))
    two = np.array([[0, 1], [1, 0]])
    export_labelmap_image(two, palette, str(tmp_path / "two.ppm"))
    pixels = np.asarray(Image.open(str(tmp_path / "two.ppm")))
    assert tuple(pixels[0, 0]) == (10, 20, 30)
    assert tuple(pixels[0, 1]) == (40, 50, 60)


def test_parse_palette(toy):
    palette = parse_palette("floor 1 2 3\nwall 4 5 6\n", toy)
    assert palette.colors == {0: (1, 2, 3), 1: (4, 5, 6)}
    with pytest.raises(ConfigError) as info:
        parse_palette("floor 1 2 3\nwall 4 5 600\n", toy, "colors.cfg")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_palette("sky 1 2 3\n", toy)


def test_depth_image(tiny_sample, tmp_path):
    path = tmp_path / "depth.pgm"
    export_depth_image(tiny_sample.depth, str(path))
    pixels = np.asarray(Image.open(str(path)))
    assert pixels.shape == (4, 4)
    assert pixels[3, 3] == 255
    assert pixels[0, 0] == 0
    first = path.read_bytes()
    export_depth_image(tiny_sample.depth, str(path))
    assert path.read_bytes() == first


def test_void_in_group_without_void_slot(tiny_sample, toy):
    maps = tiny_sample.group_maps.copy()
    maps[0, 3, 3] = 0
    with pytest.raises(PlausibilityError) as info:
        regions_from_sample(tiny_sample.replace(group_maps=maps), toy)
    assert (info.value.row, info.value.col, info.value.group) == (3, 3, 0)
    assert "no void slot" in str(info.value)

    with_void = toy_schema(void_in_background=True)
    maps = tiny_sample.group_maps.copy()
    maps[0, 3, 3] = 0
    regions = regions_from_sample(tiny_sample.replace(group_maps=maps), with_void)
    assert regions.void[0].sum() == 1
