"""Ready-made schemas and scene settings plus text summaries of results."""

from .metrics import EvalReport, METRIC_NAMES
from .scenegen import GroupRule, RejectionThresholds, SceneSpec
from .schema import GroupSchema, build_schema


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


def suncg_schema(void_in_background: bool = False) -> GroupSchema:
    """Indoor partition of 36 categories into a background and four object groups.

    Args:
        void_in_background (bool, optional): Void slot in the background group (46 instead of 45 activations). Defaults to False.

    Returns:
        GroupSchema: Schema
    """
    return build_schema([
        ("background", ["ceiling", "floor", "wall", "window", "door"]),
        ("chair_like", ["chair", "table_and_chair", "trash_can", "toilet"]),
        ("table_like", ["table", "side_table", "bookshelf", "desk"]),
        ("big_objects", ["bed", "kitchen_cabinet", "bathtub", "mirror", "closets_cabinets", "dont_care", "sofa"]),
        ("small_objects", ["lamp", "computer", "music", "gym", "pillow", "household_appliance", "kitchen_appliance", "pets", "car", "plants", "pool", "recreation", "night_stand", "shower", "tvs", "sink"]),
    ], void_in_background)


def cityscapes_schema(void_in_background: bool = False) -> GroupSchema:
    """Driving partition: background, traffic objects and mobile objects.

    Args:
        void_in_background (bool, optional): Void slot in the background group. Defaults to False.

    Returns:
        GroupSchema: Schema
    """
    return build_schema([
        ("background", ["road", "sidewalk", "wall", "building", "sky", "terrain", "fence", "vegetation"]),
        ("traffic_objects", ["pole", "traffic_light", "traffic_sign"]),
        ("mobile_objects", ["person", "rider", "car", "truck", "bus", "motorcycle", "train", "bicycle"]),
    ], void_in_background)


def toy_schema(void_in_background: bool = False) -> GroupSchema:
    """Desk-scale schema: 2 background categories and two object groups with 3 categories each.

    Args:
        void_in_background (bool, optional): Void slot in the background group. Defaults to False.

    Returns:
        GroupSchema: Schema
    """
    return build_schema([
        ("background", ["floor", "wall"]),
        ("furniture", ["cabinet", "table", "shelf"]),
        ("props", ["ball", "box", "cone"]),
    ], void_in_background)


def toy_scene_spec(size: int = 64, seed: int = 7) -> SceneSpec:
    """Scene settings matching toy_schema. Both object groups share a depth interval, so they occlude each other in both directions.

    Args:
        size (int, optional): Canvas edge length. Defaults to 64.
        seed (int, optional): Seed. Defaults to 7.

    Returns:
        SceneSpec: Scene settings
    """
    return SceneSpec(
        canvas=(size, size),
        seed=seed,
        depth_noise=0.01,
        background_depth=(8.0, 10.0),
        bands=(1, 2),
        rules=[
            GroupRule("furniture", count=(1, 2), size=(0.25, 0.45), depth=(3.0, 6.0), shapes=("rectangle", "triangle", "ellipse")),
            GroupRule("props", count=(1, 3), size=(0.12, 0.3), depth=(1.5, 5.0), shapes=("ellipse", "rectangle", "triangle")),
        ])


def cityscapes_scene_spec(size: int = 64, seed: int = 11) -> SceneSpec:
    """Driving-like scene settings with duplication of mobile objects on road and sidewalk.

    Args:
        size (int, optional): Canvas edge length. Defaults to 64.
        seed (int, optional): Seed. Defaults to 11.

    Returns:
        SceneSpec: Scene settings
    """
    return SceneSpec(
        canvas=(size, size),
        seed=seed,
        depth_noise=0.01,
        background_depth=(20.0, 40.0),
        bands=(2, 4),
        paste_group="mobile_objects",
        paste_probability=0.5,
        paste_background=("road", "sidewalk"),
        rules=[
            GroupRule("traffic_objects", count=(0, 2), size=(0.08, 0.3), depth=(5.0, 15.0), shapes=("rectangle", "ellipse", "triangle")),
            GroupRule("mobile_objects", count=(1, 3), size=(0.1, 0.3), depth=(3.0, 18.0), shapes=("rectangle", "ellipse", "triangle")),
        ])


def default_thresholds() -> RejectionThresholds:
    return RejectionThresholds(min_foreground=1, max_object_coverage=0.40, max_dont_care_coverage=0.40)


def report_summary(report: EvalReport) -> str:
    """Multi-line text summary of an evaluation report.

    Args:
        report (EvalReport): Report

    Returns:
        str: Summary
    """
    lines: list = ["Mode: " + report.mode + ", samples: " + str(report.data["samples"])]
    for name in METRIC_NAMES:
        record: dict = report.data["macro"][name]
        lines.append("{:<24} {:.4f}  (per sample: mean = {:.4f}, sd = {:.4f})".format(name, report[name], record["mean"], record["sd"]))
    if report.data["pa_pres_exceeds_one"]: lines.append("Note: literal PA pres exceeds 1 (multi-layer occlusion)")
    lines.append("Visible-in-present containment: {:.2%}".format(report.data["containment"]))
    plausibility: dict = report.data["plausibility"]
    if plausibility["applicable"]:
        lines.append("Plausibility violation: mean = {:.4f}, max = {:.4f}, fraction > 0 = {:.2%}".format(plausibility["mean"], plausibility["max"], plausibility["fraction"]))
    return "\n".join(lines)


def default_scene_spec(schema: GroupSchema, size: int = 64, seed: int = 0) -> SceneSpec:
    """Generic scene settings for any schema: every foreground group gets 0 to 2 objects.

    Args:
        schema (GroupSchema): Schema
        size (int, optional): Canvas edge length. Defaults to 64.
        seed (int, optional): Seed. Defaults to 0.

    Returns:
        SceneSpec: Scene settings
    """
    rules: list = [GroupRule(name, count=(0, 2), size=(0.15, 0.4), depth=(1.5, 6.0)) for name in schema.group_names[1:]]
    return SceneSpec(canvas=(size, size), seed=seed, depth_noise=0.01, background_depth=(8.0, 10.0), bands=(1, 3), rules=rules)


PRESET_SCHEMAS: dict = {"toy": toy_schema, "suncg": suncg_schema, "cityscapes": cityscapes_schema}
PRESET_SCENES: dict = {"toy": toy_scene_spec, "cityscapes": cityscapes_scene_spec}
