"""Grouped amodal semantic segmentation package."""

from .schema import GroupSchema, build_schema, parse_schema, load_schema, activation_count
from .dataset import Sample, RegionSets, Dataset, regions_from_sample, read_sample, write_sample
from .scenegen import SceneSpec, GroupRule, RejectionThresholds, generate_scene, accept_scene, augment_paste, generate_dataset
from .head import GroupedPrediction, grouped_softmax, loss_ce, loss_grouped, plausibility_violation
from .net import ModelConfig, Model, forward, backward, read_checkpoint, write_checkpoint
from .training import TrainConfig, adam_step, train, infer
from .metrics import PredictionMasks, EvalReport, evaluate, evaluate_predictions, compare_reports
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
