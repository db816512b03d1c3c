"""Command line interface: gen, train, eval, render and compare subcommands.

Exit codes: 0 success, 1 usage or configuration error (including missing
files and schema mismatches), 2 any other failure.
"""

from typing import Optional
import argparse
import hashlib
import json
import logging
import os
import sys
import time
import numpy as np
from .dataset import VOID, Dataset, Sample, default_palette, export_depth_image, export_labelmap_image, group_labelmap, load_palette, read_sample, regions_from_sample, write_json
from .errors import ConfigError, GroupsegError, SchemaError
from .head import GroupedPrediction
from .metrics import POOLING_MAX, POOLING_SUM, EvalReport, PredictionMasks, compare_reports, evaluate
from .net import MODES, ModelConfig, load_model_config, read_checkpoint
from .presets import PRESET_SCENES, PRESET_SCHEMAS, default_scene_spec, report_summary
from .scenegen import RejectionThresholds, generate_dataset, load_scene_spec
from .schema import GroupSchema, load_schema
from .tools import default_threads
from .training import CHECKPOINT_NAME, HISTORY_NAME, TrainConfig, evaluate_model, infer, load_train_config, train


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


logger = logging.getLogger(__name__)


EXIT_OK: int = 0
EXIT_USAGE: int = 1
EXIT_FAILURE: int = 2
RUN_MANIFEST_PREFIX: str = "run_"


class UsageError(Exception):
    """Invalid command line."""


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _threads(args: argparse.Namespace) -> int:
    return default_threads() if args.threads is None else max(1, args.threads)


def _require_file(path: str) -> str:
    if not os.path.isfile(path): raise ConfigError("file not found", path)
    return path


def _open_dataset(directory: str) -> Dataset:
    if not os.path.isdir(directory): raise ConfigError("dataset directory not found", directory)
    return Dataset(directory)


def _load_schema(value: str) -> GroupSchema:
    """Schema from a configuration file or a preset name (toy, suncg, cityscapes)."""
    if not os.path.isfile(value) and value in PRESET_SCHEMAS: return PRESET_SCHEMAS[value]()
    return load_schema(value)


def write_run_manifest(path: str, command: str, args: argparse.Namespace, configs: dict, seeds: dict, outputs: list, start: float) -> dict:
    """Writes the record of one command line run.

    Args:
        path (str): Target file
        command (str): Subcommand
        args (argparse.Namespace): Parsed arguments
        configs (dict[str, str]): Canonical configuration texts by role (hashed)
        seeds (dict[str, int]): Seeds by role
        outputs (list[str]): Written files or directories
        start (float): Start time (time.perf_counter)

    Returns:
        dict: Manifest
    """
    manifest: dict = {
        "command": command,
        "args": {key: value for key, value in sorted(vars(args).items()) if key != "handler"},
        "config_hashes": {role: _hash_text(text) for role, text in configs.items()},
        "seeds": seeds,
        "version": __version__,
        "outputs": outputs,
        "wall_clock_seconds": time.perf_counter() - start,
    }
    write_json(path, manifest)
    return manifest


def cmd_gen(args: argparse.Namespace) -> int:
    start: float = time.perf_counter()
    schema: GroupSchema = _load_schema(args.schema)
    if args.scene is None:
        spec = default_scene_spec(schema, args.size)
    elif not os.path.isfile(args.scene) and args.scene in PRESET_SCENES:
        spec = PRESET_SCENES[args.scene](args.size)
    else:
        spec = load_scene_spec(args.scene)
    if args.scenes < 2: raise ConfigError("--scenes must be at least 2, got " + str(args.scenes))
    n_test: int = max(1, args.scenes // 6)
    thresholds: RejectionThresholds = RejectionThresholds(args.min_foreground, args.max_object_coverage, args.max_dont_care_coverage)
    seed: int = spec.seed if args.seed is None else args.seed

    manifest: dict = generate_dataset(spec, schema, thresholds, args.scenes - n_test, n_test, seed, args.out, _threads(args))
    logger.info("Dataset written to %s (%d train, %d test, acceptance rate %.2f)", args.out, args.scenes - n_test, n_test, manifest["statistics"]["acceptance_rate"])
    write_run_manifest(os.path.join(args.out, RUN_MANIFEST_PREFIX + "gen.json"), "gen", args, {"schema": schema.to_config(), "scene": spec.to_config()}, {"dataset": seed}, [args.out], start)
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    start: float = time.perf_counter()
    dataset: Dataset = _open_dataset(args.data)
    model_config: ModelConfig = ModelConfig() if args.model_config is None else load_model_config(args.model_config)
    if args.mode is not None: model_config = model_config.replace(mode=args.mode)
    train_config: TrainConfig = TrainConfig() if args.train_config is None else load_train_config(args.train_config)
    if args.epochs is not None: train_config = train_config.replace(epochs=args.epochs)
    if args.seed is not None: train_config = train_config.replace(seed=args.seed)

    samples: list = dataset.samples("train")
    validation: Optional[list] = dataset.samples("test") if args.validate else None
    result = train(samples, dataset.schema, model_config, train_config, args.out, validation, args.resume)
    if result.history: logger.info("Final training loss %.4f after %d epochs", result.history[-1]["loss"], len(result.history))
    outputs: list = [os.path.join(args.out, CHECKPOINT_NAME), os.path.join(args.out, HISTORY_NAME)]
    configs: dict = {"schema": dataset.schema.to_config(), "model": model_config.to_config(), "train": train_config.to_config()}
    write_run_manifest(os.path.join(args.out, RUN_MANIFEST_PREFIX + "train.json"), "train", args, configs, {"train": train_config.seed, "dataset": dataset.seed}, outputs, start)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    start: float = time.perf_counter()
    dataset: Dataset = _open_dataset(args.data)
    schema: GroupSchema = dataset.schema
    samples: list = dataset.samples(args.split)
    configs: dict = {"schema": schema.to_config()}
    if args.oracle:
        regions: list = [regions_from_sample(sample, schema) for sample in samples]
        report: EvalReport = evaluate(regions, [PredictionMasks.from_regions(r) for r in regions], schema, "oracle", None, _threads(args))
    else:
        if args.checkpoint is None: raise ConfigError("eval needs --checkpoint or --oracle")
        checkpoint = read_checkpoint(_require_file(args.checkpoint), schema)
        configs["model"] = checkpoint.model.config.to_config()
        report = evaluate_model(checkpoint.model, samples, args.batch_size, args.pooling, _threads(args))
    report.write(args.out)
    logger.info("%s", report_summary(report))
    write_run_manifest(args.out + ".run.json", "eval", args, configs, {"dataset": dataset.seed}, [args.out], start)
    return EXIT_OK


def _present_labelmaps(pres: np.ndarray, schema: GroupSchema) -> list:
    """One category-id label map per group from present masks (VOID where no member is present)."""
    maps: list = []
    for i in range(schema.group_count):
        labels: np.ndarray = np.full(pres.shape[1:], VOID, dtype=np.int64)
        for c in reversed(schema.members(i)): labels[pres[c]] = c
        maps.append(labels)
    return maps


def _render_prediction(sample: Sample, checkpoint_path: str, schema: GroupSchema, palette, out: str, pooling: str) -> list:
    checkpoint = read_checkpoint(_require_file(checkpoint_path), schema)
    prediction = infer(checkpoint.model, sample)
    if isinstance(prediction, GroupedPrediction):
        masks: PredictionMasks = PredictionMasks.from_gss(prediction, schema)
    else:
        masks = PredictionMasks.from_dss(prediction, schema, pooling)
    files: list = [os.path.join(out, "pred_visible.ppm")]
    export_labelmap_image(np.argmax(masks.vis, axis=0), palette, files[0])
    for i, labels in enumerate(_present_labelmaps(masks.pres, schema)):
        files.append(os.path.join(out, "pred_group_{}_{}.ppm".format(i, schema.group_names[i])))
        export_labelmap_image(labels, palette, files[-1])
    return files


def cmd_render(args: argparse.Namespace) -> int:
    start: float = time.perf_counter()
    if args.schema is not None:
        schema: GroupSchema = _load_schema(args.schema)
    elif args.checkpoint is not None:
        schema = read_checkpoint(_require_file(args.checkpoint)).model.schema
    else:
        raise ConfigError("render needs --schema or --checkpoint to interpret the sample")
    sample: Sample = read_sample(_require_file(args.sample))
    if sample.group_count != schema.group_count or sample.category_count != schema.N:
        raise SchemaError("sample " + args.sample + " does not match the schema (" + str(schema) + ")")
    palette = default_palette(schema) if args.palette is None else load_palette(args.palette, schema)
    os.makedirs(args.out, exist_ok=True)

    files: list = [os.path.join(args.out, "depth.pgm"), os.path.join(args.out, "visible.ppm")]
    export_depth_image(sample.depth, files[0])
    export_labelmap_image(sample.visible, palette, files[1])
    for i in range(schema.group_count):
        files.append(os.path.join(args.out, "group_{}_{}.ppm".format(i, schema.group_names[i])))
        export_labelmap_image(group_labelmap(sample, schema, i), palette, files[-1])
    if args.checkpoint is not None: files.extend(_render_prediction(sample, args.checkpoint, schema, palette, args.out, args.pooling))
    logger.info("%d images written to %s", len(files), args.out)
    write_run_manifest(os.path.join(args.out, RUN_MANIFEST_PREFIX + "render.json"), "render", args, {"schema": schema.to_config()}, {}, files, start)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    start: float = time.perf_counter()
    reports: dict = {}
    for path in args.reports:
        try:
            report: EvalReport = EvalReport.load(path)
        except OSError as e:
            raise ConfigError("cannot read report: " + str(e.strerror), path) from None
        except json.JSONDecodeError as e:
            raise ConfigError("malformed report: " + str(e), path) from None
        reports[report.mode.upper() if report.mode.upper() not in reports else path] = report
    table = compare_reports(reports)
    print(table.to_string(float_format="{:.4f}".format))
    if args.out is not None:
        table.to_csv(args.out, float_format="%.6f")
        write_run_manifest(args.out + ".run.json", "compare", args, {}, {}, [args.out], start)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with all subcommands.

    Returns:
        argparse.ArgumentParser: Parser
    """
    parser = _ArgumentParser(prog="groupseg", description="Grouped amodal semantic segmentation on synthetic depth scenes.")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug output")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")
    parser.add_argument("--threads", type=int, default=None, help="worker processes (default: available cores)")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    gen = commands.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--schema", required=True, help="schema configuration file or preset name (toy, suncg, cityscapes)")
    gen.add_argument("--scene", default=None, help="scene configuration file or preset name (toy, cityscapes)")
    gen.add_argument("--scenes", type=int, default=600, help="total number of samples; one sixth becomes the test split")
    gen.add_argument("--size", type=int, default=64, help="canvas edge length of preset scene settings")
    gen.add_argument("--seed", type=int, default=None, help="seed (default: seed of the scene settings)")
    gen.add_argument("--min-foreground", type=int, default=1, help="minimum number of foreground categories per scene")
    gen.add_argument("--max-object-coverage", type=float, default=0.40, help="maximum image fraction of one visible object")
    gen.add_argument("--max-dont-care-coverage", type=float, default=0.40, help="maximum image fraction of dont_care pixels")
    gen.add_argument("--out", required=True, help="output directory")
    gen.set_defaults(handler=cmd_gen)

    tr = commands.add_parser("train", help="train a flat (dss) or grouped (gss) model")
    tr.add_argument("--data", required=True, help="dataset directory")
    tr.add_argument("--mode", choices=MODES, default=None, help="head type (overrides the model configuration)")
    tr.add_argument("--model-config", default=None, help="model configuration file")
    tr.add_argument("--train-config", default=None, help="training configuration file")
    tr.add_argument("--epochs", type=int, default=None, help="number of epochs (overrides the training configuration)")
    tr.add_argument("--seed", type=int, default=None, help="seed (overrides the training configuration)")
    tr.add_argument("--validate", action="store_true", help="evaluate the test split after every epoch")
    tr.add_argument("--resume", action="store_true", help="continue from the checkpoint in the output directory")
    tr.add_argument("--out", required=True, help="output directory")
    tr.set_defaults(handler=cmd_train)

    ev = commands.add_parser("eval", help="evaluate a checkpoint (or the ground truth itself) on a split")
    ev.add_argument("--data", required=True, help="dataset directory")
    ev.add_argument("--checkpoint", default=None, help="checkpoint file")
    ev.add_argument("--oracle", action="store_true", help="evaluate the ground truth against itself")
    ev.add_argument("--split", default="test", help="split tag (default: test)")
    ev.add_argument("--pooling", choices=(POOLING_MAX, POOLING_SUM), default=POOLING_MAX, help="background pooling of flat posteriors")
    ev.add_argument("--batch-size", type=int, default=8, help="samples per forward pass")
    ev.add_argument("--out", required=True, help="report file (JSON)")
    ev.set_defaults(handler=cmd_eval)

    rd = commands.add_parser(
        "render", help="write a sample (and optionally a prediction) as images",
        description="Writes depth.pgm, visible.ppm and one group_<i>_<name>.ppm per group map, "
                    "that is group count + 2 images per sample (M + 3 for M object groups). "
                    "With --checkpoint the prediction adds pred_visible.ppm and one pred_group_<i>_<name>.ppm per group.")
    rd.add_argument("--sample", required=True, help="sample file")
    rd.add_argument("--schema", default=None, help="schema configuration file or preset name (default: schema of the checkpoint)")
    rd.add_argument("--palette", default=None, help="palette configuration file")
    rd.add_argument("--checkpoint", default=None, help="also render the prediction of this model")
    rd.add_argument("--pooling", choices=(POOLING_MAX, POOLING_SUM), default=POOLING_MAX, help="background pooling of flat posteriors")
    rd.add_argument("--out", required=True, help="output directory")
    rd.set_defaults(handler=cmd_render)

    cp = commands.add_parser("compare", help="print the visible / present comparison of evaluation reports")
    cp.add_argument("reports", nargs="+", help="report files")
    cp.add_argument("--out", default=None, help="also write the table as CSV")
    cp.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[list] = None) -> int:
    """Runs the command line interface.

    Args:
        argv (Optional[list], optional): Arguments without program name. Defaults to None (sys.argv).

    Returns:
        int: Exit code
    """
    parser: argparse.ArgumentParser = build_parser()
    try:
        args: argparse.Namespace = parser.parse_args(argv)
    except UsageError as e:
        sys.stderr.write(parser.prog + ": error: " + str(e) + "\n")
        return EXIT_USAGE

    level: int = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (ConfigError, SchemaError, FileNotFoundError) as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except GroupsegError as e:
        logger.error("%s", e)
        return EXIT_FAILURE
    except OSError as e:
        logger.error("%s", e)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception("unexpected failure: %s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
