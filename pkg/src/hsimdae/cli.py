"""Command-line interface.

Subcommands: synth, train, predict, evaluate, ablate. Exit codes: 0 on
success, 2 for configuration errors, 3 for data errors, 4 for numeric
failures.
"""

import argparse
import json
import sys
from pathlib import Path

from .cube import (
    SceneSpec,
    SplitAssignment,
    apply_normalizer,
    load_cube,
    save_dataset,
    synth_scene,
)
from .errors import ConfigError, HsiError
from .harness import (
    ExperimentConfig,
    confusion_matrix,
    load_model_dir,
    overall_accuracy,
    per_class_accuracy,
    predict_map,
    run_ablation,
    run_experiment,
)
from .cube import NormStats
from .postproc import read_pgm, write_pgm, write_ppm


def _cmd_synth(args):
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise ConfigError(f"scene spec not found: {spec_path}")
    try:
        spec_dict = json.loads(spec_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"scene spec is not valid JSON: {e}") from e
    spec = SceneSpec.from_json_dict(spec_dict, seed=args.seed)
    cube, labels = synth_scene(spec, args.seed)
    save_dataset(args.out, cube, labels, class_names=spec.class_names)
    print(f"wrote {cube.rows}x{cube.cols}x{cube.bands} scene "
          f"({labels.n_classes} classes) to {args.out}")
    return 0


def _cmd_train(args):
    config = ExperimentConfig.load(args.config)
    record = run_experiment(config, out_dir=args.out)
    print(f"network {record.network_id}: raw OA {record.raw_oa:.2f}%, "
          f"morph OA {record.morph_oa:.2f}% "
          f"({record.n_test} test pixels, {record.wall_time_s:.1f}s)")
    return 0


def _cmd_predict(args):
    meta, fconfig, models, net = load_model_dir(args.model_dir)
    cube, _ = load_cube(args.dataset)
    cube = apply_normalizer(cube, NormStats(scale=meta["norm_scale"]))
    cmap = predict_map(cube, models, fconfig, net)
    out = Path(args.out)
    if out.suffix.lower() == ".ppm":
        write_ppm(out, cmap.labels)
    else:
        write_pgm(out, cmap.labels)
    print(f"wrote class map to {out}")
    return 0


def _cmd_evaluate(args):
    pred = read_pgm(args.pred)
    _, labels = load_cube(args.dataset)
    if pred.shape != (labels.rows, labels.cols):
        raise ConfigError(
            f"predicted map {pred.shape} does not match dataset "
            f"({labels.rows}, {labels.cols})"
        )
    split = SplitAssignment.load(args.split)
    cm = confusion_matrix(pred.reshape(-1), labels.flat, split.test,
                          labels.n_classes)
    report = {
        "oa": overall_accuracy(cm),
        "per_class": per_class_accuracy(cm),
        "n_test": int(split.test.size),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_ablate(args):
    config = ExperimentConfig.load(args.config)
    _, table = run_ablation(config, out_dir=args.out)
    print(table, end="")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hsimdae",
        description="Hyperspectral classification with class-based "
                    "denoising autoencoders",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset directory")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train one network configuration")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("predict", help="classify a dataset with a trained model")
    p.add_argument("--model-dir", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output map (.pgm or .ppm)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("evaluate", help="score a predicted map on test pixels")
    p.add_argument("--pred", required=True, help="predicted class map (.pgm)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--split", required=True, help="split assignment JSON")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("ablate", help="run all seven network configurations")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_ablate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except HsiError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
