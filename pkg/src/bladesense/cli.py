"""Command-line front end.

Subcommands: synth, decompose, sensors, fit-rom, estimate, torsion, report,
pipeline. Exit codes: 0 success, 2 validation error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import NumericalError, StageError, ValidationError
from .pipeline import COMMAND_PLANS, PipelineConfig, run_pipeline
from .synthetic import demo_grid, demo_spec, generate_case


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="config JSON path")
    parser.add_argument("--seed", type=int, default=None, help="rng seed override")
    parser.add_argument("--out", type=Path, default=None, help="output directory")


def cmd_synth(args) -> int:
    """Generate synthetic cases plus a ready-to-run pipeline config."""
    out = args.out or Path("quickstart")
    seed = 0 if args.seed is None else args.seed
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = {
            "grid": {"n_z": 12, "L_b": 117.0},
            "training": [
                {"name": "train_u084", "u_mean": 8.4, "ti": 0.10,
                 "seeds": [0, 1], "duration_s": 25.0},
                {"name": "train_u106", "u_mean": 10.6, "ti": 0.10,
                 "seeds": [0, 1], "duration_s": 25.0},
            ],
            "evaluation": [
                {"name": "eval_u106", "u_mean": 10.6, "ti": 0.10,
                 "seeds": [7], "duration_s": 12.0},
                {"name": "eval_u095", "u_mean": 9.5, "ti": 0.10,
                 "seeds": [3], "duration_s": 8.0},
            ],
            "pipeline": {"noise": 0.1, "seed": 0},
        }
    grid_cfg = doc.get("grid", {})
    grid = demo_grid(n_z=int(grid_cfg.get("n_z", 12)),
                     length_m=float(grid_cfg.get("L_b", 117.0)))
    manifests = {"training": [], "evaluation": []}
    for group in ("training", "evaluation"):
        for entry in doc.get(group, []):
            for case_seed in entry.get("seeds", [0]):
                spec = demo_spec(
                    name=f"{entry['name']}_s{case_seed}",
                    u_mean=float(entry["u_mean"]), ti=float(entry["ti"]),
                    grid=grid,
                    duration_s=float(entry.get("duration_s", 25.0)),
                    f_s=float(entry.get("f_s", 160.0)),
                    noise_sigma=float(entry.get("noise_sigma", 0.0)),
                )
                truth = generate_case(spec, seed + case_seed, out)
                manifests[group].append(truth.manifest_path.name)
    pipe_cfg = {
        "training": manifests["training"],
        "evaluation": manifests["evaluation"],
        "out_dir": "results",
    }
    pipe_cfg.update(doc.get("pipeline", {}))
    if args.seed is not None:
        pipe_cfg["seed"] = args.seed
    cfg_path = Path(out) / "pipeline_config.json"
    with open(cfg_path, "w", encoding="utf-8") as fh:
        json.dump(pipe_cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(manifests['training'])} training and "
          f"{len(manifests['evaluation'])} evaluation cases under {out}")
    print(f"pipeline config: {cfg_path}")
    return 0


def _make_stage_cmd(plan: str):
    def cmd(args) -> int:
        if not args.config:
            raise ValidationError(f"'{plan}' requires --config")
        pivot = "scalar" if getattr(args, "pivot_scalar", False) else None
        config = PipelineConfig.from_json(args.config, seed=args.seed,
                                          out_dir=args.out, pivot=pivot)
        result = run_pipeline(config, plan=plan)
        print(f"{plan}: wrote {len(result['artifacts'])} artifacts "
              f"to {result['out_dir']}")
        return 0

    return cmd


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bladesense",
        description="Reconstruct full blade deflection fields from sparse "
                    "noisy sensors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate synthetic cases and a config")
    _common(p)
    p.set_defaults(func=cmd_synth)

    for plan in COMMAND_PLANS:
        q = sub.add_parser(plan, help=f"run up to the '{plan}' stage")
        _common(q)
        if plan in ("sensors", "estimate", "report", "pipeline"):
            q.add_argument("--pivot-scalar", action="store_true",
                           dest="pivot_scalar",
                           help="pivot single degrees of freedom instead of "
                                "whole stations")
        q.set_defaults(func=_make_stage_cmd(plan))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as err:
        print(f"error: {err}", file=sys.stderr)
        cause = err.cause
        if isinstance(cause, (NumericalError, np.linalg.LinAlgError,
                              FloatingPointError)):
            return 3
        return 2
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return 3
    except (ValidationError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
