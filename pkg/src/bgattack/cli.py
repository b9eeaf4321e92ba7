"""Command-line surface.

Subcommands: attack, eval, gradcheck, convergence, gen-scenes, masks.
Exit codes: 0 success, 1 validation error (bad flags, config, or input
files), 2 runtime error.
"""

import argparse
import dataclasses
import os
import sys

import numpy as np

from . import io
from .attack import fit_convergence_slope, random_init, run_attack
from .config import (RunConfig, build_attack_config, build_dataset,
                     build_detector, parse_config)
from .errors import BgAttackError, ConfigError, ContractError, FormatError
from .gradcheck import run_all
from .masks import build_grid_masks
from .metrics import (attack_success_rate, detection_rate,
                      mean_average_precision, nms,
                      per_class_average_precision)
from .scene import compose_adversarial


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as fh:
        return parse_config(fh.read())


def _gray_png(path: str, mask: np.ndarray) -> None:
    io.write_png(path, np.repeat(mask, 3, axis=2))


def cmd_attack(args) -> int:
    rc = _load_config(args.config)
    out = args.out or rc.output.dir
    os.makedirs(out, exist_ok=True)
    dataset = build_dataset(rc)
    det = build_detector(rc)
    cfg = build_attack_config(rc)
    if cfg.checkpoint_dir is not None:
        cfg = dataclasses.replace(cfg, checkpoint_dir=out)
    dims = dataset[0].image.shape
    p0 = random_init(dims, cfg.seed)
    p, trace = run_attack(cfg, dataset, det, p0)
    io.write_tensor(os.path.join(out, "P.f32t"), p)
    if dims[2] == 3:
        io.write_png(os.path.join(out, "P.png"), p)
    io.write_trace_csv(os.path.join(out, "trace.csv"), trace)
    print(f"final total loss {trace.records[-1].total:.6g} after "
          f"{trace.records[-1].t} iterations; outputs in {out}")
    return 0


def _evaluate(rc: RunConfig, dataset, det, perturbation):
    clean, attacked = [], []
    for scn in dataset:
        clean.append((scn, nms(det.forward(scn.image), rc.eval)))
        x = compose_adversarial(scn, perturbation)
        attacked.append((scn, nms(det.forward(x), rc.eval)))
    ap_clean = per_class_average_precision(clean, rc.eval)
    ap_attack = per_class_average_precision(attacked, rc.eval)
    rows = [(f"ap_class_{cls}", ap_clean[cls], ap_attack[cls],
             attack_success_rate(ap_clean[cls], ap_attack[cls])
             if ap_clean[cls] > 0 else 0.0)
            for cls in sorted(ap_clean)]
    for name, fn in (("map", lambda ev: mean_average_precision(ev, rc.eval)),
                     ("dr", lambda ev: detection_rate(ev, rc.eval.iou_threshold))):
        c, a = fn(clean), fn(attacked)
        rows.append((name, c, a, attack_success_rate(c, a)))
    return rows


def cmd_eval(args) -> int:
    rc = _load_config(args.config)
    dataset = build_dataset(rc)
    det = build_detector(rc)
    p = io.read_tensor(args.perturbation)
    if p.shape != dataset[0].image.shape:
        raise ConfigError(f"perturbation {p.shape} does not match "
                          f"scenes {dataset[0].image.shape}")
    rows = _evaluate(rc, dataset, det, p)
    out = args.out or os.path.join(
        os.path.dirname(os.path.abspath(args.perturbation)), "metrics.csv")
    io.write_metrics_csv(out, rows)
    for name, c, a, asr in rows:
        print(f"{name}: clean {c:.9g} attack {a:.9g} asr {asr:.9g}")
    print(f"metrics written to {out}")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_all(size=args.size, seed=args.seed)
    worst = 0.0
    for name, err in results.items():
        print(f"{name} max rel err: {err:.3e}")
        worst = max(worst, err)
    if worst >= 1e-5:
        print(f"FAIL: worst relative error {worst:.3e} >= 1e-5")
        return 2
    print("all gradients match finite differences below 1e-5")
    return 0


def cmd_convergence(args) -> int:
    trace = io.read_trace_csv(args.trace)
    slope = fit_convergence_slope(trace, burn_in=args.burn_in)
    print(f"log-log slope of min squared gradient norm: {slope:.6g}")
    return 0


def cmd_gen_scenes(args) -> int:
    rc = _load_config(args.config)
    dataset = build_dataset(rc)
    os.makedirs(args.out, exist_ok=True)
    for k, scn in enumerate(dataset):
        io.write_scene(args.out, f"scene_{k:03d}", scn)
    print(f"wrote {len(dataset)} scenes to {args.out}")
    return 0


def cmd_masks(args) -> int:
    rc = _load_config(args.config)
    if args.hw:
        h = w = args.hw
    else:
        h, w = rc.dataset.canvas_h, rc.dataset.canvas_w
    pair = build_grid_masks(h, w, args.n)
    os.makedirs(args.out, exist_ok=True)
    _gray_png(os.path.join(args.out, "M_g.png"), pair.grid)
    _gray_png(os.path.join(args.out, "M_rg.png"), pair.reversed_)
    scene0 = build_dataset(rc)[0]
    _gray_png(os.path.join(args.out, "M_objs.png"), scene0.object_mask)
    print(f"wrote M_g, M_rg ({h}x{w}, n={args.n}) and M_objs to {args.out}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="bgattack",
                     description="background adversarial perturbation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="optimize a perturbation")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--out", help="output directory (default: config [output] dir)")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("eval", help="clean vs attacked metrics")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--perturbation", required=True, help="P.f32t to evaluate")
    p.add_argument("--out", help="metrics CSV path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("convergence", help="fit the trace decay slope")
    p.add_argument("--trace", required=True, help="trace.csv from attack")
    p.add_argument("--burn-in", type=int, default=0, dest="burn_in")
    p.set_defaults(fn=cmd_convergence)

    p = sub.add_parser("gen-scenes", help="materialize the scene dataset")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_gen_scenes)

    p = sub.add_parser("masks", help="dump object and grid masks as PNG")
    p.add_argument("--n", type=int, default=4, help="patches per side")
    p.add_argument("--hw", type=int, help="square canvas size override")
    p.add_argument("--config", help="run configuration file")
    p.add_argument("--out", default="masks_out", help="output directory")
    p.set_defaults(fn=cmd_masks)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ConfigError, FormatError, ContractError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BgAttackError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
