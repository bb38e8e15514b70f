"""Command-line entry point.

    sobolev-rw generate  --problem trig --out data.csv
    sobolev-rw train     --problem trig --mode 6 --epochs 500 --out run/
    sobolev-rw sweep     --problem trig --mode 10 --mode 11 --runs 20 --out sweep/
    sobolev-rw gradcheck --layers 2,5,3,3,1

Settings resolve as: command-line flag, then ``--config`` file (YAML mapping of
the same keys, dashes or underscores), then built-in defaults.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import yaml

from . import problems
from .data import write_csv
from .experiment import PRESETS, DataConfig, export_results, prepare_data, sweep, write_trace_csv
from .gradcheck import run_gradcheck
from .network import NetworkShape
from .optim import AdamConfig
from .trainer import DivergenceError, TrainConfig, train
from .weighting import ALL_MODES

DEFAULTS = {
    "problem": None,
    "data": None,
    "mode": [10],
    "epochs": 500,
    "runs": 100,
    "seed": 0,
    "layers": "2,5,3,3,1",
    "batch_size": 64,
    "out": "out",
    "learn_rate": 0.001,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "schedule_rate": 0.01,
    "points_per_axis": 25,
    "n_train": 313,
    "n_val": 312,
    "split": "stride2",
    "split_seed": 0,
    "val_stride": 1,
    "workers": 1,
    "traces": False,
    "nets": 20,
    "preset": None,
}


class UsageError(Exception):
    pass


def _mode(text):
    try:
        m = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid mode {text!r}") from None
    if m not in ALL_MODES:
        raise argparse.ArgumentTypeError(f"mode must be in 1..13, got {m}")
    return m


def _layers(text):
    try:
        shape = NetworkShape.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid --layers {text!r}: {exc}") from None
    return ",".join(str(s) for s in shape.layer_sizes)


def build_parser():
    parser = argparse.ArgumentParser(prog="sobolev-rw", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        p.add_argument("--config", type=Path, help="YAML file of default settings")
        p.add_argument("--out", help="output file or directory")
        if data:
            p.add_argument("--problem", choices=problems.BUILTIN_NAMES)
            p.add_argument("--data", help="CSV dataset (x1..,y1..,dy1_dx1..)")
            p.add_argument("--points-per-axis", dest="points_per_axis", type=int)
            p.add_argument("--n-train", dest="n_train", type=int)
            p.add_argument("--n-val", dest="n_val", type=int)
            p.add_argument("--split", choices=("stride2", "seeded"))
            p.add_argument("--split-seed", dest="split_seed", type=int)

    def training(p):
        p.add_argument("--epochs", type=int)
        p.add_argument("--layers", type=_layers, help="layer sizes, e.g. 2,5,3,3,1")
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--learn-rate", dest="learn_rate", type=float)
        p.add_argument("--beta1", type=float)
        p.add_argument("--beta2", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--schedule-rate", dest="schedule_rate", type=float)
        p.add_argument("--val-stride", dest="val_stride", type=int)

    g = sub.add_parser("generate", help="sample a builtin problem on a grid and write CSV")
    common(g)

    t = sub.add_parser("train", help="single training run; writes trace.csv and run.json")
    common(t)
    training(t)
    t.add_argument("--mode", type=_mode, action="append")
    t.add_argument("--seed", type=int)

    s = sub.add_parser("sweep", help="multi-seed, multi-mode sweep; writes summary.json")
    common(s)
    training(s)
    s.add_argument("--mode", type=_mode, action="append", help="repeatable")
    s.add_argument("--runs", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--traces", action="store_true", default=None, help="also write per-run traces")
    s.add_argument("--preset", choices=sorted(PRESETS))

    c = sub.add_parser("gradcheck", help="finite-difference verification of gradients")
    c.add_argument("--config", type=Path)
    c.add_argument("--layers", type=_layers)
    c.add_argument("--nets", type=int)
    c.add_argument("--seed", type=int)
    return parser


def load_config(path):
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise UsageError(f"invalid config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must be a mapping of settings")
    out = {}
    for key, value in doc.items():
        k = str(key).replace("-", "_")
        if k not in DEFAULTS:
            raise UsageError(f"unknown config key {key!r}")
        if k == "mode":
            value = [_mode(str(v)) for v in (value if isinstance(value, list) else [value])]
        if k == "layers":
            value = _layers(",".join(map(str, value)) if isinstance(value, list) else str(value))
        out[k] = value
    return out


def resolve(args):
    """Merge defaults < preset < config file < command line."""
    settings = dict(DEFAULTS)
    file_cfg = load_config(getattr(args, "config", None))
    preset = getattr(args, "preset", None) or file_cfg.get("preset")
    if preset:
        dc, train_kw, runs = PRESETS[preset]
        settings.update(
            problem="trig", points_per_axis=dc.points_per_axis, n_train=dc.n_train,
            n_val=dc.n_val, split=dc.split, split_seed=dc.split_seed, runs=runs, **train_kw,
        )
    settings.update(file_cfg)
    for k, v in vars(args).items():
        if k in DEFAULTS and v is not None:
            settings[k] = v
    return settings


def _data_config(s):
    if s["problem"] and s["data"]:
        raise UsageError("--problem and --data are mutually exclusive")
    if s["data"]:
        return DataConfig(problem=None, csv_path=s["data"], n_train=s["n_train"], n_val=s["n_val"],
                          split=s["split"], split_seed=s["split_seed"])
    return DataConfig(problem=s["problem"] or "trig", points_per_axis=s["points_per_axis"],
                      n_train=s["n_train"], n_val=s["n_val"], split=s["split"],
                      split_seed=s["split_seed"])


def _train_config(s, mode):
    try:
        return TrainConfig(
            shape=NetworkShape.parse(s["layers"]),
            mode=mode,
            epochs=int(s["epochs"]),
            adam_theta=AdamConfig(s["learn_rate"], s["beta1"], s["beta2"], s["epsilon"]),
            batch_size=int(s["batch_size"]),
            seed=int(s["seed"]),
            schedule_rate=float(s["schedule_rate"]),
            val_stride=int(s["val_stride"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(s):
    if s["data"]:
        raise UsageError("generate takes --problem, not --data")
    p = problems.builtin(s["problem"] or "trig")
    d = problems.sample_grid(p, int(s["points_per_axis"]))
    out = Path(s["out"] if s["out"] != DEFAULTS["out"] else f"{p.name}.csv")
    if out.suffix != ".csv":
        out = out / f"{p.name}.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(d, out)
    print(f"wrote {len(d)} samples to {out}")
    return 0


def cmd_train(s):
    modes = s["mode"]
    if len(modes) != 1:
        raise UsageError("train takes exactly one --mode")
    cfg = _train_config(s, modes[0])
    data = prepare_data(_data_config(s))
    _, trace = train(cfg, data.train, data.val)
    out = Path(s["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(trace, out / "trace.csv")
    run = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "final_l2": trace.final_l2,
        "lowest_l2": trace.lowest_l2,
        "duration_s": trace.duration,
        "final_lambda": trace.lambdas[-1].tolist(),
        "source": data.source,
    }
    (out / "run.json").write_text(json.dumps(run, indent=2) + "\n", encoding="utf-8")
    print(f"mode {cfg.mode} seed {cfg.seed}: final l2 {trace.final_l2:.4f}, "
          f"lowest {trace.lowest_l2:.4f}, {trace.duration:.1f}s")
    return 0


def cmd_sweep(s):
    runs = int(s["runs"])
    if runs < 1:
        raise UsageError("--runs must be >= 1")
    modes = list(dict.fromkeys(s["mode"]))
    base = _train_config(s, modes[0])
    data = prepare_data(_data_config(s))
    result = sweep(data, modes, runs, base, workers=int(s["workers"]), keep_traces=bool(s["traces"]))
    out = export_results(result, s["out"], traces=bool(s["traces"]))
    for st in result.stats:
        if st.n_runs:
            print(f"mode {st.mode:2d}: mean {st.mean:.4f} median {st.median:.4f} "
                  f"[{st.min:.4f}, {st.max:.4f}] runs {st.n_runs} diverged {st.n_diverged}")
        else:
            print(f"mode {st.mode:2d}: all {st.n_diverged} runs diverged")
    print(f"results in {out}")
    return 0


def cmd_gradcheck(s):
    shape = NetworkShape.parse(s["layers"])
    report = run_gradcheck(shape, n_nets=int(s["nets"]), seed=int(s["seed"]))
    print(f"{report.n_nets} nets {shape.layer_sizes}: max param rel err {report.max_param_rel_err:.2e}, "
          f"max jacobian rel err {report.max_jacobian_rel_err:.2e}")
    ok = report.passed()
    print("PASS" if ok else "FAIL")
    return 0 if ok else 1


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "sweep": cmd_sweep, "gradcheck": cmd_gradcheck}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve(args)
        return COMMANDS[args.command](settings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, OSError, ValueError, KeyError) as exc:
        print(f"{parser.prog}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
