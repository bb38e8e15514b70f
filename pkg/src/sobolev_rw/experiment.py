"""Multi-seed sweeps over weighting modes, summary statistics and export."""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import problems
from .data import Dataset, apply_standardize, fit_standardize, grid_split, read_csv
from .trainer import DivergenceError, RunTrace, TrainConfig, train

log = logging.getLogger(__name__)

QUARTILE_CONVENTION = "numpy.percentile(method='midpoint') on sorted final errors"

STAT_FIELDS = ("mean", "median", "q1", "q3", "min", "max")

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["protocol", "quartile_convention", "modes"],
    "properties": {
        "protocol": {
            "type": "object",
            "required": ["source", "seeds", "epochs", "layers", "batch_size", "split"],
        },
        "quartile_convention": {"type": "string"},
        "modes": {
            "type": "object",
            "patternProperties": {
                "^[0-9]+$": {
                    "type": "object",
                    "required": ["mode", "n_runs", "n_diverged", *STAT_FIELDS],
                    "properties": {
                        "mode": {"type": "integer", "minimum": 1, "maximum": 13},
                        "n_runs": {"type": "integer", "minimum": 0},
                        "n_diverged": {"type": "integer", "minimum": 0},
                        **{k: {"type": ["number", "null"]} for k in STAT_FIELDS},
                    },
                }
            },
            "additionalProperties": False,
        },
    },
}


@dataclass(frozen=True)
class DataConfig:
    problem: str | None = "trig"
    csv_path: str | None = None
    points_per_axis: int = 25
    n_train: int = 313
    n_val: int = 312
    split: str = "stride2"
    split_seed: int = 0


PRESETS = {
    "paper500": (DataConfig(), dict(epochs=500), 100),
    "paper500_320": (DataConfig(n_train=320, n_val=305, split="seeded"), dict(epochs=500), 100),
}


@dataclass
class PreparedData:
    train: Dataset
    val: Dataset
    source: str
    split: dict


def prepare_data(dc: DataConfig) -> PreparedData:
    if dc.csv_path:
        raw = read_csv(dc.csv_path)
        source = f"csv:{Path(dc.csv_path).name}"
    else:
        raw = problems.sample_grid(problems.builtin(dc.problem), dc.points_per_axis)
        source = f"problem:{dc.problem}:{dc.points_per_axis}x{dc.points_per_axis}"
    tr, va = grid_split(raw, dc.n_train, dc.n_val, dc.split, dc.split_seed)
    tr_s, stats = fit_standardize(tr)
    va_s = apply_standardize(va, stats)
    split = {"pattern": dc.split, "n_train": dc.n_train, "n_val": dc.n_val}
    if dc.split == "seeded":
        split["seed"] = dc.split_seed
    return PreparedData(tr_s, va_s, source, split)


@dataclass
class RunSummary:
    mode: int
    seed: int
    final_l2: float
    lowest_l2: float
    duration: float
    final_lambda: list
    diverged: bool = False
    error: str = ""


@dataclass
class ModeStatistics:
    mode: int
    n_runs: int
    n_diverged: int = 0
    mean: float | None = None
    median: float | None = None
    q1: float | None = None
    q3: float | None = None
    min: float | None = None
    max: float | None = None
    mean_duration: float | None = None
    total_duration: float = 0.0

    def to_json(self):
        # wall-clock timing lives in timing.json so summary.json stays reproducible
        d = asdict(self)
        d.pop("mean_duration")
        d.pop("total_duration")
        return d


@dataclass
class SweepResult:
    stats: list
    runs: list
    traces: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)


def mode_statistics(mode, runs) -> ModeStatistics:
    ok = [r for r in runs if not r.diverged]
    st = ModeStatistics(mode=mode, n_runs=len(ok), n_diverged=len(runs) - len(ok))
    st.total_duration = float(sum(r.duration for r in runs))
    if not ok:
        return st
    vals = np.array([r.final_l2 for r in ok])
    st.mean = float(vals.mean())
    st.median = float(np.percentile(vals, 50, method="midpoint"))
    st.q1 = float(np.percentile(vals, 25, method="midpoint"))
    st.q3 = float(np.percentile(vals, 75, method="midpoint"))
    st.min = float(vals.min())
    st.max = float(vals.max())
    st.mean_duration = float(np.mean([r.duration for r in ok]))
    return st


def _run_one(args):
    cfg, train_set, val_set = args
    try:
        _, trace = train(cfg, train_set, val_set)
    except DivergenceError as exc:
        log.warning("mode %d seed %d diverged: %s", cfg.mode, cfg.seed, exc)
        return RunSummary(cfg.mode, cfg.seed, math.nan, math.nan, 0.0, [], True, str(exc)), None
    summary = RunSummary(
        mode=cfg.mode,
        seed=cfg.seed,
        final_l2=trace.final_l2,
        lowest_l2=trace.lowest_l2,
        duration=trace.duration,
        final_lambda=trace.lambdas[-1].tolist(),
    )
    return summary, trace


def sweep(data: PreparedData, modes, n_runs, base: TrainConfig = TrainConfig(),
          workers=1, keep_traces=False) -> SweepResult:
    """Train seeds 0..n_runs-1 for every mode and aggregate the final errors."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    jobs = [(replace(base, mode=m, seed=s), data.train, data.val) for m in modes for s in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    runs = [r for r, _ in results]
    traces = {}
    if keep_traces:
        traces = {(r.mode, r.seed): t for r, t in results if t is not None}
    stats = [mode_statistics(m, [r for r in runs if r.mode == m]) for m in modes]
    protocol = {
        "source": data.source,
        "seeds": list(range(n_runs)),
        "epochs": base.epochs,
        "layers": list(base.shape.layer_sizes),
        "batch_size": base.batch_size,
        "adam_theta": asdict(base.adam_theta),
        "adam_lambda": asdict(base.adam_lambda),
        "schedule_rate": base.schedule_rate,
        "epsilon0": base.epsilon0,
        "val_stride": base.val_stride,
        "split": data.split,
    }
    return SweepResult(stats, runs, traces, protocol)


def summary_document(result: SweepResult):
    return {
        "protocol": result.protocol,
        "quartile_convention": QUARTILE_CONVENTION,
        "modes": {str(s.mode): s.to_json() for s in result.stats},
    }


RUNS_COLUMNS = ("mode", "seed", "final_l2", "lowest_l2", "duration", "final_lambda")


def _write(path, text):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def write_trace_csv(trace: RunTrace, path):
    n_in = trace.sensitivity_loss.shape[1]
    header = (["iteration", "weighted_loss", "response_loss"]
              + [f"sens_loss_x{j + 1}" for j in range(n_in)]
              + ["lambda_response"] + [f"lambda_x{j + 1}" for j in range(n_in)]
              + ["val_l2"])
    lines = [",".join(header)]
    for i in range(len(trace)):
        row = [trace.weighted_loss[i], trace.response_loss[i], *trace.sensitivity_loss[i],
               *trace.lambdas[i], trace.val_l2[i]]
        lines.append(",".join([str(i)] + [repr(float(v)) for v in row]))
    _write(Path(path), "\n".join(lines) + "\n")


def export_results(result: SweepResult, path, traces=True):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror}") from exc
    _write(out / "summary.json", json.dumps(summary_document(result), indent=2, sort_keys=True) + "\n")

    timing = {
        str(s.mode): {"mean_duration_s": s.mean_duration, "total_duration_s": s.total_duration}
        for s in result.stats
    }
    _write(out / "timing.json", json.dumps(timing, indent=2, sort_keys=True) + "\n")

    lines = [",".join(RUNS_COLUMNS)]
    for r in result.runs:
        if r.diverged:
            continue
        lam = " ".join(repr(float(v)) for v in r.final_lambda)
        lines.append(f"{r.mode},{r.seed},{r.final_l2!r},{r.lowest_l2!r},{r.duration!r},{lam}")
    _write(out / "runs.csv", "\n".join(lines) + "\n")

    if traces:
        for (mode, seed), tr in sorted(result.traces.items()):
            write_trace_csv(tr, out / f"trace_{mode}_{seed}.csv")
    return out


def import_summary(path):
    """Read summary.json back into (protocol, [ModeStatistics])."""
    p = Path(path)
    if p.is_dir():
        p = p / "summary.json"
    doc = json.loads(p.read_text(encoding="utf-8"))
    stats = [ModeStatistics(**v) for _, v in sorted(doc["modes"].items(), key=lambda kv: int(kv[0]))]
    return doc["protocol"], stats


def read_runs_csv(path):
    p = Path(path)
    if p.is_dir():
        p = p / "runs.csv"
    with p.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RunSummary(
            mode=int(r["mode"]),
            seed=int(r["seed"]),
            final_l2=float(r["final_l2"]),
            lowest_l2=float(r["lowest_l2"]),
            duration=float(r["duration"]),
            final_lambda=[float(v) for v in r["final_lambda"].split()],
        )
        for r in rows
    ]
