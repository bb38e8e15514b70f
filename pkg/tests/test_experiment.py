import csv
import json

import jsonschema
import numpy as np
import pytest

from sobolev_rw import experiment as ex
from sobolev_rw.trainer import TrainConfig


@pytest.fixture(scope="module")
def small_data():
    return ex.prepare_data(ex.DataConfig(problem="peaks", points_per_axis=9, n_train=41, n_val=40))


@pytest.fixture(scope="module")
def small_sweep(small_data):
    base = TrainConfig(epochs=3, batch_size=16, val_stride=2)
    return ex.sweep(small_data, [10, 6, 12], 3, base, keep_traces=True)


def run(final, mode=10, seed=0):
    return ex.RunSummary(mode, seed, final, final, 1.0, [1.0, 1.0, 1.0])


def test_quartiles_midpoint_convention():
    st = ex.mode_statistics(10, [run(v) for v in (4.0, 2.0, 1.0, 3.0)])
    assert (st.q1, st.median, st.q3) == (1.5, 2.5, 3.5)
    assert (st.min, st.mean, st.max) == (1.0, 2.5, 4.0)


def test_single_run_statistics():
    st = ex.mode_statistics(3, [run(0.2)])
    assert st.mean == st.median == st.min == st.max == 0.2


def test_diverged_runs_are_counted_not_averaged():
    bad = ex.RunSummary(10, 1, float("nan"), float("nan"), 0.0, [], True, "boom")
    st = ex.mode_statistics(10, [run(0.1), bad, run(0.3, seed=2)])
    assert st.n_runs == 2 and st.n_diverged == 1 and st.mean == pytest.approx(0.2)
    empty = ex.mode_statistics(10, [bad])
    assert empty.n_runs == 0 and empty.mean is None


def test_sweep_structure(small_sweep):
    assert [s.mode for s in small_sweep.stats] == [10, 6, 12]
    assert len(small_sweep.runs) == 9
    assert sorted(small_sweep.traces) == sorted((m, s) for m in (10, 6, 12) for s in range(3))
    for s in small_sweep.stats:
        assert s.q1 <= s.median <= s.q3 and s.min <= s.mean <= s.max
    assert small_sweep.protocol["seeds"] == [0, 1, 2]


def test_sweep_rejects_zero_runs(small_data):
    with pytest.raises(ValueError):
        ex.sweep(small_data, [10], 0)


def test_export_files_and_schema(small_sweep, tmp_path):
    out = ex.export_results(small_sweep, tmp_path / "res")
    doc = json.loads((out / "summary.json").read_text())
    jsonschema.validate(doc, ex.SUMMARY_SCHEMA)
    assert doc["quartile_convention"] == ex.QUARTILE_CONVENTION
    assert "mean_duration" not in doc["modes"]["10"]
    timing = json.loads((out / "timing.json").read_text())
    assert timing["6"]["total_duration_s"] > 0
    rows = list(csv.DictReader((out / "runs.csv").open()))
    assert len(rows) == 3 * 3
    trace_rows = (out / "trace_6_1.csv").read_text().splitlines()
    assert trace_rows[0].startswith("iteration,weighted_loss,response_loss,sens_loss_x1")
    assert len(trace_rows) == 1 + len(small_sweep.traces[(6, 1)])


def test_export_round_trip(small_sweep, tmp_path):
    out = ex.export_results(small_sweep, tmp_path / "rt", traces=False)
    protocol, stats = ex.import_summary(out)
    assert protocol == json.loads(json.dumps(small_sweep.protocol))
    assert [a.mode for a in stats] == [6, 10, 12]
    by_mode = {b.mode: b for b in small_sweep.stats}
    for a in stats:
        b = by_mode[a.mode]
        for f in ("n_runs", "n_diverged"):
            assert getattr(a, f) == getattr(b, f)
        for f in ex.STAT_FIELDS:
            assert abs(getattr(a, f) - getattr(b, f)) <= 1e-12


def test_statistics_match_runs_csv(small_sweep, tmp_path):
    out = ex.export_results(small_sweep, tmp_path / "bf", traces=False)
    runs = ex.read_runs_csv(out)
    _, stats = ex.import_summary(out)
    for st in stats:
        vals = sorted(r.final_l2 for r in runs if r.mode == st.mode)
        n = len(vals)
        assert st.mean == pytest.approx(sum(vals) / n, abs=1e-15)
        assert st.min == vals[0] and st.max == vals[-1]
        assert st.median == (vals[n // 2] if n % 2 else (vals[n // 2 - 1] + vals[n // 2]) / 2)


def test_runs_csv_excludes_diverged(tmp_path):
    bad = ex.RunSummary(10, 1, float("nan"), float("nan"), 0.0, [], True, "boom")
    res = ex.SweepResult([ex.mode_statistics(10, [run(0.1), bad])], [run(0.1), bad], {}, {"source": "x"})
    out = ex.export_results(res, tmp_path / "d")
    assert len((out / "runs.csv").read_text().splitlines()) == 2


def test_export_io_error_names_path(small_sweep, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        ex.export_results(small_sweep, blocker / "sub")


def test_sweep_is_reproducible(small_data, tmp_path):
    base = TrainConfig(epochs=2, batch_size=16)
    a = ex.export_results(ex.sweep(small_data, [1, 11], 2, base), tmp_path / "a")
    b = ex.export_results(ex.sweep(small_data, [1, 11], 2, base), tmp_path / "b")
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()


def test_parallel_sweep_matches_serial(small_data):
    base = TrainConfig(epochs=2, batch_size=16)
    serial = ex.sweep(small_data, [10, 2], 2, base)
    parallel = ex.sweep(small_data, [10, 2], 2, base, workers=2)
    assert json.dumps(ex.summary_document(serial)) == json.dumps(ex.summary_document(parallel))


def test_csv_source(tmp_path):
    from sobolev_rw import data, problems

    path = data.write_csv(problems.sample_grid(problems.builtin("ridge"), 7), tmp_path / "r.csv")
    prepared = ex.prepare_data(ex.DataConfig(problem=None, csv_path=str(path), n_train=25, n_val=24))
    assert prepared.source == "csv:r.csv" and len(prepared.train) == 25


def test_presets():
    dc, kw, runs = ex.PRESETS["paper500"]
    assert (dc.points_per_axis, dc.n_train, dc.n_val, dc.split, kw["epochs"], runs) == (25, 313, 312, "stride2", 500, 100)
    dc, _, _ = ex.PRESETS["paper500_320"]
    prepared = ex.prepare_data(dc)
    assert len(prepared.train) == 320 and len(prepared.val) == 305
