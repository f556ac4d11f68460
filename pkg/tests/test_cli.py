import json

import numpy as np
import pytest

from cgscale import plotting
from cgscale.cli import main, mode_bin
from cgscale.io import read_stream, read_table, sha256_file, write_stream
from cgscale.streamgen import StreamConfig, generate_stream


def gen(tmp_path, name="s.csv", **kw):
    args = dict(partitions=8, iterations=20, delta=10, seed=1)
    args.update(kw)
    argv = ["gen-stream", "-o", str(tmp_path / name)]
    for k, v in args.items():
        argv += [f"--{k}", str(v)]
    assert main(argv) == 0
    return tmp_path / name


def test_gen_stream_full_size(tmp_path, capsys):
    path = gen(tmp_path, partitions=32, iterations=500, delta=25, capacity=1.0, init="uniform", seed=7)
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "iteration,partition,bytes_per_sec"
    assert len(lines) - 1 == 32 * 500
    out = capsys.readouterr().out
    assert "partitions=32" in out and "iterations=500" in out and "clamp_count=" in out
    assert (tmp_path / "s.manifest.json").exists()


def test_gen_stream_zero_delta_constant(tmp_path):
    s = read_stream(gen(tmp_path, delta=0))
    assert (s.speeds == s.speeds[0]).all()


def test_gen_stream_byte_identical(tmp_path):
    a = gen(tmp_path, "a.csv")
    b = gen(tmp_path, "b.csv")
    assert a.read_bytes() == b.read_bytes()


def test_stream_round_trip_exact(tmp_path):
    s = generate_stream(StreamConfig(5, 7, 20.0, capacity=3.5, seed=2))
    t = read_stream(write_stream(tmp_path / "x.csv", s))
    assert np.array_equal(s.speeds, t.speeds)
    assert (t.capacity, t.delta, t.seed, t.clamp_count) == (3.5, 20.0, 2, s.clamp_count)


@pytest.mark.parametrize("body", [
    "nonsense\n",
    "iteration,partition,bytes_per_sec\n1,0,0.5\n1,1,-0.2\n",
    "iteration,partition,bytes_per_sec\n1,1,0.5\n1,0,0.2\n",
    "iteration,partition,bytes_per_sec\n1,0,0.5\n1,1,0.2\n2,0,0.1\n",
    "# capacity=1.0\niteration,partition,bytes_per_sec\n1,0,1.5\n",
])
def test_bad_stream_is_input_error(tmp_path, body):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    assert main(["pack", "--stream", str(path), "--out-dir", str(tmp_path / "o")]) == 3


def test_missing_stream_is_input_error(tmp_path):
    assert main(["pack", "--stream", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 3


def test_usage_errors_exit_2(tmp_path):
    s = gen(tmp_path)
    assert main(["evaluate", "--stream", str(s), "--algorithms", "zz", "--out-dir", str(tmp_path)]) == 2
    assert main(["latency", "--stream", str(s), "--assigners", "kafka_9",
                 "--out-dir", str(tmp_path)]) == 2
    with pytest.raises(SystemExit) as info:
        main(["gen-stream", "--partitions", "x"])
    assert info.value.code == 2


def test_pack_writes_assignments(tmp_path):
    s = gen(tmp_path)
    out = tmp_path / "p"
    assert main(["pack", "--stream", str(s), "--algorithm", "bfd", "--adapted",
                 "--out-dir", str(out)]) == 0
    rows = read_table(out / "assignments.csv")
    assert len(rows) == 8 * 20
    assert {r["iteration"] for r in rows} == {str(k) for k in range(1, 21)}


def test_evaluate_single_algorithm_cbs_zero(tmp_path):
    s = gen(tmp_path)
    out = tmp_path / "e"
    assert main(["evaluate", "--stream", str(s), "--algorithms", "mwf", "--out-dir", str(out),
                 "--no-charts"]) == 0
    (row,) = read_table(out / "summary.csv")
    assert row["cbs"] == "0"
    assert not list(out.glob("*.svg"))


def test_evaluate_outputs_and_determinism(tmp_path):
    s1 = gen(tmp_path, "d5.csv", delta=5)
    s2 = gen(tmp_path, "d25.csv", delta=25)
    runs = []
    for name in ("r1", "r2"):
        out = tmp_path / name
        assert main(["evaluate", "--stream", str(s1), "--stream", str(s2),
                     "--out-dir", str(out)]) == 0
        runs.append(out)
    names = sorted(p.name for p in runs[0].iterdir())
    assert names == sorted(["per_iteration.csv", "summary.csv", "pareto.csv", "cbs.svg",
                            "rscore.svg", "pareto_d5.svg", "pareto_d25.svg", "manifest.json"])
    for n in names:
        if n != "manifest.json":
            assert (runs[0] / n).read_bytes() == (runs[1] / n).read_bytes(), n
    header = (runs[0] / "per_iteration.csv").read_text().splitlines()[0]
    assert header == "delta,iteration,algorithm,bins,rscore"


def test_evaluate_jobs_same_result(tmp_path):
    s1 = gen(tmp_path, "d5.csv", delta=5)
    s2 = gen(tmp_path, "d25.csv", delta=25)
    base = ["evaluate", "--stream", str(s1), "--stream", str(s2), "--no-charts"]
    assert main(base + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(base + ["--out-dir", str(tmp_path / "b"), "--jobs", "2"]) == 0
    for n in ("per_iteration.csv", "summary.csv", "pareto.csv"):
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


def test_charts_rerender_identically_from_csv(tmp_path):
    s1 = gen(tmp_path, "d5.csv", delta=5)
    out = tmp_path / "e"
    assert main(["evaluate", "--stream", str(s1), "--out-dir", str(out)]) == 0
    again = plotting.plot_cbs(out / "summary.csv", tmp_path / "cbs2.svg")
    assert again.read_bytes() == (out / "cbs.svg").read_bytes()
    p2 = plotting.plot_pareto(out / "summary.csv", out / "pareto.csv", "5", tmp_path / "p.svg")
    assert p2.read_bytes() == (out / "pareto_d5.svg").read_bytes()


def test_manifest_digests(tmp_path):
    s = gen(tmp_path)
    out = tmp_path / "e"
    assert main(["evaluate", "--stream", str(s), "--out-dir", str(out), "--no-charts"]) == 0
    doc = json.loads((out / "manifest.json").read_text())
    assert doc["command"] == "evaluate" and doc["seed"] == 0
    for name, digest in doc["outputs"].items():
        assert sha256_file(out / name) == digest
    assert doc["inputs"] == {str(s): sha256_file(s)}


def test_latency_kafka_full_has_no_positive_samples(tmp_path, capsys):
    s = gen(tmp_path, partitions=8, iterations=10, delta=5)
    out = tmp_path / "l"
    assert main(["latency", "--stream", str(s), "--assigners", "mwf,kafka_1-8",
                 "--bytes-per-unit", "100", "--out-dir", str(out)]) == 0
    rows = {r["algorithm"]: r for r in read_table(out / "latency_summary.csv")}
    assert list(rows) == ["mwf"] + [f"kafka_{i}" for i in range(1, 9)]
    assert rows["kafka_8"]["positive_samples"] == "0"
    assert float(rows["mwf"]["avg_consumers"]) > 0
    assert "p90" in rows["mwf"]
    assert (out / "latency_hist.svg").exists() and (out / "latency_box.svg").exists()
    hist = read_table(out / "latency_hist.csv")
    total = sum(int(r["count"]) for r in hist if r["algorithm"] == "mwf")
    assert total == int(rows["mwf"]["positive_samples"])


def test_latency_rejects_capacity_above_bound(tmp_path):
    s = gen(tmp_path)
    assert main(["latency", "--stream", str(s), "--consumer-capacity", "1.1",
                 "--out-dir", str(tmp_path / "l")]) == 3


def test_simulate_outputs(tmp_path, capsys):
    s = gen(tmp_path, partitions=8, iterations=10, delta=25)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["simulate", "--stream", str(s), "--runs", "2", "--seed", "3",
                     "--out-dir", str(out)]) == 0
        outs.append(out)
    assert "trace check passed" in capsys.readouterr().out
    for n in ("timing.csv", "trace.csv", "sim_metrics.csv", "timing_summary.csv",
              "dt4_hist.svg", "dt3_hist.svg"):
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes(), n
    rows = read_table(outs[0] / "timing.csv")
    assert {r["event"] for r in rows} == {"dt2", "dt3", "dt4"}


def test_simulate_fault_exit_4(tmp_path, monkeypatch):
    from cgscale import brokersim, cli
    s = gen(tmp_path, partitions=4, iterations=3)
    real = brokersim.SimConfig
    monkeypatch.setattr(cli, "SimConfig",
                        lambda **kw: real(stalled_consumers=frozenset({0}), **kw))
    assert main(["simulate", "--stream", str(s), "--out-dir", str(tmp_path / "s")]) == 4


def test_mode_bin():
    assert mode_bin([4.1, 4.2, 4.9, 5.1], 0.5) == 4.0
    assert mode_bin([1.0, 2.0], 0.5) == 1.0
