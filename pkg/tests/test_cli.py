import json
import os
import time

import numpy as np
import pytest

from beautycontest.cli import main
from beautycontest.estimators import Histogram


def run_cli(*argv):
    return main(list(argv))


# ---------------------------------------------------------------------------
# simulate


def test_simulate_quarters_multimodal(tmp_path):
    hist_path = tmp_path / "h.csv"
    summary_path = tmp_path / "s.json"
    code = run_cli(
        "simulate", "--n-points", "3", "--dim", "1", "--replicas", "100000",
        "--init", "list:0.25,0.5,0.75", "--tol", "1e-4", "--seed", "7",
        "--mode", "event-skip", "--out-hist", str(hist_path),
        "--out-summary", str(summary_path),
    )
    assert code == 0
    h = Histogram.from_csv(hist_path)
    assert h.total == 100000
    dens = h.density()
    edges = h.bin_edges()
    centers = 0.5 * (edges[:-1] + edges[1:])

    def band(lo, hi):
        return dens[(centers >= lo) & (centers < hi)].mean()

    # three separated modes at the initial points, valleys between
    assert band(0.23, 0.27) > 2.0
    assert band(0.48, 0.52) > 2.0
    assert band(0.73, 0.77) > 2.0
    assert band(0.33, 0.43) < 1.2
    assert band(0.57, 0.67) < 1.2

    summary = json.loads(summary_path.read_text())
    assert summary["config"]["init"] == "list:0.25,0.5,0.75"
    assert summary["results"]["replicas"] == 100000


def test_simulate_deterministic_across_threads(tmp_path):
    out = {}
    for threads in ("1", "3"):
        hist_path = tmp_path / f"h{threads}.csv"
        summary_path = tmp_path / f"s{threads}.json"
        code = run_cli(
            "simulate", "--n-points", "3", "--replicas", "3000", "--seed", "11",
            "--tol", "1e-3", "--threads", threads,
            "--out-hist", str(hist_path), "--out-summary", str(summary_path),
        )
        assert code == 0
        out[threads] = (hist_path.read_bytes(), json.loads(summary_path.read_text()))
    assert out["1"][0] == out["3"][0]  # histogram CSV byte-identical
    a, b = out["1"][1], out["3"][1]
    ra, rb = a.pop("runtime"), b.pop("runtime")
    assert a == b
    assert ra["threads"] == 1 and rb["threads"] == 3


def test_simulate_rerun_reproduces_files(tmp_path):
    args = (
        "simulate", "--n-points", "4", "--replicas", "2000", "--seed", "3",
        "--tol", "1e-3", "--mode", "event-skip",
    )
    paths = []
    for tag in ("a", "b"):
        hist_path = tmp_path / f"{tag}.csv"
        summary_path = tmp_path / f"{tag}.json"
        assert run_cli(*args, "--out-hist", str(hist_path),
                       "--out-summary", str(summary_path)) == 0
        paths.append((hist_path, summary_path))
    assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
    a = json.loads(paths[0][1].read_text())
    b = json.loads(paths[1][1].read_text())
    a.pop("runtime")
    b.pop("runtime")
    assert a == b


def test_simulate_rejects_duplicate_points(tmp_path, capsys):
    code = run_cli(
        "simulate", "--n-points", "3", "--replicas", "10",
        "--init", "list:0.5,0.5,0.7",
        "--out-hist", str(tmp_path / "h.csv"),
        "--out-summary", str(tmp_path / "s.json"),
    )
    assert code == 2
    assert "distinct" in capsys.readouterr().err


def test_simulate_modified_model(tmp_path):
    hist_path = tmp_path / "h.csv"
    summary_path = tmp_path / "s.json"
    code = run_cli(
        "simulate", "--n-points", "3", "--replicas", "50000", "--seed", "5",
        "--model", "modified3", "--init", "list:-0.5,0.5,100",
        "--hist-range=-4,4", "--out-hist", str(hist_path),
        "--out-summary", str(summary_path),
    )
    assert code == 0
    summary = json.loads(summary_path.read_text())
    moments = summary["results"]["moments"]["coord0"]
    assert abs(moments["values"][0]) < 4 * max(moments["standard_errors"][0], 1e-9)
    assert abs(moments["values"][1] - 7 / 12) < 4 * moments["standard_errors"][1]


def test_simulate_dim2_writes_per_coordinate(tmp_path):
    code = run_cli(
        "simulate", "--n-points", "4", "--dim", "2", "--replicas", "500",
        "--seed", "2", "--tol", "1e-2",
        "--out-hist", str(tmp_path / "h.csv"),
        "--out-summary", str(tmp_path / "s.json"),
    )
    assert code == 0
    assert (tmp_path / "h.coord0.csv").exists()
    assert (tmp_path / "h.coord1.csv").exists()


def test_simulate_out_samples_round_trip(tmp_path):
    samples_path = tmp_path / "x.txt"
    code = run_cli(
        "simulate", "--n-points", "3", "--replicas", "1000", "--seed", "9",
        "--tol", "1e-3", "--out-hist", str(tmp_path / "h.csv"),
        "--out-summary", str(tmp_path / "s.json"),
        "--out-samples", str(samples_path),
    )
    assert code == 0
    vals = [float(l) for l in samples_path.read_text().splitlines()
            if l and not l.startswith("#")]
    assert len(vals) == 1000
    assert all(0.0 <= v <= 1.0 for v in vals)


# ---------------------------------------------------------------------------
# fit-beta


def test_fit_beta_from_samples(tmp_path):
    rng = np.random.default_rng(123)
    samples_path = tmp_path / "samples.txt"
    samples_path.write_text("\n".join(repr(float(v)) for v in rng.beta(1.5, 1.5, 200000)))
    out_path = tmp_path / "fit.json"
    assert run_cli("fit-beta", "--in-samples", str(samples_path),
                   "--out", str(out_path)) == 0
    fit = json.loads(out_path.read_text())
    assert abs(fit["beta_star"] - 1.5) < 0.05
    assert fit["n"] == 200000
    assert set(fit) >= {"beta_star", "kappa", "n"}


def test_fit_beta_from_histogram(tmp_path):
    rng = np.random.default_rng(124)
    h = Histogram.from_samples(rng.beta(1.5, 1.5, 200000), bins=200)
    hist_path = tmp_path / "h.csv"
    h.to_csv(hist_path)
    out_path = tmp_path / "fit.json"
    assert run_cli("fit-beta", "--in-hist", str(hist_path), "--out", str(out_path)) == 0
    fit = json.loads(out_path.read_text())
    assert abs(fit["beta_star"] - 1.5) < 0.1


def test_fit_beta_empty_input(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    assert run_cli("fit-beta", "--in-samples", str(empty),
                   "--out", str(tmp_path / "o.json")) == 2


def test_fit_beta_needs_exactly_one_source(tmp_path):
    assert run_cli("fit-beta", "--out", str(tmp_path / "o.json")) == 2


def test_fit_beta_missing_file_is_io_error(tmp_path):
    assert run_cli("fit-beta", "--in-samples", str(tmp_path / "nope.txt"),
                   "--out", str(tmp_path / "o.json")) == 3


# ---------------------------------------------------------------------------
# exact3


def test_exact3_quarters(tmp_path):
    out_path = tmp_path / "m.json"
    assert run_cli("exact3", "--k-max", "6", "--init", "list:0.25,0.5,0.75",
                   "--out", str(out_path)) == 0
    payload = json.loads(out_path.read_text())
    xi = {m["k"]: (m["num"], m["den"]) for m in payload["xi_moments"]}
    assert xi[1] == ("1", "2")
    assert xi[2] == ("29", "96")
    assert xi[3] == ("13", "64")
    assert xi[4] == ("873", "5888")
    theta = {m["k"]: (m["num"], m["den"]) for m in payload["theta"]}
    assert theta[6] == ("76693", "22080")


def test_exact3_uniform(tmp_path):
    out_path = tmp_path / "m.json"
    assert run_cli("exact3", "--k-max", "3", "--init", "uniform",
                   "--out", str(out_path)) == 0
    payload = json.loads(out_path.read_text())
    xi = {m["k"]: (m["num"], m["den"]) for m in payload["xi_moments"]}
    assert xi[1] == ("1", "2") and xi[2] == ("1", "3") and xi[3] == ("1", "4")


def test_exact3_kmax_zero(tmp_path):
    out_path = tmp_path / "m.json"
    assert run_cli("exact3", "--k-max", "0", "--out", str(out_path)) == 0
    payload = json.loads(out_path.read_text())
    assert payload["theta"] == [{"k": 0, "num": "1", "den": "1", "float": 1.0}]


def test_exact3_kmax_guard(tmp_path):
    assert run_cli("exact3", "--k-max", "41", "--out", str(tmp_path / "m.json")) == 2


# ---------------------------------------------------------------------------
# pi-trace


def test_pi_trace_zero_steps(tmp_path):
    out_path = tmp_path / "p.csv"
    assert run_cli("pi-trace", "--n-points", "3", "--steps", "0",
                   "--out", str(out_path)) == 0
    lines = [l for l in out_path.read_text().splitlines() if not l.startswith("#")]
    assert lines == ["t,pi_N,core_mean"]


def test_pi_trace_converges(tmp_path):
    out_path = tmp_path / "p.csv"
    assert run_cli("pi-trace", "--n-points", "3", "--steps", "200000",
                   "--stride", "10000", "--seed", "31", "--out", str(out_path)) == 0
    rows = [l.split(",") for l in out_path.read_text().splitlines()
            if l and not l.startswith(("#", "t,"))]
    t, pi, mean = rows[-1]
    assert int(t) == 200000
    assert abs(float(pi) - float(mean)) < 0.05


def test_pi_trace_rejects_dim2(tmp_path):
    assert run_cli("pi-trace", "--n-points", "3", "--dim", "2", "--steps", "10",
                   "--out", str(tmp_path / "p.csv")) == 2


# ---------------------------------------------------------------------------
# selftest


def test_selftest_passes_quick(capsys):
    t0 = time.perf_counter()
    assert run_cli("selftest", "--quick") == 0
    assert time.perf_counter() - t0 < 10.0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out


def test_selftest_full_passes():
    assert run_cli("selftest") == 0


def test_selftest_detects_injected_fault(capsys):
    assert run_cli("selftest", "--quick", "--inject-fault", "g-sign") == 1
    out = capsys.readouterr().out
    assert "FAIL  lemma2-sandwich" in out


# ---------------------------------------------------------------------------
# environment override


def test_bcl_threads_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("BCL_THREADS", "2")
    summary_path = tmp_path / "s.json"
    assert run_cli(
        "simulate", "--n-points", "3", "--replicas", "100", "--seed", "1",
        "--tol", "1e-2", "--threads", "7",
        "--out-hist", str(tmp_path / "h.csv"), "--out-summary", str(summary_path),
    ) == 0
    summary = json.loads(summary_path.read_text())
    assert summary["runtime"]["threads"] == 2
