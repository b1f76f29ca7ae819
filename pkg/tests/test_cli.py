import sys
from pathlib import Path

import pytest

from carptdsc.cli import main

from conftest import DATA

GDB1 = str(DATA / "gdb1.dat")
R101 = str(DATA / "r101_25.txt")


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_solve_prints_solution(capsys):
    code, out, _ = run_cli(
        capsys, "solve", "--instance", GDB1, "--seed", "1",
        "--psize", "4", "--generations", "2",
    )
    assert code == 0
    assert out.startswith("route 1:")
    assert "total " in out.splitlines()[-1]


def test_solve_solomon_with_truncation(capsys):
    code, out, _ = run_cli(
        capsys, "solve", "--instance", R101, "--max-customers", "8",
        "--algorithm", "init-only", "--seed", "2",
    )
    assert code == 0
    assert out.startswith("route 1:")


def test_generate_and_reuse_annotation(tmp_path, capsys):
    ann_path = str(tmp_path / "gdb1-3lp.ann")
    code, _, _ = run_cli(
        capsys, "generate", "--instance", GDB1, "--family", "3lp",
        "--slope-set", "2", "--gen-seed", "4", "--out", ann_path,
    )
    assert code == 0
    assert Path(ann_path).read_text().startswith("carptdsc-annotation v1")

    code, out, _ = run_cli(
        capsys, "solve", "--instance", GDB1, "--annotation", ann_path,
        "--algorithm", "init-only", "--seed", "3",
    )
    assert code == 0
    assert "depart" in out


def test_solve_trace_csv(tmp_path, capsys):
    trace_path = tmp_path / "trace.csv"
    code, _, _ = run_cli(
        capsys, "solve", "--instance", GDB1, "--seed", "1",
        "--psize", "4", "--generations", "3", "--trace", str(trace_path),
    )
    assert code == 0
    lines = trace_path.read_text().strip().splitlines()
    assert lines[0] == "generation,best_penalized,best_feasible"
    assert len(lines) == 4  # header + one row per generation
    best = [float(l.split(",")[1]) for l in lines[1:]]
    assert all(b <= a + 1e-9 for a, b in zip(best, best[1:]))


def test_bench_writes_report(tmp_path, capsys):
    out_path = str(tmp_path / "rep.txt")
    code, out, _ = run_cli(
        capsys, "bench", "--instance", GDB1, "--algorithm", "init-only",
        "--runs", "2", "--seed", "7", "--out", out_path,
    )
    assert code == 0
    assert out.startswith("carptdsc-report v1")
    assert Path(out_path).exists()
    assert Path(out_path + ".csv").exists()


def test_bench_rerun_identical_costs(tmp_path, capsys):
    args = ["bench", "--instance", GDB1, "--algorithm", "init-only",
            "--runs", "3", "--seed", "11"]
    _, out1, _ = run_cli(capsys, *args)
    _, out2, _ = run_cli(capsys, *args)
    costs1 = [l.split()[3] for l in out1.splitlines() if l.startswith("run ")]
    costs2 = [l.split()[3] for l in out2.splitlines() if l.startswith("run ")]
    assert costs1 == costs2


def test_oracle_subcommand(tmp_path, capsys):
    ann_path = str(tmp_path / "ann.txt")
    run_cli(capsys, "generate", "--instance", GDB1, "--family", "3lp",
            "--slope-set", "0.5", "--gen-seed", "1", "--out", ann_path)
    code, out, _ = run_cli(
        capsys, "oracle", "--instance", GDB1, "--annotation", ann_path,
        "--plan", "0 1 3 0 5 0", "--oracle-step", "1.0",
    )
    assert code == 0
    assert out.count("oracle depart") == 2
    assert out.strip().splitlines()[-1].startswith("total ")


def test_stats_subcommand(tmp_path, capsys):
    rep_a = str(tmp_path / "a.txt")
    rep_b = str(tmp_path / "b.txt")
    run_cli(capsys, "bench", "--instance", GDB1, "--algorithm", "init-only",
            "--runs", "3", "--seed", "0", "--out", rep_a)
    run_cli(capsys, "bench", "--instance", GDB1, "--algorithm", "init-only",
            "--runs", "3", "--seed", "60", "--out", rep_b)
    lb_path = tmp_path / "lb.txt"
    lb_path.write_text("gdb1 316\n")
    code, out, _ = run_cli(capsys, "stats", rep_a, rep_b, "--lb", str(lb_path))
    assert code == 0
    assert "w-d-l" in out
    assert "No.best" in out
    assert "Ave.PDR vs LB" in out


def test_missing_file_nonzero_exit(capsys):
    code, _, err = run_cli(capsys, "solve", "--instance", "/nope/missing.dat")
    assert code == 1
    assert "error:" in err


def test_bad_plan_nonzero_exit(capsys):
    code, _, err = run_cli(
        capsys, "oracle", "--instance", GDB1, "--plan", "1 2 3",
        "--oracle-step", "1.0",
    )
    assert code == 1
    assert "error:" in err
