"""End-to-end command tests: every subcommand through main(argv), checking
exit codes, file schemas, provenance headers, seed columns, and agreement
with the library calls the commands claim to wrap."""
import csv
import json
import math
import re

import numpy as np
import pytest

from ternary_qaoa.cli import (
    CIRCUIT_SCHEMA,
    DICKE_SCHEMA,
    NOISE_SCHEMA,
    SWEEP_SCHEMA,
    _derived_seed,
    main,
)
from ternary_qaoa.engine import BackendSpec, QaoaParams, engine_for
from ternary_qaoa.finance import instance_from_json, instance_to_json, random_instance
from ternary_qaoa.problem import enumerate_feasible


def read_table(path, schema):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ternary-qaoa "), "provenance comment line"
    rows = list(csv.DictReader(lines[1:]))
    for row in rows:
        assert list(row) == list(schema)
    return lines, rows


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "ternary-qaoa" in capsys.readouterr().out


def write_prices(path, days=7, g_a=0.001, g_b=-0.0005):
    rows = ["# demo prices", "date,AAA,BBB"]
    for t in range(days):
        rows.append(f"2024-01-{t + 1:02d},{100.0 * (1 + g_a) ** t:.10f},"
                    f"{50.0 * (1 + g_b) ** t:.10f}")
    path.write_text("\n".join(rows) + "\n")


def test_estimate_constant_growth(tmp_path, capsys):
    prices = tmp_path / "prices.csv"
    out = tmp_path / "inst.json"
    write_prices(prices)
    rc = main(["estimate", "--prices", str(prices), "--out", str(out),
               "--budget", "1"])
    assert rc == 0
    inst = instance_from_json(out.read_text())
    assert inst.n_assets == 2
    assert inst.budget == 1
    assert inst.labels == ("AAA", "BBB")
    assert abs(inst.mu[0] - ((1.001) ** 252 - 1)) < 1e-10
    assert abs(inst.mu[1] - ((0.9995) ** 252 - 1)) < 1e-10
    # constant growth: zero-variance returns
    assert np.allclose(inst.sigma, 0.0, atol=1e-18)
    assert inst.provenance["n_return_rows"] == 6
    assert "estimate: 2 assets" in capsys.readouterr().out


def test_estimate_missing_file(tmp_path, capsys):
    rc = main(["estimate", "--prices", str(tmp_path / "nope.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_brute_force_seeded_matches_library(tmp_path, capsys):
    out = tmp_path / "bf.json"
    rc = main(["brute-force", "--seed", "3", "--n-assets", "3",
               "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert list(payload) == ["rand-n3-s3"]
    entry = payload["rand-n3-s3"]
    summary = enumerate_feasible(random_instance(3, 1, seed=3))
    assert entry["n_assets"] == 3
    assert entry["budget"] == 1
    assert entry["f_min"] == summary.f_min
    assert entry["feasible_count"] == summary.feasible_count
    assert tuple(entry["argmin_set"]) == summary.argmin_set
    text = capsys.readouterr().out
    assert "F_min=" in text and "brute-force: wrote" in text


def test_brute_force_instance_file(tmp_path):
    inst = random_instance(2, 1, seed=9)
    src = tmp_path / "alpha.json"
    src.write_text(instance_to_json(inst))
    out = tmp_path / "bf.json"
    rc = main(["brute-force", "--instance", str(src), "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert list(payload) == ["alpha"]
    assert payload["alpha"]["f_min"] == enumerate_feasible(inst).f_min


def test_sweep_tiny_table(tmp_path):
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--seed", "5", "--n-assets", "2",
            "--mixers", "standard,xy-ring", "--depths", "1",
            "--grid-resolution", "6", "--master-seed", "7", "--out", str(out)]
    assert main(args) == 0
    lines, rows = read_table(out, SWEEP_SCHEMA)
    assert "| sweep |" in lines[0]
    assert [r["mixer"] for r in rows] == ["standard", "xy-ring"]
    assert all(r["instance"] == "rand-n2-s5" for r in rows)
    assert all(r["depth"] == "1" for r in rows)
    assert int(rows[0]["seed"]) == _derived_seed(7, 0, 0, 0)
    assert int(rows[1]["seed"]) == _derived_seed(7, 0, 1, 0)
    # hard-mixer rows stay feasible; metrics bounded
    assert float(rows[1]["p_feasible"]) > 1 - 1e-9
    assert all(0.0 <= float(r["r_bar"]) <= 1.0 for r in rows)
    # objective column reproduces an engine evaluation at the logged angles
    inst = random_instance(2, 1, seed=5)
    for row in rows:
        engine = engine_for(inst, row["mixer"])
        params = QaoaParams(
            gammas=tuple(float(v) for v in row["gammas"].split(";")),
            betas=tuple(float(v) for v in row["betas"].split(";")),
        )
        value = engine.evaluate_objective(params, BackendSpec(kind="statevector"))
        assert abs(value - float(row["objective"])) < 1e-6


def test_sweep_rerun_is_bitwise_identical(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        main(["sweep", "--seed", "5", "--n-assets", "2", "--mixers", "xy-ring",
              "--depths", "1", "--grid-resolution", "6", "--out", str(out)])
        outs.append(out.read_text().splitlines()[1:])  # comment line names out
    assert outs[0] == outs[1]


def test_sweep_sampled_backend(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "--seed", "5", "--n-assets", "2", "--mixers", "xy-ring",
               "--depths", "1", "--backend", "sampled", "--shots", "256",
               "--grid-resolution", "5", "--out", str(out)])
    assert rc == 0
    _, rows = read_table(out, SWEEP_SCHEMA)
    assert rows[0]["method"] == "nelder-mead"
    assert 0.0 <= float(rows[0]["p_opt"]) <= 1.0


def test_sweep_rejects_unknown_mixer(tmp_path, capsys):
    rc = main(["sweep", "--seed", "1", "--n-assets", "2",
               "--mixers", "xy-torus", "--out", str(tmp_path / "s.csv")])
    assert rc == 1
    assert "unknown mixer" in capsys.readouterr().err


def test_sweep_rejects_nonpositive_depth(tmp_path, capsys):
    rc = main(["sweep", "--seed", "1", "--n-assets", "2", "--depths", "0",
               "--out", str(tmp_path / "s.csv")])
    assert rc == 1
    assert "depths must be >= 1" in capsys.readouterr().err


def test_noise_sweep_tiny(tmp_path, capsys):
    out = tmp_path / "noise.csv"
    args = ["noise-sweep", "--seed", "2", "--n-assets", "2",
            "--mixers", "standard,xy-full", "--depths", "1",
            "--eta", "0,0.5", "--shots", "128", "--grid-resolution", "6",
            "--out", str(out)]
    assert main(args) == 0
    _, rows = read_table(out, NOISE_SCHEMA)
    assert [(r["mixer"], r["eta"]) for r in rows] == [
        ("standard", "0"), ("standard", "0.5"),
        ("xy-full", "0"), ("xy-full", "0.5")]
    assert all(r["reoptimized"] == "0" and r["shots"] == "128" for r in rows)
    # eta=0 density run of the hard mixer keeps all mass feasible
    xy0 = rows[2]
    assert float(xy0["p_feasible"]) == 1.0
    text = capsys.readouterr().out
    lines = re.findall(r"crossover instance=rand-n2-s2 depth=1 "
                       r"metric=(?:p_opt|r_bar) eta=\S+", text)
    assert len(lines) == 2


def test_noise_sweep_reoptimize_never_hurts(tmp_path):
    base, reopt = [], []
    for flag, sink in ((False, base), (True, reopt)):
        out = tmp_path / f"noise{int(flag)}.csv"
        args = ["noise-sweep", "--seed", "2", "--n-assets", "2",
                "--mixers", "xy-full", "--depths", "1", "--eta", "0.3",
                "--shots", "64", "--grid-resolution", "6", "--out", str(out)]
        if flag:
            args.append("--reoptimize")
        assert main(args) == 0
        _, rows = read_table(out, NOISE_SCHEMA)
        sink.extend(rows)
    assert base[0]["reoptimized"] == "0"
    assert reopt[0]["reoptimized"] == "1"
    # the polish starts from the noiseless angles and keeps the best point
    assert float(reopt[0]["objective"]) <= float(base[0]["objective"]) + 1e-9


def test_noise_sweep_refuses_oversized_instance(tmp_path, capsys):
    out = tmp_path / "noise.csv"
    rc = main(["noise-sweep", "--seed", "1", "--n-assets", "8",
               "--mixers", "standard", "--depths", "1", "--eta", "0",
               "--shots", "8", "--grid-resolution", "4", "--out", str(out)])
    assert rc == 2
    assert "density-matrix" in capsys.readouterr().err
    _, rows = read_table(out, NOISE_SCHEMA)
    assert rows == []


def test_dicke_noise_endpoints(tmp_path):
    out = tmp_path / "dicke.csv"
    rc = main(["dicke-noise", "--n-assets", "2", "--eta", "1,0",
               "--shots", "4000", "--out", str(out)])
    assert rc == 0
    _, rows = read_table(out, DICKE_SCHEMA)
    # rows come out sorted by eta even though the flag listed 1 first
    assert [r["eta"] for r in rows] == ["0", "1"]
    assert all(r["n_assets"] == "2" and r["budget"] == "1" for r in rows)
    assert float(rows[0]["p_feasible_exact"]) == 1.0
    assert float(rows[0]["p_feasible_sampled"]) == 1.0
    # full depolarizing leaves the uniform state: C(4,3)/16
    assert abs(float(rows[1]["p_feasible_exact"]) - 0.25) < 1e-12
    sigma = math.sqrt(0.25 * 0.75 / 4000)
    assert abs(float(rows[1]["p_feasible_sampled"]) - 0.25) < 4 * sigma
    assert int(rows[0]["seed"]) == _derived_seed(1234, 0)
    assert int(rows[1]["seed"]) == _derived_seed(1234, 1)


def test_dicke_noise_rejects_bad_budget(tmp_path, capsys):
    rc = main(["dicke-noise", "--n-assets", "2", "--budget", "3",
               "--out", str(tmp_path / "d.csv")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_circuit_report_small(tmp_path):
    out = tmp_path / "report.csv"
    rc = main(["circuit-report", "--mixers", "standard,xy-ring,qampa",
               "--n-assets", "2,3", "--depths", "0,1", "--out", str(out)])
    assert rc == 0
    _, rows = read_table(out, CIRCUIT_SCHEMA)
    assert len(rows) == 12
    assert [(r["mixer"], r["n_assets"], r["p"]) for r in rows[:4]] == [
        ("standard", "2", "0"), ("standard", "2", "1"),
        ("standard", "3", "0"), ("standard", "3", "1")]
    # bare uniform preparation: one layer of h gates, no entanglers
    for row in rows:
        if row["mixer"] == "standard" and row["p"] == "0":
            assert row["depth"] == "1"
            assert row["cnot_count"] == "0"
            assert row["total_gates"] == str(2 * int(row["n_assets"]))
    # p=1 rows reproduce the stats of a freshly assembled circuit
    from ternary_qaoa.circuits import circuit_stats
    for row in rows:
        if row["p"] != "1":
            continue
        n = int(row["n_assets"])
        inst = random_instance(n, n // 2, q=1.0 / 3.0,
                               seed=_derived_seed(1234, n))
        engine = engine_for(inst, row["mixer"])
        stats = circuit_stats(engine.full_sequence(
            QaoaParams(gammas=(1.0,), betas=(1.0,))))
        assert row["total_gates"] == str(stats.total_gates)
        assert row["cnot_count"] == str(stats.cnot_count)
        assert row["depth"] == str(stats.depth)


def test_circuit_report_rejects_negative_depth(tmp_path, capsys):
    rc = main(["circuit-report", "--depths", "-1",
               "--out", str(tmp_path / "r.csv")])
    assert rc == 1
    assert "depths must be >= 0" in capsys.readouterr().err
