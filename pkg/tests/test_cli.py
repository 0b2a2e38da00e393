import csv
import io
import math

import pytest

from cvbiloc import cli, closed_form


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr().out
    return code, list(csv.DictReader(io.StringIO(out))), out


def test_sweep_tmsv_endpoints(capsys):
    code, rows, _ = run(capsys, "sweep", "--family", "tmsv", "--range", "L=0:0.99:3",
                        "--route", "all", "--workers", "1")
    assert code == 0 and len(rows) == 3
    assert float(rows[0]["s_max_closed_form"]) == pytest.approx(2.0, abs=1e-12)
    assert float(rows[-1]["s_max_svd"]) == pytest.approx(2 * math.sqrt(1 + 0.99**2), abs=1e-6)
    for row in rows:
        vals = [float(row[f"s_max_{r}"]) for r in ("closed_form", "svd", "grid")]
        assert max(vals) - min(vals) <= 1e-6
        assert int(row["n_max"]) > 0


def test_sweep_output_is_reproducible(capsys, tmp_path):
    argv = ["sweep", "--family", "photon", "--config-label", "all", "--range", "lam=0:0.6:3",
            "--route", "svd", "--workers", "1"]
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(argv + ["--out", str(first)]) == 0
    assert cli.main(argv + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    rows = list(csv.DictReader(io.StringIO(first.read_text())))
    assert len(rows) == 3 * 7
    c2 = [r for r in rows if r["config"] == "C2"]
    assert float(c2[0]["s_max_svd"]) == pytest.approx(2 * math.sqrt(2), abs=1e-10)
    assert float(c2[0]["delta"]) == pytest.approx(math.sqrt(2) - 1, abs=1e-10)


def test_sweep_worker_pool_matches_serial(capsys):
    argv = ["sweep", "--family", "ecs", "--range", "alpha=0.2:2:4", "--route", "closed"]
    _, _, serial = run(capsys, *argv, "--workers", "1")
    _, _, pooled = run(capsys, *argv, "--workers", "2")
    assert serial == pooled


def test_closed_route_leaves_cutoff_columns_empty(capsys):
    _, rows, _ = run(capsys, "sweep", "--family", "werner", "--config-label", "case2",
                     "--range", "p=0.2:0.8:3", "--param", "K=0.5")
    assert rows[0]["n_max"] == "" and rows[0]["tail_mass"] == ""
    assert float(rows[1]["excess"]) == pytest.approx(0.0, abs=1e-12)


def test_verify_passes(capsys):
    code, rows, out = run(capsys, "verify")
    assert code == 0
    assert out.splitlines()[0] == "quantity,family,params,closed,oracle,absdev,pass"
    assert rows and all(r["pass"] == "true" for r in rows)


def test_verify_detects_injected_error(capsys, monkeypatch):
    monkeypatch.setattr(closed_form, "squeezing_k", lambda r: math.tanh(2 * r) * (1 + 1e-6))
    code, rows, _ = run(capsys, "verify", "--family", "tmsv")
    assert code > 0
    assert any(r["pass"] == "false" for r in rows)


def test_sample_reproducible(capsys):
    argv = ["sample", "--family", "tmsv", "--param", "r=0.5", "--shots", "20000", "--seed", "7"]
    _, rows, first = run(capsys, *argv)
    _, _, second = run(capsys, *argv)
    assert first == second
    row = rows[0]
    assert float(row["S_exact"]) == pytest.approx(2 * math.sqrt(1 + math.tanh(1.0) ** 2), abs=1e-9)
    assert abs(float(row["S_hat"]) - float(row["S_exact"])) < 5 * float(row["std_err_S"])


@pytest.mark.parametrize("argv", [
    ["sample", "--family", "tmsv", "--param", "r=0.5", "--shots", "0"],
    ["sweep", "--family", "tmsv", "--range", "r=0:1"],
    ["sweep", "--family", "tmsv", "--range", "r=0:1:1"],
    ["sweep", "--family", "tmsv"],
    ["sweep", "--family", "photon", "--config-label", "Z9", "--range", "lam=0:0.5:2"],
    ["sweep", "--family", "tmsv", "--range", "r=0:1:2", "--route", "fast"],
    ["sample", "--family", "tmsv"],
])
def test_usage_errors_exit_2(argv, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 2


def test_config_file_and_environment_precedence(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# tmsv sweep\nfamily = tmsv\nroute = svd\nnmax = 30\nrange.r = 0.2:0.4:2\n")
    _, rows, _ = run(capsys, "sweep", "--config", str(cfg))
    assert [int(r["n_max"]) for r in rows] == [30, 30]
    monkeypatch.setenv("CV_BILOC_NMAX", "40")
    _, rows, _ = run(capsys, "sweep", "--config", str(cfg))
    assert int(rows[0]["n_max"]) == 40
    _, rows, _ = run(capsys, "sweep", "--config", str(cfg), "--nmax", "35", "--range", "r=0.1:0.3:3")
    assert int(rows[0]["n_max"]) == 35 and len(rows) == 3


def test_info_lists_registry_and_scalars(capsys):
    _, rows, _ = run(capsys, "info")
    assert sum(r["kind"] == "quantity" for r in rows) >= 15
    _, rows, _ = run(capsys, "info", "--family", "ecs", "--param", "alpha=0.5")
    names = {r["name"] for r in rows}
    assert {"Q2", "n_max", "tail_mass"} <= names
