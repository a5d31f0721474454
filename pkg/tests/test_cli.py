import csv
import io
import json

import pytest

from vanet_twohop import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestAnalytic:
    def test_header(self, capsys):
        code, out, _ = run(capsys, "analytic", "--rho", "1")
        assert code == 0
        assert out.splitlines()[0] == ",".join(cli.ANALYTIC_COLUMNS)

    def test_zero_row(self, capsys):
        _, out, _ = run(capsys, "analytic", "--rho", "0")
        row = rows(out)[0]
        for col in ("rho_eff", "series", "quadrature", "dense_asymptotic", "sparse_asymptotic",
                    "value", "mean_degree"):
            assert float(row[col]) == 0.0

    def test_busy_hour_row(self, capsys):
        _, out, _ = run(capsys, "analytic", "--rho", "0.0604", "--beta", "1.146e-4")
        row = rows(out)[0]
        assert round(float(row["value"]), 2) == 24.60
        assert row["method"] == "series"

    def test_grid_monotone(self, capsys):
        _, out, _ = run(capsys, "analytic", "--rho-range", "0.1", "50", "100")
        values = [float(r["value"]) for r in rows(out)]
        assert len(values) == 100
        assert all(a < b for a, b in zip(values, values[1:]))

    def test_comma_and_repeat(self, capsys):
        _, out, _ = run(capsys, "analytic", "--rho", "1,2", "--rho", "3")
        assert [float(r["rho"]) for r in rows(out)] == [1.0, 2.0, 3.0]

    def test_series_refusal_exit_code(self, capsys):
        code, _, err = run(capsys, "analytic", "--rho", "20", "--method", "series")
        assert code == 3
        assert "error" in err

    def test_auto_switches_to_quadrature(self, capsys):
        _, out, _ = run(capsys, "analytic", "--rho", "20")
        row = rows(out)[0]
        assert row["method"] == "quadrature" and row["series"] == ""

    def test_invalid_input(self, capsys):
        assert run(capsys, "analytic", "--rho", "-1")[0] == 2
        assert run(capsys, "analytic", "--rho", "1", "--beta", "0")[0] == 2
        assert run(capsys, "analytic")[0] == 2

    def test_json(self, capsys, tmp_path):
        path = tmp_path / "a.json"
        assert run(capsys, "analytic", "--rho", "1", "--format", "json", "--out", str(path))[0] == 0
        data = json.loads(path.read_text())
        assert data["schema"] == cli.SCHEMA
        assert data["rows"][0]["value"] == pytest.approx(2.1196858083421468)


class TestSimulate:
    def test_header_and_deterministic(self, capsys):
        argv = ("simulate", "--rho", "2", "--runs", "300", "--seed", "4")
        _, a, _ = run(capsys, *argv)
        _, b, _ = run(capsys, *argv)
        assert a == b
        assert a.splitlines()[0] == ",".join(cli.SIMULATE_COLUMNS)

    def test_env_seed(self, capsys, monkeypatch):
        argv = ("simulate", "--rho", "2", "--runs", "200")
        monkeypatch.setenv(cli.SEED_ENV, "11")
        _, env_out, _ = run(capsys, *argv)
        _, flag_out, _ = run(capsys, *argv, "--seed", "11")
        _, other, _ = run(capsys, *argv, "--seed", "12")
        assert env_out == flag_out
        assert other != flag_out

    def test_json_pmf(self, capsys):
        _, out, _ = run(capsys, "simulate", "--rho", "1", "--runs", "200", "--format", "json")
        row = json.loads(out)["rows"][0]
        assert sum(row["pmf"]["masses"]) == pytest.approx(1.0)
        assert row["runs"] == 200

    def test_general_eta_has_no_reference(self, capsys):
        _, out, _ = run(capsys, "simulate", "--rho", "1", "--runs", "100", "--eta", "4")
        assert rows(out)[0]["analytic_mean"] == ""


class TestTraces:
    def test_gen_traces_defaults(self, capsys):
        code, out, _ = run(capsys, "gen-traces", "--count", "2")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == ",".join(("time_s", "vehicle_id", "position_m", "lane"))
        assert len(lines) == 1 + 2 * 604

    def test_trace_from_file(self, capsys, tmp_path):
        path = tmp_path / "t.csv"
        assert run(capsys, "gen-traces", "--count", "3", "--seed", "2", "--out", str(path))[0] == 0
        argv = ("trace", "--trace-file", str(path), "--beta", "1.146e-4,1.834e-5",
                "--snapshots", "last:2", "--configs", "30")
        code, out, _ = run(capsys, *argv)
        assert code == 0
        table = rows(out)
        assert out.splitlines()[0] == ",".join(cli.TRACE_COLUMNS)
        assert [int(r["runs"]) for r in table] == [60, 60]
        assert [int(r["snapshots"]) for r in table] == [2, 2]
        assert run(capsys, *argv)[1] == out

    def test_trace_json_overlay(self, capsys):
        _, out, _ = run(capsys, "trace", "--rho", "0.0604", "--count", "1", "--snapshots", "all",
                        "--beta", "1.146e-4", "--configs", "40", "--format", "json")
        row = json.loads(out)["rows"][0]
        assert len(row["overlay"]["x"]) == len(row["overlay"]["pdf"])
        assert len(row["intensities"]) == 1

    def test_parse_error_reports_line(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time_s,vehicle_id,position_m,lane\n0,a,1,1\n0,b,oops,1\n")
        code, _, err = run(capsys, "trace", "--trace-file", str(path), "--beta", "1e-4")
        assert code == 2
        assert "line 3" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "trace", "--trace-file", str(tmp_path / "nope.csv"),
                         "--beta", "1e-4")
        assert code == 2
