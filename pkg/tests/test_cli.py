import json

import numpy as np
import pytest
from click.testing import CliRunner

from netrec import __version__
from netrec.cli import main, parse_config_text
from netrec.metrics import read_table

from .conftest import random_links


@pytest.fixture
def ratings(tmp_path):
    rng = np.random.default_rng(0)
    links = random_links(1, 40, 30, 0.35)
    lines = [f"{u + 1}\t{a + 1}\t{int(rng.integers(1, 6))}\t{880000000 + k}" for k, (u, a) in enumerate(links)]
    p = tmp_path / "ratings.tsv"
    p.write_text("\n".join(lines) + "\n")
    return p


def _run(args):
    res = CliRunner().invoke(main, args, catch_exceptions=False)
    return res


class TestEval:
    def test_writes_table_and_manifest(self, ratings, tmp_path):
        out = tmp_path / "r1"
        res = _run(["eval", "--data", str(ratings), "--methods", "ProbS,HeatS,Zhou2008", "--L", "5",
                    "--grid", "theta=-1:1:0.5", "--markdown", "--out", str(out)])
        assert res.exit_code == 0, res.output
        reports = read_table((out / "results.tsv").read_text())
        assert [r.method for r in reports] == ["ProbS", "HeatS", "Zhou2008"]
        assert reports[2].n_params == 1 and reports[2].params.startswith("theta=")
        man = json.loads((out / "manifest.json").read_text())
        assert man["version"] == __version__ and len(man["dataset_sha256"]) == 64
        assert man["config"]["grid"] == {"theta": [-1.0, 1.0, 0.5]}
        assert "**" in (out / "results.md").read_text()

    def test_manifest_replay_is_identical(self, ratings, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        _run(["eval", "--data", str(ratings), "--methods", "ProbS-HeatS", "--L", "5", "--seeds", "0,1",
              "--grid", "lambda=0:1:0.25", "--out", str(a)])
        res = _run(["eval", "--config", str(a / "manifest.json"), "--out", str(b)])
        assert res.exit_code == 0, res.output
        assert (a / "results.tsv").read_bytes() == (b / "results.tsv").read_bytes()

    def test_key_value_config(self, ratings, tmp_path):
        cfg = tmp_path / "run.cfg"
        out = tmp_path / "kv"
        cfg.write_text(f"# comment\ndata = {ratings}\nmethods = ProbS, Zhou2009\nL = 4\nseeds = 3\n"
                       f"grid.eta = -1:0:0.5\nrank-normalization = catalogue\nout = {out}\n")
        res = _run(["eval", "--config", str(cfg)])
        assert res.exit_code == 0, res.output
        man = json.loads((out / "manifest.json").read_text())
        assert man["config"]["seeds"] == [3] and man["config"]["L"] == 4
        assert man["config"]["rank_normalization"] == "catalogue"

    def test_empty_methods_gives_header_only(self, ratings, tmp_path):
        out = tmp_path / "e"
        assert _run(["eval", "--data", str(ratings), "--methods", "", "--out", str(out)]).exit_code == 0
        assert len((out / "results.tsv").read_text().splitlines()) == 1

    def test_unknown_method_lists_valid_names(self, ratings, tmp_path):
        res = CliRunner().invoke(main, ["eval", "--data", str(ratings), "--methods", "Bogus", "--out", str(tmp_path)])
        assert res.exit_code != 0 and "ProbS-HeatS" in res.output

    def test_missing_data(self, tmp_path):
        res = CliRunner().invoke(main, ["eval", "--out", str(tmp_path)])
        assert res.exit_code != 0 and "no dataset" in res.output

    def test_unknown_config_key(self, ratings, tmp_path):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"data": str(ratings), "colour": "blue"}))
        res = CliRunner().invoke(main, ["eval", "--config", str(cfg)])
        assert res.exit_code != 0 and "colour" in res.output


class TestCrowd:
    def test_sweep_and_replay(self, ratings, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        args = ["crowd", "--data", str(ratings), "--method", "ProbS", "--m", "2,5,inf", "--solvers", "mpo,loc,ha",
                "--subset-items", "0", "--min-rating", "0", "--macro-cap", "20", "--out", str(a)]
        res = _run(args)
        assert res.exit_code == 0, res.output
        lines = (a / "crowd.tsv").read_text().splitlines()
        assert lines[0] == "m\tsolver\tobjective\tprecision\tn_eff\tseed"
        assert {ln.split("\t")[1] for ln in lines[1:]} == {"mpo", "local", "hungarian"}
        man = json.loads((a / "manifest.json").read_text())
        assert man["config"]["m"] == [2, 5, "inf"]
        assert set(man["gains"]["0"]) == {"mpo", "local", "hungarian"}
        _run(["crowd", "--config", str(a / "manifest.json"), "--out", str(b)])
        assert (a / "crowd.tsv").read_bytes() == (b / "crowd.tsv").read_bytes()

    def test_bad_m(self, ratings, tmp_path):
        res = CliRunner().invoke(main, ["crowd", "--data", str(ratings), "--m", "two", "--out", str(tmp_path)])
        assert res.exit_code != 0


class TestReportInspect:
    def test_report(self, tmp_path):
        t = tmp_path / "results.tsv"
        t.write_text("method\tn_params\tparams\tr\tP@50\tR@50\tI@50\tD@50\tN@50\n"
                     "ProbS\t0\t-\t0.094\t0.073\t0.47\t0.35\t0.62\t231.0\n"
                     "HeatS\t0\t-\t0.136\t0.022\t0.1\t0.1\t0.86\t24.7\n")
        res = _run(["report", str(t)])
        assert res.exit_code == 0
        assert "**0.0940**" in res.output and "**24.7**" in res.output and "**0.8600**" in res.output

    def test_report_rejects_other_files(self, tmp_path):
        t = tmp_path / "x.tsv"
        t.write_text("a\tb\n")
        assert CliRunner().invoke(main, ["report", str(t)]).exit_code != 0

    def test_inspect(self, ratings):
        res = _run(["inspect", "--data", str(ratings), "--min-rating", "0"])
        header, row = res.output.splitlines()
        assert header.startswith("dataset\tU\tI\tL")
        assert row.split("\t")[1:3] == ["40", "30"]

    def test_version(self):
        assert __version__ in _run(["--version"]).output


def test_parse_config_text():
    cfg = parse_config_text("L = 20\nseeds = 1,2\nmethods = ProbS\ngrid.theta = 0:1:0.5\nmarkdown = true\n")
    assert cfg == {"L": 20, "seeds": [1, 2], "methods": ["ProbS"], "grid": {"theta": [0.0, 1.0, 0.5]},
                   "markdown": True}
