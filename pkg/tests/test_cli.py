import json
import math

import pytest

from zipbf.cli import main, read_counts, read_regression_csv
from zipbf.errors import InputError

UTI_LINES = ["count"] + ["0"] * 81 + ["1"] * 9 + ["2"] * 7 + ["3"]


@pytest.fixture
def write(tmp_path):
    def _write(name, lines):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return str(path)

    return _write


def run(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, argv):
    code, out, err = run(capsys, argv)
    assert code == 0, err
    return json.loads(out)


class TestCountsFile:
    def test_comments_and_header(self, write):
        path = write("c.txt", ["# clinic A", "count", "", "0", "2", "# trailing", "1"])
        assert read_counts(path) == [0, 2, 1]

    @pytest.mark.parametrize("lines,where", [(["0", "x", "1"], "line 2"), (["count", "1", "-2"], "line 3"),
                                             (["1", "2.5"], "line 2")])
    def test_bad_lines(self, write, lines, where):
        with pytest.raises(InputError, match=where):
            read_counts(write("c.txt", lines))

    def test_empty(self, write):
        with pytest.raises(InputError):
            read_counts(write("c.txt", ["# nothing", "count"]))


class TestRegressionFile:
    def test_columns(self, write):
        path = write("r.csv", ["count,offset,x1,x2", "0,0.5,1,2", "3,0.0,-1,4"])
        counts, X, offsets, names = read_regression_csv(path, intercept=True)
        assert counts.tolist() == [0, 3] and offsets.tolist() == [0.5, 0.0]
        assert names == ["(intercept)", "x1", "x2"] and X.shape == (2, 3)

    @pytest.mark.parametrize("lines,msg", [
        (["x1,x2", "1,2"], "count"),
        (["count,x1", "1,2,3"], "line 2"),
        (["count,x1", "1,2", "a,3"], "line 3"),
        (["count,x1", "-1,2"], "line 2"),
        (["count,x1", "1.5,2"], "line 2"),
        (["count,x1", "1,inf"], "line 2"),
    ])
    def test_bad_rows(self, write, lines, msg):
        with pytest.raises(InputError, match=msg):
            read_regression_csv(write("r.csv", lines))

    def test_needs_covariates(self, write):
        with pytest.raises(InputError, match="intercept"):
            read_regression_csv(write("r.csv", ["count", "1", "0"]))


class TestTestCommand:
    def test_uti_json(self, capsys, write):
        rep = run_json(capsys, ["test", write("uti.txt", UTI_LINES)])
        assert rep["bf10"] == pytest.approx(223.12676544057801, rel=1e-12)
        assert (rep["n"], rep["k"], rep["s"]) == (98, 81, 26)
        assert rep["post_prob_m1"] + rep["post_prob_m0"] == pytest.approx(1.0)
        assert rep["method"] == "closed_form" and rep["prior"] == "jeffreys0"

    def test_text(self, capsys, write):
        code, out, _ = run(capsys, ["test", write("uti.txt", UTI_LINES), "--format", "text"])
        assert code == 0
        assert "B10 = 223.127" in out and "Pr(M1|x) = 0.996" in out and "Pr(M0|x) = 0.004" in out

    def test_prior_odds(self, capsys, write):
        rep = run_json(capsys, ["test", write("uti.txt", UTI_LINES), "--prior-odds", "0.01"])
        assert rep["post_prob_m1"] == pytest.approx(2.2312676544 / 3.2312676544, rel=1e-9)

    def test_all_zeros_notice(self, capsys, write):
        rep = run_json(capsys, ["test", write("z.txt", ["0", "0", "0"])])
        assert rep["bf10"] == pytest.approx(25 / 12, rel=1e-14)
        assert rep["method"] == "all_zeros" and rep["prior"] == "gamma:1,1"
        assert "Exponential(1)" in rep["notices"][0]

    def test_all_zeros_custom_gamma(self, capsys, write):
        rep = run_json(capsys, ["test", write("z.txt", ["0", "0"]), "--prior", "gamma:2,0.5"])
        assert rep["prior"] == "gamma:2,0.5" and rep["notices"] == []

    @pytest.mark.parametrize("prior,method", [("jeffreys1", "quadrature_l1"), ("gamma:1,1", "gamma_closed_form")])
    def test_other_priors(self, capsys, write, prior, method):
        rep = run_json(capsys, ["test", write("c.txt", ["0", "1"]), "--prior", prior])
        assert rep["method"] == method
        if prior.startswith("gamma"):
            assert rep["bf10"] == pytest.approx(17 / 24, rel=1e-13)

    @pytest.mark.parametrize("argv", [["--prior", "j1"], ["--prior", "bogus"], ["--prior-odds", "0"]])
    def test_bad_options(self, capsys, write, argv):
        code, _, err = run(capsys, ["test", write("c.txt", ["0", "1"])] + argv)
        assert code == 2 and err.startswith("error:")

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, ["test", str(tmp_path / "nope.txt")])[0] == 2

    def test_unknown_flag(self, capsys, write):
        with pytest.raises(SystemExit) as exc:
            main(["test", write("c.txt", ["1"]), "--frobnicate"])
        assert exc.value.code == 2


CONE_VIOLATION = ["count,x1,x2", "0,-5,1", "2,1,0", "1,0,1"]
SYMMETRIC = ["count,x1,x2", "0,1,0", "0,0,1", "1,1,1", "2,1,1"]


class TestRegressionCommands:
    def test_intercept_only(self, capsys, write):
        rep = run_json(capsys, ["test-reg", write("ic.csv", ["count", "0", "1", "2"]), "--intercept"])
        assert rep["bf10"] == pytest.approx(0.59445949507888442, rel=1e-8)
        assert rep["prior"] == "j1" and rep["backend"] == "quadrature" and rep["seed"] == 0

    def test_j0_refused(self, capsys, write):
        code, out, err = run(capsys, ["test-reg", write("r.csv", CONE_VIOLATION), "--prior", "j0"])
        assert code == 3 and out == "" and "row(s) 1" in err

    def test_j0_forced(self, capsys, write):
        rep = run_json(capsys, ["test-reg", write("r.csv", CONE_VIOLATION), "--prior", "j0", "--force"])
        assert rep["bf10"] == math.inf
        assert any("divergence diagnostic fired" in w for w in rep["warnings"])

    def test_check(self, capsys, write):
        code, out, _ = run(capsys, ["check", write("r.csv", CONE_VIOLATION), "--format", "text"])
        assert code == 0
        assert "violated at row 1" in out and "recommended: j1 prior" in out

    def test_partial_routing(self, capsys, write):
        rep = run_json(capsys, ["test-reg", write("s.csv", SYMMETRIC), "--prior", "j1", "--enumerate-selections"])
        assert rep["prior"] == "partial" and rep["method"] == "rank_deficient"
        assert "using the partial prior" in rep["warnings"][0]
        assert [s["l_set"] for s in rep["selections"]] == [[1], [2]]
        assert rep["selections"][0]["log_bf10"] == pytest.approx(rep["selections"][1]["log_bf10"], abs=1e-8)

    def test_partial_on_full_rank(self, capsys, write):
        assert run(capsys, ["test-reg", write("r.csv", CONE_VIOLATION), "--prior", "partial"])[0] == 2

    def test_seed_from_environment(self, capsys, write, monkeypatch):
        monkeypatch.setenv("ZIPBF_SEED", "99")
        path = write("ic.csv", ["count", "0", "1", "2"])
        rep = run_json(capsys, ["test-reg", path, "--intercept", "--backend", "mc"])
        assert rep["seed"] == 99 and rep["method"] == "regression_mc"
        assert run_json(capsys, ["test-reg", path, "--intercept", "--backend", "mc", "--seed", "5"])["seed"] == 5
        monkeypatch.setenv("ZIPBF_SEED", "abc")
        assert run(capsys, ["test-reg", path, "--intercept"])[0] == 2

    def test_repeatable_output(self, capsys, write):
        argv = ["test-reg", write("s.csv", SYMMETRIC), "--backend", "mc", "--seed", "17"]
        assert run(capsys, argv)[1] == run(capsys, argv)[1]

    def test_text_report(self, capsys, write):
        code, out, _ = run(capsys, ["test-reg", write("s.csv", SYMMETRIC), "--enumerate-selections",
                                    "--format", "text"])
        assert code == 0
        assert "rows [1]" in out and "arithmetic mean B10" in out and "recommended partial" in out
