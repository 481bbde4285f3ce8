import json
import os

import numpy as np
import pytest

from votelot.cli import main
from votelot.evalharness import SynthConfig, synth_generate
from votelot.prefdata import Outcome, group_margins_from_json


def write_votes_csv(path, table):
    lines = ["model_a,model_b,winner,group"]
    token = {Outcome.A_WINS: "a", Outcome.B_WINS: "b", Outcome.TIE: "tie"}
    for rec in table.records:
        lines.append(f"{rec.model_a},{rec.model_b},{token[rec.outcome]},{rec.group}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    table = synth_generate(
        SynthConfig(m=4, k=2, cycle_strength=0.5, reversal_pairs=((0, 3),),
                    votes_per_group=300, seed=31, noise=0.1)
    )
    write_votes_csv(root / "votes.csv", table)
    (root / "costs.csv").write_text("model,cost\nm0,1.0\nm1,2.0\nm2,5.0\nm3,0.5\n")
    assert main(["ingest", str(root / "votes.csv"), "-o", str(root / "margins.json"), "--eta", "1"]) == 0
    return root


class TestIngest:
    def test_margins_schema(self, workdir):
        payload = json.loads((workdir / "margins.json").read_text())
        assert set(payload) == {
            "roster", "groups", "matrices", "counts", "votes_per_group", "eta", "tie_policy",
        }
        gm = group_margins_from_json((workdir / "margins.json").read_text())
        assert gm.m == 4 and gm.k == 2 and gm.eta == 1.0

    def test_group_whitelist(self, workdir, tmp_path, capsys):
        out = tmp_path / "filtered.json"
        code = main(["ingest", str(workdir / "votes.csv"), "-o", str(out), "--groups", "g0"])
        assert code == 0
        gm = group_margins_from_json(out.read_text())
        assert gm.groups == ("g0",)

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("model_a,model_b,winner,group\nm1,m1,a,en\n")
        assert main(["ingest", str(bad), "-o", str(tmp_path / "out.json")]) == 2

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["ingest", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "x.json")]) == 2


class TestMl:
    def test_pooled_default(self, workdir, capsys):
        assert main(["ml", str(workdir / "margins.json")]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"roster", "probs", "value", "support", "bipartisan_set"}
        assert sum(payload["probs"]) == pytest.approx(1.0, abs=1e-9)

    def test_group_selector(self, workdir, capsys):
        assert main(["ml", str(workdir / "margins.json"), "--group", "g0"]) == 0
        capsys.readouterr()

    def test_unknown_group(self, workdir):
        assert main(["ml", str(workdir / "margins.json"), "--group", "zz"]) == 2

    def test_weights_pool_first(self, workdir, capsys):
        assert main(["ml", str(workdir / "margins.json"), "--weights", "0.5,0.5"]) == 0
        capsys.readouterr()


class TestDrl:
    def test_report_schema(self, workdir, tmp_path, capsys):
        out = tmp_path / "drl.json"
        assert main(["drl", str(workdir / "margins.json"), "--rho", "0.4", "-o", str(out)]) == 0
        capsys.readouterr()
        payload = json.loads(out.read_text())
        assert set(payload) == {"rho", "w0", "lottery", "robust_value", "duals", "active", "diagnostics"}
        assert payload["rho"] == 0.4
        assert payload["robust_value"] <= 1e-9
        assert set(payload["diagnostics"]) == {
            "per_group_win_rate", "worst_group", "pooled_value",
            "binding_opponent", "worst_case_mixture",
        }
        mixture = payload["diagnostics"]["worst_case_mixture"]
        assert sum(mixture.values()) == pytest.approx(1.0, abs=1e-9)
        if payload["duals"] is not None:
            assert set(payload["duals"]) == {"mu", "lambda", "gamma"}

    def test_rho_zero_matches_ml_value(self, workdir, capsys):
        assert main(["drl", str(workdir / "margins.json"), "--rho", "0"]) == 0
        drl_payload = json.loads(capsys.readouterr().out)
        assert main(["ml", str(workdir / "margins.json")]) == 0
        ml_payload = json.loads(capsys.readouterr().out)
        assert abs(drl_payload["robust_value"] - ml_payload["value"]) <= 1e-7

    def test_rho_auto(self, workdir, capsys):
        assert main(["drl", str(workdir / "margins.json"), "--rho-auto", "--delta", "0.1"]) == 0
        payload = json.loads(capsys.readouterr().out)
        n = 600
        expected = min(1.0, np.sqrt(2 / n) + np.sqrt(2 / n * np.log(2 / 0.1)))
        assert payload["rho"] == pytest.approx(expected, abs=1e-12)

    def test_radius_out_of_range_exit_2(self, workdir, capsys):
        assert main(["drl", str(workdir / "margins.json"), "--rho", "1.5"]) == 2
        capsys.readouterr()

    def test_infeasible_budget_exit_3(self, workdir, capsys):
        code = main(["drl", str(workdir / "margins.json"), "--rho", "0.2",
                     "--budget", "0.1", "--costs", str(workdir / "costs.csv")])
        assert code == 3
        capsys.readouterr()

    def test_budget_binds(self, workdir, capsys):
        assert main(["drl", str(workdir / "margins.json"), "--rho", "0.2",
                     "--budget", "0.8", "--costs", str(workdir / "costs.csv")]) == 0
        payload = json.loads(capsys.readouterr().out)
        probs = payload["lottery"]["probs"]
        cost = probs[0] * 1.0 + probs[1] * 2.0 + probs[2] * 5.0 + probs[3] * 0.5
        assert cost <= 0.8 + 1e-9


class TestSweepFrontierRegret:
    def test_sweep_outputs(self, workdir, tmp_path, capsys):
        prefix = str(tmp_path / "sw")
        code = main(["sweep", str(workdir / "votes.csv"), "--out-prefix", prefix,
                     "--grid", "0,0.5,1", "--bootstrap", "3", "--seed", "4", "--figures"])
        assert code == 0
        capsys.readouterr()
        rows = (tmp_path / "sw_sweep.csv").read_text().splitlines()
        assert rows[0] == "rho,split,series,mean,stderr"
        # one row per (rho, split, series): 3 radii x 2 splits x (overall, worst, 2 groups)
        assert len(rows) - 1 == 3 * 2 * 4
        assert os.path.exists(prefix + "_sweep.json")
        assert os.path.exists(prefix + "_sweep.png")

    def test_sweep_byte_identical_rerun(self, workdir, tmp_path, capsys):
        args = ["sweep", str(workdir / "votes.csv"), "--grid", "0,1",
                "--bootstrap", "2", "--seed", "9", "--figures"]
        p1, p2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(args + ["--out-prefix", p1]) == 0
        assert main(args + ["--out-prefix", p2]) == 0
        capsys.readouterr()
        for suffix in ("_sweep.csv", "_sweep.json", "_sweep.png"):
            with open(p1 + suffix, "rb") as fa, open(p2 + suffix, "rb") as fb:
                assert fa.read() == fb.read(), suffix

    def test_frontier_outputs(self, workdir, tmp_path, capsys):
        prefix = str(tmp_path / "fr")
        code = main(["frontier", str(workdir / "margins.json"),
                     "--costs", str(workdir / "costs.csv"),
                     "--budgets", "0.4,0.75,1.5,5", "--rho", "1.0",
                     "--out-prefix", prefix, "--figures"])
        assert code == 0
        capsys.readouterr()
        rows = (tmp_path / "fr_frontier.csv").read_text().splitlines()
        header = rows[0].split(",")
        assert header[:4] == ["budget", "feasible", "worst_case_win_rate", "expected_cost"]
        assert header[4:] == ["p:m0", "p:m1", "p:m2", "p:m3"]
        assert len(rows) - 1 == 4
        first = rows[1].split(",")
        assert first[1] == "0"  # budget 0.4 below min cost
        values = [float(r.split(",")[2]) for r in rows[2:]]
        for lo, hi in zip(values, values[1:]):
            assert hi >= lo - 1e-7
        assert os.path.exists(prefix + "_frontier.png")

    def test_regret_outputs(self, workdir, tmp_path, capsys):
        prefix = str(tmp_path / "rg")
        code = main(["regret-sim", str(workdir / "margins.json"), "--n", "300",
                     "--delta", "0.2", "--trials", "10", "--seed", "1",
                     "--w-star", "0.6,0.4", "--out-prefix", prefix])
        assert code == 0
        out = capsys.readouterr().out
        assert "coverage" in out
        rows = (tmp_path / "rg_regret.csv").read_text().splitlines()
        assert rows[0] == "trial,rho,regret,covered,bound"
        assert len(rows) - 1 == 10
        summary = json.loads((tmp_path / "rg_regret.json").read_text())
        assert summary["coverage_fraction"] >= 0.8


class TestReport:
    def test_report_artifacts(self, workdir, tmp_path, capsys):
        prefix = str(tmp_path / "rep")
        code = main(["report", str(workdir / "votes.csv"), "--out-prefix", prefix,
                     "--grid", "0,0.5,1", "--bootstrap", "3", "--seed", "2",
                     "--costs", str(workdir / "costs.csv")])
        assert code == 0
        out = capsys.readouterr().out
        assert "reversal" in out
        for suffix in ("_summary.json", "_reversals.csv", "_lotteries.csv", "_sweep.csv",
                       "_frontier.csv", "_sweep.png", "_lotteries.png", "_reversals.png",
                       "_frontier.png"):
            assert os.path.exists(prefix + suffix), suffix
        summary = json.loads((tmp_path / "rep_summary.json").read_text())
        assert summary["models"] == 4
        assert summary["groups"] == ["g0", "g1"]
        rev = (tmp_path / "rep_reversals.csv").read_text().splitlines()
        assert rev[0] == "model_a,model_b,reversal_rate"
        rates = [float(r.split(",")[2]) for r in rev[1:]]
        assert rates == sorted(rates, reverse=True)
        # the planted reversal pair is fully contested
        planted = [r for r in rev[1:] if r.startswith("m0,m3")]
        assert planted and planted[0].endswith("1.0")

    def test_report_deterministic(self, workdir, tmp_path, capsys):
        args = ["report", str(workdir / "votes.csv"), "--grid", "0,1",
                "--bootstrap", "2", "--seed", "3"]
        p1, p2 = str(tmp_path / "r1"), str(tmp_path / "r2")
        assert main(args + ["--out-prefix", p1]) == 0
        assert main(args + ["--out-prefix", p2]) == 0
        capsys.readouterr()
        for suffix in ("_summary.json", "_reversals.csv", "_lotteries.csv", "_sweep.csv"):
            with open(p1 + suffix, "rb") as fa, open(p2 + suffix, "rb") as fb:
                assert fa.read() == fb.read(), suffix


class TestHelp:
    def test_help_lists_commands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for cmd in ("ingest", "ml", "drl", "sweep", "frontier", "regret-sim", "report"):
            assert cmd in out

    def test_subcommand_help_documents_flags(self, capsys):
        with pytest.raises(SystemExit):
            main(["sweep", "--help"])
        out = capsys.readouterr().out
        for flag in ("--grid", "--bootstrap", "--seed", "--opponent", "--stratified", "--figures"):
            assert flag in out
